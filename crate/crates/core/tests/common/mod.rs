#![allow(dead_code)]

use freesub::freeconv::{free_convolve, subordinator};
use freesub::measures::{GridSpec, Measure};
use freesub::transforms::{cauchy, f_transform, safe_radius, voiculescu};
use freesub::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn random_compact<R: Rng>(rng: &mut R) -> Measure {
    match rng.gen_range(0..3) {
        0 => {
            let r = rng.gen_range(0.5..3.0);
            Measure::semicircle(r + rng.gen_range(0.0..2.0), r).unwrap()
        }
        1 => Measure::free_poisson(rng.gen_range(1.2..4.0)).unwrap(),
        _ => {
            let lo = rng.gen_range(0.0..2.0);
            Measure::uniform(lo, lo + rng.gen_range(0.3..3.0)).unwrap()
        }
    }
}

pub fn random_heavy<R: Rng>(rng: &mut R) -> Measure {
    match rng.gen_range(0..3) {
        0 => Measure::pareto(rng.gen_range(0.3..3.0), rng.gen_range(0.5..2.0)).unwrap(),
        1 => Measure::frechet(rng.gen_range(0.5..3.0)).unwrap(),
        _ => Measure::log_perturbed_pareto(rng.gen_range(0.3..2.5), rng.gen_range(0.5..3.0), rng.gen_range(0.5..2.0))
            .unwrap(),
    }
}

pub fn random_measure<R: Rng>(rng: &mut R) -> Measure {
    if rng.gen_bool(0.5) {
        random_compact(rng)
    } else {
        random_heavy(rng)
    }
}

/// `z` in `|Re z| < eta Im z` with `Im z` log-uniform in `[lo, hi]`.
pub fn cone_point<R: Rng>(rng: &mut R, eta: f64, lo: f64, hi: f64) -> C64 {
    let y = (rng.gen_range(lo.ln()..hi.ln())).exp();
    C64::new(eta * y * rng.gen_range(-0.999..0.999), y)
}

pub fn check_ranges<R: Rng>(mu: &Measure, rng: &mut R, points: usize) -> Result<(), String> {
    for eta in [0.5, 1.0, 2.0] {
        for _ in 0..points {
            let z = cone_point(rng, eta, 0.5, 1e4);
            let g = cauchy(mu, z).map_err(|e| format!("{}: G({z}) {e}", mu.label()))?;
            let f = f_transform(mu, z).map_err(|e| format!("{}: F({z}) {e}", mu.label()))?;
            if !(g.im < 0.0 && f.im > 0.0) {
                return Err(format!("{}: G({z}) = {g}, F = {f}", mu.label()));
            }
        }
    }
    Ok(())
}

pub fn check_tail<R: Rng>(mu: &Measure, rng: &mut R) -> Result<(), String> {
    let mut ys: Vec<f64> = (0..12).map(|_| rng.gen_range(-3.0f64..6.0).exp()).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t: Vec<f64> = ys.iter().map(|y| mu.tail(*y)).collect();
    if !(mu.tail(0.0) <= 1.0) || t.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(format!("{}: tail outside [0, 1]: {t:?}", mu.label()));
    }
    if t.windows(2).any(|w| w[1] > w[0]) {
        return Err(format!("{}: tail increases on {ys:?}: {t:?}", mu.label()));
    }
    Ok(())
}

pub fn check_subordination<R: Rng>(mu: &Measure, nu: &Measure, rng: &mut R) -> Result<(), String> {
    let z = C64::new(rng.gen_range(-2.0..10.0), (rng.gen_range(0.2f64..5.0).ln()).exp());
    let tol = 1e-10;
    let s = subordinator(mu, nu, z, tol).map_err(|e| format!("{} / {} at {z}: {e}", mu.label(), nu.label()))?;
    let fm = f_transform(mu, s.w1).map_err(|e| e.to_string())?;
    let fn_ = f_transform(nu, s.w2).map_err(|e| e.to_string())?;
    let scale = 1e-8 * z.norm().max(1.0);
    if (fm - fn_).norm() > scale || (s.w1 + s.w2 - fm - z).norm() > scale {
        return Err(format!(
            "{} / {} at {z}: F_mu(w1) - F_nu(w2) = {:.2e}, w1 + w2 - F - z = {:.2e}",
            mu.label(),
            nu.label(),
            (fm - fn_).norm(),
            (s.w1 + s.w2 - fm - z).norm()
        ));
    }
    if s.w1.im < z.im - scale || s.w2.im < z.im - scale {
        return Err(format!("{} / {} at {z}: subordinator left Im w >= Im z", mu.label(), nu.label()));
    }
    Ok(())
}

fn variance(m: &Measure) -> f64 {
    m.moment(2) - m.moment(1).powi(2)
}

/// Mass, mean and variance conservation plus additivity of `phi` for a
/// compactly supported pair.
pub fn check_conservation(mu: &Measure, nu: &Measure) -> Result<(), String> {
    let tag = format!("{} + {}", mu.label(), nu.label());
    let r = free_convolve(mu, nu, &GridSpec::default()).map_err(|e| format!("{tag}: {e}"))?;
    let m = &r.measure;
    if r.mass_defect > 1e-4 {
        return Err(format!("{tag}: mass defect {:.2e}", r.mass_defect));
    }
    let mean = mu.moment(1) + nu.moment(1);
    if rel(m.moment(1), mean) > 1e-3 {
        return Err(format!("{tag}: mean {} vs {mean}", m.moment(1)));
    }
    let var = variance(mu) + variance(nu);
    if rel(variance(m), var) > 1e-2 {
        return Err(format!("{tag}: variance {} vs {var}", variance(m)));
    }
    let y = 3.0 * safe_radius(m).max(safe_radius(mu)).max(safe_radius(nu));
    for w in [C64::new(0.3 * y, y), C64::new(0.0, 10.0 * y)] {
        let phi = |x: &Measure| voiculescu(x, w, 0).map(|v| v.phi).map_err(|e| format!("{tag}: phi at {w}: {e}"));
        let (a, b, c) = (phi(m)?, phi(mu)?, phi(nu)?);
        if (a - b - c).norm() > 1e-4 * b.norm() {
            return Err(format!("{tag}: phi not additive at {w}: {a} vs {}", b + c));
        }
    }
    Ok(())
}

/// One randomized draw of every property; the error names the first failure.
pub fn check_draw(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = random_measure(&mut rng);
    check_tail(&mu, &mut rng)?;
    check_ranges(&mu, &mut rng, 2)?;
    let nu = random_compact(&mut rng);
    check_subordination(&mu, &nu, &mut rng)?;
    let other = random_compact(&mut rng);
    check_conservation(&nu, &other)
}

/// Failures among `draws` consecutive seeds starting at `seed`.
pub fn property_suite(seed: u64, draws: u64) -> Vec<(u64, String)> {
    (seed..seed + draws).filter_map(|s| check_draw(s).err().map(|e| (s, e))).collect()
}

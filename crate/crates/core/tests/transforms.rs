mod common;

use std::f64::consts::{PI, SQRT_2};

use common::{check_ranges, cone_point};
use freesub::freeconv::subordinator;
use freesub::measures::Measure;
use freesub::transforms::*;
use freesub::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn iy(y: f64) -> C64 {
    C64::new(0.0, y)
}

#[test]
fn half_plane_mapping() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for m in [
        Measure::pareto(0.5, 1.0).unwrap(),
        Measure::pareto(1.5, 1.0).unwrap(),
        Measure::log_perturbed_pareto(1.0, 2.0, 1.0).unwrap(),
        Measure::frechet(1.0).unwrap(),
        Measure::semicircle(2.0, 2.0).unwrap(),
        Measure::free_poisson(1.5).unwrap(),
        Measure::uniform(0.0, 1.0).unwrap(),
    ] {
        check_ranges(&m, &mut rng, 334).unwrap();
    }
}

#[test]
fn semicircle_closed_form() {
    let s = Measure::semicircle(2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let z = cone_point(&mut rng, 2.0, 0.05, 100.0);
        let u = z - 2.0;
        let mut exact = (u - (u * u - 4.0).sqrt()) / 2.0;
        if exact.im > 0.0 {
            exact = (u + (u * u - 4.0).sqrt()) / 2.0;
        }
        let g = cauchy(&s, z).unwrap();
        assert!((g - exact).norm() < 1e-9 * exact.norm(), "{z}: {g} vs {exact}");
    }
}

#[test]
fn point_mass_transforms() {
    let d = Measure::point_mass(3.0).unwrap();
    let z = C64::new(1.0, 2.0);
    assert!((cauchy(&d, z).unwrap() - 1.0 / (z - 3.0)).norm() < 1e-15);
    assert!((f_transform(&d, z).unwrap() - (z - 3.0)).norm() < 1e-14);
    let v = voiculescu(&d, iy(50.0), 0).unwrap();
    assert!((v.phi - 3.0).norm() < 1e-10);
}

#[test]
fn decay_at_infinity() {
    for m in [
        Measure::pareto(1.5, 1.0).unwrap(),
        Measure::log_perturbed_pareto(1.0, 2.0, 1.0).unwrap(),
        Measure::frechet(1.5).unwrap(),
        Measure::uniform(0.0, 3.0).unwrap(),
        Measure::semicircle(2.0, 1.0).unwrap(),
        Measure::free_poisson(2.0).unwrap(),
    ] {
        for theta in [PI / 2.0, PI / 3.0, PI / 4.0] {
            let z = C64::from_polar(1e5, theta);
            let d = (z * cauchy(&m, z).unwrap() - 1.0).norm();
            assert!(d < 1e-3, "{} at {z}: {d}", m.label());
        }
    }
    // without a mean the decay is only |z|^-alpha
    let m = Measure::pareto(0.5, 1.0).unwrap();
    let d: Vec<f64> = [1e2, 1e3, 1e4, 1e5].iter().map(|y| (iy(*y) * cauchy(&m, iy(*y)).unwrap() - 1.0).norm()).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0] && (w[0] / w[1] / 10f64.sqrt() - 1.0).abs() < 0.05), "{d:?}");
}

#[test]
fn remainder_dominates_reciprocal() {
    for m in [
        Measure::pareto(0.5, 1.0).unwrap(),
        Measure::pareto(1.5, 1.0).unwrap(),
        Measure::log_perturbed_pareto(1.0, 2.0, 1.0).unwrap(),
    ] {
        let p = m.moment_order().unwrap();
        let a = (iy(1e2) * remainder_g(&m, p, iy(1e2)).unwrap()).norm();
        let b = (iy(1e5) * remainder_g(&m, p, iy(1e5)).unwrap()).norm();
        assert!(b >= 10.0 * a, "{}: {a} -> {b}", m.label());
    }
}

#[test]
fn remainder_upper_bound_boundary_case() {
    let m = Measure::pareto(2.0, 1.0).unwrap();
    let ys = log_schedule(1e4, 1e5, 5);
    let v: Vec<f64> = ys.iter().map(|y| remainder_g(&m, 1, iy(*y)).unwrap().norm() * y.powf(0.25)).collect();
    assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
}

#[test]
fn remainder_forms_agree() {
    for (m, p) in [(Measure::pareto(1.5, 1.0).unwrap(), 1), (Measure::pareto(2.5, 1.0).unwrap(), 2)] {
        for y in [30.0, 1e3] {
            let a = remainder_g(&m, p, iy(y)).unwrap();
            let b = remainder_g_subtraction(&m, p, iy(y)).unwrap();
            assert!((a - b).norm() < 1e-6 * a.norm(), "{} y={y}: {a} vs {b}", m.label());
        }
    }
}

#[test]
fn phi_first_order_identity() {
    let m = Measure::pareto(0.5, 1.0).unwrap();
    let z = iy(1e4);
    let phi = voiculescu(&m, z, 0).unwrap().phi;
    let g = cauchy(&m, z).unwrap();
    let r = phi / (z * z * (g - 1.0 / z));
    assert!((r - 1.0).norm() < 0.05, "{r}");
}

#[test]
fn free_poisson_transform_cumulants() {
    for l in [1.0, 2.0, 3.5] {
        let k = cumulants(&Measure::free_poisson(l).unwrap(), 3).unwrap();
        assert!(k.iter().all(|v| (v - l).abs() < 1e-9), "{l}: {k:?}");
    }
    assert!(cumulants(&Measure::pareto(1.5, 1.0).unwrap(), 2).is_err());
}

#[test]
fn semicircle_voiculescu_exact() {
    let m = Measure::semicircle(3.0, 2.0).unwrap();
    for z in [iy(40.0), C64::new(30.0, 40.0), C64::new(-20.0, 40.0)] {
        let v = voiculescu(&m, z, 0).unwrap();
        assert!((v.phi - (3.0 + 1.0 / z)).norm() < 1e-8, "{z}: {}", v.phi);
        assert!(v.residual < 1e-12);
    }
    assert!(voiculescu(&m, iy(1.0), 0).is_err());
}

#[test]
fn subordination_matches_semicircle() {
    let s = Measure::semicircle(2.0, 2.0).unwrap();
    let t = Measure::semicircle(4.0, 2.0 * SQRT_2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let z = cone_point(&mut rng, 3.0, 0.01, 50.0) + 4.0;
        let r = subordinator(&s, &s, z, 1e-12).unwrap();
        let g = cauchy(&t, z).unwrap();
        assert!((r.g - g).norm() < 1e-8 * g.norm(), "{z}: {} vs {g}", r.g);
        assert!((r.w1 - r.w2).norm() < 1e-8 * r.w1.norm());
    }
}

#[test]
fn cone_rejects_outside_angles() {
    assert!(ConePointSet::new(1.0, vec![1.0, 0.1], vec![PI / 2.0]).is_ok());
    assert!(ConePointSet::new(1.0, vec![1.0], vec![PI / 8.0]).is_err());
}

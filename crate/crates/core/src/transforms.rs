//! Cauchy, F, H and Voiculescu transforms, their Laurent remainders, and the
//! inverse/reciprocal remainder diagnostics near zero.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Kernel, Measure};
use crate::quad::Tol;
use crate::regvar::{asymptotic_ratio_with, AsymptoticReport, Extrapolation};
use crate::series::{poly_compose, poly_mul, TruncatedSeries};

/// Compact measures switch to moment series beyond this multiple of the support.
const SERIES_RATIO: f64 = 20.0;

fn check_upper(z: C64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::OutsideDomain(format!("{z} is not in the upper half-plane")))
    }
}

fn far_field(mu: &Measure, w: C64) -> bool {
    mu.support_hi().map(|h| w.norm() > SERIES_RATIO * h.max(1e-300)).unwrap_or(false)
}

/// `G(z) = int (z - t)^-1 dmu(t)`.
pub fn cauchy(mu: &Measure, z: C64) -> Result<C64> {
    check_upper(z)?;
    if !far_field(mu, z) {
        if let Some((g, _)) = mu.closed_cauchy(z) {
            return Ok(g);
        }
    }
    mu.integrate(Kernel::Resolvent { w: z, k: 0 })
}

/// `G'(z) = -int (z - t)^-2 dmu(t)`.
pub fn cauchy_derivative(mu: &Measure, z: C64) -> Result<C64> {
    check_upper(z)?;
    if !far_field(mu, z) {
        if let Some((_, dg)) = mu.closed_cauchy(z) {
            return Ok(dg);
        }
    }
    Ok(-mu.integrate(Kernel::Resolvent2 { w: z, k: 0 })?)
}

/// `e(z) = z G(z) - 1 = int t (z - t)^-1 dmu(t)`, free of the cancellation
/// in `z G - 1` at large `|z|`.
pub fn excess(mu: &Measure, z: C64) -> Result<C64> {
    check_upper(z)?;
    if !far_field(mu, z) {
        if let Some((g, _)) = mu.closed_cauchy(z) {
            return Ok(z * g - 1.0);
        }
    }
    mu.integrate(Kernel::Resolvent { w: z, k: 1 })
}

/// `F = 1/G`.
pub fn f_transform(mu: &Measure, z: C64) -> Result<C64> {
    Ok(1.0 / cauchy(mu, z)?)
}

/// `h(z) = F(z) - z`, evaluated as `-z e / (1 + e)`.
pub fn h_transform(mu: &Measure, z: C64) -> Result<C64> {
    let e = excess(mu, z)?;
    Ok(-z * e / (1.0 + e))
}

const DERIV_TOL: Tol = Tol { rel: 1e-9, floor: 1e-9, abs: 1e-300, max_panels: 400, fail: 1e-2 };

/// `h(z)` and `h'(z)`.
pub fn h_with_derivative(mu: &Measure, z: C64) -> Result<(C64, C64)> {
    check_upper(z)?;
    if !far_field(mu, z) {
        if let Some((g, dg)) = mu.closed_cauchy(z) {
            let e = z * g - 1.0;
            return Ok((-z * e / (1.0 + e), -dg / (g * g) - 1.0));
        }
    }
    let e = mu.integrate(Kernel::Resolvent { w: z, k: 1 })?;
    // only steers Newton steps, so a coarse value will do
    let q = mu.integrate_tol(Kernel::Resolvent2 { w: z, k: 2 }, &DERIV_TOL)?;
    let d = 1.0 + e;
    Ok((-z * e / d, (q - e * e) / (d * d)))
}

/// Integral route `r_G(z) = int t^{p+1} (z - t)^-1 dmu(t)`.
pub fn remainder_g(mu: &Measure, p: u32, z: C64) -> Result<C64> {
    check_upper(z)?;
    check_order(mu, p)?;
    mu.integrate(Kernel::Resolvent { w: z, k: p + 1 })
}

/// Subtraction route `z^{p+1} (G(z) - sum_{j<=p} m_j z^{-j-1})`.
pub fn remainder_g_subtraction(mu: &Measure, p: u32, z: C64) -> Result<C64> {
    check_order(mu, p)?;
    let g = cauchy(mu, z)?;
    let iz = 1.0 / z;
    let mut poly = C64::new(0.0, 0.0);
    let mut zp = iz;
    for j in 0..=p {
        poly += zp * mu.moment(j);
        zp *= iz;
    }
    Ok((g - poly) * z.powu(p + 1))
}

fn check_order(mu: &Measure, p: u32) -> Result<()> {
    match mu.moment_order() {
        Some(q) if p > q => Err(Error::MomentNotFinite(p)),
        _ => Ok(()),
    }
}

/// Free cumulants `k_1..k_p` of `mu`.
pub fn cumulants(mu: &Measure, p: u32) -> Result<Vec<f64>> {
    check_order(mu, p)?;
    let m: Vec<f64> = (1..=p).map(|j| mu.moment(j)).collect();
    Ok(crate::series::cumulants_from_moments(&m))
}

/// Radius below which inversion of `F` is not attempted.
pub fn safe_radius(mu: &Measure) -> f64 {
    let m1 = mu.moment(1);
    let scale = if m1.is_finite() { m1 } else { median(mu) };
    10.0 * scale.max(1.0)
}

fn median(mu: &Measure) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while mu.tail(hi) > 0.5 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if mu.tail(m) > 0.5 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Result of inverting `F` at one point.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VoiculescuPoint {
    pub z: C64,
    /// `w = F^{-1}(z)`
    pub w: C64,
    pub phi: C64,
    pub r_phi: C64,
    /// `|F(w) - z|`
    pub residual: f64,
    pub iterations: usize,
}

/// Damped Newton for `F(w) = z` from `w0`.
pub fn invert_f(mu: &Measure, z: C64, w0: C64) -> Result<(C64, f64, usize)> {
    let resid = |w: C64| -> Result<(C64, C64)> {
        let (h, dh) = h_with_derivative(mu, w)?;
        Ok((w + h - z, 1.0 + dh))
    };
    let mut w = if w0.im > 0.0 { w0 } else { C64::new(w0.re, z.im) };
    let (mut r, mut d) = resid(w)?;
    let mut it = 0;
    while it < 100 {
        it += 1;
        if r.norm() <= 1e-15 * z.norm() {
            break;
        }
        let step = r / d;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = w - step * lam;
            if cand.im > 0.0 {
                if let Ok((rc, dc)) = resid(cand) {
                    if rc.norm() < r.norm() {
                        w = cand;
                        r = rc;
                        d = dc;
                        accepted = true;
                        break;
                    }
                }
            }
            lam *= 0.5;
        }
        if !accepted || (step * lam).norm() <= 1e-16 * w.norm() {
            break;
        }
    }
    let res = r.norm();
    if res < 1e-9 * z.norm() {
        Ok((w, res, it))
    } else {
        Err(Error::NoConvergence { iterations: it, residual: res })
    }
}

fn voiculescu_from_w(mu: &Measure, z: C64, w: C64, p: u32, kappa: &[f64]) -> Result<(C64, C64)> {
    let e = excess(mu, w)?;
    let phi = w * e / (1.0 + e);
    let r_phi = match p {
        0 => phi / z,
        1 => {
            let e2 = mu.integrate(Kernel::Resolvent { w, k: 2 })?;
            (e2 - e * mu.moment(1)) / (1.0 + e)
        }
        _ => {
            let iz = 1.0 / z;
            let mut s = C64::new(0.0, 0.0);
            let mut zp = C64::new(1.0, 0.0);
            for k in kappa.iter().take(p as usize) {
                s += zp * *k;
                zp *= iz;
            }
            (phi - s) * z.powu(p - 1)
        }
    };
    Ok((phi, r_phi))
}

/// `phi(z) = F^{-1}(z) - z` and `r_phi(z) = z^{p-1} (phi - sum_{j<p} k_{j+1} z^-j)`.
pub fn voiculescu(mu: &Measure, z: C64, p: u32) -> Result<VoiculescuPoint> {
    check_upper(z)?;
    check_order(mu, p)?;
    if z.norm() < safe_radius(mu) {
        return Err(Error::OutsideDomain(format!("|z| = {} is below the safe radius {}", z.norm(), safe_radius(mu))));
    }
    let kappa = cumulants(mu, p)?;
    let w0 = z - h_transform(mu, z)?;
    let (w, res, it) = match invert_f(mu, z, w0) {
        Ok(v) => v,
        Err(_) => {
            // continuation in from a large radius on the same ray
            let pts: Vec<C64> = (0..=12).rev().map(|k| z * 2f64.powi(k)).collect();
            let sols = ray_inverse(mu, &pts);
            match sols.into_iter().last() {
                Some(r) => r?,
                None => unreachable!(),
            }
        }
    };
    let (phi, r_phi) = voiculescu_from_w(mu, z, w, p, &kappa)?;
    Ok(VoiculescuPoint { z, w, phi, r_phi, residual: res, iterations: it })
}

/// Newton continuation: `points` are visited in the given order, each
/// warm-started from the previous solution.
fn ray_inverse(mu: &Measure, points: &[C64]) -> Vec<Result<(C64, f64, usize)>> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<(C64, C64)> = None;
    for &z in points {
        let w0 = match prev {
            Some((zp, wp)) => z + (wp - zp),
            None => match h_transform(mu, z) {
                Ok(h) => z - h,
                Err(e) => {
                    out.push(Err(e));
                    continue;
                }
            },
        };
        let r = invert_f(mu, z, w0);
        if let Ok((w, _, _)) = r {
            prev = Some((z, w));
        }
        out.push(r);
    }
    out
}

/// Voiculescu transform along one ray, continued from the largest radius.
/// The output follows the input order.
pub fn voiculescu_ray(mu: &Measure, zs: &[C64], p: u32) -> Result<Vec<Result<VoiculescuPoint>>> {
    check_order(mu, p)?;
    let kappa = cumulants(mu, p)?;
    let safe = safe_radius(mu);
    let mut idx: Vec<usize> = (0..zs.len()).collect();
    idx.sort_by(|a, b| zs[*b].norm().partial_cmp(&zs[*a].norm()).unwrap());
    let ok_idx: Vec<usize> = idx.iter().copied().filter(|i| zs[*i].norm() >= safe && zs[*i].im > 0.0).collect();
    let pts: Vec<C64> = ok_idx.iter().map(|i| zs[*i]).collect();
    let sols = ray_inverse(mu, &pts);
    let mut out: Vec<Result<VoiculescuPoint>> = zs
        .iter()
        .map(|z| {
            if z.im <= 0.0 {
                Err(Error::OutsideDomain(format!("{z} is not in the upper half-plane")))
            } else {
                Err(Error::OutsideDomain(format!("|z| = {} is below the safe radius {safe}", z.norm())))
            }
        })
        .collect();
    for (i, s) in ok_idx.into_iter().zip(sols) {
        let z = zs[i];
        out[i] = s.and_then(|(w, res, it)| {
            let (phi, r_phi) = voiculescu_from_w(mu, z, w, p, &kappa)?;
            Ok(VoiculescuPoint { z, w, phi, r_phi, residual: res, iterations: it })
        });
    }
    Ok(out)
}

/// Which Laurent remainder a [`LaurentRemainder`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemainderKind {
    Cauchy,
    Voiculescu,
}

/// Remainder of the order-`p` Laurent expansion of `G` or `phi`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaurentRemainder {
    pub p: u32,
    pub kind: RemainderKind,
    /// Moments `m_0..m_p` for `G`, cumulants `k_1..k_p` for `phi`.
    pub coeffs: Vec<f64>,
    measure: Measure,
}

impl LaurentRemainder {
    pub fn cauchy(mu: &Measure, p: u32) -> Result<Self> {
        check_order(mu, p)?;
        Ok(LaurentRemainder {
            p,
            kind: RemainderKind::Cauchy,
            coeffs: (0..=p).map(|j| mu.moment(j)).collect(),
            measure: mu.clone(),
        })
    }

    pub fn voiculescu(mu: &Measure, p: u32) -> Result<Self> {
        Ok(LaurentRemainder { p, kind: RemainderKind::Voiculescu, coeffs: cumulants(mu, p)?, measure: mu.clone() })
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        match self.kind {
            RemainderKind::Cauchy => remainder_g(&self.measure, self.p, z),
            RemainderKind::Voiculescu => voiculescu(&self.measure, z, self.p).map(|v| v.r_phi),
        }
    }
}

/// Points `r e^{i theta}` in the cone `|Re z| < eta Im z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePointSet {
    pub eta: f64,
    pub schedule: Vec<f64>,
    pub ray_angles: Vec<f64>,
}

impl ConePointSet {
    pub fn new(eta: f64, schedule: Vec<f64>, ray_angles: Vec<f64>) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument("cone aperture must be positive".into()));
        }
        for &t in &ray_angles {
            if !(t > 0.0 && t < PI) || (t.cos() / t.sin()).abs() >= eta {
                return Err(Error::InvalidArgument(format!("ray angle {t} lies outside the cone of aperture {eta}")));
            }
        }
        if schedule.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidArgument("radii must be positive and finite".into()));
        }
        Ok(ConePointSet { eta, schedule, ray_angles })
    }

    /// Imaginary axis plus the ray at `pi/3`, `n` log-spaced radii.
    pub fn default_rays(eta: f64, r0: f64, r1: f64, n: usize) -> Result<Self> {
        let sched = log_schedule(r0, r1, n);
        let mut rays = vec![PI / 2.0];
        if (PI / 3.0).cos() / (PI / 3.0).sin() < eta {
            rays.push(PI / 3.0);
        }
        Self::new(eta, sched, rays)
    }

    /// `(theta, r, z)` for every ray and radius, `z` in the upper half-plane.
    pub fn points(&self) -> Vec<(f64, f64, C64)> {
        let mut v = vec![];
        for &t in &self.ray_angles {
            for &r in &self.schedule {
                v.push((t, r, C64::from_polar(r, t)));
            }
        }
        v
    }

    /// Conjugate points, which lie in the lower cone `|Re z| < -eta Im z`.
    pub fn lower_points(&self) -> Vec<(f64, f64, C64)> {
        self.points().into_iter().map(|(t, r, z)| (t, r, z.conj())).collect()
    }
}

/// `n` points from `a` to `b`, equally spaced in `log`.
pub fn log_schedule(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// One row of a transform trace.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub ray_angle: f64,
    pub radius: f64,
    pub value: C64,
    pub residual: f64,
}

/// Writes `ray_angle,radius,Re_val,Im_val,residual`.
pub fn write_trace<W: Write>(rows: &[TraceRow], w: W) -> Result<()> {
    let mut cw = csv::Writer::from_writer(w);
    cw.write_record(["ray_angle", "radius", "Re_val", "Im_val", "residual"])?;
    for r in rows {
        cw.write_record([
            format!("{:e}", r.ray_angle),
            format!("{:e}", r.radius),
            format!("{:e}", r.value.re),
            format!("{:e}", r.value.im),
            format!("{:e}", r.residual),
        ])?;
    }
    cw.flush()?;
    Ok(())
}

/// Remainders of `H`, `L = H^{-1}` and `K = z/L` at one point near zero.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct InversePoint {
    pub ray_angle: f64,
    pub radius: f64,
    pub z: C64,
    pub r_h: C64,
    pub r_l: C64,
    pub r_k: C64,
    pub residual: f64,
}

/// Outcome of [`inverse_remainder_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InverseRemainderReport {
    pub p: u32,
    pub points: Vec<InversePoint>,
    /// `(ray_angle, radius, message)` for points that failed.
    pub failed: Vec<(f64, f64, String)>,
    /// Per ray: `Re(r_L/r_H)` against `y = 1/|z|`.
    pub l_over_h: Vec<AsymptoticReport>,
    /// Per ray: `Re(r_K/r_L)` against `y = 1/|z|`.
    pub k_over_l: Vec<AsymptoticReport>,
}

/// Polynomial pieces of `H`, `L` and `K` through order `p + 1`.
struct InversePolys {
    p: usize,
    /// `A(z) = sum_{j=1}^{p+1} m_{j-1} z^j`
    a: Vec<f64>,
    /// Reversion of `A` through `z^{p+1}`.
    b: Vec<f64>,
    /// `A(B(z)) - z`, zero through `z^{p+1}`.
    e: Vec<f64>,
    /// `K` through `z^p`.
    kpoly: Vec<f64>,
    /// `(z - kpoly B) / z^{p+2}`.
    q: Vec<f64>,
}

impl InversePolys {
    fn new(mu: &Measure, p: u32) -> Result<Self> {
        let p = p as usize;
        let mut a = vec![0.0];
        a.extend((0..=p).map(|j| mu.moment(j as u32)));
        let b = TruncatedSeries::new(a.clone()).revert()?.coeffs().to_vec();
        let mut e = poly_compose(&a, &b);
        e[1] -= 1.0;
        // K = z / B through z^p
        let b_over_z = TruncatedSeries::new(b[1..].to_vec());
        let kpoly: Vec<f64> = b_over_z.reciprocal()?.coeffs()[..=p].to_vec();
        let mut q = poly_mul(&kpoly, &b);
        for c in q.iter_mut() {
            *c = -*c;
        }
        q[1] += 1.0;
        let q: Vec<f64> = q.get(p + 2..).map(|s| s.to_vec()).unwrap_or_default();
        Ok(InversePolys { p, a, b, e, kpoly, q })
    }
}

fn peval(c: &[f64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, x| acc * z + x)
}

fn inverse_point(mu: &Measure, polys: &InversePolys, z: C64, w: C64) -> Result<(C64, C64, C64)> {
    let p = polys.p as u32;
    let zp1 = z.powu(p + 1);
    let r_h = remainder_g(mu, p, 1.0 / z)?;
    // L = B + z^{p+1} rho, solved from A(B + d) - A(B) = -(E + L^{p+1} r_H(L))
    let l_num = 1.0 / w;
    let r_h_l = remainder_g(mu, p, w)?;
    let bz = peval(&polys.b, z);
    let ez = peval(&polys.e, z);
    let da: Vec<f64> = polys.a.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
    let mut d = l_num - bz;
    for _ in 0..8 {
        let l = bz + d;
        let f = peval(&polys.a, l) - peval(&polys.a, bz) + ez + l.powu(p + 1) * r_h_l;
        let df = peval(&da, l);
        let step = f / df;
        d -= step;
        if step.norm() <= 1e-16 * d.norm() {
            break;
        }
    }
    let rho = d / zp1;
    let s = peval(&polys.b[1..], z);
    let kz = peval(&polys.kpoly, z);
    let qz = peval(&polys.q, z);
    let r_k = (z * qz - kz * rho) / (s + z.powu(p) * rho);
    Ok((r_h, rho, r_k))
}

/// Evaluates `r_H`, `r_L` and `r_K` on the lower cone points of `cone`
/// (radii toward zero) and reports `r_L/r_H` and `r_K/r_L` against `-1`.
pub fn inverse_remainder_check(
    mu: &Measure,
    p: u32,
    cone: &ConePointSet,
    tolerance: f64,
) -> Result<InverseRemainderReport> {
    check_order(mu, p)?;
    let polys = InversePolys::new(mu, p)?;
    let mut points = vec![];
    let mut failed = vec![];
    let mut l_over_h = vec![];
    let mut k_over_l = vec![];
    let total = cone.schedule.len() * cone.ray_angles.len();
    for &theta in &cone.ray_angles {
        // smallest radius first, so the inversion runs from the largest |1/z|
        let mut rs: Vec<f64> = cone.schedule.clone();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let zetas: Vec<C64> = rs.iter().map(|r| 1.0 / C64::from_polar(*r, -theta)).collect();
        let safe = safe_radius(mu);
        let usable: Vec<usize> = (0..zetas.len()).filter(|i| zetas[*i].norm() >= safe).collect();
        let mut sols: Vec<Option<_>> =
            ray_inverse(mu, &usable.iter().map(|i| zetas[*i]).collect::<Vec<_>>()).into_iter().map(Some).collect();
        let mut ray_pts: Vec<InversePoint> = vec![];
        for (i, &r) in rs.iter().enumerate() {
            let z = C64::from_polar(r, -theta);
            let pos = usable.iter().position(|u| *u == i);
            let res = match pos {
                None => Err(Error::OutsideDomain(format!("1/|z| = {} is below the safe radius {safe}", 1.0 / r))),
                Some(k) => sols[k]
                    .take()
                    .expect("each solution is used once")
                    .and_then(|(w, res, _)| inverse_point(mu, &polys, z, w).map(|v| (v, res))),
            };
            match res {
                Ok(((r_h, r_l, r_k), residual)) => {
                    ray_pts.push(InversePoint { ray_angle: theta, radius: r, z, r_h, r_l, r_k, residual })
                }
                Err(e) => failed.push((theta, r, e.to_string())),
            }
        }
        // schedule in y = 1/r increasing
        ray_pts.reverse();
        let ys: Vec<f64> = ray_pts.iter().map(|q| 1.0 / q.radius).collect();
        let lh: Vec<f64> = ray_pts.iter().map(|q| (q.r_l / q.r_h).re).collect();
        let kl: Vec<f64> = ray_pts.iter().map(|q| (q.r_k / q.r_l).re).collect();
        if ys.len() >= 2 {
            l_over_h.push(asymptotic_ratio_with(&ys, &lh, Some(-1.0), tolerance, Extrapolation::Geometric));
            k_over_l.push(asymptotic_ratio_with(&ys, &kl, Some(-1.0), tolerance, Extrapolation::Geometric));
        }
        points.extend(ray_pts);
    }
    if (points.len() as f64) < 0.8 * total as f64 {
        let (iterations, residual) = (points.len(), failed.len() as f64);
        return Err(Error::NoConvergence { iterations, residual });
    }
    Ok(InverseRemainderReport { p, points, failed, l_over_h, k_over_l })
}

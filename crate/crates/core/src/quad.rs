//! Quadrature: adaptive 21-point Gauss-Kronrod for complex integrands and
//! fixed Gauss-Legendre rules.
//!
//! Real and imaginary parts carry separate error estimates, and each is
//! driven to its own relative tolerance. Sign-definite imaginary parts of
//! resolvent integrals are therefore resolved to full relative accuracy
//! even when they are tiny compared to the real part.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tolerances for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct Tol {
    /// Relative tolerance applied to each component separately.
    pub rel: f64,
    /// Componentwise floor, as a fraction of the modulus of the integral.
    pub floor: f64,
    /// Absolute floor.
    pub abs: f64,
    pub max_panels: usize,
    /// Estimated relative error past which an exhausted panel budget is an error.
    pub fail: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { rel: 1e-12, floor: 1e-11, abs: 1e-300, max_panels: 2000, fail: FAIL_REL }
    }
}

/// Default for [`Tol::fail`].
pub const FAIL_REL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
struct Panel {
    a: f64,
    b: f64,
    val: C64,
    er: f64,
    ei: f64,
}

fn qerr(diff: f64, resasc: f64, resabs: f64) -> f64 {
    let mut e = diff;
    if resasc != 0.0 && e != 0.0 {
        e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * resabs);
    }
    e
}

fn gk21<F: FnMut(f64) -> C64>(f: &mut F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[10];
    let mut rg = C64::new(0.0, 0.0);
    let mut absr = WGK[10] * fc.re.abs();
    let mut absi = WGK[10] * fc.im.abs();
    let mut vals = [(C64::new(0.0, 0.0), C64::new(0.0, 0.0)); 10];
    for (k, v) in vals.iter_mut().enumerate() {
        let x = h * XGK[k];
        let f1 = f(c - x);
        let f2 = f(c + x);
        let s = f1 + f2;
        rk += s * WGK[k];
        if k % 2 == 1 {
            rg += s * WG[k / 2];
        }
        absr += WGK[k] * (f1.re.abs() + f2.re.abs());
        absi += WGK[k] * (f1.im.abs() + f2.im.abs());
        *v = (f1, f2);
    }
    let mean = rk * 0.5;
    let mut ascr = WGK[10] * (fc.re - mean.re).abs();
    let mut asci = WGK[10] * (fc.im - mean.im).abs();
    for (k, (f1, f2)) in vals.iter().enumerate() {
        ascr += WGK[k] * ((f1.re - mean.re).abs() + (f2.re - mean.re).abs());
        asci += WGK[k] * ((f1.im - mean.im).abs() + (f2.im - mean.im).abs());
    }
    let ha = h.abs();
    let d = (rk - rg) * h;
    Panel {
        a,
        b,
        val: rk * h,
        er: qerr(d.re.abs(), ascr * ha, absr * ha),
        ei: qerr(d.im.abs(), asci * ha, absi * ha),
    }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, starting from the panels
/// delimited by `breaks` (which must be nondecreasing).
pub fn integrate<F: FnMut(f64) -> C64>(mut f: F, breaks: &[f64], tol: &Tol) -> Result<C64> {
    if breaks.len() < 2 {
        return Ok(C64::new(0.0, 0.0));
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            panels.push(gk21(&mut f, w[0], w[1]));
        }
    }
    // panels too narrow to split further are moved here
    let mut frozen = C64::new(0.0, 0.0);
    let (mut fer, mut fei) = (0.0, 0.0);
    loop {
        let mut tot = frozen;
        let (mut er, mut ei) = (fer, fei);
        for p in &panels {
            tot += p.val;
            er += p.er;
            ei += p.ei;
        }
        let scale = tot.norm();
        let tr = (tol.rel * tot.re.abs()).max(tol.floor * scale).max(tol.abs);
        let ti = (tol.rel * tot.im.abs()).max(tol.floor * scale).max(tol.abs);
        if (er <= tr && ei <= ti) || panels.is_empty() {
            return Ok(tot);
        }
        if panels.len() >= tol.max_panels {
            let rel = (er / tot.re.abs().max(tol.fail * scale).max(tol.abs))
                .max(ei / tot.im.abs().max(tol.fail * scale).max(tol.abs));
            if rel <= tol.fail {
                return Ok(tot);
            }
            return Err(Error::QuadratureFailure { rel_err: rel });
        }
        let mut worst = 0;
        let mut wbad = -1.0;
        for (i, p) in panels.iter().enumerate() {
            let bad = (p.er / tr).max(p.ei / ti);
            if bad > wbad {
                wbad = bad;
                worst = i;
            }
        }
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if (p.b - p.a) <= 1e-14 * m.abs().max(1e-300) || m <= p.a || m >= p.b {
            frozen += p.val;
            fer += p.er;
            fei += p.ei;
            continue;
        }
        panels.push(gk21(&mut f, p.a, m));
        panels.push(gk21(&mut f, m, p.b));
    }
}

/// Real-valued convenience wrapper around [`integrate`].
pub fn integrate_real<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: &Tol) -> Result<f64> {
    integrate(|x| C64::new(f(x), 0.0), breaks, tol).map(|v| v.re)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

pub(crate) fn gl8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

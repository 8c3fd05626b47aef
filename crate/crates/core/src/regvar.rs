//! Regular-variation index estimation, Karamata-type Stieltjes checks and
//! the generic asymptotic-ratio checker.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{linfit, Kernel, Measure};

/// How the limit of a ratio sequence is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Last ratio as is.
    None,
    /// Aitken step on the last three points, assuming geometric decay of the
    /// differences along a log-uniform schedule.
    Geometric,
    /// Linear extrapolation to `1/log y = 0` from the last two points.
    InverseLog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// No target to compare against.
    Info,
}

/// Settings for [`AsymptoticReport::from_ratios`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioSettings {
    pub target: Option<f64>,
    pub tolerance: f64,
    pub extrapolation: Extrapolation,
    /// `|ratio - target|` must be nonincreasing over this many final points.
    pub monotone_points: usize,
    /// Absolute slack allowed in the monotonicity test.
    pub monotone_slack: f64,
}

impl RatioSettings {
    pub fn new(target: Option<f64>, tolerance: f64) -> Self {
        RatioSettings {
            target,
            tolerance,
            extrapolation: Extrapolation::Geometric,
            monotone_points: 5,
            monotone_slack: 1e-12,
        }
    }

    pub fn extrapolation(mut self, e: Extrapolation) -> Self {
        self.extrapolation = e;
        self
    }

    pub fn monotone_points(mut self, k: usize) -> Self {
        self.monotone_points = k;
        self
    }

    pub fn monotone_slack(mut self, s: f64) -> Self {
        self.monotone_slack = s;
        self
    }
}

/// Ratio sequence on an increasing schedule with its estimated limit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub y_schedule: Vec<f64>,
    pub ratios: Vec<f64>,
    pub limit_estimate: f64,
    pub target: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub monotone_tail: bool,
    pub extrapolation: Extrapolation,
    /// `(y, message)` for points whose ratio could not be formed.
    pub point_errors: Vec<(f64, String)>,
}

impl AsymptoticReport {
    pub fn from_ratios(ys: &[f64], ratios: &[f64], s: &RatioSettings) -> Self {
        let mut point_errors = vec![];
        let (mut fy, mut fr) = (vec![], vec![]);
        for (y, r) in ys.iter().zip(ratios) {
            if r.is_finite() {
                fy.push(*y);
                fr.push(*r);
            } else {
                point_errors.push((*y, "ratio is not finite".to_string()));
            }
        }
        let limit = extrapolate(&fy, &fr, s.extrapolation);
        let reference = s.target.unwrap_or(limit);
        let k = s.monotone_points.min(fr.len());
        let dev: Vec<f64> = fr[fr.len() - k..].iter().map(|r| (r - reference).abs()).collect();
        let monotone = !fr.is_empty() && dev.windows(2).all(|w| w[1] <= w[0] + s.monotone_slack);
        let verdict = match s.target {
            None => Verdict::Info,
            Some(t) if limit.is_finite() && (limit - t).abs() <= s.tolerance && monotone => Verdict::Pass,
            Some(_) => Verdict::Fail,
        };
        AsymptoticReport {
            y_schedule: ys.to_vec(),
            ratios: ratios.to_vec(),
            limit_estimate: limit,
            target: s.target,
            tolerance: s.tolerance,
            verdict,
            monotone_tail: monotone,
            extrapolation: s.extrapolation,
            point_errors,
        }
    }

    /// Last finite ratio.
    pub fn final_ratio(&self) -> f64 {
        self.ratios.iter().rev().copied().find(|r| r.is_finite()).unwrap_or(f64::NAN)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Two-column CSV `y,ratio`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["y", "ratio"])?;
        for (y, r) in self.y_schedule.iter().zip(&self.ratios) {
            cw.write_record([format!("{y:e}"), format!("{r:e}")])?;
        }
        cw.flush()?;
        Ok(())
    }
}

/// Report built from precomputed ratios with default monotonicity settings.
pub fn asymptotic_ratio_with(
    ys: &[f64],
    ratios: &[f64],
    target: Option<f64>,
    tolerance: f64,
    extrapolation: Extrapolation,
) -> AsymptoticReport {
    AsymptoticReport::from_ratios(ys, ratios, &RatioSettings::new(target, tolerance).extrapolation(extrapolation))
}

/// Evaluates `f/g` on `ys` (in parallel) and summarizes the sequence.
pub fn asymptotic_ratio<F, G>(f: F, g: G, ys: &[f64], settings: &RatioSettings) -> AsymptoticReport
where
    F: Fn(f64) -> Result<f64> + Sync,
    G: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Vec<std::result::Result<f64, String>> = ys
        .par_iter()
        .map(|&y| {
            let a = f(y).map_err(|e| e.to_string())?;
            let b = g(y).map_err(|e| e.to_string())?;
            if b == 0.0 {
                Err("division by zero".to_string())
            } else {
                Ok(a / b)
            }
        })
        .collect();
    let ratios: Vec<f64> = vals.iter().map(|v| v.clone().unwrap_or(f64::NAN)).collect();
    let mut rep = AsymptoticReport::from_ratios(ys, &ratios, settings);
    rep.point_errors = ys
        .iter()
        .zip(&vals)
        .filter_map(|(y, v)| v.as_ref().err().map(|e| (*y, e.clone())))
        .collect();
    rep
}

fn extrapolate(ys: &[f64], r: &[f64], e: Extrapolation) -> f64 {
    let n = r.len();
    if n == 0 {
        return f64::NAN;
    }
    let last = r[n - 1];
    match e {
        Extrapolation::None => last,
        Extrapolation::Geometric => {
            if n < 3 {
                return last;
            }
            let d1 = r[n - 2] - r[n - 3];
            let d2 = last - r[n - 2];
            if d1 == 0.0 {
                return last;
            }
            let q = d2 / d1;
            if q > 0.0 && q < 0.9 {
                last + d2 * q / (1.0 - q)
            } else {
                last
            }
        }
        Extrapolation::InverseLog => {
            if n < 2 {
                return last;
            }
            let (u1, u2) = (1.0 / ys[n - 2].ln(), 1.0 / ys[n - 1].ln());
            if !(u1 - u2).is_normal() {
                return last;
            }
            last - (last - r[n - 2]) * u2 / (u2 - u1)
        }
    }
}

/// Estimated regular-variation index with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvIndex {
    pub alpha: f64,
    pub stderr: f64,
}

/// Minus the least-squares slope of `log tail` against `log y` on
/// `points` log-spaced abscissae in `[y_lo, y_hi]`.
pub fn rv_index<F: Fn(f64) -> f64>(tail: F, y_lo: f64, y_hi: f64, points: usize) -> Result<RvIndex> {
    if !(y_lo > 0.0) || !(y_hi / y_lo >= 100.0) || points < 3 {
        return Err(Error::InvalidArgument("rv_index needs y_hi/y_lo >= 100 and at least 3 points".into()));
    }
    let (l0, l1) = (y_lo.ln(), y_hi.ln());
    let mut xs = Vec::with_capacity(points);
    let mut ls = Vec::with_capacity(points);
    for i in 0..points {
        let x = l0 + (l1 - l0) * i as f64 / (points - 1) as f64;
        let y = x.exp();
        let t = tail(y);
        if !(t > 0.0) {
            return Err(Error::NonPositiveTail(y));
        }
        xs.push(x);
        ls.push(t.ln());
    }
    let (a, b) = linfit(&xs, &ls);
    let n = points as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let ssr: f64 = xs.iter().zip(&ls).map(|(x, l)| (l - a - b * x).powi(2)).sum();
    let stderr = if points > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RvIndex { alpha: -b, stderr })
}

/// `(pi a/2) / sin(pi a/2)`, equal to 1 at `a = 0`.
pub fn karamata_constant(alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else {
        let h = PI * alpha / 2.0;
        h / h.sin()
    }
}

/// `d rho(t) = t^weight d mu(t)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoSpec {
    pub measure: Measure,
    pub weight: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KaramataVariant {
    /// `int (t^2+y^2)^-1 d rho` against `C rho[0,y] / y^2`.
    Distribution,
    /// `int t^2 (t^2+y^2)^-1 d rho` against `C rho(y,inf)`.
    Tail,
}

/// Ratio of the Stieltjes-type integral of `rho` to its Karamata
/// equivalent; target 1.
pub fn karamata_check(
    rho: &RhoSpec,
    alpha: f64,
    ys: &[f64],
    variant: KaramataVariant,
    settings: &RatioSettings,
) -> Result<AsymptoticReport> {
    if !(0.0..2.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("karamata index {alpha} outside [0, 2)")));
    }
    let c = karamata_constant(alpha);
    let mu = &rho.measure;
    let w = rho.weight;
    let s = RatioSettings { target: Some(1.0), ..*settings };
    let rep = match variant {
        KaramataVariant::Distribution => asymptotic_ratio(
            |y| Ok(mu.integrate(Kernel::Lorentz { y, k: w })?.re),
            |y| Ok(c * mu.power_integral(w, -1.0, y)? / (y * y)),
            ys,
            &s,
        ),
        KaramataVariant::Tail => asymptotic_ratio(
            |y| Ok(mu.integrate(Kernel::Lorentz { y, k: w + 2 })?.re),
            |y| Ok(c * mu.power_integral(w, y, f64::INFINITY)?),
            ys,
            &s,
        ),
    };
    Ok(rep)
}

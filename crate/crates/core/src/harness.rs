//! Experiment runners and machine-readable reports behind the `freesub` CLI.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeconv::{free_convolve, ConvolutionResult, MaxConvolution};
use crate::measures::{GridSpec, Measure};
use crate::regvar::{
    karamata_check, AsymptoticReport, Extrapolation, KaramataVariant, RatioSettings, RhoSpec, Verdict,
};
use crate::transforms::{
    inverse_remainder_check, log_schedule, remainder_g, safe_radius, voiculescu_ray, ConePointSet,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Largest convolution power the harness will run.
pub const N_MAX: u32 = 4;
/// Default tolerance for transform-level constants.
pub const TOL_TRANSFORM: f64 = 0.05;
/// Default tolerance for convolution-level tail ratios.
pub const TOL_CONVOLUTION: f64 = 0.10;
/// Default tolerance when the tail index is an integer `p + 1`.
pub const TOL_BOUNDARY: f64 = 0.15;
/// Exponent used for the bound-style claims at `alpha = p + 1`.
pub const BETA: f64 = 0.25;
/// Tail level at which main-theorem schedules end.
pub const TAIL_LEVEL: f64 = 1e-4;

/// Which statement an experiment checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    Main,
    OneLargeJump,
    RemainderEquivA,
    RemainderEquivB,
    RemainderEquivC,
    RemainderEquivD,
    Karamata,
    InverseRemainder,
}

impl Selector {
    pub const ALL: [Selector; 8] = [
        Selector::Main,
        Selector::OneLargeJump,
        Selector::RemainderEquivA,
        Selector::RemainderEquivB,
        Selector::RemainderEquivC,
        Selector::RemainderEquivD,
        Selector::Karamata,
        Selector::InverseRemainder,
    ];

    /// Short label stored in each claim's `paper_anchor`.
    pub fn anchor(self) -> &'static str {
        traceability(self).0
    }

    pub fn name(self) -> &'static str {
        match self {
            Selector::Main => "main",
            Selector::OneLargeJump => "one-large-jump",
            Selector::RemainderEquivA => "remainder-equiv-A",
            Selector::RemainderEquivB => "remainder-equiv-B",
            Selector::RemainderEquivC => "remainder-equiv-C",
            Selector::RemainderEquivD => "remainder-equiv-D",
            Selector::Karamata => "karamata",
            Selector::InverseRemainder => "inverse-remainder",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Selector, anchor label and the statement being checked.
pub const TRACEABILITY: &[(Selector, &str, &str)] = &[
    (
        Selector::Main,
        "main theorem",
        "a regularly varying tail is free subexponential: mu^{boxplus n}(y, inf) ~ n mu(y, inf)",
    ),
    (
        Selector::OneLargeJump,
        "one large jump",
        "the tail of the n-th free additive power matches the tail of the n-th free max power",
    ),
    (
        Selector::RemainderEquivA,
        "remainder equivalence, alpha in (p, p+1)",
        "r_G ~ r_phi; Im and Re of r_G(iy) are constant multiples of y^p mu(y, inf)",
    ),
    (
        Selector::RemainderEquivB,
        "remainder equivalence, alpha = p",
        "Im r_G(iy) ~ -(p pi/2) y^p mu(y, inf) is slowly varying; Re r_phi ~ Re r_G >> 1/y",
    ),
    (
        Selector::RemainderEquivC,
        "remainder equivalence, alpha in [0, 1)",
        "r_G ~ r_phi with Re and Im of the same order, both constant multiples of mu(y, inf)",
    ),
    (
        Selector::RemainderEquivD,
        "remainder equivalence, alpha = p + 1",
        "Re r_G(iy) ~ -((p+1) pi/2) y^p mu(y, inf); 1/y << Im r_G(iy) << y^-(1-beta/2)",
    ),
    (
        Selector::Karamata,
        "Karamata-type Stieltjes propositions",
        "int d rho/(t^2+y^2) and int t^2 d rho/(t^2+y^2) against the regularly varying rho",
    ),
    (
        Selector::InverseRemainder,
        "inverse and reciprocal remainders",
        "r_L ~ -r_H for the local inverse L of H, and r_K ~ -r_L for K = z/L",
    ),
];

fn traceability(s: Selector) -> (&'static str, &'static str) {
    TRACEABILITY.iter().find(|t| t.0 == s).map(|t| (t.1, t.2)).expect("every selector has a row")
}

/// `(y, r_G, r_phi, y^p tail)` at one schedule point.
type RemainderRow = (f64, C64, C64, f64);

/// Case of the remainder-equivalence statements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RemainderCase {
    A,
    B,
    C,
    D,
}

impl RemainderCase {
    pub fn selector(self) -> Selector {
        match self {
            RemainderCase::A => Selector::RemainderEquivA,
            RemainderCase::B => Selector::RemainderEquivB,
            RemainderCase::C => Selector::RemainderEquivC,
            RemainderCase::D => Selector::RemainderEquivD,
        }
    }
}

impl FromStr for RemainderCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(RemainderCase::A),
            "B" | "b" => Ok(RemainderCase::B),
            "C" | "c" => Ok(RemainderCase::C),
            "D" | "d" => Ok(RemainderCase::D),
            _ => Err(Error::InvalidArgument(format!("unknown case {s:?}, expected A, B, C or D"))),
        }
    }
}

/// One checked statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub paper_anchor: String,
    pub target: Option<f64>,
    pub estimate: f64,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub series_csv_path: Option<String>,
    /// `(y, value)` plot data, written next to the report.
    #[serde(skip)]
    pub series: Vec<(f64, f64)>,
}

impl Claim {
    fn from_report(name: impl Into<String>, sel: Selector, r: &AsymptoticReport) -> Self {
        Claim {
            name: name.into(),
            paper_anchor: sel.anchor().into(),
            target: r.target,
            estimate: r.limit_estimate,
            tolerance: Some(r.tolerance),
            verdict: r.verdict,
            series_csv_path: None,
            series: r.y_schedule.iter().copied().zip(r.ratios.iter().copied()).collect(),
        }
    }

    /// Claim that `values` grows (`increasing`) or decays over the last
    /// `k` points of the schedule.
    fn monotone(name: &str, sel: Selector, ys: &[f64], values: &[f64], increasing: bool, k: usize) -> Self {
        let k = k.min(values.len());
        let tail = &values[values.len() - k..];
        let ok = tail.iter().all(|v| v.is_finite())
            && tail.windows(2).all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        Claim {
            name: name.into(),
            paper_anchor: sel.anchor().into(),
            target: None,
            estimate: values.last().copied().unwrap_or(f64::NAN),
            tolerance: None,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            series_csv_path: None,
            series: ys.iter().copied().zip(values.iter().copied()).collect(),
        }
    }

    fn failed(name: &str, sel: Selector, target: Option<f64>, tolerance: Option<f64>) -> Self {
        Claim {
            name: name.into(),
            paper_anchor: sel.anchor().into(),
            target,
            estimate: f64::NAN,
            tolerance,
            verdict: Verdict::Fail,
            series_csv_path: None,
            series: vec![],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub grid: Option<GridSpec>,
    pub schedules: BTreeMap<String, Vec<f64>>,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
}

impl Environment {
    fn new(grid: Option<GridSpec>, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("freesub".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Environment { grid, schedules: BTreeMap::new(), versions, seed }
    }
}

/// Output of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub measure: String,
    pub claims: Vec<Claim>,
    /// Excluded points and other non-fatal problems.
    #[serde(default)]
    pub warnings: Vec<String>,
    /// Fatal error that cut the experiment short.
    #[serde(default)]
    pub error: Option<String>,
    pub environment: Environment,
}

impl Report {
    fn new(experiment: &str, mu: &Measure, env: Environment) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            measure: mu.label(),
            claims: vec![],
            warnings: vec![],
            error: None,
            environment: env,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.claims.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes the report (`json` or `csv`) and one series CSV per claim into
    /// `dir`, filling in `series_csv_path`. Returns the report path.
    pub fn write(&mut self, dir: &Path, format: Format) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let stem = self.experiment.replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_");
        for c in self.claims.iter_mut() {
            if c.series.is_empty() {
                continue;
            }
            let name = format!("{stem}.{}.csv", c.name.replace(|ch: char| !ch.is_ascii_alphanumeric() && ch != '-', "_"));
            let mut w = csv::Writer::from_path(dir.join(&name))?;
            w.write_record(["y", "value"])?;
            for (y, v) in &c.series {
                w.write_record([format!("{y:e}"), format!("{v:e}")])?;
            }
            w.flush()?;
            c.series_csv_path = Some(name);
        }
        let path = match format {
            Format::Json => {
                let p = dir.join(format!("{stem}.json"));
                fs::write(&p, self.to_json()? + "\n")?;
                p
            }
            Format::Csv => {
                let p = dir.join(format!("{stem}.csv"));
                let mut w = csv::Writer::from_path(&p)?;
                w.write_record(["name", "paper_anchor", "target", "estimate", "tolerance", "verdict", "series_csv_path"])?;
                let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
                for c in &self.claims {
                    w.write_record([
                        c.name.clone(),
                        c.paper_anchor.clone(),
                        opt(c.target),
                        format!("{:e}", c.estimate),
                        opt(c.tolerance),
                        verdict_str(c.verdict).to_string(),
                        c.series_csv_path.clone().unwrap_or_default(),
                    ])?;
                }
                w.flush()?;
                p
            }
        };
        Ok(path)
    }

    /// One line per claim.
    pub fn summary(&self) -> String {
        let mut s = format!("{} [{}]\n", self.experiment, self.measure);
        for c in &self.claims {
            s += &format!(
                "  {:<5} {:<32} estimate={:<12.6} target={}\n",
                verdict_str(c.verdict),
                c.name,
                c.estimate,
                c.target.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into())
            );
        }
        for w in &self.warnings {
            s += &format!("  warning: {w}\n");
        }
        if let Some(e) = &self.error {
            s += &format!("  error: {e}\n");
        }
        s
    }
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Info => "INFO",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::InvalidArgument(format!("unknown format {s:?}"))),
        }
    }
}

/// 0 when every verdict passes, 2 when they pass with warnings, 1 on any
/// failure or error.
pub fn exit_code(reports: &[Report]) -> i32 {
    if reports.iter().any(|r| !r.passed()) {
        1
    } else if reports.iter().any(|r| !r.warnings.is_empty()) {
        2
    } else {
        0
    }
}

/// `"a:b:n"` (log-spaced) or a comma-separated list.
pub fn parse_schedule(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("bad schedule {s:?}"));
    let v: Vec<f64> = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(a > 0.0 && b > a && n >= 2) {
            return Err(bad());
        }
        log_schedule(a, b, n)
    } else {
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?
    };
    if v.is_empty() || v.iter().any(|y| !(*y > 0.0 && y.is_finite())) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad());
    }
    Ok(v)
}

/// `y` with `mu(y, inf) = level`, by bisection in `log y`.
pub fn tail_quantile(mu: &Measure, level: f64) -> Result<f64> {
    let mut lo = mu.support_lo().max(1e-12);
    if mu.tail(lo) < level {
        return Ok(lo);
    }
    let mut hi = lo.max(1.0) * 2.0;
    while mu.tail(hi) > level {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidArgument(format!("tail never drops to {level}")));
        }
    }
    for _ in 0..200 {
        let m = (lo * hi).sqrt();
        if mu.tail(m) > level {
            lo = m;
        } else {
            hi = m;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Three decades ending where `mu(y, inf) = TAIL_LEVEL`, four points per decade.
pub fn default_tail_schedule(mu: &Measure) -> Result<Vec<f64>> {
    let y1 = tail_quantile(mu, TAIL_LEVEL)?;
    let y0 = (y1 * 1e-3).max(4.0 * mu.support_lo());
    let decades = (y1 / y0).log10();
    Ok(log_schedule(y0, y1, ((4.0 * decades).round() as usize + 1).max(3)))
}

/// From the first power of ten at or above the safe radius (at least 10)
/// up to `10^top`, four points per decade.
pub fn default_transform_schedule(mu: &Measure, top: i32) -> Vec<f64> {
    let e0 = (safe_radius(mu).log10().ceil() as i32).clamp(1, top - 1);
    log_schedule(10f64.powi(e0), 10f64.powi(top), 4 * (top - e0) as usize + 1)
}

fn regular_tail(mu: &Measure) -> Result<f64> {
    match mu.tail_index() {
        Some(a) if !mu.is_compact() && !mu.is_point_mass() => Ok(a),
        _ => Err(Error::InvalidArgument(format!(
            "{} is inapplicable: its tail is not regularly varying with positive mass",
            mu.label()
        ))),
    }
}

fn is_integer(a: f64) -> bool {
    a.fract() == 0.0
}

fn default_conv_tol(alpha: f64) -> f64 {
    if is_integer(alpha) && alpha >= 1.0 {
        TOL_BOUNDARY
    } else {
        TOL_CONVOLUTION
    }
}

/// Grid reaching two decades past the schedule.
fn grid_for(ys: &[f64], grid: &GridSpec) -> GridSpec {
    let top = ys.last().copied().unwrap_or(1.0);
    GridSpec { x_max: grid.x_max.max(100.0 * top), ..*grid }
}

fn conv_warnings(n: u32, r: &ConvolutionResult, out: &mut Vec<String>) {
    let d = &r.diagnostics;
    if !d.excluded.is_empty() {
        out.push(format!("n={n}: {} abscissae excluded after NoConvergence", d.excluded.len()));
    }
    if r.mass_defect > 1e-4 {
        out.push(format!("n={n}: mass defect {:.3e}", r.mass_defect));
    }
}

/// Shared settings of the experiment runners.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub schedule: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub seed: u64,
}

/// `mu^{boxplus n}(y, inf) / (n mu(y, inf))` for `n = 2..=n_max`, target 1.
pub fn run_main_theorem(mu: &Measure, n_max: u32, cfg: &RunConfig) -> Result<Report> {
    if n_max > N_MAX {
        return Err(Error::InvalidArgument(format!("n_max exceeded: {n_max} > {N_MAX}")));
    }
    if n_max < 2 {
        return Err(Error::InvalidArgument("n_max must be at least 2".into()));
    }
    let alpha = regular_tail(mu)?;
    let ys = match &cfg.schedule {
        Some(s) => s.clone(),
        None => default_tail_schedule(mu)?,
    };
    let tol = cfg.tolerance.unwrap_or_else(|| default_conv_tol(alpha));
    let grid = grid_for(&ys, &cfg.grid);
    let mut env = Environment::new(Some(grid), cfg.seed);
    env.schedules.insert("y".into(), ys.clone());
    let mut rep = Report::new("tail-ratio", mu, env);
    let sel = Selector::Main;
    let mut cur: Option<Measure> = None;
    for n in 2..=n_max {
        let name = format!("tail_ratio_n{n}");
        let base = cur.take().unwrap_or_else(|| mu.clone());
        match free_convolve(&base, mu, &grid) {
            Ok(r) => {
                conv_warnings(n, &r, &mut rep.warnings);
                let ratios: Vec<f64> = ys.iter().map(|y| r.measure.tail(*y) / (n as f64 * mu.tail(*y))).collect();
                let a = AsymptoticReport::from_ratios(&ys, &ratios, &RatioSettings::new(Some(1.0), tol));
                rep.claims.push(Claim::from_report(name, sel, &a));
                cur = Some(r.measure);
            }
            Err(e) => {
                rep.claims.push(Claim::failed(&name, sel, Some(1.0), Some(tol)));
                rep.error = Some(format!("n={n}: {e}"));
                break;
            }
        }
    }
    Ok(rep)
}

/// Tail of the `n`-th free additive power over the tail of the `n`-th free
/// max power, target 1.
pub fn run_one_large_jump(mu: &Measure, n: u32, cfg: &RunConfig) -> Result<Report> {
    if n > N_MAX {
        return Err(Error::InvalidArgument(format!("n_max exceeded: {n} > {N_MAX}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let alpha = regular_tail(mu)?;
    let ys = match &cfg.schedule {
        Some(s) => s.clone(),
        None => default_tail_schedule(mu)?,
    };
    let tol = cfg.tolerance.unwrap_or_else(|| default_conv_tol(alpha));
    let grid = grid_for(&ys, &cfg.grid);
    let mut env = Environment::new(Some(grid), cfg.seed);
    env.schedules.insert("y".into(), ys.clone());
    let mut rep = Report::new("one-large-jump", mu, env);
    let sel = Selector::OneLargeJump;
    let name = format!("plus_over_max_n{n}");
    let settings = RatioSettings::new(Some(1.0), tol);
    if n == 1 {
        let a = AsymptoticReport::from_ratios(&ys, &vec![1.0; ys.len()], &settings);
        rep.claims.push(Claim::from_report(name, sel, &a));
        return Ok(rep);
    }
    let max = MaxConvolution::new(mu.clone(), n)?;
    let mut cur = mu.clone();
    for k in 2..=n {
        match free_convolve(&cur, mu, &grid) {
            Ok(r) => {
                conv_warnings(k, &r, &mut rep.warnings);
                cur = r.measure;
            }
            Err(e) => {
                rep.claims.push(Claim::failed(&name, sel, Some(1.0), Some(tol)));
                rep.error = Some(format!("n={k}: {e}"));
                return Ok(rep);
            }
        }
    }
    let ratios: Vec<f64> = ys.iter().map(|y| cur.tail(*y) / max.tail(*y)).collect();
    let a = AsymptoticReport::from_ratios(&ys, &ratios, &settings);
    rep.claims.push(Claim::from_report(name, sel, &a));
    Ok(rep)
}

/// Limits of `Im r_G(iy)` and `Re r_G(iy)` over `y^p mu(y, inf)` for a tail
/// index `alpha` in `[p, p+1]`; `None` where no constant is asserted.
pub fn remainder_constants(alpha: f64, p: u32) -> (Option<f64>, Option<f64>) {
    let p = p as f64;
    let d = alpha - p;
    if d == 0.0 {
        (Some(-p * PI / 2.0), None)
    } else if d == 1.0 {
        (None, Some(-(p + 1.0) * PI / 2.0))
    } else {
        let h = alpha * PI / 2.0;
        (Some(-h / (PI * d / 2.0).cos()), Some(-h / (PI * d / 2.0).sin()))
    }
}

/// The constants with the coefficients `pi (p+1-alpha)/2` and
/// `pi (p+2-alpha)/2` in place of `alpha pi/2`. Kept for comparison only.
pub fn remainder_constants_printed(alpha: f64, p: u32) -> (f64, f64) {
    let p = p as f64;
    let d = alpha - p;
    (-(PI * (p + 1.0 - alpha) / 2.0) / (PI * d / 2.0).cos(), -(PI * (p + 2.0 - alpha) / 2.0) / (PI * d / 2.0).sin())
}

/// Order `p` and compatibility check for a remainder case.
pub fn case_order(mu: &Measure, case: RemainderCase) -> Result<u32> {
    let alpha = regular_tail(mu)?;
    let p = mu.moment_order().unwrap_or(0);
    let ok = match case {
        RemainderCase::A => p >= 1 && alpha > p as f64 && alpha < p as f64 + 1.0,
        RemainderCase::B => p >= 1 && alpha == p as f64,
        RemainderCase::C => p == 0 && (0.0..1.0).contains(&alpha),
        RemainderCase::D => alpha == p as f64 + 1.0,
    };
    if ok {
        Ok(p)
    } else {
        Err(Error::InvalidArgument(format!(
            "{} (tail index {alpha}, moment order {p}) is incompatible with case {case:?}",
            mu.label()
        )))
    }
}

/// Remainder equivalences and constants along `z = iy`.
pub fn run_remainder_equiv(mu: &Measure, case: RemainderCase, cfg: &RunConfig) -> Result<Report> {
    let p = case_order(mu, case)?;
    let alpha = mu.tail_index().unwrap();
    // slowly varying corrections need a much longer run in case B
    let top = if case == RemainderCase::B { 14 } else { 5 };
    let ys = cfg.schedule.clone().unwrap_or_else(|| default_transform_schedule(mu, top));
    let tol = cfg.tolerance.unwrap_or(if case == RemainderCase::D { TOL_BOUNDARY } else { TOL_TRANSFORM });
    let sel = case.selector();
    let mut env = Environment::new(None, cfg.seed);
    env.schedules.insert("y".into(), ys.clone());
    let mut rep = Report::new(sel.name(), mu, env);

    let zs: Vec<C64> = ys.iter().map(|y| C64::new(0.0, *y)).collect();
    let rg: Vec<Result<C64>> = zs.iter().map(|z| remainder_g(mu, p, *z)).collect();
    let rphi = voiculescu_ray(mu, &zs, p)?;
    let mut rows = vec![];
    for (i, y) in ys.iter().enumerate() {
        match (&rg[i], &rphi[i]) {
            (Ok(g), Ok(v)) => rows.push((*y, *g, v.r_phi, y.powi(p as i32) * mu.tail(*y))),
            (Err(e), _) | (_, Err(e)) => rep.warnings.push(format!("y={y:e} excluded: {e}")),
        }
    }
    if rows.len() < 3 {
        rep.error = Some("fewer than three usable points".into());
        return Ok(rep);
    }
    let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
    // corrections are logarithmic at the integer boundaries
    let extrap = match case {
        RemainderCase::B | RemainderCase::D => Extrapolation::InverseLog,
        _ => Extrapolation::Geometric,
    };
    let s = RatioSettings::new(Some(1.0), tol).extrapolation(extrap);
    let ratio = |f: &dyn Fn(&RemainderRow) -> f64, target: f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        AsymptoticReport::from_ratios(&y, &v, &RatioSettings { target: Some(target), ..s })
    };
    rep.claims.push(Claim::from_report("r_phi_over_r_G", sel, &ratio(&|r| (r.2 / r.1).re, 1.0)));
    let (im_c, re_c) = remainder_constants(alpha, p);
    if let Some(c) = im_c {
        rep.claims.push(Claim::from_report("im_r_G_constant", sel, &ratio(&|r| r.1.im / r.3, c)));
        rep.claims.push(Claim::from_report("im_r_phi_over_im_r_G", sel, &ratio(&|r| r.2.im / r.1.im, 1.0)));
    }
    if let Some(c) = re_c {
        rep.claims.push(Claim::from_report("re_r_G_constant", sel, &ratio(&|r| r.1.re / r.3, c)));
    }
    let k = 5;
    match case {
        RemainderCase::A | RemainderCase::B | RemainderCase::C => {
            rep.claims.push(Claim::from_report("re_r_phi_over_re_r_G", sel, &ratio(&|r| r.2.re / r.1.re, 1.0)));
            let g: Vec<f64> = rows.iter().map(|r| r.0 * r.2.re.abs()).collect();
            rep.claims.push(Claim::monotone("re_r_phi_dominates_1_over_y", sel, &y, &g, true, k));
        }
        RemainderCase::D => {
            let lo: Vec<f64> = rows.iter().map(|r| r.0.powf(1.0 + BETA / 2.0) * r.2.re.abs()).collect();
            let hi: Vec<f64> = rows.iter().map(|r| r.0.powf(1.0 - BETA / 2.0) * r.2.re.abs()).collect();
            rep.claims.push(Claim::monotone("re_r_phi_above_y^-(1+beta/2)", sel, &y, &lo, true, k));
            rep.claims.push(Claim::monotone("re_r_phi_below_y^-(1-beta/2)", sel, &y, &hi, false, k));
            let lo: Vec<f64> = rows.iter().map(|r| r.0 * r.1.im.abs()).collect();
            let hi: Vec<f64> = rows.iter().map(|r| r.0.powf(1.0 - BETA / 2.0) * r.1.im.abs()).collect();
            rep.claims.push(Claim::monotone("im_r_G_above_1_over_y", sel, &y, &lo, true, k));
            rep.claims.push(Claim::monotone("im_r_G_below_y^-(1-beta/2)", sel, &y, &hi, false, k));
        }
    }
    Ok(rep)
}

/// Weights of the two Karamata constructions for a tail index `a`:
/// `(distribution weight, its index, tail weight, its index)`.
pub fn karamata_weights(a: f64) -> (u32, f64, Option<(u32, f64)>) {
    let wd = a.floor() as u32 + 1;
    let tail = if a > 0.0 {
        let wt = a.ceil() as u32 - 1;
        Some((wt, a - wt as f64))
    } else {
        None
    };
    (wd, wd as f64 - a, tail)
}

/// Both Karamata propositions for `d rho = t^w d mu` with default weights,
/// or `weight` for both when given.
pub fn run_karamata(mu: &Measure, weight: Option<u32>, cfg: &RunConfig) -> Result<Report> {
    let a = regular_tail(mu)?;
    let ys = cfg.schedule.clone().unwrap_or_else(|| default_transform_schedule(mu, 5));
    let tol = cfg.tolerance.unwrap_or(TOL_TRANSFORM);
    let sel = Selector::Karamata;
    let mut env = Environment::new(None, cfg.seed);
    env.schedules.insert("y".into(), ys.clone());
    let mut rep = Report::new("karamata", mu, env);
    let s = RatioSettings::new(Some(1.0), tol);
    let (wd, ad, tail) = karamata_weights(a);
    let wd = weight.unwrap_or(wd);
    let ad = if weight.is_some() { wd as f64 - a } else { ad };
    if (0.0..2.0).contains(&ad) {
        let r = karamata_check(&RhoSpec { measure: mu.clone(), weight: wd }, ad, &ys, KaramataVariant::Distribution, &s)?;
        rep.claims.push(Claim::from_report(format!("distribution_w{wd}"), sel, &r));
    }
    if let Some((wt, at)) = tail {
        let (wt, at) = match weight {
            Some(w) => (w, a - w as f64),
            None => (wt, at),
        };
        if (0.0..2.0).contains(&at) && at > 0.0 {
            let r = karamata_check(&RhoSpec { measure: mu.clone(), weight: wt }, at, &ys, KaramataVariant::Tail, &s)?;
            rep.claims.push(Claim::from_report(format!("tail_w{wt}"), sel, &r));
        }
    }
    if rep.claims.is_empty() {
        return Err(Error::InvalidArgument(format!("no Karamata construction applies to weight {wd}")));
    }
    Ok(rep)
}

/// Radii from a decade inside `1/safe_radius` toward `1e-6`, four per decade,
/// stopping where rounding in `r_L` (about `eps / (r^p |r_H|)`) passes 1e-3.
pub fn default_cone(mu: &Measure, p: u32) -> ConePointSet {
    let mut r = (0.1 / safe_radius(mu)).min(1e-2);
    let step = 10f64.powf(-0.25);
    let mut sched = vec![r];
    while r * step >= 1e-6 * (1.0 - 1e-9) {
        let next = r * step;
        let rh = remainder_g(mu, p, C64::new(0.0, 1.0 / next)).map(|v| v.norm()).unwrap_or(0.0);
        if f64::EPSILON / (next.powi(p as i32) * rh) > 1e-3 {
            break;
        }
        sched.push(next);
        r = next;
    }
    let rays = ConePointSet::default_rays(1.0, 1.0, 0.1, 2).expect("valid default cone").ray_angles;
    ConePointSet::new(1.0, sched, rays).expect("valid default cone")
}

/// Inverse and reciprocal remainder ratios on two rays, target -1.
pub fn run_inverse_remainder(mu: &Measure, p: Option<u32>, cfg: &RunConfig) -> Result<Report> {
    let p = p.unwrap_or_else(|| mu.moment_order().unwrap_or(0));
    let cone = match &cfg.schedule {
        Some(s) => ConePointSet::new(1.0, s.clone(), vec![PI / 2.0, PI / 3.0])?,
        None => default_cone(mu, p),
    };
    let tol = cfg.tolerance.unwrap_or(TOL_TRANSFORM);
    let sel = Selector::InverseRemainder;
    let mut env = Environment::new(None, cfg.seed);
    env.schedules.insert("radius".into(), cone.schedule.clone());
    env.schedules.insert("ray_angle".into(), cone.ray_angles.clone());
    let mut rep = Report::new("inverse-remainder", mu, env);
    let r = inverse_remainder_check(mu, p, &cone, tol)?;
    for (t, rad, msg) in &r.failed {
        rep.warnings.push(format!("ray {t:.4}, radius {rad:e} excluded: {msg}"));
    }
    for (i, t) in cone.ray_angles.iter().enumerate() {
        if let Some(a) = r.l_over_h.get(i) {
            rep.claims.push(Claim::from_report(format!("r_L_over_r_H_ray{:.4}", t), sel, a));
        }
        if let Some(a) = r.k_over_l.get(i) {
            rep.claims.push(Claim::from_report(format!("r_K_over_r_L_ray{:.4}", t), sel, a));
        }
    }
    Ok(rep)
}

/// `mu_1 boxplus ... ` : the first measure convolved with the second (or
/// itself) `n - 1` times, with mass and mean conservation claims.
pub fn run_convolve(mus: &[Measure], n: u32, cfg: &RunConfig) -> Result<(ConvolutionResult, Report)> {
    if n > N_MAX {
        return Err(Error::InvalidArgument(format!("n_max exceeded: {n} > {N_MAX}")));
    }
    if n < 2 || mus.is_empty() || mus.len() > 2 {
        return Err(Error::InvalidArgument("convolve needs n >= 2 and one or two measures".into()));
    }
    let mu = &mus[0];
    let nu = mus.get(1).unwrap_or(mu);
    let mut env = Environment::new(Some(cfg.grid), cfg.seed);
    env.schedules.insert("n".into(), vec![n as f64]);
    let mut rep = Report::new("convolve", mu, env);
    if mus.len() == 2 {
        rep.measure = format!("{} + {}", mu.label(), nu.label());
    }
    let mut r = free_convolve(mu, nu, &cfg.grid)?;
    conv_warnings(2, &r, &mut rep.warnings);
    for k in 3..=n {
        r = free_convolve(&r.measure, nu, &cfg.grid)?;
        conv_warnings(k, &r, &mut rep.warnings);
    }
    let mut scalar = |name: &str, est: f64, tol: f64| {
        rep.claims.push(Claim {
            name: name.into(),
            paper_anchor: "conservation".into(),
            target: Some(0.0),
            estimate: est,
            tolerance: Some(tol),
            verdict: if est <= tol { Verdict::Pass } else { Verdict::Fail },
            series_csv_path: None,
            series: vec![],
        })
    };
    scalar("mass_defect", r.mass_defect, 1e-4);
    if let Some(m) = r.mean_defect {
        let scale = mu.moment(1) + (n - 1) as f64 * nu.moment(1);
        scalar("relative_mean_defect", m / scale.abs().max(1e-300), 1e-3);
    }
    Ok((r, rep))
}

//! Probability measures on `[0, inf)`: parametric families and grid measures
//! with an analytic power-law tail.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tol};

/// Number of cached moments for compactly supported families.
const MOMENT_CACHE: usize = 64;
/// Beyond `SERIES_RATIO * support_hi` compact kernels are summed from moments.
const SERIES_RATIO: f64 = 20.0;
/// Frechet mass below `exp(-FRECHET_CUT)` is ignored.
const FRECHET_CUT: f64 = 700.0;

/// Analytic tail `mu(y, inf) = c y^-alpha` beyond the last grid node.
/// `c = 0` marks compact support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailExt {
    pub c: f64,
    pub alpha: f64,
}

#[derive(Serialize, Deserialize)]
struct GridRaw {
    nodes: Vec<f64>,
    density: Vec<f64>,
    atom_at_zero: f64,
    tail_ext: TailExt,
    #[serde(default = "one")]
    log_from: f64,
}

fn one() -> f64 {
    1.0
}

/// Piecewise density on `x_0 < ... < x_K`, zero below `x_0`, an optional
/// atom at 0 and a power tail above `x_K`.
///
/// Cells starting at or above `log_from` with positive end values are
/// interpolated as power laws, the rest linearly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GridRaw", into = "GridRaw")]
pub struct GridMeasure {
    nodes: Vec<f64>,
    density: Vec<f64>,
    atom_at_zero: f64,
    tail_ext: TailExt,
    log_from: f64,
    cell_mass: Vec<f64>,
    suffix: Vec<f64>,
}

impl PartialEq for GridMeasure {
    fn eq(&self, o: &Self) -> bool {
        self.nodes == o.nodes
            && self.density == o.density
            && self.atom_at_zero == o.atom_at_zero
            && self.tail_ext == o.tail_ext
            && self.log_from == o.log_from
    }
}

impl TryFrom<GridRaw> for GridMeasure {
    type Error = Error;
    fn try_from(r: GridRaw) -> Result<Self> {
        GridMeasure::with_log_from(r.nodes, r.density, r.atom_at_zero, r.tail_ext, r.log_from)
    }
}

impl From<GridMeasure> for GridRaw {
    fn from(g: GridMeasure) -> Self {
        GridRaw {
            nodes: g.nodes,
            density: g.density,
            atom_at_zero: g.atom_at_zero,
            tail_ext: g.tail_ext,
            log_from: g.log_from,
        }
    }
}

impl GridMeasure {
    pub fn new(nodes: Vec<f64>, density: Vec<f64>, atom_at_zero: f64, tail_ext: TailExt) -> Result<Self> {
        Self::with_log_from(nodes, density, atom_at_zero, tail_ext, 1.0)
    }

    pub fn with_log_from(
        nodes: Vec<f64>,
        density: Vec<f64>,
        atom_at_zero: f64,
        tail_ext: TailExt,
        log_from: f64,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidMeasure(format!("grid: {m}")));
        if nodes.len() < 2 || nodes.len() != density.len() {
            return bad("need at least two nodes and one density value per node");
        }
        if !(nodes[0] >= 0.0) || nodes.windows(2).any(|w| !(w[1] > w[0])) || !nodes[nodes.len() - 1].is_finite() {
            return bad("nodes must be finite, nonnegative and strictly increasing");
        }
        if density.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
            return bad("density values must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&atom_at_zero) {
            return bad("atom at zero must lie in [0, 1]");
        }
        if !(tail_ext.c >= 0.0) || (tail_ext.c > 0.0 && !(tail_ext.alpha > 0.0)) || !tail_ext.c.is_finite() {
            return bad("tail extension needs c >= 0 and alpha > 0");
        }
        let mut g = GridMeasure {
            nodes,
            density,
            atom_at_zero,
            tail_ext,
            log_from,
            cell_mass: vec![],
            suffix: vec![],
        };
        let k = g.nodes.len() - 1;
        g.cell_mass = (0..k).map(|i| g.cell_power_integral(i, 0, g.nodes[i], g.nodes[i + 1])).collect();
        g.suffix = vec![0.0; k + 1];
        for i in (0..k).rev() {
            g.suffix[i] = g.suffix[i + 1] + g.cell_mass[i];
        }
        Ok(g)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn density_values(&self) -> &[f64] {
        &self.density
    }
    pub fn atom_at_zero(&self) -> f64 {
        self.atom_at_zero
    }
    pub fn tail_ext(&self) -> TailExt {
        self.tail_ext
    }
    pub fn log_from(&self) -> f64 {
        self.log_from
    }
    pub fn x_last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
    pub fn is_compact(&self) -> bool {
        self.tail_ext.c == 0.0
    }

    /// Mass carried by the analytic extension.
    pub fn ext_mass(&self) -> f64 {
        if self.is_compact() {
            0.0
        } else {
            self.tail_ext.c * self.x_last().powf(-self.tail_ext.alpha)
        }
    }

    /// Total mass: atom, grid integral and extension.
    pub fn mass(&self) -> f64 {
        self.atom_at_zero + self.suffix[0] + self.ext_mass()
    }

    fn power_cell(&self, i: usize) -> Option<f64> {
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let (fa, fb) = (self.density[i], self.density[i + 1]);
        if a >= self.log_from && a > 0.0 && fa > 0.0 && fb > 0.0 {
            Some((fb / fa).ln() / (b / a).ln())
        } else {
            None
        }
    }

    fn cell_density(&self, i: usize, t: f64) -> f64 {
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let (fa, fb) = (self.density[i], self.density[i + 1]);
        match self.power_cell(i) {
            Some(s) => fa * (t / a).powf(s),
            None => fa + (fb - fa) * (t - a) / (b - a),
        }
    }

    /// `int_u^v t^j f(t) dt` inside cell `i`.
    fn cell_power_integral(&self, i: usize, j: u32, u: f64, v: f64) -> f64 {
        if v <= u {
            return 0.0;
        }
        let (a, b) = (self.nodes[i], self.nodes[i + 1]);
        let (fa, fb) = (self.density[i], self.density[i + 1]);
        match self.power_cell(i) {
            Some(s) => {
                let e = s + j as f64 + 1.0;
                let l = (v / u).ln();
                let g = if (e * l).abs() < 1e-12 { l } else { (e * l).exp_m1() / e };
                fa * (u / a).powf(s) * u.powi(j as i32 + 1) * g
            }
            None => {
                let sl = (fb - fa) / (b - a);
                let a0 = fa - sl * a;
                let p = |n: i32| (v.powi(n) - u.powi(n)) / n as f64;
                a0 * p(j as i32 + 1) + sl * p(j as i32 + 2)
            }
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        let k = self.nodes.len() - 1;
        if t < self.nodes[0] {
            return 0.0;
        }
        if t > self.nodes[k] {
            let TailExt { c, alpha } = self.tail_ext;
            return if c > 0.0 { c * alpha * t.powf(-alpha - 1.0) } else { 0.0 };
        }
        let i = self.cell_of(t);
        self.cell_density(i, t)
    }

    fn cell_of(&self, t: f64) -> usize {
        let k = self.nodes.len() - 1;
        self.nodes.partition_point(|x| *x <= t).saturating_sub(1).min(k - 1)
    }

    pub fn tail(&self, y: f64) -> f64 {
        let k = self.nodes.len() - 1;
        if y < 0.0 {
            return 1.0;
        }
        if y >= self.nodes[k] {
            let TailExt { c, alpha } = self.tail_ext;
            return if c > 0.0 { (c * y.powf(-alpha)).min(1.0) } else { 0.0 };
        }
        let grid = if y < self.nodes[0] {
            self.suffix[0]
        } else {
            let i = self.cell_of(y);
            self.cell_power_integral(i, 0, y, self.nodes[i + 1]) + self.suffix[i + 1]
        };
        (grid + self.ext_mass()).clamp(0.0, 1.0)
    }

    /// `int_{(a, b]} t^j dmu` restricted to the grid cells and the extension.
    pub fn power_integral(&self, j: u32, a: f64, b: f64) -> f64 {
        let k = self.nodes.len() - 1;
        let mut s = 0.0;
        if a < 0.0 && b >= 0.0 && j == 0 {
            s += self.atom_at_zero;
        }
        let (lo, hi) = (a.max(self.nodes[0]), b.min(self.nodes[k]));
        if hi > lo {
            let i0 = self.cell_of(lo);
            let i1 = self.cell_of(hi);
            for i in i0..=i1 {
                s += self.cell_power_integral(i, j, lo.max(self.nodes[i]), hi.min(self.nodes[i + 1]));
            }
        }
        if !self.is_compact() && b > self.nodes[k] {
            let TailExt { c, alpha } = self.tail_ext;
            let lo = a.max(self.nodes[k]);
            let q = j as f64 - alpha;
            if b.is_infinite() {
                if q >= 0.0 {
                    return f64::INFINITY;
                }
                s += c * alpha * lo.powf(q) / -q;
            } else if q.abs() < 1e-14 {
                s += c * alpha * (b / lo).ln();
            } else {
                s += c * alpha * (b.powf(q) - lo.powf(q)) / q;
            }
        }
        s
    }

    pub fn moment(&self, j: u32) -> f64 {
        if j == 0 {
            return self.mass();
        }
        self.power_integral(j, 0.0, f64::INFINITY)
    }

    /// Largest finite integer moment order, `None` if all are finite.
    pub fn moment_order(&self) -> Option<u32> {
        if self.is_compact() {
            None
        } else {
            Some(pure_power_order(self.tail_ext.alpha))
        }
    }

    /// Sum of `kernel * f` over the grid cells, the atom and the extension.
    fn integrate(&self, kernel: Kernel, tol: &Tol) -> Result<C64> {
        let (gx, gw) = quad::gl8();
        let mut s = C64::new(0.0, 0.0);
        if self.atom_at_zero > 0.0 {
            s += kernel.eval(0.0) * self.atom_at_zero;
        }
        let pole = kernel.pole();
        let tol = Tol { rel: tol.rel.max(1e-11), ..*tol };
        for i in 0..self.nodes.len() - 1 {
            if self.density[i] == 0.0 && self.density[i + 1] == 0.0 {
                continue;
            }
            let (a, b) = (self.nodes[i], self.nodes[i + 1]);
            let near = match pole {
                Some((x0, d)) => {
                    let dist = if x0 < a { a - x0 } else if x0 > b { x0 - b } else { 0.0 };
                    dist.hypot(d) < 3.0 * (b - a)
                }
                None => false,
            };
            if near {
                let mut br = vec![a, b];
                if let Some((x0, _)) = pole {
                    if x0 > a && x0 < b {
                        br.insert(1, x0);
                    }
                }
                s += quad::integrate(|t| kernel.eval(t) * self.cell_density(i, t), &br, &tol)?;
            } else {
                let c = 0.5 * (a + b);
                let h = 0.5 * (b - a);
                for (x, w) in gx.iter().zip(gw) {
                    let t = c + h * x;
                    s += kernel.eval(t) * (self.cell_density(i, t) * w * h);
                }
            }
        }
        if !self.is_compact() {
            let ext = Heavy::Pareto { alpha: self.tail_ext.alpha, xm: self.x_last() };
            s += ext.integrate(kernel, &tol)? * self.ext_mass();
        }
        Ok(s)
    }

    /// Writes CSV with `#`-prefixed metadata lines and columns `x,f`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# TailExtC={:e}", self.tail_ext.c)?;
        writeln!(w, "# TailExtAlpha={:e}", self.tail_ext.alpha)?;
        writeln!(w, "# AtomAtZero={:e}", self.atom_at_zero)?;
        writeln!(w, "# LogFrom={:e}", self.log_from)?;
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["x", "f"])?;
        for (x, f) in self.nodes.iter().zip(&self.density) {
            cw.write_record([format!("{x:e}"), format!("{f:e}")])?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(mut r: R) -> Result<Self> {
        let mut text = String::new();
        r.read_to_string(&mut text)?;
        let mut meta = std::collections::BTreeMap::new();
        for line in text.lines().filter(|l| l.starts_with('#')) {
            if let Some((k, v)) = line[1..].trim().split_once('=') {
                let v: f64 = v.trim().parse().map_err(|_| Error::InvalidMeasure(format!("bad metadata {line}")))?;
                meta.insert(k.trim().to_string(), v);
            }
        }
        let get = |k: &str, d: Option<f64>| {
            meta.get(k).copied().or(d).ok_or_else(|| Error::InvalidMeasure(format!("missing {k}")))
        };
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let (mut xs, mut fs) = (vec![], vec![]);
        for rec in rd.records() {
            let rec = rec?;
            let p = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidMeasure("bad csv row".into()))
            };
            xs.push(p(0)?);
            fs.push(p(1)?);
        }
        GridMeasure::with_log_from(
            xs,
            fs,
            get("AtomAtZero", Some(0.0))?,
            TailExt { c: get("TailExtC", None)?, alpha: get("TailExtAlpha", None)? },
            get("LogFrom", Some(1.0))?,
        )
    }
}

/// Parametric family or grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureKind {
    #[serde(alias = "point")]
    PointMass { a: f64 },
    Pareto { alpha: f64, xm: f64 },
    /// Tail `(y/xm)^-alpha (1 + log(y/xm))^-gamma` for `y >= xm`.
    #[serde(alias = "logpareto")]
    LogPerturbedPareto { alpha: f64, gamma: f64, xm: f64 },
    /// Tail `1 - exp(-y^-alpha)`.
    #[serde(alias = "frechet")]
    FrechetLike { alpha: f64 },
    #[serde(alias = "uniform")]
    UniformInterval { lo: f64, hi: f64 },
    Semicircle { center: f64, radius: f64 },
    /// Marchenko-Pastur law with rate `lambda >= 1` and unit jump.
    #[serde(alias = "freepoisson")]
    FreePoisson { lambda: f64 },
    Grid(GridMeasure),
}

/// A validated probability measure on `[0, inf)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MeasureKind", into = "MeasureKind")]
pub struct Measure {
    kind: MeasureKind,
    mcache: Vec<f64>,
}

impl PartialEq for Measure {
    fn eq(&self, o: &Self) -> bool {
        self.kind == o.kind
    }
}

impl From<Measure> for MeasureKind {
    fn from(m: Measure) -> Self {
        m.kind
    }
}

impl TryFrom<MeasureKind> for Measure {
    type Error = Error;
    fn try_from(kind: MeasureKind) -> Result<Self> {
        Measure::new(kind)
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `p = ceil(alpha) - 1` for integer `alpha`, `floor(alpha)` otherwise.
pub fn pure_power_order(alpha: f64) -> u32 {
    if alpha <= 0.0 {
        0
    } else if alpha.fract() == 0.0 {
        alpha as u32 - 1
    } else {
        alpha.floor() as u32
    }
}

impl Measure {
    pub fn new(kind: MeasureKind) -> Result<Self> {
        use MeasureKind::*;
        let bad = |m: String| Err(Error::InvalidMeasure(m));
        let fin = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &kind {
            PointMass { a } if !(*a >= 0.0) || !a.is_finite() => return bad(format!("point mass at {a}")),
            Pareto { alpha, xm } if !(*alpha > 0.0 && *xm > 0.0) || !fin(&[*alpha, *xm]) => {
                return bad("pareto needs alpha > 0, xm > 0".into())
            }
            LogPerturbedPareto { alpha, gamma, xm }
                if !(*alpha >= 0.0 && *gamma > 0.0 && *xm > 0.0) || !fin(&[*alpha, *gamma, *xm]) =>
            {
                return bad("log-perturbed pareto needs alpha >= 0, gamma > 0, xm > 0".into())
            }
            FrechetLike { alpha } if !(*alpha > 0.0) || !alpha.is_finite() => {
                return bad("frechet needs alpha > 0".into())
            }
            UniformInterval { lo, hi } if !(*lo >= 0.0 && hi > lo) || !fin(&[*lo, *hi]) => {
                return bad("uniform needs 0 <= lo < hi".into())
            }
            Semicircle { center, radius } if !(*radius > 0.0 && center >= radius) || !fin(&[*center, *radius]) => {
                return bad("semicircle needs center >= radius > 0".into())
            }
            FreePoisson { lambda } if !(*lambda >= 1.0) || !lambda.is_finite() => {
                return bad("free poisson needs lambda >= 1".into())
            }
            _ => {}
        }
        let mut m = Measure { kind, mcache: vec![] };
        if m.is_compact() {
            m.mcache = (0..MOMENT_CACHE as u32).map(|j| m.compact_moment(j)).collect();
        }
        Ok(m)
    }

    pub fn point_mass(a: f64) -> Result<Self> {
        Self::new(MeasureKind::PointMass { a })
    }
    pub fn pareto(alpha: f64, xm: f64) -> Result<Self> {
        Self::new(MeasureKind::Pareto { alpha, xm })
    }
    pub fn log_perturbed_pareto(alpha: f64, gamma: f64, xm: f64) -> Result<Self> {
        Self::new(MeasureKind::LogPerturbedPareto { alpha, gamma, xm })
    }
    pub fn frechet(alpha: f64) -> Result<Self> {
        Self::new(MeasureKind::FrechetLike { alpha })
    }
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Self::new(MeasureKind::UniformInterval { lo, hi })
    }
    pub fn semicircle(center: f64, radius: f64) -> Result<Self> {
        Self::new(MeasureKind::Semicircle { center, radius })
    }
    pub fn free_poisson(lambda: f64) -> Result<Self> {
        Self::new(MeasureKind::FreePoisson { lambda })
    }
    pub fn grid(g: GridMeasure) -> Result<Self> {
        Self::new(MeasureKind::Grid(g))
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    pub fn as_grid(&self) -> Option<&GridMeasure> {
        match &self.kind {
            MeasureKind::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Short human-readable label, also accepted by [`FromStr`].
    pub fn label(&self) -> String {
        use MeasureKind::*;
        match &self.kind {
            PointMass { a } => format!("point:{a}"),
            Pareto { alpha, xm } => format!("pareto:{alpha},{xm}"),
            LogPerturbedPareto { alpha, gamma, xm } => format!("logpareto:{alpha},{gamma},{xm}"),
            FrechetLike { alpha } => format!("frechet:{alpha}"),
            UniformInterval { lo, hi } => format!("uniform:{lo},{hi}"),
            Semicircle { center, radius } => format!("semicircle:{center},{radius}"),
            FreePoisson { lambda } => format!("freepoisson:{lambda}"),
            Grid(g) => format!("grid[{} nodes]", g.nodes.len()),
        }
    }

    pub fn is_compact(&self) -> bool {
        use MeasureKind::*;
        match &self.kind {
            UniformInterval { .. } | Semicircle { .. } | FreePoisson { .. } | PointMass { .. } => true,
            Grid(g) => g.is_compact(),
            _ => false,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        matches!(self.kind, MeasureKind::PointMass { .. })
    }

    /// Regular-variation index of the tail, when known.
    pub fn tail_index(&self) -> Option<f64> {
        use MeasureKind::*;
        match &self.kind {
            Pareto { alpha, .. } | LogPerturbedPareto { alpha, .. } | FrechetLike { alpha } => Some(*alpha),
            Grid(g) if !g.is_compact() => Some(g.tail_ext.alpha),
            _ => None,
        }
    }

    /// Largest integer `j` with a finite `j`-th moment; `None` when all are finite.
    pub fn moment_order(&self) -> Option<u32> {
        use MeasureKind::*;
        match &self.kind {
            Pareto { alpha, .. } | FrechetLike { alpha } => Some(pure_power_order(*alpha)),
            LogPerturbedPareto { alpha, gamma, .. } => {
                if alpha.fract() == 0.0 && *gamma > 1.0 {
                    Some(*alpha as u32)
                } else {
                    Some(pure_power_order(*alpha))
                }
            }
            Grid(g) => g.moment_order(),
            _ => None,
        }
    }

    /// Lower end of the support.
    pub fn support_lo(&self) -> f64 {
        use MeasureKind::*;
        match &self.kind {
            PointMass { a } => *a,
            Pareto { xm, .. } | LogPerturbedPareto { xm, .. } => *xm,
            FrechetLike { .. } => 0.0,
            UniformInterval { lo, .. } => *lo,
            Semicircle { center, radius } => center - radius,
            FreePoisson { lambda } => (1.0 - lambda.sqrt()).powi(2),
            Grid(g) => {
                if g.atom_at_zero > 0.0 {
                    0.0
                } else {
                    let i = g.density.iter().position(|f| *f > 0.0).unwrap_or(0);
                    g.nodes[i.saturating_sub(1)].max(g.nodes[0])
                }
            }
        }
    }

    /// Upper end of the support, `None` when unbounded.
    pub fn support_hi(&self) -> Option<f64> {
        use MeasureKind::*;
        match &self.kind {
            PointMass { a } => Some(*a),
            UniformInterval { hi, .. } => Some(*hi),
            Semicircle { center, radius } => Some(center + radius),
            FreePoisson { lambda } => Some((1.0 + lambda.sqrt()).powi(2)),
            Grid(g) if g.is_compact() => Some(g.x_last()),
            _ => None,
        }
    }

    /// `mu(y, inf)`.
    pub fn tail(&self, y: f64) -> f64 {
        use MeasureKind::*;
        match &self.kind {
            PointMass { a } => {
                if y < *a {
                    1.0
                } else {
                    0.0
                }
            }
            Pareto { alpha, xm } => {
                if y < *xm {
                    1.0
                } else {
                    (xm / y).powf(*alpha)
                }
            }
            LogPerturbedPareto { alpha, gamma, xm } => {
                if y < *xm {
                    1.0
                } else {
                    logp_tail(*alpha, *gamma, *xm, y)
                }
            }
            FrechetLike { alpha } => {
                if y <= 0.0 {
                    1.0
                } else {
                    -(-y.powf(-alpha)).exp_m1()
                }
            }
            UniformInterval { lo, hi } => ((hi - y) / (hi - lo)).clamp(0.0, 1.0),
            Semicircle { center, radius } => {
                let u = ((y - center) / radius).clamp(-1.0, 1.0);
                (0.5 - (u * (1.0 - u * u).sqrt() + u.asin()) / PI).clamp(0.0, 1.0)
            }
            FreePoisson { .. } => {
                let (a, b) = (self.support_lo(), self.support_hi().unwrap_or(0.0));
                if y <= a {
                    1.0
                } else if y >= b {
                    0.0
                } else {
                    self.compact_numeric(Kernel::Power { k: 0 }, y, b, &Tol::default()).map(|v| v.re.clamp(0.0, 1.0)).unwrap_or(0.0)
                }
            }
            Grid(g) => g.tail(y),
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.tail(y)
    }

    /// Density of the absolutely continuous part (zero for a point mass).
    pub fn density(&self, t: f64) -> f64 {
        use MeasureKind::*;
        match &self.kind {
            PointMass { .. } => 0.0,
            Pareto { .. } | LogPerturbedPareto { .. } | FrechetLike { .. } => {
                if t <= 0.0 {
                    0.0
                } else {
                    self.heavy().map(|h| h.tdens(t) / t).unwrap_or(0.0)
                }
            }
            UniformInterval { lo, hi } => {
                if t >= *lo && t <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Semicircle { center, radius } => {
                let d = radius * radius - (t - center).powi(2);
                if d > 0.0 {
                    2.0 / (PI * radius * radius) * d.sqrt()
                } else {
                    0.0
                }
            }
            FreePoisson { .. } => {
                let (a, b) = (self.support_lo(), self.support_hi().unwrap_or(0.0));
                if t > a && t < b && t > 0.0 {
                    ((b - t) * (t - a)).sqrt() / (2.0 * PI * t)
                } else {
                    0.0
                }
            }
            Grid(g) => g.density(t),
        }
    }

    /// `j`-th moment; `f64::INFINITY` when `j` exceeds the moment order.
    pub fn moment(&self, j: u32) -> f64 {
        if j == 0 {
            return 1.0;
        }
        if let Some(p) = self.moment_order() {
            if j > p {
                return f64::INFINITY;
            }
        }
        use MeasureKind::*;
        match &self.kind {
            PointMass { .. } | UniformInterval { .. } | Semicircle { .. } | FreePoisson { .. } => {
                self.mcache.get(j as usize).copied().unwrap_or_else(|| self.compact_moment(j))
            }
            Pareto { alpha, xm } => alpha * xm.powi(j as i32) / (alpha - j as f64),
            FrechetLike { alpha } => statrs::function::gamma::gamma(1.0 - j as f64 / alpha),
            LogPerturbedPareto { .. } => {
                self.heavy().and_then(|h| h.tail_moment(j as f64, h.lo())).unwrap_or(f64::INFINITY)
            }
            Grid(g) => g.moment(j),
        }
    }

    fn compact_moment(&self, j: u32) -> f64 {
        use MeasureKind::*;
        let j = j as usize;
        match &self.kind {
            PointMass { a } => a.powi(j as i32),
            UniformInterval { lo, hi } => {
                (hi.powi(j as i32 + 1) - lo.powi(j as i32 + 1)) / ((j + 1) as f64 * (hi - lo))
            }
            Semicircle { center, radius } => {
                let mut s = 0.0;
                let mut cat = 1.0;
                for k in 0..=j / 2 {
                    if k > 0 {
                        cat *= 2.0 * (2 * k - 1) as f64 / (k + 1) as f64;
                    }
                    s += binom(j, 2 * k) * center.powi((j - 2 * k) as i32) * (radius / 2.0).powi(2 * k as i32) * cat;
                }
                s
            }
            FreePoisson { lambda } => {
                if j == 0 {
                    return 1.0;
                }
                (1..=j).map(|k| binom(j, k) * binom(j, k - 1) / j as f64 * lambda.powi(k as i32)).sum()
            }
            _ => f64::NAN,
        }
    }

    /// `int_{(a, b]} t^j dmu` for `0 <= a < b <= inf`.
    pub fn power_integral(&self, j: u32, a: f64, b: f64) -> Result<f64> {
        use MeasureKind::*;
        if b <= a {
            return Ok(0.0);
        }
        match &self.kind {
            PointMass { a: x } => Ok(if *x > a && *x <= b { x.powi(j as i32) } else { 0.0 }),
            Grid(g) => Ok(g.power_integral(j, a, b)),
            Pareto { alpha, xm } => {
                let lo = a.max(*xm);
                if b <= lo {
                    return Ok(0.0);
                }
                let q = j as f64 - alpha;
                let c = alpha * xm.powf(*alpha);
                Ok(if b.is_infinite() {
                    if q >= 0.0 {
                        f64::INFINITY
                    } else {
                        c * lo.powf(q) / -q
                    }
                } else if q.abs() < 1e-14 {
                    c * (b / lo).ln()
                } else {
                    c * (b.powf(q) - lo.powf(q)) / q
                })
            }
            LogPerturbedPareto { .. } | FrechetLike { .. } => {
                let h = self.heavy().expect("heavy family");
                let lo = a.max(h.lo());
                if b <= lo {
                    return Ok(0.0);
                }
                let upper = if b.is_infinite() { 0.0 } else { h.tail_moment(j as f64, b).unwrap_or(f64::INFINITY) };
                let total = h.tail_moment(j as f64, lo).unwrap_or(f64::INFINITY);
                if total.is_infinite() && b.is_finite() {
                    let tol = Tol::default();
                    let br = log_breaks(lo.ln(), b.ln(), &[]);
                    return quad::integrate_real(|l| (l * j as f64).exp() * h.tdens(l.exp()), &br, &tol);
                }
                Ok(total - upper)
            }
            UniformInterval { .. } | Semicircle { .. } | FreePoisson { .. } => {
                let lo = a.max(self.support_lo());
                let hi = b.min(self.support_hi().unwrap_or(0.0));
                if hi <= lo {
                    return Ok(0.0);
                }
                Ok(self.compact_numeric(Kernel::Power { k: j }, lo, hi, &Tol::default())?.re)
            }
        }
    }

    fn heavy(&self) -> Option<Heavy> {
        use MeasureKind::*;
        match &self.kind {
            Pareto { alpha, xm } => Some(Heavy::Pareto { alpha: *alpha, xm: *xm }),
            LogPerturbedPareto { alpha, gamma, xm } => Some(Heavy::LogP { alpha: *alpha, gamma: *gamma, xm: *xm }),
            FrechetLike { alpha } => Some(Heavy::Frechet { alpha: *alpha }),
            _ => None,
        }
    }

    /// `int kernel(t) dmu(t)`.
    pub fn integrate(&self, kernel: Kernel) -> Result<C64> {
        self.integrate_tol(kernel, &Tol::default())
    }

    /// [`Measure::integrate`] with explicit quadrature tolerances.
    pub fn integrate_tol(&self, kernel: Kernel, tol: &Tol) -> Result<C64> {
        use MeasureKind::*;
        kernel.check_finite(self)?;
        match &self.kind {
            PointMass { a } => Ok(kernel.eval(*a)),
            Grid(g) => g.integrate(kernel, tol),
            Pareto { .. } | LogPerturbedPareto { .. } | FrechetLike { .. } => self.heavy().unwrap().integrate(kernel, tol),
            UniformInterval { .. } | Semicircle { .. } | FreePoisson { .. } => {
                let hi = self.support_hi().unwrap();
                if kernel.scale() > SERIES_RATIO * hi {
                    Ok(kernel.moment_series(&self.mcache))
                } else {
                    self.compact_numeric(kernel, self.support_lo(), hi, tol)
                }
            }
        }
    }

    /// Density quadrature on `[lo, hi]` inside a compact support, with the
    /// cosine substitution that absorbs square-root edges.
    fn compact_numeric(&self, kernel: Kernel, lo: f64, hi: f64, tol: &Tol) -> Result<C64> {
        let (a, b) = (self.support_lo(), self.support_hi().unwrap());
        if matches!(self.kind, MeasureKind::UniformInterval { .. }) {
            let d = 1.0 / (b - a);
            let mut br = vec![lo, hi];
            if let Some((x0, _)) = kernel.pole() {
                if x0 > lo && x0 < hi {
                    br.insert(1, x0);
                }
            }
            return quad::integrate(|t| kernel.eval(t) * d, &br, tol);
        }
        let th = |x: f64| (1.0 - 2.0 * (x - a) / (b - a)).clamp(-1.0, 1.0).acos();
        let (t0, t1) = (th(lo), th(hi));
        let mut br = vec![t0, t1];
        if let Some((x0, d)) = kernel.pole() {
            for s in [0.0, -4.0, -1.0, 1.0, 4.0] {
                let x = x0 + s * d;
                if x > lo && x < hi {
                    br.push(th(x));
                }
            }
        }
        br.sort_by(|x, y| x.partial_cmp(y).unwrap());
        br.dedup();
        let half = 0.5 * (b - a);
        quad::integrate(
            |t| {
                let x = a + half * (1.0 - t.cos());
                kernel.eval(x) * (self.density(x) * half * t.sin())
            },
            &br,
            tol,
        )
    }

    /// Closed-form Cauchy transform and its derivative for the compact
    /// families and point masses, `None` otherwise.
    pub(crate) fn closed_cauchy(&self, w: C64) -> Option<(C64, C64)> {
        use MeasureKind::*;
        let csqrt2 = |u: C64, v: C64| u.sqrt() * v.sqrt();
        match &self.kind {
            PointMass { a } => {
                let g = 1.0 / (w - a);
                Some((g, -g * g))
            }
            UniformInterval { lo, hi } => {
                let g = ((w - lo) / (w - hi)).ln() / (hi - lo);
                let dg = (1.0 / (w - lo) - 1.0 / (w - hi)) / (hi - lo);
                Some((g, dg))
            }
            Semicircle { center, radius } => {
                let zeta = w - center;
                let s = csqrt2(zeta - radius, zeta + radius);
                let g = 2.0 / (radius * radius) * (radius * radius / (zeta + s));
                Some((g, -g / s))
            }
            FreePoisson { lambda } => {
                let (a, b) = ((1.0 - lambda.sqrt()).powi(2), (1.0 + lambda.sqrt()).powi(2));
                let s = csqrt2(w - a, w - b);
                let g = 2.0 / (w + 1.0 - lambda + s);
                let ds = (w - 1.0 - lambda) / s;
                Some((g, -g * g * (1.0 + ds) / 2.0))
            }
            _ => None,
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    /// Parses `name:p1,p2,...`, for example `pareto:1.5,1` or `semicircle:2,2`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let v: Vec<f64> = if args.trim().is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidMeasure(format!("bad parameters in {s:?}")))?
        };
        let need = |n: usize| -> Result<()> {
            if v.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidMeasure(format!("{name} takes {n} parameter(s)")))
            }
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "point" | "pointmass" => {
                need(1)?;
                Measure::point_mass(v[0])
            }
            "pareto" => {
                if v.len() == 1 {
                    Measure::pareto(v[0], 1.0)
                } else {
                    need(2)?;
                    Measure::pareto(v[0], v[1])
                }
            }
            "logpareto" | "logperturbedpareto" => {
                need(3)?;
                Measure::log_perturbed_pareto(v[0], v[1], v[2])
            }
            "frechet" => {
                need(1)?;
                Measure::frechet(v[0])
            }
            "uniform" => {
                need(2)?;
                Measure::uniform(v[0], v[1])
            }
            "semicircle" => {
                need(2)?;
                Measure::semicircle(v[0], v[1])
            }
            "freepoisson" => {
                need(1)?;
                Measure::free_poisson(v[0])
            }
            _ => Err(Error::InvalidMeasure(format!("unknown measure {name:?}"))),
        }
    }
}

fn logp_tail(alpha: f64, gamma: f64, xm: f64, y: f64) -> f64 {
    let r = y / xm;
    r.powf(-alpha) * (1.0 + r.ln()).powf(-gamma)
}

/// Integration kernels `t^k * K(t)` against a measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kernel {
    /// `t^k / (w - t)`
    Resolvent { w: C64, k: u32 },
    /// `t^k / (w - t)^2`
    Resolvent2 { w: C64, k: u32 },
    /// `t^k / (t^2 + y^2)`
    Lorentz { y: f64, k: u32 },
    /// `t^k`
    Power { k: u32 },
}

impl Kernel {
    pub fn eval(&self, t: f64) -> C64 {
        match *self {
            Kernel::Resolvent { w, k } => t.powi(k as i32) / (w - t),
            Kernel::Resolvent2 { w, k } => {
                let d = w - t;
                t.powi(k as i32) / (d * d)
            }
            Kernel::Lorentz { y, k } => C64::new(t.powi(k as i32) / (t * t + y * y), 0.0),
            Kernel::Power { k } => C64::new(t.powi(k as i32), 0.0),
        }
    }

    /// Location and half-width of the nearest singularity on the real axis.
    fn pole(&self) -> Option<(f64, f64)> {
        match *self {
            Kernel::Resolvent { w, .. } | Kernel::Resolvent2 { w, .. } => Some((w.re, w.im.abs())),
            Kernel::Lorentz { y, .. } => Some((0.0, y)),
            Kernel::Power { .. } => None,
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            Kernel::Resolvent { w, .. } | Kernel::Resolvent2 { w, .. } => w.norm(),
            Kernel::Lorentz { y, .. } => y,
            Kernel::Power { .. } => 0.0,
        }
    }

    /// Growth exponent at infinity.
    fn growth(&self) -> i64 {
        match *self {
            Kernel::Resolvent { k, .. } => k as i64 - 1,
            Kernel::Resolvent2 { k, .. } | Kernel::Lorentz { k, .. } => k as i64 - 2,
            Kernel::Power { k } => k as i64,
        }
    }

    fn check_finite(&self, mu: &Measure) -> Result<()> {
        let g = self.growth();
        if g < 0 {
            return Ok(());
        }
        let g = g as u32;
        let finite = match (mu.moment_order(), mu.tail_index()) {
            (None, _) => true,
            (Some(p), _) => g <= p,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::MomentNotFinite(g))
        }
    }

    /// Expansion of the kernel in powers of `1/t`: `(coefficient, power)`.
    fn tail_term(&self, j: usize) -> (C64, f64) {
        let jf = j as f64;
        match *self {
            Kernel::Resolvent { w, k } => (-w.powu(j as u32), k as f64 - 1.0 - jf),
            Kernel::Resolvent2 { w, k } => (w.powu(j as u32) * (jf + 1.0), k as f64 - 2.0 - jf),
            Kernel::Lorentz { y, k } => (C64::new((-y * y).powi(j as i32), 0.0), k as f64 - 2.0 - 2.0 * jf),
            Kernel::Power { k } => (C64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0), k as f64),
        }
    }

    /// Kernel integral as a series in moments, valid when the kernel's
    /// singularity lies far outside the support.
    fn moment_series(&self, m: &[f64]) -> C64 {
        let mut s = C64::new(0.0, 0.0);
        match *self {
            Kernel::Resolvent { w, k } => {
                let iw = 1.0 / w;
                let mut p = iw;
                for i in 0..m.len() - k as usize {
                    let t = p * m[k as usize + i];
                    s += t;
                    if t.norm() < 1e-18 * s.norm() {
                        break;
                    }
                    p *= iw;
                }
            }
            Kernel::Resolvent2 { w, k } => {
                let iw = 1.0 / w;
                let mut p = iw * iw;
                for i in 0..m.len() - k as usize {
                    let t = p * (m[k as usize + i] * (i as f64 + 1.0));
                    s += t;
                    if t.norm() < 1e-18 * s.norm() {
                        break;
                    }
                    p *= iw;
                }
            }
            Kernel::Lorentz { y, k } => {
                let r = -1.0 / (y * y);
                let mut p = 1.0 / (y * y);
                let mut i = k as usize;
                while i < m.len() {
                    let t = p * m[i];
                    s += t;
                    if t.abs() < 1e-18 * s.norm() {
                        break;
                    }
                    p *= r;
                    i += 2;
                }
            }
            Kernel::Power { k } => s = C64::new(m[k as usize], 0.0),
        }
        s
    }
}

/// Continuous heavy-tailed families sharing one integration path.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Heavy {
    Pareto { alpha: f64, xm: f64 },
    LogP { alpha: f64, gamma: f64, xm: f64 },
    Frechet { alpha: f64 },
}

impl Heavy {
    fn lo(&self) -> f64 {
        match *self {
            Heavy::Pareto { xm, .. } | Heavy::LogP { xm, .. } => xm,
            Heavy::Frechet { alpha } => FRECHET_CUT.powf(-1.0 / alpha),
        }
    }

    /// `t * density(t)`.
    fn tdens(&self, t: f64) -> f64 {
        match *self {
            Heavy::Pareto { alpha, xm } => {
                if t < xm {
                    0.0
                } else {
                    alpha * (-alpha * (t / xm).ln()).exp()
                }
            }
            Heavy::LogP { alpha, gamma, xm } => {
                if t < xm {
                    0.0
                } else {
                    let l = 1.0 + (t / xm).ln();
                    logp_tail(alpha, gamma, xm, t) * (alpha + gamma / l)
                }
            }
            Heavy::Frechet { alpha } => {
                if t <= 0.0 {
                    0.0
                } else {
                    let u = t.powf(-alpha);
                    alpha * u * (-u).exp()
                }
            }
        }
    }

    /// `M_q(T) = int_T^inf t^q dmu` for `T >= lo`.
    fn tail_moment(&self, q: f64, big_t: f64) -> Option<f64> {
        match *self {
            Heavy::Pareto { alpha, xm } => {
                if q >= alpha {
                    None
                } else {
                    let t = big_t.max(xm);
                    Some(alpha * (xm / t).powf(alpha) * t.powf(q) / (alpha - q))
                }
            }
            Heavy::Frechet { alpha } => {
                let s = 1.0 - q / alpha;
                if s <= 0.0 {
                    return None;
                }
                let x = big_t.max(self.lo()).powf(-alpha);
                Some(lower_gamma(s, x))
            }
            Heavy::LogP { alpha, gamma, xm } => {
                let t = big_t.max(xm);
                let beta = alpha - q;
                let lam = 1.0 + (t / xm).ln();
                let base = t.powf(q) * logp_tail(alpha, gamma, xm, t);
                if beta == 0.0 && alpha == 0.0 {
                    return Some(base);
                }
                if beta < 0.0 || (beta == 0.0 && gamma <= 1.0) {
                    return None;
                }
                if beta == 0.0 {
                    return Some(base * (alpha * lam / (gamma - 1.0) + 1.0));
                }
                // int_0^inf e^{-beta s} (1 + s/lam)^-gamma (alpha + gamma/(lam + s)) ds, with u = beta s
                let f = |u: f64| {
                    let s = u / beta;
                    (-u).exp() * (1.0 + s / lam).powf(-gamma) * (alpha + gamma / (lam + s))
                };
                let j = quad::integrate_real(f, &[0.0, 1.0, 4.0, 12.0, 30.0, 60.0, 745.0], &Tol::default()).ok()?;
                Some(base * j / beta)
            }
        }
    }

    pub(crate) fn integrate(&self, kernel: Kernel, tol: &Tol) -> Result<C64> {
        let lo = self.lo();
        let big_t = (8.0 * kernel.scale()).max(8.0 * lo).max(8.0);
        let (l0, l1) = (lo.ln(), big_t.ln());
        let mut extra = vec![];
        if let Some((x0, d)) = kernel.pole() {
            for s in [0.0, -32.0, -8.0, -2.0, -0.5, 0.5, 2.0, 8.0, 32.0] {
                let x = x0 + s * d;
                if x > lo && x < big_t {
                    extra.push(x.ln());
                }
            }
        }
        let br = log_breaks(l0, l1, &extra);
        let body = quad::integrate(
            |l| {
                let t = l.exp();
                kernel.eval(t) * self.tdens(t)
            },
            &br,
            tol,
        )?;
        Ok(body + self.tail_series(kernel, big_t)?)
    }

    fn tail_series(&self, kernel: Kernel, big_t: f64) -> Result<C64> {
        let mut s = C64::new(0.0, 0.0);
        for j in 0..80 {
            let (c, q) = kernel.tail_term(j);
            if c.norm() == 0.0 {
                if matches!(kernel, Kernel::Power { .. }) {
                    break;
                }
                continue;
            }
            let m = self.tail_moment(q, big_t).ok_or(Error::MomentNotFinite(q.max(0.0) as u32))?;
            let t = c * m;
            s += t;
            if j >= 2 && t.norm() <= 1e-18 * s.norm() {
                break;
            }
        }
        Ok(s)
    }
}

/// Panel breaks every two units of `log t`, plus `extra`.
fn log_breaks(l0: f64, l1: f64, extra: &[f64]) -> Vec<f64> {
    let n = ((l1 - l0) / 2.0).ceil().max(1.0) as usize;
    let mut br: Vec<f64> = (0..=n).map(|i| l0 + (l1 - l0) * i as f64 / n as f64).collect();
    br.extend(extra.iter().copied().filter(|x| *x > l0 && *x < l1));
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    br
}

/// Lower incomplete gamma `int_0^x u^{s-1} e^{-u} du`.
fn lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 + s {
        let mut term = 1.0 / s;
        let mut sum = term;
        for n in 1..500 {
            term *= x / (s + n as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        (s * x.ln() - x).exp() * sum
    } else {
        statrs::function::gamma::gamma_li(s, x)
    }
}

/// Layout of a discretization grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Last node for unbounded supports.
    pub x_max: f64,
    /// Number of base nodes before edge refinement.
    pub nodes: usize,
    /// Width in decades of the tail-fit window below `x_max`.
    pub fit_decades: f64,
    /// Linear spacing below this point, logarithmic above.
    pub linear_to: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { x_max: 1e6, nodes: 2000, fit_decades: 1.5, linear_to: 1.0 }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `key=value` pairs separated by commas: `xmax`, `nodes`, `fit`, `linear`.
    fn from_str(s: &str) -> Result<Self> {
        let mut g = GridSpec::default();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("grid entry {part:?} is not key=value")))?;
            let val: f64 =
                v.trim().parse().map_err(|_| Error::InvalidArgument(format!("grid value {v:?} is not a number")))?;
            match k.trim() {
                "xmax" | "x_max" => g.x_max = val,
                "nodes" => g.nodes = val as usize,
                "fit" | "fit_decades" => g.fit_decades = val,
                "linear" | "linear_to" => g.linear_to = val,
                other => return Err(Error::InvalidArgument(format!("unknown grid key {other:?}"))),
            }
        }
        g.validate()?;
        Ok(g)
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_max > 0.0 && self.x_max.is_finite()) || self.nodes < 16 || !(self.fit_decades > 0.0) {
            return Err(Error::InvalidArgument("grid needs x_max > 0, nodes >= 16, fit > 0".into()));
        }
        Ok(())
    }

    /// Base nodes on `[lo, hi]`: linear below `linear_to`, logarithmic above,
    /// with matching spacing at the junction.
    pub fn layout(&self, lo: f64, hi: f64) -> Vec<f64> {
        let k = self.nodes.max(4);
        let lt = self.linear_to;
        if hi <= lt || lo >= lt || lo <= 0.0 && hi <= lt {
            if lo >= lt && lo > 0.0 {
                let (a, b) = (lo.ln(), hi.ln());
                return (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect();
            }
            return (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect();
        }
        // k_lin * h = lt - lo where h = lt * ln(hi/lt) / k_log
        let lr = (hi / lt).ln();
        let ratio = (lt - lo) / (lt * lr);
        let k_log = (((k - 1) as f64) / (1.0 + ratio)).round().max(2.0) as usize;
        let k_lin = (k - 1).saturating_sub(k_log).max(1);
        let mut v: Vec<f64> = (0..k_lin).map(|i| lo + (lt - lo) * i as f64 / k_lin as f64).collect();
        v.extend((0..=k_log).map(|i| lt * (lr * i as f64 / k_log as f64).exp()));
        v
    }
}

/// Inserts geometrically clustered nodes toward a square-root edge at `e`
/// inside the cell ending at `far`.
pub(crate) fn edge_nodes(e: f64, far: f64) -> Vec<f64> {
    let mut v = vec![];
    let mut d = far - e;
    for _ in 0..30 {
        d *= 0.7;
        v.push(e + d);
    }
    v
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub(crate) fn linfit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Piecewise representation of `mu` on the nodes of `spec`.
pub fn discretize(mu: &Measure, spec: &GridSpec) -> Result<GridMeasure> {
    spec.validate()?;
    if mu.is_point_mass() {
        return Err(Error::InvalidArgument("a point mass has no density to discretize".into()));
    }
    if let Some(g) = mu.as_grid() {
        return Ok(g.clone());
    }
    let lo = match mu.kind() {
        MeasureKind::FrechetLike { alpha } => FRECHET_CUT.powf(-1.0 / alpha),
        _ => mu.support_lo(),
    };
    let hi = mu.support_hi().unwrap_or(spec.x_max);
    if hi <= lo {
        return Err(Error::InvalidArgument("x_max below the support".into()));
    }
    let mut nodes = spec.layout(lo, hi);
    if matches!(mu.kind(), MeasureKind::Semicircle { .. } | MeasureKind::FreePoisson { .. }) {
        let (n1, n2) = (nodes[1], nodes[nodes.len() - 2]);
        nodes.extend(edge_nodes(lo, n1));
        nodes.extend(edge_nodes(hi, n2));
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1e-300));
    }
    let mut density: Vec<f64> = nodes.iter().map(|&t| mu.density(t)).collect();
    if let MeasureKind::UniformInterval { lo, hi } = mu.kind() {
        let last = density.len() - 1;
        density[0] = 1.0 / (hi - lo);
        density[last] = 1.0 / (hi - lo);
    }
    let ext = if mu.support_hi().is_some() {
        TailExt { c: 0.0, alpha: 0.0 }
    } else {
        let x_k = hi;
        let l1 = x_k.ln();
        let l0 = l1 - spec.fit_decades * std::f64::consts::LN_10;
        let xs: Vec<f64> = (0..=60).map(|i| l0 + (l1 - l0) * i as f64 / 60.0).collect();
        let ys: Vec<f64> = xs.iter().map(|l| mu.tail(l.exp()).ln()).collect();
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::FitError("tail vanishes in the fit window".into()));
        }
        let (_, slope) = linfit(&xs, &ys);
        let resid = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0]) - slope).abs())
            .fold(0.0, f64::max);
        if resid > 1e-2 {
            return Err(Error::FitError(format!(
                "log-log slope varies by {resid:.4} around the fitted {slope:.4} in the fit window"
            )));
        }
        let alpha = -slope;
        TailExt { c: mu.tail(x_k) * x_k.powf(alpha), alpha }
    };
    GridMeasure::new(nodes, density, 0.0, ext)
}

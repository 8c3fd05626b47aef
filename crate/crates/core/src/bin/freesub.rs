use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use freesub::harness::{self, Format, Report, RunConfig};
use freesub::measures::{GridMeasure, GridSpec, Measure};
use freesub::Error;

/// Numerical checks of free subexponentiality for heavy-tailed measures.
#[derive(Parser)]
#[command(name = "freesub", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Inline spec (`pareto:1.5,1`), JSON object, or path to a JSON/CSV file.
    #[arg(long, value_name = "SPEC")]
    measure: Vec<String>,
    /// Convolution power (`n_max` for tail-ratio).
    #[arg(long)]
    n: Option<u32>,
    /// Grid spec, e.g. `xmax=1e6,nodes=2000,fit=1.5,linear=1`.
    #[arg(long)]
    grid: Option<String>,
    /// Output directory; reports go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative tolerance of every claim; defaults depend on the experiment.
    #[arg(long)]
    tolerance: Option<f64>,
    /// `a:b:n` (log-spaced) or a comma-separated list.
    #[arg(long)]
    schedule: Option<String>,
    /// Recorded in the report environment.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Free additive convolution; writes the grid measure and diagnostics.
    Convolve(Common),
    /// Tail of the n-fold free convolution against n times the tail.
    TailRatio(Common),
    /// Free additive power against free max power.
    OneLargeJump(Common),
    /// Remainder equivalences and constants along the imaginary axis.
    RemainderEquiv {
        #[command(flatten)]
        common: Common,
        /// A, B, C or D.
        #[arg(long)]
        case: String,
    },
    /// Karamata-type Stieltjes checks.
    Karamata {
        #[command(flatten)]
        common: Common,
        /// Power `w` in `d rho = t^w d mu`; chosen per variant when absent.
        #[arg(long)]
        weight: Option<u32>,
    },
    /// Inverse and reciprocal remainder ratios on a cone.
    InverseRemainder {
        #[command(flatten)]
        common: Common,
        /// Remainder order; taken from the measure when absent.
        #[arg(long)]
        p: Option<u32>,
    },
    /// Summarizes existing JSON reports and returns their combined exit code.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

const EXIT_USAGE: u8 = 64;

enum Fail {
    Usage(String),
    Run(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Run(e)
    }
}

fn parse_measure(s: &str) -> Result<Measure, Fail> {
    let usage = |e: Error| Fail::Usage(format!("--measure {s}: {e}"));
    let t = s.trim();
    if t.starts_with('{') {
        return serde_json::from_str(t).map_err(|e| usage(e.into()));
    }
    let p = Path::new(t);
    if p.is_file() {
        let text = fs::read_to_string(p).map_err(|e| usage(e.into()))?;
        if p.extension().is_some_and(|e| e == "csv") {
            let g = GridMeasure::read_csv(text.as_bytes()).map_err(usage)?;
            return Measure::grid(g).map_err(usage);
        }
        return serde_json::from_str(&text).map_err(|e| usage(e.into()));
    }
    t.parse().map_err(usage)
}

struct Parsed {
    measures: Vec<Measure>,
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: Format,
    n: Option<u32>,
}

fn parse_common(c: &Common, need: usize) -> Result<Parsed, Fail> {
    if c.measure.len() < need {
        return Err(Fail::Usage("--measure is required".into()));
    }
    let measures = c.measure.iter().map(|s| parse_measure(s)).collect::<Result<Vec<_>, _>>()?;
    let grid = match &c.grid {
        Some(g) => g.parse::<GridSpec>().map_err(|e| Fail::Usage(format!("--grid: {e}")))?,
        None => GridSpec::default(),
    };
    let schedule = match &c.schedule {
        Some(s) => Some(harness::parse_schedule(s).map_err(|e| Fail::Usage(format!("--schedule: {e}")))?),
        None => None,
    };
    if let Some(t) = c.tolerance {
        if !(t > 0.0) {
            return Err(Fail::Usage("--tolerance must be positive".into()));
        }
    }
    Ok(Parsed {
        measures,
        cfg: RunConfig { grid, schedule, tolerance: c.tolerance, seed: c.seed },
        out: c.out.clone(),
        format: match c.format {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        },
        n: c.n,
    })
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn say(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn emit(mut rep: Report, p: &Parsed) -> Result<Vec<Report>, Fail> {
    match &p.out {
        Some(dir) => {
            let path = rep.write(dir, p.format)?;
            say(&rep.summary());
            say(&format!("wrote {}\n", path.display()));
        }
        None => match p.format {
            Format::Json => say(&(rep.to_json()? + "\n")),
            Format::Csv => say(&rep.summary()),
        },
    }
    Ok(vec![rep])
}

fn run(cli: Cli) -> Result<Vec<Report>, Fail> {
    match cli.cmd {
        Cmd::Convolve(c) => {
            let p = parse_common(&c, 1)?;
            let (res, rep) = harness::run_convolve(&p.measures, p.n.unwrap_or(2), &p.cfg)?;
            if let Some(dir) = &p.out {
                fs::create_dir_all(dir).map_err(Error::from)?;
                if let Some(g) = res.grid() {
                    g.write_csv(fs::File::create(dir.join("convolution.csv")).map_err(Error::from)?)?;
                } else {
                    fs::write(dir.join("convolution.json"), serde_json::to_string_pretty(&res.measure).map_err(Error::from)?)
                        .map_err(Error::from)?;
                }
                let diag = serde_json::to_string_pretty(&res.diagnostics).map_err(Error::from)?;
                fs::write(dir.join("diagnostics.json"), diag + "\n").map_err(Error::from)?;
            }
            emit(rep, &p)
        }
        Cmd::TailRatio(c) => {
            let p = parse_common(&c, 1)?;
            let rep = harness::run_main_theorem(&p.measures[0], p.n.unwrap_or(2), &p.cfg)?;
            emit(rep, &p)
        }
        Cmd::OneLargeJump(c) => {
            let p = parse_common(&c, 1)?;
            let rep = harness::run_one_large_jump(&p.measures[0], p.n.unwrap_or(2), &p.cfg)?;
            emit(rep, &p)
        }
        Cmd::RemainderEquiv { common, case } => {
            let p = parse_common(&common, 1)?;
            let case = case.parse().map_err(|e: Error| Fail::Usage(e.to_string()))?;
            let rep = harness::run_remainder_equiv(&p.measures[0], case, &p.cfg)?;
            emit(rep, &p)
        }
        Cmd::Karamata { common, weight } => {
            let p = parse_common(&common, 1)?;
            let rep = harness::run_karamata(&p.measures[0], weight, &p.cfg)?;
            emit(rep, &p)
        }
        Cmd::InverseRemainder { common, p: order } => {
            let p = parse_common(&common, 1)?;
            let rep = harness::run_inverse_remainder(&p.measures[0], order, &p.cfg)?;
            emit(rep, &p)
        }
        Cmd::Report { files } => {
            let mut reps = vec![];
            for f in files {
                let text = fs::read_to_string(&f).map_err(Error::from)?;
                let r: Report = serde_json::from_str(&text).map_err(Error::from)?;
                say(&r.summary());
                reps.push(r);
            }
            Ok(reps)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(reps) => ExitCode::from(harness::exit_code(&reps) as u8),
        Err(Fail::Usage(m)) => {
            eprintln!("usage error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Fail::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

//! Command-line experiments for weighted ℓ1 recovery: guaranteed sparsity bounds,
//! their dependence on the weight tilt, Monte Carlo failure rates and angle oracles.
//! Every command writes CSV with a `#` header that echoes the resolved configuration.

pub mod commands;
pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{read_config_file, Settings};

#[derive(Debug)]
pub enum CliError {
    Usage(clap::Error),
    Config(String),
    Numerical(String),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<wl1::Error> for CliError {
    fn from(e: wl1::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "wl1",
    version,
    about = "Recovery bounds and experiments for weighted l1 minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Guaranteed δ̄ for each number of intervals r.
    BoundVsR(Flags),
    /// Guaranteed δ̄ over a grid of weight tilts ρ (f(u) = 1 + ρu).
    BoundVsRho(Flags),
    /// Monte Carlo failure rates of weighted ℓ1 recovery.
    Empirical(Flags),
    /// Angle oracles against the optimized exponents.
    AngleOracle(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// key=value file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Measurements; a list in `empirical`.
    #[arg(long, allow_hyphen_values = true)]
    m: Option<String>,
    /// Ambient dimension; a list in `angle-oracle`.
    #[arg(long, allow_hyphen_values = true)]
    n: Option<String>,
    /// Number of grid intervals; a list in `bound-vs-r`.
    #[arg(long, allow_hyphen_values = true)]
    r: Option<String>,
    /// Weight tilt(s); `auto` picks ρ*(c) in typical empirical runs.
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    /// Probability tilt(s) of p(u) = δ − c(u − 1/2).
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Covering-face fraction for the angle oracles.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    trials: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (0 = all cores). Never changes the output.
    #[arg(long, allow_hyphen_values = true)]
    workers: Option<String>,
    /// leading | typical
    #[arg(long)]
    mode: Option<String>,
    /// Probability shape, e.g. `linear-prob:delta=0.185,c=0.36`.
    #[arg(long)]
    prob: Option<String>,
    /// Weight shape, e.g. `linear-weight:rho=1.0` or `pwl:0=1.0,0.5=1.2,1=2.0`.
    #[arg(long)]
    weight: Option<String>,
    /// calibrated | raw
    #[arg(long)]
    criterion: Option<String>,
    /// Leave the wall_ms column empty so output is reproducible byte for byte.
    #[arg(long)]
    omit_timing: bool,
    /// Monte Carlo samples for the internal-angle oracle.
    #[arg(long, allow_hyphen_values = true)]
    samples: Option<String>,
    /// internal | external | both
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    quad_points: Option<String>,
    /// Directory for per-point trial records.
    #[arg(long)]
    records: Option<String>,
    /// ρ grid searched by `--rho auto`.
    #[arg(long, allow_hyphen_values = true)]
    rho_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x_grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    delta_tol: Option<String>,
}

impl Flags {
    fn into_map(self) -> (Option<PathBuf>, BTreeMap<String, String>) {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v);
            }
        };
        put("alpha", self.alpha);
        put("m", self.m);
        put("n", self.n);
        put("r", self.r);
        put("rho", self.rho);
        put("c", self.c);
        put("delta", self.delta);
        put("tau", self.tau);
        put("trials", self.trials);
        put("seed", self.seed);
        put("out", self.out);
        put("workers", self.workers);
        put("mode", self.mode);
        put("prob", self.prob);
        put("weight", self.weight);
        put("criterion", self.criterion);
        put("samples", self.samples);
        put("kind", self.kind);
        put("quad-points", self.quad_points);
        put("records", self.records);
        put("rho-grid", self.rho_grid);
        put("x-grid", self.x_grid);
        put("delta-tol", self.delta_tol);
        if self.omit_timing {
            m.insert("omit-timing".into(), "true".into());
        }
        (self.config, m)
    }
}

/// Parses `args` (program name first) and runs the command. Output goes to `--out`
/// when given, otherwise to `stdout`.
pub fn run<I, S>(args: I, stdout: Box<dyn Write + Send>) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e)),
    };
    let (name, flags) = match cli.command {
        Command::BoundVsR(f) => ("bound-vs-r", f),
        Command::BoundVsRho(f) => ("bound-vs-rho", f),
        Command::Empirical(f) => ("empirical", f),
        Command::AngleOracle(f) => ("angle-oracle", f),
    };
    let (path, flags) = flags.into_map();
    let file = match path {
        Some(p) => read_config_file(&p)?,
        None => BTreeMap::new(),
    };
    let settings = Settings::new(file, flags);

    let workers: usize = settings.parse("workers", Some("0"))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let out: Box<dyn Write + Send> = match settings.get("out") {
        Some(p) if p != "-" => Box::new(std::io::BufWriter::new(
            std::fs::File::create(&p)
                .map_err(|e| CliError::Config(format!("cannot create {p}: {e}")))?,
        )),
        _ => stdout,
    };
    pool.install(|| match name {
        "bound-vs-r" => commands::bound_vs_r(&settings, out),
        "bound-vs-rho" => commands::bound_vs_rho(&settings, out),
        "empirical" => commands::empirical(&settings, out),
        _ => commands::angle_oracle(&settings, out),
    })
}

//! `dropf` command line.
//!
//! ```text
//! dropf solve-dist  --case feeder37 --rho 1 --eps 5e-4 --out out/dist
//! dropf solve-trans --case trans14 --horizon 1 --out out/trans
//! dropf mpc         --case stressed --horizon 3 --step-min 5 --steps 288 --out out/mpc
//! dropf sweep       --case feeder37 --rho 1e-3..10 --eps 0,5e-4,1e-3 --out out/sweep
//! dropf eval        --case trans14 --draws 1000 --out out/eval
//! dropf gen-data    --case trans14 --window 30 --out out/data
//! ```
//!
//! Exit status: 0 success, 2 invalid configuration, 3 unreadable or
//! inconsistent input, 4 modelling or solver failure. Failures print a JSON
//! object `{"error": <kind>, "message": <text>}` on stderr.
//!
//! Environment: `DROPF_SOLVER_TOL` overrides the feasibility tolerance,
//! `DROPF_THREADS` the worker thread count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dropf::io::{run, Mode, RunConfig};
use dropf::Error;

const ENV_THREADS: &str = "DROPF_THREADS";

#[derive(Parser)]
#[command(name = "dropf", version, about = "Data-based distributionally robust optimal power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the distribution program once.
    SolveDist(Common),
    /// Solve the transmission program once.
    SolveTrans(Common),
    /// Run the receding-horizon controller.
    Mpc(Common),
    /// Solve every (rho, epsilon) pair of a grid.
    Sweep(Common),
    /// Solve once and evaluate out of sample.
    Eval(Common),
    /// Write a training error dataset.
    GenData(Common),
}

#[derive(Args)]
struct Common {
    /// Case file or bundled case name (feeder37, stressed, trans14).
    #[arg(long, default_value = "feeder37")]
    case: String,
    /// Training errors as CSV.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Risk weight: a value, a list `a,b,c`, or a decade range `lo..hi`.
    #[arg(long, default_value = "1")]
    rho: String,
    /// Wasserstein radius: a value, a list, or a decade range.
    #[arg(long, default_value = "0")]
    eps: String,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 3)]
    horizon: usize,
    /// Training window length.
    #[arg(long, default_value_t = 30)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long = "step-min", default_value_t = 5.0)]
    step_min: f64,
    /// Clock step of single solves (default: solar peak) or of the first MPC step (default: 0).
    #[arg(long)]
    start: Option<usize>,
    #[arg(long, default_value_t = 288)]
    steps: usize,
    #[arg(long, default_value_t = 1)]
    traces: usize,
    /// Out-of-sample draws (default 1000 for eval, 0 otherwise).
    #[arg(long)]
    draws: Option<usize>,
    /// Standard deviation of relative photovoltaic errors.
    #[arg(long = "pv-std", default_value_t = 0.1)]
    pv_std: f64,
    /// Evaluate with draws from the training data.
    #[arg(long)]
    in_sample: bool,
}

/// Parse `v`, `a,b,c` or the decade range `lo..hi`.
fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    let bad = |t: &str| Error::Config(format!("'{t}' is not a number"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: f64 = lo.trim().parse().map_err(|_| bad(lo))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad(hi))?;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::Config(format!("range {s} needs 0 < lo <= hi")));
        }
        let steps = (hi / lo).log10().round() as i32;
        if (lo * 10f64.powi(steps) / hi - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("range {s} must span whole decades")));
        }
        return Ok((0..=steps).map(|k| round_sig(lo * 10f64.powi(k))).collect());
    }
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad(t))).collect()
}

/// Strip floating noise from decade products such as 1e-3 · 10³.
fn round_sig(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap_or(v)
}

fn config(mode: Mode, c: Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::new(mode, c.case, c.out);
    cfg.samples = c.samples;
    cfg.rho = parse_grid(&c.rho)?;
    cfg.epsilon = parse_grid(&c.eps)?;
    cfg.eta = c.eta;
    cfg.horizon = c.horizon;
    cfg.window = c.window;
    cfg.seed = c.seed;
    cfg.step_minutes = c.step_min;
    cfg.start_step = c.start;
    cfg.steps = c.steps;
    cfg.traces = c.traces;
    if let Some(d) = c.draws {
        cfg.draws = d;
    }
    cfg.pv_error_std = c.pv_std;
    cfg.in_sample = c.in_sample;
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(ENV_THREADS) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{ENV_THREADS}={v} is not a thread count")))?;
    if n == 0 {
        return Err(Error::Config(format!("{ENV_THREADS} must be positive")));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::SolveDist(c) => (Mode::SolveDist, c),
        Command::SolveTrans(c) => (Mode::SolveTrans, c),
        Command::Mpc(c) => (Mode::Mpc, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Eval(c) => (Mode::Eval, c),
        Command::GenData(c) => (Mode::GenData, c),
    };
    let outcome = threads().and_then(|()| config(mode, common)).and_then(|cfg| run(&cfg).map(|r| (cfg, r)));
    match outcome {
        Ok((cfg, report)) => {
            for a in &report.artifacts {
                println!("{}", cfg.output.join(a).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

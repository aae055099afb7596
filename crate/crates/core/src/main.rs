use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use irsa::density::bp_threshold;
use irsa::harness::{load_grid, metadata_json, run_sweep, write_csv, ExperimentConfig};
use irsa::scaling::{fep_predict, plp_predict, ScalingParams};
use irsa::{compute_gamma, generate_frame, Activity, DegreeDistribution, IrsaError};

#[derive(Parser)]
#[command(name = "irsa", version, about = "IRSA simulation and finite-length prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load threshold g*, loss constant gamma and mean degree as JSON.
    Threshold {
        #[arg(long)]
        dist: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Waterfall predictions as CSV rows `g,fep,plp`.
    Predict {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        m: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        g: Vec<f64>,
        /// Finite population size (default: unbounded).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, requires = "beta0")]
        alpha0: Option<f64>,
        #[arg(long, requires = "alpha0")]
        beta0: Option<f64>,
    },
    /// Monte Carlo sweep over a load grid.
    Simulate(SimulateArgs),
    /// Print one random frame in the debug dump format.
    Dump {
        #[arg(long)]
        dist: String,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        g: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "poisson")]
        activity: String,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config; replaces the grid and simulation flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    dist: Option<String>,
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    g_start: Option<f64>,
    #[arg(long)]
    g_stop: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    g_step: f64,
    #[arg(long, default_value_t = 1_000_000)]
    frames: u64,
    #[arg(long, default_value_t = 200)]
    target_errors: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "poisson")]
    activity: String,
    #[arg(long)]
    floor: bool,
    #[arg(long)]
    predict: bool,
    #[arg(long, requires = "beta0")]
    alpha0: Option<f64>,
    #[arg(long, requires = "alpha0")]
    beta0: Option<f64>,
    /// CSV destination (default: stdout). Metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metadata destination, overriding the default next to `--out`.
    #[arg(long)]
    meta: Option<PathBuf>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<IrsaError> for Failure {
    fn from(e: IrsaError) -> Self {
        match e {
            IrsaError::DegreeExceedsSlots { .. } | IrsaError::TooLargeToEnumerate { .. } => {
                Failure::Runtime(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn params_for(
    dist: &DegreeDistribution,
    alpha0: Option<f64>,
    beta0: Option<f64>,
) -> Result<ScalingParams, Failure> {
    Ok(ScalingParams::for_distribution(dist, alpha0, beta0)?)
}

fn simulate_config(args: &SimulateArgs) -> Result<ExperimentConfig, Failure> {
    if let Some(path) = &args.config {
        return Ok(ExperimentConfig::load(path)?);
    }
    let dist = DegreeDistribution::from_name_or_spec(args.dist.as_deref().unwrap())?;
    let start = args.g_start.unwrap();
    let grid = load_grid(start, args.g_stop.unwrap_or(start), args.g_step)?;
    let mut cfg = ExperimentConfig::new(dist, args.m.unwrap(), grid);
    cfg.activity = args.activity.parse()?;
    cfg.max_frames = args.frames;
    cfg.target_errors = args.target_errors;
    cfg.seed = args.seed;
    cfg.workers = args.workers;
    cfg.emit_floor = args.floor;
    cfg.emit_prediction = args.predict;
    cfg.alpha0 = args.alpha0;
    cfg.beta0 = args.beta0;
    cfg.validate()?;
    Ok(cfg)
}

fn write_meta(path: &Path, cfg: &ExperimentConfig) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&metadata_json(cfg)).expect("metadata serializes");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let stdout = io::stdout();
    match cli.command {
        Command::Threshold { dist, tol } => {
            let dist = DegreeDistribution::from_name_or_spec(&dist)?;
            if !(tol > 0.0) {
                return Err(Failure::Config("--tol must be positive".into()));
            }
            let t = bp_threshold(&dist, tol)?;
            let out = serde_json::json!({
                "dist": dist.to_string(),
                "g_star": t.g_star,
                "gamma": compute_gamma(&dist),
                "mean_degree": dist.mean_degree(),
                "bracket_width": t.bracket_width,
            });
            writeln!(stdout.lock(), "{out}")?;
        }
        Command::Predict {
            dist,
            m,
            g,
            n,
            alpha0,
            beta0,
        } => {
            let dist = DegreeDistribution::from_name_or_spec(&dist)?;
            let params = params_for(&dist, alpha0, beta0)?;
            let mut w = stdout.lock();
            writeln!(w, "g,fep,plp")?;
            for g in g {
                let fep = fep_predict(m, g, &params, n)?;
                let plp = plp_predict(m, g, &params, n)?;
                writeln!(
                    w,
                    "{g},{},{}",
                    irsa::harness::fmt_prob(fep),
                    irsa::harness::fmt_prob(plp)
                )?;
            }
        }
        Command::Simulate(args) => {
            let cfg = simulate_config(&args)?;
            let rows = run_sweep(&cfg).map_err(|e| Failure::Runtime(e.to_string()))?;
            match &args.out {
                Some(path) => {
                    let f = BufWriter::new(File::create(path)?);
                    write_csv(f, &rows, cfg.emit_prediction, cfg.emit_floor)?;
                    let meta = args.meta.clone().unwrap_or_else(|| {
                        let mut p = path.clone().into_os_string();
                        p.push(".meta.json");
                        p.into()
                    });
                    write_meta(&meta, &cfg)?;
                }
                None => {
                    write_csv(stdout.lock(), &rows, cfg.emit_prediction, cfg.emit_floor)?;
                    if let Some(meta) = &args.meta {
                        write_meta(meta, &cfg)?;
                    }
                }
            }
        }
        Command::Dump {
            dist,
            m,
            g,
            seed,
            activity,
        } => {
            let dist = DegreeDistribution::from_name_or_spec(&dist)?;
            let activity: Activity = activity.parse()?;
            if m == 0 || !(g >= 0.0) {
                return Err(Failure::Config("need m >= 1 and g >= 0".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let frame = generate_frame(m, &dist, &activity.at_load(g, m), &mut rng)?;
            frame.write_dump(stdout.lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

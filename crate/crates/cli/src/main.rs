use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use failurenet::config::Config;
use failurenet::manager::{serve, Manager, ManagerConfig};
use failurenet::pipeline::{self, Layout};

mod signal;

#[derive(Parser, Debug)]
#[command(name = "failurenet", version, about = "Vehicle failure detection pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "run")]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    /// Config override, e.g. `--set train.batch_size=32`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Simulate drives and build the windowed dataset.
    Generate,
    /// Fit baselines and train the learned detectors.
    Train,
    /// Score every checkpoint on the validation split.
    Evaluate,
    /// Run the intersection manager until SIGINT or SIGTERM.
    Serve {
        /// Checkpoint to serve; defaults to `<out>/models/<manager.detector>.ckpt`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Event log path; defaults to `<out>/serve/events.log`.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Closed-loop runs of two simulated vehicles against the manager.
    Replay,
    /// Finite-difference gradient check of the default models.
    GradCheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        /// Parameters sampled per draw; 0 checks all.
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
}

enum Failure {
    Usage(String),
    Data(failurenet::Error),
    Acceptance(String),
}

impl From<failurenet::Error> for Failure {
    fn from(e: failurenet::Error) -> Self {
        Failure::Data(e)
    }
}

fn load_config(c: &Common) -> Result<Config, Failure> {
    let mut sets = c.set.clone();
    if let Some(seed) = c.seed {
        sets.push(format!("seed={seed}"));
    }
    Config::load(c.config.as_deref(), &sets).map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli.common)?;
    let layout = Layout::new(&cli.common.out);
    match cli.cmd {
        Cmd::Generate => {
            let s = pipeline::generate(&cfg, &cli.common.out, cli.common.force)?;
            println!(
                "{} logs ({} truncated), {} train / {} val windows",
                s.logs,
                s.truncated,
                s.meta.train_counts.total(),
                s.meta.val_counts.total()
            );
            for w in &s.meta.warnings {
                println!("warning: {w}");
            }
        }
        Cmd::Train => {
            for o in pipeline::train(&cfg, &layout)? {
                println!(
                    "{:<16} {:>6} params {:>4} epochs  val {:.4}  {:.1} s",
                    o.name, o.params, o.epochs, o.val_accuracy, o.seconds
                );
            }
        }
        Cmd::Evaluate => {
            let out = pipeline::evaluate(&cfg, &layout)?;
            print!("{}", out.report.to_table());
            print!("{}", out.checks_text());
            if !out.passed() {
                return Err(Failure::Acceptance("evaluation checks failed".into()));
            }
        }
        Cmd::Serve { checkpoint, events } => {
            let ckpt = checkpoint.unwrap_or_else(|| layout.checkpoint(&cfg.manager.detector));
            let events = events.unwrap_or_else(|| layout.root.join("serve").join("events.log"));
            let mcfg = ManagerConfig::from_config(&cfg, ckpt)?;
            let manager = Manager::load(mcfg)?;
            log::info!("serving {} ({} params)", manager.detector().name(), manager.detector().param_count());
            let stop = signal::stop_flag();
            let summary = serve(manager, &cfg.manager.listen, Some(&events), stop)?;
            println!(
                "{} connections, {} poses, {} verdicts, {} warnings; events in {}",
                summary.connections,
                summary.stats.poses,
                summary.stats.verdicts,
                summary.stats.warnings,
                events.display()
            );
        }
        Cmd::Replay => {
            let out = pipeline::replay(&cfg, &layout)?;
            print!("{}", out.report.to_table());
            println!("offline vs replay: {} of {} verdicts differ", out.mismatches, out.compared);
            for c in &out.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if !out.passed() {
                return Err(Failure::Acceptance("replay checks failed".into()));
            }
        }
        Cmd::GradCheck { seeds, sample } => {
            let rows = pipeline::grad_check_all(&cfg, seeds, sample)?;
            let tol = cfg.train.grad_tol;
            let mut worst = 0.0f64;
            for r in &rows {
                println!("{:<5} seed {:>2} {:>6} params  max rel err {:.3e}", r.model, r.seed, r.params, r.error);
                worst = worst.max(r.error);
            }
            if worst >= tol {
                return Err(Failure::Acceptance(format!("max relative error {worst:.3e} not below {tol:e}")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance(m)) => {
            eprintln!("acceptance failure: {m}");
            ExitCode::from(3)
        }
    }
}

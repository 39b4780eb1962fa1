mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use robustprep::experiments::{GradCheckConfig, TomoCheckConfig};
use robustprep::prep::{gen_target, write_amplitudes, TargetKind};
use serde_json::json;

use config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
use output::OutputSet;
use run::{run_experiment, RunError};

#[derive(Parser)]
#[command(name = "robustprep", version, about = "Noise-aware training of quantum state preparation circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(Common),
    /// Write the amplitudes of a target state.
    GenTarget(GenTargetArgs),
    /// Compare adjoint gradients against finite differences and parameter shift.
    GradCheck(GradCheckArgs),
    /// Measure bias and error of the tomography estimator.
    TomoCheck(TomoCheckArgs),
    /// Fidelity against device cost for the three optimizers.
    CompareOptimizers(Common),
    /// Mottonen circuits against trained ansatz circuits.
    CompareAd(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Threads used for independent repetitions.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct GenTargetArgs {
    /// haar, sine, gaussian, image or qec5
    kind: String,
    #[arg(long)]
    qubits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for target.amp; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Qubit count; repeat the flag for several sizes.
    #[arg(long)]
    qubits: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TomoCheckArgs {
    #[arg(long)]
    qubits: Option<usize>,
    /// Comma-separated shot counts.
    #[arg(long, value_delimiter = ',')]
    shots: Vec<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("ROBUSTPREP_THREADS") else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| format!("ROBUSTPREP_THREADS must be a positive integer, got {value:?}"))?;
    if n == 0 {
        return Err("ROBUSTPREP_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn dispatch(command: Command) -> Result<(), RunError> {
    match command {
        Command::Run(c) => {
            let cfg = load_config(c.config.as_deref().ok_or_else(|| RunError::Config("run needs --config".into()))?, None)?;
            execute(cfg, c, true)
        }
        Command::CompareOptimizers(c) => {
            let cfg = config_or_default(&c, ExperimentKind::CompareOptimizers)?;
            execute(cfg, c, false)
        }
        Command::CompareAd(c) => {
            let cfg = config_or_default(&c, ExperimentKind::CompareAd)?;
            execute(cfg, c, false)
        }
        Command::GradCheck(a) => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::GradCheck);
            let mut sub = GradCheckConfig::default();
            if !a.qubits.is_empty() {
                sub.qubits = a.qubits;
            }
            if let Some(t) = a.trials {
                sub.trials = t;
            }
            cfg.grad_check = Some(sub);
            cfg.seed = a.seed;
            execute(cfg, Common { config: None, out: a.out, seed: None, jobs: 1 }, false)
        }
        Command::TomoCheck(a) => {
            let mut cfg = ExperimentConfig::new(ExperimentKind::TomoCheck);
            let mut sub = TomoCheckConfig::default();
            if let Some(n) = a.qubits {
                sub.n_qubits = n;
            }
            if !a.shots.is_empty() {
                sub.shots = a.shots;
            }
            if let Some(r) = a.runs {
                sub.runs = r;
            }
            cfg.tomo_check = Some(sub);
            cfg.seed = a.seed;
            execute(cfg, Common { config: None, out: a.out, seed: None, jobs: 1 }, false)
        }
        Command::GenTarget(a) => gen_target_cmd(a),
    }
}

fn load_config(path: &Path, expect: Option<ExperimentKind>) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = ExperimentConfig::parse(&text).map_err(RunError::Config)?;
    if let Some(kind) = expect {
        if cfg.experiment != kind {
            return Err(RunError::Config(format!("config is for {}, expected {}", cfg.experiment.name(), kind.name())));
        }
    }
    Ok(cfg)
}

fn config_or_default(c: &Common, kind: ExperimentKind) -> Result<ExperimentConfig, RunError> {
    match &c.config {
        Some(path) => load_config(path, Some(kind)),
        None => Ok(ExperimentConfig::new(kind)),
    }
}

/// Runs `cfg`, prints its report and writes outputs once everything succeeded.
fn execute(mut cfg: ExperimentConfig, c: Common, out_required: bool) -> Result<(), RunError> {
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let out = c.out.clone().or_else(|| cfg.output_dir.clone());
    if out_required && out.is_none() {
        return Err(RunError::Config("no output directory; pass --out or set output_dir".into()));
    }
    let started = Instant::now();
    let outcome = run_experiment(&cfg, c.jobs)?;
    println!("{}", outcome.message.trim_end());
    if let Some(dir) = out {
        write_outputs(&dir, &cfg, outcome.outputs, started.elapsed().as_secs_f64())?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, cfg: &ExperimentConfig, mut outputs: OutputSet, wall: f64) -> Result<(), RunError> {
    let mut names = outputs.names();
    names.push("manifest.json".into());
    outputs.add_json(
        "manifest.json",
        &json!({
            "tool": "robustprep",
            "version": env!("CARGO_PKG_VERSION"),
            "schema_version": SCHEMA_VERSION,
            "config": cfg,
            "outputs": names,
            "wall_time_seconds": wall,
        }),
    );
    let written = outputs.write_to(dir).map_err(|e| RunError::Other(format!("writing {}: {e}", dir.display())))?;
    log::info!("wrote {} files to {}", written.len(), dir.display());
    Ok(())
}

fn gen_target_cmd(a: GenTargetArgs) -> Result<(), RunError> {
    let kind: TargetKind = serde_json::from_value(json!({ "kind": a.kind }))
        .map_err(|_| RunError::Config(format!("unknown target kind {:?}; expected haar, sine, gaussian, image or qec5", a.kind)))?;
    let state = gen_target(&kind, a.qubits, a.seed)?;
    let mut bytes = Vec::new();
    write_amplitudes(&mut bytes, &state).map_err(|e| RunError::Other(e.to_string()))?;
    match a.out {
        Some(dir) => {
            let mut set = OutputSet::default();
            set.add("target.amp", bytes);
            set.write_to(&dir).map_err(|e| RunError::Other(e.to_string()))?;
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

//! Executes one experiment config and collects its outputs.

use rayon::prelude::*;
use robustprep::device::{EmulatedDevice, NoiseModel};
use robustprep::experiments::{
    compare_ad, compare_optimizers, grad_check, tomo_check, AdComparisonConfig, GradCheckConfig, Method,
    OptimizerComparisonConfig, TomoCheckConfig,
};
use robustprep::prep::{build_ansatz, gen_target, two_qubit_gate_count, write_amplitudes};
use robustprep::sim;
use robustprep::train::{
    evaluate_exact, finetune_noise_aware, regression_loss_exact, regression_loss_sim, state_regression, synth_input_fidelity_exact,
    synthesize_unitary, train_noise_free, unitary_ansatz, unitary_loss, zero_predictor_loss, DeviceEvaluation, RegressionTask,
    RobustStateTrainer, TrainSummary,
};
use robustprep::{derive_seed, Error};
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::output::OutputSet;

const STREAM_TARGET: u64 = 0;
const STREAM_TRAIN: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_EXPERIMENT: u64 = 3;
const STREAM_REPEAT: u64 = 1000;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Numerical(String),
    Other(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Numerical(m) => write!(f, "numerical failure: {m}"),
            RunError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Numerical(m) => RunError::Numerical(m),
            Error::Io(e) => RunError::Other(e.to_string()),
            Error::EmptyCounts => RunError::Other(e.to_string()),
            other => RunError::Config(other.to_string()),
        }
    }
}

fn config_err(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

/// Result of one run: files to write and a short human-readable report.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: OutputSet,
    pub message: String,
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> robustprep::Result<()>) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn amplitude_bytes(state: &robustprep::qcore::StateVector) -> Vec<u8> {
    let mut buf = Vec::new();
    write_amplitudes(&mut buf, state).expect("writing to memory");
    buf
}

/// Runs every repetition of `cfg`; repetitions fan out over `jobs` threads.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<Outcome, RunError> {
    if cfg.repeats == 1 {
        return run_single(cfg, cfg.seed);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| RunError::Other(e.to_string()))?;
    let runs = pool.install(|| {
        (0..cfg.repeats)
            .into_par_iter()
            .map(|r| run_single(cfg, derive_seed(cfg.seed, STREAM_REPEAT + r as u64)))
            .collect::<Vec<_>>()
    });
    let mut outcome = Outcome::default();
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        outcome.outputs.nest(&format!("run_{r:03}"), run.outputs);
        outcome.message.push_str(&format!("run {r}: {}\n", run.message.trim_end()));
    }
    Ok(outcome)
}

fn run_single(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    match cfg.experiment {
        ExperimentKind::Prepare | ExperimentKind::Finetune => run_state_prep(cfg, root),
        ExperimentKind::CompareOptimizers => run_compare_optimizers(cfg, root),
        ExperimentKind::CompareAd => run_compare_ad(cfg, root),
        ExperimentKind::GradCheck => run_grad_check(cfg, root),
        ExperimentKind::TomoCheck => run_tomo_check(cfg, root),
        ExperimentKind::Synth => run_synth(cfg, root),
        ExperimentKind::Regress => run_regress(cfg, root),
    }
}

fn noise_for(cfg: &ExperimentConfig, root: u64) -> Result<NoiseModel, RunError> {
    let noise = cfg.noise.clone().unwrap_or_else(|| NoiseModel::ideal(0)).with_seed(derive_seed(root, STREAM_NOISE));
    noise.validate()?;
    Ok(noise)
}

#[derive(Serialize)]
struct StatePrepSummary<'a> {
    experiment: &'static str,
    n_qubits: usize,
    n_params: usize,
    two_qubit_gates: usize,
    sim_fidelity: f64,
    /// Exact device metrics at the start of the noise-aware phase.
    noise_unaware: DeviceEvaluation,
    /// Exact device metrics at the final parameters.
    device: DeviceEvaluation,
    train: TrainSummary,
    config: &'a ExperimentConfig,
}

fn run_state_prep(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let spec = cfg.ansatz_spec().map_err(config_err)?;
    let circuit = build_ansatz(&spec)?;
    let n = spec.n_qubits();
    let kind = cfg.target.clone().ok_or_else(|| config_err("state preparation needs a target"))?;
    let target = gen_target(&kind, n, derive_seed(root, STREAM_TARGET))?;
    let mut train = cfg.train.clone().unwrap_or_default();
    train.seed = derive_seed(root, STREAM_TRAIN);
    train.validate()?;
    let noise = noise_for(cfg, root)?;
    if train.noise_aware_steps > 0 {
        train.validate_noise_aware()?;
    }
    let mut dev = EmulatedDevice::new(noise.clone())?;

    let (start, report) = match cfg.experiment {
        ExperimentKind::Prepare => {
            let mut t = RobustStateTrainer::new(&circuit, &target, train.clone())?;
            t.run_noise_free()?;
            let start = t.params().to_vec();
            if train.noise_aware_steps > 0 {
                t.run_noise_aware(&mut dev)?;
            }
            (start, t.into_report())
        }
        _ => {
            let start = match &cfg.initial_params {
                Some(p) if p.len() != circuit.n_params() => {
                    return Err(config_err(format!("initial_params has {} entries, ansatz has {}", p.len(), circuit.n_params())))
                }
                Some(p) => p.clone(),
                None => train_noise_free(&circuit, &target, &train)?.final_params,
            };
            (start.clone(), finetune_noise_aware(&circuit, &start, &target, &mut dev, &train)?)
        }
    };
    let final_state = sim::forward(&circuit, &report.final_params)?.state().clone();
    let summary = StatePrepSummary {
        experiment: cfg.experiment.name(),
        n_qubits: n,
        n_params: circuit.n_params(),
        two_qubit_gates: two_qubit_gate_count(&circuit),
        sim_fidelity: robustprep::qcore::fidelity(&final_state, &target)?,
        noise_unaware: evaluate_exact(&circuit, &start, &target, &noise)?,
        device: evaluate_exact(&circuit, &report.final_params, &target, &noise)?,
        train: report.summary(),
        config: cfg,
    };
    let message = format!(
        "{} {}-qubit {}: sim fidelity {:.6}, device fidelity {:.6} -> {:.6}",
        summary.experiment,
        n,
        kind.name(),
        summary.sim_fidelity,
        summary.noise_unaware.fidelity,
        summary.device.fidelity
    );
    let mut outputs = OutputSet::default();
    outputs.add("report.csv", csv_bytes(|b| report.write_csv(b))?);
    outputs.add_json("summary.json", &summary);
    outputs.add("target.amp", amplitude_bytes(&target));
    outputs.add("final_state.amp", amplitude_bytes(&final_state));
    Ok(Outcome { outputs, message })
}

fn run_compare_optimizers(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let mut sub: OptimizerComparisonConfig = cfg.compare_optimizers.clone().unwrap_or_default();
    if let Some(n) = cfg.n_qubits {
        sub.n_qubits = n;
        if cfg.noise.is_none() {
            sub.noise = NoiseModel::standard(n, 0);
        }
    }
    if let Some(b) = cfg.n_blocks {
        sub.n_blocks = b;
    }
    if let Some(t) = &cfg.train {
        sub.train = t.clone();
    }
    if let Some(noise) = &cfg.noise {
        sub.noise = noise.clone();
    }
    sub.noise = sub.noise.with_seed(derive_seed(root, STREAM_NOISE));
    sub.seed = derive_seed(root, STREAM_EXPERIMENT);
    let result = compare_optimizers(&sub)?;
    let tasks: Vec<_> = result
        .tasks()
        .into_iter()
        .map(|t| {
            let last = result.rows.iter().rfind(|r| r.task == t).expect("task rows");
            json!({
                "task": t,
                "final_fidelity": {
                    "robust_state": last.robust_state,
                    "parameter_shift": last.parameter_shift,
                    "nelder_mead": last.nelder_mead,
                },
                "shots_to_final": {
                    "robust_state": result.shots_to_final(&t, Method::RobustState),
                    "parameter_shift": result.shots_to_final(&t, Method::ParameterShift),
                    "nelder_mead": result.shots_to_final(&t, Method::NelderMead),
                },
                "robust_state_dominates_parameter_shift": result.dominates(&t, Method::RobustState, Method::ParameterShift, DOMINANCE_TOL),
                "robust_state_dominates_nelder_mead": result.dominates(&t, Method::RobustState, Method::NelderMead, DOMINANCE_TOL),
            })
        })
        .collect();
    let message = tasks
        .iter()
        .map(|t| {
            format!(
                "{}: final fidelity RS {:.4} PS {:.4} NM {:.4}",
                t["task"].as_str().unwrap_or(""),
                t["final_fidelity"]["robust_state"].as_f64().unwrap_or(f64::NAN),
                t["final_fidelity"]["parameter_shift"].as_f64().unwrap_or(f64::NAN),
                t["final_fidelity"]["nelder_mead"].as_f64().unwrap_or(f64::NAN)
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let mut outputs = OutputSet::default();
    outputs.add("compare_optimizers.csv", csv_bytes(|b| result.write_csv(b))?);
    outputs.add_json(
        "summary.json",
        &json!({ "experiment": cfg.experiment.name(), "dominance_tolerance": DOMINANCE_TOL, "tasks": tasks, "resolved": sub, "config": cfg }),
    );
    Ok(Outcome { outputs, message })
}

/// Slack allowed when checking that one curve stays above another.
pub const DOMINANCE_TOL: f64 = 0.005;

fn run_compare_ad(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let mut sub: AdComparisonConfig = cfg.compare_ad.clone().unwrap_or_default();
    if let Some(n) = cfg.n_qubits {
        sub.n_qubits = n;
        if cfg.noise.is_none() {
            sub.noise = NoiseModel::standard(n, 0);
        }
    }
    if let Some(b) = cfg.n_blocks {
        sub.n_blocks = b;
    }
    if let Some(t) = &cfg.target {
        sub.target = t.clone();
    }
    if let Some(t) = &cfg.train {
        sub.train = t.clone();
    }
    if let Some(noise) = &cfg.noise {
        sub.noise = noise.clone();
    }
    sub.noise = sub.noise.with_seed(derive_seed(root, STREAM_NOISE));
    sub.seed = derive_seed(root, STREAM_EXPERIMENT);
    let result = compare_ad(&sub)?;
    let message = format!(
        "{} targets: ansatz beats Mottonen on {}; two-qubit gates Mottonen {} vs ansatz {}",
        result.rows.len(),
        result.ansatz_wins(),
        result.rows.first().map_or(0, |r| r.mottonen_two_qubit),
        result.rows.first().map_or(0, |r| r.ansatz_two_qubit)
    );
    let mut outputs = OutputSet::default();
    outputs.add("compare_ad.csv", csv_bytes(|b| result.write_csv(b))?);
    outputs.add_json(
        "summary.json",
        &json!({ "experiment": cfg.experiment.name(), "ansatz_wins": result.ansatz_wins(), "rows": result.rows, "resolved": sub, "config": cfg }),
    );
    Ok(Outcome { outputs, message })
}

fn run_grad_check(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let mut sub: GradCheckConfig = cfg.grad_check.clone().unwrap_or_default();
    if let Some(n) = cfg.n_qubits {
        sub.qubits = vec![n];
    }
    sub.seed = derive_seed(root, STREAM_EXPERIMENT);
    let report = grad_check(&sub)?;
    let message = format!(
        "max relative error (adjoint vs finite differences): {:.3e}\nmax absolute error (adjoint vs parameter shift): {:.3e}",
        report.max_fd_rel_error, report.max_ps_abs_error
    );
    let mut outputs = OutputSet::default();
    outputs.add("grad_check.csv", csv_bytes(|b| report.write_csv(b))?);
    outputs.add_json(
        "summary.json",
        &json!({
            "experiment": cfg.experiment.name(),
            "trials": report.rows.len(),
            "max_fd_rel_error": report.max_fd_rel_error,
            "max_ps_abs_error": report.max_ps_abs_error,
            "resolved": sub,
            "config": cfg,
        }),
    );
    Ok(Outcome { outputs, message })
}

fn run_tomo_check(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let mut sub: TomoCheckConfig = cfg.tomo_check.clone().unwrap_or_default();
    if let Some(n) = cfg.n_qubits {
        sub.n_qubits = n;
    }
    if let Some(noise) = &cfg.noise {
        sub.noise = noise.clone();
    }
    sub.noise.validate()?;
    sub.seed = derive_seed(root, STREAM_EXPERIMENT);
    let report = tomo_check(&sub)?;
    let mut message = String::from("shots settings runs max_bias bias/SE frobenius trace_distance\n");
    for r in &report.rows {
        message.push_str(&format!(
            "{:>5} {:>8} {:>4} {:>8.5} {:>6.2} {:>9.5} {:>14.5}\n",
            r.shots, r.settings, r.runs, r.max_abs_bias, r.max_bias_z, r.mean_frobenius_error, r.mean_trace_distance
        ));
    }
    let mut outputs = OutputSet::default();
    outputs.add("tomo_check.csv", csv_bytes(|b| report.write_csv(b))?);
    outputs.add_json("summary.json", &json!({ "experiment": cfg.experiment.name(), "rows": report.rows, "resolved": sub, "config": cfg }));
    Ok(Outcome { outputs, message })
}

fn run_synth(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let v = cfg.unitary.clone().unwrap_or_default().matrix().map_err(config_err)?;
    let mut train = cfg.train.clone().unwrap_or_default();
    train.seed = derive_seed(root, STREAM_TRAIN);
    let noise = noise_for(cfg, root)?;
    let mut dev = EmulatedDevice::new(noise.clone())?;
    let backend: Option<&mut dyn robustprep::device::QuantumBackend> =
        if train.noise_aware_steps > 0 { Some(&mut dev) } else { None };
    let report = synthesize_unitary(&v, &train, backend)?;
    let ansatz = unitary_ansatz(6);
    let before = synth_input_fidelity_exact(&ansatz, &report.noise_free_params, &v, &noise)?;
    let after = synth_input_fidelity_exact(&ansatz, &report.final_params, &v, &noise)?;
    let sim_loss = unitary_loss(&ansatz, &report.final_params, &v)?.0;
    let message = format!("unitary loss {sim_loss:.3e}; mean input fidelity on device {before:.5} -> {after:.5}");
    let mut outputs = OutputSet::default();
    outputs.add("report.csv", csv_bytes(|b| report.write_csv(b))?);
    outputs.add_json(
        "summary.json",
        &json!({
            "experiment": cfg.experiment.name(),
            "unitary_loss": sim_loss,
            "noise_unaware_input_fidelity": before,
            "final_input_fidelity": after,
            "total_device_shots": report.records.last().map_or(0, |r| r.cum_device_shots),
            "final_params": report.final_params,
            "config": cfg,
        }),
    );
    Ok(Outcome { outputs, message })
}

fn run_regress(cfg: &ExperimentConfig, root: u64) -> Result<Outcome, RunError> {
    let task = cfg.regression_task.unwrap_or(RegressionTask::SinCos);
    let mut train = cfg.train.clone().unwrap_or_default();
    train.seed = derive_seed(root, STREAM_TRAIN);
    let noise = noise_for(cfg, root)?;
    let mut dev = EmulatedDevice::new(noise.clone())?;
    let backend: Option<&mut dyn robustprep::device::QuantumBackend> =
        if train.noise_aware_steps > 0 { Some(&mut dev) } else { None };
    let report = state_regression(task, &train, backend)?;
    let sim_mae = regression_loss_sim(task, &report.final_params)?;
    let before = regression_loss_exact(task, &report.noise_free_params, &noise)?;
    let after = regression_loss_exact(task, &report.final_params, &noise)?;
    let message = format!(
        "task {}: zero predictor {:.4}, noiseless MAE {sim_mae:.4}, device MAE {before:.4} -> {after:.4}",
        u8::from(task),
        zero_predictor_loss(task)
    );
    let mut outputs = OutputSet::default();
    outputs.add("report.csv", csv_bytes(|b| report.write_csv(b))?);
    outputs.add_json(
        "summary.json",
        &json!({
            "experiment": cfg.experiment.name(),
            "task": task,
            "zero_predictor_loss": zero_predictor_loss(task),
            "sim_loss": sim_mae,
            "noise_unaware_device_loss": before,
            "final_device_loss": after,
            "final_params": report.final_params,
            "config": cfg,
        }),
    );
    Ok(Outcome { outputs, message })
}

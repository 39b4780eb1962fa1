//! Comparison studies: gradient checks, shadow-tomography sweeps, STE versus
//! parameter-shift alignment, arithmetic decomposition versus the ansatz, and
//! optimizer curves at matched device budgets.
//!
//! Every study is a pure function of its config, so reruns with the same seed
//! give identical numbers. Independent targets run in parallel on the rayon
//! pool.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{EmulatedDevice, MeasurementSetting, NoiseModel, QuantumBackend};
use crate::prep::{build_ansatz, gen_target, mottonen_decompose, two_qubit_gate_count, AnsatzSpec, CouplingMap, Entangler, TargetKind};
use crate::qcore::{fidelity, random_circuit, trace_distance, CMatrix, Circuit, Complex64, GateKind, Pauli, PauliString, StateVector};
use crate::sim::{self, GradientVector};
use crate::tomo::{build_plan, mitigate_distribution, run_tomography, PlanMode};
use crate::train::{
    evaluate_exact, nelder_mead_with_callback, parameter_shift_gradient, state_loss_with, train_noise_free, NelderMeadConfig,
    Optimizer, RobustStateTrainer, TrainConfig,
};
use crate::util::{derive_seed, rng_for};
use crate::{Error, Result};

/// Entries with a finite-difference value below this are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// The check builds a dense `2^n × 2^n` observable.
pub const GRAD_CHECK_MAX_QUBITS: usize = 8;

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn write_rows<T: Serialize>(w: impl Write, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

// ------------------------------------------------------------ gradient check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    /// Qubit counts, cycled over the trials.
    pub qubits: Vec<usize>,
    pub trials: usize,
    pub params_per_circuit: usize,
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { qubits: vec![2, 3, 4, 5], trials: 50, params_per_circuit: 12, fd_step: 1e-5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub trial: usize,
    pub n_qubits: usize,
    pub n_params: usize,
    /// Adjoint vs. central differences on `tr(M·ρ(θ))`.
    pub fd_rel_error: f64,
    /// Adjoint vs. parameter shift on a Pauli expectation.
    pub ps_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub rows: Vec<GradCheckRow>,
    pub max_fd_rel_error: f64,
    pub max_ps_abs_error: f64,
}

impl GradCheckReport {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_rows(w, &self.rows)
    }
}

/// `|a - b| / max(|b|, RELATIVE_FLOOR)`, maximized over entries.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(RELATIVE_FLOOR)).fold(0.0, f64::max)
}

/// Random circuit in which every parameter drives exactly one gate.
pub fn single_use_circuit<R: Rng + ?Sized>(n_qubits: usize, n_params: usize, rng: &mut R) -> Circuit {
    let mut c = Circuit::new(n_qubits);
    for _ in 0..n_params {
        let kind = GateKind::PARAMETERIZED[rng.random_range(0..4)];
        let a = rng.random_range(0..n_qubits);
        let qubits = if kind.arity() == 2 {
            let b = (a + rng.random_range(1..n_qubits)) % n_qubits;
            vec![a, b]
        } else {
            vec![a]
        };
        c.push_param(kind, &qubits).expect("valid random op");
        if rng.random_bool(0.3) {
            let b = (a + 1) % n_qubits;
            c.push_gate(GateKind::CNOT, &[a, b]).expect("valid random op");
        }
    }
    c
}

fn random_pauli<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> PauliString {
    let all = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut letters: Vec<Pauli> = (0..n_qubits).map(|_| all[rng.random_range(0..4)]).collect();
    if letters.iter().all(|&p| p == Pauli::I) {
        letters[rng.random_range(0..n_qubits)] = all[rng.random_range(1..4)];
    }
    PauliString::new(letters)
}

fn central_difference(f: &dyn Fn(&[f64]) -> Result<f64>, params: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|k| {
            p[k] = params[k] + h;
            let up = f(&p)?;
            p[k] = params[k] - h;
            let down = f(&p)?;
            p[k] = params[k];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

fn grad_check_trial(cfg: &GradCheckConfig, trial: usize) -> Result<GradCheckRow> {
    let n = cfg.qubits[trial % cfg.qubits.len()];
    let mut rng = rng_for(cfg.seed, trial as u64);
    let dim = 1usize << n;
    let params: Vec<f64> = (0..cfg.params_per_circuit).map(|_| rng.random_range(-PI..PI)).collect();

    let circuit = random_circuit(n, cfg.params_per_circuit, &mut rng);
    let g = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &g + g.adjoint();
    let adjoint = sim::state_gradient_cotangent(&sim::forward(&circuit, &params)?, &m)?;
    let objective = |p: &[f64]| -> Result<f64> {
        let s = sim::forward(&circuit, p)?;
        let amps = s.state().amplitudes();
        let mv = crate::qcore::linalg::mat_vec(&m, amps);
        Ok(amps.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum::<Complex64>().re)
    };
    let fd = central_difference(&objective, &params, cfg.fd_step)?;

    let plain = single_use_circuit(n, cfg.params_per_circuit, &mut rng);
    let obs = random_pauli(n, &mut rng);
    let exact = sim::expectation_gradient(&sim::forward(&plain, &params)?, &obs)?;
    let mut expect = |p: &[f64]| sim::expectation(sim::forward(&plain, p)?.state(), &obs);
    let shifted = parameter_shift_gradient(&mut expect, &params)?;
    let ps_abs_error = exact.iter().zip(shifted.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    Ok(GradCheckRow { trial, n_qubits: n, n_params: params.len(), fd_rel_error: max_relative_error(&adjoint, &fd), ps_abs_error })
}

/// Adjoint gradients against finite differences and the parameter-shift rule
/// on random circuits.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.qubits.is_empty() || cfg.qubits.iter().any(|&n| !(2..=GRAD_CHECK_MAX_QUBITS).contains(&n)) {
        return Err(Error::InvalidConfig(format!("grad-check qubit counts must lie in 2..={GRAD_CHECK_MAX_QUBITS}")));
    }
    if cfg.trials == 0 || cfg.params_per_circuit == 0 || !(cfg.fd_step > 0.0) {
        return Err(Error::InvalidConfig("grad-check needs trials, parameters and a positive step".into()));
    }
    let rows = (0..cfg.trials).into_par_iter().map(|t| grad_check_trial(cfg, t)).collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport {
        max_fd_rel_error: rows.iter().map(|r| r.fd_rel_error).fold(0.0, f64::max),
        max_ps_abs_error: rows.iter().map(|r| r.ps_abs_error).fold(0.0, f64::max),
        rows,
    })
}

// ---------------------------------------------------------- tomography sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomoCheckConfig {
    pub n_qubits: usize,
    pub shots: Vec<u64>,
    /// Settings drawn per run; `None` enumerates all `3^n`.
    pub settings_per_run: Option<usize>,
    pub runs: usize,
    pub noise: NoiseModel,
    pub mitigate_readout: bool,
    pub seed: u64,
}

impl Default for TomoCheckConfig {
    fn default() -> Self {
        Self {
            n_qubits: 2,
            shots: vec![64, 256, 1024],
            settings_per_run: Some(3),
            runs: 200,
            noise: NoiseModel::ideal(0),
            mitigate_readout: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoCheckRow {
    pub shots: u64,
    pub settings: usize,
    pub runs: usize,
    /// Largest `|mean estimate - ρ|` over real and imaginary entry parts.
    pub max_abs_bias: f64,
    /// Largest bias in units of the standard error of the mean.
    pub max_bias_z: f64,
    pub mean_frobenius_error: f64,
    pub mean_trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomoCheckReport {
    pub rows: Vec<TomoCheckRow>,
}

impl TomoCheckReport {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_rows(w, &self.rows)
    }
}

/// Bias and error of repeated shadow estimates of a fixed Haar state prepared
/// by its Mottonen circuit.
pub fn tomo_check(cfg: &TomoCheckConfig) -> Result<TomoCheckReport> {
    if cfg.runs < 2 || cfg.shots.is_empty() {
        return Err(Error::InvalidConfig("tomo-check needs at least two runs and one shot count".into()));
    }
    let target = gen_target(&TargetKind::Haar, cfg.n_qubits, cfg.seed)?;
    let circuit = mottonen_decompose(&target)?;
    let truth = target.to_density();
    let dim = target.dim();

    let rows = cfg
        .shots
        .par_iter()
        .enumerate()
        .map(|(row, &shots)| {
            let mut dev = EmulatedDevice::new(cfg.noise.with_seed(derive_seed(cfg.seed, 1 + row as u64)))?;
            let mut sum = CMatrix::zeros(dim, dim);
            let mut sum_sq_re = vec![0.0; dim * dim];
            let mut sum_sq_im = vec![0.0; dim * dim];
            let (mut frob, mut td) = (0.0, 0.0);
            let mut settings = 0;
            for run in 0..cfg.runs {
                let mode = match cfg.settings_per_run {
                    Some(k) => PlanMode::Sampled { k, seed: derive_seed(derive_seed(cfg.seed, row as u64), run as u64) },
                    None => PlanMode::Full,
                };
                let plan = build_plan(cfg.n_qubits, mode, shots)?;
                settings = plan.settings.len();
                let est = run_tomography(&mut dev, &circuit, &[], &plan, cfg.mitigate_readout)?;
                let m = est.matrix();
                for (i, z) in m.iter().enumerate() {
                    sum_sq_re[i] += z.re * z.re;
                    sum_sq_im[i] += z.im * z.im;
                }
                sum += m;
                frob += (m - truth.matrix()).norm();
                td += trace_distance(&est, &truth)?;
            }
            let runs = cfg.runs as f64;
            let (mut max_abs_bias, mut max_bias_z) = (0.0f64, 0.0f64);
            for (i, (s, t)) in sum.iter().zip(truth.matrix().iter()).enumerate() {
                for (mean_part, sq, truth_part) in [(s.re / runs, sum_sq_re[i], t.re), (s.im / runs, sum_sq_im[i], t.im)] {
                    let var = ((sq / runs - mean_part * mean_part) * runs / (runs - 1.0)).max(0.0);
                    let se = (var / runs).sqrt();
                    let bias = (mean_part - truth_part).abs();
                    max_abs_bias = max_abs_bias.max(bias);
                    if se > 1e-12 {
                        max_bias_z = max_bias_z.max(bias / se);
                    } else if bias > 1e-9 {
                        max_bias_z = f64::INFINITY;
                    }
                }
            }
            Ok(TomoCheckRow {
                shots,
                settings,
                runs: cfg.runs,
                max_abs_bias,
                max_bias_z,
                mean_frobenius_error: frob / runs,
                mean_trace_distance: td / runs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TomoCheckReport { rows })
}

// ------------------------------------------------------- STE / PS alignment

/// 3 qubits, 6 parameters: RX on qubits 0 and 2, RY on qubit 1, then RZX on
/// the ring (0,1), (1,2), (2,0).
pub fn alignment_ansatz() -> Circuit {
    let mut c = Circuit::new(3);
    for (kind, q) in [(GateKind::RX, 0), (GateKind::RY, 1), (GateKind::RX, 2)] {
        c.push_param(kind, &[q]).expect("valid op");
    }
    for pair in [[0, 1], [1, 2], [2, 0]] {
        c.push_param(GateKind::RZX, &pair).expect("valid op");
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub steps: usize,
    pub shots: u64,
    pub lr: f64,
    pub noise: NoiseModel,
    pub mitigate_readout: bool,
    pub seed: u64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self { steps: 20, shots: 1024, lr: 0.05, noise: NoiseModel::standard(3, 0), mitigate_readout: true, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentStep {
    pub step: usize,
    pub loss: f64,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub steps: Vec<AlignmentStep>,
    pub mean_cosine: f64,
}

fn device_z_expectations(
    backend: &mut dyn QuantumBackend,
    circuit: &Circuit,
    params: &[f64],
    shots: u64,
    mitigate: bool,
) -> Result<Vec<f64>> {
    let n = circuit.n_qubits();
    let counts = backend.execute(circuit, params, &[MeasurementSetting::all_z(n)], shots)?;
    let mut probs = counts[0].distribution();
    if mitigate {
        probs = mitigate_distribution(&probs, &backend.readout_calibration(n))?;
    }
    Ok((0..n)
        .map(|q| probs.iter().enumerate().map(|(s, p)| if s >> q & 1 == 0 { *p } else { -p }).sum())
        .collect())
}

/// Trains [`alignment_ansatz`] on `L = mean_i (⟨Z_i⟩ - t_i)²` with device
/// expectations and STE gradients. At every step the STE gradient is compared
/// with the parameter-shift gradient measured on the device, both using the
/// same measured `∂L/∂⟨Z_i⟩`.
pub fn ste_alignment(cfg: &AlignmentConfig) -> Result<AlignmentReport> {
    let circuit = alignment_ansatz();
    let n = circuit.n_qubits();
    let mut rng = rng_for(cfg.seed, 0);
    let mut params: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random_range(-PI..PI)).collect();
    let reference: Vec<f64> = (0..circuit.n_params()).map(|_| rng.random_range(-PI..PI)).collect();
    let ref_state = sim::forward(&circuit, &reference)?;
    let targets: Vec<f64> =
        (0..n).map(|q| sim::expectation(ref_state.state(), &PauliString::single(n, q, Pauli::Z))).collect::<Result<_>>()?;

    let mut dev = EmulatedDevice::new(cfg.noise.clone())?;
    let mut opt = Optimizer::new(Default::default(), circuit.n_params());
    let mut steps = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let measured = device_z_expectations(&mut dev, &circuit, &params, cfg.shots, cfg.mitigate_readout)?;
        let loss = measured.iter().zip(&targets).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / n as f64;
        let weights: Vec<f64> = measured.iter().zip(&targets).map(|(e, t)| 2.0 * (e - t) / n as f64).collect();

        let tape = sim::forward(&circuit, &params)?;
        let mut ste = GradientVector::zeros(circuit.n_params());
        for (q, w) in weights.iter().enumerate() {
            let g = sim::expectation_gradient(&tape, &PauliString::single(n, q, Pauli::Z))?;
            ste.0.iter_mut().zip(g.iter()).for_each(|(s, x)| *s += w * x);
        }
        let mut linear = |p: &[f64]| -> Result<f64> {
            let e = device_z_expectations(&mut dev, &circuit, p, cfg.shots, cfg.mitigate_readout)?;
            Ok(e.iter().zip(&weights).map(|(a, w)| a * w).sum())
        };
        let ps = parameter_shift_gradient(&mut linear, &params)?;
        steps.push(AlignmentStep { step, loss, cosine: ste.cosine_similarity(&ps) });
        opt.step(&mut params, &ste, cfg.lr);
    }
    let mean_cosine = steps.iter().map(|s| s.cosine).sum::<f64>() / steps.len().max(1) as f64;
    Ok(AlignmentReport { steps, mean_cosine })
}

// ----------------------------------------------------------- device cost

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceCost {
    pub n_params: usize,
    /// Tomography rounds (device calls) for one noise-aware step.
    pub robust_state_calls: u64,
    /// Tomography rounds for one parameter-shift step.
    pub parameter_shift_calls: u64,
    pub robust_state_executions: u64,
    pub parameter_shift_executions: u64,
}

/// Counts device usage of one noise-aware step and one parameter-shift step
/// on separate instrumented devices.
pub fn device_cost_per_step(circuit: &Circuit, target: &StateVector, noise: &NoiseModel, cfg: &TrainConfig) -> Result<DeviceCost> {
    let params = vec![0.1; circuit.n_params()];
    let mut rs_dev = EmulatedDevice::new(noise.clone())?;
    let mut trainer = RobustStateTrainer::with_params(circuit, target, cfg.clone(), params.clone())?;
    trainer.noise_aware_step(&mut rs_dev)?;

    let mut ps_dev = EmulatedDevice::new(noise.clone())?;
    let plan = cfg.tomography.plan(circuit.n_qubits(), cfg.seed, 0)?;
    let target_rho = target.to_density();
    let mut loss = |p: &[f64]| -> Result<f64> {
        let est = run_tomography(&mut ps_dev, circuit, p, &plan, cfg.mitigate_readout)?;
        Ok(state_loss_with(cfg.loss, &est, &target_rho)?.loss)
    };
    parameter_shift_gradient(&mut loss, &params)?;

    let (rs, ps) = (rs_dev.stats(), ps_dev.stats());
    Ok(DeviceCost {
        n_params: circuit.n_params(),
        robust_state_calls: rs.calls,
        parameter_shift_calls: ps.calls,
        robust_state_executions: rs.circuit_executions,
        parameter_shift_executions: ps.circuit_executions,
    })
}

// ------------------------------------------------------- AD comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdComparisonConfig {
    pub n_qubits: usize,
    pub n_blocks: usize,
    pub target: TargetKind,
    pub n_targets: usize,
    pub train: TrainConfig,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl Default for AdComparisonConfig {
    fn default() -> Self {
        Self {
            n_qubits: 5,
            n_blocks: 20,
            target: TargetKind::Haar,
            n_targets: 5,
            train: TrainConfig::default(),
            noise: NoiseModel::standard(5, 0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRow {
    pub target_seed: u64,
    pub mottonen_two_qubit: usize,
    pub ansatz_two_qubit: usize,
    pub mottonen_sim_fidelity: f64,
    pub ansatz_sim_fidelity: f64,
    pub mottonen_device_fidelity: f64,
    pub ansatz_device_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdComparison {
    pub rows: Vec<AdRow>,
}

impl AdComparison {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_rows(w, &self.rows)
    }

    /// Targets on which the trained ansatz beats Mottonen on the device.
    pub fn ansatz_wins(&self) -> usize {
        self.rows.iter().filter(|r| r.ansatz_device_fidelity > r.mottonen_device_fidelity).count()
    }
}

/// Mottonen decomposition versus the noise-free-trained CNOT path ansatz, on
/// gate counts and exact device fidelity.
pub fn compare_ad(cfg: &AdComparisonConfig) -> Result<AdComparison> {
    cfg.train.validate()?;
    cfg.noise.validate()?;
    let ansatz = build_ansatz(&AnsatzSpec::path(cfg.n_qubits, cfg.n_blocks, Entangler::Cnot)?)?;
    let rows = (0..cfg.n_targets)
        .into_par_iter()
        .map(|i| {
            let target_seed = derive_seed(cfg.seed, i as u64);
            let target = gen_target(&cfg.target, cfg.n_qubits, target_seed)?;
            let mottonen = mottonen_decompose(&target)?;
            let train = TrainConfig { seed: target_seed, ..cfg.train.clone() };
            let params = train_noise_free(&ansatz, &target, &train)?.final_params;
            Ok(AdRow {
                target_seed,
                mottonen_two_qubit: two_qubit_gate_count(&mottonen),
                ansatz_two_qubit: two_qubit_gate_count(&ansatz),
                mottonen_sim_fidelity: fidelity(sim::forward(&mottonen, &[])?.state(), &target)?,
                ansatz_sim_fidelity: fidelity(sim::forward(&ansatz, &params)?.state(), &target)?,
                mottonen_device_fidelity: evaluate_exact(&mottonen, &[], &target, &cfg.noise)?.fidelity,
                ansatz_device_fidelity: evaluate_exact(&ansatz, &params, &target, &cfg.noise)?.fidelity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AdComparison { rows })
}

// ----------------------------------------------------- optimizer comparison

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RobustState,
    ParameterShift,
    NelderMead,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::RobustState, Method::ParameterShift, Method::NelderMead];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerComparisonConfig {
    pub n_qubits: usize,
    pub n_blocks: usize,
    pub tasks: Vec<TargetKind>,
    /// Noise-free pre-training, learning rate and tomography for all methods.
    pub train: TrainConfig,
    pub noise: NoiseModel,
    /// Device budget in tomography rounds, shared by every method.
    pub budget_tomographies: usize,
    /// Grid spacing of the reported curves, in tomography rounds.
    pub grid_stride: usize,
    pub seed: u64,
}

impl Default for OptimizerComparisonConfig {
    fn default() -> Self {
        Self {
            n_qubits: 4,
            n_blocks: 12,
            tasks: vec![TargetKind::Haar, TargetKind::Sine, TargetKind::gaussian(), TargetKind::Image],
            train: TrainConfig::default(),
            noise: NoiseModel::standard(4, 0),
            budget_tomographies: 336,
            grid_stride: 16,
            seed: 0,
        }
    }
}

/// One budget point of the fidelity-versus-shots curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub task: String,
    pub tomographies: usize,
    pub device_shots: u64,
    pub robust_state: f64,
    pub parameter_shift: f64,
    pub nelder_mead: f64,
}

impl ComparisonRow {
    pub fn fidelity(&self, method: Method) -> f64 {
        match method {
            Method::RobustState => self.robust_state,
            Method::ParameterShift => self.parameter_shift,
            Method::NelderMead => self.nelder_mead,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerComparison {
    pub rows: Vec<ComparisonRow>,
}

impl OptimizerComparison {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        write_rows(w, &self.rows)
    }

    pub fn tasks(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.task) {
                names.push(r.task.clone());
            }
        }
        names
    }

    fn task_rows<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a ComparisonRow> + 'a {
        self.rows.iter().filter(move |r| r.task == task)
    }

    /// `a` is never more than `tol` below `b` on the grid and has the larger
    /// mean fidelity over the grid.
    pub fn dominates(&self, task: &str, a: Method, b: Method, tol: f64) -> bool {
        let rows: Vec<_> = self.task_rows(task).collect();
        if rows.is_empty() {
            return false;
        }
        let never_below = rows.iter().all(|r| r.fidelity(a) >= r.fidelity(b) - tol);
        let area: f64 = rows.iter().map(|r| r.fidelity(a) - r.fidelity(b)).sum();
        never_below && area > 0.0
    }

    /// Smallest budget at which `method` reaches its final fidelity.
    pub fn shots_to_final(&self, task: &str, method: Method) -> Option<u64> {
        let rows: Vec<_> = self.task_rows(task).collect();
        let last = rows.last()?.fidelity(method);
        rows.iter().find(|r| r.fidelity(method) >= last).map(|r| r.device_shots)
    }
}

/// Parameters after a given number of tomography rounds.
type Trajectory = Vec<(usize, Vec<f64>)>;

fn run_robust_state(circuit: &Circuit, target: &StateVector, start: &[f64], cfg: &OptimizerComparisonConfig, seed: u64) -> Result<Trajectory> {
    let mut dev = EmulatedDevice::new(cfg.noise.with_seed(derive_seed(seed, 0)))?;
    let mut trainer = RobustStateTrainer::with_params(circuit, target, cfg.train.clone(), start.to_vec())?;
    let mut path = vec![(0, start.to_vec())];
    for used in 1..=cfg.budget_tomographies {
        trainer.noise_aware_step(&mut dev)?;
        path.push((used, trainer.params().to_vec()));
    }
    Ok(path)
}

fn run_parameter_shift(circuit: &Circuit, target: &StateVector, start: &[f64], cfg: &OptimizerComparisonConfig, seed: u64) -> Result<Trajectory> {
    let mut dev = EmulatedDevice::new(cfg.noise.with_seed(derive_seed(seed, 1)))?;
    let target_rho = target.to_density();
    let per_step = 2 * circuit.n_params();
    let mut params = start.to_vec();
    let mut opt = Optimizer::new(cfg.train.optimizer, params.len());
    let mut path = vec![(0, params.clone())];
    let mut round = 0u64;
    let mut loss = |p: &[f64]| -> Result<f64> {
        let plan = cfg.train.tomography.plan(circuit.n_qubits(), derive_seed(seed, 2), round)?;
        round += 1;
        let est = run_tomography(&mut dev, circuit, p, &plan, cfg.train.mitigate_readout)?;
        Ok(state_loss_with(cfg.train.loss, &est, &target_rho)?.loss)
    };
    let mut used = 0;
    while used + per_step <= cfg.budget_tomographies {
        let grad = parameter_shift_gradient(&mut loss, &params)?;
        opt.step(&mut params, &grad, cfg.train.lr);
        used += per_step;
        path.push((used, params.clone()));
    }
    Ok(path)
}

fn run_nelder_mead(circuit: &Circuit, target: &StateVector, start: &[f64], cfg: &OptimizerComparisonConfig, seed: u64) -> Result<Trajectory> {
    let mut dev = EmulatedDevice::new(cfg.noise.with_seed(derive_seed(seed, 3)))?;
    let target_rho = target.to_density();
    let mut path = vec![(0, start.to_vec())];
    let mut used = 0;
    let mut best = f64::INFINITY;
    let mut loss = |p: &[f64]| -> Result<f64> {
        let plan = cfg.train.tomography.plan(circuit.n_qubits(), derive_seed(seed, 4), used as u64)?;
        used += 1;
        let est = run_tomography(&mut dev, circuit, p, &plan, cfg.train.mitigate_readout)?;
        let l = state_loss_with(cfg.train.loss, &est, &target_rho)?.loss;
        if l < best {
            best = l;
            path.push((used, p.to_vec()));
        }
        Ok(l)
    };
    let nm = NelderMeadConfig { max_evaluations: cfg.budget_tomographies, ..Default::default() };
    nelder_mead_with_callback(&mut loss, start, &nm, &mut |_, _, _| {})?;
    Ok(path)
}

/// Exact device fidelity of a trajectory on the budget grid.
fn curve(path: &Trajectory, grid: &[usize], circuit: &Circuit, target: &StateVector, noise: &NoiseModel) -> Result<Vec<f64>> {
    let mut cache: Vec<Option<f64>> = vec![None; path.len()];
    grid.iter()
        .map(|&b| {
            let idx = path.iter().rposition(|(used, _)| *used <= b).expect("trajectory starts at zero");
            if cache[idx].is_none() {
                cache[idx] = Some(evaluate_exact(circuit, &path[idx].1, target, noise)?.fidelity);
            }
            Ok(cache[idx].expect("just filled"))
        })
        .collect()
}

/// RobustState, parameter shift and Nelder-Mead from the same noise-free
/// optimum, each with the same device budget. Curves report the exact device
/// fidelity of each method's current parameters (best-seen for Nelder-Mead).
pub fn compare_optimizers(cfg: &OptimizerComparisonConfig) -> Result<OptimizerComparison> {
    cfg.train.validate_noise_aware()?;
    cfg.noise.validate()?;
    if cfg.tasks.is_empty() || cfg.grid_stride == 0 {
        return Err(Error::InvalidConfig("optimizer comparison needs tasks and a positive grid stride".into()));
    }
    let coupling = CouplingMap::path(cfg.n_qubits)?;
    let circuit = build_ansatz(&AnsatzSpec { coupling, n_blocks: cfg.n_blocks, entangler: Entangler::Cnot })?;
    if cfg.budget_tomographies < circuit.n_params() + 1 {
        return Err(Error::InvalidConfig(format!(
            "budget of {} tomographies is below the Nelder-Mead simplex size {}",
            cfg.budget_tomographies,
            circuit.n_params() + 1
        )));
    }
    let shots_per_round = cfg.train.tomography.plan(cfg.n_qubits, 0, 0)?.total_shots();
    let mut grid: Vec<usize> = (0..=cfg.budget_tomographies).step_by(cfg.grid_stride).collect();
    if grid.last() != Some(&cfg.budget_tomographies) {
        grid.push(cfg.budget_tomographies);
    }

    let per_task = cfg
        .tasks
        .par_iter()
        .enumerate()
        .map(|(i, kind)| {
            let seed = derive_seed(cfg.seed, i as u64);
            let target = gen_target(kind, cfg.n_qubits, seed)?;
            let start = train_noise_free(&circuit, &target, &TrainConfig { seed, ..cfg.train.clone() })?.final_params;
            let methods = [
                run_robust_state(&circuit, &target, &start, cfg, seed)?,
                run_parameter_shift(&circuit, &target, &start, cfg, seed)?,
                run_nelder_mead(&circuit, &target, &start, cfg, seed)?,
            ];
            let curves =
                methods.iter().map(|p| curve(p, &grid, &circuit, &target, &cfg.noise)).collect::<Result<Vec<_>>>()?;
            Ok(grid
                .iter()
                .enumerate()
                .map(|(j, &b)| ComparisonRow {
                    task: kind.name().to_string(),
                    tomographies: b,
                    device_shots: b as u64 * shots_per_round,
                    robust_state: curves[0][j],
                    parameter_shift: curves[1][j],
                    nelder_mead: curves[2][j],
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimizerComparison { rows: per_task.into_iter().flatten().collect() })
}

use rand::Rng;

use super::{pure_state_loss, state_loss_with, Optimizer, Phase, StepRecord, TrainConfig, TrainReport};
use crate::device::QuantumBackend;
use crate::qcore::{coherent_error, fidelity, incoherent_strength, Circuit, DensityMatrix, StateVector};
use crate::sim::{self, GradientVector};
use crate::tomo::run_tomography;
use crate::util::rng_for;
use crate::{Error, Result};

const STREAM_INIT: u64 = 0;
const STREAM_PLAN: u64 = 1;

/// Seeded uniform initialization in `[-scale, scale]`.
pub fn init_params(n_params: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, STREAM_INIT);
    (0..n_params).map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 }).collect()
}

/// Straight-through gradient: the cotangent measured on the device, pushed
/// through the noiseless simulator at the same parameters.
pub fn ste_gradient(circuit: &Circuit, params: &[f64], cotangent: &crate::qcore::linalg::CMatrix) -> Result<GradientVector> {
    let tape = sim::forward(circuit, params)?;
    sim::state_gradient_cotangent(&tape, cotangent)
}

fn check_finite(loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("loss became {loss}")))
    }
}

/// The two-phase trainer. Optimizer moments persist across phases.
#[derive(Debug, Clone)]
pub struct RobustStateTrainer<'a> {
    circuit: &'a Circuit,
    target: &'a StateVector,
    target_rho: DensityMatrix,
    cfg: TrainConfig,
    params: Vec<f64>,
    optimizer: Optimizer,
    records: Vec<StepRecord>,
    cum_shots: u64,
    rounds: u64,
}

impl<'a> RobustStateTrainer<'a> {
    /// Starts from seeded random parameters.
    pub fn new(circuit: &'a Circuit, target: &'a StateVector, cfg: TrainConfig) -> Result<Self> {
        let params = init_params(circuit.n_params(), cfg.init_scale, cfg.seed);
        Self::with_params(circuit, target, cfg, params)
    }

    pub fn with_params(circuit: &'a Circuit, target: &'a StateVector, cfg: TrainConfig, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        circuit.check_params(&params)?;
        if target.n_qubits() != circuit.n_qubits() {
            return Err(Error::DimensionMismatch { expected: circuit.n_qubits(), got: target.n_qubits() });
        }
        Ok(Self {
            circuit,
            target,
            target_rho: target.to_density(),
            optimizer: Optimizer::new(cfg.optimizer, circuit.n_params()),
            cfg,
            params,
            records: Vec::new(),
            cum_shots: 0,
            rounds: 0,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn cum_device_shots(&self) -> u64 {
        self.cum_shots
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// One simulator step against the pure target.
    pub fn noise_free_step(&mut self) -> Result<&StepRecord> {
        let tape = sim::forward(self.circuit, &self.params)?;
        let (loss, m_psi) = pure_state_loss(self.cfg.loss, tape.state(), self.target)?;
        check_finite(loss)?;
        let sim_fidelity = fidelity(tape.state(), self.target)?;
        let grad = sim::backward(&tape, &m_psi)?;
        self.optimizer.step(&mut self.params, &grad, self.cfg.lr);
        self.push(Phase::NoiseFree, loss, sim_fidelity, None)
    }

    /// One noise-aware step: tomography on the device, loss on the estimate,
    /// gradient through the simulator.
    pub fn noise_aware_step(&mut self, backend: &mut dyn QuantumBackend) -> Result<&StepRecord> {
        self.cfg.validate_noise_aware()?;
        let plan = self.cfg.tomography.plan(self.circuit.n_qubits(), plan_seed(self.cfg.seed), self.rounds)?;
        self.rounds += 1;
        let estimate = run_tomography(backend, self.circuit, &self.params, &plan, self.cfg.mitigate_readout)?;
        self.cum_shots += plan.total_shots();
        let l = state_loss_with(self.cfg.loss, &estimate, &self.target_rho)?;
        check_finite(l.loss)?;
        if l.loss < super::LOSS_FLOOR {
            log::warn!("degenerate tomography loss {:.3e}; skipping update", l.loss);
        }
        let tape = sim::forward(self.circuit, &self.params)?;
        let sim_fidelity = fidelity(tape.state(), self.target)?;
        let grad = sim::state_gradient_cotangent(&tape, &l.cotangent)?;
        let device = (
            fidelity(self.target, &estimate)?,
            coherent_error(self.target, &estimate).ok(),
            incoherent_strength(self.target, &estimate).ok().map(|e| e.p),
        );
        self.optimizer.step(&mut self.params, &grad, self.cfg.lr);
        self.push(Phase::NoiseAware, l.loss, sim_fidelity, Some(device))
    }

    fn push(&mut self, phase: Phase, loss: f64, sim_fidelity: f64, device: Option<(f64, Option<f64>, Option<f64>)>) -> Result<&StepRecord> {
        self.records.push(StepRecord {
            step: self.records.len(),
            phase,
            loss,
            sim_fidelity,
            dev_fidelity: device.map(|d| d.0),
            coherent_err: device.and_then(|d| d.1),
            incoherent_p: device.and_then(|d| d.2),
            cum_device_shots: self.cum_shots,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn run_noise_free(&mut self) -> Result<()> {
        for _ in 0..self.cfg.noise_free_steps {
            self.noise_free_step()?;
        }
        Ok(())
    }

    pub fn run_noise_aware(&mut self, backend: &mut dyn QuantumBackend) -> Result<()> {
        self.cfg.validate_noise_aware()?;
        for _ in 0..self.cfg.noise_aware_steps {
            self.noise_aware_step(backend)?;
        }
        Ok(())
    }

    pub fn into_report(self) -> TrainReport {
        TrainReport { records: self.records, final_params: self.params }
    }
}

fn plan_seed(seed: u64) -> u64 {
    crate::util::derive_seed(seed, STREAM_PLAN)
}

/// Noise-free phase only, from seeded initial parameters.
pub fn train_noise_free(circuit: &Circuit, target: &StateVector, cfg: &TrainConfig) -> Result<TrainReport> {
    let mut t = RobustStateTrainer::new(circuit, target, cfg.clone())?;
    t.run_noise_free()?;
    Ok(t.into_report())
}

/// Noise-aware phase only, from `params0` with fresh optimizer moments.
pub fn finetune_noise_aware(
    circuit: &Circuit,
    params0: &[f64],
    target: &StateVector,
    backend: &mut dyn QuantumBackend,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate_noise_aware()?;
    let mut t = RobustStateTrainer::with_params(circuit, target, cfg.clone(), params0.to_vec())?;
    t.run_noise_aware(backend)?;
    Ok(t.into_report())
}

/// Both phases with shared optimizer state.
pub fn robust_state(circuit: &Circuit, target: &StateVector, backend: &mut dyn QuantumBackend, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate_noise_aware()?;
    let mut t = RobustStateTrainer::new(circuit, target, cfg.clone())?;
    t.run_noise_free()?;
    t.run_noise_aware(backend)?;
    Ok(t.into_report())
}

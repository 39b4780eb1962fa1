//! Variational tasks beyond state preparation: two-qubit unitary synthesis
//! and quantum state regression.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{init_params, state_loss_with, Optimizer, Phase, TrainConfig};
use crate::device::{true_output_state, MeasurementSetting, NoiseModel, QuantumBackend};
use crate::prep::{build_ansatz, AnsatzSpec, Entangler};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{fidelity, Circuit, Complex64, GateKind, PauliString, StateVector, C0};
use crate::sim::{self, GradientVector};
use crate::tomo::{mitigate_distribution, run_tomography};
use crate::{Error, Result};

/// One step of an extension task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub step: usize,
    pub phase: Phase,
    /// Loss that drove this step (device estimate in the noise-aware phase).
    pub loss: f64,
    /// Noiseless loss at the same parameters.
    pub sim_loss: f64,
    pub cum_device_shots: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskReport {
    pub records: Vec<TaskRecord>,
    /// Parameters at the end of the noise-free phase.
    pub noise_free_params: Vec<f64>,
    pub final_params: Vec<f64>,
}

impl TaskReport {
    pub fn write_csv(&self, w: impl std::io::Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(|e| Error::Io(e.into()))?;
        }
        out.flush()?;
        Ok(())
    }
}

struct Recorder {
    records: Vec<TaskRecord>,
    shots: u64,
}

impl Recorder {
    fn push(&mut self, phase: Phase, loss: f64, sim_loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("loss became {loss}")));
        }
        self.records.push(TaskRecord { step: self.records.len(), phase, loss, sim_loss, cum_device_shots: self.shots });
        Ok(())
    }
}

fn mean_gradient(parts: impl IntoIterator<Item = GradientVector>, n_params: usize, count: usize) -> GradientVector {
    let mut g = vec![0.0; n_params];
    for part in parts {
        g.iter_mut().zip(part.iter()).for_each(|(a, b)| *a += b / count as f64);
    }
    GradientVector(g)
}

// ---------------------------------------------------------------- synthesis

/// `layers` × [(RY, RZ, RY) on each qubit, RZX(0, 1)] and a final (RY, RZ, RY) layer.
pub fn unitary_ansatz(layers: usize) -> Circuit {
    let mut c = Circuit::new(2);
    let rotations = |c: &mut Circuit| {
        for q in 0..2 {
            for kind in [GateKind::RY, GateKind::RZ, GateKind::RY] {
                c.push_param(kind, &[q]).expect("valid op");
            }
        }
    };
    for _ in 0..layers {
        rotations(&mut c);
        c.push_param(GateKind::RZX, &[0, 1]).expect("valid op");
    }
    rotations(&mut c);
    c
}

/// The circuit's unitary, column `j` = image of basis state `j`.
pub fn circuit_unitary(circuit: &Circuit, params: &[f64]) -> Result<CMatrix> {
    let dim = 1usize << circuit.n_qubits();
    let mut u = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let tape = sim::forward_from(circuit, params, &StateVector::basis(circuit.n_qubits(), j))?;
        u.set_column(j, &nalgebra::DVector::from_column_slice(tape.state().amplitudes()));
    }
    Ok(u)
}

fn check_unitary(v: &CMatrix, dim: usize) -> Result<()> {
    if v.nrows() != dim || v.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: v.nrows() });
    }
    let err = (v.adjoint() * v - linalg::identity(dim)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > 1e-8 {
        return Err(Error::InvalidState(format!("target is not unitary (error {err:.2e})")));
    }
    Ok(())
}

/// `1 - |tr(V†U(θ))|²/d²` and its gradient.
///
/// With `z = tr(V†U) = Σ_j ⟨v_j|u_j⟩`, `∂L/∂θ = -(2/d²)·Re(z̄·Σ_j⟨v_j|∂u_j⟩)`,
/// and `backward(tape_j, z·v_j) = 2·Re(z̄⟨v_j|∂u_j⟩)`.
pub fn unitary_loss(circuit: &Circuit, params: &[f64], v: &CMatrix) -> Result<(f64, GradientVector)> {
    let n = circuit.n_qubits();
    let dim = 1usize << n;
    check_unitary(v, dim)?;
    let tapes = (0..dim)
        .map(|j| sim::forward_from(circuit, params, &StateVector::basis(n, j)))
        .collect::<Result<Vec<_>>>()?;
    let z: Complex64 = tapes
        .iter()
        .enumerate()
        .map(|(j, t)| v.column(j).iter().zip(t.state().amplitudes()).map(|(a, b)| a.conj() * b).sum::<Complex64>())
        .sum();
    let d2 = (dim * dim) as f64;
    let loss = 1.0 - z.norm_sqr() / d2;
    let mut grad = vec![0.0; circuit.n_params()];
    for (j, tape) in tapes.iter().enumerate() {
        let xi: Vec<Complex64> = v.column(j).iter().map(|a| z * a).collect();
        let g = sim::backward(tape, &xi)?;
        grad.iter_mut().zip(g.iter()).for_each(|(a, b)| *a -= b / d2);
    }
    Ok((loss, GradientVector(grad)))
}

/// Preparation circuits for `{|0⟩, |1⟩, |+⟩, |+i⟩}^{⊗2}` (up to phase),
/// qubit 0's state varying slowest.
pub fn product_inputs() -> Vec<Circuit> {
    let single: [&[GateKind]; 4] =
        [&[], &[GateKind::X], &[GateKind::H], &[GateKind::H, GateKind::SDG, GateKind::X]];
    let mut out = Vec::with_capacity(16);
    for a in single {
        for b in single {
            let mut c = Circuit::new(2);
            for (q, gates) in [(0, a), (1, b)] {
                for &g in gates {
                    c.push_gate(g, &[q]).expect("valid op");
                }
            }
            out.push(c);
        }
    }
    out
}

fn input_circuits(ansatz: &Circuit) -> Result<Vec<(Circuit, StateVector)>> {
    product_inputs()
        .into_iter()
        .map(|mut prefix| {
            let input = sim::forward(&prefix, &[])?.state().clone();
            prefix.append(ansatz)?;
            Ok((prefix, input))
        })
        .collect()
}

fn apply_unitary(v: &CMatrix, s: &StateVector) -> Result<StateVector> {
    StateVector::new(s.n_qubits(), linalg::mat_vec(v, s.amplitudes()))
}

/// Mean fidelity of the 16 product inputs through the device against `V`.
/// Evaluation only.
pub fn synth_input_fidelity_exact(ansatz: &Circuit, params: &[f64], v: &CMatrix, noise: &NoiseModel) -> Result<f64> {
    check_unitary(v, 4)?;
    let inputs = input_circuits(ansatz)?;
    let mut total = 0.0;
    for (circuit, input) in &inputs {
        let rho = true_output_state(circuit, params, noise)?;
        total += fidelity(&apply_unitary(v, input)?, &rho)?;
    }
    Ok(total / inputs.len() as f64)
}

/// Trains [`unitary_ansatz`]`(6)` towards `v`: noiseless unitary loss, then
/// (with a backend) noise-aware steps on tomography of the 16 product inputs.
pub fn synthesize_unitary(v: &CMatrix, cfg: &TrainConfig, backend: Option<&mut dyn QuantumBackend>) -> Result<TaskReport> {
    check_unitary(v, 4)?;
    cfg.validate()?;
    let ansatz = unitary_ansatz(6);
    let mut params = init_params(ansatz.n_params(), cfg.init_scale, cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, ansatz.n_params());
    let mut rec = Recorder { records: Vec::new(), shots: 0 };

    for _ in 0..cfg.noise_free_steps {
        let (loss, grad) = unitary_loss(&ansatz, &params, v)?;
        opt.step(&mut params, &grad, cfg.lr);
        rec.push(Phase::NoiseFree, loss, loss)?;
    }
    let noise_free_params = params.clone();

    if let Some(backend) = backend {
        cfg.validate_noise_aware()?;
        let inputs = input_circuits(&ansatz)?;
        let targets: Vec<_> = inputs
            .iter()
            .map(|(_, s)| apply_unitary(v, s).map(|t| t.to_density()))
            .collect::<Result<_>>()?;
        for round in 0..cfg.noise_aware_steps as u64 {
            let plan = cfg.tomography.plan(2, cfg.seed, round)?;
            let mut loss = 0.0;
            let mut parts = Vec::with_capacity(inputs.len());
            for ((circuit, _), target) in inputs.iter().zip(&targets) {
                let est = run_tomography(backend, circuit, &params, &plan, cfg.mitigate_readout)?;
                rec.shots += plan.total_shots();
                let l = state_loss_with(cfg.loss, &est, target)?;
                loss += l.loss / inputs.len() as f64;
                let tape = sim::forward(circuit, &params)?;
                parts.push(sim::state_gradient_cotangent(&tape, &l.cotangent)?);
            }
            let sim_loss = unitary_loss(&ansatz, &params, v)?.0;
            let grad = mean_gradient(parts, ansatz.n_params(), inputs.len());
            opt.step(&mut params, &grad, cfg.lr);
            rec.push(Phase::NoiseAware, loss, sim_loss)?;
        }
    }
    Ok(TaskReport { records: rec.records, noise_free_params, final_params: params })
}

// --------------------------------------------------------------- regression

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RegressionTask {
    /// Label `sin 2θ · cos φ`.
    SinCos,
    /// Label `sin 2θ · sin φ`.
    SinSin,
}

impl TryFrom<u8> for RegressionTask {
    type Error = Error;

    fn try_from(id: u8) -> Result<Self> {
        match id {
            1 => Ok(RegressionTask::SinCos),
            2 => Ok(RegressionTask::SinSin),
            _ => Err(Error::InvalidConfig(format!("regression task must be 1 or 2, got {id}"))),
        }
    }
}

impl From<RegressionTask> for u8 {
    fn from(t: RegressionTask) -> u8 {
        match t {
            RegressionTask::SinCos => 1,
            RegressionTask::SinSin => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSample {
    pub theta: f64,
    pub phi: f64,
    pub label: f64,
}

/// 8×8 grid: θ evenly spaced over `[0, π/2]` (both ends), φ = 2πj/8.
pub fn regression_dataset(task: RegressionTask) -> Vec<RegressionSample> {
    let mut out = Vec::with_capacity(64);
    for i in 0..8 {
        let theta = FRAC_PI_2 * i as f64 / 7.0;
        for j in 0..8 {
            let phi = 2.0 * PI * j as f64 / 8.0;
            let trig = match task {
                RegressionTask::SinCos => phi.cos(),
                RegressionTask::SinSin => phi.sin(),
            };
            out.push(RegressionSample { theta, phi, label: (2.0 * theta).sin() * trig });
        }
    }
    out
}

/// Mean |label|: the loss of always predicting 0.
pub fn zero_predictor_loss(task: RegressionTask) -> f64 {
    let data = regression_dataset(task);
    data.iter().map(|s| s.label.abs()).sum::<f64>() / data.len() as f64
}

/// The 3-qubit, 6-block path ansatz used as the regression model.
pub fn regression_ansatz() -> Circuit {
    build_ansatz(&AnsatzSpec::path(3, 6, Entangler::Cnot).expect("valid spec")).expect("valid ansatz")
}

/// Encodes `cos θ|000⟩ + e^{iφ} sin θ|111⟩` and then runs `model`.
pub fn encoded_circuit(sample: &RegressionSample, model: &Circuit) -> Result<Circuit> {
    let mut c = Circuit::new(3);
    c.push_fixed(GateKind::RY, &[0], 2.0 * sample.theta)?;
    c.push_fixed(GateKind::RZ, &[0], sample.phi)?;
    c.push_gate(GateKind::CNOT, &[0, 1])?;
    c.push_gate(GateKind::CNOT, &[0, 2])?;
    c.append(model)?;
    Ok(c)
}

fn zzz() -> PauliString {
    "ZZZ".parse().expect("valid Pauli string")
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Noiseless MAE and its gradient.
fn regression_sim(circuits: &[(Circuit, f64)], params: &[f64]) -> Result<(f64, Vec<f64>, Vec<GradientVector>)> {
    let obs = zzz();
    let mut preds = Vec::with_capacity(circuits.len());
    let mut grads = Vec::with_capacity(circuits.len());
    for (c, _) in circuits {
        let tape = sim::forward(c, params)?;
        preds.push(sim::expectation(tape.state(), &obs)?);
        grads.push(sim::expectation_gradient(&tape, &obs)?);
    }
    let mae = preds.iter().zip(circuits).map(|(p, (_, y))| (p - y).abs()).sum::<f64>() / circuits.len() as f64;
    Ok((mae, preds, grads))
}

/// Noiseless MAE of `params` on the task's grid.
pub fn regression_loss_sim(task: RegressionTask, params: &[f64]) -> Result<f64> {
    let model = regression_ansatz();
    let circuits = regression_dataset(task)
        .iter()
        .map(|s| Ok((encoded_circuit(s, &model)?, s.label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(regression_sim(&circuits, params)?.0)
}

/// MAE using exact device expectations. Evaluation only.
pub fn regression_loss_exact(task: RegressionTask, params: &[f64], noise: &NoiseModel) -> Result<f64> {
    let model = regression_ansatz();
    let data = regression_dataset(task);
    let obs = zzz();
    let mut total = 0.0;
    for s in &data {
        let rho = true_output_state(&encoded_circuit(s, &model)?, params, noise)?;
        // ⟨P⟩ = Σ_c (P·ρ[:, c])[c]
        let m = rho.matrix();
        let mut expectation = C0;
        for c in 0..m.ncols() {
            let col: Vec<Complex64> = m.column(c).iter().copied().collect();
            expectation += obs.apply(&col)?[c];
        }
        total += (expectation.re - s.label).abs();
    }
    Ok(total / data.len() as f64)
}

fn device_parity(backend: &mut dyn QuantumBackend, circuit: &Circuit, params: &[f64], shots: u64, mitigate: bool) -> Result<f64> {
    let counts = backend.execute(circuit, params, &[MeasurementSetting::all_z(3)], shots)?;
    let mut probs = counts[0].distribution();
    if mitigate {
        probs = mitigate_distribution(&probs, &backend.readout_calibration(3))?;
    }
    Ok(probs.iter().enumerate().map(|(s, p)| if s.count_ones() % 2 == 0 { *p } else { -p }).sum())
}

/// Trains the regression model: MAE on noiseless `⟨ZZZ⟩`, then (with a
/// backend) noise-aware steps where predictions come from Z-basis counts and
/// the gradient is pushed through the simulator.
pub fn state_regression(task: RegressionTask, cfg: &TrainConfig, backend: Option<&mut dyn QuantumBackend>) -> Result<TaskReport> {
    cfg.validate()?;
    let model = regression_ansatz();
    let data = regression_dataset(task);
    let circuits = data.iter().map(|s| Ok((encoded_circuit(s, &model)?, s.label))).collect::<Result<Vec<_>>>()?;
    let n_params = model.n_params();
    let mut params = init_params(n_params, cfg.init_scale, cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, n_params);
    let mut rec = Recorder { records: Vec::new(), shots: 0 };
    let count = circuits.len();

    for _ in 0..cfg.noise_free_steps {
        let (mae, preds, grads) = regression_sim(&circuits, &params)?;
        let weighted = grads.into_iter().zip(preds.iter().zip(&circuits)).map(|(g, (p, (_, y)))| {
            let s = sign(p - y);
            GradientVector(g.iter().map(|x| s * x).collect())
        });
        let grad = mean_gradient(weighted, n_params, count);
        opt.step(&mut params, &grad, cfg.lr);
        rec.push(Phase::NoiseFree, mae, mae)?;
    }
    let noise_free_params = params.clone();

    if let Some(backend) = backend {
        for _ in 0..cfg.noise_aware_steps {
            let (sim_mae, _, grads) = regression_sim(&circuits, &params)?;
            let mut dev_mae = 0.0;
            let mut weighted = Vec::with_capacity(count);
            for ((c, y), g) in circuits.iter().zip(grads) {
                let p = device_parity(backend, c, &params, cfg.tomography.shots, cfg.mitigate_readout)?;
                rec.shots += cfg.tomography.shots;
                dev_mae += (p - y).abs() / count as f64;
                let s = sign(p - y);
                weighted.push(GradientVector(g.iter().map(|x| s * x).collect()));
            }
            let grad = mean_gradient(weighted, n_params, count);
            opt.step(&mut params, &grad, cfg.lr);
            rec.push(Phase::NoiseAware, dev_mae, sim_mae)?;
        }
    }
    Ok(TaskReport { records: rec.records, noise_free_params, final_params: params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{gate_unitary, C1};

    fn cnot_matrix() -> CMatrix {
        // little-endian: control qubit 0, target qubit 1
        let mut m = CMatrix::zeros(4, 4);
        for (from, to) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
            m[(to, from)] = C1;
        }
        m
    }

    #[test]
    fn identity_target_at_zero_params() {
        let a = unitary_ansatz(6);
        assert_eq!(a.n_params(), 48);
        let (loss, _) = unitary_loss(&a, &vec![0.0; 48], &linalg::identity(4)).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn unitary_gradient_matches_finite_differences() {
        let a = unitary_ansatz(2);
        let params: Vec<f64> = (0..a.n_params()).map(|i| 0.2 * i as f64 - 1.0).collect();
        let v = cnot_matrix();
        let (_, g) = unitary_loss(&a, &params, &v).unwrap();
        let h = 1e-5;
        for k in 0..params.len() {
            let mut p = params.clone();
            p[k] += h;
            let plus = unitary_loss(&a, &p, &v).unwrap().0;
            p[k] -= 2.0 * h;
            let minus = unitary_loss(&a, &p, &v).unwrap().0;
            let fd = (plus - minus) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-8, "param {k}: fd {fd} adjoint {}", g[k]);
        }
    }

    #[test]
    fn circuit_unitary_matches_gate() {
        let mut c = Circuit::new(2);
        c.push_gate(GateKind::CNOT, &[0, 1]).unwrap();
        let u = circuit_unitary(&c, &[]).unwrap();
        assert_eq!(u, cnot_matrix());
        let g = gate_unitary(GateKind::CNOT, None).unwrap();
        assert_eq!(g.get(3, 2), C1);
    }

    #[test]
    fn product_inputs_are_distinct_states() {
        let states: Vec<StateVector> =
            product_inputs().iter().map(|c| sim::forward(c, &[]).unwrap().state().clone()).collect();
        assert_eq!(states.len(), 16);
        for i in 0..16 {
            for j in i + 1..16 {
                assert!(states[i].inner(&states[j]).norm() < 1.0 - 1e-6);
            }
        }
        let plus_i = &states[15];
        let half = Complex64::new(0.5, 0.0);
        let want = [half, half * Complex64::i(), half * Complex64::i(), -half];
        let phase = plus_i.amplitudes()[0] / want[0];
        assert!(plus_i.amplitudes().iter().zip(want).all(|(a, w)| (a - w * phase).norm() < 1e-12));
    }

    #[test]
    fn cnot_is_synthesizable() {
        let cfg = TrainConfig { lr: 0.01, noise_free_steps: 2000, seed: 1, init_scale: 0.5, ..Default::default() };
        let report = synthesize_unitary(&cnot_matrix(), &cfg, None).unwrap();
        let last = report.records.last().unwrap().loss;
        assert!(last < 1e-4, "final loss {last}");
        assert!(synthesize_unitary(&(cnot_matrix() * Complex64::new(2.0, 0.0)), &cfg, None).is_err());
    }

    #[test]
    fn regression_grid() {
        let data = regression_dataset(RegressionTask::SinCos);
        assert_eq!(data.len(), 64);
        // exact grid mean of |sin 2θ cos φ|
        assert!((zero_predictor_loss(RegressionTask::SinCos) - 0.330_542_5).abs() < 1e-6);
        assert!(RegressionTask::try_from(3).is_err());
    }

    #[test]
    fn encoding_prepares_ghz_like_state() {
        let s = RegressionSample { theta: 0.3, phi: 1.1, label: 0.0 };
        let c = encoded_circuit(&s, &Circuit::new(3)).unwrap();
        let psi = sim::forward(&c, &[]).unwrap().state().clone();
        let a = psi.amplitudes();
        let rel = a[7] / a[0];
        assert!((a[0].norm() - 0.3f64.cos()).abs() < 1e-12);
        assert!((rel - Complex64::from_polar(0.3f64.tan(), 1.1)).norm() < 1e-12);
        let xxx: PauliString = "XXX".parse().unwrap();
        let want = (0.6f64).sin() * 1.1f64.cos();
        assert!((sim::expectation(&psi, &xxx).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn regression_trains_below_baseline() {
        let cfg = TrainConfig { lr: 0.02, noise_free_steps: 300, seed: 2, ..Default::default() };
        let report = state_regression(RegressionTask::SinCos, &cfg, None).unwrap();
        let last = report.records.last().unwrap().loss;
        assert!(last < 0.2, "final MAE {last}");
        let exact = regression_loss_exact(RegressionTask::SinCos, &report.final_params, &NoiseModel::ideal(0)).unwrap();
        let sim_loss = regression_loss_sim(RegressionTask::SinCos, &report.final_params).unwrap();
        assert!((exact - sim_loss).abs() < 1e-10);
    }
}

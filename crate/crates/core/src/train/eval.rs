use serde::{Deserialize, Serialize};

use crate::device::{true_output_state, NoiseModel, QuantumBackend};
use crate::qcore::{coherent_error, fidelity, incoherent_strength, Circuit, StateRef, StateVector};
use crate::tomo::{run_tomography, TomographyPlan};
use crate::Result;

/// Quality of a prepared state against a pure target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceEvaluation {
    pub fidelity: f64,
    pub coherent_error: f64,
    pub incoherent_strength: f64,
    /// The purity fell outside the depolarizing model's range.
    pub incoherent_clamped: bool,
}

pub fn evaluate_state<'a>(target: &StateVector, measured: impl Into<StateRef<'a>>) -> Result<DeviceEvaluation> {
    let measured = measured.into();
    let inc = incoherent_strength(target, measured)?;
    Ok(DeviceEvaluation {
        fidelity: fidelity(target, measured)?,
        coherent_error: coherent_error(target, measured)?,
        incoherent_strength: inc.p,
        incoherent_clamped: inc.clamped,
    })
}

/// Metrics from one round of tomography, using the raw estimate.
pub fn evaluate_on_device(
    circuit: &Circuit,
    params: &[f64],
    target: &StateVector,
    backend: &mut dyn QuantumBackend,
    plan: &TomographyPlan,
    mitigate: bool,
) -> Result<DeviceEvaluation> {
    let estimate = run_tomography(backend, circuit, params, plan, mitigate)?;
    evaluate_state(target, &estimate)
}

/// Metrics of the exact device output state. Evaluation only.
pub fn evaluate_exact(circuit: &Circuit, params: &[f64], target: &StateVector, noise: &NoiseModel) -> Result<DeviceEvaluation> {
    let rho = true_output_state(circuit, params, noise)?;
    evaluate_state(target, &rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::EmulatedDevice;
    use crate::prep::{build_ansatz, gen_target, AnsatzSpec, Entangler, TargetKind};
    use crate::sim;
    use crate::tomo::{build_plan, PlanMode};

    #[test]
    fn ideal_device_at_prepared_state() {
        let c = build_ansatz(&AnsatzSpec::path(4, 12, Entangler::Cnot).unwrap()).unwrap();
        let params: Vec<f64> = (0..c.n_params()).map(|i| (i as f64 * 0.37).sin()).collect();
        let target = sim::forward(&c, &params).unwrap().state().clone();
        let mut dev = EmulatedDevice::new(NoiseModel::ideal(5)).unwrap();
        let plan = build_plan(4, PlanMode::Full, 1024).unwrap();
        let e = evaluate_on_device(&c, &params, &target, &mut dev, &plan, true).unwrap();
        assert!(e.fidelity >= 0.98, "{e:?}");
    }

    #[test]
    fn depolarizing_strength_tracks_accumulated_noise() {
        // one layer of single-qubit gates followed by CNOTs
        let c = build_ansatz(&AnsatzSpec::path(3, 4, Entangler::Cnot).unwrap()).unwrap();
        let params: Vec<f64> = (0..c.n_params()).map(|i| 0.3 + 0.1 * i as f64).collect();
        let target = sim::forward(&c, &params).unwrap().state().clone();
        let noise = NoiseModel::depolarizing_only(0.0, 0.01, 0);
        let e = evaluate_exact(&c, &params, &target, &noise).unwrap();
        let accumulated = 1.0 - 0.99f64.powi(4);
        assert!((e.incoherent_strength - accumulated).abs() < 0.2 * accumulated, "{e:?} vs {accumulated}");
    }

    #[test]
    fn coherent_noise_before_finetuning() {
        let c = build_ansatz(&AnsatzSpec::path(4, 12, Entangler::Cnot).unwrap()).unwrap();
        let target = gen_target(&TargetKind::Haar, 4, 0).unwrap();
        let cfg = crate::train::TrainConfig { seed: 0, ..Default::default() };
        let report = crate::train::train_noise_free(&c, &target, &cfg).unwrap();
        let e = evaluate_exact(&c, &report.final_params, &target, &NoiseModel::coherent_only(0.03, 0)).unwrap();
        // a uniform 3% over-rotation of parameterized gates is the same as scaling θ by 1.03
        let scaled: Vec<f64> = report.final_params.iter().map(|p| p * 1.03).collect();
        let oracle = 1.0 - crate::qcore::fidelity(sim::forward(&c, &scaled).unwrap().state(), &target).unwrap();
        assert!((e.coherent_error - oracle).abs() < 1e-10, "{e:?} vs {oracle}");
        assert!(e.coherent_error > 1e-3 && e.incoherent_strength < 1e-9);
    }
}

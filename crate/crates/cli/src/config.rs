//! The experiment config file: one JSON document with a schema version.

use std::path::PathBuf;

use robustprep::device::NoiseModel;
use robustprep::experiments::{AdComparisonConfig, GradCheckConfig, OptimizerComparisonConfig, TomoCheckConfig};
use robustprep::prep::{AnsatzSpec, Entangler, TargetKind};
use robustprep::qcore::{CMatrix, Complex64};
use robustprep::train::{RegressionTask, TrainConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Prepare,
    Finetune,
    CompareOptimizers,
    CompareAd,
    GradCheck,
    TomoCheck,
    Synth,
    Regress,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Prepare => "prepare",
            ExperimentKind::Finetune => "finetune",
            ExperimentKind::CompareOptimizers => "compare_optimizers",
            ExperimentKind::CompareAd => "compare_ad",
            ExperimentKind::GradCheck => "grad_check",
            ExperimentKind::TomoCheck => "tomo_check",
            ExperimentKind::Synth => "synth",
            ExperimentKind::Regress => "regress",
        }
    }
}

/// Target unitary for `synth`: a named gate or a 4×4 matrix of `[re, im]` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitarySpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl Default for UnitarySpec {
    fn default() -> Self {
        UnitarySpec::Named("cnot".into())
    }
}

impl UnitarySpec {
    pub fn matrix(&self) -> Result<CMatrix, String> {
        let c = |re: f64| Complex64::new(re, 0.0);
        match self {
            UnitarySpec::Named(name) => {
                // little-endian basis: index = q0 + 2·q1
                let perm: [usize; 4] = match name.as_str() {
                    "identity" => [0, 1, 2, 3],
                    "cnot" => [0, 3, 2, 1],
                    "swap" => [0, 2, 1, 3],
                    "cz" => {
                        let mut m = CMatrix::identity(4, 4);
                        m[(3, 3)] = c(-1.0);
                        return Ok(m);
                    }
                    other => return Err(format!("unknown unitary {other:?}; expected identity, cnot, swap, cz or a matrix")),
                };
                let mut m = CMatrix::zeros(4, 4);
                for (from, &to) in perm.iter().enumerate() {
                    m[(to, from)] = c(1.0);
                }
                Ok(m)
            }
            UnitarySpec::Matrix(rows) => {
                if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
                    return Err("unitary matrix must be 4×4".into());
                }
                Ok(CMatrix::from_fn(4, 4, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
            }
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    /// Root seed; every sub-seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions, each with its own derived root seed.
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub target: Option<TargetKind>,
    #[serde(default)]
    pub n_qubits: Option<usize>,
    /// Shorthand for a CNOT path ansatz when `ansatz` is absent.
    #[serde(default)]
    pub n_blocks: Option<usize>,
    #[serde(default)]
    pub ansatz: Option<AnsatzSpec>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    /// Starting point for `finetune`; trained noise-free when absent.
    #[serde(default)]
    pub initial_params: Option<Vec<f64>>,
    #[serde(default)]
    pub grad_check: Option<GradCheckConfig>,
    #[serde(default)]
    pub tomo_check: Option<TomoCheckConfig>,
    #[serde(default)]
    pub compare_optimizers: Option<OptimizerComparisonConfig>,
    #[serde(default)]
    pub compare_ad: Option<AdComparisonConfig>,
    #[serde(default)]
    pub unitary: Option<UnitarySpec>,
    #[serde(default)]
    pub regression_task: Option<RegressionTask>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed: 0,
            repeats: 1,
            output_dir: None,
            target: None,
            n_qubits: None,
            n_blocks: None,
            ansatz: None,
            noise: None,
            train: None,
            initial_params: None,
            grad_check: None,
            tomo_check: None,
            compare_optimizers: None,
            compare_ad: None,
            unitary: None,
            regression_task: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version));
        }
        if cfg.repeats == 0 {
            return Err("repeats must be at least 1".into());
        }
        Ok(cfg)
    }

    /// The ansatz from `ansatz`, or a CNOT path from `n_qubits` and `n_blocks`.
    pub fn ansatz_spec(&self) -> Result<AnsatzSpec, String> {
        if let Some(spec) = &self.ansatz {
            if let Some(n) = self.n_qubits {
                if n != spec.n_qubits() {
                    return Err(format!("n_qubits {n} does not match the {}-qubit coupling map", spec.n_qubits()));
                }
            }
            return Ok(spec.clone());
        }
        let n = self.n_qubits.ok_or("config needs n_qubits or an ansatz")?;
        let blocks = self.n_blocks.ok_or("config needs n_blocks or an ansatz")?;
        AnsatzSpec::path(n, blocks, Entangler::Cnot).map_err(|e| e.to_string())
    }
}

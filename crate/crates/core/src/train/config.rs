use serde::{Deserialize, Serialize};

use super::{LossKind, OptimizerKind};
use crate::tomo::{build_plan, PlanMode, TomographyPlan};
use crate::util::derive_seed;
use crate::{Error, Result};

/// Tomography used by each noise-aware step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TomographyMode {
    Full,
    /// `k` settings redrawn every step.
    Sampled { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    #[serde(flatten)]
    pub mode: TomographyMode,
    pub shots: u64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self { mode: TomographyMode::Full, shots: 1024 }
    }
}

impl TomographyConfig {
    /// Plan for one round; sampled plans draw from `(seed, round)`.
    pub fn plan(&self, n_qubits: usize, seed: u64, round: u64) -> Result<TomographyPlan> {
        let mode = match self.mode {
            TomographyMode::Full => PlanMode::Full,
            TomographyMode::Sampled { k } => PlanMode::Sampled { k, seed: derive_seed(seed, round) },
        };
        build_plan(n_qubits, mode, self.shots)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub noise_free_steps: usize,
    pub noise_aware_steps: usize,
    pub optimizer: OptimizerKind,
    pub tomography: TomographyConfig,
    /// Invert the backend's readout calibration before building snapshots.
    pub mitigate_readout: bool,
    pub loss: LossKind,
    /// Initial parameters are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 5e-3,
            noise_free_steps: 500,
            noise_aware_steps: 50,
            optimizer: OptimizerKind::default(),
            tomography: TomographyConfig::default(),
            mitigate_readout: true,
            loss: LossKind::Frobenius,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("init_scale must be non-negative, got {}", self.init_scale)));
        }
        if self.tomography.shots == 0 {
            return Err(Error::InvalidConfig("tomography shots must be at least 1".into()));
        }
        if let TomographyMode::Sampled { k: 0 } = self.tomography.mode {
            return Err(Error::InvalidConfig("sampled tomography needs k ≥ 1".into()));
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::InvalidConfig(format!("bad Adam settings {:?}", self.optimizer)));
            }
        }
        Ok(())
    }

    /// Noise-aware steps need a loss that is nonlinear in ρ.
    pub fn validate_noise_aware(&self) -> Result<()> {
        self.validate()?;
        if self.loss == LossKind::SquaredFrobenius {
            return Err(Error::InvalidConfig("squared_frobenius loss cannot drive noise-aware steps".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_json() {
        let cfg: TrainConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!((cfg.lr, cfg.noise_free_steps, cfg.noise_aware_steps), (5e-3, 500, 50));
        let cfg: TrainConfig =
            serde_json::from_str(r#"{"tomography": {"mode": "sampled", "k": 40, "shots": 2048}}"#).unwrap();
        assert_eq!(cfg.tomography, TomographyConfig { mode: TomographyMode::Sampled { k: 40 }, shots: 2048 });
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation() {
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { init_scale: -1.0, ..Default::default() }.validate().is_err());
        let sq = TrainConfig { loss: LossKind::SquaredFrobenius, ..Default::default() };
        assert!(sq.validate().is_ok());
        assert!(sq.validate_noise_aware().is_err());
    }

    #[test]
    fn sampled_plans_change_per_round() {
        let t = TomographyConfig { mode: TomographyMode::Sampled { k: 5 }, shots: 10 };
        let a = t.plan(3, 1, 0).unwrap();
        assert_eq!(a, t.plan(3, 1, 0).unwrap());
        assert_ne!(a.settings, t.plan(3, 1, 1).unwrap().settings);
    }
}

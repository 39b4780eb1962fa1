use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NoiseFree,
    NoiseAware,
}

/// One optimizer step. Device fields are filled only when the device was
/// measured for this step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: Phase,
    pub loss: f64,
    pub sim_fidelity: f64,
    pub dev_fidelity: Option<f64>,
    pub coherent_err: Option<f64>,
    pub incoherent_p: Option<f64>,
    pub cum_device_shots: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<StepRecord>,
    pub final_params: Vec<f64>,
}

/// Final metrics for the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub noise_free_steps: usize,
    pub noise_aware_steps: usize,
    pub final_loss: Option<f64>,
    pub final_sim_fidelity: Option<f64>,
    pub final_dev_fidelity: Option<f64>,
    pub total_device_shots: u64,
    pub final_params: Vec<f64>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&StepRecord> {
        self.records.last()
    }

    pub fn total_device_shots(&self) -> u64 {
        self.records.last().map_or(0, |r| r.cum_device_shots)
    }

    pub fn summary(&self) -> TrainSummary {
        let count = |phase| self.records.iter().filter(|r| r.phase == phase).count();
        TrainSummary {
            steps: self.records.len(),
            noise_free_steps: count(Phase::NoiseFree),
            noise_aware_steps: count(Phase::NoiseAware),
            final_loss: self.last().map(|r| r.loss),
            final_sim_fidelity: self.last().map(|r| r.sim_fidelity),
            final_dev_fidelity: self.records.iter().rev().find_map(|r| r.dev_fidelity),
            total_device_shots: self.total_device_shots(),
            final_params: self.final_params.clone(),
        }
    }

    /// Curve CSV: `step,phase,loss,sim_fidelity,dev_fidelity,coherent_err,incoherent_p,cum_device_shots`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r).map_err(|e| Error::Io(e.into()))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrainReport {
        TrainReport {
            records: vec![
                StepRecord {
                    step: 0,
                    phase: Phase::NoiseFree,
                    loss: 0.5,
                    sim_fidelity: 0.9,
                    dev_fidelity: None,
                    coherent_err: None,
                    incoherent_p: None,
                    cum_device_shots: 0,
                },
                StepRecord {
                    step: 1,
                    phase: Phase::NoiseAware,
                    loss: 0.25,
                    sim_fidelity: 0.95,
                    dev_fidelity: Some(0.875),
                    coherent_err: Some(0.01),
                    incoherent_p: Some(0.02),
                    cum_device_shots: 2048,
                },
            ],
            final_params: vec![0.1, 0.2],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,phase,loss,sim_fidelity,dev_fidelity,coherent_err,incoherent_p,cum_device_shots");
        assert_eq!(lines[1], "0,noise_free,0.5,0.9,,,,0");
        assert_eq!(lines[2], "1,noise_aware,0.25,0.95,0.875,0.01,0.02,2048");
    }

    #[test]
    fn summary_fields() {
        let s = sample().summary();
        assert_eq!((s.steps, s.noise_free_steps, s.noise_aware_steps), (2, 1, 1));
        assert_eq!(s.final_dev_fidelity, Some(0.875));
        assert_eq!(s.total_device_shots, 2048);
    }
}

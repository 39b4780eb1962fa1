//! Classical shadow tomography with readout-error mitigation.
//!
//! Each shot measured in setting `b` with outcome `s` yields the snapshot
//! `⊗_q (3·U_{b_q}†|s_q⟩⟨s_q|U_{b_q} − I)`, whose expectation over uniformly
//! random Pauli settings is the measured state. Estimates are count-weighted
//! means of snapshots, accumulated per setting without storing snapshots.

use std::io::{BufRead, Write};

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{apply_per_qubit, Basis, ConfusionMatrix, DeviceCounts, MeasurementSetting, QuantumBackend};
use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{Circuit, Complex64, HermitianEstimate, Mat2, C0, C1};
use crate::util::rng_for;
use crate::{Error, Result};

/// How a plan chooses its settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PlanMode {
    /// All `3^n` settings.
    Full,
    /// `k` distinct settings drawn uniformly without replacement.
    Sampled { k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyPlan {
    pub settings: Vec<MeasurementSetting>,
    pub shots_per_setting: u64,
    pub mode: PlanMode,
}

impl TomographyPlan {
    pub fn n_qubits(&self) -> usize {
        self.settings.first().map_or(0, MeasurementSetting::n_qubits)
    }

    pub fn total_shots(&self) -> u64 {
        self.settings.len() as u64 * self.shots_per_setting
    }
}

/// The `index`-th setting in lexicographic order (qubit 0 is the leading letter).
pub fn setting_at(n_qubits: usize, mut index: usize) -> MeasurementSetting {
    let mut bases = vec![Basis::X; n_qubits];
    for q in (0..n_qubits).rev() {
        bases[q] = Basis::ALL[index % 3];
        index /= 3;
    }
    MeasurementSetting(bases)
}

pub fn all_settings(n_qubits: usize) -> Vec<MeasurementSetting> {
    (0..3usize.pow(n_qubits as u32)).map(|i| setting_at(n_qubits, i)).collect()
}

pub fn build_plan(n_qubits: usize, mode: PlanMode, shots_per_setting: u64) -> Result<TomographyPlan> {
    if n_qubits == 0 {
        return Err(Error::InvalidPlan("n_qubits must be at least 1".into()));
    }
    if shots_per_setting == 0 {
        return Err(Error::InvalidPlan("shots_per_setting must be at least 1".into()));
    }
    let total = 3usize
        .checked_pow(n_qubits as u32)
        .ok_or_else(|| Error::InvalidPlan(format!("3^{n_qubits} settings overflow")))?;
    let settings = match mode {
        PlanMode::Full => all_settings(n_qubits),
        PlanMode::Sampled { k, seed } => {
            if k == 0 || k > total {
                return Err(Error::InvalidPlan(format!("sampled k = {k} outside [1, {total}]")));
            }
            let mut picks = index::sample(&mut rng_for(seed, 0), total, k).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| setting_at(n_qubits, i)).collect()
        }
    };
    Ok(TomographyPlan { settings, shots_per_setting, mode })
}

/// Single-shot snapshot in factored form; `factors[q]` acts on qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub factors: Vec<Mat2>,
}

impl Snapshot {
    /// Dense `2^n × 2^n` matrix.
    pub fn to_matrix(&self) -> CMatrix {
        self.factors.iter().fold(CMatrix::from_element(1, 1, C1), |acc, f| {
            CMatrix::from_fn(2, 2, |r, c| f[r][c]).kronecker(&acc)
        })
    }

    pub fn trace(&self) -> Complex64 {
        self.factors.iter().map(|f| f[0][0] + f[1][1]).product()
    }
}

/// `3·U_b†|s⟩⟨s|U_b − I` for one qubit.
fn snapshot_factor(basis: Basis, bit: usize) -> Mat2 {
    let u = basis.rotation();
    let mut f = [[C0; 2]; 2];
    for (r, row) in f.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = u.get(bit, r).conj() * u.get(bit, c) * 3.0;
            if r == c {
                *v -= C1;
            }
        }
    }
    f
}

/// Snapshot for one shot; `outcome` is a basis index (bit `q` = qubit `q`).
pub fn snapshot_from_outcome(setting: &MeasurementSetting, outcome: usize) -> Result<Snapshot> {
    let n = setting.n_qubits();
    if outcome >> n != 0 {
        return Err(Error::InvalidSetting(format!("outcome {outcome} does not fit {n} qubits")));
    }
    Ok(Snapshot { factors: setting.bases().iter().enumerate().map(|(q, &b)| snapshot_factor(b, outcome >> q & 1)).collect() })
}

/// Snapshot for a qubit-0-first bitstring outcome.
pub fn snapshot_from_bitstring(setting: &MeasurementSetting, outcome: &str) -> Result<Snapshot> {
    if outcome.len() != setting.n_qubits() {
        return Err(Error::InvalidSetting(format!("outcome {outcome:?} does not match setting {setting}")));
    }
    snapshot_from_outcome(setting, crate::device::parse_bitstring(outcome)?)
}

/// `Σ_s p(s)·snapshot(setting, s)` via a per-qubit contraction.
///
/// Qubit digits are widened one at a time from an outcome bit to a
/// `(row, col)` pair, so the cost is `O(4^n)` instead of `O(8^n)`.
fn setting_mean(setting: &MeasurementSetting, probs: &[f64]) -> CMatrix {
    let n = setting.n_qubits();
    let mut t: Vec<Complex64> = probs.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    for (q, &basis) in setting.bases().iter().enumerate() {
        let f = [snapshot_factor(basis, 0), snapshot_factor(basis, 1)];
        let low_n = 1usize << (2 * q);
        let high_n = 1usize << (n - q - 1);
        let mut next = vec![C0; low_n * 4 * high_n];
        for high in 0..high_n {
            for low in 0..low_n {
                let a0 = t[low + low_n * (2 * high)];
                let a1 = t[low + low_n * (1 + 2 * high)];
                for d in 0..4 {
                    let (r, c) = (d >> 1, d & 1);
                    next[low + low_n * (d + 4 * high)] = a0 * f[0][r][c] + a1 * f[1][r][c];
                }
            }
        }
        t = next;
    }
    let dim = 1usize << n;
    CMatrix::from_fn(dim, dim, |r, c| {
        let idx: usize = (0..n).map(|q| ((r >> q & 1) * 2 + (c >> q & 1)) << (2 * q)).sum();
        t[idx]
    })
}

fn inverse_maps(confusions: &[ConfusionMatrix], n: usize) -> Result<Vec<[[f64; 2]; 2]>> {
    (0..n)
        .map(|q| {
            let a = confusions.get(q).copied().unwrap_or(ConfusionMatrix::IDEAL);
            let det = a.det();
            if det.abs() < 1e-6 {
                return Err(Error::SingularConfusion { qubit: q, det });
            }
            Ok(a.inverse().expect("non-singular"))
        })
        .collect()
}

/// Applies `⊗A_q⁻¹`, clips negatives and renormalizes.
pub fn mitigate_distribution(probs: &[f64], confusions: &[ConfusionMatrix]) -> Result<Vec<f64>> {
    let n = probs.len().trailing_zeros() as usize;
    let maps = inverse_maps(confusions, n)?;
    mitigate_with(probs, &maps)
}

fn mitigate_with(probs: &[f64], maps: &[[[f64; 2]; 2]]) -> Result<Vec<f64>> {
    let mut p = probs.to_vec();
    apply_per_qubit(&mut p, maps);
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("mitigated distribution has no mass".into()));
    }
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// One setting's outcome distribution with its weight in the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDistribution {
    pub setting: MeasurementSetting,
    pub weight: f64,
    pub probs: Vec<f64>,
}

/// Shadow estimate from per-setting distributions. Weights are normalized.
pub fn estimate_from_distributions(
    items: &[WeightedDistribution],
    mitigation: Option<&[ConfusionMatrix]>,
) -> Result<HermitianEstimate> {
    let first = items.first().ok_or(Error::EmptyCounts)?;
    let n = first.setting.n_qubits();
    for item in items {
        if item.setting.n_qubits() != n || item.probs.len() != 1 << n {
            return Err(Error::InvalidSetting(format!("setting {} does not match {n} qubits", item.setting)));
        }
        if !(item.weight >= 0.0) {
            return Err(Error::InvalidSetting(format!("negative weight for {}", item.setting)));
        }
    }
    let total: f64 = items.iter().map(|i| i.weight).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyCounts);
    }
    let maps = mitigation.map(|c| inverse_maps(c, n)).transpose()?;
    let parts = items
        .par_iter()
        .map(|item| {
            let probs = match &maps {
                Some(m) => mitigate_with(&item.probs, m)?,
                None => item.probs.clone(),
            };
            Ok(setting_mean(&item.setting, &probs) * Complex64::new(item.weight / total, 0.0))
        })
        .collect::<Result<Vec<CMatrix>>>()?;
    let dim = 1usize << n;
    let mut rho = parts.into_iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    linalg::hermitize(&mut rho);
    let tr = rho.trace().re;
    rho /= Complex64::new(tr, 0.0);
    HermitianEstimate::new(n, rho)
}

/// Shadow estimate from device counts, weighted by shots.
pub fn estimate_state(counts: &[DeviceCounts], mitigation: Option<&[ConfusionMatrix]>) -> Result<HermitianEstimate> {
    if counts.is_empty() || counts.iter().all(|c| c.shots == 0) {
        return Err(Error::EmptyCounts);
    }
    for c in counts {
        if c.histogram.values().sum::<u64>() != c.shots {
            return Err(Error::InvalidSetting(format!("histogram for {} does not sum to shots", c.setting)));
        }
    }
    let items: Vec<WeightedDistribution> = counts
        .iter()
        .filter(|c| c.shots > 0)
        .map(|c| WeightedDistribution { setting: c.setting.clone(), weight: c.shots as f64, probs: c.distribution() })
        .collect();
    estimate_from_distributions(&items, mitigation)
}

/// Executes `plan` on `backend` and returns the (optionally mitigated) estimate.
pub fn run_tomography(
    backend: &mut dyn QuantumBackend,
    circuit: &Circuit,
    params: &[f64],
    plan: &TomographyPlan,
    mitigate: bool,
) -> Result<HermitianEstimate> {
    if plan.n_qubits() != circuit.n_qubits() {
        return Err(Error::InvalidPlan(format!(
            "plan is for {} qubits, circuit has {}",
            plan.n_qubits(),
            circuit.n_qubits()
        )));
    }
    let counts = backend.execute(circuit, params, &plan.settings, plan.shots_per_setting)?;
    let calibration = mitigate.then(|| backend.readout_calibration(circuit.n_qubits()));
    estimate_state(&counts, calibration.as_deref())
}

/// Writes a matrix row-major, one row per line, entries as `re,im` separated by spaces.
pub fn write_matrix_dump(mut w: impl Write, m: &CMatrix) -> std::io::Result<()> {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{},{}", m[(r, c)].re, m[(r, c)].im)).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix_dump(r: impl BufRead) -> Result<CMatrix> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                let (re, im) = tok.split_once(',').ok_or_else(|| Error::Parse(format!("bad entry {tok:?}")))?;
                let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
                Ok(Complex64::new(parse(re)?, parse(im)?))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let dim = rows.len();
    if dim == 0 || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Parse("matrix dump is not square".into()));
    }
    Ok(CMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

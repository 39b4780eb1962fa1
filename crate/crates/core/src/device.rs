//! Emulated noisy quantum machine.
//!
//! The device is a density-matrix simulator with three noise sources: an affine
//! distortion of every bound rotation angle (coherent), a depolarizing channel
//! after every gate (incoherent), and per-qubit readout confusion. Callers only
//! ever see measurement counts through [`QuantumBackend::execute`];
//! [`true_output_state`] exists for evaluation and tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::qcore::linalg::CMatrix;
use crate::qcore::{
    gate_unitary, pauli_matrix, rotation, Circuit, CircuitOp, Complex64, DensityMatrix, GateKind,
    GateMatrix, C1,
};
use crate::sim::kernel;
use crate::util::rng_for;
use crate::{Error, Result};

/// Single-qubit measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    /// Gates applied (in order) before a computational-basis readout.
    /// Tomography inverts exactly these rotations.
    pub fn rotation_gates(self) -> &'static [GateKind] {
        match self {
            Basis::X => &[GateKind::H],
            Basis::Y => &[GateKind::SDG, GateKind::H],
            Basis::Z => &[],
        }
    }

    /// The combined pre-measurement rotation `U_b`.
    pub fn rotation(self) -> GateMatrix {
        self.rotation_gates().iter().fold(GateMatrix::identity(2), |acc, &k| {
            gate_unitary(k, None).expect("fixed gate").matmul(&acc)
        })
    }

    pub fn letter(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }
}

/// Per-qubit measurement bases; character `q` of the text form is qubit `q`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MeasurementSetting(pub Vec<Basis>);

impl MeasurementSetting {
    pub fn all_z(n_qubits: usize) -> Self {
        Self(vec![Basis::Z; n_qubits])
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.0
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{}", b.letter())?;
        }
        Ok(())
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                'X' => Ok(Basis::X),
                'Y' => Ok(Basis::Y),
                'Z' => Ok(Basis::Z),
                _ => Err(Error::InvalidSetting(format!("bad basis letter {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(MeasurementSetting)
    }
}

impl TryFrom<String> for MeasurementSetting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MeasurementSetting> for String {
    fn from(s: MeasurementSetting) -> String {
        s.to_string()
    }
}

/// Formats a basis index as a bitstring with qubit 0 first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits).map(|q| if index >> q & 1 == 1 { '1' } else { '0' }).collect()
}

/// Parses a qubit-0-first bitstring into a basis index.
pub fn parse_bitstring(s: &str) -> Result<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (q, c)| match c {
        '0' => Ok(acc),
        '1' => Ok(acc | 1 << q),
        _ => Err(Error::Parse(format!("bad bitstring {s:?}"))),
    })
}

/// Measurement histogram for one setting. Keys are basis indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceCounts {
    pub setting: MeasurementSetting,
    pub shots: u64,
    pub histogram: BTreeMap<usize, u64>,
}

impl DeviceCounts {
    pub fn n_qubits(&self) -> usize {
        self.setting.n_qubits()
    }

    /// Histogram keyed by bitstrings (qubit 0 first).
    pub fn bitstring_counts(&self) -> BTreeMap<String, u64> {
        let n = self.n_qubits();
        self.histogram.iter().map(|(&k, &v)| (bitstring(k, n), v)).collect()
    }

    /// Empirical outcome distribution over all `2^n` indices.
    pub fn distribution(&self) -> Vec<f64> {
        let mut p = vec![0.0; 1 << self.n_qubits()];
        for (&k, &v) in &self.histogram {
            p[k] = v as f64 / self.shots as f64;
        }
        p
    }
}

/// Affine angle distortion `θ → θ·(1 + scale) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Distortion {
    #[serde(default)]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

impl Distortion {
    pub fn apply(&self, angle: f64) -> f64 {
        angle * (1.0 + self.scale) + self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionOverride {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(flatten)]
    pub distortion: Distortion,
}

/// Coherent noise: per-kind distortions plus per-(kind, qubits) overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoherentNoise {
    #[serde(default)]
    pub per_kind: BTreeMap<GateKind, Distortion>,
    #[serde(default)]
    pub overrides: Vec<DistortionOverride>,
}

impl CoherentNoise {
    /// The same multiplicative distortion on every parameterized kind.
    pub fn uniform(scale: f64) -> Self {
        let per_kind =
            GateKind::PARAMETERIZED.iter().map(|&k| (k, Distortion { scale, offset: 0.0 })).collect();
        Self { per_kind, overrides: Vec::new() }
    }

    /// Distortion configured for an op, if any.
    pub fn lookup(&self, kind: GateKind, qubits: &[usize]) -> Option<Distortion> {
        self.overrides
            .iter()
            .find(|o| o.kind == kind && o.qubits == qubits)
            .map(|o| o.distortion)
            .or_else(|| self.per_kind.get(&kind).copied())
    }
}

/// Readout confusion matrix, `m[i][j] = P(read i | true j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[f64; 2]; 2]);

impl ConfusionMatrix {
    pub const IDEAL: ConfusionMatrix = ConfusionMatrix([[1.0, 0.0], [0.0, 1.0]]);

    /// Symmetric bit-flip with probability `flip`.
    pub fn symmetric(flip: f64) -> Self {
        Self([[1.0 - flip, flip], [flip, 1.0 - flip]])
    }

    /// `p01 = P(read 1 | true 0)`, `p10 = P(read 0 | true 1)`.
    pub fn asymmetric(p01: f64, p10: f64) -> Self {
        Self([[1.0 - p01, p10], [p01, 1.0 - p10]])
    }

    pub fn det(&self) -> f64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(&self) -> Option<[[f64; 2]; 2]> {
        let d = self.det();
        if d.abs() < 1e-12 {
            return None;
        }
        let m = self.0;
        Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.0;
        for j in 0..2 {
            if !(0..2).all(|i| (0.0..=1.0).contains(&m[i][j])) {
                return Err(Error::InvalidNoise(format!("confusion entries out of [0,1]: {m:?}")));
            }
            if (m[0][j] + m[1][j] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidNoise(format!("confusion column {j} does not sum to 1: {m:?}")));
            }
        }
        Ok(())
    }
}

/// Full device noise description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub coherent: CoherentNoise,
    /// Depolarizing strength after single-qubit gates.
    #[serde(default)]
    pub p1: f64,
    /// Depolarizing strength after two-qubit gates.
    #[serde(default)]
    pub p2: f64,
    /// Per-qubit readout confusion; qubits beyond the list read out ideally.
    #[serde(default)]
    pub readout: Vec<ConfusionMatrix>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::ideal(0)
    }
}

impl NoiseModel {
    pub fn ideal(seed: u64) -> Self {
        Self { coherent: CoherentNoise::default(), p1: 0.0, p2: 0.0, readout: Vec::new(), seed }
    }

    /// The reference noisy machine used by the comparison experiments:
    /// 3% over-rotation on every parameterized gate, 0.2%/1% depolarizing,
    /// 2% symmetric readout flips.
    pub fn standard(n_qubits: usize, seed: u64) -> Self {
        Self {
            coherent: CoherentNoise::uniform(0.03),
            p1: 0.002,
            p2: 0.01,
            readout: vec![ConfusionMatrix::symmetric(0.02); n_qubits],
            seed,
        }
    }

    pub fn coherent_only(scale: f64, seed: u64) -> Self {
        Self { coherent: CoherentNoise::uniform(scale), ..Self::ideal(seed) }
    }

    pub fn depolarizing_only(p1: f64, p2: f64, seed: u64) -> Self {
        Self { p1, p2, ..Self::ideal(seed) }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn confusion(&self, qubit: usize) -> ConfusionMatrix {
        self.readout.get(qubit).copied().unwrap_or(ConfusionMatrix::IDEAL)
    }

    pub fn confusions(&self, n_qubits: usize) -> Vec<ConfusionMatrix> {
        (0..n_qubits).map(|q| self.confusion(q)).collect()
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout.iter().any(|c| *c != ConfusionMatrix::IDEAL)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} = {p} outside [0, 1)")));
            }
        }
        let all = self.coherent.per_kind.values().chain(self.coherent.overrides.iter().map(|o| &o.distortion));
        for d in all {
            if !(d.scale.abs() < 0.5) || !d.offset.is_finite() {
                return Err(Error::InvalidNoise(format!("distortion {d:?} out of range (|scale| < 0.5)")));
            }
        }
        for o in &self.coherent.overrides {
            if o.qubits.len() != o.kind.arity() {
                return Err(Error::InvalidNoise(format!("override for {} lists {:?}", o.kind, o.qubits)));
            }
        }
        self.readout.iter().try_for_each(ConfusionMatrix::validate)
    }
}

/// Unitary actually applied by the device for `op`.
///
/// Parameterized gates have their angle distorted. A fixed gate is only
/// distorted when a distortion is configured for it, by scaling its equivalent
/// rotation angle (X = RX(π), SX = RX(π/2), SDG = RZ(-π/2), H = π about
/// (X+Z)/√2, CNOT = exp(-iπ·|1⟩⟨1|⊗|−⟩⟨−|)), global phases dropped.
fn device_unitary(op: &CircuitOp, params: &[f64], noise: &NoiseModel) -> GateMatrix {
    let distortion = noise.coherent.lookup(op.kind, &op.qubits);
    if let Some(angle) = op.angle(params) {
        let angle = distortion.map_or(angle, |d| d.apply(angle));
        return gate_unitary(op.kind, Some(angle)).expect("parameterized gate");
    }
    let Some(d) = distortion else {
        return gate_unitary(op.kind, None).expect("fixed gate");
    };
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
    let x = GateMatrix::One(pauli_matrix('X').unwrap());
    let z = GateMatrix::One(pauli_matrix('Z').unwrap());
    match op.kind {
        GateKind::X => rotation(&x, d.apply(PI)),
        GateKind::SX => rotation(&x, d.apply(FRAC_PI_2)),
        GateKind::SDG => rotation(&z, d.apply(-FRAC_PI_2)),
        GateKind::H => {
            let axis = GateMatrix::One([[C1 * FRAC_1_SQRT_2, C1 * FRAC_1_SQRT_2], [C1 * FRAC_1_SQRT_2, -C1 * FRAC_1_SQRT_2]]);
            rotation(&axis, d.apply(PI))
        }
        GateKind::CNOT => {
            // projector G = |1⟩⟨1| ⊗ |−⟩⟨−|, exp(-iφG) = I + (e^{-iφ} - 1)G
            let phi = d.apply(PI);
            let f = Complex64::from_polar(1.0, -phi) - C1;
            let mut m = GateMatrix::identity(4);
            if let GateMatrix::Two(m) = &mut m {
                m[2][2] += f * 0.5;
                m[2][3] -= f * 0.5;
                m[3][2] -= f * 0.5;
                m[3][3] += f * 0.5;
            }
            m
        }
        _ => unreachable!("parameterized kinds handled above"),
    }
}

/// Applies `U ρ U†` on a column-major density matrix of `n` qubits.
///
/// Viewed as a `2n`-qubit vector, row bits are the low `n` bits and column
/// bits the high `n` bits, so the conjugation is `U` on the row qubits and
/// `conj(U)` on the column qubits.
pub(crate) fn conjugate(rho: &mut CMatrix, n: usize, qubits: &[usize], u: &GateMatrix) {
    let data = rho.as_mut_slice();
    kernel::apply(data, qubits, u);
    let shifted: Vec<usize> = qubits.iter().map(|q| q + n).collect();
    kernel::apply(data, &shifted, &u.conj());
}

/// `ρ → (1-p)ρ + p·(tr_Q ρ) ⊗ I_Q/d_Q` on the qubit set `Q`.
pub(crate) fn depolarize(rho: &mut CMatrix, n: usize, qubits: &[usize], p: f64) {
    if p == 0.0 {
        return;
    }
    let dim = 1usize << n;
    let mask: usize = qubits.iter().map(|q| 1usize << q).sum();
    let d_q = 1usize << qubits.len();
    let subsets: Vec<usize> = (0..d_q)
        .map(|s| qubits.iter().enumerate().filter(|(j, _)| s >> j & 1 == 1).map(|(_, q)| 1usize << q).sum())
        .collect();
    let old = rho.clone();
    for c in 0..dim {
        for r in 0..dim {
            let mut v = old[(r, c)] * (1.0 - p);
            if r & mask == c & mask {
                let (rb, cb) = (r & !mask, c & !mask);
                let traced: Complex64 = subsets.iter().map(|&s| old[(rb | s, cb | s)]).sum();
                v += traced * (p / d_q as f64);
            }
            rho[(r, c)] = v;
        }
    }
}

/// Exact pre-measurement state: distorted gates, each followed by depolarizing.
pub fn true_output_state(circuit: &Circuit, params: &[f64], noise: &NoiseModel) -> Result<DensityMatrix> {
    circuit.check_params(params)?;
    check_cap(circuit)?;
    noise.validate()?;
    Ok(DensityMatrix::from_raw(circuit.n_qubits(), evolve(circuit, params, noise)))
}

/// Largest register the density-matrix emulator accepts.
pub const DEVICE_QUBIT_CAP: usize = 10;

fn check_cap(circuit: &Circuit) -> Result<()> {
    if circuit.n_qubits() > DEVICE_QUBIT_CAP {
        return Err(Error::QubitCap { n_qubits: circuit.n_qubits(), cap: DEVICE_QUBIT_CAP });
    }
    Ok(())
}

fn evolve(circuit: &Circuit, params: &[f64], noise: &NoiseModel) -> CMatrix {
    let n = circuit.n_qubits();
    let dim = 1usize << n;
    let mut rho = CMatrix::zeros(dim, dim);
    rho[(0, 0)] = C1;
    for op in circuit.ops() {
        conjugate(&mut rho, n, &op.qubits, &device_unitary(op, params, noise));
        let p = if op.qubits.len() == 1 { noise.p1 } else { noise.p2 };
        depolarize(&mut rho, n, &op.qubits, p);
    }
    rho
}

/// Applies `⊗_q A_q` (or any per-qubit 2×2 real maps) to a distribution vector.
pub(crate) fn apply_per_qubit(probs: &mut [f64], maps: &[[[f64; 2]; 2]]) {
    for (q, m) in maps.iter().enumerate() {
        let stride = 1usize << q;
        for base in (0..probs.len()).step_by(stride << 1) {
            for i0 in base..base + stride {
                let i1 = i0 + stride;
                let (a, b) = (probs[i0], probs[i1]);
                probs[i0] = m[0][0] * a + m[0][1] * b;
                probs[i1] = m[1][0] * a + m[1][1] * b;
            }
        }
    }
}

/// Exact outcome distribution of measuring `rho` in `setting` with readout confusion.
pub fn outcome_distribution(rho: &DensityMatrix, setting: &MeasurementSetting, readout: &[ConfusionMatrix]) -> Result<Vec<f64>> {
    let n = rho.n_qubits();
    if setting.n_qubits() != n {
        return Err(Error::InvalidSetting(format!("setting {setting} has wrong length for {n} qubits")));
    }
    let mut m = rho.matrix().clone();
    Ok(distribution_from(&mut m, n, setting, readout))
}

fn distribution_from(rho: &mut CMatrix, n: usize, setting: &MeasurementSetting, readout: &[ConfusionMatrix]) -> Vec<f64> {
    for (q, basis) in setting.bases().iter().enumerate() {
        for &kind in basis.rotation_gates() {
            conjugate(rho, n, &[q], &gate_unitary(kind, None).expect("fixed gate"));
        }
    }
    let mut probs: Vec<f64> = (0..1usize << n).map(|i| rho[(i, i)].re.max(0.0)).collect();
    let maps: Vec<[[f64; 2]; 2]> = (0..n).map(|q| readout.get(q).copied().unwrap_or(ConfusionMatrix::IDEAL).0).collect();
    apply_per_qubit(&mut probs, &maps);
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Multinomial draw via sequential conditional binomials.
fn sample_counts(probs: &[f64], shots: u64, rng: &mut impl Rng) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    let mut remaining = shots;
    let mut mass = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let k = if i == probs.len() - 1 || mass <= p {
            remaining
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        if k > 0 {
            hist.insert(i, k);
        }
        remaining -= k;
        mass -= p;
    }
    hist
}

/// Runs `circuit` on the emulated machine and returns counts per setting.
///
/// Deterministic for fixed inputs including `noise.seed`; setting `i` draws
/// from its own stream derived from `(seed, i)`.
pub fn execute(
    circuit: &Circuit,
    params: &[f64],
    settings: &[MeasurementSetting],
    shots_per_setting: u64,
    noise: &NoiseModel,
) -> Result<Vec<DeviceCounts>> {
    circuit.check_params(params)?;
    check_cap(circuit)?;
    noise.validate()?;
    if shots_per_setting == 0 {
        return Err(Error::InvalidSetting("shots_per_setting must be at least 1".into()));
    }
    let n = circuit.n_qubits();
    if let Some(bad) = settings.iter().find(|s| s.n_qubits() != n) {
        return Err(Error::InvalidSetting(format!("setting {bad} has wrong length for {n} qubits")));
    }
    let rho = evolve(circuit, params, noise);
    let readout = noise.confusions(n);
    Ok(settings
        .par_iter()
        .enumerate()
        .map(|(i, setting)| {
            let mut m = rho.clone();
            let probs = distribution_from(&mut m, n, setting, &readout);
            let mut rng = rng_for(noise.seed, i as u64);
            DeviceCounts {
                setting: setting.clone(),
                shots: shots_per_setting,
                histogram: sample_counts(&probs, shots_per_setting, &mut rng),
            }
        })
        .collect())
}

/// Execution accounting for a backend.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceStats {
    /// Calls to `execute` (one per tomography or expectation batch).
    pub calls: u64,
    /// Circuit executions, one per measurement setting.
    pub circuit_executions: u64,
    pub shots: u64,
}

/// Black-box machine interface used by the trainers.
pub trait QuantumBackend {
    fn execute(
        &mut self,
        circuit: &Circuit,
        params: &[f64],
        settings: &[MeasurementSetting],
        shots_per_setting: u64,
    ) -> Result<Vec<DeviceCounts>>;

    /// Published readout calibration used for mitigation.
    fn readout_calibration(&self, n_qubits: usize) -> Vec<ConfusionMatrix>;

    fn stats(&self) -> DeviceStats;
}

/// [`QuantumBackend`] over the emulator. Each call draws from a fresh stream
/// derived from the model seed and the call index.
#[derive(Debug, Clone)]
pub struct EmulatedDevice {
    noise: NoiseModel,
    stats: DeviceStats,
}

impl EmulatedDevice {
    pub fn new(noise: NoiseModel) -> Result<Self> {
        noise.validate()?;
        Ok(Self { noise, stats: DeviceStats::default() })
    }

    /// Noise model, for evaluation code only.
    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
}

impl QuantumBackend for EmulatedDevice {
    fn execute(
        &mut self,
        circuit: &Circuit,
        params: &[f64],
        settings: &[MeasurementSetting],
        shots_per_setting: u64,
    ) -> Result<Vec<DeviceCounts>> {
        let call_noise = self.noise.with_seed(crate::util::derive_seed(self.noise.seed, self.stats.calls));
        let counts = execute(circuit, params, settings, shots_per_setting, &call_noise)?;
        self.stats.calls += 1;
        self.stats.circuit_executions += settings.len() as u64;
        self.stats.shots += settings.len() as u64 * shots_per_setting;
        Ok(counts)
    }

    fn readout_calibration(&self, n_qubits: usize) -> Vec<ConfusionMatrix> {
        self.noise.confusions(n_qubits)
    }

    fn stats(&self) -> DeviceStats {
        self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{fidelity, linalg, purity, random_circuit, StateVector, C0};
    use crate::sim;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rx_pi() -> Circuit {
        let mut c = Circuit::new(1);
        c.push_param(GateKind::RX, &[0]).unwrap();
        c
    }

    fn check_valid_density(m: &CMatrix) -> std::result::Result<(), String> {
        let herm = linalg::hermiticity_error(m);
        let tr = m.trace();
        let min = linalg::hermitian_eigenvalues(m).into_iter().fold(f64::INFINITY, f64::min);
        if herm > 1e-9 || (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 || min < -1e-9 {
            return Err(format!("herm {herm:e} trace {tr} min eig {min:e}"));
        }
        Ok(())
    }

    #[test]
    fn noiseless_empty_circuit_reads_zero() {
        let c = Circuit::new(3);
        let counts = execute(&c, &[], &[MeasurementSetting::all_z(3)], 500, &NoiseModel::ideal(1)).unwrap();
        assert_eq!(counts[0].histogram.get(&0), Some(&500));
        assert_eq!(counts[0].histogram.len(), 1);
    }

    #[test]
    fn readout_flip_rate_matches_binomial() {
        let c = Circuit::new(1);
        let noise = NoiseModel { readout: vec![ConfusionMatrix::symmetric(0.1)], ..NoiseModel::ideal(42) };
        let counts = execute(&c, &[], &[MeasurementSetting::all_z(1)], 10_000, &noise).unwrap();
        let frac = *counts[0].histogram.get(&1).unwrap_or(&0) as f64 / 1e4;
        let tol = 3.0 * (0.1f64 * 0.9 / 1e4).sqrt();
        assert!((frac - 0.1).abs() < tol, "{frac}");
    }

    #[test]
    fn over_rotation_changes_outcome_probability() {
        let noise = NoiseModel {
            coherent: CoherentNoise {
                per_kind: [(GateKind::RX, Distortion { scale: 0.05, offset: 0.0 })].into_iter().collect(),
                overrides: vec![],
            },
            ..NoiseModel::ideal(0)
        };
        let rho = true_output_state(&rx_pi(), &[PI], &noise).unwrap();
        let p = outcome_distribution(&rho, &MeasurementSetting::all_z(1), &[]).unwrap();
        let expected = (1.05 * PI / 2.0).sin().powi(2);
        assert!((p[1] - expected).abs() < 1e-12);
        assert!((expected - 0.99384).abs() < 1e-5);
    }

    #[test]
    fn noiseless_state_matches_simulator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let circ = random_circuit(3, 10, &mut rng);
        let params: Vec<f64> = (0..10).map(|i| 0.3 * i as f64 - 1.0).collect();
        let rho = true_output_state(&circ, &params, &NoiseModel::ideal(0)).unwrap();
        let psi = sim::forward(&circ, &params).unwrap().state().clone();
        let diff = (rho.matrix() - psi.to_density().matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }

    #[test]
    fn depolarizing_reduces_purity_and_fidelity() {
        let noise = NoiseModel::depolarizing_only(0.1, 0.0, 0);
        let rho = true_output_state(&rx_pi(), &[PI], &noise).unwrap();
        assert!(purity(&rho) < 1.0);
        let ideal = StateVector::new(1, vec![C0, Complex64::new(0.0, -1.0)]).unwrap();
        assert!((fidelity(&ideal, &rho).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn execution_is_deterministic_and_seed_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let circ = random_circuit(3, 6, &mut rng);
        let params = vec![0.4; 6];
        let settings: Vec<MeasurementSetting> = ["XYZ", "ZZZ", "YYX"].iter().map(|s| s.parse().unwrap()).collect();
        let noise = NoiseModel::standard(3, 9);
        let a = execute(&circ, &params, &settings, 333, &noise).unwrap();
        let b = execute(&circ, &params, &settings, 333, &noise).unwrap();
        assert_eq!(a, b);
        let c = execute(&circ, &params, &settings, 333, &noise.with_seed(10)).unwrap();
        assert_ne!(a, c);
        for counts in &a {
            assert_eq!(counts.histogram.values().sum::<u64>(), 333);
        }
    }

    #[test]
    fn execute_rejects_bad_inputs() {
        let c = rx_pi();
        let noise = NoiseModel::ideal(0);
        assert!(execute(&c, &[], &[MeasurementSetting::all_z(1)], 10, &noise).is_err());
        assert!(execute(&c, &[1.0], &[MeasurementSetting::all_z(2)], 10, &noise).is_err());
        assert!(execute(&c, &[1.0], &[MeasurementSetting::all_z(1)], 0, &noise).is_err());
        let bad = NoiseModel { p1: 1.0, ..NoiseModel::ideal(0) };
        assert!(execute(&c, &[1.0], &[MeasurementSetting::all_z(1)], 10, &bad).is_err());
        let bad = NoiseModel { readout: vec![ConfusionMatrix([[0.9, 0.2], [0.2, 0.8]])], ..NoiseModel::ideal(0) };
        assert!(bad.validate().is_err());
        assert!(NoiseModel::coherent_only(0.6, 0).validate().is_err());
    }

    #[test]
    fn noiseless_counts_pass_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let circ = random_circuit(3, 8, &mut rng);
        let params: Vec<f64> = (0..8).map(|i| 0.7 * i as f64).collect();
        let psi = sim::forward(&circ, &params).unwrap().state().clone();
        let setting: MeasurementSetting = "XYZ".parse().unwrap();
        let counts = execute(&circ, &params, std::slice::from_ref(&setting), 100_000, &NoiseModel::ideal(5)).unwrap();
        // expected from the statevector rotated into the setting's basis
        let mut rotated = psi.amplitudes().to_vec();
        for (q, b) in setting.bases().iter().enumerate() {
            kernel::apply(&mut rotated, &[q], &b.rotation());
        }
        let mut chi2 = 0.0;
        let mut bins = 0;
        for (i, a) in rotated.iter().enumerate() {
            let e = a.norm_sqr() * 1e5;
            if e < 5.0 {
                continue;
            }
            let o = *counts[0].histogram.get(&i).unwrap_or(&0) as f64;
            chi2 += (o - e).powi(2) / e;
            bins += 1;
        }
        // chi-square 0.999 quantile for up to 7 degrees of freedom
        let critical = [10.83, 13.82, 16.27, 18.47, 20.52, 22.46, 24.32];
        assert!(chi2 < critical[bins - 2], "chi2 {chi2} with {bins} bins");
    }

    #[test]
    fn fixed_gate_distortion_requires_configuration() {
        let mut c = Circuit::new(2);
        c.push_gate(GateKind::H, &[0]).unwrap();
        c.push_gate(GateKind::CNOT, &[0, 1]).unwrap();
        c.push_gate(GateKind::SX, &[1]).unwrap();
        c.push_gate(GateKind::SDG, &[0]).unwrap();
        c.push_gate(GateKind::X, &[1]).unwrap();
        let psi = sim::forward(&c, &[]).unwrap().state().clone();
        // uniform() touches only parameterized kinds
        let rho = true_output_state(&c, &[], &NoiseModel::coherent_only(0.1, 0)).unwrap();
        assert!((fidelity(&psi, &rho).unwrap() - 1.0).abs() < 1e-12);
        // a zero distortion reproduces each fixed gate up to phase
        let mut zero = CoherentNoise::default();
        for k in [GateKind::H, GateKind::CNOT, GateKind::SX, GateKind::SDG, GateKind::X] {
            zero.per_kind.insert(k, Distortion::default());
        }
        let rho = true_output_state(&c, &[], &NoiseModel { coherent: zero.clone(), ..NoiseModel::ideal(0) }).unwrap();
        assert!((fidelity(&psi, &rho).unwrap() - 1.0).abs() < 1e-12);
        // and a non-zero one moves the state
        zero.overrides.push(DistortionOverride {
            kind: GateKind::CNOT,
            qubits: vec![0, 1],
            distortion: Distortion { scale: 0.1, offset: 0.0 },
        });
        let rho = true_output_state(&c, &[], &NoiseModel { coherent: zero, ..NoiseModel::ideal(0) }).unwrap();
        assert!(fidelity(&psi, &rho).unwrap() < 0.999);
    }

    #[test]
    fn emulated_device_counts_calls() {
        let mut dev = EmulatedDevice::new(NoiseModel::standard(1, 3)).unwrap();
        let settings: Vec<MeasurementSetting> = ["X", "Y", "Z"].iter().map(|s| s.parse().unwrap()).collect();
        let a = dev.execute(&rx_pi(), &[1.0], &settings, 100).unwrap();
        let b = dev.execute(&rx_pi(), &[1.0], &settings, 100).unwrap();
        assert_ne!(a, b, "successive calls use fresh streams");
        assert_eq!(dev.stats(), DeviceStats { calls: 2, circuit_executions: 6, shots: 600 });
    }

    #[test]
    fn settings_and_bitstrings_round_trip() {
        let s: MeasurementSetting = "XZY".parse().unwrap();
        assert_eq!(s.to_string(), "XZY");
        assert!("XQ".parse::<MeasurementSetting>().is_err());
        assert_eq!(bitstring(0b110, 3), "011");
        assert_eq!(parse_bitstring("011").unwrap(), 0b110);
    }

    #[test]
    fn noise_model_json_round_trip() {
        let noise = NoiseModel::standard(2, 77);
        let json = serde_json::to_string(&noise).unwrap();
        let back: NoiseModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, noise);
        let minimal: NoiseModel = serde_json::from_str(r#"{"p2": 0.01}"#).unwrap();
        assert_eq!(minimal.p2, 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn evolution_stays_a_valid_density_matrix(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let circ = random_circuit(3, 8, &mut rng);
            let params: Vec<f64> = (0..8).map(|_| rng.random_range(-PI..PI)).collect();
            let noise = NoiseModel { p1: 0.05, p2: 0.1, ..NoiseModel::standard(3, seed) };
            let n = 3;
            let mut rho = CMatrix::zeros(8, 8);
            rho[(0, 0)] = C1;
            for op in circ.ops() {
                conjugate(&mut rho, n, &op.qubits, &device_unitary(op, &params, &noise));
                prop_assert!(check_valid_density(&rho).is_ok(), "{:?}", check_valid_density(&rho));
                let p = if op.qubits.len() == 1 { noise.p1 } else { noise.p2 };
                depolarize(&mut rho, n, &op.qubits, p);
                prop_assert!(check_valid_density(&rho).is_ok(), "{:?}", check_valid_density(&rho));
            }
        }
    }
}

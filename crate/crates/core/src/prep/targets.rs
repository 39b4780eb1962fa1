use std::io::{BufRead, Write};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::qcore::{Complex64, PauliString, StateVector, C0, C1};
use crate::util::rng_for;
use crate::{Error, Result};

/// Target-state families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetKind {
    Haar,
    Sine,
    Gaussian {
        #[serde(default = "default_mu")]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// Non-negative real vector, zero-padded to `2^n`.
    Amplitude { values: Vec<f64> },
    /// Synthetic 4×4 grayscale image (4 qubits).
    Image,
    /// Five-qubit code codeword `|b_L⟩`.
    Qec5 {
        #[serde(default)]
        logical: u8,
    },
}

fn default_mu() -> f64 {
    0.5
}

fn default_sigma() -> f64 {
    0.15
}

impl TargetKind {
    pub fn gaussian() -> Self {
        TargetKind::Gaussian { mu: default_mu(), sigma: default_sigma() }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetKind::Haar => "haar",
            TargetKind::Sine => "sine",
            TargetKind::Gaussian { .. } => "gaussian",
            TargetKind::Amplitude { .. } => "amplitude",
            TargetKind::Image => "image",
            TargetKind::Qec5 { .. } => "qec5",
        }
    }
}

/// Stabilizer generators of the five-qubit code.
pub const QEC5_STABILIZERS: [&str; 4] = ["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"];

/// Row-major 4×4 ring-shaped test image.
pub const SYNTHETIC_IMAGE: [f64; 16] = [
    0.1, 0.6, 0.7, 0.2, //
    0.6, 0.2, 0.1, 0.8, //
    0.7, 0.1, 0.2, 0.7, //
    0.2, 0.8, 0.6, 0.1,
];

fn midpoints(n_qubits: usize) -> impl Iterator<Item = f64> {
    let dim = 1usize << n_qubits;
    (0..dim).map(move |k| (k as f64 + 0.5) / dim as f64)
}

fn from_real(n_qubits: usize, values: impl Iterator<Item = f64>) -> Result<StateVector> {
    StateVector::from_unnormalized(n_qubits, values.map(|v| Complex64::new(v, 0.0)).collect())
}

/// Generates a normalized target state. `seed` only affects `Haar`.
pub fn gen_target(kind: &TargetKind, n_qubits: usize, seed: u64) -> Result<StateVector> {
    if n_qubits == 0 {
        return Err(Error::InvalidConfig("targets need at least one qubit".into()));
    }
    let dim = 1usize << n_qubits;
    match kind {
        TargetKind::Haar => {
            let mut rng = rng_for(seed, 0);
            let amps = (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            StateVector::from_unnormalized(n_qubits, amps)
        }
        TargetKind::Sine => from_real(n_qubits, midpoints(n_qubits).map(|x| (std::f64::consts::PI * x).sin())),
        &TargetKind::Gaussian { mu, sigma } => {
            if !(sigma > 0.0) || !mu.is_finite() {
                return Err(Error::InvalidConfig(format!("gaussian needs finite mu and sigma > 0, got {mu}, {sigma}")));
            }
            from_real(n_qubits, midpoints(n_qubits).map(|x| (-(x - mu).powi(2) / (2.0 * sigma * sigma)).exp()))
        }
        TargetKind::Amplitude { values } => amplitude_target(n_qubits, values),
        TargetKind::Image => {
            if n_qubits != 4 {
                return Err(Error::InvalidConfig(format!("image target needs 4 qubits, got {n_qubits}")));
            }
            amplitude_target(4, &SYNTHETIC_IMAGE)
        }
        &TargetKind::Qec5 { logical } => {
            if n_qubits != 5 {
                return Err(Error::InvalidConfig(format!("qec5 needs 5 qubits, got {n_qubits}")));
            }
            if logical > 1 {
                return Err(Error::InvalidConfig(format!("qec5 logical bit must be 0 or 1, got {logical}")));
            }
            qec5_codeword(logical == 1)
        }
    }
}

fn amplitude_target(n_qubits: usize, values: &[f64]) -> Result<StateVector> {
    let dim = 1usize << n_qubits;
    if values.len() > dim {
        return Err(Error::InvalidConfig(format!("{} amplitudes do not fit {n_qubits} qubits", values.len())));
    }
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidConfig("amplitude values must be finite and non-negative".into()));
    }
    from_real(n_qubits, values.iter().copied().chain(std::iter::repeat(0.0)).take(dim))
}

fn qec5_codeword(one: bool) -> Result<StateVector> {
    let mut amps = vec![C0; 32];
    amps[if one { 31 } else { 0 }] = C1;
    for s in QEC5_STABILIZERS {
        let p: PauliString = s.parse()?;
        let applied = p.apply(&amps)?;
        amps.iter_mut().zip(applied).for_each(|(a, b)| *a += b);
    }
    StateVector::from_unnormalized(5, amps)
}

/// One `re,im` line per basis index, nothing else.
pub fn write_amplitudes(mut w: impl Write, state: &StateVector) -> std::io::Result<()> {
    for a in state.amplitudes() {
        writeln!(w, "{},{}", a.re, a.im)?;
    }
    Ok(())
}

/// Reads [`write_amplitudes`] output; the qubit count follows from the number
/// of lines. Blank lines and `#` comments are skipped.
pub fn read_amplitudes(r: impl BufRead) -> Result<StateVector> {
    let mut amps = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (re, im) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad line {line:?}")))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        amps.push(Complex64::new(parse(re)?, parse(im)?));
    }
    if amps.len() < 2 || !amps.len().is_power_of_two() {
        return Err(Error::Parse(format!("{} amplitudes is not a power of two of at least 2", amps.len())));
    }
    StateVector::new(amps.len().trailing_zeros() as usize, amps)
}

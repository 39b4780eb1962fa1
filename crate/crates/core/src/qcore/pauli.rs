use std::fmt;
use std::str::FromStr;

use super::{Complex64, CI};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis. Character `q` of the textual form
/// acts on qubit `q`, so `"ZI"` is `Z` on qubit 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    /// `Z` on a single qubit, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Self {
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        Self { letters }
    }

    pub fn all(n_qubits: usize, p: Pauli) -> Self {
        Self { letters: vec![p; n_qubits] }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    /// Returns `P|ψ⟩` for amplitudes indexed little-endian.
    pub fn apply(&self, amps: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.letters.len();
        if amps.len() != 1usize << n {
            return Err(Error::DimensionMismatch { expected: 1 << n, got: amps.len() });
        }
        let mut flip = 0usize;
        let mut zmask = 0usize;
        let mut n_y = 0u32;
        for (q, p) in self.letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= 1 << q,
                Pauli::Z => zmask |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    zmask |= 1 << q;
                    n_y += 1;
                }
            }
        }
        // Y = i·X·Z, so P = i^{#Y} · X^flip · Z^zmask.
        let phase = CI.powu(n_y);
        let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
        for (i, a) in amps.iter().enumerate() {
            let sign = if (i & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[i ^ flip] = *a * phase * sign;
        }
        Ok(out)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::InvalidPauli(s.to_string()));
        }
        let letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(Error::InvalidPauli(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { letters })
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rejects_garbage() {
        assert!("XQZ".parse::<PauliString>().is_err());
        assert!("".parse::<PauliString>().is_err());
        assert_eq!("xyz".parse::<PauliString>().unwrap().to_string(), "XYZ");
    }

    #[test]
    fn y_acts_like_matrix() {
        // Y|0⟩ = i|1⟩
        let p: PauliString = "Y".parse().unwrap();
        let out = p.apply(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
        assert!((out[1] - CI).norm() < 1e-15);
        assert!(out[0].norm() < 1e-15);
    }

    #[test]
    fn first_letter_is_qubit_zero() {
        let p: PauliString = "XI".parse().unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 4];
        amps[0] = Complex64::new(1.0, 0.0);
        let out = p.apply(&amps).unwrap();
        assert!((out[1].re - 1.0).abs() < 1e-15);
    }
}

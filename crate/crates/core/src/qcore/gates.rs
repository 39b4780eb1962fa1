use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Complex64, C0, C1, CI};
use crate::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

/// Supported gate kinds.
///
/// Two-qubit matrices are written in the local basis `|q_first q_second⟩`, i.e.
/// the first listed qubit is the more significant local bit. For `CNOT` the
/// first qubit is the control, for `RZX` it carries the `Z` factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GateKind {
    RX,
    RY,
    RZ,
    RZX,
    CNOT,
    SX,
    X,
    H,
    SDG,
}

impl GateKind {
    pub const ALL: [GateKind; 9] = [
        GateKind::RX,
        GateKind::RY,
        GateKind::RZ,
        GateKind::RZX,
        GateKind::CNOT,
        GateKind::SX,
        GateKind::X,
        GateKind::H,
        GateKind::SDG,
    ];

    pub const PARAMETERIZED: [GateKind; 4] = [GateKind::RX, GateKind::RY, GateKind::RZ, GateKind::RZX];

    pub fn arity(self) -> usize {
        match self {
            GateKind::RZX | GateKind::CNOT => 2,
            _ => 1,
        }
    }

    pub fn is_parameterized(self) -> bool {
        matches!(self, GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::RZX)
    }

    /// Pauli generator of a parameterized kind, as a Pauli string over the
    /// gate's own qubits (first character acts on the first listed qubit).
    pub fn generator(self) -> Option<&'static str> {
        match self {
            GateKind::RX => Some("X"),
            GateKind::RY => Some("Y"),
            GateKind::RZ => Some("Z"),
            GateKind::RZX => Some("ZX"),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::RZX => "RZX",
            GateKind::CNOT => "CNOT",
            GateKind::SX => "SX",
            GateKind::X => "X",
            GateKind::H => "H",
            GateKind::SDG => "SDG",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A dense 2×2 or 4×4 gate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateMatrix {
    One(Mat2),
    Two(Mat4),
}

impl GateMatrix {
    pub fn dim(&self) -> usize {
        match self {
            GateMatrix::One(_) => 2,
            GateMatrix::Two(_) => 4,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        match self {
            GateMatrix::One(m) => m[r][c],
            GateMatrix::Two(m) => m[r][c],
        }
    }

    fn map(&self, f: impl Fn(usize, usize) -> Complex64) -> GateMatrix {
        match self {
            GateMatrix::One(_) => {
                let mut out = [[C0; 2]; 2];
                for (r, row) in out.iter_mut().enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = f(r, c);
                    }
                }
                GateMatrix::One(out)
            }
            GateMatrix::Two(_) => {
                let mut out = [[C0; 4]; 4];
                for (r, row) in out.iter_mut().enumerate() {
                    for (c, v) in row.iter_mut().enumerate() {
                        *v = f(r, c);
                    }
                }
                GateMatrix::Two(out)
            }
        }
    }

    pub fn adjoint(&self) -> GateMatrix {
        self.map(|r, c| self.get(c, r).conj())
    }

    pub fn conj(&self) -> GateMatrix {
        self.map(|r, c| self.get(r, c).conj())
    }

    pub fn scale(&self, s: Complex64) -> GateMatrix {
        self.map(|r, c| self.get(r, c) * s)
    }

    pub fn matmul(&self, other: &GateMatrix) -> GateMatrix {
        assert_eq!(self.dim(), other.dim(), "gate matrix dimensions differ");
        let d = self.dim();
        self.map(|r, c| (0..d).map(|k| self.get(r, k) * other.get(k, c)).sum())
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &GateMatrix) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                worst = worst.max((self.get(r, c) - other.get(r, c)).norm());
            }
        }
        worst
    }

    pub fn identity(dim: usize) -> GateMatrix {
        match dim {
            2 => GateMatrix::One([[C1, C0], [C0, C1]]),
            4 => {
                let mut m = [[C0; 4]; 4];
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] = C1;
                }
                GateMatrix::Two(m)
            }
            _ => panic!("gate matrices are 2x2 or 4x4"),
        }
    }
}

pub fn pauli_matrix(letter: char) -> Option<Mat2> {
    match letter {
        'I' => Some([[C1, C0], [C0, C1]]),
        'X' => Some([[C0, C1], [C1, C0]]),
        'Y' => Some([[C0, -CI], [CI, C0]]),
        'Z' => Some([[C1, C0], [C0, -C1]]),
        _ => None,
    }
}

fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[C0; 4]; 4];
    for (r, row) in out.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = a[r >> 1][c >> 1] * b[r & 1][c & 1];
        }
    }
    out
}

/// Matrix of a Pauli generator string of length 1 or 2.
pub(crate) fn generator_matrix(kind: GateKind) -> Option<GateMatrix> {
    let gen = kind.generator()?;
    let letters: Vec<char> = gen.chars().collect();
    Some(match letters.as_slice() {
        [a] => GateMatrix::One(pauli_matrix(*a)?),
        [a, b] => GateMatrix::Two(kron(&pauli_matrix(*a)?, &pauli_matrix(*b)?)),
        _ => return None,
    })
}

/// `exp(-iθP/2) = cos(θ/2) I - i sin(θ/2) P` for a generator with `P² = I`.
pub(crate) fn rotation(generator: &GateMatrix, angle: f64) -> GateMatrix {
    let (s, c) = (angle / 2.0).sin_cos();
    let id = GateMatrix::identity(generator.dim());
    generator.map(|r, k| id.get(r, k) * c + generator.get(r, k) * Complex64::new(0.0, -s))
}

fn fixed_unitary(kind: GateKind) -> GateMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let ch = Complex64::new(h, 0.0);
    match kind {
        GateKind::X => GateMatrix::One([[C0, C1], [C1, C0]]),
        GateKind::H => GateMatrix::One([[ch, ch], [ch, -ch]]),
        GateKind::SX => {
            let p = Complex64::new(0.5, 0.5);
            let m = Complex64::new(0.5, -0.5);
            GateMatrix::One([[p, m], [m, p]])
        }
        GateKind::SDG => GateMatrix::One([[C1, C0], [C0, -CI]]),
        GateKind::CNOT => {
            let mut m = [[C0; 4]; 4];
            m[0][0] = C1;
            m[1][1] = C1;
            m[2][3] = C1;
            m[3][2] = C1;
            GateMatrix::Two(m)
        }
        _ => unreachable!("parameterized kind has no fixed unitary"),
    }
}

/// Unitary of a gate. Parameterized kinds return `exp(-i·angle·P/2)`.
pub fn gate_unitary(kind: GateKind, angle: Option<f64>) -> Result<GateMatrix> {
    match (kind.is_parameterized(), angle) {
        (true, Some(theta)) => {
            if !theta.is_finite() {
                return Err(Error::InvalidGate(format!("{kind} angle {theta} is not finite")));
            }
            let gen = generator_matrix(kind).expect("parameterized kinds have generators");
            Ok(rotation(&gen, theta))
        }
        (true, None) => Err(Error::InvalidGate(format!("{kind} requires an angle"))),
        (false, Some(_)) => Err(Error::InvalidGate(format!("{kind} takes no angle"))),
        (false, None) => Ok(fixed_unitary(kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unitarity_error(u: &GateMatrix) -> f64 {
        u.adjoint().matmul(u).max_abs_diff(&GateMatrix::identity(u.dim()))
    }

    #[test]
    fn zero_angle_rz_is_identity() {
        let u = gate_unitary(GateKind::RZ, Some(0.0)).unwrap();
        assert!(u.max_abs_diff(&GateMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn rx_pi_maps_zero_to_minus_i_one() {
        let u = gate_unitary(GateKind::RX, Some(PI)).unwrap();
        assert!(u.get(0, 0).norm() < 1e-15);
        assert!((u.get(1, 0) - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn rzx_pi_squares_to_minus_identity() {
        let u = gate_unitary(GateKind::RZX, Some(PI)).unwrap();
        let sq = u.matmul(&u);
        let minus_id = GateMatrix::identity(4).scale(-C1);
        assert!(sq.max_abs_diff(&minus_id) < 1e-15);
        // exp(-iπ ZX/2) = -i Z⊗X
        let zx = generator_matrix(GateKind::RZX).unwrap().scale(-CI);
        assert!(u.max_abs_diff(&zx) < 1e-15);
    }

    #[test]
    fn angle_presence_is_checked() {
        assert!(gate_unitary(GateKind::RX, None).is_err());
        assert!(gate_unitary(GateKind::CNOT, Some(1.0)).is_err());
        assert!(gate_unitary(GateKind::RY, Some(f64::NAN)).is_err());
    }

    #[test]
    fn generators_square_to_identity() {
        for kind in GateKind::PARAMETERIZED {
            let g = generator_matrix(kind).unwrap();
            let id = GateMatrix::identity(g.dim());
            assert!(g.matmul(&g).max_abs_diff(&id) < 1e-15, "{kind}");
        }
        for kind in GateKind::ALL {
            assert_eq!(kind.is_parameterized(), GateKind::PARAMETERIZED.contains(&kind));
        }
    }

    #[test]
    fn fixed_gates_are_unitary() {
        for kind in GateKind::ALL.into_iter().filter(|k| !k.is_parameterized()) {
            let u = gate_unitary(kind, None).unwrap();
            assert!(unitarity_error(&u) < 1e-14, "{kind}");
        }
    }

    #[test]
    fn sx_squares_to_x() {
        let sx = gate_unitary(GateKind::SX, None).unwrap();
        let x = gate_unitary(GateKind::X, None).unwrap();
        assert!(sx.matmul(&sx).max_abs_diff(&x) < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rotations_are_unitary(theta in -50.0f64..50.0) {
            for kind in GateKind::PARAMETERIZED {
                let u = gate_unitary(kind, Some(theta)).unwrap();
                prop_assert!(unitarity_error(&u) < 1e-12);
            }
        }

        #[test]
        fn rotations_have_period_four_pi(theta in -10.0f64..10.0) {
            for kind in GateKind::PARAMETERIZED {
                let u = gate_unitary(kind, Some(theta)).unwrap();
                let u4 = gate_unitary(kind, Some(theta + 4.0 * PI)).unwrap();
                let u2 = gate_unitary(kind, Some(theta + 2.0 * PI)).unwrap();
                prop_assert!(u.max_abs_diff(&u4) < 1e-12);
                prop_assert!(u.scale(-C1).max_abs_diff(&u2) < 1e-12);
            }
        }
    }
}

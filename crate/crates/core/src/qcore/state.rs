use super::linalg::{self, CMatrix};
use super::{Complex64, C0, C1};
use crate::{Error, Result};

/// Normalized pure state over `n_qubits`, little-endian amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

const NORM_TOL: f64 = 1e-10;

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidState("a state needs at least one qubit".into()));
    }
    if n_qubits >= usize::BITS as usize || len != 1usize << n_qubits {
        return Err(Error::DimensionMismatch { expected: 1usize << n_qubits.min(63), got: len });
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![C0; 1 << n_qubits];
        amps[0] = C1;
        Self { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C0; 1 << n_qubits];
        amps[index] = C1;
        Self { n_qubits, amps }
    }

    /// Wraps amplitudes that must already be normalized within 1e-10.
    pub fn new(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm = norm2(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn from_unnormalized(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_len(n_qubits, amps.len())?;
        let norm = norm2(&amps).sqrt();
        if !(norm.is_finite() && norm > 1e-300) {
            return Err(Error::InvalidState("amplitude vector has zero norm".into()));
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.amps).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { n_qubits: self.n_qubits, mat: linalg::outer(&self.amps, &self.amps) }
    }
}

fn norm2(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

fn check_square(n_qubits: usize, m: &CMatrix) -> Result<()> {
    check_len(n_qubits, m.nrows())?;
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    Ok(())
}

/// Exact mixed state: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(n_qubits: usize, mat: CMatrix) -> Result<Self> {
        check_square(n_qubits, &mat)?;
        let herm = linalg::hermiticity_error(&mat);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("matrix is not Hermitian (error {herm:.2e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let min_eig = linalg::hermitian_eigenvalues(&mat).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(Error::InvalidState(format!("matrix is not PSD (eigenvalue {min_eig:.2e})")));
        }
        Ok(Self { n_qubits, mat })
    }

    pub(crate) fn from_raw(n_qubits: usize, mat: CMatrix) -> Self {
        Self { n_qubits, mat }
    }

    pub fn pure(state: &StateVector) -> Self {
        state.to_density()
    }

    /// `I/d`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self { n_qubits, mat: linalg::identity(d) / Complex64::new(d as f64, 0.0) }
    }

    /// Global depolarized copy `(1-p)ρ + p·I/d`.
    pub fn depolarized(&self, p: f64) -> Self {
        let d = self.dim();
        let mixed = linalg::identity(d) * Complex64::new(p / d as f64, 0.0);
        Self { n_qubits: self.n_qubits, mat: &self.mat * Complex64::new(1.0 - p, 0.0) + mixed }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.mat)
    }
}

/// Tomographic estimate: Hermitian with unit trace, possibly not PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEstimate {
    n_qubits: usize,
    mat: CMatrix,
}

impl HermitianEstimate {
    pub fn new(n_qubits: usize, mat: CMatrix) -> Result<Self> {
        check_square(n_qubits, &mat)?;
        let herm = linalg::hermiticity_error(&mat);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("estimate is not Hermitian (error {herm:.2e})")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-6 {
            return Err(Error::InvalidState(format!("estimate trace is {tr}, expected 1")));
        }
        Ok(Self { n_qubits, mat })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }
}

impl From<DensityMatrix> for HermitianEstimate {
    fn from(d: DensityMatrix) -> Self {
        Self { n_qubits: d.n_qubits, mat: d.mat }
    }
}

impl From<&StateVector> for DensityMatrix {
    fn from(s: &StateVector) -> Self {
        s.to_density()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_validation() {
        assert!(StateVector::new(1, vec![C1, C1]).is_err());
        assert!(StateVector::new(2, vec![C1, C0]).is_err());
        assert!(StateVector::from_unnormalized(1, vec![C0, C0]).is_err());
        let s = StateVector::from_unnormalized(1, vec![C1, C1]).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_validation() {
        let bad = CMatrix::from_row_slice(2, 2, &[C1, C1, C0, C0]);
        assert!(DensityMatrix::new(1, bad).is_err());
        let not_psd = CMatrix::from_row_slice(2, 2, &[Complex64::new(1.5, 0.0), C0, C0, Complex64::new(-0.5, 0.0)]);
        assert!(DensityMatrix::new(1, not_psd.clone()).is_err());
        assert!(HermitianEstimate::new(1, not_psd).is_ok());
        DensityMatrix::new(2, DensityMatrix::maximally_mixed(2).into_matrix()).unwrap();
    }
}

use serde::{Deserialize, Serialize};

use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{Complex64, DensityMatrix, HermitianEstimate, StateVector};
use crate::{Error, Result};

/// Below this loss the cotangent is set to zero.
pub const LOSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `√tr((ρ-ρ̂)²)`.
    #[default]
    Frobenius,
    /// `tr((ρ-ρ̂)²)`. Linear-in-ρ gradient, so not usable for noise-aware steps.
    SquaredFrobenius,
}

/// Loss value and its Hermitian cotangent `∂L/∂ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateLoss {
    pub loss: f64,
    pub cotangent: CMatrix,
}

fn matrix_loss(kind: LossKind, rho: &CMatrix, target: &CMatrix) -> Result<StateLoss> {
    if rho.shape() != target.shape() {
        return Err(Error::DimensionMismatch { expected: target.nrows(), got: rho.nrows() });
    }
    for m in [rho, target] {
        let herm = linalg::hermiticity_error(m);
        if herm > 1e-8 {
            return Err(Error::InvalidState(format!("loss input is not Hermitian (error {herm:.2e})")));
        }
    }
    let mut diff = rho - target;
    linalg::hermitize(&mut diff);
    let sq = linalg::trace_product(&diff, &diff).re.max(0.0);
    if !sq.is_finite() {
        return Err(Error::Numerical(format!("loss is not finite ({sq})")));
    }
    Ok(match kind {
        LossKind::SquaredFrobenius => StateLoss { loss: sq, cotangent: diff * Complex64::new(2.0, 0.0) },
        LossKind::Frobenius => {
            let loss = sq.sqrt();
            let cotangent =
                if loss < LOSS_FLOOR { CMatrix::zeros(rho.nrows(), rho.ncols()) } else { diff / Complex64::new(loss, 0.0) };
            StateLoss { loss, cotangent }
        }
    })
}

/// `L = √tr((ρ-ρ̂)²)` with cotangent `(ρ-ρ̂)/L`.
pub fn state_loss(rho: &HermitianEstimate, target: &DensityMatrix) -> Result<StateLoss> {
    matrix_loss(LossKind::Frobenius, rho.matrix(), target.matrix())
}

pub fn state_loss_with(kind: LossKind, rho: &HermitianEstimate, target: &DensityMatrix) -> Result<StateLoss> {
    matrix_loss(kind, rho.matrix(), target.matrix())
}

/// Loss between pure states and the vector `M·ψ` that `sim::backward` needs.
///
/// With `ρ = |ψ⟩⟨ψ|`, `ρ̂ = |φ⟩⟨φ|`: `tr((ρ-ρ̂)²) = 2(1 - |⟨φ|ψ⟩|²)` and
/// `(ρ-ρ̂)ψ = ψ - φ⟨φ|ψ⟩`.
pub fn pure_state_loss(kind: LossKind, psi: &StateVector, target: &StateVector) -> Result<(f64, Vec<Complex64>)> {
    if psi.dim() != target.dim() {
        return Err(Error::DimensionMismatch { expected: target.dim(), got: psi.dim() });
    }
    let overlap = target.inner(psi);
    let sq = (2.0 * (1.0 - overlap.norm_sqr())).max(0.0);
    let residual: Vec<Complex64> =
        psi.amplitudes().iter().zip(target.amplitudes()).map(|(p, t)| p - t * overlap).collect();
    Ok(match kind {
        LossKind::SquaredFrobenius => (sq, residual.into_iter().map(|r| r * 2.0).collect()),
        LossKind::Frobenius => {
            let loss = sq.sqrt();
            if loss < LOSS_FLOOR {
                (loss, vec![Complex64::new(0.0, 0.0); psi.dim()])
            } else {
                (loss, residual.into_iter().map(|r| r / loss).collect())
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{C0, C1};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let tr = m.trace();
        m / tr
    }

    #[test]
    fn identical_states_give_zero() {
        let rho = StateVector::zero(2).to_density();
        let l = state_loss(&rho.clone().into(), &rho).unwrap();
        assert_eq!(l.loss, 0.0);
        assert!(l.cotangent.iter().all(|z| *z == C0));
    }

    #[test]
    fn orthogonal_basis_states() {
        let zero = StateVector::basis(1, 0).to_density();
        let one = StateVector::basis(1, 1).to_density();
        let l = state_loss(&zero.into(), &one).unwrap();
        assert!((l.loss - 2f64.sqrt()).abs() < 1e-15);
        let expected = CMatrix::from_row_slice(2, 2, &[C1, C0, C0, -C1]) / Complex64::new(2f64.sqrt(), 0.0);
        assert!((l.cotangent - expected).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn cotangent_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random_density(&mut rng, 4);
        let target = random_density(&mut rng, 4);
        let l = matrix_loss(LossKind::Frobenius, &rho, &target).unwrap();
        let h = 1e-6;
        // perturb along Hermitian directions E_ij + E_ji and i(E_ij - E_ji)
        for i in 0..4 {
            for j in i..4 {
                for imag in [false, true] {
                    if imag && i == j {
                        continue;
                    }
                    let mut dir = CMatrix::zeros(4, 4);
                    let z = if imag { Complex64::new(0.0, 1.0) } else { C1 };
                    dir[(i, j)] += z;
                    dir[(j, i)] += z.conj();
                    let eval = |s: f64| matrix_loss(LossKind::Frobenius, &(&rho + &dir * Complex64::new(s, 0.0)), &target).unwrap().loss;
                    let fd = (eval(h) - eval(-h)) / (2.0 * h);
                    let analytic = linalg::trace_product(&l.cotangent, &dir).re;
                    assert!((fd - analytic).abs() < 1e-6, "({i},{j},{imag}) fd {fd} vs {analytic}");
                }
            }
        }
    }

    #[test]
    fn pure_path_agrees_with_matrix_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rand_state = |rng: &mut ChaCha8Rng| {
            let amps = (0..8).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            StateVector::from_unnormalized(3, amps).unwrap()
        };
        let (psi, phi) = (rand_state(&mut rng), rand_state(&mut rng));
        for kind in [LossKind::Frobenius, LossKind::SquaredFrobenius] {
            let (loss, m_psi) = pure_state_loss(kind, &psi, &phi).unwrap();
            let full = matrix_loss(kind, psi.to_density().matrix(), phi.to_density().matrix()).unwrap();
            assert!((loss - full.loss).abs() < 1e-12);
            let want = linalg::mat_vec(&full.cotangent, psi.amplitudes());
            assert!(m_psi.iter().zip(&want).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let a = StateVector::zero(1).to_density();
        let b = StateVector::zero(2).to_density();
        assert!(state_loss(&a.into(), &b).is_err());
        let bad = CMatrix::from_row_slice(2, 2, &[C1, C1, C0, C0]);
        assert!(matrix_loss(LossKind::Frobenius, &bad, &bad).is_err());
    }
}

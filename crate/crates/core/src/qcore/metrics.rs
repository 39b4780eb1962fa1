use super::linalg::{self, CMatrix};
use super::{Complex64, DensityMatrix, HermitianEstimate, StateVector};
use crate::{Error, Result};

/// Any of the three state representations, borrowed.
#[derive(Debug, Clone, Copy)]
pub enum StateRef<'a> {
    Pure(&'a StateVector),
    Mixed(&'a DensityMatrix),
    Estimate(&'a HermitianEstimate),
}

impl StateRef<'_> {
    pub fn n_qubits(&self) -> usize {
        match self {
            StateRef::Pure(s) => s.n_qubits(),
            StateRef::Mixed(m) => m.n_qubits(),
            StateRef::Estimate(m) => m.n_qubits(),
        }
    }

    fn to_matrix(self) -> CMatrix {
        match self {
            StateRef::Pure(s) => linalg::outer(s.amplitudes(), s.amplitudes()),
            StateRef::Mixed(m) => m.matrix().clone(),
            StateRef::Estimate(m) => m.matrix().clone(),
        }
    }
}

impl<'a> From<&'a StateVector> for StateRef<'a> {
    fn from(s: &'a StateVector) -> Self {
        StateRef::Pure(s)
    }
}

impl<'a> From<&'a DensityMatrix> for StateRef<'a> {
    fn from(m: &'a DensityMatrix) -> Self {
        StateRef::Mixed(m)
    }
}

impl<'a> From<&'a HermitianEstimate> for StateRef<'a> {
    fn from(m: &'a HermitianEstimate) -> Self {
        StateRef::Estimate(m)
    }
}

fn expectation_in(state: &StateVector, m: &CMatrix) -> f64 {
    let v = linalg::mat_vec(m, state.amplitudes());
    state.amplitudes().iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

/// State fidelity.
///
/// Pure–pure uses `|⟨ψ|φ⟩|²`, pure–mixed `tr(ρσ)` and mixed–mixed the Uhlmann
/// form `(tr√(√ρσ√ρ))²`. Results are clamped to `[0, 1]` unless one side is a
/// [`HermitianEstimate`], in which case `tr(ρσ)` is reported as is.
pub fn fidelity<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch { expected: a.n_qubits(), got: b.n_qubits() });
    }
    let clamp = |f: f64| f.clamp(0.0, 1.0);
    use StateRef::*;
    Ok(match (a, b) {
        (Pure(x), Pure(y)) => clamp(x.inner(y).norm_sqr()),
        (Pure(x), Mixed(m)) | (Mixed(m), Pure(x)) => clamp(expectation_in(x, m.matrix())),
        (Pure(x), Estimate(m)) | (Estimate(m), Pure(x)) => expectation_in(x, m.matrix()),
        (Estimate(_), _) | (_, Estimate(_)) => linalg::trace_product(&a.to_matrix(), &b.to_matrix()).re,
        (Mixed(x), Mixed(y)) => clamp(uhlmann(x.matrix(), y.matrix())),
    })
}

fn uhlmann(rho: &CMatrix, sigma: &CMatrix) -> f64 {
    let sq = linalg::psd_sqrt(rho);
    let mut inner = &sq * sigma * &sq;
    linalg::hermitize(&mut inner);
    let s: f64 = linalg::hermitian_eigenvalues(&inner).into_iter().map(|v| v.max(0.0).sqrt()).sum();
    s * s
}

/// `tr(m²)`.
pub fn purity<'a>(m: impl Into<StateRef<'a>>) -> f64 {
    match m.into() {
        StateRef::Pure(_) => 1.0,
        StateRef::Mixed(d) => linalg::trace_product(d.matrix(), d.matrix()).re,
        StateRef::Estimate(e) => linalg::trace_product(e.matrix(), e.matrix()).re,
    }
}

/// Coherent part of the preparation error: `1 - tr(ρρ')/√tr(ρ'²)`, clamped at 0.
///
/// Normalising by the measured state's purity makes the metric blind to a
/// global depolarizing admixture: for `ρ' = (1-p)ρ + p·I/d` it stays near 0.
pub fn coherent_error<'a, 'b>(target: impl Into<StateRef<'a>>, measured: impl Into<StateRef<'b>>) -> Result<f64> {
    let (target, measured) = (target.into(), measured.into());
    let target_purity = purity(target);
    if target_purity < 1.0 - 1e-9 {
        return Err(Error::InvalidState(format!("target must be pure (purity {target_purity})")));
    }
    let p = purity(measured);
    if p <= 0.0 {
        return Err(Error::Numerical(format!("measured state has non-positive purity {p}")));
    }
    let overlap = match (target, measured) {
        (StateRef::Pure(t), StateRef::Mixed(m)) => expectation_in(t, m.matrix()),
        (StateRef::Pure(t), StateRef::Estimate(m)) => expectation_in(t, m.matrix()),
        (StateRef::Pure(t), StateRef::Pure(m)) => t.inner(m).norm_sqr(),
        _ => {
            if target.n_qubits() != measured.n_qubits() {
                return Err(Error::DimensionMismatch { expected: target.n_qubits(), got: measured.n_qubits() });
            }
            linalg::trace_product(&target.to_matrix(), &measured.to_matrix()).re
        }
    };
    if target.n_qubits() != measured.n_qubits() {
        return Err(Error::DimensionMismatch { expected: target.n_qubits(), got: measured.n_qubits() });
    }
    Ok((1.0 - overlap / p.sqrt()).max(0.0))
}

/// Estimated strength of the depolarizing admixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncoherentEstimate {
    pub p: f64,
    /// Set when the purity had no root in `[0, 1]` and `p` was clamped.
    pub clamped: bool,
}

/// Inverts `tr(ρ'²) = (1-p)² + 2(1-p)p/d + p²/d` for `p ∈ [0, 1]`.
pub fn incoherent_strength<'a, 'b>(
    target: impl Into<StateRef<'a>>,
    measured: impl Into<StateRef<'b>>,
) -> Result<IncoherentEstimate> {
    let (target, measured) = (target.into(), measured.into());
    if target.n_qubits() != measured.n_qubits() {
        return Err(Error::DimensionMismatch { expected: target.n_qubits(), got: measured.n_qubits() });
    }
    if purity(target) < 1.0 - 1e-9 {
        return Err(Error::InvalidState("target must be pure".into()));
    }
    let d = (1usize << measured.n_qubits()) as f64;
    let pur = purity(measured);
    // purity = 1 - 2cp + cp², c = 1 - 1/d
    let c = 1.0 - 1.0 / d;
    let x = (1.0 - pur) / c;
    Ok(if pur > 1.0 {
        IncoherentEstimate { p: 0.0, clamped: true }
    } else if x > 1.0 {
        IncoherentEstimate { p: 1.0, clamped: true }
    } else {
        // 1 - √(1-x), written to avoid cancellation near p = 0
        IncoherentEstimate { p: (x / (1.0 + (1.0 - x).sqrt())).clamp(0.0, 1.0), clamped: false }
    })
}

/// `½‖a - b‖₁`.
pub fn trace_distance<'a, 'b>(a: impl Into<StateRef<'a>>, b: impl Into<StateRef<'b>>) -> Result<f64> {
    let (a, b) = (a.into(), b.into());
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch { expected: a.n_qubits(), got: b.n_qubits() });
    }
    let mut diff = a.to_matrix() - b.to_matrix();
    linalg::hermitize(&mut diff);
    Ok(0.5 * linalg::hermitian_eigenvalues(&diff).into_iter().map(f64::abs).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{C0, C1};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..1 << n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
        StateVector::from_unnormalized(n, amps).unwrap()
    }

    fn random_mixed(n: usize, rng: &mut impl Rng) -> DensityMatrix {
        let d = 1 << n;
        let g = CMatrix::from_fn(d, d, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let mut m = &g * g.adjoint();
        let tr = m.trace();
        m /= tr;
        linalg::hermitize(&mut m);
        DensityMatrix::new(n, m).unwrap()
    }

    #[test]
    fn tabulated_fidelities() {
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        assert_eq!(fidelity(&zero, &zero).unwrap(), 1.0);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_state(2, &mut rng);
        let noisy = phi.to_density().depolarized(0.2);
        let f = fidelity(&phi, &noisy).unwrap();
        assert!((f - 0.85).abs() < 1e-12, "{f}");
        // the Uhlmann route must agree when one side is pure
        let f_mixed = fidelity(&phi.to_density(), &noisy).unwrap();
        assert!((f_mixed - 0.85).abs() < 1e-7, "{f_mixed}");
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        assert!(fidelity(&StateVector::zero(1), &StateVector::zero(2)).is_err());
    }

    #[test]
    fn estimate_fidelity_is_unclamped() {
        let zero = StateVector::zero(1);
        let m = CMatrix::from_row_slice(2, 2, &[Complex64::new(1.2, 0.0), C0, C0, Complex64::new(-0.2, 0.0)]);
        let est = HermitianEstimate::new(1, m).unwrap();
        assert!((fidelity(&zero, &est).unwrap() - 1.2).abs() < 1e-12);
    }

    #[test]
    fn tabulated_purities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = random_state(2, &mut rng);
        assert!((purity(&phi.to_density()) - 1.0).abs() < 1e-12);
        assert!((purity(&DensityMatrix::maximally_mixed(2)) - 0.25).abs() < 1e-15);
        assert!((purity(&phi.to_density().depolarized(0.2)) - 0.73).abs() < 1e-12);
    }

    #[test]
    fn tabulated_coherent_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = random_state(2, &mut rng);
        let rho = phi.to_density();
        assert!(coherent_error(&rho, &rho).unwrap().abs() < 1e-12);
        let noisy = rho.depolarized(0.2);
        let expected = 1.0 - 0.85 / 0.73f64.sqrt();
        assert!((coherent_error(&rho, &noisy).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.00515).abs() < 1e-5);

        let zero = StateVector::zero(1).to_density();
        let one = StateVector::basis(1, 1).to_density();
        assert!((coherent_error(&zero, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!(coherent_error(&DensityMatrix::maximally_mixed(1), &one).is_err());
    }

    #[test]
    fn tabulated_incoherent_strengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let phi = random_state(2, &mut rng);
        let rho = phi.to_density();
        let est = incoherent_strength(&rho, &rho).unwrap();
        assert!(est.p.abs() < 1e-7 && !est.clamped);
        let mixed = incoherent_strength(&rho, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((mixed.p - 1.0).abs() < 1e-12);
        let p = incoherent_strength(&rho, &rho.depolarized(0.2)).unwrap();
        assert!((p.p - 0.2).abs() < 1e-12);

        let overfull = CMatrix::from_row_slice(2, 2, &[Complex64::new(1.5, 0.0), C0, C0, Complex64::new(-0.5, 0.0)]);
        let est = HermitianEstimate::new(1, overfull).unwrap();
        let r = incoherent_strength(&StateVector::zero(1), &est).unwrap();
        assert_eq!(r, IncoherentEstimate { p: 0.0, clamped: true });
    }

    #[test]
    fn trace_distance_of_orthogonal_states() {
        let zero = StateVector::zero(1);
        let one = StateVector::basis(1, 1);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
        let _ = C1;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn fidelity_is_symmetric(seed in any::<u64>(), n in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_mixed(n, &mut rng);
            let b = random_mixed(n, &mut rng);
            let ab = fidelity(&a, &b).unwrap();
            let ba = fidelity(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
            let s = random_state(n, &mut rng);
            prop_assert!((fidelity(&s, &a).unwrap() - fidelity(&a, &s).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn coherent_error_ignores_depolarizing(seed in any::<u64>(), n in 1usize..6, p in 0.0f64..0.3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_state(n, &mut rng).to_density();
            let err = coherent_error(&rho, &rho.depolarized(p)).unwrap();
            // closed form 1 - F/√P with F = 1 - p + p/d, P = 1 - 2cp + cp², c = 1 - 1/d
            let d = (1usize << n) as f64;
            let c = 1.0 - 1.0 / d;
            let closed = 1.0 - (1.0 - p + p / d) / (1.0 - 2.0 * c * p + c * p * p).sqrt();
            prop_assert!((err - closed.max(0.0)).abs() < 1e-10);
            // one and two qubits cross 0.01 just above p = 0.25
            let p_max = if n <= 2 { 0.25 } else { 0.3 };
            if p <= p_max {
                prop_assert!(err <= 0.01, "n={} p={} err={}", n, p, err);
            }
        }

        #[test]
        fn incoherent_strength_recovers_p(seed in any::<u64>(), n in 1usize..5, p in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_state(n, &mut rng).to_density();
            let est = incoherent_strength(&rho, &rho.depolarized(p)).unwrap();
            prop_assert!((est.p - p).abs() < 1e-9 || (p < 1e-4 && (est.p - p).abs() < 1e-6),
                "p={} est={}", p, est.p);
        }
    }
}

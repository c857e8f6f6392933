use fvqoc_core::config::{build_operator, PauliTerm};
use fvqoc_core::linalg::{haar_random_unitary, pauli_basis, ComplexMatrix, C64};
use fvqoc_core::sse::ControlPulse;
use proptest::prelude::*;

fn complex_matrix(dim: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim)
        .prop_map(move |v| ComplexMatrix::new(dim, dim, v.into_iter().map(|(re, im)| C64::new(re, im)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pauli_expansion_roundtrips(m in complex_matrix(4)) {
        let basis = pauli_basis(2).unwrap();
        let back = basis.reconstruct(&basis.expand(&m));
        prop_assert!(back.max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn pauli_elements_are_orthogonal(a in 0usize..16, b in 0usize..16) {
        let basis = pauli_basis(2).unwrap();
        let ip = basis.element(a).adjoint().trace_product(basis.element(b));
        let expected = if a == b { 4.0 } else { 0.0 };
        prop_assert!((ip - C64::new(expected, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn haar_samples_are_unitary(dim in 2usize..9, seed in any::<u64>()) {
        let u = haar_random_unitary(dim, seed).unwrap();
        prop_assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn pulse_flat_roundtrip(channels in 1usize..4, steps in 1usize..20, seed in any::<u64>()) {
        let values: Vec<Vec<f64>> = (0..channels)
            .map(|j| (0..steps).map(|i| ((seed % 1000) as f64 + (j * steps + i) as f64).sin()).collect())
            .collect();
        let pulse = ControlPulse::with_steps(0.01, steps, values).unwrap();
        let back = ControlPulse::from_flat(0.01, channels, &pulse.to_flat()).unwrap();
        prop_assert_eq!(back.channels(), pulse.channels());
    }

    #[test]
    fn built_operators_are_hermitian(
        labels in prop::collection::vec(prop::sample::select(vec!['I', 'X', 'Y', 'Z']), 2),
        coeff in -2.0f64..2.0,
    ) {
        let term = PauliTerm { pauli: labels.iter().collect(), coeff };
        let op = build_operator("op", &[term], 2).unwrap();
        prop_assert!(op.is_hermitian(1e-14));
        prop_assert!((op.frobenius_norm() - 2.0 * coeff.abs()).abs() < 1e-12);
    }

    #[test]
    fn expm_of_anti_hermitian_is_unitary(m in complex_matrix(3)) {
        let h = m.matmul(&m.adjoint());
        let u = h.scale(C64::new(0.0, 0.3)).expm();
        prop_assert!(u.is_unitary(1e-10));
    }
}

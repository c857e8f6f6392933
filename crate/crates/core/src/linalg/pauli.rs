use super::matrix::{kron, ComplexMatrix, C64, I, ONE, ZERO};
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 6;

pub fn sigma_x() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(&[[ONE, ZERO], [ZERO, -ONE]])
}

/// Single-qubit Pauli by label index: 0 = I, 1 = X, 2 = Y, 3 = Z.
pub fn pauli(label: usize) -> ComplexMatrix {
    match label {
        0 => ComplexMatrix::identity(2),
        1 => sigma_x(),
        2 => sigma_y(),
        3 => sigma_z(),
        _ => panic!("Pauli label {label} out of range"),
    }
}

/// Embeds a single-qubit operator on qubit `q` of an `n`-qubit register.
/// Qubit 0 is the leftmost tensor factor.
pub fn embed(op: &ComplexMatrix, q: usize, n: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::identity(1);
    for k in 0..n {
        let factor = if k == q { op.clone() } else { ComplexMatrix::identity(2) };
        out = kron(&out, &factor);
    }
    out
}

/// Tensor product of single-qubit Paulis given by labels, qubit 0 first.
pub fn pauli_string(labels: &[usize]) -> ComplexMatrix {
    labels
        .iter()
        .fold(ComplexMatrix::identity(1), |acc, &l| kron(&acc, &pauli(l)))
}

/// The 4^N Pauli strings in lexicographic {I, X, Y, Z} order, qubit 0 being
/// the most significant digit.
#[derive(Clone, Debug)]
pub struct PauliBasis {
    n_qubits: usize,
    elements: Vec<ComplexMatrix>,
}

impl PauliBasis {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("pauli basis needs at least one qubit".into()));
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "pauli basis limited to {MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let elements = (0..4usize.pow(n_qubits as u32))
            .map(|idx| pauli_string(&Self::labels_of(idx, n_qubits)))
            .collect();
        Ok(Self { n_qubits, elements })
    }

    pub fn labels_of(index: usize, n_qubits: usize) -> Vec<usize> {
        let mut labels = vec![0; n_qubits];
        let mut rest = index;
        for q in (0..n_qubits).rev() {
            labels[q] = rest % 4;
            rest /= 4;
        }
        labels
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Hilbert-space dimension 2^N.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    pub fn element(&self, m: usize) -> &ComplexMatrix {
        &self.elements[m]
    }

    /// Trace-expansion normalization 1/2^N, so that
    /// `X = Σ_m norm·Tr[P_m X] P_m`.
    pub fn normalization(&self) -> f64 {
        1.0 / self.dim() as f64
    }

    /// Coefficients `Tr[P_m X] / 2^N` of an operator.
    pub fn expand(&self, x: &ComplexMatrix) -> Vec<C64> {
        let norm = self.normalization();
        self.elements
            .iter()
            .map(|p| p.trace_product(x) * norm)
            .collect()
    }

    /// Inverse of [`expand`](Self::expand).
    pub fn reconstruct(&self, coeffs: &[C64]) -> ComplexMatrix {
        let d = self.dim();
        let mut out = ComplexMatrix::zeros(d, d);
        for (p, c) in self.elements.iter().zip(coeffs) {
            if *c != ZERO {
                out.axpy(*c, p);
            }
        }
        out
    }
}

pub fn pauli_basis(n_qubits: usize) -> Result<PauliBasis> {
    PauliBasis::new(n_qubits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_qubit_order() {
        let b = pauli_basis(1).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.element(0), &ComplexMatrix::identity(2));
        assert_eq!(b.element(1), &sigma_x());
        assert_eq!(b.element(2), &sigma_y());
        assert_eq!(b.element(3), &sigma_z());
    }

    #[test]
    fn two_qubit_element_five_is_xx() {
        let b = pauli_basis(2).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b.element(5), &kron(&sigma_x(), &sigma_x()));
        assert_eq!(b.element(7), &kron(&sigma_x(), &sigma_z()));
    }

    #[test]
    fn trace_orthogonality() {
        let b = pauli_basis(2).unwrap();
        for m in 0..16 {
            for n in 0..16 {
                let t = b.element(m).trace_product(b.element(n));
                let expected = if m == n { 4.0 } else { 0.0 };
                assert!((t - C64::new(expected, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn size_limits() {
        assert!(pauli_basis(0).is_err());
        assert!(pauli_basis(7).is_err());
    }

    #[test]
    fn expand_reconstruct_round_trip() {
        let b = pauli_basis(1).unwrap();
        let x = ComplexMatrix::from_rows(&[
            [C64::new(0.3, 0.1), C64::new(-1.0, 2.0)],
            [C64::new(0.5, 0.0), C64::new(0.0, -0.7)],
        ]);
        assert!(b.reconstruct(&b.expand(&x)).max_abs_diff(&x) < 1e-15);
    }

    #[test]
    fn embed_places_operator() {
        let z1 = embed(&sigma_z(), 1, 2);
        assert_eq!(z1, kron(&ComplexMatrix::identity(2), &sigma_z()));
    }
}

use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-9;

/// Normalized pure state of a 2^N-dimensional register.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<C64>,
}

impl QuantumState {
    /// Validates that the amplitudes are normalized to within 1e-9 and of
    /// power-of-two length.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let dim = amplitudes.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::Dimension(format!("state dimension {dim} is not 2^N")));
        }
        let norm = norm(&amplitudes);
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidArgument(format!("state norm {norm} is not 1")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
        }
        amplitudes.iter_mut().for_each(|z| *z /= n);
        Self::new(amplitudes)
    }

    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::Dimension(format!("basis index {index} >= {dim}")));
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        Self::new(v)
    }

    /// |+⟩ = (|0⟩ + |1⟩)/√2
    pub fn plus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self { amplitudes: vec![a, a] }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn overlap(&self, other: &QuantumState) -> C64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn expectation(&self, op: &ComplexMatrix) -> f64 {
        inner(&self.amplitudes, &op.apply(&self.amplitudes)).re
    }
}

/// ⟨a|b⟩
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// |ψ⟩⟨φ|
pub fn outer(psi: &[C64], phi: &[C64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(psi.len(), phi.len());
    for (r, a) in psi.iter().enumerate() {
        for (c, b) in phi.iter().enumerate() {
            m[(r, c)] = a * b.conj();
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unnormalized() {
        assert!(QuantumState::new(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).is_err());
        let s = QuantumState::normalized(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]).unwrap();
        assert!((norm(s.amplitudes()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(QuantumState::normalized(vec![C64::new(1.0, 0.0); 3]).is_err());
    }
}

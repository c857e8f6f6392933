use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::matrix::{qr, ComplexMatrix, C64};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of R's diagonal moved into Q.
pub fn haar_random_unitary(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidArgument("haar unitary needs dim >= 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let data = (0..dim * dim).map(|_| complex_gaussian(&mut rng)).collect();
    let g = ComplexMatrix::new(dim, dim, data)?;
    let (mut q, r) = qr(&g)?;
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = d / d.norm();
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    Ok(q)
}

/// Haar-random pure state (first column of a Haar unitary).
pub fn haar_random_state(dim: usize, seed: u64) -> Result<Vec<C64>> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<C64> = (0..dim).map(|_| complex_gaussian(&mut rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Singular);
    }
    v.iter_mut().for_each(|z| *z /= norm);
    Ok(v)
}

/// Hermitian matrix `(G + G†)/2` from a complex Gaussian `G`.
pub fn random_hermitian(dim: usize, seed: u64) -> Result<ComplexMatrix> {
    if dim < 2 {
        return Err(Error::InvalidArgument("random hermitian needs dim >= 2".into()));
    }
    let mut rng = rng_from_seed(seed);
    let data = (0..dim * dim).map(|_| complex_gaussian(&mut rng)).collect();
    let g = ComplexMatrix::new(dim, dim, data)?;
    let mut h = (&g + &g.adjoint()).scale_real(0.5);
    for i in 0..dim {
        h[(i, i)] = C64::new(h[(i, i)].re, 0.0);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::{eigh, ground_energy_power_iteration};

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let u = haar_random_unitary(4, 11).unwrap();
        assert!(u.is_unitary(1e-12));
        assert_eq!(u, haar_random_unitary(4, 11).unwrap());
        assert_ne!(u, haar_random_unitary(4, 12).unwrap());
    }

    #[test]
    fn hermitian_and_real_spectrum() {
        let h = random_hermitian(3, 5).unwrap();
        assert!(h.is_hermitian(1e-12));
        let (vals, _) = eigh(&h).unwrap();
        assert!(vals.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn ground_energy_two_solvers_agree() {
        for seed in 0..5 {
            let h = random_hermitian(4, seed).unwrap();
            let (vals, _) = eigh(&h).unwrap();
            let power = ground_energy_power_iteration(&h, 100_000);
            assert!((vals[0] - power).abs() < 1e-8, "seed {seed}: {} vs {power}", vals[0]);
        }
    }

    #[test]
    fn rejects_small_dims() {
        assert!(haar_random_unitary(1, 0).is_err());
        assert!(random_hermitian(1, 0).is_err());
    }
}

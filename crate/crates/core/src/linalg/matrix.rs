//! Dense complex matrices.
//!
//! Everything in this crate works with operators of dimension at most
//! 4^3 = 64 (the η representation of three qubits), so a plain row-major
//! `Vec` with straightforward loops is all that is needed.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major dense complex matrix. Column vectors are `n x 1` matrices.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals.
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.as_ref().len(), ncols, "ragged matrix literal");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let converted: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&converted)
    }

    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col_vec(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[C64]) {
        for (r, x) in v.iter().enumerate() {
            self[(r, c)] = *x;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        let oc = other.cols;
        for i in 0..self.rows {
            let out_row = &mut out.data[i * oc..(i + 1) * oc];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * oc..(k + 1) * oc];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * v` for a plain vector.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Row vector times matrix: `v^T * self`.
    pub fn left_apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![ZERO; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == ZERO {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> ComplexMatrix {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> ComplexMatrix {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> ComplexMatrix {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    /// `Tr[self * other]` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[i * self.cols + k] * other.data[k * other.cols + i];
            }
        }
        acc
    }

    pub fn commutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn anticommutator(&self, other: &ComplexMatrix) -> ComplexMatrix {
        &self.matmul(other) + &other.matmul(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self[(r, c)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_anti_hermitian(&self, tol: f64) -> bool {
        self.is_square() && (self + &self.adjoint()).max_abs() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square()
            && self
                .adjoint()
                .matmul(self)
                .max_abs_diff(&ComplexMatrix::identity(self.rows))
                <= tol
    }

    /// Matrix exponential by scaling and squaring with a truncated Taylor
    /// series. The scaled norm is kept below 1/2 so that 20 terms are far
    /// beyond double precision.
    pub fn expm(&self) -> ComplexMatrix {
        assert!(self.is_square(), "expm of non-square matrix");
        let n = self.rows;
        let norm = self.norm_1();
        let mut squarings = 0u32;
        if norm > 0.5 {
            squarings = (norm / 0.5).log2().ceil() as u32;
        }
        let scaled = self.scale_real(0.5f64.powi(squarings as i32));
        let mut result = ComplexMatrix::identity(n);
        let mut term = ComplexMatrix::identity(n);
        for k in 1..=20 {
            term = term.matmul(&scaled).scale_real(1.0 / k as f64);
            result += &term;
            if term.max_abs() < 1e-18 * result.max_abs() {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        result
    }

    /// Returns `(exp(A), L(A, E))` where `L` is the Fréchet derivative of the
    /// exponential at `A` in direction `E`, read off the upper-right block of
    /// `exp([[A, E], [0, A]])`.
    pub fn expm_frechet(&self, direction: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
        let n = self.rows;
        assert!(self.is_square() && direction.rows == n && direction.cols == n);
        let mut block = ComplexMatrix::zeros(2 * n, 2 * n);
        for r in 0..n {
            for c in 0..n {
                block[(r, c)] = self[(r, c)];
                block[(r + n, c + n)] = self[(r, c)];
                block[(r, c + n)] = direction[(r, c)];
            }
        }
        let e = block.expm();
        let mut exp_a = ComplexMatrix::zeros(n, n);
        let mut frechet = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                exp_a[(r, c)] = e[(r, c)];
                frechet[(r, c)] = e[(r, c + n)];
            }
        }
        (exp_a, frechet)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<ComplexMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = ComplexMatrix::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let (pivot, pivot_abs) = (col..n)
                .map(|r| (r, a[(r, col)].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot_abs <= 1e-300 || pivot_abs / scale < 1e-15 {
                return Err(Error::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)].inv();
            for c in 0..n {
                a[(col, c)] *= p;
                inv[(col, c)] *= p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == ZERO {
                    continue;
                }
                for c in 0..n {
                    let ac = a[(col, c)];
                    let ic = inv[(col, c)];
                    a[(r, c)] -= f * ac;
                    inv[(r, c)] -= f * ic;
                }
            }
        }
        Ok(inv)
    }

    /// 1-norm condition number computed with an explicit inverse.
    pub fn condition_number(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.norm_1() * inv.norm_1(),
            Err(_) => f64::INFINITY,
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// Tensor product; dimensions multiply.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let x = a[(ar, ac)];
            if x == ZERO {
                continue;
            }
            for br in 0..b.rows {
                for bc in 0..b.cols {
                    out[(ar * b.rows + br, ac * b.cols + bc)] = x * b[(br, bc)];
                }
            }
        }
    }
    out
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// the columns of a unitary matrix.
pub fn eigh(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !h.is_square() {
        return Err(Error::Dimension("eigh of non-square matrix".into()));
    }
    if !h.is_hermitian(1e-10 * h.max_abs().max(1.0)) {
        return Err(Error::InvalidArgument("eigh requires a Hermitian matrix".into()));
    }
    let n = h.rows();
    let mut a = h.clone();
    let mut v = ComplexMatrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * a.frobenius_norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                // Rotate in the (p, q) plane to zero a[p, q]:
                // J = [[c, -s e^{iφ}], [s e^{-iφ}, c]] with a[p,q] = |a| e^{iφ}.
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = 0.5 * (2.0 * mag).atan2(aqq - app);
                let c = theta.cos();
                let s = theta.sin();
                let sp = phase * s;
                // A <- J^† A J
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * c - akq * sp.conj();
                    a[(k, q)] = akp * sp + akq * c;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * c - aqk * sp;
                    a[(q, k)] = apk * sp.conj() + aqk * c;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * sp.conj();
                    v[(k, q)] = vkp * sp + vkq * c;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, new_c)] = v[(r, old_c)];
        }
    }
    Ok((values, vectors))
}

/// Smallest eigenvalue of a Hermitian matrix by shifted power iteration.
/// Independent of [`eigh`]; used to cross-check ground-state energies.
pub fn ground_energy_power_iteration(h: &ComplexMatrix, max_iter: usize) -> f64 {
    let n = h.rows();
    let shift = h.norm_1();
    // (shift I - H) has the ground state of H as its dominant eigenvector.
    let shifted = &ComplexMatrix::identity(n).scale_real(shift) - h;
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.1 * i as f64, 0.05 * (i as f64 + 1.0).sin()))
        .collect();
    let mut rayleigh = 0.0;
    for _ in 0..max_iter {
        let w = shifted.apply(&v);
        let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v = w.into_iter().map(|z| z / norm).collect();
        let hv = h.apply(&v);
        let next: f64 = v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum();
        if (next - rayleigh).abs() < 1e-15 * next.abs().max(1.0) {
            rayleigh = next;
            break;
        }
        rayleigh = next;
    }
    rayleigh
}

/// QR decomposition by modified Gram-Schmidt; `q` has orthonormal columns.
pub fn qr(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q = m.clone();
    let mut r = ComplexMatrix::zeros(cols, cols);
    for j in 0..cols {
        for _pass in 0..2 {
            for i in 0..j {
                let dot: C64 = (0..rows).map(|k| q[(k, i)].conj() * q[(k, j)]).sum();
                r[(i, j)] += dot;
                for k in 0..rows {
                    let qi = q[(k, i)];
                    q[(k, j)] -= dot * qi;
                }
            }
        }
        let norm = (0..rows).map(|k| q[(k, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::Singular);
        }
        r[(j, j)] = C64::new(norm, 0.0);
        for k in 0..rows {
            q[(k, j)] /= norm;
        }
    }
    Ok((q, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sx() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]])
    }
    fn sz() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[[1.0, 0.0], [0.0, -1.0]])
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_entries_follow_definition() {
        let m = kron(&sx(), &sz());
        assert_eq!(m[(0, 2)], ONE);
        assert_eq!(m[(1, 3)], -ONE);
        let big = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(4));
        assert_eq!((big.rows(), big.cols()), (8, 8));
    }

    #[test]
    fn new_rejects_wrong_entry_count() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
    }

    #[test]
    fn expm_of_pauli_rotation() {
        let t = 0.7;
        let u = sx().scale(I * t).expm();
        assert!((u[(0, 0)] - C64::new(t.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - C64::new(0.0, t.sin())).norm() < 1e-14);
        let big = sx().scale(I * 37.0).expm();
        assert!(big.is_unitary(1e-12));
    }

    #[test]
    fn frechet_matches_finite_difference() {
        let a = ComplexMatrix::from_rows(&[
            [C64::new(0.1, 0.3), C64::new(-0.4, 0.2)],
            [C64::new(0.5, -0.1), C64::new(0.0, 0.9)],
        ]);
        let e = ComplexMatrix::from_rows(&[
            [C64::new(0.2, 0.0), C64::new(0.1, -0.3)],
            [C64::new(-0.7, 0.2), C64::new(0.3, 0.3)],
        ]);
        let (_, l) = a.expm_frechet(&e);
        let h = 1e-6;
        let mut plus = a.clone();
        plus.axpy(C64::new(h, 0.0), &e);
        let mut minus = a.clone();
        minus.axpy(C64::new(-h, 0.0), &e);
        let fd = (&plus.expm() - &minus.expm()).scale_real(0.5 / h);
        assert!(fd.max_abs_diff(&l) < 1e-8);
    }

    #[test]
    fn inverse_round_trip_and_singular_detection() {
        let a = ComplexMatrix::from_rows(&[
            [C64::new(0.0, 1.0), C64::new(2.0, 0.0), C64::new(0.5, 0.5)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
            [C64::new(0.3, 0.0), C64::new(1.0, -1.0), C64::new(2.0, 0.0)],
        ]);
        let inv = a.inverse().unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&ComplexMatrix::identity(3)) < 1e-13);
        let singular = ComplexMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert!(matches!(singular.inverse(), Err(Error::Singular)));
    }

    #[test]
    fn eigh_diagonalizes_hermitian() {
        let h = ComplexMatrix::from_rows(&[
            [C64::new(1.0, 0.0), C64::new(0.5, -0.2), C64::new(0.0, 0.3)],
            [C64::new(0.5, 0.2), C64::new(-0.3, 0.0), C64::new(0.1, 0.0)],
            [C64::new(0.0, -0.3), C64::new(0.1, 0.0), C64::new(0.7, 0.0)],
        ]);
        let (vals, vecs) = eigh(&h).unwrap();
        assert!(vecs.is_unitary(1e-12));
        let d = vecs.adjoint().matmul(&h).matmul(&vecs);
        let expected = ComplexMatrix::from_diag(&vals.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
        assert!(d.max_abs_diff(&expected) < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn qr_reconstructs() {
        let m = ComplexMatrix::from_rows(&[
            [C64::new(1.0, 1.0), C64::new(2.0, 0.0)],
            [C64::new(0.0, -1.0), C64::new(1.0, 3.0)],
        ]);
        let (q, r) = qr(&m).unwrap();
        assert!(q.is_unitary(1e-13));
        assert!(q.matmul(&r).max_abs_diff(&m) < 1e-13);
    }
}

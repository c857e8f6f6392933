//! Closed-form and small-ODE reference solutions for mean fidelities, used
//! to validate the trajectory simulator and the noise models.

use crate::error::{Error, Result};
use crate::linalg::{pauli, ComplexMatrix, C64, ONE, ZERO};
use crate::noise::ou_even_moment;

/// Sign of the Hamiltonian generator in dφ/dt = ±iHφ under which the
/// printed 10-dim commutator generator A_c is derived. This crate uses +i,
/// so the drift generator enters as −A_c (and the noise generator as −B,
/// which leaves every mean unchanged because the noise law is symmetric).
pub const A_C_SIGN: f64 = -1.0;

fn rk4_linear<F>(generator: F, y0: &[C64], t_grid: &[f64], max_step: f64) -> Vec<Vec<C64>>
where
    F: Fn(f64) -> ComplexMatrix,
{
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        let n = (span / max_step).ceil().max(0.0) as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                let f = |tt: f64, v: &[C64]| generator(tt).apply(v);
                let k1 = f(t, &y);
                let y2: Vec<C64> = y.iter().zip(&k1).map(|(a, k)| a + k * (0.5 * h)).collect();
                let k2 = f(t + 0.5 * h, &y2);
                let y3: Vec<C64> = y.iter().zip(&k2).map(|(a, k)| a + k * (0.5 * h)).collect();
                let k3 = f(t + 0.5 * h, &y3);
                let y4: Vec<C64> = y.iter().zip(&k3).map(|(a, k)| a + k * h).collect();
                let k4 = f(t + h, &y4);
                for i in 0..y.len() {
                    y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
                t += h;
            }
        }
        out.push(y.clone());
    }
    out
}

/// Closed 6-dim moment system for a single noise operator S commuting with
/// the dynamics, driven by OU noise with calibrated initial data.
#[derive(Clone, Copy, Debug)]
pub struct SecondOrderSystem {
    pub gamma: f64,
    pub k: f64,
    /// φ₀†Sφ₀
    pub s0: f64,
}

impl SecondOrderSystem {
    pub fn new(gamma: f64, k: f64, s0: f64) -> Result<Self> {
        if !(gamma >= 0.0) || !(k > 0.0) {
            return Err(Error::InvalidArgument(format!("need gamma >= 0 and k > 0, got ({gamma}, {k})")));
        }
        Ok(Self { gamma, k, s0 })
    }

    pub fn initial(&self) -> Vec<C64> {
        let mut v = vec![ZERO; 6];
        v[0] = ONE;
        v[1] = C64::new(self.s0 * self.s0, 0.0);
        v
    }

    pub fn matrix(&self, t: f64) -> ComplexMatrix {
        let g2 = self.gamma * self.gamma;
        let k = self.k;
        let e = k * ou_even_moment(1, t, k, self.gamma);
        let r = |x: f64| C64::new(x, 0.0);
        let i = |x: f64| C64::new(0.0, x);
        ComplexMatrix::from_rows(&[
            vec![r(-g2), r(g2), i(k), ZERO, ZERO, ZERO],
            vec![r(g2), r(-g2), i(-k), ZERO, ZERO, ZERO],
            vec![i(-2.0 * g2), i(2.0 * g2), r(-(k + 2.0 * g2)), i(2.0 * k), i(-2.0 * k), ZERO],
            vec![r(g2), ZERO, i(-2.0 * g2), r(-(2.0 * k + g2)), r(g2), i(k)],
            vec![ZERO, r(g2), i(2.0 * g2), r(g2), r(-(2.0 * k + g2)), i(-k)],
            vec![ZERO, ZERO, r(2.0 * g2), i(2.0 * (e - 2.0 * g2)), i(-2.0 * (e - 2.0 * g2)), r(-(3.0 * k + 2.0 * g2))],
        ])
    }
}

/// Mean fidelity (component 0, real part) on `t_grid` by RK4 with steps of
/// at most 1e-3.
pub fn second_order_mean_fidelity(sys: &SecondOrderSystem, t_grid: &[f64]) -> Vec<f64> {
    rk4_linear(|t| sys.matrix(t), &sys.initial(), t_grid, 1e-3)
        .into_iter()
        .map(|v| v[0].re)
        .collect()
}

/// The 10-dim closed system for H = α σ₁ and S = σ₂ with (σ₁, σ₂, σ₃) a
/// cyclic permutation of (X, Y, Z).
#[derive(Clone, Debug)]
pub struct NonCommutingSystem {
    pub alpha: f64,
    pub gamma: f64,
    pub a_c: ComplexMatrix,
    pub b: ComplexMatrix,
    pub v0: Vec<f64>,
}

fn real_matrix(entries: &[(usize, usize, f64)]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(10, 10);
    for &(r, c, v) in entries {
        m[(r, c)] = C64::new(v, 0.0);
    }
    m
}

pub fn printed_a_c() -> ComplexMatrix {
    real_matrix(&[
        (2, 9, -2.0),
        (3, 9, 2.0),
        (5, 6, -2.0),
        (6, 5, 2.0),
        (7, 8, -2.0),
        (8, 7, 2.0),
        (9, 2, 4.0),
        (9, 3, -4.0),
    ])
}

pub fn printed_b() -> ComplexMatrix {
    real_matrix(&[
        (0, 5, -1.0),
        (1, 8, 1.0),
        (2, 5, 1.0),
        (3, 8, -1.0),
        (4, 6, 1.0),
        (4, 7, -1.0),
        (5, 0, 2.0),
        (5, 2, -2.0),
        (6, 4, -1.0),
        (6, 9, -1.0),
        (7, 4, 1.0),
        (7, 9, 1.0),
        (8, 1, -2.0),
        (8, 3, 2.0),
        (9, 6, 1.0),
        (9, 7, -1.0),
    ])
}

/// Cyclic label triples accepted by [`NonCommutingSystem::from_states`].
pub const CYCLIC_LABELS: [[char; 3]; 3] = [['X', 'Y', 'Z'], ['Y', 'Z', 'X'], ['Z', 'X', 'Y']];

/// The 10-vector of quadratic forms in (φ, ψ) for the labels σ₁, σ₂, σ₃.
pub fn quadratic_vector(phi: &[C64], psi: &[C64], labels: [char; 3]) -> Result<Vec<f64>> {
    if phi.len() != 2 || psi.len() != 2 {
        return Err(Error::Dimension("quadratic vector needs single-qubit states".into()));
    }
    let mut eta = vec![crate::linalg::inner(phi, psi)];
    for l in labels {
        let idx = match l {
            'X' => 1,
            'Y' => 2,
            'Z' => 3,
            _ => return Err(Error::InvalidArgument(format!("unknown Pauli label {l}"))),
        };
        eta.push(crate::linalg::inner(phi, &pauli(idx).apply(psi)));
    }
    let q = |a: usize, b: usize| eta[a] * eta[b].conj();
    let i = C64::new(0.0, 1.0);
    Ok(vec![
        q(0, 0).re,
        q(1, 1).re,
        q(2, 2).re,
        q(3, 3).re,
        (i * (q(1, 0) - q(0, 1))).re,
        (i * (q(2, 0) - q(0, 2))).re,
        (i * (q(3, 0) - q(0, 3))).re,
        (q(2, 1) + q(1, 2)).re,
        (q(3, 1) + q(1, 3)).re,
        (q(3, 2) + q(2, 3)).re,
    ])
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

fn simpson_intervals(t: f64, resolution: f64) -> usize {
    let n = (t / resolution).ceil() as usize;
    (n + n % 2).max(2)
}

impl NonCommutingSystem {
    pub fn new(alpha: f64, gamma: f64, v0: Vec<f64>) -> Result<Self> {
        if v0.len() != 10 {
            return Err(Error::Dimension(format!("initial vector has length {}, expected 10", v0.len())));
        }
        Ok(Self { alpha, gamma, a_c: printed_a_c(), b: printed_b(), v0 })
    }

    /// V₀ for φ = ψ = φ₀.
    pub fn from_states(alpha: f64, gamma: f64, phi0: &[C64], labels: [char; 3]) -> Result<Self> {
        if !CYCLIC_LABELS.contains(&labels) {
            return Err(Error::InvalidArgument(format!("labels {labels:?} are not a cyclic Pauli permutation")));
        }
        Self::new(alpha, gamma, quadratic_vector(phi0, phi0, labels)?)
    }

    fn drift(&self) -> ComplexMatrix {
        self.a_c.scale_real(A_C_SIGN * self.alpha)
    }

    fn v0c(&self) -> Vec<C64> {
        self.v0.iter().map(|x| C64::new(*x, 0.0)).collect()
    }

    /// [A_c, B]
    pub fn commutator(&self) -> ComplexMatrix {
        self.a_c.commutator(&self.b)
    }

    /// Interaction-frame noise generator e^{−sαA_c t} B e^{sαA_c t}.
    pub fn interaction_noise(&self, t: f64) -> ComplexMatrix {
        let w = 2.0 * self.alpha * t;
        let mut d = self.b.scale_real(w.cos());
        d.axpy(C64::new(-A_C_SIGN * 0.5 * w.sin(), 0.0), &self.commutator());
        d
    }

    /// e^{sαA_c t}
    pub fn frame(&self, t: f64) -> ComplexMatrix {
        self.drift().scale_real(t).expm()
    }

    /// Exact white-noise mean: exp((sαA_c + ½γ²B²)t)·V₀.
    pub fn wn_mean_matrix(&self, t: f64) -> ComplexMatrix {
        let g = &self.drift() + &self.b.matmul(&self.b).scale_real(0.5 * self.gamma * self.gamma);
        g.scale_real(t).expm()
    }

    /// Exact white-noise mean in the interaction frame.
    pub fn interaction_frame_exact(&self, t: f64) -> ComplexMatrix {
        self.frame(-t).matmul(&self.wn_mean_matrix(t))
    }

    fn d2_integral(&self, t: f64, resolution: f64) -> ComplexMatrix {
        let n = simpson_intervals(t, resolution);
        let h = t / n as f64;
        let mut acc = ComplexMatrix::zeros(10, 10);
        for (i, w) in simpson_weights(n, h).into_iter().enumerate() {
            let d = self.interaction_noise(i as f64 * h);
            acc.axpy(C64::new(w, 0.0), &d.matmul(&d));
        }
        acc
    }

    /// exp((γ²/2)∫₀ᵗ D²(s) ds), Simpson quadrature at 1e-3 resolution.
    pub fn magnus_wn(&self, t: f64) -> ComplexMatrix {
        if t == 0.0 {
            return ComplexMatrix::identity(10);
        }
        self.d2_integral(t, 1e-3).scale_real(0.5 * self.gamma * self.gamma).expm()
    }

    /// Second-order expansion of the interaction-frame mean under OU noise
    /// with rate `k`, evaluated by nested quadrature (Simpson outside,
    /// cumulative trapezoid inside) at 1e-3 resolution.
    pub fn ou_magnus_second_order(&self, k: f64, t: f64) -> ComplexMatrix {
        let id = ComplexMatrix::identity(10);
        if t == 0.0 {
            return id;
        }
        let n = simpson_intervals(t, 1e-3);
        let h = t / n as f64;
        let ds: Vec<ComplexMatrix> = (0..=n).map(|i| self.interaction_noise(i as f64 * h)).collect();
        let weights = simpson_weights(n, h);
        let mut i1 = ComplexMatrix::zeros(10, 10);
        let mut t2 = ComplexMatrix::zeros(10, 10);
        let mut t3 = ComplexMatrix::zeros(10, 10);
        let mut c1 = ComplexMatrix::zeros(10, 10);
        let mut c2 = ComplexMatrix::zeros(10, 10);
        for i in 0..=n {
            let s = i as f64 * h;
            if i > 0 {
                let s_prev = s - h;
                c1.axpy(C64::new(0.5 * h * (k * s_prev).exp(), 0.0), &ds[i - 1]);
                c1.axpy(C64::new(0.5 * h * (k * s).exp(), 0.0), &ds[i]);
                c2.axpy(C64::new(0.5 * h * (2.0 * k * s_prev).exp(), 0.0), &ds[i - 1]);
                c2.axpy(C64::new(0.5 * h * (2.0 * k * s).exp(), 0.0), &ds[i]);
            }
            let w = weights[i];
            i1.axpy(C64::new(w, 0.0), &ds[i].matmul(&ds[i]));
            t2.axpy(C64::new(w * (-k * s).exp(), 0.0), &ds[i].anticommutator(&c1));
            t3.axpy(C64::new(w * (-2.0 * k * s).exp(), 0.0), &ds[i].anticommutator(&c2));
        }
        let g2 = self.gamma * self.gamma;
        let mut out = id;
        out.axpy(C64::new(0.5 * g2, 0.0), &i1);
        out.axpy(C64::new(-0.5 * g2 * k, 0.0), &t2);
        out.axpy(C64::new(0.25 * g2 * k, 0.0), &t3);
        out
    }

    /// Component 0 of frame(t)·M·V₀ for an interaction-frame mean M.
    pub fn fidelity_from_interaction(&self, t: f64, m: &ComplexMatrix) -> f64 {
        self.frame(t).matmul(m).apply(&self.v0c())[0].re
    }
}

/// exp((sαA_c + ½γ²B²)t)·V₀: exact white-noise mean vector.
pub fn noncommuting_wn_mean(sys: &NonCommutingSystem, t: f64) -> Vec<f64> {
    sys.wn_mean_matrix(t).apply(&sys.v0c()).into_iter().map(|c| c.re).collect()
}

pub fn noncommuting_magnus_wn(sys: &NonCommutingSystem, t: f64) -> ComplexMatrix {
    sys.magnus_wn(t)
}

pub fn ou_magnus_second_order(sys: &NonCommutingSystem, k: f64, t: f64) -> ComplexMatrix {
    sys.ou_magnus_second_order(k, t)
}

/// Mean fidelity under pure dephasing by white noise on a Pauli operator,
/// starting from an equal superposition: ½(1 + e^{−2γ²t}).
pub fn dephasing_fidelity(gamma: f64, t: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * gamma * gamma * t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_x, sigma_y};
    use crate::noise::{expected_cos, InitMode};

    fn ket0() -> Vec<C64> {
        vec![ONE, ZERO]
    }

    #[test]
    fn second_order_limits() {
        let sys = SecondOrderSystem::new(0.1, 0.1, 0.0).unwrap();
        assert_eq!(second_order_mean_fidelity(&sys, &[0.0])[0], 1.0);
        let quiet = SecondOrderSystem::new(0.0, 0.1, 0.0).unwrap();
        for f in second_order_mean_fidelity(&quiet, &[0.5, 1.0, 2.0]) {
            assert!((f - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn second_order_matches_dephasing_closed_form() {
        // S = σZ on |+⟩: F = ½(1 + E[cos 2(X_t − X_0)])
        let sys = SecondOrderSystem::new(0.1, 0.1, 0.0).unwrap();
        let ts = [0.1, 0.25, 0.5];
        for (t, f) in ts.iter().zip(second_order_mean_fidelity(&sys, &ts)) {
            let exact = 0.5 * (1.0 + expected_cos(2.0, *t, 0.1, 0.1, InitMode::Calibrated));
            assert!((f - exact).abs() < 1e-8, "{t}: {f} vs {exact}");
        }
    }

    #[test]
    fn interaction_noise_at_zero_is_b() {
        let sys = NonCommutingSystem::from_states(1.0, 0.1, &ket0(), ['X', 'Y', 'Z']).unwrap();
        assert!(sys.interaction_noise(0.0).max_abs_diff(&sys.b) < 1e-15);
    }

    #[test]
    fn interaction_noise_matches_conjugation() {
        for alpha in [1.0, 0.7] {
            let sys = NonCommutingSystem::from_states(alpha, 0.1, &ket0(), ['X', 'Y', 'Z']).unwrap();
            for t in [0.3, 1.1] {
                let conj = sys.frame(-t).matmul(&sys.b).matmul(&sys.frame(t));
                assert!(conj.max_abs_diff(&sys.interaction_noise(t)) < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_vector_generators_match_printed_matrices() {
        // Finite-difference the 10-vector along e^{iεH} on both states and
        // along e^{iεS} on ψ alone; the best-fit linear maps are −A_c and −B.
        let labels = ['X', 'Y', 'Z'];
        let (h, s) = (sigma_x(), sigma_y());
        let eps = 1e-6;
        let mut rows = Vec::new();
        let mut dh = Vec::new();
        let mut ds = Vec::new();
        for seed in 0..30 {
            let phi = crate::linalg::haar_random_state(2, seed).unwrap();
            let psi = crate::linalg::haar_random_state(2, 100 + seed).unwrap();
            let rot = |op: &ComplexMatrix, e: f64| op.scale(C64::new(0.0, e)).expm();
            let v = |p: &[C64], q: &[C64]| quadratic_vector(p, q, labels).unwrap();
            let (up, um) = (rot(&h, eps), rot(&h, -eps));
            let a: Vec<f64> = v(&up.apply(&phi), &up.apply(&psi))
                .iter()
                .zip(v(&um.apply(&phi), &um.apply(&psi)))
                .map(|(p, m)| (p - m) / (2.0 * eps))
                .collect();
            let (sp, sm) = (rot(&s, eps), rot(&s, -eps));
            let b: Vec<f64> = v(&phi, &sp.apply(&psi))
                .iter()
                .zip(v(&phi, &sm.apply(&psi)))
                .map(|(p, m)| (p - m) / (2.0 * eps))
                .collect();
            rows.push(v(&phi, &psi));
            dh.push(a);
            ds.push(b);
        }
        let ac = printed_a_c();
        let b = printed_b();
        for (r, (a, bb)) in rows.iter().zip(dh.iter().zip(&ds)) {
            let rc: Vec<C64> = r.iter().map(|x| C64::new(*x, 0.0)).collect();
            let pa = ac.apply(&rc);
            let pb = b.apply(&rc);
            for i in 0..10 {
                assert!((a[i] + pa[i].re).abs() < 1e-6, "A_c row {i}");
                assert!((bb[i] + pb[i].re).abs() < 1e-6, "B row {i}");
            }
        }
    }

    #[test]
    fn wn_mean_noiseless_is_rotation() {
        let sys = NonCommutingSystem::from_states(1.0, 0.0, &ket0(), ['X', 'Y', 'Z']).unwrap();
        assert_eq!(noncommuting_wn_mean(&sys, 0.0), sys.v0);
        let v = noncommuting_wn_mean(&sys, 0.8);
        // components 0, 1 and 4 are untouched by A_c
        for i in [0, 1, 4] {
            assert!((v[i] - sys.v0[i]).abs() < 1e-12);
        }
        // rotation-invariant forms of the (2,3,9), (5,6) and (7,8) blocks
        let q = |v: &[f64]| (v[2] - v[3]).powi(2) + v[9].powi(2);
        assert!((q(&v) - q(&sys.v0)).abs() < 1e-12);
        let p = |v: &[f64]| v[5].powi(2) + v[6].powi(2) + v[7].powi(2) + v[8].powi(2);
        assert!((p(&v) - p(&sys.v0)).abs() < 1e-12);
    }

    #[test]
    fn magnus_limits_and_order() {
        let quiet = NonCommutingSystem::from_states(1.0, 0.0, &ket0(), ['X', 'Y', 'Z']).unwrap();
        assert!(quiet.magnus_wn(1.0).max_abs_diff(&ComplexMatrix::identity(10)) < 1e-14);
        let err = |g: f64| {
            let sys = NonCommutingSystem::from_states(1.0, g, &ket0(), ['X', 'Y', 'Z']).unwrap();
            sys.magnus_wn(1.0).max_abs_diff(&sys.interaction_frame_exact(1.0))
        };
        let (e1, e2) = (err(0.05), err(0.025));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }

    #[test]
    fn ou_second_order_limits() {
        let sys = NonCommutingSystem::from_states(1.0, 0.05, &ket0(), ['X', 'Y', 'Z']).unwrap();
        assert!(sys.ou_magnus_second_order(0.1, 0.0).max_abs_diff(&ComplexMatrix::identity(10)) == 0.0);
        let k0 = sys.ou_magnus_second_order(0.0, 1.0);
        let mut expect = ComplexMatrix::identity(10);
        expect.axpy(C64::new(0.5 * 0.05 * 0.05, 0.0), &sys.d2_integral(1.0, 1e-3));
        assert!(k0.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn dephasing_closed_form() {
        assert!((dephasing_fidelity(0.1, 0.0) - 1.0).abs() < 1e-15);
        assert!((dephasing_fidelity(0.1, 1.0) - 0.5 * (1.0 + (-0.02f64).exp())).abs() < 1e-15);
    }
}

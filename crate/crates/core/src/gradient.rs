//! Analytic gradients: deterministic energy gradient (VQOC), the stochastic
//! adjoint gradient of the fidelity cost for fixed and scaled noise, and the
//! gate-overlap and gate-fidelity gradients.
//!
//! All gradients are densities on the pulse grid: `g_j[i]` approximates
//! δJ/δz_j(t_i), i.e. the partial derivative with respect to the sample
//! z_j(t_i) divided by dt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, ComplexMatrix, C64, I};
use crate::noise::NoisePath;
use crate::rng::trial_seed;
use crate::sde::Scheme;
use crate::sse::{ControlPulse, Dynamics, ScalingMode, Simulator};
use crate::stats::{par_accumulate, Accumulator};
use crate::transfer::{propagate_eta, EtaMode, EtaOptions, EtaState, EtaTrajectory, TransferSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub lambda: f64,
    pub mu: f64,
    pub nu: f64,
}

impl CostWeights {
    pub fn new(lambda: f64, mu: f64, nu: f64) -> Result<Self> {
        let w = Self { lambda, mu, nu };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu), ("nu", self.nu)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Gradient of one noise realization.
#[derive(Clone, Debug)]
pub struct GradientSample {
    /// `grad[j][i]`
    pub grad: Vec<Vec<f64>>,
    pub seed: u64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Terminal fidelity F_T (state mode) or Re η₀(T) (gate mode).
    pub fidelity: f64,
}

/// Which expression is used for the amplitude dependence of scaled noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaledForm {
    /// Pathwise derivative of the discretized η-system: differentiates the
    /// quadratic-variation weight, the noise-drift term and the Wiener term,
    /// the latter paired with the post-step adjoint row.
    #[default]
    Pathwise,
    /// Only the Wiener term ½γ_l|z|^{-1/2} B_l η ΔW_l.
    WienerOnly,
}

/// J₂ = (λ/2) Σ_j ∫ z_j² dt
pub fn pulse_cost(pulse: &ControlPulse, lambda: f64) -> f64 {
    0.5 * lambda * pulse.squared_norm()
}

/// J₁ = φ_T† H_targ φ_T for the noiseless evolution.
pub fn energy_cost(dynamics: &Dynamics, h_targ: &ComplexMatrix, pulse: &ControlPulse, phi0: &[C64]) -> Result<f64> {
    let sim = Simulator::new(dynamics, pulse)?;
    let phi = sim.propagate_phi(phi0)?;
    let last = phi.last().expect("non-empty");
    Ok(inner(last, &h_targ.apply(last)).re)
}

fn frechet_factors(dynamics: &Dynamics, pulse: &ControlPulse) -> Vec<Vec<ComplexMatrix>> {
    let dt = pulse.dt();
    (0..pulse.steps())
        .map(|i| {
            let a = dynamics.hamiltonian(pulse, i).scale(I * dt);
            dynamics
                .controls
                .iter()
                .map(|hj| a.expm_frechet(&hj.scale(I * dt)).1)
                .collect()
        })
        .collect()
}

/// Gradient of J₁ + J₂ with respect to the pulse.
///
/// The energy part is exact for the piecewise-constant discretization
/// (Fréchet derivative of each step exponential). The continuous-time
/// adjoint expression −i⟨φ_t|[H_j, Γ†H_targΓ]|φ_t⟩ is evaluated alongside
/// and its imaginary part must vanish.
pub fn vqoc_gradient(
    dynamics: &Dynamics,
    h_targ: &ComplexMatrix,
    pulse: &ControlPulse,
    phi0: &[C64],
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    let sim = Simulator::new(dynamics, pulse)?;
    let phi = sim.propagate_phi(phi0)?;
    let steps = pulse.steps();
    let dt = pulse.dt();
    // χ_i = Γ(T, t_i)† H_targ φ_T
    let mut chi = vec![Vec::new(); steps + 1];
    chi[steps] = h_targ.apply(&phi[steps]);
    for i in (0..steps).rev() {
        chi[i] = sim.step_unitary(i).adjoint().apply(&chi[i + 1]);
    }
    let frechet = frechet_factors(dynamics, pulse);
    let mut grad = vec![vec![0.0; steps]; dynamics.controls.len()];
    for i in 0..steps {
        for (j, hj) in dynamics.controls.iter().enumerate() {
            let dphi = frechet[i][j].apply(&phi[i]);
            let exact = 2.0 * inner(&chi[i + 1], &dphi).re / dt;
            // −i⟨φ|[H_j, O]|φ⟩ with Oφ = χ
            let hphi = hj.apply(&phi[i]);
            let comm = inner(&phi[i], &hj.apply(&chi[i])) - inner(&chi[i], &hphi);
            let continuous = -I * comm;
            if continuous.im.abs() > 1e-8 * (1.0 + continuous.re.abs()) {
                return Err(Error::ConventionViolation(continuous.im.abs()));
            }
            grad[j][i] = exact + lambda * pulse.value(j, i);
        }
    }
    Ok(grad)
}

/// ζ_i = η_T†Λ₀Φ_T + ν ∫_{t_i}^T η_s†Λ₀Φ_s ds, trapezoidal in reverse.
/// For the gate cost pass `linear = true` to use e₀†Φ instead of η†Λ₀Φ.
pub fn zeta_series(eta: &[Vec<C64>], phi: &[ComplexMatrix], nu: f64, dt: f64, linear: bool) -> Vec<Vec<C64>> {
    let n = phi.len();
    let integrand = |k: usize| -> Vec<C64> {
        let row = phi[k].row(0);
        if linear {
            row.to_vec()
        } else {
            let c = eta[k][0].conj();
            row.iter().map(|x| c * x).collect()
        }
    };
    let mut zeta = vec![Vec::new(); n];
    let terminal = integrand(n - 1);
    let mut acc = vec![C64::new(0.0, 0.0); terminal.len()];
    let mut next = terminal.clone();
    zeta[n - 1] = terminal.clone();
    for k in (0..n - 1).rev() {
        let cur = integrand(k);
        if nu != 0.0 {
            for ((a, c), x) in acc.iter_mut().zip(&cur).zip(&next) {
                *a += (c + x) * (0.5 * dt);
            }
        }
        zeta[k] = terminal
            .iter()
            .zip(&acc)
            .map(|(t, a)| t + a * nu)
            .collect();
        next = cur;
    }
    zeta
}

/// Midpoint-rule variant of the integral in [`zeta_series`] on a grid with
/// an odd number of points, using pairs of steps; for quadrature checks.
pub fn zeta_series_midpoint(eta: &[Vec<C64>], phi: &[ComplexMatrix], nu: f64, dt: f64) -> Vec<Vec<C64>> {
    let n = phi.len();
    let integrand = |k: usize| -> Vec<C64> {
        let c = eta[k][0].conj();
        phi[k].row(0).iter().map(|x| c * x).collect()
    };
    let terminal = integrand(n - 1);
    let mut zeta = vec![Vec::new(); n];
    let mut acc = vec![C64::new(0.0, 0.0); terminal.len()];
    zeta[n - 1] = terminal.clone();
    let mut k = n - 1;
    while k >= 2 {
        let mid = integrand(k - 1);
        for (a, m) in acc.iter_mut().zip(&mid) {
            *a += m * (2.0 * dt);
        }
        k -= 2;
        zeta[k] = terminal.iter().zip(&acc).map(|(t, a)| t + a * nu).collect();
    }
    zeta
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    dt * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Fidelity cost of one realization: −μ(F_T + ν∫F) in state mode and
/// −μ Re(η₀(T) + ν∫η₀) in gate mode.
pub fn j3_of_eta(eta: &[Vec<C64>], mode: EtaMode, weights: &CostWeights, dt: f64) -> f64 {
    let (last, integral) = fidelity_terms(eta, mode, dt);
    -weights.mu * (last + weights.nu * integral)
}

/// Terminal fidelity and its time integral along one η series.
pub fn fidelity_terms(eta: &[Vec<C64>], mode: EtaMode, dt: f64) -> (f64, f64) {
    let values: Vec<f64> = match mode {
        EtaMode::State => eta.iter().map(|e| e[0].norm_sqr()).collect(),
        EtaMode::Gate => eta.iter().map(|e| e[0].re).collect(),
    };
    (*values.last().expect("non-empty"), trapezoid(&values, dt))
}

fn adjoint_gradient(
    system: &TransferSystem,
    pulse: &ControlPulse,
    paths: &[NoisePath],
    traj: &EtaTrajectory,
    weights: &CostWeights,
    mode: EtaMode,
    scaled: Option<ScaledForm>,
) -> Vec<Vec<f64>> {
    let dt = pulse.dt();
    let steps = pulse.steps();
    let linear = mode == EtaMode::Gate;
    // ∂F/∂η contributes 2Re[...] for the quadratic state cost.
    let factor = if linear { 1.0 } else { 2.0 };
    let zeta = zeta_series(&traj.eta, &traj.phi, weights.nu, dt, linear);
    let rows: Vec<Vec<C64>> = zeta
        .iter()
        .zip(&traj.psi)
        .map(|(z, psi)| psi.left_apply(z))
        .collect();
    let mut grad = vec![vec![0.0; steps]; system.a.len()];
    for (j, a) in system.a.iter().enumerate() {
        let contrib: Vec<f64> = (0..=steps)
            .map(|i| {
                let v = a.apply(&traj.eta[i]);
                rows[i].iter().zip(&v).map(|(r, x)| r * x).sum::<C64>().re
            })
            .collect();
        for i in 0..steps {
            grad[j][i] = -weights.mu * factor * 0.5 * (contrib[i] + contrib[i + 1]);
        }
    }
    if let Some(form) = scaled {
        for (l, b) in system.b.iter().enumerate() {
            let Some(j) = system.couplings[l] else { continue };
            let p = &paths[l];
            let btb = &system.btb[l];
            for i in 0..steps {
                let z = pulse.value(j, i);
                let w = z.abs().max(crate::sse::EPS_Z);
                let sign = if z < 0.0 { -1.0 } else { 1.0 };
                let be = b.apply(&traj.eta[i]);
                let dot = |row: &[C64], v: &[C64]| -> C64 { row.iter().zip(v).map(|(r, x)| r * x).sum() };
                // ∂(γ√w)/∂z · ΔW / dt
                let dw = 0.5 * sign * p.gamma / w.sqrt() * p.dw[i] / dt;
                let term = match form {
                    // Itô form: the B†B weight derivative cancels in expectation
                    // against the correlation of ΔW with the post-step adjoint.
                    ScaledForm::WienerOnly => dot(&rows[i], &be) * dw,
                    ScaledForm::Pathwise => {
                        let bbe = btb.apply(&traj.eta[i]);
                        dot(&rows[i + 1], &be) * dw
                            + dot(&rows[i], &bbe) * (-0.5 * sign * p.dqv[i] / dt)
                            + dot(&rows[i], &be) * (0.5 * sign / w.sqrt() * p.drift[i])
                    }
                };
                grad[j][i] += -weights.mu * factor * term.re;
            }
        }
    }
    grad
}

fn sample_from(
    system: &TransferSystem,
    pulse: &ControlPulse,
    paths: &[NoisePath],
    eta0: &EtaState,
    weights: &CostWeights,
    scheme: Scheme,
    scaled: Option<ScaledForm>,
) -> Result<GradientSample> {
    let traj = propagate_eta(system, pulse, paths, eta0, scheme, EtaOptions::default())?;
    let (fidelity, integral) = fidelity_terms(&traj.eta, eta0.mode, pulse.dt());
    let j3 = -weights.mu * (fidelity + weights.nu * integral);
    let grad = if weights.mu == 0.0 {
        vec![vec![0.0; pulse.steps()]; system.a.len()]
    } else {
        adjoint_gradient(system, pulse, paths, &traj, weights, eta0.mode, scaled)
    };
    Ok(GradientSample {
        grad,
        seed: paths.first().map(|p| p.seed).unwrap_or(0),
        j1: f64::NAN,
        j2: pulse_cost(pulse, weights.lambda),
        j3,
        fidelity,
    })
}

/// Per-trial gradient of J₃ = −μ(F_T + ν∫F) for noise independent of the
/// controls: g_j(t) = −2μ Re[ζ_t Ψ_t A_j η_t].
pub fn fvqoc_gradient_fixed(
    system: &TransferSystem,
    pulse: &ControlPulse,
    noise_paths: &[NoisePath],
    eta0: &EtaState,
    weights: &CostWeights,
    scheme: Scheme,
) -> Result<GradientSample> {
    sample_from(system, pulse, noise_paths, eta0, weights, scheme, None)
}

/// Per-trial gradient of J₃ when the noise on channel l scales as
/// √|z_{c(l)}|.
pub fn fvqoc_gradient_scaled(
    system: &TransferSystem,
    pulse: &ControlPulse,
    noise_paths: &[NoisePath],
    eta0: &EtaState,
    weights: &CostWeights,
    scheme: Scheme,
    form: ScaledForm,
) -> Result<GradientSample> {
    if system.scaling != ScalingMode::Scaled {
        return Err(Error::config("problem.scaling", "scaled gradient needs a scaled-noise system"));
    }
    if noise_paths.iter().any(|p| p.dw.len() != pulse.steps()) {
        return Err(Error::config("noise", "Wiener increments missing from noise paths"));
    }
    sample_from(system, pulse, noise_paths, eta0, weights, scheme, Some(form))
}

/// Per-trial gradient of the gate fidelity cost −μ Re(η₀(T) + ν∫η₀) with the
/// gate-mode initial vector.
pub fn gate_fidelity_gradient(
    system: &TransferSystem,
    pulse: &ControlPulse,
    noise_paths: &[NoisePath],
    weights: &CostWeights,
    scheme: Scheme,
) -> Result<GradientSample> {
    let eta0 = crate::transfer::gate_eta_init(system.basis.n_qubits())?;
    let scaled = (system.scaling == ScalingMode::Scaled).then_some(ScaledForm::Pathwise);
    sample_from(system, pulse, noise_paths, &eta0, weights, scheme, scaled)
}

/// J₁ = −|Tr[U_targ† V_T]|² and its exact gradient for the piecewise
/// constant pulse.
pub fn gate_overlap_gradient(
    dynamics: &Dynamics,
    u_targ: &ComplexMatrix,
    pulse: &ControlPulse,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let sim = Simulator::new(dynamics, pulse)?;
    let v = sim.propagate_v();
    let steps = pulse.steps();
    let dt = pulse.dt();
    let ut = u_targ.adjoint();
    let tau = ut.trace_product(&v[steps]);
    // Γ_{i} = V_T V_{i}^{-1}: backward products of step unitaries
    let mut tail = vec![ComplexMatrix::identity(dynamics.dim()); steps + 1];
    for i in (0..steps).rev() {
        tail[i] = tail[i + 1].matmul(sim.step_unitary(i));
    }
    let frechet = frechet_factors(dynamics, pulse);
    let mut grad = vec![vec![0.0; steps]; dynamics.controls.len()];
    for i in 0..steps {
        let left = ut.matmul(&tail[i + 1]);
        for j in 0..dynamics.controls.len() {
            let d = left.matmul(&frechet[i][j]).trace_product(&v[i]);
            grad[j][i] = -2.0 * (tau.conj() * d).re / dt;
        }
    }
    Ok((-tau.norm_sqr(), grad))
}

/// −|Tr[U_targ† V_T]|²
pub fn gate_overlap_cost(dynamics: &Dynamics, u_targ: &ComplexMatrix, pulse: &ControlPulse) -> Result<f64> {
    let sim = Simulator::new(dynamics, pulse)?;
    let v = sim.propagate_v();
    Ok(-u_targ.adjoint().trace_product(v.last().expect("non-empty")).norm_sqr())
}

/// Ensemble estimate of ∇J₃ over `trials` realizations seeded by
/// `trial_seed(seed, i)`.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    pub j3_mean: f64,
    pub j3_stderr: f64,
    pub fidelity_mean: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FidelityCost<'a> {
    pub dynamics: &'a Dynamics,
    pub system: &'a TransferSystem,
    pub eta0: &'a EtaState,
    pub weights: CostWeights,
    pub scheme: Scheme,
    pub scaled_form: ScaledForm,
}

impl FidelityCost<'_> {
    fn paths(&self, pulse: &ControlPulse, seed: u64) -> Result<Vec<NoisePath>> {
        self.dynamics.sample_noise(pulse.dt(), pulse.steps(), seed)
    }

    pub fn sample(&self, pulse: &ControlPulse, seed: u64) -> Result<GradientSample> {
        let paths = self.paths(pulse, seed)?;
        let scaled = (self.system.scaling == ScalingMode::Scaled).then_some(self.scaled_form);
        let mut s = sample_from(self.system, pulse, &paths, self.eta0, &self.weights, self.scheme, scaled)?;
        s.seed = seed;
        Ok(s)
    }

    pub fn gradient(&self, pulse: &ControlPulse, trials: usize, seed: u64) -> Result<GradientEstimate> {
        let acc = par_accumulate(trials, |i| {
            let s = self.sample(pulse, trial_seed(seed, i as u64))?;
            let mut flat = s.grad.concat();
            flat.push(s.j3);
            flat.push(s.fidelity);
            Ok(flat)
        })?;
        Ok(split_estimate(&acc, pulse))
    }

    /// J₃ of the single realization drawn from `seed`, η-only propagation.
    pub fn j3_sample(&self, pulse: &ControlPulse, seed: u64) -> Result<f64> {
        let paths = self.paths(pulse, seed)?;
        let traj = propagate_eta(self.system, pulse, &paths, self.eta0, self.scheme, EtaOptions::eta_only())?;
        Ok(j3_of_eta(&traj.eta, self.eta0.mode, &self.weights, pulse.dt()))
    }

    /// Per-trial J₃ values, η-only propagation.
    pub fn j3_values(&self, pulse: &ControlPulse, trials: usize, seed: u64) -> Result<Accumulator> {
        par_accumulate(trials, |i| Ok(vec![self.j3_sample(pulse, trial_seed(seed, i as u64))?]))
    }

    pub fn j3(&self, pulse: &ControlPulse, trials: usize, seed: u64) -> Result<(f64, f64)> {
        let acc = self.j3_values(pulse, trials, seed)?;
        Ok((acc.mean()[0], acc.stderr()[0]))
    }
}

fn split_estimate(acc: &Accumulator, pulse: &ControlPulse) -> GradientEstimate {
    let mean = acc.mean();
    let stderr = acc.stderr();
    let steps = pulse.steps();
    let channels = pulse.n_channels();
    let chunk = |v: &[f64]| -> Vec<Vec<f64>> { (0..channels).map(|j| v[j * steps..(j + 1) * steps].to_vec()).collect() };
    GradientEstimate {
        mean: chunk(&mean),
        stderr: chunk(&stderr),
        j3_mean: mean[channels * steps],
        j3_stderr: stderr[channels * steps],
        fidelity_mean: mean[channels * steps + 1],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, sigma_x, sigma_y, sigma_z, ZERO};
    use crate::noise::NoiseSpec;
    use crate::sse::NoiseChannel;

    fn ket0() -> Vec<C64> {
        vec![C64::new(1.0, 0.0), ZERO]
    }

    fn full_control() -> Dynamics {
        Dynamics::new(vec![sigma_x(), sigma_y(), sigma_z()], vec![]).unwrap()
    }

    fn wavy_pulse(steps: usize, dt: f64) -> ControlPulse {
        let ch = (0..3)
            .map(|j| (0..steps).map(|i| 0.3 * ((i as f64 * 0.37 + j as f64).sin()) + 0.1 * j as f64).collect())
            .collect();
        ControlPulse::new(dt, ch).unwrap()
    }

    #[test]
    fn identity_target_gives_pure_regularizer() {
        let d = full_control();
        let p = wavy_pulse(20, 0.05);
        let g = vqoc_gradient(&d, &ComplexMatrix::identity(2), &p, &ket0(), 0.1).unwrap();
        for j in 0..3 {
            for i in 0..20 {
                assert!((g[j][i] - 0.1 * p.value(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn commuting_generator_has_no_energy_gradient() {
        let d = Dynamics::new(vec![sigma_x()], vec![]).unwrap();
        let p = ControlPulse::new(0.05, vec![(0..20).map(|i| 0.1 * i as f64).collect()]).unwrap();
        let g = vqoc_gradient(&d, &sigma_x(), &p, &ket0(), 0.0).unwrap();
        assert!(g[0].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vqoc_matches_finite_difference() {
        let d = full_control();
        let h = random_hermitian(2, 3).unwrap();
        let p = wavy_pulse(25, 0.04);
        let lambda = 0.1;
        let g = vqoc_gradient(&d, &h, &p, &ket0(), lambda).unwrap();
        let cost = |q: &ControlPulse| energy_cost(&d, &h, q, &ket0()).unwrap() + pulse_cost(q, lambda);
        let eps = 1e-5;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..3 {
            for i in 0..25 {
                let mut plus = p.clone();
                plus.set(j, i, p.value(j, i) + eps);
                let mut minus = p.clone();
                minus.set(j, i, p.value(j, i) - eps);
                let fd = (cost(&plus) - cost(&minus)) / (2.0 * eps * p.dt());
                num += (fd - g[j][i]).powi(2);
                den += fd * fd;
            }
        }
        assert!((num / den).sqrt() < 1e-6, "{}", (num / den).sqrt());
    }

    #[test]
    fn zeta_limits() {
        let phi: Vec<ComplexMatrix> = (0..11).map(|_| ComplexMatrix::identity(4)).collect();
        let eta: Vec<Vec<C64>> = (0..11).map(|_| vec![C64::new(1.0, 0.0), ZERO, ZERO, ZERO]).collect();
        let z0 = zeta_series(&eta, &phi, 0.0, 0.1, false);
        assert!(z0.iter().all(|z| z == &z0[10]));
        let z1 = zeta_series(&eta, &phi, 1.0, 0.1, false);
        for (i, z) in z1.iter().enumerate() {
            let t = 0.1 * i as f64;
            assert!((z[0].re - (1.0 + (1.0 - t))).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_overlap_matches_finite_difference() {
        let d = full_control();
        let u = crate::linalg::haar_random_unitary(2, 17).unwrap();
        let p = wavy_pulse(20, 0.05);
        let (_, g) = gate_overlap_gradient(&d, &u, &p).unwrap();
        let eps = 1e-5;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..3 {
            for i in 0..20 {
                let mut plus = p.clone();
                plus.set(j, i, p.value(j, i) + eps);
                let mut minus = p.clone();
                minus.set(j, i, p.value(j, i) - eps);
                let fd = (gate_overlap_cost(&d, &u, &plus).unwrap() - gate_overlap_cost(&d, &u, &minus).unwrap())
                    / (2.0 * eps * p.dt());
                num += (fd - g[j][i]).powi(2);
                den += fd * fd;
            }
        }
        assert!((num / den).sqrt() < 1e-6);
    }

    #[test]
    fn noiseless_fidelity_gradient_vanishes() {
        let noise = [sigma_x(), sigma_y(), sigma_z()]
            .into_iter()
            .map(|s| NoiseChannel::new(s, NoiseSpec::ou(0.0, 0.1)).unwrap())
            .collect();
        let d = Dynamics::new(vec![sigma_x(), sigma_y(), sigma_z()], noise).unwrap();
        let sys = TransferSystem::from_dynamics(&d).unwrap();
        let p = wavy_pulse(20, 0.05);
        let eta0 = EtaState::from_states(&sys.basis, &ket0(), &ket0()).unwrap();
        let paths = d.sample_noise(0.05, 20, 4).unwrap();
        let w = CostWeights::new(0.1, 250.0, 1.0).unwrap();
        let s = fvqoc_gradient_fixed(&sys, &p, &paths, &eta0, &w, Scheme::Platen).unwrap();
        assert!(s.grad.iter().flatten().all(|g| g.abs() < 1e-9));
        let w0 = CostWeights::new(0.1, 0.0, 1.0).unwrap();
        let s0 = fvqoc_gradient_fixed(&sys, &p, &paths, &eta0, &w0, Scheme::Platen).unwrap();
        assert!(s0.grad.iter().flatten().all(|g| *g == 0.0));
    }
}

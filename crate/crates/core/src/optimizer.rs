//! The descent loop: Monte Carlo gradient estimation, pulse updates,
//! μ-schedules, error evaluation and randomized benchmark problems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{
    gate_overlap_cost, gate_overlap_gradient, energy_cost, pulse_cost, vqoc_gradient, CostWeights, FidelityCost,
    ScaledForm,
};
use crate::linalg::{eigh, haar_random_state, inner, random_hermitian, sigma_x, sigma_y, sigma_z, ComplexMatrix, C64};
use crate::noise::NoiseSpec;
use crate::rng::{rng_from_seed, stream_seed, trial_seed};
use crate::sde::Scheme;
use crate::sse::{ControlPulse, Dynamics, NoiseChannel, ScalingMode, Simulator, SseOptions};
use crate::stats::{mean_stderr, par_accumulate};
use crate::transfer::{gate_eta_init, EtaState, TransferSystem};

// Seed sub-streams derived from the master seed.
const STREAM_INIT: u64 = 0;
const STREAM_EVAL: u64 = 1;
const STREAM_HISTORY: u64 = 2;
const STREAM_MU: u64 = 3;
const STREAM_GRADIENT: u64 = 100;

/// Armijo constant used by the packaged experiments. With c = ½ a step on a
/// locally quadratic cost is accepted only if it does not overshoot the
/// minimum along the gradient, which suppresses zigzagging at large α.
pub const DEFAULT_SUFFICIENT_DECREASE: f64 = 0.5;

#[derive(Clone, Debug)]
pub enum Target {
    /// Ground-state preparation for H_targ.
    Hamiltonian(ComplexMatrix),
    /// Gate synthesis towards U_targ.
    Unitary(ComplexMatrix),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// μ = 0: noise-agnostic descent.
    Vqoc,
    /// ν = 0: terminal fidelity only.
    FvqocEnd,
    /// ν as configured: terminal plus time-integrated fidelity.
    FvqocContinuous,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Vqoc, Method::FvqocEnd, Method::FvqocContinuous];

    pub fn name(self) -> &'static str {
        match self {
            Method::Vqoc => "vqoc",
            Method::FvqocEnd => "fvqoc_end",
            Method::FvqocContinuous => "fvqoc_continuous",
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    pub dynamics: Dynamics,
    pub target: Target,
    /// Initial state for state preparation; ignored for gate targets.
    pub phi0: Vec<C64>,
    pub steps: usize,
    pub dt: f64,
    pub weights: CostWeights,
    /// Iteration index from which μ is set to zero.
    pub mu_off_after: Option<usize>,
    pub iterations: usize,
    /// Monte Carlo trials per gradient estimate.
    pub trials: usize,
    /// Trials for the final error evaluation.
    pub eval_trials: usize,
    pub alpha: f64,
    pub max_backtracks: usize,
    /// Armijo constant c: a step is accepted when the cost drops by at least
    /// c·α·‖g‖². Zero accepts any decrease.
    pub sufficient_decrease: f64,
    /// z⁽⁰⁾ ~ U[−a, a] per grid point.
    pub init_amplitude: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub scaled_form: ScaledForm,
}

impl OptimizationProblem {
    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.weights.validate()?;
        if self.steps == 0 || !(self.dt > 0.0) {
            return Err(Error::config("problem.grid", "steps must be >= 1 and dt > 0"));
        }
        if self.trials == 0 || self.eval_trials == 0 {
            return Err(Error::config("problem.trials", "trial counts must be >= 1"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::config("problem.alpha", "step size must be > 0"));
        }
        if !(0.0..1.0).contains(&self.sufficient_decrease) {
            return Err(Error::config("problem.schedule.sufficient_decrease", "must lie in [0, 1)"));
        }
        let d = self.dynamics.dim();
        match &self.target {
            Target::Hamiltonian(h) => {
                if h.rows() != d || !h.is_hermitian(1e-10) {
                    return Err(Error::config("problem.target", "target Hamiltonian must be Hermitian and match the system"));
                }
                if self.phi0.len() != d {
                    return Err(Error::config("problem.phi0", "initial state dimension mismatch"));
                }
            }
            Target::Unitary(u) => {
                if u.rows() != d || !u.is_unitary(1e-10) {
                    return Err(Error::config("problem.target", "target gate must be unitary and match the system"));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Copy with the cost weights of `method`.
    pub fn for_method(&self, method: Method) -> Self {
        let mut p = self.clone();
        match method {
            Method::Vqoc => p.weights.mu = 0.0,
            Method::FvqocEnd => p.weights.nu = 0.0,
            Method::FvqocContinuous => {}
        }
        p
    }

    pub fn initial_pulse(&self) -> ControlPulse {
        let mut rng = rng_from_seed(stream_seed(self.seed, STREAM_INIT));
        let a = self.init_amplitude;
        let channels = (0..self.dynamics.controls.len())
            .map(|_| (0..self.steps).map(|_| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 }).collect())
            .collect();
        ControlPulse::with_steps(self.dt, self.steps, channels).expect("grid validated")
    }

    fn eta0(&self, system: &TransferSystem) -> Result<EtaState> {
        match &self.target {
            Target::Hamiltonian(_) => EtaState::from_states(&system.basis, &self.phi0, &self.phi0),
            Target::Unitary(_) => gate_eta_init(system.basis.n_qubits()),
        }
    }

    /// J₁ + J₂ and its exact gradient.
    pub fn deterministic_cost(&self, pulse: &ControlPulse) -> Result<(f64, f64, Vec<Vec<f64>>)> {
        let lambda = self.weights.lambda;
        match &self.target {
            Target::Hamiltonian(h) => {
                let j1 = energy_cost(&self.dynamics, h, pulse, &self.phi0)?;
                let g = vqoc_gradient(&self.dynamics, h, pulse, &self.phi0, lambda)?;
                Ok((j1, pulse_cost(pulse, lambda), g))
            }
            Target::Unitary(u) => {
                let (j1, mut g) = gate_overlap_gradient(&self.dynamics, u, pulse)?;
                for (gj, zj) in g.iter_mut().zip(pulse.channels()) {
                    gj.iter_mut().zip(zj).for_each(|(g, z)| *g += lambda * z);
                }
                Ok((j1, pulse_cost(pulse, lambda), g))
            }
        }
    }

    fn deterministic_value(&self, pulse: &ControlPulse) -> Result<f64> {
        let j1 = match &self.target {
            Target::Hamiltonian(h) => energy_cost(&self.dynamics, h, pulse, &self.phi0)?,
            Target::Unitary(u) => gate_overlap_cost(&self.dynamics, u, pulse)?,
        };
        Ok(j1 + pulse_cost(pulse, self.weights.lambda))
    }

    /// Smallest eigenvalue of the target Hamiltonian.
    pub fn target_energy(&self) -> Result<f64> {
        match &self.target {
            Target::Hamiltonian(h) => Ok(eigh(h)?.0[0]),
            Target::Unitary(_) => Err(Error::Unsupported("target energy of a gate target".into())),
        }
    }
}

/// Monte Carlo error estimate. For Hamiltonian targets `error` is
/// E[ψ_T†H_targψ_T] − E_targ and `fidelity` is E|φ_T†ψ_T|². For gate targets
/// `error` is 1 − Re Tr[V_T†U_T]/2^N and `fidelity` its complement.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub error: f64,
    pub stderr: f64,
    pub fidelity: f64,
}

pub fn evaluate_error(problem: &OptimizationProblem, pulse: &ControlPulse, trials: usize, seed: u64) -> Result<ErrorEstimate> {
    let sim = Simulator::new(&problem.dynamics, pulse)?;
    let opts = SseOptions::default();
    let acc = match &problem.target {
        Target::Hamiltonian(h) => {
            let e_targ = problem.target_energy()?;
            let phi = sim.propagate_phi(&problem.phi0)?;
            let phi_t = phi.last().expect("non-empty").clone();
            par_accumulate(trials, |i| {
                let paths = sim.sample_noise(trial_seed(seed, i as u64))?;
                let mut psi_t = Vec::new();
                sim.evolve(ComplexMatrix::column(&problem.phi0), problem.scheme, &paths, opts, |k, y| {
                    if k == pulse.steps() {
                        psi_t = y.as_slice().to_vec();
                    }
                })?;
                let energy = inner(&psi_t, &h.apply(&psi_t)).re;
                Ok(vec![energy - e_targ, inner(&phi_t, &psi_t).norm_sqr()])
            })?
        }
        Target::Unitary(_) => {
            let d = problem.dynamics.dim() as f64;
            par_accumulate(trials, |i| {
                let paths = sim.sample_noise(trial_seed(seed, i as u64))?;
                let rec = sim.unitary_pair(problem.scheme, paths, opts)?;
                let f = rec.trace_q().last().expect("non-empty").re / d;
                Ok(vec![1.0 - f, f])
            })?
        }
    };
    let (m, s) = (acc.mean(), acc.stderr());
    Ok(ErrorEstimate { error: m[0], stderr: s[0], fidelity: m[1] })
}

/// Variance over `n_states` Haar-random inputs of the per-input mean state
/// fidelity E|φ₀†V_T†U_Tφ₀|², together with its mean.
pub fn gate_state_fidelity_spread(
    problem: &OptimizationProblem,
    pulse: &ControlPulse,
    trials: usize,
    n_states: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let sim = Simulator::new(&problem.dynamics, pulse)?;
    let d = problem.dynamics.dim();
    let states: Vec<Vec<C64>> = (0..n_states)
        .map(|s| haar_random_state(d, stream_seed(seed, 1000 + s as u64)))
        .collect::<Result<_>>()?;
    let acc = par_accumulate(trials, |i| {
        let paths = sim.sample_noise(trial_seed(seed, i as u64))?;
        let rec = sim.unitary_pair(problem.scheme, paths, SseOptions::default())?;
        let q = rec.q(pulse.steps());
        Ok(states.iter().map(|s| inner(s, &q.apply(s)).norm_sqr()).collect())
    })?;
    let per_state = acc.mean();
    let n = per_state.len() as f64;
    let mean = per_state.iter().sum::<f64>() / n;
    let var = per_state.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, var))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mu: f64,
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    pub cost: f64,
    /// Energy error (state targets) or gate infidelity, Monte Carlo mean.
    pub error_mean: f64,
    pub error_stderr: f64,
    pub fidelity_mean: f64,
    pub gradient_norm: f64,
    /// Step size accepted after backtracking; 0 when no step decreased the cost.
    pub step: f64,
    /// Pulse after this iteration's update.
    pub pulse: ControlPulse,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunHistory {
    pub method: Option<Method>,
    pub records: Vec<IterationRecord>,
    pub final_pulse: ControlPulse,
    pub final_error: ErrorEstimate,
}

impl RunHistory {
    /// CSV with one row per iteration, 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::sse::fmt_f64;
        writeln!(w, "iteration,mu,j1,j2,j3,cost,error_mean,error_stderr,fidelity_mean,gradient_norm,step")?;
        for r in &self.records {
            let vals = [r.mu, r.j1, r.j2, r.j3, r.cost, r.error_mean, r.error_stderr, r.fidelity_mean, r.gradient_norm, r.step];
            let cols: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{},{}", r.iteration, cols.join(","))?;
        }
        Ok(())
    }

    /// CSV of the final pulse, one row per grid point.
    pub fn write_pulse_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::sse::fmt_f64;
        let p = &self.final_pulse;
        let header: Vec<String> = (0..p.n_channels()).map(|j| format!("z{j}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..p.steps() {
            let cols: Vec<String> = (0..p.n_channels()).map(|j| fmt_f64(p.value(j, i))).collect();
            writeln!(w, "{},{}", fmt_f64(i as f64 * p.dt()), cols.join(","))?;
        }
        Ok(())
    }
}

struct Objective<'a> {
    problem: &'a OptimizationProblem,
    system: Option<TransferSystem>,
    eta0: Option<EtaState>,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a OptimizationProblem) -> Result<Self> {
        if problem.dynamics.noise.is_empty() || problem.weights.mu == 0.0 {
            return Ok(Self { problem, system: None, eta0: None });
        }
        let system = TransferSystem::from_dynamics(&problem.dynamics)?;
        let eta0 = problem.eta0(&system)?;
        Ok(Self { problem, system: Some(system), eta0: Some(eta0) })
    }

    fn fidelity_cost(&self, mu: f64) -> Option<FidelityCost<'_>> {
        let (system, eta0) = (self.system.as_ref()?, self.eta0.as_ref()?);
        (mu > 0.0).then(|| FidelityCost {
            dynamics: &self.problem.dynamics,
            system,
            eta0,
            weights: CostWeights { mu, ..self.problem.weights },
            scheme: self.problem.scheme,
            scaled_form: self.problem.scaled_form,
        })
    }

    /// (J₁, J₂, J₃, gradient) with J₃ estimated on the trial seeds of `seed`.
    fn value_and_gradient(&self, pulse: &ControlPulse, mu: f64, seed: u64) -> Result<(f64, f64, f64, Vec<Vec<f64>>)> {
        let (j1, j2, mut g) = self.problem.deterministic_cost(pulse)?;
        let mut j3 = 0.0;
        if let Some(fc) = self.fidelity_cost(mu) {
            let est = fc.gradient(pulse, self.problem.trials, seed)?;
            j3 = est.j3_mean;
            for (gj, ej) in g.iter_mut().zip(&est.mean) {
                gj.iter_mut().zip(ej).for_each(|(a, b)| *a += b);
            }
        }
        Ok((j1, j2, j3, g))
    }

    fn value(&self, pulse: &ControlPulse, mu: f64, seed: u64) -> Result<f64> {
        let mut v = self.problem.deterministic_value(pulse)?;
        if let Some(fc) = self.fidelity_cost(mu) {
            v += fc.j3(pulse, self.problem.trials, seed)?.0;
        }
        Ok(v)
    }
}

fn step_pulse(pulse: &ControlPulse, grad: &[Vec<f64>], alpha: f64) -> ControlPulse {
    let channels = pulse
        .channels()
        .iter()
        .zip(grad)
        .map(|(z, g)| z.iter().zip(g).map(|(z, g)| z - alpha * g).collect())
        .collect();
    ControlPulse::with_steps(pulse.dt(), pulse.steps(), channels).expect("same grid")
}

/// Gradient descent with backtracking. Each iteration estimates the
/// gradient on a fresh set of trial seeds and reuses those seeds for every
/// candidate step, so step acceptance compares costs under common random
/// numbers.
pub fn optimize(problem: &OptimizationProblem) -> Result<RunHistory> {
    optimize_from(problem, problem.initial_pulse())
}

pub fn optimize_from(problem: &OptimizationProblem, z0: ControlPulse) -> Result<RunHistory> {
    problem.validate()?;
    problem.dynamics.check_pulse(&z0)?;
    let objective = Objective::new(problem)?;
    let history_seed = stream_seed(problem.seed, STREAM_HISTORY);
    let mut z = z0;
    let mut records = Vec::with_capacity(problem.iterations);
    // Halvings persist: each iteration starts from the last accepted step,
    // until the μ-schedule changes the objective.
    let mut alpha_start = problem.alpha;
    let mut prev_mu = problem.weights.mu;
    for k in 0..problem.iterations {
        let mu = match problem.mu_off_after {
            Some(off) if k >= off => 0.0,
            _ => problem.weights.mu,
        };
        if mu != prev_mu {
            alpha_start = problem.alpha;
            prev_mu = mu;
        }
        let seed = stream_seed(problem.seed, STREAM_GRADIENT + k as u64);
        let (j1, j2, j3, grad) = objective.value_and_gradient(&z, mu, seed)?;
        let cost = j1 + j2 + j3;
        if !cost.is_finite() {
            return Err(Error::NonFiniteCost { iteration: k });
        }
        let stats = evaluate_error(problem, &z, problem.trials, history_seed)?;
        let gradient_norm = (grad.iter().flatten().map(|g| g * g).sum::<f64>() * problem.dt).sqrt();
        let mut alpha = alpha_start;
        let mut accepted = 0.0;
        for _ in 0..=problem.max_backtracks {
            let candidate = step_pulse(&z, &grad, alpha);
            let value = objective.value(&candidate, mu, seed)?;
            let required = problem.sufficient_decrease * alpha * gradient_norm * gradient_norm;
            if value.is_finite() && value < cost - required {
                z = candidate;
                accepted = alpha;
                alpha_start = alpha;
                break;
            }
            alpha *= 0.5;
        }
        records.push(IterationRecord {
            iteration: k,
            mu,
            j1,
            j2,
            j3,
            cost,
            error_mean: stats.error,
            error_stderr: stats.stderr,
            fidelity_mean: stats.fidelity,
            gradient_norm,
            step: accepted,
            pulse: z.clone(),
        });
    }
    let final_error = evaluate_error(problem, &z, problem.eval_trials, stream_seed(problem.seed, STREAM_EVAL))?;
    Ok(RunHistory { method: None, records, final_pulse: z, final_error })
}

pub fn optimize_method(problem: &OptimizationProblem, method: Method) -> Result<RunHistory> {
    let mut h = optimize(&problem.for_method(method))?;
    h.method = Some(method);
    Ok(h)
}

/// μ = ‖∇J₁(z⁽⁰⁾)‖ / ‖∇J₃(z⁽⁰⁾)‖ with J₃ taken at μ = 1.
pub fn mu_autoscale(problem: &OptimizationProblem, z0: &ControlPulse) -> Result<f64> {
    let unit = OptimizationProblem {
        weights: CostWeights { lambda: 0.0, mu: 1.0, ..problem.weights },
        ..problem.clone()
    };
    let (_, _, g1) = unit.deterministic_cost(z0)?;
    let objective = Objective::new(&unit)?;
    let Some(fc) = objective.fidelity_cost(1.0) else {
        return Err(Error::ZeroGradient);
    };
    let g3 = fc.gradient(z0, problem.trials, stream_seed(problem.seed, STREAM_MU))?.mean;
    mu_ratio(&g1, &g3)
}

/// ‖a‖₂ / ‖b‖₂, rejecting a vanishing denominator.
pub fn mu_ratio(g1: &[Vec<f64>], g3: &[Vec<f64>]) -> Result<f64> {
    let n1 = g1.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let n3 = g3.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if !(n3 > 1e-12 * n1.max(1.0)) {
        return Err(Error::ZeroGradient);
    }
    Ok(n1 / n3)
}

/// Template for randomized benchmark problems and the fixed-noise
/// single-qubit experiment: full σX, σY, σZ control, OU noise on each axis.
#[derive(Clone, Debug)]
pub struct ProblemTemplate {
    pub k: f64,
    pub weights: CostWeights,
    pub mu_off_after: Option<usize>,
    pub iterations: usize,
    pub steps: usize,
    pub dt: f64,
    pub trials: usize,
    pub eval_trials: usize,
    pub alpha: f64,
    pub max_backtracks: usize,
    pub sufficient_decrease: f64,
    pub init_amplitude: f64,
    pub scheme: Scheme,
}

impl Default for ProblemTemplate {
    fn default() -> Self {
        Self {
            k: 0.1,
            weights: CostWeights { lambda: 0.1, mu: 250.0, nu: 1.0 },
            mu_off_after: Some(10),
            iterations: 25,
            steps: 100,
            dt: 0.01,
            trials: 200,
            eval_trials: 200,
            alpha: 1.0,
            max_backtracks: 8,
            sufficient_decrease: DEFAULT_SUFFICIENT_DECREASE,
            init_amplitude: 0.1,
            scheme: Scheme::Platen,
        }
    }
}

impl ProblemTemplate {
    pub fn single_qubit(&self, h_targ: ComplexMatrix, gammas: [f64; 3], seed: u64) -> Result<OptimizationProblem> {
        let noise = [sigma_x(), sigma_y(), sigma_z()]
            .into_iter()
            .zip(gammas)
            .map(|(s, g)| NoiseChannel::new(s, NoiseSpec::ou(g, self.k)))
            .collect::<Result<Vec<_>>>()?;
        let dynamics = Dynamics::new(vec![sigma_x(), sigma_y(), sigma_z()], noise)?;
        let p = OptimizationProblem {
            dynamics,
            target: Target::Hamiltonian(h_targ),
            phi0: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            steps: self.steps,
            dt: self.dt,
            weights: self.weights,
            mu_off_after: self.mu_off_after,
            iterations: self.iterations,
            trials: self.trials,
            eval_trials: self.eval_trials,
            alpha: self.alpha,
            max_backtracks: self.max_backtracks,
            sufficient_decrease: self.sufficient_decrease,
            init_amplitude: self.init_amplitude,
            seed,
            scheme: self.scheme,
            scaled_form: ScaledForm::default(),
        };
        p.validate()?;
        Ok(p)
    }
}

/// Random Hermitian target and γ_i ~ U[0, noise_bound] on each Pauli axis.
pub fn random_problem(seed: u64, noise_bound: f64, template: &ProblemTemplate) -> Result<OptimizationProblem> {
    if !(noise_bound > 0.0) {
        return Err(Error::InvalidArgument(format!("noise bound must be > 0, got {noise_bound}")));
    }
    let h = random_hermitian(2, stream_seed(seed, 10))?;
    let gammas = random_gammas(seed, noise_bound);
    template.single_qubit(h, gammas, seed)
}

pub fn random_gammas(seed: u64, noise_bound: f64) -> [f64; 3] {
    let mut rng = rng_from_seed(stream_seed(seed, 11));
    [0; 3].map(|_| rng.random_range(0.0..noise_bound))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub index: usize,
    pub seed: u64,
    pub gammas: [f64; 3],
    pub vqoc: ErrorEstimate,
    pub fvqoc_end: ErrorEstimate,
    pub fvqoc_continuous: ErrorEstimate,
    pub rel_end: f64,
    pub rel_continuous: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub outcomes: Vec<ProblemOutcome>,
    pub win_rate_end: f64,
    pub win_rate_continuous: f64,
    pub mean_rel_end: f64,
    pub mean_rel_continuous: f64,
    pub stderr_rel_end: f64,
    pub stderr_rel_continuous: f64,
}

/// (J_err^a − J_err^b) / J_err^b
pub fn relative_change(a: f64, b: f64) -> f64 {
    (a - b) / b
}

impl BenchmarkSummary {
    pub fn from_outcomes(outcomes: Vec<ProblemOutcome>) -> Self {
        let n = outcomes.len() as f64;
        let rel_end: Vec<f64> = outcomes.iter().map(|o| o.rel_end).collect();
        let rel_cont: Vec<f64> = outcomes.iter().map(|o| o.rel_continuous).collect();
        let (mean_rel_end, stderr_rel_end) = mean_stderr(&rel_end);
        let (mean_rel_continuous, stderr_rel_continuous) = mean_stderr(&rel_cont);
        Self {
            win_rate_end: rel_end.iter().filter(|r| **r < 0.0).count() as f64 / n,
            win_rate_continuous: rel_cont.iter().filter(|r| **r < 0.0).count() as f64 / n,
            mean_rel_end,
            mean_rel_continuous,
            stderr_rel_end,
            stderr_rel_continuous,
            outcomes,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        use crate::sse::fmt_f64;
        writeln!(w, "problem,seed,gamma_x,gamma_y,gamma_z,err_vqoc,err_fvqoc_end,err_fvqoc_continuous,rel_end,rel_continuous")?;
        for o in &self.outcomes {
            let vals = [
                o.gammas[0],
                o.gammas[1],
                o.gammas[2],
                o.vqoc.error,
                o.fvqoc_end.error,
                o.fvqoc_continuous.error,
                o.rel_end,
                o.rel_continuous,
            ];
            let cols: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{},{},{}", o.index, o.seed, cols.join(","))?;
        }
        Ok(())
    }
}

/// Runs all three methods on one problem; every method starts from the same
/// z⁽⁰⁾ and is evaluated on the same noise seeds.
pub fn compare_methods(problem: &OptimizationProblem) -> Result<[RunHistory; 3]> {
    Ok([
        optimize_method(problem, Method::Vqoc)?,
        optimize_method(problem, Method::FvqocEnd)?,
        optimize_method(problem, Method::FvqocContinuous)?,
    ])
}

pub fn benchmark_relative_error(
    n_problems: usize,
    seed: u64,
    noise_bound: f64,
    template: &ProblemTemplate,
    progress: impl FnMut(&ProblemOutcome),
) -> Result<BenchmarkSummary> {
    if n_problems < 10 {
        return Err(Error::InvalidArgument(format!("benchmark needs >= 10 problems, got {n_problems}")));
    }
    benchmark_with(n_problems, seed, noise_bound, template, false, progress)
}

/// Scaled-noise variant of [`benchmark_relative_error`]: noise on axis l
/// scales with |z_l|.
pub fn benchmark_relative_error_scaled(
    n_problems: usize,
    seed: u64,
    noise_bound: f64,
    template: &ProblemTemplate,
    progress: impl FnMut(&ProblemOutcome),
) -> Result<BenchmarkSummary> {
    if n_problems < 10 {
        return Err(Error::InvalidArgument(format!("benchmark needs >= 10 problems, got {n_problems}")));
    }
    benchmark_with(n_problems, seed, noise_bound, template, true, progress)
}

fn benchmark_with(
    n_problems: usize,
    seed: u64,
    noise_bound: f64,
    template: &ProblemTemplate,
    scaled: bool,
    mut progress: impl FnMut(&ProblemOutcome),
) -> Result<BenchmarkSummary> {
    let mut outcomes = Vec::with_capacity(n_problems);
    for index in 0..n_problems {
        let pseed = trial_seed(seed, index as u64);
        let mut problem = random_problem(pseed, noise_bound, template)?;
        if scaled {
            let Target::Hamiltonian(h) = problem.target.clone() else { unreachable!("random problems are Hamiltonian") };
            problem = scaled_single_qubit(template, h, random_gammas(pseed, noise_bound), pseed)?;
        }
        let [v, e, c] = compare_methods(&problem)?;
        let outcome = ProblemOutcome {
            index,
            seed: pseed,
            gammas: random_gammas(pseed, noise_bound),
            rel_end: relative_change(e.final_error.error, v.final_error.error),
            rel_continuous: relative_change(c.final_error.error, v.final_error.error),
            vqoc: v.final_error,
            fvqoc_end: e.final_error,
            fvqoc_continuous: c.final_error,
        };
        progress(&outcome);
        outcomes.push(outcome);
    }
    Ok(BenchmarkSummary::from_outcomes(outcomes))
}

/// Whether `a` beats `b` by at least one combined standard error.
pub fn separated(a: &ErrorEstimate, b: &ErrorEstimate) -> bool {
    b.error - a.error >= (a.stderr.powi(2) + b.stderr.powi(2)).sqrt()
}

/// Single-qubit problem shared by the scaled-noise experiment: noise on
/// channel l scales with |z_l|.
pub fn scaled_single_qubit(template: &ProblemTemplate, h_targ: ComplexMatrix, gammas: [f64; 3], seed: u64) -> Result<OptimizationProblem> {
    let mut p = template.single_qubit(h_targ, gammas, seed)?;
    p.dynamics.noise = p.dynamics.noise.into_iter().enumerate().map(|(l, c)| c.coupled_to(l)).collect();
    p.dynamics = p.dynamics.with_scaling(ScalingMode::Scaled)?;
    p.validate()?;
    Ok(p)
}

//! Propagation of noiseless states φ, noisy states ψ and unitary pairs under
//! the stochastic Schrödinger equation
//!
//! dψ = iHψ dt − ½ Σ_l S_l² ψ d[X_l] + i Σ_l S_l ψ dX_l,
//!
//! with an exact per-step exponential for the noiseless companion
//! dφ/dt = iHφ. In scaled mode the noise on channel l enters through
//! dY_l = √|z_{c(l)}| dX_l.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, inner, kron, outer, ComplexMatrix, C64, I};
use crate::noise::{sample_path, NoiseKind, NoisePath, NoiseSpec};
use crate::rng::{stream_seed, trial_seed};
use crate::sde::{self, Scheme, SdeSystem};
use crate::stats::{par_accumulate, Accumulator};

/// Floor for |z| in the scaled-noise weights.
pub const EPS_Z: f64 = 1e-8;
/// Largest tolerated per-step change of a state norm before renormalization.
pub const NORM_DRIFT_LIMIT: f64 = 1e-3;

/// Piecewise-constant control amplitudes on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPulse {
    dt: f64,
    steps: usize,
    channels: Vec<Vec<f64>>,
}

impl ControlPulse {
    pub fn new(dt: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        let steps = channels.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidArgument("pulse needs at least one channel; use ControlPulse::empty".into())
        })?;
        Self::with_steps(dt, steps, channels)
    }

    pub fn with_steps(dt: f64, steps: usize, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if let Some(bad) = channels.iter().position(|c| c.len() != steps) {
            return Err(Error::Dimension(format!(
                "pulse channel {bad} has {} samples, expected {steps}",
                channels[bad].len()
            )));
        }
        Ok(Self { dt, steps, channels })
    }

    /// A pulse with no control channels, for drift-only dynamics.
    pub fn empty(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            channels: Vec::new(),
        }
    }

    pub fn zeros(n_channels: usize, steps: usize, dt: f64) -> Self {
        Self {
            dt,
            steps,
            channels: vec![vec![0.0; steps]; n_channels],
        }
    }

    pub fn constant(values: &[f64], steps: usize, dt: f64) -> Self {
        Self {
            dt,
            steps,
            channels: values.iter().map(|&v| vec![v; steps]).collect(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, j: usize) -> &[f64] {
        &self.channels[j]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn value(&self, j: usize, i: usize) -> f64 {
        self.channels[j][i]
    }

    pub fn set(&mut self, j: usize, i: usize, v: f64) {
        self.channels[j][i] = v;
    }

    /// Channel-major flattening `[z_0(t_0..), z_1(t_0..), …]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.channels.concat()
    }

    pub fn from_flat(dt: f64, n_channels: usize, flat: &[f64]) -> Result<Self> {
        if n_channels == 0 || flat.len() % n_channels != 0 {
            return Err(Error::Dimension("flat pulse length not divisible by channels".into()));
        }
        let steps = flat.len() / n_channels;
        Self::with_steps(dt, steps, flat.chunks(steps).map(<[f64]>::to_vec).collect())
    }

    /// Σ_j ∫ z_j² dt
    pub fn squared_norm(&self) -> f64 {
        self.channels
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z * z * self.dt)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    #[default]
    Fixed,
    Scaled,
}

/// A Hermitian noise operator with its noise process.
#[derive(Clone, Debug)]
pub struct NoiseChannel {
    pub operator: ComplexMatrix,
    pub spec: NoiseSpec,
    /// Pulse channel whose amplitude scales this noise in scaled mode.
    pub coupling: Option<usize>,
}

impl NoiseChannel {
    pub fn new(operator: ComplexMatrix, spec: NoiseSpec) -> Result<Self> {
        if !operator.is_hermitian(1e-12) {
            return Err(Error::InvalidArgument("noise operator must be Hermitian".into()));
        }
        spec.validate()?;
        Ok(Self {
            operator,
            spec,
            coupling: None,
        })
    }

    pub fn coupled_to(mut self, channel: usize) -> Self {
        self.coupling = Some(channel);
        self
    }
}

/// Hamiltonian H(t) = H_d + Σ_j z_j(t) H_j together with the noise model.
#[derive(Clone, Debug)]
pub struct Dynamics {
    pub drift: Option<ComplexMatrix>,
    pub controls: Vec<ComplexMatrix>,
    pub noise: Vec<NoiseChannel>,
    pub scaling: ScalingMode,
}

impl Dynamics {
    pub fn new(controls: Vec<ComplexMatrix>, noise: Vec<NoiseChannel>) -> Result<Self> {
        let d = Self {
            drift: None,
            controls,
            noise,
            scaling: ScalingMode::Fixed,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn with_drift(mut self, drift: ComplexMatrix) -> Result<Self> {
        self.drift = Some(drift);
        self.validate()?;
        Ok(self)
    }

    pub fn with_scaling(mut self, scaling: ScalingMode) -> Result<Self> {
        self.scaling = scaling;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.drift
            .as_ref()
            .or(self.controls.first())
            .or(self.noise.first().map(|n| &n.operator))
            .map(ComplexMatrix::rows)
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::Dimension(format!("operator dimension {d} is not 2^N")));
        }
        let ops = self
            .drift
            .iter()
            .chain(&self.controls)
            .chain(self.noise.iter().map(|n| &n.operator));
        for op in ops {
            if op.rows() != d || op.cols() != d {
                return Err(Error::Dimension(format!(
                    "operator of shape {}x{} in a {d}-dimensional system",
                    op.rows(),
                    op.cols()
                )));
            }
            if !op.is_hermitian(1e-12) {
                return Err(Error::InvalidArgument("all operators must be Hermitian".into()));
            }
        }
        if self.scaling == ScalingMode::Scaled {
            for (l, ch) in self.noise.iter().enumerate() {
                match ch.coupling {
                    Some(c) if c < self.controls.len() => {}
                    _ => {
                        return Err(Error::InvalidArgument(format!(
                            "scaled noise channel {l} needs a coupling to a control channel"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn check_pulse(&self, pulse: &ControlPulse) -> Result<()> {
        if pulse.n_channels() != self.controls.len() {
            return Err(Error::Dimension(format!(
                "pulse has {} channels for {} control Hamiltonians",
                pulse.n_channels(),
                self.controls.len()
            )));
        }
        Ok(())
    }

    pub fn hamiltonian(&self, pulse: &ControlPulse, i: usize) -> ComplexMatrix {
        let d = self.dim();
        let mut h = self.drift.clone().unwrap_or_else(|| ComplexMatrix::zeros(d, d));
        for (j, hj) in self.controls.iter().enumerate() {
            let z = pulse.value(j, i);
            if z != 0.0 {
                h.axpy(C64::new(z, 0.0), hj);
            }
        }
        h
    }

    /// Weight w with d[Y] = w·d[X]; 1 in fixed mode, max(|z_{c(l)}|, ε_z) in
    /// scaled mode.
    pub fn noise_weight(&self, pulse: &ControlPulse, l: usize, i: usize) -> f64 {
        match (self.scaling, self.noise[l].coupling) {
            (ScalingMode::Scaled, Some(c)) => pulse.value(c, i).abs().max(EPS_Z),
            _ => 1.0,
        }
    }

    /// One path per noise channel, each from its own sub-stream of `seed`.
    pub fn sample_noise(&self, dt: f64, steps: usize, seed: u64) -> Result<Vec<NoisePath>> {
        self.noise
            .iter()
            .enumerate()
            .map(|(l, ch)| sample_path(&ch.spec, dt, steps, stream_seed(seed, l as u64)))
            .collect()
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise.iter().all(|n| n.spec.gamma == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SseOptions {
    /// Rescale ψ to unit norm after every step.
    pub renormalize: bool,
    pub drift_limit: f64,
}

impl Default for SseOptions {
    fn default() -> Self {
        Self {
            renormalize: true,
            drift_limit: NORM_DRIFT_LIMIT,
        }
    }
}

impl SseOptions {
    pub fn raw() -> Self {
        Self {
            renormalize: false,
            drift_limit: NORM_DRIFT_LIMIT,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub dt: f64,
    pub psi: Vec<Vec<C64>>,
    pub phi: Vec<Vec<C64>>,
    pub fidelity: Vec<f64>,
    pub seed: u64,
    pub noise_paths: Vec<NoisePath>,
    /// Largest per-step norm change before renormalization.
    pub max_norm_drift: f64,
}

#[derive(Clone, Debug)]
pub struct UnitaryPairRecord {
    pub u: Vec<ComplexMatrix>,
    pub v: Vec<ComplexMatrix>,
    pub seed: u64,
    pub noise_paths: Vec<NoisePath>,
    pub max_norm_drift: f64,
}

impl UnitaryPairRecord {
    /// Q_t = V_t† U_t
    pub fn q(&self, i: usize) -> ComplexMatrix {
        self.v[i].adjoint().matmul(&self.u[i])
    }

    pub fn trace_q(&self) -> Vec<C64> {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(u, v)| v.adjoint().trace_product(u))
            .collect()
    }
}

/// The SSE as a linear SDE driven by per-channel standard normals.
pub struct SseGenerator<'a> {
    ih: &'a [ComplexMatrix],
    s: Vec<ComplexMatrix>,
    s2: Vec<ComplexMatrix>,
    paths: &'a [NoisePath],
    /// `sqrt_w[l][i]`
    sqrt_w: Vec<Vec<f64>>,
}

impl SseGenerator<'_> {
    /// True when no noise channel acts on step `i`.
    pub fn is_silent(&self, i: usize) -> bool {
        self.paths
            .iter()
            .all(|p| p.gamma == 0.0 && p.drift[i] == 0.0 && p.dqv[i] == 0.0)
    }
}

impl SdeSystem for SseGenerator<'_> {
    fn channels(&self) -> usize {
        self.s.len()
    }

    fn drift(&self, step: usize, y: &ComplexMatrix) -> ComplexMatrix {
        let mut out = self.ih[step].matmul(y);
        for l in 0..self.s.len() {
            let p = &self.paths[l];
            let sw = self.sqrt_w[l][step];
            let qv = -0.5 * sw * sw * p.dqv[step] / p.dt;
            if qv != 0.0 {
                out.axpy(C64::new(qv, 0.0), &self.s2[l].matmul(y));
            }
            let dr = p.drift[step] * sw;
            if dr != 0.0 {
                out.axpy(C64::new(0.0, dr), &self.s[l].matmul(y));
            }
        }
        out
    }

    fn diffusion(&self, step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix {
        let g = self.paths[channel].gamma * self.sqrt_w[channel][step];
        self.s[channel].matmul(y).scale(C64::new(0.0, g))
    }
}

/// Per-pulse precomputation shared by every trajectory of an ensemble.
pub struct Simulator<'a> {
    dynamics: &'a Dynamics,
    pulse: &'a ControlPulse,
    ih: Vec<ComplexMatrix>,
    step_unitaries: Vec<ComplexMatrix>,
}

impl<'a> Simulator<'a> {
    pub fn new(dynamics: &'a Dynamics, pulse: &'a ControlPulse) -> Result<Self> {
        dynamics.validate()?;
        dynamics.check_pulse(pulse)?;
        let dt = pulse.dt();
        let mut ih = Vec::with_capacity(pulse.steps());
        let mut step_unitaries = Vec::with_capacity(pulse.steps());
        for i in 0..pulse.steps() {
            let h = dynamics.hamiltonian(pulse, i).scale(I);
            step_unitaries.push(h.scale_real(dt).expm());
            ih.push(h);
        }
        Ok(Self {
            dynamics,
            pulse,
            ih,
            step_unitaries,
        })
    }

    pub fn dynamics(&self) -> &Dynamics {
        self.dynamics
    }

    pub fn pulse(&self) -> &ControlPulse {
        self.pulse
    }

    /// exp(iH(t_i)dt)
    pub fn step_unitary(&self, i: usize) -> &ComplexMatrix {
        &self.step_unitaries[i]
    }

    pub fn sample_noise(&self, seed: u64) -> Result<Vec<NoisePath>> {
        self.dynamics
            .sample_noise(self.pulse.dt(), self.pulse.steps(), seed)
    }

    pub fn generator<'p>(&'p self, paths: &'p [NoisePath]) -> Result<SseGenerator<'p>> {
        check_paths(self.dynamics, self.pulse, paths)?;
        let sqrt_w = (0..self.dynamics.noise.len())
            .map(|l| {
                (0..self.pulse.steps())
                    .map(|i| self.dynamics.noise_weight(self.pulse, l, i).sqrt())
                    .collect()
            })
            .collect();
        let s: Vec<ComplexMatrix> = self.dynamics.noise.iter().map(|n| n.operator.clone()).collect();
        let s2 = s.iter().map(|m| m.matmul(m)).collect();
        Ok(SseGenerator {
            ih: &self.ih,
            s,
            s2,
            paths,
            sqrt_w,
        })
    }

    pub fn propagate_phi(&self, phi0: &[C64]) -> Result<Vec<Vec<C64>>> {
        if phi0.len() != self.dynamics.dim() {
            return Err(Error::Dimension(format!(
                "state of length {} for dimension {}",
                phi0.len(),
                self.dynamics.dim()
            )));
        }
        let mut out = Vec::with_capacity(self.pulse.steps() + 1);
        out.push(phi0.to_vec());
        for u in &self.step_unitaries {
            let next = u.apply(out.last().expect("non-empty"));
            out.push(next);
        }
        Ok(out)
    }

    /// Noiseless unitaries V_{t_i}, V_0 = I.
    pub fn propagate_v(&self) -> Vec<ComplexMatrix> {
        let mut out = Vec::with_capacity(self.pulse.steps() + 1);
        out.push(ComplexMatrix::identity(self.dynamics.dim()));
        for u in &self.step_unitaries {
            let next = u.matmul(out.last().expect("non-empty"));
            out.push(next);
        }
        out
    }

    /// Integrates the SSE for a state (column) or operator (columns are
    /// independent states), calling `visit(i, y_i)` on every stored step.
    pub fn evolve(
        &self,
        y0: ComplexMatrix,
        scheme: Scheme,
        paths: &[NoisePath],
        opts: SseOptions,
        mut visit: impl FnMut(usize, &ComplexMatrix),
    ) -> Result<f64> {
        let gen = self.generator(paths)?;
        let dt = self.pulse.dt();
        let mut y = y0;
        visit(0, &y);
        let mut normals = vec![0.0; paths.len()];
        let mut max_drift: f64 = 0.0;
        for i in 0..self.pulse.steps() {
            for (n, p) in normals.iter_mut().zip(paths) {
                *n = p.normal(i);
            }
            let before = column_norms(&y);
            let mut next = if gen.is_silent(i) {
                self.step_unitaries[i].matmul(&y)
            } else {
                sde::step(scheme, &gen, i, &y, dt, &normals)?
            };
            let after = column_norms(&next);
            let drift = before
                .iter()
                .zip(&after)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if drift > opts.drift_limit {
                return Err(Error::IntegrationQuality {
                    step: i,
                    drift,
                    limit: opts.drift_limit,
                });
            }
            max_drift = max_drift.max(drift);
            if opts.renormalize {
                for (c, n) in after.iter().enumerate() {
                    for r in 0..next.rows() {
                        next[(r, c)] /= *n;
                    }
                }
            }
            y = next;
            visit(i + 1, &y);
        }
        Ok(max_drift)
    }

    pub fn run(&self, psi0: &[C64], scheme: Scheme, seed: u64, opts: SseOptions) -> Result<TrajectoryRecord> {
        let paths = self.sample_noise(seed)?;
        let mut rec = self.run_with_paths(psi0, scheme, paths, opts)?;
        rec.seed = seed;
        Ok(rec)
    }

    pub fn run_with_paths(
        &self,
        psi0: &[C64],
        scheme: Scheme,
        paths: Vec<NoisePath>,
        opts: SseOptions,
    ) -> Result<TrajectoryRecord> {
        let phi = self.propagate_phi(psi0)?;
        let mut psi = Vec::with_capacity(phi.len());
        let max_norm_drift = self.evolve(ComplexMatrix::column(psi0), scheme, &paths, opts, |_, y| {
            psi.push(y.as_slice().to_vec())
        })?;
        let fidelity = psi
            .iter()
            .zip(&phi)
            .map(|(p, f)| inner(f, p).norm_sqr())
            .collect();
        Ok(TrajectoryRecord {
            dt: self.pulse.dt(),
            psi,
            phi,
            fidelity,
            seed: paths.first().map(|p| p.seed).unwrap_or(0),
            noise_paths: paths,
            max_norm_drift,
        })
    }

    /// Fidelity series only, against a precomputed φ series.
    pub fn fidelity_series(
        &self,
        phi: &[Vec<C64>],
        scheme: Scheme,
        paths: &[NoisePath],
        opts: SseOptions,
    ) -> Result<Vec<f64>> {
        let mut fid = Vec::with_capacity(phi.len());
        self.evolve(ComplexMatrix::column(&phi[0]), scheme, paths, opts, |i, y| {
            fid.push(inner(&phi[i], y.as_slice()).norm_sqr())
        })?;
        Ok(fid)
    }

    pub fn unitary_pair(&self, scheme: Scheme, paths: Vec<NoisePath>, opts: SseOptions) -> Result<UnitaryPairRecord> {
        let d = self.dynamics.dim();
        let mut u = Vec::with_capacity(self.pulse.steps() + 1);
        let max_norm_drift = self.evolve(ComplexMatrix::identity(d), scheme, &paths, opts, |_, y| u.push(y.clone()))?;
        Ok(UnitaryPairRecord {
            u,
            v: self.propagate_v(),
            seed: paths.first().map(|p| p.seed).unwrap_or(0),
            noise_paths: paths,
            max_norm_drift,
        })
    }

    /// Ensemble statistics of the fidelity series over `trials` trajectories
    /// seeded by `trial_seed(seed, i)`.
    pub fn fidelity_ensemble(
        &self,
        psi0: &[C64],
        scheme: Scheme,
        trials: usize,
        seed: u64,
        opts: SseOptions,
    ) -> Result<Accumulator> {
        let phi = self.propagate_phi(psi0)?;
        par_accumulate(trials, |i| {
            let paths = self.sample_noise(trial_seed(seed, i as u64))?;
            self.fidelity_series(&phi, scheme, &paths, opts)
        })
    }
}

fn column_norms(y: &ComplexMatrix) -> Vec<f64> {
    (0..y.cols())
        .map(|c| (0..y.rows()).map(|r| y[(r, c)].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

pub(crate) fn check_paths(dynamics: &Dynamics, pulse: &ControlPulse, paths: &[NoisePath]) -> Result<()> {
    if paths.len() != dynamics.noise.len() {
        return Err(Error::Dimension(format!(
            "{} noise paths for {} channels",
            paths.len(),
            dynamics.noise.len()
        )));
    }
    for (l, p) in paths.iter().enumerate() {
        if p.steps != pulse.steps() || (p.dt - pulse.dt()).abs() > 1e-15 * pulse.dt() {
            return Err(Error::Dimension(format!(
                "noise path {l} grid ({} steps, dt {}) differs from pulse grid ({} steps, dt {})",
                p.steps,
                p.dt,
                pulse.steps(),
                pulse.dt()
            )));
        }
    }
    Ok(())
}

pub fn propagate_deterministic(dynamics: &Dynamics, pulse: &ControlPulse, phi0: &[C64]) -> Result<Vec<Vec<C64>>> {
    Simulator::new(dynamics, pulse)?.propagate_phi(phi0)
}

pub fn propagate_sse(
    dynamics: &Dynamics,
    pulse: &ControlPulse,
    psi0: &[C64],
    scheme: Scheme,
    seed: u64,
    opts: SseOptions,
) -> Result<TrajectoryRecord> {
    let norm = crate::linalg::norm(psi0);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("initial state norm {norm} is not 1")));
    }
    Simulator::new(dynamics, pulse)?.run(psi0, scheme, seed, opts)
}

pub fn propagate_unitary_pair(
    dynamics: &Dynamics,
    pulse: &ControlPulse,
    scheme: Scheme,
    seed: u64,
    opts: SseOptions,
) -> Result<UnitaryPairRecord> {
    let sim = Simulator::new(dynamics, pulse)?;
    let paths = sim.sample_noise(seed)?;
    let mut rec = sim.unitary_pair(scheme, paths, opts)?;
    rec.seed = seed;
    Ok(rec)
}

/// ρ_t = mean over records of ψ_tψ_t†.
pub fn ensemble_density(records: &[TrajectoryRecord]) -> Result<Vec<ComplexMatrix>> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidArgument("ensemble_density needs at least one record".into()))?;
    let len = first.psi.len();
    if records
        .iter()
        .any(|r| r.psi.len() != len || (r.dt - first.dt).abs() > 1e-15 * first.dt)
    {
        return Err(Error::Dimension("records have mismatched time grids".into()));
    }
    let n = records.len() as f64;
    Ok((0..len)
        .map(|i| {
            let d = first.psi[i].len();
            let mut rho = ComplexMatrix::zeros(d, d);
            for r in records {
                let psi = &r.psi[i];
                let nrm = crate::linalg::norm(psi).powi(2);
                rho.axpy(C64::new(1.0 / (n * nrm), 0.0), &outer(psi, psi));
            }
            rho
        })
        .collect())
}

/// ½‖ρ − σ‖₁
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let diff = rho - sigma;
    let herm = (&diff + &diff.adjoint()).scale_real(0.5);
    let (vals, _) = eigh(&herm)?;
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// Deterministic RK4 solution of
/// ∂ρ = i[H, ρ] + Σ_l γ_l² w_l (S_l ρ S_l − ½{S_l², ρ}),
/// the white-noise ensemble limit of the SSE.
pub fn lindblad_reference(dynamics: &Dynamics, pulse: &ControlPulse, rho0: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
    dynamics.validate()?;
    dynamics.check_pulse(pulse)?;
    if let Some(ch) = dynamics.noise.iter().find(|c| c.spec.kind != NoiseKind::White) {
        return Err(Error::Unsupported(format!(
            "lindblad reference requires white noise, found {:?}",
            ch.spec.kind
        )));
    }
    let dt = pulse.dt();
    let s2: Vec<ComplexMatrix> = dynamics.noise.iter().map(|c| c.operator.matmul(&c.operator)).collect();
    let mut out = Vec::with_capacity(pulse.steps() + 1);
    out.push(rho0.clone());
    for i in 0..pulse.steps() {
        let h = dynamics.hamiltonian(pulse, i);
        let rates: Vec<f64> = dynamics
            .noise
            .iter()
            .enumerate()
            .map(|(l, c)| c.spec.gamma * c.spec.gamma * dynamics.noise_weight(pulse, l, i))
            .collect();
        let rhs = |rho: &ComplexMatrix| -> ComplexMatrix {
            let mut d = h.commutator(rho).scale(I);
            for ((c, s2), &r) in dynamics.noise.iter().zip(&s2).zip(&rates) {
                if r == 0.0 {
                    continue;
                }
                let s = &c.operator;
                let mut diss = s.matmul(rho).matmul(s);
                diss.axpy(C64::new(-0.5, 0.0), &s2.anticommutator(rho));
                d.axpy(C64::new(r, 0.0), &diss);
            }
            d
        };
        let rho = out.last().expect("non-empty");
        let k1 = rhs(rho);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(0.5 * dt, 0.0), &k1);
        let k2 = rhs(&tmp);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(0.5 * dt, 0.0), &k2);
        let k3 = rhs(&tmp);
        let mut tmp = rho.clone();
        tmp.axpy(C64::new(dt, 0.0), &k3);
        let k4 = rhs(&tmp);
        let mut next = rho.clone();
        next.axpy(C64::new(dt / 6.0, 0.0), &k1);
        next.axpy(C64::new(dt / 3.0, 0.0), &k2);
        next.axpy(C64::new(dt / 3.0, 0.0), &k3);
        next.axpy(C64::new(dt / 6.0, 0.0), &k4);
        out.push(next);
    }
    Ok(out)
}

/// Joint fidelity of an n-qubit product system with H = Σ_j A_j and
/// S = Σ_j Q_j (single-qubit terms on qubit j), next to the product of the
/// single-qubit fidelities, all driven by one shared noise path.
pub fn factoring_check(
    per_qubit_a: &[ComplexMatrix],
    per_qubit_q: &[ComplexMatrix],
    shared_noise_path: &NoisePath,
    product_psi0: &[Vec<C64>],
    scheme: Scheme,
    opts: SseOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = per_qubit_a.len();
    if n == 0 || per_qubit_q.len() != n || product_psi0.len() != n {
        return Err(Error::Dimension("factoring check needs one A, Q and state per qubit".into()));
    }
    let dt = shared_noise_path.dt;
    let steps = shared_noise_path.steps;
    let pulse = ControlPulse::empty(dt, steps);
    // the path carries γ; the channel spec only has to be consistent with it
    let spec = NoiseSpec::white(shared_noise_path.gamma);

    let run = |h: ComplexMatrix, s: ComplexMatrix, psi0: &[C64]| -> Result<Vec<f64>> {
        let dynamics = Dynamics::new(vec![], vec![NoiseChannel::new(s, spec.clone())?])?.with_drift(h)?;
        let sim = Simulator::new(&dynamics, &pulse)?;
        let phi = sim.propagate_phi(psi0)?;
        sim.fidelity_series(&phi, scheme, std::slice::from_ref(shared_noise_path), opts)
    };

    let mut product = vec![1.0; steps + 1];
    for j in 0..n {
        let single = run(per_qubit_a[j].clone(), per_qubit_q[j].clone(), &product_psi0[j])?;
        product.iter_mut().zip(&single).for_each(|(p, s)| *p *= s);
    }

    let dim = 1usize << n;
    let mut h = ComplexMatrix::zeros(dim, dim);
    let mut s = ComplexMatrix::zeros(dim, dim);
    for j in 0..n {
        h += &crate::linalg::embed(&per_qubit_a[j], j, n);
        s += &crate::linalg::embed(&per_qubit_q[j], j, n);
    }
    let psi0 = product_psi0
        .iter()
        .fold(ComplexMatrix::column(&[C64::new(1.0, 0.0)]), |acc, v| kron(&acc, &ComplexMatrix::column(v)));
    let joint = run(h, s, psi0.as_slice())?;
    Ok((joint, product))
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t, psi_re_k, psi_im_k, phi_re_k, phi_im_k, fidelity, x_l` rows.
pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, mut w: W) -> std::io::Result<()> {
    let d = record.psi.first().map(Vec::len).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for k in 0..d {
        header.push(format!("psi_re_{k}"));
        header.push(format!("psi_im_{k}"));
    }
    for k in 0..d {
        header.push(format!("phi_re_{k}"));
        header.push(format!("phi_im_{k}"));
    }
    header.push("fidelity".into());
    for l in 0..record.noise_paths.len() {
        header.push(format!("x_{l}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..record.psi.len() {
        let mut row = vec![fmt_f64(record.dt * i as f64)];
        for z in record.psi[i].iter().chain(&record.phi[i]) {
            row.push(fmt_f64(z.re));
            row.push(fmt_f64(z.im));
        }
        row.push(fmt_f64(record.fidelity[i]));
        for p in &record.noise_paths {
            row.push(fmt_f64(p.x[i]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{sigma_x, sigma_z, QuantumState, ZERO};

    fn ket0() -> Vec<C64> {
        vec![C64::new(1.0, 0.0), ZERO]
    }

    #[test]
    fn rabi_rotation_under_plus_i_convention() {
        let dynamics = Dynamics::new(vec![sigma_x()], vec![]).unwrap();
        let pulse = ControlPulse::constant(&[1.0], 100, 0.01);
        let phi = propagate_deterministic(&dynamics, &pulse, &ket0()).unwrap();
        for (i, p) in phi.iter().enumerate() {
            let t = 0.01 * i as f64;
            assert!((p[0].norm_sqr() - t.cos().powi(2)).abs() < 1e-12);
            // +i convention: amplitude on |1⟩ is +i sin t
            assert!((p[1] - C64::new(0.0, t.sin())).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_pulse_is_identity() {
        let dynamics = Dynamics::new(vec![sigma_x(), sigma_z()], vec![]).unwrap();
        let pulse = ControlPulse::zeros(2, 10, 0.1);
        let phi = propagate_deterministic(&dynamics, &pulse, &QuantumState::plus().into_amplitudes()).unwrap();
        assert!(phi.iter().all(|p| (p[0] - phi[0][0]).norm() < 1e-15));
    }

    #[test]
    fn noiseless_sse_matches_phi() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::ou(0.0, 0.1)).unwrap();
        let dynamics = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::constant(&[0.7], 200, 0.005);
        let rec = propagate_sse(&dynamics, &pulse, &ket0(), Scheme::Platen, 3, SseOptions::default()).unwrap();
        assert!(rec.fidelity.iter().all(|f| (f - 1.0).abs() < 1e-10));
    }

    #[test]
    fn lindblad_rejects_ou() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::ou(0.1, 0.1)).unwrap();
        let dynamics = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::zeros(1, 5, 0.1);
        let rho = ComplexMatrix::identity(2).scale_real(0.5);
        assert!(matches!(lindblad_reference(&dynamics, &pulse, &rho), Err(Error::Unsupported(_))));
    }

    #[test]
    fn lindblad_dephasing_closed_form() {
        let gamma = 0.3;
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::white(gamma)).unwrap();
        let dynamics = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::zeros(1, 100, 0.01);
        let plus = QuantumState::plus().into_amplitudes();
        let rhos = lindblad_reference(&dynamics, &pulse, &outer(&plus, &plus)).unwrap();
        for (i, r) in rhos.iter().enumerate() {
            let t = 0.01 * i as f64;
            assert!((r[(0, 1)].re - 0.5 * (-2.0 * gamma * gamma * t).exp()).abs() < 1e-12);
            assert!((r.trace().re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_record_density_is_projector() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::white(0.2)).unwrap();
        let dynamics = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::constant(&[0.4], 20, 0.01);
        let rec = propagate_sse(&dynamics, &pulse, &ket0(), Scheme::Platen, 9, SseOptions::default()).unwrap();
        let rho = ensemble_density(std::slice::from_ref(&rec)).unwrap();
        let last = rho.last().unwrap();
        assert!(last.matmul(last).max_abs_diff(last) < 1e-12);
    }

    #[test]
    fn scaled_mode_requires_coupling() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::white(0.2)).unwrap();
        let d = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        assert!(d.clone().with_scaling(ScalingMode::Scaled).is_err());
    }

    #[test]
    fn pulse_flat_round_trip() {
        let p = ControlPulse::new(0.1, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(ControlPulse::from_flat(0.1, 2, &p.to_flat()).unwrap(), p);
        assert!(ControlPulse::new(0.1, vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::white(0.1)).unwrap();
        let dynamics = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::constant(&[0.4], 5, 0.01);
        let rec = propagate_sse(&dynamics, &pulse, &ket0(), Scheme::Euler, 1, SseOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("t,psi_re_0"));
        let v: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, rec.psi[2][0].re);
    }
}

//! Classical noise processes driving the stochastic Schrödinger equation.
//!
//! Paths are stored together with the Wiener increments that generated them,
//! so the same realization can drive several propagations (state, η-system,
//! solution operator, finite-difference partners).

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, trial_seed};
use crate::stats::par_trials;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Ou,
    External,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// X₀ = 0
    #[default]
    Calibrated,
    /// X₀ ~ γ·N(0,1)/√(2k)
    Stationary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub gamma: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub init_mode: InitMode,
    /// Name of a registered sampler, for `kind = external`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
}

impl NoiseSpec {
    pub fn white(gamma: f64) -> Self {
        Self {
            kind: NoiseKind::White,
            gamma,
            k: 0.0,
            init_mode: InitMode::Calibrated,
            sampler: None,
        }
    }

    pub fn ou(gamma: f64, k: f64) -> Self {
        Self {
            kind: NoiseKind::Ou,
            gamma,
            k,
            init_mode: InitMode::Calibrated,
            sampler: None,
        }
    }

    pub fn with_init(mut self, init_mode: InitMode) -> Self {
        self.init_mode = init_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.k >= 0.0) || !self.k.is_finite() {
            return Err(Error::InvalidArgument(format!("k must be >= 0, got {}", self.k)));
        }
        if self.kind == NoiseKind::Ou && self.k <= 0.0 {
            return Err(Error::InvalidArgument("ou noise requires k > 0".into()));
        }
        Ok(())
    }
}

/// One sampled noise trajectory on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub steps: usize,
    pub gamma: f64,
    /// X_{t_i}, length `steps + 1`
    pub x: Vec<f64>,
    /// Wiener increments ΔW_i, length `steps`
    pub dw: Vec<f64>,
    /// Quadratic-variation increments Δ[X]_i, length `steps`
    pub dqv: Vec<f64>,
    /// Bounded-variation part of ΔX_i per unit time:
    /// `(ΔX_i − γΔW_i)/dt`. Zero for white noise.
    pub drift: Vec<f64>,
    pub seed: u64,
}

impl NoisePath {
    /// Assembles a path from its parts, deriving the drift rates.
    pub fn from_parts(
        dt: f64,
        gamma: f64,
        x: Vec<f64>,
        dw: Vec<f64>,
        dqv: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        let steps = dw.len();
        if x.len() != steps + 1 || dqv.len() != steps {
            return Err(Error::Dimension(format!(
                "noise path lengths x={}, dw={}, dqv={} are inconsistent",
                x.len(),
                dw.len(),
                dqv.len()
            )));
        }
        let drift = (0..steps)
            .map(|i| (x[i + 1] - x[i] - gamma * dw[i]) / dt)
            .collect();
        Ok(Self {
            dt,
            steps,
            gamma,
            x,
            dw,
            dqv,
            drift,
            seed,
        })
    }

    /// A path with γ = 0 and X ≡ 0, used for noiseless propagation.
    pub fn silent(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            gamma: 0.0,
            x: vec![0.0; steps + 1],
            dw: vec![0.0; steps],
            dqv: vec![0.0; steps],
            drift: vec![0.0; steps],
            seed: 0,
        }
    }

    /// Standard normal N_i = ΔW_i/√dt that generated step `i`.
    pub fn normal(&self, i: usize) -> f64 {
        self.dw[i] / self.dt.sqrt()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    /// The same realization on a grid `factor` times coarser: X is
    /// subsampled and the Wiener and quadratic-variation increments summed.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps % factor != 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps
            )));
        }
        let sum = |v: &[f64]| -> Vec<f64> { v.chunks(factor).map(|c| c.iter().sum()).collect() };
        let x = self.x.iter().step_by(factor).copied().collect();
        Self::from_parts(self.dt * factor as f64, self.gamma, x, sum(&self.dw), sum(&self.dqv), self.seed)
    }

    /// Σ (ΔX_i)²
    pub fn realized_quadratic_variation(&self) -> f64 {
        self.x.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum()
    }
}

/// User-supplied generator for `kind = external` noise.
pub trait ExternalSampler: Send + Sync {
    fn sample(&self, spec: &NoiseSpec, dt: f64, steps: usize, seed: u64) -> Result<NoisePath>;
}

impl<F> ExternalSampler for F
where
    F: Fn(&NoiseSpec, f64, usize, u64) -> Result<NoisePath> + Send + Sync,
{
    fn sample(&self, spec: &NoiseSpec, dt: f64, steps: usize, seed: u64) -> Result<NoisePath> {
        self(spec, dt, steps, seed)
    }
}

type Registry = RwLock<HashMap<String, Arc<dyn ExternalSampler>>>;

fn registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(|| RwLock::new(HashMap::new()))
}

pub fn register_sampler(name: impl Into<String>, sampler: Arc<dyn ExternalSampler>) {
    registry()
        .write()
        .expect("sampler registry poisoned")
        .insert(name.into(), sampler);
}

pub fn sample_path(spec: &NoiseSpec, dt: f64, steps: usize, seed: u64) -> Result<NoisePath> {
    sample_path_from(spec, None, dt, steps, seed)
}

/// As [`sample_path`], with an explicit initial value overriding the
/// spec's initialization mode (ignored for external samplers).
pub fn sample_path_from(
    spec: &NoiseSpec,
    x0: Option<f64>,
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<NoisePath> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    let gamma = spec.gamma;
    match spec.kind {
        NoiseKind::External => {
            let name = spec.sampler.as_deref().unwrap_or("");
            let sampler = registry()
                .read()
                .expect("sampler registry poisoned")
                .get(name)
                .cloned()
                .ok_or_else(|| {
                    Error::config("noise.sampler", format!("no external sampler registered as `{name}`"))
                })?;
            sampler.sample(spec, dt, steps, seed)
        }
        NoiseKind::White => {
            let mut rng = rng_from_seed(seed);
            let sq = dt.sqrt();
            let mut x = Vec::with_capacity(steps + 1);
            let mut dw = Vec::with_capacity(steps);
            x.push(x0.unwrap_or(0.0));
            for i in 0..steps {
                let n: f64 = rng.sample(StandardNormal);
                dw.push(n * sq);
                x.push(x[i] + gamma * sq * n);
            }
            Ok(NoisePath {
                dt,
                steps,
                gamma,
                x,
                dw,
                dqv: vec![gamma * gamma * dt; steps],
                drift: vec![0.0; steps],
                seed,
            })
        }
        NoiseKind::Ou => {
            let mut rng = rng_from_seed(seed);
            let k = spec.k;
            let decay = (-k * dt).exp();
            let spread = gamma * ((1.0 - (-2.0 * k * dt).exp()) / (2.0 * k)).sqrt();
            let x0 = match (x0, spec.init_mode) {
                (Some(v), _) => v,
                (None, InitMode::Calibrated) => 0.0,
                (None, InitMode::Stationary) => {
                    let n: f64 = rng.sample(StandardNormal);
                    gamma * n / (2.0 * k).sqrt()
                }
            };
            let sq = dt.sqrt();
            let mut x = Vec::with_capacity(steps + 1);
            let mut dw = Vec::with_capacity(steps);
            x.push(x0);
            for i in 0..steps {
                let n: f64 = rng.sample(StandardNormal);
                dw.push(n * sq);
                x.push(x[i] * decay + spread * n);
            }
            NoisePath::from_parts(dt, gamma, x, dw, vec![gamma * gamma * dt; steps], seed)
        }
    }
}

fn double_factorial_odd(n: u32) -> f64 {
    // (2n−1)!!
    (1..=n).map(|j| (2 * j - 1) as f64).product()
}

/// E[X_t^{2n}] for calibrated initial data X₀ = 0.
///
/// Γ(n+½)/√π · (2γ²/k · e^{−kt} sinh(kt))^n; for k = 0 the white-noise
/// moment (2n−1)!!·(γ²t)^n.
pub fn ou_even_moment(n: u32, t: f64, k: f64, gamma: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let variance = ou_variance(t, k, gamma);
    double_factorial_odd(n) * variance.powi(n as i32)
}

/// Var(X_t) for calibrated data: γ²/(2k)·(1 − e^{−2kt}), or γ²t for k = 0.
pub fn ou_variance(t: f64, k: f64, gamma: f64) -> f64 {
    if k == 0.0 {
        gamma * gamma * t
    } else {
        // γ²/k · e^{−kt} sinh(kt), written to stay accurate for small kt
        gamma * gamma / (2.0 * k) * -(-2.0 * k * t).exp_m1()
    }
}

/// E[cos(α(X_t − X₀))].
pub fn expected_cos(alpha: f64, t: f64, k: f64, gamma: f64, init_mode: InitMode) -> f64 {
    if k == 0.0 {
        return (-alpha * alpha * gamma * gamma * t / 2.0).exp();
    }
    let g2 = alpha * alpha * gamma * gamma / (2.0 * k);
    match init_mode {
        InitMode::Calibrated => (-g2 * (-k * t).exp() * (k * t).sinh()).exp(),
        InitMode::Stationary => (-g2 * (-k * t).exp() * (k * t).exp_m1()).exp(),
    }
}

/// |E[X_T²·V] − E[X_T²]·E[V]| over `trials` independent paths, where `V` is
/// a caller-supplied functional of the path.
pub fn ito_isometry_residual<F>(
    spec: &NoiseSpec,
    dt: f64,
    steps: usize,
    trials: usize,
    seed: u64,
    observable: F,
) -> Result<f64>
where
    F: Fn(&NoisePath) -> f64 + Sync + Send,
{
    if trials < 100 {
        return Err(Error::StatisticalPower(format!(
            "ito isometry residual needs >= 100 trials, got {trials}"
        )));
    }
    let samples = par_trials(trials, |i| {
        sample_path(spec, dt, steps, trial_seed(seed, i as u64)).map(|p| {
            let x2 = p.x[steps].powi(2);
            (x2, observable(&p))
        })
    });
    let mut sx2 = 0.0;
    let mut sv = 0.0;
    let mut sx2v = 0.0;
    for s in samples {
        let (x2, v) = s?;
        sx2 += x2;
        sv += v;
        sx2v += x2 * v;
    }
    let n = trials as f64;
    Ok((sx2v / n - (sx2 / n) * (sv / n)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_ou_decays_exponentially() {
        let p = sample_path_from(&NoiseSpec::ou(0.0, 0.5), Some(1.0), 0.01, 100, 1).unwrap();
        for (i, x) in p.x.iter().enumerate() {
            let t = 0.01 * i as f64;
            assert!((x - (-0.5 * t).exp()).abs() < 1e-14, "step {i}");
        }
        assert!(p.drift.iter().zip(&p.x).all(|(d, x)| (d + 0.5 * x).abs() < 2e-3));
    }

    #[test]
    fn lengths_and_qv() {
        let p = sample_path(&NoiseSpec::white(0.3), 0.01, 50, 2).unwrap();
        assert_eq!(p.x.len(), 51);
        assert_eq!(p.dw.len(), 50);
        assert!(p.dqv.iter().all(|&q| (q - 0.09 * 0.01).abs() < 1e-18));
        let o = sample_path(&NoiseSpec::ou(0.3, 0.1), 0.01, 50, 2).unwrap();
        assert!(o.dqv.iter().all(|&q| (q - 0.09 * 0.01).abs() < 1e-18));
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = NoiseSpec::ou(0.1, 0.1).with_init(InitMode::Stationary);
        assert_eq!(sample_path(&spec, 0.01, 10, 5).unwrap(), sample_path(&spec, 0.01, 10, 5).unwrap());
    }

    #[test]
    fn external_without_sampler_is_config_error() {
        let spec = NoiseSpec {
            kind: NoiseKind::External,
            gamma: 0.1,
            k: 0.0,
            init_mode: InitMode::Calibrated,
            sampler: Some("nope".into()),
        };
        assert!(matches!(sample_path(&spec, 0.1, 3, 0), Err(Error::Config { .. })));
    }

    #[test]
    fn moment_limits() {
        assert_eq!(ou_even_moment(0, 1.0, 0.1, 0.1), 1.0);
        let stationary = ou_even_moment(1, 1e3, 0.5, 0.2);
        assert!((stationary - 0.04 / 1.0).abs() < 1e-12);
        assert!((ou_even_moment(2, 2.0, 0.0, 0.3) - 3.0 * (0.09f64 * 2.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn expected_cos_limits() {
        for mode in [InitMode::Calibrated, InitMode::Stationary] {
            assert_eq!(expected_cos(2.0, 0.0, 0.1, 0.1, mode), 1.0);
        }
        let far = expected_cos(1.5, 500.0, 0.1, 0.2, InitMode::Stationary);
        assert!((far - (-1.5f64.powi(2) * 0.04 / 0.2).exp()).abs() < 1e-12);
        let white = (-0.5f64 * 0.01 * 2.0).exp();
        assert!((expected_cos(1.0, 2.0, 1e-6, 0.1, InitMode::Calibrated) - white).abs() < 1e-4);
    }

    #[test]
    fn residual_requires_trials() {
        let spec = NoiseSpec::white(0.1);
        assert!(matches!(
            ito_isometry_residual(&spec, 0.01, 10, 50, 0, |_| 1.0),
            Err(Error::StatisticalPower(_))
        ));
        let r = ito_isometry_residual(&spec, 0.01, 10, 200, 0, |_| 1.0).unwrap();
        assert!(r < 1e-15);
    }
}

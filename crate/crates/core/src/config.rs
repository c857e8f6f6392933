//! JSON run configurations. Field names mirror [`OptimizationProblem`];
//! unknown keys are rejected and errors name the offending key path.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{CostWeights, ScaledForm};
use crate::linalg::{haar_random_unitary, outer, pauli_string, random_hermitian, ComplexMatrix, C64, ZERO};
use crate::noise::NoiseSpec;
use crate::optimizer::{Method, OptimizationProblem, Target};
use crate::sde::Scheme;
use crate::sse::{Dynamics, NoiseChannel, ScalingMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Simulate,
    Optimize,
    Gate,
    Benchmark,
    OracleCheck,
    Convergence,
}

/// Top-level run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceConfig>,
}

/// One weighted Pauli string, e.g. `{"pauli": "XZ", "coeff": 0.5}`. The
/// leftmost character acts on qubit 0.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliTerm {
    pub pauli: String,
    #[serde(default = "one")]
    pub coeff: f64,
}

fn one() -> f64 {
    1.0
}

/// Hermitian operator as a sum of weighted Pauli strings.
pub type OperatorConfig = Vec<PauliTerm>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub operator: OperatorConfig,
    #[serde(flatten)]
    pub spec: NoiseSpecConfig,
    /// Control channel whose amplitude scales this noise in scaled mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<usize>,
}

/// Mirrors [`NoiseSpec`]; kept separate because flattened structs cannot
/// deny unknown fields on their own.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSpecConfig {
    pub kind: crate::noise::NoiseKind,
    pub gamma: f64,
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub init_mode: crate::noise::InitMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
}

impl From<&NoiseSpecConfig> for NoiseSpec {
    fn from(c: &NoiseSpecConfig) -> Self {
        NoiseSpec { kind: c.kind, gamma: c.gamma, k: c.k, init_mode: c.init_mode, sampler: c.sampler.clone() }
    }
}

/// Complex amplitudes as `[re, im]` pairs.
pub type AmplitudesConfig = Vec<[f64; 2]>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    /// Ground state of the given Hamiltonian.
    Hamiltonian { operator: OperatorConfig },
    /// H_targ = I − |φ⟩⟨φ| for the given (normalized on load) state.
    State { amplitudes: AmplitudesConfig },
    /// Gaussian random Hermitian H_targ.
    RandomHamiltonian { seed: u64 },
    /// Gate target given as rows of `[re, im]` entries.
    Unitary { matrix: Vec<AmplitudesConfig> },
    /// Haar-random gate target.
    RandomUnitary { seed: u64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub iterations: usize,
    /// Iteration index from which μ is set to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_off_after: Option<usize>,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "default_backtracks")]
    pub max_backtracks: usize,
    /// Armijo constant for step acceptance.
    #[serde(default = "default_sufficient_decrease")]
    pub sufficient_decrease: f64,
    #[serde(default = "default_init_amplitude")]
    pub init_amplitude: f64,
}

fn default_backtracks() -> usize {
    8
}

fn default_sufficient_decrease() -> f64 {
    crate::optimizer::DEFAULT_SUFFICIENT_DECREASE
}

fn default_init_amplitude() -> f64 {
    0.1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialsConfig {
    pub gradient: usize,
    pub evaluation: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n_qubits: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<OperatorConfig>,
    pub controls: Vec<OperatorConfig>,
    #[serde(default)]
    pub noise: Vec<NoiseConfig>,
    #[serde(default)]
    pub scaling: ScalingMode,
    pub target: TargetConfig,
    /// Defaults to |0…0⟩.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<AmplitudesConfig>,
    pub grid: GridConfig,
    pub weights: CostWeights,
    pub schedule: ScheduleConfig,
    pub trials: TrialsConfig,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub scaled_form: ScaledForm,
    #[serde(default = "all_methods")]
    pub methods: Vec<Method>,
}

fn all_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub problems: usize,
    #[serde(default = "default_noise_bound")]
    pub noise_bound: f64,
    #[serde(default)]
    pub scaled: bool,
}

fn default_noise_bound() -> f64 {
    0.1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    /// Haar-random inputs for the per-state fidelity variance.
    #[serde(default = "default_haar_states")]
    pub haar_states: usize,
}

fn default_haar_states() -> usize {
    64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub trials: usize,
    /// Constant amplitude per control channel; the seeded initial pulse of
    /// the problem is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant_pulse: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub paths: usize,
    pub dts: Vec<f64>,
}

/// Parse and validate a configuration from JSON text.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let mut path = e.path().to_string();
        let message = e.inner().to_string();
        // Name the missing key itself, not only its parent.
        if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.split('`').next()) {
            path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
        }
        Error::config(path, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let needs_problem = matches!(self.experiment, Experiment::Simulate | Experiment::Optimize | Experiment::Gate);
        match &self.problem {
            Some(p) => {
                p.build(self.seed)?;
            }
            None if needs_problem => return Err(Error::config("problem", "required for this experiment")),
            None => {}
        }
        if self.experiment == Experiment::Gate
            && !matches!(
                self.problem.as_ref().map(|p| &p.target),
                Some(TargetConfig::Unitary { .. } | TargetConfig::RandomUnitary { .. })
            )
        {
            return Err(Error::config("problem.target.kind", "gate experiments need a unitary target"));
        }
        if let Some(b) = &self.benchmark {
            if b.problems < 10 {
                return Err(Error::config("benchmark.problems", "at least 10 problems are required"));
            }
            if !(b.noise_bound > 0.0) {
                return Err(Error::config("benchmark.noise_bound", "must be > 0"));
            }
        }
        if let Some(c) = &self.convergence {
            if c.dts.len() < 2 || c.dts.iter().any(|dt| !(*dt > 0.0)) {
                return Err(Error::config("convergence.dts", "need at least two positive step sizes"));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be >= 1"));
        }
        Ok(())
    }
}

fn amplitudes(path: &str, a: &[[f64; 2]], dim: usize) -> Result<Vec<C64>> {
    if a.len() != dim {
        return Err(Error::config(path, format!("expected {dim} amplitudes, got {}", a.len())));
    }
    let v: Vec<C64> = a.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    let n = crate::linalg::norm(&v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::config(path, "state must have nonzero finite norm"));
    }
    Ok(v.into_iter().map(|c| c / n).collect())
}

/// Build the operator Σ c·P for the given Pauli terms.
pub fn build_operator(path: &str, terms: &[PauliTerm], n_qubits: usize) -> Result<ComplexMatrix> {
    if terms.is_empty() {
        return Err(Error::config(path, "operator needs at least one term"));
    }
    let dim = 1 << n_qubits;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (t, term) in terms.iter().enumerate() {
        let labels = term
            .pauli
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(0),
                'X' => Ok(1),
                'Y' => Ok(2),
                'Z' => Ok(3),
                other => Err(Error::config(format!("{path}[{t}].pauli"), format!("unknown Pauli label `{other}`"))),
            })
            .collect::<Result<Vec<usize>>>()?;
        if labels.len() != n_qubits {
            return Err(Error::config(
                format!("{path}[{t}].pauli"),
                format!("expected {n_qubits} labels, got {}", labels.len()),
            ));
        }
        if !term.coeff.is_finite() {
            return Err(Error::config(format!("{path}[{t}].coeff"), "must be finite"));
        }
        out.axpy(C64::new(term.coeff, 0.0), &pauli_string(&labels));
    }
    Ok(out)
}

impl ProblemConfig {
    /// Assemble the optimization problem with master seed `seed`.
    pub fn build(&self, seed: u64) -> Result<OptimizationProblem> {
        let n = self.n_qubits;
        if n == 0 || n > 6 {
            return Err(Error::config("problem.n_qubits", "must be between 1 and 6"));
        }
        let dim = 1usize << n;
        let controls = self
            .controls
            .iter()
            .enumerate()
            .map(|(j, c)| build_operator(&format!("problem.controls[{j}]"), c, n))
            .collect::<Result<Vec<_>>>()?;
        let noise = self
            .noise
            .iter()
            .enumerate()
            .map(|(l, c)| {
                let path = format!("problem.noise[{l}]");
                let op = build_operator(&format!("{path}.operator"), &c.operator, n)?;
                let spec = NoiseSpec::from(&c.spec);
                spec.validate().map_err(|e| Error::config(&path, e.to_string()))?;
                let ch = NoiseChannel::new(op, spec).map_err(|e| Error::config(&path, e.to_string()))?;
                Ok(match c.coupling {
                    Some(j) if j >= controls.len() => {
                        return Err(Error::config(format!("{path}.coupling"), "refers to a missing control channel"))
                    }
                    Some(j) => ch.coupled_to(j),
                    None => ch,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut dynamics = Dynamics::new(controls, noise).map_err(|e| Error::config("problem", e.to_string()))?;
        if let Some(d) = &self.drift {
            dynamics = dynamics
                .with_drift(build_operator("problem.drift", d, n)?)
                .map_err(|e| Error::config("problem.drift", e.to_string()))?;
        }
        dynamics = dynamics
            .with_scaling(self.scaling)
            .map_err(|e| Error::config("problem.scaling", e.to_string()))?;

        let target = match &self.target {
            TargetConfig::Hamiltonian { operator } => {
                Target::Hamiltonian(build_operator("problem.target.operator", operator, n)?)
            }
            TargetConfig::State { amplitudes: a } => {
                let phi = amplitudes("problem.target.amplitudes", a, dim)?;
                let mut h = ComplexMatrix::identity(dim);
                h.axpy(C64::new(-1.0, 0.0), &outer(&phi, &phi));
                Target::Hamiltonian(h)
            }
            TargetConfig::RandomHamiltonian { seed } => Target::Hamiltonian(random_hermitian(dim, *seed)?),
            TargetConfig::Unitary { matrix } => {
                if matrix.len() != dim {
                    return Err(Error::config("problem.target.matrix", format!("expected {dim} rows")));
                }
                let rows = matrix
                    .iter()
                    .enumerate()
                    .map(|(r, row)| {
                        if row.len() != dim {
                            return Err(Error::config(format!("problem.target.matrix[{r}]"), format!("expected {dim} entries")));
                        }
                        Ok(row.iter().map(|[re, im]| C64::new(*re, *im)).collect::<Vec<_>>())
                    })
                    .collect::<Result<Vec<_>>>()?;
                Target::Unitary(ComplexMatrix::from_rows(&rows))
            }
            TargetConfig::RandomUnitary { seed } => Target::Unitary(haar_random_unitary(dim, *seed)?),
        };
        let phi0 = match &self.initial_state {
            Some(a) => amplitudes("problem.initial_state", a, dim)?,
            None => {
                let mut v = vec![ZERO; dim];
                v[0] = C64::new(1.0, 0.0);
                v
            }
        };
        if !(self.grid.dt > 0.0) || !self.grid.dt.is_finite() {
            return Err(Error::config("problem.grid.dt", "must be > 0"));
        }
        if self.grid.steps == 0 {
            return Err(Error::config("problem.grid.steps", "must be >= 1"));
        }
        self.weights.validate().map_err(|e| Error::config("problem.weights", e.to_string()))?;
        if self.methods.is_empty() {
            return Err(Error::config("problem.methods", "at least one method is required"));
        }
        let problem = OptimizationProblem {
            dynamics,
            target,
            phi0,
            steps: self.grid.steps,
            dt: self.grid.dt,
            weights: self.weights,
            mu_off_after: self.schedule.mu_off_after,
            iterations: self.schedule.iterations,
            trials: self.trials.gradient,
            eval_trials: self.trials.evaluation,
            alpha: self.schedule.alpha,
            max_backtracks: self.schedule.max_backtracks,
            sufficient_decrease: self.schedule.sufficient_decrease,
            init_amplitude: self.schedule.init_amplitude,
            seed,
            scheme: self.scheme,
            scaled_form: self.scaled_form,
        };
        problem.validate()?;
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "experiment": "optimize",
        "seed": 3,
        "problem": {
            "n_qubits": 1,
            "controls": [[{"pauli": "X"}], [{"pauli": "Z"}]],
            "noise": [{"operator": [{"pauli": "X"}], "kind": "ou", "gamma": 0.05, "k": 0.1}],
            "target": {"kind": "hamiltonian", "operator": [{"pauli": "Y", "coeff": -1.0}]},
            "grid": {"dt": 0.01, "steps": 20},
            "weights": {"lambda": 0.1, "mu": 10.0, "nu": 1.0},
            "schedule": {"iterations": 2},
            "trials": {"gradient": 4, "evaluation": 4}
        }
    }"#;

    #[test]
    fn minimal_config_builds() {
        let cfg = parse_config(MINIMAL).unwrap();
        let p = cfg.problem.unwrap().build(cfg.seed).unwrap();
        assert_eq!(p.dynamics.controls.len(), 2);
        assert_eq!(p.steps, 20);
        assert_eq!(p.seed, 3);
    }

    #[test]
    fn missing_dt_names_the_key() {
        let text = MINIMAL.replace(r#""dt": 0.01, "#, "");
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "problem.grid.dt"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = MINIMAL.replace(r#""steps": 20"#, r#""steps": 20, "horizon": 1"#);
        match parse_config(&text).unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "problem.grid.horizon");
                assert!(message.contains("unknown field"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_gamma_rejected() {
        let text = MINIMAL.replace("0.05", "-0.05");
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "problem.noise[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_type_names_key() {
        let text = MINIMAL.replace(r#""steps": 20"#, r#""steps": "many""#);
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "problem.grid.steps"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn state_target_is_projector_complement() {
        let text = MINIMAL.replace(
            r#"{"kind": "hamiltonian", "operator": [{"pauli": "Y", "coeff": -1.0}]}"#,
            r#"{"kind": "state", "amplitudes": [[1, 0], [1, 0]]}"#,
        );
        let cfg = parse_config(&text).unwrap();
        let p = cfg.problem.unwrap().build(0).unwrap();
        match p.target {
            Target::Hamiltonian(h) => {
                // I − |+⟩⟨+| = ½(I − X)
                assert!((h[(0, 0)].re - 0.5).abs() < 1e-15);
                assert!((h[(0, 1)].re + 0.5).abs() < 1e-15);
            }
            Target::Unitary(_) => panic!("expected a Hamiltonian target"),
        }
    }

    #[test]
    fn unknown_noise_key_rejected() {
        let text = MINIMAL.replace(r#""k": 0.1}"#, r#""k": 0.1, "tau": 2}"#);
        assert!(matches!(parse_config(&text).unwrap_err(), Error::Config { .. }));
    }

    #[test]
    fn bad_pauli_label() {
        let text = MINIMAL.replace(r#"[{"pauli": "Z"}]"#, r#"[{"pauli": "Q"}]"#);
        match parse_config(&text).unwrap_err() {
            Error::Config { path, .. } => assert_eq!(path, "problem.controls[1][0].pauli"),
            other => panic!("unexpected {other:?}"),
        }
    }
}

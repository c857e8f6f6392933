//! Experiment orchestration behind the command-line tool: each runner takes a
//! validated configuration, writes its artifacts into an output directory
//! and returns a machine-readable summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::checks::{self, CheckOutcome};
use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::outer;
use crate::optimizer::{
    benchmark_relative_error, gate_state_fidelity_spread, optimize_from, separated, BenchmarkSummary, Method,
    OptimizationProblem, ProblemTemplate, RunHistory, Target,
};
use crate::rng::stream_seed;
use crate::sde::Scheme;
use crate::sse::{ensemble_density, fmt_f64, lindblad_reference, trace_distance, ControlPulse, Simulator, SseOptions};
use crate::stats::fit_slope;

/// Output directory with atomic writes: each file is written to a temporary
/// sibling and renamed into place.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write_with<F>(&self, name: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut file = std::io::BufWriter::new(fs::File::create(&tmp)?);
            f(&mut file)?;
            file.flush()?;
        }
        fs::rename(&tmp, &target)?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }
}

/// Config echo and seed manifest, written for every run.
fn write_provenance(out: &OutputDir, cfg: &RunConfig, extra_seeds: Value) -> Result<()> {
    out.write_json("config.json", cfg)?;
    out.write_json(
        "seeds.json",
        &json!({
            "master_seed": cfg.seed,
            "threads": rayon::current_num_threads(),
            "version": env!("CARGO_PKG_VERSION"),
            "derived": extra_seeds,
        }),
    )?;
    Ok(())
}

fn problem_of(cfg: &RunConfig) -> Result<OptimizationProblem> {
    cfg.problem
        .as_ref()
        .ok_or_else(|| Error::config("problem", "required for this experiment"))?
        .build(cfg.seed)
}

fn methods_of(cfg: &RunConfig) -> Vec<Method> {
    cfg.problem.as_ref().map(|p| p.methods.clone()).unwrap_or_else(|| Method::ALL.to_vec())
}

/// Runs the experiment named in `cfg` and returns its summary.
pub fn run(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let summary = match cfg.experiment {
        Experiment::Simulate => run_simulate(cfg, out)?,
        Experiment::Optimize => run_optimize(cfg, out)?,
        Experiment::Gate => run_gate(cfg, out)?,
        Experiment::Benchmark => run_benchmark(cfg, out)?,
        Experiment::OracleCheck => run_oracle_check(cfg, out, false)?.0,
        Experiment::Convergence => run_convergence(cfg, out)?,
    };
    out.write_json("summary.json", &summary)?;
    Ok(summary)
}

/// Ensemble fidelity series for the problem's initial (or a constant) pulse;
/// for white noise also the trace distance to the Lindblad solution.
pub fn run_simulate(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let problem = problem_of(cfg)?;
    let sim_cfg = cfg.simulate.clone().unwrap_or(crate::config::SimulateConfig { trials: 1000, constant_pulse: None });
    let pulse = match &sim_cfg.constant_pulse {
        Some(values) => {
            if values.len() != problem.dynamics.controls.len() {
                return Err(Error::config("simulate.constant_pulse", "one value per control channel"));
            }
            ControlPulse::constant(values, problem.steps, problem.dt)
        }
        None => problem.initial_pulse(),
    };
    let seed = stream_seed(cfg.seed, 1);
    write_provenance(out, cfg, json!({ "trajectories": seed }))?;
    let sim = Simulator::new(&problem.dynamics, &pulse)?;
    let acc = sim.fidelity_ensemble(&problem.phi0, problem.scheme, sim_cfg.trials, seed, SseOptions::default())?;
    let (m, s) = (acc.mean(), acc.stderr());
    out.write_with("fidelity.csv", |w| {
        writeln!(w, "t,fidelity_mean,fidelity_stderr")?;
        for i in 0..m.len() {
            writeln!(w, "{},{},{}", fmt_f64(i as f64 * problem.dt), fmt_f64(m[i]), fmt_f64(s[i]))?;
        }
        Ok(())
    })?;

    let white = problem.dynamics.noise.iter().all(|c| c.spec.kind == crate::noise::NoiseKind::White);
    let lindblad = if white && !problem.dynamics.noise.is_empty() {
        let records = (0..sim_cfg.trials.min(2000))
            .map(|i| sim.run(&problem.phi0, problem.scheme, crate::rng::trial_seed(seed, i as u64), SseOptions::default()))
            .collect::<Result<Vec<_>>>()?;
        let rho = ensemble_density(&records)?;
        let reference = lindblad_reference(&problem.dynamics, &pulse, &outer(&problem.phi0, &problem.phi0))?;
        Some(trace_distance(rho.last().expect("non-empty"), reference.last().expect("non-empty"))?)
    } else {
        None
    };
    Ok(json!({
        "experiment": "simulate",
        "trials": sim_cfg.trials,
        "final_fidelity_mean": m.last(),
        "final_fidelity_stderr": s.last(),
        "lindblad_trace_distance": lindblad,
    }))
}

fn write_history(out: &OutputDir, h: &RunHistory, method: Method) -> Result<()> {
    out.write_with(&format!("history_{}.csv", method.name()), |w| h.write_csv(w))?;
    out.write_with(&format!("pulse_{}.csv", method.name()), |w| h.write_pulse_csv(w))?;
    Ok(())
}

/// Runs each configured method from the same z⁽⁰⁾; returns the histories.
fn run_methods(problem: &OptimizationProblem, methods: &[Method], out: &OutputDir) -> Result<Vec<(Method, RunHistory)>> {
    let z0 = problem.initial_pulse();
    methods
        .iter()
        .map(|&m| {
            let mut h = optimize_from(&problem.for_method(m), z0.clone())?;
            h.method = Some(m);
            write_history(out, &h, m)?;
            Ok((m, h))
        })
        .collect()
}

fn comparison(runs: &[(Method, RunHistory)]) -> Value {
    let find = |m: Method| runs.iter().find(|(k, _)| *k == m).map(|(_, h)| h.final_error);
    let mut v = json!({});
    if let Some(base) = find(Method::Vqoc) {
        for m in [Method::FvqocEnd, Method::FvqocContinuous] {
            if let Some(e) = find(m) {
                v[m.name()] = json!({
                    "relative_change": (e.error - base.error) / base.error,
                    "beats_vqoc": e.error < base.error,
                    "separated_by_one_stderr": separated(&e, &base),
                });
            }
        }
    }
    v
}

pub fn run_optimize(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let problem = problem_of(cfg)?;
    if matches!(problem.target, Target::Unitary(_)) {
        return Err(Error::config("problem.target.kind", "use the gate experiment for unitary targets"));
    }
    write_provenance(out, cfg, seed_manifest(&problem))?;
    let runs = run_methods(&problem, &methods_of(cfg), out)?;
    let finals: Value = runs.iter().map(|(m, h)| (m.name().to_string(), json!(h.final_error))).collect();
    Ok(json!({
        "experiment": "optimize",
        "iterations": problem.iterations,
        "evaluation_trials": problem.eval_trials,
        "final_error": finals,
        "versus_vqoc": comparison(&runs),
    }))
}

pub fn run_gate(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let problem = problem_of(cfg)?;
    let haar_states = cfg.gate.as_ref().map(|g| g.haar_states).unwrap_or(64);
    write_provenance(out, cfg, seed_manifest(&problem))?;
    let runs = run_methods(&problem, &methods_of(cfg), out)?;
    let spread_seed = stream_seed(cfg.seed, 7);
    let mut finals = json!({});
    for (m, h) in &runs {
        let (mean, var) = gate_state_fidelity_spread(&problem, &h.final_pulse, problem.eval_trials, haar_states, spread_seed)?;
        finals[m.name()] = json!({
            "j_err": h.final_error.error,
            "j_err_stderr": h.final_error.stderr,
            "state_fidelity_mean": mean,
            "state_fidelity_variance": var,
        });
    }
    Ok(json!({
        "experiment": "gate",
        "haar_states": haar_states,
        "final": finals,
        "versus_vqoc": comparison(&runs),
    }))
}

fn seed_manifest(problem: &OptimizationProblem) -> Value {
    json!({
        "initial_pulse": stream_seed(problem.seed, 0),
        "evaluation": stream_seed(problem.seed, 1),
        "history": stream_seed(problem.seed, 2),
        "gradient_iteration_k": "stream_seed(master, 100 + k)",
    })
}

/// Template for the randomized benchmark: fixed noise with (0.1, 250, 1) and
/// μ off after 10 iterations, or scaled noise with (0.1, 60, 1) and μ off
/// after 15.
pub fn benchmark_template(scaled: bool) -> ProblemTemplate {
    let mut t = ProblemTemplate::default();
    if scaled {
        t.weights.mu = 60.0;
        t.mu_off_after = Some(15);
    }
    t
}

pub fn run_benchmark(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let bench = cfg
        .benchmark
        .clone()
        .ok_or_else(|| Error::config("benchmark", "required for this experiment"))?;
    write_provenance(out, cfg, json!({ "problem_i": "trial_seed(master, i)" }))?;
    let template = benchmark_template(bench.scaled);
    let summary = if bench.scaled {
        crate::optimizer::benchmark_relative_error_scaled(bench.problems, cfg.seed, bench.noise_bound, &template, |o| {
            log_outcome(o)
        })?
    } else {
        benchmark_relative_error(bench.problems, cfg.seed, bench.noise_bound, &template, |o| log_outcome(o))?
    };
    out.write_with("relative_errors.csv", |w| summary.write_csv(w))?;
    out.write_with("relative_error_histogram.csv", |w| write_histogram(w, &summary, 20))?;
    Ok(json!({
        "experiment": "benchmark",
        "problems": bench.problems,
        "scaled": bench.scaled,
        "win_rate_end": summary.win_rate_end,
        "win_rate_continuous": summary.win_rate_continuous,
        "mean_relative_change_end": summary.mean_rel_end,
        "mean_relative_change_continuous": summary.mean_rel_continuous,
        "stderr_relative_change_end": summary.stderr_rel_end,
        "stderr_relative_change_continuous": summary.stderr_rel_continuous,
    }))
}

fn log_outcome(o: &crate::optimizer::ProblemOutcome) {
    eprintln!(
        "problem {:>3}: vqoc {:.5} end {:.5} continuous {:.5} (relative {:+.3} / {:+.3})",
        o.index, o.vqoc.error, o.fvqoc_end.error, o.fvqoc_continuous.error, o.rel_end, o.rel_continuous
    );
}

fn write_histogram(w: &mut dyn Write, s: &BenchmarkSummary, bins: usize) -> std::io::Result<()> {
    let all: Vec<f64> = s.outcomes.iter().flat_map(|o| [o.rel_end, o.rel_continuous]).collect();
    let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let bin_of = |x: f64| (((x - lo) / width) as usize).min(bins - 1);
    let mut end = vec![0usize; bins];
    let mut cont = vec![0usize; bins];
    for o in &s.outcomes {
        end[bin_of(o.rel_end)] += 1;
        cont[bin_of(o.rel_continuous)] += 1;
    }
    writeln!(w, "bin_low,bin_high,count_end,count_continuous")?;
    for b in 0..bins {
        let l = lo + b as f64 * width;
        writeln!(w, "{},{},{},{}", fmt_f64(l), fmt_f64(l + width), end[b], cont[b])?;
    }
    Ok(())
}

/// Trial counts for the oracle suite; `quick` divides them by ten.
#[derive(Clone, Copy, Debug)]
pub struct CheckBudget {
    pub dephasing: usize,
    pub ou_paths: usize,
    pub weak_paths: usize,
    pub fixed_gradient: usize,
    pub scaled_gradient: usize,
    pub gate: usize,
    pub oracle_mc: usize,
}

impl CheckBudget {
    pub fn full() -> Self {
        Self {
            dephasing: 10_000,
            ou_paths: 100_000,
            weak_paths: 100_000,
            fixed_gradient: 2000,
            scaled_gradient: 4000,
            gate: 2000,
            oracle_mc: 10_000,
        }
    }

    pub fn quick() -> Self {
        let f = Self::full();
        Self {
            dephasing: f.dephasing / 10,
            ou_paths: f.ou_paths / 10,
            weak_paths: f.weak_paths / 10,
            fixed_gradient: f.fixed_gradient / 10,
            scaled_gradient: f.scaled_gradient / 10,
            gate: f.gate / 10,
            oracle_mc: f.oracle_mc / 10,
        }
    }
}

/// Every analytic and Monte Carlo oracle comparison.
pub fn oracle_suite(seed: u64, budget: CheckBudget) -> Result<Vec<CheckOutcome>> {
    let s = |k| stream_seed(seed, k);
    let mut v = vec![
        checks::dephasing(budget.dephasing, s(1))?,
        checks::ou_cosine(budget.ou_paths, s(2))?,
        checks::representation(s(3))?,
        checks::vqoc_fd(s(4))?.1,
        checks::fixed_gradient_fd(budget.fixed_gradient, s(5))?.1,
        checks::scaled_gradient_fd(budget.scaled_gradient, s(6), Default::default())?.1,
        checks::weak_order(budget.weak_paths, s(7))?.2,
        checks::factoring(s(8))?,
        checks::gate_invariance(budget.gate, checks::GATE_INVARIANCE_GAMMA, s(9))?,
        checks::second_order_vs_mc(budget.oracle_mc, s(10))?,
        checks::noncommuting_vs_mc(budget.oracle_mc, s(11))?,
        checks::magnus_order()?,
    ];
    v.extend(checks::conservation(s(12))?);
    Ok(v)
}

/// Returns the summary and whether every check passed.
pub fn run_oracle_check(cfg: &RunConfig, out: &OutputDir, quick: bool) -> Result<(Value, bool)> {
    write_provenance(out, cfg, json!({ "check_k": "stream_seed(master, k)" }))?;
    let budget = if quick { CheckBudget::quick() } else { CheckBudget::full() };
    let outcomes = oracle_suite(cfg.seed, budget)?;
    out.write_with("checks.csv", |w| {
        writeln!(w, "check,passed,detail")?;
        for c in &outcomes {
            writeln!(w, "{},{},\"{}\"", c.name, c.passed, c.detail.replace('"', "'"))?;
        }
        Ok(())
    })?;
    let all = outcomes.iter().all(|c| c.passed);
    Ok((json!({ "experiment": "oracle-check", "all_passed": all, "checks": outcomes }), all))
}

pub fn run_convergence(cfg: &RunConfig, out: &OutputDir) -> Result<Value> {
    let conv = cfg.convergence.clone().unwrap_or(crate::config::ConvergenceConfig {
        paths: 100_000,
        dts: checks::WEAK_ORDER_DTS.to_vec(),
    });
    write_provenance(out, cfg, json!({ "scheme_dt_index": "trial_seed(stream_seed(master, index), path)" }))?;
    let mut slopes = json!({});
    let mut rows = Vec::new();
    for (name, scheme) in [("euler", Scheme::Euler), ("platen", Scheme::Platen)] {
        let errs = checks::weak_errors(scheme, &conv.dts, conv.paths, cfg.seed)?;
        let xs: Vec<f64> = errs.iter().map(|e| e.0.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e.1.abs().ln()).collect();
        slopes[name] = json!(fit_slope(&xs, &ys));
        rows.extend(errs.into_iter().map(|(dt, m, s)| (name, dt, m, s)));
    }
    out.write_with("weak_errors.csv", |w| {
        writeln!(w, "scheme,dt,weak_error,stderr")?;
        for (n, dt, m, s) in &rows {
            writeln!(w, "{n},{},{},{}", fmt_f64(*dt), fmt_f64(*m), fmt_f64(*s))?;
        }
        Ok(())
    })?;
    Ok(json!({ "experiment": "convergence", "paths": conv.paths, "slopes": slopes }))
}

/// Process exit code for an error: 2 for configuration problems, 3 for
/// numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericalBlowup { .. }
        | Error::IntegrationQuality { .. }
        | Error::IllConditioned { .. }
        | Error::ConventionViolation(_)
        | Error::NonFiniteCost { .. }
        | Error::Singular => 3,
        _ => 2,
    }
}

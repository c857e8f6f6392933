//! Python bindings: configuration-driven runs plus a few direct entry points
//! for noise sampling, oracles and trajectory ensembles.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fvqoc_core::config::parse_config;
use fvqoc_core::experiments::{self, exit_code, OutputDir};
use fvqoc_core::linalg::{haar_random_unitary as haar, sigma_z, QuantumState, C64};
use fvqoc_core::noise::{self, InitMode, NoiseSpec};
use fvqoc_core::sde::Scheme;
use fvqoc_core::sse::{ControlPulse, Dynamics, NoiseChannel, Simulator, SseOptions};
use fvqoc_core::Error;

/// Errors caused by the caller's input surface as `ValueError`; everything
/// else as `RuntimeError`.
pub fn is_input_error(err: &Error) -> bool {
    exit_code(err) == 2
}

fn to_py(err: Error) -> PyErr {
    if is_input_error(&err) {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn init_mode(stationary: bool) -> InitMode {
    if stationary {
        InitMode::Stationary
    } else {
        InitMode::Calibrated
    }
}

/// Run the experiment described by a JSON configuration and return the
/// summary as a JSON string. Artifacts are written to `out_dir`.
#[pyfunction]
fn run_config(py: Python<'_>, config_json: &str, out_dir: &str) -> PyResult<String> {
    let cfg = parse_config(config_json).map_err(to_py)?;
    let out = OutputDir::create(out_dir).map_err(to_py)?;
    let summary = py.detach(|| experiments::run(&cfg, &out)).map_err(to_py)?;
    Ok(summary.to_string())
}

/// Sample an OU path; returns (x, dw) with len(x) = steps + 1.
#[pyfunction]
#[pyo3(signature = (gamma, k, dt, steps, seed, stationary=false))]
fn sample_ou_path(gamma: f64, k: f64, dt: f64, steps: usize, seed: u64, stationary: bool) -> PyResult<(Vec<f64>, Vec<f64>)> {
    ou_path(gamma, k, dt, steps, seed, stationary).map_err(to_py)
}

pub fn ou_path(gamma: f64, k: f64, dt: f64, steps: usize, seed: u64, stationary: bool) -> fvqoc_core::Result<(Vec<f64>, Vec<f64>)> {
    let spec = NoiseSpec::ou(gamma, k).with_init(init_mode(stationary));
    let p = noise::sample_path(&spec, dt, steps, seed)?;
    Ok((p.x, p.dw))
}

/// Closed-form E[cos(α(X_t − X₀))] for OU noise.
#[pyfunction]
#[pyo3(signature = (alpha, t, k, gamma, stationary=false))]
fn expected_cos(alpha: f64, t: f64, k: f64, gamma: f64, stationary: bool) -> f64 {
    noise::expected_cos(alpha, t, k, gamma, init_mode(stationary))
}

/// Closed-form E[X_t^{2n}] for OU noise started at zero.
#[pyfunction]
fn ou_even_moment(n: u32, t: f64, k: f64, gamma: f64) -> f64 {
    noise::ou_even_moment(n, t, k, gamma)
}

/// Mean and standard error of the fidelity series for pure dephasing by
/// white σZ noise from |+⟩.
#[pyfunction]
fn dephasing_ensemble(py: Python<'_>, gamma: f64, dt: f64, steps: usize, trials: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    py.detach(|| {
        let channel = NoiseChannel::new(sigma_z(), NoiseSpec::white(gamma))?;
        let d = Dynamics::new(vec![], vec![channel])?;
        let pulse = ControlPulse::empty(dt, steps);
        let sim = Simulator::new(&d, &pulse)?;
        let acc = sim.fidelity_ensemble(QuantumState::plus().amplitudes(), Scheme::Platen, trials, seed, SseOptions::default())?;
        Ok((acc.mean(), acc.stderr()))
    })
    .map_err(to_py)
}

/// Haar-random unitary as nested lists of complex numbers.
#[pyfunction]
fn haar_random_unitary(dim: usize, seed: u64) -> PyResult<Vec<Vec<C64>>> {
    unitary_rows(dim, seed).map_err(to_py)
}

pub fn unitary_rows(dim: usize, seed: u64) -> fvqoc_core::Result<Vec<Vec<C64>>> {
    let u = haar(dim, seed)?;
    Ok((0..dim).map(|r| u.row(r).to_vec()).collect())
}

/// Run the oracle suite; returns (name, passed, detail) per check.
#[pyfunction]
#[pyo3(signature = (seed, quick=true))]
fn oracle_checks(py: Python<'_>, seed: u64, quick: bool) -> PyResult<Vec<(String, bool, String)>> {
    let budget = if quick { experiments::CheckBudget::quick() } else { experiments::CheckBudget::full() };
    let outcomes = py.detach(|| experiments::oracle_suite(seed, budget)).map_err(to_py)?;
    Ok(outcomes.into_iter().map(|c| (c.name, c.passed, c.detail)).collect())
}

#[pymodule]
fn fvqoc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(sample_ou_path, m)?)?;
    m.add_function(wrap_pyfunction!(expected_cos, m)?)?;
    m.add_function(wrap_pyfunction!(ou_even_moment, m)?)?;
    m.add_function(wrap_pyfunction!(dephasing_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(haar_random_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_checks, m)?)?;
    Ok(())
}

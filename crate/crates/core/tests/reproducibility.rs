use fvqoc_core::config::parse_config;
use fvqoc_core::optimizer::{optimize_from, Method, OptimizationProblem};

fn problem() -> OptimizationProblem {
    let cfg = parse_config(
        r#"{
        "experiment": "optimize",
        "seed": 11,
        "problem": {
            "n_qubits": 1,
            "controls": [[{"pauli": "X"}], [{"pauli": "Y"}]],
            "noise": [{"operator": [{"pauli": "Z"}], "kind": "ou", "gamma": 0.05, "k": 0.2}],
            "target": {"kind": "hamiltonian", "operator": [{"pauli": "Y", "coeff": -1.0}]},
            "initial_state": [[1, 0], [0, 0]],
            "grid": {"dt": 0.05, "steps": 12},
            "weights": {"lambda": 0.1, "mu": 20.0, "nu": 1.0},
            "schedule": {"iterations": 3},
            "trials": {"gradient": 16, "evaluation": 16}
        }
    }"#,
    )
    .unwrap();
    cfg.problem.unwrap().build(cfg.seed).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = problem();
    let z0 = p.initial_pulse();
    let one = in_pool(1, || optimize_from(&p, z0.clone()).unwrap());
    let four = in_pool(4, || optimize_from(&p, z0.clone()).unwrap());
    assert_eq!(one.final_pulse.channels(), four.final_pulse.channels());
    assert_eq!(one.final_error.error.to_bits(), four.final_error.error.to_bits());
}

#[test]
fn fidelity_term_switched_off_from_the_start_matches_vqoc() {
    let p = problem();
    let z0 = p.initial_pulse();
    let vqoc = optimize_from(&p.for_method(Method::Vqoc), z0.clone()).unwrap();
    let mut off = p.for_method(Method::FvqocContinuous);
    off.mu_off_after = Some(0);
    let fvqoc = optimize_from(&off, z0).unwrap();
    assert_eq!(vqoc.final_pulse.channels(), fvqoc.final_pulse.channels());
    for (a, b) in vqoc.records.iter().zip(&fvqoc.records) {
        assert_eq!(a.cost.to_bits(), b.cost.to_bits());
    }
}

#[test]
fn same_seed_same_history() {
    let p = problem();
    let a = optimize_from(&p, p.initial_pulse()).unwrap();
    let b = optimize_from(&p, p.initial_pulse()).unwrap();
    assert_eq!(a.final_pulse.channels(), b.final_pulse.channels());
    let mut other = p.clone();
    other.seed += 1;
    assert_ne!(other.initial_pulse().channels(), p.initial_pulse().channels());
}

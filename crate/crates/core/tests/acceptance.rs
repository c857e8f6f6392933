//! Acceptance suite: one PASS/FAIL line per criterion. Pass criterion
//! numbers as arguments to run a subset, e.g.
//! `cargo test -p fvqoc-core --test acceptance -- 3 6`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use fvqoc_core::checks::{self, CheckOutcome};
use fvqoc_core::config::load_config;
use fvqoc_core::optimizer::{benchmark_relative_error, optimize_from, separated, Method, ProblemTemplate};
use fvqoc_core::rng::stream_seed;
use fvqoc_core::Result;

const SEED: u64 = 20_240_601;

fn seed(criterion: u64) -> u64 {
    stream_seed(SEED, criterion)
}

fn all_passed(outcomes: &[CheckOutcome]) -> (bool, String) {
    let ok = outcomes.iter().all(|o| o.passed);
    let detail = outcomes.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(" | ");
    (ok, detail)
}

fn dephasing() -> Result<(bool, String)> {
    let o = checks::dephasing(10_000, seed(1))?;
    Ok((o.passed, o.detail))
}

fn ou_cosine() -> Result<(bool, String)> {
    let o = checks::ou_cosine(100_000, seed(2))?;
    Ok((o.passed, o.detail))
}

fn representation() -> Result<(bool, String)> {
    let o = checks::representation(seed(3))?;
    Ok((o.passed, o.detail))
}

fn gradients() -> Result<(bool, String)> {
    let (_, vqoc) = checks::vqoc_fd(seed(4))?;
    let (_, fixed) = checks::fixed_gradient_fd(2000, stream_seed(seed(4), 1))?;
    let (_, scaled) = checks::scaled_gradient_fd(4000, stream_seed(seed(4), 2), Default::default())?;
    Ok(all_passed(&[vqoc, fixed, scaled]))
}

fn weak_order() -> Result<(bool, String)> {
    let (_, _, o) = checks::weak_order(100_000, seed(5))?;
    Ok((o.passed, o.detail))
}

fn factoring() -> Result<(bool, String)> {
    let o = checks::factoring(seed(6))?;
    Ok((o.passed, o.detail))
}

fn gate_invariance() -> Result<(bool, String)> {
    let o = checks::gate_invariance(2000, checks::GATE_INVARIANCE_GAMMA, seed(7))?;
    Ok((o.passed, o.detail))
}

fn fixed_noise_outcome() -> Result<(bool, String)> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixed_noise.json");
    let cfg = load_config(&path)?;
    let problem = cfg.problem.expect("packaged config has a problem").build(cfg.seed)?;
    let z0 = problem.initial_pulse();
    let vqoc = optimize_from(&problem.for_method(Method::Vqoc), z0.clone())?.final_error;
    let cont = optimize_from(&problem.for_method(Method::FvqocContinuous), z0)?.final_error;
    let ok = separated(&cont, &vqoc) && problem.eval_trials == 200;
    Ok((
        ok,
        format!(
            "continuous J_err {:.5}±{:.5} vs VQOC {:.5}±{:.5} ({:.2} combined stderr, need ≥ 1)",
            cont.error,
            cont.stderr,
            vqoc.error,
            vqoc.stderr,
            (vqoc.error - cont.error) / (cont.stderr.powi(2) + vqoc.stderr.powi(2)).sqrt()
        ),
    ))
}

fn win_rate() -> Result<(bool, String)> {
    let s = benchmark_relative_error(50, seed(9), 0.1, &ProblemTemplate::default(), |_| {})?;
    let ok = s.win_rate_continuous >= 0.7 && s.mean_rel_continuous < 0.0;
    Ok((
        ok,
        format!(
            "continuous win rate {:.0}% (need ≥ 70%), mean relative change {:+.3}±{:.3}; end-cost win rate {:.0}%, mean {:+.3}",
            100.0 * s.win_rate_continuous,
            s.mean_rel_continuous,
            s.stderr_rel_continuous,
            100.0 * s.win_rate_end,
            s.mean_rel_end
        ),
    ))
}

fn analytic_oracles() -> Result<(bool, String)> {
    Ok(all_passed(&[
        checks::second_order_vs_mc(10_000, seed(10))?,
        checks::noncommuting_vs_mc(10_000, stream_seed(seed(10), 1))?,
        checks::magnus_order()?,
    ]))
}

fn conservation() -> Result<(bool, String)> {
    Ok(all_passed(&checks::conservation(seed(11))?))
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<(bool, String)>);

fn criteria() -> Vec<Criterion> {
    let s = Duration::from_secs;
    vec![
        (1, "dephasing oracle", s(60), dephasing),
        (2, "OU cosine moments", s(30), ou_cosine),
        (3, "representation equivalence", s(60), representation),
        (4, "gradient correctness", s(600), gradients),
        (5, "integrator weak orders", s(300), weak_order),
        (6, "factoring lemma", s(30), factoring),
        (7, "gate white-noise invariance", s(300), gate_invariance),
        (8, "fixed-noise benchmark direction", s(900), fixed_noise_outcome),
        (9, "randomized win rate", s(7200), win_rate),
        (10, "analytic oracle cross-checks", s(600), analytic_oracles),
        (11, "conservation suite", s(120), conservation),
    ]
}

fn main() -> ExitCode {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    for (n, name, budget, run) in criteria() {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok((ok, detail)) => (ok && elapsed <= budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failures += 1;
        }
        println!(
            "criterion {n:>2} {}: {name} [{:.1}s, budget {}s] {detail}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

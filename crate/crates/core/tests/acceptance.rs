//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use qgspec_core::asymptotics::{
    fit_branches, lowest_eigenvalues, predict, rescaling_defect, sweep, unperturbed_spectrum,
    verify, BranchClass, BranchTable, Prediction, SweepOptions,
};
use qgspec_core::graph::{MetricGraph, Tolerances};
use qgspec_core::secular::{find_eigenvalues, spectral_lower_bound, weyl_sanity, Window};
use qgspec_core::subspaces::{check_nrc_equivalence, slow_subspace};
use qgspec_core::Problem;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn predict_problem(p: &Problem) -> Result<Prediction, String> {
    predict(&p.graph, &p.conditions, p.num_fast, &p.solver).map_err(|e| e.to_string())
}

/// Predict, sweep, fit and verify a fixture on its own scale grid.
fn sweep_problem(p: &Problem) -> Result<(Prediction, BranchTable), String> {
    let prediction = predict_problem(p)?;
    let opts = SweepOptions {
        num_branches: prediction.m0 + p.num_fast,
        solver: p.solver.clone(),
    };
    let table = sweep(&p.graph, &p.conditions, &p.epsilons, &opts).map_err(|e| e.to_string())?;
    let table = fit_branches(&table);
    verify(&prediction, &table).map_err(|e| e.to_string())?;
    Ok((prediction, table))
}

fn criterion_1() -> Outcome {
    let p = fixture("dirichlet");
    let mut worst = 0.0f64;
    for eps in [1.0, 0.1, 0.01] {
        let g = p.graph.scaled(eps).unwrap();
        let ev = lowest_eigenvalues(&g, &p.conditions, 10, &p.solver).map_err(|e| e.to_string())?;
        for (n, &lambda) in ev.iter().enumerate() {
            let exact = (PI * (n + 1) as f64 / eps).powi(2);
            worst = worst.max(relative(lambda, exact));
        }
    }
    ensure(worst <= 1e-8, || format!("worst relative error {worst:.3e}"))?;
    let m0 = predict_problem(&p)?.m0;
    ensure(m0 == 0, || format!("m0 = {m0}"))?;
    Ok(format!("worst relative error {worst:.2e}, m0 = 0"))
}

fn criterion_2() -> Outcome {
    let p = fixture("neumann");
    let mut worst = 0.0f64;
    for &eps in &p.epsilons {
        let g = p.graph.scaled(eps).unwrap();
        let ev = lowest_eigenvalues(&g, &p.conditions, 1, &p.solver).map_err(|e| e.to_string())?;
        worst = worst.max(ev[0].abs());
    }
    ensure(worst < 1e-9, || format!("|lambda_1| up to {worst:.3e}"))?;
    let (pred, table) = sweep_problem(&p)?;
    let counts = (pred.n_minus, pred.n_zero, pred.n_plus);
    ensure(counts == (0, 1, 0), || format!("counts {counts:?}"))?;
    let exotic: Vec<f64> = table
        .branches
        .iter()
        .filter(|b| b.class == Some(BranchClass::Exotic))
        .map(|b| b.limit.unwrap())
        .collect();
    ensure(exotic.len() == 1 && exotic[0].abs() <= 1e-6, || format!("exotic limits {exotic:?}"))?;
    Ok(format!("max |lambda_1| {worst:.2e}, exotic limit {:.2e}", exotic[0]))
}

fn criterion_3() -> Outcome {
    let mut details = Vec::new();
    for (name, gamma) in [("robin_neumann_pos", 1.0), ("robin_neumann_neg", -1.0)] {
        let p = fixture(name);
        let (pred, table) = sweep_problem(&p)?;
        let expected = if gamma > 0.0 { (0, 0, 1) } else { (1, 0, 0) };
        let counts = (pred.n_minus, pred.n_zero, pred.n_plus);
        ensure(counts == expected, || format!("gamma {gamma}: counts {counts:?}"))?;
        let &(eps, lambda) = table.branches[0].samples.last().unwrap();
        let gap = relative(lambda * eps, gamma);
        ensure(gap <= 0.15, || format!("gamma {gamma}: lambda eps = {} ", lambda * eps))?;
        details.push(format!("gamma {gamma:+}: lambda_1 eps = {:.6}", lambda * eps));
    }
    Ok(details.join(", "))
}

fn criterion_4() -> Outcome {
    let mut details = Vec::new();
    for name in ["robin_dirichlet_neg", "robin_dirichlet_pos"] {
        let p = fixture(name);
        let (pred, table) = sweep_problem(&p)?;
        ensure(pred.m0 == 0, || format!("{name}: m0 = {}", pred.m0))?;
        let alphas: Vec<f64> = table.branches.iter().filter_map(|b| b.alpha).collect();
        ensure(
            table.count(BranchClass::Fast) == table.branches.len(),
            || format!("{name}: not all branches fast"),
        )?;
        details.push(format!(
            "{name}: alpha in [{:.4}, {:.4}]",
            alphas.iter().copied().fold(f64::INFINITY, f64::min),
            alphas.iter().copied().fold(0.0, f64::max)
        ));
    }
    Ok(details.join(", "))
}

fn criterion_5() -> Outcome {
    let mut details = Vec::new();
    for (name, gamma) in [("robin_robin_1", 1.0f64), ("robin_robin_2", 2.0)] {
        let p = fixture(name);
        let target = -gamma * gamma;
        let mut worst_residual = 0.0f64;
        for &eps in &p.epsilons {
            let g = p.graph.scaled(eps).unwrap();
            let lo = spectral_lower_bound(&g, &p.conditions) * 1.05 - 1.0;
            let spec = find_eigenvalues(&g, &p.conditions, Window::new(lo, 0.0), &p.solver).map_err(|e| e.to_string())?;
            let hit = spec
                .eigenvalues
                .iter()
                .find(|e| relative(e.lambda, target) < 1e-8)
                .ok_or_else(|| format!("{name}: -gamma^2 missing at eps {eps}"))?;
            worst_residual = worst_residual.max(hit.residual);
        }
        ensure(worst_residual < 1e-8, || format!("{name}: residual {worst_residual:.3e}"))?;
        let (pred, table) = sweep_problem(&p)?;
        ensure(pred.n_zero == 1, || format!("{name}: n_zero = {}", pred.n_zero))?;
        let limits: Vec<f64> = table
            .branches
            .iter()
            .filter(|b| b.class == Some(BranchClass::Exotic))
            .map(|b| b.limit.unwrap())
            .collect();
        ensure(
            limits.len() == 1 && (limits[0] - target).abs() <= 1e-6,
            || format!("{name}: exotic limits {limits:?}"),
        )?;
        details.push(format!(
            "gamma {gamma}: limit {:.10}, residual {worst_residual:.1e}",
            limits[0]
        ));
    }
    Ok(details.join(", "))
}

fn criterion_6() -> Outcome {
    let mut resonant = 0;
    for seed in 0..100u64 {
        let cond = mixed_random(3, seed);
        let report = check_nrc_equivalence(&cond).map_err(|e| format!("seed {seed}: {e}"))?;
        if report.n_zero > 0 {
            resonant += 1;
        }
    }
    Ok(format!("100/100 equal, {resonant} with nonzero nullity"))
}

fn criterion_7() -> Outcome {
    let p = fixture("two_edge_mixed");
    let mut worst = 0.0f64;
    for eps in [0.3, 0.1] {
        let d = rescaling_defect(&p.graph, &p.conditions, eps, 6, &p.solver).map_err(|e| e.to_string())?;
        worst = worst.max(d);
    }
    ensure(worst <= 1e-6, || format!("relative defect {worst:.3e}"))?;
    Ok(format!("worst relative defect {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let tol = Tolerances::default();
    let mut cases: Vec<(String, MetricGraph, qgspec_core::MatchingConditions)> = FIXTURES
        .iter()
        .map(|name| {
            let p = fixture(name);
            (name.to_string(), p.graph, p.conditions)
        })
        .collect();
    let graph = MetricGraph::from_lengths(&[1.0, 1.3, 0.7]).unwrap();
    for seed in 0..20u64 {
        cases.push((format!("random seed {seed}"), graph.clone(), mixed_random(3, 1000 + seed)));
    }
    let mut nonzero = 0;
    for (name, g, cond) in &cases {
        let m0 = slow_subspace(g, cond, &tol).map_err(|e| e.to_string())?.dim();
        let (zero, _) = unperturbed_spectrum(g, cond, 1, &Default::default()).map_err(|e| e.to_string())?;
        ensure(zero == m0, || format!("{name}: kernel {zero} vs m0 {m0}"))?;
        nonzero += usize::from(m0 > 0);
    }
    Ok(format!("{} cases, {nonzero} with m0 > 0", cases.len()))
}

fn criterion_9() -> Outcome {
    let p = fixture("star3_mixed");
    let (pred, table) = sweep_problem(&p)?;
    let predicted = (pred.n_minus, pred.n_zero, pred.n_plus);
    let observed = (
        table.count(BranchClass::SlowNegative),
        table.count(BranchClass::Exotic),
        table.count(BranchClass::SlowPositive),
    );
    ensure(predicted == observed, || format!("predicted {predicted:?}, observed {observed:?}"))?;
    let limits: Vec<f64> = table.branches.iter().filter_map(|b| b.limit).collect();
    ensure(limits.iter().all(|&l| l <= 1e-6), || format!("limits {limits:?}"))?;
    Ok(format!("counts {observed:?}, exotic limits {limits:?}"))
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases: 128,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn criterion_10() -> Outcome {
    let lambdas = prop::sample::select(vec![-100.0, -1.0, 0.0, 1.0, 100.0]);
    run_property("wronskian", (lambdas, 0.0f64..1.0), |(l, x)| wronskian(l, x))?;
    run_property("D0 perp N0", 1usize..8, d0_perp_n0)?;
    run_property("sylvester", (1usize..5, any::<u64>()), |(n, s)| sylvester_invariance(n, s))?;
    run_property("dim L = 2|E|", (1usize..5, any::<u64>()), |(n, s)| lagrangian_dimension(n, s))?;
    run_property("inertia sums to m0", (1usize..5, any::<u64>()), |(n, s)| inertia_sums_to_m0(n, s))?;
    run_property("intersection symmetric", (1usize..5, any::<u64>()), |(n, s)| {
        intersection_symmetric(n, s)
    })?;
    run_property("standard m0", edge_ends(5, 5), |(ends, nv)| standard_m0_counts_components(&ends, nv))?;

    let mut weyl_checked = 0;
    for name in FIXTURES {
        let p = fixture(name);
        let total = p.graph.total_length();
        let lo = 1.05 * spectral_lower_bound(&p.graph, &p.conditions) - 1.0;
        let hi = (40.0 * PI / total).powi(2);
        let spec = find_eigenvalues(&p.graph, &p.conditions, Window::new(lo, hi), &p.solver).map_err(|e| e.to_string())?;
        let diag = weyl_sanity(&p.graph, &spec);
        ensure(diag.passed, || format!("weyl on {name}: deviation {} at {}", diag.max_deviation, diag.at_lambda))?;
        weyl_checked += 1;
    }
    Ok(format!("7 properties x 128 cases, weyl sanity on {weyl_checked} fixtures"))
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Outcome); 10] = [
        ("Dirichlet interval spectrum and m0", Some(5), criterion_1),
        ("Neumann interval zero mode and exotic branch", Some(10), criterion_2),
        ("Robin-Neumann slow branches", Some(30), criterion_3),
        ("Robin-Dirichlet fast-only branches", Some(30), criterion_4),
        ("Robin-Robin exotic eigenvalue", Some(30), criterion_5),
        ("non-resonance equivalence on 100 random conditions", Some(60), criterion_6),
        ("rescaling identity", None, criterion_7),
        ("unperturbed kernel dimension", None, criterion_8),
        ("3-star count verification", Some(120), criterion_9),
        ("property suite", None, criterion_10),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(secs)) if elapsed > Duration::from_secs(secs) => {
                Err(format!("took {:.2}s, limit {secs}s", elapsed.as_secs_f64()))
            }
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2} [{:>7.2}s] {name}: {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}

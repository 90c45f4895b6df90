#![allow(dead_code)]

use std::path::PathBuf;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use qgspec_core::graph::{preset_conditions, MetricGraph, Tolerances, VertexCondition, VertexSpec};
use qgspec_core::linalg;
use qgspec_core::random::{random_conditions, random_resonant_conditions, random_unitary, seeded_rng};
use qgspec_core::secular::edge_functions;
use qgspec_core::subspaces::{
    build_d0, build_lagrangian, build_n0, check_nrc_equivalence, intersect, kernel, restricted_form_inertia,
    slow_subspace, Subspace,
};
use qgspec_core::{MatchingConditions, Problem};

pub const FIXTURES: [&str; 11] = [
    "dirichlet",
    "neumann",
    "robin_neumann_pos",
    "robin_neumann_neg",
    "robin_dirichlet_pos",
    "robin_dirichlet_neg",
    "robin_robin_1",
    "robin_robin_2",
    "star3_standard",
    "star3_mixed",
    "two_edge_mixed",
];

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Problem {
    Problem::load(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Conditions from either generator, chosen by the seed's parity.
pub fn mixed_random(num_edges: usize, seed: u64) -> MatchingConditions {
    let mut rng = seeded_rng(seed);
    if seed % 2 == 0 {
        random_conditions(num_edges, &mut rng)
    } else {
        random_resonant_conditions(num_edges, &mut rng)
    }
}

pub fn wronskian(lambda: f64, x: f64) -> Result<(), TestCaseError> {
    let (c, dc, s, ds) = edge_functions(lambda, x);
    let w = c * ds - dc * s;
    let scale = (c * ds).abs() + (dc * s).abs();
    prop_assert!((w - 1.0).abs() <= 1e-12 * scale.max(1.0), "W = {w} at lambda {lambda}, x {x}");
    Ok(())
}

pub fn d0_perp_n0(num_edges: usize) -> Result<(), TestCaseError> {
    let d0 = build_d0(num_edges);
    let n0 = build_n0(num_edges);
    prop_assert!((d0.basis().adjoint() * n0.basis()).norm() < 1e-14);
    let sum = d0.projector() + n0.projector();
    prop_assert!((sum - linalg::identity(2 * num_edges)).norm() < 1e-13);
    Ok(())
}

pub fn sylvester_invariance(num_edges: usize, seed: u64) -> Result<(), TestCaseError> {
    let cond = mixed_random(num_edges, seed);
    let graph = MetricGraph::from_lengths(&vec![1.0; num_edges]).unwrap();
    let f0 = slow_subspace(&graph, &cond, &Tolerances::default()).unwrap();
    let base = restricted_form_inertia(&cond, &f0, None).unwrap();
    let mut rng = seeded_rng(seed ^ 0x5eed);
    let u = random_unitary(f0.dim(), &mut rng);
    let rotated = Subspace::from_orthonormal(f0.basis() * u);
    let other = restricted_form_inertia(&cond, &rotated, None).unwrap();
    prop_assert_eq!(base.counts(), other.counts());
    Ok(())
}

pub fn lagrangian_dimension(num_edges: usize, seed: u64) -> Result<(), TestCaseError> {
    let cond = mixed_random(num_edges, seed);
    let l = build_lagrangian(&cond);
    prop_assert_eq!(l.dim(), 2 * num_edges);
    // isotropic for the form <(a, b), (c, d)> = <a, d> - <b, c>
    let n = 2 * num_edges;
    let top = l.basis().rows(0, n).into_owned();
    let bottom = l.basis().rows(n, n).into_owned();
    let omega = top.adjoint() * &bottom - bottom.adjoint() * &top;
    prop_assert!(omega.norm() < 1e-10);
    Ok(())
}

pub fn nrc_equivalence(num_edges: usize, seed: u64) -> Result<(), TestCaseError> {
    let cond = mixed_random(num_edges, seed);
    let report = check_nrc_equivalence(&cond);
    prop_assert!(report.is_ok(), "seed {}: {:?}", seed, report.err());
    Ok(())
}

pub fn inertia_sums_to_m0(num_edges: usize, seed: u64) -> Result<(), TestCaseError> {
    let cond = mixed_random(num_edges, seed);
    let graph = MetricGraph::from_lengths(&vec![1.0; num_edges]).unwrap();
    let f0 = slow_subspace(&graph, &cond, &Tolerances::default()).unwrap();
    let (m, z, p) = restricted_form_inertia(&cond, &f0, None).unwrap().counts();
    prop_assert_eq!(m + z + p, f0.dim());
    Ok(())
}

pub fn intersection_symmetric(num_edges: usize, seed: u64) -> Result<(), TestCaseError> {
    let cond = mixed_random(num_edges, seed);
    let tol = Tolerances::default();
    let a = kernel(cond.p_d(), &tol).unwrap();
    let b = build_d0(num_edges);
    let ab = intersect(&a, &b, &tol).unwrap();
    let ba = intersect(&b, &a, &tol).unwrap();
    prop_assert_eq!(ab.dim(), ba.dim());
    Ok(())
}

pub fn scale_multiplicative(lengths: &[f64], a: f64, b: f64) -> Result<(), TestCaseError> {
    let g = MetricGraph::from_lengths(lengths).unwrap();
    let twice = g.scaled(a).unwrap().scaled(b).unwrap();
    let once = g.scaled(a * b).unwrap();
    for (x, y) in twice.lengths().iter().zip(once.lengths()) {
        prop_assert!((x - y).abs() <= 1e-14 * y);
    }
    Ok(())
}

/// Standard conditions at every vertex: `m0` equals the number of connected
/// components, counted here by union-find over the endpoint assignment.
pub fn standard_m0_counts_components(ends: &[(usize, usize)], num_vertices: usize) -> Result<(), TestCaseError> {
    let used: Vec<usize> = (0..num_vertices)
        .filter(|v| ends.iter().any(|&(a, b)| a == *v || b == *v))
        .collect();
    let mut parent: Vec<usize> = (0..num_vertices).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    for &(a, b) in ends {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let mut roots: Vec<usize> = used.iter().map(|&v| find(&mut parent, v)).collect();
    roots.sort();
    roots.dedup();

    let graph = MetricGraph::from_lengths(&vec![1.0; ends.len()]).unwrap();
    let specs: Vec<VertexSpec> = used
        .iter()
        .map(|&v| {
            let slots = ends
                .iter()
                .enumerate()
                .flat_map(|(e, &(a, b))| {
                    [(a == v).then_some(2 * e), (b == v).then_some(2 * e + 1)]
                })
                .flatten()
                .collect();
            VertexSpec::new(format!("v{v}"), slots, VertexCondition::Standard)
        })
        .collect();
    let cond = preset_conditions(&graph, &specs).unwrap();
    let f0 = slow_subspace(&graph, &cond, &Tolerances::default()).unwrap();
    prop_assert_eq!(f0.dim(), roots.len());
    Ok(())
}

pub fn edge_ends(max_edges: usize, max_vertices: usize) -> impl Strategy<Value = (Vec<(usize, usize)>, usize)> {
    (1..=max_vertices).prop_flat_map(move |nv| {
        (proptest::collection::vec((0..nv, 0..nv), 1..=max_edges), Just(nv))
    })
}

//! Eigenvalue asymptotics of a graph whose edge lengths shrink uniformly.
//!
//! With lengths `ε ℓ_e` and fixed conditions, rescaling to the unit graph turns
//! `Λ` into `εΛ` and divides eigenvalues by `ε²`. The `m0 = dim(D0 ∩ Ker P_D)`
//! lowest eigenvalues are slow: their `ε`-slopes are the eigenvalues of `q` on
//! `F0`, measured against the L2 norm of the corresponding edgewise constants.
//! Negative and positive slopes give branches running to `∓∞` like `1/ε`; zero
//! slopes give exotic branches with a finite non-positive limit. Every other
//! eigenvalue is fast, `λ ≈ μ/ε²` with `μ` a positive eigenvalue of the
//! unperturbed problem (`P_D F = 0`, `(I - P_D) F' = 0`).
//!
//! [`predict`] computes all of this from linear algebra alone; [`sweep`] and
//! [`fit_branches`] observe it from directly computed spectra; [`verify`]
//! compares the two.

use std::fmt;

use log::debug;
use rayon::prelude::*;
use thiserror::Error;

use crate::error::{AsymptoticsError, ModelError};
use crate::graph::{MatchingConditions, MetricGraph, Tolerances};
use crate::linalg;
use crate::secular::{find_eigenvalues, spectral_lower_bound, SolverOptions, Window};
use crate::subspaces::{restricted_form_inertia, slow_subspace, FormInertia};

/// Relative tolerance between a fitted slow coefficient and its predicted slope.
pub const SLOPE_TOLERANCE: f64 = 0.15;
/// Relative tolerance between a fitted fast coefficient and its predicted value.
pub const FAST_TOLERANCE: f64 = 0.10;
/// Exotic limits must not exceed this.
pub const EXOTIC_LIMIT_TOLERANCE: f64 = 1e-6;

/// Conditions of the problem rescaled to the unit graph: `Λ → εΛ`.
pub fn rescaled_conditions(
    conditions: &MatchingConditions,
    epsilon: f64,
) -> Result<MatchingConditions, ModelError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        // at epsilon = 0 the Robin part degenerates; use unperturbed_conditions
        return Err(ModelError::InvalidEpsilon(epsilon));
    }
    Ok(conditions.with_lambda_scaled(epsilon))
}

/// Conditions of the unperturbed problem: `P_D` kept, `P_N = I - P_D`, no Robin part.
pub fn unperturbed_conditions(conditions: &MatchingConditions) -> MatchingConditions {
    let n = conditions.dim();
    let p_d = conditions.p_d().clone();
    let p_n = linalg::identity(n) - &p_d;
    MatchingConditions::from_parts(p_d, p_n, linalg::zeros(n, n), linalg::zeros(n, n))
}

/// Counts and leading coefficients predicted from linear algebra alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub m0: usize,
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
    /// Slopes `μ` of the slow eigenvalues of the rescaled problem, `λ ≈ μ/ε`; ascending.
    pub slow_slopes: Vec<f64>,
    /// Lowest positive eigenvalues of the unperturbed problem on the unit graph, `λ ≈ μ/ε²`.
    pub fast_coefficients: Vec<f64>,
    /// Eigenvalues of `q` in an orthonormal basis of `F0`.
    pub form: FormInertia,
}

impl Prediction {
    /// Slopes of the branches that leave zero at rate `1/ε` (zero band removed), ascending.
    pub fn nonzero_slopes(&self) -> Vec<f64> {
        self.slow_slopes[..self.n_minus]
            .iter()
            .chain(&self.slow_slopes[self.n_minus + self.n_zero..])
            .copied()
            .collect()
    }

    /// Copy with the sign counts replaced, for negative testing.
    pub fn with_counts(&self, n_minus: usize, n_zero: usize, n_plus: usize) -> Self {
        Prediction {
            n_minus,
            n_zero,
            n_plus,
            ..self.clone()
        }
    }
}

/// Predict the asymptotic classification of the spectrum of the shrinking graph.
pub fn predict(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    num_fast: usize,
    opts: &SolverOptions,
) -> Result<Prediction, AsymptoticsError> {
    let tol = Tolerances::default();
    let f0 = slow_subspace(graph, conditions, &tol)?;
    let form = restricted_form_inertia(conditions, &f0, None)?;
    let m0 = f0.dim();

    // slopes: q against the L2 Gram matrix of edgewise constants, F* (L/2) F
    let b = f0.basis();
    let q = b.adjoint() * conditions.lambda() * b;
    let gram = b.adjoint() * linalg::diag(&graph.slot_half_lengths()) * b;
    let (g_vals, g_vecs) = linalg::hermitian_eigen(&gram);
    let inv_sqrt = linalg::diag(&g_vals.iter().map(|g| 1.0 / g.sqrt()).collect::<Vec<_>>());
    let whiten = &g_vecs * inv_sqrt * g_vecs.adjoint();
    let (mut slow_slopes, _) = linalg::hermitian_eigen(&(&whiten * q * &whiten));
    // the zero band is fixed by the orthonormal-basis form; Sylvester keeps the signs
    for s in &mut slow_slopes[form.n_minus..form.n_minus + form.n_zero] {
        if s.abs() <= form.zero_tolerance_used * 1e3 {
            *s = 0.0;
        }
    }

    let (zero_multiplicity, fast_coefficients) = unperturbed_spectrum(graph, conditions, num_fast, opts)?;
    if zero_multiplicity != m0 {
        return Err(AsymptoticsError::KernelMismatch {
            expected: m0,
            found: zero_multiplicity,
        });
    }
    Ok(Prediction {
        m0,
        n_minus: form.n_minus,
        n_zero: form.n_zero,
        n_plus: form.n_plus,
        slow_slopes,
        fast_coefficients,
        form,
    })
}

/// Multiplicity of `0` and the lowest `num_fast` positive eigenvalues (with
/// multiplicity) of the unperturbed problem on `graph`.
pub fn unperturbed_spectrum(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    num_fast: usize,
    opts: &SolverOptions,
) -> Result<(usize, Vec<f64>), AsymptoticsError> {
    let r0 = unperturbed_conditions(conditions);
    let omega0 = graph.num_edges() as f64 / graph.total_length();
    let zero_band = 1e-6 * omega0 * omega0;
    let lo = -1e-2 * omega0 * omega0;
    let levels = (num_fast + graph.boundary_dim() + 1) as f64;
    let mut hi = (levels * std::f64::consts::PI / graph.total_length()).powi(2);
    for _ in 0..12 {
        let spec = find_eigenvalues(graph, &r0, Window::new(lo, hi), opts)?;
        let zero = spec
            .eigenvalues
            .iter()
            .filter(|e| e.lambda.abs() <= zero_band)
            .map(|e| e.multiplicity)
            .sum();
        let positive: Vec<f64> = spec.expanded().into_iter().filter(|&l| l > zero_band).collect();
        if positive.len() >= num_fast {
            return Ok((zero, positive[..num_fast].to_vec()));
        }
        hi *= 4.0;
    }
    Err(AsymptoticsError::WindowExhausted {
        epsilon: 0.0,
        wanted: num_fast,
        found: 0,
    })
}

/// The four asymptotic behaviors, plus the honest fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchClass {
    Fast,
    SlowNegative,
    Exotic,
    SlowPositive,
    Unclassified,
}

impl BranchClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            BranchClass::Fast => "fast",
            BranchClass::SlowNegative => "slow_negative",
            BranchClass::Exotic => "exotic",
            BranchClass::SlowPositive => "slow_positive",
            BranchClass::Unclassified => "unclassified",
        }
    }
}

impl fmt::Display for BranchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One eigenvalue followed across the scale grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    /// `(epsilon, lambda)` in the order of the grid (descending epsilon).
    pub samples: Vec<(f64, f64)>,
    /// Fitted rate `α` in `|λ| ≈ |c| ε^{-α}`.
    pub alpha: Option<f64>,
    /// Signed coefficient `c`.
    pub coefficient: Option<f64>,
    /// Last sample, for bounded (exotic) branches.
    pub limit: Option<f64>,
    pub class: Option<BranchClass>,
}

/// Two branches were indistinguishable at some epsilon (a degenerate eigenvalue).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchAmbiguity {
    pub epsilon: f64,
    pub branches: (usize, usize),
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTable {
    pub epsilons: Vec<f64>,
    pub branches: Vec<Branch>,
    pub ambiguities: Vec<BranchAmbiguity>,
}

impl BranchTable {
    pub fn count(&self, class: BranchClass) -> usize {
        self.branches.iter().filter(|b| b.class == Some(class)).count()
    }
}

/// `n` geometric points from `1` down to `1e-3`.
pub fn geometric_epsilons(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| 10f64.powf(-3.0 * i as f64 / (n - 1) as f64)).collect()
}

/// Default scale grid: 13 geometric points from `1` to `1e-3`.
pub fn default_epsilons() -> Vec<f64> {
    geometric_epsilons(13)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// How many of the lowest eigenvalues (with multiplicity) to follow.
    pub num_branches: usize,
    pub solver: SolverOptions,
}

/// Lowest `count` eigenvalues with multiplicity of the graph, searching upward
/// from a rigorous lower bound.
pub fn lowest_eigenvalues(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    count: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>, AsymptoticsError> {
    let omega0 = graph.num_edges() as f64 / graph.total_length();
    let lo = 1.05 * spectral_lower_bound(graph, conditions) - 1e-4 * omega0 * omega0;
    let levels = (count + graph.boundary_dim()) as f64;
    let mut hi = (levels * std::f64::consts::PI / graph.total_length()).powi(2);
    let mut found = 0;
    for _ in 0..12 {
        let spec = find_eigenvalues(graph, conditions, Window::new(lo, hi), opts)?;
        let all = spec.expanded();
        found = all.len();
        if found >= count {
            return Ok(all[..count].to_vec());
        }
        hi *= 4.0;
    }
    Err(AsymptoticsError::WindowExhausted {
        epsilon: graph.total_length(),
        wanted: count,
        found,
    })
}

/// Follow the lowest eigenvalues of the graph with lengths `ε ℓ_e` across `epsilons`.
///
/// Branches are matched by eigenvalue index: the `n`-th eigenvalue at one scale
/// continues the `n`-th at the previous scale.
pub fn sweep(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    epsilons: &[f64],
    opts: &SweepOptions,
) -> Result<BranchTable, AsymptoticsError> {
    if epsilons.len() < 4 {
        return Err(AsymptoticsError::InvalidGrid(format!(
            "need at least 4 scales, got {}",
            epsilons.len()
        )));
    }
    if epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(AsymptoticsError::InvalidGrid("scales must be positive".into()));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AsymptoticsError::InvalidGrid("scales must be strictly descending".into()));
    }
    let spectra: Vec<Vec<f64>> = epsilons
        .par_iter()
        .map(|&eps| {
            let g = graph.scaled(eps)?;
            let ev = lowest_eigenvalues(&g, conditions, opts.num_branches, &opts.solver)?;
            debug!("epsilon {eps:.3e}: {ev:?}");
            Ok(ev)
        })
        .collect::<Result<_, AsymptoticsError>>()?;

    let mut ambiguities = Vec::new();
    for (&eps, ev) in epsilons.iter().zip(&spectra) {
        for j in 1..ev.len() {
            if (ev[j] - ev[j - 1]).abs() <= 1e-9 * ev[j].abs().max(1e-12) {
                ambiguities.push(BranchAmbiguity {
                    epsilon: eps,
                    branches: (j - 1, j),
                    lambda: ev[j],
                });
            }
        }
    }
    let branches = (0..opts.num_branches)
        .map(|id| Branch {
            id,
            samples: epsilons.iter().zip(&spectra).map(|(&e, ev)| (e, ev[id])).collect(),
            alpha: None,
            coefficient: None,
            limit: None,
            class: None,
        })
        .collect();
    Ok(BranchTable {
        epsilons: epsilons.to_vec(),
        branches,
        ambiguities,
    })
}

/// Classification bands for [`fit_branches`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBands {
    pub fast: (f64, f64),
    pub slow: (f64, f64),
    /// A branch is bounded when `max|λ| / min|λ|` over the last three samples is below this.
    pub bounded_ratio: f64,
    /// Branches with `|λ|` below this over the last three samples are bounded too.
    pub bounded_floor: f64,
}

impl Default for FitBands {
    fn default() -> Self {
        FitBands {
            fast: (1.7, 2.3),
            slow: (0.7, 1.3),
            bounded_ratio: 1.5,
            bounded_floor: 1e-6,
        }
    }
}

fn classify(branch: &mut Branch, bands: &FitBands) {
    branch.alpha = None;
    branch.coefficient = None;
    branch.limit = None;
    let n = branch.samples.len();
    if n < 4 {
        branch.class = Some(BranchClass::Unclassified);
        return;
    }
    let tail: Vec<f64> = branch.samples[n - 3..].iter().map(|s| s.1.abs()).collect();
    let max = tail.iter().copied().fold(0.0, f64::max);
    let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= bands.bounded_floor || max < bands.bounded_ratio * min {
        branch.class = Some(BranchClass::Exotic);
        branch.limit = Some(branch.samples[n - 1].1);
        return;
    }

    let fit = &branch.samples[n - n.div_ceil(2)..];
    let sign = fit[0].1.signum();
    if fit.iter().any(|s| s.1 == 0.0 || s.1.signum() != sign) {
        branch.class = Some(BranchClass::Unclassified);
        return;
    }
    // log|λ| = log c - α log ε
    let xs: Vec<f64> = fit.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = fit.iter().map(|s| s.1.abs().ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let alpha = -slope;
    let coefficient = sign * (my - slope * mx).exp();
    branch.alpha = Some(alpha);
    branch.coefficient = Some(coefficient);
    let within = |band: (f64, f64)| alpha >= band.0 && alpha <= band.1;
    branch.class = Some(if within(bands.fast) && sign > 0.0 {
        BranchClass::Fast
    } else if within(bands.slow) {
        if sign < 0.0 {
            BranchClass::SlowNegative
        } else {
            BranchClass::SlowPositive
        }
    } else {
        BranchClass::Unclassified
    });
}

/// Fill in exponent, coefficient, limit and class of every branch.
pub fn fit_branches(table: &BranchTable) -> BranchTable {
    fit_branches_with(table, &FitBands::default())
}

pub fn fit_branches_with(table: &BranchTable, bands: &FitBands) -> BranchTable {
    let mut out = table.clone();
    for b in &mut out.branches {
        classify(b, bands);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub items: Vec<CheckItem>,
    /// Observed `(fast, slow_negative, exotic, slow_positive, unclassified)`.
    pub observed: [usize; 5],
    /// Predicted `(n_minus, n_zero, n_plus)`.
    pub predicted: (usize, usize, usize),
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            writeln!(
                f,
                "[{}] {}: {}",
                if item.passed { "PASS" } else { "FAIL" },
                item.name,
                item.detail
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("verification failed:\n{report}")]
pub struct VerificationFailure {
    pub report: VerificationReport,
}

fn relative_gap(observed: f64, expected: f64) -> f64 {
    (observed - expected).abs() / expected.abs().max(f64::MIN_POSITIVE)
}

/// Compare a prediction with a fitted branch table.
pub fn verify(prediction: &Prediction, table: &BranchTable) -> Result<VerificationReport, VerificationFailure> {
    let observed = [
        table.count(BranchClass::Fast),
        table.count(BranchClass::SlowNegative),
        table.count(BranchClass::Exotic),
        table.count(BranchClass::SlowPositive),
        table.count(BranchClass::Unclassified) + table.branches.iter().filter(|b| b.class.is_none()).count(),
    ];
    let mut items = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        items.push(CheckItem {
            name: name.to_string(),
            passed,
            detail,
        })
    };

    push(
        "all branches classified",
        observed[4] == 0,
        format!("{} unclassified of {}", observed[4], table.branches.len()),
    );
    for (name, got, want) in [
        ("slow_negative count", observed[1], prediction.n_minus),
        ("exotic count", observed[2], prediction.n_zero),
        ("slow_positive count", observed[3], prediction.n_plus),
    ] {
        push(name, got == want, format!("observed {got}, predicted {want}"));
    }

    let mut slow: Vec<f64> = table
        .branches
        .iter()
        .filter(|b| matches!(b.class, Some(BranchClass::SlowNegative | BranchClass::SlowPositive)))
        .filter_map(|b| b.coefficient)
        .collect();
    slow.sort_by(|a, b| a.total_cmp(b));
    let slopes = prediction.nonzero_slopes();
    if slow.len() == slopes.len() {
        let worst = slow
            .iter()
            .zip(&slopes)
            .map(|(&c, &m)| relative_gap(c, m))
            .fold(0.0, f64::max);
        push(
            "slow slopes",
            worst <= SLOPE_TOLERANCE,
            format!("fitted {slow:?} vs predicted {slopes:?}, worst relative gap {worst:.3e}"),
        );
    } else {
        push(
            "slow slopes",
            false,
            format!("{} slow branches but {} nonzero slopes", slow.len(), slopes.len()),
        );
    }

    let limits: Vec<f64> = table
        .branches
        .iter()
        .filter(|b| b.class == Some(BranchClass::Exotic))
        .filter_map(|b| b.limit)
        .collect();
    push(
        "exotic limits non-positive",
        limits.iter().all(|&l| l <= EXOTIC_LIMIT_TOLERANCE),
        format!("limits {limits:?}"),
    );

    let mut fast: Vec<f64> = table
        .branches
        .iter()
        .filter(|b| b.class == Some(BranchClass::Fast))
        .filter_map(|b| b.coefficient)
        .collect();
    fast.sort_by(|a, b| a.total_cmp(b));
    let mut predicted_fast = prediction.fast_coefficients.clone();
    predicted_fast.sort_by(|a, b| a.total_cmp(b));
    let mut worst = 0.0f64;
    let mut ok = fast.len() <= predicted_fast.len();
    for (c, m) in fast.iter().zip(&predicted_fast) {
        worst = worst.max(relative_gap(*c, *m));
    }
    ok &= worst <= FAST_TOLERANCE;
    push(
        "fast coefficients",
        ok,
        format!(
            "{} fast branches vs {} predicted coefficients, worst relative gap {worst:.3e}",
            fast.len(),
            predicted_fast.len()
        ),
    );

    let report = VerificationReport {
        items,
        observed,
        predicted: (prediction.n_minus, prediction.n_zero, prediction.n_plus),
    };
    if report.passed() {
        Ok(report)
    } else {
        Err(VerificationFailure { report })
    }
}

/// Relative deviation between the spectrum of the shrunken graph and the
/// spectrum of the rescaled problem divided by `ε²`, over the lowest `count`
/// eigenvalues.
pub fn rescaling_defect(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    epsilon: f64,
    count: usize,
    opts: &SolverOptions,
) -> Result<f64, AsymptoticsError> {
    let direct = lowest_eigenvalues(&graph.scaled(epsilon)?, conditions, count, opts)?;
    let rescaled = lowest_eigenvalues(graph, &rescaled_conditions(conditions, epsilon)?, count, opts)?;
    let scale = 1.0 / (epsilon * epsilon);
    Ok(direct
        .iter()
        .zip(&rescaled)
        .map(|(&h, &r)| relative_gap(h, r * scale))
        .fold(0.0, f64::max))
}

//! Spectrum of `-d²/dx²` on a metric graph under fixed matching conditions.
//!
//! On every edge a solution of `-f'' = λ f` is `a C(λ, x) + b S(λ, x)` with the
//! entire pair `C = cos(√λ x)`, `S = sin(√λ x)/√λ` (hyperbolic for `λ < 0`,
//! `S(0, x) = x`). Imposing the matching conditions on the traces of this ansatz
//! gives a square secular matrix which is singular exactly at eigenvalues.
//!
//! Root finding works with a normalized version of that matrix: per edge the
//! two-dimensional space of Cauchy data `(F, F'/ω)` is given an orthonormal
//! basis, and the constraint rows are orthonormalized. Its smallest singular
//! value lies in `[0, 1]`, is continuous in `λ` (including across `λ = 0`), and
//! vanishes with the same multiplicity as the raw matrix.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::SolverError;
use crate::graph::{projector_range, MatchingConditions, MetricGraph};
use crate::linalg::{self, c, CMatrix, CVector};

/// `√(-λ) L` above which `L`-side hyperbolic values are stored scaled by `e^{-√(-λ) L}`.
pub const OVERFLOW_GUARD: f64 = 30.0;

/// `√(-λ) L` above which the normalized secular matrix switches to the decaying
/// exponential pair `e^{-κx}, e^{-κ(L-x)}`; `C` and `S` become nearly parallel there.
const EXPONENTIAL_SWITCH: f64 = 1.0;

/// Values of `C(λ, ·)`, `S(λ, ·)` and their derivatives at both ends of an edge.
///
/// When `log_scale > 0` the `L`-side entries (`c_l`, `s_l`, `dc_l`, `ds_l`) are
/// multiplied by `exp(-log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBasisEval {
    pub lambda: f64,
    pub length: f64,
    pub c0: f64,
    pub c_l: f64,
    pub s0: f64,
    pub s_l: f64,
    pub dc0: f64,
    pub dc_l: f64,
    pub ds0: f64,
    pub ds_l: f64,
    pub log_scale: f64,
}

/// `(C, C', S, S')` at a point `x`.
pub fn edge_functions(lambda: f64, x: f64) -> (f64, f64, f64, f64) {
    if lambda > 0.0 {
        let k = lambda.sqrt();
        let (s, co) = (k * x).sin_cos();
        (co, -k * s, s / k, co)
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        let (sh, ch) = ((k * x).sinh(), (k * x).cosh());
        (ch, k * sh, sh / k, ch)
    } else {
        (1.0, 0.0, x, 1.0)
    }
}

pub fn edge_basis(lambda: f64, length: f64) -> EdgeBasisEval {
    let kappa_l = if lambda < 0.0 { (-lambda).sqrt() * length } else { 0.0 };
    let (c_l, dc_l, s_l, ds_l, log_scale) = if kappa_l > OVERFLOW_GUARD {
        let k = (-lambda).sqrt();
        let t = (-2.0 * kappa_l).exp();
        let ch = 0.5 * (1.0 + t);
        let sh = 0.5 * (1.0 - t);
        (ch, k * sh, sh / k, ch, kappa_l)
    } else {
        let (c, dc, s, ds) = edge_functions(lambda, length);
        (c, dc, s, ds, 0.0)
    };
    EdgeBasisEval {
        lambda,
        length,
        c0: 1.0,
        c_l,
        s0: 0.0,
        s_l,
        dc0: 0.0,
        dc_l,
        ds0: 1.0,
        ds_l,
        log_scale,
    }
}

/// Maps from per-edge coefficients `(a_e, b_e)` (columns `2e`, `2e + 1`) to the
/// value trace `F` and the inward-derivative trace `F'`.
pub fn trace_matrices(graph: &MetricGraph, lambda: f64) -> (CMatrix, CMatrix) {
    let n = graph.boundary_dim();
    let mut t_d = linalg::zeros(n, n);
    let mut t_n = linalg::zeros(n, n);
    for (e, edge) in graph.edges().iter().enumerate() {
        let (cl, dcl, sl, dsl) = edge_functions(lambda, edge.length);
        let (ca, cb) = (2 * e, 2 * e + 1);
        t_d[(edge.minus_slot, ca)] = c(1.0);
        t_d[(edge.minus_slot, cb)] = c(0.0);
        t_d[(edge.plus_slot, ca)] = c(cl);
        t_d[(edge.plus_slot, cb)] = c(sl);
        t_n[(edge.minus_slot, ca)] = c(0.0);
        t_n[(edge.minus_slot, cb)] = c(1.0);
        t_n[(edge.plus_slot, ca)] = c(-dcl);
        t_n[(edge.plus_slot, cb)] = c(-dsl);
    }
    (t_d, t_n)
}

/// The raw secular matrix: `[Q_D* T_D; Q_N* T_N; Q_R* (T_N - Λ T_D)]` where the
/// `Q` are orthonormal bases of the projector ranges.
pub fn secular_matrix(graph: &MetricGraph, conditions: &MatchingConditions, lambda: f64) -> CMatrix {
    let (t_d, t_n) = trace_matrices(graph, lambda);
    let q_d = projector_range(conditions.p_d());
    let q_n = projector_range(conditions.p_n());
    let q_r = projector_range(conditions.p_r());
    let rows_d = q_d.adjoint() * &t_d;
    let rows_n = q_n.adjoint() * &t_n;
    let rows_r = q_r.adjoint() * (&t_n - conditions.lambda() * &t_d);
    linalg::vstack(&linalg::vstack(&rows_d, &rows_n), &rows_r)
}

/// Orthonormal Cauchy-data frame for one edge at one `λ`.
#[derive(Debug, Clone, Copy)]
struct EdgeFrame {
    /// Columns: orthonormal vectors `(F-, F+, F'-/ω, F'+/ω)`.
    q: [[f64; 4]; 2],
    /// Maps frame coordinates to `(a, b)` in the `(C, S)` basis.
    to_cs: [[f64; 2]; 2],
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm4(a: &[f64; 4]) -> f64 {
    dot4(a, a).sqrt()
}

impl EdgeFrame {
    fn new(lambda: f64, length: f64, omega: f64) -> Self {
        let kappa = if lambda < 0.0 { (-lambda).sqrt() } else { 0.0 };
        // columns phi_1, phi_2 and their expression in (C, S)
        let (v1, v2, basis) = if kappa * length > EXPONENTIAL_SWITCH {
            let t = (-kappa * length).exp();
            let g = kappa / omega;
            (
                [1.0, t, -g, g * t],
                [t, 1.0, g * t, -g],
                [[1.0, t], [-kappa, kappa * t]],
            )
        } else {
            let (cl, dcl, sl, dsl) = edge_functions(lambda, length);
            (
                [1.0, cl, 0.0, -dcl / omega],
                [0.0, omega * sl, 1.0, -dsl],
                [[1.0, 0.0], [0.0, omega]],
            )
        };
        // Gram-Schmidt with one reorthogonalization pass
        let r11 = norm4(&v1);
        let q1 = v1.map(|x| x / r11);
        let r12 = dot4(&q1, &v2);
        let mut w = [0.0; 4];
        for i in 0..4 {
            w[i] = v2[i] - r12 * q1[i];
        }
        let fix = dot4(&q1, &w);
        for i in 0..4 {
            w[i] -= fix * q1[i];
        }
        let r12 = r12 + fix;
        let r22 = norm4(&w);
        let q2 = w.map(|x| x / r22);
        // R^{-1} = [[1/r11, -r12/(r11 r22)], [0, 1/r22]]
        let rinv = [[1.0 / r11, -r12 / (r11 * r22)], [0.0, 1.0 / r22]];
        let mut to_cs = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                to_cs[i][j] = basis[i][0] * rinv[0][j] + basis[i][1] * rinv[1][j];
            }
        }
        EdgeFrame { q: [q1, q2], to_cs }
    }
}

/// Precomputed constraint data for evaluating the normalized secular matrix.
#[derive(Debug, Clone)]
pub struct SecularSystem {
    graph: MetricGraph,
    q_d_adj: CMatrix,
    q_n_adj: CMatrix,
    /// Eigenvectors of `Λ` on `Ran P_R`, as rows.
    q_r_adj: CMatrix,
    lambda_eigs: Vec<f64>,
    omega0: f64,
}

impl SecularSystem {
    pub fn new(graph: &MetricGraph, conditions: &MatchingConditions) -> Self {
        assert_eq!(graph.boundary_dim(), conditions.dim(), "conditions do not fit the graph");
        let q_r = projector_range(conditions.p_r());
        let (lambda_eigs, vecs) = if q_r.ncols() > 0 {
            let restricted = q_r.adjoint() * conditions.lambda() * &q_r;
            let (vals, v) = linalg::hermitian_eigen(&restricted);
            (vals, &q_r * v)
        } else {
            (Vec::new(), q_r)
        };
        SecularSystem {
            graph: graph.clone(),
            q_d_adj: projector_range(conditions.p_d()).adjoint(),
            q_n_adj: projector_range(conditions.p_n()).adjoint(),
            q_r_adj: vecs.adjoint(),
            lambda_eigs,
            omega0: graph.num_edges() as f64 / graph.total_length(),
        }
    }

    pub fn graph(&self) -> &MetricGraph {
        &self.graph
    }

    /// Inverse mean edge length; the frequency scale of the graph.
    pub fn omega0(&self) -> f64 {
        self.omega0
    }

    fn omega(&self, lambda: f64) -> f64 {
        (lambda.abs() + self.omega0 * self.omega0).sqrt()
    }

    fn assemble(&self, lambda: f64) -> (CMatrix, Vec<EdgeFrame>) {
        let n = self.graph.boundary_dim();
        let omega = self.omega(lambda);
        let mut k_f = linalg::zeros(n, n);
        let mut k_g = linalg::zeros(n, n);
        let mut frames = Vec::with_capacity(self.graph.num_edges());
        for (e, edge) in self.graph.edges().iter().enumerate() {
            let frame = EdgeFrame::new(lambda, edge.length, omega);
            for (j, q) in frame.q.iter().enumerate() {
                let col = 2 * e + j;
                k_f[(edge.minus_slot, col)] = c(q[0]);
                k_f[(edge.plus_slot, col)] = c(q[1]);
                k_g[(edge.minus_slot, col)] = c(q[2]);
                k_g[(edge.plus_slot, col)] = c(q[3]);
            }
            frames.push(frame);
        }
        let rows_d = &self.q_d_adj * &k_f;
        let rows_n = &self.q_n_adj * &k_g;
        let mut rows_r = &self.q_r_adj * &k_g;
        if !self.lambda_eigs.is_empty() {
            let proj_f = &self.q_r_adj * &k_f;
            for (i, &mu) in self.lambda_eigs.iter().enumerate() {
                let t = mu / omega;
                let s = 1.0 / (1.0 + t * t).sqrt();
                for j in 0..n {
                    rows_r[(i, j)] = (rows_r[(i, j)] - proj_f[(i, j)] * t) * s;
                }
            }
        }
        let m = linalg::vstack(&linalg::vstack(&rows_d, &rows_n), &rows_r);
        (m, frames)
    }

    /// The normalized secular matrix at `lambda`.
    pub fn normalized_matrix(&self, lambda: f64) -> CMatrix {
        self.assemble(lambda).0
    }

    /// Singular values of the normalized secular matrix, ascending.
    pub fn singular_values(&self, lambda: f64) -> Vec<f64> {
        let mut s = linalg::singular_values(&self.normalized_matrix(lambda));
        s.reverse();
        s
    }

    pub fn sigma_min(&self, lambda: f64) -> f64 {
        self.singular_values(lambda).first().copied().unwrap_or(0.0)
    }

    /// Right singular vectors for singular values below `threshold`, converted
    /// to per-edge `(a_e, b_e)` coefficients.
    fn null_coefficients(&self, lambda: f64, threshold: f64) -> (Vec<f64>, Vec<Vec<(Complex64, Complex64)>>) {
        let (m, frames) = self.assemble(lambda);
        let (_, sigma, v) = linalg::sorted_svd(&m);
        let mut sig_asc = sigma.clone();
        sig_asc.reverse();
        let n = sigma.len();
        // ascending order; the smallest is always returned
        let out = (0..n)
            .rev()
            .enumerate()
            .filter(|&(rank, idx)| rank == 0 || sigma[idx] < threshold)
            .map(|(_, idx)| {
                let y = v.column(idx);
                frames
                    .iter()
                    .enumerate()
                    .map(|(e, fr)| {
                        let (y1, y2) = (y[2 * e], y[2 * e + 1]);
                        let a = y1 * fr.to_cs[0][0] + y2 * fr.to_cs[0][1];
                        let b = y1 * fr.to_cs[1][0] + y2 * fr.to_cs[1][1];
                        (a, b)
                    })
                    .collect()
            })
            .collect();
        (sig_asc, out)
    }
}

/// Options for [`find_eigenvalues`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Uniform grid step in `√|λ|`; defaults to `π / (20 · total length)`.
    pub scan_step: Option<f64>,
    /// Ratio of the geometric grid that resolves small `|λ|`.
    pub geometric_ratio: f64,
    /// Smallest nonzero `√|λ|` on the grid, in units of the graph frequency scale.
    pub min_relative_k: f64,
    /// A refined minimum is a root when `σ_min < detection_ratio · median grid σ_min`.
    pub detection_ratio: f64,
    /// Singular values below `multiplicity_ratio · median grid σ_min` count towards multiplicity.
    pub multiplicity_ratio: f64,
    /// Relative `λ` accuracy of golden-section refinement.
    pub rel_tol: f64,
    pub max_refine_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            scan_step: None,
            geometric_ratio: 1.02,
            min_relative_k: 1e-6,
            detection_ratio: 1e-7,
            multiplicity_ratio: 1e-6,
            rel_tol: 1e-13,
            max_refine_iter: 400,
        }
    }
}

pub fn default_scan_step(graph: &MetricGraph) -> f64 {
    PI / (20.0 * graph.total_length())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Self {
        Window { lo, hi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
    /// Smallest singular value of the normalized secular matrix at `lambda`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverWarning {
    /// The eigenvalue count strays from the Weyl estimate; a finer scan is suggested.
    WindowTooCoarse {
        max_deviation: f64,
        at_lambda: f64,
        suggested_step: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub eigenvalues: Vec<Eigenvalue>,
    pub window: Window,
    /// Uniform grid step in `√|λ|` used for the scan.
    pub scan_resolution: f64,
    /// Median of `σ_min` over the scan grid, weighted by grid spacing in `√|λ|`.
    pub median_sigma: f64,
    pub warnings: Vec<SolverWarning>,
}

impl SpectrumResult {
    /// Eigenvalues repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| std::iter::repeat(e.lambda).take(e.multiplicity))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// Rigorous lower bound for the spectrum, from the trace inequality
/// `|f(0)|² ≤ 2(‖f‖²/a + a‖f'‖²/3)` on end pieces of length `a ≤ ℓ/2`.
pub fn spectral_lower_bound(graph: &MetricGraph, conditions: &MatchingConditions) -> f64 {
    let norm = conditions.lambda_norm();
    if norm == 0.0 {
        return 0.0;
    }
    -(4.0 * norm / graph.min_length()).max(4.0 * norm * norm / 3.0)
}

/// Sorted `√|λ|` grid points in `[0, k_max]`: geometric from `k_min`, then uniform with step `dk`.
fn k_grid(k_max: f64, k_min: f64, dk: f64, ratio: f64) -> Vec<f64> {
    let mut ks = vec![0.0];
    let mut k = k_min;
    while k < k_max {
        ks.push(k);
        k += (k * (ratio - 1.0)).min(dk);
    }
    ks.push(k_max);
    ks
}

fn lambda_grid(window: Window, k_min: f64, dk: f64, ratio: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    if window.lo < 0.0 {
        let kb = (-window.lo).sqrt();
        let ka = if window.hi < 0.0 { (-window.hi).sqrt() } else { 0.0 };
        grid.extend(
            k_grid(kb, k_min, dk, ratio)
                .into_iter()
                .filter(|&k| k >= ka && k <= kb)
                .map(|k| -k * k),
        );
    }
    if window.hi > 0.0 {
        let kb = window.hi.sqrt();
        let ka = if window.lo > 0.0 { window.lo.sqrt() } else { 0.0 };
        grid.extend(
            k_grid(kb, k_min, dk, ratio)
                .into_iter()
                .filter(|&k| k >= ka && k <= kb)
                .map(|k| k * k),
        );
    }
    grid.push(window.lo);
    grid.push(window.hi);
    grid.retain(|&l| l >= window.lo && l <= window.hi);
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    grid
}

/// Margin on the observed slope of `σ_min` when deciding which grid intervals may hide a root.
const LIPSCHITZ_SAFETY: f64 = 1.5;

/// Extra roots searched for inside one refinement bracket.
const MAX_DEFLATIONS: usize = 3;

fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return linalg::median(values);
    }
    let mut acc = 0.0;
    for (v, w) in &pairs {
        acc += w;
        if acc >= 0.5 * total {
            return *v;
        }
    }
    pairs.last().map_or(0.0, |p| p.0)
}

/// Golden-section minimization of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, rel_tol: f64, floor: f64, max_iter: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        let scale = a.abs().max(b.abs()).max(floor);
        if b - a <= rel_tol * scale || b - a <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Eigenvalues of the graph Laplacian inside `window` (both ends included).
pub fn find_eigenvalues(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    window: Window,
    opts: &SolverOptions,
) -> Result<SpectrumResult, SolverError> {
    if !(window.lo < window.hi) || !window.lo.is_finite() || !window.hi.is_finite() {
        return Err(SolverError::InvalidWindow {
            lo: window.lo,
            hi: window.hi,
        });
    }
    if !(opts.geometric_ratio > 1.0) {
        return Err(SolverError::InvalidOption("geometric_ratio must exceed 1".into()));
    }
    let dk = opts.scan_step.unwrap_or_else(|| default_scan_step(graph));
    if !(dk > 0.0 && dk.is_finite()) {
        return Err(SolverError::InvalidOption(format!("scan step {dk}")));
    }
    let system = SecularSystem::new(graph, conditions);
    let k_min = opts.min_relative_k * system.omega0();
    let grid = lambda_grid(window, k_min, dk, opts.geometric_ratio);
    let sigma: Vec<f64> = grid.par_iter().map(|&l| system.sigma_min(l)).collect();
    // weight by spacing in sqrt|lambda| so the dense grid near zero does not dominate
    let ks: Vec<f64> = grid.iter().map(|l| l.abs().sqrt() * l.signum()).collect();
    let weights: Vec<f64> = (0..grid.len())
        .map(|i| {
            let left = if i > 0 { ks[i] - ks[i - 1] } else { 0.0 };
            let right = if i + 1 < ks.len() { ks[i + 1] - ks[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect();
    let median_sigma = weighted_median(&sigma, &weights);
    let detect = opts.detection_ratio * median_sigma;
    let mult_threshold = opts.multiplicity_ratio * median_sigma;
    let floor = 1e-6 * system.omega0() * system.omega0();
    let merge_tol = |l: f64| 1e-9 * l.abs().max(floor);
    // two roots are distinct only if sigma rises above the detection level between them
    let distinct = |x: f64, y: f64| (x - y).abs() > merge_tol(x) && system.sigma_min(0.5 * (x + y)) >= detect;

    let n = grid.len();
    // brackets around local minima of the samples
    let mut brackets: Vec<(usize, usize)> = (0..n)
        .filter(|&i| {
            let left = if i > 0 { sigma[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { sigma[i + 1] } else { f64::INFINITY };
            sigma[i] <= left && sigma[i] <= right && (sigma[i] < left || sigma[i] < right)
        })
        .map(|i| (i.saturating_sub(1), (i + 1).min(n - 1)))
        .collect();
    // plus every interval that could hide a root given the steepest observed slope
    let lipschitz = LIPSCHITZ_SAFETY
        * (1..n)
            .map(|i| (sigma[i] - sigma[i - 1]).abs() / (ks[i] - ks[i - 1]))
            .fold(0.0, f64::max);
    brackets.extend(
        (1..n)
            .filter(|&i| sigma[i - 1] + sigma[i] <= lipschitz * (ks[i] - ks[i - 1]))
            .map(|i| (i - 1, i)),
    );
    brackets.sort_unstable();
    brackets.dedup();

    let accept = |x: f64| -> Option<Eigenvalue> {
        let s = system.singular_values(x);
        let residual = s[0];
        (residual < detect).then(|| Eigenvalue {
            lambda: x,
            multiplicity: s.iter().filter(|&&v| v < mult_threshold.max(residual)).count(),
            residual,
        })
    };

    let mut roots: Vec<Eigenvalue> = brackets
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let (a, b) = (grid[i], grid[j]);
            let mut x = golden_min(|l| system.sigma_min(l), a, b, opts.rel_tol, floor, opts.max_refine_iter);
            // within the noise band around zero, prefer the exact value
            if a <= 0.0 && b >= 0.0 && system.sigma_min(0.0) <= system.sigma_min(x) {
                x = 0.0;
            }
            let mut found: Vec<Eigenvalue> = accept(x).into_iter().collect();
            // deflate the known roots to expose near-coincident ones in the same bracket
            for _ in 0..MAX_DEFLATIONS {
                if found.is_empty() {
                    break;
                }
                let mut cuts: Vec<f64> = found.iter().map(|r| r.lambda).collect();
                let deflated = |l: f64| system.sigma_min(l) / cuts.iter().map(|&r| (l - r).abs()).product::<f64>();
                let mut ends = vec![a];
                ends.extend(&cuts);
                ends.push(b);
                ends.sort_by(|p, q| p.total_cmp(q));
                let best = ends
                    .windows(2)
                    .filter(|w| w[1] - w[0] > 4.0 * merge_tol(w[0]))
                    .map(|w| golden_min(&deflated, w[0], w[1], opts.rel_tol, floor, opts.max_refine_iter))
                    .filter(|&y| cuts.iter().all(|&r| distinct(r, y)))
                    .filter_map(accept)
                    .min_by(|p, q| p.residual.total_cmp(&q.residual));
                match best {
                    Some(root) => {
                        cuts.push(root.lambda);
                        found.push(root);
                    }
                    None => break,
                }
            }
            found
        })
        .collect();

    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut eigenvalues: Vec<Eigenvalue> = Vec::new();
    for root in roots {
        if let Some(prev) = eigenvalues.last_mut() {
            if !distinct(prev.lambda, root.lambda) {
                if root.residual < prev.residual {
                    *prev = root;
                }
                continue;
            }
        }
        eigenvalues.push(root);
    }

    let mut result = SpectrumResult {
        eigenvalues,
        window,
        scan_resolution: dk,
        median_sigma,
        warnings: Vec::new(),
    };
    if window.hi > 0.0 {
        let diag = weyl_sanity(graph, &result);
        if !diag.passed {
            result.warnings.push(SolverWarning::WindowTooCoarse {
                max_deviation: diag.max_deviation,
                at_lambda: diag.at_lambda,
                suggested_step: dk / 4.0,
            });
        }
    }
    Ok(result)
}

/// Outcome of comparing an eigenvalue count with the Weyl estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylDiagnostic {
    pub passed: bool,
    pub max_deviation: f64,
    pub at_lambda: f64,
    pub tolerance: f64,
}

/// Compare the number of found eigenvalues `≤ λ` with `(total length) √λ / π`
/// across the window. Deviations beyond `2|E| + 2` are flagged.
pub fn weyl_sanity(graph: &MetricGraph, result: &SpectrumResult) -> WeylDiagnostic {
    let total = graph.total_length();
    let lo = result.window.lo.max(0.0);
    let weyl = |l: f64| total * (l.max(0.0).sqrt() - lo.sqrt()) / PI;
    let tolerance = 2.0 * graph.num_edges() as f64 + 2.0;
    let mut count = 0usize;
    let mut worst = (0.0f64, result.window.hi);
    let mut check = |l: f64, n: usize| {
        let d = (n as f64 - weyl(l)).abs();
        if d > worst.0 {
            worst = (d, l);
        }
    };
    for ev in &result.eigenvalues {
        // just below and at each eigenvalue
        check(ev.lambda, count);
        count += ev.multiplicity;
        check(ev.lambda, count);
    }
    check(result.window.hi, count);
    WeylDiagnostic {
        passed: worst.0 <= tolerance,
        max_deviation: worst.0,
        at_lambda: worst.1,
        tolerance,
    }
}

/// An eigenfunction given by per-edge coefficients in the `(C, S)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenfunction {
    pub lambda: f64,
    pub coefficients: Vec<(Complex64, Complex64)>,
    lengths: Vec<f64>,
    slots: Vec<(usize, usize)>,
}

impl Eigenfunction {
    fn new(lambda: f64, graph: &MetricGraph, coefficients: Vec<(Complex64, Complex64)>) -> Self {
        let mut f = Eigenfunction {
            lambda,
            coefficients,
            lengths: graph.lengths(),
            slots: graph.edges().iter().map(|e| (e.minus_slot, e.plus_slot)).collect(),
        };
        let norm = f.norm_squared().sqrt();
        if norm > 0.0 {
            for (a, b) in f.coefficients.iter_mut() {
                *a /= norm;
                *b /= norm;
            }
        }
        f
    }

    pub fn value(&self, edge: usize, x: f64) -> Complex64 {
        let (c0, _, s0, _) = edge_functions(self.lambda, x);
        let (a, b) = self.coefficients[edge];
        a * c0 + b * s0
    }

    pub fn derivative(&self, edge: usize, x: f64) -> Complex64 {
        let (_, dc, _, ds) = edge_functions(self.lambda, x);
        let (a, b) = self.coefficients[edge];
        a * dc + b * ds
    }

    /// Squared L2 norm by composite Simpson quadrature.
    pub fn norm_squared(&self) -> f64 {
        let k = self.lambda.abs().sqrt();
        self.lengths
            .iter()
            .enumerate()
            .map(|(e, &len)| {
                let panels = 2 * (200.0 * (1.0 + k * len)).ceil() as usize;
                let h = len / panels as f64;
                let mut acc = 0.0;
                for i in 0..=panels {
                    let w = if i == 0 || i == panels {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    acc += w * self.value(e, i as f64 * h).norm_sqr();
                }
                acc * h / 3.0
            })
            .sum()
    }

    /// Value trace `F` and inward-derivative trace `F'`.
    pub fn traces(&self) -> (CVector, CVector) {
        let n = 2 * self.lengths.len();
        let mut f = CVector::zeros(n);
        let mut fp = CVector::zeros(n);
        for (e, (&len, &(minus, plus))) in self.lengths.iter().zip(&self.slots).enumerate() {
            f[minus] = self.value(e, 0.0);
            f[plus] = self.value(e, len);
            fp[minus] = self.derivative(e, 0.0);
            fp[plus] = -self.derivative(e, len);
        }
        (f, fp)
    }

    /// Scale-free residual of the matching conditions on the traces.
    pub fn condition_residual(&self, conditions: &MatchingConditions) -> f64 {
        let (f, fp) = self.traces();
        let omega = self.lambda.abs().sqrt().max(1.0 / self.lengths.iter().fold(0.0f64, |a, &b| a.max(b)));
        let r_d = (conditions.p_d() * &f).norm();
        let r_n = (conditions.p_n() * &fp).norm() / omega;
        let r_r = (conditions.p_r() * &fp - conditions.lambda() * &f).norm() / omega;
        (r_d + r_n + r_r) / (f.norm() + fp.norm() / omega)
    }
}

/// Default absolute threshold on the normalized `σ_min` for [`eigenfunction_at`].
pub const EIGENFUNCTION_THRESHOLD: f64 = 1e-6;

/// All eigenfunctions for `lambda` (one per singular value below `threshold`).
pub fn eigenfunctions_at(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    lambda: f64,
    threshold: f64,
) -> Result<Vec<Eigenfunction>, SolverError> {
    let system = SecularSystem::new(graph, conditions);
    let (sigma, coeffs) = system.null_coefficients(lambda, threshold);
    let smallest = sigma.first().copied().unwrap_or(f64::INFINITY);
    if smallest >= threshold {
        return Err(SolverError::NotAnEigenvalue {
            lambda,
            sigma: smallest,
            threshold,
        });
    }
    Ok(coeffs
        .into_iter()
        .zip(&sigma)
        .filter(|(_, &s)| s < threshold)
        .map(|(c, _)| Eigenfunction::new(lambda, graph, c))
        .collect())
}

/// The eigenfunction belonging to the smallest singular value at `lambda`.
pub fn eigenfunction_at(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    lambda: f64,
) -> Result<Eigenfunction, SolverError> {
    let mut all = eigenfunctions_at(graph, conditions, lambda, EIGENFUNCTION_THRESHOLD)?;
    Ok(all.swap_remove(0))
}

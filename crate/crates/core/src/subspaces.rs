//! Subspaces of boundary space and the restricted form `q[G, F] = <G, P_R Lambda P_R F>`.
//!
//! `D0` holds vectors with equal values at both ends of every edge and `N0` the
//! vectors with opposite values; they are orthogonal complements. The slow
//! subspace is `F0 = D0 ∩ Ker P_D` and its dimension is `m0`.

use num_complex::Complex64;

use crate::error::SubspaceError;
use crate::graph::{projector_range, MatchingConditions, MetricGraph, Tolerances};
use crate::linalg::{self, c, CMatrix};

/// Orthonormal basis of a linear subspace, stored as matrix columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: CMatrix,
}

impl Subspace {
    /// Wrap columns that are already orthonormal.
    pub fn from_orthonormal(basis: CMatrix) -> Self {
        Subspace {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    /// Orthonormalize arbitrary spanning columns (rank by `rel_tol`).
    pub fn span(columns: &CMatrix, rel_tol: f64) -> Self {
        let basis = linalg::column_space(columns, rel_tol, 1e-300);
        Subspace {
            ambient_dim: columns.nrows(),
            basis,
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: linalg::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: linalg::identity(ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Distance-based membership test: `||v - P v|| <= tol ||v||`.
    pub fn contains(&self, v: &[Complex64], tol: f64) -> bool {
        let v = linalg::CVector::from_column_slice(v);
        let residual = &v - self.projector() * &v;
        residual.norm() <= tol * v.norm().max(f64::MIN_POSITIVE)
    }

    /// Same subspace, basis multiplied on the right by a unitary.
    pub fn rotated(&self, unitary: &CMatrix) -> Self {
        Subspace {
            ambient_dim: self.ambient_dim,
            basis: &self.basis * unitary,
        }
    }

    /// Direct sum `self ⊕ other` inside the ambient space of both, stacked as `(x, y)`.
    pub fn direct_sum(&self, other: &Subspace) -> Self {
        let n = self.ambient_dim + other.ambient_dim;
        let mut b = linalg::zeros(n, self.dim() + other.dim());
        b.view_mut((0, 0), self.basis.shape()).copy_from(&self.basis);
        b.view_mut((self.ambient_dim, self.dim()), other.basis.shape())
            .copy_from(&other.basis);
        Subspace {
            ambient_dim: n,
            basis: b,
        }
    }
}

fn edge_pair_subspace(graph: &MetricGraph, sign: f64) -> Subspace {
    let n = graph.boundary_dim();
    let mut b = linalg::zeros(n, graph.num_edges());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for (e, edge) in graph.edges().iter().enumerate() {
        b[(edge.minus_slot, e)] = c(r);
        b[(edge.plus_slot, e)] = c(sign * r);
    }
    Subspace::from_orthonormal(b)
}

fn default_layout(num_edges: usize) -> MetricGraph {
    MetricGraph::from_lengths(&vec![1.0; num_edges.max(1)]).expect("unit lengths are valid")
}

/// `D0` for the default slot layout.
pub fn build_d0(num_edges: usize) -> Subspace {
    build_d0_for(&default_layout(num_edges))
}

/// `N0` for the default slot layout.
pub fn build_n0(num_edges: usize) -> Subspace {
    build_n0_for(&default_layout(num_edges))
}

/// `D0` using the endpoint slots of `graph`.
pub fn build_d0_for(graph: &MetricGraph) -> Subspace {
    edge_pair_subspace(graph, 1.0)
}

/// `N0` using the endpoint slots of `graph`.
pub fn build_n0_for(graph: &MetricGraph) -> Subspace {
    edge_pair_subspace(graph, -1.0)
}

/// Orthonormal basis of `Ker P`.
pub fn kernel(projector: &CMatrix, tol: &Tolerances) -> Result<Subspace, SubspaceError> {
    let n = projector.nrows();
    if projector.ncols() != n {
        return Err(SubspaceError::DimensionMismatch {
            expected: n,
            found: projector.ncols(),
        });
    }
    let defect = linalg::op_norm(&(projector * projector - projector))
        .max(linalg::op_norm(&(projector - projector.adjoint())));
    if defect > tol.projector {
        return Err(SubspaceError::NotAProjector(defect));
    }
    let (vals, vecs) = linalg::hermitian_eigen(projector);
    let top = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
    let idx: Vec<usize> = (0..n).filter(|&i| vals[i].abs() <= tol.rank * top).collect();
    let mut b = linalg::zeros(n, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        b.set_column(j, &vecs.column(i));
    }
    Ok(Subspace::from_orthonormal(b))
}

/// `a ∩ b` via principal angles between the two subspaces.
pub fn intersect(a: &Subspace, b: &Subspace, tol: &Tolerances) -> Result<Subspace, SubspaceError> {
    if a.ambient_dim != b.ambient_dim {
        return Err(SubspaceError::AmbientMismatch(a.ambient_dim, b.ambient_dim));
    }
    if a.dim() == 0 || b.dim() == 0 {
        return Ok(Subspace::zero(a.ambient_dim));
    }
    let cross = a.basis.adjoint() * &b.basis;
    let (_, sigma, v) = linalg::sorted_svd(&cross);
    let shared = sigma.iter().filter(|&&s| s > 1.0 - tol.angle).count();
    let directions = &b.basis * v.columns(0, shared);
    // cosines slightly below one leave a tiny non-orthonormality; clean it up
    let (u, _, _) = linalg::sorted_svd(&directions);
    Ok(Subspace::from_orthonormal(u.columns(0, shared).into_owned()))
}

/// Inertia of a hermitian form restricted to a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct FormInertia {
    pub n_minus: usize,
    pub n_zero: usize,
    pub n_plus: usize,
    /// Eigenvalues of `B* (P_R Lambda P_R) B`, ascending.
    pub eigenvalues: Vec<f64>,
    pub zero_tolerance_used: f64,
}

impl FormInertia {
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, zero_tol: f64) -> Self {
        let n_minus = eigenvalues.iter().filter(|&&m| m < -zero_tol).count();
        let n_plus = eigenvalues.iter().filter(|&&m| m > zero_tol).count();
        FormInertia {
            n_minus,
            n_zero: eigenvalues.len() - n_minus - n_plus,
            n_plus,
            eigenvalues,
            zero_tolerance_used: zero_tol,
        }
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_minus, self.n_zero, self.n_plus)
    }
}

/// Default zero band for form eigenvalues: `1e-8 (1 + ||Lambda||)`.
pub fn default_zero_tol(conditions: &MatchingConditions) -> f64 {
    1e-8 * (1.0 + conditions.lambda_norm())
}

/// Eigenvalues and sign counts of `q` on `subspace`.
pub fn restricted_form_inertia(
    conditions: &MatchingConditions,
    subspace: &Subspace,
    zero_tol: Option<f64>,
) -> Result<FormInertia, SubspaceError> {
    if subspace.ambient_dim() != conditions.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: conditions.dim(),
            found: subspace.ambient_dim(),
        });
    }
    let zero_tol = zero_tol.unwrap_or_else(|| default_zero_tol(conditions));
    let b = subspace.basis();
    let form = b.adjoint() * conditions.lambda() * b;
    let (vals, _) = linalg::hermitian_eigen(&form);
    Ok(FormInertia::from_eigenvalues(vals, zero_tol))
}

/// `F0 = D0 ∩ Ker P_D` for the given graph layout.
pub fn slow_subspace(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
    tol: &Tolerances,
) -> Result<Subspace, SubspaceError> {
    if graph.boundary_dim() != conditions.dim() {
        return Err(SubspaceError::DimensionMismatch {
            expected: graph.boundary_dim(),
            found: conditions.dim(),
        });
    }
    let ker = kernel(conditions.p_d(), tol)?;
    intersect(&build_d0_for(graph), &ker, tol)
}

/// The subspace of `E ⊕ E'` cut out by the matching conditions:
/// `{(a, Lambda P_R a) : a ∈ Ker P_D} + {(0, b) : b ∈ Ran P_D}`.
pub fn build_lagrangian(conditions: &MatchingConditions) -> Subspace {
    let n = conditions.dim();
    let tol = Tolerances::default();
    let ker = kernel(conditions.p_d(), &tol).expect("validated projector");
    let ran = projector_range(conditions.p_d());
    let top = linalg::hstack(ker.basis(), &linalg::zeros(n, ran.ncols()));
    let bottom = linalg::hstack(&(conditions.lambda() * ker.basis()), &ran);
    Subspace::span(&linalg::vstack(&top, &bottom), tol.rank)
}

/// `dim Proj_E(L ∩ (D0 ⊕ N0))` for the default slot layout.
pub fn nrc_dimension(conditions: &MatchingConditions) -> usize {
    nrc_dimension_for(&default_layout(conditions.dim() / 2), conditions)
}

/// `dim Proj_E(L ∩ (D0 ⊕ N0))` using the endpoint slots of `graph`.
pub fn nrc_dimension_for(graph: &MetricGraph, conditions: &MatchingConditions) -> usize {
    let tol = Tolerances::default();
    let lagrangian = build_lagrangian(conditions);
    let d0n0 = build_d0_for(graph).direct_sum(&build_n0_for(graph));
    let meet = intersect(&lagrangian, &d0n0, &tol).expect("equal ambient dimensions");
    let n = conditions.dim();
    let e_block = meet.basis().rows(0, n).into_owned();
    // the intersection basis is orthonormal, so its singular values are at most one
    linalg::singular_values(&e_block)
        .iter()
        .filter(|&&s| s > tol.rank)
        .count()
}

/// Both sides of the non-resonance equivalence, computed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct NrcReport {
    pub nrc_dimension: usize,
    pub n_zero: usize,
    pub m0: usize,
    pub inertia: FormInertia,
    /// Smallest gap between a form eigenvalue classed nonzero and the zero band edge.
    pub form_margin: f64,
}

impl NrcReport {
    pub fn matches(&self) -> bool {
        self.nrc_dimension == self.n_zero
    }
}

/// Compare the projected-intersection dimension with the nullity of `q` on `F0`.
pub fn check_nrc_equivalence_for(
    graph: &MetricGraph,
    conditions: &MatchingConditions,
) -> Result<NrcReport, SubspaceError> {
    let tol = Tolerances::default();
    let f0 = slow_subspace(graph, conditions, &tol)?;
    let inertia = restricted_form_inertia(conditions, &f0, None)?;
    let nrc = nrc_dimension_for(graph, conditions);
    let zt = inertia.zero_tolerance_used;
    let form_margin = inertia
        .eigenvalues
        .iter()
        .map(|m| m.abs())
        .filter(|&m| m > zt)
        .fold(f64::INFINITY, f64::min)
        - zt;
    let report = NrcReport {
        nrc_dimension: nrc,
        n_zero: inertia.n_zero,
        m0: f0.dim(),
        inertia,
        form_margin,
    };
    if !report.matches() {
        return Err(SubspaceError::EquivalenceViolation {
            nrc_dimension: report.nrc_dimension,
            n_zero: report.n_zero,
        });
    }
    Ok(report)
}

/// [`check_nrc_equivalence_for`] with the default slot layout.
pub fn check_nrc_equivalence(conditions: &MatchingConditions) -> Result<NrcReport, SubspaceError> {
    check_nrc_equivalence_for(&default_layout(conditions.dim() / 2), conditions)
}

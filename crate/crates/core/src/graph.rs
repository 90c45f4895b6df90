//! Metric graphs and self-adjoint matching conditions.
//!
//! Boundary vectors have one slot per edge endpoint. The default slot layout is
//! `(e1-, e1+, e2-, e2+, ...)`; a graph may carry any other permutation, but the
//! same layout is used for values `F` and inward derivatives `F'`.
//!
//! Matching conditions are the triple of mutually orthogonal projectors
//! `P_D, P_N, P_R` summing to the identity, together with a hermitian `Lambda`
//! invertible on `Ran P_R`:
//!
//! ```text
//! P_D F = 0,   P_N F' = 0,   P_R F' = Lambda P_R F.
//! ```

use log::warn;

use crate::error::{Axiom, ModelError};
use crate::linalg::{self, c, CMatrix};

/// Numerical tolerances used when validating conditions and computing ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute operator-norm tolerance on projector axioms.
    pub projector: f64,
    /// Rank tolerance relative to the largest singular value.
    pub rank: f64,
    /// Principal-angle tolerance: cosines above `1 - angle` count as shared directions.
    pub angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            projector: 1e-10,
            rank: 1e-8,
            angle: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub length: f64,
    /// Position of the `e-` endpoint (x = 0) in boundary vectors.
    pub minus_slot: usize,
    /// Position of the `e+` endpoint (x = length) in boundary vectors.
    pub plus_slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    edges: Vec<Edge>,
}

impl MetricGraph {
    pub fn new(edges: Vec<Edge>) -> Result<Self, ModelError> {
        if edges.is_empty() {
            return Err(ModelError::EmptyGraph);
        }
        let dim = 2 * edges.len();
        let mut seen = vec![false; dim];
        for (i, e) in edges.iter().enumerate() {
            if !(e.length > 0.0 && e.length.is_finite()) {
                return Err(ModelError::InvalidLength {
                    edge: i,
                    length: e.length,
                });
            }
            for slot in [e.minus_slot, e.plus_slot] {
                if slot >= dim {
                    return Err(ModelError::InvalidSlots(format!(
                        "slot {slot} out of range for {dim} slots"
                    )));
                }
                if std::mem::replace(&mut seen[slot], true) {
                    return Err(ModelError::InvalidSlots(format!("slot {slot} used twice")));
                }
            }
        }
        Ok(MetricGraph { edges })
    }

    /// Graph with the default slot layout `(2e, 2e + 1)`.
    pub fn from_lengths(lengths: &[f64]) -> Result<Self, ModelError> {
        let edges = lengths
            .iter()
            .enumerate()
            .map(|(e, &length)| Edge {
                length,
                minus_slot: 2 * e,
                plus_slot: 2 * e + 1,
            })
            .collect();
        Self::new(edges)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `2|E|`, the dimension of the boundary spaces `E` and `E'`.
    pub fn boundary_dim(&self) -> usize {
        2 * self.edges.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.length).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn max_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(0.0, f64::max)
    }

    /// Same topology with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(ModelError::InvalidEpsilon(factor));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                length: e.length * factor,
                ..*e
            })
            .collect();
        Self::new(edges)
    }

    /// Per-slot weights `length / 2`; the diagonal of `L / 2`.
    ///
    /// For an edgewise-constant function with trace `F`, `F* W F` is its squared
    /// L2 norm.
    pub fn slot_half_lengths(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.boundary_dim()];
        for e in &self.edges {
            w[e.minus_slot] = 0.5 * e.length;
            w[e.plus_slot] = 0.5 * e.length;
        }
        w
    }
}

/// Measured defects of a set of matching conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConditionDefects {
    /// `||P - P*||` for `P_D`, `P_N`, `P_R`.
    pub hermiticity: [f64; 3],
    /// `||P^2 - P||` for `P_D`, `P_N`, `P_R`.
    pub idempotency: [f64; 3],
    /// `||P_D + P_N + P_R - I||`.
    pub completeness: f64,
    /// Largest `||P_i P_j||` over `i != j`.
    pub mutual: f64,
    /// `sigma_min / sigma_max` of `Lambda` on `Ran P_R`; `None` if `P_R = 0`.
    pub lambda_margin: Option<f64>,
    /// Norm of the part of the supplied `Lambda` discarded by compression onto `Ran P_R`.
    pub lambda_discarded: f64,
}

impl ConditionDefects {
    pub fn worst_projector_defect(&self) -> f64 {
        self.hermiticity
            .iter()
            .chain(self.idempotency.iter())
            .copied()
            .fold(self.completeness.max(self.mutual), f64::max)
    }
}

/// Validated self-adjoint matching conditions. `lambda` is stored as `P_R Lambda P_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingConditions {
    p_d: CMatrix,
    p_n: CMatrix,
    p_r: CMatrix,
    lambda: CMatrix,
    defects: ConditionDefects,
}

const NAMES: [&str; 3] = ["p_d", "p_n", "p_r"];

/// Check the projector and `Lambda` axioms and build validated conditions.
pub fn validate_conditions(
    p_d: &CMatrix,
    p_n: &CMatrix,
    p_r: &CMatrix,
    lambda: &CMatrix,
    tol: &Tolerances,
) -> Result<MatchingConditions, ModelError> {
    let n = p_d.nrows();
    for (name, m) in [("p_d", p_d), ("p_n", p_n), ("p_r", p_r), ("lambda", lambda)] {
        if m.nrows() != n || m.ncols() != n {
            return Err(ModelError::DimensionMismatch {
                what: format!("{name} ({}x{})", m.nrows(), m.ncols()),
                expected: n,
                found: if m.nrows() != n { m.nrows() } else { m.ncols() },
            });
        }
    }
    if n == 0 || n % 2 != 0 {
        return Err(ModelError::DimensionMismatch {
            what: "boundary dimension must be even and positive".into(),
            expected: n + n % 2,
            found: n,
        });
    }

    let projectors = [p_d, p_n, p_r];
    let mut defects = ConditionDefects::default();
    for (i, p) in projectors.iter().enumerate() {
        defects.hermiticity[i] = linalg::op_norm(&(*p - p.adjoint()));
        if defects.hermiticity[i] > tol.projector {
            return Err(ModelError::ProjectorAxiomViolation {
                axiom: Axiom::Hermitian,
                matrix: NAMES[i],
                defect: defects.hermiticity[i],
            });
        }
        defects.idempotency[i] = linalg::op_norm(&(*p * *p - *p));
        if defects.idempotency[i] > tol.projector {
            return Err(ModelError::ProjectorAxiomViolation {
                axiom: Axiom::Idempotent,
                matrix: NAMES[i],
                defect: defects.idempotency[i],
            });
        }
    }
    defects.completeness = linalg::op_norm(&(p_d + p_n + p_r - linalg::identity(n)));
    if defects.completeness > tol.projector {
        return Err(ModelError::ProjectorAxiomViolation {
            axiom: Axiom::Completeness,
            matrix: "p_d + p_n + p_r",
            defect: defects.completeness,
        });
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let d = linalg::op_norm(&(projectors[i] * projectors[j]));
        if d > tol.projector {
            return Err(ModelError::ProjectorAxiomViolation {
                axiom: Axiom::MutualOrthogonality,
                matrix: NAMES[i],
                defect: d,
            });
        }
        defects.mutual = defects.mutual.max(d);
    }

    let compressed = p_r * lambda * p_r;
    defects.lambda_discarded = linalg::op_norm(&(lambda - &compressed));
    if defects.lambda_discarded > tol.projector {
        warn!(
            "lambda has a component of norm {:.3e} outside Ran P_R; it is discarded",
            defects.lambda_discarded
        );
    }
    let herm_defect = linalg::op_norm(&(&compressed - compressed.adjoint()));
    let scale = linalg::op_norm(&compressed).max(1.0);
    if herm_defect > tol.projector * scale {
        return Err(ModelError::LambdaNotHermitian {
            defect: herm_defect,
        });
    }
    let compressed = linalg::hermitian_part(&compressed);

    let range_r = projector_range(p_r);
    if range_r.ncols() > 0 {
        let restricted = range_r.adjoint() * &compressed * &range_r;
        let s = linalg::singular_values(&restricted);
        let top = s.first().copied().unwrap_or(0.0);
        let bottom = s.last().copied().unwrap_or(0.0);
        let margin = if top > 0.0 { bottom / top } else { 0.0 };
        defects.lambda_margin = Some(margin);
        if margin <= tol.rank {
            return Err(ModelError::LambdaNotInvertibleOnRange { margin });
        }
    }

    Ok(MatchingConditions {
        p_d: linalg::hermitian_part(p_d),
        p_n: linalg::hermitian_part(p_n),
        p_r: linalg::hermitian_part(p_r),
        lambda: compressed,
        defects,
    })
}

/// Orthonormal basis of the range of an orthogonal projector.
pub(crate) fn projector_range(p: &CMatrix) -> CMatrix {
    let (vals, vecs) = linalg::hermitian_eigen(p);
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut out = linalg::zeros(p.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &vecs.column(i));
    }
    out
}

impl MatchingConditions {
    /// Assemble from parts already known to satisfy the axioms exactly.
    pub(crate) fn from_parts(p_d: CMatrix, p_n: CMatrix, p_r: CMatrix, lambda: CMatrix) -> Self {
        MatchingConditions {
            p_d,
            p_n,
            p_r,
            lambda,
            defects: ConditionDefects::default(),
        }
    }

    pub fn p_d(&self) -> &CMatrix {
        &self.p_d
    }

    pub fn p_n(&self) -> &CMatrix {
        &self.p_n
    }

    pub fn p_r(&self) -> &CMatrix {
        &self.p_r
    }

    /// `P_R Lambda P_R`.
    pub fn lambda(&self) -> &CMatrix {
        &self.lambda
    }

    pub fn dim(&self) -> usize {
        self.p_d.nrows()
    }

    pub fn defects(&self) -> &ConditionDefects {
        &self.defects
    }

    pub fn lambda_norm(&self) -> f64 {
        linalg::op_norm(&self.lambda)
    }

    /// Ranks `(dim Ran P_D, dim Ran P_N, dim Ran P_R)`.
    pub fn ranks(&self) -> (usize, usize, usize) {
        (
            projector_range(&self.p_d).ncols(),
            projector_range(&self.p_n).ncols(),
            projector_range(&self.p_r).ncols(),
        )
    }

    /// Same projectors with `Lambda` multiplied by `factor`.
    pub fn with_lambda_scaled(&self, factor: f64) -> Self {
        MatchingConditions {
            lambda: &self.lambda * c(factor),
            ..self.clone()
        }
    }
}

/// Per-vertex condition descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexCondition {
    Dirichlet,
    Neumann,
    /// `F'_v = gamma F_v` at every slot of the vertex (applied slotwise).
    Robin { gamma: f64 },
    /// Continuity of values and vanishing sum of inward derivatives.
    Standard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSpec {
    pub name: String,
    pub slots: Vec<usize>,
    pub condition: VertexCondition,
}

impl VertexSpec {
    pub fn new(name: impl Into<String>, slots: Vec<usize>, condition: VertexCondition) -> Self {
        VertexSpec {
            name: name.into(),
            slots,
            condition,
        }
    }
}

/// Assemble block-diagonal conditions from per-vertex descriptors.
pub fn preset_conditions(
    graph: &MetricGraph,
    vertices: &[VertexSpec],
) -> Result<MatchingConditions, ModelError> {
    let n = graph.boundary_dim();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (v, spec) in vertices.iter().enumerate() {
        for &slot in &spec.slots {
            if slot >= n {
                return Err(ModelError::InvalidSlots(format!(
                    "vertex {} references slot {slot} but there are {n} slots",
                    spec.name
                )));
            }
            if owner[slot].replace(v).is_some() {
                return Err(ModelError::ConflictingAssignment(slot));
            }
        }
    }
    if let Some(slot) = owner.iter().position(Option::is_none) {
        return Err(ModelError::UnassignedSlot(slot));
    }

    let mut p_d = linalg::zeros(n, n);
    let mut p_n = linalg::zeros(n, n);
    let mut p_r = linalg::zeros(n, n);
    let mut lambda = linalg::zeros(n, n);
    for spec in vertices {
        match spec.condition {
            VertexCondition::Dirichlet => {
                for &s in &spec.slots {
                    p_d[(s, s)] = c(1.0);
                }
            }
            VertexCondition::Neumann => {
                for &s in &spec.slots {
                    p_n[(s, s)] = c(1.0);
                }
            }
            VertexCondition::Robin { gamma } => {
                for &s in &spec.slots {
                    p_r[(s, s)] = c(1.0);
                    lambda[(s, s)] = c(gamma);
                }
            }
            VertexCondition::Standard => {
                let d = spec.slots.len() as f64;
                for &i in &spec.slots {
                    for &j in &spec.slots {
                        let avg = 1.0 / d;
                        p_n[(i, j)] = c(avg);
                        p_d[(i, j)] = c(if i == j { 1.0 - avg } else { -avg });
                    }
                }
            }
        }
    }
    validate_conditions(&p_d, &p_n, &p_r, &lambda, &Tolerances::default())
}

/// A graph whose lengths are uniformly scaled by `epsilon`, with conditions
/// independent of `epsilon`.
#[derive(Debug, Clone)]
pub struct ShrinkFamily {
    pub base_graph: MetricGraph,
    pub conditions: MatchingConditions,
    epsilon: f64,
}

impl ShrinkFamily {
    pub fn new(
        base_graph: MetricGraph,
        conditions: MatchingConditions,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(ModelError::InvalidEpsilon(epsilon));
        }
        if conditions.dim() != base_graph.boundary_dim() {
            return Err(ModelError::DimensionMismatch {
                what: "conditions vs graph boundary".into(),
                expected: base_graph.boundary_dim(),
                found: conditions.dim(),
            });
        }
        Ok(ShrinkFamily {
            base_graph,
            conditions,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// The member of the family at its `epsilon`: every length multiplied by `epsilon`.
pub fn scale(family: &ShrinkFamily) -> MetricGraph {
    family
        .base_graph
        .scaled(family.epsilon)
        .expect("epsilon validated at construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag, zeros};

    fn interval() -> MetricGraph {
        MetricGraph::from_lengths(&[1.0]).unwrap()
    }

    #[test]
    fn dirichlet_interval_is_valid() {
        let z = zeros(2, 2);
        let cond = validate_conditions(&diag(&[1.0, 1.0]), &z, &z, &z, &Tolerances::default()).unwrap();
        assert!(cond.defects().worst_projector_defect() < 1e-15);
        assert_eq!(cond.defects().lambda_margin, None);
    }

    #[test]
    fn robin_robin_is_valid() {
        let z = zeros(2, 2);
        let cond = validate_conditions(&z, &z, &diag(&[1.0, 1.0]), &diag(&[0.7, -0.7]), &Tolerances::default())
            .unwrap();
        assert_eq!(cond.lambda()[(1, 1)].re, -0.7);
        assert!((cond.defects().lambda_margin.unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn half_identity_is_not_idempotent() {
        let z = zeros(2, 2);
        let half = diag(&[0.5, 0.5]);
        let err = validate_conditions(&half, &half, &z, &z, &Tolerances::default()).unwrap_err();
        match err {
            ModelError::ProjectorAxiomViolation { axiom, matrix, defect } => {
                assert_eq!(axiom, Axiom::Idempotent);
                assert_eq!(matrix, "p_d");
                assert!((defect - 0.25).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn incomplete_projectors_are_rejected() {
        let z = zeros(2, 2);
        let err = validate_conditions(&diag(&[1.0, 0.0]), &z, &z, &z, &Tolerances::default()).unwrap_err();
        assert!(matches!(
            err,
            ModelError::ProjectorAxiomViolation { axiom: Axiom::Completeness, .. }
        ));
    }

    #[test]
    fn overlapping_projectors_are_rejected() {
        // each a projector, sum is not I and they overlap
        let z = zeros(2, 2);
        let p = diag(&[1.0, 0.0]);
        let q = diag(&[0.0, 1.0]);
        let err = validate_conditions(&p, &p, &q, &diag(&[0.0, 1.0]), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, ModelError::ProjectorAxiomViolation { .. }));
        let _ = z;
    }

    #[test]
    fn singular_lambda_is_rejected() {
        let z = zeros(2, 2);
        let err = validate_conditions(&z, &z, &diag(&[1.0, 1.0]), &diag(&[1.0, 0.0]), &Tolerances::default())
            .unwrap_err();
        assert!(matches!(err, ModelError::LambdaNotInvertibleOnRange { .. }));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let z2 = zeros(2, 2);
        let z3 = zeros(3, 3);
        let err = validate_conditions(&z2, &z2, &z3, &z2, &Tolerances::default()).unwrap_err();
        assert!(matches!(err, ModelError::DimensionMismatch { .. }));
    }

    #[test]
    fn lambda_outside_range_is_compressed() {
        let z = zeros(2, 2);
        let cond = validate_conditions(
            &z,
            &diag(&[0.0, 1.0]),
            &diag(&[1.0, 0.0]),
            &diag(&[2.0, 5.0]),
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(cond.lambda()[(1, 1)].re, 0.0);
        assert_eq!(cond.lambda()[(0, 0)].re, 2.0);
        assert!((cond.defects().lambda_discarded - 5.0).abs() < 1e-12);
    }

    #[test]
    fn robin_neumann_preset_matches_block_form() {
        let g = interval();
        let cond = preset_conditions(
            &g,
            &[
                VertexSpec::new("a", vec![0], VertexCondition::Robin { gamma: 1.5 }),
                VertexSpec::new("b", vec![1], VertexCondition::Neumann),
            ],
        )
        .unwrap();
        assert_eq!(cond.p_d(), &zeros(2, 2));
        assert_eq!(cond.p_n(), &diag(&[0.0, 1.0]));
        assert_eq!(cond.p_r(), &diag(&[1.0, 0.0]));
        assert_eq!(cond.lambda()[(0, 0)].re, 1.5);
    }

    #[test]
    fn standard_vertex_blocks() {
        let g = MetricGraph::from_lengths(&[1.0, 1.0, 1.0]).unwrap();
        let cond = preset_conditions(
            &g,
            &[
                VertexSpec::new("c", vec![0, 2, 4], VertexCondition::Standard),
                VertexSpec::new("l", vec![1, 3, 5], VertexCondition::Neumann),
            ],
        )
        .unwrap();
        assert!((cond.p_n()[(0, 2)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!((cond.p_d()[(0, 0)].re - 2.0 / 3.0).abs() < 1e-15);
        assert!(cond.defects().worst_projector_defect() < 1e-12);
        assert_eq!(cond.ranks(), (2, 4, 0));
    }

    #[test]
    fn preset_slot_errors() {
        let g = interval();
        let err = preset_conditions(&g, &[VertexSpec::new("a", vec![0], VertexCondition::Dirichlet)]).unwrap_err();
        assert!(matches!(err, ModelError::UnassignedSlot(1)));
        let err = preset_conditions(
            &g,
            &[
                VertexSpec::new("a", vec![0, 1], VertexCondition::Dirichlet),
                VertexSpec::new("b", vec![1], VertexCondition::Neumann),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::ConflictingAssignment(1)));
    }

    #[test]
    fn graph_rejects_bad_input() {
        assert!(matches!(
            MetricGraph::from_lengths(&[1.0, -2.0]),
            Err(ModelError::InvalidLength { edge: 1, .. })
        ));
        assert!(matches!(MetricGraph::from_lengths(&[]), Err(ModelError::EmptyGraph)));
        let dup = vec![
            Edge { length: 1.0, minus_slot: 0, plus_slot: 0 },
        ];
        assert!(matches!(MetricGraph::new(dup), Err(ModelError::InvalidSlots(_))));
    }

    #[test]
    fn scale_examples() {
        let cond = preset_conditions(
            &interval(),
            &[VertexSpec::new("a", vec![0, 1], VertexCondition::Dirichlet)],
        )
        .unwrap();
        let fam = ShrinkFamily::new(interval(), cond.clone(), 0.5).unwrap();
        assert_eq!(scale(&fam).lengths(), vec![0.5]);
        let two = MetricGraph::from_lengths(&[1.0, 2.0]).unwrap();
        assert_eq!(two.scaled(1.0).unwrap().lengths(), vec![1.0, 2.0]);
        let three = MetricGraph::from_lengths(&[3.0]).unwrap();
        assert_eq!(three.scaled(1e-3).unwrap().lengths(), vec![0.003]);
        assert!(ShrinkFamily::new(interval(), cond, 0.0).is_err());
    }
}

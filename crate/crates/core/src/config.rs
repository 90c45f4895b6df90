//! JSON problem files: a graph, its matching conditions, and solver/sweep options.
//!
//! ```json
//! {
//!   "edges": [{"length": 1.0, "vertex_minus": "a", "vertex_plus": "b"}],
//!   "vertices": {"a": {"type": "robin", "gamma": -1.0}, "b": {"type": "neumann"}},
//!   "solver": {"window": [-5.0, 50.0]},
//!   "sweep": {"num_fast": 3}
//! }
//! ```
//!
//! Instead of `vertices`, `raw_conditions` may give `p_d`, `p_n`, `p_r` and
//! `lambda` as row-major complex matrices, either nested rows or one flat list,
//! with entries `[re, im]` or plain reals. Slot `2e` is the start of edge `e`,
//! slot `2e + 1` its end.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;

use crate::asymptotics::default_epsilons;
use crate::error::ConfigError;
use crate::graph::{
    preset_conditions, validate_conditions, MatchingConditions, MetricGraph, Tolerances, VertexCondition,
    VertexSpec,
};
use crate::linalg::CMatrix;
use crate::secular::{SolverOptions, Window};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub length: f64,
    pub vertex_minus: String,
    pub vertex_plus: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum VertexConfig {
    Dirichlet,
    Neumann,
    Robin { gamma: f64 },
    Standard,
}

impl From<&VertexConfig> for VertexCondition {
    fn from(v: &VertexConfig) -> Self {
        match *v {
            VertexConfig::Dirichlet => VertexCondition::Dirichlet,
            VertexConfig::Neumann => VertexCondition::Neumann,
            VertexConfig::Robin { gamma } => VertexCondition::Robin { gamma },
            VertexConfig::Standard => VertexCondition::Standard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl From<Scalar> for Complex64 {
    fn from(s: Scalar) -> Self {
        match s {
            Scalar::Real(re) => Complex64::new(re, 0.0),
            Scalar::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MatrixConfig {
    Rows(Vec<Vec<Scalar>>),
    Flat(Vec<Scalar>),
}

impl MatrixConfig {
    fn to_matrix(&self, name: &str, n: usize) -> Result<CMatrix, ConfigError> {
        let entries: Vec<Complex64> = match self {
            MatrixConfig::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(ConfigError::Invalid(format!("{name} must be {n}x{n}")));
                }
                rows.iter().flatten().map(|&s| s.into()).collect()
            }
            MatrixConfig::Flat(flat) => {
                if flat.len() != n * n {
                    return Err(ConfigError::Invalid(format!(
                        "{name} has {} entries, expected {}",
                        flat.len(),
                        n * n
                    )));
                }
                flat.iter().map(|&s| s.into()).collect()
            }
        };
        Ok(CMatrix::from_row_slice(n, n, &entries))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConditions {
    pub p_d: MatrixConfig,
    pub p_n: MatrixConfig,
    pub p_r: MatrixConfig,
    pub lambda: MatrixConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub window: Option<[f64; 2]>,
    pub scan_step: Option<f64>,
    pub detection_ratio: Option<f64>,
    pub multiplicity_ratio: Option<f64>,
    pub rel_tol: Option<f64>,
    pub tau_proj: Option<f64>,
    pub tau_rank: Option<f64>,
    pub tau_angle: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub epsilons: Option<Vec<f64>>,
    pub num_fast: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub edges: Vec<EdgeConfig>,
    pub vertices: Option<BTreeMap<String, VertexConfig>>,
    pub raw_conditions: Option<RawConditions>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
}

pub const DEFAULT_NUM_FAST: usize = 3;

/// A loaded and validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub graph: MetricGraph,
    pub conditions: MatchingConditions,
    pub tolerances: Tolerances,
    pub solver: SolverOptions,
    pub window: Option<Window>,
    pub epsilons: Vec<f64>,
    pub num_fast: usize,
    pub has_sweep: bool,
}

impl ProblemConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            projector: self.solver.tau_proj.unwrap_or(d.projector),
            rank: self.solver.tau_rank.unwrap_or(d.rank),
            angle: self.solver.tau_angle.unwrap_or(d.angle),
        }
    }

    pub fn graph(&self) -> Result<MetricGraph, ConfigError> {
        let lengths: Vec<f64> = self.edges.iter().map(|e| e.length).collect();
        Ok(MetricGraph::from_lengths(&lengths)?)
    }

    /// The four matrices as given, before validation.
    pub fn raw_matrices(&self) -> Result<[CMatrix; 4], ConfigError> {
        let n = 2 * self.edges.len();
        match (&self.vertices, &self.raw_conditions) {
            (Some(_), Some(_)) | (None, None) => Err(ConfigError::Invalid(
                "exactly one of \"vertices\" and \"raw_conditions\" is required".into(),
            )),
            (None, Some(raw)) => Ok([
                raw.p_d.to_matrix("p_d", n)?,
                raw.p_n.to_matrix("p_n", n)?,
                raw.p_r.to_matrix("p_r", n)?,
                raw.lambda.to_matrix("lambda", n)?,
            ]),
            (Some(vertices), None) => {
                let mut slots: BTreeMap<&str, Vec<usize>> = vertices.keys().map(|k| (k.as_str(), vec![])).collect();
                for (e, edge) in self.edges.iter().enumerate() {
                    for (slot, name) in [(2 * e, &edge.vertex_minus), (2 * e + 1, &edge.vertex_plus)] {
                        slots
                            .get_mut(name.as_str())
                            .ok_or_else(|| ConfigError::Invalid(format!("edge {e} refers to unknown vertex {name:?}")))?
                            .push(slot);
                    }
                }
                if let Some((name, _)) = slots.iter().find(|(_, s)| s.is_empty()) {
                    return Err(ConfigError::Invalid(format!("vertex {name:?} has no incident edge")));
                }
                let specs: Vec<VertexSpec> = vertices
                    .iter()
                    .map(|(name, v)| VertexSpec::new(name.clone(), slots[name.as_str()].clone(), v.into()))
                    .collect();
                let cond = preset_conditions(&self.graph()?, &specs)?;
                Ok([
                    cond.p_d().clone(),
                    cond.p_n().clone(),
                    cond.p_r().clone(),
                    cond.lambda().clone(),
                ])
            }
        }
    }

    pub fn solver_options(&self) -> Result<SolverOptions, ConfigError> {
        let mut opts = SolverOptions::default();
        let s = &self.solver;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(ConfigError::Invalid(format!("solver.{name} must be positive, got {x}")))
            }
            _ => Ok(v),
        };
        opts.scan_step = positive("scan_step", s.scan_step)?;
        if let Some(x) = positive("detection_ratio", s.detection_ratio)? {
            opts.detection_ratio = x;
        }
        if let Some(x) = positive("multiplicity_ratio", s.multiplicity_ratio)? {
            opts.multiplicity_ratio = x;
        }
        if let Some(x) = positive("rel_tol", s.rel_tol)? {
            opts.rel_tol = x;
        }
        Ok(opts)
    }

    pub fn build(&self) -> Result<Problem, ConfigError> {
        let graph = self.graph()?;
        let tolerances = self.tolerances();
        let [p_d, p_n, p_r, lambda] = self.raw_matrices()?;
        let conditions = validate_conditions(&p_d, &p_n, &p_r, &lambda, &tolerances)?;
        let window = match self.solver.window {
            Some([lo, hi]) if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                return Err(ConfigError::Invalid(format!("solver.window [{lo}, {hi}] is empty")))
            }
            Some([lo, hi]) => Some(Window::new(lo, hi)),
            None => None,
        };
        let sweep = self.sweep.clone().unwrap_or_default();
        let epsilons = sweep.epsilons.unwrap_or_else(default_epsilons);
        Ok(Problem {
            graph,
            conditions,
            tolerances,
            solver: self.solver_options()?,
            window,
            epsilons,
            num_fast: sweep.num_fast.unwrap_or(DEFAULT_NUM_FAST),
            has_sweep: self.sweep.is_some(),
        })
    }
}

impl Problem {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        ProblemConfig::load(path)?.build()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        ProblemConfig::parse(text)?.build()
    }
}

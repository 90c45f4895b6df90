//! Laplacian spectra of metric graphs under arbitrary self-adjoint matching
//! conditions, and the eigenvalue asymptotics of uniformly shrinking graphs.
//!
//! * [`graph`]: metric graphs, matching conditions, presets.
//! * [`subspaces`]: `D0`, `N0`, `F0`, the Lagrangian subspace, form inertia and
//!   the non-resonance dimension.
//! * [`secular`]: eigenvalues and eigenfunctions from the secular equation.
//! * [`asymptotics`]: prediction of fast/slow/exotic counts and the shrinking sweep.
//! * [`config`] and [`output`]: the JSON problem format and CSV/JSON writers.

pub mod asymptotics;
pub mod config;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod output;
pub mod random;
pub mod secular;
pub mod subspaces;

pub use asymptotics::{
    fit_branches, predict, sweep, verify, Branch, BranchClass, BranchTable, Prediction, SweepOptions,
    VerificationFailure, VerificationReport,
};
pub use config::{Problem, ProblemConfig};
pub use error::{AsymptoticsError, Axiom, ConfigError, ModelError, SolverError, SubspaceError};
pub use graph::{
    preset_conditions, scale, validate_conditions, ConditionDefects, Edge, MatchingConditions, MetricGraph,
    ShrinkFamily, Tolerances, VertexCondition, VertexSpec,
};
pub use secular::{
    find_eigenvalues, Eigenfunction, Eigenvalue, SolverOptions, SpectrumResult, Window,
};
pub use subspaces::{FormInertia, Subspace};

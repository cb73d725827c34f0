//! Pollution-free least-squares discretization of the Helmholtz equation.
//!
//! The first-order system is discretized in ultra-weak form with optimal
//! test norm, which leads to the Hermitian saddle system
//! `[[M_V, B], [B^H, 0]] [v; u] = [q; 0]`. It is solved by MINRES with a
//! block preconditioner: a vertex-patch multigrid for the test Gram matrix
//! `M_V` and the identity or a Chebyshev polynomial for the Schur complement
//! in the rescaled trial basis. The test-space component `v` is the error
//! estimator, and the boosted approximation `u + B' v` comes for free.

// `!(x > 0.0)` style checks reject NaN on purpose; index loops mirror the
// element-local formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod femspace;
pub mod linalg;
pub mod mesh;
pub mod minres;
pub mod precond;
pub mod problem;

pub use assembly::{assemble_system, SaddleSystem};
pub use config::{ProblemKind, RunConfig};
pub use diagnostics::{Method, SpectralBounds, StudyRow};
pub use driver::{run_adaptive, AdaptiveRun, AdaptiveSolver, MeshStep, Refinement, SolverConfig, StepSummary};
pub use error::{Error, Result};
pub use femspace::{TestSpace, TrialSpace};
pub use linalg::{CsrMatrix, C64};
pub use mesh::{build_initial_mesh, Domain, MeshHierarchy, Triangulation};
pub use minres::{SolveReport, StoppingKind, StoppingPolicy};
pub use precond::{BlockPreconditioner, CycleMode, PrecondOptions, PrecondTree, SchurMode};
pub use problem::{DataKind, ProblemData};

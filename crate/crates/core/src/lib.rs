//! Inner second-order cone approximations of completely positive programs.
//!
//! A completely positive program
//!
//! ```text
//! min tr(CX)  s.t.  tr(A_i X) = b_i,  X ∈ CPⁿ
//! ```
//!
//! is approximated from the inside by replacing `CPⁿ` with the cone generated by
//! `vvᵀ` for `v` on the segments of a graph embedded in the standard simplex.
//! Each approximation is a second-order cone program; its optimal value is an
//! upper bound (for minimization) and its solution factors into nonnegative
//! rank-one terms. The [`schemes`] module refines the embedded graph from those
//! factors.
//!
//! Indices are 0-based throughout the library.

pub mod backend;
pub mod conic;
pub mod decomposition;
mod error;
pub mod graph;
pub mod matrix;
pub mod oracles;
pub mod problems;
pub mod schemes;

pub use backend::{
    solve, solve_with, weak_duality_check, Capabilities, ClarabelBackend, ConicBackend, RawSolution, SolveOptions,
    SolveOutcome, Status,
};
pub use conic::{build_diag_program, build_dnn_program, build_sdd_program, ConicProgram, CpProblem, Sense};
pub use decomposition::{balanced_split, candidate_vertices, decompose, CandidatePolicy, Decomposition};
pub use error::{Error, Result};
pub use graph::{EmbeddedGraph, SegmentPoint};
pub use matrix::{Block2, SymMatrix};
pub use schemes::{run_scheme, stall_detector, SchemeConfig, SchemeRun, SchemeTrace, Strategy, Termination};

//! Dense LP and SDP solvers that report certified optimality gaps.
//!
//! The linear-program side is a revised simplex with a resumable basis
//! ([`lp::Simplex`]), used for column generation by callers. The
//! semidefinite side is a primal-dual interior point over block-diagonal
//! real symmetric variables. Both return a [`SolverSolution`] carrying the
//! gap and residuals measured on the returned point.

pub mod bridge;
pub mod dense;
pub mod dump;
mod error;
pub mod lp;
pub mod sdp;

pub use bridge::{Builtin, Engine, External};
pub use error::{Result, SolverError};
pub use lp::{solve_lp, Bound, LinearProgram, Simplex, SolverSolution, Status};
pub use sdp::{extract_hermitian, hermitian_entries, solve_sdp, SemidefiniteProgram, SymEntry};

//! Dense semidefinite programming.
//!
//! Complex Hermitian problems are lowered to real symmetric ones through
//! [`embed_complex`] and solved by a primal-dual interior-point method.
//! Two front ends are provided: [`SdpProblem`], an LMI form over a real
//! decision vector, and [`MatrixSdp`], a standard form whose variables are
//! Hermitian matrices.

mod embed;
mod epigraph;
mod ipm;
mod problem;

pub use embed::{embed_complex, embed_unchecked, unembed};
pub use epigraph::{opnorm_epigraph, psd_dominance_epigraph, AffineMatrix};
pub use ipm::{
    solve_standard, BlockPart, Constraint, InteriorPoint, SdpBackend, SolveStatus, SolverOptions,
    StandardSdp, StandardSolution,
};
pub use problem::{
    re_inner, HermConstraint, LmiBlock, MatrixSdp, MatrixSdpSolution, SdpProblem, SdpSolution,
};

/// Solves an LMI-form problem with the given options.
pub fn solve(p: &SdpProblem, opts: &SolverOptions) -> crate::error::Result<SdpSolution> {
    p.solve(opts)
}

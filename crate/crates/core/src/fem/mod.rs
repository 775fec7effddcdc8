//! Finite element machinery: quadrature, local bases, spaces, solvers.

pub mod element;
pub mod lagrange;
pub mod legendre;
pub mod poly;
pub mod quadrature;
pub mod rt;
pub mod solve;
pub mod space;
pub mod sparse;

pub use solve::{solve_problem, DgParams, FemSolution, SolverStats};
pub use space::{FemSpace, Method};

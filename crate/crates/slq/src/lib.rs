//! Lower-semibounded singular Sturm–Liouville operators: endpoint
//! classification, principal and nonprincipal solutions, generalized
//! boundary values, self-adjoint extensions, their quadratic forms and the
//! finite-dimensional boundary-triplet algebra behind them.

pub mod bvalues;
pub mod classify;
pub mod expr;
pub mod extensions;
pub mod extrap;
pub mod forms;
pub mod odecore;
pub mod problem;
pub mod quad;
pub mod report;
pub mod solutions;
pub mod testfns;
pub mod triplets;

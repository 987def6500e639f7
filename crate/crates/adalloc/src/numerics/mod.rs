//! Shared numerical foundation: generic scalars, second-order forward-mode
//! automatic differentiation, dense linear algebra, finite-difference oracles,
//! and fixed-step ODE integrators.

mod diff;
mod dual;
mod linalg;
mod ode;
mod scalar;

pub use diff::{fd_check, grad_hess};
pub use dual::Dual2;
pub use linalg::{
    axpy, companion_char_poly, dot, expm, norm2, norm_inf, quadratic_roots,
    routh_hurwitz_stable, solve_linear, Lu, Mat,
};
pub use ode::{Integrator, Scheme};
pub use scalar::{DomainError, Scalar};

use thiserror::Error;

/// Errors produced by the numerical foundation.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericsError {
    /// A primitive was evaluated outside its domain (log of a non-positive
    /// number, division by zero, ...). Carries the name of the offending
    /// primitive.
    #[error("domain violation in `{0}`")]
    Domain(#[from] DomainError),
    /// The coefficient matrix of a linear solve is singular or too badly
    /// conditioned to trust. Carries the condition estimate; recovery is the
    /// caller's decision.
    #[error("singular system: condition estimate {estimate:.3e}")]
    SingularHessian { estimate: f64 },
    /// An ODE right-hand side returned a non-finite component.
    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },
}

//! Concrete plants: the planar quadrotor with a pusher propeller and the
//! 3-DOF VTOL quadplane with full nonlinear aerodynamics.

mod quadplane;
mod quadrotor;

pub use quadplane::{
    c_pr, lift_drag_moment_coeffs, quadplane_as_system, QuadplaneParams, QuadplaneState,
    QuadplaneSystem,
};
pub use quadrotor::{quadrotor_tau, QuadrotorSystem};

/// Whether the plant-side dynamics include the terms the parametric model
/// cannot represent.
///
/// `Full` is the real plant: the rear-propeller degradation varies with
/// airspeed and pusher speed, and pitch rate contributes to lift. The
/// estimator's model carries neither, so both land in the non-parametric
/// remainder. `ParametricOnly` switches the plant to exactly the model
/// structure, which zeroes the remainder; useful for sanity runs and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fidelity {
    #[default]
    Full,
    ParametricOnly,
}

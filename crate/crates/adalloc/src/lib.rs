//! Adaptive control allocation for uncertain, underactuated, input-constrained
//! nonlinear systems.
//!
//! The library closes a loop of four pieces around a plant in controllable
//! canonical form:
//!
//! * series-parallel state predictors with a projected parameter-adaptation law,
//! * a high-level controller that renders the predictor tracking error linear,
//! * a time-scale-separated fast reference for the virtual (fast-state) command,
//! * a dynamic control allocator that tracks the optimum of a log-barrier
//!   constrained program as an ODE flow instead of re-solving it each step.
//!
//! Core math is generic over the scalar type (see [`numerics::Scalar`]) so that
//! the same plant and objective code evaluates with plain floats during
//! simulation and with second-order dual numbers when the allocator needs
//! gradients and Hessians of the Lagrangian.
//!
//! Two concrete plants ship with the crate: a planar quadrotor with a pusher
//! propeller and a 3-DOF VTOL quadplane with nonlinear, state-dependent
//! aerodynamics. The [`scenario`] module assembles full closed-loop runs
//! (including a cruise/transition/hover landing) and exports CSV logs.

pub mod alloc;
pub mod highlevel;
pub mod numerics;
pub mod plants;
pub mod predictor;
pub mod scenario;
pub mod system;

/// Scalar type used by concrete simulations.
pub type Real = f64;

pub use numerics::{Dual2, Scalar};

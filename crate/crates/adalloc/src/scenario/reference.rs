//! Reference trajectories: the three-segment landing profile with
//! tanh-smoothed switching, and a constant setpoint for hover tests.
//!
//! Segment values, velocities, and accelerations are written in closed form
//! and blended analytically, so the forcing `r(t)` carries no differencing
//! noise and the allocator can differentiate the reference in time.

use crate::highlevel::{ReferenceModel, ReferencePoint};
use crate::numerics::Scalar;
use crate::system::Dimensions;

/// A signal value with its first two time derivatives.
#[derive(Debug, Clone)]
struct Sig<S> {
    p: S,
    v: S,
    a: S,
}

impl<S: Scalar> Sig<S> {
    fn constant(p: f64) -> Self {
        Self {
            p: S::from_real(p),
            v: S::zero(),
            a: S::zero(),
        }
    }
}

/// Blend `before` into `after` around `t_switch` with the smoothing weight
/// `(1 + tanh((t - t_switch)/rho)) / 2`; derivatives of the blended signal
/// are exact.
fn blend<S: Scalar>(t: &S, t_switch: f64, rho: f64, before: Sig<S>, after: Sig<S>) -> Sig<S> {
    let s = (t.clone() - S::from_real(t_switch)) * S::from_real(1.0 / rho);
    let th = s.tanh();
    let sech2 = S::one() - th.clone() * th.clone();
    let half = S::from_real(0.5);
    let sig = half.clone() + half * th.clone();
    let sig_d = sech2.clone() * S::from_real(0.5 / rho);
    let sig_dd = -(th * sech2) * S::from_real(1.0 / (rho * rho));
    let one_m = S::one() - sig.clone();

    let dp = after.p.clone() - before.p.clone();
    let dv = after.v.clone() - before.v.clone();
    Sig {
        p: one_m.clone() * before.p + sig.clone() * after.p,
        v: one_m.clone() * before.v + sig.clone() * after.v + sig_d.clone() * dp.clone(),
        a: one_m * before.a
            + sig * after.a
            + S::from_real(2.0) * sig_d * dv
            + sig_dd * dp,
    }
}

/// Landing profile: constant-speed cruise, constant-deceleration transition
/// with a steady descent, then hover (zero ground speed) while the descent
/// continues and the pitch reference steps up.
#[derive(Debug, Clone, PartialEq)]
pub struct LandingReference {
    /// End of the cruise segment [s].
    pub t_transition: f64,
    /// Start of the hover segment [s].
    pub t_hover: f64,
    /// Blend time constant [s].
    pub blend_rho: f64,
    /// Cruise ground speed [m/s].
    pub cruise_speed: f64,
    /// Transition deceleration [m/s^2].
    pub decel: f64,
    /// Descent rate from the transition on [m/s].
    pub descent_rate: f64,
    /// Initial along-track position [m].
    pub px0: f64,
    /// Initial altitude [m].
    pub pz0: f64,
    /// Hover pitch reference [rad].
    pub theta_hover: f64,
}

impl Default for LandingReference {
    fn default() -> Self {
        Self {
            t_transition: 3.0,
            t_hover: 23.0,
            blend_rho: 0.25,
            cruise_speed: 20.0,
            decel: 1.0,
            descent_rate: 0.75,
            px0: 260.0,
            pz0: 100.0,
            theta_hover: 15f64.to_radians(),
        }
    }
}

impl LandingReference {
    /// Along-track position where the deceleration ends; held through hover.
    pub fn px_final(&self) -> f64 {
        let dt = self.t_hover - self.t_transition;
        self.px0 + self.cruise_speed * self.t_hover - 0.5 * self.decel * dt * dt
    }

    fn px_profile<S: Scalar>(&self, t: &S) -> Sig<S> {
        let cruise = Sig {
            p: S::from_real(self.px0) + S::from_real(self.cruise_speed) * t.clone(),
            v: S::from_real(self.cruise_speed),
            a: S::zero(),
        };
        let dt1 = t.clone() - S::from_real(self.t_transition);
        let transition = Sig {
            p: S::from_real(self.px0) + S::from_real(self.cruise_speed) * t.clone()
                - S::from_real(0.5 * self.decel) * dt1.clone() * dt1.clone(),
            v: S::from_real(self.cruise_speed) - S::from_real(self.decel) * dt1,
            a: S::from_real(-self.decel),
        };
        let hover = Sig::constant(self.px_final());
        let mid = blend(t, self.t_transition, self.blend_rho, cruise, transition);
        blend(t, self.t_hover, self.blend_rho, mid, hover)
    }

    fn pz_profile<S: Scalar>(&self, t: &S) -> Sig<S> {
        let level = Sig::constant(self.pz0);
        let dt1 = t.clone() - S::from_real(self.t_transition);
        let descent = Sig {
            p: S::from_real(self.pz0) - S::from_real(self.descent_rate) * dt1,
            v: S::from_real(-self.descent_rate),
            a: S::zero(),
        };
        blend(t, self.t_transition, self.blend_rho, level, descent)
    }

    fn theta_profile<S: Scalar>(&self, t: &S) -> Sig<S> {
        blend(
            t,
            self.t_hover,
            self.blend_rho,
            Sig::constant(0.0),
            Sig::constant(self.theta_hover),
        )
    }
}

impl ReferenceModel for LandingReference {
    fn eval<S: Scalar>(&self, dims: &Dimensions, t: &S) -> ReferencePoint<S> {
        assert_eq!(
            (dims.d, dims.n_x, dims.n_z),
            (2, 2, 1),
            "landing reference is written for the planar quadplane layout"
        );
        let px = self.px_profile(t);
        let pz = self.pz_profile(t);
        let th = self.theta_profile(t);
        ReferencePoint {
            x_r: vec![px.p, pz.p, px.v, pz.v],
            r: vec![px.a, pz.a],
            z1_r: vec![th.p],
        }
    }
}

/// Constant setpoint for the slow state with a preferred fast command of
/// zero; the degenerate reference used by hover scenarios and unit tests.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointReference {
    /// Position-level setpoint, length `n_x`.
    pub setpoint: Vec<f64>,
}

impl SetpointReference {
    pub fn origin(n_x: usize) -> Self {
        Self {
            setpoint: vec![0.0; n_x],
        }
    }
}

impl ReferenceModel for SetpointReference {
    fn eval<S: Scalar>(&self, dims: &Dimensions, _t: &S) -> ReferencePoint<S> {
        assert_eq!(self.setpoint.len(), dims.n_x, "setpoint length mismatch");
        let mut x_r = vec![S::zero(); dims.dim_x()];
        for (i, s) in self.setpoint.iter().enumerate() {
            x_r[i] = S::from_real(*s);
        }
        ReferencePoint {
            x_r,
            r: vec![S::zero(); dims.n_x],
            z1_r: vec![S::zero(); dims.n_z],
        }
    }
}

//! 3-DOF planar VTOL quadplane: front/rear vertical propellers, a pusher
//! propeller, and an elevator, with blended linear/flat-plate aerodynamics
//! and a state-dependent rear-propeller degradation.
//!
//! Conventions: inertial x forward, z up (so `g_z` is negative and altitude
//! is the second position component), pitch positive nose-up, body force
//! components (forward, up). The slow state is `[p_x, p_z, v_x, v_z]`
//! (derivative-major), the fast state `[theta, omega]`, and the input
//! `[u_f, u_r, u_p, u_e]` with the propeller speeds in `[0, 1]` and the
//! elevator in `[-1, 1]`.
//!
//! The adapted parameter vector is
//! `[C_De, C_Da, C_Dt, C_Le, C_La, C_Me, C_Ma, C_Mw, kappa_r]`: six aero
//! derivatives, the drag from propeller wash, and `kappa_r`, a constant
//! rear-thrust effectiveness standing in for the airspeed-dependent
//! degradation. The pitch-rate lift term and the difference between the
//! true degradation and `kappa_r` are deliberately left out of the model
//! structure and show up as the non-parametric remainder.

use serde::{Deserialize, Serialize};

use crate::numerics::{DomainError, Mat, Scalar};
use crate::system::{
    build_canonical, CanonicalForm, Dimensions, Envelope, InputPolytope, ParamBox, SystemModel,
};

use super::Fidelity;

/// Physical and aerodynamic parameters, SI units. Aero coefficients are
/// dimensionless; the rate coefficients multiply raw rad/s.
///
/// These defaults describe a plausible ~12 kg class VTOL quadplane. They are
/// this crate's own calibration, not measurements of any particular vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadplaneParams {
    /// Mass [kg].
    pub m: f64,
    /// Pitch moment of inertia [kg m^2].
    pub j: f64,
    /// Gravitational acceleration along +z (up), so negative [m/s^2].
    pub g_z: f64,
    /// Air density [kg/m^3].
    pub rho: f64,
    /// Wing area [m^2].
    pub s: f64,
    /// Mean chord [m].
    pub c_bar: f64,
    /// Vertical-propeller moment arm [m].
    pub l_v: f64,
    /// Thrust of one vertical propeller pair at full speed [N].
    pub t_max_v: f64,
    /// Pusher thrust at full speed [N].
    pub t_max_p: f64,
    /// Airspeed at which rear-propeller degradation vanishes [m/s].
    pub v_max: f64,
    /// Rear-propeller effectiveness floor, in (0, 1].
    pub c_pr_nom: f64,
    pub c_d0: f64,
    pub c_d_alpha: f64,
    pub c_d_e: f64,
    pub c_d_t: f64,
    pub c_l0: f64,
    pub c_l_alpha: f64,
    pub c_l_e: f64,
    pub c_l_omega: f64,
    pub c_m0: f64,
    pub c_m_alpha: f64,
    pub c_m_e: f64,
    pub c_m_omega: f64,
    /// Stall blending sharpness (dimensionless).
    pub m_blend: f64,
    /// Stall blending cutoff angle [rad].
    pub alpha0: f64,
    /// Half-width of the pitch-command set [rad].
    pub theta_cmd_limit: f64,
}

impl Default for QuadplaneParams {
    fn default() -> Self {
        Self {
            m: 12.0,
            j: 1.1,
            g_z: -9.81,
            rho: 1.225,
            s: 0.7,
            c_bar: 0.25,
            l_v: 0.45,
            t_max_v: 160.0,
            t_max_p: 60.0,
            v_max: 30.0,
            c_pr_nom: 0.8,
            c_d0: 0.04,
            c_d_alpha: 1.2,
            c_d_e: 0.06,
            c_d_t: 0.05,
            c_l0: 0.25,
            c_l_alpha: 4.5,
            c_l_e: 0.35,
            c_l_omega: 0.06,
            c_m0: 0.12,
            c_m_alpha: -1.3,
            c_m_e: -1.1,
            c_m_omega: -0.12,
            m_blend: 20.0,
            alpha0: 0.30,
            theta_cmd_limit: std::f64::consts::FRAC_PI_6,
        }
    }
}

impl QuadplaneParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("m", self.m),
            ("j", self.j),
            ("rho", self.rho),
            ("s", self.s),
            ("c_bar", self.c_bar),
            ("l_v", self.l_v),
            ("t_max_v", self.t_max_v),
            ("t_max_p", self.t_max_p),
            ("v_max", self.v_max),
            ("m_blend", self.m_blend),
            ("alpha0", self.alpha0),
            ("theta_cmd_limit", self.theta_cmd_limit),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0 < self.c_pr_nom && self.c_pr_nom <= 1.0) {
            return Err(format!("c_pr_nom must be in (0, 1], got {}", self.c_pr_nom));
        }
        for (name, v) in [
            ("c_d0", self.c_d0),
            ("c_d_alpha", self.c_d_alpha),
            ("c_d_e", self.c_d_e),
            ("c_d_t", self.c_d_t),
        ] {
            if v < 0.0 {
                return Err(format!("drag coefficient {name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let p: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        p.validate()?;
        Ok(p)
    }
}

/// Logistic function with saturation guards so extreme arguments stay
/// finite under AD.
fn logistic<S: Scalar>(x: S) -> S {
    let v = x.value();
    if v > 40.0 {
        S::one()
    } else if v < -40.0 {
        x.exp()
    } else {
        S::one() / (S::one() + (-x).exp())
    }
}

/// Stall blending weight: ~0 below the cutoff angle of attack, ~1 beyond it.
fn stall_sigma<S: Scalar>(alpha: &S, m_blend: f64, alpha0: f64) -> S {
    let a = (alpha.clone() - S::from_real(alpha0)) * S::from_real(m_blend);
    let b = (alpha.clone() + S::from_real(alpha0)) * S::from_real(m_blend);
    logistic(-b.clone()) + logistic(a) * logistic(b)
}

/// Flat-plate lift magnitude `2 sgn(a) sin^2(a) cos(a)`, written as
/// `2 sin|sin|cos` so it stays differentiable through zero.
fn flat_plate<S: Scalar>(alpha: &S) -> S {
    let s = alpha.sin();
    S::from_real(2.0) * s.clone() * s.abs() * alpha.cos()
}

/// Rear-propeller degradation factor; airspeed is clamped to `v_max` from
/// above. Equal to one when the pusher is off or at full airspeed, dropping
/// to `c_pr_nom` at zero airspeed and full pusher speed.
pub fn c_pr(v: f64, u_p: f64, params: &QuadplaneParams) -> f64 {
    let v = v.clamp(0.0, params.v_max);
    1.0 - (1.0 - params.c_pr_nom) * (1.0 - v / params.v_max) * u_p * u_p
}

/// Plant-side lift, drag, and pitch-moment coefficients (all terms,
/// including the pitch-rate lift the estimator omits).
pub fn lift_drag_moment_coeffs(
    alpha: f64,
    omega: f64,
    u: &[f64],
    params: &QuadplaneParams,
) -> (f64, f64, f64) {
    let p = params;
    let sigma = stall_sigma(&alpha, p.m_blend, p.alpha0);
    let flat = flat_plate(&alpha);
    let c_d = p.c_d0 + p.c_d_alpha * alpha * alpha + p.c_d_e * u[3] + p.c_d_t * (u[0] + u[1]);
    let c_l = p.c_l_e * u[3]
        + p.c_l_omega * omega
        + (1.0 - sigma) * (p.c_l0 + p.c_l_alpha * alpha)
        + sigma * flat;
    let c_m = p.c_m_e * u[3]
        + p.c_m_omega * omega
        + (1.0 - sigma) * (p.c_m0 + p.c_m_alpha * alpha)
        - sigma * flat;
    (c_l, c_d, c_m)
}

/// Body-frame force (forward, up) [N] from the full plant model.
pub fn quadplane_forces(state: &QuadplaneState, u: &[f64], params: &QuadplaneParams) -> [f64; 2] {
    let p = params;
    let v2 = state.v[0] * state.v[0] + state.v[1] * state.v[1];
    let v = v2.sqrt();
    let alpha = state.alpha();
    let (c_l, c_d, _) = lift_drag_moment_coeffs(alpha, state.omega, u, p);
    let q_s = 0.5 * p.rho * v2 * p.s;
    let (sa, ca) = alpha.sin_cos();
    // R(alpha) * (-C_D, C_L) rotates the wind-axis force into the body frame.
    let aero = [
        q_s * (ca * (-c_d) - sa * c_l),
        q_s * (sa * (-c_d) + ca * c_l),
    ];
    let cpr = c_pr(v, u[2], p);
    [
        aero[0] + p.t_max_p * u[2] * u[2],
        aero[1] + p.t_max_v * (u[0] * u[0] + cpr * u[1] * u[1]),
    ]
}

/// Pitch moment [N m] from the full plant model.
pub fn quadplane_moment(state: &QuadplaneState, u: &[f64], params: &QuadplaneParams) -> f64 {
    let p = params;
    let v2 = state.v[0] * state.v[0] + state.v[1] * state.v[1];
    let v = v2.sqrt();
    let alpha = state.alpha();
    let (_, _, c_m) = lift_drag_moment_coeffs(alpha, state.omega, u, p);
    let cpr = c_pr(v, u[2], p);
    0.5 * p.rho * v2 * p.s * p.c_bar * c_m + p.l_v * p.t_max_v * (u[0] * u[0] - cpr * u[1] * u[1])
}

/// Kinematic state of the quadplane in plain physical variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadplaneState {
    /// Position (x forward, z up) [m].
    pub p: [f64; 2],
    /// Inertial velocity [m/s].
    pub v: [f64; 2],
    /// Pitch angle [rad], wrapped to [-pi, pi].
    pub theta: f64,
    /// Pitch rate [rad/s].
    pub omega: f64,
}

impl QuadplaneState {
    pub fn airspeed(&self) -> f64 {
        (self.v[0] * self.v[0] + self.v[1] * self.v[1]).sqrt()
    }

    /// Angle of attack: pitch minus flight-path angle.
    pub fn alpha(&self) -> f64 {
        self.theta - self.v[1].atan2(self.v[0])
    }

    /// Canonical slow state `[p_x, p_z, v_x, v_z]`.
    pub fn slow(&self) -> [f64; 4] {
        [self.p[0], self.p[1], self.v[0], self.v[1]]
    }

    /// Canonical fast state `[theta, omega]`.
    pub fn fast(&self) -> [f64; 2] {
        [self.theta, self.omega]
    }

    pub fn from_canonical(x: &[f64], z: &[f64]) -> Self {
        Self {
            p: [x[0], x[1]],
            v: [x[2], x[3]],
            theta: z[0],
            omega: z[1],
        }
    }
}

/// True values of the adapted parameters. The rear-thrust effectiveness is
/// modeled as exactly one (the value the physical degradation takes whenever
/// the pusher is off); what the simplification misses lands in `delta`.
fn true_adapted(params: &QuadplaneParams) -> [f64; 9] {
    [
        params.c_d_e,
        params.c_d_alpha,
        params.c_d_t,
        params.c_l_e,
        params.c_l_alpha,
        params.c_m_e,
        params.c_m_alpha,
        params.c_m_omega,
        1.0,
    ]
}

/// Shared subexpressions of the model-side tau evaluation.
struct Flow<S> {
    /// Dynamic pressure times wing area.
    q_s: S,
    alpha: S,
    /// sin/cos of theta (body to inertial).
    st: S,
    ct: S,
    /// sin/cos of theta + alpha (wind to inertial).
    sw: S,
    cw: S,
    one_minus_sigma: S,
    flat: S,
}

fn flow<S: Scalar>(p: &QuadplaneParams, x: &[S], z: &[S]) -> Flow<S> {
    let (vx, vz) = (x[2].clone(), x[3].clone());
    let theta = z[0].clone();
    let v2 = vx.clone() * vx.clone() + vz.clone() * vz.clone();
    let alpha = theta.clone() - vz.atan2(&vx);
    let q_s = S::from_real(0.5 * p.rho * p.s) * v2;
    let wind = theta.clone() + alpha.clone();
    let sigma = stall_sigma(&alpha, p.m_blend, p.alpha0);
    Flow {
        q_s,
        alpha: alpha.clone(),
        st: theta.sin(),
        ct: theta.cos(),
        sw: wind.sin(),
        cw: wind.cos(),
        one_minus_sigma: S::one() - sigma,
        flat: flat_plate(&alpha),
    }
}

/// The quadplane as a [`SystemModel`]: relative degree two, two slow DOFs
/// (translation), one fast DOF (pitch), four inputs, nine adapted
/// parameters.
#[derive(Debug, Clone)]
pub struct QuadplaneSystem {
    params: QuadplaneParams,
    fidelity: Fidelity,
    dims: Dimensions,
    canonical: CanonicalForm,
    u_poly: InputPolytope,
    u_bar_poly: InputPolytope,
    w_box: ParamBox,
    w_true: Vec<f64>,
    envelope: Envelope,
    delta_max: f64,
}

/// Build the quadplane [`SystemModel`] from parameters.
pub fn quadplane_as_system(params: QuadplaneParams, fidelity: Fidelity) -> QuadplaneSystem {
    QuadplaneSystem::new(params, fidelity)
}

impl QuadplaneSystem {
    pub fn new(params: QuadplaneParams, fidelity: Fidelity) -> Self {
        params.validate().expect("invalid quadplane parameters");
        let dims = Dimensions::new(2, 2, 1, 4, 9);
        let canonical = build_canonical(&dims);
        let u_poly =
            InputPolytope::from_box(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (-1.0, 1.0)]);
        let theta_poly =
            InputPolytope::from_box(&[(-params.theta_cmd_limit, params.theta_cmd_limit)]);
        let u_bar_poly = u_poly.box_product(&theta_poly);

        let w_true = true_adapted(&params).to_vec();
        // Per-component box centered on the true value, wide enough to hold
        // the 1.5x-initialized estimates with margin.
        let lo: Vec<f64> = w_true.iter().map(|w| w - w.abs() - 0.1).collect();
        let hi: Vec<f64> = w_true.iter().map(|w| w + w.abs() + 0.1).collect();
        let w_box = ParamBox::new(lo, hi);

        let envelope = Envelope {
            x: vec![(-50.0, 600.0), (0.0, 120.0), (-5.0, 30.0), (-5.0, 5.0)],
            z: vec![(-0.6, 0.6), (-2.0, 2.0)],
            u: vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0), (-1.0, 1.0)],
        };

        // Worst-case non-parametric remainder over the envelope: the omitted
        // pitch-rate lift plus the rear-thrust effectiveness error.
        let v2_max = envelope.x[2].1 * envelope.x[2].1 + envelope.x[3].1.abs().max(5.0).powi(2);
        let q_s_max = 0.5 * params.rho * params.s * v2_max;
        let omega_max = envelope.z[1].1;
        let dcpr_max = 1.0 - params.c_pr_nom;
        let delta_force = (q_s_max * params.c_l_omega * omega_max
            + params.t_max_v * dcpr_max)
            / params.m;
        let delta_moment = params.l_v * params.t_max_v * dcpr_max / params.j;
        let delta_max = match fidelity {
            Fidelity::Full => (delta_force * delta_force + delta_moment * delta_moment).sqrt(),
            Fidelity::ParametricOnly => 0.0,
        };

        Self {
            params,
            fidelity,
            dims,
            canonical,
            u_poly,
            u_bar_poly,
            w_box,
            w_true,
            envelope,
            delta_max,
        }
    }

    pub fn params(&self) -> &QuadplaneParams {
        &self.params
    }

    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }

    /// Plant-side tau from the full physics formulas (reference path for the
    /// decomposition-exactness check).
    pub fn tau_full_physics(&self, x: &[f64], z: &[f64], u: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let state = QuadplaneState::from_canonical(x, z);
        let f_b = quadplane_forces(&state, u, p);
        let m = quadplane_moment(&state, u, p);
        let (st, ct) = state.theta.sin_cos();
        vec![
            (ct * f_b[0] - st * f_b[1]) / p.m,
            p.g_z + (st * f_b[0] + ct * f_b[1]) / p.m,
            m / p.j,
        ]
    }
}

impl SystemModel for QuadplaneSystem {
    fn dims(&self) -> Dimensions {
        self.dims
    }

    fn canonical(&self) -> &CanonicalForm {
        &self.canonical
    }

    fn input_polytope(&self) -> &InputPolytope {
        &self.u_poly
    }

    fn augmented_polytope(&self) -> &InputPolytope {
        &self.u_bar_poly
    }

    fn param_box(&self) -> &ParamBox {
        &self.w_box
    }

    fn true_params(&self) -> &[f64] {
        &self.w_true
    }

    fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    fn delta_max(&self) -> f64 {
        self.delta_max
    }

    fn tau0<S: Scalar>(&self, x: &[S], z: &[S], u: &[S]) -> Result<Vec<S>, DomainError> {
        let p = &self.params;
        let f = flow(p, x, z);
        let c_d_known = S::from_real(p.c_d0);
        let c_l_known = f.one_minus_sigma.clone() * S::from_real(p.c_l0)
            + (S::one() - f.one_minus_sigma.clone()) * f.flat.clone();
        let c_m_known = f.one_minus_sigma.clone() * S::from_real(p.c_m0)
            - (S::one() - f.one_minus_sigma.clone()) * f.flat.clone();

        // Wind-axis aero (known part) rotated to inertial, plus front
        // vertical and pusher thrust rotated from the body frame.
        let drag = f.q_s.clone() * c_d_known;
        let lift = f.q_s.clone() * c_l_known;
        let thrust_fwd = S::from_real(p.t_max_p) * u[2].powi(2);
        let thrust_up = S::from_real(p.t_max_v) * u[0].powi(2);
        let fx = f.cw.clone() * (-drag.clone()) - f.sw.clone() * lift.clone() + f.ct.clone() * thrust_fwd.clone()
            - f.st.clone() * thrust_up.clone();
        let fz = f.sw.clone() * (-drag) + f.cw.clone() * lift + f.st.clone() * thrust_fwd
            + f.ct.clone() * thrust_up;
        let inv_m = S::from_real(1.0 / p.m);
        let moment = f.q_s.clone() * S::from_real(p.c_bar) * c_m_known
            + S::from_real(p.l_v * p.t_max_v) * u[0].powi(2);
        Ok(vec![
            fx * inv_m.clone(),
            S::from_real(p.g_z) + fz * inv_m,
            moment * S::from_real(1.0 / p.j),
        ])
    }

    fn regressor<S: Scalar>(&self, x: &[S], z: &[S], u: &[S]) -> Result<Mat<S>, DomainError> {
        let p = &self.params;
        let f = flow(p, x, z);
        let inv_m = 1.0 / p.m;
        let inv_j = 1.0 / p.j;
        let mut phi = Mat::<S>::zeros(3, 9);

        // Inertial drag and lift directions scaled by dynamic pressure / m.
        let dx = -(f.cw.clone() * f.q_s.clone()) * S::from_real(inv_m);
        let dz = -(f.sw.clone() * f.q_s.clone()) * S::from_real(inv_m);
        let lx = -(f.sw.clone() * f.q_s.clone()) * S::from_real(inv_m);
        let lz = f.cw.clone() * f.q_s.clone() * S::from_real(inv_m);
        let moment_scale = f.q_s.clone() * S::from_real(p.c_bar * inv_j);

        // Drag derivatives: elevator, alpha^2, propeller wash.
        let a2 = f.alpha.powi(2);
        let u_t = u[0].clone() + u[1].clone();
        phi[(0, 0)] = dx.clone() * u[3].clone();
        phi[(1, 0)] = dz.clone() * u[3].clone();
        phi[(0, 1)] = dx.clone() * a2.clone();
        phi[(1, 1)] = dz.clone() * a2;
        phi[(0, 2)] = dx * u_t.clone();
        phi[(1, 2)] = dz * u_t;

        // Lift derivatives: elevator, blended alpha slope.
        let la = f.one_minus_sigma.clone() * f.alpha.clone();
        phi[(0, 3)] = lx.clone() * u[3].clone();
        phi[(1, 3)] = lz.clone() * u[3].clone();
        phi[(0, 4)] = lx * la.clone();
        phi[(1, 4)] = lz * la.clone();

        // Moment derivatives: elevator, blended alpha slope, pitch rate.
        phi[(2, 5)] = moment_scale.clone() * u[3].clone();
        phi[(2, 6)] = moment_scale.clone() * la;
        phi[(2, 7)] = moment_scale * z[1].clone();

        // Rear-thrust effectiveness: body-up thrust and its moment couple.
        let tr = S::from_real(p.t_max_v) * u[1].powi(2);
        phi[(0, 8)] = -(f.st.clone() * tr.clone()) * S::from_real(inv_m);
        phi[(1, 8)] = f.ct.clone() * tr.clone() * S::from_real(inv_m);
        phi[(2, 8)] = -(tr * S::from_real(p.l_v * inv_j));
        Ok(phi)
    }

    fn delta(&self, x: &[f64], z: &[f64], u: &[f64]) -> Vec<f64> {
        match self.fidelity {
            Fidelity::ParametricOnly => vec![0.0; 3],
            Fidelity::Full => {
                let p = &self.params;
                let f = flow(p, x, z);
                let state = QuadplaneState::from_canonical(x, z);
                let cpr = c_pr(state.airspeed(), u[2], p);
                // Omitted pitch-rate lift.
                let lift = f.q_s * p.c_l_omega * state.omega;
                // Error of the constant rear-thrust effectiveness.
                let dt = p.t_max_v * (cpr - 1.0) * u[1] * u[1];
                vec![
                    (-f.sw * lift - f.st * dt) / p.m,
                    (f.cw * lift + f.ct * dt) / p.m,
                    -p.l_v * dt / p.j,
                ]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{tau_hat, tau_true};

    fn params() -> QuadplaneParams {
        QuadplaneParams::default()
    }

    fn sample_rng(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn c_pr_identities() {
        let p = params();
        assert_eq!(c_pr(12.0, 0.0, &p), 1.0);
        assert_eq!(c_pr(p.v_max, 0.7, &p), 1.0);
        assert!((c_pr(0.0, 1.0, &p) - p.c_pr_nom).abs() < 1e-15);
        // Clamp above v_max.
        assert_eq!(c_pr(2.0 * p.v_max, 1.0, &p), 1.0);
        // Always within [c_pr_nom, 1].
        let mut rnd = sample_rng(7);
        for _ in 0..200 {
            let v = 35.0 * rnd();
            let up = rnd();
            let c = c_pr(v, up, &p);
            assert!((p.c_pr_nom..=1.0).contains(&c), "c_pr out of range: {c}");
        }
    }

    #[test]
    fn coeffs_at_zero_alpha() {
        let p = params();
        let sigma0 = stall_sigma(&0.0f64, p.m_blend, p.alpha0);
        let (c_l, c_d, c_m) = lift_drag_moment_coeffs(0.0, 0.0, &[0.0; 4], &p);
        assert!((c_l - (1.0 - sigma0) * p.c_l0).abs() < 1e-14);
        assert!((c_d - p.c_d0).abs() < 1e-14);
        assert!((c_m - (1.0 - sigma0) * p.c_m0).abs() < 1e-14);
    }

    #[test]
    fn deep_stall_lift_vanishes() {
        let p = params();
        let (c_l, _, _) = lift_drag_moment_coeffs(std::f64::consts::FRAC_PI_2, 0.0, &[0.0; 4], &p);
        assert!(c_l.abs() < 1e-6, "flat-plate lift at 90 deg: {c_l}");
    }

    #[test]
    fn lift_curve_is_continuous_across_the_blend() {
        let p = params();
        let mut prev = None;
        let mut alpha = -std::f64::consts::PI;
        while alpha <= std::f64::consts::PI {
            let (c_l, _, _) = lift_drag_moment_coeffs(alpha, 0.0, &[0.0; 4], &p);
            if let Some(prev) = prev {
                let jump: f64 = c_l - prev;
                assert!(jump.abs() < 1e-2, "jump {jump} at alpha = {alpha}");
            }
            prev = Some(c_l);
            alpha += 1e-3;
        }
    }

    #[test]
    fn static_thrust_only_forces() {
        let p = params();
        let still = QuadplaneState {
            p: [0.0, 0.0],
            v: [0.0, 0.0],
            theta: 0.0,
            omega: 0.0,
        };
        let f = quadplane_forces(&still, &[0.5, 0.5, 0.0, 0.0], &p);
        assert!((f[0]).abs() < 1e-15);
        assert!((f[1] - 0.5 * p.t_max_v).abs() < 1e-12);

        let f = quadplane_forces(&still, &[0.0; 4], &p);
        assert_eq!(f, [0.0, 0.0]);
    }

    #[test]
    fn static_moments() {
        let p = params();
        let still = QuadplaneState {
            p: [0.0, 0.0],
            v: [0.0, 0.0],
            theta: 0.0,
            omega: 0.0,
        };
        // Equal propellers cancel through c_pr = 1.
        assert!(quadplane_moment(&still, &[0.4, 0.4, 0.0, 0.0], &p).abs() < 1e-12);
        // Front only.
        let m = quadplane_moment(&still, &[1.0, 0.0, 0.0, 0.0], &p);
        assert!((m - p.l_v * p.t_max_v).abs() < 1e-12);
        // Rear only at full pusher: degraded by c_pr_nom.
        let m = quadplane_moment(&still, &[0.0, 1.0, 1.0, 0.0], &p);
        assert!((m + p.l_v * p.t_max_v * p.c_pr_nom).abs() < 1e-12);
    }

    #[test]
    fn cruise_forces_match_independent_reimplementation() {
        let p = params();
        let state = QuadplaneState {
            p: [0.0, 100.0],
            v: [20.0, -0.5],
            theta: 0.06,
            omega: 0.02,
        };
        let u = [0.1, 0.1, 0.4, -0.05];
        let f = quadplane_forces(&state, &u, &p);

        // Independent evaluation of the same published formula, written
        // differently (explicit rotation matrix, no shared helpers).
        let v = (state.v[0] * state.v[0] + state.v[1] * state.v[1]).sqrt();
        let alpha = state.theta - (state.v[1] / state.v[0]).atan();
        let q = 0.5 * p.rho * v * v * p.s;
        let exp_mb = |x: f64| 1.0 / (1.0 + (-x).exp());
        let a = p.m_blend * (alpha - p.alpha0);
        let b = p.m_blend * (alpha + p.alpha0);
        let sigma = exp_mb(-b) + exp_mb(a) * exp_mb(b);
        let flat = 2.0 * alpha.sin().abs() * alpha.sin() * alpha.cos();
        let c_d = p.c_d0 + p.c_d_alpha * alpha * alpha + p.c_d_e * u[3] + p.c_d_t * (u[0] + u[1]);
        let c_l = p.c_l_e * u[3]
            + p.c_l_omega * state.omega
            + (1.0 - sigma) * (p.c_l0 + p.c_l_alpha * alpha)
            + sigma * flat;
        let rot = [
            [alpha.cos(), -alpha.sin()],
            [alpha.sin(), alpha.cos()],
        ];
        let aero = [
            rot[0][0] * (-c_d) * q + rot[0][1] * c_l * q,
            rot[1][0] * (-c_d) * q + rot[1][1] * c_l * q,
        ];
        let cpr = 1.0 - (1.0 - p.c_pr_nom) * (1.0 - v / p.v_max) * u[2] * u[2];
        let expected = [
            aero[0] + p.t_max_p * u[2] * u[2],
            aero[1] + p.t_max_v * (u[0] * u[0] + cpr * u[1] * u[1]),
        ];
        assert!((f[0] - expected[0]).abs() < 1e-10, "{} vs {}", f[0], expected[0]);
        assert!((f[1] - expected[1]).abs() < 1e-10, "{} vs {}", f[1], expected[1]);
    }

    #[test]
    fn decomposition_is_exact_over_the_envelope() {
        let sys = QuadplaneSystem::new(params(), Fidelity::Full);
        let mut rnd = sample_rng(42);
        for _ in 0..10_000 {
            let env = sys.envelope();
            let draw = |iv: &(f64, f64), rnd: &mut dyn FnMut() -> f64| iv.0 + (iv.1 - iv.0) * rnd();
            let x: Vec<f64> = env.x.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let z: Vec<f64> = env.z.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let u: Vec<f64> = env.u.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let direct = sys.tau_full_physics(&x, &z, &u);
            let decomposed = tau_true(&sys, &x, &z, &u).unwrap();
            for (a, b) in direct.iter().zip(&decomposed) {
                assert!((a - b).abs() < 1e-12, "decomposition residual {}", a - b);
            }
        }
    }

    #[test]
    fn parametric_fidelity_makes_tau_hat_exact() {
        let sys = QuadplaneSystem::new(params(), Fidelity::ParametricOnly);
        let w_true = sys.true_params().to_vec();
        let mut rnd = sample_rng(9);
        for _ in 0..10_000 {
            let env = sys.envelope();
            let draw = |iv: &(f64, f64), rnd: &mut dyn FnMut() -> f64| iv.0 + (iv.1 - iv.0) * rnd();
            let x: Vec<f64> = env.x.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let z: Vec<f64> = env.z.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let u: Vec<f64> = env.u.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let hat = tau_hat(&sys, &x, &z, &u, &w_true).unwrap();
            let truth = tau_true(&sys, &x, &z, &u).unwrap();
            for (a, b) in hat.iter().zip(&truth) {
                assert!((a - b).abs() < 1e-10, "model mismatch {}", a - b);
            }
        }
    }

    #[test]
    fn regressor_columns_match_finite_differences() {
        // phi[:, j] should equal the partial of tau_hat with respect to
        // parameter j; checked for the lift-elevator column.
        let sys = QuadplaneSystem::new(params(), Fidelity::Full);
        let x = [10.0, 80.0, 18.0, -1.0];
        let z = [0.05, 0.1];
        let u = [0.3, 0.25, 0.5, -0.2];
        let w0 = sys.true_params().to_vec();
        let h = 1e-6;
        let phi = sys.regressor(&x, &z, &u).unwrap();
        for col in 0..9 {
            let mut wp = w0.clone();
            let mut wm = w0.clone();
            wp[col] += h;
            wm[col] -= h;
            let tp = tau_hat(&sys, &x, &z, &u, &wp).unwrap();
            let tm = tau_hat(&sys, &x, &z, &u, &wm).unwrap();
            for row in 0..3 {
                let fd = (tp[row] - tm[row]) / (2.0 * h);
                assert!(
                    (fd - phi[(row, col)]).abs() < 1e-6,
                    "phi[{row},{col}] = {} vs fd {fd}",
                    phi[(row, col)]
                );
            }
        }
    }

    #[test]
    fn free_fall_accelerates_at_g() {
        // Zero thrust, zero airspeed: the only slow-state forcing is gravity.
        let sys = QuadplaneSystem::new(params(), Fidelity::Full);
        let tau = tau_true(&sys, &[0.0, 100.0, 0.0, 0.0], &[0.0, 0.0], &[0.0; 4]).unwrap();
        assert!((tau[0]).abs() < 1e-12);
        assert!((tau[1] - sys.params().g_z).abs() < 1e-12);
    }

    #[test]
    fn rotation_consistency() {
        for k in -8..=8 {
            let th = k as f64 * 0.4;
            let (s, c) = th.sin_cos();
            // R^T R = I entries.
            assert!((c * c + s * s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_respects_declared_bound() {
        let sys = QuadplaneSystem::new(params(), Fidelity::Full);
        let mut rnd = sample_rng(1234);
        for _ in 0..10_000 {
            let env = sys.envelope();
            let draw = |iv: &(f64, f64), rnd: &mut dyn FnMut() -> f64| iv.0 + (iv.1 - iv.0) * rnd();
            let x: Vec<f64> = env.x.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let z: Vec<f64> = env.z.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let u: Vec<f64> = env.u.iter().map(|iv| draw(iv, &mut rnd)).collect();
            let d = sys.delta(&x, &z, &u);
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm <= sys.delta_max(), "delta {norm} above bound {}", sys.delta_max());
        }
    }

    #[test]
    fn params_roundtrip_through_toml() {
        let p = params();
        let text = toml::to_string(&p).unwrap();
        let back = QuadplaneParams::from_toml_str(&text).unwrap();
        assert_eq!(p, back);
        assert!(QuadplaneParams::from_toml_str("m = -1.0").is_err());
    }
}

//! Planar quadrotor with two vertical propellers and one lateral pusher.
//!
//! The pusher can only push one way (`u3 >= 0`), which makes the raw
//! input-to-force map non-surjective; with the pitch command as a virtual
//! input the reduced model is fully actuated. Forces are normalized: gravity
//! appears as the constant `+1` in the second component.

use crate::numerics::{DomainError, Mat, Scalar};
use crate::system::{
    build_canonical, CanonicalForm, Dimensions, Envelope, InputPolytope, ParamBox, SystemModel,
};

/// Control-input function of the planar quadrotor:
/// `[R(theta) * (u3, -(u1 + u2)) + (0, 1); u1 - u2]`.
pub fn quadrotor_tau<S: Scalar>(z: &[S], u: &[S]) -> Vec<S> {
    let theta = &z[0];
    let (s, c) = (theta.sin(), theta.cos());
    let thrust = u[0].clone() + u[1].clone();
    let fx = c.clone() * u[2].clone() + s.clone() * thrust.clone();
    let fy = s * u[2].clone() - c * thrust + S::one();
    let moment = u[0].clone() - u[1].clone();
    vec![fx, fy, moment]
}

/// The quadrotor as a [`SystemModel`]. The Example-1 dynamics are exactly
/// known, so the parameter vector is empty and the non-parametric remainder
/// is zero; the plant exists to witness underactuation and to exercise the
/// allocator on a second input geometry.
#[derive(Debug, Clone)]
pub struct QuadrotorSystem {
    dims: Dimensions,
    canonical: CanonicalForm,
    u_poly: InputPolytope,
    u_bar_poly: InputPolytope,
    w_box: ParamBox,
    envelope: Envelope,
}

impl QuadrotorSystem {
    pub fn new() -> Self {
        let dims = Dimensions::new(2, 2, 1, 3, 0);
        let canonical = build_canonical(&dims);
        let u_poly = InputPolytope::from_box(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)]);
        let theta_lim = std::f64::consts::FRAC_PI_6;
        let theta_poly = InputPolytope::from_box(&[(-theta_lim, theta_lim)]);
        let u_bar_poly = u_poly.box_product(&theta_poly);
        let envelope = Envelope {
            x: vec![(-5.0, 5.0), (-5.0, 5.0), (-2.0, 2.0), (-2.0, 2.0)],
            z: vec![(-0.5, 0.5), (-1.0, 1.0)],
            u: vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
        };
        Self {
            dims,
            canonical,
            u_poly,
            u_bar_poly,
            w_box: ParamBox::default(),
            envelope,
        }
    }
}

impl Default for QuadrotorSystem {
    fn default() -> Self {
        Self::new()
    }
}

impl SystemModel for QuadrotorSystem {
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
        &[]
    }

    fn envelope(&self) -> &Envelope {
        &self.envelope
    }

    fn delta_max(&self) -> f64 {
        0.0
    }

    fn tau0<S: Scalar>(&self, _x: &[S], z: &[S], u: &[S]) -> Result<Vec<S>, DomainError> {
        Ok(quadrotor_tau(z, u))
    }

    fn regressor<S: Scalar>(&self, _x: &[S], _z: &[S], _u: &[S]) -> Result<Mat<S>, DomainError> {
        Ok(Mat::zeros(3, 0))
    }

    fn delta(&self, _x: &[f64], _z: &[f64], _u: &[f64]) -> Vec<f64> {
        vec![0.0; 3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{tau_hat, tau_true};

    #[test]
    fn hover_is_an_equilibrium_of_tau() {
        let tau = quadrotor_tau(&[0.0, 0.0], &[0.5, 0.5, 0.0]);
        assert_eq!(tau, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn differential_thrust_produces_pure_moment() {
        let tau = quadrotor_tau(&[0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!((tau[0]).abs() < 1e-15);
        assert!((tau[1]).abs() < 1e-15);
        assert_eq!(tau[2], 1.0);
    }

    #[test]
    fn rotated_thrust_at_quarter_turn() {
        // Independent hand evaluation: R(pi/2) (0.3, -1) + (0, 1) = (1, 1.3).
        let tau = quadrotor_tau(&[std::f64::consts::FRAC_PI_2, 0.0], &[0.5, 0.5, 0.3]);
        assert!((tau[0] - 1.0).abs() < 1e-15);
        assert!((tau[1] - 1.3).abs() < 1e-15);
        assert!((tau[2]).abs() < 1e-15);
    }

    #[test]
    fn exact_model_means_tau_hat_equals_tau_true() {
        let sys = QuadrotorSystem::new();
        let x = [0.1, -0.2, 0.3, 0.4];
        let z = [0.2, -0.1];
        let u = [0.6, 0.3, 0.2];
        let hat = tau_hat(&sys, &x, &z, &u, &[]).unwrap();
        let truth = tau_true(&sys, &x, &z, &u).unwrap();
        assert_eq!(hat, truth);
    }

    #[test]
    fn raw_map_cannot_reach_negative_lateral_force_at_hover() {
        // Definition-level underactuation witness: at x = 0, z = 0 the first
        // component of tau equals u3 >= 0, so (-0.1, 0, 0) is out of reach.
        let target = [-0.1, 0.0, 0.0];
        let mut best = f64::INFINITY;
        let n = 24;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let u = [
                        i as f64 / n as f64,
                        j as f64 / n as f64,
                        k as f64 / n as f64,
                    ];
                    let tau = quadrotor_tau(&[0.0, 0.0], &u);
                    let r = tau
                        .iter()
                        .zip(&target)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    best = best.min(r);
                }
            }
        }
        assert!(best >= 1e-3, "grid reached the infeasible target: {best}");
    }
}

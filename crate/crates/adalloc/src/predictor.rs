//! Series-parallel state predictors, the smooth projection operator, and the
//! parameter update law.

use crate::highlevel::companion_gain_matrix;
use crate::numerics::{companion_char_poly, routh_hurwitz_stable, DomainError, Mat};
use crate::system::{split_tau, tau_hat, Dimensions, ParamBox, SystemModel};

/// Fraction of each parameter-box half-width over which the projection
/// transitions from pass-through to fully clipped.
pub const PROJECTION_BAND: f64 = 0.05;

/// Predictor feedback gains and the assembled error-dynamics matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorGains {
    /// Slow row gains, length `d`, each non-negative.
    pub k_sx: Vec<f64>,
    /// Fast row gains, length `d`, each non-negative.
    pub k_sz: Vec<f64>,
    pub a_sx: Mat<f64>,
    pub a_sz: Mat<f64>,
    /// Block-diagonal of `a_sx` and `a_sz`.
    pub a_s: Mat<f64>,
}

impl PredictorGains {
    pub fn new(k_sx: &[f64], k_sz: &[f64], dims: &Dimensions) -> Self {
        assert_eq!(k_sx.len(), dims.d, "need {} slow predictor gains", dims.d);
        assert_eq!(k_sz.len(), dims.d, "need {} fast predictor gains", dims.d);
        assert!(
            k_sx.iter().chain(k_sz).all(|k| *k >= 0.0),
            "predictor gains must be non-negative"
        );
        let a_sx = companion_gain_matrix(k_sx, dims.n_x);
        let a_sz = companion_gain_matrix(k_sz, dims.n_z);
        let mut a_s = Mat::<f64>::zeros(dims.dim_chi(), dims.dim_chi());
        a_s.set_block(0, 0, &a_sx);
        a_s.set_block(dims.dim_x(), dims.dim_x(), &a_sz);
        Self {
            k_sx: k_sx.to_vec(),
            k_sz: k_sz.to_vec(),
            a_sx,
            a_sz,
            a_s,
        }
    }

    /// True iff both error-dynamics blocks have all eigenvalues strictly in
    /// the open left half-plane.
    pub fn is_hurwitz(&self) -> bool {
        routh_hurwitz_stable(&companion_char_poly(&self.k_sx))
            && routh_hurwitz_stable(&companion_char_poly(&self.k_sz))
    }
}

/// Everything the adaptation law evolves: predicted states and the parameter
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorState {
    pub x_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub w_hat: Vec<f64>,
}

impl PredictorState {
    /// Start the predictor on the measured state with the given estimate.
    pub fn on_measurement(x: &[f64], z: &[f64], w_hat: Vec<f64>) -> Self {
        Self {
            x_hat: x.to_vec(),
            z_hat: z.to_vec(),
            w_hat,
        }
    }

    /// Prediction error `chi - chi_hat`.
    pub fn e_s(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        x.iter()
            .chain(z)
            .zip(self.x_hat.iter().chain(&self.z_hat))
            .map(|(m, p)| m - p)
            .collect()
    }
}

/// Symmetric positive-definite adaptation gains. `gamma_e` acts on the full
/// prediction error, size `d (n_x + n_z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationGains {
    pub gamma_w: Mat<f64>,
    pub gamma_e: Mat<f64>,
}

impl AdaptationGains {
    /// Scaled-identity gains, the form used by the shipped scenarios.
    pub fn scaled_identity(gamma_w: f64, gamma_e: f64, dims: &Dimensions) -> Self {
        assert!(gamma_w > 0.0 && gamma_e > 0.0, "adaptation gains must be positive");
        Self {
            gamma_w: Mat::<f64>::identity(dims.w.max(1)).scale(gamma_w),
            gamma_e: Mat::<f64>::identity(dims.dim_chi()).scale(gamma_e),
        }
    }
}

/// Series-parallel predictor rates. Both drift terms use the measured state;
/// only the model's tau estimate and the output-error feedback distinguish
/// the predictor from the plant.
pub fn predictor_rate<M: SystemModel + ?Sized>(
    model: &M,
    gains: &PredictorGains,
    x: &[f64],
    z: &[f64],
    u: &[f64],
    pred: &PredictorState,
) -> Result<(Vec<f64>, Vec<f64>), DomainError> {
    let dims = model.dims();
    let cf = model.canonical();
    let tau = tau_hat(model, x, z, u, &pred.w_hat)?;
    let (tau_x, tau_z) = split_tau(&dims, &tau);

    let e_sx: Vec<f64> = x.iter().zip(&pred.x_hat).map(|(a, b)| a - b).collect();
    let e_sz: Vec<f64> = z.iter().zip(&pred.z_hat).map(|(a, b)| a - b).collect();

    let mut x_rate = cf.a_x.matvec(x);
    for (r, f) in x_rate.iter_mut().zip(cf.b_x.matvec(tau_x)) {
        *r += f;
    }
    for (r, c) in x_rate.iter_mut().zip(gains.a_sx.matvec(&e_sx)) {
        *r -= c;
    }

    let mut z_rate = cf.a_z.matvec(z);
    for (r, f) in z_rate.iter_mut().zip(cf.b_z.matvec(tau_z)) {
        *r += f;
    }
    for (r, c) in z_rate.iter_mut().zip(gains.a_sz.matvec(&e_sz)) {
        *r -= c;
    }

    Ok((x_rate, z_rate))
}

/// Smooth projection: passes `raw` through strictly inside the box, scales
/// the outward component continuously to zero across the transition band,
/// and never points outward on the boundary.
///
/// Panics if `w_hat` has already left the box, which the update law is
/// supposed to make impossible.
pub fn proj(w_hat: &[f64], raw: &[f64], w_box: &ParamBox, band: f64) -> Vec<f64> {
    assert_eq!(w_hat.len(), raw.len(), "proj: length mismatch");
    assert_eq!(w_hat.len(), w_box.len(), "proj: box length mismatch");
    assert!(
        w_box.contains(w_hat, 1e-12),
        "parameter estimate left its compact set: {w_hat:?}"
    );
    w_hat
        .iter()
        .zip(raw)
        .zip(w_box.lo.iter().zip(&w_box.hi))
        .map(|((w, y), (lo, hi))| {
            let c = 0.5 * (lo + hi);
            let r = 0.5 * (hi - lo);
            let inner = r * (1.0 - band);
            let dist = w - c;
            // Containment indicator: negative inside the band-free interior,
            // rising smoothly to one on the face.
            let fval = (dist * dist - inner * inner) / (r * r - inner * inner);
            let outward = y * dist > 0.0;
            if fval > 0.0 && outward {
                y * (1.0 - fval.min(1.0))
            } else {
                *y
            }
        })
        .collect()
}

/// The projected parameter update: the regressor-weighted combination of the
/// prediction error and the allocator's first-order-optimality vector, run
/// through [`proj`].
#[allow(clippy::too_many_arguments)]
pub fn w_update_rate(
    phi: &Mat<f64>,
    b_chi: &Mat<f64>,
    e_s: &[f64],
    foo: &[f64],
    l_chi_stacked: &Mat<f64>,
    adaptation: &AdaptationGains,
    w_hat: &[f64],
    w_box: &ParamBox,
) -> Vec<f64> {
    if w_hat.is_empty() {
        return Vec::new();
    }
    // Gamma_e e_s + [L_chi_u; L_chi_lambda]^T foo, in the chi slot.
    let mut inner = adaptation.gamma_e.matvec(e_s);
    let cross = l_chi_stacked.transpose().matvec(foo);
    for (a, b) in inner.iter_mut().zip(cross) {
        *a += b;
    }
    // Gamma_W phi^T B_chi^T inner.
    let pulled = b_chi.transpose().matvec(&inner);
    let raw = adaptation.gamma_w.matvec(&phi.transpose().matvec(&pulled));
    proj(w_hat, &raw, w_box, PROJECTION_BAND)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::QuadrotorSystem;
    use crate::system::SystemModel;

    fn unit_box() -> ParamBox {
        ParamBox::new(vec![-1.0, -1.0], vec![1.0, 1.0])
    }

    #[test]
    fn proj_passes_interior_updates() {
        let b = unit_box();
        let raw = vec![3.0, -2.0];
        assert_eq!(proj(&[0.0, 0.0], &raw, &b, 0.05), raw);
    }

    #[test]
    fn proj_zeroes_outward_component_on_the_face() {
        let b = unit_box();
        let out = proj(&[1.0, 0.0], &[2.0, 0.5], &b, 0.05);
        assert_eq!(out, vec![0.0, 0.5]);
    }

    #[test]
    fn proj_keeps_inward_updates_on_the_face() {
        let b = unit_box();
        let out = proj(&[1.0, 0.0], &[-2.0, 0.5], &b, 0.05);
        assert_eq!(out, vec![-2.0, 0.5]);
    }

    #[test]
    fn proj_is_continuous_across_the_band() {
        let b = ParamBox::new(vec![-1.0], vec![1.0]);
        let mut prev = None;
        let mut w = 0.9;
        while w <= 1.0 {
            let out = proj(&[w], &[1.0], &b, 0.05)[0];
            if let Some(p) = prev {
                let step: f64 = out - p;
                assert!(step.abs() < 0.02, "projection jump {step} at {w}");
            }
            prev = Some(out);
            w += 1e-4;
        }
    }

    #[test]
    #[should_panic(expected = "left its compact set")]
    fn proj_faults_outside_the_box() {
        let b = unit_box();
        proj(&[1.5, 0.0], &[0.0, 0.0], &b, 0.05);
    }

    #[test]
    fn predictor_on_measurement_reduces_to_model_propagation() {
        let sys = QuadrotorSystem::new();
        let gains = PredictorGains::new(&[5.0, 5.0], &[5.0, 5.0], &sys.dims());
        assert!(gains.is_hurwitz());
        let x = [0.2, -0.1, 0.4, 0.0];
        let z = [0.1, -0.2];
        let u = [0.5, 0.4, 0.1];
        let pred = PredictorState::on_measurement(&x, &z, vec![]);
        let (xr, zr) = predictor_rate(&sys, &gains, &x, &z, &u, &pred).unwrap();
        // e_s = 0: rates are exactly A chi + B tau_hat.
        let cf = sys.canonical();
        let tau = crate::system::tau_hat(&sys, &x, &z, &u, &[]).unwrap();
        let mut expect_x = cf.a_x.matvec(&x);
        for (r, f) in expect_x.iter_mut().zip(cf.b_x.matvec(&tau[..2])) {
            *r += f;
        }
        assert_eq!(xr, expect_x);
        let mut expect_z = cf.a_z.matvec(&z);
        for (r, f) in expect_z.iter_mut().zip(cf.b_z.matvec(&tau[2..])) {
            *r += f;
        }
        assert_eq!(zr, expect_z);
    }

    #[test]
    fn zero_gain_predictor_is_open_loop_model_propagation() {
        // With zero row gains the error matrix equals the chain integrator,
        // so the law collapses to A x_hat + B tau_hat: the predictor
        // propagates its own state and the measurement correction is gone.
        let sys = QuadrotorSystem::new();
        let gains = PredictorGains::new(&[0.0, 0.0], &[0.0, 0.0], &sys.dims());
        assert!(!gains.is_hurwitz());
        let x = [0.2, -0.1, 0.4, 0.0];
        let z = [0.1, -0.2];
        let u = [0.5, 0.4, 0.1];
        let pred = PredictorState {
            x_hat: vec![1.0, 0.5, -0.3, 0.7],
            z_hat: vec![0.3, 0.2],
            w_hat: vec![],
        };
        let (xr, zr) = predictor_rate(&sys, &gains, &x, &z, &u, &pred).unwrap();
        let cf = sys.canonical();
        let tau = crate::system::tau_hat(&sys, &x, &z, &u, &[]).unwrap();
        let mut expect_x = cf.a_x.matvec(&pred.x_hat);
        for (r, f) in expect_x.iter_mut().zip(cf.b_x.matvec(&tau[..2])) {
            *r += f;
        }
        for (a, b) in xr.iter().zip(&expect_x) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut expect_z = cf.a_z.matvec(&pred.z_hat);
        for (r, f) in expect_z.iter_mut().zip(cf.b_z.matvec(&tau[2..])) {
            *r += f;
        }
        for (a, b) in zr.iter().zip(&expect_z) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn no_excitation_no_adaptation() {
        // phi = 0 forces a zero update; so do zero error and zero FOO.
        let dims = Dimensions::new(2, 2, 1, 4, 2);
        let adaptation = AdaptationGains::scaled_identity(0.1, 100.0, &dims);
        let w_box = unit_box();
        let b_chi = crate::system::build_canonical(&dims).b_chi;
        let phi0 = Mat::<f64>::zeros(3, 2);
        let l_chi = Mat::<f64>::zeros(8, 6);
        let rate = w_update_rate(
            &phi0,
            &b_chi,
            &[1.0; 6],
            &[1.0; 8],
            &l_chi,
            &adaptation,
            &[0.0, 0.0],
            &w_box,
        );
        assert_eq!(rate, vec![0.0, 0.0]);

        let mut phi = Mat::<f64>::zeros(3, 2);
        phi[(0, 0)] = 1.0;
        phi[(2, 1)] = -2.0;
        let rate = w_update_rate(
            &phi,
            &b_chi,
            &[0.0; 6],
            &[0.0; 8],
            &l_chi,
            &adaptation,
            &[0.0, 0.0],
            &w_box,
        );
        assert_eq!(rate, vec![0.0, 0.0]);
    }
}

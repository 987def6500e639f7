//! Dynamic control allocation: the barrier-augmented objective, the
//! Lagrangian and its derivative bundle, and the update flow that tracks the
//! constrained optimum instead of re-solving it at every step.

mod oracle;

pub use oracle::{oracle_solve, oracle_solve_from, oracle_track_target, OracleSolution};

use thiserror::Error;

use crate::highlevel::{pi_x, pi_z, ReferenceModel, TimescaleGains};
use crate::numerics::{grad_hess, norm2, solve_linear, DomainError, Dual2, Mat, NumericsError, Scalar};
use crate::predictor::PredictorGains;
use crate::system::{tau_hat, Dimensions, SystemModel};

#[derive(Debug, Clone, Error)]
pub enum AllocError {
    /// The augmented input touched or crossed constraint row `row`.
    #[error("augmented input violates constraint row {row} (slack {slack:.3e})")]
    BoundaryHit { row: usize, slack: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    /// The reference KKT solver failed from every start.
    #[error("allocation oracle failed from {starts} starts (best residual {best:.3e})")]
    OracleFailure { starts: usize, best: f64 },
}

/// Allocation objective: quadratic input cost, quadratic preference of the
/// fast command toward its external reference, and log barriers on the
/// augmented polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocObjective {
    /// Input cost weight, `m x m` symmetric positive-definite.
    pub q: Mat<f64>,
    /// Fast-command preference weight, positive.
    pub alpha: f64,
    /// Barrier weight, small and positive.
    pub beta: f64,
}

impl AllocObjective {
    pub fn new(q: Mat<f64>, alpha: f64, beta: f64) -> Self {
        assert_eq!(q.rows(), q.cols(), "Q must be square");
        assert!(alpha > 0.0, "alpha must be positive");
        assert!(beta > 0.0, "beta must be positive");
        Self { q, alpha, beta }
    }

    pub fn diagonal(q_diag: &[f64], alpha: f64, beta: f64) -> Self {
        let mut q = Mat::<f64>::zeros(q_diag.len(), q_diag.len());
        for (i, v) in q_diag.iter().enumerate() {
            assert!(*v > 0.0, "Q diagonal must be positive");
            q[(i, i)] = *v;
        }
        Self::new(q, alpha, beta)
    }
}

/// Index layout of the Lagrangian's concatenated argument vector
/// `(t, chi, chi_hat, w_hat, u_bar, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArgLayout {
    pub dim_chi: usize,
    pub w: usize,
    /// Length of the augmented input.
    pub nu: usize,
    /// Number of equality constraints (= multipliers).
    pub nc: usize,
}

impl ArgLayout {
    pub fn of(dims: &Dimensions) -> Self {
        Self {
            dim_chi: dims.dim_chi(),
            w: dims.w,
            nu: dims.dim_u_bar(),
            nc: dims.n_tau(),
        }
    }

    pub fn total(&self) -> usize {
        1 + 2 * self.dim_chi + self.w + self.nu + self.nc
    }

    pub fn chi(&self) -> std::ops::Range<usize> {
        1..1 + self.dim_chi
    }

    pub fn chi_hat(&self) -> std::ops::Range<usize> {
        let s = 1 + self.dim_chi;
        s..s + self.dim_chi
    }

    pub fn w_hat(&self) -> std::ops::Range<usize> {
        let s = 1 + 2 * self.dim_chi;
        s..s + self.w
    }

    pub fn u_bar(&self) -> std::ops::Range<usize> {
        let s = 1 + 2 * self.dim_chi + self.w;
        s..s + self.nu
    }

    pub fn lambda(&self) -> std::ops::Range<usize> {
        let s = 1 + 2 * self.dim_chi + self.w + self.nu;
        s..s + self.nc
    }
}

/// First-order optimality data at one point of the flow: the stacked
/// gradient in `(u_bar, lambda)` and the bordered Hessian.
#[derive(Debug, Clone)]
pub struct KktPoint {
    pub value: f64,
    pub l_u: Vec<f64>,
    pub l_lambda: Vec<f64>,
    /// `[[L_uu, L_lu], [L_ul, 0]]`, the Jacobian of the FOO vector.
    pub hessian: Mat<f64>,
}

impl KktPoint {
    /// Stacked first-order-optimality vector `(L_u, L_lambda)`.
    pub fn foo(&self) -> Vec<f64> {
        let mut v = self.l_u.clone();
        v.extend_from_slice(&self.l_lambda);
        v
    }

    pub fn foo_norm(&self) -> f64 {
        norm2(&self.foo())
    }

    /// The input-space Hessian block `L_uu`.
    pub fn l_uu(&self) -> Mat<f64> {
        self.hessian.block(0, 0, self.l_u.len(), self.l_u.len())
    }
}

/// Full derivative bundle of the Lagrangian: the KKT data plus every cross
/// derivative the feed-forward and adaptation laws consume.
#[derive(Debug, Clone)]
pub struct LagrangianBundle {
    pub kkt: KktPoint,
    /// `(nu+nc)`: stacked `[L_tu; L_tl]`.
    pub l_t: Vec<f64>,
    /// `(nu+nc) x dim_chi`: stacked `[L_chi_u; L_chi_l]`.
    pub l_chi: Mat<f64>,
    /// `(nu+nc) x dim_chi`: stacked `[L_chihat_u; L_chihat_l]`.
    pub l_chi_hat: Mat<f64>,
    /// `(nu+nc) x w`: stacked `[L_wu; L_wl]`.
    pub l_w: Mat<f64>,
}

/// The allocator's own state: the augmented input and the multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocatorState {
    pub u_bar: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AllocatorState {
    /// Strictly interior start: box midpoints with the fast command moved to
    /// the preferred value (clamped into the interior), multipliers at zero.
    pub fn interior_start<M: SystemModel>(model: &M, z1_pref: &[f64]) -> Self {
        let dims = model.dims();
        let mut u_bar = model.augmented_polytope().box_midpoint();
        let intervals = model
            .augmented_polytope()
            .intervals()
            .expect("augmented polytope must be a box");
        for (i, pref) in z1_pref.iter().enumerate() {
            let (lo, hi) = intervals[dims.m + i];
            let margin = 0.05 * (hi - lo);
            u_bar[dims.m + i] = pref.clamp(lo + margin, hi - margin);
        }
        Self {
            u_bar,
            lambda: vec![0.0; dims.n_tau()],
        }
    }
}

/// Escalating Levenberg regularization policy for near-singular bordered
/// Hessians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationPolicy {
    pub mu0: f64,
    pub factor: f64,
    pub mu_max: f64,
}

impl Default for RegularizationPolicy {
    fn default() -> Self {
        Self {
            mu0: 1e-8,
            factor: 10.0,
            mu_max: 1e-2,
        }
    }
}

/// One step of the allocation flow.
#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub u_bar_rate: Vec<f64>,
    pub lambda_rate: Vec<f64>,
    /// Levenberg shift that was needed, if any.
    pub regularization: Option<f64>,
}

/// Block-diagonal flow gain `diag(Gamma_u, Gamma_lambda)` from scalar gains.
pub fn gamma_ul_matrix(gamma_u: f64, gamma_lambda: f64, layout: &ArgLayout) -> Mat<f64> {
    assert!(gamma_u > 0.0 && gamma_lambda > 0.0, "flow gains must be positive");
    let n = layout.nu + layout.nc;
    let mut g = Mat::<f64>::zeros(n, n);
    for i in 0..layout.nu {
        g[(i, i)] = gamma_u;
    }
    for i in layout.nu..n {
        g[(i, i)] = gamma_lambda;
    }
    g
}

/// The allocation problem: plant model, objective, gains, and reference,
/// bound together so the Lagrangian can be evaluated with any scalar.
pub struct AllocProblem<'a, M: SystemModel, R: ReferenceModel> {
    pub model: &'a M,
    pub objective: &'a AllocObjective,
    pub timescale: &'a TimescaleGains,
    pub predictor_gains: &'a PredictorGains,
    pub reference: &'a R,
}

impl<'a, M: SystemModel, R: ReferenceModel> AllocProblem<'a, M, R> {
    pub fn layout(&self) -> ArgLayout {
        ArgLayout::of(&self.model.dims())
    }

    /// Reject augmented inputs on or outside the barrier domain, naming the
    /// first violated row.
    pub fn check_feasible(&self, u_bar: &[f64]) -> Result<(), AllocError> {
        let slacks = self.model.augmented_polytope().margins(u_bar);
        for (row, s) in slacks.iter().enumerate() {
            if *s <= 0.0 {
                return Err(AllocError::BoundaryHit { row, slack: *s });
            }
        }
        Ok(())
    }

    /// The Lagrangian `J + lambda^T (pi - tau_hat)` evaluated generically.
    ///
    /// The slow-state constraint uses the reduced control function: the
    /// fast state is replaced by its commanded equilibrium `(vartheta, 0)`.
    /// The fast-state constraint uses the measured fast state.
    pub fn lagrangian<S: Scalar>(
        &self,
        t: &S,
        chi: &[S],
        chi_hat: &[S],
        w_hat: &[S],
        u_bar: &[S],
        lambda: &[S],
    ) -> Result<S, DomainError> {
        let dims = self.model.dims();
        let (x, z) = chi.split_at(dims.dim_x());
        let (x_hat, z_hat) = chi_hat.split_at(dims.dim_x());
        let (u, vartheta) = u_bar.split_at(dims.m);

        let refpt = self.reference.eval(&dims, t);
        let pix = pi_x(
            &refpt.r,
            &refpt.x_r,
            x,
            x_hat,
            &self.predictor_gains.k_sx,
            &self.timescale.k_rx,
            dims.n_x,
        );
        let piz = pi_z(
            z,
            z_hat,
            vartheta,
            &self.predictor_gains.k_sz,
            &self.timescale.k_rz,
            dims.n_z,
        );

        // Reduced slow rows: tau_hat at the commanded fast equilibrium.
        let mut z_cmd = vec![S::zero(); dims.dim_z()];
        z_cmd[..dims.n_z].clone_from_slice(vartheta);
        let tau_red = tau_hat(self.model, x, &z_cmd, u, w_hat)?;
        // Fast rows at the measured fast state.
        let tau_meas = tau_hat(self.model, x, z, u, w_hat)?;

        // J = 0.5 u^T Q u + alpha |vartheta - z1_r|^2 - beta sum log(slack).
        let mut j = S::zero();
        for i in 0..dims.m {
            for k in 0..dims.m {
                let qik = self.objective.q[(i, k)];
                if qik != 0.0 {
                    j += S::from_real(0.5 * qik) * u[i].clone() * u[k].clone();
                }
            }
        }
        for (v, zr) in vartheta.iter().zip(&refpt.z1_r) {
            let dev = v.clone() - zr.clone();
            j += S::from_real(self.objective.alpha) * dev.clone() * dev;
        }
        for slack in self.model.augmented_polytope().margins(u_bar) {
            j -= S::from_real(self.objective.beta) * slack.ln()?;
        }

        let mut lag = j;
        for (i, l) in lambda.iter().enumerate() {
            let c = if i < dims.n_x {
                pix[i].clone() - tau_red[i].clone()
            } else {
                piz[i - dims.n_x].clone() - tau_meas[dims.n_x + i - dims.n_x].clone()
            };
            lag += l.clone() * c;
        }
        Ok(lag)
    }

    /// Direct evaluation of the constraint vector `pi - tau_hat` (the exact
    /// value `L_lambda` must take).
    #[allow(clippy::too_many_arguments)]
    pub fn constraint_violation(
        &self,
        t: f64,
        x: &[f64],
        z: &[f64],
        x_hat: &[f64],
        z_hat: &[f64],
        w_hat: &[f64],
        u_bar: &[f64],
    ) -> Result<Vec<f64>, DomainError> {
        let mut chi = x.to_vec();
        chi.extend_from_slice(z);
        let mut chi_hat = x_hat.to_vec();
        chi_hat.extend_from_slice(z_hat);
        // Differentiate in lambda: the gradient is exactly the violation.
        let lay = self.layout();
        let mut out = Vec::with_capacity(lay.nc);
        for i in 0..lay.nc {
            let mut lambda = vec![0.0; lay.nc];
            lambda[i] = 1.0;
            let with = self.lagrangian(&t, &chi, &chi_hat, w_hat, &u_bar.to_vec(), &lambda)?;
            let without =
                self.lagrangian(&t, &chi, &chi_hat, w_hat, &u_bar.to_vec(), &vec![0.0; lay.nc])?;
            out.push(with - without);
        }
        Ok(out)
    }

    /// Full derivative bundle: one AD pass over the concatenated argument
    /// vector, then sliced into the blocks the update laws consume.
    #[allow(clippy::too_many_arguments)]
    pub fn bundle(
        &self,
        t: f64,
        x: &[f64],
        z: &[f64],
        x_hat: &[f64],
        z_hat: &[f64],
        w_hat: &[f64],
        u_bar: &[f64],
        lambda: &[f64],
    ) -> Result<LagrangianBundle, AllocError> {
        self.check_feasible(u_bar)?;
        let lay = self.layout();
        let mut point = Vec::with_capacity(lay.total());
        point.push(t);
        point.extend_from_slice(x);
        point.extend_from_slice(z);
        point.extend_from_slice(x_hat);
        point.extend_from_slice(z_hat);
        point.extend_from_slice(w_hat);
        point.extend_from_slice(u_bar);
        point.extend_from_slice(lambda);
        assert_eq!(point.len(), lay.total());

        let (value, grad, hess) = grad_hess(
            |v: &[Dual2]| {
                self.lagrangian(
                    &v[0],
                    &v[lay.chi()],
                    &v[lay.chi_hat()],
                    &v[lay.w_hat()],
                    &v[lay.u_bar()],
                    &v[lay.lambda()],
                )
            },
            &point,
        )?;

        let ul: Vec<usize> = lay.u_bar().chain(lay.lambda()).collect();
        let mut hessian = Mat::<f64>::zeros(ul.len(), ul.len());
        for (a, &i) in ul.iter().enumerate() {
            for (b, &j) in ul.iter().enumerate() {
                hessian[(a, b)] = hess[(i, j)];
            }
        }
        let l_t: Vec<f64> = ul.iter().map(|&i| hess[(i, 0)]).collect();
        let cross = |range: std::ops::Range<usize>| {
            let mut m = Mat::<f64>::zeros(ul.len(), range.len());
            for (a, &i) in ul.iter().enumerate() {
                for (b, j) in range.clone().enumerate() {
                    m[(a, b)] = hess[(i, j)];
                }
            }
            m
        };
        let l_chi = cross(lay.chi());
        let l_chi_hat = cross(lay.chi_hat());
        let l_w = cross(lay.w_hat());

        Ok(LagrangianBundle {
            kkt: KktPoint {
                value,
                l_u: grad[lay.u_bar()].to_vec(),
                l_lambda: grad[lay.lambda()].to_vec(),
                hessian,
            },
            l_t,
            l_chi,
            l_chi_hat,
            l_w,
        })
    }

    /// KKT data only, seeding just `(u_bar, lambda)`. Used by the oracle and
    /// by frozen-state flow experiments where the cross derivatives are not
    /// needed.
    #[allow(clippy::too_many_arguments)]
    pub fn kkt_point(
        &self,
        t: f64,
        x: &[f64],
        z: &[f64],
        x_hat: &[f64],
        z_hat: &[f64],
        w_hat: &[f64],
        u_bar: &[f64],
        lambda: &[f64],
    ) -> Result<KktPoint, AllocError> {
        self.check_feasible(u_bar)?;
        let lay = self.layout();
        let mut point = u_bar.to_vec();
        point.extend_from_slice(lambda);
        let lift = |s: &[f64]| -> Vec<Dual2> { s.iter().map(|&v| Dual2::constant(v)).collect() };
        let (tc, chic, chihc, wc) = (
            Dual2::constant(t),
            lift(&[x, z].concat()),
            lift(&[x_hat, z_hat].concat()),
            lift(w_hat),
        );
        let (value, grad, hess) = grad_hess(
            |v: &[Dual2]| self.lagrangian(&tc, &chic, &chihc, &wc, &v[..lay.nu], &v[lay.nu..]),
            &point,
        )?;
        Ok(KktPoint {
            value,
            l_u: grad[..lay.nu].to_vec(),
            l_lambda: grad[lay.nu..].to_vec(),
            hessian: hess,
        })
    }
}

/// The allocation flow rate `-H^-1 (Gamma_ul * FOO + u_ff)`, computed with
/// one linear solve. A singular bordered Hessian is retried with an
/// escalating Levenberg shift; the shift used is reported.
pub fn alloc_rate(
    kkt: &KktPoint,
    gamma_ul: &Mat<f64>,
    u_ff: &[f64],
    policy: &RegularizationPolicy,
) -> Result<RateOutcome, AllocError> {
    let nu = kkt.l_u.len();
    let n = nu + kkt.l_lambda.len();
    assert_eq!(u_ff.len(), n, "feed-forward length mismatch");
    let foo = kkt.foo();
    let mut rhs = gamma_ul.matvec(&foo);
    for (r, f) in rhs.iter_mut().zip(u_ff) {
        *r = -(*r + f);
    }

    match solve_linear(&kkt.hessian, &rhs) {
        Ok(rate) => Ok(RateOutcome {
            u_bar_rate: rate[..nu].to_vec(),
            lambda_rate: rate[nu..].to_vec(),
            regularization: None,
        }),
        Err(NumericsError::SingularHessian { .. }) => {
            let mut mu = policy.mu0;
            loop {
                let mut shifted = kkt.hessian.clone();
                for i in 0..n {
                    shifted[(i, i)] += mu;
                }
                if let Ok(rate) = solve_linear(&shifted, &rhs) {
                    return Ok(RateOutcome {
                        u_bar_rate: rate[..nu].to_vec(),
                        lambda_rate: rate[nu..].to_vec(),
                        regularization: Some(mu),
                    });
                }
                if mu >= policy.mu_max {
                    return Err(AllocError::Numerics(NumericsError::SingularHessian {
                        estimate: f64::INFINITY,
                    }));
                }
                mu *= policy.factor;
            }
        }
        Err(e) => Err(AllocError::Numerics(e)),
    }
}

/// Feed-forward compensating the drift of the optimum:
/// `L_t + L_chi (A chi + B tau_hat) + L_chihat chihat_rate + L_w w_rate`.
///
/// `chi_rate_known` must be the model-side drift (never the plant's true
/// tau).
pub fn feed_forward(
    bundle: &LagrangianBundle,
    chi_rate_known: &[f64],
    chi_hat_rate: &[f64],
    w_rate: &[f64],
) -> Vec<f64> {
    let mut out = bundle.l_t.clone();
    for (o, v) in out.iter_mut().zip(bundle.l_chi.matvec(chi_rate_known)) {
        *o += v;
    }
    for (o, v) in out.iter_mut().zip(bundle.l_chi_hat.matvec(chi_hat_rate)) {
        *o += v;
    }
    if !w_rate.is_empty() {
        for (o, v) in out.iter_mut().zip(bundle.l_w.matvec(w_rate)) {
            *o += v;
        }
    }
    out
}

/// Model-side drift `A_chi chi + B_chi tau_hat(x, z, u)`.
pub fn known_drift<M: SystemModel>(
    model: &M,
    x: &[f64],
    z: &[f64],
    u: &[f64],
    w_hat: &[f64],
) -> Result<Vec<f64>, DomainError> {
    let cf = model.canonical();
    let mut chi = x.to_vec();
    chi.extend_from_slice(z);
    let tau = tau_hat(model, x, z, u, w_hat)?;
    let mut rate = cf.a_chi.matvec(&chi);
    for (r, f) in rate.iter_mut().zip(cf.b_chi.matvec(&tau)) {
        *r += f;
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::highlevel::{build_timescale, ReferencePoint};
    use crate::plants::QuadrotorSystem;
    use crate::system::SystemModel;

    /// Constant hover reference for the quadrotor.
    struct Hover;

    impl ReferenceModel for Hover {
        fn eval<S: Scalar>(&self, dims: &Dimensions, _t: &S) -> ReferencePoint<S> {
            ReferencePoint {
                x_r: vec![S::zero(); dims.dim_x()],
                r: vec![S::zero(); dims.n_x],
                z1_r: vec![S::zero(); dims.n_z],
            }
        }
    }

    fn quadrotor_problem() -> (
        QuadrotorSystem,
        AllocObjective,
        TimescaleGains,
        PredictorGains,
        Hover,
    ) {
        let sys = QuadrotorSystem::new();
        let dims = sys.dims();
        let objective = AllocObjective::diagonal(&[1.0, 1.0, 1.0], 25.0, 0.01);
        let ts = build_timescale(&[0.5, 0.707], 0.2, &dims).unwrap();
        let pg = PredictorGains::new(&[5.0, 5.0], &[5.0, 5.0], &dims);
        (sys, objective, ts, pg, Hover)
    }

    #[test]
    fn lambda_gradient_is_exactly_the_constraint_violation() {
        let (sys, obj, ts, pg, hover) = quadrotor_problem();
        let problem = AllocProblem {
            model: &sys,
            objective: &obj,
            timescale: &ts,
            predictor_gains: &pg,
            reference: &hover,
        };
        let x = [0.05, -0.1, 0.02, 0.0];
        let z = [0.03, -0.05];
        let u_bar = [0.45, 0.55, 0.2, 0.1];
        let lambda = [0.3, -0.2, 0.7];
        let b = problem
            .bundle(1.0, &x, &z, &x, &z, &[], &u_bar, &lambda)
            .unwrap();
        let c = problem
            .constraint_violation(1.0, &x, &z, &x, &z, &[], &u_bar)
            .unwrap();
        for (g, ci) in b.kkt.l_lambda.iter().zip(&c) {
            assert!((g - ci).abs() < 1e-12, "L_lambda {g} vs violation {ci}");
        }
        // With lambda = 0 the value is the objective alone.
        let b0 = problem
            .bundle(1.0, &x, &z, &x, &z, &[], &u_bar, &[0.0; 3])
            .unwrap();
        let dot: f64 = lambda.iter().zip(&c).map(|(l, ci)| l * ci).sum();
        assert!((b.kkt.value - b0.kkt.value - dot).abs() < 1e-12);
        // L_lambda is independent of lambda.
        for (a, bb) in b.kkt.l_lambda.iter().zip(&b0.kkt.l_lambda) {
            assert!((a - bb).abs() < 1e-14);
        }
    }

    #[test]
    fn bordered_hessian_has_zero_multiplier_block() {
        let (sys, obj, ts, pg, hover) = quadrotor_problem();
        let problem = AllocProblem {
            model: &sys,
            objective: &obj,
            timescale: &ts,
            predictor_gains: &pg,
            reference: &hover,
        };
        let b = problem
            .bundle(
                0.0,
                &[0.0; 4],
                &[0.0; 2],
                &[0.0; 4],
                &[0.0; 2],
                &[],
                &[0.4, 0.5, 0.1, 0.05],
                &[0.1, 0.2, 0.3],
            )
            .unwrap();
        let lay = problem.layout();
        for i in lay.nu..lay.nu + lay.nc {
            for j in lay.nu..lay.nu + lay.nc {
                assert_eq!(b.kkt.hessian[(i, j)], 0.0);
            }
        }
        // Bordered symmetry: H_ul = H_lu^T.
        for i in 0..lay.nu {
            for j in 0..lay.nc {
                assert_eq!(b.kkt.hessian[(i, lay.nu + j)], b.kkt.hessian[(lay.nu + j, i)]);
            }
        }
    }

    #[test]
    fn boundary_hit_names_the_row() {
        let (sys, obj, ts, pg, hover) = quadrotor_problem();
        let problem = AllocProblem {
            model: &sys,
            objective: &obj,
            timescale: &ts,
            predictor_gains: &pg,
            reference: &hover,
        };
        // u2 at its upper bound (row 3 of the box rows: lo0, hi0, lo1, hi1).
        let err = problem
            .bundle(
                0.0,
                &[0.0; 4],
                &[0.0; 2],
                &[0.0; 4],
                &[0.0; 2],
                &[],
                &[0.4, 1.0, 0.1, 0.05],
                &[0.0; 3],
            )
            .unwrap_err();
        match err {
            AllocError::BoundaryHit { row, .. } => assert_eq!(row, 3),
            other => panic!("expected BoundaryHit, got {other:?}"),
        }
    }

    #[test]
    fn kkt_point_matches_full_bundle() {
        let (sys, obj, ts, pg, hover) = quadrotor_problem();
        let problem = AllocProblem {
            model: &sys,
            objective: &obj,
            timescale: &ts,
            predictor_gains: &pg,
            reference: &hover,
        };
        let x = [0.05, -0.1, 0.02, 0.0];
        let z = [0.03, -0.05];
        let u_bar = [0.45, 0.55, 0.2, 0.1];
        let lambda = [0.3, -0.2, 0.7];
        let full = problem
            .bundle(0.7, &x, &z, &x, &z, &[], &u_bar, &lambda)
            .unwrap();
        let kkt = problem
            .kkt_point(0.7, &x, &z, &x, &z, &[], &u_bar, &lambda)
            .unwrap();
        for (a, b) in full.kkt.foo().iter().zip(kkt.foo()) {
            assert!((a - b).abs() < 1e-13);
        }
        for i in 0..kkt.hessian.rows() {
            for j in 0..kkt.hessian.cols() {
                assert!((full.kkt.hessian[(i, j)] - kkt.hessian[(i, j)]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stationary_point_has_zero_rate() {
        let lay = ArgLayout {
            dim_chi: 6,
            w: 0,
            nu: 4,
            nc: 3,
        };
        let gamma = gamma_ul_matrix(50.0, 50.0, &lay);
        let kkt = KktPoint {
            value: 1.0,
            l_u: vec![0.0; 4],
            l_lambda: vec![0.0; 3],
            hessian: Mat::<f64>::identity(7),
        };
        let out = alloc_rate(&kkt, &gamma, &[0.0; 7], &RegularizationPolicy::default()).unwrap();
        assert!(out.u_bar_rate.iter().all(|v| *v == 0.0));
        assert!(out.lambda_rate.iter().all(|v| *v == 0.0));
        assert!(out.regularization.is_none());
    }

    #[test]
    fn singular_hessian_triggers_regularization() {
        let lay = ArgLayout {
            dim_chi: 6,
            w: 0,
            nu: 2,
            nc: 1,
        };
        let gamma = gamma_ul_matrix(1.0, 1.0, &lay);
        // Rank-deficient bordered matrix.
        let hessian = Mat::from_rows(&[
            &[1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]);
        let kkt = KktPoint {
            value: 0.0,
            l_u: vec![1.0, 1.0],
            l_lambda: vec![1.0],
            hessian,
        };
        let out = alloc_rate(&kkt, &gamma, &[0.0; 3], &RegularizationPolicy::default()).unwrap();
        assert!(out.regularization.is_some());
    }

    #[test]
    fn feed_forward_vanishes_when_nothing_moves() {
        let (sys, obj, ts, pg, hover) = quadrotor_problem();
        let problem = AllocProblem {
            model: &sys,
            objective: &obj,
            timescale: &ts,
            predictor_gains: &pg,
            reference: &hover,
        };
        let b = problem
            .bundle(
                0.0,
                &[0.0; 4],
                &[0.0; 2],
                &[0.0; 4],
                &[0.0; 2],
                &[],
                &[0.4, 0.5, 0.1, 0.05],
                &[0.1, -0.1, 0.2],
            )
            .unwrap();
        // Time-invariant reference: the explicit time derivative is zero.
        assert!(b.l_t.iter().all(|v| v.abs() < 1e-12));
        let ff = feed_forward(&b, &[0.0; 6], &[0.0; 6], &[]);
        assert!(ff.iter().all(|v| v.abs() < 1e-12));
    }
}

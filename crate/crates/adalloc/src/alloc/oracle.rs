//! Reference solver for the allocation problem: damped Newton on the KKT
//! system from multiple interior starts. This is diagnostic machinery — the
//! closed loop never calls it; tests use it as the independent answer the
//! allocation flow must agree with.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::highlevel::ReferenceModel;
use crate::numerics::{grad_hess, norm2, norm_inf, solve_linear, Dual2, Scalar};
use crate::system::{tau_hat, InputPolytope, SystemModel};

use super::{AllocError, AllocObjective, AllocProblem, AllocatorState, KktPoint};

/// A converged KKT point.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub u_bar: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Max-norm of the first-order-optimality vector at the solution.
    pub foo_norm: f64,
    /// Max-norm of the constraint violation alone.
    pub constraint_norm: f64,
    pub iterations: usize,
}

const ORACLE_TOL: f64 = 1e-11;
const MAX_NEWTON_ITERS: usize = 200;

/// Damped Newton on the stacked KKT residual with a fraction-to-boundary
/// rule keeping the input strictly inside the barrier domain.
fn newton_kkt<F>(
    eval: &F,
    poly: &InputPolytope,
    u0: &[f64],
    lambda0: &[f64],
) -> Option<OracleSolution>
where
    F: Fn(&[f64], &[f64]) -> Result<KktPoint, AllocError>,
{
    let nu = u0.len();
    let mut u = u0.to_vec();
    let mut lambda = lambda0.to_vec();
    let mut kkt = eval(&u, &lambda).ok()?;
    for iter in 0..MAX_NEWTON_ITERS {
        let foo = kkt.foo();
        let res = norm_inf(&foo);
        if res <= ORACLE_TOL {
            return Some(OracleSolution {
                u_bar: u,
                lambda,
                foo_norm: res,
                constraint_norm: norm_inf(&kkt.l_lambda),
                iterations: iter,
            });
        }
        let rhs: Vec<f64> = foo.iter().map(|v| -v).collect();
        let dir = match solve_linear(&kkt.hessian, &rhs) {
            Ok(d) => d,
            Err(_) => {
                // Levenberg fallback for a degenerate iterate.
                let mut shifted = kkt.hessian.clone();
                for i in 0..shifted.rows() {
                    shifted[(i, i)] += 1e-6;
                }
                solve_linear(&shifted, &rhs).ok()?
            }
        };

        // Largest step keeping every barrier slack at 99.5% shrink at most.
        let slacks = poly.margins(&u);
        let u_step: Vec<f64> = u.iter().zip(&dir[..nu]).map(|(a, d)| a + d).collect();
        let slacks_after = poly.margins(&u_step);
        let mut a_max: f64 = 1.0;
        for (s0, s1) in slacks.iter().zip(&slacks_after) {
            let decrease = s0 - s1; // row of C * du
            if decrease > 0.0 {
                a_max = a_max.min(0.995 * s0 / decrease);
            }
        }

        let base = norm2(&foo);
        let mut a = a_max.min(1.0);
        let mut accepted = false;
        for _ in 0..60 {
            let u_try: Vec<f64> = u.iter().zip(&dir[..nu]).map(|(x, d)| x + a * d).collect();
            let l_try: Vec<f64> = lambda
                .iter()
                .zip(&dir[nu..])
                .map(|(x, d)| x + a * d)
                .collect();
            if let Ok(k_try) = eval(&u_try, &l_try) {
                if norm2(&k_try.foo()) <= (1.0 - 1e-4 * a) * base {
                    u = u_try;
                    lambda = l_try;
                    kkt = k_try;
                    accepted = true;
                    break;
                }
            }
            a *= 0.5;
            if a < 1e-14 {
                break;
            }
        }
        if !accepted {
            return None;
        }
    }
    None
}

fn random_interior<R: Rng>(poly: &InputPolytope, rng: &mut R) -> Vec<f64> {
    poly.intervals()
        .expect("oracle needs a box polytope")
        .iter()
        .map(|&(lo, hi)| {
            let margin = 0.05 * (hi - lo);
            rng.gen_range(lo + margin..hi - margin)
        })
        .collect()
}

fn multi_start<F>(
    eval: &F,
    poly: &InputPolytope,
    first: AllocatorState,
    n_lambda: usize,
    seed: u64,
    starts: usize,
) -> Result<OracleSolution, AllocError>
where
    F: Fn(&[f64], &[f64]) -> Result<KktPoint, AllocError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for attempt in 0..starts {
        let (u0, l0) = if attempt == 0 {
            (first.u_bar.clone(), first.lambda.clone())
        } else {
            (random_interior(poly, &mut rng), vec![0.0; n_lambda])
        };
        if let Some(sol) = newton_kkt(eval, poly, &u0, &l0) {
            return Ok(sol);
        }
        if let Ok(k) = eval(&u0, &l0) {
            best = best.min(k.foo_norm());
        }
    }
    Err(AllocError::OracleFailure { starts, best })
}

/// Solve the allocation problem at frozen states from multiple interior
/// starts to a KKT residual below 1e-10.
#[allow(clippy::too_many_arguments)]
pub fn oracle_solve<M: SystemModel, R: ReferenceModel>(
    problem: &AllocProblem<'_, M, R>,
    t: f64,
    x: &[f64],
    z: &[f64],
    x_hat: &[f64],
    z_hat: &[f64],
    w_hat: &[f64],
    seed: u64,
) -> Result<OracleSolution, AllocError> {
    let dims = problem.model.dims();
    let refpt = problem.reference.eval(&dims, &t);
    let first = AllocatorState::interior_start(problem.model, &refpt.z1_r);
    let eval = |u: &[f64], l: &[f64]| problem.kkt_point(t, x, z, x_hat, z_hat, w_hat, u, l);
    multi_start(
        &eval,
        problem.model.augmented_polytope(),
        first,
        dims.n_tau(),
        seed,
        8,
    )
}

/// Single-start variant: refine from the supplied point only. Used by the
/// stationarity-equivalence checks.
#[allow(clippy::too_many_arguments)]
pub fn oracle_solve_from<M: SystemModel, R: ReferenceModel>(
    problem: &AllocProblem<'_, M, R>,
    t: f64,
    x: &[f64],
    z: &[f64],
    x_hat: &[f64],
    z_hat: &[f64],
    w_hat: &[f64],
    u_bar0: &[f64],
    lambda0: &[f64],
) -> Result<OracleSolution, AllocError> {
    let eval = |u: &[f64], l: &[f64]| problem.kkt_point(t, x, z, x_hat, z_hat, w_hat, u, l);
    newton_kkt(&eval, problem.model.augmented_polytope(), u_bar0, lambda0).ok_or(
        AllocError::OracleFailure {
            starts: 1,
            best: f64::NAN,
        },
    )
}

/// Reference solver for fixed-target allocation on the reduced model: find
/// an augmented input whose control function at the commanded fast
/// equilibrium matches `target_tau` exactly, minimizing the usual objective.
///
/// With `n_x` target rows this witnesses reduced-map surjectivity; with
/// `n_x + n_z` rows it allocates a full commanded output.
pub fn oracle_track_target<M: SystemModel>(
    model: &M,
    objective: &AllocObjective,
    x: &[f64],
    w_hat: &[f64],
    z1_pref: &[f64],
    target_tau: &[f64],
    seed: u64,
) -> Result<OracleSolution, AllocError> {
    let dims = model.dims();
    assert!(
        target_tau.len() == dims.n_x || target_tau.len() == dims.n_tau(),
        "target must have n_x or n_x + n_z rows"
    );
    let n_rows = target_tau.len();
    let nu = dims.dim_u_bar();
    let poly = model.augmented_polytope();

    let eval = |u_bar: &[f64], lambda: &[f64]| -> Result<KktPoint, AllocError> {
        for (row, s) in poly.margins(u_bar).iter().enumerate() {
            if *s <= 0.0 {
                return Err(AllocError::BoundaryHit { row, slack: *s });
            }
        }
        let mut point = u_bar.to_vec();
        point.extend_from_slice(lambda);
        let x_c: Vec<Dual2> = x.iter().map(|&v| Dual2::constant(v)).collect();
        let w_c: Vec<Dual2> = w_hat.iter().map(|&v| Dual2::constant(v)).collect();
        let (value, grad, hessian) = grad_hess(
            |v: &[Dual2]| {
                let (u_bar_s, lambda_s) = v.split_at(nu);
                let (u, vartheta) = u_bar_s.split_at(dims.m);
                let mut z_cmd = vec![Dual2::constant(0.0); dims.dim_z()];
                z_cmd[..dims.n_z].clone_from_slice(vartheta);
                let tau = tau_hat(model, &x_c, &z_cmd, u, &w_c)?;
                let mut j = Dual2::constant(0.0);
                for i in 0..dims.m {
                    for k in 0..dims.m {
                        let qik = objective.q[(i, k)];
                        if qik != 0.0 {
                            j += Dual2::constant(0.5 * qik) * u[i].clone() * u[k].clone();
                        }
                    }
                }
                for (v, pref) in vartheta.iter().zip(z1_pref) {
                    let dev = v.clone() - Dual2::constant(*pref);
                    j += Dual2::constant(objective.alpha) * dev.clone() * dev;
                }
                for slack in poly.margins(u_bar_s) {
                    j -= Dual2::constant(objective.beta) * slack.ln()?;
                }
                for (i, l) in lambda_s.iter().enumerate() {
                    j += l.clone() * (tau[i].clone() - Dual2::constant(target_tau[i]));
                }
                Ok(j)
            },
            &point,
        )?;
        Ok(KktPoint {
            value,
            l_u: grad[..nu].to_vec(),
            l_lambda: grad[nu..].to_vec(),
            hessian,
        })
    };

    let first = AllocatorState {
        u_bar: poly.box_midpoint(),
        lambda: vec![0.0; n_rows],
    };
    multi_start(&eval, poly, first, n_rows, seed, 8)
}

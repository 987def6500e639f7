//! Closed-loop scenario assembly: plant, predictors, high-level laws, and
//! the allocation flow integrated on one time grid, plus the epsilon-sweep
//! experiment and CSV export.

mod config;
mod log;
mod reference;

pub use config::{
    ControlMode, DisturbanceConfig, DisturbanceKind, FidelityConfig, GainsConfig, InitialOffset,
    PlantKind, ScenarioConfig,
};
pub use log::{export_csv, parse_csv, LogRow, RunLog};
pub use reference::{LandingReference, SetpointReference};

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::alloc::{
    alloc_rate, feed_forward, gamma_ul_matrix, known_drift, AllocObjective, AllocProblem,
    AllocatorState, RegularizationPolicy,
};
use crate::highlevel::{build_timescale, pi_x, pi_z, ReferenceModel};
use crate::numerics::{norm2, Integrator, Scheme};
use crate::plants::{QuadplaneSystem, QuadrotorSystem};
use crate::predictor::{
    predictor_rate, w_update_rate, AdaptationGains, PredictorGains, PredictorState,
};
use crate::system::{split_tau, tau_true, SystemModel};

/// Tracking error (m) beyond which a run is declared diverged.
pub const DIVERGENCE_ERROR_LIMIT: f64 = 10.0;
/// Transient window excluded from the maximum-tracking-error metric (s).
pub const METRIC_TRANSIENT: f64 = 2.0;

#[derive(Debug, Clone, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Summary numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `sup_{t >= 2s} |p(t) - p_r(t)|`; infinite when the run diverged.
    pub max_tracking_error: f64,
    pub diverged: bool,
    /// What ended the run early, when something did.
    pub end_reason: Option<String>,
    pub final_w_tilde_norm: f64,
    /// RMS of `|e_s|` over the last fifth of the run.
    pub steady_e_s_norm: f64,
    /// Steps on which the parameter estimate had to be clamped back into
    /// its box (should stay zero).
    pub w_clamp_events: usize,
    /// Steps on which the bordered-Hessian solve needed regularization.
    pub reg_events: usize,
    /// Steps on which the allocator update had to be shortened to keep the
    /// augmented input strictly inside the barrier domain.
    pub step_limit_events: usize,
}

struct StepDiag {
    foo_u_norm: f64,
    foo_lambda_norm: f64,
    slacks: Vec<f64>,
    reg_mu: f64,
}

struct PackedLayout {
    dim_x: usize,
    dim_z: usize,
    w: usize,
    nu: usize,
    nc: usize,
}

impl PackedLayout {
    fn total(&self) -> usize {
        2 * (self.dim_x + self.dim_z) + self.w + self.nu + self.nc
    }

    fn split<'a>(
        &self,
        s: &'a [f64],
    ) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
        let (x, rest) = s.split_at(self.dim_x);
        let (z, rest) = rest.split_at(self.dim_z);
        let (x_hat, rest) = rest.split_at(self.dim_x);
        let (z_hat, rest) = rest.split_at(self.dim_z);
        let (w, rest) = rest.split_at(self.w);
        let (u_bar, lambda) = rest.split_at(self.nu);
        (x, z, x_hat, z_hat, w, u_bar, lambda)
    }
}

/// Run one closed-loop scenario. Dynamic failures (barrier exit, singular
/// solves, non-finite states, runaway error) terminate the run early and are
/// reported through `Metrics`, never as an `Err`.
pub fn run_scenario(config: &ScenarioConfig) -> Result<(RunLog, Metrics), ScenarioError> {
    config.validate().map_err(ScenarioError::Config)?;
    match config.plant {
        PlantKind::Quadplane => {
            let params = config.quadplane_params.clone().unwrap_or_default();
            let model = QuadplaneSystem::new(params, config.fidelity.into());
            let reference = LandingReference::default();
            simulate(&model, &reference, config, PlantKind::Quadplane)
        }
        PlantKind::Quadrotor => {
            let model = QuadrotorSystem::new();
            let reference = SetpointReference::origin(2);
            simulate(&model, &reference, config, PlantKind::Quadrotor)
        }
    }
}

/// Closed loop over an arbitrary model/reference pair (the entry point the
/// stock plants funnel into; public so tests can swap references).
pub fn simulate<M: SystemModel, R: ReferenceModel>(
    model: &M,
    reference: &R,
    config: &ScenarioConfig,
    kind: PlantKind,
) -> Result<(RunLog, Metrics), ScenarioError> {
    let dims = model.dims();
    let cf = model.canonical();
    let ts = build_timescale(&config.gains.k_rx, config.epsilon, &dims)
        .map_err(ScenarioError::Config)?;
    let pg = PredictorGains::new(&config.gains.k_sx, &config.gains.k_sz, &dims);
    if !pg.is_hurwitz() {
        return Err(ScenarioError::Config(
            "predictor gains must make the error dynamics Hurwitz".into(),
        ));
    }
    let adaptation =
        AdaptationGains::scaled_identity(config.gains.gamma_w, config.gains.gamma_e, &dims);
    let objective =
        AllocObjective::diagonal(&config.gains.q, config.gains.alpha, config.gains.beta);
    let problem = AllocProblem {
        model,
        objective: &objective,
        timescale: &ts,
        predictor_gains: &pg,
        reference,
    };
    let gamma = gamma_ul_matrix(
        config.gains.gamma_u,
        config.gains.gamma_lambda,
        &problem.layout(),
    );
    let policy = RegularizationPolicy::default();

    // Reference-consistent initial state plus the configured offsets.
    let ref0 = reference.eval(&dims, &0.0);
    let off = &config.initial_offset;
    let mut x0 = ref0.x_r.clone();
    if dims.n_x == 2 {
        x0[0] += off.px;
        x0[1] += off.pz;
        x0[2] += off.vx;
        x0[3] += off.vz;
    }
    let mut z0 = vec![0.0; dims.dim_z()];
    z0[..dims.n_z].copy_from_slice(&ref0.z1_r);
    z0[0] += off.theta;
    if dims.d > 1 {
        z0[dims.n_z] += off.omega;
    }

    let w_true = model.true_params().to_vec();
    let mut w_hat0: Vec<f64> = w_true
        .iter()
        .map(|w| w * config.initial_parameter_scale)
        .collect();
    model.param_box().clamp(&mut w_hat0);
    let pred0 = PredictorState::on_measurement(&x0, &z0, w_hat0);
    let alloc0 = AllocatorState::interior_start(model, &ref0.z1_r);

    let lay = PackedLayout {
        dim_x: dims.dim_x(),
        dim_z: dims.dim_z(),
        w: dims.w,
        nu: dims.dim_u_bar(),
        nc: dims.n_tau(),
    };
    let mut state = Vec::with_capacity(lay.total());
    state.extend_from_slice(&x0);
    state.extend_from_slice(&z0);
    state.extend_from_slice(&pred0.x_hat);
    state.extend_from_slice(&pred0.z_hat);
    state.extend_from_slice(&pred0.w_hat);
    state.extend_from_slice(&alloc0.u_bar);
    state.extend_from_slice(&alloc0.lambda);

    // Coupled rate field for the whole closed loop. Returns the packed rate
    // plus the per-step diagnostics of the base-point evaluation.
    let coupled = |t: f64, s: &[f64]| -> Result<(Vec<f64>, StepDiag), String> {
        let (x, z, x_hat, z_hat, w_hat, u_bar, lambda) = lay.split(s);
        let u = &u_bar[..dims.m];
        let pred = PredictorState {
            x_hat: x_hat.to_vec(),
            z_hat: z_hat.to_vec(),
            w_hat: w_hat.to_vec(),
        };
        let e_s = pred.e_s(x, z);

        let (w_dot, u_bar_rate, lambda_rate, chi_hat_rate, diag) = match config.control_mode {
            ControlMode::Allocated => {
                let bundle = problem
                    .bundle(t, x, z, x_hat, z_hat, w_hat, u_bar, lambda)
                    .map_err(|e| e.to_string())?;
                let phi = model.regressor(x, z, u).map_err(|e| e.to_string())?;
                let w_dot = w_update_rate(
                    &phi,
                    &cf.b_chi,
                    &e_s,
                    &bundle.kkt.foo(),
                    &bundle.l_chi,
                    &adaptation,
                    w_hat,
                    model.param_box(),
                );
                let (xh_dot, zh_dot) = predictor_rate(model, &pg, x, z, u, &pred)
                    .map_err(|e| e.to_string())?;
                let mut chi_hat_rate = xh_dot;
                chi_hat_rate.extend(zh_dot);
                let drift = known_drift(model, x, z, u, w_hat).map_err(|e| e.to_string())?;
                let u_ff = feed_forward(&bundle, &drift, &chi_hat_rate, &w_dot);
                let flow = alloc_rate(&bundle.kkt, &gamma, &u_ff, &policy)
                    .map_err(|e| e.to_string())?;
                let diag = StepDiag {
                    foo_u_norm: norm2(&bundle.kkt.l_u),
                    foo_lambda_norm: norm2(&bundle.kkt.l_lambda),
                    slacks: model.augmented_polytope().margins(u_bar),
                    reg_mu: flow.regularization.unwrap_or(0.0),
                };
                (w_dot, flow.u_bar_rate, flow.lambda_rate, chi_hat_rate, diag)
            }
            ControlMode::IdealTau => {
                let (xh_dot, zh_dot) = predictor_rate(model, &pg, x, z, u, &pred)
                    .map_err(|e| e.to_string())?;
                let mut chi_hat_rate = xh_dot;
                chi_hat_rate.extend(zh_dot);
                let diag = StepDiag {
                    foo_u_norm: 0.0,
                    foo_lambda_norm: 0.0,
                    slacks: model.augmented_polytope().margins(u_bar),
                    reg_mu: 0.0,
                };
                (
                    vec![0.0; dims.w],
                    vec![0.0; lay.nu],
                    vec![0.0; lay.nc],
                    chi_hat_rate,
                    diag,
                )
            }
        };

        // Plant side: true tau plus any injected disturbance.
        let refpt = reference.eval(&dims, &t);
        let mut tau = match config.control_mode {
            ControlMode::Allocated => tau_true(model, x, z, u).map_err(|e| e.to_string())?,
            ControlMode::IdealTau => {
                // Exact allocation: the commanded tau is realized directly.
                let mut v = pi_x(
                    &refpt.r,
                    &refpt.x_r,
                    x,
                    x_hat,
                    &pg.k_sx,
                    &ts.k_rx,
                    dims.n_x,
                );
                v.extend(pi_z(
                    z,
                    z_hat,
                    &refpt.z1_r,
                    &pg.k_sz,
                    &ts.k_rz,
                    dims.n_z,
                ));
                v
            }
        };
        for (ti, di) in tau
            .iter_mut()
            .zip(config.disturbance.eval(t, dims.n_tau()))
        {
            *ti += di;
        }
        let (tau_x, tau_z) = split_tau(&dims, &tau);
        let mut x_dot = cf.a_x.matvec(x);
        for (r, f) in x_dot.iter_mut().zip(cf.b_x.matvec(tau_x)) {
            *r += f;
        }
        let mut z_dot = cf.a_z.matvec(z);
        for (r, f) in z_dot.iter_mut().zip(cf.b_z.matvec(tau_z)) {
            *r += f;
        }

        let mut rate = Vec::with_capacity(lay.total());
        rate.extend(x_dot);
        rate.extend(z_dot);
        rate.extend(chi_hat_rate);
        rate.extend(w_dot);
        rate.extend(u_bar_rate);
        rate.extend(lambda_rate);
        Ok((rate, diag))
    };

    let integrator = Integrator::new(config.scheme, config.dt);
    let n_steps = (config.duration / config.dt).round() as usize;
    let mut log = RunLog::new(kind);
    let mut diverged = false;
    let mut end_reason = None;
    let mut w_clamp_events = 0usize;
    let mut reg_events = 0usize;
    let mut step_limit_events = 0usize;

    for k in 0..n_steps {
        let t = k as f64 * config.dt;
        let (rate, diag) = match coupled(t, &state) {
            Ok(v) => v,
            Err(reason) => {
                diverged = true;
                end_reason = Some(format!("t = {t:.3}: {reason}"));
                break;
            }
        };
        if diag.reg_mu > 0.0 {
            reg_events += 1;
        }

        // Log the base point of this step.
        {
            let (x, z, x_hat, z_hat, w_hat, u_bar, lambda) = lay.split(&state);
            let refpt = reference.eval(&dims, &t);
            let pred = PredictorState {
                x_hat: x_hat.to_vec(),
                z_hat: z_hat.to_vec(),
                w_hat: w_hat.to_vec(),
            };
            log.rows.push(LogRow {
                t,
                x: x.to_vec(),
                z: z.to_vec(),
                x_hat: x_hat.to_vec(),
                z_hat: z_hat.to_vec(),
                x_r: refpt.x_r.clone(),
                u_bar: u_bar.to_vec(),
                lambda: lambda.to_vec(),
                w_hat: w_hat.to_vec(),
                w_tilde: w_true.iter().zip(w_hat).map(|(a, b)| a - b).collect(),
                e_s: pred.e_s(x, z),
                foo_u_norm: diag.foo_u_norm,
                foo_lambda_norm: diag.foo_lambda_norm,
                slacks: diag.slacks,
                reg_mu: diag.reg_mu,
            });
        }

        // Advance. Forward Euler reuses the rate already computed; RK4
        // re-evaluates the coupled field at its stage points.
        let mut next = match config.scheme {
            Scheme::ForwardEuler => state
                .iter()
                .zip(&rate)
                .map(|(s, r)| s + config.dt * r)
                .collect::<Vec<f64>>(),
            Scheme::Rk4 => {
                let stage_fault = std::cell::RefCell::new(None);
                let deriv = |tt: f64, ss: &[f64]| match coupled(tt, ss) {
                    Ok((r, _)) => r,
                    Err(reason) => {
                        *stage_fault.borrow_mut() = Some(reason);
                        vec![f64::NAN; ss.len()]
                    }
                };
                match integrator.step(deriv, &state, t) {
                    Ok(next) => next,
                    Err(e) => {
                        diverged = true;
                        let detail = stage_fault.borrow().clone().unwrap_or_else(|| e.to_string());
                        end_reason = Some(format!("t = {t:.3}: {detail}"));
                        break;
                    }
                }
            }
        };
        // Fraction-to-boundary rule on the allocator block: a discrete step
        // must not cross the barrier even when the continuous flow would
        // curve away from it. Plant and predictor blocks stay untouched.
        let ub_off = 2 * (lay.dim_x + lay.dim_z) + lay.w;
        {
            let u_old = &state[ub_off..ub_off + lay.nu];
            let u_new = &next[ub_off..ub_off + lay.nu];
            let slacks_old = model.augmented_polytope().margins(u_old);
            let slacks_new = model.augmented_polytope().margins(u_new);
            let mut frac: f64 = 1.0;
            for (s0, s1) in slacks_old.iter().zip(&slacks_new) {
                let decrease = s0 - s1;
                if decrease > 0.0 && *s1 < 0.05 * s0 {
                    frac = frac.min(0.95 * s0 / decrease);
                }
            }
            if frac < 1.0 {
                step_limit_events += 1;
                for i in ub_off..lay.total() {
                    next[i] = state[i] + frac * (next[i] - state[i]);
                }
            }
        }
        state = next;

        // Keep angles wrapped and the estimate inside its box.
        for i in 0..dims.n_z {
            let th = &mut state[lay.dim_x + i];
            if th.abs() > std::f64::consts::PI {
                *th -= 2.0 * std::f64::consts::PI * (*th / (2.0 * std::f64::consts::PI)).round();
            }
        }
        if dims.w > 0 {
            let w_off = 2 * (lay.dim_x + lay.dim_z);
            let w_slice = &mut state[w_off..w_off + dims.w];
            let w_box = model.param_box();
            let mut clamped = false;
            for (wi, (lo, hi)) in w_slice.iter_mut().zip(w_box.lo.iter().zip(&w_box.hi)) {
                if *wi < lo - 1e-12 || *wi > hi + 1e-12 {
                    clamped = true;
                }
                *wi = wi.clamp(*lo, *hi);
            }
            if clamped {
                w_clamp_events += 1;
            }
        }

        // Divergence checks on the new state.
        if state.iter().any(|v| !v.is_finite()) {
            diverged = true;
            end_reason = Some(format!("t = {t:.3}: non-finite state"));
            break;
        }
        let refpt = reference.eval(&dims, &(t + config.dt));
        let (x, ..) = lay.split(&state);
        let err = position_error(x, &refpt.x_r, dims.n_x);
        if err > DIVERGENCE_ERROR_LIMIT {
            diverged = true;
            end_reason = Some(format!("t = {:.3}: tracking error {err:.2} m", t + config.dt));
            break;
        }
    }

    let mut metrics = compute_metrics(&log, dims.n_x, config.duration);
    metrics.diverged |= diverged;
    metrics.end_reason = end_reason;
    metrics.w_clamp_events = w_clamp_events;
    metrics.reg_events = reg_events;
    metrics.step_limit_events = step_limit_events;
    if metrics.diverged {
        metrics.max_tracking_error = f64::INFINITY;
    }
    Ok((log, metrics))
}

fn position_error(x: &[f64], x_r: &[f64], n_x: usize) -> f64 {
    x.iter()
        .zip(x_r)
        .take(n_x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Metrics from a completed (or truncated) log.
pub fn compute_metrics(log: &RunLog, n_x: usize, duration: f64) -> Metrics {
    let mut max_err: f64 = 0.0;
    for row in &log.rows {
        if row.t >= METRIC_TRANSIENT {
            max_err = max_err.max(position_error(&row.x, &row.x_r, n_x));
        }
    }
    let final_w_tilde_norm = log.rows.last().map_or(0.0, |r| norm2(&r.w_tilde));
    let steady_start = 0.8 * duration;
    let tail: Vec<f64> = log
        .rows
        .iter()
        .filter(|r| r.t >= steady_start)
        .map(|r| norm2(&r.e_s))
        .collect();
    let steady_e_s_norm = if tail.is_empty() {
        f64::NAN
    } else {
        (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt()
    };
    Metrics {
        max_tracking_error: max_err,
        diverged: false,
        end_reason: None,
        final_w_tilde_norm,
        steady_e_s_norm,
        w_clamp_events: 0,
        reg_events: 0,
        step_limit_events: 0,
    }
}

/// One sweep row: the epsilon used and the run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub metrics: Metrics,
}

/// Run the landing scenario once per epsilon (descending order required),
/// each with a 1 m initial vertical error. Runs execute concurrently; rows
/// come back in input order and one divergence never aborts the sweep.
pub fn eps_sweep(config: &ScenarioConfig, eps_list: &[f64]) -> Result<Vec<SweepRow>, ScenarioError> {
    if eps_list.is_empty() {
        return Err(ScenarioError::Config("empty epsilon list".into()));
    }
    if eps_list.windows(2).any(|w| w[0] <= w[1]) {
        return Err(ScenarioError::Config(
            "epsilon list must be strictly descending".into(),
        ));
    }
    eps_list
        .par_iter()
        .map(|&eps| {
            let mut c = config.clone();
            c.epsilon = eps;
            c.initial_offset.pz = -1.0;
            let (_log, metrics) = run_scenario(&c)?;
            Ok(SweepRow {
                epsilon: eps,
                metrics,
            })
        })
        .collect()
}

/// Write the sweep table as CSV.
pub fn export_metrics(rows: &[SweepRow], path: &Path) -> Result<(), String> {
    let mut out = String::from(
        "eps,max_tracking_error,diverged,final_wtilde_norm,steady_es_norm,reg_events\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e},{:.16e},{}\n",
            r.epsilon,
            r.metrics.max_tracking_error,
            r.metrics.diverged,
            r.metrics.final_w_tilde_norm,
            r.metrics.steady_e_s_norm,
            r.metrics.reg_events,
        ));
    }
    std::fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_rejects_non_descending_lists() {
        let c = ScenarioConfig::default();
        assert!(eps_sweep(&c, &[0.2, 0.25]).is_err());
        assert!(eps_sweep(&c, &[]).is_err());
    }

    #[test]
    fn quadrotor_hover_runs_clean() {
        let mut c = ScenarioConfig::default_quadrotor();
        c.duration = 2.0;
        let (log, metrics) = run_scenario(&c).unwrap();
        assert!(!metrics.diverged, "end: {:?}", metrics.end_reason);
        assert_eq!(log.rows.len(), 200);
        // Hover stays near the origin.
        assert!(metrics.max_tracking_error < 1.0);
    }
}

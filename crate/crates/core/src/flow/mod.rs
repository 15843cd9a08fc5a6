//! Adaptive RK8(7) propagation over floats or Taylor polynomials, and Picard
//! expansion of the flow in time.

mod tableau;

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::{DaError, Scalar, TaylorPoly};

pub use tableau::{A as RK87_A, B7 as RK87_B7, B8 as RK87_B8, C as RK87_C};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("step size {h:e} fell below the minimum {h_min:e} at t = {t}")]
    StepUnderflow { t: f64, h: f64, h_min: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("state has {got} components, system expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid time span [{t0}, {tf}]")]
    TimeSpan { t0: f64, tf: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error(transparent)]
    Da(#[from] DaError),
    #[error("dynamics: {0}")]
    Model(String),
}

/// Autonomous-or-not ODE `ẋ = f(t, x)` with the controller already embedded.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;
    fn rhs<S: Scalar>(&self, t: &S, x: &[S]) -> Result<Vec<S>, FlowError>;
}

/// Which part of a polynomial state the local error estimate looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorControl {
    /// Zero-order coefficients only, so the step sequence tracks the
    /// reference trajectory.
    #[default]
    Constant,
    /// Largest coefficient of each component.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Defaults to `1e-14·(tf - t0)` when absent.
    pub h_min: Option<f64>,
    pub h_max: Option<f64>,
    pub safety: f64,
    pub error_control: ErrorControl,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            h_min: None,
            h_max: None,
            safety: 0.9,
            error_control: ErrorControl::Constant,
            max_steps: 1_000_000,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.abs_tol > 0.0 && self.rel_tol >= 0.0) {
            return Err("tolerances must be positive".into());
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err("safety factor must lie in (0, 1]".into());
        }
        if let (Some(lo), Some(hi)) = (self.h_min, self.h_max) {
            if !(lo > 0.0 && lo <= hi) {
                return Err("need 0 < h_min <= h_max".into());
            }
        }
        Ok(())
    }
}

/// What the monitor asks the integrator to do after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub h: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub t: f64,
    pub state: Vec<S>,
    pub log: Vec<StepRecord>,
    pub accepted: usize,
    pub rejected: usize,
    /// The monitor requested a stop before `tf`.
    pub stopped: bool,
}

fn axpy<S: Scalar>(base: &[S], h: f64, weights: &[f64], k: &[Vec<S>]) -> Vec<S> {
    base.iter()
        .enumerate()
        .map(|(i, b)| {
            let mut acc = b.clone();
            for (w, kj) in weights.iter().zip(k) {
                if *w != 0.0 {
                    acc = acc + kj[i].clone() * (h * w);
                }
            }
            acc
        })
        .collect()
}

/// One RK8(7) step: returns the 8th-order solution and the difference to the
/// embedded 7th-order one.
fn rk87_step<Sys: OdeSystem, S: Scalar>(sys: &Sys, t: f64, y: &[S], h: f64) -> Result<(Vec<S>, Vec<S>), FlowError> {
    let mut k: Vec<Vec<S>> = Vec::with_capacity(13);
    let t0 = y[0].lift(t);
    k.push(sys.rhs(&t0, y)?);
    for s in 1..13 {
        let ys = axpy(y, h, &RK87_A[s][..s], &k[..s]);
        let ts = y[0].lift(t + RK87_C[s] * h);
        k.push(sys.rhs(&ts, &ys)?);
    }
    let y8 = axpy(y, h, &RK87_B8, &k);
    let diff: Vec<f64> = RK87_B8.iter().zip(&RK87_B7).map(|(a, b)| a - b).collect();
    let zero: Vec<S> = y.iter().map(|v| v.lift(0.0)).collect();
    let err = axpy(&zero, h, &diff, &k);
    Ok((y8, err))
}

/// Integrates from `t0` to `tf` (forward only) with adaptive step control.
///
/// `monitor` runs after every accepted step and may stop the integration.
/// With polynomial inputs the result is the Taylor expansion of the flow with
/// respect to whatever the inputs depend on.
pub fn propagate<Sys, S, F>(
    sys: &Sys,
    x0: &[S],
    t0: f64,
    tf: f64,
    ctrl: &StepControl,
    mut monitor: F,
) -> Result<Trajectory<S>, FlowError>
where
    Sys: OdeSystem,
    S: Scalar,
    F: FnMut(f64, &[S]) -> StepAction,
{
    if x0.len() != sys.dim() {
        return Err(FlowError::Dimension { expected: sys.dim(), got: x0.len() });
    }
    if !(tf > t0) || !t0.is_finite() || !tf.is_finite() {
        return Err(FlowError::TimeSpan { t0, tf });
    }
    let span = tf - t0;
    let h_min = ctrl.h_min.unwrap_or(1e-14 * span);
    let h_max = ctrl.h_max.unwrap_or(span);
    let full = ctrl.error_control == ErrorControl::Full;

    let mut t = t0;
    let mut y = x0.to_vec();
    let mut h = (0.01 * span).min(h_max);
    let mut log = Vec::new();
    let (mut accepted, mut rejected) = (0usize, 0usize);

    while t < tf {
        if accepted + rejected >= ctrl.max_steps {
            return Err(FlowError::TooManySteps(ctrl.max_steps));
        }
        let last = t + h >= tf;
        let step = if last { tf - t } else { h };
        let (ynew, err) = rk87_step(sys, t, &y, step)?;

        let mut err_norm: f64 = 0.0;
        for i in 0..y.len() {
            let scale = ctrl.abs_tol + ctrl.rel_tol * y[i].magnitude(full).max(ynew[i].magnitude(full));
            err_norm = err_norm.max(err[i].magnitude(full) / scale);
        }
        if !err_norm.is_finite() {
            // force a rejection with a strong reduction
            err_norm = 1e10;
        }

        if err_norm <= 1.0 {
            if ynew.iter().any(|v| !v.is_finite()) {
                return Err(FlowError::NonFinite { t: t + step });
            }
            t = if last { tf } else { t + step };
            y = ynew;
            accepted += 1;
            log.push(StepRecord { t, h: step, state: y.iter().map(|v| v.constant()).collect() });
            if monitor(t, &y) == StepAction::Stop {
                return Ok(Trajectory { t, state: y, log, accepted, rejected, stopped: true });
            }
        } else {
            rejected += 1;
        }
        let factor = if err_norm == 0.0 { 5.0 } else { (ctrl.safety * err_norm.powf(-1.0 / 8.0)).clamp(0.2, 5.0) };
        // a clipped final step must not inflate the proposal for the next one
        let basis = if last && err_norm <= 1.0 { h.max(step) } else { step };
        h = (basis * factor).min(h_max);
        if h < h_min && t < tf {
            return Err(FlowError::StepUnderflow { t, h, h_min });
        }
    }
    Ok(Trajectory { t, state: y, log, accepted, rejected, stopped: false })
}

/// Propagation without a monitor.
pub fn propagate_to<Sys: OdeSystem, S: Scalar>(
    sys: &Sys,
    x0: &[S],
    t0: f64,
    tf: f64,
    ctrl: &StepControl,
) -> Result<Trajectory<S>, FlowError> {
    propagate(sys, x0, t0, tf, ctrl, |_, _| StepAction::Continue)
}

/// Expands the flow through `x_e` at time `t_bar` in powers of the time
/// variable `time_var` by `k` Picard iterations
/// `x ← x_e + ∫₀^δt f(t̄ + τ, x(τ)) dτ`, seeded with `x_e`.
///
/// After `k` iterations the result is the exact order-`k` expansion in `δt`.
pub fn picard_expand<Sys: OdeSystem>(
    sys: &Sys,
    x_e: &[TaylorPoly],
    t_bar: f64,
    time_var: usize,
    k: usize,
) -> Result<Vec<TaylorPoly>, FlowError> {
    if x_e.len() != sys.dim() {
        return Err(FlowError::Dimension { expected: sys.dim(), got: x_e.len() });
    }
    let space = x_e[0].space().clone();
    let t = TaylorPoly::variable_in(&space, time_var, t_bar)?;
    let mut x = x_e.to_vec();
    for _ in 0..k {
        let f = sys.rhs(&t, &x)?;
        x = x_e
            .iter()
            .zip(&f)
            .map(|(base, fi)| Ok(base + &fi.antiderivative(time_var)?))
            .collect::<Result<Vec<_>, DaError>>()?;
        if x.iter().any(|p| !p.is_finite()) {
            return Err(FlowError::NonFinite { t: t_bar });
        }
    }
    Ok(x)
}

/// Writes the step log as CSV: `t,h,x0,x1,...`.
pub fn write_step_log_csv<W: Write>(log: &[StepRecord], mut out: W) -> std::io::Result<()> {
    let dim = log.first().map_or(0, |r| r.state.len());
    write!(out, "t,h")?;
    for i in 0..dim {
        write!(out, ",x{i}")?;
    }
    writeln!(out)?;
    for r in log {
        write!(out, "{:e},{:e}", r.t, r.h)?;
        for v in &r.state {
            write!(out, ",{v:e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

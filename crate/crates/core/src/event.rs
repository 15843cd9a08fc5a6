//! Event detection along a trajectory, refinement of the event time by
//! polynomial inversion, and event maps from initial-state deviations to the
//! state and time on the event manifold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::{invert_matrix, space, DaError, DaSpace, Scalar, TaylorMap, TaylorPoly};
use crate::flow::{picard_expand, propagate, propagate_to, FlowError, OdeSystem, StepAction, StepControl};
use std::sync::Arc;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Da(#[from] DaError),
    #[error("event condition is flat in time (slope {slope:e}, scale {scale:e})")]
    NonInvertible { slope: f64, scale: f64 },
    #[error("stationary point is not a minimum (curvature {curvature:e})")]
    Degenerate { curvature: f64 },
    #[error("event time did not settle after {iterations} refinements (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("no event before t = {0}")]
    NotDetected(f64),
}

/// Scalar event function `ℰ(t, x)` and its time derivative along the flow.
pub trait EventFunction: Sync {
    fn value<S: Scalar>(&self, t: &S, x: &[S]) -> Result<S, FlowError>;
    /// `dℰ/dt` given `ẋ`.
    fn rate<S: Scalar>(&self, t: &S, x: &[S], xdot: &[S]) -> Result<S, FlowError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventMode {
    /// Smallest `ℰ` along the trajectory; refined on `dℰ/dt = 0`.
    Minimum,
    /// First sign change of `ℰ - threshold`.
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub mode: EventMode,
    #[serde(default)]
    pub threshold: f64,
    #[serde(default = "yes")]
    pub terminal: bool,
}

fn yes() -> bool {
    true
}

impl EventSpec {
    pub fn minimum() -> Self {
        EventSpec { mode: EventMode::Minimum, threshold: 0.0, terminal: false }
    }

    pub fn crossing(threshold: f64) -> Self {
        EventSpec { mode: EventMode::Crossing, threshold, terminal: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub refined: bool,
}

/// The scalar whose root defines the event: `ℰ - threshold`, or `dℰ/dt` for
/// minimum tracking.
pub fn event_condition<Sys, E, S>(sys: &Sys, ev: &E, spec: &EventSpec, t: &S, x: &[S]) -> Result<S, FlowError>
where
    Sys: OdeSystem,
    E: EventFunction,
    S: Scalar,
{
    match spec.mode {
        EventMode::Crossing => Ok(ev.value(t, x)? - spec.threshold),
        EventMode::Minimum => {
            let xdot = sys.rhs(t, x)?;
            ev.rate(t, x, &xdot)
        }
    }
}

/// Watches `ℰ` after every accepted step.
///
/// Minimum mode brackets stationary points by a sign change of `dℰ/dt` from
/// negative to non-negative between step ends and keeps the bracket with the
/// lowest sampled `ℰ`, seeded at its lower end. A minimum at either end of
/// the time span is not a stationary point: when `ℰ` is lower there than in
/// every bracket the result is `None`. Crossing mode records the first step
/// at which `ℰ - threshold` has changed sign.
pub fn detect<Sys, E>(
    sys: &Sys,
    ev: &E,
    spec: &EventSpec,
    x0: &[f64],
    t0: f64,
    t_max: f64,
    ctrl: &StepControl,
) -> Result<Option<EventRecord>, EventError>
where
    Sys: OdeSystem,
    E: EventFunction,
{
    let rate = |t: f64, x: &[f64]| -> Result<f64, FlowError> { ev.rate(&t, x, &sys.rhs(&t, x)?) };
    let first = ev.value(&t0, x0)?;
    let first_rate = if spec.mode == EventMode::Minimum { rate(t0, x0)? } else { 0.0 };
    // lowest value at a span end that is a one-sided minimum there
    let mut boundary = if first_rate >= 0.0 { first } else { f64::INFINITY };
    let mut prev = (EventRecord { t: t0, state: x0.to_vec(), refined: false }, first, first_rate);
    let mut best: Option<(EventRecord, f64)> = None;
    let mut found = false;
    let mut failure = None;
    let sign0 = first - spec.threshold;

    let traj = propagate(sys, x0, t0, t_max, ctrl, |t, x| {
        let v = match ev.value(&t, x) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                return StepAction::Stop;
            }
        };
        match spec.mode {
            EventMode::Minimum => {
                let r = match rate(t, x) {
                    Ok(r) => r,
                    Err(e) => {
                        failure = Some(e);
                        return StepAction::Stop;
                    }
                };
                let here = EventRecord { t, state: x.to_vec(), refined: false };
                if prev.2 < 0.0 && r >= 0.0 {
                    let (seed, low) = if v <= prev.1 { (here.clone(), v) } else { (prev.0.clone(), prev.1) };
                    if best.as_ref().is_none_or(|(_, b)| low < *b) {
                        best = Some((seed, low));
                    }
                }
                prev = (here, v, r);
                StepAction::Continue
            }
            EventMode::Crossing => {
                let g = v - spec.threshold;
                if !found && (g == 0.0 || g.signum() != sign0.signum()) {
                    found = true;
                    best = Some((EventRecord { t, state: x.to_vec(), refined: false }, v));
                    if spec.terminal {
                        return StepAction::Stop;
                    }
                }
                StepAction::Continue
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(match spec.mode {
        EventMode::Minimum => {
            if !traj.stopped && prev.2 < 0.0 {
                boundary = boundary.min(prev.1);
            }
            best.filter(|(_, low)| *low <= boundary).map(|(r, _)| r)
        }
        EventMode::Crossing => {
            if found {
                best.map(|(r, _)| r)
            } else {
                None
            }
        }
    })
}

/// Refined event time from a detected `(t̄, x̄)`: expands the flow through
/// `x̄` in `δt` by `k` Picard iterations, expands the event condition in
/// `δt`, inverts it and evaluates the inverse where the condition vanishes.
pub fn refine<Sys, E>(sys: &Sys, ev: &E, spec: &EventSpec, t_bar: f64, x_bar: &[f64], k: usize) -> Result<f64, EventError>
where
    Sys: OdeSystem,
    E: EventFunction,
{
    let s = space(1, k.max(1))?;
    let xe: Vec<TaylorPoly> = x_bar.iter().map(|v| TaylorPoly::constant(&s, *v)).collect();
    let x = picard_expand(sys, &xe, t_bar, 0, k.max(1))?;
    let t = TaylorPoly::variable_in(&s, 0, t_bar)?;
    let c = event_condition(sys, ev, spec, &t, &x)?;
    let c0 = c.constant_term();
    let slope = c.linear_coeff(0);
    let scale = c.max_abs();
    if !(slope.abs() > 1e-12 * scale) {
        return Err(EventError::NonInvertible { slope, scale });
    }
    if spec.mode == EventMode::Minimum && slope <= 0.0 {
        return Err(EventError::Degenerate { curvature: slope });
    }
    let inverse = TaylorMap::from_components(vec![c.add_constant(-c0)])?.invert()?;
    Ok(t_bar + inverse.evaluate(&[-c0])?[0])
}

/// Detection followed by repeated refinement: after each refinement the
/// trajectory is re-propagated from `x0` to the new time and refined again
/// until the time stops moving (relative change `TIME_TOL`, or a stalled
/// change below `NOISE_TOL`).
#[allow(clippy::too_many_arguments)]
pub fn locate<Sys, E>(
    sys: &Sys,
    ev: &E,
    spec: &EventSpec,
    x0: &[f64],
    t0: f64,
    t_max: f64,
    ctrl: &StepControl,
    k: usize,
) -> Result<Option<EventRecord>, EventError>
where
    Sys: OdeSystem,
    E: EventFunction,
{
    let Some(rec) = detect(sys, ev, spec, x0, t0, t_max, ctrl)? else {
        return Ok(None);
    };
    locate_from(sys, ev, spec, x0, t0, rec, ctrl, k).map(Some)
}

pub const MAX_REFINEMENTS: usize = 8;
/// Relative time change at which repeated refinement stops.
pub const TIME_TOL: f64 = 1e-13;
/// Refinement converges superlinearly, so a change that no longer halves
/// is integration noise; it is accepted once below this relative size.
pub const NOISE_TOL: f64 = 1e-9;

#[allow(clippy::too_many_arguments)]
pub fn locate_from<Sys, E>(
    sys: &Sys,
    ev: &E,
    spec: &EventSpec,
    x0: &[f64],
    t0: f64,
    rec: EventRecord,
    ctrl: &StepControl,
    k: usize,
) -> Result<EventRecord, EventError>
where
    Sys: OdeSystem,
    E: EventFunction,
{
    let (mut t, mut state) = (rec.t, rec.state);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        let previous = change;
        let ts = refine(sys, ev, spec, t, &state, k)?;
        if !(ts > t0) {
            return Err(EventError::NotDetected(ts));
        }
        change = (ts - t).abs();
        state = propagate_to(sys, x0, t0, ts, ctrl)?.state;
        t = ts;
        let scale = t.abs().max(1.0);
        if change <= TIME_TOL * scale || (change <= NOISE_TOL * scale && change > 0.5 * previous) {
            return Ok(EventRecord { t, state, refined: true });
        }
    }
    Err(EventError::NoConvergence { iterations: MAX_REFINEMENTS, change })
}

/// Event map over a box: state and time on the event manifold as
/// polynomials in the box variables.
#[derive(Debug, Clone)]
pub struct EventMap {
    /// `x_e*(ξ)`, one component per state entry, in the box variables only.
    pub state: TaylorMap,
    /// `t_e*(ξ)`.
    pub time: TaylorPoly,
    /// 1-norm condition number of the linear part of `[ℰ, ξ]`.
    pub condition: f64,
    /// Accepted steps of the polynomial propagation.
    pub steps: usize,
}

/// Space for an event map over `m` box variables at order `n`; variable `m`
/// is reserved for the time deviation.
pub fn event_space(m: usize, n: usize) -> Result<Arc<DaSpace>, DaError> {
    space(m + 1, n)
}

/// Builds `x_e*(ξ)` and `t_e*(ξ)`.
///
/// `x0` lives in [`event_space`]`(m, n)` and must not depend on the last
/// (time) variable. `t_star` is the refined event time of the reference
/// trajectory `x0(0)`. The polynomial state is propagated to `t_star`,
/// expanded in `δt`, the square map `[ℰ - ℰ₀, ξ]` of `(ξ, δt)` is inverted,
/// and `ℰ = 0` is imposed to obtain `δt(ξ)`, which is substituted back.
#[allow(clippy::too_many_arguments)]
pub fn build_event_map<Sys, E>(
    sys: &Sys,
    ev: &E,
    spec: &EventSpec,
    x0: &[TaylorPoly],
    t0: f64,
    t_star: f64,
    ctrl: &StepControl,
    k: usize,
) -> Result<EventMap, EventError>
where
    Sys: OdeSystem,
    E: EventFunction,
{
    let s = x0[0].space().clone();
    let m = s.nvars() - 1;
    let tv = m;
    let traj = propagate_to(sys, x0, t0, t_star, ctrl)?;
    let x = picard_expand(sys, &traj.state, t_star, tv, k)?;
    let t = TaylorPoly::variable_in(&s, tv, t_star)?;
    let c = event_condition(sys, ev, spec, &t, &x)?;
    let c0 = c.constant_term();
    if spec.mode == EventMode::Minimum && c.linear_coeff(tv) <= 0.0 {
        return Err(EventError::Degenerate { curvature: c.linear_coeff(tv) });
    }

    let mut comps = vec![c.add_constant(-c0)];
    for j in 0..m {
        comps.push(TaylorPoly::variable_in(&s, j, 0.0)?);
    }
    let f = TaylorMap::from_components(comps)?;
    let (_, condition) = invert_matrix(&f.linear_part())?;
    let g = f.invert()?;

    // g maps (e, ξ) back to (ξ, δt); impose e = -ℰ₀ and keep ξ free
    let mut args = vec![TaylorPoly::constant(&s, -c0)];
    for j in 0..m {
        args.push(TaylorPoly::variable_in(&s, j, 0.0)?);
    }
    let dt = g.components()[tv].substitute(&args)?;

    let mut sub: Vec<TaylorPoly> = (0..m).map(|j| TaylorPoly::variable_in(&s, j, 0.0)).collect::<Result<_, _>>()?;
    sub.push(dt.clone());
    let state = x
        .iter()
        .map(|p| p.substitute(&sub)?.restrict(m))
        .collect::<Result<Vec<_>, _>>()?;
    let time = dt.add_constant(t_star).restrict(m)?;
    Ok(EventMap { state: TaylorMap::from_components(state)?, time, condition, steps: traj.accepted })
}

/// Initial state polynomials `center + Σ_j hw_j ξ_j e_{idx_j}` in
/// [`event_space`]`(idx.len(), n)`.
pub fn box_initial_state(
    center: &[f64],
    components: &[usize],
    half_width: &[f64],
    n: usize,
) -> Result<Vec<TaylorPoly>, DaError> {
    if components.len() != half_width.len() {
        return Err(DaError::DimensionMismatch { expected: components.len(), got: half_width.len() });
    }
    let s = event_space(components.len(), n)?;
    let mut x: Vec<TaylorPoly> = center.iter().map(|c| TaylorPoly::constant(&s, *c)).collect();
    for (j, (&i, &hw)) in components.iter().zip(half_width).enumerate() {
        if i >= x.len() {
            return Err(DaError::VariableOutOfRange { index: i, nvars: x.len() });
        }
        x[i] = &x[i] + &TaylorPoly::variable_in(&s, j, 0.0)?.scale(hw);
    }
    Ok(x)
}

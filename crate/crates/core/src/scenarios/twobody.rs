//! Heliocentric two-body transfer with thrust and mass flow, a Keplerian
//! ephemeris, and the sphere-of-influence crossing event.
//!
//! Internal units: 1 AU, time unit `sqrt(AU³/μ)` (so μ = 1), and mass in
//! units of the nominal initial mass.

use serde::{Deserialize, Serialize};

use super::Problem;
use crate::controllers::Controller;
use crate::da::Scalar;
use crate::event::{EventFunction, EventSpec};
use crate::flow::{FlowError, OdeSystem, StepControl};

pub const AU_KM: f64 = 149_597_870.7;
pub const MU_SUN: f64 = 1.327_124_400_18e11;
pub const KEPLER_TOL: f64 = 1e-13;
pub const KEPLER_MAX_ITER: usize = 50;

/// `ṙ = v`, `v̇ = -μr/|r|³ + (T/m)u`, `ṁ = -T/v_ex`.
pub fn two_body_rhs<S: Scalar>(x: &[S], u: &[S], mu: f64, thrust: f64, v_ex: f64, m_floor: f64) -> Result<Vec<S>, FlowError> {
    if x.len() != 7 || u.len() != 3 {
        return Err(FlowError::Dimension { expected: 7, got: x.len() });
    }
    if x[6].constant() <= m_floor {
        return Err(FlowError::Model(format!("mass {} reached the dry-mass floor {m_floor}", x[6].constant())));
    }
    let r2 = x[0].square() + x[1].square() + x[2].square();
    if r2.constant() <= 0.0 {
        return Err(FlowError::Model("zero radius".into()));
    }
    let inv_r = r2.sqrt()?.recip()?;
    let g = inv_r.clone() * inv_r.clone() * inv_r * (-mu);
    let acc = x[6].recip()? * thrust;
    let mut out = Vec::with_capacity(7);
    out.extend(x[3..6].iter().cloned());
    for k in 0..3 {
        out.push(x[k].clone() * g.clone() + u[k].clone() * acc.clone());
    }
    out.push(x[6].lift(if thrust == 0.0 { 0.0 } else { -thrust / v_ex }));
    Ok(out)
}

/// Solves `M = E - e sin E` by Newton iteration with a bisection fallback.
pub fn kepler_solve(mean_anomaly: f64, e: f64) -> Result<f64, FlowError> {
    if !(0.0..1.0).contains(&e) || !mean_anomaly.is_finite() {
        return Err(FlowError::Model(format!("kepler: invalid e = {e} or M = {mean_anomaly}")));
    }
    let two_pi = std::f64::consts::TAU;
    // reduce to [-π, π] so the bracket below is valid
    let k = (mean_anomaly / two_pi).round();
    let m = mean_anomaly - k * two_pi;
    let f = |x: f64| x - e * x.sin() - m;
    let (mut lo, mut hi) = (m - e, m + e);
    let mut x = if e < 0.8 { m } else { m.signum() * std::f64::consts::PI };
    for _ in 0..KEPLER_MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x + k * two_pi);
        }
        if fx > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let mut next = x - fx / (1.0 - e * x.cos());
        if !(next >= lo && next <= hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= KEPLER_TOL * (1.0 + x.abs()) {
            return Ok(next + k * two_pi);
        }
        x = next;
    }
    Err(FlowError::Model(format!("kepler: no convergence for M = {mean_anomaly}, e = {e}")))
}

/// Eccentric anomaly over any scalar: a float solve at the constant part,
/// then Newton steps in the algebra (each doubles the correct order).
pub fn eccentric_anomaly<S: Scalar>(m: &S, e: f64) -> Result<S, FlowError> {
    let e0 = kepler_solve(m.constant(), e)?;
    let mut x = m.lift(e0);
    for _ in 0..6 {
        let f = x.clone() - x.sin() * e - m.clone();
        let df = (x.cos() * (-e)) + 1.0;
        x = x.clone() - f * df.recip()?;
    }
    Ok(x)
}

/// Classical elements; angles in radians, `mean_anomaly` at `epoch`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub mean_anomaly: f64,
}

impl KeplerElements {
    /// Mars, J2000 mean ecliptic elements (a in AU, angles in radians).
    pub fn mars_j2000() -> Self {
        let d = f64::to_radians;
        let (l, varpi, raan) = (-4.553_432_05, -23.943_629_59, 49.559_538_91);
        KeplerElements {
            a: 1.523_710_34,
            e: 0.093_394_10,
            i: d(1.849_691_42),
            raan: d(raan),
            argp: d(varpi - raan),
            mean_anomaly: d(l - varpi),
        }
    }
}

/// Position and velocity at time `t` after the element epoch, in the units
/// of `el.a` and `mu`.
pub fn kepler_state<S: Scalar>(el: &KeplerElements, mu: f64, t: &S) -> Result<([S; 3], [S; 3]), FlowError> {
    if !(el.a > 0.0) || !(0.0..1.0).contains(&el.e) {
        return Err(FlowError::Model("kepler: need a > 0 and 0 <= e < 1".into()));
    }
    let n = (mu / el.a.powi(3)).sqrt();
    let m = t.clone() * n + el.mean_anomaly;
    let ea = eccentric_anomaly(&m, el.e)?;
    let (se, ce) = (ea.sin(), ea.cos());
    let b = (1.0 - el.e * el.e).sqrt();
    let xp = (ce.clone() - el.e) * el.a;
    let yp = se.clone() * (el.a * b);
    let rr = (ce.clone() * (-el.e) + 1.0) * el.a;
    let k = rr.recip()? * (mu * el.a).sqrt();
    let vxp = -(se * k.clone());
    let vyp = ce * k * b;

    let (so, co) = el.raan.sin_cos();
    let (sw, cw) = el.argp.sin_cos();
    let (si, ci) = el.i.sin_cos();
    let p = [co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si];
    let q = [-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si];
    let rot = |a: &S, b: &S| -> [S; 3] { [0, 1, 2].map(|k| a.clone() * p[k] + b.clone() * q[k]) };
    Ok((rot(&xp, &yp), rot(&vxp, &vyp)))
}

/// Thrusting spacecraft; the controller sees the first `input_dim` state
/// entries.
#[derive(Debug, Clone)]
pub struct TwoBodySystem {
    pub mu: f64,
    pub thrust: f64,
    pub v_ex: f64,
    pub m_floor: f64,
    pub controller: Option<Controller>,
}

impl OdeSystem for TwoBodySystem {
    fn dim(&self) -> usize {
        7
    }

    fn rhs<S: Scalar>(&self, _t: &S, x: &[S]) -> Result<Vec<S>, FlowError> {
        let u = match &self.controller {
            Some(c) => c.control(&x[..c.input_dim().min(7)]).map_err(|e| FlowError::Model(e.to_string()))?,
            None => vec![x[0].lift(0.0); 3],
        };
        two_body_rhs(x, &u, self.mu, self.thrust, self.v_ex, self.m_floor)
    }
}

/// `|r - r_M(t)| - r_SOI`, with `t` measured from `t_offset` after the
/// element epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct SoiEvent {
    pub planet: KeplerElements,
    pub mu: f64,
    pub r_soi: f64,
    pub t_offset: f64,
}

impl SoiEvent {
    fn planet_state<S: Scalar>(&self, t: &S) -> Result<([S; 3], [S; 3]), FlowError> {
        kepler_state(&self.planet, self.mu, &(t.clone() + self.t_offset))
    }

    /// `v - v_M(t)`.
    pub fn relative_velocity<S: Scalar>(&self, t: &S, x: &[S]) -> Result<[S; 3], FlowError> {
        let (_, vm) = self.planet_state(t)?;
        Ok([0, 1, 2].map(|k| x[3 + k].clone() - vm[k].clone()))
    }
}

impl EventFunction for SoiEvent {
    fn value<S: Scalar>(&self, t: &S, x: &[S]) -> Result<S, FlowError> {
        let (rm, _) = self.planet_state(t)?;
        let d2 = (0..3).fold(x[0].lift(0.0), |acc, k| acc + (x[k].clone() - rm[k].clone()).square());
        Ok(d2.sqrt()? - self.r_soi)
    }

    fn rate<S: Scalar>(&self, t: &S, x: &[S], xdot: &[S]) -> Result<S, FlowError> {
        let (rm, vm) = self.planet_state(t)?;
        let dr: Vec<S> = (0..3).map(|k| x[k].clone() - rm[k].clone()).collect();
        let d = dr.iter().fold(x[0].lift(0.0), |acc, v| acc + v.square()).sqrt()?;
        let dot = (0..3).fold(x[0].lift(0.0), |acc, k| acc + dr[k].clone() * (xdot[k].clone() - vm[k].clone()));
        Ok(dot * d.recip()?)
    }
}

/// Crossing value `|r - r_M| - r_SOI` and relative speed `|v - v_M|`.
pub fn soi_events(ev: &SoiEvent, t: f64, x: &[f64]) -> Result<(f64, f64), FlowError> {
    let dv = ev.relative_velocity(&t, x)?;
    Ok((ev.value(&t, x)?, dv.iter().map(|v| v * v).sum::<f64>().sqrt()))
}

/// Mars elements in config units (a in AU, angles in degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementsConfig {
    pub a_au: f64,
    pub e: f64,
    pub i_deg: f64,
    pub raan_deg: f64,
    pub argp_deg: f64,
    pub mean_anomaly_deg: f64,
    /// Element epoch in days since 2000-01-01 00:00 (J2000.0 is 0.5).
    pub epoch_mjd2000: f64,
}

impl Default for ElementsConfig {
    fn default() -> Self {
        let m = KeplerElements::mars_j2000();
        ElementsConfig {
            a_au: m.a,
            e: m.e,
            i_deg: m.i.to_degrees(),
            raan_deg: m.raan.to_degrees(),
            argp_deg: m.argp.to_degrees(),
            mean_anomaly_deg: m.mean_anomaly.to_degrees(),
            epoch_mjd2000: 0.5,
        }
    }
}

/// Earth–Mars transfer in km, km/s, kg, N, days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarthMarsConfig {
    #[serde(default = "mu_sun")]
    pub mu_sun: f64,
    /// N
    pub thrust: f64,
    /// m/s
    pub exhaust_velocity: f64,
    /// kg
    pub dry_mass: f64,
    pub departure_epoch_mjd2000: f64,
    /// days
    pub max_tof: f64,
    /// km
    #[serde(default = "r_soi")]
    pub r_soi: f64,
    #[serde(default)]
    pub mars: ElementsConfig,
    /// (x, y, z) km, (vx, vy, vz) km/s, mass kg; heliocentric ecliptic J2000.
    pub nominal_state: Vec<f64>,
    /// Relative speed at the sphere of influence, km/s.
    pub threshold: f64,
}

fn mu_sun() -> f64 {
    MU_SUN
}
fn r_soi() -> f64 {
    5.77e5
}

impl EarthMarsConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (v, name) in [
            (self.mu_sun, "mu_sun"),
            (self.exhaust_velocity, "exhaust_velocity"),
            (self.max_tof, "max_tof"),
            (self.r_soi, "r_soi"),
            (self.mars.a_au, "mars.a_au"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive"));
            }
        }
        if !(self.thrust >= 0.0 && self.dry_mass >= 0.0) {
            return Err("thrust and dry_mass must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.mars.e) {
            return Err("mars.e must lie in [0, 1)".into());
        }
        if self.nominal_state.len() != 7 || self.nominal_state.iter().any(|v| !v.is_finite()) {
            return Err("nominal_state needs 7 finite entries".into());
        }
        if !(self.nominal_state[6] > self.dry_mass) {
            return Err("initial mass must exceed dry_mass".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EarthMarsProblem {
    pub config: EarthMarsConfig,
    pub system: TwoBodySystem,
    pub event: SoiEvent,
    pub step_control: StepControl,
    /// Seconds per internal time unit.
    pub time_unit: f64,
    units: Vec<f64>,
    nominal: Vec<f64>,
}

impl EarthMarsProblem {
    pub fn new(config: EarthMarsConfig, controller: Option<Controller>, step_control: StepControl) -> Result<Self, String> {
        config.validate()?;
        if let Some(c) = &controller {
            if c.input_dim() > 7 || c.output_dim() != 3 {
                return Err(format!("Earth-Mars controller must map at most 7 inputs to 3 outputs, has {} -> {}", c.input_dim(), c.output_dim()));
            }
        }
        let tu = (AU_KM.powi(3) / config.mu_sun).sqrt();
        let vu = AU_KM / tu;
        let m0 = config.nominal_state[6];
        let units = vec![AU_KM, AU_KM, AU_KM, vu, vu, vu, m0];
        // N = kg m/s², internal force unit is m0·AU/TU² in km
        let thrust = config.thrust * 1e-3 / (m0 * AU_KM / (tu * tu));
        let v_ex = config.exhaust_velocity * 1e-3 / vu;
        let mc = &config.mars;
        let d = f64::to_radians;
        let planet = KeplerElements {
            a: mc.a_au,
            e: mc.e,
            i: d(mc.i_deg),
            raan: d(mc.raan_deg),
            argp: d(mc.argp_deg),
            mean_anomaly: d(mc.mean_anomaly_deg),
        };
        let event = SoiEvent {
            planet,
            mu: 1.0,
            r_soi: config.r_soi / AU_KM,
            t_offset: (config.departure_epoch_mjd2000 - mc.epoch_mjd2000) * 86400.0 / tu,
        };
        let nominal = config.nominal_state.iter().zip(&units).map(|(v, u)| v / u).collect();
        Ok(EarthMarsProblem {
            system: TwoBodySystem { mu: 1.0, thrust, v_ex, m_floor: config.dry_mass / m0, controller },
            event,
            step_control,
            time_unit: tu,
            units,
            nominal,
            config,
        })
    }
}

impl Problem for EarthMarsProblem {
    type Sys = TwoBodySystem;
    type Event = SoiEvent;

    fn system(&self) -> &TwoBodySystem {
        &self.system
    }
    fn event(&self) -> &SoiEvent {
        &self.event
    }
    fn event_spec(&self) -> EventSpec {
        EventSpec::crossing(0.0)
    }
    fn t_max(&self) -> f64 {
        self.config.max_tof * 86400.0 / self.time_unit
    }
    fn step_control(&self) -> &StepControl {
        &self.step_control
    }
    fn nominal_state(&self) -> &[f64] {
        &self.nominal
    }
    fn state_units(&self) -> &[f64] {
        &self.units
    }
    fn threshold(&self) -> f64 {
        self.config.threshold
    }
    fn output_names(&self) -> Vec<String> {
        ["dvx_kmps", "dvy_kmps", "dvz_kmps", "t_days"].map(String::from).to_vec()
    }
    fn outputs<S: Scalar>(&self, t: &S, x: &[S]) -> Result<Vec<S>, FlowError> {
        let vu = self.units[3];
        let dv = self.event.relative_velocity(t, x)?;
        let mut out: Vec<S> = dv.into_iter().map(|v| v * vu).collect();
        out.push(t.clone() * (self.time_unit / 86400.0));
        Ok(out)
    }
    fn metric<S: Scalar>(&self, t: &S, x: &[S]) -> Result<S, FlowError> {
        let dv = self.event.relative_velocity(t, x)?;
        let s2 = dv.iter().fold(x[0].lift(0.0), |acc, v| acc + v.square());
        Ok(s2.sqrt()? * self.units[3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::{space, TaylorPoly};
    use crate::flow::propagate_to;

    fn ballistic() -> TwoBodySystem {
        TwoBodySystem { mu: 1.0, thrust: 0.0, v_ex: 1.0, m_floor: 0.1, controller: None }
    }

    #[test]
    fn kepler_examples() {
        assert_eq!(kepler_solve(0.7, 0.0).unwrap(), 0.7);
        assert_eq!(kepler_solve(0.0, 0.3).unwrap(), 0.0);
        let e = kepler_solve(1.0, 0.1).unwrap();
        assert!((e - 1.088_597).abs() < 1e-5);
        assert!((e - 0.1 * e.sin() - 1.0).abs() < 1e-14);
        let big = kepler_solve(20.0, 0.95).unwrap();
        assert!((big - 0.95 * big.sin() - 20.0).abs() < 1e-12);
        assert!(kepler_solve(1.0, 1.0).is_err());
    }

    #[test]
    fn da_kepler_matches_float() {
        let s = space(1, 8).unwrap();
        let m = TaylorPoly::variable_in(&s, 0, 1.0).unwrap();
        let e = eccentric_anomaly(&m, 0.3).unwrap();
        for dx in [-5e-3, 2e-3] {
            let want = kepler_solve(1.0 + dx, 0.3).unwrap();
            assert!((e.eval(&[dx]).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn ephemeris_is_a_keplerian_orbit() {
        let el = KeplerElements::mars_j2000();
        let (r, v) = kepler_state(&el, 1.0, &3.0).unwrap();
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v2 = v.iter().map(|x| x * x).sum::<f64>();
        // vis-viva
        assert!((v2 - (2.0 / rn - 1.0 / el.a)).abs() < 1e-13);
        // velocity is the time derivative of position
        let h = 1e-5;
        let (rp, _) = kepler_state(&el, 1.0, &(3.0 + h)).unwrap();
        let (rm, _) = kepler_state(&el, 1.0, &(3.0 - h)).unwrap();
        for k in 0..3 {
            assert!(((rp[k] - rm[k]) / (2.0 * h) - v[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn circular_orbit_keeps_radius() {
        let x0 = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        let xf = propagate_to(&ballistic(), &x0, 0.0, std::f64::consts::TAU, &StepControl::default()).unwrap().state;
        let r = (xf[0] * xf[0] + xf[1] * xf[1] + xf[2] * xf[2]).sqrt();
        assert!((r - 1.0).abs() < 1e-8);
    }

    #[test]
    fn ballistic_invariants_conserved() {
        let x0 = [1.1, 0.2, 0.05, -0.1, 0.9, 0.02, 1.0];
        let inv = |x: &[f64]| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let energy = 0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) - 1.0 / r;
            let h = [x[1] * x[5] - x[2] * x[4], x[2] * x[3] - x[0] * x[5], x[0] * x[4] - x[1] * x[3]];
            (energy, (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt())
        };
        let xf = propagate_to(&ballistic(), &x0, 0.0, 4.0, &StepControl::default()).unwrap().state;
        let (e0, h0) = inv(&x0);
        let (e1, h1) = inv(&xf);
        assert!(((e1 - e0) / e0).abs() < 1e-10 && ((h1 - h0) / h0).abs() < 1e-10);
    }

    #[test]
    fn zero_direction_only_changes_mass() {
        let x = [1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 1.0];
        let a = two_body_rhs(&x, &[0.0; 3], 1.0, 0.0, 2.0, 0.1).unwrap();
        let b = two_body_rhs(&x, &[0.0; 3], 1.0, 0.05, 2.0, 0.1).unwrap();
        assert_eq!(&a[..6], &b[..6]);
        assert_eq!((a[6], b[6]), (0.0, -0.025));
        let dry = [1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.05];
        assert!(two_body_rhs(&dry, &[0.0; 3], 1.0, 0.05, 2.0, 0.1).is_err());
    }

    #[test]
    fn soi_examples() {
        let ev = SoiEvent { planet: KeplerElements::mars_j2000(), mu: 1.0, r_soi: 0.004, t_offset: 2.0 };
        let (rm, vm) = kepler_state(&ev.planet, 1.0, &2.5).unwrap();
        let mut x = [rm[0], rm[1], rm[2], vm[0], vm[1], vm[2], 1.0];
        let (c, s) = soi_events(&ev, 0.5, &x).unwrap();
        assert!((c + 0.004).abs() < 1e-15 && s.abs() < 1e-15);
        x[0] += 0.004;
        assert!(soi_events(&ev, 0.5, &x).unwrap().0.abs() < 1e-15);
    }
}

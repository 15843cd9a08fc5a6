//! Planar Clohessy–Wiltshire rendezvous under a smooth feedback law.
//!
//! Internally lengths are in `length_scale` metres and time in `1/n`
//! seconds, so the mean motion is 1.

use serde::{Deserialize, Serialize};

use super::Problem;
use crate::controllers::Controller;
use crate::da::Scalar;
use crate::event::{EventFunction, EventSpec};
use crate::flow::{FlowError, OdeSystem, StepControl};

/// Planar CW with thrust: `ẍ = 3n²x + 2nẏ + a_T u_x`, `ÿ = -2nẋ + a_T u_y`.
pub fn cw_rhs<S: Scalar>(x: &[S], u: &[S], n: f64, a_t: f64) -> Result<Vec<S>, FlowError> {
    if x.len() != 4 || u.len() != 2 {
        return Err(FlowError::Dimension { expected: 4, got: x.len() });
    }
    let un = (u[0].constant().powi(2) + u[1].constant().powi(2)).sqrt();
    if un > 1.0 + 1e-9 {
        return Err(FlowError::Model(format!("control direction norm {un} exceeds 1")));
    }
    Ok(vec![
        x[2].clone(),
        x[3].clone(),
        x[0].clone() * (3.0 * n * n) + x[3].clone() * (2.0 * n) + u[0].clone() * a_t,
        x[2].clone() * (-2.0 * n) + u[1].clone() * a_t,
    ])
}

/// Closed-form state transition matrix of the ballistic CW equations.
pub fn cw_stm(n: f64, t: f64) -> [[f64; 4]; 4] {
    let (s, c) = (n * t).sin_cos();
    [
        [4.0 - 3.0 * c, 0.0, s / n, 2.0 * (1.0 - c) / n],
        [6.0 * (s - n * t), 1.0, -2.0 * (1.0 - c) / n, (4.0 * s - 3.0 * n * t) / n],
        [3.0 * n * s, 0.0, c, 2.0 * s],
        [-6.0 * n * (1.0 - c), 0.0, -2.0 * s, 4.0 * c - 3.0],
    ]
}

/// CW dynamics with the controller fed the internal-unit state.
#[derive(Debug, Clone)]
pub struct CwSystem {
    pub n: f64,
    pub a_t: f64,
    pub controller: Option<Controller>,
}

impl OdeSystem for CwSystem {
    fn dim(&self) -> usize {
        4
    }

    fn rhs<S: Scalar>(&self, _t: &S, x: &[S]) -> Result<Vec<S>, FlowError> {
        let u = match &self.controller {
            Some(c) => c.control(x).map_err(|e| FlowError::Model(e.to_string()))?,
            None => vec![x[0].lift(0.0), x[0].lift(0.0)],
        };
        cw_rhs(x, &u, self.n, self.a_t)
    }
}

/// `Δxᵀ M Δx` for a symmetric `M`.
pub fn squared_length<S: Scalar>(dx: &[S], m: &[Vec<f64>]) -> S {
    let mut acc = dx[0].lift(0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, mij) in row.iter().enumerate() {
            if *mij != 0.0 {
                acc = acc + dx[i].clone() * dx[j].clone() * *mij;
            }
        }
    }
    acc
}

/// Squared weighted distance to a target state.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredLength {
    pub target: Vec<f64>,
    pub weight: Vec<Vec<f64>>,
}

impl SquaredLength {
    fn residual<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        x.iter().zip(&self.target).map(|(xi, ti)| xi.clone() - *ti).collect()
    }
}

impl EventFunction for SquaredLength {
    fn value<S: Scalar>(&self, _t: &S, x: &[S]) -> Result<S, FlowError> {
        Ok(squared_length(&self.residual(x), &self.weight))
    }

    fn rate<S: Scalar>(&self, _t: &S, x: &[S], xdot: &[S]) -> Result<S, FlowError> {
        let dx = self.residual(x);
        let mut acc = x[0].lift(0.0);
        for (i, row) in self.weight.iter().enumerate() {
            for (j, mij) in row.iter().enumerate() {
                if *mij != 0.0 {
                    acc = acc + dx[i].clone() * xdot[j].clone() * (2.0 * mij);
                }
            }
        }
        Ok(acc)
    }
}

/// `½·diag(1/25 m⁻², 1/25 m⁻², 1/1e-4 (m/s)⁻², 1/1e-4 (m/s)⁻²)`: a residual of
/// 5 m or 0.01 m/s in one component alone contributes 0.5.
pub fn default_metric() -> Vec<Vec<f64>> {
    let d = [0.5 / 25.0, 0.5 / 25.0, 0.5 / 1e-4, 0.5 / 1e-4];
    (0..4).map(|i| (0..4).map(|j| if i == j { d[i] } else { 0.0 }).collect()).collect()
}

/// Physical parameters; lengths in metres, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwConfig {
    /// rad/s
    pub mean_motion: f64,
    /// m/s²
    pub thrust_accel: f64,
    /// s
    pub max_tof: f64,
    /// Internal length unit in metres.
    #[serde(default = "default_length_scale")]
    pub length_scale: f64,
    /// (x, y, vx, vy) in m and m/s.
    pub nominal_state: Vec<f64>,
    #[serde(default = "zero4")]
    pub target: Vec<f64>,
    /// Weight matrix on the physical residual.
    #[serde(default = "default_metric")]
    pub metric: Vec<Vec<f64>>,
    #[serde(default = "one")]
    pub threshold: f64,
}

fn default_length_scale() -> f64 {
    1000.0
}
fn zero4() -> Vec<f64> {
    vec![0.0; 4]
}
fn one() -> f64 {
    1.0
}

impl CwConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive"))
            }
        };
        pos(self.mean_motion, "mean_motion")?;
        pos(self.max_tof, "max_tof")?;
        pos(self.length_scale, "length_scale")?;
        if !(self.thrust_accel.is_finite() && self.thrust_accel >= 0.0) {
            return Err("thrust_accel must be non-negative".into());
        }
        if self.nominal_state.len() != 4 || self.target.len() != 4 {
            return Err("nominal_state and target need 4 entries".into());
        }
        if self.metric.len() != 4 || self.metric.iter().any(|r| r.len() != 4) {
            return Err("metric must be 4x4".into());
        }
        for i in 0..4 {
            for j in 0..4 {
                if !self.metric[i][j].is_finite() || (self.metric[i][j] - self.metric[j][i]).abs() > 1e-12 * self.metric[i][j].abs() {
                    return Err("metric must be finite and symmetric".into());
                }
            }
        }
        if self.nominal_state.iter().chain(&self.target).any(|v| !v.is_finite()) || self.threshold.is_nan() {
            return Err("non-finite state, target or threshold".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CwProblem {
    pub config: CwConfig,
    pub system: CwSystem,
    pub event: SquaredLength,
    pub step_control: StepControl,
    units: Vec<f64>,
    nominal: Vec<f64>,
}

impl CwProblem {
    /// The controller sees the internal-unit state.
    pub fn new(config: CwConfig, controller: Option<Controller>, step_control: StepControl) -> Result<Self, String> {
        config.validate()?;
        if let Some(c) = &controller {
            if c.input_dim() != 4 || c.output_dim() != 2 {
                return Err(format!("CW controller must map 4 inputs to 2 outputs, has {} -> {}", c.input_dim(), c.output_dim()));
            }
        }
        let l0 = config.length_scale;
        let n = config.mean_motion;
        let units = vec![l0, l0, l0 * n, l0 * n];
        let weight = (0..4).map(|i| (0..4).map(|j| config.metric[i][j] * units[i] * units[j]).collect()).collect();
        let target = config.target.iter().zip(&units).map(|(v, u)| v / u).collect();
        let nominal = config.nominal_state.iter().zip(&units).map(|(v, u)| v / u).collect();
        Ok(CwProblem {
            system: CwSystem { n: 1.0, a_t: config.thrust_accel / (l0 * n * n), controller },
            event: SquaredLength { target, weight },
            step_control,
            units,
            nominal,
            config,
        })
    }

    pub fn time_unit(&self) -> f64 {
        1.0 / self.config.mean_motion
    }
}

impl Problem for CwProblem {
    type Sys = CwSystem;
    type Event = SquaredLength;

    fn system(&self) -> &CwSystem {
        &self.system
    }
    fn event(&self) -> &SquaredLength {
        &self.event
    }
    fn event_spec(&self) -> EventSpec {
        EventSpec::minimum()
    }
    fn t_max(&self) -> f64 {
        self.config.max_tof / self.time_unit()
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
        ["x_m", "y_m", "vx_mps", "vy_mps", "t_s"].map(String::from).to_vec()
    }
    fn outputs<S: Scalar>(&self, t: &S, x: &[S]) -> Result<Vec<S>, FlowError> {
        let mut out: Vec<S> = x.iter().zip(&self.units).map(|(v, u)| v.clone() * *u).collect();
        out.push(t.clone() * self.time_unit());
        Ok(out)
    }
    fn metric<S: Scalar>(&self, t: &S, x: &[S]) -> Result<S, FlowError> {
        self.event.value(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::propagate_to;

    #[test]
    fn rhs_examples() {
        let n = 1.1e-3;
        assert_eq!(cw_rhs(&[0.0; 4], &[0.0, 0.0], n, 1e-4).unwrap(), vec![0.0; 4]);
        assert_eq!(cw_rhs(&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0], n, 1e-4).unwrap(), vec![0.0, 0.0, 3.0 * n * n, 0.0]);
        assert!(cw_rhs(&[0.0; 4], &[1.0, 1.0], n, 1e-4).is_err());
    }

    #[test]
    fn ballistic_flow_matches_stm() {
        let sys = CwSystem { n: 1.0, a_t: 0.0, controller: None };
        let x0 = [0.3, -0.5, 0.01, -0.02];
        let t = 1.05; // about four hours at geostationary mean motion
        let xf = propagate_to(&sys, &x0, 0.0, t, &StepControl::default()).unwrap().state;
        let phi = cw_stm(1.0, t);
        for i in 0..4 {
            let want: f64 = (0..4).map(|j| phi[i][j] * x0[j]).sum();
            assert!((xf[i] - want).abs() <= 1e-9 * want.abs().max(1e-3), "{i}: {} vs {want}", xf[i]);
        }
        // drift from a pure along-track offset stays put
        let xf = propagate_to(&sys, &[0.0, 0.7, 0.0, 0.0], 0.0, t, &StepControl::default()).unwrap().state;
        assert!((xf[1] - 0.7).abs() < 1e-12 && xf[0].abs() < 1e-12);
    }

    #[test]
    fn squared_length_examples() {
        let m = default_metric();
        assert_eq!(squared_length(&[0.0; 4], &m), 0.0);
        assert!((squared_length(&[5.0, 0.0, 0.0, 0.0], &m) - 0.5).abs() < 1e-15);
        assert!((squared_length(&[5.0, 5.0, 0.01, 0.01], &m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn internal_metric_matches_physical() {
        let cfg = CwConfig {
            mean_motion: 7.29e-5,
            thrust_accel: 1e-4,
            max_tof: 14400.0,
            length_scale: 1000.0,
            nominal_state: vec![500.0, -500.0, 0.0, 0.0],
            target: zero4(),
            metric: default_metric(),
            threshold: 1.0,
        };
        let p = CwProblem::new(cfg, None, StepControl::default()).unwrap();
        let phys = [5.0, 5.0, 0.01, 0.01];
        let int: Vec<f64> = phys.iter().zip(p.state_units()).map(|(a, u)| a / u).collect();
        assert!((p.metric(&0.0, &int).unwrap() - 2.0).abs() < 1e-12);
    }
}

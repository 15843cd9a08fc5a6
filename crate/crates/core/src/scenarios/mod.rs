//! Concrete dynamics, event metrics and unit conventions.

pub mod cw;
pub mod twobody;

pub use cw::{cw_rhs, cw_stm, default_metric, squared_length, CwConfig, CwProblem, CwSystem, SquaredLength};
pub use twobody::{
    eccentric_anomaly, kepler_solve, kepler_state, soi_events, two_body_rhs, EarthMarsConfig, EarthMarsProblem,
    ElementsConfig, KeplerElements, SoiEvent, TwoBodySystem,
};

use crate::da::{DaError, Scalar, TaylorPoly};
use crate::event::{box_initial_state, locate, EventError, EventFunction, EventRecord, EventSpec};
use crate::flow::{FlowError, OdeSystem, StepControl};

/// Picard order used when refining pointwise event times.
pub const REFINE_ORDER: usize = 8;

/// Everything the verification pipeline needs from a scenario. States are in
/// internal units; `state_units[i]` converts component `i` to physical units
/// by multiplication.
pub trait Problem: Sync {
    type Sys: OdeSystem;
    type Event: EventFunction;

    fn system(&self) -> &Self::Sys;
    fn event(&self) -> &Self::Event;
    fn event_spec(&self) -> EventSpec;
    fn t_max(&self) -> f64;
    fn step_control(&self) -> &StepControl;
    fn nominal_state(&self) -> &[f64];
    fn state_units(&self) -> &[f64];
    fn threshold(&self) -> f64;
    fn output_names(&self) -> Vec<String>;
    /// Reported event quantities, in physical units.
    fn outputs<S: Scalar>(&self, t: &S, x: &[S]) -> Result<Vec<S>, FlowError>;
    /// Safety metric compared against the threshold.
    fn metric<S: Scalar>(&self, t: &S, x: &[S]) -> Result<S, FlowError>;

    fn t0(&self) -> f64 {
        0.0
    }

    /// Nominal state with the listed components replaced by a physical point.
    fn initial_state(&self, components: &[usize], point: &[f64]) -> Vec<f64> {
        let mut x = self.nominal_state().to_vec();
        for (&i, p) in components.iter().zip(point) {
            x[i] = p / self.state_units()[i];
        }
        x
    }

    /// Polynomial initial state over a physical box, in the event-map space.
    fn initial_polys(&self, components: &[usize], center: &[f64], half_width: &[f64], n: usize) -> Result<Vec<TaylorPoly>, DaError> {
        let c = self.initial_state(components, center);
        let hw: Vec<f64> = components.iter().zip(half_width).map(|(&i, h)| h / self.state_units()[i]).collect();
        box_initial_state(&c, components, &hw, n)
    }

    /// Pointwise detection and refinement from an internal initial state.
    fn locate_event(&self, x0: &[f64]) -> Result<Option<EventRecord>, EventError> {
        locate(self.system(), self.event(), &self.event_spec(), x0, self.t0(), self.t_max(), self.step_control(), REFINE_ORDER)
    }
}

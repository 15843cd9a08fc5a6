//! Writes `configs/earth_mars.json`.
//!
//! The nominal departure state is found by placing the spacecraft inside the
//! Mars sphere of influence at the arrival epoch and integrating the
//! ballistic heliocentric motion backwards (forward with reversed velocity).
//! The low-thrust controller then perturbs the forward trajectory only
//! slightly, so the SOI crossing is kept.
//!
//! cargo run -p tmsafe-core --example earth_mars_config --release -- configs/earth_mars.json

use serde_json::json;
use tmsafe::config::{Scenario, ScenarioSpec};
use tmsafe::flow::propagate_to;
use tmsafe::scenarios::{kepler_state, Problem, TwoBodySystem};

const DEPARTURE_MJD2000: f64 = 8800.0;
const COAST_DAYS: f64 = 90.0;
const V_REL_KMPS: f64 = 2.5;
/// Arrival position relative to Mars: along-track and radial, km.
const OFFSET_KM: [f64; 2] = [2.5e5, 1.0e5];
const MASS_KG: f64 = 1000.0;
/// Step cap in time units (about 0.6 days), short against the SOI passage.
const H_MAX: f64 = 0.01;

fn config(nominal: &[f64], threshold: f64) -> serde_json::Value {
    json!({
        "schema_version": 1,
        "name": "earth-mars",
        "scenario": {
            "kind": "earth_mars",
            "thrust": 0.001,
            "exhaust_velocity": 30000.0,
            "dry_mass": 500.0,
            "departure_epoch_mjd2000": DEPARTURE_MJD2000,
            "max_tof": 150.0,
            "nominal_state": nominal,
            "threshold": threshold
        },
        "controller": {
            "kind": "analytic",
            "gains": [
                [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
            ],
            "bias": [0.0, 0.0, 0.0],
            "saturation": 1.0 / 3f64.sqrt()
        },
        "domain": {
            "components": [0, 1],
            "center": [nominal[0], nominal[1]],
            "half_width": [2.0e4, 2.0e4]
        },
        "ads": {"order": 4, "e_tol": 1e-2, "n_max": 10},
        "integrator": {"abs_tol": 1e-12, "rel_tol": 1e-12, "safety": 0.9, "h_max": H_MAX},
        "error_scales": [1.0 / 1.495978707e8, 1.0 / 1.495978707e8, 1.0 / 1.495978707e8, 1.0 / 29.78, 1.0 / 29.78, 1.0 / 29.78, 1.0]
    })
}

fn main() {
    let out = std::env::args().nth(1).expect("usage: earth_mars_config <out>");
    // any valid state gives the units and the Mars ephemeris
    let probe = ScenarioSpec::from_json_str(&config(&[1.5e8, 0.0, 0.0, 0.0, 30.0, 0.0, MASS_KG], 3.0).to_string()).expect("probe config");
    let Scenario::EarthMars(p) = probe.build().expect("probe scenario") else { unreachable!() };
    let units = p.state_units().to_vec();
    let tu_days = p.time_unit / 86400.0;

    let t_arr = COAST_DAYS / tu_days;
    let (rm, vm) = kepler_state(&p.event.planet, 1.0, &(t_arr + p.event.t_offset)).expect("ephemeris");
    let norm = |v: &[f64; 3]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let along = vm.map(|c| c / norm(&vm));
    let radial = rm.map(|c| c / norm(&rm));
    let mut x = vec![0.0; 7];
    for k in 0..3 {
        x[k] = rm[k] + (OFFSET_KM[0] * along[k] + OFFSET_KM[1] * radial[k]) / units[0];
        // reversed velocity: the spacecraft trails Mars in speed
        x[3 + k] = -(vm[k] - V_REL_KMPS * along[k] / units[3]);
    }
    x[6] = 1.0;
    let ballistic = TwoBodySystem { mu: 1.0, thrust: 0.0, v_ex: 1.0, m_floor: 0.0, controller: None };
    let back = propagate_to(&ballistic, &x, 0.0, t_arr, p.step_control()).expect("back-propagation");
    let mut x0 = back.state;
    for v in &mut x0[3..6] {
        *v = -*v;
    }
    let nominal: Vec<f64> = x0.iter().zip(&units).map(|(v, u)| v * u).collect();

    // controlled forward check; threshold at the nominal speed rounded up to m/s
    let spec = ScenarioSpec::from_json_str(&config(&nominal, 0.0).to_string()).expect("config");
    let Scenario::EarthMars(p) = spec.build().expect("scenario") else { unreachable!() };
    let rec = p.locate_event(p.nominal_state()).expect("event search").expect("SOI crossing on the nominal trajectory");
    let dv = p.metric(&rec.t, &rec.state).expect("metric");
    let threshold = (dv * 1000.0).ceil() / 1000.0;
    eprintln!("SOI crossing after {:.3} days, relative speed {dv:.4} km/s, threshold {threshold} km/s", rec.t * tu_days);

    let text = serde_json::to_string_pretty(&config(&nominal, threshold)).expect("json");
    std::fs::write(&out, text + "\n").expect("write config");
}

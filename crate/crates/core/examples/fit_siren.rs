//! Builds the example SIREN controller shipped in `configs/weights`.
//!
//! The network has one hidden SIREN layer whose units are
//! `sin(k·π/(2L)·(K_i·x + b_i))` for each output `i` and harmonic `k`, i.e. a
//! sine series in the pre-activations of the analytic law. The output layer
//! is fitted (ridge least squares) to the analytic controller along
//! closed-loop trajectories from the configured domain. Random hidden
//! features fit just as well pointwise but carry derivative ripple that the
//! closed loop amplifies, which makes the Taylor expansions useless.
//!
//! cargo run -p tmsafe-core --example fit_siren --release -- configs/cw_analytic.json configs/weights/cw_siren.json

use std::path::PathBuf;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmsafe::config::{Scenario, ScenarioSpec};
use tmsafe::controllers::{AffineScaler, Controller, LinearLayer, SirenLayer, SirenNetwork, DEFAULT_OMEGA};
use tmsafe::flow::{propagate, StepAction};
use tmsafe::scenarios::Problem;

const HARMONICS: usize = 8;
const TRAJECTORIES: usize = 200;
const RIDGE: f64 = 1e-10;
const SEED: u64 = 7;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 3 {
        eprintln!("usage: fit_siren <analytic config> <weights out>");
        std::process::exit(2);
    }
    let spec = ScenarioSpec::load(&PathBuf::from(&args[1])).expect("config");
    let Scenario::Cw(problem) = spec.build().expect("scenario") else {
        panic!("expected a CW scenario");
    };
    let Some(Controller::Analytic(teacher)) = problem.system.controller.clone() else {
        panic!("expected an analytic controller");
    };
    let root = spec.root_domain();

    // closed-loop states, internal units
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut states: Vec<Vec<f64>> = Vec::new();
    for _ in 0..TRAJECTORIES {
        let xi: Vec<f64> = (0..root.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let x0 = problem.initial_state(&spec.domain.components, &root.point(&xi));
        states.push(x0.clone());
        propagate(problem.system(), &x0, 0.0, problem.t_max(), problem.step_control(), |_, x: &[f64]| {
            states.push(x.to_vec());
            StepAction::Continue
        })
        .expect("propagation");
    }
    let dim = states[0].len();
    let outs = teacher.output_dim();

    let pre = |s: &[f64], i: usize| teacher.bias[i] + teacher.gains[i].iter().zip(s).map(|(k, x)| k * x).sum::<f64>();
    let half_range = 1.25 * states.iter().flat_map(|s| (0..outs).map(move |i| pre(s, i).abs())).fold(0.0, f64::max);

    let mut weights = Vec::new();
    let mut bias = Vec::new();
    for i in 0..outs {
        for k in 1..=HARMONICS {
            let f = k as f64 * std::f64::consts::PI / (2.0 * half_range) / DEFAULT_OMEGA;
            weights.push(teacher.gains[i].iter().map(|g| f * g).collect::<Vec<_>>());
            bias.push(f * teacher.bias[i]);
        }
    }
    let width = weights.len();
    let hidden = SirenLayer { weights, bias, omega: DEFAULT_OMEGA };

    // features: hidden layer plus a constant column
    let mut phi = DMatrix::<f64>::zeros(states.len(), width + 1);
    let mut target = DMatrix::<f64>::zeros(states.len(), outs);
    for (r, s) in states.iter().enumerate() {
        for (c, (w, b)) in hidden.weights.iter().zip(&hidden.bias).enumerate() {
            phi[(r, c)] = (hidden.omega * (w.iter().zip(s).map(|(a, x)| a * x).sum::<f64>() + b)).sin();
        }
        phi[(r, width)] = 1.0;
        for (c, u) in teacher.control(s).expect("teacher").into_iter().enumerate() {
            target[(r, c)] = u;
        }
    }
    let gram = phi.transpose() * &phi + DMatrix::<f64>::identity(width + 1, width + 1) * (RIDGE * states.len() as f64);
    let coef = gram.cholesky().expect("positive definite").solve(&(phi.transpose() * &target));

    let net = SirenNetwork {
        input_scale: AffineScaler::identity(dim),
        output_scale: AffineScaler::identity(outs),
        normalize_output: false,
        layers: vec![hidden],
        output: LinearLayer {
            weights: (0..outs).map(|o| (0..width).map(|c| coef[(c, o)]).collect()).collect(),
            bias: (0..outs).map(|o| coef[(width, o)]).collect(),
        },
    };
    net.validate().expect("valid network");

    let mut worst: f64 = 0.0;
    let mut sq = 0.0;
    for s in &states {
        for (a, b) in net.forward(s).expect("forward").iter().zip(&teacher.control(s).expect("teacher")) {
            worst = worst.max((a - b).abs());
            sq += (a - b).powi(2);
        }
    }
    let rms = (sq / (states.len() * outs) as f64).sqrt();
    eprintln!("{} samples, half range {half_range:.3}, fit rms {rms:.3e}, worst {worst:.3e}", states.len());
    net.save(&PathBuf::from(&args[2])).expect("write weights");
}

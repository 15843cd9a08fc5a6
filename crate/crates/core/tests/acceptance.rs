//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a required criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmsafe::ads::{check_partition, split, Domain};
use tmsafe::config::{Scenario, ScenarioSpec};
use tmsafe::controllers::{SirenNetwork, DEFAULT_OMEGA};
use tmsafe::da::{space, TaylorMap, TaylorPoly};
use tmsafe::event::build_event_map;
use tmsafe::flow::{propagate_to, FlowError, OdeSystem, StepControl};
use tmsafe::interval::{bound_poly, Interval};
use tmsafe::pipeline::{expand_domain, mc_check, verify, Status};
use tmsafe::scenarios::{CwProblem, Problem};
use tmsafe::Scalar;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn cw_spec() -> ScenarioSpec {
    ScenarioSpec::load(&config_path("cw_analytic.json")).expect("shipped CW config")
}

fn cw_problem(spec: &ScenarioSpec) -> CwProblem {
    match spec.build().expect("scenario") {
        Scenario::Cw(p) => p,
        _ => unreachable!(),
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_poly(rng: &mut ChaCha8Rng, nvars: usize, order: usize, spread: f64) -> TaylorPoly {
    let s = space(nvars, order).unwrap();
    let coeffs = (0..s.len()).map(|_| rng.gen_range(-spread..=spread)).collect();
    TaylorPoly::from_coeffs(&s, coeffs).unwrap()
}

fn max_coeff_diff(a: &TaylorMap, b: &TaylorMap) -> f64 {
    a.components()
        .iter()
        .zip(b.components())
        .flat_map(|(p, q)| p.coeffs().iter().zip(q.coeffs()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

fn da_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, n) = (3, 6);
    let s = space(m, n).unwrap();
    let ident = TaylorMap::identity(&s);

    let mut worst_inv: f64 = 0.0;
    for _ in 0..20 {
        let comps = (0..m)
            .map(|i| {
                let mut c: Vec<f64> = (0..s.len()).map(|k| if s.degree(k) >= 2 { rng.gen_range(-0.5..=0.5) } else { 0.0 }).collect();
                for j in 0..m {
                    c[1 + j] = if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.3..=0.3);
                }
                TaylorPoly::from_coeffs(&s, c).unwrap()
            })
            .collect();
        let f = TaylorMap::from_components(comps).unwrap();
        let g = f.invert().unwrap();
        worst_inv = worst_inv
            .max(max_coeff_diff(&TaylorMap::compose(&f, &g).unwrap(), &ident))
            .max(max_coeff_diff(&TaylorMap::compose(&g, &f).unwrap(), &ident));
    }

    // order of accuracy: error(h)/error(h/2) ≈ 2^(n+1)
    let order = 4;
    let c = 0.7;
    type Pair = (&'static str, fn(&TaylorPoly) -> TaylorPoly, fn(f64) -> f64);
    let cases: [Pair; 9] = [
        ("sin", |p| p.sin(), f64::sin),
        ("cos", |p| p.cos(), f64::cos),
        ("exp", |p| p.exp(), f64::exp),
        ("ln", |p| p.ln().unwrap(), f64::ln),
        ("recip", |p| p.recip().unwrap(), f64::recip),
        ("sqrt", |p| p.sqrt().unwrap(), f64::sqrt),
        ("tanh", |p| p.tanh(), f64::tanh),
        ("powi3", |p| p.powi(3).unwrap(), |x| x.powi(3)),
        ("powf1.5", |p| p.powf(1.5).unwrap(), |x| x.powf(1.5)),
    ];
    let arg = &TaylorPoly::variable(2, order, 0, c).unwrap() + &TaylorPoly::variable(2, order, 1, 0.0).unwrap().scale(0.5);
    let mut worst_slope = f64::INFINITY;
    let mut worst_name = "";
    for (name, fp, ff) in cases {
        let p = fp(&arg);
        let err = |h: f64| (p.eval(&[0.6 * h, -0.8 * h]).unwrap() - ff(c + 0.6 * h - 0.4 * h)).abs();
        let (e1, e2) = (err(0.1), err(0.05));
        // powi(3) is exact at order 4
        let slope = if e1 < 1e-14 && name == "powi3" { f64::INFINITY } else { (e1 / e2).log2() };
        if (slope - (order + 1) as f64).abs() > 0.6 && slope.is_finite() {
            return outcome(false, format!("{name}: observed order {slope:.2}, expected {}", order + 1));
        }
        if slope < worst_slope {
            worst_slope = slope;
            worst_name = name;
        }
    }

    let mut worst_rec: f64 = 0.0;
    for _ in 0..50 {
        let p = random_poly(&mut rng, 3, 6, 1.0);
        let scale: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..=0.5)).collect();
        let offset: Vec<f64> = scale.iter().map(|s| rng.gen_range(-(1.0 - s)..=(1.0 - s))).collect();
        let q = p.recenter(&offset, &scale).unwrap();
        for _ in 0..20 {
            let xi: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let outer: Vec<f64> = (0..3).map(|i| offset[i] + scale[i] * xi[i]).collect();
            worst_rec = worst_rec.max((q.eval(&xi).unwrap() - p.eval(&outer).unwrap()).abs());
        }
    }
    outcome(
        worst_inv < 1e-10 && worst_rec < 1e-12,
        format!(
            "invert∘compose max coeff err {worst_inv:.1e} (< 1e-10); intrinsic orders within ±0.6 of {} (lowest {worst_name} {worst_slope:.2}); recenter max err {worst_rec:.1e} (< 1e-12)",
            order + 1
        ),
    )
}

struct Oscillator;

impl OdeSystem for Oscillator {
    fn dim(&self) -> usize {
        2
    }
    fn rhs<S: Scalar>(&self, _t: &S, x: &[S]) -> Result<Vec<S>, FlowError> {
        Ok(vec![x[1].clone(), -x[0].clone()])
    }
}

fn flow_suite() -> Outcome {
    let ctrl = StepControl::default();
    let back = propagate_to(&Oscillator, &[1.0, 0.0], 0.0, 2.0 * std::f64::consts::PI, &ctrl).unwrap().state;
    let period_err = (back[0] - 1.0).abs().max(back[1].abs());

    let spec = cw_spec();
    let p = cw_problem(&spec);
    let x0 = p.nominal_state().to_vec();
    let tf = 1.0;
    let s = space(4, 1).unwrap();
    let polys: Vec<TaylorPoly> = x0.iter().enumerate().map(|(i, v)| TaylorPoly::variable_in(&s, i, *v).unwrap()).collect();
    let da = propagate_to(p.system(), &polys, 0.0, tf, p.step_control()).unwrap().state;
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for j in 0..4 {
        let shifted = |d: f64| {
            let mut x = x0.clone();
            x[j] += d;
            propagate_to(p.system(), &x, 0.0, tf, p.step_control()).unwrap().state
        };
        let (plus, minus) = (shifted(h), shifted(-h));
        let column: Vec<f64> = (0..4).map(|i| (plus[i] - minus[i]) / (2.0 * h)).collect();
        let scale = column.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for i in 0..4 {
            worst = worst.max((da[i].linear_coeff(j) - column[i]).abs() / scale);
        }
    }
    outcome(
        period_err < 1e-9 && worst < 1e-5,
        format!("oscillator period return {period_err:.1e} (< 1e-9); CW closed-loop Jacobian vs central differences rel err {worst:.1e} (< 1e-5)"),
    )
}

fn event_map_oracle() -> Outcome {
    let spec = cw_spec();
    let p = cw_problem(&spec);
    let comps = &spec.domain.components;
    let center = spec.domain.center.clone();
    let hw = vec![10.0; comps.len()];
    let rec = p.locate_event(&p.initial_state(comps, &center)).unwrap().expect("nominal event");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<Vec<f64>> = (0..200).map(|_| (0..comps.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let truth: Vec<(f64, Vec<f64>)> = samples
        .iter()
        .map(|xi| {
            let point: Vec<f64> = (0..comps.len()).map(|j| center[j] + hw[j] * xi[j]).collect();
            let r = p.locate_event(&p.initial_state(comps, &point)).unwrap().expect("sample event");
            (r.t, r.state)
        })
        .collect();

    let mut errs = Vec::new();
    for order in [2, 4, 6] {
        let x0 = p.initial_polys(comps, &center, &hw, order).unwrap();
        let map = build_event_map(p.system(), p.event(), &p.event_spec(), &x0, p.t0(), rec.t, p.step_control(), order).unwrap();
        let mut worst: f64 = 0.0;
        for (xi, (t, x)) in samples.iter().zip(&truth) {
            let xs = map.state.evaluate(xi).unwrap();
            worst = worst.max((map.time.eval(xi).unwrap() - t).abs());
            for (a, b) in xs.iter().zip(x) {
                worst = worst.max((a - b).abs());
            }
        }
        errs.push(worst);
    }
    let noise = 1e-12;
    let monotone = errs[1] <= errs[0] + noise && errs[2] <= errs[1] + noise;
    outcome(
        errs[1] < 1e-6 && monotone,
        format!(
            "half-width 10 m, 200 samples, max |map - pointwise| over state and time: order 2 {:.1e}, order 4 {:.1e} (< 1e-6), order 6 {:.1e}; monotone {monotone}",
            errs[0], errs[1], errs[2]
        ),
    )
}

fn split_scaling() -> Outcome {
    let spec = cw_spec();
    let p = cw_problem(&spec);
    let scales = spec.error_scales.clone().unwrap_or(vec![1.0; 4]);
    let comps = &spec.domain.components;
    let root = spec.root_domain();
    let parent = expand_domain(&p, comps, &scales, &spec.ads, &root);
    let (a, b) = split(&root, parent.direction);
    let pe = parent.error.expect("root expansion");
    let ratios: Vec<f64> = [a, b].iter().map(|d| expand_domain(&p, comps, &scales, &spec.ads, d).error.expect("child expansion") / pe).collect();
    let bound = 4.0 / 2f64.powi(spec.ads.order as i32 + 1);
    outcome(
        ratios.iter().all(|r| *r <= bound),
        format!(
            "order {}, split along variable {}: child/parent error {:.4} and {:.4} vs bound {bound:.4}",
            spec.ads.order, parent.direction, ratios[0], ratios[1]
        ),
    )
}

fn ads_partition(map: &tmsafe::pipeline::SafetyMap, spec: &ScenarioSpec) -> Outcome {
    let root = spec.root_domain();
    let leaves: Vec<Domain> = map.subdomains.iter().map(|s| s.domain.clone()).collect();
    let tiles = check_partition(&root, &leaves);
    let tol = spec.ads.tolerance();
    let bad = map
        .subdomains
        .iter()
        .filter(|s| s.status == Status::Ok)
        .filter(|s| !(s.max_error.unwrap() <= tol || s.domain.lineage.len() == spec.ads.n_max))
        .count();
    let ok = map.subdomains.iter().filter(|s| s.status == Status::Ok).count();
    outcome(
        tiles.is_ok() && bad == 0 && ok > 0,
        format!(
            "e_tol {:e}, N_max {}: {} subdomains ({ok} ok), tiling {}, {bad} over tolerance below N_max",
            tol,
            spec.ads.n_max,
            map.subdomains.len(),
            if tiles.is_ok() { "exact" } else { "broken" }
        ),
    )
}

fn containment(map: &tmsafe::pipeline::SafetyMap) -> Outcome {
    let report = mc_check(map, 1000, 11, true).unwrap();
    outcome(
        report.violations == 0 && report.missed_events == 0,
        format!(
            "{} samples over {} subdomains: {} violations, {} missed events, worst relative margin {:.2e}",
            report.total_samples, report.subdomains_checked, report.violations, report.missed_events, report.worst_metric_margin.min(report.worst_output_margin)
        ),
    )
}

fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let mag = 10f64.powi(rng.gen_range(-3..=3));
    let a = rng.gen_range(-mag..=mag);
    let b = rng.gen_range(-mag..=mag);
    Interval::new(a.min(b), a.max(b)).unwrap()
}

fn interval_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 10_000;
    let mut violations = [0usize; 4];
    for _ in 0..trials {
        let (a, b) = (random_interval(&mut rng), random_interval(&mut rng));
        let x = rng.gen_range(a.lo..=a.hi);
        let y = rng.gen_range(b.lo..=b.hi);
        violations[0] += usize::from(!(a + b).contains(x + y));
        violations[1] += usize::from(!(a - b).contains(x - y));
        violations[2] += usize::from(!(a * b).contains(x * y));
    }
    for _ in 0..trials {
        let nvars = rng.gen_range(1..=4);
        let order = rng.gen_range(1..=6);
        let mut p = random_poly(&mut rng, nvars, order, 1.0);
        if rng.gen_bool(0.5) {
            p = p.sin();
        }
        let xi: Vec<f64> = (0..nvars).map(|_| if rng.gen_bool(0.2) { rng.gen_range(0..2) as f64 * 2.0 - 1.0 } else { rng.gen_range(-1.0..=1.0) }).collect();
        violations[3] += usize::from(!bound_poly(&p).contains(p.eval(&xi).unwrap()));
    }
    outcome(
        violations.iter().all(|v| *v == 0),
        format!("{trials} trials each: add {}, sub {}, mul {}, bound_poly {} violations", violations[0], violations[1], violations[2], violations[3]),
    )
}

fn siren_order(net: &SirenNetwork, center: &[f64], dir: &[f64], h: f64, order: usize) -> f64 {
    let m = center.len();
    let polys: Vec<TaylorPoly> = (0..m).map(|i| TaylorPoly::variable(m, order, i, center[i]).unwrap()).collect();
    let y = net.forward(&polys).unwrap();
    let err = |h: f64| {
        let dx: Vec<f64> = dir.iter().map(|d| d * h).collect();
        let x: Vec<f64> = center.iter().zip(&dx).map(|(c, d)| c + d).collect();
        let yf = net.forward(&x).unwrap();
        y.iter().zip(&yf).map(|(p, v)| (p.eval(&dx).unwrap() - v).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(h), err(h / 2.0));
    if e1 < 1e-12 {
        // below round-off the order cannot be observed
        return (order + 1) as f64;
    }
    (e1 / e2).log2()
}

fn siren_consistency() -> Outcome {
    let order = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = f64::INFINITY;
    for seed in 0..6 {
        let net = SirenNetwork::init(&[3, 16, 16, 2], DEFAULT_OMEGA, seed).unwrap();
        for _ in 0..5 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let d: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            worst = worst.min(siren_order(&net, &c, &d, 5e-3, order));
        }
    }
    let shipped = SirenNetwork::load(&config_path("weights/cw_siren.json")).expect("shipped weights");
    let spec = cw_spec();
    let p = cw_problem(&spec);
    let mut worst_shipped = f64::INFINITY;
    for _ in 0..10 {
        let xi: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let c = p.initial_state(&spec.domain.components, &spec.root_domain().point(&xi));
        let d: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        worst_shipped = worst_shipped.min(siren_order(&shipped, &c, &d, 5e-3, order));
    }
    let need = (order + 1) as f64 - 0.5;
    outcome(
        worst >= need && worst_shipped >= need,
        format!("order {order}: lowest observed error order {worst:.2} on random networks, {worst_shipped:.2} on shipped weights (need ≥ {need})"),
    )
}

fn determinism(spec: &ScenarioSpec, first: &str) -> Outcome {
    let again = verify(spec, 1, 42).unwrap().to_json();
    let parallel = verify(spec, 3, 42).unwrap().to_json();
    outcome(
        first == again && first == parallel,
        format!("{} bytes; repeat identical {}, 3 workers identical {}", first.len(), first == again, first == parallel),
    )
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |name: &str, budget: Duration, required: bool, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        println!(
            "[{}] {name}: {} ({:.1} s, budget {} s){}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs(),
            if pass || required { "" } else { " [known deviation]" }
        );
        if !pass && required {
            failed.push(name.to_string());
        }
    };

    report("DA algebra", Duration::from_secs(10), true, &mut da_algebra);
    report("flow", Duration::from_secs(30), true, &mut flow_suite);
    report("event-map oracle", Duration::from_secs(120), true, &mut event_map_oracle);
    report("split error scaling", Duration::from_secs(60), false, &mut split_scaling);

    let spec = cw_spec();
    let mut map = None;
    report("ADS partition and tolerance", Duration::from_secs(300), true, &mut || {
        let m = verify(&spec, 1, 42).unwrap();
        let o = ads_partition(&m, &spec);
        map = Some(m);
        o
    });
    let map = map.expect("verify ran");
    report("containment", Duration::from_secs(300), true, &mut || containment(&map));
    report("interval soundness", Duration::from_secs(10), true, &mut interval_soundness);
    report("SIREN DA consistency", Duration::from_secs(30), true, &mut siren_consistency);
    let first = map.to_json();
    report("end-to-end determinism", Duration::from_secs(300), true, &mut || determinism(&spec, &first));

    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}

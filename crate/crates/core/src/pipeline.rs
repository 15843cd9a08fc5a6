//! End-to-end verification: splitting run, bounds and verdicts per
//! subdomain, Monte-Carlo containment checks and plot export.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ads::{self, split_direction, AdsConfig, Domain, Expansion};
use crate::config::{ConfigError, Scenario, ScenarioSpec};
use crate::da::{TaylorMap, TaylorPoly};
use crate::event::build_event_map;
use crate::interval::{bound_map, bound_poly, Interval, IntervalBox, RemainderEstimate};
use crate::scenarios::Problem;
use crate::with_problem;

pub const SAFETY_MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NoEvent,
    Failed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NoEvent => "no_event",
            Status::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Safe,
    Unsafe,
    Indeterminate,
}

impl Verdict {
    pub fn from_bound(status: Status, metric: Option<Interval>, threshold: f64) -> Verdict {
        match (status, metric) {
            (Status::Ok, Some(m)) if m.hi <= threshold => Verdict::Safe,
            (Status::Ok, Some(_)) => Verdict::Unsafe,
            _ => Verdict::Indeterminate,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Safe => "safe",
            Verdict::Unsafe => "unsafe",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainResult {
    pub lineage: String,
    pub domain: Domain,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    /// Output bounds without the remainder.
    pub poly_bounds: Option<IntervalBox>,
    /// Output bounds widened by the remainder estimate.
    pub event_bounds: Option<IntervalBox>,
    pub remainder: Option<RemainderEstimate>,
    pub metric_bound: Option<Interval>,
    pub metric_remainder: Option<f64>,
    pub verdict: Verdict,
    /// Extrapolated truncation error per scaled event-state component.
    pub error_estimate: Option<Vec<f64>>,
    pub max_error: Option<f64>,
    pub condition: Option<f64>,
    pub steps: Option<usize>,
    /// Event time of the subdomain center, internal units.
    pub t_event: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub subdomains: usize,
    pub safe: usize,
    pub unsafe_count: usize,
    pub indeterminate: usize,
    pub root_volume: f64,
    /// Lebesgue volume of safe boxes over the root volume.
    pub safe_fraction: f64,
    pub unsafe_fraction: f64,
    pub indeterminate_fraction: f64,
    pub max_metric_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyMap {
    pub schema_version: u32,
    pub config: ScenarioSpec,
    pub config_sha256: String,
    pub seed: u64,
    pub threshold: f64,
    pub output_names: Vec<String>,
    /// Which quantities the splitting tolerance applies to.
    pub error_scope: String,
    pub subdomains: Vec<SubdomainResult>,
    pub aggregate: Aggregate,
}

impl SafetyMap {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("safety map serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, PipelineError> {
        let map: SafetyMap = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(format!("safety map: {e}")))?;
        if map.schema_version != SAFETY_MAP_SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!("unsupported safety map schema_version {}", map.schema_version)).into());
        }
        map.config.validate()?;
        if config_digest(&map.config) != map.config_sha256 {
            return Err(ConfigError::Invalid("config echo does not match its digest".into()).into());
        }
        Ok(map)
    }
}

pub fn config_digest(spec: &ScenarioSpec) -> String {
    let bytes = serde_json::to_vec(spec).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn failed(domain: &Domain, status: Status, message: String) -> SubdomainResult {
    SubdomainResult {
        lineage: domain.lineage_tag(),
        domain: domain.clone(),
        status,
        message: Some(message),
        poly_bounds: None,
        event_bounds: None,
        remainder: None,
        metric_bound: None,
        metric_remainder: None,
        verdict: Verdict::Indeterminate,
        error_estimate: None,
        max_error: None,
        condition: None,
        steps: None,
        t_event: None,
    }
}

/// Event map, bounds and verdict for one box.
pub fn expand_domain<P: Problem>(
    p: &P,
    components: &[usize],
    error_scales: &[f64],
    cfg: &AdsConfig,
    domain: &Domain,
) -> Expansion<SubdomainResult> {
    let fail = |status, msg: String| Expansion { payload: failed(domain, status, msg), error: None, direction: 0 };
    let x0 = p.initial_state(components, &domain.center);
    let rec = match p.locate_event(&x0) {
        Ok(Some(r)) => r,
        Ok(None) => return fail(Status::NoEvent, "no event on the reference trajectory".into()),
        Err(e) => return fail(Status::Failed, e.to_string()),
    };
    let n = cfg.order;
    let built = p
        .initial_polys(components, &domain.center, &domain.half_width, n)
        .map_err(|e| e.to_string())
        .and_then(|x0p| {
            build_event_map(p.system(), p.event(), &p.event_spec(), &x0p, p.t0(), rec.t, p.step_control(), n)
                .map_err(|e| e.to_string())
        });
    let map = match built {
        Ok(m) => m,
        Err(e) => return fail(Status::Failed, e),
    };
    match summarize(p, error_scales, domain, &map.state, &map.time) {
        Ok((mut res, err, dir)) => {
            res.condition = Some(map.condition);
            res.steps = Some(map.steps);
            res.t_event = Some(rec.t);
            Expansion { payload: res, error: Some(err), direction: dir }
        }
        Err(e) => fail(Status::Failed, e),
    }
}

fn summarize<P: Problem>(
    p: &P,
    error_scales: &[f64],
    domain: &Domain,
    state: &TaylorMap,
    time: &TaylorPoly,
) -> Result<(SubdomainResult, f64, usize), String> {
    let scaled = state.scaled(&error_scales.iter().map(|s| 1.0 / s).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let (errors, max_error) = ads::map_error(&scaled);
    let (direction, _) = split_direction(&scaled);

    let outputs = p.outputs(time, state.components()).map_err(|e| e.to_string())?;
    let outputs = TaylorMap::from_components(outputs).map_err(|e| e.to_string())?;
    let (rem, _) = ads::map_error(&outputs);
    let rem = RemainderEstimate::new(rem).map_err(|e| e.to_string())?;
    let poly_bounds = bound_map(&outputs, &RemainderEstimate::zeros(outputs.len())).map_err(|e| e.to_string())?;
    let event_bounds = bound_map(&outputs, &rem).map_err(|e| e.to_string())?;

    let metric = p.metric(time, state.components()).map_err(|e| e.to_string())?;
    let metric_rem = ads::poly_error(&metric);
    let metric_bound = bound_poly(&metric) + Interval::symmetric(metric_rem);
    if !(metric_bound.lo.is_finite() && metric_bound.hi.is_finite()) || errors.iter().any(|e| !e.is_finite()) {
        return Err("non-finite bounds".into());
    }
    let res = SubdomainResult {
        lineage: domain.lineage_tag(),
        domain: domain.clone(),
        status: Status::Ok,
        message: None,
        poly_bounds: Some(poly_bounds),
        event_bounds: Some(event_bounds),
        remainder: Some(rem),
        metric_bound: Some(metric_bound),
        metric_remainder: Some(metric_rem),
        verdict: Verdict::from_bound(Status::Ok, Some(metric_bound), p.threshold()),
        error_estimate: Some(errors),
        max_error: Some(max_error),
        condition: None,
        steps: None,
        t_event: None,
    };
    Ok((res, max_error, direction))
}

fn scales(spec: &ScenarioSpec, dim: usize) -> Vec<f64> {
    spec.error_scales.clone().unwrap_or_else(|| vec![1.0; dim])
}

pub fn aggregate(root: &Domain, subs: &[SubdomainResult]) -> Aggregate {
    let v = root.volume();
    let frac = |k: Verdict| subs.iter().filter(|s| s.verdict == k).fold(0.0, |acc, s| acc + s.domain.volume()) / v;
    let count = |k: Verdict| subs.iter().filter(|s| s.verdict == k).count();
    Aggregate {
        subdomains: subs.len(),
        safe: count(Verdict::Safe),
        unsafe_count: count(Verdict::Unsafe),
        indeterminate: count(Verdict::Indeterminate),
        root_volume: v,
        safe_fraction: frac(Verdict::Safe),
        unsafe_fraction: frac(Verdict::Unsafe),
        indeterminate_fraction: frac(Verdict::Indeterminate),
        max_metric_bound: subs.iter().filter_map(|s| s.metric_bound.map(|m| m.hi)).reduce(f64::max),
    }
}

/// Splitting run over the root box. `workers` bounds the thread count;
/// the result does not depend on it.
pub fn verify(spec: &ScenarioSpec, workers: usize, seed: u64) -> Result<SafetyMap, PipelineError> {
    spec.validate()?;
    let scenario = spec.build()?;
    let root = spec.root_domain();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let (subdomains, threshold, output_names) = with_problem!(&scenario, p => {
        let sc = scales(spec, p.nominal_state().len());
        let expand = |d: &Domain| expand_domain(p, &spec.domain.components, &sc, &spec.ads, d);
        let leaves = pool.install(|| ads::run(&root, &spec.ads, &expand));
        (leaves.into_iter().map(|l| l.payload).collect::<Vec<_>>(), p.threshold(), p.output_names())
    });
    let aggregate = aggregate(&root, &subdomains);
    Ok(SafetyMap {
        schema_version: SAFETY_MAP_SCHEMA_VERSION,
        config_sha256: config_digest(spec),
        config: spec.clone(),
        seed,
        threshold,
        output_names,
        error_scope: "event-state components in internal units divided by error_scales".into(),
        subdomains,
        aggregate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainCheck {
    pub lineage: String,
    pub samples: usize,
    pub violations: usize,
    pub missed_events: usize,
    /// Smallest distance of a sampled metric inside its bound (negative
    /// outside), relative to the bound width.
    pub worst_metric_margin: f64,
    pub worst_output_margin: f64,
    /// Why the first missed sample failed, with its unit-box coordinates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub first_miss: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub seed: u64,
    pub samples_per_subdomain: usize,
    pub include_remainder: bool,
    pub subdomains_checked: usize,
    pub total_samples: usize,
    pub violations: usize,
    pub missed_events: usize,
    pub worst_metric_margin: f64,
    pub worst_output_margin: f64,
    pub per_subdomain: Vec<SubdomainCheck>,
}

fn margin(iv: &Interval, x: f64) -> f64 {
    let w = iv.width().max(f64::MIN_POSITIVE);
    (x - iv.lo).min(iv.hi - x) / w
}

/// Samples each ok subdomain uniformly, runs pointwise detection and
/// refinement, and checks the metric and outputs against the stored bounds
/// (with or without the remainder).
pub fn mc_check(map: &SafetyMap, samples: usize, seed: u64, include_remainder: bool) -> Result<McReport, PipelineError> {
    let scenario: Scenario = map.config.build()?;
    let comps = &map.config.domain.components;
    let per: Vec<SubdomainCheck> = with_problem!(&scenario, p => {
        map.subdomains
            .par_iter()
            .enumerate()
            .filter(|(_, s)| s.status == Status::Ok)
            .map(|(k, s)| check_subdomain(p, comps, s, samples, seed.wrapping_add((k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)), include_remainder))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let fold = |f: fn(&SubdomainCheck) -> f64| per.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(McReport {
        seed,
        samples_per_subdomain: samples,
        include_remainder,
        subdomains_checked: per.len(),
        total_samples: per.iter().map(|c| c.samples).sum(),
        violations: per.iter().map(|c| c.violations).sum(),
        missed_events: per.iter().map(|c| c.missed_events).sum(),
        worst_metric_margin: fold(|c| c.worst_metric_margin),
        worst_output_margin: fold(|c| c.worst_output_margin),
        per_subdomain: per,
    })
}

fn check_subdomain<P: Problem>(
    p: &P,
    comps: &[usize],
    s: &SubdomainResult,
    samples: usize,
    seed: u64,
    include_remainder: bool,
) -> Result<SubdomainCheck, PipelineError> {
    let bounds = if include_remainder { &s.event_bounds } else { &s.poly_bounds };
    let bounds = bounds.as_ref().ok_or_else(|| PipelineError::Internal(format!("subdomain {} has no bounds", s.lineage)))?;
    let metric_bound = s.metric_bound.ok_or_else(|| PipelineError::Internal("missing metric bound".into()))?;
    let metric_bound = if include_remainder {
        metric_bound
    } else {
        let r = s.metric_remainder.unwrap_or(0.0);
        Interval { lo: metric_bound.lo + r, hi: metric_bound.hi - r }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SubdomainCheck {
        lineage: s.lineage.clone(),
        samples,
        violations: 0,
        missed_events: 0,
        worst_metric_margin: f64::INFINITY,
        worst_output_margin: f64::INFINITY,
        first_miss: None,
    };
    let m = s.domain.dim();
    for _ in 0..samples {
        let xi: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let x0 = p.initial_state(comps, &s.domain.point(&xi));
        let rec = match p.locate_event(&x0) {
            Ok(Some(r)) => r,
            miss => {
                if out.first_miss.is_none() {
                    let why = match miss {
                        Err(e) => e.to_string(),
                        _ => "no event".into(),
                    };
                    out.first_miss = Some(format!("{why} at {xi:?}"));
                }
                out.missed_events += 1;
                out.violations += 1;
                continue;
            }
        };
        let outputs = p.outputs(&rec.t, &rec.state).map_err(|e| PipelineError::Internal(e.to_string()))?;
        let metric = p.metric(&rec.t, &rec.state).map_err(|e| PipelineError::Internal(e.to_string()))?;
        let mm = margin(&metric_bound, metric);
        let om = bounds.0.iter().zip(&outputs).map(|(iv, v)| margin(iv, *v)).fold(f64::INFINITY, f64::min);
        out.worst_metric_margin = out.worst_metric_margin.min(mm);
        out.worst_output_margin = out.worst_output_margin.min(om);
        if !metric_bound.contains(metric) || !bounds.contains(&outputs) {
            out.violations += 1;
        }
    }
    Ok(out)
}

/// One CSV row per subdomain: lineage, status, verdict, box corners per
/// domain dimension, metric bound.
pub fn plot_data<W: Write>(map: &SafetyMap, out: W) -> Result<usize, PipelineError> {
    let io = |e: csv::Error| PipelineError::Internal(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let m = map.config.domain.components.len();
    let mut header = vec!["lineage".to_string(), "status".into(), "verdict".into()];
    for j in 0..m {
        header.push(format!("lo_{j}"));
        header.push(format!("hi_{j}"));
    }
    header.extend(["metric_lo".into(), "metric_hi".into()]);
    w.write_record(&header).map_err(io)?;
    for s in &map.subdomains {
        let mut row = vec![s.lineage.clone(), s.status.as_str().into(), s.verdict.as_str().into()];
        for j in 0..m {
            row.push(s.domain.lo(j).to_string());
            row.push(s.domain.hi(j).to_string());
        }
        match s.metric_bound {
            Some(b) => row.extend([b.lo.to_string(), b.hi.to_string()]),
            None => row.extend([String::new(), String::new()]),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| PipelineError::Internal(e.to_string()))?;
    Ok(map.subdomains.len())
}

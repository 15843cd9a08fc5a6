use std::path::PathBuf;

use tmsafe::ads::{check_partition, Domain};
use tmsafe::config::{ScenarioConfig, ScenarioSpec};
use tmsafe::pipeline::{mc_check, plot_data, verify, SafetyMap, Status, Verdict};

fn spec() -> ScenarioSpec {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/cw_analytic.json");
    ScenarioSpec::load(&path).unwrap()
}

fn coarse() -> ScenarioSpec {
    let mut s = spec();
    s.ads.e_tol = None;
    s
}

#[test]
fn infinite_tolerance_gives_one_subdomain() {
    let map = verify(&coarse(), 1, 0).unwrap();
    assert_eq!(map.subdomains.len(), 1);
    assert_eq!(map.subdomains[0].status, Status::Ok);
    assert_ne!(map.subdomains[0].verdict, Verdict::Indeterminate);
    let back = SafetyMap::from_json_str(&map.to_json()).unwrap();
    assert_eq!(back, map);
}

#[test]
fn infinite_threshold_makes_every_ok_subdomain_safe() {
    let mut s = spec();
    if let ScenarioConfig::Cw(c) = &mut s.scenario {
        c.threshold = f64::INFINITY;
    }
    let map = verify(&s, 1, 0).unwrap();
    assert!(map.subdomains.iter().filter(|d| d.status == Status::Ok).all(|d| d.verdict == Verdict::Safe));
    assert_eq!(map.aggregate.safe_fraction, 1.0);
}

#[test]
fn aggregate_and_verdicts_recompute_from_the_output() {
    let map = verify(&spec(), 1, 0).unwrap();
    let root = map.config.root_domain();
    let vol = |k: Verdict| map.subdomains.iter().filter(|d| d.verdict == k).map(|d| d.domain.volume()).sum::<f64>() / root.volume();
    let a = &map.aggregate;
    assert!((vol(Verdict::Safe) - a.safe_fraction).abs() < 1e-12);
    assert!((a.safe_fraction + a.unsafe_fraction + a.indeterminate_fraction - 1.0).abs() < 1e-12);
    assert_eq!(a.safe + a.unsafe_count + a.indeterminate, a.subdomains);
    for d in &map.subdomains {
        assert_eq!(Verdict::from_bound(d.status, d.metric_bound, map.threshold), d.verdict, "{}", d.lineage);
    }
    // the shipped config is meant to give a mixed map
    assert!(a.safe > 0 && a.unsafe_count > 0);
}

#[test]
fn plot_rows_tile_the_root_box() {
    let map = verify(&spec(), 1, 0).unwrap();
    let mut buf = Vec::new();
    let rows = plot_data(&map, &mut buf).unwrap();
    assert_eq!(rows, map.subdomains.len());

    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "lineage");
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let mut boxes = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert!(["safe", "unsafe", "indeterminate"].contains(&&rec[col("verdict")]));
        let lo: Vec<f64> = (0..2).map(|j| rec[col(&format!("lo_{j}"))].parse().unwrap()).collect();
        let hi: Vec<f64> = (0..2).map(|j| rec[col(&format!("hi_{j}"))].parse().unwrap()).collect();
        let center = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let hw = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).collect();
        boxes.push(Domain::new(center, hw).unwrap());
    }
    check_partition(&map.config.root_domain(), &boxes).unwrap();
}

#[test]
fn monte_carlo_report_is_seeded() {
    let map = verify(&coarse(), 1, 0).unwrap();
    let a = mc_check(&map, 30, 5, true).unwrap();
    let b = mc_check(&map, 30, 5, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.total_samples, 30);
}

#[test]
fn dropping_the_remainder_on_a_coarse_map_exposes_violations() {
    let mut s = coarse();
    s.ads.order = 2;
    let map = verify(&s, 1, 0).unwrap();
    let with = mc_check(&map, 200, 1, true).unwrap();
    let without = mc_check(&map, 200, 1, false).unwrap();
    assert!(without.violations >= with.violations);
    assert!(without.violations > 0, "negative control found nothing: {without:?}");
}

#[test]
fn tampered_config_echo_is_rejected() {
    let map = verify(&coarse(), 1, 0).unwrap();
    let text = map.to_json().replacen("\"max_tof\": 14400.0", "\"max_tof\": 15000.0", 1);
    assert_ne!(text, map.to_json());
    assert!(SafetyMap::from_json_str(&text).is_err());
}

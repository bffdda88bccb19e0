use std::path::Path;

use rand::seq::SliceRandom;

use climate_dfa::engine::{output, run_simulation, RunConfig, RunOptions, RunOutput};
use climate_dfa::rng::rng_from_seed;
use climate_dfa::surplus::compute_risk_report;
use climate_dfa::DfaError;

fn small_config() -> RunConfig {
    let mut c = RunConfig::default_config();
    c.run.end_year = c.run.start_year + 6;
    c.run.n_paths = 24;
    c.run.inner_samples = 2000;
    c.run.cagr_horizons = vec![1, 3, 6];
    c.scenarios.truncate(2);
    c
}

fn run(c: &RunConfig, options: RunOptions) -> RunOutput {
    run_simulation(c, &options, Path::new(".")).unwrap()
}

#[test]
fn worker_count_does_not_change_results() {
    let c = small_config();
    let one = run(&c, RunOptions { workers: 1, ..Default::default() });
    let three = run(&c, RunOptions { workers: 3, ..Default::default() });
    assert_eq!(one.paths, three.paths);
    assert_eq!(one.report, three.report);
    assert_eq!(one.capital, three.capital);
}

#[test]
fn seed_override_changes_paths() {
    let c = small_config();
    let a = run(&c, RunOptions::default());
    let b = run(&c, RunOptions { master_seed: Some(c.run.master_seed + 1), ..Default::default() });
    assert_ne!(a.paths[0].capital, b.paths[0].capital);
    assert_eq!(b.config.run.master_seed, c.run.master_seed + 1);
}

#[test]
fn single_scenario_reproduces_full_run() {
    let c = small_config();
    let full = run(&c, RunOptions::default());
    let id = c.scenarios[1].id.clone();
    let single = run(&c, RunOptions { scenario: Some(id.clone()), ..Default::default() });
    assert_eq!(single.paths.len(), 1);
    assert_eq!(single.paths[0], full.paths[1]);
    assert_eq!(single.capital[0], full.capital[1]);
    assert_eq!(single.paths[0].scenario_id, id);
}

#[test]
fn paths_start_from_calibrated_capital() {
    let mut c = small_config();
    c.market.insurers[0].initial_capital = Some(1234.5);
    let out = run(&c, RunOptions { n_paths: Some(4), ..Default::default() });
    for (sc, cap) in out.paths.iter().zip(&out.capital) {
        assert_eq!(cap.insurers[0].initial_capital, 1234.5);
        assert_eq!(cap.insurers[0].base, None);
        assert!(cap.insurers[1..].iter().all(|i| i.base.is_some() && i.initial_capital >= 0.0));
        let k0: f64 = cap.insurers.iter().map(|i| i.initial_capital).sum();
        for path in &sc.capital {
            assert_eq!(path.len(), c.horizon_years() + 1);
            assert!((path[0] - k0).abs() <= 1e-9 * k0);
        }
        for claims in &sc.claims {
            assert!(claims[1..].iter().all(|l| l.is_finite() && *l >= 0.0));
        }
    }
}

#[test]
fn written_paths_reproduce_the_report() {
    let c = small_config();
    let out = run(&c, RunOptions::default());
    let dir = tempfile::tempdir().unwrap();
    output::write_run(&out, dir.path()).unwrap();
    let back = output::read_paths(dir.path()).unwrap();
    assert_eq!(back, out.paths);
    assert_eq!(compute_risk_report(&back, &c.run.cagr_horizons).unwrap(), out.report);
    let manifest = std::fs::read_to_string(dir.path().join(output::MANIFEST)).unwrap();
    assert!(manifest.contains(&output::config_hash(&out.config).unwrap()));
    let capital = std::fs::read_to_string(dir.path().join(output::INITIAL_CAPITAL)).unwrap();
    assert_eq!(capital.lines().count(), 1 + 2 * c.market.insurers.len());
}

#[test]
fn report_ignores_path_order() {
    let c = small_config();
    let out = run(&c, RunOptions::default());
    let mut shuffled = out.paths.clone();
    let mut rng = rng_from_seed(9);
    for sc in &mut shuffled {
        let mut idx: Vec<usize> = (0..sc.n_paths()).collect();
        idx.shuffle(&mut rng);
        sc.capital = idx.iter().map(|&i| sc.capital[i].clone()).collect();
        sc.claims = idx.iter().map(|&i| sc.claims[i].clone()).collect();
    }
    assert_eq!(compute_risk_report(&shuffled, &c.run.cagr_horizons).unwrap(), out.report);
}

#[test]
fn bad_requests_are_validation_errors() {
    let c = small_config();
    let e = run_simulation(&c, &RunOptions { scenario: Some("SSP9".into()), ..Default::default() }, Path::new("."))
        .unwrap_err();
    assert!(e.is_validation(), "{e}");
    let e = run_simulation(&c, &RunOptions { n_paths: Some(0), ..Default::default() }, Path::new(".")).unwrap_err();
    assert!(matches!(e, DfaError::Config(_)), "{e}");

    let mut bad = c.clone();
    bad.market.insurers[0].share += 0.1;
    assert!(run_simulation(&bad, &RunOptions::default(), Path::new(".")).unwrap_err().is_validation());
}

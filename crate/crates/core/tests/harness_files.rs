use std::fs;

use locdyn::harness::{
    estimates_csv, run_monte_carlo, run_sweep, summary_csv, summary_from_estimates, summary_from_summary_csv,
    write_results, Algorithm, ErrorMetric, ExperimentConfig, SUMMARY_FILE,
};
use locdyn::{gen_lap, LapParams, Scenario, ScenarioKind};

fn short_lap() -> Scenario {
    gen_lap(&LapParams {
        steps: 40,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn summary_regenerates_from_estimates() {
    let sc = short_lap();
    for metric in [ErrorMetric::Stacked, ErrorMetric::PerNode] {
        let cfg = ExperimentConfig {
            trials: 6,
            metric,
            ..Default::default()
        };
        let run = run_monte_carlo(&cfg, &sc, true).unwrap();
        let rebuilt = summary_from_estimates(&estimates_csv(&run, sc.dim()), metric).unwrap();
        assert_eq!(rebuilt, run.summary.algorithms);
        let reread = summary_from_summary_csv(&summary_csv(&run.summary)).unwrap();
        assert_eq!(reread, run.summary.algorithms);
    }
}

#[test]
fn algorithms_share_measurements() {
    // the same trial seed yields the same LocDyn errors whether or not the
    // baselines run alongside it
    let sc = short_lap();
    let all = ExperimentConfig {
        trials: 3,
        ..Default::default()
    };
    let only = ExperimentConfig {
        algorithms: vec![Algorithm::Locdyn],
        ..all.clone()
    };
    let a = run_monte_carlo(&all, &sc, false).unwrap().summary;
    let b = run_monte_carlo(&only, &sc, false).unwrap().summary;
    assert_eq!(a.get(Algorithm::Locdyn), b.get(Algorithm::Locdyn));
}

#[test]
fn result_directory_layout() {
    let sc = short_lap();
    let cfg = ExperimentConfig {
        trials: 2,
        ..Default::default()
    };
    let run = run_monte_carlo(&cfg, &sc, false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(dir.path(), &cfg, &run, 2).unwrap();
    for f in [
        "summary.csv",
        "stats.csv",
        "cdf_locdyn.csv",
        "cdf_static.csv",
        "cdf_kalman.csv",
        "run.toml",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("estimates.csv").exists());
    let summary = fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2);
    let meta = fs::read_to_string(dir.path().join("run.toml")).unwrap();
    assert!(meta.contains("runtime_secs") && meta.contains("[config]"));
}

#[test]
fn lambda_sweep_reports_each_weight() {
    let sc = ScenarioKind::Spiral.generate_default().unwrap();
    let cfg = ExperimentConfig {
        trials: 2,
        lambdas: vec![0.1, 1.0],
        ..ExperimentConfig::for_kind(ScenarioKind::Spiral)
    };
    let pts = run_sweep(&cfg, &sc).unwrap();
    assert_eq!(pts.len(), 2);
    let stat: Vec<f64> = pts
        .iter()
        .map(|p| p.summary.get(Algorithm::Static).unwrap().mean)
        .collect();
    assert_eq!(stat[0], stat[1]);
    let loc: Vec<f64> = pts
        .iter()
        .map(|p| p.summary.get(Algorithm::Locdyn).unwrap().mean)
        .collect();
    assert_ne!(loc[0], loc[1]);
}

#[test]
fn saved_scenario_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for kind in [ScenarioKind::Lap, ScenarioKind::Spiral, ScenarioKind::Lawnmower] {
        let sc = kind.generate_default().unwrap();
        let sub = dir.path().join(kind.name());
        sc.save(&sub).unwrap();
        let back = Scenario::load(&sub).unwrap();
        assert_eq!(back, sc);
        let via_file = Scenario::load(sub.join("scenario.toml")).unwrap();
        assert_eq!(via_file, sc);
    }
}

use std::fs;

use ssa_core::config::WorldConfig;
use ssa_core::coverage::{SightArc, TargetDisk};
use ssa_core::geometry::Position;
use ssa_core::harness::{
    cmd_analytic, cmd_coverage, cmd_simulate, cmd_sweep, cmd_thinning, list_outputs,
    thinning_report, AnalyticRequest, CoverageScenario, DensityGrid, RunOptions, Scale,
    ThinningConfig,
};
use ssa_core::stats::TimeUnit;

fn read(path: &std::path::Path) -> String {
    fs::read_to_string(path).unwrap()
}

#[test]
fn analytic_csv_has_header_and_peak() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.csv");
    let table = cmd_analytic(&AnalyticRequest::default(), &out).unwrap();
    let text = read(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_ms,pdf_per_ms,cdf"));
    assert_eq!(lines.count(), table.rows.len());
    assert_eq!(table.peak_x(), 150.0);
    let cdf: Vec<f64> = table.rows.iter().map(|r| r.2).collect();
    assert!(cdf.windows(2).all(|w| w[1] >= w[0]));
    assert!(out.with_extension("svg").exists());
}

#[test]
fn analytic_rejects_bad_rate() {
    let dir = tempfile::tempdir().unwrap();
    let req = AnalyticRequest {
        rate: 0.0,
        ..AnalyticRequest::default()
    };
    let err = cmd_analytic(&req, &dir.path().join("a.csv")).unwrap_err();
    assert!(err.is_invalid_input());
}

#[test]
fn simulate_single_trial_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = WorldConfig {
        width: 500.0,
        depth: 500.0,
        intensity: 200.0 / 250_000.0,
        trials: 1,
        ..WorldConfig::default()
    };
    let rep = cmd_simulate(
        &cfg,
        dir.path(),
        RunOptions {
            threads: None,
            write_traces: true,
        },
    )
    .unwrap();
    assert_eq!(rep.trials, 1);
    let samples = read(&dir.path().join("samples.csv"));
    assert_eq!(samples.lines().count(), 2);
    assert!(samples.starts_with("latency_ms"));
    let traces = read(&dir.path().join("traces.csv"));
    assert!(traces.starts_with("trial_id,hop_idx,from_id,to_id,distance_m,hop_time_s,cumulative_s"));
    for f in [
        "histogram.csv",
        "summary.csv",
        "report.json",
        "histogram.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn impossible_config_warns_instead_of_failing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = WorldConfig {
        intensity: 0.0,
        rule: ssa_core::SsaCompletionRule::NVehiclesInformed { n: 2 },
        trials: 20,
        ..WorldConfig::default()
    };
    let rep = cmd_simulate(&cfg, dir.path(), RunOptions::default()).unwrap();
    assert!(rep.has_warning());
    assert_eq!(rep.completed, 0);
    assert_eq!(rep.stall_fraction, 1.0);
    assert_eq!(read(&dir.path().join("samples.csv")).trim(), "latency_ms");
}

#[test]
fn simulate_is_thread_count_independent() {
    let cfg = WorldConfig::from_json(include_str!("../../../configs/calibration.json")).unwrap();
    let cfg = WorldConfig { trials: 500, ..cfg };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_simulate(
        &cfg,
        a.path(),
        RunOptions {
            threads: Some(1),
            write_traces: true,
        },
    )
    .unwrap();
    cmd_simulate(
        &cfg,
        b.path(),
        RunOptions {
            threads: Some(5),
            write_traces: true,
        },
    )
    .unwrap();
    let fa = list_outputs(a.path()).unwrap();
    let fb = list_outputs(b.path()).unwrap();
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{x:?}");
    }
}

#[test]
fn single_density_sweep_matches_simulate() {
    let base = WorldConfig::from_json(include_str!("../../../configs/density_sweep.json")).unwrap();
    let cfg = WorldConfig {
        trials: 300,
        ..base
    };
    let dir = tempfile::tempdir().unwrap();
    let intensity = 1.0 / 30.0;
    let rep = cmd_sweep(
        &cfg,
        &DensityGrid::new(vec![intensity]).unwrap(),
        Scale::Desk,
        &dir.path().join("sweep"),
        RunOptions::default(),
    )
    .unwrap();
    let desk = WorldConfig {
        width: 200.0,
        depth: 200.0,
        intensity,
        ..cfg
    };
    let sim = cmd_simulate(&desk, &dir.path().join("sim"), RunOptions::default()).unwrap();
    assert_eq!(rep.rows[0].completed, sim.completed);
    let samples = read(&dir.path().join("sim/samples.csv"));
    let mut xs: Vec<f64> = samples
        .lines()
        .skip(1)
        .map(|l| l.parse().unwrap())
        .collect();
    xs.sort_by(f64::total_cmp);
    let d = ssa_core::EmpiricalDist::new(xs, TimeUnit::Milliseconds).unwrap();
    assert_eq!(rep.rows[0].quartiles_ms.unwrap()[1], d.quantile(0.5));
    for f in ["quantiles.csv", "feasibility.csv", "cdf.csv", "cdf.svg"] {
        assert!(dir.path().join("sweep").join(f).exists(), "{f}");
    }
}

fn scenario(arcs: Vec<SightArc>) -> CoverageScenario {
    CoverageScenario {
        target: TargetDisk {
            center: Position::new(0.0, 0.0),
            radius: 10.0,
        },
        arcs,
        sample_points: 20_000,
        seed: 3,
        min_cover_threshold: None,
    }
}

#[test]
fn coverage_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let empty = cmd_coverage(&scenario(vec![]), &out).unwrap();
    assert_eq!(empty.estimate.rate, 0.0);
    assert!(read(&out).starts_with("rate,std_err,sample_points,min_cover_subset\n0,"));

    let full = SightArc {
        apex: Position::new(0.0, 0.0),
        heading: 0.0,
        half_angle: std::f64::consts::PI,
        radius: 10.0,
    };
    let mut s = scenario(vec![full]);
    s.min_cover_threshold = Some(1.0);
    let r = cmd_coverage(&s, &out).unwrap();
    assert_eq!(r.estimate.rate, 1.0);
    assert_eq!(r.min_cover, Some(vec![0]));

    let bad = SightArc {
        radius: -1.0,
        ..full
    };
    assert!(cmd_coverage(&scenario(vec![bad]), &out)
        .unwrap_err()
        .is_invalid_input());
}

#[test]
fn shipped_coverage_scenario_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path =
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/coverage_scene.json");
    let s = CoverageScenario::load(&path).unwrap();
    let r = cmd_coverage(&s, &dir.path().join("c.csv")).unwrap();
    assert!(r.estimate.rate > 0.0 && r.estimate.rate < 1.0);
    if let Some(sub) = r.min_cover {
        assert!(sub.len() <= s.arcs.len());
    }
}

#[test]
fn thinning_whole_world_disk() {
    let cfg = ThinningConfig {
        width: 100.0,
        depth: 100.0,
        intensity: 1e-3,
        radius: 80.0,
        center: Some(Position::new(50.0, 50.0)),
        seeds: 4000,
        root_seed: 9,
    };
    let rep = thinning_report(&cfg).unwrap();
    assert!((rep.rho - 1.0).abs() < 1e-9, "{}", rep.rho);
    assert!((rep.poisson_mean - 10.0).abs() < 1e-6);
    assert!(!rep.chi_square.reject_at_01, "{:?}", rep.chi_square);
}

#[test]
fn thinning_sparse_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ThinningConfig {
        intensity: 1e-5,
        seeds: 3000,
        ..ThinningConfig::default()
    };
    let rep = cmd_thinning(&cfg, dir.path()).unwrap();
    assert!(rep.poisson_mean < 1.0);
    assert!(!rep.chi_square.reject_at_01, "{:?}", rep.chi_square);
    for f in ["thinning.csv", "chi_square.csv", "thinning.svg"] {
        assert!(dir.path().join(f).exists());
    }
    assert!(thinning_report(&ThinningConfig {
        intensity: 0.0,
        ..cfg
    })
    .is_err());
}

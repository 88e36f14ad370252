//! Acceptance suite. Run with `cargo test -p ssa-core --test acceptance`.
//! Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use ssa_core::config::WorldConfig;
use ssa_core::coverage::{min_cover_subset, CoveragePoints, SightArc, TargetDisk};
use ssa_core::geometry::{nn_distance_pdf, sample_ppp, AreaIntensity, Position, WorldArea};
use ssa_core::harness::{
    cmd_simulate, cmd_sweep, list_outputs, thinning_report, DensityGrid, RunOptions, Scale,
    ThinningConfig,
};
use ssa_core::latency::{gamma_cdf, mgf_product_relative_error, sum_hops_law, GammaParams};
use ssa_core::propagation::run_trial;
use ssa_core::seed::{derive_seed, rng_from_seed};
use ssa_core::stats::ks_statistic;

const ROOT: u64 = 20_240_601;

const KS_SUM_TRIALS: usize = 100_000;
const KS_SUM_MAX_D: f64 = 0.006;
const KS_SUM_MAX_TIME: Duration = Duration::from_secs(10);

const MGF_TRIPLES: usize = 100;
const MGF_MAX_REL_ERR: f64 = 1e-12;

const THIN_BATCHES: u64 = 100;
const THIN_SEEDS: usize = 10_000;
const THIN_MIN_PASSING: usize = 95;
const THIN_P_FLOOR: f64 = 0.01;
const THIN_MAX_TIME: Duration = Duration::from_secs(60);

const SIM_TRIALS: u64 = 10_000;
const SIM_MAX_D: f64 = 0.02;

const SWEEP_TRIALS: usize = 2000;

const NN_SAMPLES: u64 = 100_000;
const NN_INTENSITY: f64 = 1e-3;
const NN_REL_TOL: f64 = 0.01;

const COVER_POINTS: usize = 1_000_000;
const COVER_FULL_TOL: f64 = 0.002;
const COVER_RANDOM_SCENARIOS: u64 = 100;

const MIN_COVER_INSTANCES: u64 = 50;
const MIN_COVER_ARCS: usize = 8;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn four_hop_law() -> GammaParams {
    GammaParams::new(4.0, 1.0 / 50.0).unwrap()
}

fn hop_sums_ks() -> Outcome {
    let start = Instant::now();
    let per = GammaParams::new(1.0, 1.0 / 50.0).unwrap();
    let law = sum_hops_law(4, per).unwrap().total;
    let mut rng = rng_from_seed(derive_seed(ROOT, 1));
    let mut sums: Vec<f64> = (0..KS_SUM_TRIALS)
        .map(|_| (0..4).map(|_| per.sample(&mut rng)).sum())
        .collect();
    sums.sort_by(f64::total_cmp);
    let d = ks_statistic(&sums, |x| gamma_cdf(law, x).unwrap());
    let took = start.elapsed();
    outcome(
        law == four_hop_law() && d < KS_SUM_MAX_D && took < KS_SUM_MAX_TIME,
        format!("D = {d:.5} (< {KS_SUM_MAX_D}), {took:.2?} (< {KS_SUM_MAX_TIME:?})"),
    )
}

fn mgf_identity() -> Outcome {
    let mut rng = rng_from_seed(derive_seed(ROOT, 2));
    let mut worst: f64 = 0.0;
    for _ in 0..MGF_TRIPLES {
        let n = rng.random_range(1..=50u32);
        let k = rng.random_range(0.1..10.0);
        let rate = 10f64.powf(rng.random_range(-3.0..3.0));
        let per = GammaParams::new(k, rate).unwrap();
        let total = sum_hops_law(n, per).unwrap().total;
        for frac in [0.25, 0.5, 0.75] {
            worst = worst.max(mgf_product_relative_error(total, per, n, frac * rate).unwrap());
        }
    }
    outcome(
        worst < MGF_MAX_REL_ERR,
        format!(
            "worst relative error {worst:.2e} over {MGF_TRIPLES} triples (< {MGF_MAX_REL_ERR:e})"
        ),
    )
}

fn thinning() -> Outcome {
    let start = Instant::now();
    let passing = (0..THIN_BATCHES)
        .filter(|&b| {
            let cfg = ThinningConfig {
                width: 1000.0,
                depth: 1000.0,
                intensity: 100.0 / 1e6,
                radius: 100.0,
                center: None,
                seeds: THIN_SEEDS,
                root_seed: derive_seed(ROOT ^ 3, b),
            };
            thinning_report(&cfg).unwrap().chi_square.p_value > THIN_P_FLOOR
        })
        .count();
    let took = start.elapsed();
    outcome(
        passing >= THIN_MIN_PASSING && took < THIN_MAX_TIME,
        format!(
            "{passing}/{THIN_BATCHES} batches with p > {THIN_P_FLOOR} (>= {THIN_MIN_PASSING}), {took:.2?} (< {THIN_MAX_TIME:?})"
        ),
    )
}

fn simulator_vs_theory() -> Outcome {
    let cfg = WorldConfig::from_json(include_str!("../../../configs/calibration.json")).unwrap();
    let mut ms: Vec<f64> = (0..SIM_TRIALS)
        .into_par_iter()
        .map(|i| run_trial(&cfg, derive_seed(ROOT ^ 4, i)).unwrap())
        .filter(|t| t.completed)
        .map(|t| t.total_latency_s * 1e3)
        .collect();
    let completed = ms.len();
    ms.sort_by(f64::total_cmp);
    let d = ks_statistic(&ms, |x| gamma_cdf(four_hop_law(), x).unwrap());
    outcome(
        completed as u64 == SIM_TRIALS && d < SIM_MAX_D,
        format!("{completed}/{SIM_TRIALS} completed, D = {d:.5} (< {SIM_MAX_D})"),
    )
}

fn density_monotonicity() -> Outcome {
    let cfg = WorldConfig::from_json(include_str!("../../../configs/density_sweep.json")).unwrap();
    let cfg = WorldConfig {
        trials: SWEEP_TRIALS,
        root_seed: ROOT ^ 5,
        ..cfg
    };
    let dir = tempfile::tempdir().unwrap();
    let rep = cmd_sweep(
        &cfg,
        &DensityGrid::reference(),
        Scale::Desk,
        dir.path(),
        RunOptions::default(),
    )
    .unwrap();
    let mut rows = rep.rows.clone();
    rows.sort_by(|a, b| a.intensity.total_cmp(&b.intensity));
    let mut quant = true;
    let mut feas = true;
    for w in rows.windows(2) {
        match (
            w[0].quartiles_ms,
            w[1].quartiles_ms,
            w[0].feasibility,
            w[1].feasibility,
        ) {
            (Some(ql), Some(qh), Some(fl), Some(fh)) => {
                quant &= qh.iter().zip(&ql).all(|(h, l)| h <= l);
                feas &= fh[3] >= fl[3];
            }
            _ => (quant, feas) = (false, false),
        }
    }
    let medians: Vec<String> = rows
        .iter()
        .map(|r| {
            r.quartiles_ms
                .map_or("-".into(), |q| format!("{:.1}", q[1]))
        })
        .collect();
    let at100: Vec<String> = rows
        .iter()
        .map(|r| r.feasibility.map_or("-".into(), |f| format!("{:.3}", f[3])))
        .collect();
    outcome(
        quant && feas,
        format!(
            "quartiles nonincreasing: {quant}, P(<=100 ms) nondecreasing: {feas}; medians ms [{}], P(<=100 ms) [{}]",
            medians.join(", "),
            at100.join(", ")
        ),
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn nearest_neighbor_mean() -> Outcome {
    let l = AreaIntensity(NN_INTENSITY);
    let area = WorldArea::new(400.0, 400.0).unwrap();
    let c = area.center();
    let total: f64 = (0..NN_SAMPLES)
        .into_par_iter()
        .map(|s| {
            let f = sample_ppp(l, area, derive_seed(ROOT ^ 6, s)).unwrap();
            let id = f.nearest_to_point(c).unwrap();
            f.vehicles()[id].position.distance(c)
        })
        .sum();
    let empirical = total / NN_SAMPLES as f64;
    let oracle = simpson(
        |r| r * nn_distance_pdf(1, l, r).unwrap(),
        0.0,
        600.0,
        60_000,
    );
    let closed = 1.0 / (2.0 * NN_INTENSITY.sqrt());
    let rel = (empirical - closed).abs() / closed;
    outcome(
        rel < NN_REL_TOL && (oracle - closed).abs() / closed < 1e-6,
        format!("mean {empirical:.4} m vs {closed:.4} m (rel {rel:.4} < {NN_REL_TOL}), quadrature {oracle:.4} m"),
    )
}

fn arc(x: f64, y: f64, heading: f64, half_angle: f64, radius: f64) -> SightArc {
    SightArc {
        apex: Position::new(x, y),
        heading,
        half_angle,
        radius,
    }
}

fn random_arcs(rng: &mut impl Rng, n: usize) -> Vec<SightArc> {
    (0..n)
        .map(|_| {
            arc(
                rng.random_range(-80.0..80.0),
                rng.random_range(-80.0..80.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(PI / 12.0..PI / 3.0),
                rng.random_range(40.0..100.0),
            )
        })
        .collect()
}

fn coverage_estimator() -> Outcome {
    let target = TargetDisk {
        center: Position::new(0.0, 0.0),
        radius: 50.0,
    };
    let pts = CoveragePoints::sample(target, COVER_POINTS, derive_seed(ROOT, 7)).unwrap();
    let full = pts.estimate(&[arc(0.0, 0.0, 1.0, PI, 50.0)]).rate;
    let disjoint = pts.estimate(&[arc(200.0, 0.0, 0.0, PI / 4.0, 100.0)]).rate;
    let mut violations = 0;
    let mut rng = rng_from_seed(derive_seed(ROOT, 70));
    for s in 0..COVER_RANDOM_SCENARIOS {
        let n = rng.random_range(1..=8);
        let arcs = random_arcs(&mut rng, n);
        let pts = CoveragePoints::sample(target, 5000, derive_seed(ROOT, 700 + s)).unwrap();
        let mut prev = 0.0;
        for k in 1..=n {
            let r = pts.estimate(&arcs[..k]).rate;
            if !(prev..=1.0).contains(&r) {
                violations += 1;
            }
            prev = r;
        }
        let sum: f64 = arcs
            .iter()
            .map(|a| pts.estimate(std::slice::from_ref(a)).rate)
            .sum();
        if prev > sum + 1e-12 {
            violations += 1;
        }
    }
    outcome(
        (full - 1.0).abs() <= COVER_FULL_TOL && disjoint == 0.0 && violations == 0,
        format!(
            "contained {full:.4} (1 +/- {COVER_FULL_TOL}), disjoint {disjoint}, {violations} invariant violations in {COVER_RANDOM_SCENARIOS} scenarios"
        ),
    )
}

/// Exhaustive search: smallest subset, ties broken lexicographically.
fn exhaustive_min_cover(arcs: &[SightArc], pts: &[Position], threshold: f64) -> Option<Vec<usize>> {
    let needed = (threshold * pts.len() as f64).ceil() as usize;
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..1 << arcs.len() {
        let chosen: Vec<usize> = (0..arcs.len()).filter(|i| mask >> i & 1 == 1).collect();
        if best.as_ref().is_some_and(|b| b.len() < chosen.len()) {
            continue;
        }
        let covered = pts
            .iter()
            .filter(|p| chosen.iter().any(|&i| arcs[i].contains(**p)))
            .count();
        if covered >= needed
            && best
                .as_ref()
                .is_none_or(|b| chosen.len() < b.len() || chosen < *b)
        {
            best = Some(chosen);
        }
    }
    best
}

fn min_cover_agreement() -> Outcome {
    let target = TargetDisk {
        center: Position::new(0.0, 0.0),
        radius: 50.0,
    };
    let mut rng = rng_from_seed(derive_seed(ROOT, 8));
    let mut agree = 0;
    let mut found = 0;
    for i in 0..MIN_COVER_INSTANCES {
        let arcs = random_arcs(&mut rng, MIN_COVER_ARCS);
        let pts = CoveragePoints::sample(target, 2000, derive_seed(ROOT, 800 + i)).unwrap();
        let threshold = rng.random_range(0.1..0.9) * pts.estimate(&arcs).rate + 0.001;
        let ours = min_cover_subset(&arcs, &pts, threshold).unwrap();
        let theirs = exhaustive_min_cover(&arcs, pts.points(), threshold);
        found += usize::from(ours.is_some());
        agree += usize::from(ours == theirs);
    }
    outcome(
        agree as u64 == MIN_COVER_INSTANCES,
        format!("{agree}/{MIN_COVER_INSTANCES} identical subsets ({found} feasible)"),
    )
}

fn determinism() -> Outcome {
    let cfg = WorldConfig::from_json(include_str!("../../../configs/reference.json")).unwrap();
    let cfg = WorldConfig {
        trials: 2000,
        root_seed: ROOT ^ 9,
        ..cfg
    };
    let runs: Vec<(tempfile::TempDir, Vec<std::path::PathBuf>)> = [Some(1), Some(4), None]
        .into_iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            cmd_simulate(
                &cfg,
                dir.path(),
                RunOptions {
                    threads,
                    write_traces: true,
                },
            )
            .unwrap();
            let files = list_outputs(dir.path()).unwrap();
            (dir, files)
        })
        .collect();
    let names = |files: &[std::path::PathBuf]| -> Vec<_> {
        files
            .iter()
            .map(|f| f.file_name().unwrap().to_owned())
            .collect()
    };
    let (_, first) = &runs[0];
    let mut identical = true;
    let mut csvs = 0;
    for (_, files) in &runs[1..] {
        identical &= names(first) == names(files);
        for (a, b) in first.iter().zip(files) {
            if a.extension().is_some_and(|e| e == "csv") {
                csvs += 1;
            }
            identical &= fs::read(a).unwrap() == fs::read(b).unwrap();
        }
    }
    outcome(
        identical,
        format!("{csvs} CSV comparisons across 1, 4 and default threads: identical = {identical}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("hop-sum closed form (KS)", hop_sums_ks),
        ("MGF product identity", mgf_identity),
        ("Poisson thinning", thinning),
        ("simulator vs closed form", simulator_vs_theory),
        ("density monotonicity", density_monotonicity),
        ("nearest-neighbor mean", nearest_neighbor_mean),
        ("coverage estimator", coverage_estimator),
        ("min cover subset", min_cover_agreement),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.1?})",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed()
        );
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! Experiment commands behind the `ssa` CLI. Each command writes CSV
//! tables (the stable output) plus an SVG chart, and returns a report
//! the caller turns into an exit status.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::coverage::{min_cover_subset, CoverageEstimate, CoveragePoints, SightArc, TargetDisk};
use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::geometry::{
    sample_ppp_points, AreaIntensity, Position, Vehicle, VehicleField, WorldArea,
};
use crate::latency::{scale_hop, sum_hops_law, GammaParams};
use crate::propagation::{
    summarize, write_traces_csv, BatchOutcome, HopDistance, PropagationTrace, Simulator,
    SsaCompletionRule,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::stats::{
    chi_square_poisson, fit_gamma_moments, histogram, ks_test, write_samples_csv, EmpiricalDist,
    GofReport, TimeUnit, KS_MIN_SAMPLES,
};
use crate::svg;

/// Latency requirement of one safety application.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaeRequirement {
    pub use_case: &'static str,
    pub latency_ms: f64,
}

pub const SAE_REQUIREMENTS: [SaeRequirement; 7] = [
    SaeRequirement {
        use_case: "forward collision warning",
        latency_ms: 100.0,
    },
    SaeRequirement {
        use_case: "emergency stop",
        latency_ms: 100.0,
    },
    SaeRequirement {
        use_case: "cooperative collision avoidance",
        latency_ms: 100.0,
    },
    SaeRequirement {
        use_case: "see-through",
        latency_ms: 50.0,
    },
    SaeRequirement {
        use_case: "pre-crash sensing warning",
        latency_ms: 20.0,
    },
    SaeRequirement {
        use_case: "automated overtake",
        latency_ms: 10.0,
    },
    SaeRequirement {
        use_case: "high-density platooning",
        latency_ms: 10.0,
    },
];

/// Distinct thresholds of [`SAE_REQUIREMENTS`], ascending.
pub const SAE_THRESHOLDS_MS: [f64; 4] = [10.0, 20.0, 50.0, 100.0];

/// Reference density grid, one vehicle per 10, 30, ..., 110 square meters.
pub const REFERENCE_DENSITIES: [f64; 6] = [
    1.0 / 10.0,
    1.0 / 30.0,
    1.0 / 50.0,
    1.0 / 70.0,
    1.0 / 90.0,
    1.0 / 110.0,
];

/// Side of the reduced world used by desk-scale sweeps.
pub const DESK_SIDE_M: f64 = 200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    intensities: Vec<f64>,
}

impl DensityGrid {
    /// Intensities must be positive and strictly monotone (either direction).
    pub fn new(intensities: Vec<f64>) -> Result<Self> {
        if intensities.is_empty() {
            return Err(invalid_config("density grid is empty"));
        }
        if intensities.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(invalid_config("densities must be positive"));
        }
        let inc = intensities.windows(2).all(|w| w[0] < w[1]);
        let dec = intensities.windows(2).all(|w| w[0] > w[1]);
        if !(inc || dec) {
            return Err(invalid_config("densities must be strictly ordered"));
        }
        Ok(DensityGrid { intensities })
    }

    pub fn reference() -> Self {
        DensityGrid {
            intensities: REFERENCE_DENSITIES.to_vec(),
        }
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }
}

/// Square root of the expected vehicle count in `area`; for a 1 km square
/// this is the equivalent count along a 1 km line.
pub fn density_to_line_equivalent(intensity: AreaIntensity, area: &WorldArea) -> f64 {
    intensity.expected_count(area).sqrt()
}

pub fn square_kilometer() -> WorldArea {
    WorldArea {
        width: 1000.0,
        depth: 1000.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

// ---------------------------------------------------------------- analytic

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticRequest {
    pub shape: f64,
    pub rate: f64,
    pub hops: u32,
    /// Defaults to `ceil(mean + 6 sd)` of the total law.
    pub x_max: Option<f64>,
    pub step: f64,
    pub unit: TimeUnit,
}

impl Default for AnalyticRequest {
    fn default() -> Self {
        AnalyticRequest {
            shape: 1.0,
            rate: 1.0 / 50.0,
            hops: 4,
            x_max: None,
            step: 1.0,
            unit: TimeUnit::Milliseconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticTable {
    pub law: GammaParams,
    pub rows: Vec<(f64, f64, f64)>,
}

impl AnalyticTable {
    /// `x` of the largest tabulated density.
    pub fn peak_x(&self) -> f64 {
        self.rows
            .iter()
            .fold((0.0, f64::NEG_INFINITY), |best, r| {
                if r.1 > best.1 {
                    (r.0, r.1)
                } else {
                    best
                }
            })
            .0
    }
}

pub fn analytic_table(req: &AnalyticRequest) -> Result<AnalyticTable> {
    let per_hop = GammaParams::new(req.shape, req.rate)?;
    let law = sum_hops_law(req.hops, per_hop)?.total;
    if !(req.step > 0.0 && req.step.is_finite()) {
        return Err(invalid_arg(format!(
            "grid step must be positive, got {}",
            req.step
        )));
    }
    let x_max = req
        .x_max
        .unwrap_or_else(|| (law.mean() + 6.0 * law.variance().sqrt()).ceil());
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(invalid_arg(format!("x_max must be positive, got {x_max}")));
    }
    let points = (x_max / req.step).floor() as usize;
    if points > 10_000_000 {
        return Err(invalid_arg("analytic grid exceeds 10^7 points"));
    }
    let rows = (0..=points)
        .map(|i| {
            let x = i as f64 * req.step;
            Ok((x, law.pdf(x)?, law.cdf(x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalyticTable { law, rows })
}

/// Tabulates PDF and CDF of `Gamma(hops * shape, rate)` as `(x, pdf, cdf)`.
pub fn cmd_analytic(req: &AnalyticRequest, out: &Path) -> Result<AnalyticTable> {
    let table = analytic_table(req)?;
    let u = req.unit;
    let mut w = csv_writer(out)?;
    w.write_record([format!("x_{u}"), format!("pdf_per_{u}"), "cdf".into()])?;
    for (x, pdf, cdf) in &table.rows {
        w.write_record([x.to_string(), pdf.to_string(), cdf.to_string()])?;
    }
    w.flush()?;
    let curve: Vec<(f64, f64)> = table.rows.iter().map(|r| (r.0, r.1)).collect();
    let chart = svg::chart(
        &format!("Gamma({}, {})", table.law.shape, table.law.rate),
        &format!("latency [{u}]"),
        "density",
        None,
        &[svg::Series {
            label: "pdf".into(),
            points: &curve,
        }],
    );
    fs::write(out.with_extension("svg"), chart)?;
    Ok(table)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub write_traces: bool,
}

pub const SIMULATE_HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub trials: usize,
    pub completed: usize,
    pub stall_fraction: f64,
    pub unit: TimeUnit,
    pub mean: Option<f64>,
    pub fitted: Option<GammaParams>,
    /// Law the KS test compares against, and where it came from.
    pub reference: Option<GammaParams>,
    pub reference_source: &'static str,
    pub ks: Option<GofReport>,
    pub warnings: Vec<String>,
}

impl SimulateReport {
    pub fn has_warning(&self) -> bool {
        !self.warnings.is_empty()
    }
}

/// Stall fraction above which `simulate` reports a warning.
pub const STALL_WARNING_FRACTION: f64 = 0.05;

/// Analytic latency law implied by a config: only defined when hop
/// distances are modeled, hop time is pure flight time, and completion
/// counts vehicles (a fixed number of hops).
pub fn implied_latency_law(config: &WorldConfig) -> Result<Option<GammaParams>> {
    if let Some(law) = config.reference_law {
        return Ok(Some(law));
    }
    let (HopDistance::Modeled { .. }, SsaCompletionRule::NVehiclesInformed { n }) =
        (config.hop_distance, config.rule)
    else {
        return Ok(None);
    };
    if config.timing != crate::propagation::TimingMode::Distance || n < 2 {
        return Ok(None);
    }
    let distance_law = config.hop_distance.law().expect("modeled");
    // Per-hop time in seconds, then into the output unit.
    let per_hop = scale_hop(distance_law, config.signal_speed)?;
    let per_hop = GammaParams::new(per_hop.shape, per_hop.rate / config.unit.per_second())?;
    Ok(Some(sum_hops_law((n - 1) as u32, per_hop)?.total))
}

/// Runs `config.trials` trials and writes `samples.csv`, `histogram.csv`,
/// `summary.csv`, `report.json`, `histogram.svg` (and `traces.csv` when
/// requested) into `out_dir`.
pub fn cmd_simulate(
    config: &WorldConfig,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<SimulateReport> {
    let sim = Simulator::new(config)?;
    fs::create_dir_all(out_dir)?;
    let traces = sim.run_traces(config.trials, config.root_seed, opts.threads)?;
    if opts.write_traces {
        write_traces_csv(&traces, create(&out_dir.join("traces.csv"))?)?;
    }
    let unit = config.unit;
    let mut report = SimulateReport {
        trials: traces.len(),
        completed: 0,
        stall_fraction: 1.0,
        unit,
        mean: None,
        fitted: None,
        reference: None,
        reference_source: "none",
        ks: None,
        warnings: Vec::new(),
    };
    let outcome = match summarize(&traces, unit) {
        Ok(o) => Some(o),
        Err(Error::EmptyDistribution) => None,
        Err(e) => return Err(e),
    };

    let mut samples_csv = create(&out_dir.join("samples.csv"))?;
    let mut hist_rows = Vec::new();
    if let Some(o) = &outcome {
        let dist = &o.latencies;
        report.completed = dist.len();
        report.stall_fraction = o.stall_fraction();
        report.mean = Some(dist.mean());
        report.fitted = fit_gamma_moments(dist).ok();
        let (reference, source) = match implied_latency_law(config)? {
            Some(law) => (Some(law), "analytic"),
            None => (report.fitted, "moment_fit"),
        };
        report.reference = reference;
        report.reference_source = if reference.is_some() { source } else { "none" };
        if let Some(law) = reference {
            if dist.len() >= KS_MIN_SAMPLES {
                let ks = ks_test(dist, law)?;
                if ks.reject_at_01 {
                    report.warnings.push(format!(
                        "KS rejects the {source} law at the 1% level (D = {:.5}, p = {:.3e})",
                        ks.statistic, ks.p_value
                    ));
                }
                report.ks = Some(ks);
            }
        }
        write_samples_csv(dist, &mut samples_csv)?;
        let h = histogram(dist, SIMULATE_HISTOGRAM_BINS)?;
        for i in 0..h.counts.len() {
            let (lo, hi) = (h.edges[i], h.edges[i + 1]);
            let analytic = reference
                .map(|law| law.pdf(0.5 * (lo + hi)))
                .transpose()?
                .map_or(String::new(), |v| v.to_string());
            hist_rows.push((lo, hi, h.counts[i], h.densities[i], analytic));
        }
    } else {
        let mut w = csv::Writer::from_writer(&mut samples_csv);
        w.write_record([format!("latency_{unit}")])?;
        w.flush()?;
    }
    drop(samples_csv);
    if report.stall_fraction > STALL_WARNING_FRACTION {
        report.warnings.push(format!(
            "{:.1}% of trials stalled before completion",
            100.0 * report.stall_fraction
        ));
    }

    let mut w = csv_writer(&out_dir.join("histogram.csv"))?;
    w.write_record([
        format!("bin_lo_{unit}"),
        format!("bin_hi_{unit}"),
        "count".into(),
        format!("density_per_{unit}"),
        format!("reference_pdf_per_{unit}"),
    ])?;
    for (lo, hi, c, d, a) in &hist_rows {
        w.write_record([
            lo.to_string(),
            hi.to_string(),
            c.to_string(),
            d.to_string(),
            a.clone(),
        ])?;
    }
    w.flush()?;

    write_summary(&report, &out_dir.join("summary.csv"))?;
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;

    let bars: Vec<(f64, f64, f64)> = hist_rows.iter().map(|r| (r.0, r.1, r.3)).collect();
    let curve: Vec<(f64, f64)> = match (report.reference, hist_rows.last()) {
        (Some(law), Some(last)) => (0..=200)
            .map(|i| {
                let x = last.1 * i as f64 / 200.0;
                (x, law.pdf(x).unwrap_or(0.0))
            })
            .collect(),
        _ => Vec::new(),
    };
    let lines = if curve.is_empty() {
        Vec::new()
    } else {
        vec![svg::Series {
            label: format!("reference ({})", report.reference_source),
            points: &curve,
        }]
    };
    fs::write(
        out_dir.join("histogram.svg"),
        svg::chart(
            "SSA latency",
            &format!("latency [{unit}]"),
            "density",
            Some(svg::Bars { bins: &bars }),
            &lines,
        ),
    )?;
    Ok(report)
}

fn write_summary(r: &SimulateReport, path: &Path) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "value"])?;
    let rows: Vec<(String, String)> = vec![
        ("trials".into(), r.trials.to_string()),
        ("completed".into(), r.completed.to_string()),
        ("stall_fraction".into(), r.stall_fraction.to_string()),
        (format!("mean_{}", r.unit), opt(r.mean)),
        ("fit_shape".into(), opt(r.fitted.map(|g| g.shape))),
        (
            format!("fit_rate_per_{}", r.unit),
            opt(r.fitted.map(|g| g.rate)),
        ),
        ("reference_source".into(), r.reference_source.into()),
        ("reference_shape".into(), opt(r.reference.map(|g| g.shape))),
        (
            format!("reference_rate_per_{}", r.unit),
            opt(r.reference.map(|g| g.rate)),
        ),
        ("ks_d".into(), opt(r.ks.map(|k| k.statistic))),
        ("ks_p".into(), opt(r.ks.map(|k| k.p_value))),
        (
            "ks_reject_at_01".into(),
            r.ks.map_or(String::new(), |k| k.reject_at_01.to_string()),
        ),
    ];
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub intensity: f64,
    pub line_equivalent_per_km: f64,
    pub trials: usize,
    pub completed: usize,
    pub stall_fraction: f64,
    /// Quantiles at 0.25, 0.5, 0.75 in ms; `None` when every trial stalled.
    pub quartiles_ms: Option<[f64; 3]>,
    /// Empirical CDF at each of [`SAE_THRESHOLDS_MS`].
    pub feasibility: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub scale: Scale,
    pub rows: Vec<DensityRow>,
    pub quantiles_monotone: bool,
    pub feasibility_monotone: bool,
}

pub const SWEEP_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// Config with world size set for `scale`.
pub fn scaled_config(config: &WorldConfig, scale: Scale) -> WorldConfig {
    match scale {
        Scale::Full => config.clone(),
        Scale::Desk => WorldConfig {
            width: DESK_SIDE_M,
            depth: DESK_SIDE_M,
            ..config.clone()
        },
    }
}

/// Runs a batch per density and writes `quantiles.csv`, `cdf.csv`,
/// `feasibility.csv` and `cdf.svg` into `out_dir`.
pub fn cmd_sweep(
    config: &WorldConfig,
    grid: &DensityGrid,
    scale: Scale,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<SweepReport> {
    let base = scaled_config(config, scale);
    base.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut rows = Vec::new();
    let mut dists: Vec<(f64, Option<EmpiricalDist>)> = Vec::new();
    for &intensity in grid.intensities() {
        let cfg = WorldConfig {
            intensity,
            ..base.clone()
        };
        let sim = Simulator::new(&cfg)?;
        let traces = sim.run_traces(cfg.trials, cfg.root_seed, opts.threads)?;
        let outcome = match summarize(&traces, TimeUnit::Milliseconds) {
            Ok(o) => Some(o),
            Err(Error::EmptyDistribution) => None,
            Err(e) => return Err(e),
        };
        rows.push(density_row(intensity, &traces, outcome.as_ref()));
        dists.push((intensity, outcome.map(|o| o.latencies)));
    }

    let mut w = csv_writer(&out_dir.join("quantiles.csv"))?;
    w.write_record([
        "intensity_per_m2",
        "vehicles_per_km_line",
        "trials",
        "completed",
        "stall_fraction",
        "q25_ms",
        "q50_ms",
        "q75_ms",
    ])?;
    for r in &rows {
        let q = |i: usize| r.quartiles_ms.map_or(String::new(), |q| q[i].to_string());
        w.write_record([
            r.intensity.to_string(),
            r.line_equivalent_per_km.to_string(),
            r.trials.to_string(),
            r.completed.to_string(),
            r.stall_fraction.to_string(),
            q(0),
            q(1),
            q(2),
        ])?;
    }
    w.flush()?;

    let mut w = csv_writer(&out_dir.join("feasibility.csv"))?;
    w.write_record([
        "use_case",
        "threshold_ms",
        "intensity_per_m2",
        "feasible_fraction",
    ])?;
    for req in &SAE_REQUIREMENTS {
        let ti = SAE_THRESHOLDS_MS
            .iter()
            .position(|t| *t == req.latency_ms)
            .expect("threshold table covers every requirement");
        for r in &rows {
            w.write_record([
                req.use_case.to_string(),
                req.latency_ms.to_string(),
                r.intensity.to_string(),
                r.feasibility.map_or(String::new(), |f| f[ti].to_string()),
            ])?;
        }
    }
    w.flush()?;

    let x_max = dists
        .iter()
        .filter_map(|(_, d)| d.as_ref().map(EmpiricalDist::max))
        .fold(SAE_THRESHOLDS_MS[3], f64::max);
    let mut grid_x: Vec<f64> = (0..=200).map(|i| x_max * i as f64 / 200.0).collect();
    grid_x.extend(SAE_THRESHOLDS_MS);
    grid_x.sort_by(f64::total_cmp);
    grid_x.dedup();
    let mut w = csv_writer(&out_dir.join("cdf.csv"))?;
    w.write_record(["intensity_per_m2", "latency_ms", "cdf"])?;
    let mut curves = Vec::new();
    for (intensity, dist) in &dists {
        let Some(d) = dist else { continue };
        let pts: Vec<(f64, f64)> = grid_x.iter().map(|&x| (x, d.cdf(x))).collect();
        for (x, c) in &pts {
            w.write_record([intensity.to_string(), x.to_string(), c.to_string()])?;
        }
        curves.push((*intensity, pts));
    }
    w.flush()?;
    let series: Vec<svg::Series<'_>> = curves
        .iter()
        .map(|(l, pts)| svg::Series {
            label: format!("1/{:.0} per m2", 1.0 / l),
            points: pts,
        })
        .collect();
    fs::write(
        out_dir.join("cdf.svg"),
        svg::chart(
            "SSA latency CDF by density",
            "latency [ms]",
            "CDF",
            None,
            &series,
        ),
    )?;

    let (quantiles_monotone, feasibility_monotone) = density_ordering(&rows);
    Ok(SweepReport {
        scale,
        rows,
        quantiles_monotone,
        feasibility_monotone,
    })
}

fn density_row(
    intensity: f64,
    traces: &[PropagationTrace],
    outcome: Option<&BatchOutcome>,
) -> DensityRow {
    let line = density_to_line_equivalent(AreaIntensity(intensity), &square_kilometer());
    match outcome {
        Some(o) => {
            let d = &o.latencies;
            DensityRow {
                intensity,
                line_equivalent_per_km: line,
                trials: o.trials,
                completed: d.len(),
                stall_fraction: o.stall_fraction(),
                quartiles_ms: Some(SWEEP_QUANTILES.map(|q| d.quantile(q))),
                feasibility: Some(SAE_THRESHOLDS_MS.map(|t| d.cdf(t))),
            }
        }
        None => DensityRow {
            intensity,
            line_equivalent_per_km: line,
            trials: traces.len(),
            completed: 0,
            stall_fraction: 1.0,
            quartiles_ms: None,
            feasibility: None,
        },
    }
}

/// Checks, with rows ordered by increasing intensity, that quartiles never
/// increase and feasibility never decreases. Densities where every trial
/// stalled fail both checks.
pub fn density_ordering(rows: &[DensityRow]) -> (bool, bool) {
    let mut sorted: Vec<&DensityRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.intensity.total_cmp(&b.intensity));
    let mut quant = true;
    let mut feas = true;
    for pair in sorted.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        match (lo.quartiles_ms, hi.quartiles_ms) {
            (Some(a), Some(b)) => quant &= b.iter().zip(&a).all(|(hq, lq)| hq <= lq),
            _ => quant = false,
        }
        match (lo.feasibility, hi.feasibility) {
            (Some(a), Some(b)) => feas &= b.iter().zip(&a).all(|(hf, lf)| hf >= lf),
            _ => feas = false,
        }
    }
    (quant, feas)
}

// ---------------------------------------------------------------- coverage

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageScenario {
    pub target: TargetDisk,
    #[serde(default)]
    pub arcs: Vec<SightArc>,
    #[serde(default = "default_sample_points")]
    pub sample_points: usize,
    #[serde(default)]
    pub seed: u64,
    /// When present, also search for the smallest covering subset.
    #[serde(default)]
    pub min_cover_threshold: Option<f64>,
}

fn default_sample_points() -> usize {
    100_000
}

impl CoverageScenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| invalid_config(format!("scenario JSON: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub estimate: CoverageEstimate,
    pub min_cover: Option<Vec<usize>>,
}

/// Writes `rate,std_err,sample_points,min_cover_subset` (one row) to `out`.
pub fn cmd_coverage(scenario: &CoverageScenario, out: &Path) -> Result<CoverageReport> {
    for arc in &scenario.arcs {
        arc.validate().map_err(|e| invalid_config(e.to_string()))?;
    }
    let points = CoveragePoints::sample(scenario.target, scenario.sample_points, scenario.seed)
        .map_err(|e| invalid_config(e.to_string()))?;
    let estimate = points.estimate(&scenario.arcs);
    let min_cover = match scenario.min_cover_threshold {
        Some(t) => min_cover_subset(&scenario.arcs, &points, t)?,
        None => None,
    };
    let mut w = csv_writer(out)?;
    w.write_record(["rate", "std_err", "sample_points", "min_cover_subset"])?;
    let subset = match (&scenario.min_cover_threshold, &min_cover) {
        (None, _) => String::new(),
        (Some(_), None) => "none".to_string(),
        (Some(_), Some(s)) => s
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" "),
    };
    w.write_record([
        estimate.rate.to_string(),
        estimate.std_err.to_string(),
        estimate.sample_points.to_string(),
        subset,
    ])?;
    w.flush()?;
    Ok(CoverageReport {
        estimate,
        min_cover,
    })
}

// ---------------------------------------------------------------- thinning

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThinningConfig {
    pub width: f64,
    pub depth: f64,
    pub intensity: f64,
    /// Disk radius (the transmission range), meters.
    pub radius: f64,
    /// Fixed disk center; when absent each seed draws a center uniformly
    /// among positions keeping the disk inside the world.
    pub center: Option<Position>,
    pub seeds: usize,
    pub root_seed: u64,
}

impl Default for ThinningConfig {
    fn default() -> Self {
        ThinningConfig {
            width: 1000.0,
            depth: 1000.0,
            intensity: 100.0 / 1e6,
            radius: 100.0,
            center: None,
            seeds: 10_000,
            root_seed: 1,
        }
    }
}

impl ThinningConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ThinningConfig = serde_json::from_str(&text)
            .map_err(|e| invalid_config(format!("thinning JSON: {e}")))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let area = WorldArea::new(self.width, self.depth)?;
        let intensity = AreaIntensity::new(self.intensity)?;
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid_config("radius must be positive"));
        }
        if self.seeds == 0 {
            return Err(invalid_config("seeds must be at least 1"));
        }
        if intensity.0 == 0.0 {
            return Err(invalid_config("thinning needs a positive intensity"));
        }
        match self.center {
            Some(c) if !area.contains(c) => {
                Err(invalid_config("disk center lies outside the world"))
            }
            None if 2.0 * self.radius > self.width.min(self.depth) => Err(invalid_config(
                "no interior disk of this radius fits in the world",
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThinningReport {
    /// Clipped disk area over world area.
    pub rho: f64,
    /// `rho * intensity * area`.
    pub poisson_mean: f64,
    pub counts: Vec<u64>,
    pub chi_square: GofReport,
}

/// Per-seed vehicle counts inside the disk.
pub fn thinning_counts(cfg: &ThinningConfig) -> Result<(f64, Vec<u64>)> {
    cfg.validate()?;
    let area = WorldArea::new(cfg.width, cfg.depth)?;
    let intensity = AreaIntensity::new(cfg.intensity)?;
    let results: Vec<Result<(f64, u64)>> = (0..cfg.seeds)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(cfg.root_seed, i as u64));
            let points = sample_ppp_points(intensity, &area, &mut rng)?;
            let center = cfg.center.unwrap_or_else(|| {
                let r = cfg.radius;
                Position::new(
                    r + rng.random::<f64>() * (area.width - 2.0 * r),
                    r + rng.random::<f64>() * (area.depth - 2.0 * r),
                )
            });
            let vehicles = points
                .into_iter()
                .enumerate()
                .map(|(id, p)| Vehicle::at_rest(id, p))
                .collect();
            let field = VehicleField::new(area, vehicles, cfg.radius)?;
            let rho = field.disk_ratio(center, cfg.radius);
            Ok((rho, field.count_in_disk(center, cfg.radius)? as u64))
        })
        .collect();
    let mut counts = Vec::with_capacity(cfg.seeds);
    let mut rho = 0.0;
    for r in results {
        let (rh, c) = r?;
        rho = rh;
        counts.push(c);
    }
    if cfg.center.is_none() {
        // Interior disks all share the same ratio.
        rho = area.clipped_disk_area(area.center(), cfg.radius) / area.area();
    }
    Ok((rho, counts))
}

pub fn thinning_report(cfg: &ThinningConfig) -> Result<ThinningReport> {
    let (rho, counts) = thinning_counts(cfg)?;
    let area = WorldArea::new(cfg.width, cfg.depth)?;
    let poisson_mean = rho * cfg.intensity * area.area();
    let chi_square = chi_square_poisson(&counts, poisson_mean)?;
    Ok(ThinningReport {
        rho,
        poisson_mean,
        counts,
        chi_square,
    })
}

/// Writes `thinning.csv` (observed frequency vs Poisson PMF per count),
/// `chi_square.csv` and `thinning.svg` into `out_dir`.
pub fn cmd_thinning(cfg: &ThinningConfig, out_dir: &Path) -> Result<ThinningReport> {
    let report = thinning_report(cfg)?;
    fs::create_dir_all(out_dir)?;
    let max = report.counts.iter().copied().max().unwrap_or(0);
    let last = max.max((report.poisson_mean + 6.0 * report.poisson_mean.sqrt()).ceil() as u64);
    let mut hist = vec![0u64; last as usize + 1];
    for &c in &report.counts {
        hist[c as usize] += 1;
    }
    let n = report.counts.len() as f64;
    let m = report.poisson_mean;
    let mut w = csv_writer(&out_dir.join("thinning.csv"))?;
    w.write_record([
        "vehicles_in_disk",
        "observed_seeds",
        "observed_freq",
        "poisson_pmf",
    ])?;
    let mut observed = Vec::new();
    let mut pmf_curve = Vec::new();
    for (k, &obs) in hist.iter().enumerate() {
        let pmf = (k as f64 * m.ln() - m - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();
        let freq = obs as f64 / n;
        w.write_record([
            k.to_string(),
            obs.to_string(),
            freq.to_string(),
            pmf.to_string(),
        ])?;
        observed.push((k as f64 - 0.4, k as f64 + 0.4, freq));
        pmf_curve.push((k as f64, pmf));
    }
    w.flush()?;

    let mut w = csv_writer(&out_dir.join("chi_square.csv"))?;
    w.write_record([
        "rho",
        "poisson_mean",
        "seeds",
        "chi_square",
        "p_value",
        "reject_at_01",
    ])?;
    let c = &report.chi_square;
    w.write_record([
        report.rho.to_string(),
        report.poisson_mean.to_string(),
        c.n.to_string(),
        c.statistic.to_string(),
        c.p_value.to_string(),
        c.reject_at_01.to_string(),
    ])?;
    w.flush()?;

    fs::write(
        out_dir.join("thinning.svg"),
        svg::chart(
            "Vehicles inside a transmission disk",
            "vehicles",
            "probability",
            Some(svg::Bars {
                bins: &shifted(&observed),
            }),
            &[svg::Series {
                label: format!("Poisson({m:.3})"),
                points: &pmf_curve,
            }],
        ),
    )?;
    Ok(report)
}

fn shifted(bins: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    bins.iter().map(|&(a, b, h)| (a.max(0.0), b, h)).collect()
}

/// Every file a command wrote under `dir`, sorted, for reproducibility checks.
pub fn list_outputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

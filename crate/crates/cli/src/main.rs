use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ssa_core::harness::{
    cmd_analytic, cmd_coverage, cmd_simulate, cmd_sweep, cmd_thinning, AnalyticRequest,
    CoverageScenario, DensityGrid, RunOptions, Scale, ThinningConfig, STALL_WARNING_FRACTION,
};
use ssa_core::{Error, WorldConfig};

const EXIT_WARNING: u8 = 1;
const EXIT_INVALID: u8 = 2;

/// Shared situation awareness latency simulator.
#[derive(Parser)]
#[command(name = "ssa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the closed-form PDF and CDF of an N-hop latency.
    Analytic(AnalyticArgs),
    /// Run a Monte Carlo batch and compare against the closed form.
    Simulate(SimArgs),
    /// Sweep vehicle densities and evaluate latency requirements.
    Sweep(SweepArgs),
    /// Estimate how much of a target disk a set of sight arcs covers.
    Coverage(CoverageArgs),
    /// Check that counts inside a disk are Poisson.
    Thinning(ThinningArgs),
}

#[derive(Args)]
struct AnalyticArgs {
    /// Per-hop Gamma shape.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    shape: f64,
    /// Per-hop Gamma rate, per millisecond.
    #[arg(long, default_value_t = 0.02, allow_negative_numbers = true)]
    rate: f64,
    #[arg(long, default_value_t = 4)]
    hops: u32,
    #[arg(long)]
    x_max: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[arg(long, default_value = "analytic.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct Common {
    /// JSON config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (defaults to all cores); results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn world(&self) -> ssa_core::Result<WorldConfig> {
        let mut cfg = match &self.config {
            Some(p) => WorldConfig::load(p)?,
            None => WorldConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.root_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Also write per-hop traces.
    #[arg(long)]
    traces: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleArg,
    /// Comma-separated intensities in vehicles per m², e.g. `1/10,1/50,0.01`.
    #[arg(long, value_delimiter = ',', value_parser = parse_intensity)]
    grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Scenario JSON with `target`, `arcs` and optional `sample_points`,
    /// `seed` and `min_cover_threshold`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "coverage.csv")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ThinningArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of sampled fields.
    #[arg(long)]
    trials: Option<usize>,
}

fn parse_intensity(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            let d: f64 = d.trim().parse().map_err(|e| format!("{s}: {e}"))?;
            n / d
        }
        None => s.parse().map_err(|e| format!("{s}: {e}"))?,
    };
    Ok(v)
}

/// Exit status of a successful command.
enum Status {
    Ok,
    Warning,
}

fn analytic(a: AnalyticArgs) -> ssa_core::Result<Status> {
    let req = AnalyticRequest {
        shape: a.shape,
        rate: a.rate,
        hops: a.hops,
        x_max: a.x_max,
        step: a.step,
        ..AnalyticRequest::default()
    };
    let table = cmd_analytic(&req, &a.out)?;
    println!(
        "Gamma({}, {}) over {} points, peak at {} ms -> {}",
        table.law.shape,
        table.law.rate,
        table.rows.len(),
        table.peak_x(),
        a.out.display()
    );
    Ok(Status::Ok)
}

fn simulate(a: SimArgs) -> ssa_core::Result<Status> {
    let cfg = a.common.world()?;
    let opts = RunOptions {
        threads: a.common.threads,
        write_traces: a.traces,
    };
    let r = cmd_simulate(&cfg, &a.common.out, opts)?;
    println!(
        "{}/{} trials completed (stall fraction {:.4})",
        r.completed, r.trials, r.stall_fraction
    );
    if let Some(m) = r.mean {
        println!("mean latency {m:.4} {}", r.unit);
    }
    if let (Some(law), Some(ks)) = (r.reference, r.ks) {
        println!(
            "{} law Gamma({:.4}, {:.6}): KS D = {:.5}, p = {:.4}",
            r.reference_source, law.shape, law.rate, ks.statistic, ks.p_value
        );
    }
    report_outputs(&a.common.out);
    Ok(warn(&r.warnings))
}

fn sweep(a: SweepArgs) -> ssa_core::Result<Status> {
    let cfg = a.common.world()?;
    let grid = match a.grid {
        Some(g) => DensityGrid::new(g)?,
        None => DensityGrid::reference(),
    };
    let scale = match a.scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Full => Scale::Full,
    };
    let opts = RunOptions {
        threads: a.common.threads,
        write_traces: false,
    };
    let r = cmd_sweep(&cfg, &grid, scale, &a.common.out, opts)?;
    println!(
        "{:>12} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "intensity", "per_km", "q50_ms", "P<=10", "P<=50", "P<=100"
    );
    let mut warnings = Vec::new();
    for row in &r.rows {
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        println!(
            "{:>12.6} {:>10.2} {:>10} {:>10} {:>10} {:>10}",
            row.intensity,
            row.line_equivalent_per_km,
            cell(row.quartiles_ms.map(|q| q[1])),
            cell(row.feasibility.map(|f| f[0])),
            cell(row.feasibility.map(|f| f[2])),
            cell(row.feasibility.map(|f| f[3])),
        );
        if row.stall_fraction > STALL_WARNING_FRACTION {
            warnings.push(format!(
                "intensity {}: {:.1}% of trials stalled",
                row.intensity,
                100.0 * row.stall_fraction
            ));
        }
    }
    if grid.intensities().len() > 1 {
        if !r.quantiles_monotone {
            warnings.push("latency quantiles are not monotone in density".into());
        }
        if !r.feasibility_monotone {
            warnings.push("feasibility is not monotone in density".into());
        }
    }
    report_outputs(&a.common.out);
    Ok(warn(&warnings))
}

fn coverage(a: CoverageArgs) -> ssa_core::Result<Status> {
    let mut scenario = CoverageScenario::load(&a.config)?;
    if let Some(s) = a.seed {
        scenario.seed = s;
    }
    let r = cmd_coverage(&scenario, &a.out)?;
    println!(
        "coverage {:.5} +/- {:.5} ({} points)",
        r.estimate.rate, r.estimate.std_err, r.estimate.sample_points
    );
    if let Some(t) = scenario.min_cover_threshold {
        match &r.min_cover {
            Some(s) => println!("smallest subset reaching {t}: {s:?}"),
            None => println!("no subset reaches {t}"),
        }
    }
    println!("wrote {}", a.out.display());
    Ok(Status::Ok)
}

fn thinning(a: ThinningArgs) -> ssa_core::Result<Status> {
    let mut cfg = match &a.config {
        Some(p) => ThinningConfig::load(p)?,
        None => ThinningConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.root_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.seeds = t;
    }
    let r = cmd_thinning(&cfg, &a.out)?;
    let c = &r.chi_square;
    println!(
        "rho = {:.6}, Poisson mean {:.4}, chi-square {:.3} (p = {:.4}) over {} fields",
        r.rho, r.poisson_mean, c.statistic, c.p_value, c.n
    );
    report_outputs(&a.out);
    let warnings: Vec<String> = if c.reject_at_01 {
        vec!["counts reject the Poisson law at the 1% level".into()]
    } else {
        Vec::new()
    };
    Ok(warn(&warnings))
}

fn warn(warnings: &[String]) -> Status {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if warnings.is_empty() {
        Status::Ok
    } else {
        Status::Warning
    }
}

fn report_outputs(dir: &Path) {
    let mut out = std::io::stdout().lock();
    if let Ok(files) = ssa_core::harness::list_outputs(dir) {
        for f in files {
            if writeln!(out, "wrote {}", f.display()).is_err() {
                return;
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analytic(a) => analytic(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Coverage(a) => coverage(a),
        Command::Thinning(a) => thinning(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Warning) => ExitCode::from(EXIT_WARNING),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_invalid(&e) {
                EXIT_INVALID
            } else {
                EXIT_WARNING
            })
        }
    }
}

fn is_invalid(e: &Error) -> bool {
    e.is_invalid_input() || matches!(e, Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound)
}

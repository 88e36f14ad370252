//! Empirical distributions and goodness-of-fit tests.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{invalid_arg, Error, Result};
use crate::latency::GammaParams;

/// Smallest sample accepted by [`ks_test`].
pub const KS_MIN_SAMPLES: usize = 10;
/// Smallest expected count allowed in a pooled chi-square bin.
pub const CHI_SQUARE_MIN_EXPECTED: f64 = 5.0;
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[serde(rename = "s")]
    Seconds,
    #[default]
    #[serde(rename = "ms")]
    Milliseconds,
}

impl TimeUnit {
    pub fn label(self) -> &'static str {
        match self {
            TimeUnit::Seconds => "s",
            TimeUnit::Milliseconds => "ms",
        }
    }

    /// Multiplier taking seconds into this unit.
    pub fn per_second(self) -> f64 {
        match self {
            TimeUnit::Seconds => 1.0,
            TimeUnit::Milliseconds => 1e3,
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s" => Ok(TimeUnit::Seconds),
            "ms" => Ok(TimeUnit::Milliseconds),
            other => Err(invalid_arg(format!("unknown time unit '{other}'"))),
        }
    }
}

/// Sorted, nonempty sample of nonnegative latencies.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    samples: Vec<f64>,
    unit: TimeUnit,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>, unit: TimeUnit) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if let Some(bad) = samples.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(invalid_arg(format!(
                "samples must be finite and nonnegative, got {bad}"
            )));
        }
        samples.sort_by(f64::total_cmp);
        Ok(EmpiricalDist { samples, unit })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.samples[0]
    }

    pub fn max(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance (0 for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        self.samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let at_or_below = self.samples.partition_point(|s| *s <= x);
        at_or_below as f64 / self.samples.len() as f64
    }

    /// Linearly interpolated quantile (R type 7).
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let h = (self.samples.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.samples[lo] + (h - lo as f64) * (self.samples[hi] - self.samples[lo])
    }
}

pub fn empirical_cdf(dist: &EmpiricalDist, x: f64) -> f64 {
    dist.cdf(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `bins + 1` ascending edges starting at 0.
    pub edges: Vec<f64>,
    /// Normalized so that `sum(density * width) == 1`.
    pub densities: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Center of the most populated bin (lowest on ties).
    pub fn peak_center(&self) -> f64 {
        let (i, _) =
            self.counts.iter().enumerate().fold(
                (0, 0),
                |best, (i, &c)| if c > best.1 { (i, c) } else { best },
            );
        0.5 * (self.edges[i] + self.edges[i + 1])
    }
}

/// Equal-width histogram over `[0, max]`.
pub fn histogram(dist: &EmpiricalDist, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(invalid_arg("histogram needs at least one bin"));
    }
    let max = dist.max();
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &x in dist.samples() {
        let i = ((x / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let norm = dist.len() as f64 * width;
    let densities = counts.iter().map(|&c| c as f64 / norm).collect();
    Ok(Histogram {
        edges,
        densities,
        counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub reject_at_01: bool,
}

impl GofReport {
    fn new(statistic: f64, p_value: f64, n: usize) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        GofReport {
            statistic,
            p_value,
            n,
            reject_at_01: p_value < SIGNIFICANCE,
        }
    }
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi theta form converges fast for small x.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let w = -pi2 / (8.0 * x * x);
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x
            * (1..=8)
                .map(|k| {
                    let j = (2 * k - 1) as f64;
                    (w * j * j).exp()
                })
                .sum::<f64>();
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// `sup |F_n(x) - F(x)|` of a sorted sample against a continuous CDF.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// One-sample Kolmogorov-Smirnov test against a Gamma law, with the
/// asymptotic p-value `P(K > sqrt(n) D)`.
pub fn ks_test(dist: &EmpiricalDist, law: GammaParams) -> Result<GofReport> {
    law.validate()?;
    let n = dist.len();
    if n < KS_MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: KS_MIN_SAMPLES,
            got: n,
        });
    }
    let d = ks_statistic(dist.samples(), |x| gamma_lr(law.shape, law.rate * x));
    Ok(GofReport::new(d, kolmogorov_sf((n as f64).sqrt() * d), n))
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi_square_sf(statistic: f64, df: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, statistic / 2.0)
}

fn pooled_chi_square(bins: impl IntoIterator<Item = (f64, f64)>, n: usize) -> Result<GofReport> {
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (o, e) in bins {
        obs += o;
        exp += e;
        if exp >= CHI_SQUARE_MIN_EXPECTED {
            pooled.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if obs > 0.0 || exp > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => pooled.push((obs, exp)),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: pooled.len(),
        });
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    Ok(GofReport::new(
        stat,
        chi_square_sf(stat, pooled.len() - 1),
        n,
    ))
}

fn poisson_ln_pmf(k: u64, mean: f64) -> f64 {
    k as f64 * mean.ln() - mean - ln_gamma(k as f64 + 1.0)
}

/// Chi-square goodness of fit of integer counts against Poisson(`mean`).
/// Adjacent bins are pooled left to right until each holds an expected count
/// of at least 5; the upper tail is one open bin.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> Result<GofReport> {
    if counts.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(invalid_arg(format!(
            "Poisson mean must be positive, got {mean}"
        )));
    }
    let n = counts.len();
    let max_seen = *counts.iter().max().unwrap();
    let last = max_seen.max((mean + 10.0 * mean.sqrt() + 10.0).ceil() as u64);
    let mut observed = vec![0u64; last as usize + 1];
    for &c in counts {
        observed[c.min(last) as usize] += 1;
    }
    let nf = n as f64;
    let bins = (0..=last).map(|k| {
        let p = if k == last {
            // P(X >= last)
            gamma_lr(last as f64, mean)
        } else {
            poisson_ln_pmf(k, mean).exp()
        };
        (observed[k as usize] as f64, nf * p)
    });
    pooled_chi_square(bins, n)
}

/// Chi-square test that `cell_counts` come from equally likely cells.
pub fn chi_square_uniform(cell_counts: &[u64]) -> Result<GofReport> {
    let total: u64 = cell_counts.iter().sum();
    if cell_counts.len() < 2 || total == 0 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: cell_counts.len(),
        });
    }
    let e = total as f64 / cell_counts.len() as f64;
    pooled_chi_square(cell_counts.iter().map(|&o| (o as f64, e)), total as usize)
}

/// Method-of-moments Gamma fit: `shape = mean^2 / var`, `rate = mean / var`.
pub fn fit_gamma_moments(dist: &EmpiricalDist) -> Result<GammaParams> {
    let var = dist.variance();
    let mean = dist.mean();
    if !(var > 0.0) || !(mean > 0.0) {
        return Err(Error::Degenerate(format!(
            "cannot fit a Gamma law to mean {mean}, variance {var}"
        )));
    }
    GammaParams::new(mean * mean / var, mean / var)
}

/// Writes one sample per line under a `latency_<unit>` header.
pub fn write_samples_csv<W: Write>(dist: &EmpiricalDist, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([format!("latency_{}", dist.unit())])?;
    for x in dist.samples() {
        w.write_record([x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<EmpiricalDist> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.get(0).unwrap_or_default().to_owned();
    let unit = header
        .strip_prefix("latency_")
        .ok_or_else(|| invalid_arg(format!("expected a latency_<unit> header, got '{header}'")))?
        .parse()?;
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or_default();
        samples.push(
            field
                .trim()
                .parse::<f64>()
                .map_err(|e| invalid_arg(format!("bad sample '{field}': {e}")))?,
        );
    }
    EmpiricalDist::new(samples, unit)
}

//! Closed-form latency algebra.
//!
//! All Gamma laws here use the **(shape, rate)** convention: the density is
//! `rate^shape / Gamma(shape) * x^(shape-1) * exp(-rate * x)`, so the mean is
//! `shape / rate`. `rand_distr` and several other libraries use
//! (shape, scale) with `scale = 1 / rate`; convert at the boundary only.
//!
//! A hop that covers distance `d` at signal speed `c` takes `d / c`. If the
//! hop distance is `Gamma(k, l)` then the hop time is `Gamma(k, c l)`, and a
//! path of `N` independent hops with a common law takes `Gamma(N k, c l)`.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{invalid_arg, Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl GammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let p = GammaParams { shape, rate };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(invalid_arg(format!(
                "Gamma shape must be positive, got {}",
                self.shape
            )));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(invalid_arg(format!(
                "Gamma rate must be positive, got {}",
                self.rate
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }

    /// Location of the density maximum (0 when shape <= 1).
    pub fn mode(&self) -> f64 {
        ((self.shape - 1.0) / self.rate).max(0.0)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        gamma_pdf(*self, x)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        gamma_cdf(*self, x)
    }

    pub fn mgf(&self, t: f64) -> Result<f64> {
        gamma_mgf(*self, t)
    }

    /// Shape 1 uses the inverse CDF `-ln(1 - u) / rate` of one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.shape == 1.0 {
            let u: f64 = rng.random();
            return -(-u).ln_1p() / self.rate;
        }
        // rand_distr is (shape, scale).
        rand_distr::Gamma::new(self.shape, 1.0 / self.rate)
            .expect("validated Gamma parameters")
            .sample(rng)
    }
}

pub fn gamma_pdf(params: GammaParams, x: f64) -> Result<f64> {
    params.validate()?;
    if !(x >= 0.0) {
        return Err(invalid_arg(format!("Gamma density needs x >= 0, got {x}")));
    }
    let GammaParams { shape, rate } = params;
    if x == 0.0 {
        return Ok(if shape < 1.0 {
            f64::INFINITY
        } else if shape == 1.0 {
            rate
        } else {
            0.0
        });
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let ln = shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x;
    Ok(ln.exp())
}

/// Regularized lower incomplete gamma `P(shape, rate * x)`.
pub fn gamma_cdf(params: GammaParams, x: f64) -> Result<f64> {
    params.validate()?;
    if !(x >= 0.0) {
        return Err(invalid_arg(format!("Gamma CDF needs x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(params.shape, params.rate * x))
}

/// One draw from `params`, reproducible from `seed`.
pub fn gamma_sample(params: GammaParams, seed: u64) -> Result<f64> {
    params.validate()?;
    Ok(params.sample(&mut rng_from_seed(seed)))
}

/// Law of `D / speed` when `D ~ distance_law`: the rate scales by `speed`.
pub fn scale_hop(distance_law: GammaParams, speed: f64) -> Result<GammaParams> {
    distance_law.validate()?;
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(invalid_arg(format!("speed must be positive, got {speed}")));
    }
    GammaParams::new(distance_law.shape, distance_law.rate * speed)
}

/// `E[exp(t X)] = (rate / (rate - t))^shape`, defined for `t < rate`.
pub fn gamma_mgf(params: GammaParams, t: f64) -> Result<f64> {
    params.validate()?;
    if !(t < params.rate) {
        return Err(Error::MgfDomain {
            t,
            rate: params.rate,
        });
    }
    Ok((params.rate / (params.rate - t)).powf(params.shape))
}

/// Time to cross `distance` meters at `speed` meters per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HopTime(f64);

impl HopTime {
    pub fn seconds(self) -> f64 {
        self.0
    }
}

pub fn hop_time(distance: f64, speed: f64) -> Result<HopTime> {
    if !(distance >= 0.0 && distance.is_finite()) {
        return Err(invalid_arg(format!(
            "distance must be nonnegative, got {distance}"
        )));
    }
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(invalid_arg(format!("speed must be positive, got {speed}")));
    }
    Ok(HopTime(distance / speed))
}

/// End-to-end latency law of an `hops`-hop path with i.i.d. per-hop laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsaLatencyLaw {
    pub hops: u32,
    pub per_hop: GammaParams,
    pub total: GammaParams,
}

/// Points (as fractions of the rate) where the MGF product rule is checked.
pub const MGF_CHECK_FRACTIONS: [f64; 3] = [0.25, 0.5, 0.75];
const MGF_CHECK_TOLERANCE: f64 = 1e-12;

/// Sum of `hops` independent `per_hop` variables: the shapes add and the rate
/// is unchanged. The result is cross-checked against the MGF product
/// `M_total(t) = M_per_hop(t)^hops` before it is returned.
pub fn sum_hops_law(hops: u32, per_hop: GammaParams) -> Result<SsaLatencyLaw> {
    per_hop.validate()?;
    if hops == 0 {
        return Err(invalid_arg("a path needs at least one hop"));
    }
    let total = GammaParams::new(hops as f64 * per_hop.shape, per_hop.rate)?;
    for frac in MGF_CHECK_FRACTIONS {
        let t = frac * per_hop.rate;
        let err = mgf_product_relative_error(total, per_hop, hops, t)?;
        if !(err < MGF_CHECK_TOLERANCE) {
            return Err(Error::Consistency(format!(
                "MGF product rule off by {err:e} at t = {t}"
            )));
        }
    }
    Ok(SsaLatencyLaw {
        hops,
        per_hop,
        total,
    })
}

/// `|M_total(t) - M_per_hop(t)^hops| / M_total(t)`. When either side
/// overflows the ratio is taken in log space instead.
pub fn mgf_product_relative_error(
    total: GammaParams,
    per_hop: GammaParams,
    hops: u32,
    t: f64,
) -> Result<f64> {
    let lhs = gamma_mgf(total, t)?;
    let rhs = gamma_mgf(per_hop, t)?.powi(hops as i32);
    if lhs.is_finite() && rhs.is_finite() {
        return Ok((lhs - rhs).abs() / lhs);
    }
    let ln_base = |p: GammaParams| (p.rate / (p.rate - t)).ln();
    let ln_lhs = total.shape * ln_base(total);
    let ln_rhs = hops as f64 * per_hop.shape * ln_base(per_hop);
    Ok((ln_rhs - ln_lhs).exp_m1().abs())
}

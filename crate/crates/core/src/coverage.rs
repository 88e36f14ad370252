//! Coverage of a target disk by the union of circular vision sectors.
//!
//! Exact areas of sector unions clipped to a disk have no practical closed
//! form, so coverage is estimated on a fixed set of uniform points in the
//! target. Every comparison between arc sets made against the same
//! [`CoveragePoints`] is exact with respect to that point set: adding an arc
//! can only add covered points.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::geometry::Position;
use crate::seed::rng_from_seed;

pub const MIN_SAMPLE_POINTS: usize = 1_000;
/// Largest arc collection accepted by [`min_cover_subset`].
pub const MAX_COVER_ARCS: usize = 22;

/// Points `apex + r (cos phi, sin phi)` with `r <= radius` and
/// `|phi - heading| <= half_angle` (angles compared modulo 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SightArc {
    pub apex: Position,
    pub heading: f64,
    pub half_angle: f64,
    pub radius: f64,
}

impl SightArc {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid_arg(format!(
                "arc radius must be positive, got {}",
                self.radius
            )));
        }
        if !(self.half_angle > 0.0 && self.half_angle <= PI) {
            return Err(invalid_arg(format!(
                "arc half-angle must lie in (0, pi], got {}",
                self.half_angle
            )));
        }
        if !self.heading.is_finite() || !self.apex.x.is_finite() || !self.apex.y.is_finite() {
            return Err(invalid_arg("arc pose must be finite"));
        }
        Ok(())
    }

    pub fn contains(&self, p: Position) -> bool {
        let dx = p.x - self.apex.x;
        let dy = p.y - self.apex.y;
        let d2 = dx * dx + dy * dy;
        if d2 > self.radius * self.radius {
            return false;
        }
        if d2 == 0.0 || self.half_angle >= PI {
            return true;
        }
        angle_gap(dy.atan2(dx), self.heading) <= self.half_angle
    }
}

/// Absolute angular difference folded into `[0, pi]`.
fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        TAU - d
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDisk {
    pub center: Position,
    pub radius: f64,
}

impl TargetDisk {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid_arg(format!(
                "target radius must be positive, got {}",
                self.radius
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageEstimate {
    pub rate: f64,
    pub sample_points: usize,
    /// Binomial standard error `sqrt(rate (1 - rate) / sample_points)`.
    pub std_err: f64,
}

impl CoverageEstimate {
    fn from_counts(covered: usize, total: usize) -> Self {
        let rate = covered as f64 / total as f64;
        CoverageEstimate {
            rate,
            sample_points: total,
            std_err: (rate * (1.0 - rate) / total as f64).sqrt(),
        }
    }
}

/// Uniform sample of points inside a target disk.
#[derive(Debug, Clone)]
pub struct CoveragePoints {
    target: TargetDisk,
    points: Vec<Position>,
}

impl CoveragePoints {
    pub fn sample(target: TargetDisk, sample_points: usize, seed: u64) -> Result<Self> {
        target.validate()?;
        if sample_points < MIN_SAMPLE_POINTS {
            return Err(invalid_arg(format!(
                "coverage needs at least {MIN_SAMPLE_POINTS} sample points, got {sample_points}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let points = (0..sample_points)
            .map(|_| {
                // sqrt of a uniform gives the area-uniform radius.
                let r = target.radius * rng.random::<f64>().sqrt();
                let phi = TAU * rng.random::<f64>();
                Position::new(
                    target.center.x + r * phi.cos(),
                    target.center.y + r * phi.sin(),
                )
            })
            .collect();
        Ok(CoveragePoints { target, points })
    }

    pub fn target(&self) -> &TargetDisk {
        &self.target
    }

    pub fn points(&self) -> &[Position] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn estimate(&self, arcs: &[SightArc]) -> CoverageEstimate {
        let covered = self
            .points
            .iter()
            .filter(|p| arcs.iter().any(|a| a.contains(**p)))
            .count();
        CoverageEstimate::from_counts(covered, self.points.len())
    }

    /// Bitmask of the points inside `arc`, 64 points per word.
    pub fn cover_mask(&self, arc: &SightArc) -> Vec<u64> {
        let mut mask = vec![0u64; self.points.len().div_ceil(64)];
        for (i, p) in self.points.iter().enumerate() {
            if arc.contains(*p) {
                mask[i / 64] |= 1 << (i % 64);
            }
        }
        mask
    }
}

/// Estimated fraction of `target` covered by the union of `arcs`.
pub fn coverage_rate(
    arcs: &[SightArc],
    target: TargetDisk,
    sample_points: usize,
    seed: u64,
) -> Result<CoverageEstimate> {
    for arc in arcs {
        arc.validate()?;
    }
    let points = CoveragePoints::sample(target, sample_points, seed)?;
    Ok(points.estimate(arcs))
}

/// Flattens per-time-step arc collections into one collection whose
/// coverage is the union over all steps.
pub fn accumulate_vision<S: AsRef<[SightArc]>>(steps: &[S]) -> Vec<SightArc> {
    steps
        .iter()
        .flat_map(|s| s.as_ref().iter().copied())
        .collect()
}

/// Smallest subset of `arcs` (by size, then lexicographic index order) whose
/// union covers at least `threshold` of the shared point set. Returns `None`
/// when even the full collection falls short.
pub fn min_cover_subset(
    arcs: &[SightArc],
    points: &CoveragePoints,
    threshold: f64,
) -> Result<Option<Vec<usize>>> {
    if arcs.len() > MAX_COVER_ARCS {
        return Err(Error::Capacity {
            len: arcs.len(),
            max: MAX_COVER_ARCS,
        });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(invalid_arg(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    for arc in arcs {
        arc.validate()?;
    }
    let total = points.len();
    // Integer comparison avoids rounding at the threshold boundary.
    let needed = (threshold * total as f64).ceil() as usize;
    if needed == 0 {
        return Ok(Some(Vec::new()));
    }
    let masks: Vec<Vec<u64>> = arcs.iter().map(|a| points.cover_mask(a)).collect();
    let words = total.div_ceil(64);
    let mut union = vec![0u64; words];
    for size in 1..=arcs.len() {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            union.iter_mut().for_each(|w| *w = 0);
            for &i in &combo {
                for (u, m) in union.iter_mut().zip(&masks[i]) {
                    *u |= m;
                }
            }
            let covered: usize = union.iter().map(|w| w.count_ones() as usize).sum();
            if covered >= needed {
                return Ok(Some(combo));
            }
            if !next_combination(&mut combo, arcs.len()) {
                break;
            }
        }
    }
    Ok(None)
}

/// Advances `combo` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Random sight-arc parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SightRanges {
    pub half_angle_min: f64,
    pub half_angle_max: f64,
    pub radius_min: f64,
    pub radius_max: f64,
}

impl Default for SightRanges {
    fn default() -> Self {
        SightRanges {
            half_angle_min: PI / 12.0,
            half_angle_max: PI / 3.0,
            radius_min: 40.0,
            radius_max: 100.0,
        }
    }
}

impl SightRanges {
    pub fn validate(&self) -> Result<()> {
        let ok = self.half_angle_min > 0.0
            && self.half_angle_min <= self.half_angle_max
            && self.half_angle_max <= PI
            && self.radius_min > 0.0
            && self.radius_min <= self.radius_max
            && self.radius_max.is_finite();
        if !ok {
            return Err(crate::error::invalid_config(format!(
                "invalid sight ranges {self:?}"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> crate::geometry::SightShape {
        let u: f64 = rng.random();
        let v: f64 = rng.random();
        crate::geometry::SightShape {
            half_angle: self.half_angle_min + u * (self.half_angle_max - self.half_angle_min),
            radius: self.radius_min + v * (self.radius_max - self.radius_min),
        }
    }
}

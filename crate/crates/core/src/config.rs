//! Experiment configuration, read from UTF-8 JSON. Keys match the field
//! names below; every key is optional and falls back to the defaults of
//! the reference setup (1 km square world, 100 ms broadcast slots,
//! 100 m transmission range).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::SightRanges;
use crate::error::{invalid_config, Result};
use crate::geometry::{AreaIntensity, WorldArea};
use crate::latency::GammaParams;
use crate::propagation::{HopDistance, RelayMode, SsaCompletionRule, TimingMode, TimingModel};
use crate::stats::TimeUnit;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Transmission ranges used by the reference setup.
pub const REFERENCE_TX_RANGES_M: [f64; 2] = [75.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Meters.
    pub width: f64,
    /// Meters.
    pub depth: f64,
    /// Vehicles per square meter.
    pub intensity: f64,
    /// Meters.
    pub tx_range: f64,
    pub slot_ms: f64,
    pub timing: TimingMode,
    /// Meters per second.
    pub signal_speed: f64,
    pub hop_distance: HopDistance,
    pub relay: RelayMode,
    pub rule: SsaCompletionRule,
    /// Radius of the target disk around the hazard for coverage-based completion.
    pub target_radius: f64,
    pub coverage_points: usize,
    /// Meters per second; each vehicle draws uniformly from `[speed_min, speed_max]`.
    pub speed_min: f64,
    pub speed_max: f64,
    pub sight: SightRanges,
    /// Slots a stuck chain waits for mobility to bring a neighbor into range.
    pub max_wait_slots: u32,
    pub trials: usize,
    pub root_seed: u64,
    /// Unit of emitted latency samples.
    pub unit: TimeUnit,
    /// Law the simulated latency is tested against; derived from
    /// `hop_distance` when that is modeled, otherwise the moment fit is used.
    pub reference_law: Option<GammaParams>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width: 1000.0,
            depth: 1000.0,
            intensity: 100.0 / 1e6,
            tx_range: 100.0,
            slot_ms: 100.0,
            timing: TimingMode::SlotPlusDistance,
            signal_speed: SPEED_OF_LIGHT,
            hop_distance: HopDistance::Geometric,
            relay: RelayMode::Chain,
            rule: SsaCompletionRule::NVehiclesInformed { n: 4 },
            target_radius: 50.0,
            coverage_points: 2000,
            speed_min: 0.0,
            speed_max: 30.0,
            sight: SightRanges::default(),
            max_wait_slots: 10,
            trials: 1000,
            root_seed: 1,
            unit: TimeUnit::Milliseconds,
            reference_law: None,
        }
    }
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: WorldConfig =
            serde_json::from_str(text).map_err(|e| invalid_config(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn area(&self) -> Result<WorldArea> {
        WorldArea::new(self.width, self.depth)
    }

    pub fn area_intensity(&self) -> Result<AreaIntensity> {
        AreaIntensity::new(self.intensity)
    }

    pub fn timing_model(&self) -> Result<TimingModel> {
        TimingModel::new(self.timing, self.slot_ms, self.signal_speed)
    }

    pub fn validate(&self) -> Result<()> {
        self.area()?;
        self.area_intensity()?;
        self.timing_model()?;
        self.rule.validate()?;
        self.hop_distance.validate()?;
        self.sight.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid_config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("tx_range", self.tx_range)?;
        positive("target_radius", self.target_radius)?;
        if !(self.speed_min >= 0.0
            && self.speed_min <= self.speed_max
            && self.speed_max.is_finite())
        {
            return Err(invalid_config(format!(
                "speed range [{}, {}] is invalid",
                self.speed_min, self.speed_max
            )));
        }
        if self.trials == 0 {
            return Err(invalid_config("trials must be at least 1"));
        }
        if let SsaCompletionRule::CoverageThreshold { .. } = self.rule {
            if self.coverage_points < crate::coverage::MIN_SAMPLE_POINTS {
                return Err(invalid_config(format!(
                    "coverage_points must be at least {}",
                    crate::coverage::MIN_SAMPLE_POINTS
                )));
            }
        }
        if let Some(law) = self.reference_law {
            law.validate().map_err(|e| invalid_config(e.to_string()))?;
        }
        Ok(())
    }
}

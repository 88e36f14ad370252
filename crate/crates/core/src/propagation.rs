//! Monte Carlo propagation of a hazard report through a vehicle field.
//!
//! A trial samples a field and a uniformly placed hazard. The vehicle
//! nearest the hazard detects it at time zero; from there the report
//! travels along a chain where each holder hands it to its nearest
//! uninformed in-range neighbor. The trial ends when the completion rule
//! is met, or stalls when the holder has no such neighbor.
//!
//! Hop time comes from the [`TimingModel`]: one broadcast slot, the
//! signal flight time `d / c`, or their sum. In the slot modes vehicles
//! move by one slot between hops and a stuck holder may wait up to
//! `max_wait_slots` slots for traffic to bring a neighbor into range.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::WorldConfig;
use crate::coverage::{CoveragePoints, TargetDisk};
use crate::error::{invalid_config, Error, Result};
use crate::geometry::{
    sample_ppp_points, AreaIntensity, Position, Vehicle, VehicleField, VehicleId, WorldArea,
};
use crate::latency::GammaParams;
use crate::seed::{derive_seed, rng_from_seed, SimRng};
use crate::stats::{EmpiricalDist, TimeUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    Slot,
    Distance,
    SlotPlusDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingModel {
    pub mode: TimingMode,
    pub slot_ms: f64,
    /// Meters per second.
    pub signal_speed: f64,
}

impl TimingModel {
    pub fn new(mode: TimingMode, slot_ms: f64, signal_speed: f64) -> Result<Self> {
        if !(slot_ms >= 0.0 && slot_ms.is_finite()) {
            return Err(invalid_config(format!(
                "slot_ms must be nonnegative, got {slot_ms}"
            )));
        }
        if mode == TimingMode::Slot && slot_ms <= 0.0 {
            return Err(invalid_config("slot timing needs slot_ms > 0"));
        }
        if !(signal_speed > 0.0 && signal_speed.is_finite()) {
            return Err(invalid_config(format!(
                "signal_speed must be positive, got {signal_speed}"
            )));
        }
        Ok(TimingModel {
            mode,
            slot_ms,
            signal_speed,
        })
    }

    pub fn slot_seconds(&self) -> f64 {
        self.slot_ms / 1e3
    }

    /// Whether time advances in whole broadcast slots (and vehicles move).
    pub fn is_slotted(&self) -> bool {
        self.mode != TimingMode::Distance && self.slot_ms > 0.0
    }

    /// Seconds needed for a hop of `distance` meters.
    pub fn hop_seconds(&self, distance: f64) -> f64 {
        let flight = distance / self.signal_speed;
        match self.mode {
            TimingMode::Slot => self.slot_seconds(),
            TimingMode::Distance => flight,
            TimingMode::SlotPlusDistance => self.slot_seconds() + flight,
        }
    }
}

/// Where hop distances come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HopDistance {
    /// Euclidean distance between relay and receiver.
    #[default]
    Geometric,
    /// Each hop's distance is an independent draw from a Gamma law in
    /// meters (shape, rate per meter). Relay order still follows geometry.
    Modeled { shape: f64, rate: f64 },
}

impl HopDistance {
    pub fn validate(&self) -> Result<()> {
        if let HopDistance::Modeled { shape, rate } = *self {
            GammaParams::new(shape, rate).map_err(|e| invalid_config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn law(&self) -> Option<GammaParams> {
        match *self {
            HopDistance::Geometric => None,
            HopDistance::Modeled { shape, rate } => Some(GammaParams { shape, rate }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RelayMode {
    /// Single frontier: the current holder relays to its first neighbor.
    #[default]
    Chain,
    /// Every informed vehicle relays to every in-range neighbor; a vehicle
    /// is informed at its earliest arrival time. Mobility is frozen.
    Flooding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SsaCompletionRule {
    NVehiclesInformed {
        n: usize,
    },
    /// Accumulated vision of the informed vehicles covers at least
    /// `threshold` of the target disk around the hazard.
    CoverageThreshold {
        threshold: f64,
    },
}

impl SsaCompletionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SsaCompletionRule::NVehiclesInformed { n: 0 } => {
                Err(invalid_config("rule n must be at least 1"))
            }
            SsaCompletionRule::CoverageThreshold { threshold }
                if !(threshold > 0.0 && threshold <= 1.0) =>
            {
                Err(invalid_config(format!(
                    "coverage threshold must lie in (0, 1], got {threshold}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hazard {
    pub position: Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopRecord {
    pub from_id: VehicleId,
    pub to_id: VehicleId,
    pub distance_m: f64,
    pub hop_time_s: f64,
    pub cumulative_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationTrace {
    pub hops: Vec<HopRecord>,
    pub completed: bool,
    pub informed_count: usize,
    /// Seconds from detection to completion; meaningful only when `completed`.
    pub total_latency_s: f64,
}

impl PropagationTrace {
    fn stalled(hops: Vec<HopRecord>, informed_count: usize) -> Self {
        let t = hops.last().map_or(0.0, |h| h.cumulative_time_s);
        PropagationTrace {
            hops,
            completed: false,
            informed_count,
            total_latency_s: t,
        }
    }

    pub fn latency(&self) -> Option<f64> {
        self.completed.then_some(self.total_latency_s)
    }
}

/// Moves every vehicle `speed * dt` along its heading, reflecting specularly
/// off the world edges. The vehicle count never changes.
pub fn step_mobility(field: &VehicleField, dt: f64) -> Result<VehicleField> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(crate::error::invalid_arg(format!(
            "dt must be nonnegative, got {dt}"
        )));
    }
    let area = *field.area();
    if dt == 0.0 {
        return Ok(field.clone());
    }
    let vehicles = field
        .vehicles()
        .iter()
        .map(|v| {
            if v.speed == 0.0 {
                return v.clone();
            }
            let step = v.speed * dt;
            let (x, flip_x) = reflect(v.position.x + step * v.heading.cos(), area.width);
            let (y, flip_y) = reflect(v.position.y + step * v.heading.sin(), area.depth);
            let mut heading = v.heading;
            if flip_x {
                heading = PI - heading;
            }
            if flip_y {
                heading = -heading;
            }
            Vehicle {
                position: Position::new(x, y),
                heading: heading.rem_euclid(TAU),
                ..v.clone()
            }
        })
        .collect();
    VehicleField::new(area, vehicles, field.cell_size())
}

/// Folds an unconstrained coordinate back into `[0, len]`; the flag is set
/// when the net number of wall bounces is odd.
fn reflect(x: f64, len: f64) -> (f64, bool) {
    let m = x.rem_euclid(2.0 * len);
    if m > len {
        (2.0 * len - m, true)
    } else {
        (m, false)
    }
}

/// Result of a batch of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    pub latencies: EmpiricalDist,
    pub trials: usize,
    pub stalled: usize,
}

impl BatchOutcome {
    pub fn stall_fraction(&self) -> f64 {
        self.stalled as f64 / self.trials as f64
    }
}

/// A validated configuration ready to run trials.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: WorldConfig,
    area: WorldArea,
    intensity: AreaIntensity,
    timing: TimingModel,
}

impl Simulator {
    pub fn new(config: &WorldConfig) -> Result<Self> {
        config.validate()?;
        Ok(Simulator {
            area: config.area()?,
            intensity: config.area_intensity()?,
            timing: config.timing_model()?,
            config: config.clone(),
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn timing(&self) -> &TimingModel {
        &self.timing
    }

    /// Samples a field with randomized mobility and sight state.
    pub fn sample_field(&self, rng: &mut SimRng) -> Result<VehicleField> {
        let c = &self.config;
        let points = sample_ppp_points(self.intensity, &self.area, rng)?;
        let vehicles = points
            .into_iter()
            .enumerate()
            .map(|(id, position)| {
                let heading = TAU * rng.random::<f64>();
                let speed = c.speed_min + rng.random::<f64>() * (c.speed_max - c.speed_min);
                let sight = c.sight.sample(rng);
                Vehicle {
                    id,
                    position,
                    heading,
                    speed,
                    tx_range: c.tx_range,
                    sight,
                }
            })
            .collect();
        VehicleField::new(self.area, vehicles, c.tx_range)
    }

    /// One complete trial, reproducible from `seed`.
    pub fn run_trial(&self, seed: u64) -> Result<PropagationTrace> {
        let mut rng = rng_from_seed(seed);
        let field = self.sample_field(&mut rng)?;
        let hazard = Hazard {
            position: self.area.sample_point(&mut rng),
        };
        self.propagate(field, hazard, &mut rng)
    }

    /// Propagates a detection through a given field.
    pub fn propagate(
        &self,
        field: VehicleField,
        hazard: Hazard,
        rng: &mut SimRng,
    ) -> Result<PropagationTrace> {
        let Some(detector) = field.nearest_to_point(hazard.position) else {
            return Ok(PropagationTrace::stalled(Vec::new(), 0));
        };
        let mut goal = Completion::new(&self.config, hazard, rng)?;
        match self.config.relay {
            RelayMode::Chain => self.propagate_chain(field, detector, &mut goal, rng),
            RelayMode::Flooding => self.propagate_flooding(field, detector, &mut goal, rng),
        }
    }

    fn hop_distance(&self, geometric: f64, rng: &mut SimRng) -> f64 {
        match self.config.hop_distance.law() {
            None => geometric,
            Some(law) => law.sample(rng),
        }
    }

    fn propagate_chain(
        &self,
        mut field: VehicleField,
        detector: VehicleId,
        goal: &mut Completion,
        rng: &mut SimRng,
    ) -> Result<PropagationTrace> {
        let mut informed = vec![false; field.len()];
        informed[detector] = true;
        let mut informed_count = 1;
        goal.observe(&field, detector);
        let mobile = self.timing.is_slotted() && field.vehicles().iter().any(|v| v.speed > 0.0);
        let slot = self.timing.slot_seconds();

        let mut hops: Vec<HopRecord> = Vec::new();
        let mut holder = detector;
        let mut now = 0.0;
        let mut waited = 0u32;
        while !goal.satisfied(informed_count) {
            let range = field.vehicles()[holder].tx_range;
            match field.nearest_neighbor(holder, range, |id| informed[id]) {
                Some(next) => {
                    let geometric = field.vehicles()[holder]
                        .position
                        .distance(field.vehicles()[next].position);
                    let distance = self.hop_distance(geometric, rng);
                    let dt = self.timing.hop_seconds(distance);
                    let hop_time = dt + waited as f64 * slot;
                    now += dt;
                    hops.push(HopRecord {
                        from_id: holder,
                        to_id: next,
                        distance_m: distance,
                        hop_time_s: hop_time,
                        cumulative_time_s: now,
                    });
                    informed[next] = true;
                    informed_count += 1;
                    holder = next;
                    waited = 0;
                    goal.observe(&field, next);
                    if mobile {
                        field = step_mobility(&field, slot)?;
                        goal.observe_all(&field, &informed);
                    }
                }
                None if mobile && waited < self.config.max_wait_slots => {
                    waited += 1;
                    now += slot;
                    field = step_mobility(&field, slot)?;
                    goal.observe_all(&field, &informed);
                }
                None => return Ok(PropagationTrace::stalled(hops, informed_count)),
            }
        }
        Ok(PropagationTrace {
            completed: true,
            informed_count,
            total_latency_s: now,
            hops,
        })
    }

    fn propagate_flooding(
        &self,
        field: VehicleField,
        detector: VehicleId,
        goal: &mut Completion,
        rng: &mut SimRng,
    ) -> Result<PropagationTrace> {
        let n = field.len();
        let mut arrival = vec![f64::INFINITY; n];
        let mut parent: Vec<Option<(VehicleId, f64)>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        arrival[detector] = 0.0;
        heap.push(Pending {
            time: 0.0,
            id: detector,
        });
        let mut hops = Vec::new();
        let mut informed_count = 0;
        while let Some(Pending { time, id }) = heap.pop() {
            if settled[id] {
                continue;
            }
            settled[id] = true;
            informed_count += 1;
            if let Some((from, distance)) = parent[id] {
                hops.push(HopRecord {
                    from_id: from,
                    to_id: id,
                    distance_m: distance,
                    hop_time_s: time - arrival[from],
                    cumulative_time_s: time,
                });
            }
            goal.observe(&field, id);
            if goal.satisfied(informed_count) {
                return Ok(PropagationTrace {
                    completed: true,
                    informed_count,
                    total_latency_s: time,
                    hops,
                });
            }
            let me = &field.vehicles()[id];
            for nb in field.neighbors_within(id, me.tx_range) {
                if settled[nb] {
                    continue;
                }
                let geometric = me.position.distance(field.vehicles()[nb].position);
                let distance = self.hop_distance(geometric, rng);
                let t = time + self.timing.hop_seconds(distance);
                if t < arrival[nb] {
                    arrival[nb] = t;
                    parent[nb] = Some((id, distance));
                    heap.push(Pending { time: t, id: nb });
                }
            }
        }
        Ok(PropagationTrace::stalled(hops, informed_count))
    }

    /// Traces for `trials` trials seeded from `root_seed`, in trial order.
    /// `threads` pins the worker count; `None` uses the global pool.
    pub fn run_traces(
        &self,
        trials: usize,
        root_seed: u64,
        threads: Option<usize>,
    ) -> Result<Vec<PropagationTrace>> {
        let work = || {
            (0..trials)
                .into_par_iter()
                .map(|i| self.run_trial(derive_seed(root_seed, i as u64)))
                .collect::<Result<Vec<_>>>()
        };
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Consistency(format!("thread pool: {e}")))?
                .install(work),
            None => work(),
        }
    }

    pub fn run_batch(
        &self,
        trials: usize,
        root_seed: u64,
        threads: Option<usize>,
    ) -> Result<BatchOutcome> {
        if trials == 0 {
            return Err(invalid_config("trials must be at least 1"));
        }
        let traces = self.run_traces(trials, root_seed, threads)?;
        summarize(&traces, self.config.unit)
    }
}

/// Collects completed latencies (converted to `unit`) and counts stalls.
pub fn summarize(traces: &[PropagationTrace], unit: TimeUnit) -> Result<BatchOutcome> {
    let latencies: Vec<f64> = traces
        .iter()
        .filter_map(PropagationTrace::latency)
        .map(|s| s * unit.per_second())
        .collect();
    let stalled = traces.len() - latencies.len();
    Ok(BatchOutcome {
        latencies: EmpiricalDist::new(latencies, unit)?,
        trials: traces.len(),
        stalled,
    })
}

pub fn run_trial(config: &WorldConfig, seed: u64) -> Result<PropagationTrace> {
    Simulator::new(config)?.run_trial(seed)
}

/// Runs `config.trials` trials from `config.root_seed`.
pub fn run_batch(config: &WorldConfig) -> Result<BatchOutcome> {
    Simulator::new(config)?.run_batch(config.trials, config.root_seed, None)
}

/// Writes hop rows `(trial_id, hop_idx, from_id, to_id, distance_m, hop_time_s, cumulative_s)`.
pub fn write_traces_csv<W: Write>(traces: &[PropagationTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial_id",
        "hop_idx",
        "from_id",
        "to_id",
        "distance_m",
        "hop_time_s",
        "cumulative_s",
    ])?;
    for (trial, trace) in traces.iter().enumerate() {
        for (i, h) in trace.hops.iter().enumerate() {
            w.write_record([
                trial.to_string(),
                i.to_string(),
                h.from_id.to_string(),
                h.to_id.to_string(),
                h.distance_m.to_string(),
                h.hop_time_s.to_string(),
                h.cumulative_time_s.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, PartialEq)]
struct Pending {
    time: f64,
    id: VehicleId,
}

impl Eq for Pending {}

impl Ord for Pending {
    // Min-heap on (time, id).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Tracks progress toward the completion rule.
enum Completion {
    Count(usize),
    Coverage {
        threshold_points: usize,
        points: CoveragePoints,
        covered: Vec<u64>,
    },
}

impl Completion {
    fn new(config: &WorldConfig, hazard: Hazard, rng: &mut SimRng) -> Result<Self> {
        Ok(match config.rule {
            SsaCompletionRule::NVehiclesInformed { n } => Completion::Count(n),
            SsaCompletionRule::CoverageThreshold { threshold } => {
                let target = TargetDisk {
                    center: hazard.position,
                    radius: config.target_radius,
                };
                let points = CoveragePoints::sample(target, config.coverage_points, rng.random())?;
                Completion::Coverage {
                    threshold_points: (threshold * points.len() as f64).ceil() as usize,
                    covered: vec![0; points.len().div_ceil(64)],
                    points,
                }
            }
        })
    }

    fn observe(&mut self, field: &VehicleField, id: VehicleId) {
        if let Completion::Coverage {
            points, covered, ..
        } = self
        {
            let mask = points.cover_mask(&field.vehicles()[id].sight_arc());
            for (c, m) in covered.iter_mut().zip(mask) {
                *c |= m;
            }
        }
    }

    fn observe_all(&mut self, field: &VehicleField, informed: &[bool]) {
        if let Completion::Coverage { .. } = self {
            for (id, _) in informed.iter().enumerate().filter(|(_, i)| **i) {
                self.observe(field, id);
            }
        }
    }

    fn satisfied(&self, informed_count: usize) -> bool {
        match self {
            Completion::Count(n) => informed_count >= *n,
            Completion::Coverage {
                threshold_points,
                covered,
                ..
            } => {
                covered
                    .iter()
                    .map(|w| w.count_ones() as usize)
                    .sum::<usize>()
                    >= *threshold_points
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_field(xs: &[f64], range: f64) -> VehicleField {
        let area = WorldArea::new(1000.0, 1000.0).unwrap();
        let vs = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Vehicle {
                tx_range: range,
                ..Vehicle::at_rest(i, Position::new(x, 500.0))
            })
            .collect();
        VehicleField::new(area, vs, range).unwrap()
    }

    fn slot_config(n: usize) -> WorldConfig {
        WorldConfig {
            timing: TimingMode::Slot,
            tx_range: 75.0,
            rule: SsaCompletionRule::NVehiclesInformed { n },
            speed_min: 0.0,
            speed_max: 0.0,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn single_vehicle_completes_immediately() {
        let sim = Simulator::new(&slot_config(1)).unwrap();
        let trace = sim
            .propagate(
                line_field(&[10.0], 75.0),
                Hazard {
                    position: Position::new(0.0, 0.0),
                },
                &mut rng_from_seed(0),
            )
            .unwrap();
        assert!(trace.completed);
        assert_eq!(trace.total_latency_s, 0.0);
        assert!(trace.hops.is_empty());
    }

    #[test]
    fn collinear_chain_in_slot_mode() {
        let sim = Simulator::new(&slot_config(4)).unwrap();
        let field = line_field(&[100.0, 150.0, 200.0, 250.0], 75.0);
        let hazard = Hazard {
            position: Position::new(90.0, 500.0),
        };
        let trace = sim.propagate(field, hazard, &mut rng_from_seed(0)).unwrap();
        assert!(trace.completed);
        assert_eq!(trace.hops.len(), 3);
        assert!((trace.total_latency_s - 0.3).abs() < 1e-12);
        let path: Vec<_> = trace.hops.iter().map(|h| (h.from_id, h.to_id)).collect();
        assert_eq!(path, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(trace
            .hops
            .iter()
            .all(|h| (h.distance_m - 50.0).abs() < 1e-12));
    }

    #[test]
    fn gap_stalls_without_mobility() {
        let sim = Simulator::new(&slot_config(3)).unwrap();
        let field = line_field(&[100.0, 150.0, 400.0], 75.0);
        let hazard = Hazard {
            position: Position::new(100.0, 500.0),
        };
        let trace = sim.propagate(field, hazard, &mut rng_from_seed(0)).unwrap();
        assert!(!trace.completed);
        assert_eq!(trace.informed_count, 2);
        assert_eq!(trace.latency(), None);
    }

    #[test]
    fn empty_field_stalls() {
        let cfg = WorldConfig {
            intensity: 0.0,
            ..slot_config(2)
        };
        let trace = run_trial(&cfg, 3).unwrap();
        assert!(!trace.completed);
        assert_eq!(trace.informed_count, 0);
    }

    #[test]
    fn flooding_matches_chain_on_a_line() {
        let cfg = WorldConfig {
            relay: RelayMode::Flooding,
            ..slot_config(4)
        };
        let sim = Simulator::new(&cfg).unwrap();
        let field = line_field(&[100.0, 150.0, 200.0, 250.0], 75.0);
        let hazard = Hazard {
            position: Position::new(90.0, 500.0),
        };
        let trace = sim.propagate(field, hazard, &mut rng_from_seed(0)).unwrap();
        assert!(trace.completed);
        assert!((trace.total_latency_s - 0.3).abs() < 1e-12);
    }

    #[test]
    fn flooding_reaches_both_sides_in_one_slot() {
        let cfg = WorldConfig {
            relay: RelayMode::Flooding,
            ..slot_config(3)
        };
        let sim = Simulator::new(&cfg).unwrap();
        let field = line_field(&[100.0, 150.0, 200.0], 75.0);
        let hazard = Hazard {
            position: Position::new(150.0, 500.0),
        };
        let trace = sim.propagate(field, hazard, &mut rng_from_seed(0)).unwrap();
        assert!(trace.completed);
        assert!((trace.total_latency_s - 0.1).abs() < 1e-12);
        assert_eq!(trace.hops.len(), 2);
    }

    #[test]
    fn reflection_example() {
        let area = WorldArea::new(1000.0, 1000.0).unwrap();
        let v = Vehicle {
            heading: PI,
            speed: 8.0,
            ..Vehicle::at_rest(0, Position::new(3.0, 500.0))
        };
        let f = VehicleField::new(area, vec![v], 100.0).unwrap();
        let moved = step_mobility(&f, 1.0).unwrap();
        let mv = &moved.vehicles()[0];
        assert!((mv.position.x - 5.0).abs() < 1e-12);
        assert!((mv.position.y - 500.0).abs() < 1e-9);
        assert!(mv.heading.abs() < 1e-12 || (mv.heading - TAU).abs() < 1e-12);
    }

    #[test]
    fn corner_reflects_both_axes() {
        let area = WorldArea::new(100.0, 100.0).unwrap();
        let h = 5.0 * PI / 4.0;
        let v = Vehicle {
            heading: h,
            speed: 2f64.sqrt() * 4.0,
            ..Vehicle::at_rest(0, Position::new(1.0, 1.0))
        };
        let f = VehicleField::new(area, vec![v], 10.0).unwrap();
        let mv = step_mobility(&f, 1.0).unwrap().vehicles()[0].clone();
        assert!((mv.position.x - 3.0).abs() < 1e-9 && (mv.position.y - 3.0).abs() < 1e-9);
        assert!((mv.heading - PI / 4.0).abs() < 1e-9);
    }

    #[test]
    fn zero_dt_and_zero_speed_leave_field_unchanged() {
        let area = WorldArea::new(100.0, 100.0).unwrap();
        let moving = Vehicle {
            speed: 10.0,
            heading: 1.0,
            ..Vehicle::at_rest(0, Position::new(50.0, 50.0))
        };
        let parked = Vehicle::at_rest(1, Position::new(20.0, 20.0));
        let f = VehicleField::new(area, vec![moving, parked], 10.0).unwrap();
        assert_eq!(step_mobility(&f, 0.0).unwrap().vehicles(), f.vehicles());
        let moved = step_mobility(&f, 7.0).unwrap();
        assert_eq!(moved.vehicles()[1], f.vehicles()[1]);
        assert!(step_mobility(&f, -1.0).is_err());
    }

    #[test]
    fn timing_modes() {
        let t = TimingModel::new(TimingMode::SlotPlusDistance, 100.0, 1000.0).unwrap();
        assert!((t.hop_seconds(50.0) - 0.15).abs() < 1e-15);
        let d = TimingModel::new(TimingMode::Distance, 0.0, 1000.0).unwrap();
        assert_eq!(d.hop_seconds(50.0), 0.05);
        assert!(!d.is_slotted());
        assert!(TimingModel::new(TimingMode::Slot, 0.0, 1.0).is_err());
    }

    #[test]
    fn waiting_for_mobility_can_bridge_a_gap() {
        // Vehicle 1 drives toward the stuck holder at 100 m per slot.
        let area = WorldArea::new(1000.0, 1000.0).unwrap();
        let holder = Vehicle {
            tx_range: 75.0,
            ..Vehicle::at_rest(0, Position::new(100.0, 500.0))
        };
        let approaching = Vehicle {
            tx_range: 75.0,
            speed: 1000.0,
            heading: PI,
            ..Vehicle::at_rest(1, Position::new(300.0, 500.0))
        };
        let field = VehicleField::new(area, vec![holder, approaching], 75.0).unwrap();
        let sim = Simulator::new(&slot_config(2)).unwrap();
        let trace = sim
            .propagate(
                field,
                Hazard {
                    position: Position::new(100.0, 500.0),
                },
                &mut rng_from_seed(0),
            )
            .unwrap();
        assert!(trace.completed);
        // Two waiting slots close the 200 m gap; the hop takes the third.
        assert!((trace.total_latency_s - 0.3).abs() < 1e-9, "{trace:?}");
        assert!((trace.hops[0].hop_time_s - 0.3).abs() < 1e-9);
    }
}

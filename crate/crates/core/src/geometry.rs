//! Poisson point process vehicle fields on a bounded rectangular world.
//!
//! The world is the rectangle `[0, width] x [0, depth]`. A field is one
//! realization of a homogeneous PPP: the vehicle count is Poisson with mean
//! `intensity * area`, and given the count the positions are i.i.d. uniform.
//! Each field carries a uniform-grid index whose cell size equals the
//! transmission range, so an in-range neighbor always lies in the 3x3 block
//! of cells around the querying vehicle.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::coverage::SightArc;
use crate::error::{invalid_arg, invalid_config, Result};
use crate::seed::{rng_from_seed, SimRng};

/// Transmission range used when a field is sampled without an explicit one.
pub const DEFAULT_TX_RANGE_M: f64 = 100.0;

pub type VehicleId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldArea {
    pub width: f64,
    pub depth: f64,
}

impl WorldArea {
    pub fn new(width: f64, depth: f64) -> Result<Self> {
        let area = WorldArea { width, depth };
        area.validate()?;
        Ok(area)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0
            && self.width.is_finite()
            && self.depth > 0.0
            && self.depth.is_finite())
        {
            return Err(invalid_config(format!(
                "world must have positive finite extent, got {} x {}",
                self.width, self.depth
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.width * self.depth
    }

    pub fn contains(&self, p: Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.depth).contains(&p.y)
    }

    pub fn center(&self) -> Position {
        Position::new(self.width / 2.0, self.depth / 2.0)
    }

    /// Uniform point in the world.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Position {
        Position::new(
            rng.random::<f64>() * self.width,
            rng.random::<f64>() * self.depth,
        )
    }

    /// Area of the disk `(center, radius)` clipped to the world rectangle.
    pub fn clipped_disk_area(&self, center: Position, radius: f64) -> f64 {
        if radius <= 0.0 {
            return 0.0;
        }
        let (cx, cy) = (center.x, center.y);
        if cx - radius >= 0.0
            && cx + radius <= self.width
            && cy - radius >= 0.0
            && cy + radius <= self.depth
        {
            return PI * radius * radius;
        }
        // Substitute x = cx + r sin(t): the vertical chord half-length becomes
        // r cos(t) and dx = r cos(t) dt, which removes the square-root
        // singularity at the disk's left and right extremes. The integrand is
        // smooth between the angles where the chord meets the top or bottom
        // edge, so those angles split the quadrature.
        let to_angle = |x: f64| ((x - cx) / radius).clamp(-1.0, 1.0).asin();
        let lo = to_angle(0.0);
        let hi = to_angle(self.width);
        if hi <= lo {
            return 0.0;
        }
        let mut breaks = vec![lo, hi];
        for edge_gap in [cy, self.depth - cy] {
            let c = edge_gap / radius;
            if c > 0.0 && c < 1.0 {
                let a = c.acos();
                breaks.extend([a, -a]);
            }
        }
        breaks.retain(|t| *t >= lo && *t <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let depth = self.depth;
        let integrand = |t: f64| {
            let half = radius * t.cos();
            let top = (cy + half).min(depth);
            let bottom = (cy - half).max(0.0);
            half * (top - bottom).max(0.0)
        };
        breaks
            .windows(2)
            .map(|w| simpson(integrand, w[0], w[1], 2048))
            .sum()
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Spatial PPP intensity in vehicles per square meter.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AreaIntensity(pub f64);

impl AreaIntensity {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(invalid_config(format!(
                "intensity must be finite and nonnegative, got {value}"
            )));
        }
        Ok(AreaIntensity(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Expected number of points in `area`.
    pub fn expected_count(self, area: &WorldArea) -> f64 {
        self.0 * area.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(self, other: Position) -> f64 {
        self.distance_sq(other).sqrt()
    }
}

/// Shape of a vehicle's vision sector; apex and heading come from the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SightShape {
    pub half_angle: f64,
    pub radius: f64,
}

impl Default for SightShape {
    fn default() -> Self {
        SightShape {
            half_angle: PI / 6.0,
            radius: 75.0,
        }
    }
}

/// One point of the process together with its mobility and sensing state.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: VehicleId,
    pub position: Position,
    /// Radians in `[0, 2pi)`.
    pub heading: f64,
    /// Meters per second.
    pub speed: f64,
    pub tx_range: f64,
    pub sight: SightShape,
}

impl Vehicle {
    pub fn at_rest(id: VehicleId, position: Position) -> Self {
        Vehicle {
            id,
            position,
            heading: 0.0,
            speed: 0.0,
            tx_range: DEFAULT_TX_RANGE_M,
            sight: SightShape::default(),
        }
    }

    pub fn sight_arc(&self) -> SightArc {
        SightArc {
            apex: self.position,
            heading: self.heading,
            half_angle: self.sight.half_angle,
            radius: self.sight.radius,
        }
    }
}

#[derive(Debug, Clone)]
struct GridIndex {
    cell: f64,
    cols: usize,
    rows: usize,
    cells: Vec<Vec<VehicleId>>,
}

impl GridIndex {
    fn build(area: &WorldArea, cell: f64, vehicles: &[Vehicle]) -> Self {
        // Very small ranges would explode the cell count; cap the grid.
        let max_cells_per_axis = 4096.0;
        let cell = cell
            .max(area.width / max_cells_per_axis)
            .max(area.depth / max_cells_per_axis);
        let cols = ((area.width / cell).ceil() as usize).max(1);
        let rows = ((area.depth / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); cols * rows];
        let mut index = GridIndex {
            cell,
            cols,
            rows,
            cells: Vec::new(),
        };
        for v in vehicles {
            let (c, r) = index.cell_of(v.position);
            cells[r * cols + c].push(v.id);
        }
        index.cells = cells;
        index
    }

    fn cell_of(&self, p: Position) -> (usize, usize) {
        let c = ((p.x / self.cell).floor().max(0.0) as usize).min(self.cols - 1);
        let r = ((p.y / self.cell).floor().max(0.0) as usize).min(self.rows - 1);
        (c, r)
    }

    /// Ids in every cell within `reach` cells (Chebyshev) of `p`'s cell.
    fn candidates(&self, p: Position, range: f64) -> impl Iterator<Item = VehicleId> + '_ {
        let reach = (range / self.cell).ceil() as usize;
        let (c, r) = self.cell_of(p);
        let (c0, c1) = (c.saturating_sub(reach), (c + reach).min(self.cols - 1));
        let (r0, r1) = (r.saturating_sub(reach), (r + reach).min(self.rows - 1));
        (r0..=r1).flat_map(move |row| {
            (c0..=c1).flat_map(move |col| self.cells[row * self.cols + col].iter().copied())
        })
    }
}

/// An immutable snapshot of all vehicles in the world.
#[derive(Debug, Clone)]
pub struct VehicleField {
    vehicles: Vec<Vehicle>,
    area: WorldArea,
    index: GridIndex,
}

impl VehicleField {
    /// Builds a field; vehicle ids are reassigned to their position in `vehicles`.
    pub fn new(area: WorldArea, mut vehicles: Vec<Vehicle>, cell_size: f64) -> Result<Self> {
        area.validate()?;
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(invalid_arg(format!(
                "cell size must be positive, got {cell_size}"
            )));
        }
        for (i, v) in vehicles.iter_mut().enumerate() {
            if !area.contains(v.position) {
                return Err(invalid_arg(format!(
                    "vehicle {i} at ({}, {}) lies outside the world",
                    v.position.x, v.position.y
                )));
            }
            v.id = i;
        }
        let index = GridIndex::build(&area, cell_size, &vehicles);
        Ok(VehicleField {
            vehicles,
            area,
            index,
        })
    }

    pub fn area(&self) -> &WorldArea {
        &self.area
    }

    pub fn vehicles(&self) -> &[Vehicle] {
        &self.vehicles
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&Vehicle> {
        self.vehicles.get(id)
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.index.cell
    }

    pub fn into_vehicles(self) -> Vec<Vehicle> {
        self.vehicles
    }

    /// Number of vehicles within `radius` (inclusive) of `center`.
    pub fn count_in_disk(&self, center: Position, radius: f64) -> Result<usize> {
        if !(radius >= 0.0) {
            return Err(invalid_arg(format!(
                "radius must be nonnegative, got {radius}"
            )));
        }
        let r2 = radius * radius;
        let covers_world = [
            Position::new(0.0, 0.0),
            Position::new(self.area.width, 0.0),
            Position::new(0.0, self.area.depth),
            Position::new(self.area.width, self.area.depth),
        ]
        .iter()
        .all(|corner| corner.distance_sq(center) <= r2);
        if covers_world {
            return Ok(self.vehicles.len());
        }
        Ok(self
            .index
            .candidates(center, radius)
            .filter(|&id| self.vehicles[id].position.distance_sq(center) <= r2)
            .count())
    }

    /// Thinning ratio of a (clipped) disk: its area over the world's area.
    pub fn disk_ratio(&self, center: Position, radius: f64) -> f64 {
        self.area.clipped_disk_area(center, radius) / self.area.area()
    }

    /// Closest vehicle to `from` within `range`, skipping `from` itself and
    /// every id for which `excluded` returns true. Equidistant candidates
    /// resolve to the lowest id.
    pub fn nearest_neighbor(
        &self,
        from: VehicleId,
        range: f64,
        excluded: impl Fn(VehicleId) -> bool,
    ) -> Option<VehicleId> {
        let origin = self.vehicles.get(from)?.position;
        if !(range > 0.0) {
            return None;
        }
        let r2 = range * range;
        let mut best: Option<(f64, VehicleId)> = None;
        for id in self.index.candidates(origin, range) {
            if id == from || excluded(id) {
                continue;
            }
            let d2 = self.vehicles[id].position.distance_sq(origin);
            if d2 > r2 {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bid)) => d2 < bd || (d2 == bd && id < bid),
            };
            if better {
                best = Some((d2, id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Ids of all other vehicles within `range` of `from`, ascending.
    pub fn neighbors_within(&self, from: VehicleId, range: f64) -> Vec<VehicleId> {
        let Some(origin) = self.vehicles.get(from).map(|v| v.position) else {
            return Vec::new();
        };
        let r2 = range * range;
        let mut ids: Vec<VehicleId> = self
            .index
            .candidates(origin, range)
            .filter(|&id| id != from && self.vehicles[id].position.distance_sq(origin) <= r2)
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Closest vehicle to an arbitrary point, with no range limit.
    pub fn nearest_to_point(&self, p: Position) -> Option<VehicleId> {
        self.vehicles
            .iter()
            .map(|v| (v.position.distance_sq(p), v.id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }
}

/// Draws PPP positions: a Poisson count, then i.i.d. uniform points.
pub fn sample_ppp_points<R: Rng + ?Sized>(
    intensity: AreaIntensity,
    area: &WorldArea,
    rng: &mut R,
) -> Result<Vec<Position>> {
    area.validate()?;
    let mean = intensity.expected_count(area);
    let count = if mean > 0.0 {
        let poisson =
            Poisson::new(mean).map_err(|e| invalid_config(format!("Poisson mean {mean}: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    Ok((0..count).map(|_| area.sample_point(rng)).collect())
}

/// A field of vehicles at rest with default transmission range, indexed
/// with cell size [`DEFAULT_TX_RANGE_M`].
pub fn sample_ppp(intensity: AreaIntensity, area: WorldArea, seed: u64) -> Result<VehicleField> {
    AreaIntensity::new(intensity.0)?;
    let mut rng: SimRng = rng_from_seed(seed);
    let points = sample_ppp_points(intensity, &area, &mut rng)?;
    let vehicles = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| Vehicle::at_rest(i, p))
        .collect();
    VehicleField::new(area, vehicles, DEFAULT_TX_RANGE_M)
}

fn check_nn_args(order: u32, intensity: AreaIntensity) -> Result<()> {
    if order < 1 {
        return Err(invalid_arg("neighbor order must be at least 1"));
    }
    if !(intensity.0 > 0.0 && intensity.0.is_finite()) {
        return Err(invalid_arg(format!(
            "intensity must be positive, got {}",
            intensity.0
        )));
    }
    Ok(())
}

/// Density of the distance from a point to its `order`-th nearest neighbor
/// in a homogeneous planar PPP:
/// `2 (pi l)^n r^(2n-1) exp(-pi l r^2) / (n-1)!`.
pub fn nn_distance_pdf(order: u32, intensity: AreaIntensity, r: f64) -> Result<f64> {
    check_nn_args(order, intensity)?;
    if !(r >= 0.0) {
        return Err(invalid_arg(format!(
            "distance must be nonnegative, got {r}"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let n = order as f64;
    let pl = PI * intensity.0;
    let ln = std::f64::consts::LN_2 + n * pl.ln() + (2.0 * n - 1.0) * r.ln()
        - pl * r * r
        - statrs::function::gamma::ln_gamma(n);
    Ok(ln.exp())
}

/// Distribution function matching [`nn_distance_pdf`]: the probability that a
/// disk of radius `r` holds at least `order` points.
pub fn nn_distance_cdf(order: u32, intensity: AreaIntensity, r: f64) -> Result<f64> {
    check_nn_args(order, intensity)?;
    if !(r >= 0.0) {
        return Err(invalid_arg(format!(
            "distance must be nonnegative, got {r}"
        )));
    }
    let mean = PI * intensity.0 * r * r;
    Ok(statrs::function::gamma::gamma_lr(order as f64, mean))
}

//! Scenario definition and ground-truth kinematics.
//!
//! Vehicles follow scripted waypoint lists and are linearly interpolated
//! between waypoints. Waypoint times are expressed in timesteps.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, OrientedBox, Vec3};
use crate::rng::{keyed_rng, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VehicleId(pub u32);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl Dims {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        Dims { length, width, height }
    }

    fn is_valid(&self) -> bool {
        self.length > 0.0 && self.width > 0.0 && self.height > 0.0
    }
}

/// Pose and attributes of one vehicle at one instant. `position` is the
/// ground point under the vehicle's center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub position: Vec3,
    pub heading: f64,
    pub speed: f64,
    pub dims: Dims,
    pub connected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsuNode {
    pub position: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    /// Timestep (may be fractional or negative).
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleScript {
    pub id: VehicleId,
    pub dims: Dims,
    pub connected: bool,
    pub waypoints: Vec<Waypoint>,
}

impl VehicleScript {
    pub fn start(&self) -> f64 {
        self.waypoints.first().map_or(f64::INFINITY, |w| w.t)
    }

    pub fn end(&self) -> f64 {
        self.waypoints.last().map_or(f64::NEG_INFINITY, |w| w.t)
    }

    pub fn is_active(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }

    fn segment_heading(&self, i: usize) -> Option<f64> {
        let a = self.waypoints.get(i)?;
        let b = self.waypoints.get(i + 1)?;
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        (dx.hypot(dy) > 1e-12).then(|| wrap_angle(dy.atan2(dx)))
    }

    /// Heading of segment `i`, falling back to the nearest moving segment
    /// (earlier first) when the vehicle is standing still on it.
    fn heading_near(&self, i: usize) -> f64 {
        let n = self.waypoints.len().saturating_sub(1);
        if let Some(h) = self.segment_heading(i) {
            return h;
        }
        (1..n.max(1))
            .flat_map(|k| [i.checked_sub(k), Some(i + k)])
            .flatten()
            .filter(|&j| j < n)
            .find_map(|j| self.segment_heading(j))
            .unwrap_or(0.0)
    }

    /// Interpolated state at fractional timestep `t`, or `None` outside the
    /// script window.
    pub fn state_at(&self, t: f64, timestep_s: f64) -> Option<VehicleState> {
        if !self.is_active(t) {
            return None;
        }
        let w = &self.waypoints;
        if w.len() == 1 {
            return Some(self.make_state(w[0].x, w[0].y, 0.0, 0.0));
        }
        let i = w
            .partition_point(|p| p.t <= t)
            .saturating_sub(1)
            .min(w.len() - 2);
        let (a, b) = (w[i], w[i + 1]);
        let f = (t - a.t) / (b.t - a.t);
        let x = a.x + (b.x - a.x) * f;
        let y = a.y + (b.y - a.y) * f;
        let len = (b.x - a.x).hypot(b.y - a.y);
        let speed = len / ((b.t - a.t) * timestep_s);
        Some(self.make_state(x, y, self.heading_near(i), speed))
    }

    /// Like [`state_at`](Self::state_at) but holds the first/last waypoint
    /// outside the script window.
    pub fn state_at_clamped(&self, t: f64, timestep_s: f64) -> Option<VehicleState> {
        if self.waypoints.is_empty() {
            return None;
        }
        self.state_at(t.clamp(self.start(), self.end()), timestep_s)
    }

    fn make_state(&self, x: f64, y: f64, heading: f64, speed: f64) -> VehicleState {
        VehicleState {
            id: self.id,
            position: Vec3::new(x, y, 0.0),
            heading,
            speed,
            dims: self.dims,
            connected: self.connected,
        }
    }

    /// Fastest segment speed in m/s.
    pub fn max_speed(&self, timestep_s: f64) -> f64 {
        self.waypoints
            .windows(2)
            .map(|p| (p[1].x - p[0].x).hypot(p[1].y - p[0].y) / ((p[1].t - p[0].t) * timestep_s))
            .fold(0.0, f64::max)
    }
}

/// The simulated world over its whole duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub timestep_ms: f64,
    pub duration: usize,
    pub rsu: RsuNode,
    pub buildings: Vec<OrientedBox>,
    pub vehicles: Vec<VehicleScript>,
}

/// World state at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub t: usize,
    /// Active vehicles ordered by id.
    pub vehicles: Vec<VehicleState>,
    pub rsu: RsuNode,
    pub buildings: Vec<OrientedBox>,
}

impl WorldSnapshot {
    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles
            .binary_search_by_key(&id, |v| v.id)
            .ok()
            .map(|i| &self.vehicles[i])
    }

    pub fn connected(&self) -> impl Iterator<Item = &VehicleState> {
        self.vehicles.iter().filter(|v| v.connected)
    }
}

impl Scenario {
    pub fn timestep_s(&self) -> f64 {
        self.timestep_ms / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.duration < 1 {
            return bad("duration must be at least 1 timestep".into());
        }
        if !(self.timestep_ms > 0.0) {
            return bad(format!("timestep_ms must be positive, got {}", self.timestep_ms));
        }
        let mut ids: Vec<VehicleId> = self.vehicles.iter().map(|v| v.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate vehicle id".into());
        }
        for v in &self.vehicles {
            if !v.dims.is_valid() {
                return bad(format!("vehicle {} has non-positive dimensions", v.id));
            }
            if v.waypoints.is_empty() {
                return bad(format!("vehicle {} has no waypoints", v.id));
            }
            if v.waypoints.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return bad(format!("vehicle {} waypoint times are not strictly increasing", v.id));
            }
        }
        Ok(())
    }

    pub fn snapshot_at(&self, t: usize) -> Result<WorldSnapshot> {
        if t >= self.duration {
            return Err(Error::TimestepOutOfRange { t, duration: self.duration });
        }
        let dt = self.timestep_s();
        let mut vehicles: Vec<VehicleState> = self
            .vehicles
            .iter()
            .filter_map(|v| v.state_at(t as f64, dt))
            .collect();
        vehicles.sort_by_key(|v| v.id);
        Ok(WorldSnapshot {
            t,
            vehicles,
            rsu: self.rsu,
            buildings: self.buildings.clone(),
        })
    }

    pub fn script(&self, id: VehicleId) -> Option<&VehicleScript> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn max_speed(&self) -> f64 {
        let dt = self.timestep_s();
        self.vehicles.iter().map(|v| v.max_speed(dt)).fold(0.0, f64::max)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Parameters of the generated four-arm intersection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_vehicles: usize,
    pub connected_fraction: f64,
    pub duration: usize,
    pub timestep_ms: f64,
    pub arm_length: f64,
    pub lanes_per_direction: usize,
    pub lane_width: f64,
    pub building_setback: f64,
    pub building_height: f64,
    pub rsu_height: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub turn_probability: f64,
    pub large_vehicle_fraction: f64,
    pub min_headway_s: f64,
    pub car_dims: Dims,
    pub large_dims: Dims,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_vehicles: 30,
            connected_fraction: 0.5,
            duration: 600,
            timestep_ms: 100.0,
            arm_length: 150.0,
            lanes_per_direction: 2,
            lane_width: 3.5,
            building_setback: 10.0,
            building_height: 20.0,
            rsu_height: 5.0,
            speed_min: 3.0,
            speed_max: 6.0,
            turn_probability: 0.3,
            large_vehicle_fraction: 0.3,
            min_headway_s: 1.0,
            car_dims: Dims::new(4.5, 1.8, 1.5),
            large_dims: Dims::new(10.0, 2.5, 3.2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Straight,
    Left,
    Right,
}

/// Road geometry of a right-hand-traffic four-arm intersection centered at
/// the origin. Arms are indexed counter-clockwise starting from +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntersectionLayout {
    pub arm_length: f64,
    pub lanes_per_direction: usize,
    pub lane_width: f64,
}

fn arm_dir(arm: usize) -> (f64, f64) {
    match arm % 4 {
        0 => (1.0, 0.0),
        1 => (0.0, 1.0),
        2 => (-1.0, 0.0),
        _ => (0.0, -1.0),
    }
}

// Right-hand side of travel direction `v`.
fn right_of(v: (f64, f64)) -> (f64, f64) {
    (v.1, -v.0)
}

impl IntersectionLayout {
    pub fn road_half_width(&self) -> f64 {
        self.lanes_per_direction as f64 * self.lane_width
    }

    /// Lateral offset of lane `lane` (0 = innermost) from the road center line.
    pub fn lane_offset(&self, lane: usize) -> f64 {
        self.lane_width * (lane as f64 + 0.5)
    }

    /// Point at distance `s` from the center on the inbound side of `arm`.
    pub fn inbound_point(&self, arm: usize, lane: usize, s: f64) -> (f64, f64) {
        let u = arm_dir(arm);
        let r = right_of((-u.0, -u.1));
        let o = self.lane_offset(lane);
        (u.0 * s + r.0 * o, u.1 * s + r.1 * o)
    }

    /// Point at distance `s` from the center on the outbound side of `arm`.
    pub fn outbound_point(&self, arm: usize, lane: usize, s: f64) -> (f64, f64) {
        let u = arm_dir(arm);
        let r = right_of(u);
        let o = self.lane_offset(lane);
        (u.0 * s + r.0 * o, u.1 * s + r.1 * o)
    }

    pub fn exit_arm(entry_arm: usize, turn: Turn) -> usize {
        match turn {
            Turn::Straight => (entry_arm + 2) % 4,
            // Heading is opposite the entry arm; a left turn rotates it +90 deg.
            Turn::Left => (entry_arm + 3) % 4,
            Turn::Right => (entry_arm + 1) % 4,
        }
    }

    /// Polyline from the far end of `entry_arm` through the intersection to
    /// the far end of the exit arm.
    pub fn path(&self, entry_arm: usize, lane: usize, turn: Turn) -> Vec<(f64, f64)> {
        let l = self.arm_length;
        let h = self.road_half_width();
        let exit = Self::exit_arm(entry_arm, turn);
        let start = self.inbound_point(entry_arm, lane, l);
        let end = self.outbound_point(exit, lane, l);
        if turn == Turn::Straight {
            return vec![start, end];
        }
        let e1 = self.inbound_point(entry_arm, lane, h);
        let x1 = self.outbound_point(exit, lane, h);
        let u = arm_dir(entry_arm);
        let d = (-u.0, -u.1);
        let k = (x1.0 - e1.0) * d.0 + (x1.1 - e1.1) * d.1;
        let c = (e1.0 + d.0 * k, e1.1 + d.1 * k);
        let mut pts = vec![start, e1];
        for i in 1..6 {
            let s = i as f64 / 6.0;
            let (a, b, cc) = ((1.0 - s) * (1.0 - s), 2.0 * (1.0 - s) * s, s * s);
            pts.push((
                a * e1.0 + b * c.0 + cc * x1.0,
                a * e1.1 + b * c.1 + cc * x1.1,
            ));
        }
        pts.push(x1);
        pts.push(end);
        pts
    }
}

/// Converts a polyline into timed waypoints at constant `speed` (m/s),
/// starting at timestep `t0`.
pub fn timed_waypoints(path: &[(f64, f64)], speed: f64, t0: f64, timestep_s: f64) -> Vec<Waypoint> {
    let mut t = t0;
    let mut out = Vec::with_capacity(path.len());
    for (i, &(x, y)) in path.iter().enumerate() {
        if i > 0 {
            let (px, py) = path[i - 1];
            t += (x - px).hypot(y - py) / speed / timestep_s;
        }
        out.push(Waypoint { t, x, y });
    }
    out
}

impl ScenarioConfig {
    pub fn layout(&self) -> IntersectionLayout {
        IntersectionLayout {
            arm_length: self.arm_length,
            lanes_per_direction: self.lanes_per_direction,
            lane_width: self.lane_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &'static str, reason: String| Err(Error::InvalidConfig { field, reason });
        if self.n_vehicles < 1 {
            return fail("n_vehicles", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.connected_fraction) {
            return fail("connected_fraction", format!("{} not in [0, 1]", self.connected_fraction));
        }
        if !(0.0..=1.0).contains(&self.large_vehicle_fraction) {
            return fail("large_vehicle_fraction", "not in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return fail("turn_probability", "not in [0, 1]".into());
        }
        if self.duration < 1 {
            return fail("duration", "must be at least 1".into());
        }
        if !(self.timestep_ms > 0.0) {
            return fail("timestep_ms", "must be positive".into());
        }
        if self.lanes_per_direction < 1 || !(self.lane_width > 0.0) {
            return fail("lanes_per_direction", "need at least one lane of positive width".into());
        }
        if !(self.speed_min > 0.0 && self.speed_max >= self.speed_min) {
            return fail("speed_min", "need 0 < speed_min <= speed_max".into());
        }
        if !(self.arm_length > self.layout().road_half_width() + self.building_setback) {
            return fail("arm_length", "arms must extend past the corner buildings".into());
        }
        if !(self.min_headway_s > 0.0) {
            return fail("min_headway_s", "must be positive".into());
        }
        if !(self.car_dims.is_valid() && self.large_dims.is_valid()) {
            return fail("car_dims", "vehicle dimensions must be positive".into());
        }
        if !(self.building_height > 0.0 && self.rsu_height > 0.0) {
            return fail("building_height", "heights must be positive".into());
        }
        Ok(())
    }

    fn buildings(&self) -> Result<Vec<OrientedBox>> {
        let inner = self.layout().road_half_width() + self.building_setback;
        let outer = self.arm_length;
        let hz = self.building_height;
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .into_iter()
            .map(|(sx, sy): (f64, f64)| {
                let (x0, x1) = if sx > 0.0 { (inner, outer) } else { (-outer, -inner) };
                let (y0, y1) = if sy > 0.0 { (inner, outer) } else { (-outer, -inner) };
                OrientedBox::from_bounds(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, hz))
            })
            .collect()
    }
}

/// Builds a randomized intersection scenario. Vehicles enter on random
/// inbound lanes at headway-separated slots; the same seed always yields the
/// same scenario.
pub fn generate_intersection_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let dt = cfg.timestep_ms / 1000.0;
    let layout = cfg.layout();
    let lanes = cfg.lanes_per_direction;
    let entries = 4 * lanes;
    let headway = (cfg.min_headway_s / dt).ceil().max(1.0) as i64;
    // Vehicles may already be on the road at t = 0.
    let lead_in = (2.0 * cfg.arm_length / cfg.speed_max / dt).ceil() as i64;
    let window = lead_in + cfg.duration as i64;
    let slots_per_lane = (window / headway) as usize;
    let capacity = entries * slots_per_lane;
    if cfg.n_vehicles > capacity {
        return Err(Error::InfeasibleConfig(format!(
            "{} vehicles exceed lane capacity {} ({} lanes x {} headway slots)",
            cfg.n_vehicles, capacity, entries, slots_per_lane
        )));
    }

    let mut rng = keyed_rng(seed, &[tag::SCENARIO]);
    let mut slots = index::sample(&mut rng, capacity, cfg.n_vehicles).into_vec();
    // Order by spawn time, then lane, so ids follow arrival order.
    slots.sort_by_key(|&s| (s % slots_per_lane, s / slots_per_lane));

    let mut vehicles = Vec::with_capacity(cfg.n_vehicles);
    for (i, slot) in slots.into_iter().enumerate() {
        let entry = slot / slots_per_lane;
        let (arm, lane) = (entry / lanes, entry % lanes);
        let t0 = ((slot % slots_per_lane) as i64 * headway - lead_in) as f64;

        let connected = rng.random::<f64>() < cfg.connected_fraction;
        let large = rng.random::<f64>() < cfg.large_vehicle_fraction;
        let speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * rng.random::<f64>();
        let turning = rng.random::<f64>() < cfg.turn_probability;
        let turn = match (turning, lane) {
            (true, 0) => Turn::Left,
            (true, l) if l + 1 == lanes => Turn::Right,
            _ => Turn::Straight,
        };

        let path = layout.path(arm, lane, turn);
        vehicles.push(VehicleScript {
            id: VehicleId(i as u32),
            dims: if large { cfg.large_dims } else { cfg.car_dims },
            connected,
            waypoints: timed_waypoints(&path, speed, t0, dt),
        });
    }

    let scenario = Scenario {
        timestep_ms: cfg.timestep_ms,
        duration: cfg.duration,
        rsu: RsuNode { position: Vec3::new(0.0, 0.0, cfg.rsu_height) },
        buildings: cfg.buildings()?,
        vehicles,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Heading (radians) of travel direction from `a` to `b`.
pub fn heading_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    wrap_angle((b.1 - a.1).atan2(b.0 - a.0))
}

//! Discrete-time loop: observe, predict, plan, apply and score.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::channel::{
    blocking_loss_mean, link_feasible, path_loss, shannon_throughput, ChannelParams, LinkBudget,
};
use crate::error::{Error, Result};
use crate::geometry::{antenna_positions, segment_intersects_box, vehicle_box, Segment, Vec3};
use crate::mobility::{Scenario, VehicleState, WorldSnapshot};
use crate::prediction::{
    predict, EpsilonModel, ErrorHeatmap, HeatmapConfig, PredictionFrame, PredictorConfig,
};
use crate::rng::{keyed_rng, tag};
use crate::routing::{
    baseline_sdvn, baseline_single_hop, build_connection_graph, default_demands, plan_topology,
    AntennaRef, GraphInputs, NodeOwner, RoutingParams, Topology, WeightedConnectionGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    Sdvn,
    SingleHop,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Sdvn => "sdvn",
            Method::SingleHop => "single-hop",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Method::Proposed),
            "sdvn" => Ok(Method::Sdvn),
            "single-hop" => Ok(Method::SingleHop),
            other => Err(Error::InvalidConfig { field: "method", reason: format!("unknown method {other:?}") }),
        }
    }
}

/// Clock of the loop, in timesteps unless noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeScaleParams {
    pub timestep_ms: f64,
    pub topology_control_interval: usize,
    pub routing_exec_interval: usize,
    pub history_window: usize,
    pub horizon: usize,
}

impl Default for TimeScaleParams {
    fn default() -> Self {
        TimeScaleParams {
            timestep_ms: 100.0,
            topology_control_interval: 1,
            routing_exec_interval: 10,
            history_window: 10,
            horizon: 50,
        }
    }
}

impl TimeScaleParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |field, reason: &str| Err(Error::InvalidConfig { field, reason: reason.into() });
        if !(self.timestep_ms > 0.0) {
            return fail("timestep_ms", "must be positive");
        }
        if self.topology_control_interval != 1 {
            return fail("topology_control_interval", "only 1 is supported");
        }
        if self.routing_exec_interval == 0 || self.history_window == 0 || self.horizon == 0 {
            return fail("routing_exec_interval", "intervals must be positive");
        }
        if self.horizon < self.routing_exec_interval {
            return fail("horizon", "must cover at least one routing interval");
        }
        Ok(())
    }
}

/// Where blocking-risk errors are read from the heatmap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonLookup {
    Predicted,
    Current,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub routing: RoutingParams,
    pub channel: ChannelParams,
    pub budget: LinkBudget,
    pub predictor: PredictorConfig,
    pub time_scale: TimeScaleParams,
    pub heatmap: HeatmapConfig,
    pub epsilon_lookup: EpsilonLookup,
    /// Lets the SDVN baseline see vehicles without a radio.
    pub sdvn_observes_unconnected: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Proposed,
            routing: RoutingParams::default(),
            channel: ChannelParams::default(),
            budget: LinkBudget::default(),
            predictor: PredictorConfig::default(),
            time_scale: TimeScaleParams::default(),
            heatmap: HeatmapConfig::default(),
            epsilon_lookup: EpsilonLookup::Predicted,
            sdvn_observes_unconnected: false,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.routing.validate()?;
        self.channel.validate()?;
        self.budget.validate()?;
        self.predictor.validate()?;
        self.time_scale.validate()?;
        if self.predictor.history_window != self.time_scale.history_window {
            return Err(Error::InvalidConfig {
                field: "history_window",
                reason: format!(
                    "predictor uses {} but time scale says {}",
                    self.predictor.history_window, self.time_scale.history_window
                ),
            });
        }
        Ok(())
    }

    pub fn validate_for(&self, scenario: &Scenario) -> Result<()> {
        self.validate()?;
        scenario.validate()?;
        if (self.time_scale.timestep_ms - scenario.timestep_ms).abs() > 1e-9 {
            return Err(Error::InvalidConfig {
                field: "timestep_ms",
                reason: format!(
                    "config uses {} ms but scenario uses {} ms",
                    self.time_scale.timestep_ms, scenario.timestep_ms
                ),
            });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Plans for consecutive timesteps starting at `base_t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologySchedule {
    pub base_t: usize,
    pub plans: Vec<Topology>,
}

impl TopologySchedule {
    /// Plan to apply at `t`; the last plan is held past the end.
    pub fn at(&self, t: usize) -> Option<&Topology> {
        let off = t.checked_sub(self.base_t)?;
        self.plans.get(off.min(self.plans.len().checked_sub(1)?))
    }
}

/// Fading draws, fixed within one routing interval. Shadowing is shared by
/// all antenna pairs of the same two entities, since their separation is far
/// below the shadowing decorrelation distance.
#[derive(Debug, Clone, Copy)]
pub struct FadingField {
    pub seed: u64,
    pub interval: u64,
}

fn owner_key(a: AntennaRef) -> u64 {
    match a.owner {
        NodeOwner::Rsu => 0,
        NodeOwner::Vehicle(id) => id.0 as u64 + 1,
    }
}

impl FadingField {
    fn standard_normal(&self, a: AntennaRef, b: AntennaRef, which: u64) -> f64 {
        let (ka, kb) = (owner_key(a), owner_key(b));
        let mut rng = keyed_rng(self.seed, &[self.interval, ka.min(kb), ka.max(kb), which]);
        rand::Rng::sample(&mut rng, rand_distr::StandardNormal)
    }

    pub fn shadow(&self, a: AntennaRef, b: AntennaRef, channel: &ChannelParams) -> f64 {
        channel.sigma_sf * self.standard_normal(a, b, tag::SHADOW)
    }

    pub fn blocking(&self, a: AntennaRef, b: AntennaRef, d: f64, channel: &ChannelParams) -> Result<f64> {
        Ok(blocking_loss_mean(d, channel)? + channel.sigma_bl * self.standard_normal(a, b, tag::BLOCKING))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleOutcome {
    pub source: NodeOwner,
    pub success: bool,
    /// Bits per second; 0 when no route survives.
    pub throughput: f64,
}

fn antenna_position(truth: &WorldSnapshot, a: AntennaRef) -> Option<Vec3> {
    match a.owner {
        NodeOwner::Rsu => Some(truth.rsu.position),
        NodeOwner::Vehicle(id) => truth.vehicle(id).map(|v| antenna_positions(v)[a.antenna as usize]),
    }
}

/// Total loss of one hop under ground truth, or `None` if the hop is dead
/// (endpoint gone, building in the way, or over budget).
fn hop_loss(
    truth: &WorldSnapshot,
    boxes: &[(NodeOwner, crate::geometry::OrientedBox)],
    from: AntennaRef,
    to: AntennaRef,
    channel: &ChannelParams,
    budget: &LinkBudget,
    fading: &FadingField,
) -> Result<Option<f64>> {
    let (Some(pa), Some(pb)) = (antenna_position(truth, from), antenna_position(truth, to)) else {
        return Ok(None);
    };
    let seg = Segment::new(pa, pb);
    if truth.buildings.iter().any(|b| segment_intersects_box(&seg, b)) {
        return Ok(None);
    }
    let d = pa.distance(pb).max(1.0);
    let mut loss = path_loss(d, channel, fading.shadow(from, to, channel))?;
    let vehicle_blocked = boxes
        .iter()
        .any(|(o, bx)| *o != from.owner && *o != to.owner && segment_intersects_box(&seg, bx));
    if vehicle_blocked {
        loss += fading.blocking(from, to, d, channel)?;
    }
    Ok(link_feasible(loss, budget).then_some(loss))
}

/// Scores `topology` against the true world at one timestep. Every connected
/// vehicle present in `truth` gets one outcome, in id order.
pub fn evaluate_topology(
    topology: &Topology,
    truth: &WorldSnapshot,
    channel: &ChannelParams,
    budget: &LinkBudget,
    fading: &FadingField,
) -> Result<Vec<VehicleOutcome>> {
    let boxes = truth
        .vehicles
        .iter()
        .map(|v| Ok((NodeOwner::Vehicle(v.id), vehicle_box(v)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for v in truth.connected() {
        let source = NodeOwner::Vehicle(v.id);
        let mut best: Option<f64> = None;
        for route in topology.routes_for(source) {
            let mut weakest = f64::INFINITY;
            let mut alive = !route.hops.is_empty();
            for h in &route.hops {
                match hop_loss(truth, &boxes, h.from, h.to, channel, budget, fading)? {
                    Some(loss) => weakest = weakest.min(shannon_throughput(loss, budget)),
                    None => {
                        alive = false;
                        break;
                    }
                }
            }
            if alive {
                best = Some(best.map_or(weakest, |b: f64| b.max(weakest)));
            }
        }
        out.push(VehicleOutcome { source, success: best.is_some(), throughput: best.unwrap_or(0.0) });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestepMetrics {
    pub t: usize,
    pub cv_successful: usize,
    pub cv_total: usize,
    /// Mean over connected vehicles, failures counting as 0 (bits/s).
    pub mean_throughput: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsAccumulator {
    pub rows: Vec<TimestepMetrics>,
    pub successful_sum: usize,
    pub total_sum: usize,
    pub throughput_sum: f64,
}

impl MetricsAccumulator {
    pub fn record(&mut self, t: usize, outcomes: &[VehicleOutcome]) {
        let cv_total = outcomes.len();
        let cv_successful = outcomes.iter().filter(|o| o.success).count();
        let tp: f64 = outcomes.iter().map(|o| o.throughput).sum();
        self.push(TimestepMetrics {
            t,
            cv_successful,
            cv_total,
            mean_throughput: if cv_total > 0 { tp / cv_total as f64 } else { 0.0 },
        });
    }

    pub fn push(&mut self, row: TimestepMetrics) {
        debug_assert!(row.cv_successful <= row.cv_total);
        self.successful_sum += row.cv_successful;
        self.total_sum += row.cv_total;
        self.throughput_sum += row.mean_throughput * row.cv_total as f64;
        self.rows.push(row);
    }

    /// Successful vehicle-timesteps over all connected vehicle-timesteps.
    pub fn connectivity(&self) -> Result<f64> {
        if self.total_sum == 0 {
            return Err(Error::NoConnectedVehicles);
        }
        Ok(self.successful_sum as f64 / self.total_sum as f64)
    }

    /// Mean throughput per connected vehicle-timestep.
    pub fn mean_throughput(&self) -> f64 {
        if self.total_sum == 0 {
            0.0
        } else {
            self.throughput_sum / self.total_sum as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTimeline {
    pub method: Method,
    pub seed: u64,
    pub metrics: MetricsAccumulator,
}

impl MetricsTimeline {
    pub fn connectivity(&self) -> Option<f64> {
        self.metrics.connectivity().ok()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            method: self.method,
            seed: self.seed,
            connectivity: self.connectivity(),
            mean_throughput: self.metrics.mean_throughput(),
            cv_successful: self.metrics.successful_sum,
            cv_total: self.metrics.total_sum,
            timesteps: self.metrics.rows.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub seed: u64,
    /// Absent when no connected vehicle was ever present.
    pub connectivity: Option<f64>,
    pub mean_throughput: f64,
    pub cv_successful: usize,
    pub cv_total: usize,
    pub timesteps: usize,
}

/// Hooks for inspecting a run while it executes.
pub trait RunObserver {
    fn on_graph(&mut self, _base_t: usize, _offset: usize, _graph: &WeightedConnectionGraph) {}
    fn on_schedule(&mut self, _schedule: &TopologySchedule) {}
    fn on_outcomes(&mut self, _truth: &WorldSnapshot, _applied: &Topology, _outcomes: &[VehicleOutcome]) {}
    fn on_step(&mut self, _row: &TimestepMetrics) {}
}

struct NoObserver;

impl RunObserver for NoObserver {}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub timeline: MetricsTimeline,
    pub heatmap: ErrorHeatmap,
}

/// Heatmap reads at each vehicle's current position rather than the
/// predicted one.
struct AtCurrentPosition<'a> {
    map: &'a ErrorHeatmap,
    current: &'a WorldSnapshot,
}

impl EpsilonModel for AtCurrentPosition<'_> {
    fn epsilon(&self, v: &VehicleState) -> f64 {
        let pos = self.current.vehicle(v.id).map_or(v.position, |c| c.position);
        self.map.lookup(pos)
    }
}

pub fn run(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutput> {
    run_observed(scenario, cfg, &mut NoObserver)
}

pub fn run_observed(scenario: &Scenario, cfg: &RunConfig, observer: &mut dyn RunObserver) -> Result<RunOutput> {
    cfg.validate_for(scenario)?;
    let ts = cfg.time_scale;
    let mut heatmap = ErrorHeatmap::from_config(&cfg.heatmap, cfg.routing.epsilon_default)?;
    let mut history: VecDeque<WorldSnapshot> = VecDeque::with_capacity(ts.history_window + 1);
    let mut frames: VecDeque<PredictionFrame> = VecDeque::new();
    let mut schedule = TopologySchedule::default();
    let mut metrics = MetricsAccumulator::default();

    for t in 0..scenario.duration {
        let snap = scenario.snapshot_at(t)?;
        if history.len() == ts.history_window {
            history.pop_front();
        }
        history.push_back(snap.clone());

        // Score earlier predictions against what actually happened.
        frames.retain(|f| t <= f.base_t + f.horizon);
        // Frames are stored after this step runs, so every offset here is >= 1.
        for f in &frames {
            let Some(pred) = f.at_offset(t - f.base_t) else {
                continue;
            };
            for p in pred {
                if let Some(actual) = snap.vehicle(p.id) {
                    heatmap.update(p.position, actual.position);
                }
            }
        }

        if t % ts.routing_exec_interval == 0 {
            schedule = plan_interval(scenario, cfg, &snap, &history, &heatmap, &mut frames, observer)?;
            observer.on_schedule(&schedule);
        }

        let fading = FadingField { seed: cfg.seed, interval: (t / ts.routing_exec_interval) as u64 };
        let topo = schedule.at(t).cloned().unwrap_or_default();
        let outcomes = evaluate_topology(&topo, &snap, &cfg.channel, &cfg.budget, &fading)?;
        observer.on_outcomes(&snap, &topo, &outcomes);
        metrics.record(t, &outcomes);
        observer.on_step(metrics.rows.last().expect("just recorded"));
    }

    Ok(RunOutput { timeline: MetricsTimeline { method: cfg.method, seed: cfg.seed, metrics }, heatmap })
}

fn plan_interval(
    scenario: &Scenario,
    cfg: &RunConfig,
    snap: &WorldSnapshot,
    history: &VecDeque<WorldSnapshot>,
    heatmap: &ErrorHeatmap,
    frames: &mut VecDeque<PredictionFrame>,
    observer: &mut dyn RunObserver,
) -> Result<TopologySchedule> {
    let ts = cfg.time_scale;
    let demands = default_demands(&snap.vehicles);
    let plans = match cfg.method {
        Method::Sdvn => vec![baseline_sdvn(
            snap,
            &demands,
            &cfg.channel,
            &cfg.budget,
            &cfg.routing,
            cfg.sdvn_observes_unconnected,
        )?],
        Method::SingleHop => vec![baseline_single_hop(snap, &demands, &cfg.channel, &cfg.budget, &cfg.routing)?],
        Method::Proposed => {
            let frame = if history.len() >= ts.history_window {
                let hist: Vec<WorldSnapshot> = history.iter().cloned().collect();
                let mut rng = keyed_rng(cfg.seed, &[snap.t as u64, tag::PREDICTION]);
                let f = predict(&hist, ts.horizon, &cfg.predictor, scenario, &mut rng)?;
                frames.push_back(f.clone());
                f
            } else {
                PredictionFrame::degenerate(snap, ts.horizon)
            };
            let mut plans = Vec::with_capacity(ts.routing_exec_interval);
            for off in 0..ts.routing_exec_interval {
                let vehicles = frame.at_offset(off).expect("horizon covers the interval");
                let current = AtCurrentPosition { map: heatmap, current: snap };
                let eps: &dyn EpsilonModel = match cfg.epsilon_lookup {
                    EpsilonLookup::Predicted => heatmap,
                    EpsilonLookup::Current => &current,
                };
                let graph = build_connection_graph(&GraphInputs {
                    vehicles,
                    rsu: &snap.rsu,
                    buildings: &snap.buildings,
                    eps,
                    channel: &cfg.channel,
                    budget: &cfg.budget,
                    params: &cfg.routing,
                })?;
                observer.on_graph(snap.t, off, &graph);
                plans.push(plan_topology(&graph, &demands, &cfg.routing));
            }
            plans
        }
    };
    Ok(TopologySchedule { base_t: snap.t, plans })
}

//! Trajectory prediction and the running prediction-error heatmap.
//!
//! Two predictors are provided: constant-velocity extrapolation and a noisy
//! oracle that perturbs the true future so that its expected NMSE hits a
//! configured target. The heatmap stores, per ground cell, an exponential
//! moving average of observed position error; routing reads it to size the
//! blocking risk of each link.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mobility::{Scenario, VehicleId, VehicleState, WorldSnapshot};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    ConstantVelocity,
    NoisyOracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    /// Target NMSE of the noisy oracle; ignored by other predictors.
    pub nmse_target: f64,
    pub history_window: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            kind: PredictorKind::NoisyOracle,
            nmse_target: 0.0046,
            history_window: 10,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nmse_target >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "nmse_target",
                reason: format!("must be non-negative, got {}", self.nmse_target),
            });
        }
        if self.history_window < 2 {
            return Err(Error::InvalidConfig {
                field: "history_window",
                reason: "must be at least 2".into(),
            });
        }
        Ok(())
    }
}

/// Predicted states for the `horizon` timesteps following `base_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionFrame {
    pub base_t: usize,
    pub horizon: usize,
    /// States observed at `base_t`, ordered by id.
    pub base: Vec<VehicleState>,
    /// `steps[k]` holds the prediction for `base_t + k + 1`, same vehicles
    /// and order as `base`.
    pub steps: Vec<Vec<VehicleState>>,
}

impl PredictionFrame {
    /// Treats the current snapshot as the prediction for every future step.
    pub fn degenerate(snapshot: &WorldSnapshot, horizon: usize) -> Self {
        PredictionFrame {
            base_t: snapshot.t,
            horizon,
            base: snapshot.vehicles.clone(),
            steps: vec![snapshot.vehicles.clone(); horizon],
        }
    }

    /// States at `base_t + offset`; offset 0 is the observed base.
    pub fn at_offset(&self, offset: usize) -> Option<&[VehicleState]> {
        match offset {
            0 => Some(&self.base),
            k => self.steps.get(k - 1).map(Vec::as_slice),
        }
    }
}

pub trait TrajectoryPredictor {
    fn predict(&self, history: &[WorldSnapshot], horizon: usize, rng: &mut SimRng) -> Result<PredictionFrame>;
}

fn check_history(history: &[WorldSnapshot], window: usize, horizon: usize) -> Result<&WorldSnapshot> {
    if horizon < 1 {
        return Err(Error::InvalidConfig { field: "horizon", reason: "must be at least 1".into() });
    }
    if history.len() < window.max(1) {
        return Err(Error::InsufficientHistory { needed: window, got: history.len() });
    }
    Ok(history.last().expect("non-empty history"))
}

/// Extrapolates each vehicle along its last observed displacement.
#[derive(Debug, Clone, Copy)]
pub struct ConstantVelocity {
    pub history_window: usize,
}

impl TrajectoryPredictor for ConstantVelocity {
    fn predict(&self, history: &[WorldSnapshot], horizon: usize, _rng: &mut SimRng) -> Result<PredictionFrame> {
        let last = check_history(history, self.history_window.max(2), horizon)?;
        let prev = &history[history.len() - 2];
        let velocity: Vec<Vec3> = last
            .vehicles
            .iter()
            .map(|v| prev.vehicle(v.id).map_or(Vec3::ZERO, |p| v.position - p.position))
            .collect();
        let steps = (1..=horizon)
            .map(|k| {
                last.vehicles
                    .iter()
                    .zip(&velocity)
                    .map(|(v, dv)| {
                        let heading = if dv.norm() > 1e-9 { dv.y.atan2(dv.x) } else { v.heading };
                        VehicleState {
                            position: v.position + *dv * k as f64,
                            heading: crate::geometry::wrap_angle(heading),
                            ..*v
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(PredictionFrame { base_t: last.t, horizon, base: last.vehicles.clone(), steps })
    }
}

/// Ground-truth future plus isotropic Gaussian position noise. The noise
/// variance grows linearly with the horizon offset, like a random walk, and
/// is scaled so the expected NMSE of the frame equals `nmse_target`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyOracle<'a> {
    pub scenario: &'a Scenario,
    pub nmse_target: f64,
    pub history_window: usize,
}

impl TrajectoryPredictor for NoisyOracle<'_> {
    fn predict(&self, history: &[WorldSnapshot], horizon: usize, rng: &mut SimRng) -> Result<PredictionFrame> {
        let last = check_history(history, self.history_window, horizon)?;
        let dt = self.scenario.timestep_s();
        let scripts: BTreeMap<VehicleId, _> = self.scenario.vehicles.iter().map(|s| (s.id, s)).collect();

        let mut truth: Vec<Vec<VehicleState>> = Vec::with_capacity(horizon);
        let mut disp_sum = 0.0;
        // Sum of offsets over active entries: the total error budget in units
        // of the per-offset variance slope.
        let mut offset_sum = 0.0;
        for k in 1..=horizon {
            let t = (last.t + k) as f64;
            let row: Vec<VehicleState> = last
                .vehicles
                .iter()
                .map(|v| {
                    let script = scripts.get(&v.id);
                    let s = script.and_then(|s| s.state_at_clamped(t, dt)).unwrap_or(*v);
                    if script.is_some_and(|s| s.is_active(t)) {
                        disp_sum += s.position.distance_xy_sq(v.position);
                        offset_sum += k as f64;
                    }
                    s
                })
                .collect();
            truth.push(row);
        }
        // Two noisy axes share the error budget.
        let slope = if offset_sum > 0.0 { self.nmse_target * disp_sum / (2.0 * offset_sum) } else { 0.0 };

        for (k, row) in (1..=horizon).zip(truth.iter_mut()) {
            let sigma = (slope * k as f64).sqrt();
            for s in row.iter_mut() {
                let (zx, zy): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                s.position.x += sigma * zx;
                s.position.y += sigma * zy;
            }
        }
        Ok(PredictionFrame { base_t: last.t, horizon, base: last.vehicles.clone(), steps: truth })
    }
}

/// Runs the predictor selected by `cfg`.
pub fn predict(
    history: &[WorldSnapshot],
    horizon: usize,
    cfg: &PredictorConfig,
    scenario: &Scenario,
    rng: &mut SimRng,
) -> Result<PredictionFrame> {
    cfg.validate()?;
    let window = cfg.history_window;
    let history = &history[history.len().saturating_sub(window)..];
    match cfg.kind {
        PredictorKind::ConstantVelocity => {
            ConstantVelocity { history_window: window }.predict(history, horizon, rng)
        }
        PredictorKind::NoisyOracle => NoisyOracle {
            scenario,
            nmse_target: cfg.nmse_target,
            history_window: window,
        }
        .predict(history, horizon, rng),
    }
}

/// Mean squared position error over vehicles and steps, divided by the mean
/// squared displacement of the true positions from the base positions.
/// `truth[k]` is the ground truth at `base_t + k + 1`; vehicles missing from
/// a truth snapshot are skipped.
pub fn compute_nmse(pred: &PredictionFrame, truth: &[WorldSnapshot]) -> Result<f64> {
    if truth.len() != pred.horizon || pred.steps.len() != pred.horizon {
        return Err(Error::PredictionMismatch(format!(
            "horizon {} but {} truth snapshots",
            pred.horizon,
            truth.len()
        )));
    }
    let base: BTreeMap<VehicleId, Vec3> = pred.base.iter().map(|v| (v.id, v.position)).collect();
    let (mut err, mut norm, mut n) = (0.0, 0.0, 0usize);
    for (row, snap) in pred.steps.iter().zip(truth) {
        for p in row {
            let (Some(actual), Some(b)) = (snap.vehicle(p.id), base.get(&p.id)) else {
                continue;
            };
            err += p.position.distance_xy_sq(actual.position);
            norm += actual.position.distance_xy_sq(*b);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::PredictionMismatch("no vehicle appears in both".into()));
    }
    if norm <= 0.0 {
        return Err(Error::ZeroNormalizer);
    }
    Ok(err / norm)
}

/// Source of the per-vehicle prediction error used by the blocking risk
/// factor.
pub trait EpsilonModel {
    fn epsilon(&self, vehicle: &VehicleState) -> f64;
}

/// The same error for every vehicle.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEpsilon(pub f64);

impl EpsilonModel for ConstantEpsilon {
    fn epsilon(&self, _vehicle: &VehicleState) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub mean_error: f64,
    pub sample_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    pub cell_size: f64,
    /// Side length of the square grid centered on the origin, meters.
    pub extent: f64,
    pub learning_rate: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        HeatmapConfig { cell_size: 5.0, extent: 320.0, learning_rate: 0.1 }
    }
}

/// 2-D grid of running-average prediction error (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorHeatmap {
    pub origin: Vec3,
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    /// Returned for cells outside the grid or without samples.
    pub default_epsilon: f64,
    pub learning_rate: f64,
    /// Row-major, `ny` rows of `nx` cells.
    pub cells: Vec<HeatCell>,
}

impl ErrorHeatmap {
    pub fn new(
        origin: Vec3,
        cell_size: f64,
        nx: usize,
        ny: usize,
        default_epsilon: f64,
        learning_rate: f64,
    ) -> Result<Self> {
        if !(cell_size > 0.0) {
            return Err(Error::InvalidConfig { field: "cell_size", reason: "must be positive".into() });
        }
        if !(default_epsilon >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "epsilon_default",
                reason: "must be non-negative".into(),
            });
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::InvalidConfig {
                field: "learning_rate",
                reason: "must be in (0, 1]".into(),
            });
        }
        Ok(ErrorHeatmap {
            origin,
            cell_size,
            nx,
            ny,
            default_epsilon,
            learning_rate,
            cells: vec![HeatCell::default(); nx * ny],
        })
    }

    pub fn from_config(cfg: &HeatmapConfig, default_epsilon: f64) -> Result<Self> {
        let n = (cfg.extent / cfg.cell_size).ceil().max(1.0) as usize;
        let half = n as f64 * cfg.cell_size / 2.0;
        ErrorHeatmap::new(
            Vec3::new(-half, -half, 0.0),
            cfg.cell_size,
            n,
            n,
            default_epsilon,
            cfg.learning_rate,
        )
    }

    fn cell_index(&self, pos: Vec3) -> Option<usize> {
        let fx = ((pos.x - self.origin.x) / self.cell_size).floor();
        let fy = ((pos.y - self.origin.y) / self.cell_size).floor();
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then(|| iy * self.nx + ix)
    }

    pub fn cell(&self, pos: Vec3) -> Option<&HeatCell> {
        self.cell_index(pos).map(|i| &self.cells[i])
    }

    pub fn lookup(&self, pos: Vec3) -> f64 {
        match self.cell(pos) {
            Some(c) if c.sample_count > 0 => c.mean_error,
            _ => self.default_epsilon,
        }
    }

    /// Folds one observed error into the cell under `actual_pos`.
    pub fn update(&mut self, predicted_pos: Vec3, actual_pos: Vec3) {
        let Some(i) = self.cell_index(actual_pos) else {
            return;
        };
        let e = predicted_pos.distance(actual_pos);
        let eta = self.learning_rate;
        let c = &mut self.cells[i];
        c.mean_error = if c.sample_count == 0 { e } else { (1.0 - eta) * c.mean_error + eta * e };
        c.sample_count += 1;
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ErrorHeatmap = serde_json::from_str(s)?;
        if m.cells.len() != m.nx * m.ny {
            return Err(Error::Json(format!(
                "heatmap has {} cells, expected {}",
                m.cells.len(),
                m.nx * m.ny
            )));
        }
        Ok(m)
    }
}

impl EpsilonModel for ErrorHeatmap {
    fn epsilon(&self, vehicle: &VehicleState) -> f64 {
        self.lookup(vehicle.position)
    }
}

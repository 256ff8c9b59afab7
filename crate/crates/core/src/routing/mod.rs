//! Blockage-aware topology planning over the antenna connection graph, plus
//! the two conventional baselines.

mod graph;
mod paths;
mod topology;

pub use graph::{build_connection_graph, AntennaNode, EntityGraph, GraphEdge, GraphInputs, WeightedConnectionGraph};
pub use paths::{dijkstra, dijkstra_restricted, path_weight, yen_k_shortest, PathGraph, WeightedPath};
pub use topology::{
    baseline_single_hop, baseline_sdvn, default_demands, plan_topology, Demand, Hop, Route, Topology,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{perpendicular_distance, Segment};
use crate::mobility::{VehicleId, VehicleState};
use crate::prediction::EpsilonModel;

/// Entity that owns antennas. The RSU sorts before every vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOwner {
    Rsu,
    Vehicle(VehicleId),
}

impl std::fmt::Display for NodeOwner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeOwner::Rsu => write!(f, "rsu"),
            NodeOwner::Vehicle(id) => write!(f, "{id}"),
        }
    }
}

/// One antenna: its owner and index (0..4 for vehicles, 0 for the RSU).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AntennaRef {
    pub owner: NodeOwner,
    pub antenna: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoutingParams {
    /// Weight of the predicted blocking term.
    pub lambda: f64,
    pub n_routes: usize,
    /// Vehicles farther than this from a link never count as potential blockers.
    pub brf_corridor: f64,
    /// Prediction error assumed where the heatmap has no data (meters).
    pub epsilon_default: f64,
    /// Cap on the blocking risk factor when a blocker sits on the link.
    pub brf_max: f64,
}

impl Default for RoutingParams {
    fn default() -> Self {
        RoutingParams { lambda: 1.0, n_routes: 3, brf_corridor: 10.0, epsilon_default: 1.0, brf_max: 100.0 }
    }
}

impl RoutingParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |field, reason: &str| Err(Error::InvalidConfig { field, reason: reason.into() });
        if !(self.lambda >= 0.0) {
            return fail("lambda", "must be non-negative");
        }
        if self.n_routes < 1 {
            return fail("n_routes", "must be at least 1");
        }
        if !(self.brf_corridor > 0.0) {
            return fail("brf_corridor", "must be positive");
        }
        if !(self.epsilon_default >= 0.0) {
            return fail("epsilon_default", "must be non-negative");
        }
        if !(self.brf_max > 0.0) {
            return fail("brf_max", "must be positive");
        }
        Ok(())
    }
}

/// Largest ratio of summed prediction error to perpendicular distance over
/// the vehicles that could drift onto `link`. `eps_ends` is the error of the
/// two endpoints (0 for the RSU).
pub fn blocking_risk_factor<'a>(
    link: &Segment,
    eps_ends: f64,
    candidates: impl IntoIterator<Item = &'a VehicleState>,
    eps: &dyn EpsilonModel,
    params: &RoutingParams,
) -> Result<f64> {
    let mut brf: f64 = 0.0;
    for v in candidates {
        let (dist, t) = perpendicular_distance(link, v.position)?;
        if !(0.0..=1.0).contains(&t) || dist >= params.brf_corridor {
            continue;
        }
        let total = eps_ends + eps.epsilon(v);
        let ratio = if dist > 0.0 { total / dist } else { f64::INFINITY };
        brf = brf.max(ratio.min(params.brf_max));
    }
    Ok(brf)
}

/// Planned cost of a link in dB.
pub fn link_weight(path_loss: f64, brf: f64, bl_mean: f64, lambda: f64) -> f64 {
    path_loss + lambda * brf * bl_mean
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::mobility::Dims;
    use crate::prediction::ConstantEpsilon;
    use approx::assert_abs_diff_eq;
    use std::collections::HashMap;

    struct PerVehicle(HashMap<VehicleId, f64>);

    impl EpsilonModel for PerVehicle {
        fn epsilon(&self, v: &VehicleState) -> f64 {
            self.0[&v.id]
        }
    }

    fn car(id: u32, x: f64, y: f64) -> VehicleState {
        VehicleState {
            id: VehicleId(id),
            position: Vec3::new(x, y, 0.0),
            heading: 0.0,
            speed: 0.0,
            dims: Dims::new(4.5, 1.8, 1.5),
            connected: false,
        }
    }

    fn link() -> Segment {
        Segment::new(Vec3::ZERO, Vec3::new(100.0, 0.0, 0.0))
    }

    #[test]
    fn brf_examples() {
        let p = RoutingParams::default();
        let e = ConstantEpsilon(1.0);
        assert_eq!(blocking_risk_factor(&link(), 2.0, [].iter(), &e, &p).unwrap(), 0.0);

        let eps = PerVehicle([(VehicleId(1), 2.0)].into());
        let one = [car(1, 50.0, 8.0)];
        assert_abs_diff_eq!(blocking_risk_factor(&link(), 2.0, &one, &eps, &p).unwrap(), 0.5, epsilon = 1e-12);

        // ratios 4/8 and 5/4
        let eps = PerVehicle([(VehicleId(1), 2.0), (VehicleId(2), 3.0)].into());
        let two = [car(1, 50.0, 8.0), car(2, 20.0, -4.0)];
        assert_abs_diff_eq!(blocking_risk_factor(&link(), 2.0, &two, &eps, &p).unwrap(), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn brf_candidacy_rules() {
        let p = RoutingParams::default();
        let e = ConstantEpsilon(1.0);
        // Behind the start, past the end, and outside the corridor.
        let out = [car(1, -1.0, 1.0), car(2, 101.0, 1.0), car(3, 50.0, 10.0)];
        assert_eq!(blocking_risk_factor(&link(), 0.0, &out, &e, &p).unwrap(), 0.0);
        let on = [car(4, 50.0, 0.0)];
        assert_eq!(blocking_risk_factor(&link(), 0.0, &on, &e, &p).unwrap(), 100.0);
    }

    #[test]
    fn weight_examples() {
        assert_abs_diff_eq!(link_weight(104.865, 0.5, 9.0, 1.0), 109.365, epsilon = 1e-9);
        assert_eq!(link_weight(104.865, 0.5, 9.0, 0.0), 104.865);
        assert_eq!(link_weight(104.865, 0.0, 9.0, 1.0), 104.865);
    }

    #[test]
    fn params_validation() {
        assert!(RoutingParams::default().validate().is_ok());
        let bad = RoutingParams { n_routes: 0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig { field: "n_routes", .. })));
        let bad = RoutingParams { lambda: -0.1, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}

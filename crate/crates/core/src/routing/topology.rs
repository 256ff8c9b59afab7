use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{build_connection_graph, GraphInputs, WeightedConnectionGraph};
use super::paths::yen_k_shortest;
use super::{AntennaRef, NodeOwner, RoutingParams};
use crate::channel::{ChannelParams, LinkBudget};
use crate::error::Result;
use crate::mobility::{VehicleState, WorldSnapshot};
use crate::prediction::ConstantEpsilon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub source: NodeOwner,
    pub destination: NodeOwner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub from: AntennaRef,
    pub to: AntennaRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    /// Entities visited, source first.
    pub owners: Vec<NodeOwner>,
    /// Radio hops; consecutive hops may leave a vehicle from a different
    /// antenna than the one they arrived on.
    pub hops: Vec<Hop>,
    pub weight: f64,
}

impl Route {
    /// Antenna sequence from the source antenna to the destination antenna.
    pub fn antennas(&self) -> Vec<AntennaRef> {
        let mut out: Vec<AntennaRef> = Vec::with_capacity(2 * self.hops.len());
        for h in &self.hops {
            if out.last() != Some(&h.from) {
                out.push(h.from);
            }
            out.push(h.to);
        }
        out
    }
}

/// Routes per demand, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Topology {
    pub routes: BTreeMap<Demand, Vec<Route>>,
}

impl Topology {
    pub fn routes_for(&self, source: NodeOwner) -> impl Iterator<Item = &Route> {
        self.routes
            .iter()
            .filter(move |(d, _)| d.source == source)
            .flat_map(|(_, rs)| rs.iter())
    }
}

/// One uplink demand to the RSU per connected vehicle.
pub fn default_demands(vehicles: &[VehicleState]) -> Vec<Demand> {
    vehicles
        .iter()
        .filter(|v| v.connected)
        .map(|v| Demand { source: NodeOwner::Vehicle(v.id), destination: NodeOwner::Rsu })
        .collect()
}

/// Top-`n_routes` vehicle-simple routes for every demand.
pub fn plan_topology(graph: &WeightedConnectionGraph, demands: &[Demand], params: &RoutingParams) -> Topology {
    let eg = graph.entity_graph();
    let mut topo = Topology::default();
    for &demand in demands {
        let routes = match (eg.index_of(demand.source), eg.index_of(demand.destination)) {
            (Some(s), Some(d)) => yen_k_shortest(&eg.graph, s, d, params.n_routes)
                .into_iter()
                .map(|p| Route {
                    owners: p.nodes.iter().map(|&i| eg.owners[i]).collect(),
                    hops: p
                        .nodes
                        .windows(2)
                        .map(|w| {
                            let (from, to) = eg.hop(w[0], w[1]).expect("path edge exists");
                            Hop { from, to }
                        })
                        .collect(),
                    weight: p.weight,
                })
                .collect(),
            _ => Vec::new(),
        };
        topo.routes.insert(demand, routes);
    }
    topo
}

/// Centralized shortest-path routing on current positions, path loss only.
/// Unless `observes_unconnected`, vehicles without a radio are invisible to
/// it, both as occluders and as risk.
pub fn baseline_sdvn(
    current: &WorldSnapshot,
    demands: &[Demand],
    channel: &ChannelParams,
    budget: &LinkBudget,
    params: &RoutingParams,
    observes_unconnected: bool,
) -> Result<Topology> {
    let visible: Vec<VehicleState> =
        current.vehicles.iter().filter(|v| observes_unconnected || v.connected).copied().collect();
    let params = RoutingParams { lambda: 0.0, n_routes: 1, ..*params };
    let graph = build_connection_graph(&GraphInputs {
        vehicles: &visible,
        rsu: &current.rsu,
        buildings: &current.buildings,
        eps: &ConstantEpsilon(0.0),
        channel,
        budget,
        params: &params,
    })?;
    Ok(plan_topology(&graph, demands, &params))
}

/// Each source's best direct link to its destination, never relayed.
pub fn baseline_single_hop(
    current: &WorldSnapshot,
    demands: &[Demand],
    channel: &ChannelParams,
    budget: &LinkBudget,
    params: &RoutingParams,
) -> Result<Topology> {
    let params = RoutingParams { lambda: 0.0, n_routes: 1, ..*params };
    let graph = build_connection_graph(&GraphInputs {
        vehicles: &current.vehicles,
        rsu: &current.rsu,
        buildings: &current.buildings,
        eps: &ConstantEpsilon(0.0),
        channel,
        budget,
        params: &params,
    })?;
    let eg = graph.entity_graph();
    let mut topo = Topology::default();
    for &demand in demands {
        let direct = eg.index_of(demand.source).zip(eg.index_of(demand.destination)).and_then(|(s, d)| {
            let weight = eg.graph.weight(s, d)?;
            let (from, to) = eg.hop(s, d)?;
            Some(Route { owners: vec![demand.source, demand.destination], hops: vec![Hop { from, to }], weight })
        });
        topo.routes.insert(demand, direct.into_iter().collect());
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrientedBox, Vec3};
    use crate::mobility::{Dims, RsuNode, VehicleId};

    fn vehicle(id: u32, x: f64, y: f64, connected: bool) -> VehicleState {
        VehicleState {
            id: VehicleId(id),
            position: Vec3::new(x, y, 0.0),
            heading: 0.0,
            speed: 0.0,
            dims: Dims::new(4.5, 1.8, 1.5),
            connected,
        }
    }

    fn truck(id: u32, x: f64, y: f64) -> VehicleState {
        VehicleState { dims: Dims::new(10.0, 2.5, 3.2), ..vehicle(id, x, y, false) }
    }

    fn snapshot(vehicles: Vec<VehicleState>, buildings: Vec<OrientedBox>) -> WorldSnapshot {
        WorldSnapshot { t: 0, vehicles, rsu: RsuNode { position: Vec3::new(0.0, 0.0, 1.5) }, buildings }
    }

    fn plan(snap: &WorldSnapshot, params: &RoutingParams) -> Topology {
        let graph = build_connection_graph(&GraphInputs {
            vehicles: &snap.vehicles,
            rsu: &snap.rsu,
            buildings: &snap.buildings,
            eps: &ConstantEpsilon(1.0),
            channel: &ChannelParams::default(),
            budget: &LinkBudget::default(),
            params,
        })
        .unwrap();
        plan_topology(&graph, &default_demands(&snap.vehicles), params)
    }

    fn v(id: u32) -> NodeOwner {
        NodeOwner::Vehicle(VehicleId(id))
    }

    fn uplink(id: u32) -> Demand {
        Demand { source: v(id), destination: NodeOwner::Rsu }
    }

    /// Vehicle 1 is hidden from the RSU by a truck; vehicle 2 sees both.
    fn relay_scene() -> WorldSnapshot {
        snapshot(vec![vehicle(1, 60.0, 0.0, true), vehicle(2, 30.0, 12.0, true), truck(3, 30.0, 0.0)], vec![])
    }

    #[test]
    fn relays_around_a_truck() {
        let p = RoutingParams { n_routes: 3, ..Default::default() };
        let t = plan(&relay_scene(), &p);
        let r1 = &t.routes[&uplink(1)];
        assert_eq!(r1.len(), 1);
        assert_eq!(r1[0].owners, vec![v(1), v(2), NodeOwner::Rsu]);
        let ants = r1[0].antennas();
        assert_eq!(ants.first().unwrap().owner, v(1));
        assert_eq!(ants.last().unwrap().owner, NodeOwner::Rsu);
        let r2 = &t.routes[&uplink(2)];
        assert_eq!(r2[0].owners, vec![v(2), NodeOwner::Rsu]);
        // Vehicle 1 has no way to the RSU except through vehicle 2.
        assert_eq!(r2.len(), 1);
    }

    #[test]
    fn single_hop_never_relays() {
        let snap = relay_scene();
        let ch = ChannelParams::default();
        let b = LinkBudget::default();
        let demands = default_demands(&snap.vehicles);
        let t = baseline_single_hop(&snap, &demands, &ch, &b, &RoutingParams::default()).unwrap();
        assert!(t.routes[&uplink(1)].is_empty());
        let r = &t.routes[&uplink(2)];
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].hops.len(), 1);
        // Nearer antenna wins: the RSU lies behind and to the right.
        assert_eq!(r[0].hops[0].from.antenna, 3);
    }

    #[test]
    fn sdvn_ignores_unconnected_blockers_by_default() {
        let snap = relay_scene();
        let ch = ChannelParams::default();
        let b = LinkBudget::default();
        let demands = default_demands(&snap.vehicles);
        let blind = baseline_sdvn(&snap, &demands, &ch, &b, &RoutingParams::default(), false).unwrap();
        assert_eq!(blind.routes[&uplink(1)][0].owners, vec![v(1), NodeOwner::Rsu]);
        let aware = baseline_sdvn(&snap, &demands, &ch, &b, &RoutingParams::default(), true).unwrap();
        assert_eq!(aware.routes[&uplink(1)][0].owners, vec![v(1), v(2), NodeOwner::Rsu]);
        assert!(blind.routes.values().all(|r| r.len() <= 1));
    }

    #[test]
    fn sdvn_matches_zero_lambda_planner() {
        let snap = snapshot(
            vec![vehicle(1, 60.0, 0.0, true), vehicle(2, 30.0, 12.0, true), vehicle(4, -40.0, 3.0, true)],
            vec![],
        );
        let p = RoutingParams { lambda: 0.0, n_routes: 1, ..Default::default() };
        let demands = default_demands(&snap.vehicles);
        let sdvn =
            baseline_sdvn(&snap, &demands, &ChannelParams::default(), &LinkBudget::default(), &p, true).unwrap();
        assert_eq!(sdvn, plan(&snap, &p));
    }

    #[test]
    fn building_isolation_gives_empty_routes() {
        let wall = OrientedBox::from_bounds(Vec3::new(20.0, -50.0, 0.0), Vec3::new(25.0, 50.0, 30.0)).unwrap();
        let snap = snapshot(vec![vehicle(1, 60.0, 0.0, true)], vec![wall]);
        let t = plan(&snap, &RoutingParams::default());
        assert!(t.routes[&uplink(1)].is_empty());
        let sdvn = baseline_sdvn(
            &snap,
            &[uplink(1)],
            &ChannelParams::default(),
            &LinkBudget::default(),
            &RoutingParams::default(),
            false,
        )
        .unwrap();
        assert!(sdvn.routes[&uplink(1)].is_empty());
    }

    #[test]
    fn single_route_equals_first_of_many() {
        let snap = relay_scene();
        let one = plan(&snap, &RoutingParams { n_routes: 1, ..Default::default() });
        let three = plan(&snap, &RoutingParams { n_routes: 3, ..Default::default() });
        for (d, rs) in &one.routes {
            assert_eq!(rs[..], three.routes[d][..rs.len()]);
        }
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::paths::PathGraph;
use super::{blocking_risk_factor, link_weight, AntennaRef, NodeOwner, RoutingParams};
use crate::channel::{blocking_loss_mean, link_feasible, path_loss, ChannelParams, LinkBudget};
use crate::error::Result;
use crate::geometry::{antenna_positions, segment_intersects_box, vehicle_box, OrientedBox, Segment, Vec3};
use crate::mobility::{RsuNode, VehicleState};
use crate::prediction::EpsilonModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaNode {
    pub antenna: AntennaRef,
    pub position: Vec3,
}

/// Undirected edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub path_loss: f64,
    pub brf: f64,
    pub bl_mean: f64,
    pub weight: f64,
    /// Zero-cost link between two antennas of the same vehicle.
    pub intra: bool,
}

/// Every usable radio link between the RSU and connected-vehicle antennas in
/// one (predicted or observed) frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightedConnectionGraph {
    /// RSU first, then four antennas per connected vehicle in id order.
    pub nodes: Vec<AntennaNode>,
    pub edges: Vec<GraphEdge>,
}

/// What the planner knows about one frame.
#[derive(Clone, Copy)]
pub struct GraphInputs<'a> {
    /// Every vehicle the planner can see. Connected ones become graph nodes;
    /// all of them occlude links and count toward blocking risk.
    pub vehicles: &'a [VehicleState],
    pub rsu: &'a RsuNode,
    pub buildings: &'a [OrientedBox],
    pub eps: &'a dyn EpsilonModel,
    pub channel: &'a ChannelParams,
    pub budget: &'a LinkBudget,
    pub params: &'a RoutingParams,
}

struct Entity<'a> {
    owner: NodeOwner,
    state: Option<&'a VehicleState>,
    first_node: usize,
    n_antennas: usize,
    /// Reference point and the farthest any of its antennas sits from it.
    anchor: Vec3,
    reach: f64,
}

fn xy_point_segment_distance(a: Vec3, b: Vec3, p: Vec3) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    (a.x + t * dx - p.x).hypot(a.y + t * dy - p.y)
}

fn horizontal_reach(v: &VehicleState) -> f64 {
    (v.dims.length / 2.0).hypot(v.dims.width / 2.0)
}

fn antenna_reach(v: &VehicleState) -> f64 {
    horizontal_reach(v).hypot(v.dims.height)
}

pub fn build_connection_graph(inp: &GraphInputs) -> Result<WeightedConnectionGraph> {
    let mut vehicles: Vec<&VehicleState> = inp.vehicles.iter().collect();
    vehicles.sort_by_key(|v| v.id);
    let boxes = vehicles.iter().map(|v| vehicle_box(v)).collect::<Result<Vec<_>>>()?;
    let box_reach = vehicles.iter().map(|v| horizontal_reach(v)).fold(0.0, f64::max);

    let mut nodes = vec![AntennaNode {
        antenna: AntennaRef { owner: NodeOwner::Rsu, antenna: 0 },
        position: inp.rsu.position,
    }];
    let mut entities = vec![Entity {
        owner: NodeOwner::Rsu,
        state: None,
        first_node: 0,
        n_antennas: 1,
        anchor: inp.rsu.position,
        reach: 0.0,
    }];
    for v in vehicles.iter().filter(|v| v.connected) {
        let owner = NodeOwner::Vehicle(v.id);
        entities.push(Entity {
            owner,
            state: Some(v),
            first_node: nodes.len(),
            n_antennas: 4,
            anchor: v.position,
            reach: antenna_reach(v),
        });
        for (i, p) in antenna_positions(v).into_iter().enumerate() {
            nodes.push(AntennaNode { antenna: AntennaRef { owner, antenna: i as u8 }, position: p });
        }
    }

    let mut edges = Vec::new();
    for e in &entities[1..] {
        for i in 0..e.n_antennas {
            for j in i + 1..e.n_antennas {
                edges.push(GraphEdge {
                    a: e.first_node + i,
                    b: e.first_node + j,
                    path_loss: 0.0,
                    brf: 0.0,
                    bl_mean: 0.0,
                    weight: 0.0,
                    intra: true,
                });
            }
        }
    }

    let range = inp.channel.max_range(inp.budget.max_total_loss).max(1.0);
    let eps_of = |e: &Entity| e.state.map_or(0.0, |s| inp.eps.epsilon(s));
    let mut nearby: Vec<usize> = Vec::new();
    for (ia, ea) in entities.iter().enumerate() {
        for eb in &entities[ia + 1..] {
            let anchor_gap = ea.anchor.distance(eb.anchor);
            if anchor_gap > range + ea.reach + eb.reach {
                continue;
            }
            // Vehicles that could occlude or threaten any antenna pair of
            // these two entities.
            let margin = inp.params.brf_corridor.max(box_reach + 1.0) + ea.reach.max(eb.reach) + 1e-6;
            nearby.clear();
            nearby.extend((0..vehicles.len()).filter(|&k| {
                let owner = NodeOwner::Vehicle(vehicles[k].id);
                owner != ea.owner
                    && owner != eb.owner
                    && xy_point_segment_distance(ea.anchor, eb.anchor, vehicles[k].position) <= margin
            }));
            let eps_ends = eps_of(ea) + eps_of(eb);

            for na in ea.first_node..ea.first_node + ea.n_antennas {
                for nb in eb.first_node..eb.first_node + eb.n_antennas {
                    let (pa, pb) = (nodes[na].position, nodes[nb].position);
                    let d = pa.distance(pb).max(1.0);
                    let pl = path_loss(d, inp.channel, 0.0)?;
                    if !link_feasible(pl, inp.budget) {
                        continue;
                    }
                    let seg = Segment::new(pa, pb);
                    if inp.buildings.iter().any(|b| segment_intersects_box(&seg, b))
                        || nearby.iter().any(|&k| segment_intersects_box(&seg, &boxes[k]))
                    {
                        continue;
                    }
                    let brf = if seg.length() > 1e-9 {
                        blocking_risk_factor(&seg, eps_ends, nearby.iter().map(|&k| vehicles[k]), inp.eps, inp.params)?
                    } else {
                        0.0
                    };
                    let bl_mean = blocking_loss_mean(d, inp.channel)?;
                    edges.push(GraphEdge {
                        a: na,
                        b: nb,
                        path_loss: pl,
                        brf,
                        bl_mean,
                        weight: link_weight(pl, brf, bl_mean, inp.params.lambda),
                        intra: false,
                    });
                }
            }
        }
    }
    Ok(WeightedConnectionGraph { nodes, edges })
}

/// Connection graph collapsed to one node per entity. Each entity pair keeps
/// its lightest antenna link, which is what a shortest path through the
/// zero-cost intra-vehicle edges would pick anyway.
#[derive(Debug, Clone)]
pub struct EntityGraph {
    /// RSU first, then vehicles in id order.
    pub owners: Vec<NodeOwner>,
    pub graph: PathGraph,
    /// Entity pair `(lo, hi)` to the antenna pair realizing it.
    links: BTreeMap<(usize, usize), (AntennaRef, AntennaRef)>,
}

impl EntityGraph {
    pub fn index_of(&self, owner: NodeOwner) -> Option<usize> {
        self.owners.binary_search(&owner).ok()
    }

    /// Antennas used when travelling from entity `from` to entity `to`.
    pub fn hop(&self, from: usize, to: usize) -> Option<(AntennaRef, AntennaRef)> {
        if from <= to {
            self.links.get(&(from, to)).copied()
        } else {
            self.links.get(&(to, from)).map(|&(a, b)| (b, a))
        }
    }
}

impl WeightedConnectionGraph {
    pub fn node_index(&self, antenna: AntennaRef) -> Option<usize> {
        self.nodes.iter().position(|n| n.antenna == antenna)
    }

    pub fn antenna_graph(&self) -> PathGraph {
        PathGraph::from_edges(self.nodes.len(), self.edges.iter().map(|e| (e.a, e.b, e.weight)))
    }

    pub fn owners(&self) -> Vec<NodeOwner> {
        let mut owners: Vec<NodeOwner> = self.nodes.iter().map(|n| n.antenna.owner).collect();
        owners.dedup();
        owners
    }

    pub fn entity_graph(&self) -> EntityGraph {
        let owners = self.owners();
        let entity_of: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| owners.binary_search(&n.antenna.owner).expect("owner listed"))
            .collect();
        let mut best: BTreeMap<(usize, usize), (f64, AntennaRef, AntennaRef)> = BTreeMap::new();
        for e in self.edges.iter().filter(|e| !e.intra) {
            let (mut ea, mut eb) = (entity_of[e.a], entity_of[e.b]);
            let (mut aa, mut ab) = (self.nodes[e.a].antenna, self.nodes[e.b].antenna);
            if ea > eb {
                std::mem::swap(&mut ea, &mut eb);
                std::mem::swap(&mut aa, &mut ab);
            }
            let slot = best.entry((ea, eb)).or_insert((e.weight, aa, ab));
            if e.weight < slot.0 {
                *slot = (e.weight, aa, ab);
            }
        }
        let graph = PathGraph::from_edges(owners.len(), best.iter().map(|(&(a, b), &(w, _, _))| (a, b, w)));
        let links = best.into_iter().map(|(k, (_, a, b))| (k, (a, b))).collect();
        EntityGraph { owners, graph, links }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

use std::collections::HashSet;

use mmv2x::channel::{link_feasible, ChannelParams, LinkBudget};
use mmv2x::geometry::{segment_intersects_box, OrientedBox, Segment, Vec3};
use mmv2x::mobility::{Dims, RsuNode, VehicleId, VehicleState, WorldSnapshot};
use mmv2x::prediction::ConstantEpsilon;
use mmv2x::routing::{
    baseline_sdvn, build_connection_graph, default_demands, dijkstra, plan_topology, yen_k_shortest, GraphInputs,
    NodeOwner, PathGraph, RoutingParams,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Edges = Vec<(usize, usize, f64)>;

/// Random undirected graph with at most 8 nodes and 16 edges. Half of the
/// instances use small integer weights so that ties are common.
fn random_graph(rng: &mut ChaCha8Rng) -> (usize, Edges) {
    let n = rng.random_range(2..=8usize);
    let m = rng.random_range(0..=16usize);
    let integer = rng.random_bool(0.5);
    let mut edges = Vec::with_capacity(m);
    for _ in 0..m {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let w = if integer { rng.random_range(0..=4u32) as f64 } else { rng.random_range(0.0..10.0) };
        edges.push((a, b, w));
    }
    (n, edges)
}

/// Lightest weight for each unordered pair, as the graph keeps it.
fn edge_weight(edges: &Edges, a: usize, b: usize) -> Option<f64> {
    edges
        .iter()
        .filter(|&&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a))
        .map(|e| e.2)
        .reduce(f64::min)
}

/// Every simple path from `s` to `d`, sorted by (weight, node sequence).
fn enumerate_paths(n: usize, edges: &Edges, s: usize, d: usize) -> Vec<(Vec<usize>, f64)> {
    fn dfs(n: usize, edges: &Edges, d: usize, path: &mut Vec<usize>, w: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        let u = *path.last().unwrap();
        if u == d {
            out.push((path.clone(), w));
            return;
        }
        for v in 0..n {
            if path.contains(&v) {
                continue;
            }
            if let Some(ew) = edge_weight(edges, u, v) {
                path.push(v);
                dfs(n, edges, d, path, w + ew, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    dfs(n, edges, d, &mut vec![s], 0.0, &mut out);
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[test]
fn shortest_paths_match_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1A5);
    for case in 0..500 {
        let (n, edges) = random_graph(&mut rng);
        let g = PathGraph::from_edges(n, edges.iter().copied());
        let s = rng.random_range(0..n);
        let d = rng.random_range(0..n);
        let all = enumerate_paths(n, &edges, s, d);

        let best = dijkstra(&g, s, d).map(|p| (p.nodes, p.weight));
        assert_eq!(best, all.first().cloned(), "case {case}: dijkstra");

        let mut prev: Vec<(Vec<usize>, f64)> = Vec::new();
        for k in 1..=5 {
            let got: Vec<(Vec<usize>, f64)> =
                yen_k_shortest(&g, s, d, k).into_iter().map(|p| (p.nodes, p.weight)).collect();
            let want: Vec<_> = all.iter().take(k).cloned().collect();
            assert_eq!(got, want, "case {case}: yen k={k} on {n} nodes {edges:?} from {s} to {d}");
            assert_eq!(got[..prev.len()], prev[..], "case {case}: nestedness at k={k}");
            prev = got;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn yen_is_nested(seed in any::<u64>(), k in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, edges) = random_graph(&mut rng);
        let g = PathGraph::from_edges(n, edges);
        let longer = yen_k_shortest(&g, 0, n - 1, k);
        let shorter = yen_k_shortest(&g, 0, n - 1, k - 1);
        prop_assert_eq!(&longer[..shorter.len()], &shorter[..]);
    }
}

fn vehicle(id: u32, x: f64, y: f64, heading: f64, connected: bool, large: bool) -> VehicleState {
    VehicleState {
        id: VehicleId(id),
        position: Vec3::new(x, y, 0.0),
        heading,
        speed: 5.0,
        dims: if large { Dims::new(10.0, 2.5, 3.2) } else { Dims::new(4.5, 1.8, 1.5) },
        connected,
    }
}

fn scene() -> impl Strategy<Value = WorldSnapshot> {
    let v = (-120.0..120.0f64, -120.0..120.0f64, -3.1..3.1f64, any::<bool>(), prop::bool::weighted(0.3));
    (prop::collection::vec(v, 1..14), any::<bool>()).prop_map(|(vs, with_building)| {
        let vehicles = vs
            .into_iter()
            .enumerate()
            .map(|(i, (x, y, h, c, l))| vehicle(i as u32, x, y, h, c, l))
            .collect();
        let buildings = if with_building {
            vec![OrientedBox::from_bounds(Vec3::new(20.0, 20.0, 0.0), Vec3::new(80.0, 80.0, 20.0)).unwrap()]
        } else {
            vec![]
        };
        WorldSnapshot { t: 0, vehicles, rsu: RsuNode { position: Vec3::new(0.0, 0.0, 5.0) }, buildings }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// With lambda 0 and the current frame as the prediction, the planner and
    /// the SDVN baseline pick the same routes at the same weights.
    #[test]
    fn zero_lambda_planner_matches_sdvn(snap in scene()) {
        let ch = ChannelParams::default();
        let budget = LinkBudget::default();
        let params = RoutingParams { lambda: 0.0, n_routes: 1, ..Default::default() };
        let demands = default_demands(&snap.vehicles);
        let graph = build_connection_graph(&GraphInputs {
            vehicles: &snap.vehicles,
            rsu: &snap.rsu,
            buildings: &snap.buildings,
            eps: &ConstantEpsilon(1.0),
            channel: &ch,
            budget: &budget,
            params: &params,
        }).unwrap();
        let planned = plan_topology(&graph, &demands, &params);
        let sdvn = baseline_sdvn(&snap, &demands, &ch, &budget, &params, true).unwrap();
        for d in &demands {
            let (a, b) = (&planned.routes[d], &sdvn.routes[d]);
            prop_assert_eq!(a.len(), b.len());
            for (ra, rb) in a.iter().zip(b) {
                prop_assert_eq!(&ra.owners, &rb.owners);
                prop_assert!((ra.weight - rb.weight).abs() < 1e-9);
            }
        }
    }

    /// Routes never revisit a vehicle and only use links that are in range
    /// and clear of buildings and other vehicles in the planning frame.
    #[test]
    fn routes_are_vehicle_simple_and_feasible(snap in scene(), lambda in 0.0..2.0f64, n in 1usize..5) {
        let ch = ChannelParams::default();
        let budget = LinkBudget::default();
        let params = RoutingParams { lambda, n_routes: n, ..Default::default() };
        let graph = build_connection_graph(&GraphInputs {
            vehicles: &snap.vehicles,
            rsu: &snap.rsu,
            buildings: &snap.buildings,
            eps: &ConstantEpsilon(1.0),
            channel: &ch,
            budget: &budget,
            params: &params,
        }).unwrap();
        let topo = plan_topology(&graph, &default_demands(&snap.vehicles), &params);
        let boxes: Vec<(NodeOwner, OrientedBox)> = snap
            .vehicles
            .iter()
            .map(|v| (NodeOwner::Vehicle(v.id), mmv2x::geometry::vehicle_box(v).unwrap()))
            .collect();
        for (demand, routes) in &topo.routes {
            prop_assert!(routes.len() <= n);
            for r in routes {
                let unique: HashSet<_> = r.owners.iter().collect();
                prop_assert_eq!(unique.len(), r.owners.len());
                prop_assert_eq!(r.owners.first(), Some(&demand.source));
                prop_assert_eq!(r.owners.last(), Some(&demand.destination));
                for hop in &r.hops {
                    let ia = graph.node_index(hop.from).unwrap();
                    let ib = graph.node_index(hop.to).unwrap();
                    let (pa, pb) = (graph.nodes[ia].position, graph.nodes[ib].position);
                    let edge = graph
                        .edges
                        .iter()
                        .find(|e| (e.a, e.b) == (ia.min(ib), ia.max(ib)))
                        .expect("hop is a graph edge");
                    prop_assert!(!edge.intra);
                    prop_assert!(link_feasible(edge.path_loss, &budget));
                    let seg = Segment::new(pa, pb);
                    prop_assert!(!snap.buildings.iter().any(|b| segment_intersects_box(&seg, b)));
                    prop_assert!(!boxes
                        .iter()
                        .any(|(o, b)| *o != hop.from.owner && *o != hop.to.owner && segment_intersects_box(&seg, b)));
                }
            }
        }
    }
}

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mmv2x::channel::{self, ChannelParams, LinkBudget};
use mmv2x::geometry::Vec3;
use mmv2x::mobility::{generate_intersection_scenario, Scenario, ScenarioConfig};
use mmv2x::prediction;
use mmv2x::routing::{self, PathGraph};
use mmv2x::simengine::{self, RunConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Path loss in dB at distance `d` meters under the default 60 GHz channel.
#[pyfunction]
#[pyo3(signature = (d, shadow=0.0))]
fn path_loss(d: f64, shadow: f64) -> PyResult<f64> {
    channel::path_loss(d, &ChannelParams::default(), shadow).map_err(value_err)
}

#[pyfunction]
fn blocking_loss_mean(d: f64) -> PyResult<f64> {
    channel::blocking_loss_mean(d, &ChannelParams::default()).map_err(value_err)
}

/// Throughput in bit/s of one link with the given total loss.
#[pyfunction]
fn shannon_throughput(total_loss: f64) -> f64 {
    channel::shannon_throughput(total_loss, &LinkBudget::default())
}

type Edge = (usize, usize, f64);

fn path_graph(n_nodes: usize, edges: Vec<Edge>) -> PyResult<PathGraph> {
    if let Some(e) = edges.iter().find(|e| e.0 >= n_nodes || e.1 >= n_nodes) {
        return Err(value_err(format!("edge ({}, {}) references a node outside 0..{n_nodes}", e.0, e.1)));
    }
    Ok(PathGraph::from_edges(n_nodes, edges))
}

/// Shortest path on an undirected graph as `(nodes, weight)`, or None.
#[pyfunction]
fn dijkstra(n_nodes: usize, edges: Vec<Edge>, source: usize, target: usize) -> PyResult<Option<(Vec<usize>, f64)>> {
    let g = path_graph(n_nodes, edges)?;
    Ok(routing::dijkstra(&g, source, target).map(|p| (p.nodes, p.weight)))
}

/// Up to `k` loopless shortest paths in ascending weight.
#[pyfunction]
fn yen_k_shortest(
    n_nodes: usize,
    edges: Vec<Edge>,
    source: usize,
    target: usize,
    k: usize,
) -> PyResult<Vec<(Vec<usize>, f64)>> {
    let g = path_graph(n_nodes, edges)?;
    Ok(routing::yen_k_shortest(&g, source, target, k).into_iter().map(|p| (p.nodes, p.weight)).collect())
}

/// Generate an intersection scenario; returns scenario JSON.
#[pyfunction]
#[pyo3(signature = (seed, config_json=None))]
fn generate_scenario(seed: u64, config_json: Option<&str>) -> PyResult<String> {
    let cfg: ScenarioConfig = match config_json {
        Some(s) => serde_json::from_str(s).map_err(value_err)?,
        None => ScenarioConfig::default(),
    };
    let scenario = generate_intersection_scenario(&cfg, seed).map_err(value_err)?;
    scenario.to_json_string().map_err(value_err)
}

#[pyclass(frozen, get_all, module = "mmv2x_py")]
struct RunSummary {
    method: String,
    seed: u64,
    connectivity: Option<f64>,
    mean_throughput: f64,
    cv_successful: usize,
    cv_total: usize,
    timesteps: usize,
}

#[pymethods]
impl RunSummary {
    fn __repr__(&self) -> String {
        let c = self.connectivity.map_or("None".to_string(), |c| format!("{c:.4}"));
        format!("RunSummary(method={}, seed={}, connectivity={c})", self.method, self.seed)
    }
}

impl From<simengine::RunSummary> for RunSummary {
    fn from(s: simengine::RunSummary) -> Self {
        RunSummary {
            method: s.method.to_string(),
            seed: s.seed,
            connectivity: s.connectivity,
            mean_throughput: s.mean_throughput,
            cv_successful: s.cv_successful,
            cv_total: s.cv_total,
            timesteps: s.timesteps,
        }
    }
}

/// Prediction error map over the ground plane.
#[pyclass(module = "mmv2x_py")]
struct ErrorHeatmap {
    inner: prediction::ErrorHeatmap,
}

#[pymethods]
impl ErrorHeatmap {
    #[new]
    #[pyo3(signature = (origin, cell_size, nx, ny, default_epsilon=1.0, learning_rate=0.1))]
    fn new(
        origin: (f64, f64),
        cell_size: f64,
        nx: usize,
        ny: usize,
        default_epsilon: f64,
        learning_rate: f64,
    ) -> PyResult<Self> {
        let origin = Vec3::new(origin.0, origin.1, 0.0);
        prediction::ErrorHeatmap::new(origin, cell_size, nx, ny, default_epsilon, learning_rate)
            .map(|inner| ErrorHeatmap { inner })
            .map_err(value_err)
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        prediction::ErrorHeatmap::from_json(s).map(|inner| ErrorHeatmap { inner }).map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(value_err)
    }

    fn lookup(&self, x: f64, y: f64) -> f64 {
        self.inner.lookup(Vec3::new(x, y, 0.0))
    }

    fn update(&mut self, predicted: (f64, f64), actual: (f64, f64)) {
        self.inner.update(Vec3::new(predicted.0, predicted.1, 0.0), Vec3::new(actual.0, actual.1, 0.0));
    }

    /// Number of cells that have seen at least one sample.
    #[getter]
    fn populated_cells(&self) -> usize {
        self.inner.cells.iter().filter(|c| c.sample_count > 0).count()
    }
}

/// Run one simulation. Returns the summary and the learned error map.
#[pyfunction]
#[pyo3(signature = (scenario_json, config_json=None))]
fn run(py: Python<'_>, scenario_json: &str, config_json: Option<&str>) -> PyResult<(RunSummary, ErrorHeatmap)> {
    let scenario = Scenario::from_json_str(scenario_json).map_err(value_err)?;
    let cfg = match config_json {
        Some(s) => RunConfig::from_json_str(s).map_err(value_err)?,
        None => RunConfig::default(),
    };
    let out = py.detach(|| simengine::run(&scenario, &cfg)).map_err(value_err)?;
    Ok((out.timeline.summary().into(), ErrorHeatmap { inner: out.heatmap }))
}

#[pymodule]
fn mmv2x_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(path_loss, m)?)?;
    m.add_function(wrap_pyfunction!(blocking_loss_mean, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_throughput, m)?)?;
    m.add_function(wrap_pyfunction!(dijkstra, m)?)?;
    m.add_function(wrap_pyfunction!(yen_k_shortest, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<RunSummary>()?;
    m.add_class::<ErrorHeatmap>()?;
    Ok(())
}

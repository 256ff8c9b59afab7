//! Experiment plumbing behind the `mmv2x` binary: single runs, parameter
//! sweeps and scenario generation.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mmv2x::mobility::{generate_intersection_scenario, Scenario, ScenarioConfig};
use mmv2x::routing::WeightedConnectionGraph;
use mmv2x::simengine::{run, run_observed, Method, RunConfig, RunObserver, RunSummary};

/// Stable digest of everything that determines a run's numbers.
pub fn config_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    hex::encode(&digest[..8])
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid {what} {}", path.display()))
}

pub fn load_run_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg: RunConfig = match path {
        Some(p) => read_json(p, "config")?,
        None => RunConfig::default(),
    };
    cfg.validate().context("invalid config")?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read scenario {}", path.display()))?;
    Scenario::from_json_str(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub test_mode: bool,
    /// Write every planned connection graph to `graphs.jsonl`.
    pub dump_graphs: bool,
}

#[derive(Serialize)]
struct RunReport<'a> {
    #[serde(flatten)]
    summary: RunSummary,
    config_hash: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<u64>,
}

struct GraphDump(Vec<String>);

impl RunObserver for GraphDump {
    fn on_graph(&mut self, base_t: usize, offset: usize, graph: &WeightedConnectionGraph) {
        let line = serde_json::json!({ "base_t": base_t, "offset": offset, "graph": graph });
        self.0.push(line.to_string());
    }
}

pub const TIMELINE_FILE: &str = "timeline.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Runs one simulation and writes the per-timestep CSV and a summary JSON
/// into `out_dir`. Returns the summary.
pub fn cmd_run(scenario_path: &Path, config_path: Option<&Path>, out_dir: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let scenario = load_scenario(scenario_path)?;
    let mut cfg = load_run_config(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let hash = config_hash(&(&cfg, &scenario));
    let mut dump = GraphDump(Vec::new());
    let output = if opts.dump_graphs { run_observed(&scenario, &cfg, &mut dump) } else { run(&scenario, &cfg) }
        .context("simulation failed")?;

    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut w = csv::Writer::from_path(out_dir.join(TIMELINE_FILE))?;
    w.write_record(["t", "method", "cv_successful", "cv_total", "mean_throughput", "seed", "config_hash"])?;
    for row in &output.timeline.metrics.rows {
        w.write_record([
            row.t.to_string(),
            cfg.method.to_string(),
            row.cv_successful.to_string(),
            row.cv_total.to_string(),
            format!("{:.6e}", row.mean_throughput),
            cfg.seed.to_string(),
            hash.clone(),
        ])?;
    }
    w.flush()?;

    let summary = output.timeline.summary();
    let report = RunReport {
        summary,
        config_hash: &hash,
        config: &cfg,
        generated_at: (!opts.test_mode).then(unix_time),
    };
    fs::write(out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&report)? + "\n")?;
    if opts.dump_graphs {
        fs::write(out_dir.join("graphs.jsonl"), dump.0.join("\n") + "\n")?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda,
    Nmse,
    NRoutes,
    NVehicles,
    Method,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Lambda => "lambda",
            SweepParameter::Nmse => "nmse",
            SweepParameter::NRoutes => "n_routes",
            SweepParameter::NVehicles => "n_vehicles",
            SweepParameter::Method => "method",
        }
    }
}

/// One value of the swept parameter, kept as written in the sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<SweepValue>,
    /// Seeds per value: `base_seed`, `base_seed + 1`, ...
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Scenario regenerated for every seed.
    #[serde(default)]
    pub scenario: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            bail!("sweep field `values` must not be empty");
        }
        if self.repetitions < 1 {
            bail!("sweep field `repetitions` must be at least 1");
        }
        for v in &self.values {
            apply_value(self.parameter, v, &mut RunConfig::default(), &mut self.scenario.clone())?;
        }
        self.scenario.validate().context("invalid sweep field `scenario`")?;
        Ok(())
    }
}

fn number(v: &SweepValue, param: SweepParameter) -> Result<f64> {
    match v {
        SweepValue::Number(x) => Ok(*x),
        SweepValue::Text(s) => bail!("{} value {s:?} is not a number", param.as_str()),
    }
}

fn whole(v: &SweepValue, param: SweepParameter) -> Result<usize> {
    let x = number(v, param)?;
    if x < 0.0 || x.fract() != 0.0 {
        bail!("{} value {x} is not a whole number", param.as_str());
    }
    Ok(x as usize)
}

/// Writes one sweep value into the run and scenario configuration.
pub fn apply_value(param: SweepParameter, v: &SweepValue, cfg: &mut RunConfig, sc: &mut ScenarioConfig) -> Result<()> {
    match param {
        SweepParameter::Lambda => cfg.routing.lambda = number(v, param)?,
        SweepParameter::Nmse => cfg.predictor.nmse_target = number(v, param)?,
        SweepParameter::NRoutes => cfg.routing.n_routes = whole(v, param)?,
        SweepParameter::NVehicles => sc.n_vehicles = whole(v, param)?,
        SweepParameter::Method => {
            let SweepValue::Text(s) = v else {
                bail!("method value {v} must be a string");
            };
            cfg.method = s.parse()?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub seed: u64,
    pub method: Method,
    pub connectivity: Option<f64>,
    pub mean_throughput: Option<f64>,
    pub cv_successful: Option<usize>,
    pub cv_total: Option<usize>,
    pub config_hash: String,
    pub error: String,
}

/// One run of a sweep: scenario from `scenario_cfg` and `seed`, simulation
/// with `base` adjusted by the swept value.
pub fn run_point(
    param: SweepParameter,
    value: &SweepValue,
    base: &RunConfig,
    scenario_cfg: &ScenarioConfig,
    seed: u64,
) -> SweepRow {
    let mut cfg = base.clone();
    let mut sc_cfg = scenario_cfg.clone();
    cfg.seed = seed;
    let applied = apply_value(param, value, &mut cfg, &mut sc_cfg);
    let hash = config_hash(&(&cfg, &sc_cfg));
    let mut row = SweepRow {
        parameter: param.as_str().to_string(),
        value: value.to_string(),
        seed,
        method: cfg.method,
        connectivity: None,
        mean_throughput: None,
        cv_successful: None,
        cv_total: None,
        config_hash: hash,
        error: String::new(),
    };
    let result = applied.and_then(|_| {
        let scenario = generate_intersection_scenario(&sc_cfg, seed)?;
        Ok(run(&scenario, &cfg)?.timeline.summary())
    });
    match result {
        Ok(s) => {
            row.connectivity = s.connectivity;
            row.mean_throughput = Some(s.mean_throughput);
            row.cv_successful = Some(s.cv_successful);
            row.cv_total = Some(s.cv_total);
            if s.connectivity.is_none() {
                row.error = "no connected vehicles".into();
            }
        }
        Err(e) => row.error = format!("{e:#}"),
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub parameter: String,
    pub value: String,
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub connectivity_mean: Option<f64>,
    pub connectivity_std: Option<f64>,
    pub throughput_mean: Option<f64>,
    pub throughput_std: Option<f64>,
}

fn mean_std(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let s = if xs.len() > 1 { (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (Some(m), Some(s))
}

/// Per-value mean and sample standard deviation over seeds, in sweep order.
pub fn summarize(spec: &SweepSpec, rows: &[SweepRow]) -> Vec<SummaryRow> {
    spec.values
        .iter()
        .map(|v| {
            let value = v.to_string();
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value).collect();
            let conn: Vec<f64> = group.iter().filter_map(|r| r.connectivity).collect();
            let tp: Vec<f64> = group.iter().filter(|r| r.connectivity.is_some()).filter_map(|r| r.mean_throughput).collect();
            let (connectivity_mean, connectivity_std) = mean_std(&conn);
            let (throughput_mean, throughput_std) = mean_std(&tp);
            SummaryRow {
                parameter: spec.parameter.as_str().to_string(),
                value,
                method: group.first().map_or(Method::Proposed, |r| r.method),
                runs: group.len(),
                failures: group.iter().filter(|r| !r.error.is_empty()).count(),
                connectivity_mean,
                connectivity_std,
                throughput_mean,
                throughput_std,
            }
        })
        .collect()
}

/// Runs the whole cross product of values and seeds on a pool of `jobs`
/// workers. Rows come back in (value, seed) order regardless of `jobs`.
pub fn run_sweep(spec: &SweepSpec, base: &RunConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(&SweepValue, u64)> = spec
        .values
        .iter()
        .flat_map(|v| (0..spec.repetitions as u64).map(move |r| (v, spec.base_seed + r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    Ok(pool.install(|| {
        points
            .par_iter()
            .map(|&(v, seed)| run_point(spec.parameter, v, base, &spec.scenario, seed))
            .collect()
    }))
}

pub const SWEEP_LONG_FILE: &str = "sweep.csv";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "parameter",
        "value",
        "seed",
        "method",
        "connectivity",
        "mean_throughput",
        "cv_successful",
        "cv_total",
        "config_hash",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.value.clone(),
            r.seed.to_string(),
            r.method.to_string(),
            opt(r.connectivity.map(|c| format!("{c:.6}"))),
            opt(r.mean_throughput.map(|t| format!("{t:.6e}"))),
            opt(r.cv_successful),
            opt(r.cv_total),
            r.config_hash.clone(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "parameter",
        "value",
        "method",
        "runs",
        "failures",
        "connectivity_mean",
        "connectivity_std",
        "throughput_mean",
        "throughput_std",
    ])?;
    for r in rows {
        w.write_record([
            r.parameter.clone(),
            r.value.clone(),
            r.method.to_string(),
            r.runs.to_string(),
            r.failures.to_string(),
            opt(r.connectivity_mean.map(|c| format!("{c:.6}"))),
            opt(r.connectivity_std.map(|c| format!("{c:.6}"))),
            opt(r.throughput_mean.map(|t| format!("{t:.6e}"))),
            opt(r.throughput_std.map(|t| format!("{t:.6e}"))),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    pub jobs: usize,
    pub test_mode: bool,
}

/// Runs a sweep file and writes the long and summary CSVs. Fails only when
/// every run failed.
pub fn cmd_sweep(sweep_path: &Path, config_path: Option<&Path>, out_dir: &Path, opts: &SweepOptions) -> Result<Vec<SummaryRow>> {
    let spec: SweepSpec = read_json(sweep_path, "sweep spec")?;
    let base = load_run_config(config_path)?;
    let rows = run_sweep(&spec, &base, opts.jobs)?;
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    write_sweep_csv(&out_dir.join(SWEEP_LONG_FILE), &rows)?;
    let summary = summarize(&spec, &rows);
    write_summary_csv(&out_dir.join(SWEEP_SUMMARY_FILE), &summary)?;
    if !opts.test_mode {
        let meta = serde_json::json!({ "generated_at": unix_time(), "jobs": opts.jobs });
        fs::write(out_dir.join("sweep_meta.json"), meta.to_string() + "\n")?;
    }
    if rows.iter().all(|r| !r.error.is_empty()) {
        bail!("all {} runs failed; first error: {}", rows.len(), rows[0].error);
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioCounts {
    pub connected: usize,
    pub unconnected: usize,
}

impl std::fmt::Display for ScenarioCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "vehicles: {} connected, {} unconnected", self.connected, self.unconnected)
    }
}

pub fn cmd_gen_scenario(config_path: Option<&Path>, seed: u64, out_path: &Path) -> Result<ScenarioCounts> {
    let cfg: ScenarioConfig = match config_path {
        Some(p) => read_json(p, "scenario config")?,
        None => ScenarioConfig::default(),
    };
    let scenario = generate_intersection_scenario(&cfg, seed).context("cannot generate scenario")?;
    if let Some(dir) = out_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(out_path, scenario.to_json_string()? + "\n")
        .with_context(|| format!("cannot write {}", out_path.display()))?;
    let connected = scenario.vehicles.iter().filter(|v| v.connected).count();
    Ok(ScenarioCounts { connected, unconnected: scenario.vehicles.len() - connected })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.routing.lambda = 0.5;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 16);
    }

    #[test]
    fn values_apply_to_the_right_field() {
        let mut cfg = RunConfig::default();
        let mut sc = ScenarioConfig::default();
        apply_value(SweepParameter::Lambda, &SweepValue::Number(0.2), &mut cfg, &mut sc).unwrap();
        apply_value(SweepParameter::NRoutes, &SweepValue::Number(5.0), &mut cfg, &mut sc).unwrap();
        apply_value(SweepParameter::NVehicles, &SweepValue::Number(12.0), &mut cfg, &mut sc).unwrap();
        apply_value(SweepParameter::Method, &SweepValue::Text("sdvn".into()), &mut cfg, &mut sc).unwrap();
        assert_eq!((cfg.routing.lambda, cfg.routing.n_routes, sc.n_vehicles), (0.2, 5, 12));
        assert_eq!(cfg.method, Method::Sdvn);
        assert!(apply_value(SweepParameter::NRoutes, &SweepValue::Number(1.5), &mut cfg, &mut sc).is_err());
        assert!(apply_value(SweepParameter::Method, &SweepValue::Text("flood".into()), &mut cfg, &mut sc).is_err());
    }

    #[test]
    fn summary_statistics() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (Some(2.0), Some(1.0)));
        assert_eq!(mean_std(&[]), (None, None));
    }

    #[test]
    fn sweep_spec_rejects_unknown_keys() {
        let r: std::result::Result<SweepSpec, _> =
            serde_json::from_str(r#"{"parameter":"lambda","values":[0],"repetitions":1,"seeds":3}"#);
        assert!(r.unwrap_err().to_string().contains("seeds"));
    }
}

//! Run directories: `scenario.toml`, `states.csv`, `controls.csv`,
//! `events.csv`, `metrics.csv` and `summary.json`.
//!
//! Floats in the CSV files are written as `{:.16e}` (17 significant digits),
//! which round-trips every `f64`. Column layouts:
//!
//! * `states.csv`: `time,agent` then, for point masses, `q_x..,qdot_x..`
//!   (one per used axis); for rigid bodies `r11..r33,b_x,b_y,b_z,omega_x..,
//!   nu_x..,bdot_x..` where the last triple is the inertial velocity `R ν`.
//! * `controls.csv`: `time,agent,u_x,u_y,u_z,ubar_x,ubar_y,ubar_z`.
//! * `events.csv`: `time,agent,v_x..` with the broadcast velocity.
//! * `metrics.csv`: `time,lyapunov,avg_min_neighbor_distance,
//!   avg_velocity_difference,max_velocity_difference,min_edge_distance,
//!   total_events,events_0..events_{n-1}` (cumulative counts per agent).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::dynamics::{AgentState, Model};
use crate::error::{FlockError, Result};
use crate::metrics::{self, EventStatistics, MetricTrace};
use crate::scenario::Scenario;
use crate::simulator::{RuntimeMonitors, SimulationRecord};
use crate::trigger::Broadcast;

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const STATES_FILE: &str = "states.csv";
pub const CONTROLS_FILE: &str = "controls.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn axes(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    AXES[..dim].iter().map(move |a| format!("{prefix}_{a}"))
}

pub fn state_columns(model: &Model) -> Vec<String> {
    let mut cols = vec!["time".to_string(), "agent".to_string()];
    if model.is_rigid_body() {
        for r in 1..=3 {
            for c in 1..=3 {
                cols.push(format!("r{r}{c}"));
            }
        }
        for p in ["b", "omega", "nu", "bdot"] {
            cols.extend(axes(p, 3));
        }
    } else {
        let d = model.spatial_dim();
        cols.extend(axes("q", d));
        cols.extend(axes("qdot", d));
    }
    cols
}

fn state_fields(model: &Model, s: &AgentState) -> Vec<f64> {
    if model.is_rigid_body() {
        let mut v: Vec<f64> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .map(|(r, c)| s.attitude[(r, c)])
            .collect();
        for x in [s.position, s.angular_velocity, s.velocity, s.inertial_velocity()] {
            v.extend(x.iter());
        }
        v
    } else {
        let d = model.spatial_dim();
        s.position
            .iter()
            .take(d)
            .chain(s.velocity.iter().take(d))
            .copied()
            .collect()
    }
}

pub fn metric_columns(node_count: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "time",
        "lyapunov",
        "avg_min_neighbor_distance",
        "avg_velocity_difference",
        "max_velocity_difference",
        "min_edge_distance",
        "total_events",
    ]
    .map(String::from)
    .to_vec();
    cols.extend((0..node_count).map(|i| format!("events_{i}")));
    cols
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorSummary {
    pub lyapunov_monotone: bool,
    pub collision_free: bool,
    pub consensus_reached: bool,
    pub zeno_excluded: bool,
    #[serde(flatten)]
    pub values: Option<RuntimeMonitors>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub model: &'static str,
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub seed: u64,
    pub dt: f64,
    pub steps_completed: u64,
    pub simulated_time: f64,
    pub completed: bool,
    pub abort_cause: Option<String>,
    pub final_metrics: Option<MetricTrace>,
    pub event_statistics: EventStatistics,
    pub monitors: MonitorSummary,
}

impl Summary {
    pub fn new(record: &SimulationRecord, abort: Option<&FlockError>) -> Self {
        let m = record.monitors.as_ref();
        Summary {
            model: match record.model {
                Model::DoubleIntegrator(_) => "double_integrator",
                Model::Underwater(_) => "underwater_vehicle",
            },
            node_count: record.node_count,
            edges: record.edges.clone(),
            seed: record.seed,
            dt: record.dt,
            steps_completed: record.steps_completed,
            simulated_time: record.duration(),
            completed: abort.is_none(),
            abort_cause: abort.map(ToString::to_string),
            final_metrics: record.final_metrics().cloned(),
            event_statistics: record.event_statistics(),
            monitors: MonitorSummary {
                lyapunov_monotone: m.is_some_and(RuntimeMonitors::lyapunov_monotone),
                collision_free: abort.is_none() && m.is_some_and(RuntimeMonitors::collision_free),
                consensus_reached: abort.is_none() && record.consensus_reached(),
                zeno_excluded: record.zeno_excluded(),
                values: m.cloned(),
            },
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FlockError + '_ {
    move |e| FlockError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> FlockError + '_ {
    move |e| FlockError::RecordFormat {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes every output file for `record` into `dir` (created if missing).
pub fn write_run(
    dir: &Path,
    scenario: &Scenario,
    record: &SimulationRecord,
    abort: Option<&FlockError>,
) -> Result<Summary> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let model = &record.model;

    let path = dir.join(SCENARIO_FILE);
    fs::write(&path, scenario.to_toml_string()).map_err(io_err(&path))?;

    let rows = record.times.iter().zip(&record.states).flat_map(|(t, states)| {
        states.iter().enumerate().map(move |(i, s)| {
            let mut row = vec![fmt_f64(*t), i.to_string()];
            row.extend(state_fields(model, s).into_iter().map(fmt_f64));
            row
        })
    });
    write_csv(&dir.join(STATES_FILE), &state_columns(model), rows)?;

    let mut header = vec!["time".to_string(), "agent".to_string()];
    header.extend(axes("u", 3));
    header.extend(axes("ubar", 3));
    let rows = record.times.iter().zip(&record.controls).flat_map(|(t, controls)| {
        controls.iter().enumerate().map(move |(i, c)| {
            let mut row = vec![fmt_f64(*t), i.to_string()];
            row.extend(c.force.iter().chain(c.torque.iter()).map(|x| fmt_f64(*x)));
            row
        })
    });
    write_csv(&dir.join(CONTROLS_FILE), &header, rows)?;

    let d = model.spatial_dim();
    let mut header = vec!["time".to_string(), "agent".to_string()];
    header.extend(axes("v", d));
    let rows = record.events.iter().map(|e| {
        let mut row = vec![fmt_f64(e.time), e.agent.to_string()];
        row.extend(e.velocity.iter().take(d).map(|x| fmt_f64(*x)));
        row
    });
    write_csv(&dir.join(EVENTS_FILE), &header, rows)?;

    let rows = record.metrics.iter().map(metric_row);
    write_csv(&dir.join(METRICS_FILE), &metric_columns(record.node_count), rows)?;

    let summary = Summary::new(record, abort);
    let path = dir.join(SUMMARY_FILE);
    let mut file = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
    serde_json::to_writer_pretty(&mut file, &summary).map_err(|e| FlockError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(file).and_then(|_| file.flush()).map_err(io_err(&path))?;
    Ok(summary)
}

pub fn metric_row(m: &MetricTrace) -> Vec<String> {
    let mut row: Vec<String> = [
        m.time,
        m.lyapunov,
        m.avg_min_neighbor_distance,
        m.avg_velocity_difference,
        m.max_velocity_difference,
        m.min_edge_distance,
    ]
    .into_iter()
    .map(fmt_f64)
    .collect();
    row.push(m.total_events().to_string());
    row.extend(m.cumulative_events.iter().map(ToString::to_string));
    row
}

/// A run directory read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub scenario: Scenario,
    pub model: Model,
    pub times: Vec<f64>,
    pub states: Vec<Vec<AgentState>>,
    pub events: Vec<Broadcast>,
    pub metrics: Vec<MetricTrace>,
}

impl LoadedRun {
    /// Recomputes the metric samples from the recorded states and events alone.
    pub fn recompute_metrics(&self) -> Result<Vec<MetricTrace>> {
        let graph = self.scenario.build_graph()?;
        let law = self.scenario.flocking_law(&graph)?;
        let n = graph.node_count();
        let mut counts = vec![0usize; n];
        let mut next = 0;
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, states)| {
                while next < self.events.len() && self.events[next].time <= t {
                    counts[self.events[next].agent] += 1;
                    next += 1;
                }
                metrics::trace(t, &self.model, &graph, &law, states, counts.clone())
            })
            .collect()
    }
}

struct Table {
    path: String,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
        let header = r.headers().map_err(csv_err(path))?.iter().map(String::from).collect();
        let rows = r
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(csv_err(path))?;
        Ok(Table {
            path: path.display().to_string(),
            header,
            rows,
        })
    }

    fn bad(&self, message: String) -> FlockError {
        FlockError::RecordFormat {
            path: self.path.clone(),
            message,
        }
    }

    fn expect_header(&self, expected: &[String]) -> Result<()> {
        if self.header != expected {
            return Err(self.bad(format!("expected columns {expected:?}, found {:?}", self.header)));
        }
        Ok(())
    }

    fn f64_at(&self, row: usize, col: usize) -> Result<f64> {
        self.rows[row][col]
            .parse()
            .map_err(|e| self.bad(format!("row {}, column {}: {e}", row + 1, self.header[col])))
    }

    fn usize_at(&self, row: usize, col: usize) -> Result<usize> {
        self.rows[row][col]
            .parse()
            .map_err(|e| self.bad(format!("row {}, column {}: {e}", row + 1, self.header[col])))
    }

    fn floats(&self, row: usize, cols: std::ops::Range<usize>) -> Result<Vec<f64>> {
        cols.map(|c| self.f64_at(row, c)).collect()
    }
}

fn vec3(v: &[f64]) -> Vector3<f64> {
    Vector3::from_fn(|i, _| v.get(i).copied().unwrap_or(0.0))
}

/// Reads a run directory written by [`write_run`].
pub fn read_run(dir: &Path) -> Result<LoadedRun> {
    let scenario = Scenario::load(&dir.join(SCENARIO_FILE))?;
    let model = scenario.model()?;
    let n = scenario.node_count();
    let d = model.spatial_dim();

    let table = Table::read(&dir.join(STATES_FILE))?;
    table.expect_header(&state_columns(&model))?;
    if table.rows.len() % n.max(1) != 0 {
        return Err(table.bad(format!("{} rows is not a multiple of {n} agents", table.rows.len())));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for block in 0..table.rows.len() / n {
        let t = table.f64_at(block * n, 0)?;
        let mut sample = Vec::with_capacity(n);
        for i in 0..n {
            let row = block * n + i;
            if table.usize_at(row, 1)? != i || table.f64_at(row, 0)? != t {
                return Err(table.bad(format!("row {} is out of order", row + 1)));
            }
            let s = if model.is_rigid_body() {
                let v = table.floats(row, 2..20)?;
                AgentState::rigid(
                    Matrix3::from_row_slice(&v[0..9]),
                    vec3(&v[9..12]),
                    vec3(&v[12..15]),
                    vec3(&v[15..18]),
                )
            } else {
                let v = table.floats(row, 2..2 + 2 * d)?;
                AgentState::point(vec3(&v[..d]), vec3(&v[d..]))
            };
            sample.push(s);
        }
        times.push(t);
        states.push(sample);
    }

    let table = Table::read(&dir.join(EVENTS_FILE))?;
    let mut header = vec!["time".to_string(), "agent".to_string()];
    header.extend(axes("v", d));
    table.expect_header(&header)?;
    let events = (0..table.rows.len())
        .map(|row| {
            let agent = table.usize_at(row, 1)?;
            if agent >= n {
                return Err(table.bad(format!("row {}: agent {agent} out of range", row + 1)));
            }
            Ok(Broadcast {
                agent,
                time: table.f64_at(row, 0)?,
                velocity: vec3(&table.floats(row, 2..2 + d)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let table = Table::read(&dir.join(METRICS_FILE))?;
    table.expect_header(&metric_columns(n))?;
    let metrics = (0..table.rows.len())
        .map(|row| {
            let v = table.floats(row, 0..6)?;
            Ok(MetricTrace {
                time: v[0],
                lyapunov: v[1],
                avg_min_neighbor_distance: v[2],
                avg_velocity_difference: v[3],
                max_velocity_difference: v[4],
                min_edge_distance: v[5],
                cumulative_events: (7..7 + n).map(|c| table.usize_at(row, c)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LoadedRun {
        scenario,
        model,
        times,
        states,
        events,
        metrics,
    })
}

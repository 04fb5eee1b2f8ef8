//! Static SVG figures drawn from a run directory (never re-simulates).

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::coord::Shift;
use plotters::prelude::*;

use crate::error::{FlockError, Result};
use crate::output::LoadedRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Centre-of-mass trajectories, final positions marked with a cross.
    Trajectory,
    /// Inertial velocity components over time, one panel per axis.
    Velocity,
    /// Event raster: one row per agent.
    Events,
    /// Average minimum neighbor distance, average velocity difference, Lyapunov function.
    Metrics,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [
        PlotKind::Trajectory,
        PlotKind::Velocity,
        PlotKind::Events,
        PlotKind::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Trajectory => "trajectory",
            PlotKind::Velocity => "velocity",
            PlotKind::Events => "events",
            PlotKind::Metrics => "metrics",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = FlockError;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FlockError::InvalidParameter(format!("unknown plot kind {s:?}")))
    }
}

const AXES: [&str; 3] = ["x", "y", "z"];

fn draw_err<E: std::error::Error>(e: E) -> FlockError {
    FlockError::Io {
        path: "plot".into(),
        message: e.to_string(),
    }
}

fn span(values: impl IntoIterator<Item = f64>) -> Range<f64> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return 0.0..1.0;
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad)..(hi + pad)
}

fn agent_color(i: usize, n: usize) -> RGBColor {
    let (r, g, b) = HSLColor(i as f64 / n.max(1) as f64 * 0.85, 0.7, 0.45).rgb();
    RGBColor(r, g, b)
}

/// Renders `kind` from `run` into `<dir>/<kind>.svg` and returns the path.
pub fn render(run: &LoadedRun, kind: PlotKind, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("{kind}.svg"));
    {
        let area = SVGBackend::new(&path, (900, 700)).into_drawing_area();
        area.fill(&WHITE).map_err(draw_err)?;
        match kind {
            PlotKind::Trajectory => trajectory(run, &area)?,
            PlotKind::Velocity => velocity(run, &area)?,
            PlotKind::Events => events(run, &area)?,
            PlotKind::Metrics => metrics(run, &area)?,
        }
        area.present().map_err(draw_err)?;
    }
    Ok(path)
}

fn trajectory(run: &LoadedRun, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let n = run.scenario.node_count();
    let d = run.model.spatial_dim();
    let coord = |k: usize| span(run.states.iter().flatten().map(move |s| s.position[k]));
    let time = span(run.times.iter().copied());
    let Some(last) = run.states.last() else {
        return Ok(());
    };
    if d == 3 {
        let mut chart = ChartBuilder::on(area)
            .caption("Trajectories", ("sans-serif", 22))
            .margin(20)
            .build_cartesian_3d(coord(0), coord(2), coord(1))
            .map_err(draw_err)?;
        chart.configure_axes().draw().map_err(draw_err)?;
        for i in 0..n {
            let c = agent_color(i, n);
            let path = run
                .states
                .iter()
                .map(|s| (s[i].position.x, s[i].position.z, s[i].position.y));
            chart.draw_series(LineSeries::new(path, &c)).map_err(draw_err)?;
        }
        let ends = last.iter().enumerate().map(|(i, s)| {
            Cross::new(
                (s.position.x, s.position.z, s.position.y),
                5,
                agent_color(i, n).stroke_width(2),
            )
        });
        chart.draw_series(ends).map_err(draw_err)?;
        return Ok(());
    }
    // Lower dimensions: x against y, or x against time.
    let ys = if d == 2 { coord(1) } else { time };
    let mut chart = ChartBuilder::on(area)
        .caption("Trajectories", ("sans-serif", 22))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(coord(0), ys)
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc(if d == 2 { "y (m)" } else { "t (s)" })
        .draw()
        .map_err(draw_err)?;
    let y_of = |k: usize, i: usize| {
        if d == 2 {
            run.states[k][i].position.y
        } else {
            run.times[k]
        }
    };
    for i in 0..n {
        let c = agent_color(i, n);
        let path = (0..run.states.len()).map(|k| (run.states[k][i].position.x, y_of(k, i)));
        chart.draw_series(LineSeries::new(path, &c)).map_err(draw_err)?;
    }
    let k = run.states.len() - 1;
    let ends = (0..n).map(|i| Cross::new((last[i].position.x, y_of(k, i)), 5, agent_color(i, n).stroke_width(2)));
    chart.draw_series(ends).map_err(draw_err)?;
    Ok(())
}

fn velocity(run: &LoadedRun, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let n = run.scenario.node_count();
    let d = run.model.spatial_dim();
    let panels = area.split_evenly((d, 1));
    let time = span(run.times.iter().copied());
    for (k, panel) in panels.iter().enumerate() {
        let v = |s: &crate::dynamics::AgentState| s.inertial_velocity()[k];
        let mut chart = ChartBuilder::on(panel)
            .caption(format!("Velocity {}", AXES[k]), ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(time.clone(), span(run.states.iter().flatten().map(v)))
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc("t (s)")
            .y_desc("m/s")
            .draw()
            .map_err(draw_err)?;
        for i in 0..n {
            let series = run.times.iter().zip(&run.states).map(|(t, s)| (*t, v(&s[i])));
            chart
                .draw_series(LineSeries::new(series, &agent_color(i, n)))
                .map_err(draw_err)?;
        }
    }
    Ok(())
}

fn events(run: &LoadedRun, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let n = run.scenario.node_count();
    let t_end = run.times.last().copied().unwrap_or(1.0).max(1e-9);
    let mut chart = ChartBuilder::on(area)
        .caption("Broadcast events", ("sans-serif", 22))
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..t_end, -0.5..(n as f64 - 0.5))
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("t (s)")
        .y_desc("agent")
        .draw()
        .map_err(draw_err)?;
    let marks = run.events.iter().map(|e| {
        PathElement::new(
            vec![(e.time, e.agent as f64 - 0.35), (e.time, e.agent as f64 + 0.35)],
            agent_color(e.agent, n),
        )
    });
    chart.draw_series(marks).map_err(draw_err)?;
    Ok(())
}

fn metrics(run: &LoadedRun, area: &DrawingArea<SVGBackend, Shift>) -> Result<()> {
    let panels = area.split_evenly((3, 1));
    let time = span(run.times.iter().copied());
    let traces: [(&str, &str, fn(&crate::metrics::MetricTrace) -> f64); 3] = [
        ("Average minimum neighbor distance", "m", |m| {
            m.avg_min_neighbor_distance
        }),
        ("Average velocity difference", "m/s", |m| m.avg_velocity_difference),
        ("Lyapunov function", "J", |m| m.lyapunov),
    ];
    for (panel, (title, unit, f)) in panels.iter().zip(traces) {
        let mut chart = ChartBuilder::on(panel)
            .caption(title, ("sans-serif", 18))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(time.clone(), span(run.metrics.iter().map(f)))
            .map_err(draw_err)?;
        chart
            .configure_mesh()
            .x_desc("t (s)")
            .y_desc(unit)
            .draw()
            .map_err(draw_err)?;
        let series = run.metrics.iter().map(|m| (m.time, f(m)));
        chart.draw_series(LineSeries::new(series, &BLUE)).map_err(draw_err)?;
    }
    Ok(())
}

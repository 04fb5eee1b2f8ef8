//! Lyapunov function, flocking-quality metrics and event statistics.
//!
//! Velocity metrics use inertial translational velocities; averages of
//! velocity differences run over graph edges.

use serde::{Deserialize, Serialize};

use crate::controller::FlockingLaw;
use crate::dynamics::{AgentState, Model};
use crate::error::Result;
use crate::graph::CommGraph;
use crate::trigger::Broadcast;

/// One sample of the metric traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTrace {
    pub time: f64,
    pub lyapunov: f64,
    pub avg_min_neighbor_distance: f64,
    pub avg_velocity_difference: f64,
    pub max_velocity_difference: f64,
    pub min_edge_distance: f64,
    pub cumulative_events: Vec<usize>,
}

impl MetricTrace {
    pub fn total_events(&self) -> usize {
        self.cumulative_events.iter().sum()
    }
}

/// `V = ½ Σ_i Σ_{j∈N_i} α_i V_ij + Σ_i ½ q̇_iᵀ M_i q̇_i`.
///
/// The double sum visits every edge from both endpoints; the ½ makes each
/// edge count once, which is the potential energy the closed loop actually
/// exchanges with the kinetic term.
pub fn lyapunov(model: &Model, graph: &CommGraph, law: &FlockingLaw, states: &[AgentState]) -> Result<f64> {
    let mut potential = 0.0;
    for (k, e) in graph.edges().iter().enumerate() {
        let z = states[e.tail].position - states[e.head].position;
        let v = law.potentials[k].value(&z).map_err(|err| err.on_edge(e.tail, e.head))?;
        potential += 0.5 * (law.gains[e.tail].alpha + law.gains[e.head].alpha) * v;
    }
    let kinetic: f64 = states.iter().map(|s| model.kinetic_energy(s)).sum();
    Ok(potential + kinetic)
}

/// Mean over agents of the distance to the nearest neighbor.
pub fn avg_min_neighbor_distance(graph: &CommGraph, states: &[AgentState]) -> f64 {
    let n = graph.node_count();
    let total: f64 = (0..n)
        .map(|i| {
            graph
                .links(i)
                .iter()
                .map(|l| (states[i].position - states[l.neighbor].position).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / n as f64
}

/// Mean over edges of `‖ḃ_i - ḃ_j‖`.
pub fn avg_velocity_difference(graph: &CommGraph, states: &[AgentState]) -> f64 {
    if graph.edge_count() == 0 {
        return 0.0;
    }
    let total: f64 = graph
        .edges()
        .iter()
        .map(|e| (states[e.tail].inertial_velocity() - states[e.head].inertial_velocity()).norm())
        .sum();
    total / graph.edge_count() as f64
}

/// `max_{i,j} ‖ḃ_i - ḃ_j‖` over all pairs of agents.
pub fn max_velocity_difference(states: &[AgentState]) -> f64 {
    let v: Vec<_> = states.iter().map(|s| s.inertial_velocity()).collect();
    let mut worst = 0.0f64;
    for i in 0..v.len() {
        for j in (i + 1)..v.len() {
            worst = worst.max((v[i] - v[j]).norm());
        }
    }
    worst
}

pub fn min_edge_distance(graph: &CommGraph, states: &[AgentState]) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| (states[e.tail].position - states[e.head].position).norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn trace(
    time: f64,
    model: &Model,
    graph: &CommGraph,
    law: &FlockingLaw,
    states: &[AgentState],
    cumulative_events: Vec<usize>,
) -> Result<MetricTrace> {
    Ok(MetricTrace {
        time,
        lyapunov: lyapunov(model, graph, law, states)?,
        avg_min_neighbor_distance: avg_min_neighbor_distance(graph, states),
        avg_velocity_difference: avg_velocity_difference(graph, states),
        max_velocity_difference: max_velocity_difference(states),
        min_edge_distance: min_edge_distance(graph, states),
        cumulative_events,
    })
}

/// Per-agent event statistics of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventStatistics {
    pub per_agent: Vec<usize>,
    pub total: usize,
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Mean over agents of each agent's mean inter-event interval; agents with
    /// a single event do not contribute. Absent when no agent fired twice.
    pub mean_inter_event_interval: Option<f64>,
    pub min_inter_event_interval: Option<f64>,
    /// Largest per-agent ratio of events to integration steps after `transient`.
    pub max_events_per_step_after_transient: f64,
    pub transient: f64,
}

/// Computes [`EventStatistics`] from an event log.
pub fn event_statistics(
    events: &[Broadcast],
    node_count: usize,
    dt: f64,
    duration: f64,
    transient: f64,
) -> EventStatistics {
    let mut times = vec![Vec::new(); node_count];
    for e in events {
        times[e.agent].push(e.time);
    }
    let per_agent: Vec<usize> = times.iter().map(Vec::len).collect();
    let total = per_agent.iter().sum();
    let intervals: Vec<Vec<f64>> = times
        .iter()
        .map(|t| t.windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    let means: Vec<f64> = intervals
        .iter()
        .filter(|iv| !iv.is_empty())
        .map(|iv| iv.iter().sum::<f64>() / iv.len() as f64)
        .collect();
    let mean_inter_event_interval = (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64);
    let min_inter_event_interval = intervals.iter().flatten().copied().reduce(f64::min);
    let late_steps = ((duration - transient) / dt).round().max(1.0);
    let max_events_per_step_after_transient = times
        .iter()
        .map(|t| t.iter().filter(|&&x| x > transient).count() as f64 / late_steps)
        .fold(0.0, f64::max);
    EventStatistics {
        total,
        min: per_agent.iter().copied().min().unwrap_or(0),
        max: per_agent.iter().copied().max().unwrap_or(0),
        mean: total as f64 / node_count.max(1) as f64,
        per_agent,
        mean_inter_event_interval,
        min_inter_event_interval,
        max_events_per_step_after_transient,
        transient,
    }
}

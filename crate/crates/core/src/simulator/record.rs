use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    SimulationConfig, World, COLLISION_DISTANCE, CONSENSUS_TOLERANCE, LYAPUNOV_TOLERANCE, ZENO_MAX_EVENT_RATIO,
    ZENO_TRANSIENT,
};
use crate::dynamics::{Actuation, AgentState, Model};
use crate::error::{FlockError, Result};
use crate::metrics::{self, EventStatistics, MetricTrace};
use crate::trigger::Broadcast;

/// Step-level monitors evaluated during a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeMonitors {
    pub lyapunov_initial: f64,
    pub lyapunov_final: f64,
    /// Largest single-step increase of the Lyapunov function.
    pub lyapunov_max_increase: f64,
    pub lyapunov_max_increase_time: f64,
    pub min_edge_distance: f64,
    pub min_edge_distance_time: f64,
    /// Empirical bound on `‖d e_i / dt‖`, from per-step velocity changes.
    pub max_velocity_rate: f64,
    #[serde(skip)]
    previous_velocities: Vec<Vector3<f64>>,
    #[serde(skip)]
    started: bool,
}

impl RuntimeMonitors {
    pub fn start(world: &World) -> Self {
        RuntimeMonitors {
            lyapunov_initial: f64::NAN,
            lyapunov_final: f64::NAN,
            lyapunov_max_increase: f64::NEG_INFINITY,
            lyapunov_max_increase_time: 0.0,
            min_edge_distance: f64::INFINITY,
            min_edge_distance_time: 0.0,
            max_velocity_rate: 0.0,
            previous_velocities: world.states().iter().map(AgentState::inertial_velocity).collect(),
            started: false,
        }
    }

    pub fn observe(&mut self, world: &World) -> Result<()> {
        let t = world.time();
        let v = world.lyapunov()?;
        if self.started {
            let inc = v - self.lyapunov_final;
            if inc > self.lyapunov_max_increase {
                self.lyapunov_max_increase = inc;
                self.lyapunov_max_increase_time = t;
            }
            for (s, prev) in world.states().iter().zip(self.previous_velocities.iter_mut()) {
                let now = s.inertial_velocity();
                self.max_velocity_rate = self.max_velocity_rate.max((now - *prev).norm() / world.dt());
                *prev = now;
            }
        } else {
            self.lyapunov_initial = v;
            self.started = true;
        }
        self.lyapunov_final = v;
        let d = metrics::min_edge_distance(world.graph(), world.states());
        if d < self.min_edge_distance {
            self.min_edge_distance = d;
            self.min_edge_distance_time = t;
        }
        Ok(())
    }

    /// `V(t + dt) ≤ V(t) + LYAPUNOV_TOLERANCE · V(0)` held at every step.
    pub fn lyapunov_monotone(&self) -> bool {
        self.lyapunov_max_increase <= LYAPUNOV_TOLERANCE * self.lyapunov_initial
    }

    pub fn collision_free(&self) -> bool {
        self.min_edge_distance > COLLISION_DISTANCE
    }
}

/// Time series produced by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub model: Model,
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub dt: f64,
    pub seed: u64,
    pub steps_completed: u64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<AgentState>>,
    pub controls: Vec<Vec<Actuation>>,
    pub metrics: Vec<MetricTrace>,
    pub events: Vec<Broadcast>,
    pub monitors: Option<RuntimeMonitors>,
}

impl SimulationRecord {
    pub(super) fn new(world: &World, config: &SimulationConfig) -> Self {
        SimulationRecord {
            model: *world.model(),
            node_count: world.graph().node_count(),
            edges: world.graph().edges().iter().map(|e| (e.tail, e.head)).collect(),
            dt: config.dt,
            seed: config.seed,
            steps_completed: 0,
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            metrics: Vec::new(),
            events: Vec::new(),
            monitors: None,
        }
    }

    pub(super) fn push_sample(&mut self, world: &World, controls: Vec<Actuation>) -> Result<()> {
        let trace = metrics::trace(
            world.time(),
            world.model(),
            world.graph(),
            world.law(),
            world.states(),
            world.event_counts(),
        )?;
        self.times.push(world.time());
        self.states.push(world.states().to_vec());
        self.controls.push(controls);
        self.metrics.push(trace);
        Ok(())
    }

    pub(super) fn finish(&mut self, world: &World, monitors: RuntimeMonitors) {
        self.steps_completed = world.step_index();
        self.events = world.events().to_vec();
        self.monitors = Some(monitors);
    }

    /// Simulated time covered by the record.
    pub fn duration(&self) -> f64 {
        self.steps_completed as f64 * self.dt
    }

    pub fn final_metrics(&self) -> Option<&MetricTrace> {
        self.metrics.last()
    }

    pub fn event_statistics(&self) -> EventStatistics {
        metrics::event_statistics(&self.events, self.node_count, self.dt, self.duration(), ZENO_TRANSIENT)
    }

    pub fn consensus_reached(&self) -> bool {
        self.final_metrics()
            .is_some_and(|m| m.max_velocity_difference < CONSENSUS_TOLERANCE)
    }

    pub fn zeno_excluded(&self) -> bool {
        let st = self.event_statistics();
        st.min_inter_event_interval
            .is_none_or(|iv| iv >= self.dt * (1.0 - 1e-9))
            && st.max_events_per_step_after_transient < ZENO_MAX_EVENT_RATIO
    }
}

/// A run stopped by an error, with everything recorded up to that point.
#[derive(Debug, Clone)]
pub struct Aborted {
    pub cause: FlockError,
    pub record: SimulationRecord,
}

impl std::fmt::Display for Aborted {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "run aborted at t = {} s: {}", self.record.duration(), self.cause)
    }
}

impl std::error::Error for Aborted {}

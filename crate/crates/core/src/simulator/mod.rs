//! Fixed-step closed-loop simulation.
//!
//! Each step runs a barrier-synchronized pipeline:
//!
//! 1. record the control of every agent from the frozen snapshot,
//! 2. integrate all agents over `dt`; the controller is re-evaluated at every
//!    integrator stage from stage positions, with the broadcast values frozen,
//! 3. evaluate every trigger against the frozen broadcast snapshot,
//! 4. apply all fired broadcasts at once,
//! 5. advance time.
//!
//! Rotations are advanced on SO(3) with a fourth-order Munthe-Kaas scheme
//! (`R ← R exp(hat(θ))`), so point masses keep an exactly identity attitude.

mod integrate;
mod record;

pub use integrate::{rkmk4_step, semi_implicit_euler_step};
pub use record::{Aborted, RuntimeMonitors, SimulationRecord};

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::FlockingLaw;
use crate::dynamics::{Actuation, AgentState, Model, StateRate};
use crate::error::{FlockError, Result};
use crate::graph::CommGraph;
use crate::metrics;
use crate::trigger::{Broadcast, TriggerState};

/// Lyapunov increases per step above `LYAPUNOV_TOLERANCE · V(0)` fail the monitor.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-6;
/// Edge distances at or below this (m) fail the collision monitor.
pub const COLLISION_DISTANCE: f64 = 0.05;
/// Events before this time (s) are excluded from the events-per-step monitor.
pub const ZENO_TRANSIENT: f64 = 5.0;
/// Largest per-agent events-per-step ratio accepted after the transient.
pub const ZENO_MAX_EVENT_RATIO: f64 = 0.01;
/// Final max pairwise velocity difference (m/s) accepted as consensus.
pub const CONSENSUS_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Rk4,
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    pub integrator: Integrator,
    pub record_stride: usize,
    /// Evaluate per-agent work on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1e-3,
            duration: 200.0,
            seed: 0,
            integrator: Integrator::Rk4,
            record_stride: 100,
            parallel: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(FlockError::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(FlockError::InvalidParameter(format!(
                "duration ({}) must be at least dt ({})",
                self.duration, self.dt
            )));
        }
        if self.record_stride < 1 {
            return Err(FlockError::InvalidParameter("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.duration / self.dt).round() as u64
    }
}

/// Closed-loop multi-agent state.
#[derive(Debug, Clone)]
pub struct World {
    model: Model,
    graph: CommGraph,
    law: FlockingLaw,
    states: Vec<AgentState>,
    triggers: Vec<TriggerState>,
    events: Vec<Broadcast>,
    dt: f64,
    integrator: Integrator,
    parallel: bool,
    step_index: u64,
}

impl World {
    /// Builds the world and performs the initial broadcast of every agent at `t = 0`.
    pub fn new(
        model: Model,
        graph: CommGraph,
        law: FlockingLaw,
        sigmas: &[f64],
        initial: Vec<AgentState>,
        config: &SimulationConfig,
    ) -> Result<Self> {
        config.validate()?;
        let n = graph.node_count();
        for (len, what) in [(sigmas.len(), "sigma"), (initial.len(), "initial state")] {
            if len != n {
                return Err(FlockError::InvalidParameter(format!(
                    "expected {n} {what} values, got {len}"
                )));
            }
        }
        if law.gains.len() != n || law.potentials.len() != graph.edge_count() {
            return Err(FlockError::InvalidParameter(
                "flocking law does not match the graph".into(),
            ));
        }
        for s in &initial {
            model.validate_state(s)?;
        }
        let triggers = (0..n)
            .map(|i| TriggerState::new_unchecked(i, &graph.neighbors(i)?, sigmas[i], law.gains[i].beta))
            .collect::<Result<Vec<_>>>()?;
        let mut world = World {
            model,
            graph,
            law,
            states: initial,
            triggers,
            events: Vec::new(),
            dt: config.dt,
            integrator: config.integrator,
            parallel: config.parallel,
            step_index: 0,
        };
        let all: Vec<usize> = (0..n).collect();
        world.broadcast(&all)?;
        Ok(world)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn law(&self) -> &FlockingLaw {
        &self.law
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub fn triggers(&self) -> &[TriggerState] {
        &self.triggers
    }

    pub fn events(&self) -> &[Broadcast] {
        &self.events
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn event_counts(&self) -> Vec<usize> {
        self.triggers.iter().map(TriggerState::event_count).collect()
    }

    pub fn lyapunov(&self) -> Result<f64> {
        metrics::lyapunov(&self.model, &self.graph, &self.law, &self.states)
    }

    /// Actuator commands for the current snapshot.
    pub fn controls(&self) -> Result<Vec<Actuation>> {
        let positions: Vec<Vector3<f64>> = self.states.iter().map(|s| s.position).collect();
        self.per_agent(|i| {
            self.law.full_control(
                &self.model,
                &self.graph,
                i,
                &self.states[i],
                &positions,
                &self.triggers[i],
            )
        })
    }

    /// Advances one step and returns the controls applied at its start along
    /// with the ids of agents that fired at its end.
    pub fn step(&mut self) -> Result<(Vec<Actuation>, Vec<usize>)> {
        let (next, controls) = match self.integrator {
            Integrator::Rk4 => self.rkmk4()?,
            Integrator::SemiImplicitEuler => self.semi_implicit_euler()?,
        };
        self.states = next;
        self.step_index += 1;

        let fired: Vec<usize> = self
            .per_agent(|i| {
                let v = self.states[i].inertial_velocity();
                self.triggers[i].should_fire(&v)
            })?
            .into_iter()
            .enumerate()
            .filter_map(|(i, f)| f.then_some(i))
            .collect();
        self.broadcast(&fired)?;
        Ok((controls, fired))
    }

    fn broadcast(&mut self, agents: &[usize]) -> Result<()> {
        let t = self.time();
        let mut messages = Vec::with_capacity(agents.len());
        for &i in agents {
            let v = self.states[i].inertial_velocity();
            messages.push(self.triggers[i].fire(t, v)?);
        }
        for msg in &messages {
            for k in 0..self.graph.degree(msg.agent) {
                let j = self.graph.links(msg.agent)[k].neighbor;
                self.triggers[j].receive(msg)?;
            }
        }
        self.events.extend(messages);
        Ok(())
    }

    fn per_agent<T, F>(&self, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        let n = self.states.len();
        if self.parallel {
            (0..n).into_par_iter().map(f).collect()
        } else {
            (0..n).map(f).collect()
        }
    }

    fn rates_and_controls(&self, states: &[AgentState]) -> Result<(Vec<StateRate>, Vec<Actuation>)> {
        let positions: Vec<Vector3<f64>> = states.iter().map(|s| s.position).collect();
        let out = self.per_agent(|i| {
            let act = self
                .law
                .full_control(&self.model, &self.graph, i, &states[i], &positions, &self.triggers[i])?;
            Ok((self.model.derivative(&states[i], &act), act))
        })?;
        Ok(out.into_iter().unzip())
    }

    fn rkmk4(&self) -> Result<(Vec<AgentState>, Vec<Actuation>)> {
        let mut controls = None;
        let next = integrate::rkmk4_step(&self.states, self.dt, |states| {
            let (rates, acts) = self.rates_and_controls(states)?;
            controls.get_or_insert(acts);
            Ok(rates)
        })?;
        Ok((next, controls.unwrap_or_default()))
    }

    fn semi_implicit_euler(&self) -> Result<(Vec<AgentState>, Vec<Actuation>)> {
        let (rates, controls) = self.rates_and_controls(&self.states)?;
        Ok((
            integrate::semi_implicit_euler_step(&self.states, &rates, self.dt),
            controls,
        ))
    }
}

/// Runs `world` for `config.steps()` steps, recording every
/// `config.record_stride` steps and the final state, and monitoring the
/// Lyapunov function and edge distances at every step.
pub fn run(mut world: World, config: &SimulationConfig) -> std::result::Result<SimulationRecord, Box<Aborted>> {
    let steps = config.steps();
    let mut record = SimulationRecord::new(&world, config);
    let mut monitors = RuntimeMonitors::start(&world);
    let start = world
        .controls()
        .and_then(|c| record.push_sample(&world, c))
        .and_then(|_| monitors.observe(&world));
    if let Err(cause) = start {
        record.finish(&world, monitors);
        return Err(Box::new(Aborted { cause, record }));
    }
    for k in 1..=steps {
        let outcome = world.step().and_then(|_| {
            monitors.observe(&world)?;
            if k % config.record_stride as u64 == 0 || k == steps {
                // The control applied from the sampled instant onwards.
                let controls = world.controls()?;
                record.push_sample(&world, controls)?;
            }
            Ok(())
        });
        if let Err(cause) = outcome {
            record.finish(&world, monitors);
            return Err(Box::new(Aborted { cause, record }));
        }
    }
    record.finish(&world, monitors);
    Ok(record)
}

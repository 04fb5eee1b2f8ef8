//! Distributed flocking law
//!
//! ```text
//! F_i = -α_i Σ_{j∈N_i} ∇_{q_i} V_ij(q_i - q_j) - β_i Σ_{j∈N_i} (q̂_i - q̂_j)
//! ```
//!
//! The gradient term uses continuously sensed relative positions; the
//! alignment term uses broadcast velocities only.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Actuation, AgentState, Model};
use crate::error::{FlockError, Result};
use crate::graph::CommGraph;
use crate::potential::PotentialParams;
use crate::trigger::TriggerState;

/// Default attitude damping `k_Ω` (N·m·s).
pub const DEFAULT_ATTITUDE_DAMPING: f64 = 5.0;

/// Reynolds gains of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub alpha: f64,
    pub beta: f64,
}

impl ControlGains {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(FlockError::InvalidParameter(format!(
                "Reynolds gains must be positive, got alpha = {alpha}, beta = {beta}"
            )));
        }
        Ok(ControlGains { alpha, beta })
    }
}

/// Per-agent gains, per-edge potentials and the attitude stabilizer gain.
#[derive(Debug, Clone, PartialEq)]
pub struct FlockingLaw {
    pub gains: Vec<ControlGains>,
    pub potentials: Vec<PotentialParams>,
    pub attitude_damping: f64,
}

impl FlockingLaw {
    pub fn new(
        graph: &CommGraph,
        gains: Vec<ControlGains>,
        potentials: Vec<PotentialParams>,
        attitude_damping: f64,
    ) -> Result<Self> {
        if gains.len() != graph.node_count() {
            return Err(FlockError::DimensionMismatch {
                expected: graph.node_count(),
                actual: gains.len(),
            });
        }
        if potentials.len() != graph.edge_count() {
            return Err(FlockError::DimensionMismatch {
                expected: graph.edge_count(),
                actual: potentials.len(),
            });
        }
        if !(attitude_damping >= 0.0) {
            return Err(FlockError::InvalidParameter(
                "attitude damping must be nonnegative".into(),
            ));
        }
        Ok(FlockingLaw {
            gains,
            potentials,
            attitude_damping,
        })
    }

    /// Same gains and potential shape for every agent and edge.
    pub fn homogeneous(graph: &CommGraph, gains: ControlGains, potential: PotentialParams) -> Result<Self> {
        Self::new(
            graph,
            vec![gains; graph.node_count()],
            vec![potential; graph.edge_count()],
            DEFAULT_ATTITUDE_DAMPING,
        )
    }

    /// `-α_i Σ ∇_{q_i} V_ij` from relative positions only.
    pub fn gradient_term(&self, graph: &CommGraph, i: usize, positions: &[Vector3<f64>]) -> Result<Vector3<f64>> {
        let mut sum = Vector3::zeros();
        for link in graph.links(i) {
            let z = positions[i] - positions[link.neighbor];
            sum += self.potentials[link.edge]
                .gradient(&z)
                .map_err(|e| e.on_edge(i, link.neighbor))?;
        }
        Ok(sum * -self.gains[i].alpha)
    }

    /// Flocking force for agent `i` in the frame of the flocking coordinates
    /// (inertial for the rigid body).
    pub fn flocking_force(
        &self,
        graph: &CommGraph,
        i: usize,
        positions: &[Vector3<f64>],
        trigger: &TriggerState,
    ) -> Result<Vector3<f64>> {
        let alignment = trigger.broadcast_disagreement()? * -self.gains[i].beta;
        Ok(self.gradient_term(graph, i, positions)? + alignment)
    }

    /// Actuator command: the flocking force plus cancellation of the
    /// conservative terms. For the rigid body the inertial force is mapped to
    /// the body frame, and the attitude input cancels the restoring torque and
    /// damps the angular velocity.
    pub fn full_control(
        &self,
        model: &Model,
        graph: &CommGraph,
        i: usize,
        state: &AgentState,
        positions: &[Vector3<f64>],
        trigger: &TriggerState,
    ) -> Result<Actuation> {
        let f = self.flocking_force(graph, i, positions, trigger)?;
        Ok(self.actuation(model, state, f))
    }

    /// Maps an inertial flocking force to actuator inputs for `state`.
    pub fn actuation(&self, model: &Model, state: &AgentState, flocking: Vector3<f64>) -> Actuation {
        match model {
            Model::DoubleIntegrator(_) => Actuation {
                force: flocking,
                torque: Vector3::zeros(),
            },
            Model::Underwater(uv) => Actuation {
                force: state.attitude.transpose() * flocking - uv.net_body_force(&state.attitude),
                torque: -uv.restoring_torque(&state.attitude) - state.angular_velocity * self.attitude_damping,
            },
        }
    }
}

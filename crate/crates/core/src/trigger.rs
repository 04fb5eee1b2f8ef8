//! Event-triggered velocity broadcasting.
//!
//! Agent `i` rebroadcasts its velocity when the measurement error
//! `e_i = q̇_i(t_k) - q̇_i(t)` exceeds
//!
//! ```text
//! σ_i Σ_j β_i ‖q̂_i - q̂_j‖² / (2 ‖Σ_j β_i (q̂_i - q̂_j)‖)
//! ```
//!
//! where hats denote the latest broadcast values.

use nalgebra::Vector3;

use crate::error::{FlockError, Result};

/// Denominators below this make the threshold ratio undefined.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;
/// Threshold used when the ratio is undefined (velocity units).
pub const THRESHOLD_FLOOR: f64 = 1e-9;

/// A velocity broadcast from one agent to its neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Broadcast {
    pub agent: usize,
    pub time: f64,
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerState {
    agent: usize,
    sigma: f64,
    beta: f64,
    last_broadcast: Option<Vector3<f64>>,
    neighbor_broadcasts: Vec<(usize, Option<Vector3<f64>>)>,
    event_times: Vec<f64>,
}

impl TriggerState {
    /// `neighbors` must be the sorted neighbor set of `agent`.
    pub fn new(agent: usize, neighbors: &[usize], sigma: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(FlockError::InvalidParameter(format!(
                "trigger sigma must satisfy 0 < sigma < 1, got {sigma}"
            )));
        }
        Self::new_unchecked(agent, neighbors, sigma, beta)
    }

    /// Like [`TriggerState::new`] but only requires `sigma > 0` and `beta > 0`,
    /// for experiments outside the stability conditions.
    pub fn new_unchecked(agent: usize, neighbors: &[usize], sigma: f64, beta: f64) -> Result<Self> {
        if !(sigma > 0.0) || !(beta > 0.0) {
            return Err(FlockError::InvalidParameter(format!(
                "trigger requires sigma > 0 and beta > 0, got sigma = {sigma}, beta = {beta}"
            )));
        }
        Ok(TriggerState {
            agent,
            sigma,
            beta,
            last_broadcast: None,
            neighbor_broadcasts: neighbors.iter().map(|&j| (j, None)).collect(),
            event_times: Vec::new(),
        })
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn last_broadcast(&self) -> Option<Vector3<f64>> {
        self.last_broadcast
    }

    pub fn last_event_time(&self) -> Option<f64> {
        self.event_times.last().copied()
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn event_count(&self) -> usize {
        self.event_times.len()
    }

    /// Latest velocity received from each neighbor, in neighbor order.
    pub fn neighbor_broadcasts(&self) -> &[(usize, Option<Vector3<f64>>)] {
        &self.neighbor_broadcasts
    }

    /// `Σ_j (q̂_i - q̂_j)` over neighbors.
    pub fn broadcast_disagreement(&self) -> Result<Vector3<f64>> {
        let own = self.own_broadcast()?;
        let mut sum = Vector3::zeros();
        for (j, v) in &self.neighbor_broadcasts {
            let v = v.ok_or(FlockError::MissingBroadcast {
                agent: self.agent,
                neighbor: *j,
            })?;
            sum += own - v;
        }
        Ok(sum)
    }

    /// `e_i = q̂_i - q̇_i(t)`; zero before the first broadcast.
    pub fn error(&self, current_velocity: &Vector3<f64>) -> Vector3<f64> {
        match self.last_broadcast {
            Some(b) => b - current_velocity,
            None => Vector3::zeros(),
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        let own = self.own_broadcast()?;
        let mut numerator = 0.0;
        let mut sum = Vector3::zeros();
        for (j, v) in &self.neighbor_broadcasts {
            let v = v.ok_or(FlockError::MissingBroadcast {
                agent: self.agent,
                neighbor: *j,
            })?;
            let diff = own - v;
            numerator += self.beta * diff.norm_squared();
            sum += diff * self.beta;
        }
        let denominator = sum.norm();
        if denominator < DEGENERATE_DENOMINATOR {
            return Ok(THRESHOLD_FLOOR);
        }
        Ok(self.sigma * numerator / (2.0 * denominator))
    }

    /// True iff the trigger function is strictly positive. An agent that has
    /// never broadcast always fires.
    pub fn should_fire(&self, current_velocity: &Vector3<f64>) -> Result<bool> {
        if self.last_broadcast.is_none() {
            return Ok(true);
        }
        Ok(self.error(current_velocity).norm() > self.threshold()?)
    }

    /// Records an event at `t` and returns the message for the neighbors.
    pub fn fire(&mut self, t: f64, current_velocity: Vector3<f64>) -> Result<Broadcast> {
        if let Some(last) = self.last_event_time() {
            if !(t > last) {
                return Err(FlockError::NonmonotoneTime { time: t, last });
            }
        }
        self.last_broadcast = Some(current_velocity);
        self.event_times.push(t);
        Ok(Broadcast {
            agent: self.agent,
            time: t,
            velocity: current_velocity,
        })
    }

    /// Stores a neighbor's broadcast.
    pub fn receive(&mut self, msg: &Broadcast) -> Result<()> {
        match self.neighbor_broadcasts.binary_search_by_key(&msg.agent, |(j, _)| *j) {
            Ok(k) => {
                self.neighbor_broadcasts[k].1 = Some(msg.velocity);
                Ok(())
            }
            Err(_) => Err(FlockError::InvalidParameter(format!(
                "agent {} received a broadcast from non-neighbor {}",
                self.agent, msg.agent
            ))),
        }
    }

    fn own_broadcast(&self) -> Result<Vector3<f64>> {
        self.last_broadcast.ok_or(FlockError::MissingBroadcast {
            agent: self.agent,
            neighbor: self.agent,
        })
    }
}

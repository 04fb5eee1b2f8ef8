//! Scenario files (TOML) and the built-in presets.
//!
//! A scenario has the sections `graph`, `dynamics`, `gains`, `potential`,
//! `trigger`, `simulation` and an optional `output`; the README lists every
//! key.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{ControlGains, FlockingLaw, DEFAULT_ATTITUDE_DAMPING};
use crate::dynamics::{AgentState, DoubleIntegrator, Model, RigidBodyParams, UnderwaterVehicle, STANDARD_GRAVITY};
use crate::error::{FlockError, Result};
use crate::graph::CommGraph;
use crate::potential::PotentialParams;
use crate::simulator::{Integrator, SimulationConfig, World};

/// Names accepted by [`Scenario::preset`].
pub const PRESETS: &[&str] = &["underwater_paper", "double_integrator"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub graph: GraphSpec,
    pub dynamics: DynamicsSpec,
    pub gains: GainsSpec,
    pub potential: PotentialSpec,
    pub trigger: TriggerSpec,
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Explicit {
        node_count: usize,
        edges: Vec<(usize, usize)>,
    },
    /// Erdős–Rényi, resampled until connected. Without `seed` the simulation seed is used.
    Random {
        node_count: usize,
        edge_probability: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl GraphSpec {
    pub fn node_count(&self) -> usize {
        match self {
            GraphSpec::Explicit { node_count, .. } | GraphSpec::Random { node_count, .. } => *node_count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DoubleIntegrator,
    UnderwaterVehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub model: ModelKind,
    /// Point-mass dimension (1 to 3); ignored by the rigid body.
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    /// Vehicle parameters; defaults to the `underwater_paper` vehicle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid_body: Option<RigidBodySpec>,
}

fn default_dimension() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidBodySpec {
    /// Body mass `m` (kg).
    pub mass: f64,
    /// Diagonal added mass (kg).
    pub added_mass: [f64; 3],
    /// Diagonal inertia (kg·m²).
    pub inertia: [f64; 3],
    /// `ρ γ̄ g` (N).
    pub buoyancy_force: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    /// Centre of gravity to centre of buoyancy, body frame (m).
    pub buoyancy_offset: [f64; 3],
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

impl RigidBodySpec {
    pub fn underwater_paper() -> Self {
        RigidBodySpec {
            mass: 123.8,
            added_mass: [65.0, 70.0, 75.0],
            inertia: [5.46, 5.29, 5.72],
            buoyancy_force: 1215.8,
            gravity: STANDARD_GRAVITY,
            buoyancy_offset: [0.0, 0.0, -0.007],
        }
    }

    pub fn params(&self) -> RigidBodyParams {
        RigidBodyParams {
            mass_matrix: Matrix3::identity() * self.mass + Matrix3::from_diagonal(&Vector3::from(self.added_mass)),
            inertia: Matrix3::from_diagonal(&Vector3::from(self.inertia)),
            buoyancy_force: self.buoyancy_force,
            weight: self.mass * self.gravity,
            buoyancy_offset: Vector3::from(self.buoyancy_offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub beta: f64,
    #[serde(default = "default_attitude_damping")]
    pub attitude_damping: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<GainOverride>,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_attitude_damping() -> f64 {
    DEFAULT_ATTITUDE_DAMPING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainOverride {
    pub agent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// A single desired distance or one per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Distances {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

impl Distances {
    fn as_slice(&self) -> &[f64] {
        match self {
            Distances::Uniform(d) => std::slice::from_ref(d),
            Distances::PerEdge(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub desired_distance: Distances,
    #[serde(default = "default_cutoff")]
    pub cutoff_radius: f64,
    #[serde(default = "default_inner_gain")]
    pub inner_gain: f64,
    #[serde(default = "default_mid_gain")]
    pub mid_gain: f64,
}

fn default_cutoff() -> f64 {
    1.0
}

fn default_inner_gain() -> f64 {
    20.0
}

fn default_mid_gain() -> f64 {
    TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<SigmaOverride>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaOverride {
    pub agent: usize,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub parallel: bool,
    pub initial: InitialSpec,
}

fn default_stride() -> usize {
    100
}

/// Initial conditions. Velocities are inertial; rigid bodies start level and
/// without rotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Positions uniform in `[0, position_extent]` and velocities uniform in
    /// `[-velocity_extent, velocity_extent]` per used axis.
    Random { position_extent: f64, velocity_extent: f64 },
    Explicit {
        positions: Vec<[f64; 3]>,
        velocities: Vec<[f64; 3]>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
}

/// Everything needed to start a run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub world: World,
    pub config: SimulationConfig,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FlockError::InvalidParameter(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FlockError::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "underwater_paper" => Ok(Self::underwater_paper()),
            "double_integrator" => Ok(Self::double_integrator()),
            other => Err(FlockError::InvalidParameter(format!(
                "unknown preset {other:?}; known presets: {}",
                PRESETS.join(", ")
            ))),
        }
    }

    /// 50 vehicles on a random connected graph, β = 10, σ = 0.01, d = 0.5 m, R = 1 m.
    pub fn underwater_paper() -> Self {
        Scenario {
            graph: GraphSpec::Random {
                node_count: 50,
                edge_probability: 0.1,
                seed: None,
            },
            dynamics: DynamicsSpec {
                model: ModelKind::UnderwaterVehicle,
                dimension: 3,
                rigid_body: Some(RigidBodySpec::underwater_paper()),
            },
            gains: GainsSpec {
                alpha: 1.0,
                beta: 10.0,
                attitude_damping: DEFAULT_ATTITUDE_DAMPING,
                overrides: Vec::new(),
            },
            potential: PotentialSpec {
                desired_distance: Distances::Uniform(0.5),
                cutoff_radius: 1.0,
                inner_gain: 20.0,
                mid_gain: TAU,
            },
            trigger: TriggerSpec {
                sigma: 0.01,
                overrides: Vec::new(),
            },
            simulation: SimulationSpec {
                dt: 1e-3,
                duration: 200.0,
                seed: 1,
                integrator: Integrator::Rk4,
                record_stride: 100,
                parallel: false,
                initial: InitialSpec::Random {
                    position_extent: 5.0,
                    velocity_extent: 0.5,
                },
            },
            output: OutputSpec::default(),
        }
    }

    /// Ten unit-mass agents in 3D.
    pub fn double_integrator() -> Self {
        Scenario {
            graph: GraphSpec::Random {
                node_count: 10,
                edge_probability: 0.4,
                seed: None,
            },
            dynamics: DynamicsSpec {
                model: ModelKind::DoubleIntegrator,
                dimension: 3,
                rigid_body: None,
            },
            gains: GainsSpec {
                alpha: 1.0,
                beta: 1.0,
                attitude_damping: DEFAULT_ATTITUDE_DAMPING,
                overrides: Vec::new(),
            },
            potential: PotentialSpec {
                desired_distance: Distances::Uniform(0.5),
                cutoff_radius: 1.0,
                inner_gain: 20.0,
                mid_gain: TAU,
            },
            trigger: TriggerSpec {
                sigma: 0.5,
                overrides: Vec::new(),
            },
            simulation: SimulationSpec {
                dt: 1e-3,
                duration: 30.0,
                seed: 1,
                integrator: Integrator::Rk4,
                record_stride: 10,
                parallel: false,
                initial: InitialSpec::Random {
                    position_extent: 2.0,
                    velocity_extent: 0.5,
                },
            },
            output: OutputSpec::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulation.seed = seed;
        self
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Per-agent `(α, β)`.
    pub fn agent_gains(&self) -> Vec<(f64, f64)> {
        let mut g = vec![(self.gains.alpha, self.gains.beta); self.node_count()];
        for o in &self.gains.overrides {
            if let Some(slot) = g.get_mut(o.agent) {
                if let Some(a) = o.alpha {
                    slot.0 = a;
                }
                if let Some(b) = o.beta {
                    slot.1 = b;
                }
            }
        }
        g
    }

    pub fn agent_sigmas(&self) -> Vec<f64> {
        let mut s = vec![self.trigger.sigma; self.node_count()];
        for o in &self.trigger.overrides {
            if let Some(slot) = s.get_mut(o.agent) {
                *slot = o.sigma;
            }
        }
        s
    }

    /// Checks the schema-level constraints. Unless `allow_unstable_gains` is
    /// set, `α > 0`, `β > 0` and `0 < σ < 1` are required for every agent.
    pub fn validate(&self, allow_unstable_gains: bool) -> Result<()> {
        let n = self.node_count();
        for o in &self.gains.overrides {
            if o.agent >= n {
                return Err(FlockError::NodeOutOfRange {
                    node: o.agent,
                    node_count: n,
                });
            }
        }
        for o in &self.trigger.overrides {
            if o.agent >= n {
                return Err(FlockError::NodeOutOfRange {
                    node: o.agent,
                    node_count: n,
                });
            }
        }
        for (i, (alpha, beta)) in self.agent_gains().into_iter().enumerate() {
            if !(alpha > 0.0) {
                return Err(FlockError::InvalidParameter(format!(
                    "agent {i}: alpha = {alpha} must be positive"
                )));
            }
            if !(beta > 0.0) {
                return Err(FlockError::InvalidParameter(format!(
                    "agent {i}: beta = {beta} violates the stability condition beta > 0"
                )));
            }
        }
        for (i, sigma) in self.agent_sigmas().into_iter().enumerate() {
            if !(sigma > 0.0) {
                return Err(FlockError::InvalidParameter(format!(
                    "agent {i}: sigma = {sigma} must be positive"
                )));
            }
            if !(sigma < 1.0) && !allow_unstable_gains {
                return Err(FlockError::InvalidParameter(format!(
                    "agent {i}: sigma = {sigma} violates the stability condition 0 < sigma < 1 \
                     (pass --allow-unstable-gains to run anyway)"
                )));
            }
        }
        if let InitialSpec::Explicit { positions, velocities } = &self.simulation.initial {
            if positions.len() != n || velocities.len() != n {
                return Err(FlockError::InvalidParameter(format!(
                    "explicit initial conditions need {n} positions and velocities, got {} and {}",
                    positions.len(),
                    velocities.len()
                )));
            }
        }
        if let InitialSpec::Random {
            position_extent,
            velocity_extent,
        } = self.simulation.initial
        {
            if !(position_extent > 0.0 && velocity_extent >= 0.0) {
                return Err(FlockError::InvalidParameter(
                    "random initial extents must be positive".into(),
                ));
            }
        }
        self.model()?;
        self.config().validate()?;
        let graph = self.build_graph()?;
        self.flocking_law(&graph)?;
        Ok(())
    }

    pub fn config(&self) -> SimulationConfig {
        let s = &self.simulation;
        SimulationConfig {
            dt: s.dt,
            duration: s.duration,
            seed: s.seed,
            integrator: s.integrator,
            record_stride: s.record_stride,
            parallel: s.parallel,
        }
    }

    pub fn model(&self) -> Result<Model> {
        match self.dynamics.model {
            ModelKind::DoubleIntegrator => Ok(Model::DoubleIntegrator(DoubleIntegrator::new(self.dynamics.dimension)?)),
            ModelKind::UnderwaterVehicle => {
                let spec = self
                    .dynamics
                    .rigid_body
                    .clone()
                    .unwrap_or_else(RigidBodySpec::underwater_paper);
                Ok(Model::Underwater(UnderwaterVehicle::new(spec.params())?))
            }
        }
    }

    pub fn build_graph(&self) -> Result<CommGraph> {
        match &self.graph {
            GraphSpec::Explicit { node_count, edges } => CommGraph::new(*node_count, edges),
            GraphSpec::Random {
                node_count,
                edge_probability,
                seed,
            } => CommGraph::random_connected(*node_count, *edge_probability, seed.unwrap_or(self.simulation.seed)),
        }
    }

    pub fn flocking_law(&self, graph: &CommGraph) -> Result<FlockingLaw> {
        let p = &self.potential;
        let shape = PotentialParams::new(
            p.desired_distance.as_slice().first().copied().unwrap_or(f64::NAN),
            p.cutoff_radius,
            p.inner_gain,
            p.mid_gain,
        )?;
        let potentials = graph
            .edge_specs(p.desired_distance.as_slice())?
            .iter()
            .map(|e| shape.with_distance(e.desired_distance))
            .collect::<Result<Vec<_>>>()?;
        let gains = self
            .agent_gains()
            .into_iter()
            .map(|(a, b)| ControlGains::new(a, b))
            .collect::<Result<Vec<_>>>()?;
        FlockingLaw::new(graph, gains, potentials, self.gains.attitude_damping)
    }

    pub fn initial_states(&self, model: &Model) -> Vec<AgentState> {
        let n = self.node_count();
        let dim = model.spatial_dim();
        let make = |q: Vector3<f64>, v: Vector3<f64>| AgentState::point(q, v);
        match &self.simulation.initial {
            InitialSpec::Explicit { positions, velocities } => positions
                .iter()
                .zip(velocities)
                .map(|(q, v)| make(Vector3::from(*q), Vector3::from(*v)))
                .collect(),
            InitialSpec::Random {
                position_extent,
                velocity_extent,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.simulation.seed);
                rng.set_stream(1);
                let mut sample = |lo: f64, hi: f64| -> Vector3<f64> {
                    Vector3::from_fn(|c, _| {
                        if c < dim {
                            lo + (hi - lo) * rng.random::<f64>()
                        } else {
                            0.0
                        }
                    })
                };
                (0..n)
                    .map(|_| {
                        let q = sample(0.0, *position_extent);
                        let v = sample(-velocity_extent, *velocity_extent);
                        make(q, v)
                    })
                    .collect()
            }
        }
    }

    /// Validates and assembles the world.
    pub fn prepare(&self, allow_unstable_gains: bool) -> Result<Prepared> {
        self.validate(allow_unstable_gains)?;
        let model = self.model()?;
        let graph = self.build_graph()?;
        let law = self.flocking_law(&graph)?;
        let initial = self.initial_states(&model);
        let config = self.config();
        let world = World::new(model, graph, law, &self.agent_sigmas(), initial, &config)?;
        Ok(Prepared { world, config })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn underwater_preset_values() {
        let s = Scenario::preset("underwater_paper").unwrap();
        assert_eq!(s.node_count(), 50);
        assert_eq!(s.gains.beta, 10.0);
        assert_eq!(s.trigger.sigma, 0.01);
        assert_eq!(s.potential.desired_distance, Distances::Uniform(0.5));
        assert_eq!(s.potential.cutoff_radius, 1.0);
        assert!(s.validate(false).is_ok());
        assert!(Scenario::preset("nope").is_err());
    }

    #[test]
    fn emitted_presets_round_trip() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
            assert_eq!(back, s);
            back.validate(false).unwrap();
        }
    }

    #[test]
    fn sigma_outside_stability_bound_is_rejected_unless_allowed() {
        let mut s = Scenario::double_integrator();
        s.trigger.sigma = 1.5;
        let err = s.validate(false).unwrap_err().to_string();
        assert!(err.contains("0 < sigma < 1"), "{err}");
        assert!(s.validate(true).is_ok());
        s.gains.beta = -1.0;
        assert!(s.validate(true).is_err());
    }

    #[test]
    fn overrides_apply_per_agent() {
        let mut s = Scenario::double_integrator();
        s.gains.overrides.push(GainOverride {
            agent: 3,
            alpha: Some(2.0),
            beta: None,
        });
        s.trigger.overrides.push(SigmaOverride { agent: 4, sigma: 0.3 });
        assert_eq!(s.agent_gains()[3], (2.0, 1.0));
        assert_eq!(s.agent_sigmas()[4], 0.3);
        s.trigger.overrides.push(SigmaOverride { agent: 10, sigma: 0.3 });
        assert!(s.validate(false).is_err());
    }

    #[test]
    fn explicit_scenario_from_text() {
        let text = r#"
            [graph]
            kind = "explicit"
            node_count = 2
            edges = [[0, 1]]

            [dynamics]
            model = "double_integrator"
            dimension = 1

            [gains]
            beta = 2.0

            [potential]
            desired_distance = [0.5]

            [trigger]
            sigma = 0.2

            [simulation]
            dt = 0.001
            duration = 1.0
            integrator = "semi-implicit-euler"

            [simulation.initial]
            kind = "explicit"
            positions = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]
            velocities = [[0.1, 0.0, 0.0], [0.1, 0.0, 0.0]]
        "#;
        let s = Scenario::from_toml_str(text).unwrap();
        assert_eq!(s.gains.alpha, 1.0);
        assert_eq!(s.simulation.integrator, Integrator::SemiImplicitEuler);
        let p = s.prepare(false).unwrap();
        assert_eq!(p.world.states().len(), 2);
        assert!(Scenario::from_toml_str("[graph]\nkind = \"bogus\"").is_err());
    }

    #[test]
    fn random_initial_conditions_are_seeded_and_dimensioned() {
        let mut s = Scenario::double_integrator();
        s.dynamics.dimension = 2;
        let m = s.model().unwrap();
        let a = s.initial_states(&m);
        assert_eq!(a, s.initial_states(&m));
        assert!(a.iter().all(|x| x.position.z == 0.0 && x.velocity.z == 0.0));
        assert!(a.iter().all(|x| (0.0..=2.0).contains(&x.position.x)));
        assert_ne!(a, s.clone().with_seed(2).initial_states(&m));
    }
}

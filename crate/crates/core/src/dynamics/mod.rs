//! Euler-Lagrange agent plants `M(q) q̈ + C(q, q̇) q̇ = g(q) + F`.
//!
//! Two concrete models are provided: the unit-mass double integrator and a
//! fully actuated underwater vehicle evolving on SE(3). Both share one state
//! layout, [`AgentState`]: point masses keep an identity attitude and zero
//! angular velocity, and their `velocity` is the inertial velocity.

pub mod so3;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};
pub use so3::hat;

/// Standard gravitational acceleration (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Bounds certifying the mass-matrix and Coriolis properties of a model:
/// `mass_lower_bound · I ≤ M ≤ mass_upper_bound · I` and `‖C(q, q̇)‖ ≤ coriolis_gain · ‖q̇‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsDescriptor {
    pub config_dim: usize,
    pub mass_lower_bound: f64,
    pub mass_upper_bound: f64,
    pub coriolis_gain: f64,
}

/// Configuration and velocity of one agent.
///
/// For the rigid-body model `attitude` is `R ∈ SO(3)`, `position` is the
/// inertial centre of mass `b`, and the velocities are body-frame `(Ω, ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub attitude: Matrix3<f64>,
    pub position: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl AgentState {
    pub fn point(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        AgentState {
            attitude: Matrix3::identity(),
            position,
            angular_velocity: Vector3::zeros(),
            velocity,
        }
    }

    pub fn rigid(
        attitude: Matrix3<f64>,
        position: Vector3<f64>,
        angular_velocity: Vector3<f64>,
        body_velocity: Vector3<f64>,
    ) -> Self {
        AgentState {
            attitude,
            position,
            angular_velocity,
            velocity: body_velocity,
        }
    }

    /// Translational velocity in the inertial frame, `ḃ = R ν`.
    pub fn inertial_velocity(&self) -> Vector3<f64> {
        self.attitude * self.velocity
    }
}

/// Time derivative of an [`AgentState`]. The attitude rate is carried as the
/// body angular velocity, `Ṙ = R hat(attitude_rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    pub attitude_rate: Vector3<f64>,
    pub position_rate: Vector3<f64>,
    pub angular_acceleration: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Actuator inputs. For the rigid body `force` is the body-frame `u` and
/// `torque` is `ū`; point masses ignore `torque`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Actuation {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

/// Unit-mass double integrator in `dim` ≤ 3 dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleIntegrator {
    dim: usize,
}

impl DoubleIntegrator {
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(FlockError::InvalidParameter(format!(
                "double integrator dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        Ok(DoubleIntegrator { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Physical parameters of one underwater vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyParams {
    /// Translational mass matrix including added mass (kg).
    pub mass_matrix: Matrix3<f64>,
    /// Rotational inertia (kg·m²).
    pub inertia: Matrix3<f64>,
    /// `ρ γ̄ g` (N).
    pub buoyancy_force: f64,
    /// `m g` (N).
    pub weight: f64,
    /// Centre of gravity to centre of buoyancy, body frame (m).
    pub buoyancy_offset: Vector3<f64>,
}

impl RigidBodyParams {
    /// The 123.8 kg vehicle with added masses diag(65, 70, 75) kg.
    pub fn underwater_paper() -> Self {
        let mass = 123.8;
        RigidBodyParams {
            mass_matrix: Matrix3::identity() * mass + Matrix3::from_diagonal(&Vector3::new(65.0, 70.0, 75.0)),
            inertia: Matrix3::from_diagonal(&Vector3::new(5.46, 5.29, 5.72)),
            buoyancy_force: 1215.8,
            weight: mass * STANDARD_GRAVITY,
            buoyancy_offset: Vector3::new(0.0, 0.0, -0.007),
        }
    }

    /// Net downward force `(m - ρ γ̄) g` (N); the positive z axis points down.
    pub fn net_weight(&self) -> f64 {
        self.weight - self.buoyancy_force
    }
}

/// Fully actuated rigid body on SE(3) with gravity and buoyancy and no hydrodynamic damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnderwaterVehicle {
    params: RigidBodyParams,
    mass_inv: Matrix3<f64>,
    inertia_inv: Matrix3<f64>,
    descriptor: DynamicsDescriptor,
}

impl UnderwaterVehicle {
    pub fn new(params: RigidBodyParams) -> Result<Self> {
        let spd_eigen = |m: &Matrix3<f64>, name: &str| -> Result<Vector3<f64>> {
            if (m - m.transpose()).norm() > 1e-12 * m.norm() {
                return Err(FlockError::InvalidParameter(format!("{name} must be symmetric")));
            }
            let e = m.symmetric_eigenvalues();
            if e.min() <= 0.0 {
                return Err(FlockError::SingularMassMatrix);
            }
            Ok(e)
        };
        let em = spd_eigen(&params.mass_matrix, "mass matrix")?;
        let ej = spd_eigen(&params.inertia, "inertia")?;
        let mass_inv = params
            .mass_matrix
            .cholesky()
            .ok_or(FlockError::SingularMassMatrix)?
            .inverse();
        let inertia_inv = params
            .inertia
            .cholesky()
            .ok_or(FlockError::SingularMassMatrix)?
            .inverse();
        let descriptor = DynamicsDescriptor {
            config_dim: 6,
            mass_lower_bound: em.min().min(ej.min()),
            mass_upper_bound: em.max().max(ej.max()),
            coriolis_gain: 2.0 * em.max() + ej.max(),
        };
        Ok(UnderwaterVehicle {
            params,
            mass_inv,
            inertia_inv,
            descriptor,
        })
    }

    pub fn params(&self) -> &RigidBodyParams {
        &self.params
    }

    /// `U = ρ γ̄ g ⟨r̄, Rᵀ e₃⟩ + (ρ γ̄ - m) g b_z` (J).
    pub fn potential_energy(&self, attitude: &Matrix3<f64>, position: &Vector3<f64>) -> f64 {
        let p = &self.params;
        let up = attitude.transpose() * Vector3::z();
        p.buoyancy_force * p.buoyancy_offset.dot(&up) - p.net_weight() * position.z
    }

    /// Body-frame restoring torque `-ρ γ̄ g r̄ × (Rᵀ e₃)`.
    pub fn restoring_torque(&self, attitude: &Matrix3<f64>) -> Vector3<f64> {
        let p = &self.params;
        -p.buoyancy_offset.cross(&(attitude.transpose() * Vector3::z())) * p.buoyancy_force
    }

    /// Body-frame gravity-plus-buoyancy force `Rᵀ (m - ρ γ̄) g e₃`.
    pub fn net_body_force(&self, attitude: &Matrix3<f64>) -> Vector3<f64> {
        attitude.transpose() * Vector3::z() * self.params.net_weight()
    }

    fn derivative(&self, s: &AgentState, act: &Actuation) -> StateRate {
        let p = &self.params;
        let (omega, nu) = (&s.angular_velocity, &s.velocity);
        let m_nu = p.mass_matrix * nu;
        let j_omega = p.inertia * omega;
        let acceleration = self.mass_inv * (m_nu.cross(omega) + self.net_body_force(&s.attitude) + act.force);
        let angular_acceleration = self.inertia_inv
            * (j_omega.cross(omega) + m_nu.cross(nu) + self.restoring_torque(&s.attitude) + act.torque);
        StateRate {
            attitude_rate: *omega,
            position_rate: s.attitude * nu,
            angular_acceleration,
            acceleration,
        }
    }

    /// Rate of the inertial translational mass `R M Rᵀ`: `R (Ω̂ M - M Ω̂) Rᵀ`.
    fn translational_mass_rate(&self, s: &AgentState) -> Matrix3<f64> {
        let m = &self.params.mass_matrix;
        let w = hat(&s.angular_velocity);
        s.attitude * (w * m - m * w) * s.attitude.transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    DoubleIntegrator(DoubleIntegrator),
    Underwater(UnderwaterVehicle),
}

impl Model {
    pub fn descriptor(&self) -> DynamicsDescriptor {
        match self {
            Model::DoubleIntegrator(di) => DynamicsDescriptor {
                config_dim: di.dim,
                mass_lower_bound: 1.0,
                mass_upper_bound: 1.0,
                coriolis_gain: 0.0,
            },
            Model::Underwater(uv) => uv.descriptor,
        }
    }

    /// Dimension of the translational (flocking) coordinates.
    pub fn spatial_dim(&self) -> usize {
        match self {
            Model::DoubleIntegrator(di) => di.dim,
            Model::Underwater(_) => 3,
        }
    }

    pub fn is_rigid_body(&self) -> bool {
        matches!(self, Model::Underwater(_))
    }

    /// Rejects states that do not fit the model (unused point-mass
    /// coordinates set, or a rotation off SO(3)).
    pub fn validate_state(&self, s: &AgentState) -> Result<()> {
        match self {
            Model::DoubleIntegrator(di) => {
                let used = (0..3).filter(|&c| s.position[c] != 0.0 || s.velocity[c] != 0.0);
                if let Some(extra) = used.filter(|&c| c >= di.dim).max() {
                    return Err(FlockError::DimensionMismatch {
                        expected: di.dim,
                        actual: extra + 1,
                    });
                }
                if s.attitude != Matrix3::identity() || s.angular_velocity != Vector3::zeros() {
                    return Err(FlockError::InvalidParameter(
                        "point-mass states carry no attitude".into(),
                    ));
                }
                Ok(())
            }
            Model::Underwater(_) => {
                let err = so3::orthonormality_error(&s.attitude);
                if err > 1e-6 || s.attitude.determinant() < 0.0 {
                    return Err(FlockError::InvalidParameter(format!(
                        "attitude is not a rotation (‖RᵀR - I‖ = {err:e})"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Generalized velocity: `q̇` for point masses, `(Ω, ḃ)` for the rigid body.
    pub fn generalized_velocity(&self, s: &AgentState) -> DVector<f64> {
        match self {
            Model::DoubleIntegrator(di) => DVector::from_column_slice(&s.velocity.as_slice()[..di.dim]),
            Model::Underwater(_) => {
                let v = s.inertial_velocity();
                DVector::from_iterator(6, s.angular_velocity.iter().chain(v.iter()).copied())
            }
        }
    }

    pub fn mass_matrix(&self, s: &AgentState) -> DMatrix<f64> {
        match self {
            Model::DoubleIntegrator(di) => DMatrix::identity(di.dim, di.dim),
            Model::Underwater(uv) => {
                let mut m = DMatrix::zeros(6, 6);
                m.fixed_view_mut::<3, 3>(0, 0).copy_from(&uv.params.inertia);
                m.fixed_view_mut::<3, 3>(3, 3)
                    .copy_from(&(s.attitude * uv.params.mass_matrix * s.attitude.transpose()));
                m
            }
        }
    }

    /// Coriolis matrix chosen so that `Ṁ - 2C` is skew-symmetric.
    pub fn coriolis_matrix(&self, s: &AgentState) -> DMatrix<f64> {
        match self {
            Model::DoubleIntegrator(di) => DMatrix::zeros(di.dim, di.dim),
            Model::Underwater(uv) => {
                let p = &uv.params;
                let (omega, nu) = (&s.angular_velocity, &s.velocity);
                let m_nu = p.mass_matrix * nu;
                let cross_block = (hat(nu) * p.mass_matrix - hat(&m_nu)) * s.attitude.transpose() * 0.5;
                let mut c = DMatrix::zeros(6, 6);
                c.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-hat(&(p.inertia * omega))));
                c.fixed_view_mut::<3, 3>(0, 3).copy_from(&cross_block);
                c.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-cross_block.transpose()));
                c.fixed_view_mut::<3, 3>(3, 3)
                    .copy_from(&(uv.translational_mass_rate(s) * 0.5));
                c
            }
        }
    }

    /// Conservative generalized force `∂L/∂q = -∂U/∂q`.
    pub fn gravity_term(&self, s: &AgentState) -> DVector<f64> {
        match self {
            Model::DoubleIntegrator(di) => DVector::zeros(di.dim),
            Model::Underwater(uv) => {
                let torque = uv.restoring_torque(&s.attitude);
                let force = Vector3::z() * uv.params.net_weight();
                DVector::from_iterator(6, torque.iter().chain(force.iter()).copied())
            }
        }
    }

    /// Kinetic energy `½ q̇ᵀ M q̇` (rigid body: `½ (Ωᵀ J Ω + νᵀ M ν)`).
    pub fn kinetic_energy(&self, s: &AgentState) -> f64 {
        match self {
            Model::DoubleIntegrator(_) => 0.5 * s.velocity.norm_squared(),
            Model::Underwater(uv) => {
                let p = &uv.params;
                0.5 * (s.angular_velocity.dot(&(p.inertia * s.angular_velocity))
                    + s.velocity.dot(&(p.mass_matrix * s.velocity)))
            }
        }
    }

    /// Gravity/buoyancy potential energy (zero for point masses).
    pub fn potential_energy(&self, s: &AgentState) -> f64 {
        match self {
            Model::DoubleIntegrator(_) => 0.0,
            Model::Underwater(uv) => uv.potential_energy(&s.attitude, &s.position),
        }
    }

    /// Plant right-hand side for the given actuation.
    pub fn derivative(&self, s: &AgentState, act: &Actuation) -> StateRate {
        match self {
            Model::DoubleIntegrator(_) => StateRate {
                attitude_rate: Vector3::zeros(),
                position_rate: s.velocity,
                angular_acceleration: Vector3::zeros(),
                acceleration: act.force,
            },
            Model::Underwater(uv) => uv.derivative(s, act),
        }
    }
}

//! One-step integrators over a slice of agent states.
//!
//! `rates` maps a full snapshot to the per-agent derivatives, so couplings
//! between agents are re-evaluated at every stage.

use nalgebra::{Matrix3, Vector3};

use crate::dynamics::so3::{self, REORTHONORMALIZE_THRESHOLD};
use crate::dynamics::{AgentState, StateRate};
use crate::error::Result;

/// Fourth-order Runge-Kutta–Munthe-Kaas step; translational coordinates use
/// classical RK4 and attitudes are advanced as `R exp(hat(θ))`.
pub fn rkmk4_step<F>(base: &[AgentState], h: f64, mut rates: F) -> Result<Vec<AgentState>>
where
    F: FnMut(&[AgentState]) -> Result<Vec<StateRate>>,
{
    let stage = |theta: &[Vector3<f64>], incr: &[Increment]| -> Vec<AgentState> {
        base.iter()
            .zip(theta.iter().zip(incr))
            .map(|(s, (th, d))| AgentState {
                attitude: rotate(&s.attitude, th),
                position: s.position + d.position,
                angular_velocity: s.angular_velocity + d.angular_velocity,
                velocity: s.velocity + d.velocity,
            })
            .collect()
    };
    let scaled = |k: &[StateRate], c: f64| -> Vec<Increment> { k.iter().map(|r| Increment::from_rate(r, c)).collect() };
    // Lie-algebra stage slopes dexp⁻¹_θ(Ω) for the attitude.
    let slopes = |theta: &[Vector3<f64>], k: &[StateRate]| -> Vec<Vector3<f64>> {
        theta
            .iter()
            .zip(k)
            .map(|(th, r)| so3::dexp_inv(th, &r.attitude_rate))
            .collect()
    };
    let times = |w: &[Vector3<f64>], c: f64| -> Vec<Vector3<f64>> { w.iter().map(|x| x * c).collect() };

    let k1 = rates(base)?;
    let w1: Vec<Vector3<f64>> = k1.iter().map(|r| r.attitude_rate).collect();

    let th2 = times(&w1, 0.5 * h);
    let k2 = rates(&stage(&th2, &scaled(&k1, 0.5 * h)))?;
    let w2 = slopes(&th2, &k2);

    let th3 = times(&w2, 0.5 * h);
    let k3 = rates(&stage(&th3, &scaled(&k2, 0.5 * h)))?;
    let w3 = slopes(&th3, &k3);

    let th4 = times(&w3, h);
    let k4 = rates(&stage(&th4, &scaled(&k3, h)))?;
    let w4 = slopes(&th4, &k4);

    let sixth = h / 6.0;
    let theta: Vec<Vector3<f64>> = (0..base.len())
        .map(|i| (w1[i] + w2[i] * 2.0 + w3[i] * 2.0 + w4[i]) * sixth)
        .collect();
    let incr: Vec<Increment> = (0..base.len())
        .map(|i| {
            let (a, b, c, d) = (
                Increment::from_rate(&k1[i], 1.0),
                Increment::from_rate(&k2[i], 2.0),
                Increment::from_rate(&k3[i], 2.0),
                Increment::from_rate(&k4[i], 1.0),
            );
            Increment {
                position: (a.position + b.position + c.position + d.position) * sixth,
                angular_velocity: (a.angular_velocity + b.angular_velocity + c.angular_velocity + d.angular_velocity)
                    * sixth,
                velocity: (a.velocity + b.velocity + c.velocity + d.velocity) * sixth,
            }
        })
        .collect();
    Ok(stage(&theta, &incr))
}

/// Symplectic Euler: velocities first, then configuration with the new velocities.
pub fn semi_implicit_euler_step(base: &[AgentState], rates: &[StateRate], h: f64) -> Vec<AgentState> {
    base.iter()
        .zip(rates)
        .map(|(s, r)| {
            let angular_velocity = s.angular_velocity + r.angular_acceleration * h;
            let velocity = s.velocity + r.acceleration * h;
            let attitude = rotate(&s.attitude, &(angular_velocity * h));
            AgentState {
                attitude,
                position: s.position + attitude * velocity * h,
                angular_velocity,
                velocity,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Increment {
    position: Vector3<f64>,
    angular_velocity: Vector3<f64>,
    velocity: Vector3<f64>,
}

impl Increment {
    fn from_rate(r: &StateRate, c: f64) -> Self {
        Increment {
            position: r.position_rate * c,
            angular_velocity: r.angular_acceleration * c,
            velocity: r.acceleration * c,
        }
    }
}

fn rotate(r: &Matrix3<f64>, theta: &Vector3<f64>) -> Matrix3<f64> {
    if *theta == Vector3::zeros() {
        return *r;
    }
    let next = r * so3::exp(theta);
    if so3::orthonormality_error(&next) > REORTHONORMALIZE_THRESHOLD {
        so3::project_to_so3(&next)
    } else {
        next
    }
}

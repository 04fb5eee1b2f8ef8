//! Rotation-group helpers used by the rigid-body model and its integrator.

use nalgebra::{Matrix3, Vector3};

/// Frobenius drift of `RᵀR` from identity above which the attitude is projected back onto SO(3).
pub const REORTHONORMALIZE_THRESHOLD: f64 = 1e-9;

/// Skew-symmetric matrix with `hat(w) * v == w.cross(&v)`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] for a skew-symmetric argument.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Matrix exponential of `hat(w)` (Rodrigues).
pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = hat(w);
    let (a, b) = if theta2 < 1e-12 {
        // Taylor series of sin(θ)/θ and (1 - cos θ)/θ².
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Truncated inverse of the right-trivialized exponential differential: for
/// `R = R₀ exp(hat(θ))` with body rate `ω`, `θ̇ ≈ ω + ½ θ×ω + (1/12) θ×(θ×ω)`.
/// The truncation is enough for fourth-order Munthe-Kaas Runge-Kutta stages.
pub fn dexp_inv(theta: &Vector3<f64>, omega: &Vector3<f64>) -> Vector3<f64> {
    let c = theta.cross(omega);
    omega + c * 0.5 + theta.cross(&c) / 12.0
}

/// `‖RᵀR - I‖_F`.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Closest rotation to `r` in the Frobenius sense (polar factor).
pub fn project_to_so3(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut p = u * v_t;
    if p.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        p = u * v_t;
    }
    p
}

//! Pairwise artificial potential `V_ij(‖z_k‖)`.
//!
//! The gradient is piecewise:
//!
//! ```text
//!            ⎧ 0                                   r > R
//! ∇V(z)  =   ⎨ a · sin(ω (r - d)) · z / r          d < r ≤ R
//!            ⎩ c · (r - d) / r · z / r             r ≤ d
//! ```
//!
//! with `r = ‖z‖`, inner gain `c` (20 by default), mid gain `a` (2π by default)
//! and `ω = π / (R - d)`, which equals 2π for `d = 0.5`, `R = 1` and keeps the
//! gradient continuous at `R` for any `d < R`. Values are the antiderivative
//! normalized to `V(d) = 0`:
//!
//! ```text
//! V(r) = c ((r - d) - d ln(r / d))        r ≤ d
//! V(r) = (a / ω) (1 - cos(ω (r - d)))     d < r ≤ R
//! V(r) = 2 a / ω                          r > R
//! ```

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{FlockError, Result};

/// Separations below this (m) are treated as collisions.
pub const ZERO_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub desired_distance: f64,
    pub cutoff_radius: f64,
    pub inner_gain: f64,
    pub mid_gain: f64,
}

impl PotentialParams {
    pub fn new(desired_distance: f64, cutoff_radius: f64, inner_gain: f64, mid_gain: f64) -> Result<Self> {
        let p = PotentialParams {
            desired_distance,
            cutoff_radius,
            inner_gain,
            mid_gain,
        };
        p.validate()?;
        Ok(p)
    }

    /// The reference potential: `R = 1`, gains 20 and 2π.
    pub fn standard(desired_distance: f64) -> Result<Self> {
        Self::new(desired_distance, 1.0, 20.0, TAU)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.desired_distance > 0.0 && self.desired_distance < self.cutoff_radius) {
            return Err(FlockError::InvalidParameter(format!(
                "potential requires 0 < d ({}) < R ({})",
                self.desired_distance, self.cutoff_radius
            )));
        }
        if !(self.inner_gain > 0.0 && self.mid_gain > 0.0) {
            return Err(FlockError::InvalidParameter("potential gains must be positive".into()));
        }
        Ok(())
    }

    /// Same shape with another desired distance (per-edge `d_k`).
    pub fn with_distance(&self, desired_distance: f64) -> Result<Self> {
        Self::new(desired_distance, self.cutoff_radius, self.inner_gain, self.mid_gain)
    }

    fn frequency(&self) -> f64 {
        PI / (self.cutoff_radius - self.desired_distance)
    }

    /// `dV/dr` at separation `r > 0`.
    pub fn radial_derivative(&self, r: f64) -> f64 {
        let d = self.desired_distance;
        if r > self.cutoff_radius {
            0.0
        } else if r > d {
            self.mid_gain * (self.frequency() * (r - d)).sin()
        } else {
            self.inner_gain * (r - d) / r
        }
    }

    /// `V(r)` at separation `r`.
    pub fn value_at(&self, r: f64) -> Result<f64> {
        check_separation(r)?;
        let d = self.desired_distance;
        let w = self.frequency();
        Ok(if r > self.cutoff_radius {
            2.0 * self.mid_gain / w
        } else if r > d {
            self.mid_gain / w * (1.0 - (w * (r - d)).cos())
        } else {
            self.inner_gain * ((r - d) - d * (r / d).ln())
        })
    }

    /// `V_ij` for edge vector `z`.
    pub fn value(&self, z: &Vector3<f64>) -> Result<f64> {
        self.value_at(z.norm())
    }

    /// `∇_{q_i} V_ij` for edge vector `z = q_i - q_j`.
    pub fn gradient(&self, z: &Vector3<f64>) -> Result<Vector3<f64>> {
        let r = z.norm();
        check_separation(r)?;
        if r > self.cutoff_radius {
            return Ok(Vector3::zeros());
        }
        Ok(z * (self.radial_derivative(r) / r))
    }
}

fn check_separation(r: f64) -> Result<()> {
    if !(r >= ZERO_SEPARATION) {
        return Err(FlockError::ZeroSeparation {
            edge: None,
            distance: r,
        });
    }
    Ok(())
}

/// Outcome of [`check_properties`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    /// Value at the smallest sampled separation.
    pub value_at_min_radius: f64,
    /// Increase of `V` over the last sampled decade towards zero separation.
    pub divergence_per_decade: f64,
    /// Location of the minimum over `(0, R]`.
    pub minimum_at: f64,
    /// `sup |∇V|` over sampled separations beyond `R`.
    pub far_gradient_bound: f64,
}

/// Samples separations on a log grid over `(1e-6, 1e3]` and checks that the
/// value diverges at zero separation, has a unique minimum at `d` on `(0, R]`,
/// and has a bounded gradient far away.
pub fn check_properties(params: &PotentialParams) -> Result<PropertyReport> {
    params.validate()?;
    const POINTS_PER_DECADE: usize = 200;
    let (lo, hi) = (1e-6f64, 1e3f64);
    let decades = (hi / lo).log10().round() as usize;
    let n = decades * POINTS_PER_DECADE;
    let grid: Vec<f64> = (0..=n)
        .map(|k| lo * 10f64.powf(k as f64 / POINTS_PER_DECADE as f64))
        .collect();
    let d = params.desired_distance;
    let big_r = params.cutoff_radius;

    // Divergence at zero separation: V strictly decreasing on (0, d) and the
    // per-decade increase near zero not decaying.
    let inner: Vec<f64> = grid.iter().copied().filter(|&r| r < d).collect();
    let inner_v: Vec<f64> = inner.iter().map(|&r| params.value_at(r)).collect::<Result<_>>()?;
    if inner_v.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FlockError::PropertyViolation {
            property: "V1",
            detail: "value is not strictly decreasing towards zero separation".into(),
        });
    }
    let v = |r: f64| params.value_at(r);
    let last = v(lo)? - v(lo * 10.0)?;
    let previous = v(lo * 10.0)? - v(lo * 100.0)?;
    if !(last > 0.0 && last >= 0.5 * previous) {
        return Err(FlockError::PropertyViolation {
            property: "V1",
            detail: format!("value saturates near zero separation (last decade +{last}, previous +{previous})"),
        });
    }

    // Unique minimum at d on (0, R].
    let v_min = v(d)?;
    for &r in grid.iter().filter(|&&r| r <= big_r && r != d) {
        let vr = v(r)?;
        if vr <= v_min {
            return Err(FlockError::PropertyViolation {
                property: "V2",
                detail: format!("V({r}) = {vr} does not exceed V(d) = {v_min}"),
            });
        }
    }
    if v_min < 0.0 || grid.iter().any(|&r| v(r).map_or(true, |x| x < 0.0)) {
        return Err(FlockError::PropertyViolation {
            property: "V2",
            detail: "potential takes negative values".into(),
        });
    }

    // Bounded gradient as separation grows.
    let far: Vec<f64> = grid
        .iter()
        .filter(|&&r| r > big_r)
        .map(|&r| params.radial_derivative(r).abs())
        .collect();
    let bound = far.iter().copied().fold(0.0, f64::max);
    let tail = grid
        .iter()
        .filter(|&&r| r >= hi / 10.0)
        .map(|&r| params.radial_derivative(r).abs())
        .fold(0.0, f64::max);
    let body = grid
        .iter()
        .filter(|&&r| r > big_r && r < hi / 10.0)
        .map(|&r| params.radial_derivative(r).abs())
        .fold(0.0, f64::max);
    if !bound.is_finite() || tail > body * (1.0 + 1e-9) + f64::EPSILON {
        return Err(FlockError::PropertyViolation {
            property: "V3",
            detail: format!("gradient grows with separation (tail {tail}, body {body})"),
        });
    }

    Ok(PropertyReport {
        value_at_min_radius: v(lo)?,
        divergence_per_decade: last,
        minimum_at: d,
        far_gradient_bound: bound,
    })
}

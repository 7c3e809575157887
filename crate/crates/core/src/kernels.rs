//! Radial convolution kernels with compact support.
//!
//! The profile is a cosine bump `peak * (1 + cos(pi r / R)) / 2` on
//! `r <= R`: even, nonnegative, continuously differentiable and exactly
//! zero outside the support radius.

use crate::error::{AngioError, Result};
use crate::geom::{norm, Vect};
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    pub support_radius: f64,
    /// Value at the origin.
    pub peak: f64,
}

impl Kernel {
    pub fn cosine_bump(support_radius: f64, peak: f64) -> Result<Self> {
        if !(support_radius > 0.0) {
            return Err(AngioError::InvalidParameter(format!(
                "kernel support radius > 0 violated (got {support_radius})"
            )));
        }
        if !(peak >= 0.0) {
            return Err(AngioError::InvalidParameter(format!(
                "kernel peak >= 0 violated (got {peak})"
            )));
        }
        Ok(Kernel { support_radius, peak })
    }

    /// Radial profile at distance `r >= 0`.
    #[inline]
    pub fn eval_r(&self, r: f64) -> f64 {
        if r >= self.support_radius {
            0.0
        } else {
            self.peak * 0.5 * (1.0 + (PI * r / self.support_radius).cos())
        }
    }

    #[inline]
    pub fn eval(&self, x: &Vect) -> f64 {
        self.eval_r(norm(x))
    }

    /// Radial derivative; its maximum magnitude `peak * pi / (2R)` is a
    /// Lipschitz constant for the kernel.
    #[inline]
    pub fn deriv_r(&self, r: f64) -> f64 {
        if r >= self.support_radius {
            0.0
        } else {
            -self.peak * PI / (2.0 * self.support_radius) * (PI * r / self.support_radius).sin()
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.peak * PI / (2.0 * self.support_radius)
    }

    /// Integral over R^dim, in closed form.
    pub fn mass(&self, dim: usize) -> f64 {
        let r = self.support_radius;
        match dim {
            1 => self.peak * r,
            2 => self.peak * r * r * (PI / 2.0 - 2.0 / PI),
            3 => self.peak * 2.0 * PI * r.powi(3) * (1.0 / 3.0 - 2.0 / (PI * PI)),
            _ => f64::NAN,
        }
    }
}

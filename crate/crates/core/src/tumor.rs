//! Mollified indicator of the tumoral region.
//!
//! The region is an axis-aligned box; each axis contributes a C^1 cosine
//! ramp of the configured width at the two faces, so the indicator is
//! smooth, lies in [0, 1], equals 1 in the core of the box and vanishes
//! outside it.

use crate::error::{AngioError, Result};
use crate::geom::Vect;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct TumorIndicator {
    pub lo: Vect,
    pub hi: Vect,
    pub mollify_width: f64,
    pub dim: usize,
}

#[inline]
fn ramp(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (PI * u).cos())
    }
}

impl TumorIndicator {
    pub fn new(lo: Vect, hi: Vect, mollify_width: f64, dim: usize) -> Result<Self> {
        if !(mollify_width > 0.0) {
            return Err(AngioError::InvalidParameter(format!(
                "tumor mollification width > 0 violated (got {mollify_width})"
            )));
        }
        for k in 0..dim {
            if !(hi[k] > lo[k]) {
                return Err(AngioError::InvalidParameter(format!(
                    "tumor box hi > lo violated on axis {k} ({} vs {})",
                    hi[k], lo[k]
                )));
            }
        }
        Ok(TumorIndicator { lo, hi, mollify_width, dim })
    }

    #[inline]
    fn axis_factor(&self, k: usize, x: f64) -> f64 {
        let w = self.mollify_width;
        ramp((x - self.lo[k]) / w) * ramp((self.hi[k] - x) / w)
    }

    pub fn eval(&self, x: &Vect) -> f64 {
        let mut prod = 1.0;
        for k in 0..self.dim {
            prod *= self.axis_factor(k, x[k]);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }

    /// Supremum of the indicator; 1 when the box is wider than twice the
    /// mollification width on every axis, smaller otherwise.
    pub fn sup_norm(&self) -> f64 {
        let mut prod = 1.0;
        for k in 0..self.dim {
            let mid = 0.5 * (self.lo[k] + self.hi[k]);
            prod *= self.axis_factor(k, mid);
        }
        prod
    }
}

//! Uniform cell-centered rectangular grids in 1, 2 or 3 dimensions.

use crate::error::{AngioError, Result};
use crate::geom::Vect;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dim: usize,
    /// Lower corner of the covered box.
    pub lo: [f64; 3],
    /// Cell size, identical along all axes.
    pub spacing: f64,
    /// Cells per axis; unused axes hold 1.
    pub shape: [usize; 3],
}

impl GridGeometry {
    /// Build a grid covering `[lo, hi]` with the requested spacing; the box
    /// is widened to a whole number of cells.
    pub fn cover(lo: &Vect, hi: &Vect, spacing: f64, dim: usize) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(AngioError::InvalidParameter(format!("grid spacing > 0 violated (got {spacing})")));
        }
        let mut shape = [1usize; 3];
        let mut glo = [0.0; 3];
        for k in 0..dim {
            if !(hi[k] > lo[k]) {
                return Err(AngioError::InvalidParameter(format!(
                    "grid box hi > lo violated on axis {k} ({} vs {})",
                    hi[k], lo[k]
                )));
            }
            let n = ((hi[k] - lo[k]) / spacing).round().max(1.0) as usize;
            shape[k] = n.max(2);
            glo[k] = lo[k];
        }
        Ok(GridGeometry { dim, lo: glo, spacing, shape })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1] * self.shape[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Position of the first cell center.
    pub fn origin(&self) -> Vect {
        let mut o = [0.0; 3];
        for k in 0..self.dim {
            o[k] = self.lo[k] + 0.5 * self.spacing;
        }
        o
    }

    pub fn hi(&self) -> Vect {
        let mut h = [0.0; 3];
        for k in 0..self.dim {
            h[k] = self.lo[k] + self.shape[k] as f64 * self.spacing;
        }
        h
    }

    #[inline]
    pub fn flat(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.shape[1] + idx[1]) * self.shape[0] + idx[0]
    }

    #[inline]
    pub fn unflat(&self, mut i: usize) -> [usize; 3] {
        let i0 = i % self.shape[0];
        i /= self.shape[0];
        let i1 = i % self.shape[1];
        let i2 = i / self.shape[1];
        [i0, i1, i2]
    }

    /// Center of cell `idx`.
    #[inline]
    pub fn center(&self, idx: [usize; 3]) -> Vect {
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = self.lo[k] + (idx[k] as f64 + 0.5) * self.spacing;
        }
        c
    }

    /// Cell containing `x`, clamped to the grid. The second return flags
    /// whether clamping occurred.
    pub fn locate_clamped(&self, x: &Vect) -> ([usize; 3], bool) {
        let mut idx = [0usize; 3];
        let mut clamped = false;
        for k in 0..self.dim {
            let u = (x[k] - self.lo[k]) / self.spacing;
            let i = u.floor();
            if i < 0.0 {
                idx[k] = 0;
                clamped = true;
            } else if i as usize >= self.shape[k] {
                idx[k] = self.shape[k] - 1;
                clamped = true;
            } else {
                idx[k] = i as usize;
            }
        }
        (idx, clamped)
    }

    /// Iterate all cell indices in flat order.
    pub fn indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.len()).map(move |i| self.unflat(i))
    }

    /// Strides per axis in the flat layout.
    #[inline]
    pub fn strides(&self) -> [usize; 3] {
        [1, self.shape[0], self.shape[0] * self.shape[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cover_and_indexing_round_trip() {
        let g = GridGeometry::cover(&[-1.0, -2.0, 0.0], &[1.0, 2.0, 0.0], 0.5, 2).unwrap();
        assert_eq!(g.shape, [4, 8, 1]);
        assert_eq!(g.len(), 32);
        for i in 0..g.len() {
            assert_eq!(g.flat(g.unflat(i)), i);
        }
        let c = g.center([0, 0, 0]);
        assert!((c[0] - -0.75).abs() < 1e-15);
        let (idx, clamped) = g.locate_clamped(&c);
        assert_eq!(idx, [0, 0, 0]);
        assert!(!clamped);
        let (_, clamped) = g.locate_clamped(&[5.0, 0.0, 0.0]);
        assert!(clamped);
    }
}

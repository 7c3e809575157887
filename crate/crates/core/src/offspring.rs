//! Velocity law of newborn tips.
//!
//! A Gaussian of width `spread * v0` centred at `v0 * mean_direction`,
//! truncated to the ball of radius `trunc_radius` around that centre and
//! renormalized, so the density is smooth, compactly supported and has mean
//! velocity exactly `v0 * mean_direction`. Speeds are capped by
//! `v0 + trunc_radius`.

use crate::error::{AngioError, Result};
use crate::geom::{self, Vect};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct OffspringVelocityLaw {
    pub mean_direction: Vect,
    pub mean_speed: f64,
    /// Dimensionless width; the Gaussian standard deviation is `spread * v0`.
    pub spread: f64,
    /// Truncation radius around the mean velocity.
    pub trunc_radius: f64,
    pub dim: usize,
    /// Density value scale: set so the law integrates to one.
    norm_const: f64,
}

impl OffspringVelocityLaw {
    pub fn new(mean_direction: Vect, mean_speed: f64, spread: f64, trunc_radius: f64, dim: usize) -> Result<Self> {
        if !(mean_speed >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("offspring mean speed >= 0 violated (got {mean_speed})")));
        }
        if !(spread >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("offspring spread >= 0 violated (got {spread})")));
        }
        if !(trunc_radius > 0.0) && spread > 0.0 {
            return Err(AngioError::InvalidParameter(format!(
                "offspring truncation radius > 0 violated (got {trunc_radius})"
            )));
        }
        let mut law = OffspringVelocityLaw {
            mean_direction: geom::unit(&mean_direction, dim),
            mean_speed,
            spread,
            trunc_radius,
            dim,
            norm_const: 1.0,
        };
        if law.std_dev() > 0.0 {
            let raw: f64 = law.quadrature(64, |_, w| w);
            law.norm_const = 1.0 / raw;
        }
        Ok(law)
    }

    #[inline]
    pub fn std_dev(&self) -> f64 {
        self.spread * self.mean_speed
    }

    pub fn mean_velocity(&self) -> Vect {
        geom::scale(&self.mean_direction, self.mean_speed)
    }

    /// Largest speed the law can produce.
    pub fn support_radius(&self) -> f64 {
        if self.std_dev() == 0.0 {
            self.mean_speed
        } else {
            self.mean_speed + self.trunc_radius
        }
    }

    /// Total mass `g0` of the density. The law is normalized at
    /// construction, so this is 1 by design; kept explicit because the
    /// branching rates scale with it.
    pub fn g0(&self) -> f64 {
        1.0
    }

    /// Unnormalized Gaussian shape (before truncation scaling).
    #[inline]
    fn shape(&self, v: &Vect) -> f64 {
        let mu = self.mean_velocity();
        let r2 = geom::dist(v, &mu).powi(2);
        let s2 = self.std_dev().powi(2);
        (-r2 / (2.0 * s2)).exp()
    }

    /// Density value at `v`. For the degenerate `spread = 0` law the density
    /// is a point mass and this returns 0 away from the mean; callers that
    /// need the degenerate case should branch on [`Self::is_degenerate`].
    pub fn density(&self, v: &Vect) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let mu = self.mean_velocity();
        if geom::dist(v, &mu) > self.trunc_radius {
            return 0.0;
        }
        self.norm_const * self.shape(v)
    }

    pub fn is_degenerate(&self) -> bool {
        self.std_dev() == 0.0
    }

    /// Draw one velocity. Rejection from the untruncated Gaussian; the
    /// acceptance region is a ball around the mean so the accepted law is
    /// the truncated Gaussian itself.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vect {
        let mu = self.mean_velocity();
        if self.is_degenerate() {
            return mu;
        }
        let s = self.std_dev();
        loop {
            let mut v = mu;
            for k in 0..self.dim {
                let z: f64 = rng.sample(StandardNormal);
                v[k] += s * z;
            }
            if geom::dist(&v, &mu) <= self.trunc_radius {
                return v;
            }
        }
    }

    /// Midpoint quadrature of `f(v, G(v) dv)` over the support. Used for
    /// normalization, moments and grid projections.
    pub fn quadrature<F: FnMut(&Vect, f64) -> f64>(&self, n_per_dim: usize, mut f: F) -> f64 {
        assert!(!self.is_degenerate());
        let mu = self.mean_velocity();
        let rho = self.trunc_radius;
        let h = 2.0 * rho / n_per_dim as f64;
        let cell = h.powi(self.dim as i32);
        let line: Vec<f64> = (0..n_per_dim).map(|i| -rho + (i as f64 + 0.5) * h).collect();
        let mut total = 0.0;
        let mut idx = vec![0usize; self.dim];
        loop {
            let mut v = mu;
            for k in 0..self.dim {
                v[k] += line[idx[k]];
            }
            if geom::dist(&v, &mu) <= rho {
                let w = self.norm_const * self.shape(&v) * cell;
                total += f(&v, w);
            }
            // odometer over the tensor grid
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < n_per_dim {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == self.dim {
                    return total;
                }
            }
        }
    }

    /// Mean speed `E|V|` of the law, by quadrature.
    pub fn expected_speed(&self) -> f64 {
        if self.is_degenerate() {
            return self.mean_speed;
        }
        self.quadrature(200, |v, w| geom::norm(v) * w)
    }

    /// Quadrature nodes `(v, weight)` with weights summing to `g0`.
    pub fn quadrature_nodes(&self, n_per_dim: usize) -> Vec<(Vect, f64)> {
        if self.is_degenerate() {
            return vec![(self.mean_velocity(), self.g0())];
        }
        let mut nodes = Vec::new();
        self.quadrature(n_per_dim, |v, w| {
            nodes.push((*v, w));
            0.0
        });
        nodes
    }
}

//! Model constants and the coefficient functions built from them.
//!
//! All quantities are nondimensional; the shipped default config documents
//! one canonical nondimensionalization (unit friction time `1/k1`, unit
//! offspring speed `v0`).

use crate::error::{AngioError, Result};
use crate::geom::{scale, Vect, ZERO};
use serde::{Deserialize, Serialize};

/// Every named constant of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Velocity friction rate.
    pub k1: f64,
    /// TAF source strength over the tumoral region.
    pub k2: f64,
    /// Velocity noise amplitude.
    pub sigma: f64,
    /// TAF diffusivity.
    pub d1: f64,
    /// Chemotaxis strength.
    pub d2: f64,
    /// Chemotaxis saturation scale.
    pub gamma1: f64,
    /// Saturation exponent of the chemotactic response (>= 1).
    pub q: f64,
    /// Maximum tip-branching rate.
    pub alpha1: f64,
    /// Maximum vessel-branching rate.
    pub beta1: f64,
    /// Reference concentration of the branching response.
    pub c_r: f64,
    /// Anastomosis rate constant.
    pub gamma: f64,
    /// Upper bound of the initial TAF field.
    pub c_max: f64,
    /// Mean offspring speed.
    pub v0: f64,
    /// Spatial dimension.
    pub dim: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            k1: 1.0,
            k2: 1.0,
            sigma: 0.3,
            d1: 0.05,
            d2: 1.0,
            gamma1: 1.0,
            q: 1.0,
            alpha1: 1.0,
            beta1: 0.5,
            c_r: 0.3,
            gamma: 0.5,
            c_max: 1.0,
            v0: 1.0,
            dim: 2,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("k1", self.k1),
            ("k2", self.k2),
            ("d1", self.d1),
            ("d2", self.d2),
            ("gamma1", self.gamma1),
            ("alpha1", self.alpha1),
            ("c_r", self.c_r),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(AngioError::InvalidParameter(format!("{name} > 0 violated (got {v})")));
            }
        }
        if !(self.sigma >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("sigma >= 0 violated (got {})", self.sigma)));
        }
        if !(self.gamma >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("gamma >= 0 violated (got {})", self.gamma)));
        }
        if !(self.beta1 >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("beta1 >= 0 violated (got {})", self.beta1)));
        }
        if !(self.q >= 1.0) {
            return Err(AngioError::InvalidParameter(format!("q >= 1 violated (got {})", self.q)));
        }
        if !(self.c_max > 0.0) {
            return Err(AngioError::InvalidParameter(format!("c_max > 0 violated (got {})", self.c_max)));
        }
        if !(self.v0 >= 0.0) {
            return Err(AngioError::InvalidParameter(format!("v0 >= 0 violated (got {})", self.v0)));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(AngioError::InvalidParameter(format!("dim in {{1,2,3}} violated (got {})", self.dim)));
        }
        Ok(())
    }

    /// Saturating chemotactic response `f(r) = d2 / (1 + gamma1 r)^q`.
    #[inline]
    pub fn chemo_response(&self, r: f64) -> f64 {
        self.d2 / (1.0 + self.gamma1 * r).powf(self.q)
    }

    /// Chemotactic force `f(|g|) g` for a TAF gradient `g`. Total function;
    /// its magnitude is bounded by [`ModelParams::chemo_force_sup`].
    #[inline]
    pub fn chemo_force(&self, grad_c: &Vect) -> Vect {
        let r = crate::geom::norm(grad_c);
        if r == 0.0 {
            return ZERO;
        }
        scale(grad_c, self.chemo_response(r))
    }

    /// `sup_r f(r) r`: for q = 1 this is the saturating limit `d2/gamma1`,
    /// for q > 1 the maximum sits at `r = 1/(gamma1 (q-1))`.
    pub fn chemo_force_sup(&self) -> f64 {
        if self.q <= 1.0 {
            self.d2 / self.gamma1
        } else {
            let r = 1.0 / (self.gamma1 * (self.q - 1.0));
            self.d2 * r / (1.0 + self.gamma1 * r).powf(self.q)
        }
    }

    /// Tip-branching rate `alpha(c) = alpha1 c / (c_r + c)`.
    pub fn alpha_rate(&self, c: f64) -> Result<f64> {
        if c < 0.0 {
            return Err(AngioError::Domain(format!("alpha_rate: concentration {c} < 0")));
        }
        Ok(self.alpha1 * c / (self.c_r + c))
    }

    /// Vessel-branching rate `beta(c) = beta1 c / (c_r + c)`.
    pub fn beta_rate(&self, c: f64) -> Result<f64> {
        if c < 0.0 {
            return Err(AngioError::Domain(format!("beta_rate: concentration {c} < 0")));
        }
        Ok(self.beta1 * c / (self.c_r + c))
    }

    /// Supremum of `alpha` over nonnegative concentrations.
    pub fn alpha_sup(&self) -> f64 {
        self.alpha1
    }

    /// Supremum of `beta` over nonnegative concentrations.
    pub fn beta_sup(&self) -> f64 {
        self.beta1
    }
}

/// Saturation `h(r) = r / (1 + r)`, strictly increasing into `[0, 1)`.
pub fn saturation_h(r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(AngioError::Domain(format!("saturation_h: argument {r} < 0")));
    }
    Ok(r / (1.0 + r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::norm;
    use proptest::prelude::*;

    fn p() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn chemo_force_zero_gradient() {
        assert_eq!(p().chemo_force(&ZERO), ZERO);
    }

    #[test]
    fn chemo_force_saturates_for_large_gradients() {
        let params = ModelParams { d2: 1.0, gamma1: 1.0, q: 1.0, ..p() };
        let g = [1e6, 0.0, 0.0];
        let out = norm(&params.chemo_force(&g));
        assert!(out <= 1.0 && out >= 1.0 - 1e-5, "got {out}");
    }

    #[test]
    fn chemo_force_direct_formula() {
        let params = ModelParams { d2: 2.0, gamma1: 0.5, q: 1.0, ..p() };
        let out = params.chemo_force(&[3.0, 4.0, 0.0]);
        // f(5) = 2/3.5
        assert!((out[0] - 6.0 / 3.5).abs() < 1e-12);
        assert!((out[1] - 8.0 / 3.5).abs() < 1e-12);
    }

    #[test]
    fn alpha_rate_anchor_points() {
        let params = p();
        assert_eq!(params.alpha_rate(0.0).unwrap(), 0.0);
        let half = params.alpha_rate(params.c_r).unwrap();
        assert!((half - params.alpha1 / 2.0).abs() < 1e-15);
        let asym = params.alpha_rate(1e6 * params.c_r).unwrap();
        assert!(asym <= params.alpha1 && asym >= params.alpha1 * (1.0 - 1e-5));
        assert!(params.alpha_rate(-0.1).is_err());
    }

    #[test]
    fn beta_rate_anchor_points() {
        let params = p();
        assert_eq!(params.beta_rate(0.0).unwrap(), 0.0);
        let half = params.beta_rate(params.c_r).unwrap();
        assert!((half - params.beta1 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_anchor_points() {
        assert_eq!(saturation_h(0.0).unwrap(), 0.0);
        assert_eq!(saturation_h(1.0).unwrap(), 0.5);
        assert!(saturation_h(1e6).unwrap() > 1.0 - 1e-5);
        assert!(saturation_h(-1e-9).is_err());
    }

    #[test]
    fn chemo_force_sup_matches_scan_for_q_above_one() {
        let params = ModelParams { q: 2.0, d2: 1.5, gamma1: 0.7, ..p() };
        let sup = params.chemo_force_sup();
        let scan = (0..200_000)
            .map(|i| {
                let r = i as f64 * 1e-3;
                params.chemo_response(r) * r
            })
            .fold(0.0f64, f64::max);
        assert!(scan <= sup + 1e-12, "scan {scan} > sup {sup}");
        assert!(sup - scan < 1e-6 * sup);
    }

    proptest! {
        #[test]
        fn chemo_force_bounded_by_sup(gx in -1e4f64..1e4, gy in -1e4f64..1e4) {
            let params = p();
            let out = params.chemo_force(&[gx, gy, 0.0]);
            prop_assert!(norm(&out) <= params.chemo_force_sup() + 1e-12);
        }

        #[test]
        fn rates_bounded_and_monotone(c1 in 0.0f64..1e6, c2 in 0.0f64..1e6) {
            let params = p();
            let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let a_lo = params.alpha_rate(lo).unwrap();
            let a_hi = params.alpha_rate(hi).unwrap();
            prop_assert!(a_lo <= a_hi + 1e-15);
            prop_assert!(a_hi <= params.alpha1);
            let b_lo = params.beta_rate(lo).unwrap();
            let b_hi = params.beta_rate(hi).unwrap();
            prop_assert!(b_lo <= b_hi + 1e-15);
            prop_assert!(b_hi <= params.beta1);
            let h_lo = saturation_h(lo).unwrap();
            let h_hi = saturation_h(hi).unwrap();
            prop_assert!(h_lo <= h_hi + 1e-15);
            prop_assert!(h_hi < 1.0);
        }
    }
}

//! TAF concentration field and its absorption companion.
//!
//! The concentration evolves by operator splitting: an exact pointwise
//! reaction factor, an explicit source over the tumoral region, and one
//! diffusion substep. Diffusion is implicit by default (dimension-factored
//! tridiagonal solves with zero-flux boundaries, unconditionally stable and
//! interval-preserving); an explicit branch exists for cross-validation.

use crate::error::{AngioError, Result};
use crate::geom::{self, Vect};
use crate::grid::GridGeometry;
use crate::kernels::Kernel;
use crate::params::ModelParams;
use crate::sim::EmpiricalMeasure;
use crate::tumor::TumorIndicator;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug)]
pub struct ScalarField {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
    /// Diagnostic: queries outside the box, answered from the clamped
    /// nearest interior point.
    clamped_queries: AtomicU64,
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        ScalarField {
            geom: self.geom.clone(),
            values: self.values.clone(),
            clamped_queries: AtomicU64::new(self.clamped_queries.load(Ordering::Relaxed)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AbsorptionField {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(geom: GridGeometry) -> Self {
        let n = geom.len();
        ScalarField { geom, values: vec![0.0; n], clamped_queries: AtomicU64::new(0) }
    }

    pub fn from_fn(geom: GridGeometry, f: impl Fn(&Vect) -> f64) -> Self {
        let values = geom.indices().map(|idx| f(&geom.center(idx))).collect();
        ScalarField { geom, values, clamped_queries: AtomicU64::new(0) }
    }

    pub fn clamped_query_count(&self) -> u64 {
        self.clamped_queries.load(Ordering::Relaxed)
    }

    /// Node gradient by central differences (one-sided at the boundary).
    fn node_gradient(&self, idx: [usize; 3]) -> Vect {
        let g = &self.geom;
        let strides = g.strides();
        let flat = g.flat(idx);
        let h = g.spacing;
        let mut grad = [0.0; 3];
        for k in 0..g.dim {
            let n = g.shape[k];
            let i = idx[k];
            let s = strides[k];
            grad[k] = if n == 1 {
                0.0
            } else if i == 0 {
                (self.values[flat + s] - self.values[flat]) / h
            } else if i == n - 1 {
                (self.values[flat] - self.values[flat - s]) / h
            } else {
                (self.values[flat + s] - self.values[flat - s]) / (2.0 * h)
            };
        }
        grad
    }

    /// Multilinear interpolation weights: anchor cell plus per-axis fraction,
    /// clamped to the interior. Flags whether the query was outside.
    fn interp_anchor(&self, x: &Vect) -> ([usize; 3], [f64; 3], bool) {
        let g = &self.geom;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        let mut clamped = false;
        for k in 0..g.dim {
            let u = (x[k] - g.lo[k]) / g.spacing - 0.5;
            let max_i = (g.shape[k] - 2).max(0) as f64;
            let uf = u.floor();
            let (i, f) = if g.shape[k] == 1 {
                (0.0, 0.0)
            } else if uf < 0.0 {
                clamped |= u < 0.0;
                (0.0, u.max(0.0).min(1.0))
            } else if uf > max_i {
                clamped |= u > max_i + 1.0;
                (max_i, (u - max_i).max(0.0).min(1.0))
            } else {
                (uf, u - uf)
            };
            base[k] = i as usize;
            frac[k] = f;
        }
        (base, frac, clamped)
    }

    /// Value of the multilinear interpolant at `x`. Outside queries are
    /// clamped to the nearest interior point and counted.
    pub fn value_interp(&self, x: &Vect) -> f64 {
        let (base, frac, clamped) = self.interp_anchor(x);
        if clamped {
            self.clamped_queries.fetch_add(1, Ordering::Relaxed);
        }
        let g = &self.geom;
        let mut acc = 0.0;
        let corners = 1usize << g.dim;
        for c in 0..corners {
            let mut idx = base;
            let mut w = 1.0;
            for k in 0..g.dim {
                if c >> k & 1 == 1 {
                    idx[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            acc += w * self.values[g.flat(idx)];
        }
        acc
    }

    /// Gradient at `x`: central differences at the surrounding nodes, then
    /// multilinear interpolation of the node gradients. Exact on affine
    /// fields; first-order accurate on smooth ones.
    pub fn grad_interp(&self, x: &Vect) -> Vect {
        let (base, frac, clamped) = self.interp_anchor(x);
        if clamped {
            self.clamped_queries.fetch_add(1, Ordering::Relaxed);
        }
        let g = &self.geom;
        let mut acc = [0.0; 3];
        let corners = 1usize << g.dim;
        for c in 0..corners {
            let mut idx = base;
            let mut w = 1.0;
            for k in 0..g.dim {
                if c >> k & 1 == 1 {
                    idx[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            let ng = self.node_gradient(idx);
            for k in 0..g.dim {
                acc[k] += w * ng[k];
            }
        }
        acc
    }

    /// Discrete integral over the box.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geom.cell_volume()
    }

    /// Central-difference gradient at every node, in flat order.
    pub fn node_gradients(&self) -> Vec<Vect> {
        self.geom.indices().map(|idx| self.node_gradient(idx)).collect()
    }
}

impl AbsorptionField {
    pub fn zeros(geom: GridGeometry) -> Self {
        let n = geom.len();
        AbsorptionField { geom, values: vec![0.0; n] }
    }
}

/// Rectangle-rule accumulation of the absorption functional: for every
/// alive atom `(x, v)` of the empirical measure, each grid node within the
/// kernel support gains `dt * weight * K1(node - x) * |v|`.
pub fn accumulate_eta(
    eta: &mut AbsorptionField,
    q: &EmpiricalMeasure,
    k1: &Kernel,
    dt: f64,
    expected_geom: &GridGeometry,
) -> Result<()> {
    if eta.geom != *expected_geom {
        return Err(AngioError::Geometry(
            "absorption field geometry differs from the configured box".into(),
        ));
    }
    let g = eta.geom.clone();
    let reach = (k1.support_radius / g.spacing).ceil() as isize + 1;
    for (x, v) in &q.atoms {
        let speed = geom::norm(v);
        if speed == 0.0 {
            continue;
        }
        let (anchor, _) = g.locate_clamped(x);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for k in 0..g.dim {
            lo[k] = (anchor[k] as isize - reach).max(0) as usize;
            hi[k] = ((anchor[k] as isize + reach) as usize).min(g.shape[k] - 1);
        }
        let scale = dt * q.weight * speed;
        let mut idx = lo;
        loop {
            let w = k1.eval(&geom::sub(&g.center(idx), x));
            if w > 0.0 {
                eta.values[g.flat(idx)] += scale * w;
            }
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= hi[k] {
                    break;
                }
                idx[k] = lo[k];
                k += 1;
                if k == g.dim {
                    break;
                }
            }
            if k == g.dim {
                break;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionScheme {
    Implicit,
    Explicit,
}

/// Workspace and precomputed source for stepping the concentration.
pub struct TafSolver {
    pub geom: GridGeometry,
    /// Mollified tumor indicator sampled at cell centers.
    pub source: Vec<f64>,
    pub scheme: DiffusionScheme,
    /// Explicit-branch stability threshold for `d1 dt / h^2` per axis.
    pub explicit_threshold: f64,
    // Thomas solver scratch
    diag: Vec<f64>,
    rhs: Vec<f64>,
}

impl TafSolver {
    pub fn new(geom: GridGeometry, tumor: &TumorIndicator, scheme: DiffusionScheme) -> Self {
        let source = geom.indices().map(|idx| tumor.eval(&geom.center(idx))).collect();
        let nmax = geom.shape.iter().copied().max().unwrap_or(1);
        TafSolver {
            geom,
            source,
            scheme,
            explicit_threshold: 0.25,
            diag: vec![0.0; nmax],
            rhs: vec![0.0; nmax],
        }
    }

    pub fn source_sup(&self) -> f64 {
        self.source.iter().cloned().fold(0.0, f64::max)
    }

    /// One splitting step of the concentration equation:
    /// exact reaction factor, explicit source, one diffusion substep.
    pub fn step(
        &mut self,
        c: &mut ScalarField,
        eta: &AbsorptionField,
        params: &ModelParams,
        dt: f64,
        step_index: usize,
    ) -> Result<()> {
        if c.geom != self.geom || eta.geom != self.geom {
            return Err(AngioError::Geometry("field/solver geometry mismatch".into()));
        }
        if !(dt > 0.0) {
            return Err(AngioError::InvalidParameter(format!("dt > 0 violated (got {dt})")));
        }
        // reaction: exact pointwise factor
        for (cv, ev) in c.values.iter_mut().zip(&eta.values) {
            *cv *= (-ev * dt).exp();
        }
        // source
        for (cv, sv) in c.values.iter_mut().zip(&self.source) {
            *cv += params.k2 * sv * dt;
        }
        // diffusion
        match self.scheme {
            DiffusionScheme::Implicit => self.diffuse_implicit(c, params.d1 * dt),
            DiffusionScheme::Explicit => self.diffuse_explicit(c, params.d1 * dt)?,
        }
        if c.values.iter().any(|v| !v.is_finite()) {
            return Err(AngioError::Numerical {
                step: step_index,
                msg: "non-finite concentration value (parameter blow-up; reduce dt)".into(),
            });
        }
        Ok(())
    }

    /// Backward-Euler diffusion factored per axis: solve
    /// `(I - mu d^2/dx_k^2) c = c` for each dimension in turn. Zero-flux
    /// boundary rows keep the discrete mass exactly.
    fn diffuse_implicit(&mut self, c: &mut ScalarField, mu: f64) {
        if mu == 0.0 {
            return;
        }
        let g = self.geom.clone();
        let lam = mu / (g.spacing * g.spacing);
        let strides = g.strides();
        for k in 0..g.dim {
            let n = g.shape[k];
            if n < 2 {
                continue;
            }
            let stride = strides[k];
            // enumerate all lines along axis k
            let mut other_dims = Vec::new();
            for d in 0..3 {
                if d != k {
                    other_dims.push(d);
                }
            }
            let n1 = g.shape[other_dims[0]];
            let n2 = g.shape[other_dims[1]];
            for j2 in 0..n2 {
                for j1 in 0..n1 {
                    let mut idx = [0usize; 3];
                    idx[other_dims[0]] = j1;
                    idx[other_dims[1]] = j2;
                    let base = g.flat(idx);
                    self.thomas_line(&mut c.values, base, stride, n, lam);
                }
            }
        }
    }

    /// Solve one tridiagonal line in place (Thomas algorithm). Matrix rows:
    /// boundary `1 + lam, -lam`; interior `-lam, 1 + 2 lam, -lam`.
    fn thomas_line(&mut self, values: &mut [f64], base: usize, stride: usize, n: usize, lam: f64) {
        let diag = &mut self.diag[..n];
        let rhs = &mut self.rhs[..n];
        for i in 0..n {
            rhs[i] = values[base + i * stride];
            diag[i] = if i == 0 || i == n - 1 { 1.0 + lam } else { 1.0 + 2.0 * lam };
        }
        // forward elimination (constant off-diagonal -lam)
        for i in 1..n {
            let m = -lam / diag[i - 1];
            diag[i] -= m * -lam;
            rhs[i] -= m * rhs[i - 1];
        }
        // back substitution
        rhs[n - 1] /= diag[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] + lam * rhs[i + 1]) / diag[i];
        }
        for i in 0..n {
            values[base + i * stride] = rhs[i];
        }
    }

    fn diffuse_explicit(&self, c: &mut ScalarField, mu: f64) -> Result<()> {
        if mu == 0.0 {
            return Ok(());
        }
        let g = &self.geom;
        let lam = mu / (g.spacing * g.spacing);
        if lam > self.explicit_threshold {
            return Err(AngioError::Stability(format!(
                "explicit diffusion requires d1*dt/h^2 <= {} per axis (got {lam:.4})",
                self.explicit_threshold
            )));
        }
        let strides = g.strides();
        let old = c.values.clone();
        for (flat, idx) in g.indices().enumerate() {
            let mut lap = 0.0;
            for k in 0..g.dim {
                let n = g.shape[k];
                if n < 2 {
                    continue;
                }
                let s = strides[k];
                let i = idx[k];
                // zero-flux: mirror the missing neighbour
                let left = if i == 0 { old[flat] } else { old[flat - s] };
                let right = if i == n - 1 { old[flat] } else { old[flat + s] };
                lap += left - 2.0 * old[flat] + right;
            }
            c.values[flat] = old[flat] + lam * lap;
        }
        Ok(())
    }
}

/// Outcome of the maximum-principle scan.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    pub min: f64,
    pub max: f64,
    /// Upper bound the field is checked against.
    pub upper_bound: f64,
    /// Whether the stricter bound `max <= c_max` also held.
    pub within_c_max: bool,
    pub grad_sup: f64,
    pub hess_sup: f64,
}

/// Check `0 <= C <= c_max + k2 * ||source||_inf * elapsed` at every node and
/// report the observed extrema together with the sup-norms of the
/// finite-difference first and second derivatives.
pub fn field_bounds_check(
    c: &ScalarField,
    params: &ModelParams,
    source_sup: f64,
    elapsed: f64,
) -> Result<BoundsReport> {
    let g = &c.geom;
    let upper = params.c_max + params.k2 * source_sup * elapsed;
    let slack = 1e-9 * upper.max(1.0);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let strides = g.strides();
    let h = g.spacing;
    let mut grad_sup = 0.0f64;
    let mut hess_sup = 0.0f64;
    for (flat, idx) in g.indices().enumerate() {
        let v = c.values[flat];
        if v < -slack || v > upper + slack {
            return Err(AngioError::BoundViolation {
                node: idx,
                msg: format!("C = {v} outside [0, {upper}] at t = {elapsed}"),
            });
        }
        min = min.min(v);
        max = max.max(v);
        for k in 0..g.dim {
            let n = g.shape[k];
            if n < 2 {
                continue;
            }
            let s = strides[k];
            let i = idx[k];
            let (left, right) = (
                if i == 0 { v } else { c.values[flat - s] },
                if i == n - 1 { v } else { c.values[flat + s] },
            );
            grad_sup = grad_sup.max(((right - left) / (2.0 * h)).abs());
            hess_sup = hess_sup.max(((right - 2.0 * v + left) / (h * h)).abs());
            // mixed second differences
            for k2 in (k + 1)..g.dim {
                let n2 = g.shape[k2];
                if n2 < 2 || i == 0 || i == n - 1 {
                    continue;
                }
                let i2 = idx[k2];
                if i2 == 0 || i2 == n2 - 1 {
                    continue;
                }
                let s2 = strides[k2];
                let mixed = (c.values[flat + s + s2] - c.values[flat + s - s2]
                    - c.values[flat - s + s2]
                    + c.values[flat - s - s2])
                    / (4.0 * h * h);
                hess_sup = hess_sup.max(mixed.abs());
            }
        }
    }
    Ok(BoundsReport {
        min,
        max,
        upper_bound: upper,
        within_c_max: max <= params.c_max + slack,
        grad_sup,
        hess_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::EmpiricalMeasure;

    fn geom2d() -> GridGeometry {
        GridGeometry::cover(&[-2.0, -2.0, 0.0], &[2.0, 2.0, 0.0], 0.1, 2).unwrap()
    }

    fn tumor() -> TumorIndicator {
        TumorIndicator::new([0.8, -0.4, 0.0], [1.6, 0.4, 0.0], 0.2, 2).unwrap()
    }

    #[test]
    fn grad_interp_exact_on_affine_fields() {
        let g = geom2d();
        let a = [0.7, -1.3, 0.0];
        let c = ScalarField::from_fn(g, |x| a[0] * x[0] + a[1] * x[1] + 2.0);
        let mut rng = crate::rng::substream(5, 1);
        use rand::Rng;
        for _ in 0..200 {
            let x = [rng.random_range(-1.8..1.8), rng.random_range(-1.8..1.8), 0.0];
            let grad = c.grad_interp(&x);
            assert!((grad[0] - a[0]).abs() < 1e-12 && (grad[1] - a[1]).abs() < 1e-12);
        }
        assert_eq!(c.clamped_query_count(), 0);
        // constant field
        let k = ScalarField::from_fn(geom2d(), |_| 3.5);
        let grad = k.grad_interp(&[0.3, 0.4, 0.0]);
        assert_eq!(grad[0], 0.0);
        assert_eq!(grad[1], 0.0);
    }

    #[test]
    fn grad_interp_first_order_on_quadratic() {
        // analytic gradient of |x|^2 is 2x; central differences are exact on
        // quadratics, so the O(h) error sits in the one-sided boundary
        // stencils. Sample the whole box including wall cells.
        let max_err = |spacing: f64| {
            let g = GridGeometry::cover(&[-2.0, -2.0, 0.0], &[2.0, 2.0, 0.0], spacing, 2).unwrap();
            let c = ScalarField::from_fn(g, |x| x[0] * x[0] + x[1] * x[1]);
            let mut rng = crate::rng::substream(5, 2);
            use rand::Rng;
            let mut worst = 0.0f64;
            for _ in 0..2000 {
                let x = [rng.random_range(-1.999..1.999), rng.random_range(-1.999..1.999), 0.0];
                let grad = c.grad_interp(&x);
                let err = ((grad[0] - 2.0 * x[0]).powi(2) + (grad[1] - 2.0 * x[1]).powi(2)).sqrt();
                worst = worst.max(err);
            }
            worst
        };
        // wall cells carry the largest constant: one-sided stencil plus the
        // clamped interpolation give errors up to 2h per axis
        let e1 = max_err(0.1);
        let e2 = max_err(0.05);
        assert!(e1 <= 3.0 * 0.1, "error {e1} not O(h)");
        assert!(e2 <= 0.55 * e1, "halving h did not halve the error: {e1} -> {e2}");
    }

    #[test]
    fn out_of_box_queries_clamp_and_count() {
        let c = ScalarField::from_fn(geom2d(), |x| x[0]);
        let inside = c.value_interp(&[1.9, 0.0, 0.0]);
        let outside = c.value_interp(&[25.0, 0.0, 0.0]);
        assert!((outside - inside).abs() < 0.2);
        assert_eq!(c.clamped_query_count(), 1);
    }

    #[test]
    fn reaction_factor_is_exact() {
        let g = geom2d();
        let mut c = ScalarField::from_fn(g.clone(), |x| 1.0 + 0.3 * x[0].cos());
        let c0 = c.clone();
        let eta = AbsorptionField {
            geom: g.clone(),
            values: g.indices().map(|i| 0.5 + 0.1 * g.center(i)[1]).collect(),
        };
        let params = ModelParams { k2: 0.0, d1: 1e-30, ..ModelParams::default() };
        let mut solver = TafSolver::new(g.clone(), &tumor(), DiffusionScheme::Implicit);
        let dt = 0.05;
        let steps = 10;
        for s in 0..steps {
            solver.step(&mut c, &eta, &params, dt, s).unwrap();
        }
        let t = dt * steps as f64;
        for i in 0..c.values.len() {
            let exact = c0.values[i] * (-eta.values[i] * t).exp();
            assert!((c.values[i] - exact).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn constant_field_stays_constant_under_diffusion() {
        let g = geom2d();
        let params = ModelParams { k2: 0.0, d1: 0.3, ..ModelParams::default() };
        let eta = AbsorptionField::zeros(g.clone());
        for scheme in [DiffusionScheme::Implicit, DiffusionScheme::Explicit] {
            let mut c = ScalarField::from_fn(g.clone(), |_| 0.8);
            let mut solver = TafSolver::new(g.clone(), &tumor(), scheme);
            let dt = if scheme == DiffusionScheme::Explicit { 0.005 } else { 0.05 };
            for s in 0..20 {
                solver.step(&mut c, &eta, &params, dt, s).unwrap();
            }
            for v in &c.values {
                assert!((v - 0.8).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_second_moment_grows_at_heat_rate() {
        // analytic heat kernel: per-axis second central moment grows by
        // 2 d1 t
        let g = GridGeometry::cover(&[-3.0, -3.0, 0.0], &[3.0, 3.0, 0.0], 0.05, 2).unwrap();
        let s0 = 0.25f64;
        let mut c = ScalarField::from_fn(g.clone(), |x| {
            (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * s0 * s0)).exp()
        });
        let params = ModelParams { k2: 0.0, d1: 0.1, ..ModelParams::default() };
        let eta = AbsorptionField::zeros(g.clone());
        let mut solver = TafSolver::new(g.clone(), &tumor(), DiffusionScheme::Implicit);
        let moment = |c: &ScalarField, axis: usize| {
            let mut m0 = 0.0;
            let mut m2 = 0.0;
            for (flat, idx) in c.geom.indices().enumerate() {
                let x = c.geom.center(idx)[axis];
                m0 += c.values[flat];
                m2 += x * x * c.values[flat];
            }
            m2 / m0
        };
        let before = moment(&c, 0);
        let dt = 0.01;
        let steps = 50;
        for s in 0..steps {
            solver.step(&mut c, &eta, &params, dt, s).unwrap();
        }
        let t = dt * steps as f64;
        for axis in 0..2 {
            let grown = moment(&c, axis);
            let expected = before + 2.0 * params.d1 * t;
            assert!(
                (grown - expected).abs() < 0.01 * expected,
                "axis {axis}: {grown} vs {expected}"
            );
        }
    }

    #[test]
    fn mass_balance_and_positivity() {
        let g = geom2d();
        let tum = tumor();
        let params = ModelParams { k2: 0.7, d1: 0.05, ..ModelParams::default() };
        let eta = AbsorptionField::zeros(g.clone());
        let mut c = ScalarField::from_fn(g.clone(), |x| 0.5 + 0.4 * (x[0] * 1.3).sin().abs());
        let mut solver = TafSolver::new(g.clone(), &tum, DiffusionScheme::Implicit);
        let source_mass: f64 =
            solver.source.iter().sum::<f64>() * g.cell_volume() * params.k2;
        let dt = 0.02;
        for s in 0..50 {
            let before = c.mass();
            solver.step(&mut c, &eta, &params, dt, s).unwrap();
            let after = c.mass();
            let expected = before + source_mass * dt;
            assert!(
                (after - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "step {s}: mass {after} vs {expected}"
            );
            assert!(c.values.iter().all(|&v| v >= -1e-14));
        }
    }

    #[test]
    fn decay_run_max_nonincreasing() {
        let g = geom2d();
        let params = ModelParams { k2: 0.0, d1: 0.05, ..ModelParams::default() };
        let eta = AbsorptionField {
            geom: g.clone(),
            values: g.indices().map(|i| 0.3 + 0.2 * g.center(i)[0].abs()).collect(),
        };
        let mut c = ScalarField::from_fn(g.clone(), |x| 0.9 * (-(x[0] * x[0])).exp() + 0.05);
        let mut solver = TafSolver::new(g.clone(), &tumor(), DiffusionScheme::Implicit);
        let mut prev_max = c.values.iter().cloned().fold(f64::MIN, f64::max);
        for s in 0..40 {
            solver.step(&mut c, &eta, &params, 0.02, s).unwrap();
            let m = c.values.iter().cloned().fold(f64::MIN, f64::max);
            assert!(m <= prev_max + 1e-13);
            prev_max = m;
        }
        let report = field_bounds_check(&c, &params, 1.0, 0.8).unwrap();
        assert!(report.min >= 0.0);
        assert!(report.within_c_max);
    }

    #[test]
    fn explicit_instability_is_reported() {
        let g = geom2d();
        let params = ModelParams { d1: 1.0, ..ModelParams::default() };
        let eta = AbsorptionField::zeros(g.clone());
        let mut c = ScalarField::from_fn(g.clone(), |_| 0.2);
        let mut solver = TafSolver::new(g.clone(), &tumor(), DiffusionScheme::Explicit);
        let err = solver.step(&mut c, &eta, &params, 0.05, 0).unwrap_err();
        assert!(matches!(err, AngioError::Stability(_)));
    }

    #[test]
    fn eta_accumulation_matches_static_tip() {
        let g = geom2d();
        let k1 = Kernel::cosine_bump(0.4, 1.0).unwrap();
        let mut eta = AbsorptionField::zeros(g.clone());
        let x = [0.3, -0.2, 0.0];
        let v = [0.6, 0.8, 0.0]; // speed 1.0
        let q = EmpiricalMeasure { atoms: vec![(x, v)], weight: 1.0 };
        let dt = 0.05;
        let steps = 12;
        for _ in 0..steps {
            accumulate_eta(&mut eta, &q, &k1, dt, &g).unwrap();
        }
        let t = dt * steps as f64;
        for (flat, idx) in g.indices().enumerate() {
            let expected = t * k1.eval(&geom::sub(&g.center(idx), &x)) * 1.0;
            assert!((eta.values[flat] - expected).abs() < 1e-12);
            assert!(eta.values[flat] >= 0.0);
        }
    }

    #[test]
    fn eta_accumulation_is_linear_in_the_measure() {
        let g = geom2d();
        let k1 = Kernel::cosine_bump(0.4, 1.0).unwrap();
        let a = ([0.3, 0.1, 0.0], [1.0, 0.0, 0.0]);
        let b = ([-0.5, 0.4, 0.0], [0.0, 2.0, 0.0]);
        let mut eta_both = AbsorptionField::zeros(g.clone());
        let mut eta_a = AbsorptionField::zeros(g.clone());
        let mut eta_b = AbsorptionField::zeros(g.clone());
        let w = 0.5;
        accumulate_eta(&mut eta_both, &EmpiricalMeasure { atoms: vec![a, b], weight: w }, &k1, 0.1, &g).unwrap();
        accumulate_eta(&mut eta_a, &EmpiricalMeasure { atoms: vec![a], weight: w }, &k1, 0.1, &g).unwrap();
        accumulate_eta(&mut eta_b, &EmpiricalMeasure { atoms: vec![b], weight: w }, &k1, 0.1, &g).unwrap();
        for i in 0..eta_both.values.len() {
            assert!((eta_both.values[i] - eta_a.values[i] - eta_b.values[i]).abs() < 1e-15);
        }
        // empty measure leaves the field unchanged
        let snapshot = eta_both.values.clone();
        accumulate_eta(&mut eta_both, &EmpiricalMeasure { atoms: vec![], weight: w }, &k1, 0.1, &g).unwrap();
        assert_eq!(snapshot, eta_both.values);
    }

    #[test]
    fn geometry_mismatch_is_rejected() {
        let g = geom2d();
        let other = GridGeometry::cover(&[-1.0, -1.0, 0.0], &[1.0, 1.0, 0.0], 0.1, 2).unwrap();
        let mut eta = AbsorptionField::zeros(other);
        let k1 = Kernel::cosine_bump(0.4, 1.0).unwrap();
        let err = accumulate_eta(&mut eta, &EmpiricalMeasure { atoms: vec![], weight: 1.0 }, &k1, 0.1, &g);
        assert!(matches!(err, Err(AngioError::Geometry(_))));
    }
}

//! Deterministic limit system: a kinetic phase-space density transported by
//! the tip dynamics, fed by branching sources and drained by saturated
//! killing, coupled to the same concentration field as the stochastic half.
//!
//! Discretization: first-order conservative upwind fluxes for transport and
//! velocity drift (positivity-preserving under CFL, exactly mass-conserving
//! up to boundary outflow), explicit velocity diffusion, explicit sources.
//! Accuracy is assessed by self-convergence, not formal order.

use crate::error::{AngioError, Result};
use crate::field::{AbsorptionField, DiffusionScheme, ScalarField, TafSolver};
use crate::geom::{self, Vect};
use crate::grid::GridGeometry;
use crate::kernels::Kernel;
use crate::offspring::OffspringVelocityLaw;
use crate::params::{saturation_h, ModelParams};
use crate::sim::C0Profile;
use crate::tumor::TumorIndicator;

/// Tensor grid over position x velocity space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGeometry {
    pub dim: usize,
    pub x: GridGeometry,
    pub v_max: f64,
    pub v_cells: usize,
}

impl PhaseGeometry {
    pub fn v_spacing(&self) -> f64 {
        2.0 * self.v_max / self.v_cells as f64
    }

    pub fn v_len(&self) -> usize {
        self.v_cells.pow(self.dim as u32)
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.v_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn v_shape(&self) -> [usize; 3] {
        let mut s = [1usize; 3];
        for k in 0..self.dim {
            s[k] = self.v_cells;
        }
        s
    }

    pub fn v_strides(&self) -> [usize; 3] {
        let s = self.v_shape();
        [1, s[0], s[0] * s[1]]
    }

    pub fn v_flat(&self, idx: [usize; 3]) -> usize {
        let s = self.v_shape();
        (idx[2] * s[1] + idx[1]) * s[0] + idx[0]
    }

    pub fn v_unflat(&self, mut i: usize) -> [usize; 3] {
        let s = self.v_shape();
        let i0 = i % s[0];
        i /= s[0];
        let i1 = i % s[1];
        let i2 = i / s[1];
        [i0, i1, i2]
    }

    /// Center of velocity cell `idx`.
    pub fn v_center(&self, idx: [usize; 3]) -> Vect {
        let h = self.v_spacing();
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = -self.v_max + (idx[k] as f64 + 0.5) * h;
        }
        c
    }

    pub fn cell_volume(&self) -> f64 {
        self.x.cell_volume() * self.v_spacing().powi(self.dim as i32)
    }

    /// Velocity cell containing `v`, clamped.
    pub fn v_locate(&self, v: &Vect) -> [usize; 3] {
        let h = self.v_spacing();
        let mut idx = [0usize; 3];
        for k in 0..self.dim {
            let u = ((v[k] + self.v_max) / h).floor();
            idx[k] = (u.max(0.0) as usize).min(self.v_cells - 1);
        }
        idx
    }
}

/// Density on the phase grid; layout `x_flat * v_len + v_flat`.
#[derive(Debug, Clone)]
pub struct PhaseSpaceDensity {
    pub geom: PhaseGeometry,
    pub values: Vec<f64>,
}

impl PhaseSpaceDensity {
    pub fn zeros(geom: PhaseGeometry) -> Self {
        let n = geom.len();
        PhaseSpaceDensity { geom, values: vec![0.0; n] }
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geom.cell_volume()
    }
}

/// Position-space marginals of the density.
#[derive(Debug, Clone)]
pub struct Marginals {
    /// `pi1(x) = integral of rho over v`.
    pub pi1: Vec<f64>,
    /// `tilde(x) = integral of |v| rho over v`.
    pub tilde: Vec<f64>,
}

/// Midpoint v-quadrature of the density and of `|v| rho`.
pub fn marginals(rho: &PhaseSpaceDensity, speeds: &[f64]) -> Marginals {
    let g = &rho.geom;
    let nv = g.v_len();
    let nx = g.x.len();
    let v_cell = g.v_spacing().powi(g.dim as i32);
    let mut pi1 = vec![0.0; nx];
    let mut tilde = vec![0.0; nx];
    for xi in 0..nx {
        let base = xi * nv;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for vi in 0..nv {
            let r = rho.values[base + vi];
            s0 += r;
            s1 += speeds[vi] * r;
        }
        pi1[xi] = s0 * v_cell;
        tilde[xi] = s1 * v_cell;
    }
    Marginals { pi1, tilde }
}

/// Time integrals carried by the limit system.
#[derive(Debug, Clone)]
pub struct HistoryIntegrals {
    /// `int_0^t tilde_r(x) dr`.
    pub tilde_accum: Vec<f64>,
    /// `int_0^t (K2 * tilde_r)(x) dr` — argument of the killing saturation.
    pub k2_accum: Vec<f64>,
    /// `int_0^t (K1 * tilde_r)(x) dr` — absorption seen by the field.
    pub eta_limit: Vec<f64>,
}

impl HistoryIntegrals {
    pub fn zeros(nx: usize) -> Self {
        HistoryIntegrals {
            tilde_accum: vec![0.0; nx],
            k2_accum: vec![0.0; nx],
            eta_limit: vec![0.0; nx],
        }
    }
}

/// Precomputed convolution stencil on the x-grid.
struct XStencil {
    offsets: Vec<[isize; 3]>,
    weights: Vec<f64>,
}

impl XStencil {
    fn build(kernel: &Kernel, x: &GridGeometry) -> Self {
        let reach = (kernel.support_radius / x.spacing).ceil() as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let vol = x.cell_volume();
        let mut off = [-reach; 3];
        let active: [isize; 3] = {
            let mut a = [0; 3];
            for k in 0..x.dim {
                a[k] = 1;
            }
            a
        };
        loop {
            let mut d = [0.0; 3];
            let mut real = [0isize; 3];
            for k in 0..3 {
                if active[k] == 1 {
                    real[k] = off[k];
                    d[k] = off[k] as f64 * x.spacing;
                }
            }
            let w = kernel.eval(&d) * vol;
            if w > 0.0 {
                offsets.push(real);
                weights.push(w);
            }
            let mut k = 0;
            loop {
                off[k] += 1;
                if off[k] <= reach {
                    break;
                }
                off[k] = -reach;
                k += 1;
                if k == 3 {
                    break;
                }
            }
            if k == 3 {
                break;
            }
        }
        XStencil { offsets, weights }
    }

    /// `out[i] = sum_j K(x_i - x_j) f[j] vol`, truncated at the box edge.
    fn convolve(&self, x: &GridGeometry, f: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (flat, idx) in x.indices().enumerate() {
            let mut acc = 0.0;
            for (o, w) in self.offsets.iter().zip(&self.weights) {
                let mut j = [0usize; 3];
                let mut ok = true;
                for k in 0..3 {
                    let jj = idx[k] as isize + o[k];
                    if jj < 0 || jj >= x.shape[k] as isize {
                        ok = false;
                        break;
                    }
                    j[k] = jj as usize;
                }
                if ok {
                    acc += w * f[x.flat(j)];
                }
            }
            out[flat] = acc;
        }
    }
}

/// Boundary outflow bookkeeping.
#[derive(Debug, Clone, Copy, Default)]
pub struct Leakage {
    pub x_boundary: f64,
    pub v_boundary: f64,
}

/// Per-step inputs of the mass identity, recorded for the residual check.
#[derive(Debug, Clone)]
pub struct MassSample {
    pub time: f64,
    pub dt: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    /// x-grid arrays exactly as the source term saw them.
    pub pi1: Vec<f64>,
    pub tilde_accum: Vec<f64>,
    pub k2_accum: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MeanFieldSetup {
    pub params: ModelParams,
    pub absorption_kernel: Kernel,
    pub anastomosis_kernel: Kernel,
    pub offspring: OffspringVelocityLaw,
    pub tumor: TumorIndicator,
    pub x_lo: Vect,
    pub x_hi: Vect,
    pub x_cells: usize,
    pub v_cells: usize,
    /// Velocity box half-width; 0 requests the automatic choice
    /// `max(3 sigma / sqrt(2 k1), offspring support + margin)`.
    pub v_max: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Initial density: uniform over `[init_lo, init_hi]` in x, offspring
    /// law in v, total mass `m0`.
    pub init_lo: Vect,
    pub init_hi: Vect,
    pub m0: f64,
    pub c0: C0Profile,
    pub scheme: DiffusionScheme,
    pub snapshot_stride: usize,
    /// Keep per-step mass-identity samples.
    pub record_identity: bool,
}

impl MeanFieldSetup {
    pub fn resolved_v_max(&self) -> f64 {
        if self.v_max > 0.0 {
            return self.v_max;
        }
        let ou = 3.0 * self.params.sigma / (2.0 * self.params.k1).sqrt();
        let margin = 0.5;
        ou.max(self.offspring.support_radius() + margin)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.params.dim > 2 {
            return Err(AngioError::Unsupported(
                "mean-field grid supports d <= 2".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(AngioError::InvalidParameter(format!("dt > 0 violated (got {})", self.dt)));
        }
        if !(self.m0 > 0.0) {
            return Err(AngioError::InvalidParameter(format!("m0 > 0 violated (got {})", self.m0)));
        }
        if self.x_cells < 4 || self.v_cells < 4 {
            return Err(AngioError::InvalidParameter("phase grid needs at least 4 cells per axis".into()));
        }
        Ok(())
    }

    pub fn phase_geometry(&self) -> Result<PhaseGeometry> {
        let x = GridGeometry::cover(
            &self.x_lo,
            &self.x_hi,
            (self.x_hi[0] - self.x_lo[0]) / self.x_cells as f64,
            self.params.dim,
        )?;
        Ok(PhaseGeometry {
            dim: self.params.dim,
            x,
            v_max: self.resolved_v_max(),
            v_cells: self.v_cells,
        })
    }
}

pub struct MeanFieldSolver {
    pub setup: MeanFieldSetup,
    pub rho: PhaseSpaceDensity,
    pub c: ScalarField,
    pub hist: HistoryIntegrals,
    pub time: f64,
    pub step: usize,
    pub leakage: Leakage,
    taf: TafSolver,
    k1_stencil: XStencil,
    k2_stencil: XStencil,
    /// Offspring density on the v-grid, scaled so its discrete integral is g0.
    g_grid: Vec<f64>,
    /// |v| per v-cell.
    speeds: Vec<f64>,
    scratch: Vec<f64>,
    conv_a: Vec<f64>,
    conv_b: Vec<f64>,
    pub identity: Vec<MassSample>,
}

impl MeanFieldSolver {
    pub fn new(setup: MeanFieldSetup) -> Result<Self> {
        setup.validate()?;
        let geom = setup.phase_geometry()?;
        let x = geom.x.clone();
        let nv = geom.v_len();
        let v_cell = geom.v_spacing().powi(geom.dim as i32);

        // offspring density on the v-grid, renormalized so the discrete
        // integral matches g0 exactly
        let mut g_grid = vec![0.0; nv];
        if setup.offspring.is_degenerate() {
            let idx = geom.v_locate(&setup.offspring.mean_velocity());
            g_grid[geom.v_flat(idx)] = setup.offspring.g0() / v_cell;
        } else {
            for (vi, g) in g_grid.iter_mut().enumerate() {
                let vc = geom.v_center(geom.v_unflat(vi));
                *g = setup.offspring.density(&vc);
            }
            let total: f64 = g_grid.iter().sum::<f64>() * v_cell;
            if total <= 0.0 {
                return Err(AngioError::InvalidParameter(
                    "offspring law has no mass on the velocity grid; enlarge v_max or refine v_cells".into(),
                ));
            }
            let scale = setup.offspring.g0() / total;
            g_grid.iter_mut().for_each(|g| *g *= scale);
        }
        let speeds: Vec<f64> =
            (0..nv).map(|vi| geom::norm(&geom.v_center(geom.v_unflat(vi)))).collect();

        // initial density: uniform x-box times offspring law, mass m0
        let mut rho = PhaseSpaceDensity::zeros(geom.clone());
        let in_box: Vec<bool> = x
            .indices()
            .map(|idx| {
                let c = x.center(idx);
                (0..geom.dim).all(|k| c[k] >= setup.init_lo[k] && c[k] <= setup.init_hi[k])
            })
            .collect();
        let n_box = in_box.iter().filter(|b| **b).count();
        if n_box == 0 {
            return Err(AngioError::InvalidParameter(
                "initial box contains no grid cells".into(),
            ));
        }
        let x_weight = setup.m0 / (n_box as f64 * x.cell_volume());
        let g_total_v: f64 = g_grid.iter().sum::<f64>() * v_cell; // = g0
        for (xi, inside) in in_box.iter().enumerate() {
            if !inside {
                continue;
            }
            for vi in 0..nv {
                rho.values[xi * nv + vi] = x_weight * g_grid[vi] / g_total_v;
            }
        }

        let c = match setup.c0 {
            C0Profile::TumorBump => {
                let c_max = setup.params.c_max;
                let tumor = setup.tumor.clone();
                ScalarField::from_fn(x.clone(), move |p| c_max * tumor.eval(p))
            }
            C0Profile::Constant(v) => ScalarField::from_fn(x.clone(), move |_| v),
        };
        let taf = TafSolver::new(x.clone(), &setup.tumor, setup.scheme);
        let k1_stencil = XStencil::build(&setup.absorption_kernel, &x);
        let k2_stencil = XStencil::build(&setup.anastomosis_kernel, &x);
        let nx = x.len();
        Ok(MeanFieldSolver {
            rho,
            c,
            hist: HistoryIntegrals::zeros(nx),
            time: 0.0,
            step: 0,
            leakage: Leakage::default(),
            taf,
            k1_stencil,
            k2_stencil,
            g_grid,
            speeds,
            scratch: Vec::new(),
            conv_a: vec![0.0; nx],
            conv_b: vec![0.0; nx],
            identity: Vec::new(),
            setup,
        })
    }

    pub fn geom(&self) -> &PhaseGeometry {
        &self.rho.geom
    }

    pub fn mass(&self) -> f64 {
        self.rho.mass()
    }

    pub fn marginals(&self) -> Marginals {
        marginals(&self.rho, &self.speeds)
    }

    fn check_cfl(&self, dt: f64) -> Result<()> {
        let g = self.geom();
        let hx = g.x.spacing;
        let hv = g.v_spacing();
        let vmax = g.v_max;
        if vmax * dt > hx {
            return Err(AngioError::Stability(format!(
                "transport CFL violated: v_max dt = {:.4} > x spacing {:.4}",
                vmax * dt,
                hx
            )));
        }
        let amax = self.setup.params.chemo_force_sup() + self.setup.params.k1 * vmax;
        if amax * dt > hv {
            return Err(AngioError::Stability(format!(
                "drift CFL violated: max force dt = {:.4} > v spacing {:.4}",
                amax * dt,
                hv
            )));
        }
        let lam = 0.5 * self.setup.params.sigma.powi(2) * dt / (hv * hv);
        if lam * 2.0 * g.dim as f64 > 1.0 {
            return Err(AngioError::Stability(format!(
                "velocity diffusion stability violated: sigma^2/2 dt / h_v^2 * 2d = {:.4} > 1",
                lam * 2.0 * g.dim as f64
            )));
        }
        if self.setup.params.gamma * dt > 1.0 {
            return Err(AngioError::Stability("gamma dt > 1: explicit killing unstable".into()));
        }
        Ok(())
    }

    /// Conservative upwind transport `rho_t + v . grad_x rho = 0`.
    fn transport_x(&mut self, dt: f64) {
        let g = self.rho.geom.clone();
        let nv = g.v_len();
        let hx = g.x.spacing;
        let hv = g.v_spacing();
        let x_strides = g.x.strides();
        let lam = dt / hx;
        let cellvol = g.cell_volume();
        for k in 0..g.dim {
            self.scratch.clear();
            self.scratch.extend_from_slice(&self.rho.values);
            let old = &self.scratch;
            let new = &mut self.rho.values;
            let stride = x_strides[k] * nv;
            let n = g.x.shape[k];
            for (flat, val) in new.iter_mut().enumerate() {
                let xi = flat / nv;
                let vi = flat % nv;
                let vidx = g.v_unflat(vi);
                let vk = -g.v_max + (vidx[k] as f64 + 0.5) * hv;
                let i = g.x.unflat(xi)[k];
                let f_right = if vk >= 0.0 {
                    vk * old[flat]
                } else if i + 1 < n {
                    vk * old[flat + stride]
                } else {
                    0.0 // no inflow from outside the box
                };
                let f_left = if vk >= 0.0 {
                    if i > 0 {
                        vk * old[flat - stride]
                    } else {
                        0.0
                    }
                } else {
                    vk * old[flat]
                };
                if i + 1 == n && vk > 0.0 {
                    self.leakage.x_boundary += lam * f_right.abs() * cellvol;
                }
                if i == 0 && vk < 0.0 {
                    self.leakage.x_boundary += lam * f_left.abs() * cellvol;
                }
                *val = old[flat] - lam * (f_right - f_left);
            }
        }
    }

    /// Conservative upwind drift `div_v([F(C) - k1 v] rho)`.
    fn drift_v(&mut self, dt: f64, force: &[Vect]) {
        let g = self.rho.geom.clone();
        let nv = g.v_len();
        let hv = g.v_spacing();
        let v_strides = g.v_strides();
        let lam = dt / hv;
        let k1 = self.setup.params.k1;
        let cellvol = g.cell_volume();
        for k in 0..g.dim {
            self.scratch.clear();
            self.scratch.extend_from_slice(&self.rho.values);
            let old = &self.scratch;
            let new = &mut self.rho.values;
            let stride = v_strides[k];
            let n = g.v_cells;
            for (flat, val) in new.iter_mut().enumerate() {
                let xi = flat / nv;
                let vi = flat % nv;
                let j = g.v_unflat(vi)[k];
                // face coordinates in velocity space
                let v_face_r = -g.v_max + (j as f64 + 1.0) * hv;
                let v_face_l = -g.v_max + j as f64 * hv;
                let a_r = force[xi][k] - k1 * v_face_r;
                let a_l = force[xi][k] - k1 * v_face_l;
                let f_right = if a_r >= 0.0 {
                    a_r * old[flat]
                } else if j + 1 < n {
                    a_r * old[flat + stride]
                } else {
                    0.0
                };
                let f_left = if a_l >= 0.0 {
                    if j > 0 {
                        a_l * old[flat - stride]
                    } else {
                        0.0
                    }
                } else {
                    a_l * old[flat]
                };
                if j + 1 == n && a_r > 0.0 {
                    self.leakage.v_boundary += lam * f_right.abs() * cellvol;
                }
                if j == 0 && a_l < 0.0 {
                    self.leakage.v_boundary += lam * f_left.abs() * cellvol;
                }
                *val = old[flat] - lam * (f_right - f_left);
            }
        }
    }

    /// Explicit velocity diffusion with zero-flux faces.
    fn diffuse_v(&mut self, dt: f64) {
        let sigma = self.setup.params.sigma;
        if sigma == 0.0 {
            return;
        }
        let g = self.rho.geom.clone();
        let nv = g.v_len();
        let hv = g.v_spacing();
        let lam = 0.5 * sigma * sigma * dt / (hv * hv);
        let v_strides = g.v_strides();
        self.scratch.clear();
        self.scratch.extend_from_slice(&self.rho.values);
        let old = &self.scratch;
        let new = &mut self.rho.values;
        for (flat, val) in new.iter_mut().enumerate() {
            let vi = flat % nv;
            let vidx = g.v_unflat(vi);
            let mut lap = 0.0;
            for k in 0..g.dim {
                let stride = v_strides[k];
                let j = vidx[k];
                let left = if j > 0 { old[flat - stride] } else { old[flat] };
                let right = if j + 1 < g.v_cells { old[flat + stride] } else { old[flat] };
                lap += left - 2.0 * old[flat] + right;
            }
            *val = old[flat] + lam * lap;
        }
    }

    /// Birth/death source on the current state.
    fn apply_sources(&mut self, dt: f64) -> Result<(Marginals, f64, f64)> {
        let g = self.rho.geom.clone();
        let nv = g.v_len();
        let nx = g.x.len();
        let marg = marginals(&self.rho, &self.speeds);
        let params = &self.setup.params;
        let mass_before = self.rho.mass();
        // per-x birth prefactor alpha(C) pi1 + beta(C) tilde_accum
        let mut birth = vec![0.0; nx];
        for xi in 0..nx {
            let c = self.c.values[xi].max(0.0);
            birth[xi] = params.alpha_rate(c)? * marg.pi1[xi]
                + params.beta_rate(c)? * self.hist.tilde_accum[xi];
        }
        // death factor gamma h(k2 history)
        let mut death = vec![0.0; nx];
        for xi in 0..nx {
            death[xi] = params.gamma * saturation_h(self.hist.k2_accum[xi])?;
        }
        for xi in 0..nx {
            let base = xi * nv;
            let b = birth[xi];
            let d = death[xi];
            for vi in 0..nv {
                let r = &mut self.rho.values[base + vi];
                *r += dt * (self.g_grid[vi] * b - d * *r);
            }
        }
        // positivity audit (first-order upwind + explicit source should
        // never undershoot beyond roundoff)
        let min = self.rho.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 * self.setup.m0.max(1.0) / g.cell_volume() {
            return Err(AngioError::Numerical {
                step: self.step,
                msg: format!("density undershoot {min}; flux limiter failure"),
            });
        }
        let mass_after = self.rho.mass();
        Ok((marg, mass_before, mass_after))
    }

    /// One full kinetic step: transport, drift, diffusion, sources, history
    /// advance. Mass changes only through the source substep.
    pub fn kinetic_step(&mut self, dt: f64) -> Result<()> {
        self.check_cfl(dt)?;
        // chemotactic force from the current concentration
        let grads = self.c.node_gradients();
        let force: Vec<Vect> = grads.iter().map(|gd| self.setup.params.chemo_force(gd)).collect();
        self.transport_x(dt);
        self.drift_v(dt, &force);
        self.diffuse_v(dt);
        let record = self.setup.record_identity;
        let pre = if record {
            Some((self.hist.tilde_accum.clone(), self.hist.k2_accum.clone(), self.c.values.clone()))
        } else {
            None
        };
        let (marg, mass_before, mass_after) = self.apply_sources(dt)?;
        if let Some((tilde_accum, k2_accum, c)) = pre {
            self.identity.push(MassSample {
                time: self.time,
                dt,
                mass_before,
                mass_after,
                pi1: marg.pi1.clone(),
                tilde_accum,
                k2_accum,
                c,
            });
        }
        // histories advance by the rectangle rule on the post-transport state
        let x = self.rho.geom.x.clone();
        self.k2_stencil.convolve(&x, &marg.tilde, &mut self.conv_a);
        self.k1_stencil.convolve(&x, &marg.tilde, &mut self.conv_b);
        for xi in 0..x.len() {
            self.hist.tilde_accum[xi] += dt * marg.tilde[xi];
            self.hist.k2_accum[xi] += dt * self.conv_a[xi];
            self.hist.eta_limit[xi] += dt * self.conv_b[xi];
        }
        Ok(())
    }

    /// Advance the coupled system by one step: kinetic density first, then
    /// the concentration with the accumulated absorption.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.kinetic_step(dt)?;
        let eta = AbsorptionField {
            geom: self.rho.geom.x.clone(),
            values: self.hist.eta_limit.clone(),
        };
        let params = self.setup.params.clone();
        self.taf.step(&mut self.c, &eta, &params, dt, self.step)?;
        self.time += dt;
        self.step += 1;
        Ok(())
    }
}

/// Full solve record.
pub struct MeanFieldRecord {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub snapshots: Vec<(f64, PhaseSpaceDensity)>,
    pub c_frames: Vec<(f64, ScalarField)>,
    pub identity: Vec<MassSample>,
    pub leakage: Leakage,
    pub v_max: f64,
}

impl MeanFieldRecord {
    pub fn final_mass(&self) -> f64 {
        *self.mass.last().unwrap()
    }

    pub fn min_mass(&self) -> f64 {
        self.mass.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Solve the limit system over `[0, t_end]`.
pub fn solve_system(setup: &MeanFieldSetup) -> Result<MeanFieldRecord> {
    let mut solver = MeanFieldSolver::new(setup.clone())?;
    let n_steps = (setup.t_end / setup.dt).round().max(1.0) as usize;
    let stride = setup.snapshot_stride;
    let mut record = MeanFieldRecord {
        times: vec![0.0],
        mass: vec![solver.mass()],
        snapshots: Vec::new(),
        c_frames: Vec::new(),
        identity: Vec::new(),
        leakage: Leakage::default(),
        v_max: solver.geom().v_max,
    };
    if stride > 0 {
        record.snapshots.push((0.0, solver.rho.clone()));
        record.c_frames.push((0.0, solver.c.clone()));
    }
    for s in 1..=n_steps {
        solver.step(setup.dt)?;
        record.times.push(solver.time);
        record.mass.push(solver.mass());
        if stride > 0 && (s % stride == 0 || s == n_steps) {
            record.snapshots.push((solver.time, solver.rho.clone()));
            record.c_frames.push((solver.time, solver.c.clone()));
        }
    }
    record.identity = std::mem::take(&mut solver.identity);
    record.leakage = solver.leakage;
    Ok(record)
}

/// Richardson-style self-convergence: solve on the given grid and on a
/// refined one (half dt, twice the cells) and compare final masses.
pub fn self_convergence(setup: &MeanFieldSetup) -> Result<(f64, f64, f64)> {
    let mut coarse = setup.clone();
    coarse.snapshot_stride = 0;
    coarse.record_identity = false;
    let mut fine = coarse.clone();
    fine.dt *= 0.5;
    fine.x_cells *= 2;
    fine.v_cells *= 2;
    let a = solve_system(&coarse)?.final_mass();
    let b = solve_system(&fine)?.final_mass();
    let rel = (a - b).abs() / b.abs().max(1e-12);
    Ok((a, b, rel))
}

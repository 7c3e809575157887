//! The N-tip stochastic system: Euler-Maruyama tip motion, vessel
//! accumulation, and thinning realizations of the branching and anastomosis
//! intensities, coupled to the concentration field.
//!
//! Every tip owns an independent RNG substream keyed by `(master seed,
//! tip id)`, so a run is bit-reproducible regardless of iteration order or
//! worker count.

use crate::error::{AngioError, Result};
use crate::field::{
    accumulate_eta, field_bounds_check, AbsorptionField, BoundsReport, DiffusionScheme,
    ScalarField, TafSolver,
};
use crate::geom::{self, Vect};
use crate::grid::GridGeometry;
use crate::kernels::Kernel;
use crate::network::{Segment, VesselNetwork};
use crate::offspring::OffspringVelocityLaw;
use crate::params::{saturation_h, ModelParams};
use crate::rng::substream2;
use crate::tumor::TumorIndicator;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// One active or retired tip cell.
#[derive(Debug, Clone)]
pub struct Tip {
    pub id: u64,
    pub x: Vect,
    pub v: Vect,
    pub birth_time: f64,
    pub death_time: Option<f64>,
    pub alive: bool,
    rng: ChaCha12Rng,
}

/// The `1/N`-weighted point cloud of alive tips in phase space.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    pub atoms: Vec<(Vect, Vect)>,
    pub weight: f64,
}

impl EmpiricalMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.len() as f64 * self.weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TipBranch,
    VesselBranch,
    Anastomosis,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::TipBranch => "tip_branch",
            EventKind::VesselBranch => "vessel_branch",
            EventKind::Anastomosis => "anastomosis",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub location: Vect,
    pub parent: u64,
    pub child: Option<u64>,
}

/// Initial profile of the concentration field.
#[derive(Debug, Clone, PartialEq)]
pub enum C0Profile {
    /// `c_max` times the mollified tumor indicator.
    TumorBump,
    Constant(f64),
}

/// Everything a run needs besides the seed.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub params: ModelParams,
    pub absorption_kernel: Kernel,
    pub anastomosis_kernel: Kernel,
    pub offspring: OffspringVelocityLaw,
    pub tumor: TumorIndicator,
    pub field_geom: GridGeometry,
    pub c0: C0Profile,
    pub init_lo: Vect,
    pub init_hi: Vect,
    pub dt: f64,
    pub t_end: f64,
    pub n_tips: usize,
    pub scheme: DiffusionScheme,
    /// When positive, a tip's own segments younger than this window are
    /// excluded from its anastomosis rate.
    pub exclude_own_window: f64,
}

impl SimSetup {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.dt > 0.0) {
            return Err(AngioError::InvalidParameter(format!("dt > 0 violated (got {})", self.dt)));
        }
        if !(self.t_end > 0.0) {
            return Err(AngioError::InvalidParameter(format!("t_end > 0 violated (got {})", self.t_end)));
        }
        if self.n_tips < 1 {
            return Err(AngioError::InvalidParameter("n_tips >= 1 violated".into()));
        }
        if let C0Profile::Constant(v) = self.c0 {
            if !(0.0..=self.params.c_max).contains(&v) {
                return Err(AngioError::InvalidParameter(format!(
                    "c0 in [0, c_max] violated (got {v})"
                )));
            }
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }

    pub fn initial_c_field(&self) -> ScalarField {
        match self.c0 {
            C0Profile::TumorBump => {
                let c_max = self.params.c_max;
                let tumor = self.tumor.clone();
                ScalarField::from_fn(self.field_geom.clone(), move |x| c_max * tumor.eval(x))
            }
            C0Profile::Constant(v) => ScalarField::from_fn(self.field_geom.clone(), move |_| v),
        }
    }

    /// Step-thinning guidance: rates whose per-step jump probability leaves
    /// the small-dt regime.
    pub fn thinning_warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let g0 = self.offspring.g0();
        if self.params.gamma * self.dt > 0.1 {
            w.push(format!(
                "gamma*dt = {:.3} > 0.1: anastomosis thinning is coarse, reduce dt",
                self.params.gamma * self.dt
            ));
        }
        if self.params.alpha1 * g0 * self.dt > 0.1 {
            w.push(format!(
                "alpha1*g0*dt = {:.3} > 0.1: branching thinning is coarse, reduce dt",
                self.params.alpha1 * g0 * self.dt
            ));
        }
        w
    }
}

/// Live state of one coupled simulation.
pub struct SimulationState {
    pub time: f64,
    pub step: usize,
    pub tips: Vec<Tip>,
    pub network: VesselNetwork,
    pub c_field: ScalarField,
    pub eta_field: AbsorptionField,
    pub events: Vec<Event>,
    pub n_initial: usize,
    pub boundary_proximity_hits: u64,
    setup: SimSetup,
    taf: TafSolver,
    master_seed: u64,
    next_tip_id: u64,
}

impl SimulationState {
    pub fn new(setup: SimSetup, master_seed: u64) -> Result<Self> {
        setup.validate()?;
        let c_field = setup.initial_c_field();
        let eta_field = AbsorptionField::zeros(setup.field_geom.clone());
        let taf = TafSolver::new(setup.field_geom.clone(), &setup.tumor, setup.scheme);
        let bucket = setup.anastomosis_kernel.support_radius;
        let mut state = SimulationState {
            time: 0.0,
            step: 0,
            tips: Vec::with_capacity(setup.n_tips * 2),
            network: VesselNetwork::new(bucket, setup.params.dim),
            c_field,
            eta_field,
            events: Vec::new(),
            n_initial: setup.n_tips,
            boundary_proximity_hits: 0,
            setup,
            taf,
            master_seed,
            next_tip_id: 0,
        };
        for _ in 0..state.n_initial {
            let id = state.next_tip_id;
            state.next_tip_id += 1;
            let mut rng = substream2(master_seed, 1, id);
            let dim = state.setup.params.dim;
            let mut x = [0.0; 3];
            for k in 0..dim {
                let (lo, hi) = (state.setup.init_lo[k], state.setup.init_hi[k]);
                x[k] = if hi > lo { rng.random_range(lo..hi) } else { lo };
            }
            let v = state.setup.offspring.sample(&mut rng);
            state.tips.push(Tip { id, x, v, birth_time: 0.0, death_time: None, alive: true, rng });
        }
        Ok(state)
    }

    pub fn setup(&self) -> &SimSetup {
        &self.setup
    }

    pub fn n_alive(&self) -> usize {
        self.tips.iter().filter(|t| t.alive).count()
    }

    /// Alive tips as the scaled empirical measure.
    pub fn snapshot_empirical(&self) -> EmpiricalMeasure {
        EmpiricalMeasure {
            atoms: self.tips.iter().filter(|t| t.alive).map(|t| (t.x, t.v)).collect(),
            weight: 1.0 / self.n_initial as f64,
        }
    }

    /// One Euler-Maruyama substep for every alive tip; each tip lays one
    /// vessel segment. The position update uses the pre-update velocity.
    pub fn em_step(&mut self, dt: f64) -> Result<()> {
        let dim = self.setup.params.dim;
        let k1 = self.setup.params.k1;
        let sigma = self.setup.params.sigma;
        let sqrt_dt = dt.sqrt();
        let t0 = self.time;
        let t1 = self.time + dt;
        let margin = self
            .setup
            .absorption_kernel
            .support_radius
            .max(self.setup.anastomosis_kernel.support_radius);
        let box_lo = self.setup.field_geom.lo;
        let box_hi = self.setup.field_geom.hi();
        for i in 0..self.tips.len() {
            if !self.tips[i].alive {
                continue;
            }
            let x_old = self.tips[i].x;
            let v_old = self.tips[i].v;
            let grad = self.c_field.grad_interp(&x_old);
            let force = self.setup.params.chemo_force(&grad);
            let tip = &mut self.tips[i];
            let mut v_new = v_old;
            for k in 0..dim {
                let noise: f64 = tip.rng.sample(StandardNormal);
                v_new[k] += (-k1 * v_old[k] + force[k]) * dt + sigma * sqrt_dt * noise;
            }
            let x_new = geom::axpy(&x_old, dt, &v_old);
            if !geom::is_finite(&x_new) || !geom::is_finite(&v_new) {
                return Err(AngioError::Numerical {
                    step: self.step,
                    msg: format!("tip {} reached a non-finite state; reduce dt", tip.id),
                });
            }
            tip.x = x_new;
            tip.v = v_new;
            let speed = geom::norm(&v_new);
            let owner = tip.id;
            for k in 0..dim {
                if x_new[k] - box_lo[k] < margin || box_hi[k] - x_new[k] < margin {
                    self.boundary_proximity_hits += 1;
                    break;
                }
            }
            self.network.push(Segment {
                start: x_old,
                end: x_new,
                speed_weight: speed,
                owner_tip: owner,
                t0,
                t1,
            });
        }
        Ok(())
    }

    fn spawn(&mut self, births: Vec<(u64, Vect)>, kind: EventKind, t_event: f64) -> Vec<u64> {
        let mut children = Vec::with_capacity(births.len());
        for (parent, location) in births {
            let id = self.next_tip_id;
            self.next_tip_id += 1;
            let mut rng = substream2(self.master_seed, 1, id);
            let v = self.setup.offspring.sample(&mut rng);
            self.tips.push(Tip {
                id,
                x: location,
                v,
                birth_time: t_event,
                death_time: None,
                alive: true,
                rng,
            });
            self.events.push(Event { time: t_event, kind, location, parent, child: Some(id) });
            children.push(id);
        }
        children
    }

    /// Tip branching: each alive tip spawns with probability
    /// `1 - exp(-alpha(C(X)) g0 dt)`.
    pub fn sample_tip_branching(&mut self, dt: f64) -> Result<Vec<u64>> {
        let g0 = self.setup.offspring.g0();
        let t_event = self.time + dt;
        let mut births = Vec::new();
        let n_existing = self.tips.len();
        for i in 0..n_existing {
            if !self.tips[i].alive {
                continue;
            }
            let c = self.c_field.value_interp(&self.tips[i].x).max(0.0);
            let rate = self.setup.params.alpha_rate(c)? * g0;
            if rate <= 0.0 {
                continue;
            }
            let p = 1.0 - (-rate * dt).exp();
            let tip = &mut self.tips[i];
            let u: f64 = tip.rng.random();
            if u < p {
                births.push((tip.id, tip.x));
            }
        }
        Ok(self.spawn(births, EventKind::TipBranch, t_event))
    }

    /// Vessel branching: a tip's vessel carries rate
    /// `beta(C(point)) g0 * (arc-speed integral)`; realized by thinning with
    /// the `beta1` bound and accepting with `beta(C(point))/beta1` at a point
    /// chosen uniformly in the speed-weighted length.
    pub fn sample_vessel_branching(&mut self, dt: f64) -> Result<Vec<u64>> {
        let g0 = self.setup.offspring.g0();
        let beta1 = self.setup.params.beta1;
        let t_event = self.time + dt;
        let mut births = Vec::new();
        if beta1 <= 0.0 || self.network.is_empty() {
            return Ok(Vec::new());
        }
        for owner in self.network.tips_with_vessels() {
            let arc = self.network.tip_arc(owner);
            if arc <= 0.0 {
                continue;
            }
            let p = 1.0 - (-beta1 * g0 * arc * dt).exp();
            let idx = owner as usize;
            debug_assert_eq!(self.tips[idx].id, owner);
            let u: f64 = self.tips[idx].rng.random();
            if u >= p {
                continue;
            }
            let u_pos: f64 = self.tips[idx].rng.random();
            let point = match self.network.sample_point_on_tip_vessel(owner, u_pos) {
                Some(p) => p,
                None => continue,
            };
            let c = self.c_field.value_interp(&point).max(0.0);
            let accept = self.setup.params.beta_rate(c)? / beta1;
            let u_acc: f64 = self.tips[idx].rng.random();
            if u_acc < accept {
                births.push((owner, point));
            }
        }
        Ok(self.spawn(births, EventKind::VesselBranch, t_event))
    }

    /// Anastomosis: each alive tip dies with probability
    /// `1 - exp(-gamma h(density) dt)`; its vessel stays in the network.
    /// Tips born during the current step are not yet candidates.
    pub fn sample_anastomosis(&mut self, dt: f64) -> Result<Vec<u64>> {
        let gamma = self.setup.params.gamma;
        let t_start = self.time;
        let t_event = self.time + dt;
        let mut killed: Vec<usize> = Vec::new();
        if gamma <= 0.0 {
            return Ok(Vec::new());
        }
        for i in 0..self.tips.len() {
            let tip = &self.tips[i];
            if !tip.alive || tip.birth_time > t_start {
                continue;
            }
            let exclude = if self.setup.exclude_own_window > 0.0 {
                Some((tip.id, t_event - self.setup.exclude_own_window))
            } else {
                None
            };
            let dens = self.network.density(
                &tip.x,
                &self.setup.anastomosis_kernel,
                self.n_initial,
                exclude,
            );
            let rate = gamma * saturation_h(dens)?;
            if rate <= 0.0 {
                continue;
            }
            let p = 1.0 - (-rate * dt).exp();
            let tip = &mut self.tips[i];
            let u: f64 = tip.rng.random();
            if u < p {
                killed.push(i);
            }
        }
        let mut ids = Vec::with_capacity(killed.len());
        for i in killed {
            let tip = &mut self.tips[i];
            tip.alive = false;
            tip.death_time = Some(t_event);
            let (id, x) = (tip.id, tip.x);
            self.events.push(Event {
                time: t_event,
                kind: EventKind::Anastomosis,
                location: x,
                parent: id,
                child: None,
            });
            ids.push(id);
        }
        Ok(ids)
    }

    /// One full step: motion, absorption, field update, branching, killing.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.setup.dt;
        self.em_step(dt)?;
        let q = self.snapshot_empirical();
        let geom_check = self.setup.field_geom.clone();
        accumulate_eta(&mut self.eta_field, &q, &self.setup.absorption_kernel, dt, &geom_check)?;
        let params = self.setup.params.clone();
        self.taf.step(&mut self.c_field, &self.eta_field, &params, dt, self.step)?;
        self.sample_tip_branching(dt)?;
        self.sample_vessel_branching(dt)?;
        self.sample_anastomosis(dt)?;
        self.time += dt;
        self.step += 1;
        Ok(())
    }

    pub fn source_sup(&self) -> f64 {
        self.taf.source_sup()
    }
}

/// Per-tip state captured every step when quadratic-variation analysis is
/// requested.
#[derive(Debug, Clone)]
pub struct StepTipState {
    pub x: Vect,
    pub v: Vect,
    pub alive: bool,
    /// Concentration interpolated at the tip.
    pub c_at_tip: f64,
    /// Saturated network density at the tip.
    pub h_at_tip: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Record snapshots every this many steps (0 disables snapshots).
    pub snapshot_stride: usize,
    /// Keep per-step tip states and concentration fields (needed for the
    /// martingale quadratic-variation analysis).
    pub record_steps: bool,
    /// Run the maximum-principle scan after every field update.
    pub check_bounds: bool,
}

/// Everything a finished run hands to the analysis and output layers.
pub struct TrajectoryRecord {
    pub seed: u64,
    pub dt: f64,
    pub n_initial: usize,
    /// Step-end times, starting with 0.
    pub times: Vec<f64>,
    /// Alive counts aligned with `times`.
    pub n_alive: Vec<usize>,
    pub snapshots: Vec<(f64, EmpiricalMeasure)>,
    pub field_frames: Vec<(f64, ScalarField, AbsorptionField)>,
    pub events: Vec<Event>,
    pub per_step_tips: Option<Vec<Vec<StepTipState>>>,
    pub per_step_fields: Option<Vec<ScalarField>>,
    pub bounds: Vec<(f64, BoundsReport)>,
    pub final_network: VesselNetwork,
    pub boundary_proximity_hits: u64,
    pub warnings: Vec<String>,
}

impl TrajectoryRecord {
    pub fn sup_ratio(&self) -> f64 {
        let max = self.n_alive.iter().copied().max().unwrap_or(0);
        max as f64 / self.n_initial as f64
    }

    pub fn min_mass(&self) -> f64 {
        let min = self.n_alive.iter().copied().min().unwrap_or(0);
        min as f64 / self.n_initial as f64
    }

    /// Replay the event log from the initial count; equals `n_alive` when
    /// bookkeeping is consistent.
    pub fn replay_counts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.times.len());
        let mut n = self.n_initial as i64;
        let mut ev = self.events.iter().peekable();
        for &t in &self.times {
            while let Some(e) = ev.peek() {
                if e.time <= t + 1e-12 {
                    match e.kind {
                        EventKind::TipBranch | EventKind::VesselBranch => n += 1,
                        EventKind::Anastomosis => n -= 1,
                    }
                    ev.next();
                } else {
                    break;
                }
            }
            out.push(n.max(0) as usize);
        }
        out
    }
}

/// Run the coupled system for `setup.t_end` and collect records.
pub fn run(setup: &SimSetup, seed: u64, opts: &RunOptions) -> Result<TrajectoryRecord> {
    let mut state = SimulationState::new(setup.clone(), seed)?;
    let n_steps = setup.n_steps();
    let mut record = TrajectoryRecord {
        seed,
        dt: setup.dt,
        n_initial: setup.n_tips,
        times: Vec::with_capacity(n_steps + 1),
        n_alive: Vec::with_capacity(n_steps + 1),
        snapshots: Vec::new(),
        field_frames: Vec::new(),
        events: Vec::new(),
        per_step_tips: if opts.record_steps { Some(Vec::with_capacity(n_steps)) } else { None },
        per_step_fields: if opts.record_steps { Some(Vec::with_capacity(n_steps)) } else { None },
        bounds: Vec::new(),
        final_network: VesselNetwork::new(setup.anastomosis_kernel.support_radius, setup.params.dim),
        boundary_proximity_hits: 0,
        warnings: setup.thinning_warnings(),
    };
    record.times.push(0.0);
    record.n_alive.push(state.n_alive());
    if opts.snapshot_stride > 0 {
        record.snapshots.push((0.0, state.snapshot_empirical()));
        record.field_frames.push((0.0, state.c_field.clone(), state.eta_field.clone()));
    }
    if opts.check_bounds {
        let report = field_bounds_check(&state.c_field, &setup.params, state.source_sup(), 0.0)?;
        record.bounds.push((0.0, report));
    }
    for s in 1..=n_steps {
        state.step()?;
        record.times.push(state.time);
        record.n_alive.push(state.n_alive());
        if opts.snapshot_stride > 0 && (s % opts.snapshot_stride == 0 || s == n_steps) {
            record.snapshots.push((state.time, state.snapshot_empirical()));
            record.field_frames.push((state.time, state.c_field.clone(), state.eta_field.clone()));
        }
        if opts.check_bounds {
            let report =
                field_bounds_check(&state.c_field, &setup.params, state.source_sup(), state.time)?;
            record.bounds.push((state.time, report));
        }
        if let Some(per_step) = record.per_step_tips.as_mut() {
            let mut rows = Vec::with_capacity(state.tips.len());
            for tip in &state.tips {
                let c = state.c_field.value_interp(&tip.x).max(0.0);
                let dens = state.network.density(
                    &tip.x,
                    &setup.anastomosis_kernel,
                    state.n_initial,
                    None,
                );
                rows.push(StepTipState {
                    x: tip.x,
                    v: tip.v,
                    alive: tip.alive,
                    c_at_tip: c,
                    h_at_tip: saturation_h(dens)?,
                });
            }
            per_step.push(rows);
        }
        if let Some(fields) = record.per_step_fields.as_mut() {
            fields.push(state.c_field.clone());
        }
    }
    record.events = std::mem::take(&mut state.events);
    record.boundary_proximity_hits = state.boundary_proximity_hits;
    record.final_network = state.network;
    Ok(record)
}

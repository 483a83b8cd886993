//! Fixed-step integration of the coupled two-layer sampled-data system.
//!
//! Per step, in order: compute sampling errors, evaluate the active
//! trigger(s), reset held values and log an event on fire, evaluate the
//! derivatives with the possibly-updated holds, then Euler-advance the
//! plant states, the internal variables, and the clock together. Events
//! are detected at step granularity; the reference step size (1e-5 s)
//! sits far below every inter-event time of interest.
//!
//! A run is strictly sequential and fully deterministic: identical inputs
//! produce bit-identical logs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::attack::AttackModel;
use crate::design::{LayerDesign, TriggerParams};
use crate::error::{Error, Result};
use crate::triggers::{
    auxiliary_condition, internal_step, miet_auxiliary, miet_physical, miet_single,
    physical_condition, single_condition, TriggerState,
};

/// How the inter-layer channel is gated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// No auxiliary coupling (`beta = 0`); triggers disabled.
    Baseline,
    /// Joint state-based condition; both layers sample together.
    Single,
    /// Layer-wise dynamic conditions.
    Dynamic,
}

/// Step size, horizon, leader state, and initial conditions for one run.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub x0: f64,
    pub x_init: DVector<f64>,
    pub z_init: DVector<f64>,
    /// Trajectory rows are kept every `decimation` steps; events never are.
    pub decimation: usize,
}

impl SimConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1.0) {
            return Err(Error::Config(format!("dt = {} must be in (0, 1]", self.dt)));
        }
        if self.horizon < self.dt {
            return Err(Error::Config("horizon must be at least one step".into()));
        }
        if self.x_init.len() != n || self.z_init.len() != n {
            return Err(Error::Config(format!(
                "initial state length must be {n} (got x: {}, z: {})",
                self.x_init.len(),
                self.z_init.len()
            )));
        }
        if self.decimation == 0 {
            return Err(Error::Config("decimation stride must be positive".into()));
        }
        Ok(())
    }
}

/// Instantaneous simulation state. Sampling errors are derived as
/// `e_x = x - x_bar`, `e_z = z - z_bar`, never stored.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub x_bar: DVector<f64>,
    pub z_bar: DVector<f64>,
    pub trigger: TriggerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLayer {
    Physical,
    Auxiliary,
    Joint,
}

impl std::fmt::Display for EventLayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EventLayer::Physical => write!(f, "physical"),
            EventLayer::Auxiliary => write!(f, "auxiliary"),
            EventLayer::Joint => write!(f, "joint"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventRecord {
    pub t: f64,
    pub layer: EventLayer,
    pub gap_since_last: f64,
    pub lhs: f64,
    pub threshold: f64,
}

/// One decimated trajectory sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub x_bar: Vec<f64>,
    pub z_bar: Vec<f64>,
    pub eta: f64,
    pub nu: f64,
    pub d: Vec<f64>,
    pub dx_norm: f64,
    pub dz_norm: f64,
    pub v: f64,
    pub u: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub stride: usize,
    pub rows: Vec<TrajRow>,
}

/// Stats around the attracting ellipse `|x~|^2/g1^2 + |z|^2/g2^2 < 1`.
///
/// Entry means an outside-to-inside crossing; a trajectory that starts
/// inside and never leaves records no entry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EllipseStats {
    pub g1: f64,
    pub g2: f64,
    pub entry_t: Option<f64>,
    pub u_entry: Option<f64>,
    pub u_max_after_entry: Option<f64>,
    pub quad_max_after_entry: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub mode: RunMode,
    pub n_agents: usize,
    pub steps: u64,
    pub dt: f64,
    pub horizon: f64,
    pub x0: f64,
    pub beta: f64,
    pub final_x: Vec<f64>,
    pub final_z: Vec<f64>,
    pub final_max_x_err: f64,
    pub final_max_z_abs: f64,
    pub x_avg_initial: f64,
    pub x_avg_final: f64,
    /// Mean of |x0 - x_avg(t)| over the final 10% of the horizon.
    pub steady_mean_abs_err: f64,
    pub events_physical: u64,
    pub events_auxiliary: u64,
    pub events_joint: u64,
    pub min_gap_physical: Option<f64>,
    pub min_gap_auxiliary: Option<f64>,
    pub min_gap_joint: Option<f64>,
    /// Post-hoc maxima of |xdot| and |zdot| over the run.
    pub m_x: f64,
    pub m_z: f64,
    pub observed_attack_bound: f64,
    /// A-posteriori analytic MIET certificates from the post-hoc m_x, m_z.
    pub tau_x: Option<f64>,
    pub tau_z: Option<f64>,
    pub tau_joint: Option<f64>,
    pub eta_min: f64,
    pub nu_min: f64,
    pub v_max: f64,
    pub u_max: f64,
    /// min over the run of U - V; nonnegative whenever eta0, nu0 >= 0.
    pub min_u_minus_v: f64,
    pub max_abs_udot: f64,
    pub ellipse: Option<EllipseStats>,
    pub table_clamp_count: u64,
    /// Set when the run aborted early (non-finite state); logs up to the
    /// abort instant are preserved.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: TrajectoryLog,
    pub events: Vec<EventRecord>,
    pub summary: RunSummary,
}

/// Continuous-time derivatives in plant coordinates:
/// `xdot = A x + beta K z_bar + B x0 + d`, `zdot = H z - beta G x_bar + beta D x0`.
///
/// The attack enters only the physical layer.
pub fn derivative(
    design: &LayerDesign,
    x: &DVector<f64>,
    z: &DVector<f64>,
    x_bar: &DVector<f64>,
    z_bar: &DVector<f64>,
    d: &DVector<f64>,
    x0: f64,
) -> (DVector<f64>, DVector<f64>) {
    let beta = design.beta;
    let mut dx = &design.a * x;
    dx.gemv(beta, &design.k, z_bar, 1.0);
    dx.axpy(x0, &design.b, 1.0);
    dx += d;
    let mut dz = &design.h * z;
    dz.gemv(-beta, &design.g, x_bar, 1.0);
    dz.axpy(beta * x0, &design.d, 1.0);
    (dx, dz)
}

/// Same derivatives in consensus-error coordinates:
/// `x~dot = A x~ + beta K z - beta K e_z + d`,
/// `zdot = H z - beta G x~ + beta G e_x`.
pub fn derivative_error_form(
    design: &LayerDesign,
    x_tilde: &DVector<f64>,
    z: &DVector<f64>,
    e_x: &DVector<f64>,
    e_z: &DVector<f64>,
    d: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let beta = design.beta;
    let mut dx = &design.a * x_tilde;
    dx.gemv(beta, &design.k, z, 1.0);
    dx.gemv(-beta, &design.k, e_z, 1.0);
    dx += d;
    let mut dz = &design.h * z;
    dz.gemv(-beta, &design.g, x_tilde, 1.0);
    dz.gemv(beta, &design.g, e_x, 1.0);
    (dx, dz)
}

/// Verifies the origin is the only equilibrium of the error dynamics by
/// checking the 2N x 2N block matrix `[[A, beta K], [-beta G, H]]` for a
/// trivial null space.
pub fn check_unique_equilibrium(design: &LayerDesign) -> Result<()> {
    let n = design.n_agents();
    let beta = design.beta;
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&design.a);
    m.view_mut((0, n), (n, n)).copy_from(&(&design.k * beta));
    m.view_mut((n, 0), (n, n)).copy_from(&(&design.g * -beta));
    m.view_mut((n, n), (n, n)).copy_from(&design.h);
    let det = m.lu().determinant();
    if det.abs() < 1e-12 {
        return Err(Error::Singular(format!(
            "coupled error dynamics have a nontrivial null space (det = {det:.3e})"
        )));
    }
    Ok(())
}

struct GapTracker {
    count: u64,
    min_gap: Option<f64>,
}

impl GapTracker {
    fn new() -> Self {
        Self { count: 0, min_gap: None }
    }

    fn record(&mut self, gap: f64) {
        self.count += 1;
        self.min_gap = Some(self.min_gap.map_or(gap, |m: f64| m.min(gap)));
    }
}

/// Owns the mutable state and scratch buffers of one run.
pub struct Simulator<'a> {
    design: &'a LayerDesign,
    attack: &'a AttackModel,
    params: &'a TriggerParams,
    mode: RunMode,
    config: SimConfig,
    state: SimState,
    step_index: u64,
    total_steps: u64,
    // scratch
    e_x: DVector<f64>,
    e_z: DVector<f64>,
    x_tilde: DVector<f64>,
    d: DVector<f64>,
    dx: DVector<f64>,
    dz: DVector<f64>,
    // logs
    trajectory: TrajectoryLog,
    events: Vec<EventRecord>,
    // trackers
    phys_events: GapTracker,
    aux_events: GapTracker,
    joint_events: GapTracker,
    m_x: f64,
    m_z: f64,
    observed_attack_bound: f64,
    eta_min: f64,
    nu_min: f64,
    v_max: f64,
    u_max: f64,
    min_u_minus_v: f64,
    max_abs_udot: f64,
    prev_u: Option<f64>,
    ellipse: Option<EllipseStats>,
    ellipse_outside_seen: bool,
    steady_err_sum: f64,
    steady_err_count: u64,
    table_clamp_count: u64,
}

impl<'a> Simulator<'a> {
    pub fn new(
        design: &'a LayerDesign,
        attack: &'a AttackModel,
        params: &'a TriggerParams,
        mode: RunMode,
        config: SimConfig,
    ) -> Result<Self> {
        let n = design.n_agents();
        config.validate(n)?;
        if mode == RunMode::Baseline && design.beta != 0.0 {
            return Err(Error::Config("baseline mode requires beta = 0".into()));
        }
        if mode != RunMode::Baseline {
            if design.beta <= 0.0 {
                return Err(Error::Config("triggered modes require beta > 0".into()));
            }
            check_unique_equilibrium(design)?;
        }
        let total_steps = (config.horizon / config.dt).round() as u64;
        let state = SimState {
            t: 0.0,
            x: config.x_init.clone(),
            z: config.z_init.clone(),
            x_bar: config.x_init.clone(),
            z_bar: config.z_init.clone(),
            trigger: TriggerState::new(params.eta0, params.nu0),
        };
        let ellipse = (mode == RunMode::Dynamic).then(|| {
            let denom_x = design.lambda_min_qx - params.c3 - params.c1 * design.beta;
            let denom_z = design.lambda_min_qz - params.c2 * design.beta;
            EllipseStats {
                g1: ((params.epsilon + params.mu) / denom_x).sqrt(),
                g2: ((params.epsilon + params.mu) / denom_z).sqrt(),
                entry_t: None,
                u_entry: None,
                u_max_after_entry: None,
                quad_max_after_entry: None,
            }
        });
        Ok(Self {
            design,
            attack,
            params,
            mode,
            config,
            state,
            step_index: 0,
            total_steps,
            e_x: DVector::zeros(n),
            e_z: DVector::zeros(n),
            x_tilde: DVector::zeros(n),
            d: DVector::zeros(n),
            dx: DVector::zeros(n),
            dz: DVector::zeros(n),
            trajectory: TrajectoryLog { stride: 0, rows: Vec::new() },
            events: Vec::new(),
            phys_events: GapTracker::new(),
            aux_events: GapTracker::new(),
            joint_events: GapTracker::new(),
            m_x: 0.0,
            m_z: 0.0,
            observed_attack_bound: 0.0,
            eta_min: params.eta0,
            nu_min: params.nu0,
            v_max: f64::NEG_INFINITY,
            u_max: f64::NEG_INFINITY,
            min_u_minus_v: f64::INFINITY,
            max_abs_udot: 0.0,
            prev_u: None,
            ellipse,
            ellipse_outside_seen: false,
            steady_err_sum: 0.0,
            steady_err_count: 0,
            table_clamp_count: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    /// Advances one step. Returns the abort error on non-finite state.
    pub fn step(&mut self) -> Result<()> {
        let t = self.state.t;
        let dt = self.config.dt;

        // (1) sampling errors
        self.e_x.copy_from(&self.state.x);
        self.e_x -= &self.state.x_bar;
        self.e_z.copy_from(&self.state.z);
        self.e_z -= &self.state.z_bar;
        self.x_tilde.copy_from(&self.state.x);
        self.x_tilde.add_scalar_mut(-self.config.x0);

        // (2)/(3) trigger evaluation and sample-and-hold resets
        match self.mode {
            RunMode::Baseline => {}
            RunMode::Dynamic => {
                let dec =
                    physical_condition(self.params, self.design, &self.e_x, self.state.trigger.eta);
                if dec.fire {
                    self.state.x_bar.copy_from(&self.state.x);
                    self.e_x.fill(0.0);
                    let gap = t - self.state.trigger.last_event_physical;
                    self.state.trigger.last_event_physical = t;
                    self.phys_events.record(gap);
                    self.events.push(EventRecord {
                        t,
                        layer: EventLayer::Physical,
                        gap_since_last: gap,
                        lhs: dec.lhs,
                        threshold: dec.threshold,
                    });
                }
                let dec =
                    auxiliary_condition(self.params, self.design, &self.e_z, self.state.trigger.nu);
                if dec.fire {
                    self.state.z_bar.copy_from(&self.state.z);
                    self.e_z.fill(0.0);
                    let gap = t - self.state.trigger.last_event_auxiliary;
                    self.state.trigger.last_event_auxiliary = t;
                    self.aux_events.record(gap);
                    self.events.push(EventRecord {
                        t,
                        layer: EventLayer::Auxiliary,
                        gap_since_last: gap,
                        lhs: dec.lhs,
                        threshold: dec.threshold,
                    });
                }
            }
            RunMode::Single => {
                let dec = single_condition(
                    self.design,
                    self.params,
                    &self.x_tilde,
                    &self.state.z,
                    &self.e_x,
                    &self.e_z,
                );
                if dec.fire {
                    self.state.x_bar.copy_from(&self.state.x);
                    self.state.z_bar.copy_from(&self.state.z);
                    self.e_x.fill(0.0);
                    self.e_z.fill(0.0);
                    let gap = t - self.state.trigger.last_event_joint;
                    self.state.trigger.last_event_joint = t;
                    self.joint_events.record(gap);
                    self.events.push(EventRecord {
                        t,
                        layer: EventLayer::Joint,
                        gap_since_last: gap,
                        lhs: dec.lhs,
                        threshold: dec.threshold,
                    });
                }
            }
        }

        // attack vector; only the logger and the physical dynamics see it
        let clamped = self
            .attack
            .evaluate_into(&mut self.d, self.design, &self.state.x, self.config.x0, t);
        if clamped {
            self.table_clamp_count += 1;
        }

        // (4) derivatives with the possibly-updated holds
        let beta = self.design.beta;
        self.dx.gemv(1.0, &self.design.a, &self.state.x, 0.0);
        if beta != 0.0 {
            self.dx.gemv(beta, &self.design.k, &self.state.z_bar, 1.0);
        }
        self.dx.axpy(self.config.x0, &self.design.b, 1.0);
        self.dx += &self.d;
        self.dz.gemv(1.0, &self.design.h, &self.state.z, 0.0);
        if beta != 0.0 {
            self.dz.gemv(-beta, &self.design.g, &self.state.x_bar, 1.0);
            self.dz.axpy(beta * self.config.x0, &self.design.d, 1.0);
        }

        let dx_norm = self.dx.norm();
        let dz_norm = self.dz.norm();
        if !(dx_norm.is_finite() && dz_norm.is_finite()) {
            return Err(Error::NonFinite { t });
        }
        self.m_x = self.m_x.max(dx_norm);
        self.m_z = self.m_z.max(dz_norm);
        self.observed_attack_bound = self.observed_attack_bound.max(self.d.norm());

        self.observe(dx_norm, dz_norm);

        // (5) Euler advance of x, z, eta, nu, t in lock-step
        self.state.x.axpy(dt, &self.dx, 1.0);
        self.state.z.axpy(dt, &self.dz, 1.0);
        self.state.trigger =
            internal_step(&self.state.trigger, &self.e_x, &self.e_z, self.params, dt)?;
        self.step_index += 1;
        self.state.t = self.step_index as f64 * dt;
        Ok(())
    }

    /// Lyapunov values, extrema, ellipse entry, steady-state window, and
    /// the decimated trajectory row for the current (pre-advance) state.
    fn observe(&mut self, dx_norm: f64, dz_norm: f64) {
        let state = &self.state;
        let t = state.t;
        let v = quad_form(&self.design.px, &self.x_tilde) + quad_form(&self.design.pz, &state.z);
        let u = v + state.trigger.eta + state.trigger.nu;

        self.eta_min = self.eta_min.min(state.trigger.eta);
        self.nu_min = self.nu_min.min(state.trigger.nu);
        self.v_max = self.v_max.max(v);
        self.u_max = self.u_max.max(u);
        self.min_u_minus_v = self.min_u_minus_v.min(u - v);
        if let Some(prev) = self.prev_u {
            let udot = (u - prev) / self.config.dt;
            self.max_abs_udot = self.max_abs_udot.max(udot.abs());
        }
        self.prev_u = Some(u);

        if let Some(ellipse) = &mut self.ellipse {
            let quad = self.x_tilde.norm_squared() / (ellipse.g1 * ellipse.g1)
                + state.z.norm_squared() / (ellipse.g2 * ellipse.g2);
            match ellipse.entry_t {
                None => {
                    if quad >= 1.0 {
                        self.ellipse_outside_seen = true;
                    } else if self.ellipse_outside_seen {
                        ellipse.entry_t = Some(t);
                        ellipse.u_entry = Some(u);
                        ellipse.u_max_after_entry = Some(u);
                        ellipse.quad_max_after_entry = Some(quad);
                    }
                }
                Some(_) => {
                    ellipse.u_max_after_entry =
                        Some(ellipse.u_max_after_entry.unwrap().max(u));
                    ellipse.quad_max_after_entry =
                        Some(ellipse.quad_max_after_entry.unwrap().max(quad));
                }
            }
        }

        if t >= 0.9 * self.config.horizon {
            let x_avg = state.x.mean();
            self.steady_err_sum += (self.config.x0 - x_avg).abs();
            self.steady_err_count += 1;
        }

        if self.step_index.is_multiple_of(self.config.decimation as u64) {
            self.trajectory.rows.push(TrajRow {
                t,
                x: state.x.iter().copied().collect(),
                z: state.z.iter().copied().collect(),
                x_bar: state.x_bar.iter().copied().collect(),
                z_bar: state.z_bar.iter().copied().collect(),
                eta: state.trigger.eta,
                nu: state.trigger.nu,
                d: self.d.iter().copied().collect(),
                dx_norm,
                dz_norm,
                v,
                u,
            });
        }
    }

    /// Runs to the horizon and assembles logs plus the summary.
    pub fn run(mut self) -> RunOutput {
        self.trajectory.stride = self.config.decimation;
        let mut aborted = None;
        while self.step_index < self.total_steps {
            if let Err(e) = self.step() {
                aborted = Some(e.to_string());
                break;
            }
        }
        self.finish(aborted)
    }

    fn finish(self, aborted: Option<String>) -> RunOutput {
        let state = &self.state;
        let x0 = self.config.x0;
        let final_max_x_err = state.x.iter().map(|v| (v - x0).abs()).fold(0.0, f64::max);
        let final_max_z_abs = state.z.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let tau_x = (self.mode == RunMode::Dynamic && self.m_x > 0.0)
            .then(|| miet_physical(self.params, self.design, self.m_x));
        let tau_z = (self.mode == RunMode::Dynamic && self.m_z > 0.0)
            .then(|| miet_auxiliary(self.params, self.design, self.m_z));
        let tau_joint = (self.mode == RunMode::Single && self.m_x > 0.0 && self.m_z > 0.0)
            .then(|| miet_single(self.params, self.design, self.m_x, self.m_z));
        let summary = RunSummary {
            mode: self.mode,
            n_agents: self.design.n_agents(),
            steps: self.step_index,
            dt: self.config.dt,
            horizon: self.config.horizon,
            x0,
            beta: self.design.beta,
            final_x: state.x.iter().copied().collect(),
            final_z: state.z.iter().copied().collect(),
            final_max_x_err,
            final_max_z_abs,
            x_avg_initial: self.config.x_init.mean(),
            x_avg_final: state.x.mean(),
            steady_mean_abs_err: if self.steady_err_count > 0 {
                self.steady_err_sum / self.steady_err_count as f64
            } else {
                f64::NAN
            },
            events_physical: self.phys_events.count,
            events_auxiliary: self.aux_events.count,
            events_joint: self.joint_events.count,
            min_gap_physical: self.phys_events.min_gap,
            min_gap_auxiliary: self.aux_events.min_gap,
            min_gap_joint: self.joint_events.min_gap,
            m_x: self.m_x,
            m_z: self.m_z,
            observed_attack_bound: self.observed_attack_bound,
            tau_x,
            tau_z,
            tau_joint,
            eta_min: self.eta_min,
            nu_min: self.nu_min,
            v_max: self.v_max,
            u_max: self.u_max,
            min_u_minus_v: self.min_u_minus_v,
            max_abs_udot: self.max_abs_udot,
            ellipse: self.ellipse,
            table_clamp_count: self.table_clamp_count,
            aborted,
        };
        RunOutput { trajectory: self.trajectory, events: self.events, summary }
    }
}

fn quad_form(p: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    // P is diagonal throughout this crate
    let mut acc = 0.0;
    for i in 0..v.len() {
        acc += p[(i, i)] * v[i] * v[i];
    }
    acc
}

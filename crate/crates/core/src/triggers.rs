//! Event-triggering conditions and analytic minimum inter-event time
//! (MIET) bounds.
//!
//! Two mechanisms are supported. The single state-based condition compares
//! a weighted sum of both sampling-error norms against a state-dependent
//! budget and resets both held values at once. The layer-wise dynamic
//! mechanism gives each layer its own condition, relaxed by an internal
//! variable (`eta` for the physical layer, `nu` for the auxiliary layer)
//! that low-pass filters the squared sampling error.
//!
//! All conditions fire on `>=`, matching the inf-definition of the event
//! sequences. Thresholds are strictly positive at zero error, so a freshly
//! reset layer can never re-fire immediately.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::{LayerDesign, TriggerParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMode {
    /// One joint condition; both layers sample at the same instants.
    SingleStateBased,
    /// Separate conditions with internal dynamic variables per layer.
    LayerwiseDynamic,
}

/// Internal variables and per-layer last-event times for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerState {
    pub eta: f64,
    pub nu: f64,
    pub last_event_physical: f64,
    pub last_event_auxiliary: f64,
    pub last_event_joint: f64,
}

impl TriggerState {
    /// Event sequences are seeded at t = 0.
    pub fn new(eta0: f64, nu0: f64) -> Self {
        Self {
            eta: eta0,
            nu: nu0,
            last_event_physical: 0.0,
            last_event_auxiliary: 0.0,
            last_event_joint: 0.0,
        }
    }
}

/// Outcome of one trigger evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TriggerDecision {
    pub lhs: f64,
    pub threshold: f64,
    pub fire: bool,
}

/// Joint state-based condition.
///
/// lhs = (beta/c1)|Px K|^2 |e_z|^2 + (beta/c2)|Pz G|^2 |e_x|^2;
/// threshold = kappa [ (lambda_min(Qx) - c3 - c1 beta)|x~|^2
///                   + (lambda_min(Qz) - c2 beta)|z|^2
///                   + epsilon - attack term ].
pub fn single_condition(
    design: &LayerDesign,
    params: &TriggerParams,
    x_tilde: &DVector<f64>,
    z: &DVector<f64>,
    e_x: &DVector<f64>,
    e_z: &DVector<f64>,
) -> TriggerDecision {
    let beta = design.beta;
    let lhs = (beta / params.c1) * design.px_k_norm.powi(2) * e_z.norm_squared()
        + (beta / params.c2) * design.pz_g_norm.powi(2) * e_x.norm_squared();
    let threshold = params.kappa
        * ((design.lambda_min_qx - params.c3 - params.c1 * beta) * x_tilde.norm_squared()
            + (design.lambda_min_qz - params.c2 * beta) * z.norm_squared()
            + params.epsilon
            - params.attack_term(design));
    TriggerDecision { lhs, threshold, fire: lhs >= threshold }
}

/// Physical-layer dynamic condition:
/// fire iff `|e_x|^2 >= c2 (eta + Omega) / (beta |Pz G|^2 + sigma1 c2)`.
pub fn physical_condition(
    params: &TriggerParams,
    design: &LayerDesign,
    e_x: &DVector<f64>,
    eta: f64,
) -> TriggerDecision {
    let lhs = e_x.norm_squared();
    let threshold = params.c2 * (eta + params.omega)
        / (design.beta * design.pz_g_norm.powi(2) + params.sigma1 * params.c2);
    TriggerDecision { lhs, threshold, fire: lhs >= threshold }
}

/// Auxiliary-layer dynamic condition:
/// fire iff `|e_z|^2 >= c1 (nu + mu) / (beta |Px K|^2 + sigma2 c1)`.
pub fn auxiliary_condition(
    params: &TriggerParams,
    design: &LayerDesign,
    e_z: &DVector<f64>,
    nu: f64,
) -> TriggerDecision {
    let lhs = e_z.norm_squared();
    let threshold = params.c1 * (nu + params.mu)
        / (design.beta * design.px_k_norm.powi(2) + params.sigma2 * params.c1);
    TriggerDecision { lhs, threshold, fire: lhs >= threshold }
}

/// Forward-Euler update of the internal variables:
/// `eta' = eta + dt (-eta + sigma1 |e_x|^2)`, likewise for `nu`.
///
/// Requires `dt <= 1`, which keeps the update nonnegative for nonnegative
/// initial values.
pub fn internal_step(
    state: &TriggerState,
    e_x: &DVector<f64>,
    e_z: &DVector<f64>,
    params: &TriggerParams,
    dt: f64,
) -> Result<TriggerState> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "internal-variable step requires 0 < dt <= 1, got {dt}"
        )));
    }
    let mut next = *state;
    next.eta = (1.0 - dt) * state.eta + dt * params.sigma1 * e_x.norm_squared();
    next.nu = (1.0 - dt) * state.nu + dt * params.sigma2 * e_z.norm_squared();
    Ok(next)
}

/// Analytic MIET bound for the physical-layer dynamic condition, given a
/// bound `m_x >= max |xdot|` over the run.
pub fn miet_physical(params: &TriggerParams, design: &LayerDesign, m_x: f64) -> f64 {
    assert!(m_x > 0.0);
    (params.c2 * params.omega
        / (design.beta * design.pz_g_norm.powi(2) + params.sigma1 * params.c2))
        .sqrt()
        / (2.0 * m_x)
}

/// Analytic MIET bound for the auxiliary-layer dynamic condition.
pub fn miet_auxiliary(params: &TriggerParams, design: &LayerDesign, m_z: f64) -> f64 {
    assert!(m_z > 0.0);
    (params.c1 * params.mu
        / (design.beta * design.px_k_norm.powi(2) + params.sigma2 * params.c1))
        .sqrt()
        / (2.0 * m_z)
}

/// Liberal MIET bound for the joint state-based condition.
pub fn miet_single(params: &TriggerParams, design: &LayerDesign, m_x: f64, m_z: f64) -> f64 {
    assert!(m_x > 0.0 && m_z > 0.0);
    let beta = design.beta;
    let budget = params.kappa * (params.epsilon - params.attack_term(design));
    debug_assert!(budget > 0.0);
    let term_x = params.c2 * budget / (beta * design.pz_g_norm.powi(2));
    let term_z = params.c1 * budget / (beta * design.px_k_norm.powi(2));
    let rho = 2.0 * (m_x * term_x.sqrt() + m_z * term_z.sqrt());
    (term_x + term_z) / rho
}

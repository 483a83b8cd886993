//! Inter-layer matrix bundle, diagonal Lyapunov certificates, and the
//! scalar parameter inequalities the event conditions rely on.
//!
//! The matrix side: given the physical system matrix `A` and a Hurwitz
//! auxiliary matrix `H`, diagonal positive definite `Px`, `Pz` are built
//! from `P = diag(chi_i / zeta_i)` with `zeta = M^-1 1`, `chi = M^-T 1`.
//! The interconnection matrices must satisfy `K^T Px = Pz G` and
//! `D = G 1` so that the cross terms in the Lyapunov derivative cancel.
//!
//! The scalar side: `(c3 + c1 beta)` and `c2 beta` must sit strictly
//! inside `(0, lambda_min(Qx))` and `(0, lambda_min(Qz))`, and
//! `epsilon` must dominate the attack term so that
//! `Omega = epsilon - (|Px|^2 / c3) Dbar^2` stays positive.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::hurwitz_check;

/// Residual tolerance on the coupling conditions `K^T Px = Pz G`, `D = G 1`.
pub const TOL_COUPLING: f64 = 1e-10;
/// Tolerance on `lambda_min` of the Lyapunov residual `M^T P + P M`.
pub const TOL_PSD: f64 = 1e-9;

/// Smallest eigenvalue of a (nominally) symmetric matrix.
///
/// Asymmetric inputs are symmetrized as `(M + M^T)/2` before the solve;
/// a skew part above 1e-10 gets a stderr warning.
pub fn lambda_min_symmetric(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let skew = (m - m.transpose()).norm() * 0.5;
    if skew > 1e-10 {
        eprintln!("warning: symmetrizing matrix with skew part {skew:.3e}");
    }
    sym.symmetric_eigenvalues().min()
}

fn lambda_max_symmetric(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().max()
}

/// Diagonal positive definite `P` with `M^T P + P M` negative semidefinite,
/// built as `P = diag(chi_i / zeta_i)` from `zeta = M^-1 1`, `chi = M^-T 1`.
pub fn lyapunov_diag(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let (is_hurwitz, abscissa) = hurwitz_check(m)?;
    if !is_hurwitz {
        return Err(Error::NotHurwitz { abscissa });
    }
    let ones = DVector::from_element(n, 1.0);
    let lu = m.clone().lu();
    let zeta = lu
        .solve(&ones)
        .ok_or_else(|| Error::Singular("cannot solve M zeta = 1".into()))?;
    let lu_t = m.transpose().lu();
    let chi = lu_t
        .solve(&ones)
        .ok_or_else(|| Error::Singular("cannot solve M^T chi = 1".into()))?;
    let mut diag = DVector::zeros(n);
    for i in 0..n {
        let ratio = chi[i] / zeta[i];
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::LyapunovInapplicable(format!(
                "chi_{i}/zeta_{i} = {ratio} is not strictly positive"
            )));
        }
        diag[i] = ratio;
    }
    let p = DMatrix::from_diagonal(&diag);
    // certified constructor: reject if the residual fails the PSD check
    let residual = m.transpose() * &p + &p * m;
    let lam_max = lambda_max_symmetric(&residual);
    if lam_max > TOL_PSD {
        return Err(Error::LyapunovInapplicable(format!(
            "M^T P + P M has lambda_max = {lam_max:.3e} > {TOL_PSD:.0e}"
        )));
    }
    Ok(p)
}

/// `Q = -(P M + M^T P)` together with its smallest eigenvalue.
///
/// Rejects when `lambda_min < -1e-9`, i.e. `P` is not a valid Lyapunov
/// certificate for `M`.
pub fn q_matrix(p: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let q_raw = -(p * m + m.transpose() * p);
    let q = (&q_raw + q_raw.transpose()) * 0.5;
    let lambda_min = lambda_min_symmetric(&q);
    if lambda_min < -TOL_PSD {
        return Err(Error::InvalidParams(format!(
            "Q has lambda_min = {lambda_min:.3e}; P is not a Lyapunov certificate for M"
        )));
    }
    Ok((q, lambda_min))
}

/// The full matrix bundle for the coupled two-layer system.
#[derive(Debug, Clone)]
pub struct LayerDesign {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub d: DVector<f64>,
    pub px: DMatrix<f64>,
    pub pz: DMatrix<f64>,
    pub qx: DMatrix<f64>,
    pub qz: DMatrix<f64>,
    pub lambda_min_qx: f64,
    pub lambda_min_qz: f64,
    pub beta: f64,
    // Frobenius norms reused by the trigger formulas
    pub px_norm: f64,
    pub px_k_norm: f64,
    pub pz_g_norm: f64,
}

impl LayerDesign {
    /// Assembles and certifies the bundle.
    ///
    /// `h`, `k`, `g` default to `A` (with `Px = Pz = I` falling out of the
    /// construction for symmetric `A`). When exactly one of `k`, `g` is
    /// given, the other is derived from the coupling condition.
    pub fn build(
        a: DMatrix<f64>,
        b: DVector<f64>,
        h: Option<DMatrix<f64>>,
        k: Option<DMatrix<f64>>,
        g: Option<DMatrix<f64>>,
        beta: f64,
    ) -> Result<Self> {
        let n = a.nrows();
        if beta < 0.0 {
            return Err(Error::InvalidParams(format!("beta = {beta} must be >= 0")));
        }
        let h = h.unwrap_or_else(|| a.clone());
        let px = lyapunov_diag(&a)?;
        let pz = lyapunov_diag(&h)?;
        let px_inv = invert_diagonal(&px)?;
        let pz_inv = invert_diagonal(&pz)?;
        let (k, g) = match (k, g) {
            (Some(k), Some(g)) => (k, g),
            (Some(k), None) => {
                let g = &pz_inv * k.transpose() * &px;
                (k, g)
            }
            (None, Some(g)) => {
                let k = &px_inv * g.transpose() * &pz;
                (k, g)
            }
            (None, None) => (a.clone(), a.clone()),
        };
        for (name, m) in [("K", &k), ("G", &g)] {
            let (is_hurwitz, abscissa) = hurwitz_check(m)?;
            if !is_hurwitz {
                return Err(Error::InvalidParams(format!(
                    "{name} is not Hurwitz (abscissa {abscissa})"
                )));
            }
            if m.clone().lu().determinant().abs() < 1e-12 {
                return Err(Error::Singular(format!("{name} is not invertible")));
            }
        }
        let d = &g * DVector::from_element(n, 1.0);
        let (qx, lambda_min_qx) = q_matrix(&px, &a)?;
        let (qz, lambda_min_qz) = q_matrix(&pz, &h)?;
        let px_norm = px.norm();
        let px_k_norm = (&px * &k).norm();
        let pz_g_norm = (&pz * &g).norm();
        let design = Self {
            a,
            h,
            k,
            g,
            b,
            d,
            px,
            pz,
            qx,
            qz,
            lambda_min_qx,
            lambda_min_qz,
            beta,
            px_norm,
            px_k_norm,
            pz_g_norm,
        };
        let coupling = coupling_validate(&design);
        if !coupling.pass {
            return Err(Error::InvalidParams(format!(
                "coupling conditions violated: |K^T Px - Pz G| = {:.3e}, |D - G 1| = {:.3e}",
                coupling.coupling_residual, coupling.d_residual
            )));
        }
        Ok(design)
    }

    pub fn n_agents(&self) -> usize {
        self.a.nrows()
    }
}

fn invert_diagonal(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = p.clone();
    for i in 0..p.nrows() {
        let v = p[(i, i)];
        if v.abs() < 1e-300 {
            return Err(Error::Singular("diagonal matrix has a zero entry".into()));
        }
        inv[(i, i)] = 1.0 / v;
    }
    Ok(inv)
}

/// Max entrywise residuals of the coupling conditions.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub coupling_residual: f64,
    pub d_residual: f64,
    pub pass: bool,
}

/// Checks `K^T Px = Pz G` and `D = G 1` to `TOL_COUPLING`.
pub fn coupling_validate(design: &LayerDesign) -> CouplingReport {
    let coupling = design.k.transpose() * &design.px - &design.pz * &design.g;
    let coupling_residual = coupling.amax();
    let ones = DVector::from_element(design.n_agents(), 1.0);
    let d_residual = (&design.d - &design.g * ones).amax();
    CouplingReport {
        coupling_residual,
        d_residual,
        pass: coupling_residual <= TOL_COUPLING && d_residual <= TOL_COUPLING,
    }
}

/// Which squared norm bounds the attack term in the epsilon constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OmegaVariant {
    /// `epsilon > (|Px|^2 / c3) Dbar^2`
    #[default]
    Px,
    /// `epsilon > (|Pz G|^2 / c3) Dbar^2`
    PzG,
}

/// All scalar design constants the trigger conditions consume.
#[derive(Debug, Clone, Serialize)]
pub struct TriggerParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub omega: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub d_bar: f64,
    pub eta0: f64,
    pub nu0: f64,
    pub omega_variant: OmegaVariant,
}

impl TriggerParams {
    /// Builds the parameter set; `omega` is always computed from
    /// `epsilon`, `c3`, the design norms, and `d_bar`, never supplied.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c1: f64,
        c2: f64,
        c3: f64,
        kappa: f64,
        epsilon: f64,
        mu: f64,
        sigma1: f64,
        sigma2: f64,
        d_bar: f64,
        eta0: f64,
        nu0: f64,
        omega_variant: OmegaVariant,
        design: &LayerDesign,
    ) -> Self {
        let norm = match omega_variant {
            OmegaVariant::Px => design.px_norm,
            OmegaVariant::PzG => design.pz_g_norm,
        };
        let omega = epsilon - norm * norm * d_bar * d_bar / c3;
        Self {
            c1,
            c2,
            c3,
            kappa,
            epsilon,
            mu,
            omega,
            sigma1,
            sigma2,
            d_bar,
            eta0,
            nu0,
            omega_variant,
        }
    }

    /// The attack term `(|.|^2 / c3) Dbar^2` subtracted from `epsilon`.
    pub fn attack_term(&self, design: &LayerDesign) -> f64 {
        let norm = match self.omega_variant {
            OmegaVariant::Px => design.px_norm,
            OmegaVariant::PzG => design.pz_g_norm,
        };
        norm * norm * self.d_bar * self.d_bar / self.c3
    }
}

/// One inequality check with its slack (positive slack = satisfied).
#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ParamCheck>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&ParamCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Checks every scalar inequality the stability argument needs, reporting
/// the slack of each. Intervals are open: a boundary value fails.
pub fn params_validate(params: &TriggerParams, design: &LayerDesign) -> ValidationReport {
    let mut checks = Vec::new();
    let mut strict = |name: &str, value: f64| {
        checks.push(ParamCheck { name: name.into(), slack: value, pass: value > 0.0 });
    };
    strict("c1 > 0", params.c1);
    strict("c2 > 0", params.c2);
    strict("c3 > 0", params.c3);
    strict("kappa > 0", params.kappa);
    strict("kappa < 1", 1.0 - params.kappa);
    strict("epsilon > 0", params.epsilon);
    strict("mu > 0", params.mu);
    strict("sigma1 > 0", params.sigma1);
    strict("sigma2 > 0", params.sigma2);
    strict("c3 + c1*beta > 0", params.c3 + params.c1 * design.beta);
    strict(
        "c3 + c1*beta < lambda_min(Qx)",
        design.lambda_min_qx - (params.c3 + params.c1 * design.beta),
    );
    strict("c2*beta > 0", params.c2 * design.beta);
    strict(
        "c2*beta < lambda_min(Qz)",
        design.lambda_min_qz - params.c2 * design.beta,
    );
    strict(
        "epsilon > attack term (Omega > 0)",
        params.epsilon - params.attack_term(design),
    );
    checks.push(ParamCheck {
        name: "d_bar >= 0".into(),
        slack: params.d_bar,
        pass: params.d_bar >= 0.0,
    });
    checks.push(ParamCheck {
        name: "eta0 >= 0".into(),
        slack: params.eta0,
        pass: params.eta0 >= 0.0,
    });
    checks.push(ParamCheck {
        name: "nu0 >= 0".into(),
        slack: params.nu0,
        pass: params.nu0 >= 0.0,
    });
    ValidationReport { checks }
}

/// Default `(c1, c2, c3)` that always land strictly inside the open
/// intervals: `c1 = lambda_min(Qx)/(4 beta)`, `c3 = lambda_min(Qx)/4`,
/// `c2 = lambda_min(Qz)/(2 beta)`.
pub fn default_c_constants(lambda_min_qx: f64, lambda_min_qz: f64, beta: f64) -> (f64, f64, f64) {
    assert!(beta > 0.0, "default c-constants need beta > 0");
    let c1 = 0.25 * lambda_min_qx / beta;
    let c3 = 0.25 * lambda_min_qx;
    let c2 = 0.5 * lambda_min_qz / beta;
    (c1, c2, c3)
}

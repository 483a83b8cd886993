//! JSON scenario schema and its resolution into runtime objects.
//!
//! A scenario file fully determines a run: graph, matrix/scalar design,
//! attack, trigger mode, and integration settings. Agent indices in
//! configs are 1-based; they are converted at the boundary.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::attack::{AttackKind, AttackModel, AttackTable};
use crate::design::{
    default_c_constants, params_validate, LayerDesign, OmegaVariant, TriggerParams,
    ValidationReport,
};
use crate::error::{Error, Result};
use crate::simulator::{RunMode, SimConfig};
use crate::topology::AgentGraph;
use crate::triggers::TriggerMode;

/// Follower graph plus leader links, 1-based indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSection {
    pub n_agents: usize,
    pub edges: Vec<(usize, usize)>,
    /// Agents with a direct leader link, 1-based.
    pub leader_links: Vec<usize>,
    /// Optional distinct auxiliary-layer topology; defaults to mirroring
    /// the physical one, which makes `H = A`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auxiliary: Option<Box<GraphSection>>,
}

impl GraphSection {
    pub fn build(&self) -> Result<AgentGraph> {
        let n = self.n_agents;
        let mut leader = vec![false; n];
        for &idx in &self.leader_links {
            if idx == 0 || idx > n {
                return Err(Error::Config(format!(
                    "leader link index {idx} out of range 1..={n}"
                )));
            }
            leader[idx - 1] = true;
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(i, j)| {
                if i == 0 || j == 0 {
                    Err(Error::Config(format!("edge ({i}, {j}) uses 0; indices are 1-based")))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<_>>()?;
        AgentGraph::new(n, edges, leader)
    }
}

fn default_sigma() -> f64 {
    1.0
}
fn default_kappa() -> f64 {
    0.5
}
fn default_epsilon() -> f64 {
    186.39439
}
fn default_mu() -> f64 {
    0.27775
}

/// Matrix choices and scalar trigger constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DesignSection {
    pub beta: f64,
    /// Row-major matrix overrides; each defaults per the build rules
    /// (`H`, `K`, `G` fall back to `A`, with one of `K`/`G` derivable
    /// from the other through the coupling condition).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<f64>>>,
    /// c1, c2, c3 default to fractions of the Lyapunov decay rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_sigma")]
    pub sigma1: f64,
    #[serde(default = "default_sigma")]
    pub sigma2: f64,
    /// Design-time disturbance bound used inside the trigger formulas.
    pub d_bar: f64,
    #[serde(default)]
    pub eta0: f64,
    #[serde(default)]
    pub nu0: f64,
    #[serde(default)]
    pub omega_variant: OmegaVariant,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackSection {
    pub kind: AttackKind,
    #[serde(default)]
    pub x_ad: f64,
    /// Declared bound on the attack norm, checked against the run post hoc.
    #[serde(default)]
    pub d_bar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<AttackTable>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriggerSection {
    pub mode: TriggerMode,
}

/// Explicit values or a seeded uniform draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Values(Vec<f64>),
    Random { low: f64, high: f64 },
}

fn default_dt() -> f64 {
    1e-5
}
fn default_horizon() -> f64 {
    20.0
}
fn default_decimation() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    pub x0: f64,
    pub x_init: InitSpec,
    pub z_init: InitSpec,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Required whenever an init spec is random.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub betas: Vec<f64>,
}

/// A complete scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub graph: GraphSection,
    pub design: DesignSection,
    pub attack: AttackSection,
    pub trigger: TriggerSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Everything a run needs, after defaults and derivations are applied.
pub struct Resolved {
    pub design: LayerDesign,
    pub params: TriggerParams,
    pub attack: AttackModel,
    pub sim: SimConfig,
    pub mode: RunMode,
    /// Scalar-inequality report; structurally valid scenarios resolve even
    /// when some inequality fails, so callers can surface the slack.
    pub validation: ValidationReport,
}

impl Scenario {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Resolves with the scenario's own `beta`.
    pub fn resolve(&self) -> Result<Resolved> {
        self.resolve_with_beta(self.design.beta)
    }

    /// Resolves with `beta` overridden (sweep entry point). `beta = 0`
    /// forces baseline mode regardless of the configured trigger.
    pub fn resolve_with_beta(&self, beta: f64) -> Result<Resolved> {
        let graph = self.graph.build()?;
        let (a, b) = graph.system_matrix()?;
        let n = graph.n_agents();

        let h = match &self.graph.auxiliary {
            Some(aux) => {
                if aux.n_agents != n {
                    return Err(Error::Config(format!(
                        "auxiliary graph has {} agents, physical has {n}",
                        aux.n_agents
                    )));
                }
                let (h, _) = aux.build()?.system_matrix()?;
                Some(h)
            }
            None => self.design.h.as_ref().map(|rows| parse_matrix(rows, n)).transpose()?,
        };
        let k = self.design.k.as_ref().map(|rows| parse_matrix(rows, n)).transpose()?;
        let g = self.design.g.as_ref().map(|rows| parse_matrix(rows, n)).transpose()?;
        let design = LayerDesign::build(a, b, h, k, g, beta)?;

        let mode = if beta == 0.0 {
            RunMode::Baseline
        } else {
            match self.trigger.mode {
                TriggerMode::SingleStateBased => RunMode::Single,
                TriggerMode::LayerwiseDynamic => RunMode::Dynamic,
            }
        };

        // c-constants scale with the active beta unless pinned explicitly
        let beta_for_constants = if beta > 0.0 { beta } else { 1.0 };
        let (c1_def, c2_def, c3_def) = default_c_constants(
            design.lambda_min_qx,
            design.lambda_min_qz,
            beta_for_constants,
        );
        let d = &self.design;
        let params = TriggerParams::new(
            d.c1.unwrap_or(c1_def),
            d.c2.unwrap_or(c2_def),
            d.c3.unwrap_or(c3_def),
            d.kappa,
            d.epsilon,
            d.mu,
            d.sigma1,
            d.sigma2,
            d.d_bar,
            d.eta0,
            d.nu0,
            d.omega_variant,
            &design,
        );
        let validation = params_validate(&params, &design);

        let attack = match self.attack.kind {
            AttackKind::None => AttackModel::none(),
            AttackKind::OffsetSteering => {
                AttackModel::offset_steering(self.attack.x_ad, self.attack.d_bar)
            }
            AttackKind::Tabulated => {
                let table = self.attack.table.clone().ok_or_else(|| {
                    Error::Config("tabulated attack requires a table".into())
                })?;
                AttackModel::tabulated(table, self.attack.d_bar, n)?
            }
        };

        let needs_seed = matches!(self.sim.x_init, InitSpec::Random { .. })
            || matches!(self.sim.z_init, InitSpec::Random { .. });
        if needs_seed && self.sim.rng_seed.is_none() {
            return Err(Error::Config("random initial states require sim.rng_seed".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.sim.rng_seed.unwrap_or(0));
        let x_init = materialize(&self.sim.x_init, n, &mut rng)?;
        let z_init = materialize(&self.sim.z_init, n, &mut rng)?;

        let sim = SimConfig {
            dt: self.sim.dt,
            horizon: self.sim.horizon,
            x0: self.sim.x0,
            x_init,
            z_init,
            decimation: self.sim.decimation,
        };
        sim.validate(n)?;

        Ok(Resolved { design, params, attack, sim, mode, validation })
    }
}

fn parse_matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("matrix override must be {n} x {n}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

fn materialize(spec: &InitSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    match spec {
        InitSpec::Values(v) => {
            if v.len() != n {
                return Err(Error::Config(format!(
                    "initial state has {} entries, expected {n}",
                    v.len()
                )));
            }
            Ok(DVector::from_vec(v.clone()))
        }
        InitSpec::Random { low, high } => {
            // rejects NaN bounds as well as low >= high
            if low.partial_cmp(high) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Config(format!(
                    "random init requires low < high, got [{low}, {high})"
                )));
            }
            Ok(DVector::from_fn(n, |_, _| rng.gen_range(*low..*high)))
        }
    }
}

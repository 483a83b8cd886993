//! Bounded false-data-injection attacks on the physical layer.
//!
//! The attacker aggregates per-link injections into a single vector added
//! to the continuous intra-layer dynamics. It reads only the physical
//! state, the leader state, and time; the auxiliary layer and the trigger
//! internals are invisible to it by interface.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::LayerDesign;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    /// `d = -A x + 1 x_ad - x - B x0`: steers every agent to the offset
    /// `x_ad` by exactly cancelling the consensus terms.
    OffsetSteering,
    /// Time-indexed vector series, linearly interpolated.
    Tabulated,
}

/// Two-column (time, vector) series for tabulated attacks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackTable {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl AttackTable {
    fn validate(&self, n: usize) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return Err(Error::Config("attack table must pair every time with a vector".into()));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("attack table times must be strictly increasing".into()));
        }
        if self.values.iter().any(|v| v.len() != n) {
            return Err(Error::Config(format!("attack table vectors must have {n} entries")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AttackModel {
    pub kind: AttackKind,
    pub x_ad: f64,
    /// Declared bound on `|d|` over the run, checked post hoc.
    pub bound_estimate: f64,
    pub table: Option<AttackTable>,
}

impl AttackModel {
    pub fn none() -> Self {
        Self { kind: AttackKind::None, x_ad: 0.0, bound_estimate: 0.0, table: None }
    }

    pub fn offset_steering(x_ad: f64, bound_estimate: f64) -> Self {
        Self { kind: AttackKind::OffsetSteering, x_ad, bound_estimate, table: None }
    }

    pub fn tabulated(table: AttackTable, bound_estimate: f64, n: usize) -> Result<Self> {
        table.validate(n)?;
        Ok(Self { kind: AttackKind::Tabulated, x_ad: 0.0, bound_estimate, table: Some(table) })
    }

    /// Attack vector at `(x, x0, t)`. Allocating convenience wrapper.
    pub fn evaluate(&self, design: &LayerDesign, x: &DVector<f64>, x0: f64, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        self.evaluate_into(&mut out, design, x, x0, t);
        out
    }

    /// Writes the attack vector into `out`; returns true when a tabulated
    /// lookup fell outside the table range and the boundary value was held.
    pub fn evaluate_into(
        &self,
        out: &mut DVector<f64>,
        design: &LayerDesign,
        x: &DVector<f64>,
        x0: f64,
        t: f64,
    ) -> bool {
        match self.kind {
            AttackKind::None => {
                out.fill(0.0);
                false
            }
            AttackKind::OffsetSteering => {
                // d = -A x + 1 x_ad - x - B x0
                out.gemv(-1.0, &design.a, x, 0.0);
                out.axpy(-1.0, x, 1.0);
                out.add_scalar_mut(self.x_ad);
                out.axpy(-x0, &design.b, 1.0);
                false
            }
            AttackKind::Tabulated => {
                let table = self.table.as_ref().expect("tabulated attack without table");
                interpolate_into(out, table, t)
            }
        }
    }
}

fn interpolate_into(out: &mut DVector<f64>, table: &AttackTable, t: f64) -> bool {
    let times = &table.times;
    let values = &table.values;
    if t <= times[0] {
        copy_row(out, &values[0]);
        return t < times[0];
    }
    if t >= *times.last().unwrap() {
        copy_row(out, values.last().unwrap());
        return t > *times.last().unwrap();
    }
    let idx = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
        Ok(i) => {
            copy_row(out, &values[i]);
            return false;
        }
        Err(i) => i,
    };
    let (t0, t1) = (times[idx - 1], times[idx]);
    let w = (t - t0) / (t1 - t0);
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = values[idx - 1][i] * (1.0 - w) + values[idx][i] * w;
    }
    false
}

fn copy_row(out: &mut DVector<f64>, row: &[f64]) {
    for (slot, &v) in out.iter_mut().zip(row) {
        *slot = v;
    }
}

/// Max of `|d(t)|` over the logged attack samples of a completed run.
pub fn observed_bound<'a, I>(samples: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    let mut max = f64::NEG_INFINITY;
    let mut any = false;
    for d in samples {
        any = true;
        max = max.max(d.norm());
    }
    if !any {
        return Err(Error::EmptyLog);
    }
    Ok(max)
}

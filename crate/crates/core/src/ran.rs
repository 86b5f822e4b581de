//! Simulated gNB acting as the E2 node.
//!
//! Throughput model: a UE in slice `s` gets `kappa * prbs(s) / ues(s)` Mbps,
//! scaled by `1 + eps` with `eps ~ N(0, sigma^2)` drawn fresh per UE per
//! sample and clamped at zero.

use indexmap::IndexMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::domain::{
    validate_allocation, AllocationViolation, CellConfig, ControlDecision, PrbAllocation,
    RanSnapshot, SimTime, SliceId, UeId, XappId,
};
use crate::xapp::compute_equal_allocation;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeState {
    pub ue_id: UeId,
    pub slice: SliceId,
    pub attached_at: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputModelParams {
    /// Mbps delivered per PRB.
    pub rate_per_prb: f64,
    /// Relative SD of the multiplicative noise.
    pub noise_sigma: f64,
    pub sample_interval: SimTime,
}

impl Default for ThroughputModelParams {
    fn default() -> Self {
        Self {
            rate_per_prb: 0.45,
            noise_sigma: 0.03,
            sample_interval: 1_000,
        }
    }
}

impl ThroughputModelParams {
    pub fn validate(&self) -> Result<(), RanError> {
        if !(self.rate_per_prb.is_finite() && self.rate_per_prb > 0.0) {
            return Err(RanError::BadModel("rate_per_prb must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(RanError::BadModel("noise_sigma must be non-negative"));
        }
        if self.sample_interval == 0 {
            return Err(RanError::BadModel("sample_interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputSample {
    pub time: SimTime,
    pub ue_id: UeId,
    pub slice: SliceId,
    pub throughput_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RanError {
    #[error("UE {0} is already attached")]
    DuplicateAttach(UeId),
    #[error("UE {0} is not attached")]
    UnknownUe(UeId),
    #[error("slice {0} does not exist in this cell")]
    UnknownSlice(SliceId),
    #[error("decision for cell {found} delivered to cell {expected}")]
    WrongCell { expected: String, found: String },
    #[error("invalid throughput model: {0}")]
    BadModel(&'static str),
}

/// A decision the gNB acted on, with the span over which it stayed in
/// force from the gNB's point of view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedDecision {
    pub decision: ControlDecision,
    pub applied_at: SimTime,
    /// Set when the same xApp replaced it or the controller withdrew it.
    pub closed_at: Option<SimTime>,
}

impl AppliedDecision {
    /// Exclusive end of the span in force.
    pub fn end(&self) -> SimTime {
        let natural = self.decision.valid_until() + 1;
        self.closed_at.map_or(natural, |c| c.min(natural))
    }

    pub fn overlaps(&self, other: &AppliedDecision) -> bool {
        self.applied_at < other.end() && other.applied_at < self.end()
    }
}

/// Pairs of applied decisions on one target, in force at the same time,
/// with different values. Empty when the E2 node was never handed a direct
/// conflict.
pub fn applied_conflicts(applied: &[AppliedDecision]) -> Vec<(&AppliedDecision, &AppliedDecision)> {
    let mut out = Vec::new();
    for (i, a) in applied.iter().enumerate() {
        for b in &applied[i + 1..] {
            if a.decision.target() == b.decision.target()
                && a.decision.value() != b.decision.value()
                && a.overlaps(b)
            {
                out.push((a, b));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GnbState {
    cell: CellConfig,
    allocation: PrbAllocation,
    ues: Vec<UeState>,
    last_writer: Option<XappId>,
    applied: Vec<AppliedDecision>,
}

impl GnbState {
    /// Starts with an equal split and no UEs.
    pub fn new(cell: CellConfig) -> Self {
        let allocation = compute_equal_allocation(&cell);
        Self {
            cell,
            allocation,
            ues: Vec::new(),
            last_writer: None,
            applied: Vec::new(),
        }
    }

    pub fn cell(&self) -> &CellConfig {
        &self.cell
    }

    pub fn allocation(&self) -> &PrbAllocation {
        &self.allocation
    }

    pub fn ues(&self) -> &[UeState] {
        &self.ues
    }

    pub fn last_writer(&self) -> Option<&XappId> {
        self.last_writer.as_ref()
    }

    pub fn applied(&self) -> &[AppliedDecision] {
        &self.applied
    }

    /// Overwrites the per-slice quotas named by `decisions`. On a
    /// validation failure nothing changes and the violation is returned as
    /// the nack.
    pub fn apply_control(
        &mut self,
        decisions: &[ControlDecision],
        now: SimTime,
    ) -> Result<Result<(), AllocationViolation>, RanError> {
        for d in decisions {
            if &d.target().cell_id != self.cell.id() {
                return Err(RanError::WrongCell {
                    expected: self.cell.id().to_string(),
                    found: d.target().cell_id.to_string(),
                });
            }
        }
        let mut next = self.allocation.clone();
        for d in decisions {
            next.set(d.target().slice_id.clone(), d.value());
        }
        if let Err(v) = validate_allocation(&next, &self.cell) {
            return Ok(Err(v));
        }
        self.allocation = next;
        for d in decisions {
            self.close_where(now, |a| {
                a.decision.target() == d.target() && a.decision.xapp_id() == d.xapp_id()
            });
            self.applied.push(AppliedDecision {
                decision: d.clone(),
                applied_at: now,
                closed_at: None,
            });
        }
        if let Some(d) = decisions.last() {
            self.last_writer = Some(d.xapp_id().clone());
        }
        Ok(Ok(()))
    }

    /// Marks earlier decisions as no longer in force.
    pub fn withdraw(&mut self, decisions: &[ControlDecision], now: SimTime) {
        for d in decisions {
            self.close_where(now, |a| &a.decision == d);
        }
    }

    fn close_where(&mut self, now: SimTime, pred: impl Fn(&AppliedDecision) -> bool) {
        for a in self.applied.iter_mut().filter(|a| a.closed_at.is_none()) {
            if pred(a) {
                a.closed_at = Some(now);
            }
        }
    }

    pub fn attach_ue(&mut self, ue_id: UeId, slice: SliceId, now: SimTime) -> Result<(), RanError> {
        if self.ues.iter().any(|u| u.ue_id == ue_id) {
            return Err(RanError::DuplicateAttach(ue_id));
        }
        if !self.cell.has_slice(&slice) {
            return Err(RanError::UnknownSlice(slice));
        }
        self.ues.push(UeState {
            ue_id,
            slice,
            attached_at: now,
        });
        Ok(())
    }

    pub fn detach_ue(&mut self, ue_id: &UeId, _now: SimTime) -> Result<(), RanError> {
        let i = self
            .ues
            .iter()
            .position(|u| &u.ue_id == ue_id)
            .ok_or_else(|| RanError::UnknownUe(ue_id.clone()))?;
        self.ues.remove(i);
        Ok(())
    }

    pub fn ues_per_slice(&self) -> IndexMap<SliceId, u32> {
        let mut counts: IndexMap<SliceId, u32> =
            self.cell.slices().iter().map(|s| (s.clone(), 0)).collect();
        for u in &self.ues {
            *counts.entry(u.slice.clone()).or_default() += 1;
        }
        counts
    }

    pub fn snapshot(&self, now: SimTime) -> RanSnapshot {
        RanSnapshot::new(
            self.cell.clone(),
            self.ues_per_slice(),
            self.ues.len() as u32,
            self.allocation.clone(),
            now,
        )
        .expect("per-slice counts are derived from the UE list")
    }

    /// Noise-free throughput of every attached UE, in attach order.
    pub fn nominal_throughput(&self, params: &ThroughputModelParams) -> Vec<(&UeState, f64)> {
        let counts = self.ues_per_slice();
        self.ues
            .iter()
            .map(|u| {
                let prbs = f64::from(self.allocation.get(&u.slice).unwrap_or(0));
                let sharing = f64::from(counts[&u.slice]);
                (u, params.rate_per_prb * prbs / sharing)
            })
            .collect()
    }

    pub fn sample_throughput<R: Rng + ?Sized>(
        &self,
        params: &ThroughputModelParams,
        rng: &mut R,
        now: SimTime,
    ) -> Vec<ThroughputSample> {
        let noise = (params.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, params.noise_sigma).expect("sigma validated"));
        self.nominal_throughput(params)
            .into_iter()
            .map(|(u, base)| {
                let eps = noise.as_ref().map_or(0.0, |n| n.sample(rng));
                ThroughputSample {
                    time: now,
                    ue_id: u.ue_id.clone(),
                    slice: u.slice.clone(),
                    throughput_mbps: (base * (1.0 + eps)).max(0.0),
                }
            })
            .collect()
    }
}

//! Central Controller: conflict detection and priority-based resolution for
//! every CONTROL message an xApp sends towards the E2 node.
//!
//! The controller keeps a ledger of active decisions keyed by control
//! target. An incoming decision is in direct conflict when another xApp
//! holds an active decision on the same target with a different value. The
//! resolution keeps the highest-priority contender and rejects the rest: a
//! losing incoming decision is never forwarded, a losing decision already in
//! the ledger is withdrawn and the gNB is told so alongside the winner.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use thiserror::Error;

use crate::domain::{ControlDecision, ControlTarget, E2ControlMessage, SimTime, XappId};
use crate::fabric::{ForwardedControl, RejectNotice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Disposition {
    Forwarded,
    /// Incoming decision lost a conflict and was not forwarded.
    Rejected,
    /// Previously forwarded decision lost a later conflict and was withdrawn.
    Revoked,
}

impl Disposition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Disposition::Forwarded => "forwarded",
            Disposition::Rejected => "rejected",
            Disposition::Revoked => "revoked",
        }
    }
}

impl fmt::Display for Disposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub time: SimTime,
    pub decision: ControlDecision,
    pub disposition: Disposition,
    pub conflict_id: Option<u64>,
    pub winner: Option<XappId>,
}

#[derive(Debug, Clone, Default)]
pub struct DecisionLedger {
    entries: BTreeMap<ControlTarget, Vec<ControlDecision>>,
    audit: Vec<AuditRecord>,
}

impl DecisionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn active(&self, target: &ControlTarget) -> &[ControlDecision] {
        self.entries.get(target).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, decision: &ControlDecision) -> bool {
        self.active(decision.target()).contains(decision)
    }

    /// Inserts `decision`, replacing any entry its own xApp holds on the
    /// same target. Returns the replaced entry.
    pub fn insert(&mut self, decision: ControlDecision) -> Option<ControlDecision> {
        let slot = self.entries.entry(decision.target().clone()).or_default();
        let old = slot
            .iter()
            .position(|d| d.xapp_id() == decision.xapp_id())
            .map(|i| slot.remove(i));
        slot.push(decision);
        old
    }

    pub fn remove(&mut self, decision: &ControlDecision) -> bool {
        let Some(slot) = self.entries.get_mut(decision.target()) else {
            return false;
        };
        let before = slot.len();
        slot.retain(|d| d != decision);
        let removed = slot.len() != before;
        if slot.is_empty() {
            self.entries.remove(decision.target());
        }
        removed
    }

    pub fn record(&mut self, record: AuditRecord) {
        self.audit.push(record);
    }

    pub fn audit(&self) -> &[AuditRecord] {
        &self.audit
    }

    pub fn iter(&self) -> impl Iterator<Item = &ControlDecision> {
        self.entries.values().flatten()
    }
}

/// Drops every decision whose window closed before `now`. The audit log is
/// kept.
pub fn expire(ledger: &mut DecisionLedger, now: SimTime) -> usize {
    let mut removed = 0;
    ledger.entries.retain(|_, slot| {
        let before = slot.len();
        slot.retain(|d| d.valid_until() >= now);
        removed += before - slot.len();
        !slot.is_empty()
    });
    removed
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub target: ControlTarget,
    /// Active decisions from other xApps first, the incoming decision last.
    pub contenders: Vec<ControlDecision>,
    pub detected_at: SimTime,
}

/// Direct conflicts between `decision` and the active decisions of other
/// xApps. The ledger must already be swept at `now`.
pub fn detect_direct(
    ledger: &DecisionLedger,
    decision: &ControlDecision,
    now: SimTime,
) -> Vec<Conflict> {
    let others: Vec<&ControlDecision> = ledger
        .active(decision.target())
        .iter()
        .filter(|d| d.xapp_id() != decision.xapp_id() && d.overlaps(decision))
        .collect();
    if !others.iter().any(|d| d.value() != decision.value()) {
        return Vec::new();
    }
    let mut contenders: Vec<ControlDecision> = others.into_iter().cloned().collect();
    contenders.push(decision.clone());
    vec![Conflict {
        target: decision.target().clone(),
        contenders,
        detected_at: now,
    }]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolutionPolicy {
    PriorityReject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub conflict: Conflict,
    pub winner: XappId,
    pub rejected: Vec<ControlDecision>,
    pub policy: ResolutionPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MitigationError {
    #[error("no priority configured for xApp {0}")]
    MissingPriority(XappId),
    #[error("conflict has no contenders")]
    NoContenders,
}

/// Highest priority wins; equal top priorities go to the lexicographically
/// smallest xApp id.
pub fn resolve(
    conflict: Conflict,
    priorities: &BTreeMap<XappId, u32>,
) -> Result<Resolution, MitigationError> {
    let mut ranked = Vec::with_capacity(conflict.contenders.len());
    for d in &conflict.contenders {
        let p = priorities
            .get(d.xapp_id())
            .ok_or_else(|| MitigationError::MissingPriority(d.xapp_id().clone()))?;
        ranked.push((*p, d.xapp_id()));
    }
    let (top, winner) = ranked
        .iter()
        .min_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)))
        .map(|(p, id)| (*p, (*id).clone()))
        .ok_or(MitigationError::NoContenders)?;
    if ranked.iter().filter(|(p, _)| *p == top).count() > 1 {
        warn!(
            "equal priority {top} on {}; {winner} wins by id order",
            conflict.target
        );
    }
    let rejected = conflict
        .contenders
        .iter()
        .filter(|d| d.xapp_id() != &winner)
        .cloned()
        .collect();
    Ok(Resolution {
        conflict,
        winner,
        rejected,
        policy: ResolutionPolicy::PriorityReject,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedConflict {
    pub id: u64,
    pub resolution: Resolution,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionOutcome {
    pub decision: ControlDecision,
    pub disposition: Disposition,
    pub conflict_id: Option<u64>,
}

/// What the controller wants sent after handling one message.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SubmitOutcome {
    /// One entry per decision of the submitted message, in order.
    pub outcomes: Vec<DecisionOutcome>,
    /// Consolidated CONTROL for the E2 node, if anything survived.
    pub forward: Option<ForwardedControl>,
    /// Notices for xApps whose decisions were rejected or revoked.
    pub notices: Vec<(XappId, RejectNotice)>,
    pub conflicts: Vec<ResolvedConflict>,
}

impl SubmitOutcome {
    pub fn forwarded(&self) -> impl Iterator<Item = &ControlDecision> {
        self.outcomes
            .iter()
            .filter(|o| o.disposition == Disposition::Forwarded)
            .map(|o| &o.decision)
    }

    pub fn rejected(&self) -> impl Iterator<Item = &ControlDecision> {
        self.outcomes
            .iter()
            .filter(|o| o.disposition == Disposition::Rejected)
            .map(|o| &o.decision)
    }
}

#[derive(Debug)]
pub struct CentralController {
    enabled: bool,
    priorities: BTreeMap<XappId, u32>,
    ledger: DecisionLedger,
    next_conflict_id: u64,
    resolved: Vec<ResolvedConflict>,
}

impl CentralController {
    /// `enabled = false` gives the pass-through baseline: every decision is
    /// forwarded and nothing is checked.
    pub fn new(priorities: BTreeMap<XappId, u32>, enabled: bool) -> Self {
        Self {
            enabled,
            priorities,
            ledger: DecisionLedger::new(),
            next_conflict_id: 1,
            resolved: Vec::new(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn ledger(&self) -> &DecisionLedger {
        &self.ledger
    }

    pub fn conflicts(&self) -> &[ResolvedConflict] {
        &self.resolved
    }

    pub fn submit_control(
        &mut self,
        msg: &E2ControlMessage,
        now: SimTime,
    ) -> Result<SubmitOutcome, MitigationError> {
        if !self.priorities.contains_key(msg.sender()) {
            return Err(MitigationError::MissingPriority(msg.sender().clone()));
        }
        expire(&mut self.ledger, now);

        let mut out = SubmitOutcome::default();
        let mut withdrawn = Vec::new();
        for decision in msg.decisions() {
            if !self.enabled || self.ledger.contains(decision) {
                self.accept(decision, now, None, None, &mut out);
                continue;
            }
            let Some(conflict) = detect_direct(&self.ledger, decision, now)
                .into_iter()
                .next()
            else {
                self.accept(decision, now, None, None, &mut out);
                continue;
            };
            let resolution = resolve(conflict, &self.priorities)?;
            let id = self.next_conflict_id;
            self.next_conflict_id += 1;
            let winner = resolution.winner.clone();

            for loser in resolution.rejected.iter().filter(|d| *d != decision) {
                if self.ledger.remove(loser) {
                    self.ledger.record(AuditRecord {
                        time: now,
                        decision: loser.clone(),
                        disposition: Disposition::Revoked,
                        conflict_id: Some(id),
                        winner: Some(winner.clone()),
                    });
                    out.notices.push((
                        loser.xapp_id().clone(),
                        RejectNotice {
                            decision: loser.clone(),
                            disposition: Disposition::Revoked,
                        },
                    ));
                    withdrawn.push(loser.clone());
                }
            }

            if &winner == decision.xapp_id() {
                self.accept(decision, now, Some(id), Some(winner), &mut out);
            } else {
                self.ledger.record(AuditRecord {
                    time: now,
                    decision: decision.clone(),
                    disposition: Disposition::Rejected,
                    conflict_id: Some(id),
                    winner: Some(winner),
                });
                out.notices.push((
                    decision.xapp_id().clone(),
                    RejectNotice {
                        decision: decision.clone(),
                        disposition: Disposition::Rejected,
                    },
                ));
                out.outcomes.push(DecisionOutcome {
                    decision: decision.clone(),
                    disposition: Disposition::Rejected,
                    conflict_id: Some(id),
                });
            }
            let resolved = ResolvedConflict { id, resolution };
            out.conflicts.push(resolved.clone());
            self.resolved.push(resolved);
        }

        let decisions: Vec<ControlDecision> = out.forwarded().cloned().collect();
        if !decisions.is_empty() {
            out.forward = Some(ForwardedControl {
                origin: msg.sender().clone(),
                origin_sequence_no: msg.sequence_no(),
                decisions,
                withdrawn,
            });
        }
        Ok(out)
    }

    fn accept(
        &mut self,
        decision: &ControlDecision,
        now: SimTime,
        conflict_id: Option<u64>,
        winner: Option<XappId>,
        out: &mut SubmitOutcome,
    ) {
        self.ledger.insert(decision.clone());
        self.ledger.record(AuditRecord {
            time: now,
            decision: decision.clone(),
            disposition: Disposition::Forwarded,
            conflict_id,
            winner,
        });
        out.outcomes.push(DecisionOutcome {
            decision: decision.clone(),
            disposition: Disposition::Forwarded,
            conflict_id,
        });
    }
}

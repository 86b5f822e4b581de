//! Value types shared by the RIC, the xApps and the simulated gNB.
//!
//! Everything here is an immutable value once constructed. Constructors
//! validate the invariants that the rest of the crate relies on, so code
//! holding a `CellConfig` or `ControlDecision` never re-checks them.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

/// Simulated time in integer milliseconds on the single logical clock.
pub type SimTime = u64;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl std::borrow::Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Short slice name such as `A` or `B`.
    SliceId
);
string_id!(CellId);
string_id!(XappId);
string_id!(UeId);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("cell must expose at least one PRB")]
    NoPrbs,
    #[error("cell must declare at least one slice")]
    NoSlices,
    #[error("slice identifier must be non-empty")]
    EmptySliceId,
    #[error("slice {0} declared twice")]
    DuplicateSlice(SliceId),
    #[error("minimum of {min} PRBs for {slices} slices exceeds the {total} PRBs of the cell")]
    FloorTooHigh { min: u32, slices: usize, total: u32 },
    #[error("decision window is empty: valid_until {valid_until} <= issued_at {issued_at}")]
    EmptyWindow {
        issued_at: SimTime,
        valid_until: SimTime,
    },
    #[error("control message carries no decisions")]
    EmptyMessage,
    #[error("control message mixes cells {0} and {1}")]
    MixedCells(CellId, CellId),
    #[error("decision issued at {found} but message sent at {expected}")]
    IssueTimeMismatch { expected: SimTime, found: SimTime },
    #[error("decision from {found} inside a message sent by {expected}")]
    ForeignDecision { expected: XappId, found: XappId },
    #[error("total_ues {total} does not match per-slice sum {sum}")]
    UeCountMismatch { total: u32, sum: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellConfig {
    id: CellId,
    total_prbs: u32,
    slices: Vec<SliceId>,
    min_prbs_per_slice: u32,
}

impl CellConfig {
    pub fn new(
        id: CellId,
        total_prbs: u32,
        slices: Vec<SliceId>,
        min_prbs_per_slice: u32,
    ) -> Result<Self, DomainError> {
        if total_prbs == 0 {
            return Err(DomainError::NoPrbs);
        }
        if slices.is_empty() {
            return Err(DomainError::NoSlices);
        }
        for (i, s) in slices.iter().enumerate() {
            if s.as_str().is_empty() {
                return Err(DomainError::EmptySliceId);
            }
            if slices[..i].contains(s) {
                return Err(DomainError::DuplicateSlice(s.clone()));
            }
        }
        if u64::from(min_prbs_per_slice) * slices.len() as u64 > u64::from(total_prbs) {
            return Err(DomainError::FloorTooHigh {
                min: min_prbs_per_slice,
                slices: slices.len(),
                total: total_prbs,
            });
        }
        Ok(Self {
            id,
            total_prbs,
            slices,
            min_prbs_per_slice,
        })
    }

    pub fn id(&self) -> &CellId {
        &self.id
    }

    pub fn total_prbs(&self) -> u32 {
        self.total_prbs
    }

    /// Slices in declaration order. Rounding ties are broken by this order.
    pub fn slices(&self) -> &[SliceId] {
        &self.slices
    }

    pub fn slice_count(&self) -> usize {
        self.slices.len()
    }

    pub fn min_prbs_per_slice(&self) -> u32 {
        self.min_prbs_per_slice
    }

    pub fn has_slice(&self, slice: &SliceId) -> bool {
        self.slices.contains(slice)
    }
}

/// Per-slice PRB quotas for one cell.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrbAllocation {
    per_slice: IndexMap<SliceId, u32>,
}

impl PrbAllocation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, slice: &SliceId) -> Option<u32> {
        self.per_slice.get(slice).copied()
    }

    pub fn set(&mut self, slice: SliceId, prbs: u32) {
        self.per_slice.insert(slice, prbs);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SliceId, u32)> {
        self.per_slice.iter().map(|(s, n)| (s, *n))
    }

    pub fn len(&self) -> usize {
        self.per_slice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_slice.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.per_slice.values().map(|&n| u64::from(n)).sum()
    }
}

impl<S: Into<SliceId>> FromIterator<(S, u32)> for PrbAllocation {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        Self {
            per_slice: iter.into_iter().map(|(s, n)| (s.into(), n)).collect(),
        }
    }
}

impl fmt::Display for PrbAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (s, n)) in self.per_slice.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}:{n}")?;
        }
        f.write_str("}")
    }
}

/// The invariant an allocation broke.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationViolation {
    #[error("slice {0} missing from allocation")]
    MissingSlice(SliceId),
    #[error("slice {0} is not part of the cell")]
    UnknownSlice(SliceId),
    #[error("sum exceeds P: {sum} > {total}")]
    SumExceeds { sum: u64, total: u32 },
    #[error("sum below P: {sum} < {total}")]
    SumBelow { sum: u64, total: u32 },
    #[error("below minimum: slice {slice} has {prbs} < {min}")]
    BelowMinimum { slice: SliceId, prbs: u32, min: u32 },
}

pub fn validate_allocation(
    alloc: &PrbAllocation,
    cell: &CellConfig,
) -> Result<(), AllocationViolation> {
    for slice in cell.slices() {
        if alloc.get(slice).is_none() {
            return Err(AllocationViolation::MissingSlice(slice.clone()));
        }
    }
    if let Some((slice, _)) = alloc.iter().find(|(s, _)| !cell.has_slice(s)) {
        return Err(AllocationViolation::UnknownSlice(slice.clone()));
    }
    let sum = alloc.total();
    let total = cell.total_prbs();
    if sum > u64::from(total) {
        return Err(AllocationViolation::SumExceeds { sum, total });
    }
    if sum < u64::from(total) {
        return Err(AllocationViolation::SumBelow { sum, total });
    }
    let min = cell.min_prbs_per_slice();
    for slice in cell.slices() {
        let prbs = alloc.get(slice).unwrap_or(0);
        if prbs < min {
            return Err(AllocationViolation::BelowMinimum {
                slice: slice.clone(),
                prbs,
                min,
            });
        }
    }
    Ok(())
}

/// The single control knob in scope: a slice's maximum PRB quota.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ControlParameter {
    MaxSlicePrbQuota,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ControlTarget {
    pub cell_id: CellId,
    pub slice_id: SliceId,
    pub parameter: ControlParameter,
}

impl ControlTarget {
    pub fn slice_quota(cell_id: CellId, slice_id: SliceId) -> Self {
        Self {
            cell_id,
            slice_id,
            parameter: ControlParameter::MaxSlicePrbQuota,
        }
    }
}

impl fmt::Display for ControlTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.cell_id, self.slice_id)
    }
}

/// One xApp's proposed value for one control target, active on the closed
/// interval `[issued_at, valid_until]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ControlDecision {
    xapp_id: XappId,
    target: ControlTarget,
    value: u32,
    issued_at: SimTime,
    valid_until: SimTime,
}

impl ControlDecision {
    pub fn new(
        xapp_id: XappId,
        target: ControlTarget,
        value: u32,
        issued_at: SimTime,
        valid_until: SimTime,
    ) -> Result<Self, DomainError> {
        if valid_until <= issued_at {
            return Err(DomainError::EmptyWindow {
                issued_at,
                valid_until,
            });
        }
        Ok(Self {
            xapp_id,
            target,
            value,
            issued_at,
            valid_until,
        })
    }

    pub fn xapp_id(&self) -> &XappId {
        &self.xapp_id
    }

    pub fn target(&self) -> &ControlTarget {
        &self.target
    }

    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn issued_at(&self) -> SimTime {
        self.issued_at
    }

    pub fn valid_until(&self) -> SimTime {
        self.valid_until
    }

    pub fn is_active_at(&self, t: SimTime) -> bool {
        self.issued_at <= t && t <= self.valid_until
    }

    pub fn overlaps(&self, other: &ControlDecision) -> bool {
        self.issued_at <= other.valid_until && other.issued_at <= self.valid_until
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct E2ControlMessage {
    sender: XappId,
    decisions: Vec<ControlDecision>,
    sequence_no: u64,
}

impl E2ControlMessage {
    pub fn new(
        sender: XappId,
        decisions: Vec<ControlDecision>,
        sequence_no: u64,
    ) -> Result<Self, DomainError> {
        let first = decisions.first().ok_or(DomainError::EmptyMessage)?;
        let cell = first.target().cell_id.clone();
        let sent_at = first.issued_at();
        for d in &decisions {
            if d.xapp_id() != &sender {
                return Err(DomainError::ForeignDecision {
                    expected: sender,
                    found: d.xapp_id().clone(),
                });
            }
            if d.target().cell_id != cell {
                return Err(DomainError::MixedCells(cell, d.target().cell_id.clone()));
            }
            if d.issued_at() != sent_at {
                return Err(DomainError::IssueTimeMismatch {
                    expected: sent_at,
                    found: d.issued_at(),
                });
            }
        }
        Ok(Self {
            sender,
            decisions,
            sequence_no,
        })
    }

    pub fn sender(&self) -> &XappId {
        &self.sender
    }

    pub fn decisions(&self) -> &[ControlDecision] {
        &self.decisions
    }

    pub fn sequence_no(&self) -> u64 {
        self.sequence_no
    }

    pub fn sent_at(&self) -> SimTime {
        self.decisions[0].issued_at()
    }

    pub fn cell_id(&self) -> &CellId {
        &self.decisions[0].target().cell_id
    }
}

/// REPORT payload the gNB hands to the xApps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RanSnapshot {
    cell: CellConfig,
    ues_per_slice: IndexMap<SliceId, u32>,
    total_ues: u32,
    current_allocation: PrbAllocation,
    timestamp: SimTime,
}

impl RanSnapshot {
    /// Builds a snapshot; slices of the cell absent from `ues_per_slice`
    /// are reported with zero UEs.
    pub fn new(
        cell: CellConfig,
        ues_per_slice: IndexMap<SliceId, u32>,
        total_ues: u32,
        current_allocation: PrbAllocation,
        timestamp: SimTime,
    ) -> Result<Self, DomainError> {
        let mut counts = IndexMap::with_capacity(cell.slice_count());
        for s in cell.slices() {
            counts.insert(s.clone(), ues_per_slice.get(s).copied().unwrap_or(0));
        }
        let sum: u32 = counts.values().sum();
        if sum != total_ues {
            return Err(DomainError::UeCountMismatch {
                total: total_ues,
                sum,
            });
        }
        Ok(Self {
            cell,
            ues_per_slice: counts,
            total_ues,
            current_allocation,
            timestamp,
        })
    }

    pub fn cell(&self) -> &CellConfig {
        &self.cell
    }

    pub fn ues_in(&self, slice: &SliceId) -> u32 {
        self.ues_per_slice.get(slice).copied().unwrap_or(0)
    }

    pub fn ues_per_slice(&self) -> &IndexMap<SliceId, u32> {
        &self.ues_per_slice
    }

    pub fn total_ues(&self) -> u32 {
        self.total_ues
    }

    pub fn current_allocation(&self) -> &PrbAllocation {
        &self.current_allocation
    }

    pub fn timestamp(&self) -> SimTime {
        self.timestamp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(total: u32, min: u32) -> CellConfig {
        CellConfig::new("cell-0".into(), total, vec!["A".into(), "B".into()], min).unwrap()
    }

    #[test]
    fn valid_allocation_passes() {
        let alloc: PrbAllocation = [("A", 58), ("B", 42)].into_iter().collect();
        assert_eq!(validate_allocation(&alloc, &cell(100, 0)), Ok(()));
    }

    #[test]
    fn oversubscribed_allocation_is_reported() {
        let alloc: PrbAllocation = [("A", 60), ("B", 60)].into_iter().collect();
        let err = validate_allocation(&alloc, &cell(100, 0)).unwrap_err();
        assert!(err.to_string().contains("sum exceeds P"), "{err}");
    }

    #[test]
    fn floor_violation_is_reported() {
        let alloc: PrbAllocation = [("A", 100), ("B", 0)].into_iter().collect();
        let err = validate_allocation(&alloc, &cell(100, 1)).unwrap_err();
        assert!(err.to_string().contains("below minimum"), "{err}");
    }

    #[test]
    fn coverage_violations() {
        let c = cell(100, 0);
        let missing: PrbAllocation = [("A", 100)].into_iter().collect();
        assert_eq!(
            validate_allocation(&missing, &c),
            Err(AllocationViolation::MissingSlice("B".into()))
        );
        let extra: PrbAllocation = [("A", 50), ("B", 40), ("C", 10)].into_iter().collect();
        assert_eq!(
            validate_allocation(&extra, &c),
            Err(AllocationViolation::UnknownSlice("C".into()))
        );
        let short: PrbAllocation = [("A", 50), ("B", 40)].into_iter().collect();
        assert!(matches!(
            validate_allocation(&short, &c),
            Err(AllocationViolation::SumBelow {
                sum: 90,
                total: 100
            })
        ));
    }

    #[test]
    fn cell_invariants() {
        assert_eq!(
            CellConfig::new("c".into(), 0, vec!["A".into()], 0),
            Err(DomainError::NoPrbs)
        );
        assert_eq!(
            CellConfig::new("c".into(), 10, vec![], 0),
            Err(DomainError::NoSlices)
        );
        assert_eq!(
            CellConfig::new("c".into(), 10, vec!["A".into(), "A".into()], 0),
            Err(DomainError::DuplicateSlice("A".into()))
        );
        assert_eq!(
            CellConfig::new("c".into(), 10, vec!["".into()], 0),
            Err(DomainError::EmptySliceId)
        );
        assert!(CellConfig::new("c".into(), 10, vec!["A".into(), "B".into()], 5).is_ok());
        assert!(matches!(
            CellConfig::new("c".into(), 10, vec!["A".into(), "B".into()], 6),
            Err(DomainError::FloorTooHigh { .. })
        ));
    }

    #[test]
    fn decision_window_must_be_non_empty() {
        let t = ControlTarget::slice_quota("c".into(), "A".into());
        assert!(ControlDecision::new("x".into(), t.clone(), 5, 10, 10).is_err());
        assert!(ControlDecision::new("x".into(), t, 5, 10, 11).is_ok());
    }

    #[test]
    fn message_checks_shared_send_time_and_cell() {
        let ta = ControlTarget::slice_quota("c".into(), "A".into());
        let tb = ControlTarget::slice_quota("d".into(), "B".into());
        let d1 = ControlDecision::new("x".into(), ta.clone(), 5, 10, 20).unwrap();
        let d2 = ControlDecision::new("x".into(), ta, 5, 11, 20).unwrap();
        let d3 = ControlDecision::new("x".into(), tb, 5, 10, 20).unwrap();
        assert_eq!(
            E2ControlMessage::new("x".into(), vec![], 0),
            Err(DomainError::EmptyMessage)
        );
        assert!(matches!(
            E2ControlMessage::new("x".into(), vec![d1.clone(), d2], 0),
            Err(DomainError::IssueTimeMismatch { .. })
        ));
        assert!(matches!(
            E2ControlMessage::new("x".into(), vec![d1.clone(), d3], 0),
            Err(DomainError::MixedCells(..))
        ));
        assert!(matches!(
            E2ControlMessage::new("y".into(), vec![d1], 0),
            Err(DomainError::ForeignDecision { .. })
        ));
    }

    #[test]
    fn snapshot_fills_missing_slices_and_checks_total() {
        let c = cell(100, 0);
        let mut counts = IndexMap::new();
        counts.insert(SliceId::from("A"), 2);
        let snap = RanSnapshot::new(c.clone(), counts.clone(), 2, PrbAllocation::new(), 0).unwrap();
        assert_eq!(snap.ues_in(&"B".into()), 0);
        assert_eq!(snap.ues_per_slice().len(), 2);
        assert!(RanSnapshot::new(c, counts, 3, PrbAllocation::new(), 0).is_err());
    }

    mod target_equality {
        use super::*;
        use proptest::prelude::*;

        fn target() -> impl Strategy<Value = ControlTarget> {
            (0..3u8, 0..3u8).prop_map(|(c, s)| {
                ControlTarget::slice_quota(
                    format!("cell-{c}").into(),
                    format!("S{s}").as_str().into(),
                )
            })
        }

        proptest! {
            #[test]
            fn structural_equality_is_an_equivalence(a in target(), b in target(), c in target()) {
                prop_assert_eq!(&a, &a.clone());
                prop_assert_eq!(a == b, b == a);
                if a == b && b == c {
                    prop_assert_eq!(&a, &c);
                }
                prop_assert_eq!(a == b, a.cell_id == b.cell_id && a.slice_id == b.slice_id);
            }
        }
    }
}

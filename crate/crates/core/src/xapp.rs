//! The two slice-allocation xApps and the tick logic that turns their
//! allocations into E2 CONTROL messages.
//!
//! `PrioritySlice` skews PRBs towards a prioritized slice in proportion to
//! the share of UEs it serves, averaged with a fair `1/S` share.
//! `EqualSplit` divides the cell evenly. Quotas are computed as exact
//! rationals and then rounded by largest remainder so every allocation sums
//! to the cell's PRB total.

use num_rational::Ratio;
use thiserror::Error;

use crate::domain::{
    CellConfig, ControlDecision, ControlTarget, DomainError, E2ControlMessage, PrbAllocation,
    RanSnapshot, SimTime, SliceId, XappId,
};

pub type Rational = Ratio<u64>;

pub const DEFAULT_PERIOD_MS: SimTime = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XappKind {
    PrioritySlice { prioritized_slice: SliceId },
    EqualSplit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XappConfig {
    pub xapp_id: XappId,
    pub period: SimTime,
    pub phase_offset: SimTime,
    /// Higher wins during conflict resolution.
    pub priority: u32,
    pub kind: XappKind,
    pub decision_ttl: SimTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XappError {
    #[error("xApp {0}: period must be positive")]
    ZeroPeriod(XappId),
    #[error("xApp {id}: phase offset {phase} must be below period {period}")]
    PhaseOutOfRange {
        id: XappId,
        phase: SimTime,
        period: SimTime,
    },
    #[error("xApp {0}: decision ttl must be positive")]
    ZeroTtl(XappId),
    #[error("xApp {id}: prioritized slice {slice} is not part of the cell")]
    UnknownSlice { id: XappId, slice: SliceId },
    #[error("xApp {id}: tick at {now} is off its schedule")]
    OffSchedule { id: XappId, now: SimTime },
    #[error("xApp {id}: snapshot from {snapshot_at} is stale at {now}")]
    StaleSnapshot {
        id: XappId,
        snapshot_at: SimTime,
        now: SimTime,
    },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl XappConfig {
    /// Config with the default 10 s period and a TTL of two periods.
    pub fn new(xapp_id: XappId, kind: XappKind, priority: u32, phase_offset: SimTime) -> Self {
        Self {
            xapp_id,
            period: DEFAULT_PERIOD_MS,
            phase_offset,
            priority,
            kind,
            decision_ttl: 2 * DEFAULT_PERIOD_MS,
        }
    }

    pub fn validate(&self, cell: &CellConfig) -> Result<(), XappError> {
        if self.period == 0 {
            return Err(XappError::ZeroPeriod(self.xapp_id.clone()));
        }
        if self.phase_offset >= self.period {
            return Err(XappError::PhaseOutOfRange {
                id: self.xapp_id.clone(),
                phase: self.phase_offset,
                period: self.period,
            });
        }
        if self.decision_ttl == 0 {
            return Err(XappError::ZeroTtl(self.xapp_id.clone()));
        }
        if let XappKind::PrioritySlice { prioritized_slice } = &self.kind {
            if !cell.has_slice(prioritized_slice) {
                return Err(XappError::UnknownSlice {
                    id: self.xapp_id.clone(),
                    slice: prioritized_slice.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn is_tick(&self, t: SimTime) -> bool {
        t >= self.phase_offset && (t - self.phase_offset).is_multiple_of(self.period)
    }

    /// First tick time at or after `t`.
    pub fn next_tick_at_or_after(&self, t: SimTime) -> SimTime {
        if t <= self.phase_offset {
            return self.phase_offset;
        }
        let k = (t - self.phase_offset).div_ceil(self.period);
        self.phase_offset + k * self.period
    }

    /// Allocation this xApp wants for the state described by `snapshot`.
    pub fn desired_allocation(&self, snapshot: &RanSnapshot) -> PrbAllocation {
        let cell = snapshot.cell();
        match &self.kind {
            XappKind::EqualSplit => compute_equal_allocation(cell),
            XappKind::PrioritySlice { prioritized_slice } => {
                let ratios = priority_ratios(
                    snapshot.total_ues(),
                    snapshot.ues_in(prioritized_slice),
                    cell.slice_count(),
                );
                match ratios {
                    Ok(r) => compute_priority_allocation(cell, &r, prioritized_slice),
                    // No UEs or a single slice: nothing to prioritize.
                    Err(_) => compute_equal_allocation(cell),
                }
            }
        }
    }
}

/// Ratios used by the priority xApp: `prioritized` is the UE share of the
/// prioritized slice, `other` the equal share of the remainder given to each
/// non-prioritized slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PriorityRatios {
    pub prioritized: Rational,
    pub other: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DegenerateInput {
    #[error("no UEs attached")]
    NoUes,
    #[error("a single slice leaves nothing to share")]
    SingleSlice,
    #[error("prioritized UE count {prioritized} exceeds total {total}")]
    TooManyPrioritized { prioritized: u32, total: u32 },
}

pub fn priority_ratios(
    total_ues: u32,
    prioritized_ues: u32,
    slice_count: usize,
) -> Result<PriorityRatios, DegenerateInput> {
    if total_ues == 0 {
        return Err(DegenerateInput::NoUes);
    }
    if slice_count < 2 {
        return Err(DegenerateInput::SingleSlice);
    }
    if prioritized_ues > total_ues {
        return Err(DegenerateInput::TooManyPrioritized {
            prioritized: prioritized_ues,
            total: total_ues,
        });
    }
    let prioritized = Rational::new(u64::from(prioritized_ues), u64::from(total_ues));
    let other = (Rational::from_integer(1) - prioritized) / (slice_count as u64 - 1);
    Ok(PriorityRatios { prioritized, other })
}

/// Real-valued priority quotas before rounding, in slice declaration order.
pub fn priority_quotas(
    cell: &CellConfig,
    ratios: &PriorityRatios,
    prioritized: &SliceId,
) -> Vec<(SliceId, Rational)> {
    let total = Rational::from_integer(u64::from(cell.total_prbs()));
    let fair = Rational::new(1, cell.slice_count() as u64);
    cell.slices()
        .iter()
        .map(|s| {
            let ratio = if s == prioritized {
                ratios.prioritized
            } else {
                ratios.other
            };
            (s.clone(), total * (ratio + fair) / 2)
        })
        .collect()
}

/// Real-valued equal-split quotas before rounding.
pub fn equal_quotas(cell: &CellConfig) -> Vec<(SliceId, Rational)> {
    let share = Rational::new(u64::from(cell.total_prbs()), cell.slice_count() as u64);
    cell.slices().iter().map(|s| (s.clone(), share)).collect()
}

pub fn compute_priority_allocation(
    cell: &CellConfig,
    ratios: &PriorityRatios,
    prioritized: &SliceId,
) -> PrbAllocation {
    largest_remainder(
        cell.total_prbs(),
        &priority_quotas(cell, ratios, prioritized),
    )
}

pub fn compute_equal_allocation(cell: &CellConfig) -> PrbAllocation {
    largest_remainder(cell.total_prbs(), &equal_quotas(cell))
}

/// Floors every quota and hands the leftover PRBs one each to the largest
/// fractional remainders. Equal remainders go to the earlier slice.
/// `quotas` must sum exactly to `total`.
pub fn largest_remainder(total: u32, quotas: &[(SliceId, Rational)]) -> PrbAllocation {
    let floors: Vec<u64> = quotas.iter().map(|(_, q)| q.to_integer()).collect();
    let assigned: u64 = floors.iter().sum();
    let leftover = u64::from(total).saturating_sub(assigned) as usize;

    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // stable sort keeps declaration order among equal remainders
    order.sort_by(|&a, &b| quotas[b].1.fract().cmp(&quotas[a].1.fract()));

    let mut counts = floors;
    for &i in order.iter().take(leftover) {
        counts[i] += 1;
    }
    quotas
        .iter()
        .zip(counts)
        .map(|((s, _), n)| (s.clone(), n as u32))
        .collect()
}

/// Composes the CONTROL message for one scheduled tick: one decision per
/// slice, active for `decision_ttl` from `now`.
pub fn on_tick(
    xapp: &XappConfig,
    snapshot: &RanSnapshot,
    now: SimTime,
    sequence_no: u64,
) -> Result<E2ControlMessage, XappError> {
    if !xapp.is_tick(now) {
        return Err(XappError::OffSchedule {
            id: xapp.xapp_id.clone(),
            now,
        });
    }
    if snapshot.timestamp() > now || now - snapshot.timestamp() > xapp.period {
        return Err(XappError::StaleSnapshot {
            id: xapp.xapp_id.clone(),
            snapshot_at: snapshot.timestamp(),
            now,
        });
    }
    let cell = snapshot.cell();
    let alloc = xapp.desired_allocation(snapshot);
    let decisions = alloc
        .iter()
        .map(|(slice, prbs)| {
            ControlDecision::new(
                xapp.xapp_id.clone(),
                ControlTarget::slice_quota(cell.id().clone(), slice.clone()),
                prbs,
                now,
                now + xapp.decision_ttl,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(E2ControlMessage::new(
        xapp.xapp_id.clone(),
        decisions,
        sequence_no,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use indexmap::IndexMap;
    use proptest::prelude::*;

    fn cell(total: u32, slices: usize) -> CellConfig {
        let names = (0..slices)
            .map(|i| SliceId::new(((b'A' + i as u8) as char).to_string()))
            .collect();
        CellConfig::new("cell-0".into(), total, names, 0).unwrap()
    }

    fn snapshot(cell: &CellConfig, counts: &[u32], t: SimTime) -> RanSnapshot {
        let map: IndexMap<SliceId, u32> = cell
            .slices()
            .iter()
            .cloned()
            .zip(counts.iter().copied())
            .collect();
        let total = counts.iter().sum();
        RanSnapshot::new(cell.clone(), map, total, compute_equal_allocation(cell), t).unwrap()
    }

    fn r(n: u64, d: u64) -> Rational {
        Rational::new(n, d)
    }

    fn alloc(pairs: &[(&str, u32)]) -> PrbAllocation {
        pairs.iter().map(|&(s, n)| (s, n)).collect()
    }

    #[test]
    fn ratios_from_ue_counts() {
        assert_eq!(
            priority_ratios(3, 2, 2).unwrap(),
            PriorityRatios {
                prioritized: r(2, 3),
                other: r(1, 3)
            }
        );
        assert_eq!(
            priority_ratios(2, 1, 2).unwrap(),
            PriorityRatios {
                prioritized: r(1, 2),
                other: r(1, 2)
            }
        );
        assert_eq!(
            priority_ratios(4, 4, 2).unwrap(),
            PriorityRatios {
                prioritized: r(1, 1),
                other: r(0, 1)
            }
        );
        assert_eq!(priority_ratios(0, 0, 2), Err(DegenerateInput::NoUes));
        assert_eq!(priority_ratios(3, 1, 1), Err(DegenerateInput::SingleSlice));
        assert!(priority_ratios(2, 3, 2).is_err());
    }

    #[test]
    fn priority_allocation_examples() {
        let a = SliceId::from("A");
        let c100 = cell(100, 2);
        let two_thirds = priority_ratios(3, 2, 2).unwrap();
        assert_eq!(
            compute_priority_allocation(&c100, &two_thirds, &a),
            alloc(&[("A", 58), ("B", 42)])
        );
        let half = priority_ratios(2, 1, 2).unwrap();
        assert_eq!(
            compute_priority_allocation(&c100, &half, &a),
            alloc(&[("A", 50), ("B", 50)])
        );
        assert_eq!(
            compute_priority_allocation(&cell(51, 2), &two_thirds, &a),
            alloc(&[("A", 30), ("B", 21)])
        );
        let q = priority_quotas(&cell(51, 2), &two_thirds, &a);
        assert_eq!(q[0].1, r(119, 4));
        assert_eq!(q[1].1, r(85, 4));
    }

    #[test]
    fn equal_allocation_examples() {
        assert_eq!(
            compute_equal_allocation(&cell(100, 2)),
            alloc(&[("A", 50), ("B", 50)])
        );
        assert_eq!(
            compute_equal_allocation(&cell(51, 2)),
            alloc(&[("A", 26), ("B", 25)])
        );
        assert_eq!(compute_equal_allocation(&cell(7, 1)), alloc(&[("A", 7)]));
        assert_eq!(
            compute_equal_allocation(&cell(10, 3)),
            alloc(&[("A", 4), ("B", 3), ("C", 3)])
        );
    }

    #[test]
    fn degenerate_snapshots_fall_back_to_equal_split() {
        let x = XappConfig::new(
            "xapp-1".into(),
            XappKind::PrioritySlice {
                prioritized_slice: "A".into(),
            },
            10,
            0,
        );
        let c2 = cell(100, 2);
        assert_eq!(
            x.desired_allocation(&snapshot(&c2, &[0, 0], 0)),
            alloc(&[("A", 50), ("B", 50)])
        );
        let c1 = cell(100, 1);
        assert_eq!(
            x.desired_allocation(&snapshot(&c1, &[3], 0)),
            alloc(&[("A", 100)])
        );
    }

    #[test]
    fn equal_split_tick_carries_ttl() {
        let x = XappConfig::new("xapp-2".into(), XappKind::EqualSplit, 5, 5_000);
        let c = cell(100, 2);
        let msg = on_tick(&x, &snapshot(&c, &[2, 1], 15_000), 15_000, 7).unwrap();
        assert_eq!(msg.sequence_no(), 7);
        let got: Vec<_> = msg
            .decisions()
            .iter()
            .map(|d| {
                (
                    d.target().slice_id.as_str().to_owned(),
                    d.value(),
                    d.valid_until(),
                )
            })
            .collect();
        assert_eq!(
            got,
            vec![("A".to_owned(), 50, 35_000), ("B".to_owned(), 50, 35_000)]
        );
    }

    #[test]
    fn priority_tick_values() {
        let x = XappConfig::new(
            "xapp-1".into(),
            XappKind::PrioritySlice {
                prioritized_slice: "A".into(),
            },
            10,
            0,
        );
        let c = cell(100, 2);
        let values = |counts: &[u32]| -> Vec<u32> {
            on_tick(&x, &snapshot(&c, counts, 60_000), 60_000, 0)
                .unwrap()
                .decisions()
                .iter()
                .map(|d| d.value())
                .collect()
        };
        assert_eq!(values(&[2, 1]), vec![58, 42]);
        assert_eq!(values(&[1, 1]), vec![50, 50]);
    }

    #[test]
    fn tick_preconditions() {
        let x = XappConfig::new("xapp-2".into(), XappKind::EqualSplit, 5, 5_000);
        let c = cell(100, 2);
        assert!(matches!(
            on_tick(&x, &snapshot(&c, &[1, 1], 7_000), 7_000, 0),
            Err(XappError::OffSchedule { .. })
        ));
        assert!(matches!(
            on_tick(&x, &snapshot(&c, &[1, 1], 4_000), 15_000, 0),
            Err(XappError::StaleSnapshot { .. })
        ));
        assert!(on_tick(&x, &snapshot(&c, &[1, 1], 5_000), 15_000, 0).is_ok());
    }

    #[test]
    fn tick_schedule() {
        let x = XappConfig::new("xapp-2".into(), XappKind::EqualSplit, 5, 5_000);
        assert_eq!(x.next_tick_at_or_after(0), 5_000);
        assert_eq!(x.next_tick_at_or_after(5_000), 5_000);
        assert_eq!(x.next_tick_at_or_after(5_001), 15_000);
        assert!(x.is_tick(25_000));
        assert!(!x.is_tick(20_000));
    }

    #[test]
    fn config_validation() {
        let c = cell(100, 2);
        let mut x = XappConfig::new("x".into(), XappKind::EqualSplit, 0, 0);
        assert!(x.validate(&c).is_ok());
        x.phase_offset = x.period;
        assert!(matches!(
            x.validate(&c),
            Err(XappError::PhaseOutOfRange { .. })
        ));
        x.phase_offset = 0;
        x.period = 0;
        assert!(matches!(x.validate(&c), Err(XappError::ZeroPeriod(_))));
        let y = XappConfig::new(
            "y".into(),
            XappKind::PrioritySlice {
                prioritized_slice: "Z".into(),
            },
            1,
            0,
        );
        assert!(matches!(
            y.validate(&c),
            Err(XappError::UnknownSlice { .. })
        ));
    }

    fn inputs() -> impl Strategy<Value = (u32, usize, u32, u32)> {
        (1u32..=273, 2usize..=8, 1u32..=64)
            .prop_flat_map(|(p, s, u)| (Just(p), Just(s), Just(u), 0..=u))
    }

    proptest! {
        #[test]
        fn allocations_conserve_prbs((p, s, u, ua) in inputs()) {
            let c = cell(p, s);
            let ratios = priority_ratios(u, ua, s).unwrap();
            prop_assert_eq!(ratios.prioritized + ratios.other * (s as u64 - 1), Rational::from_integer(1));
            let quotas = priority_quotas(&c, &ratios, &"A".into());
            let exact: Rational = quotas.iter().map(|(_, q)| *q).sum();
            prop_assert_eq!(exact, Rational::from_integer(u64::from(p)));
            let a = compute_priority_allocation(&c, &ratios, &"A".into());
            prop_assert_eq!(a.total(), u64::from(p));
            prop_assert_eq!(compute_equal_allocation(&c).total(), u64::from(p));
            // rounding moves any slice by less than one PRB
            for ((_, q), (_, n)) in quotas.iter().zip(a.iter()) {
                prop_assert!(q.to_integer() == u64::from(n) || q.to_integer() + 1 == u64::from(n));
            }
        }

        #[test]
        fn prioritized_quota_is_bounded((p, s, u, ua) in inputs()) {
            let c = cell(p, s);
            let q = priority_quotas(&c, &priority_ratios(u, ua, s).unwrap(), &"A".into());
            let total = Rational::from_integer(u64::from(p));
            prop_assert!(q[0].1 >= total / (2 * s as u64));
            prop_assert!(q[0].1 <= total * (Rational::from_integer(1) + Rational::new(1, s as u64)) / 2);
        }

        #[test]
        fn prioritized_quota_is_monotone_in_prioritized_ues(p in 1u32..=273, u in 1u32..=64, ua in 0u32..64) {
            prop_assume!(ua < u);
            let c = cell(p, 2);
            let a = SliceId::from("A");
            let lo = compute_priority_allocation(&c, &priority_ratios(u, ua, 2).unwrap(), &a);
            let hi = compute_priority_allocation(&c, &priority_ratios(u, ua + 1, 2).unwrap(), &a);
            prop_assert!(hi.get(&a) >= lo.get(&a));
        }

        #[test]
        fn fair_share_point_matches_equal_split(p in 1u32..=273, s in 2usize..=8, k in 1u32..=8) {
            // U_A / U = 1 / S
            let c = cell(p, s);
            let ratios = priority_ratios(k * s as u32, k, s).unwrap();
            let a = SliceId::from("A");
            prop_assert_eq!(priority_quotas(&c, &ratios, &a), equal_quotas(&c));
            prop_assert_eq!(compute_priority_allocation(&c, &ratios, &a), compute_equal_allocation(&c));
        }

        #[test]
        fn emitted_allocations_validate((p, s, u, ua) in inputs()) {
            let floor = p / (2 * s as u32);
            let names = (0..s).map(|i| SliceId::new(format!("S{i}"))).collect();
            let c = CellConfig::new("cell-0".into(), p, names, floor).unwrap();
            let mut counts = vec![0; s];
            counts[0] = ua;
            counts[1] = u - ua;
            let snap = snapshot(&c, &counts, 0);
            for kind in [XappKind::EqualSplit, XappKind::PrioritySlice { prioritized_slice: "S0".into() }] {
                let x = XappConfig::new("x".into(), kind, 1, 0);
                prop_assert_eq!(crate::domain::validate_allocation(&x.desired_allocation(&snap), &c), Ok(()));
            }
        }
    }
}

//! Scenario description and its TOML config file.
//!
//! Recognised keys (all optional unless noted):
//!
//! ```text
//! [cell]      id, total_prbs, slices, min_prbs_per_slice
//! [xapp.N]    id, kind ("priority-slice" | "equal-split"), period, phase,
//!             priority, prioritized_slice (priority-slice only), ttl
//! [model]     kappa, sigma, sample_interval
//! [[events]]  time, action ("attach" | "detach"), ue, slice (attach only)
//! [run]       duration, cutoff, seed, replications, cm, latency
//! ```
//!
//! Times are milliseconds. `xapp.N` tables are ordered by `N`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::domain::{CellConfig, CellId, SimTime, SliceId, UeId, XappId};
use crate::ran::ThroughputModelParams;
use crate::xapp::{XappConfig, XappKind, DEFAULT_PERIOD_MS};

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UeAction {
    Attach(SliceId),
    Detach,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeEvent {
    pub time: SimTime,
    pub ue_id: UeId,
    pub action: UeAction,
}

impl UeEvent {
    pub fn attach(time: SimTime, ue: &str, slice: &str) -> Self {
        Self {
            time,
            ue_id: ue.into(),
            action: UeAction::Attach(slice.into()),
        }
    }

    pub fn detach(time: SimTime, ue: &str) -> Self {
        Self {
            time,
            ue_id: ue.into(),
            action: UeAction::Detach,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cell: CellConfig,
    pub xapps: Vec<XappConfig>,
    pub model: ThroughputModelParams,
    /// Non-decreasing in time; same-time events apply in listed order.
    pub events: Vec<UeEvent>,
    pub duration_ms: SimTime,
    pub warmup_cutoff_ms: SimTime,
    pub cm_enabled: bool,
    pub seed: u64,
    pub replications: u32,
    /// Per-hop message latency inside the RIC.
    pub latency_ms: SimTime,
}

impl Scenario {
    /// The two-phase testbed experiment: one UE per slice from the start, a
    /// third UE joining slice A after one minute, seven minutes in total,
    /// statistics from minute two on.
    pub fn testbed_default() -> Self {
        let cell = CellConfig::new("cell-0".into(), 100, vec!["A".into(), "B".into()], 0)
            .expect("static cell is valid");
        let xapps = vec![
            XappConfig::new(
                "xapp-1".into(),
                XappKind::PrioritySlice {
                    prioritized_slice: "A".into(),
                },
                10,
                0,
            ),
            XappConfig::new("xapp-2".into(), XappKind::EqualSplit, 5, 5_000),
        ];
        Self {
            cell,
            xapps,
            model: ThroughputModelParams::default(),
            events: vec![
                UeEvent::attach(0, "ue-0", "A"),
                UeEvent::attach(0, "ue-1", "B"),
                UeEvent::attach(60_000, "ue-2", "A"),
            ],
            duration_ms: 420_000,
            warmup_cutoff_ms: 120_000,
            cm_enabled: true,
            seed: 1,
            replications: 10,
            latency_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.duration_ms == 0 {
            return invalid("run.duration must be positive".into());
        }
        if self.warmup_cutoff_ms >= self.duration_ms {
            return invalid(format!(
                "run.cutoff {} must be below run.duration {}",
                self.warmup_cutoff_ms, self.duration_ms
            ));
        }
        self.model.validate()?;
        if self.xapps.is_empty() {
            return invalid("at least one xapp is required".into());
        }
        for (i, x) in self.xapps.iter().enumerate() {
            x.validate(&self.cell)?;
            if self.xapps[..i].iter().any(|y| y.xapp_id == x.xapp_id) {
                return invalid(format!("xapp id {} used twice", x.xapp_id));
            }
        }
        let mut last = 0;
        for e in &self.events {
            if e.time < last {
                return invalid(format!(
                    "event for {} at {} is out of order",
                    e.ue_id, e.time
                ));
            }
            if e.time >= self.duration_ms {
                return invalid(format!(
                    "event for {} at {} is not before run.duration",
                    e.ue_id, e.time
                ));
            }
            if let UeAction::Attach(slice) = &e.action {
                if !self.cell.has_slice(slice) {
                    return invalid(format!(
                        "event attaches {} to unknown slice {slice}",
                        e.ue_id
                    ));
                }
            }
            last = e.time;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let scenario = file.into_scenario()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    cell: CellSection,
    #[serde(default)]
    xapp: BTreeMap<String, XappSection>,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    events: Vec<EventSection>,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CellSection {
    id: String,
    total_prbs: u32,
    slices: Vec<String>,
    min_prbs_per_slice: u32,
}

impl Default for CellSection {
    fn default() -> Self {
        Self {
            id: "cell-0".into(),
            total_prbs: 100,
            slices: vec!["A".into(), "B".into()],
            min_prbs_per_slice: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum KindName {
    PrioritySlice,
    EqualSplit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct XappSection {
    id: Option<String>,
    kind: KindName,
    #[serde(default = "default_period")]
    period: SimTime,
    #[serde(default)]
    phase: SimTime,
    #[serde(default)]
    priority: u32,
    prioritized_slice: Option<String>,
    ttl: Option<SimTime>,
}

fn default_period() -> SimTime {
    DEFAULT_PERIOD_MS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    kappa: f64,
    sigma: f64,
    sample_interval: SimTime,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ThroughputModelParams::default();
        Self {
            kappa: d.rate_per_prb,
            sigma: d.noise_sigma,
            sample_interval: d.sample_interval,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ActionName {
    Attach,
    Detach,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventSection {
    time: SimTime,
    action: ActionName,
    ue: String,
    slice: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunSection {
    duration: SimTime,
    cutoff: SimTime,
    seed: u64,
    replications: u32,
    cm: bool,
    latency: SimTime,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = Scenario::testbed_default();
        Self {
            duration: d.duration_ms,
            cutoff: d.warmup_cutoff_ms,
            seed: d.seed,
            replications: d.replications,
            cm: d.cm_enabled,
            latency: d.latency_ms,
        }
    }
}

impl ConfigFile {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let cell = CellConfig::new(
            CellId::new(self.cell.id),
            self.cell.total_prbs,
            self.cell
                .slices
                .iter()
                .map(|s| SliceId::new(s.as_str()))
                .collect(),
            self.cell.min_prbs_per_slice,
        )?;

        let mut keyed = Vec::with_capacity(self.xapp.len());
        for (key, section) in self.xapp {
            let n: u32 = key.parse().map_err(|_| {
                ScenarioError::Parse(format!("xapp table key {key:?} is not a number"))
            })?;
            keyed.push((n, section));
        }
        keyed.sort_by_key(|(n, _)| *n);

        let mut xapps = Vec::with_capacity(keyed.len());
        for (n, x) in keyed {
            let id = x.id.unwrap_or_else(|| format!("xapp-{n}"));
            let kind = match (x.kind, x.prioritized_slice) {
                (KindName::PrioritySlice, Some(s)) => XappKind::PrioritySlice {
                    prioritized_slice: s.as_str().into(),
                },
                (KindName::PrioritySlice, None) => {
                    return Err(ScenarioError::Invalid(format!(
                        "xapp.{n}: priority-slice needs prioritized_slice"
                    )))
                }
                (KindName::EqualSplit, Some(_)) => {
                    return Err(ScenarioError::Invalid(format!(
                        "xapp.{n}: prioritized_slice only applies to priority-slice"
                    )))
                }
                (KindName::EqualSplit, None) => XappKind::EqualSplit,
            };
            xapps.push(XappConfig {
                xapp_id: XappId::new(id),
                period: x.period,
                phase_offset: x.phase,
                priority: x.priority,
                kind,
                decision_ttl: x.ttl.unwrap_or(2 * x.period),
            });
        }

        let events = self
            .events
            .into_iter()
            .map(|e| {
                let action = match (e.action, e.slice) {
                    (ActionName::Attach, Some(s)) => UeAction::Attach(s.as_str().into()),
                    (ActionName::Attach, None) => {
                        return Err(ScenarioError::Invalid(format!(
                            "attach of {} at {} needs a slice",
                            e.ue, e.time
                        )))
                    }
                    (ActionName::Detach, _) => UeAction::Detach,
                };
                Ok(UeEvent {
                    time: e.time,
                    ue_id: e.ue.as_str().into(),
                    action,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Scenario {
            cell,
            xapps,
            model: ThroughputModelParams {
                rate_per_prb: self.model.kappa,
                noise_sigma: self.model.sigma,
                sample_interval: self.model.sample_interval,
            },
            events,
            duration_ms: self.run.duration,
            warmup_cutoff_ms: self.run.cutoff,
            cm_enabled: self.run.cm,
            seed: self.run.seed,
            replications: self.run.replications,
            latency_ms: self.run.latency,
        })
    }
}

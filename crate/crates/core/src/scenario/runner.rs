//! Event loop for one scenario run, and the two-arm experiment built on it.
//!
//! At every instant the loop handles, in order: UE attach/detach events,
//! REPORTs for the xApps that tick now, every delivery due, the xApp ticks
//! themselves, every delivery due again, and finally the throughput sample.
//! With zero latency an xApp's CONTROL is therefore applied at the gNB before
//! the sample taken at the same instant.

use indexmap::IndexMap;
use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::{ControlDecision, RanSnapshot, SimTime, UeId, XappId};
use crate::fabric::{
    ControlOutcome, Delivery, DeliveryRecord, EndpointId, EndpointRole, Envelope, MessageFabric,
    Payload,
};
use crate::mitigation::{AuditRecord, CentralController, Disposition, ResolvedConflict};
use crate::ran::{AppliedDecision, GnbState, ThroughputSample};
use crate::xapp::{on_tick, XappConfig, XappError};

use super::config::{Scenario, UeAction};
use super::stats::{
    category_stats, per_ue_stats, run_stats, sd_reduction, CategoryStats, RunStats, UeStats,
};
use super::ScenarioError;

pub const GNB_ENDPOINT: &str = "gnb-0";
pub const CONTROLLER_ENDPOINT: &str = "cc-0";

pub const NO_CM_LABEL: &str = "No CM";
pub const CMF_LABEL: &str = "CMF";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct XappCounters {
    pub ticks: u64,
    pub skipped: u64,
    pub notices: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub cm_enabled: bool,
    /// Every sample in time order, all UEs interleaved.
    pub samples: Vec<ThroughputSample>,
    /// Controller audit: one record per disposition.
    pub dispositions: Vec<AuditRecord>,
    /// Post-warmup statistics of every UE with at least two such samples.
    pub per_ue_stats: IndexMap<UeId, UeStats>,
    /// Decisions as received by the controller, in fabric order.
    pub submitted: Vec<ControlDecision>,
    /// Decisions as acted on by the gNB.
    pub applied: Vec<AppliedDecision>,
    pub conflicts: Vec<ResolvedConflict>,
    pub fabric_audit: Vec<DeliveryRecord>,
    pub interception_breaches: usize,
    pub nacks: u64,
    pub xapps: IndexMap<XappId, XappCounters>,
}

impl RunResult {
    pub fn run_stats(&self) -> Result<RunStats, ScenarioError> {
        Ok(run_stats(self.per_ue_stats.values())?)
    }

    pub fn series<'a>(&'a self, ue: &'a str) -> impl Iterator<Item = &'a ThroughputSample> + 'a {
        self.samples.iter().filter(move |s| s.ue_id.as_str() == ue)
    }

    pub fn count_dispositions(&self, xapp: &str, disposition: Disposition) -> usize {
        self.dispositions
            .iter()
            .filter(|r| r.decision.xapp_id().as_str() == xapp && r.disposition == disposition)
            .count()
    }
}

struct XappHost {
    config: XappConfig,
    endpoint: EndpointId,
    latest: Option<RanSnapshot>,
    next_seq: u64,
    counters: XappCounters,
}

struct Simulation<'a> {
    scenario: &'a Scenario,
    fabric: MessageFabric,
    gnb_ep: EndpointId,
    cc_ep: EndpointId,
    gnb: GnbState,
    controller: CentralController,
    hosts: Vec<XappHost>,
    rng: ChaCha8Rng,
    samples: Vec<ThroughputSample>,
    submitted: Vec<ControlDecision>,
    nacks: u64,
}

pub fn run(scenario: &Scenario) -> Result<RunResult, ScenarioError> {
    scenario.validate()?;
    Simulation::new(scenario)?.execute()
}

impl<'a> Simulation<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, ScenarioError> {
        let mut fabric = MessageFabric::with_latency(scenario.latency_ms);
        let gnb_ep = fabric
            .register_endpoint(GNB_ENDPOINT.into(), EndpointRole::E2Node)?
            .id;
        let cc_ep = fabric
            .register_endpoint(CONTROLLER_ENDPOINT.into(), EndpointRole::Controller)?
            .id;
        let mut hosts = Vec::with_capacity(scenario.xapps.len());
        for x in &scenario.xapps {
            let endpoint = fabric
                .register_endpoint(EndpointId::new(x.xapp_id.as_str()), EndpointRole::Xapp)?
                .id;
            hosts.push(XappHost {
                config: x.clone(),
                endpoint,
                latest: None,
                next_seq: 0,
                counters: XappCounters::default(),
            });
        }
        let priorities = scenario
            .xapps
            .iter()
            .map(|x| (x.xapp_id.clone(), x.priority))
            .collect();
        Ok(Self {
            scenario,
            fabric,
            gnb_ep,
            cc_ep,
            gnb: GnbState::new(scenario.cell.clone()),
            controller: CentralController::new(priorities, scenario.cm_enabled),
            hosts,
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            samples: Vec::new(),
            submitted: Vec::new(),
            nacks: 0,
        })
    }

    fn execute(mut self) -> Result<RunResult, ScenarioError> {
        let duration = self.scenario.duration_ms;
        let interval = self.scenario.model.sample_interval;
        let mut next_event = 0;
        let mut now: SimTime = 0;

        while now < duration {
            while let Some(e) = self
                .scenario
                .events
                .get(next_event)
                .filter(|e| e.time == now)
            {
                match &e.action {
                    UeAction::Attach(slice) => {
                        self.gnb.attach_ue(e.ue_id.clone(), slice.clone(), now)?
                    }
                    UeAction::Detach => self.gnb.detach_ue(&e.ue_id, now)?,
                }
                next_event += 1;
            }

            let ticking: Vec<usize> = (0..self.hosts.len())
                .filter(|&i| self.hosts[i].config.is_tick(now))
                .collect();
            for &i in &ticking {
                let report = Envelope::new(
                    self.gnb_ep.clone(),
                    self.hosts[i].endpoint.clone(),
                    now,
                    Payload::Report(self.gnb.snapshot(now)),
                );
                self.fabric.route(report)?;
            }
            self.drain(now)?;
            for &i in &ticking {
                self.tick(i, now)?;
            }
            self.drain(now)?;

            if now.is_multiple_of(interval) {
                let batch = self
                    .gnb
                    .sample_throughput(&self.scenario.model, &mut self.rng, now);
                self.samples.extend(batch);
            }

            let mut next = (now / interval + 1) * interval;
            if let Some(e) = self.scenario.events.get(next_event) {
                next = next.min(e.time);
            }
            for h in &self.hosts {
                next = next.min(h.config.next_tick_at_or_after(now + 1));
            }
            if let Some(t) = self.fabric.next_delivery_time() {
                next = next.min(t);
            }
            now = next;
        }
        self.finish()
    }

    fn tick(&mut self, i: usize, now: SimTime) -> Result<(), ScenarioError> {
        let host = &mut self.hosts[i];
        host.counters.ticks += 1;
        let Some(snapshot) = host.latest.as_ref() else {
            host.counters.skipped += 1;
            warn!(
                "{} skipped tick at {now}: no report yet",
                host.config.xapp_id
            );
            return Ok(());
        };
        let msg = match on_tick(&host.config, snapshot, now, host.next_seq) {
            Ok(msg) => msg,
            Err(e @ XappError::StaleSnapshot { .. }) => {
                host.counters.skipped += 1;
                warn!("skipped tick: {e}");
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        host.next_seq += 1;
        let env = Envelope::new(
            host.endpoint.clone(),
            self.gnb_ep.clone(),
            now,
            Payload::Control(msg),
        );
        self.fabric.route(env)?;
        Ok(())
    }

    fn drain(&mut self, now: SimTime) -> Result<(), ScenarioError> {
        while let Some(d) = self.fabric.next_due(now) {
            self.deliver(d)?;
        }
        Ok(())
    }

    fn deliver(&mut self, d: Delivery) -> Result<(), ScenarioError> {
        let at = d.delivered_at;
        match (self.fabric.role(&d.recipient), d.envelope.payload) {
            (Some(EndpointRole::Xapp), Payload::Report(snapshot)) => {
                if let Some(h) = self.hosts.iter_mut().find(|h| h.endpoint == d.recipient) {
                    h.latest = Some(snapshot);
                }
            }
            (Some(EndpointRole::Xapp), Payload::Notice(notice)) => {
                // built-in xApps do not react to rejections
                if let Some(h) = self.hosts.iter_mut().find(|h| h.endpoint == d.recipient) {
                    h.counters.notices += 1;
                }
                debug!("{} notified: {:?}", d.recipient, notice.disposition);
            }
            (Some(EndpointRole::Controller), Payload::Control(msg)) => {
                self.submitted.extend(msg.decisions().iter().cloned());
                let out = self.controller.submit_control(&msg, at)?;
                if let Some(fwd) = out.forward {
                    self.fabric.route(Envelope::new(
                        self.cc_ep.clone(),
                        self.gnb_ep.clone(),
                        at,
                        Payload::Forward(fwd),
                    ))?;
                }
                for (xapp, notice) in out.notices {
                    self.fabric.route(Envelope::new(
                        self.cc_ep.clone(),
                        EndpointId::new(xapp.as_str()),
                        at,
                        Payload::Notice(notice),
                    ))?;
                }
            }
            (Some(EndpointRole::Controller), Payload::Outcome(o)) => {
                if let Some(v) = &o.violation {
                    self.nacks += 1;
                    warn!(
                        "gNB nacked control {}#{}: {v}",
                        o.origin, o.origin_sequence_no
                    );
                }
            }
            (Some(EndpointRole::E2Node), Payload::Forward(fwd)) => {
                self.gnb.withdraw(&fwd.withdrawn, at);
                let verdict = self.gnb.apply_control(&fwd.decisions, at)?;
                let outcome = ControlOutcome {
                    origin: fwd.origin,
                    origin_sequence_no: fwd.origin_sequence_no,
                    violation: verdict.err().map(|v| v.to_string()),
                };
                self.fabric.route(Envelope::new(
                    self.gnb_ep.clone(),
                    self.cc_ep.clone(),
                    at,
                    Payload::Outcome(outcome),
                ))?;
            }
            (role, payload) => {
                return Err(ScenarioError::Invalid(format!(
                    "unexpected {payload:?} delivered to {} ({role:?})",
                    d.recipient
                )))
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<RunResult, ScenarioError> {
        let cutoff = self.scenario.warmup_cutoff_ms;
        let mut by_ue: IndexMap<UeId, Vec<&ThroughputSample>> = IndexMap::new();
        for s in &self.samples {
            by_ue.entry(s.ue_id.clone()).or_default().push(s);
        }
        let mut per_ue = IndexMap::new();
        for (ue, series) in by_ue {
            match per_ue_stats(series, cutoff) {
                Ok(stats) => {
                    per_ue.insert(ue, stats);
                }
                Err(e) => debug!("{ue} left out of run statistics: {e}"),
            }
        }
        let breaches = self.fabric.interception_breaches().len();
        Ok(RunResult {
            seed: self.scenario.seed,
            cm_enabled: self.scenario.cm_enabled,
            per_ue_stats: per_ue,
            dispositions: self.controller.ledger().audit().to_vec(),
            submitted: self.submitted,
            applied: self.gnb.applied().to_vec(),
            conflicts: self.controller.conflicts().to_vec(),
            fabric_audit: self.fabric.audit().to_vec(),
            interception_breaches: breaches,
            nacks: self.nacks,
            xapps: self
                .hosts
                .into_iter()
                .map(|h| (h.config.xapp_id, h.counters))
                .collect(),
            samples: self.samples,
        })
    }
}

/// One run inside an experiment.
#[derive(Debug, Clone)]
pub struct LabeledRun {
    pub category: String,
    /// 1-based within the category.
    pub run_id: u32,
    pub result: RunResult,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub runs: Vec<LabeledRun>,
    pub no_cm: CategoryStats,
    pub cmf: CategoryStats,
    /// `None` when the baseline shows no variability.
    pub sd_reduction: Option<f64>,
}

/// Runs `runs` replications of `base` with mitigation off and on. Replication
/// `k` of either arm uses seed `base.seed + k`.
pub fn run_experiment(base: &Scenario, runs: u32) -> Result<Experiment, ScenarioError> {
    if runs == 0 {
        return Err(ScenarioError::Invalid(
            "at least one run per arm is required".into(),
        ));
    }
    base.validate()?;
    let jobs: Vec<(bool, u32)> = [false, true]
        .into_iter()
        .flat_map(|cm| (0..runs).map(move |k| (cm, k)))
        .collect();
    let mut labeled = jobs
        .par_iter()
        .map(|&(cm, k)| {
            let scenario = Scenario {
                cm_enabled: cm,
                seed: base.seed.wrapping_add(u64::from(k)),
                ..base.clone()
            };
            run(&scenario).map(|result| LabeledRun {
                category: if cm { CMF_LABEL } else { NO_CM_LABEL }.to_owned(),
                run_id: k + 1,
                result,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    labeled.sort_by_key(|r| (r.category != NO_CM_LABEL, r.run_id));

    let arm = |label: &str| -> Result<CategoryStats, ScenarioError> {
        let stats = labeled
            .iter()
            .filter(|r| r.category == label)
            .map(|r| r.result.run_stats())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(category_stats(label, &stats)?)
    };
    let no_cm = arm(NO_CM_LABEL)?;
    let cmf = arm(CMF_LABEL)?;
    Ok(Experiment {
        sd_reduction: sd_reduction(&no_cm, &cmf),
        runs: labeled,
        no_cm,
        cmf,
    })
}

//! In-process stand-in for the RIC Message Router.
//!
//! Envelopes are queued on a single logical timeline and handed out in a
//! total order: delivery time, then sender id, then the sender's sequence
//! number. CONTROL envelopes addressed to an E2 node are always diverted to
//! the controller endpoint first; only the controller itself may deliver
//! CONTROL to an E2 node.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::domain::{ControlDecision, E2ControlMessage, RanSnapshot, SimTime, XappId};
use crate::mitigation::Disposition;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EndpointId(String);

impl EndpointId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EndpointId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndpointRole {
    Xapp,
    Controller,
    E2Node,
}

/// Returned by [`MessageFabric::register_endpoint`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointHandle {
    pub id: EndpointId,
    pub role: EndpointRole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EnvelopeKind {
    Report,
    Control,
    Ack,
    Reject,
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvelopeKind::Report => "report",
            EnvelopeKind::Control => "control",
            EnvelopeKind::Ack => "ack",
            EnvelopeKind::Reject => "reject",
        })
    }
}

/// Controller-to-gNB CONTROL: the decisions that survived mitigation,
/// consolidated into one message, plus earlier decisions the controller has
/// since withdrawn because they lost a conflict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardedControl {
    pub origin: XappId,
    pub origin_sequence_no: u64,
    pub decisions: Vec<ControlDecision>,
    pub withdrawn: Vec<ControlDecision>,
}

/// Sent to an xApp whose decision was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectNotice {
    pub decision: ControlDecision,
    pub disposition: Disposition,
}

/// gNB response to a forwarded control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlOutcome {
    pub origin: XappId,
    pub origin_sequence_no: u64,
    /// `None` on ack; the validation failure on nack.
    pub violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Report(RanSnapshot),
    Control(E2ControlMessage),
    Forward(ForwardedControl),
    Notice(RejectNotice),
    Outcome(ControlOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub from: EndpointId,
    pub to: EndpointId,
    pub sent_at: SimTime,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(from: EndpointId, to: EndpointId, sent_at: SimTime, payload: Payload) -> Self {
        Self {
            from,
            to,
            sent_at,
            payload,
        }
    }

    pub fn kind(&self) -> EnvelopeKind {
        match &self.payload {
            Payload::Report(_) => EnvelopeKind::Report,
            Payload::Control(_) | Payload::Forward(_) => EnvelopeKind::Control,
            Payload::Notice(_) => EnvelopeKind::Reject,
            Payload::Outcome(o) if o.violation.is_none() => EnvelopeKind::Ack,
            Payload::Outcome(_) => EnvelopeKind::Reject,
        }
    }
}

/// An envelope handed to its recipient.
#[derive(Debug, Clone, PartialEq)]
pub struct Delivery {
    pub envelope: Envelope,
    /// Final recipient; differs from `envelope.to` when intercepted.
    pub recipient: EndpointId,
    pub delivered_at: SimTime,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub delivered_at: SimTime,
    pub kind: EnvelopeKind,
    pub from: EndpointId,
    pub addressed_to: EndpointId,
    pub delivered_to: EndpointId,
    pub sequence_no: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FabricError {
    #[error("endpoint {0} is already registered")]
    Duplicate(EndpointId),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(EndpointId),
    #[error("control addressed to E2 node {0} but no controller is registered")]
    NoController(EndpointId),
}

type QueueKey = (SimTime, EndpointId, u64);

#[derive(Debug, Default)]
pub struct MessageFabric {
    roles: HashMap<EndpointId, EndpointRole>,
    controller: Option<EndpointId>,
    next_seq: HashMap<EndpointId, u64>,
    latency: SimTime,
    queue: BTreeMap<QueueKey, (Envelope, EndpointId)>,
    audit: Vec<DeliveryRecord>,
}

impl MessageFabric {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fabric adding a fixed `latency` to every hop.
    pub fn with_latency(latency: SimTime) -> Self {
        Self {
            latency,
            ..Self::default()
        }
    }

    pub fn latency(&self) -> SimTime {
        self.latency
    }

    pub fn register_endpoint(
        &mut self,
        id: EndpointId,
        role: EndpointRole,
    ) -> Result<EndpointHandle, FabricError> {
        if self.roles.contains_key(&id) {
            return Err(FabricError::Duplicate(id));
        }
        self.roles.insert(id.clone(), role);
        if role == EndpointRole::Controller && self.controller.is_none() {
            self.controller = Some(id.clone());
        }
        Ok(EndpointHandle { id, role })
    }

    pub fn role(&self, id: &EndpointId) -> Option<EndpointRole> {
        self.roles.get(id).copied()
    }

    pub fn route(&mut self, envelope: Envelope) -> Result<(), FabricError> {
        if !self.roles.contains_key(&envelope.from) {
            return Err(FabricError::UnknownEndpoint(envelope.from));
        }
        let to_role = self
            .role(&envelope.to)
            .ok_or_else(|| FabricError::UnknownEndpoint(envelope.to.clone()))?;

        let recipient = if envelope.kind() == EnvelopeKind::Control
            && to_role == EndpointRole::E2Node
            && self.role(&envelope.from) != Some(EndpointRole::Controller)
        {
            self.controller
                .clone()
                .ok_or_else(|| FabricError::NoController(envelope.to.clone()))?
        } else {
            envelope.to.clone()
        };

        let seq = self.next_seq.entry(envelope.from.clone()).or_insert(0);
        let sequence_no = *seq;
        *seq += 1;
        let at = envelope.sent_at + self.latency;
        self.queue.insert(
            (at, envelope.from.clone(), sequence_no),
            (envelope, recipient),
        );
        Ok(())
    }

    pub fn next_delivery_time(&self) -> Option<SimTime> {
        self.queue.keys().next().map(|k| k.0)
    }

    /// Pops the next delivery due at or before `now`.
    pub fn next_due(&mut self, now: SimTime) -> Option<Delivery> {
        if self.next_delivery_time()? > now {
            return None;
        }
        let ((delivered_at, _, sequence_no), (envelope, recipient)) = self.queue.pop_first()?;
        self.audit.push(DeliveryRecord {
            delivered_at,
            kind: envelope.kind(),
            from: envelope.from.clone(),
            addressed_to: envelope.to.clone(),
            delivered_to: recipient.clone(),
            sequence_no,
        });
        Some(Delivery {
            envelope,
            recipient,
            delivered_at,
            sequence_no,
        })
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn audit(&self) -> &[DeliveryRecord] {
        &self.audit
    }

    /// Audit records of CONTROL envelopes that reached an E2 node without
    /// coming from the controller. Empty when interception held.
    pub fn interception_breaches(&self) -> Vec<&DeliveryRecord> {
        self.audit
            .iter()
            .filter(|r| {
                r.kind == EnvelopeKind::Control
                    && self.role(&r.delivered_to) == Some(EndpointRole::E2Node)
                    && self.role(&r.from) != Some(EndpointRole::Controller)
            })
            .collect()
    }
}

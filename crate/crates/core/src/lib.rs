//! Discrete-event simulator of a Near-RT RIC whose Central Controller
//! detects and resolves direct conflicts between slice-allocation xApps.
//!
//! Modules, bottom-up:
//!
//! - [`domain`]: cells, slices, PRB allocations, control decisions.
//! - [`fabric`]: ordered message routing with mandatory interception of
//!   CONTROL towards the E2 node.
//! - [`xapp`]: the priority-slice and equal-split xApps.
//! - [`mitigation`]: decision ledger, conflict detection and resolution.
//! - [`ran`]: the simulated gNB and its throughput model.
//! - [`scenario`]: config files, the event loop, statistics, CSV export.

pub mod domain;
pub mod fabric;
pub mod mitigation;
pub mod ran;
pub mod scenario;
pub mod xapp;

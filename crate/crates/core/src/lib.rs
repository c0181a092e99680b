//! Fault location, isolation and service restoration (FLISR) simulation for
//! medium-voltage distribution grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`topology`] ingests GIS-style tables, builds the switch asset graph and
//!   reads/writes the canonical topology document.
//! * [`protocol`] encodes and interprets JSON SCADA point messages.
//! * [`planner`] holds the per-switch decision rules, centralized plan
//!   construction and energization analysis.
//! * [`agent`] is the distributed counterpart: one edge agent per pole.
//! * [`transport`] is the simulated publish/subscribe fabric with calibrated
//!   latency profiles.
//! * [`scenario`] orchestrates fault cases end to end and writes the CSV
//!   report.
//! * [`server`] exposes the platform over HTTP with a per-site event stream.

pub mod agent;
pub mod fixtures;
pub mod planner;
pub mod protocol;
pub mod scenario;
pub mod server;
pub mod topology;
pub mod transport;

pub use planner::{ControlAction, ControlPlan, ControlVerb, SwitchObservation};
pub use protocol::{PointMessage, PointValue};
pub use scenario::{FaultScenario, Mode, SimulationResult};
pub use topology::{GridGraph, SwitchAsset, SwitchKind};
pub use transport::{NetworkProfile, ProfileName};

//! Fault case orchestration.
//!
//! A [`FaultScenario`] names the switches that see a fault and the ones that
//! lose voltage. [`ScenarioEngine::run`] turns it into status messages,
//! routes them over the simulated bus to either the centralized service or
//! the per-pole agents, collects the control messages that come back, and
//! computes the outage metrics of a [`SimulationResult`]. Results are
//! appended to a nine column CSV report.

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::time::Duration;

use chrono::{Local, NaiveDateTime};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentError, AgentState, AgentTask, PoleProperties};
use crate::planner::{
    affected_customers, centralized_plan, ControlAction, ControlPlan, ControlVerb, ObservationStore, PlanError,
    SwitchObservation,
};
use crate::protocol::{self, make_control, make_status, Indicator, Meaning, PointMessage};
use crate::topology::GridGraph;
use crate::transport::{
    control_topic, status_topic, ClockMode, MessageBus, NetworkProfile, ProfileName, Subscription, TransportError,
    DEFAULT_JITTER_FRACTION,
};

/// Customer minutes lost per hour per affected customer, as exhibited by the
/// reference sample rows.
pub const CML_PER_CUSTOMER_HOUR: u64 = 57;

/// Timestamp layout of the report, millisecond resolution.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.3f";

pub const REPORT_HEADER: [&str; 9] = [
    "Start time",
    "End time",
    "Faulted devices",
    "Down devices",
    "Operation",
    "Affected customers (pre)",
    "Affected customers (post)",
    "CML per hour (pre)",
    "CML per hour (post)",
];

pub fn cml_per_hour(affected: u32) -> u64 {
    CML_PER_CUSTOMER_HOUR * u64::from(affected)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("device {0} is listed as both faulted and down")]
    Overlap(String),
    #[error("device {0} is listed twice")]
    Duplicate(String),
    #[error("scenario targets site {scenario:?} but topology is {topology:?}")]
    SiteMismatch { scenario: String, topology: String },
    #[error("no quiescence within {0:?}")]
    Timeout(Duration),
    #[error("control for ASDU {0} does not map to a switch")]
    StrayControl(u32),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Centralized,
    #[default]
    Distributed,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Centralized => "centralized",
            Mode::Distributed => "distributed",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centralized" | "centralised" => Ok(Mode::Centralized),
            "distributed" => Ok(Mode::Distributed),
            _ => Err(format!("unknown mode {s:?}")),
        }
    }
}

fn default_profile() -> ProfileName {
    ProfileName::FourGLte
}

/// An operator-authored test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub site: String,
    #[serde(default)]
    pub faulted: Vec<String>,
    #[serde(default)]
    pub down: Vec<String>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_profile")]
    pub network_profile: ProfileName,
    #[serde(default)]
    pub seed: u64,
}

impl FaultScenario {
    pub fn new(site: impl Into<String>, faulted: &[&str], down: &[&str]) -> Self {
        Self {
            site: site.into(),
            faulted: faulted.iter().map(|s| s.to_string()).collect(),
            down: down.iter().map(|s| s.to_string()).collect(),
            mode: Mode::default(),
            network_profile: default_profile(),
            seed: 0,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_profile(mut self, profile: ProfileName) -> Self {
        self.network_profile = profile;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.faulted.is_empty() && self.down.is_empty()
    }

    pub fn validate(&self, graph: &GridGraph) -> Result<(), ScenarioError> {
        if self.site != graph.site_id() {
            return Err(ScenarioError::SiteMismatch {
                scenario: self.site.clone(),
                topology: graph.site_id().to_string(),
            });
        }
        let mut seen = HashMap::new();
        for (id, faulted) in self
            .faulted
            .iter()
            .map(|id| (id, true))
            .chain(self.down.iter().map(|id| (id, false)))
        {
            if graph.switch(id).is_none() {
                return Err(ScenarioError::UnknownDevice(id.clone()));
            }
            if let Some(prev) = seen.insert(id.as_str(), faulted) {
                return Err(if prev != faulted {
                    ScenarioError::Overlap(id.clone())
                } else {
                    ScenarioError::Duplicate(id.clone())
                });
            }
        }
        Ok(())
    }

    /// Observations implied by the case: faulted devices see fault current
    /// and voltage loss, down devices only voltage loss.
    pub fn observations(&self) -> Vec<SwitchObservation> {
        self.faulted
            .iter()
            .map(|id| SwitchObservation::new(id.clone(), true, true))
            .chain(self.down.iter().map(|id| SwitchObservation::new(id.clone(), false, true)))
            .collect()
    }

    fn rank(&self) -> HashMap<&str, usize> {
        self.faulted
            .iter()
            .chain(&self.down)
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Status messages of a case in scenario order: FPI then LVI for each
/// faulted device, LVI for each down device.
pub fn inject(graph: &GridGraph, scenario: &FaultScenario) -> Result<Vec<PointMessage>, ScenarioError> {
    let lookup = |id: &String| graph.switch(id).ok_or_else(|| ScenarioError::UnknownDevice(id.clone()));
    let mut out = Vec::with_capacity(2 * scenario.faulted.len() + scenario.down.len());
    for id in &scenario.faulted {
        let s = lookup(id)?;
        out.push(make_status(s.kind, s.asdu, Indicator::Fpi, true));
        out.push(make_status(s.kind, s.asdu, Indicator::Lvi, true));
    }
    for id in &scenario.down {
        let s = lookup(id)?;
        out.push(make_status(s.kind, s.asdu, Indicator::Lvi, true));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Clocks
// ---------------------------------------------------------------------------

/// Source of the wall-clock start timestamp.
pub trait Clock: Send + Sync {
    fn now(&self) -> NaiveDateTime;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> NaiveDateTime {
        Local::now().naive_local()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub NaiveDateTime);

impl FixedClock {
    pub fn parse(text: &str) -> Result<Self, chrono::ParseError> {
        NaiveDateTime::parse_from_str(text, TIMESTAMP_FORMAT).map(Self)
    }
}

impl Clock for FixedClock {
    fn now(&self) -> NaiveDateTime {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Results and report
// ---------------------------------------------------------------------------

mod timestamp {
    use super::TIMESTAMP_FORMAT;
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&t.format(TIMESTAMP_FORMAT))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        NaiveDateTime::parse_from_str(&text, TIMESTAMP_FORMAT).map_err(serde::de::Error::custom)
    }
}

/// One report row plus run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    #[serde(with = "timestamp")]
    pub start_time: NaiveDateTime,
    #[serde(with = "timestamp")]
    pub end_time: NaiveDateTime,
    pub faulted_devices: Vec<String>,
    pub down_devices: Vec<String>,
    pub operations: String,
    pub affected_pre: u32,
    pub affected_post: u32,
    pub cml_per_hour_pre: u64,
    pub cml_per_hour_post: u64,
    pub site: String,
    pub mode: Mode,
    pub profile: ProfileName,
    pub elapsed_ms: f64,
    pub actions: Vec<ControlAction>,
}

impl SimulationResult {
    /// The nine report cells, in column order.
    pub fn report_cells(&self) -> [String; 9] {
        [
            self.start_time.format(TIMESTAMP_FORMAT).to_string(),
            self.end_time.format(TIMESTAMP_FORMAT).to_string(),
            self.faulted_devices.join(", "),
            self.down_devices.join(", "),
            self.operations.clone(),
            self.affected_pre.to_string(),
            self.affected_post.to_string(),
            self.cml_per_hour_pre.to_string(),
            self.cml_per_hour_post.to_string(),
        ]
    }
}

/// Append one row, writing the header first if the file is new or empty.
pub fn append_report(result: &SimulationResult, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        writer.write_record(REPORT_HEADER)?;
    }
    writer.write_record(result.report_cells())?;
    writer.flush()?;
    Ok(())
}

/// Data rows of a report, header excluded.
pub fn read_report(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>, ScenarioError> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(REPORT_HEADER) {
        return Err(ScenarioError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "unexpected report header",
        ))));
    }
    reader
        .records()
        .map(|r| Ok(r?.iter().map(str::to_string).collect()))
        .collect()
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

/// How distributed agents are hosted during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRuntime {
    /// Agent state driven directly on the engine thread.
    Inline,
    /// One thread per agent, reached over channels.
    #[default]
    Threaded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    /// Upper bound on bus time before a run is abandoned.
    pub timeout: Duration,
    /// Gap without deliveries after which a run is complete. `None` picks
    /// three times the profile round trip, at least 50 ms.
    pub settle_window: Option<Duration>,
    pub clock_mode: ClockMode,
    pub agent_runtime: AgentRuntime,
    pub jitter_fraction: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(30),
            settle_window: None,
            clock_mode: ClockMode::Simulated,
            agent_runtime: AgentRuntime::default(),
            jitter_fraction: DEFAULT_JITTER_FRACTION,
        }
    }
}

impl EngineConfig {
    pub fn settle_window_for(&self, profile: &NetworkProfile) -> Duration {
        self.settle_window.unwrap_or_else(|| {
            Duration::from_secs_f64(3.0 * profile.mean_round_trip_ms / 1000.0).max(Duration::from_millis(50))
        })
    }
}

/// Progress notifications emitted while a run executes.
#[derive(Debug, Clone, PartialEq)]
pub enum RunEvent {
    StatusSent { topic: String, message: PointMessage },
    ControlReceived { action: ControlAction, at_ms: f64 },
}

enum AgentSlot {
    Inline(AgentState),
    Task(AgentTask),
}

impl AgentSlot {
    fn deliver(&mut self, message: &PointMessage) -> Result<Option<PointMessage>, AgentError> {
        match self {
            AgentSlot::Inline(state) => state.handle(message),
            AgentSlot::Task(task) => task.deliver(*message),
        }
    }
}

enum Controller {
    Central {
        inbox: Subscription,
        store: ObservationStore,
        sent: HashMap<String, ControlVerb>,
    },
    Agents(Vec<(AgentSlot, Subscription)>),
}

pub struct ScenarioEngine {
    config: EngineConfig,
    clock: Box<dyn Clock>,
}

impl Default for ScenarioEngine {
    fn default() -> Self {
        Self::new(EngineConfig::default())
    }
}

impl ScenarioEngine {
    pub fn new(config: EngineConfig) -> Self {
        Self {
            config,
            clock: Box::new(SystemClock),
        }
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Profile carrying traffic for a run: the chosen cellular link for the
    /// centralized service, the local link for edge agents.
    pub fn link_profile(&self, scenario: &FaultScenario) -> NetworkProfile {
        let base = match scenario.mode {
            Mode::Centralized => NetworkProfile::calibrated(scenario.network_profile),
            Mode::Distributed => NetworkProfile::local(),
        };
        base.with_jitter(self.config.jitter_fraction)
    }

    pub fn run(&self, graph: &GridGraph, scenario: &FaultScenario) -> Result<SimulationResult, ScenarioError> {
        self.run_observed(graph, scenario, |_| {})
    }

    pub fn run_observed(
        &self,
        graph: &GridGraph,
        scenario: &FaultScenario,
        mut on_event: impl FnMut(&RunEvent),
    ) -> Result<SimulationResult, ScenarioError> {
        scenario.validate(graph)?;
        let start_time = self.clock.now();
        let profile = self.link_profile(scenario);
        let settle = self.config.settle_window_for(&profile);

        let mut bus = MessageBus::new(scenario.seed, self.config.clock_mode);
        let platform = bus.subscribe("asdu/+/control")?;
        let mut controller = match scenario.mode {
            Mode::Centralized => Controller::Central {
                inbox: bus.subscribe("asdu/+/status")?,
                store: ObservationStore::new(),
                sent: HashMap::new(),
            },
            Mode::Distributed => {
                let mut agents = Vec::with_capacity(graph.switches().len());
                for switch in graph.switches() {
                    let props = PoleProperties::from(switch);
                    let slot = match self.config.agent_runtime {
                        AgentRuntime::Inline => AgentSlot::Inline(AgentState::new(props)),
                        AgentRuntime::Threaded => AgentSlot::Task(AgentTask::spawn(props)),
                    };
                    agents.push((slot, bus.subscribe(&status_topic(switch.asdu))?));
                }
                Controller::Agents(agents)
            }
        };

        for message in inject(graph, scenario)? {
            let topic = status_topic(message.asdu_ca);
            on_event(&RunEvent::StatusSent {
                topic: topic.clone(),
                message,
            });
            bus.publish(&topic, message, &profile)?;
        }

        let mut received: IndexMap<String, ControlAction> = IndexMap::new();
        let mut last_control = Duration::ZERO;
        let mut last_activity = Duration::ZERO;
        while let Some(next) = bus.peek_time() {
            if next > last_activity + settle {
                break;
            }
            if next > self.config.timeout {
                return Err(ScenarioError::Timeout(self.config.timeout));
            }
            bus.step();
            last_activity = bus.now();

            match &mut controller {
                Controller::Central { inbox, store, sent } => {
                    let mut changed = false;
                    for env in inbox.drain() {
                        let Some(switch) = graph.switch_by_asdu(env.payload.asdu_ca) else {
                            continue;
                        };
                        let indication = protocol::interpret(&env.payload, switch.kind);
                        let indicator = match indication.meaning {
                            Meaning::Fpi => Indicator::Fpi,
                            Meaning::Lvi => Indicator::Lvi,
                            Meaning::Control | Meaning::Unknown => continue,
                        };
                        store.record(&switch.scada_id, indicator, indication.asserted);
                        changed = true;
                    }
                    if changed {
                        let plan = centralized_plan(graph, &store.snapshot())?;
                        for action in plan.actions() {
                            if sent.get(&action.scada_id) == Some(&action.verb) {
                                continue;
                            }
                            sent.insert(action.scada_id.clone(), action.verb);
                            let switch = graph.switch(&action.scada_id).expect("planned switch exists");
                            let wire = make_control(switch.kind, switch.asdu, action.verb.breaker_action());
                            bus.publish(&control_topic(switch.asdu), wire, &profile)?;
                        }
                    }
                }
                Controller::Agents(agents) => {
                    for (agent, inbox) in agents.iter_mut() {
                        for env in inbox.drain() {
                            if let Some(wire) = agent.deliver(&env.payload)? {
                                bus.publish(&control_topic(wire.asdu_ca), wire, &profile)?;
                            }
                        }
                    }
                }
            }

            for env in platform.drain() {
                let switch = graph
                    .switch_by_asdu(env.payload.asdu_ca)
                    .ok_or(ScenarioError::StrayControl(env.payload.asdu_ca))?;
                let Some(command) = protocol::interpret_control(&env.payload, switch.kind) else {
                    continue;
                };
                let verb = ControlVerb::from_breaker_action(command.action, switch.normally_open);
                let action = ControlAction::new(switch.scada_id.clone(), verb);
                on_event(&RunEvent::ControlReceived {
                    action: action.clone(),
                    at_ms: env.deliver_time.as_secs_f64() * 1000.0,
                });
                // A later command for the same switch supersedes the earlier one.
                received.shift_remove(&switch.scada_id);
                received.insert(switch.scada_id.clone(), action);
                last_control = env.deliver_time;
            }
        }
        bus.close();

        let rank = scenario.rank();
        let plan = ControlPlan::from_actions(received.into_values().collect(), |id| rank.get(id).copied())?;
        let observations = scenario.observations();
        let affected_pre = affected_customers(graph, &observations, None)?;
        let affected_post = affected_customers(graph, &observations, Some(&plan))?;
        let elapsed = chrono::Duration::from_std(last_control).expect("elapsed fits");

        Ok(SimulationResult {
            start_time,
            end_time: start_time + elapsed,
            faulted_devices: scenario.faulted.clone(),
            down_devices: scenario.down.clone(),
            operations: plan.render(),
            affected_pre,
            affected_post,
            cml_per_hour_pre: cml_per_hour(affected_pre),
            cml_per_hour_post: cml_per_hour(affected_post),
            site: graph.site_id().to_string(),
            mode: scenario.mode,
            profile: profile.name,
            elapsed_ms: last_control.as_secs_f64() * 1000.0,
            actions: plan.actions().to_vec(),
        })
    }
}

//! FLISR decision engine.
//!
//! Each switch is judged on three facts: its fault passage indicator (FPI),
//! its loss of voltage indicator (LVI) and whether it is a normally open
//! point (NO).
//!
//! | FPI | LVI | NO | action                      |
//! |-----|-----|----|-----------------------------|
//! |  1  |  1  | *  | open (isolate)              |
//! |  0  |  1  | 0  | close (keep supplying)      |
//! |  0  |  1  | 1  | close the normally open pt. |
//! |  *  |  0  | *  | none                        |
//!
//! The centralized planner applies the rules to every observed switch of a
//! site and orders the result; the same rules run per pole in
//! [`crate::agent`]. Energization analysis is used to count customers still
//! without supply after a plan.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{BreakerAction, Indicator};
use crate::topology::{BreakerState, GridGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("unknown switch {0}")]
    UnknownSwitch(String),
    #[error("more than one action for switch {0}")]
    DuplicateAction(String),
    #[error("switch {0} is not a normally open point")]
    NotNormallyOpen(String),
}

/// Latest indications seen for one switch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwitchObservation {
    pub scada_id: String,
    pub fpi: bool,
    pub lvi: bool,
}

impl SwitchObservation {
    pub fn new(scada_id: impl Into<String>, fpi: bool, lvi: bool) -> Self {
        Self {
            scada_id: scada_id.into(),
            fpi,
            lvi,
        }
    }

    /// FPI and LVI both asserted.
    pub fn is_faulted(&self) -> bool {
        self.fpi && self.lvi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ControlVerb {
    Open,
    Close,
    CloseNormallyOpenPoint,
}

impl ControlVerb {
    pub fn breaker_action(self) -> BreakerAction {
        match self {
            ControlVerb::Open => BreakerAction::Open,
            ControlVerb::Close | ControlVerb::CloseNormallyOpenPoint => BreakerAction::Close,
        }
    }

    pub fn resulting_state(self) -> BreakerState {
        match self {
            ControlVerb::Open => BreakerState::Open,
            ControlVerb::Close | ControlVerb::CloseNormallyOpenPoint => BreakerState::Closed,
        }
    }

    /// Verb recovered from a wire action on a switch with the given
    /// normally-open configuration.
    pub fn from_breaker_action(action: BreakerAction, normally_open: bool) -> Self {
        match (action, normally_open) {
            (BreakerAction::Open, _) => ControlVerb::Open,
            (BreakerAction::Close, false) => ControlVerb::Close,
            (BreakerAction::Close, true) => ControlVerb::CloseNormallyOpenPoint,
        }
    }

    fn past_tense(self) -> &'static str {
        match self {
            ControlVerb::Open => "opened",
            ControlVerb::Close => "closed",
            ControlVerb::CloseNormallyOpenPoint => "N/O point closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlAction {
    pub scada_id: String,
    pub verb: ControlVerb,
}

impl ControlAction {
    pub fn new(scada_id: impl Into<String>, verb: ControlVerb) -> Self {
        Self {
            scada_id: scada_id.into(),
            verb,
        }
    }
}

impl fmt::Display for ControlAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.scada_id, self.verb.past_tense())
    }
}

/// Ordered control actions: opens, then closes, then normally-open closes,
/// with at most one action per switch.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlPlan {
    actions: Vec<ControlAction>,
}

impl ControlPlan {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Order `actions` into a plan.
    ///
    /// Within a tier, actions are sorted by `rank` (lower first, unranked
    /// last) and then by scada id.
    pub fn from_actions<F>(actions: Vec<ControlAction>, rank: F) -> Result<Self, PlanError>
    where
        F: Fn(&str) -> Option<usize>,
    {
        let mut seen = HashSet::new();
        for a in &actions {
            if !seen.insert(a.scada_id.as_str()) {
                return Err(PlanError::DuplicateAction(a.scada_id.clone()));
            }
        }
        let mut keyed: Vec<_> = actions
            .into_iter()
            .map(|a| {
                let r = rank(&a.scada_id).unwrap_or(usize::MAX);
                (a.verb, r, a)
            })
            .collect();
        keyed.sort_by(|x, y| (x.0, x.1, &x.2.scada_id).cmp(&(y.0, y.1, &y.2.scada_id)));
        Ok(Self {
            actions: keyed.into_iter().map(|(_, _, a)| a).collect(),
        })
    }

    pub fn actions(&self) -> &[ControlAction] {
        &self.actions
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    /// Comma separated operation text, e.g.
    /// `S513 opened, S512 closed, S514 N/O point closed`.
    pub fn render(&self) -> String {
        self.actions
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

impl fmt::Display for ControlPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Apply the three decision rules to one switch.
pub fn evaluate_rules(obs: &SwitchObservation, normally_open: bool) -> Option<ControlAction> {
    let verb = match (obs.fpi, obs.lvi, normally_open) {
        (true, true, _) => ControlVerb::Open,
        (false, true, false) => ControlVerb::Close,
        (false, true, true) => ControlVerb::CloseNormallyOpenPoint,
        (_, false, _) => return None,
    };
    Some(ControlAction::new(obs.scada_id.clone(), verb))
}

/// Run the rules over every observation and order the actions.
///
/// Within a tier, actions follow the order of `observations`.
pub fn centralized_plan(
    graph: &GridGraph,
    observations: &[SwitchObservation],
) -> Result<ControlPlan, PlanError> {
    let mut rank = HashMap::with_capacity(observations.len());
    let mut actions = Vec::new();
    for (i, obs) in observations.iter().enumerate() {
        let switch = graph
            .switch(&obs.scada_id)
            .ok_or_else(|| PlanError::UnknownSwitch(obs.scada_id.clone()))?;
        rank.entry(obs.scada_id.as_str()).or_insert(i);
        if let Some(action) = evaluate_rules(obs, switch.normally_open) {
            actions.push(action);
        }
    }
    ControlPlan::from_actions(actions, |id| rank.get(id).copied())
}

/// New graph with the breaker states set by `plan`.
pub fn apply_plan(graph: &GridGraph, plan: &ControlPlan) -> Result<GridGraph, PlanError> {
    let mut next = graph.clone();
    for action in plan.actions() {
        let switch = graph
            .switch(&action.scada_id)
            .ok_or_else(|| PlanError::UnknownSwitch(action.scada_id.clone()))?;
        if action.verb == ControlVerb::CloseNormallyOpenPoint && !switch.normally_open {
            return Err(PlanError::NotNormallyOpen(action.scada_id.clone()));
        }
        next.set_breaker_state(&action.scada_id, action.verb.resulting_state());
    }
    Ok(next)
}

/// Switches with supply: their hosting node is reachable from a source
/// without crossing an open breaker or a faulted section.
pub fn energized_switches(graph: &GridGraph, faulted_sections: &HashSet<String>) -> BTreeSet<String> {
    let reached = graph.reachable_nodes(|section| {
        !faulted_sections.contains(&graph.sections()[section].section_id)
            && graph.section_closed(section)
    });
    graph
        .switches()
        .iter()
        .filter(|s| {
            let node = graph.node_position(&s.node_id).expect("switch node exists");
            reached[node]
        })
        .map(|s| s.scada_id.clone())
        .collect()
}

/// Sections of switches reporting both FPI and LVI.
pub fn faulted_sections(
    graph: &GridGraph,
    observations: &[SwitchObservation],
) -> Result<HashSet<String>, PlanError> {
    observations
        .iter()
        .filter(|o| o.is_faulted())
        .map(|o| {
            graph
                .switch(&o.scada_id)
                .map(|s| s.section_id.clone())
                .ok_or_else(|| PlanError::UnknownSwitch(o.scada_id.clone()))
        })
        .collect()
}

/// Customers behind switches reporting loss of voltage.
///
/// Without a plan this is the outage as observed. With a plan, the plan is
/// applied, faulted sections are excluded from traversal and only the
/// LVI-reporting switches that remain de-energized are counted.
pub fn affected_customers(
    graph: &GridGraph,
    observations: &[SwitchObservation],
    plan: Option<&ControlPlan>,
) -> Result<u32, PlanError> {
    let mut lvi = Vec::new();
    for obs in observations.iter().filter(|o| o.lvi) {
        let switch = graph
            .switch(&obs.scada_id)
            .ok_or_else(|| PlanError::UnknownSwitch(obs.scada_id.clone()))?;
        lvi.push(switch);
    }
    let Some(plan) = plan else {
        return Ok(lvi.iter().map(|s| s.customers).sum());
    };
    let after = apply_plan(graph, plan)?;
    let energized = energized_switches(&after, &faulted_sections(graph, observations)?);
    Ok(lvi
        .iter()
        .filter(|s| !energized.contains(&s.scada_id))
        .map(|s| s.customers)
        .sum())
}

/// Latest FPI/LVI flags per switch, in first-seen order.
///
/// Updated by a single message pump; planners read a [`snapshot`](Self::snapshot).
#[derive(Debug, Clone, Default)]
pub struct ObservationStore {
    flags: IndexMap<String, SwitchObservation>,
}

impl ObservationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, scada_id: &str, indicator: Indicator, asserted: bool) -> &SwitchObservation {
        let obs = self
            .flags
            .entry(scada_id.to_string())
            .or_insert_with(|| SwitchObservation::new(scada_id, false, false));
        match indicator {
            Indicator::Fpi => obs.fpi = asserted,
            Indicator::Lvi => obs.lvi = asserted,
        }
        obs
    }

    pub fn get(&self, scada_id: &str) -> Option<&SwitchObservation> {
        self.flags.get(scada_id)
    }

    pub fn snapshot(&self) -> Vec<SwitchObservation> {
        self.flags.values().cloned().collect()
    }

    pub fn clear(&mut self) {
        self.flags.clear();
    }
}

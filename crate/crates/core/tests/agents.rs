mod common;

use std::collections::BTreeMap;

use flisr::agent::{loopback_session, AgentState, PoleProperties};
use flisr::fixtures;
use flisr::planner::{centralized_plan, ControlAction};
use flisr::protocol::{make_status, Indicator, PointMessage};
use flisr::scenario::inject;
use flisr::GridGraph;
use proptest::prelude::*;

/// Dispatch `messages` in order to a population of one agent per switch and
/// return each agent's emitted actions.
fn population(graph: &GridGraph, messages: &[PointMessage]) -> BTreeMap<String, Vec<ControlAction>> {
    let mut agents: Vec<_> = graph
        .switches()
        .iter()
        .map(|s| (AgentState::new(PoleProperties::from(s)), Vec::new()))
        .collect();
    for m in messages {
        let (agent, out) = agents
            .iter_mut()
            .find(|(a, _)| a.properties.asdu == m.asdu_ca)
            .unwrap();
        agent.ingest(m).unwrap();
        if let Some((action, _)) = agent.decide() {
            out.push(action);
        }
    }
    agents
        .into_iter()
        .map(|(a, out)| (a.properties.scada_id, out))
        .collect()
}

#[test]
fn pole_properties_line_is_flat() {
    let g = fixtures::kerry();
    let p = PoleProperties::from(g.switch("R184").unwrap());
    let line = serde_json::to_string(&p).unwrap();
    assert_eq!(
        line,
        r#"{"scada_id":"R184","asdu":23084,"kind":"Recloser","normally_open":true,"customers":75}"#
    );
}

#[test]
fn loopback_socket_agents_match_inline_agents() {
    let g = fixtures::waterford();
    let scenario = flisr::FaultScenario::new("waterford", &["S507", "S508"], &["R518", "S509", "S697"]);
    let messages = inject(&g, &scenario).unwrap();
    for s in g.switches() {
        let mine: Vec<_> = messages.iter().filter(|m| m.asdu_ca == s.asdu).cloned().collect();
        let props = PoleProperties::from(s);
        let mut inline = AgentState::new(props.clone());
        let expected: Vec<_> = mine.iter().filter_map(|m| inline.handle(m).unwrap()).collect();
        assert_eq!(loopback_session(&props, &mine).unwrap(), expected, "{}", s.scada_id);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn agents_emit_the_centralized_plan(seed in any::<u64>()) {
        let (g, s) = common::random_site_scenario(seed);
        let messages = inject(&g, &s).unwrap();
        let mut emitted: Vec<_> = population(&g, &messages).into_values().flatten().collect();
        let mut planned = centralized_plan(&g, &s.observations()).unwrap().actions().to_vec();
        emitted.sort_by(|a, b| a.scada_id.cmp(&b.scada_id));
        planned.sort_by(|a, b| a.scada_id.cmp(&b.scada_id));
        prop_assert_eq!(emitted, planned);
    }

    #[test]
    fn one_agent_ignores_the_rest_of_the_population(seed in any::<u64>(), keep in any::<u64>()) {
        let (g, s) = common::random_site_scenario(seed);
        let messages = inject(&g, &s).unwrap();
        let full = population(&g, &messages);
        // Each kept agent alone, fed foreign traffic first, matches its
        // behaviour inside the full population.
        for (i, sw) in g.switches().iter().enumerate() {
            if keep >> (i % 64) & 1 == 0 {
                continue;
            }
            let mut agent = AgentState::new(PoleProperties::from(sw));
            let mut out = Vec::new();
            for m in messages.iter().rev().filter(|m| m.asdu_ca != sw.asdu).take(3) {
                prop_assert!(agent.ingest(m).is_err());
            }
            for m in messages.iter().filter(|m| m.asdu_ca == sw.asdu) {
                agent.ingest(m).unwrap();
                if let Some((a, _)) = agent.decide() {
                    out.push(a);
                }
            }
            prop_assert_eq!(&out, &full[&sw.scada_id]);
        }
    }

    #[test]
    fn redelivery_never_repeats_a_command(seed in any::<u64>(), repeats in 1..5usize) {
        let (g, s) = common::random_site_scenario(seed);
        for sw in g.switches() {
            let mut agent = AgentState::new(PoleProperties::from(sw));
            let mut emitted = 0;
            let fpi = s.faulted.contains(&sw.scada_id);
            let lvi = fpi || s.down.contains(&sw.scada_id);
            let mut stream = Vec::new();
            if fpi {
                stream.push(make_status(sw.kind, sw.asdu, Indicator::Fpi, true));
            }
            if lvi {
                stream.push(make_status(sw.kind, sw.asdu, Indicator::Lvi, true));
            }
            for _ in 0..repeats {
                for m in &stream {
                    if agent.handle(m).unwrap().is_some() {
                        emitted += 1;
                    }
                }
            }
            prop_assert_eq!(emitted, usize::from(lvi));
        }
    }
}

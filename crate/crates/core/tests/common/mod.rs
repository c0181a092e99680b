#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flisr::fixtures;
use flisr::scenario::FaultScenario;
use flisr::topology::{
    AssetNode, BreakerState, GraphParts, GridGraph, LineSection, LoadRecord, NodeKind, SectionPhases, SiteInfo,
    SwitchAsset, SwitchKind,
};

/// Random connected graph with `2..=max_nodes` nodes, one or two sources,
/// a spanning tree plus up to `extra_edges` chords, and switches with
/// arbitrary breaker states on a random subset of sections.
pub fn random_graph(seed: u64, max_nodes: usize, extra_edges: usize) -> GridGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_nodes);
    let id = |i: usize| format!("N{i}");
    let sources: Vec<usize> = if n > 3 && rng.random_bool(0.4) {
        vec![0, rng.random_range(1..n)]
    } else {
        vec![0]
    };
    let nodes = (0..n)
        .map(|i| AssetNode {
            id: id(i),
            kind: if sources.contains(&i) { NodeKind::Substation } else { NodeKind::Pole },
            latitude: 52.0 + i as f64 * 0.001,
            longitude: -7.0 - i as f64 * 0.001,
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    let mut present: HashSet<(usize, usize)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    for _ in 0..rng.random_range(0..=extra_edges) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && present.insert((a.min(b), a.max(b))) {
            pairs.push(if rng.random_bool(0.5) { (a, b) } else { (b, a) });
        }
    }
    // Randomize edge direction so switch placement on from_node varies.
    let sections: Vec<LineSection> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| {
            let (from, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            LineSection {
                section_id: format!("E{k}"),
                from_node: id(from),
                to_node: id(to),
                phases: SectionPhases::MvThreePhase,
            }
        })
        .collect();

    let mut switches = Vec::new();
    let mut loads = Vec::new();
    for section in &sections {
        let count = match rng.random_range(0..10) {
            0..=3 => 0,
            4..=8 => 1,
            _ => 2,
        };
        for _ in 0..count {
            let k = switches.len() + 1;
            let kind = if rng.random_bool(0.5) { SwitchKind::Lbfm } else { SwitchKind::Recloser };
            let normally_open = rng.random_bool(0.25);
            let customers = rng.random_range(0..200);
            let breaker_state = if rng.random_bool(if normally_open { 0.8 } else { 0.2 }) {
                BreakerState::Open
            } else {
                BreakerState::Closed
            };
            switches.push(SwitchAsset {
                scada_id: format!("{}{}", kind.scada_prefix(), 100 + k),
                asdu: 1000 + k as u32,
                kind,
                normally_open,
                breaker_state,
                customers,
                section_id: section.section_id.clone(),
                node_id: String::new(),
                unique_device_id: format!("U{k}"),
            });
            loads.push(LoadRecord::new(section.section_id.clone(), customers, 0, 0));
        }
    }

    GridGraph::from_parts(GraphParts {
        site: SiteInfo::new(format!("rand{seed}"), "random"),
        nodes,
        sections,
        switches,
        loads,
        sources: sources.into_iter().map(id).collect(),
    })
    .expect("generated graph is valid")
}

/// Node ids reached by enumerating every simple path that starts at a
/// source and crosses only passable sections.
pub fn oracle_reachable_nodes(graph: &GridGraph, passable: &dyn Fn(&LineSection) -> bool) -> BTreeSet<String> {
    fn walk(
        graph: &GridGraph,
        passable: &dyn Fn(&LineSection) -> bool,
        path: &mut Vec<String>,
        reached: &mut BTreeSet<String>,
    ) {
        let here = path.last().unwrap().clone();
        reached.insert(here.clone());
        for section in graph.sections() {
            let next = if section.from_node == here {
                &section.to_node
            } else if section.to_node == here {
                &section.from_node
            } else {
                continue;
            };
            if path.contains(next) || !passable(section) {
                continue;
            }
            path.push(next.clone());
            walk(graph, passable, path, reached);
            path.pop();
        }
    }
    let mut reached = BTreeSet::new();
    for source in graph.sources() {
        walk(graph, passable, &mut vec![source.clone()], &mut reached);
    }
    reached
}

/// Energized switches by path enumeration: a section is crossable when it
/// is not faulted and none of its breakers is open.
pub fn oracle_energized(graph: &GridGraph, faulted_sections: &HashSet<String>) -> BTreeSet<String> {
    let passable = |section: &LineSection| {
        !faulted_sections.contains(&section.section_id)
            && graph
                .switches()
                .iter()
                .filter(|s| s.section_id == section.section_id)
                .all(|s| s.breaker_state == BreakerState::Closed)
    };
    let reached = oracle_reachable_nodes(graph, &passable);
    graph
        .switches()
        .iter()
        .filter(|s| {
            let host = &graph
                .sections()
                .iter()
                .find(|sec| sec.section_id == s.section_id)
                .unwrap()
                .from_node;
            reached.contains(host)
        })
        .map(|s| s.scada_id.clone())
        .collect()
}

/// Random fault case on `graph`: a random subset of switches split into
/// faulted and down lists, in random order.
pub fn random_case(graph: &GridGraph, rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let mut ids: Vec<String> = graph.switches().iter().map(|s| s.scada_id.clone()).collect();
    ids.shuffle(rng);
    let take = rng.random_range(0..=ids.len().min(8));
    let mut faulted = Vec::new();
    let mut down = Vec::new();
    for id in ids.into_iter().take(take) {
        if rng.random_bool(0.35) {
            faulted.push(id);
        } else {
            down.push(id);
        }
    }
    (faulted, down)
}

/// Random scenario on one of the built-in sites.
pub fn random_site_scenario(seed: u64) -> (GridGraph, FaultScenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = fixtures::all_sites();
    let graph = sites[rng.random_range(0..sites.len())].clone();
    let (faulted, down) = random_case(&graph, &mut rng);
    let scenario = FaultScenario {
        site: graph.site_id().to_string(),
        faulted,
        down,
        mode: Default::default(),
        network_profile: flisr::ProfileName::FourGLte,
        seed,
    };
    (graph, scenario)
}

/// Remove all whitespace outside string literals.
pub fn strip_json_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    for c in text.chars() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
        } else if c == '"' {
            in_string = true;
            out.push(c);
        } else if !c.is_whitespace() {
            out.push(c);
        }
    }
    out
}

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::customers::estimate_customers;
use super::records::{LoadRecord, NodeKind, SectionPhases, ValidatedRecords};
use super::TopologyError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetNode {
    pub id: String,
    pub kind: NodeKind,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineSection {
    pub section_id: String,
    pub from_node: String,
    pub to_node: String,
    pub phases: SectionPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchKind {
    #[serde(rename = "LBFM")]
    Lbfm,
    Recloser,
}

impl SwitchKind {
    /// First character of every SCADA id of this kind.
    pub fn scada_prefix(self) -> char {
        match self {
            SwitchKind::Lbfm => 'S',
            SwitchKind::Recloser => 'R',
        }
    }
}

impl fmt::Display for SwitchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SwitchKind::Lbfm => "LBFM",
            SwitchKind::Recloser => "Recloser",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreakerState {
    Open,
    Closed,
}

/// An intelligent switching device on a pole.
///
/// The device sits on the `from_node` of the section it controls. An open
/// breaker makes that section impassable for energization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchAsset {
    pub scada_id: String,
    pub asdu: u32,
    pub kind: SwitchKind,
    pub normally_open: bool,
    pub breaker_state: BreakerState,
    pub customers: u32,
    pub section_id: String,
    pub node_id: String,
    pub unique_device_id: String,
}

/// Site identity carried by every graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInfo {
    pub site_id: String,
    pub name: String,
}

impl SiteInfo {
    pub fn new(site_id: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            site_id: site_id.into(),
            name: name.into(),
        }
    }
}

/// Everything needed to assemble a [`GridGraph`]; validated by
/// [`GridGraph::from_parts`].
#[derive(Debug, Clone)]
pub struct GraphParts {
    pub site: SiteInfo,
    pub nodes: Vec<AssetNode>,
    pub sections: Vec<LineSection>,
    pub switches: Vec<SwitchAsset>,
    pub loads: Vec<LoadRecord>,
    pub sources: Vec<String>,
}

/// Connected asset graph of one site.
#[derive(Debug, Clone)]
pub struct GridGraph {
    site: SiteInfo,
    nodes: Vec<AssetNode>,
    sections: Vec<LineSection>,
    switches: Vec<SwitchAsset>,
    loads: Vec<LoadRecord>,
    sources: Vec<String>,

    node_index: HashMap<String, usize>,
    switch_index: HashMap<String, usize>,
    asdu_index: HashMap<u32, usize>,
    section_index: HashMap<String, usize>,
    section_switches: Vec<Vec<usize>>,
    // node -> [(neighbour node, section)]
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl PartialEq for GridGraph {
    fn eq(&self, other: &Self) -> bool {
        self.site == other.site
            && self.nodes == other.nodes
            && self.sections == other.sections
            && self.switches == other.switches
            && self.loads == other.loads
            && self.sources == other.sources
    }
}

impl GridGraph {
    pub fn from_parts(parts: GraphParts) -> Result<Self, TopologyError> {
        let GraphParts {
            site,
            nodes,
            sections,
            mut switches,
            loads,
            sources,
        } = parts;

        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(node.id.clone()));
            }
        }

        let mut section_index = HashMap::with_capacity(sections.len());
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, section) in sections.iter().enumerate() {
            if section_index.insert(section.section_id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(section.section_id.clone()));
            }
            if section.from_node == section.to_node {
                return Err(TopologyError::InvalidRecord(format!(
                    "section {} is a self loop",
                    section.section_id
                )));
            }
            let lookup = |id: &String| {
                node_index
                    .get(id)
                    .copied()
                    .ok_or_else(|| TopologyError::DanglingReference(id.clone()))
            };
            let (a, b) = (lookup(&section.from_node)?, lookup(&section.to_node)?);
            adjacency[a].push((b, i));
            adjacency[b].push((a, i));
        }

        if sources.is_empty() {
            return Err(TopologyError::NoSource);
        }
        for source in &sources {
            if !node_index.contains_key(source) {
                return Err(TopologyError::DanglingReference(source.clone()));
            }
        }

        for load in &loads {
            if !section_index.contains_key(&load.section_id) {
                return Err(TopologyError::DanglingReference(load.section_id.clone()));
            }
        }

        let mut switch_index = HashMap::with_capacity(switches.len());
        let mut asdu_index = HashMap::with_capacity(switches.len());
        let mut section_switches = vec![Vec::new(); sections.len()];
        for (i, switch) in switches.iter_mut().enumerate() {
            if !switch.scada_id.starts_with(switch.kind.scada_prefix()) {
                return Err(TopologyError::InvalidRecord(format!(
                    "{} switch {} must have a scada id starting with '{}'",
                    switch.kind,
                    switch.scada_id,
                    switch.kind.scada_prefix()
                )));
            }
            if switch_index.insert(switch.scada_id.clone(), i).is_some() {
                return Err(TopologyError::DuplicateId(switch.scada_id.clone()));
            }
            if switch.asdu == 0 || asdu_index.insert(switch.asdu, i).is_some() {
                return Err(TopologyError::DuplicateId(format!("ASDU {}", switch.asdu)));
            }
            let section = *section_index
                .get(&switch.section_id)
                .ok_or_else(|| TopologyError::DanglingReference(switch.section_id.clone()))?;
            switch.node_id = sections[section].from_node.clone();
            section_switches[section].push(i);
        }

        let graph = Self {
            site,
            nodes,
            sections,
            switches,
            loads,
            sources,
            node_index,
            switch_index,
            asdu_index,
            section_index,
            section_switches,
            adjacency,
        };

        let reached = graph.reachable_nodes(|_| true);
        if let Some(i) = reached.iter().position(|r| !r) {
            return Err(TopologyError::DisconnectedGraph(graph.nodes[i].id.clone()));
        }
        Ok(graph)
    }

    pub fn site(&self) -> &SiteInfo {
        &self.site
    }

    pub fn site_id(&self) -> &str {
        &self.site.site_id
    }

    pub fn name(&self) -> &str {
        &self.site.name
    }

    pub fn nodes(&self) -> &[AssetNode] {
        &self.nodes
    }

    pub fn sections(&self) -> &[LineSection] {
        &self.sections
    }

    pub fn switches(&self) -> &[SwitchAsset] {
        &self.switches
    }

    pub fn loads(&self) -> &[LoadRecord] {
        &self.loads
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn node(&self, id: &str) -> Option<&AssetNode> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn switch(&self, scada_id: &str) -> Option<&SwitchAsset> {
        self.switch_index.get(scada_id).map(|&i| &self.switches[i])
    }

    pub fn switch_by_asdu(&self, asdu: u32) -> Option<&SwitchAsset> {
        self.asdu_index.get(&asdu).map(|&i| &self.switches[i])
    }

    /// Switches hosted on `node_id`.
    pub fn attached_switches<'a>(&'a self, node_id: &'a str) -> impl Iterator<Item = &'a SwitchAsset> {
        self.switches.iter().filter(move |s| s.node_id == node_id)
    }

    pub fn section_position(&self, section_id: &str) -> Option<usize> {
        self.section_index.get(section_id).copied()
    }

    /// Indices into [`switches`](Self::switches) of the devices on a section.
    pub fn switches_on_section(&self, section: usize) -> &[usize] {
        &self.section_switches[section]
    }

    /// True when no breaker on the section is open.
    pub fn section_closed(&self, section: usize) -> bool {
        self.section_switches[section]
            .iter()
            .all(|&s| self.switches[s].breaker_state == BreakerState::Closed)
    }

    pub fn node_position(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn adjacency(&self) -> &[Vec<(usize, usize)>] {
        &self.adjacency
    }

    /// Breadth-first reachability from every source over sections for which
    /// `passable(section index)` holds.
    pub fn reachable_nodes(&self, passable: impl Fn(usize) -> bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::new();
        for source in &self.sources {
            let i = self.node_index[source];
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(n) = queue.pop_front() {
            for &(next, section) in &self.adjacency[n] {
                if !seen[next] && passable(section) {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    pub(crate) fn set_breaker_state(&mut self, scada_id: &str, state: BreakerState) -> bool {
        match self.switch_index.get(scada_id) {
            Some(&i) => {
                self.switches[i].breaker_state = state;
                true
            }
            None => false,
        }
    }

    pub fn into_parts(self) -> GraphParts {
        GraphParts {
            site: self.site,
            nodes: self.nodes,
            sections: self.sections,
            switches: self.switches,
            loads: self.loads,
            sources: self.sources,
        }
    }
}

/// Build the asset graph of a site from validated GIS records.
///
/// LBFM switches (`SwitchType` "Soules") and Nu-Lec N Series reclosers become
/// switch assets; other device rows are skipped. Each asset carries the
/// estimated customer count of its section and starts open exactly when it is
/// configured as a normally open point.
pub fn build_graph(records: &ValidatedRecords, site: SiteInfo) -> Result<GridGraph, TopologyError> {
    let nodes = records
        .nodes
        .iter()
        .map(|n| AssetNode {
            id: n.node_id.clone(),
            kind: n.kind,
            latitude: n.latitude,
            longitude: n.longitude,
        })
        .collect::<Vec<_>>();
    let sources = records
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Substation)
        .map(|n| n.node_id.clone())
        .collect();
    let sections = records
        .sections
        .iter()
        .map(|s| LineSection {
            section_id: s.section_id.clone(),
            from_node: s.from_node_id.clone(),
            to_node: s.to_node_id.clone(),
            phases: s.section_phases,
        })
        .collect();

    let asset = |kind, scada: &Option<String>, asdu: Option<u32>, section: &str, device: &str, open| {
        SwitchAsset {
            scada_id: scada.clone().expect("validated records carry scada ids"),
            asdu: asdu.expect("validated records carry ASDUs"),
            kind,
            normally_open: open,
            breaker_state: if open {
                BreakerState::Open
            } else {
                BreakerState::Closed
            },
            customers: estimate_customers(&records.loads, section),
            section_id: section.to_string(),
            node_id: String::new(),
            unique_device_id: device.to_string(),
        }
    };
    let switches = records
        .switches
        .iter()
        .filter(|s| s.is_lbfm())
        .map(|s| {
            asset(
                SwitchKind::Lbfm,
                &s.scada_id,
                s.asdu,
                &s.section_id,
                &s.unique_device_id,
                s.switch_is_open,
            )
        })
        .chain(records.reclosers.iter().filter(|r| r.is_of_interest()).map(|r| {
            asset(
                SwitchKind::Recloser,
                &r.scada_id,
                r.asdu,
                &r.section_id,
                &r.unique_device_id,
                r.recloser_is_open,
            )
        }))
        .collect();

    GridGraph::from_parts(GraphParts {
        site,
        nodes,
        sections,
        switches,
        loads: records.loads.clone(),
        sources,
    })
}

/// Ids of nodes not reachable from any source with every switch closed.
pub fn unreachable_nodes(graph: &GridGraph) -> Vec<String> {
    let reached = graph.reachable_nodes(|_| true);
    graph
        .nodes()
        .iter()
        .zip(reached)
        .filter(|(_, r)| !r)
        .map(|(n, _)| n.id.clone())
        .collect()
}

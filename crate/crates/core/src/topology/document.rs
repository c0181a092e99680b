//! Canonical topology document.
//!
//! A versioned JSON file holding one site: sources, nodes, sections, switch
//! assets and loads. Output is pretty-printed in graph order, so exporting the
//! same graph twice yields identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::graph::{AssetNode, BreakerState, GraphParts, GridGraph, LineSection, SiteInfo, SwitchKind};
use super::records::LoadRecord;
use super::TopologyError;

pub const TOPOLOGY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyDocument {
    pub version: u32,
    pub site_id: String,
    pub name: String,
    pub sources: Vec<String>,
    pub nodes: Vec<AssetNode>,
    pub sections: Vec<LineSection>,
    pub switches: Vec<SwitchEntry>,
    #[serde(default)]
    pub loads: Vec<LoadRecord>,
}

/// A switch asset as stored in the document. The hosting node is implied by
/// the section, and `breaker_state` defaults from `normally_open`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchEntry {
    pub scada_id: String,
    pub asdu: u32,
    pub kind: SwitchKind,
    pub section_id: String,
    #[serde(default)]
    pub unique_device_id: String,
    pub normally_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaker_state: Option<BreakerState>,
    pub customers: u32,
}

impl TopologyDocument {
    pub fn from_graph(graph: &GridGraph) -> Self {
        Self {
            version: TOPOLOGY_FORMAT_VERSION,
            site_id: graph.site_id().to_string(),
            name: graph.name().to_string(),
            sources: graph.sources().to_vec(),
            nodes: graph.nodes().to_vec(),
            sections: graph.sections().to_vec(),
            switches: graph
                .switches()
                .iter()
                .map(|s| SwitchEntry {
                    scada_id: s.scada_id.clone(),
                    asdu: s.asdu,
                    kind: s.kind,
                    section_id: s.section_id.clone(),
                    unique_device_id: s.unique_device_id.clone(),
                    normally_open: s.normally_open,
                    breaker_state: Some(s.breaker_state),
                    customers: s.customers,
                })
                .collect(),
            loads: graph.loads().to_vec(),
        }
    }

    pub fn into_graph(self) -> Result<GridGraph, TopologyError> {
        if self.version != TOPOLOGY_FORMAT_VERSION {
            return Err(TopologyError::UnsupportedVersion(self.version));
        }
        let switches = self
            .switches
            .into_iter()
            .map(|s| super::SwitchAsset {
                unique_device_id: if s.unique_device_id.is_empty() {
                    s.scada_id.clone()
                } else {
                    s.unique_device_id
                },
                scada_id: s.scada_id,
                asdu: s.asdu,
                kind: s.kind,
                normally_open: s.normally_open,
                breaker_state: s.breaker_state.unwrap_or(if s.normally_open {
                    BreakerState::Open
                } else {
                    BreakerState::Closed
                }),
                customers: s.customers,
                section_id: s.section_id,
                node_id: String::new(),
            })
            .collect();
        GridGraph::from_parts(GraphParts {
            site: SiteInfo::new(self.site_id, self.name),
            nodes: self.nodes,
            sections: self.sections,
            switches,
            loads: self.loads,
            sources: self.sources,
        })
    }
}

/// Serialize `graph` to the canonical topology document.
pub fn export_topology(graph: &GridGraph) -> String {
    let mut text = serde_json::to_string_pretty(&TopologyDocument::from_graph(graph))
        .expect("topology document is always serializable");
    text.push('\n');
    text
}

/// Parse and validate a topology document.
pub fn import_topology(text: &str) -> Result<GridGraph, TopologyError> {
    let doc: TopologyDocument = serde_json::from_str(text)?;
    doc.into_graph()
}

pub fn load_topology_file(path: impl AsRef<Path>) -> Result<GridGraph, TopologyError> {
    import_topology(&std::fs::read_to_string(path)?)
}

pub fn save_topology_file(graph: &GridGraph, path: impl AsRef<Path>) -> Result<(), TopologyError> {
    std::fs::write(path, export_topology(graph))?;
    Ok(())
}

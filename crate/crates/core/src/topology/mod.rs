//! Grid topology: GIS table ingestion, the switch asset graph and the
//! canonical topology document.

mod customers;
mod document;
mod graph;
mod records;

use thiserror::Error;

pub use customers::estimate_customers;
pub use document::{
    export_topology, import_topology, load_topology_file, save_topology_file, SwitchEntry,
    TopologyDocument, TOPOLOGY_FORMAT_VERSION,
};
pub use graph::{
    build_graph, unreachable_nodes, AssetNode, BreakerState, GraphParts, GridGraph, LineSection,
    SiteInfo, SwitchAsset, SwitchKind,
};
pub use records::{
    ingest_tables, LoadRecord, NodeKind, NodeRecord, Phase, RecloserRecord, SectionPhases,
    SectionRecord, SwitchRecord, TableBundle, ValidatedRecords, LBFM_SWITCH_TYPE, LOADS_FILE,
    NODES_FILE, RECLOSERS_FILE, RECLOSER_MANUFACTURER, RECLOSER_MODEL, SECTIONS_FILE,
    SWITCHES_FILE,
};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("table {table} is missing column {column}")]
    MissingColumn { table: String, column: String },
    #[error("reference to unknown id {0}")]
    DanglingReference(String),
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("node {0} is unreachable from every source")]
    DisconnectedGraph(String),
    #[error("graph has no source substation")]
    NoSource,
    #[error("unsupported topology document version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ingest a directory of GIS CSV tables and build the site graph.
pub fn ingest_csv_dir(
    dir: impl AsRef<std::path::Path>,
    site: SiteInfo,
) -> Result<GridGraph, TopologyError> {
    let records = ingest_tables(TableBundle::from_csv_dir(dir)?)?;
    build_graph(&records, site)
}

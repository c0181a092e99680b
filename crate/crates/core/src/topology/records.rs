//! Typed rows of the five GIS tables and their validation.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TopologyError;

/// Switch type token that marks an LBFM circuit breaker in `InstSwitches`.
pub const LBFM_SWITCH_TYPE: &str = "Soules";
/// Recloser manufacturer of interest in `InstReclosers`.
pub const RECLOSER_MANUFACTURER: &str = "Nu-Lec";
/// Recloser model of interest in `InstReclosers`.
pub const RECLOSER_MODEL: &str = "N Series";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SectionPhases {
    #[serde(rename = "MV_three_phase")]
    MvThreePhase,
    #[serde(rename = "LV_single_phase")]
    LvSinglePhase,
}

impl SectionPhases {
    pub fn parse(token: &str) -> Option<Self> {
        match token.trim() {
            "MV_three_phase" | "MV" => Some(Self::MvThreePhase),
            "LV_single_phase" | "LV" => Some(Self::LvSinglePhase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionRecord {
    pub section_id: String,
    pub from_node_id: String,
    pub to_node_id: String,
    pub section_phases: SectionPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Pole,
    Substation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub kind: NodeKind,
}

/// A row of `InstSwitches`.
///
/// `scada_id` and `asdu` are the SCADA supplement to the GIS row. When absent
/// they are derived at ingestion (see [`ingest_tables`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub section_id: String,
    pub unique_device_id: String,
    pub switch_type: String,
    pub switch_is_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scada_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asdu: Option<u32>,
}

impl SwitchRecord {
    pub fn is_lbfm(&self) -> bool {
        self.switch_type.trim().eq_ignore_ascii_case(LBFM_SWITCH_TYPE)
    }
}

/// A row of `InstReclosers`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecloserRecord {
    pub section_id: String,
    pub unique_device_id: String,
    pub manufacturer: String,
    pub model: String,
    pub recloser_is_open: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scada_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asdu: Option<u32>,
}

impl RecloserRecord {
    pub fn is_of_interest(&self) -> bool {
        self.manufacturer.trim().eq_ignore_ascii_case(RECLOSER_MANUFACTURER)
            && self.model.trim().eq_ignore_ascii_case(RECLOSER_MODEL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    R,
    S,
    T,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::R, Phase::S, Phase::T];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub section_id: String,
    pub customers_per_phase: BTreeMap<Phase, u32>,
}

impl LoadRecord {
    pub fn new(section_id: impl Into<String>, r: u32, s: u32, t: u32) -> Self {
        Self {
            section_id: section_id.into(),
            customers_per_phase: BTreeMap::from([(Phase::R, r), (Phase::S, s), (Phase::T, t)]),
        }
    }
}

/// The five GIS tables as loaded, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableBundle {
    pub sections: Vec<SectionRecord>,
    pub nodes: Vec<NodeRecord>,
    pub switches: Vec<SwitchRecord>,
    pub reclosers: Vec<RecloserRecord>,
    pub loads: Vec<LoadRecord>,
}

/// Record sets that passed [`ingest_tables`].
///
/// Every switch and recloser carries a resolved `scada_id` and `asdu`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedRecords {
    pub sections: Vec<SectionRecord>,
    pub nodes: Vec<NodeRecord>,
    pub switches: Vec<SwitchRecord>,
    pub reclosers: Vec<RecloserRecord>,
    pub loads: Vec<LoadRecord>,
}

impl ValidatedRecords {
    pub fn record_count(&self) -> usize {
        self.sections.len()
            + self.nodes.len()
            + self.switches.len()
            + self.reclosers.len()
            + self.loads.len()
    }
}

fn check_unique<'a>(
    ids: impl IntoIterator<Item = &'a str>,
    seen: &mut HashSet<String>,
) -> Result<(), TopologyError> {
    for id in ids {
        if !seen.insert(id.to_string()) {
            return Err(TopologyError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

fn derive_scada_id(prefix: char, unique_device_id: &str) -> String {
    if unique_device_id.starts_with(prefix) {
        unique_device_id.to_string()
    } else {
        format!("{prefix}{unique_device_id}")
    }
}

/// Validate a table bundle and resolve the SCADA supplement of each device.
///
/// Devices without an explicit `scada_id` get the kind prefix (`S` for LBFM,
/// `R` for reclosers) in front of their `unique_device_id`. Devices without an
/// explicit ASDU get sequential addresses after the largest explicit one, in
/// table order (switches first).
pub fn ingest_tables(bundle: TableBundle) -> Result<ValidatedRecords, TopologyError> {
    let TableBundle {
        sections,
        nodes,
        mut switches,
        mut reclosers,
        loads,
    } = bundle;

    let mut node_ids = HashSet::new();
    check_unique(nodes.iter().map(|n| n.node_id.as_str()), &mut node_ids)?;
    for node in &nodes {
        if !(-90.0..=90.0).contains(&node.latitude) || !(-180.0..=180.0).contains(&node.longitude)
        {
            return Err(TopologyError::InvalidRecord(format!(
                "node {} has coordinates out of range ({}, {})",
                node.node_id, node.latitude, node.longitude
            )));
        }
    }

    let mut section_ids = HashSet::new();
    check_unique(sections.iter().map(|s| s.section_id.as_str()), &mut section_ids)?;
    for section in &sections {
        if section.from_node_id == section.to_node_id {
            return Err(TopologyError::InvalidRecord(format!(
                "section {} starts and ends at node {}",
                section.section_id, section.from_node_id
            )));
        }
        for end in [&section.from_node_id, &section.to_node_id] {
            if !node_ids.contains(end) {
                return Err(TopologyError::DanglingReference(end.clone()));
            }
        }
    }

    let mut device_ids = HashSet::new();
    check_unique(
        switches
            .iter()
            .map(|s| s.unique_device_id.as_str())
            .chain(reclosers.iter().map(|r| r.unique_device_id.as_str())),
        &mut device_ids,
    )?;

    let cited_sections = switches
        .iter()
        .map(|s| &s.section_id)
        .chain(reclosers.iter().map(|r| &r.section_id))
        .chain(loads.iter().map(|l| &l.section_id));
    for section_id in cited_sections {
        if !section_ids.contains(section_id) {
            return Err(TopologyError::DanglingReference(section_id.clone()));
        }
    }

    let mut next_asdu = switches
        .iter()
        .filter_map(|s| s.asdu)
        .chain(reclosers.iter().filter_map(|r| r.asdu))
        .max()
        .unwrap_or(0)
        + 1;
    let mut assign = |asdu: &mut Option<u32>| {
        if asdu.is_none() {
            *asdu = Some(next_asdu);
            next_asdu += 1;
        }
    };
    for switch in &mut switches {
        let scada = switch
            .scada_id
            .take()
            .unwrap_or_else(|| derive_scada_id('S', &switch.unique_device_id));
        if !scada.starts_with('S') {
            return Err(TopologyError::InvalidRecord(format!(
                "LBFM scada id {scada} must start with 'S'"
            )));
        }
        switch.scada_id = Some(scada);
        assign(&mut switch.asdu);
    }
    for recloser in &mut reclosers {
        let scada = recloser
            .scada_id
            .take()
            .unwrap_or_else(|| derive_scada_id('R', &recloser.unique_device_id));
        if !scada.starts_with('R') {
            return Err(TopologyError::InvalidRecord(format!(
                "recloser scada id {scada} must start with 'R'"
            )));
        }
        recloser.scada_id = Some(scada);
        assign(&mut recloser.asdu);
    }

    let mut scada_ids = HashSet::new();
    check_unique(
        switches
            .iter()
            .filter_map(|s| s.scada_id.as_deref())
            .chain(reclosers.iter().filter_map(|r| r.scada_id.as_deref())),
        &mut scada_ids,
    )?;
    let mut asdus = HashSet::new();
    for asdu in switches
        .iter()
        .filter_map(|s| s.asdu)
        .chain(reclosers.iter().filter_map(|r| r.asdu))
    {
        if asdu == 0 || !asdus.insert(asdu) {
            return Err(TopologyError::DuplicateId(format!("ASDU {asdu}")));
        }
    }

    Ok(ValidatedRecords {
        sections,
        nodes,
        switches,
        reclosers,
        loads,
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// File names looked up by [`TableBundle::from_csv_dir`].
pub const SECTIONS_FILE: &str = "InstSections.csv";
pub const NODES_FILE: &str = "Nodes.csv";
pub const SWITCHES_FILE: &str = "InstSwitches.csv";
pub const RECLOSERS_FILE: &str = "InstReclosers.csv";
pub const LOADS_FILE: &str = "Loads.csv";

struct Table {
    name: &'static str,
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(name: &'static str, reader: impl Read) -> Result<Self, TopologyError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr.records().collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            name,
            headers,
            rows,
        })
    }

    fn column(&self, column: &str) -> Result<usize, TopologyError> {
        self.optional_column(column)
            .ok_or_else(|| TopologyError::MissingColumn {
                table: self.name.to_string(),
                column: column.to_string(),
            })
    }

    fn optional_column(&self, column: &str) -> Option<usize> {
        self.headers.iter().position(|h| h.eq_ignore_ascii_case(column))
    }

    fn invalid(&self, row: usize, what: impl std::fmt::Display) -> TopologyError {
        TopologyError::InvalidRecord(format!("{} row {}: {what}", self.name, row + 1))
    }
}

fn parse_bool(token: &str) -> Option<bool> {
    match token.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" | "t" => Some(true),
        "false" | "0" | "no" | "n" | "f" => Some(false),
        _ => None,
    }
}

fn parse_optional<T: std::str::FromStr>(row: &csv::StringRecord, col: Option<usize>) -> Option<Option<T>> {
    match col.and_then(|c| row.get(c)).map(str::trim) {
        None | Some("") => Some(None),
        Some(v) => v.parse().ok().map(Some),
    }
}

impl TableBundle {
    /// Load the five tables from `dir` using the standard GIS file names.
    pub fn from_csv_dir(dir: impl AsRef<Path>) -> Result<Self, TopologyError> {
        let dir = dir.as_ref();
        let open = |name: &str| File::open(dir.join(name));
        Self::from_csv_readers(
            open(SECTIONS_FILE)?,
            open(NODES_FILE)?,
            open(SWITCHES_FILE)?,
            open(RECLOSERS_FILE)?,
            open(LOADS_FILE)?,
        )
    }

    pub fn from_csv_readers(
        sections: impl Read,
        nodes: impl Read,
        switches: impl Read,
        reclosers: impl Read,
        loads: impl Read,
    ) -> Result<Self, TopologyError> {
        Ok(Self {
            sections: read_sections(Table::read("InstSections", sections)?)?,
            nodes: read_nodes(Table::read("Nodes", nodes)?)?,
            switches: read_switches(Table::read("InstSwitches", switches)?)?,
            reclosers: read_reclosers(Table::read("InstReclosers", reclosers)?)?,
            loads: read_loads(Table::read("Loads", loads)?)?,
        })
    }
}

fn read_sections(t: Table) -> Result<Vec<SectionRecord>, TopologyError> {
    let (id, from, to, phases) = (
        t.column("SectionId")?,
        t.column("FromNodeId")?,
        t.column("ToNodeId")?,
        t.column("SectionPhases")?,
    );
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let section_phases = SectionPhases::parse(&row[phases])
                .ok_or_else(|| t.invalid(i, format!("unknown SectionPhases {:?}", &row[phases])))?;
            Ok(SectionRecord {
                section_id: row[id].to_string(),
                from_node_id: row[from].to_string(),
                to_node_id: row[to].to_string(),
                section_phases,
            })
        })
        .collect()
}

fn read_nodes(t: Table) -> Result<Vec<NodeRecord>, TopologyError> {
    let (id, lat, lon) = (t.column("NodeId")?, t.column("Latitude")?, t.column("Longitude")?);
    let kind = t.optional_column("NodeType");
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let coord = |c: usize| {
                row[c]
                    .parse::<f64>()
                    .map_err(|_| t.invalid(i, format!("bad coordinate {:?}", &row[c])))
            };
            let kind = match kind.map(|c| row[c].to_ascii_lowercase()) {
                None => NodeKind::Pole,
                Some(k) if k.is_empty() || k == "pole" => NodeKind::Pole,
                Some(k) if k == "substation" => NodeKind::Substation,
                Some(k) => return Err(t.invalid(i, format!("unknown NodeType {k:?}"))),
            };
            Ok(NodeRecord {
                node_id: row[id].to_string(),
                latitude: coord(lat)?,
                longitude: coord(lon)?,
                kind,
            })
        })
        .collect()
}

fn read_switches(t: Table) -> Result<Vec<SwitchRecord>, TopologyError> {
    let (section, device, kind, open) = (
        t.column("SectionId")?,
        t.column("UniqueDeviceId")?,
        t.column("SwitchType")?,
        t.column("SwitchIsOpen")?,
    );
    let (scada, asdu) = (t.optional_column("ScadaId"), t.optional_column("Asdu"));
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(SwitchRecord {
                section_id: row[section].to_string(),
                unique_device_id: row[device].to_string(),
                switch_type: row[kind].to_string(),
                switch_is_open: parse_bool(&row[open])
                    .ok_or_else(|| t.invalid(i, "SwitchIsOpen is not a boolean"))?,
                scada_id: parse_optional(row, scada).flatten(),
                asdu: parse_optional(row, asdu).ok_or_else(|| t.invalid(i, "bad Asdu"))?,
            })
        })
        .collect()
}

fn read_reclosers(t: Table) -> Result<Vec<RecloserRecord>, TopologyError> {
    let (section, device, manufacturer, model, open) = (
        t.column("SectionId")?,
        t.column("UniqueDeviceId")?,
        t.column("Manufacturer")?,
        t.column("Model")?,
        t.column("RecloserIsOpen")?,
    );
    let (scada, asdu) = (t.optional_column("ScadaId"), t.optional_column("Asdu"));
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            Ok(RecloserRecord {
                section_id: row[section].to_string(),
                unique_device_id: row[device].to_string(),
                manufacturer: row[manufacturer].to_string(),
                model: row[model].to_string(),
                recloser_is_open: parse_bool(&row[open])
                    .ok_or_else(|| t.invalid(i, "RecloserIsOpen is not a boolean"))?,
                scada_id: parse_optional(row, scada).flatten(),
                asdu: parse_optional(row, asdu).ok_or_else(|| t.invalid(i, "bad Asdu"))?,
            })
        })
        .collect()
}

fn read_loads(t: Table) -> Result<Vec<LoadRecord>, TopologyError> {
    let section = t.column("SectionId")?;
    let phases = [
        t.column("Phase1Customers")?,
        t.column("Phase2Customers")?,
        t.column("Phase3Customers")?,
    ];
    t.rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut customers_per_phase = BTreeMap::new();
            for (phase, col) in Phase::ALL.into_iter().zip(phases) {
                let raw = row[col].trim();
                let count = if raw.is_empty() {
                    0
                } else {
                    raw.parse::<u32>()
                        .map_err(|_| t.invalid(i, format!("bad customer count {raw:?}")))?
                };
                customers_per_phase.insert(phase, count);
            }
            Ok(LoadRecord {
                section_id: row[section].to_string(),
                customers_per_phase,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> TableBundle {
        TableBundle {
            sections: vec![SectionRecord {
                section_id: "X1".into(),
                from_node_id: "N1".into(),
                to_node_id: "N2".into(),
                section_phases: SectionPhases::MvThreePhase,
            }],
            nodes: vec![
                NodeRecord {
                    node_id: "N1".into(),
                    latitude: 52.2,
                    longitude: -7.1,
                    kind: NodeKind::Substation,
                },
                NodeRecord {
                    node_id: "N2".into(),
                    latitude: 52.3,
                    longitude: -7.2,
                    kind: NodeKind::Pole,
                },
            ],
            switches: vec![SwitchRecord {
                section_id: "X1".into(),
                unique_device_id: "101".into(),
                switch_type: "Soules".into(),
                switch_is_open: false,
                scada_id: None,
                asdu: None,
            }],
            reclosers: vec![],
            loads: vec![LoadRecord::new("X1", 1, 2, 3)],
        }
    }

    #[test]
    fn minimal_bundle_validates_five_records() {
        let records = ingest_tables(minimal()).unwrap();
        assert_eq!(records.record_count(), 5);
        assert_eq!(records.switches[0].scada_id.as_deref(), Some("S101"));
        assert_eq!(records.switches[0].asdu, Some(1));
    }

    #[test]
    fn unknown_section_is_dangling() {
        let mut bundle = minimal();
        bundle.switches[0].section_id = "X9".into();
        match ingest_tables(bundle) {
            Err(TopologyError::DanglingReference(id)) => assert_eq!(id, "X9"),
            other => panic!("expected DanglingReference, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_section_rejected() {
        let mut bundle = minimal();
        let dup = bundle.sections[0].clone();
        bundle.sections.push(dup);
        assert!(matches!(ingest_tables(bundle), Err(TopologyError::DuplicateId(id)) if id == "X1"));
    }

    #[test]
    fn device_id_unique_across_both_tables() {
        let mut bundle = minimal();
        bundle.reclosers.push(RecloserRecord {
            section_id: "X1".into(),
            unique_device_id: "101".into(),
            manufacturer: "Nu-Lec".into(),
            model: "N Series".into(),
            recloser_is_open: false,
            scada_id: None,
            asdu: None,
        });
        assert!(matches!(ingest_tables(bundle), Err(TopologyError::DuplicateId(_))));
    }

    #[test]
    fn self_loop_and_bad_coordinates_rejected() {
        let mut bundle = minimal();
        bundle.sections[0].to_node_id = "N1".into();
        assert!(matches!(ingest_tables(bundle), Err(TopologyError::InvalidRecord(_))));

        let mut bundle = minimal();
        bundle.nodes[0].latitude = 91.0;
        assert!(matches!(ingest_tables(bundle), Err(TopologyError::InvalidRecord(_))));
    }

    #[test]
    fn explicit_asdu_respected_and_others_follow() {
        let mut bundle = minimal();
        bundle.switches[0].asdu = Some(51908);
        bundle.reclosers.push(RecloserRecord {
            section_id: "X1".into(),
            unique_device_id: "R77".into(),
            manufacturer: "Nu-Lec".into(),
            model: "N Series".into(),
            recloser_is_open: true,
            scada_id: None,
            asdu: None,
        });
        let records = ingest_tables(bundle).unwrap();
        assert_eq!(records.reclosers[0].asdu, Some(51909));
        assert_eq!(records.reclosers[0].scada_id.as_deref(), Some("R77"));
    }

    #[test]
    fn wrong_prefix_rejected() {
        let mut bundle = minimal();
        bundle.switches[0].scada_id = Some("R1".into());
        assert!(matches!(ingest_tables(bundle), Err(TopologyError::InvalidRecord(_))));
    }

    #[test]
    fn csv_missing_column_reported() {
        let sections = "SectionId,FromNodeId,SectionPhases\nX1,N1,MV\n";
        let err = TableBundle::from_csv_readers(
            sections.as_bytes(),
            "NodeId,Latitude,Longitude\n".as_bytes(),
            "SectionId,UniqueDeviceId,SwitchType,SwitchIsOpen\n".as_bytes(),
            "SectionId,UniqueDeviceId,Manufacturer,Model,RecloserIsOpen\n".as_bytes(),
            "SectionId,Phase1Customers,Phase2Customers,Phase3Customers\n".as_bytes(),
        )
        .unwrap_err();
        match err {
            TopologyError::MissingColumn { table, column } => {
                assert_eq!(table, "InstSections");
                assert_eq!(column, "ToNodeId");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_of_minimal_dataset() {
        let bundle = TableBundle::from_csv_readers(
            "SectionId,FromNodeId,ToNodeId,SectionPhases\nX1,N1,N2,MV_three_phase\n".as_bytes(),
            "NodeId,Latitude,Longitude,NodeType\nN1,52.2,-7.1,substation\nN2,52.3,-7.2,pole\n"
                .as_bytes(),
            "SectionId,UniqueDeviceId,SwitchType,SwitchIsOpen\nX1,101,Soules,false\n".as_bytes(),
            "SectionId,UniqueDeviceId,Manufacturer,Model,RecloserIsOpen\n".as_bytes(),
            "SectionId,Phase1Customers,Phase2Customers,Phase3Customers\nX1,1,2,3\n".as_bytes(),
        )
        .unwrap();
        assert_eq!(bundle, minimal());
    }
}

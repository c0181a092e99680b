//! Built-in trial site topologies.
//!
//! The three sites follow the trial site layouts: Waterford is a
//! meshed network fed by three substations with fifteen LBFM switches and
//! three reclosers, Kerry a coastal line fed from both ends through eight
//! reclosers, Mullingar two substations and seven reclosers, two of them
//! normally open boundary points. Geometry and customer counts are
//! synthetic; customer counts are calibrated so the sample result rows in
//! [`sample_rows`] are reproduced exactly.

use crate::topology::{
    estimate_customers, AssetNode, BreakerState, GraphParts, GridGraph, LineSection, LoadRecord,
    NodeKind, SectionPhases, SiteInfo, SwitchAsset, SwitchKind,
};

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

struct Builder {
    site: SiteInfo,
    origin: (f64, f64),
    nodes: Vec<AssetNode>,
    sections: Vec<LineSection>,
    switches: Vec<SwitchAsset>,
    loads: Vec<LoadRecord>,
    sources: Vec<String>,
}

impl Builder {
    fn new(site_id: &str, name: &str, origin: (f64, f64)) -> Self {
        Self {
            site: SiteInfo::new(site_id, name),
            origin,
            nodes: Vec::new(),
            sections: Vec::new(),
            switches: Vec::new(),
            loads: Vec::new(),
            sources: Vec::new(),
        }
    }

    /// Node at grid offset (`x`, `y`) from the site origin, ~1 km per step.
    fn node(&mut self, id: &str, x: f64, y: f64) -> &mut Self {
        self.nodes.push(AssetNode {
            id: id.to_string(),
            kind: NodeKind::Pole,
            latitude: round6(self.origin.0 + y * 0.009),
            longitude: round6(self.origin.1 + x * 0.014),
        });
        self
    }

    fn substation(&mut self, id: &str, x: f64, y: f64) -> &mut Self {
        self.node(id, x, y);
        self.nodes.last_mut().unwrap().kind = NodeKind::Substation;
        self.sources.push(id.to_string());
        self
    }

    fn line(&mut self, from: &str, to: &str, phases: SectionPhases) -> &mut Self {
        self.sections.push(LineSection {
            section_id: format!("{from}-{to}"),
            from_node: from.to_string(),
            to_node: to.to_string(),
            phases,
        });
        self
    }

    fn device(
        &mut self,
        scada_id: &str,
        asdu: u32,
        from: &str,
        to: &str,
        normally_open: bool,
        customers: u32,
    ) -> &mut Self {
        let section_id = format!("{from}-{to}");
        self.line(from, to, SectionPhases::MvThreePhase);
        // Spread the count over the three phases: R takes the remainder.
        let third = customers / 3;
        self.loads.push(LoadRecord::new(
            section_id.clone(),
            customers - 2 * third,
            third,
            third,
        ));
        let kind = if scada_id.starts_with('R') {
            SwitchKind::Recloser
        } else {
            SwitchKind::Lbfm
        };
        self.switches.push(SwitchAsset {
            scada_id: scada_id.to_string(),
            asdu,
            kind,
            normally_open,
            breaker_state: if normally_open {
                BreakerState::Open
            } else {
                BreakerState::Closed
            },
            customers: estimate_customers(&self.loads, &section_id),
            section_id,
            node_id: String::new(),
            unique_device_id: format!("{}{}", self.site.site_id.to_uppercase(), asdu),
        });
        self
    }

    fn build(&mut self) -> GridGraph {
        GridGraph::from_parts(GraphParts {
            site: self.site.clone(),
            nodes: std::mem::take(&mut self.nodes),
            sections: std::mem::take(&mut self.sections),
            switches: std::mem::take(&mut self.switches),
            loads: std::mem::take(&mut self.loads),
            sources: std::mem::take(&mut self.sources),
        })
        .expect("built-in fixture is valid")
    }
}

use SectionPhases::{LvSinglePhase as LV, MvThreePhase as MV};

/// Waterford: three substations, 15 LBFM switches, 3 reclosers, meshed with
/// four normally open ties.
pub fn waterford() -> GridGraph {
    let mut b = Builder::new("waterford", "Waterford", (52.16, -7.25));
    b.substation("WSUB-A", 0.0, 0.0)
        .substation("WSUB-B", 0.0, 4.0)
        .substation("WSUB-C", 0.0, 8.0);
    for (id, x, y) in [
        ("WA1", 1.0, 0.0),
        ("WA2", 2.0, 0.0),
        ("WA3", 3.0, 0.0),
        ("WA4", 4.0, 0.0),
        ("WA5", 5.0, 1.0),
        ("WA6", 5.0, -1.0),
        ("WB1", 1.0, 4.0),
        ("WB2", 2.0, 4.0),
        ("WB3", 3.0, 4.0),
        ("WB4", 5.0, 3.0),
        ("WB5", 6.0, 4.0),
        ("WB6", 5.0, 5.0),
        ("WC1", 1.0, 8.0),
        ("WC2", 2.0, 8.0),
        ("WC3", 4.0, 7.5),
        ("WC4", 5.0, 8.0),
        ("WC5", 6.0, 7.0),
        ("WC6", 7.0, 6.0),
        ("WC7", 8.0, 6.5),
    ] {
        b.node(id, x, y);
    }
    // Feeder A
    b.line("WSUB-A", "WA1", MV)
        .device("R517", 23017, "WA1", "WA2", false, 157)
        .device("S513", 51908, "WA2", "WA3", false, 150)
        .device("S512", 51907, "WA3", "WA4", false, 128)
        .device("S716", 51916, "WA4", "WA5", false, 120)
        .device("S514", 51909, "WA5", "WB4", true, 110)
        .line("WA4", "WA6", MV)
        .device("S700", 51900, "WA6", "WC3", true, 119);
    // Feeder B
    b.line("WSUB-B", "WB1", MV)
        .device("S507", 51902, "WB1", "WB2", false, 402)
        .device("S508", 51903, "WB2", "WB3", false, 171)
        .device("R518", 23018, "WB3", "WB4", false, 315)
        .device("S509", 51904, "WB4", "WB5", false, 288)
        .device("S697", 51897, "WB5", "WC5", true, 194)
        .device("S510", 51905, "WB4", "WB6", false, 45)
        .device("S511", 51906, "WB6", "WC6", true, 38);
    // Feeder C
    b.line("WSUB-C", "WC1", MV)
        .device("R519", 23019, "WC1", "WC2", false, 210)
        .device("S701", 51901, "WC2", "WC3", false, 95)
        .device("S715", 51915, "WC3", "WC4", false, 80)
        .device("S698", 51898, "WC4", "WC5", false, 66)
        .device("S699", 51899, "WC5", "WC6", false, 73)
        .line("WC6", "WC7", LV);
    b.build()
}

/// Kerry: a single line fed from both ends through eight reclosers, split
/// by one normally open point.
pub fn kerry() -> GridGraph {
    let mut b = Builder::new("kerry", "Kerry", (52.06, -10.05));
    b.substation("KSUB-W", 0.0, 0.0).substation("KSUB-E", 10.0, 0.5);
    for i in 1..=9 {
        b.node(&format!("K{i}"), i as f64, (i % 3) as f64 * 0.3);
    }
    b.line("KSUB-W", "K1", MV)
        .device("R181", 23081, "K1", "K2", false, 60)
        .device("R182", 23082, "K2", "K3", false, 70)
        .device("R183", 23083, "K3", "K4", false, 55)
        .device("R184", 23084, "K4", "K5", true, 75)
        .device("R185", 23085, "K5", "K6", false, 85)
        .device("R186", 23089, "K6", "K7", false, 90)
        .device("R187", 23087, "K7", "K8", false, 80)
        .device("R188", 23088, "K8", "K9", false, 65)
        .line("K9", "KSUB-E", MV);
    b.build()
}

/// Mullingar: two substations, seven reclosers, two normally open ties.
pub fn mullingar() -> GridGraph {
    let mut b = Builder::new("mullingar", "Mullingar", (53.52, -7.34));
    b.substation("MSUB-N", 0.0, 3.0).substation("MSUB-S", 0.0, -3.0);
    for (id, x, y) in [
        ("M1", 1.0, 3.0),
        ("M2", 2.0, 3.0),
        ("M3", 3.0, 3.0),
        ("M4", 4.0, 2.0),
        ("M5", 1.0, -3.0),
        ("M6", 2.0, -3.0),
        ("M7", 3.0, -2.0),
        ("M8", 3.0, 0.0),
    ] {
        b.node(id, x, y);
    }
    b.line("MSUB-N", "M1", MV)
        .device("R341", 23341, "M1", "M2", false, 132)
        .device("R342", 23342, "M2", "M3", false, 118)
        .device("R343", 23343, "M3", "M4", false, 97)
        .device("R344", 23344, "M4", "M7", true, 54)
        .line("MSUB-S", "M5", MV)
        .device("R345", 23345, "M5", "M6", false, 141)
        .device("R346", 23346, "M6", "M7", false, 103)
        .line("M7", "M8", MV)
        .device("R347", 23347, "M8", "M2", true, 61);
    b.build()
}

/// All built-in sites in display order.
pub fn all_sites() -> Vec<GridGraph> {
    vec![waterford(), kerry(), mullingar()]
}

pub fn site(site_id: &str) -> Option<GridGraph> {
    match site_id {
        "waterford" => Some(waterford()),
        "kerry" => Some(kerry()),
        "mullingar" => Some(mullingar()),
        _ => None,
    }
}

/// One reference result row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRow {
    pub site_id: &'static str,
    pub faulted: &'static [&'static str],
    pub down: &'static [&'static str],
    pub operations: &'static str,
    pub affected_pre: u32,
    pub affected_post: u32,
    pub cml_pre: u64,
    pub cml_post: u64,
}

/// The four sample result rows with their device, operation, customer and
/// CML cells.
pub fn sample_rows() -> [SampleRow; 4] {
    [
        SampleRow {
            site_id: "waterford",
            faulted: &["S513"],
            down: &["S512", "S716", "S514", "S700"],
            operations: "S513 opened, S512 closed, S716 closed, S514 N/O point closed, S700 N/O point closed",
            affected_pre: 627,
            affected_post: 0,
            cml_pre: 35739,
            cml_post: 0,
        },
        SampleRow {
            site_id: "kerry",
            faulted: &["R186"],
            down: &["R185", "R184"],
            operations: "R186 opened, R185 closed, R184 N/O point closed",
            affected_pre: 250,
            affected_post: 0,
            cml_pre: 14250,
            cml_post: 0,
        },
        SampleRow {
            site_id: "waterford",
            faulted: &["S507", "S508"],
            down: &["R518", "S509", "S697"],
            operations: "S507 opened, S508 opened, R518 closed, S509 closed, S697 N/O point closed",
            affected_pre: 1370,
            affected_post: 171,
            cml_pre: 78090,
            cml_post: 9747,
        },
        SampleRow {
            site_id: "waterford",
            faulted: &["R517", "S513", "S512"],
            down: &["S716", "S514", "S700"],
            operations: "R517 opened, S513 opened, S512 opened, S716 closed, S514 N/O point closed, S700 N/O point closed",
            affected_pre: 784,
            affected_post: 278,
            cml_pre: 44688,
            cml_post: 15846,
        },
    ]
}

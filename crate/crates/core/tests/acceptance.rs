//! Acceptance suite: `cargo test -p flisr --test acceptance`. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

mod common;

use std::collections::HashSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use flisr::fixtures;
use flisr::planner::{affected_customers, centralized_plan, energized_switches, evaluate_rules, ControlVerb};
use flisr::protocol::{decode, encode, PointMessage, PointValue};
use flisr::scenario::{append_report, cml_per_hour, read_report, FixedClock, Mode, ScenarioEngine};
use flisr::{FaultScenario, ProfileName, SwitchObservation};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Option<Duration>,
}

fn check(name: &'static str, budget: Option<Duration>, f: impl FnOnce() -> Result<String, String>) -> Outcome {
    let t = Instant::now();
    let r = f();
    let elapsed = t.elapsed();
    let within = budget.is_none_or(|b| elapsed <= b);
    let (pass, detail) = match r {
        Ok(d) if within => (true, d),
        Ok(d) => (false, format!("{d}; took {elapsed:?}, budget {:?}", budget.unwrap())),
        Err(e) => (false, e),
    };
    Outcome {
        name,
        pass,
        detail,
        elapsed,
        budget,
    }
}

fn truth_table() -> Result<String, String> {
    let mut n = 0;
    for fpi in [false, true] {
        for lvi in [false, true] {
            for no in [false, true] {
                let got = evaluate_rules(&SwitchObservation::new("S1", fpi, lvi), no).map(|a| a.verb);
                let want = match (fpi, lvi, no) {
                    (true, true, _) => Some(ControlVerb::Open),
                    (false, true, false) => Some(ControlVerb::Close),
                    (false, true, true) => Some(ControlVerb::CloseNormallyOpenPoint),
                    _ => None,
                };
                if got != want {
                    return Err(format!("fpi={fpi} lvi={lvi} no={no}: {got:?} != {want:?}"));
                }
                n += 1;
            }
        }
    }
    Ok(format!("{n} combinations"))
}

fn sample_replay() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = dir.path().join("report.csv");
    let clock = FixedClock::parse("2023-08-25 08:11:37.300").unwrap();
    let rows = fixtures::sample_rows();
    for row in &rows {
        let g = fixtures::site(row.site_id).unwrap();
        let r = ScenarioEngine::default()
            .with_clock(clock)
            .run(&g, &FaultScenario::new(row.site_id, row.faulted, row.down))
            .map_err(|e| e.to_string())?;
        append_report(&r, &report).map_err(|e| e.to_string())?;
    }
    let written = read_report(&report).map_err(|e| e.to_string())?;
    if written.len() != rows.len() {
        return Err(format!("{} rows written", written.len()));
    }
    for (i, (cells, row)) in written.iter().zip(&rows).enumerate() {
        let want = [
            row.faulted.join(", "),
            row.down.join(", "),
            row.operations.to_string(),
            row.affected_pre.to_string(),
            row.affected_post.to_string(),
            row.cml_pre.to_string(),
            row.cml_post.to_string(),
        ];
        if cells[2..] != want {
            return Err(format!("row {}: {:?} != {:?}", i + 1, &cells[2..], want));
        }
    }
    Ok("4 rows, device/operation/customer/CML cells exact".into())
}

fn cml_cells() -> Result<String, String> {
    let mut n = 0;
    for row in fixtures::sample_rows() {
        for (c, cml) in [(row.affected_pre, row.cml_pre), (row.affected_post, row.cml_post)] {
            if cml_per_hour(c) != cml {
                return Err(format!("{c} customers -> {} != {cml}", cml_per_hour(c)));
            }
            n += 1;
        }
    }
    Ok(format!("{n} cells"))
}

fn equivalence() -> Result<String, String> {
    let engine = ScenarioEngine::default();
    let mut nonempty = 0;
    let mut sites = HashSet::new();
    for seed in 0..500u64 {
        let (g, s) = common::random_site_scenario(0xE0_0000 + seed);
        sites.insert(g.site_id().to_string());
        let c = engine.run(&g, &s.clone().with_mode(Mode::Centralized)).map_err(|e| e.to_string())?;
        let d = engine.run(&g, &s.clone().with_mode(Mode::Distributed)).map_err(|e| e.to_string())?;
        let mut ca: Vec<_> = c.actions.iter().map(ToString::to_string).collect();
        let mut da: Vec<_> = d.actions.iter().map(ToString::to_string).collect();
        ca.sort();
        da.sort();
        let metrics = |r: &flisr::SimulationResult| {
            (r.affected_pre, r.affected_post, r.cml_per_hour_pre, r.cml_per_hour_post)
        };
        if ca != da || metrics(&c) != metrics(&d) {
            return Err(format!("seed {seed}: {ca:?} vs {da:?}"));
        }
        if !ca.is_empty() {
            nonempty += 1;
        }
    }
    Ok(format!("500 scenarios over {} sites, {nonempty} with actions", sites.len()))
}

fn latency() -> Result<String, String> {
    let engine = ScenarioEngine::default();
    let mut parts = Vec::new();
    for profile in ProfileName::CELLULAR {
        let target = profile.calibrated_round_trip_ms();
        let mut runs = Vec::new();
        let mut seed = 0;
        while runs.len() < 20 {
            let (g, s) = common::random_site_scenario(0x1A7_0000 + seed);
            seed += 1;
            if s.is_empty() {
                continue;
            }
            let r = engine
                .run(&g, &s.with_mode(Mode::Centralized).with_profile(profile))
                .map_err(|e| e.to_string())?;
            runs.push(r.elapsed_ms);
        }
        let mean = runs.iter().sum::<f64>() / runs.len() as f64;
        if (mean - target).abs() > 0.15 * target {
            return Err(format!("{profile}: mean {mean:.1} ms vs {target} ms"));
        }
        parts.push(format!("{profile} {mean:.1}/{target}"));
    }
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let (g, s) = common::random_site_scenario(0x10CA1 + seed);
        let r = engine.run(&g, &s.with_mode(Mode::Distributed)).map_err(|e| e.to_string())?;
        worst = worst.max(r.elapsed_ms);
    }
    if worst > 10.0 {
        return Err(format!("distributed run took {worst:.3} ms"));
    }
    parts.push(format!("local max {worst:.3} ms"));
    Ok(parts.join(", "))
}

fn energization() -> Result<String, String> {
    let mut switches = 0;
    for seed in 0..200u64 {
        let g = common::random_graph(0xE4E7 + seed, 12, 5);
        let faulted: HashSet<String> = g
            .sections()
            .iter()
            .enumerate()
            .filter(|(i, _)| (seed + *i as u64).is_multiple_of(4))
            .map(|(_, s)| s.section_id.clone())
            .collect();
        let got = energized_switches(&g, &faulted);
        let want = common::oracle_energized(&g, &faulted);
        if got != want {
            return Err(format!("graph {seed}: {got:?} != {want:?}"));
        }
        switches += g.switches().len();
    }
    Ok(format!("200 graphs, {switches} switches"))
}

fn golden_listings() -> Result<String, String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let expected = [
        ("switch_example_status.json", PointMessage::new(51908, 4, PointValue::Off)),
        ("switch_fault_current_status.json", PointMessage::new(51908, 4, PointValue::On)),
        ("switch_ac_supply_fail_status.json", PointMessage::new(51908, 2, PointValue::On)),
        ("switch_cb_control.json", PointMessage::new(51908, 8, PointValue::On)),
        ("recloser_end_of_protection_status.json", PointMessage::new(23089, 27, PointValue::On)),
        ("recloser_controller_locked_out_status.json", PointMessage::new(23089, 34, PointValue::On)),
        ("recloser_cb_control.json", PointMessage::new(23089, 4096, PointValue::On)),
    ];
    for (file, want) in &expected {
        let text = std::fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"))?;
        let got = decode(text.as_bytes()).map_err(|e| format!("{file}: {e}"))?;
        if &got != want {
            return Err(format!("{file}: decoded {got:?}"));
        }
        if encode(&got) != common::strip_json_ws(&text) {
            return Err(format!("{file}: re-encoding differs"));
        }
    }
    Ok(format!("{} listings", expected.len()))
}

fn monotonicity() -> Result<String, String> {
    let mut n = 0;
    for seed in 0..500u64 {
        let (g, s) = common::random_site_scenario(0x3030_0000 + seed);
        let obs = s.observations();
        let plan = centralized_plan(&g, &obs).map_err(|e| e.to_string())?;
        let pre = affected_customers(&g, &obs, None).map_err(|e| e.to_string())?;
        let post = affected_customers(&g, &obs, Some(&plan)).map_err(|e| e.to_string())?;
        if post > pre {
            return Err(format!("site scenario {seed}: post {post} > pre {pre}"));
        }
        n += 1;
    }
    for seed in 0..500u64 {
        let g = common::random_graph(0x3131_0000 + seed, 12, 4);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let (f, d) = common::random_case(&g, &mut rng);
        let s = FaultScenario {
            site: g.site_id().to_string(),
            faulted: f,
            down: d,
            mode: Mode::Distributed,
            network_profile: ProfileName::Local,
            seed,
        };
        let obs = s.observations();
        let plan = centralized_plan(&g, &obs).map_err(|e| e.to_string())?;
        let pre = affected_customers(&g, &obs, None).map_err(|e| e.to_string())?;
        let post = affected_customers(&g, &obs, Some(&plan)).map_err(|e| e.to_string())?;
        if post > pre {
            return Err(format!("random graph {seed}: post {post} > pre {pre}"));
        }
        n += 1;
    }
    Ok(format!("{n} scenarios, no counterexample"))
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let outcomes = [
        check("rule truth table", secs(1), truth_table),
        check("sample result replay", secs(5), sample_replay),
        check("CML arithmetic", None, cml_cells),
        check("centralized/distributed equivalence", secs(30), equivalence),
        check("latency calibration", secs(5), latency),
        check("energization oracle", secs(10), energization),
        check("protocol golden listings", None, golden_listings),
        check("restoration monotonicity", None, monotonicity),
    ];
    for o in &outcomes {
        let budget = o.budget.map(|b| format!(" / {b:?}")).unwrap_or_default();
        println!(
            "{} {:<38} {:>10.3?}{budget}  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.name,
            o.elapsed,
            o.detail
        );
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
    println!("{} criteria passed", outcomes.len());
}

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::NaiveDateTime;
use clap::{Parser, Subcommand};

use flisr::fixtures;
use flisr::scenario::{append_report, FaultScenario, FixedClock, Mode, ScenarioEngine, SimulationResult};
use flisr::server::{self, ServerConfig};
use flisr::topology::{
    export_topology, ingest_csv_dir, load_topology_file, save_topology_file, unreachable_nodes, SiteInfo,
};
use flisr::transport::ProfileName;

#[derive(Parser)]
#[command(name = "flisr", version, about = "FLISR simulation platform")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one fault scenario and append the result to a CSV report.
    Run {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario file.
        #[arg(long)]
        mode: Option<Mode>,
        /// 5g, 4g, 3g, 2g or local. Overrides the scenario file.
        #[arg(long)]
        profile: Option<ProfileName>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "flisr_report.csv")]
        report: PathBuf,
    },
    /// Check a topology document.
    Validate {
        #[arg(long)]
        topology: PathBuf,
    },
    /// Run the four sample cases on the built-in sites.
    ReplayTable1 {
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value = "distributed")]
        mode: Mode,
        #[arg(long, default_value = "4g")]
        profile: ProfileName,
        /// Fixed start timestamp, e.g. "2023-08-25 08:11:37.300".
        #[arg(long)]
        start: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print or write a built-in site's topology document.
    ExportFixture {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a topology document from a directory of GIS CSV tables.
    Ingest {
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        site_id: String,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_result(r: &SimulationResult) {
    let cells = r.report_cells();
    println!("site:       {} ({} / {})", r.site, r.mode, r.profile);
    println!("start/end:  {} / {}  ({:.3} ms)", cells[0], cells[1], r.elapsed_ms);
    println!("faulted:    {}", cells[2]);
    println!("down:       {}", cells[3]);
    println!("operations: {}", cells[4]);
    println!("affected:   {} -> {}", r.affected_pre, r.affected_post);
    println!("CML/hour:   {} -> {}", r.cml_per_hour_pre, r.cml_per_hour_post);
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run {
            topology,
            scenario,
            mode,
            profile,
            seed,
            report,
        } => {
            let graph = load_topology_file(&topology).with_context(|| format!("loading {}", topology.display()))?;
            let mut case = FaultScenario::load(&scenario).with_context(|| format!("loading {}", scenario.display()))?;
            if let Some(m) = mode {
                case.mode = m;
            }
            if let Some(p) = profile {
                case.network_profile = p;
            }
            if let Some(s) = seed {
                case.seed = s;
            }
            let result = ScenarioEngine::default().run(&graph, &case)?;
            append_report(&result, &report)?;
            print_result(&result);
        }
        Command::Validate { topology } => {
            let graph = load_topology_file(&topology).with_context(|| format!("loading {}", topology.display()))?;
            let stray = unreachable_nodes(&graph);
            if !stray.is_empty() {
                bail!("unreachable nodes: {}", stray.join(", "));
            }
            println!(
                "{}: {} nodes, {} sections, {} switches, {} sources",
                graph.site_id(),
                graph.nodes().len(),
                graph.sections().len(),
                graph.switches().len(),
                graph.sources().len()
            );
        }
        Command::ReplayTable1 {
            report,
            mode,
            profile,
            start,
        } => {
            let mut engine = ScenarioEngine::default();
            if let Some(s) = start {
                let t = NaiveDateTime::parse_from_str(&s, flisr::scenario::TIMESTAMP_FORMAT)
                    .with_context(|| format!("bad --start {s:?}"))?;
                engine = engine.with_clock(FixedClock(t));
            }
            let mut mismatches = 0;
            for (i, row) in fixtures::sample_rows().iter().enumerate() {
                let graph = fixtures::site(row.site_id).expect("built-in site");
                let case = FaultScenario::new(row.site_id, row.faulted, row.down)
                    .with_mode(mode)
                    .with_profile(profile);
                let result = engine.run(&graph, &case)?;
                if let Some(path) = &report {
                    append_report(&result, path)?;
                }
                let ok = result.operations == row.operations
                    && (result.affected_pre, result.affected_post) == (row.affected_pre, row.affected_post)
                    && (result.cml_per_hour_pre, result.cml_per_hour_post) == (row.cml_pre, row.cml_post);
                if !ok {
                    mismatches += 1;
                }
                println!("row {} [{}]", i + 1, if ok { "match" } else { "MISMATCH" });
                print_result(&result);
                println!();
            }
            if mismatches > 0 {
                bail!("{mismatches} row(s) differ from the reference rows");
            }
        }
        Command::Serve { config } => {
            let config = ServerConfig::load(config.as_deref())?;
            tokio::runtime::Runtime::new()?.block_on(server::serve(config))?;
        }
        Command::ExportFixture { name, out } => {
            let graph = fixtures::site(&name).with_context(|| format!("no built-in site {name:?}"))?;
            match out {
                Some(path) => save_topology_file(&graph, path)?,
                None => print!("{}", export_topology(&graph)),
            }
        }
        Command::Ingest {
            tables,
            site_id,
            name,
            out,
        } => {
            let name = name.unwrap_or_else(|| site_id.clone());
            let graph = ingest_csv_dir(&tables, SiteInfo::new(site_id, name))?;
            save_topology_file(&graph, &out)?;
            println!("{}: {} switches written to {}", graph.site_id(), graph.switches().len(), out.display());
        }
    }
    Ok(())
}

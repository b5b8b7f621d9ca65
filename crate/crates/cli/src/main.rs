use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use attestree::campaign::{run_campaign, write_csv, CampaignConfig, Placement};
use attestree::config::KeyValues;
use attestree::graph_spec::GraphSpec;
use attestree::oracle::{relay_timing, run_oracle, OracleConfig};
use attestree::trace::write_trace_csv;
use attestree_core::adversary::Behavior;
use attestree_core::analysis::{convergence_round, distance_diagnostics, rln};
use attestree_core::attestation::Timing;
use attestree_core::graph::{eccentricity, metrics};
use attestree_core::protocol::ProtocolKind;
use attestree_core::sim::{run, InitKind, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "attestree", version, about = "Attested BFS tree experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment campaign described by a config file.
    Campaign {
        config: PathBuf,
        /// Override a config entry, `key=value`; may repeat.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Write the CSV here instead of the configured output.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Omit the generation-time comment line.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Print node count, edge count, CPL, clustering coefficient and diameter.
    Metrics {
        graph: GraphSpec,
        /// Estimate path statistics from this many BFS sources.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep every component instead of only the largest.
        #[arg(long)]
        full_graph: bool,
    },
    /// Check simulated runs against the analytic containment sets.
    OracleCheck {
        /// Optional config file; defaults cover 500 instances.
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Simulate a single placement and optionally dump its trace.
    Simulate {
        graph: GraphSpec,
        #[arg(long, default_value_t = 1)]
        attack_edges: usize,
        #[arg(long, default_value = "attested")]
        protocol: String,
        #[arg(long, default_value = "cheat")]
        behavior: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        rounds: u32,
        /// Start from arbitrary states with stale attestations.
        #[arg(long)]
        adversarial_init: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn key_values(path: Option<&PathBuf>, overrides: &[String]) -> Result<KeyValues> {
    let mut kv = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            KeyValues::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => KeyValues::default(),
    };
    for o in overrides {
        kv.set_override(o)?;
    }
    Ok(kv)
}

fn campaign(
    config: PathBuf,
    overrides: Vec<String>,
    output: Option<PathBuf>,
    no_timestamp: bool,
) -> Result<()> {
    let cfg = CampaignConfig::from_key_values(key_values(Some(&config), &overrides)?)?;
    let started = Instant::now();
    let report = run_campaign(&cfg)?;
    let stamp = (!no_timestamp).then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    match output.or_else(|| cfg.output.clone()) {
        Some(path) => {
            let file =
                File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            let mut out = BufWriter::new(file);
            write_csv(&report, &mut out, stamp)?;
            out.flush()?;
            eprintln!("wrote {}", path.display());
        }
        None => write_csv(&report, io::stdout().lock(), stamp)?,
    }
    eprintln!(
        "{}: {} nodes, {} edges, {} rows in {:.1?}",
        report.graph,
        report.nodes,
        report.edges,
        report.rows.len(),
        started.elapsed()
    );
    Ok(())
}

fn print_metrics(
    graph: GraphSpec,
    sample: Option<usize>,
    seed: u64,
    full_graph: bool,
) -> Result<()> {
    let loaded = graph.build(seed, !full_graph)?;
    if let Some(s) = loaded.load {
        println!(
            "input: {} nodes, {} edges ({} self-loops, {} duplicates dropped)",
            s.input_nodes, s.input_edges, s.self_loops, s.duplicates
        );
    }
    if !full_graph {
        println!(
            "largest component kept ({} nodes dropped)",
            loaded.dropped_nodes
        );
    }
    let m = metrics(&loaded.graph, sample, seed);
    println!("nodes     {}", m.nodes);
    println!("edges     {}", m.edges);
    println!(
        "cpl       {:.4}{}",
        m.cpl,
        if m.exact { "" } else { " (sampled)" }
    );
    println!("cc        {:.4}", m.clustering);
    println!(
        "diameter  {}{}",
        m.diameter,
        if m.exact { "" } else { " (lower bound)" }
    );
    Ok(())
}

fn oracle_check(config: Option<PathBuf>, overrides: Vec<String>) -> Result<bool> {
    let cfg = OracleConfig::from_key_values(key_values(config.as_ref(), &overrides)?)?;
    let started = Instant::now();
    let reports = run_oracle(&cfg)?;
    let mut failed = 0;
    for (i, r) in reports.iter().enumerate() {
        if !r.passed() {
            failed += 1;
            for v in &r.violations {
                println!("instance {i} (n={}, g={}): {v}", r.nodes, r.attack_edges);
            }
        }
    }
    println!(
        "{} instances, {failed} with violations, {:.1?}",
        reports.len(),
        started.elapsed()
    );
    Ok(failed == 0)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    graph: GraphSpec,
    attack_edges: usize,
    protocol: &str,
    behavior: &str,
    seed: u64,
    rounds: u32,
    adversarial_init: bool,
    trace: Option<PathBuf>,
) -> Result<()> {
    let Some(protocol) = ProtocolKind::parse(protocol) else {
        bail!("unknown protocol {protocol:?}");
    };
    let Some(behavior) = Behavior::parse(behavior) else {
        bail!("unknown behaviour {behavior:?}");
    };
    let honest = graph.build(seed, true)?.graph;
    let Placement {
        graph,
        adversary,
        root,
        report,
    } = attestree::campaign::place(&honest, attack_edges, seed)?;
    let mut cfg = RunConfig::new(protocol, Some(behavior), root);
    cfg.timing = relay_timing(Timing::default(), attack_edges);
    cfg.max_rounds = rounds.max(eccentricity(&graph, root) + 1);
    cfg.seed = seed;
    cfg.stop_when_stable = false;
    if adversarial_init {
        cfg.init = InitKind::Adversarial;
    }
    let out = run(&graph, Some(adversary), cfg)?;
    let d = distance_diagnostics(&report);
    println!(
        "root {root}, d(m, r) = {}, {} rounds",
        report.d_min, out.rounds
    );
    println!(
        "predicted lost {:.4}",
        rln(report.predicted_lost(protocol, behavior))?
    );
    println!(
        "ill-directed at end {:.4}",
        rln(&attestree_core::analysis::ill_directed_set(
            out.trace.last()
        ))?
    );
    println!(
        "mean distance to root {:.4}, to adversary {:.4}",
        d.mean_dist_root, d.mean_dist_adv
    );
    match convergence_round(&out.trace, &report.s_b) {
        Some(k) => println!("nodes outside the boundary set settled from round {k}"),
        None => println!("nodes outside the boundary set never settled"),
    }
    if let Some(path) = trace {
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trace_csv(&out.trace, BufWriter::new(file))?;
        println!("trace written to {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Campaign {
            config,
            overrides,
            output,
            no_timestamp,
        } => campaign(config, overrides, output, no_timestamp).map(|_| true),
        Command::Metrics {
            graph,
            sample,
            seed,
            full_graph,
        } => print_metrics(graph, sample, seed, full_graph).map(|_| true),
        Command::OracleCheck { config, overrides } => oracle_check(config, overrides),
        Command::Simulate {
            graph,
            attack_edges,
            protocol,
            behavior,
            seed,
            rounds,
            adversarial_init,
            trace,
        } => simulate(
            graph,
            attack_edges,
            &protocol,
            &behavior,
            seed,
            rounds,
            adversarial_init,
            trace,
        )
        .map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

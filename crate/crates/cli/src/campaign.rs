//! Experiment campaigns: many attack placements per graph, analytic lost
//! sets, optional simulation, and per-cell summaries written as CSV.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use attestree_core::adversary::{place_attack_edges, Behavior};
use attestree_core::analysis::{
    containment_sets, convergence_round, distance_diagnostics, rln, simulated_lost_set,
    ContainmentReport, DistanceDiagnostics,
};
use attestree_core::attestation::Timing;
use attestree_core::crypto::Scheme;
use attestree_core::graph::{eccentricity, Graph};
use attestree_core::protocol::ProtocolKind;
use attestree_core::sim::{run, RunConfig};
use attestree_core::{mix_seed, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ConfigError, KeyValues};
use crate::graph_spec::GraphSpec;
use crate::oracle::{relay_timing, round_limit, stability_window};
use crate::stats::{mean, mean_ci99};

const ROOT_RETRIES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    pub graph: GraphSpec,
    pub largest_component: bool,
    pub protocols: Vec<ProtocolKind>,
    pub behaviors: Vec<Behavior>,
    pub attack_edges: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// `None` picks a clock bound long enough for relayed material to
    /// survive a full rotation over the attack edges.
    pub delta_c: Option<u64>,
    pub delta_d: u64,
    pub delta_e: u64,
    pub output: Option<PathBuf>,
    pub analytic_only: bool,
    pub scheme: Scheme,
}

fn take_names<T>(
    kv: &mut KeyValues,
    key: &'static str,
    parse: fn(&str) -> Option<T>,
) -> Result<Option<Vec<T>>, ConfigError> {
    let Some(names) = kv.take_list::<String>(key)? else {
        return Ok(None);
    };
    names
        .iter()
        .map(|n| {
            parse(n).ok_or_else(|| ConfigError::Value {
                key: key.into(),
                value: n.clone(),
                reason: "unknown name".into(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

impl CampaignConfig {
    /// Keys: `graph` (required), `attack_edges` (required list), `runs`,
    /// `seed`, `protocols`, `behaviors`, `delta_c` (number or `auto`),
    /// `delta_d`, `delta_e`, `output`, `analytic_only`, `largest_component`,
    /// `scheme` (`model` or `ed25519`).
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let graph: GraphSpec = kv.require("graph")?;
        let attack_edges = kv
            .take_list::<usize>("attack_edges")?
            .ok_or(ConfigError::Missing("attack_edges"))?;
        let protocols = take_names(&mut kv, "protocols", ProtocolKind::parse)?
            .unwrap_or(ProtocolKind::ALL.to_vec());
        let behaviors = take_names(&mut kv, "behaviors", Behavior::parse)?
            .unwrap_or(vec![Behavior::Disturb, Behavior::CheatMinLevel]);
        let delta_c = match kv.take_raw("delta_c").as_deref() {
            None | Some("auto") => None,
            Some(v) => Some(v.parse().with_context(|| format!("delta_c = {v:?}"))?),
        };
        let scheme = match kv.take_raw("scheme").as_deref() {
            None | Some("model") => Scheme::Model,
            Some("ed25519") => Scheme::Ed25519,
            Some(other) => bail!("unknown signature scheme {other:?}"),
        };
        let cfg = CampaignConfig {
            graph,
            largest_component: kv.take_or("largest_component", true)?,
            protocols,
            behaviors,
            attack_edges,
            runs: kv.take_or("runs", 100)?,
            seed: kv.take_or("seed", 0)?,
            delta_c,
            delta_d: kv.take_or("delta_d", 1)?,
            delta_e: kv.take_or("delta_e", 1)?,
            output: kv.take::<PathBuf>("output")?,
            analytic_only: kv.take_or("analytic_only", false)?,
            scheme,
        };
        kv.finish()?;
        ensure!(cfg.runs >= 1, "runs must be at least 1");
        ensure!(
            !cfg.attack_edges.is_empty(),
            "attack_edges must not be empty"
        );
        ensure!(
            cfg.attack_edges.iter().all(|&g| g > 0),
            "attack edge counts must be positive"
        );
        ensure!(
            !cfg.protocols.is_empty() && !cfg.behaviors.is_empty(),
            "empty protocol or behaviour list"
        );
        ensure!(cfg.delta_d + cfg.delta_e > 0, "a round must take time");
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_key_values(KeyValues::parse(text)?)
    }

    pub fn timing(&self, g: usize) -> Timing {
        let base = Timing {
            delta_c: 0,
            delta_d: self.delta_d,
            delta_e: self.delta_e,
        };
        match self.delta_c {
            Some(delta_c) => Timing { delta_c, ..base },
            None => relay_timing(base, g),
        }
    }
}

pub fn graph_seed(master: u64) -> u64 {
    mix_seed(master, 0)
}

pub fn run_seed(master: u64, g: usize, run: usize) -> u64 {
    mix_seed(mix_seed(mix_seed(master, 1), g as u64), run as u64)
}

/// An attack placement with a root and its analytic sets.
#[derive(Clone, Debug)]
pub struct Placement {
    pub graph: Graph,
    pub adversary: usize,
    pub root: usize,
    pub report: ContainmentReport,
}

/// Places `g` degree-weighted attack edges on the honest graph and picks a
/// uniform honest root, resampling the root if some honest node cannot
/// reach it.
pub fn place(honest: &Graph, g: usize, seed: u64) -> Result<Placement> {
    let (graph, adversary) = place_attack_edges(honest, honest.node_count(), g, mix_seed(seed, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 2));
    for _ in 0..ROOT_RETRIES {
        let root = rng.random_range(0..honest.node_count());
        match containment_sets(&graph, adversary, root) {
            Ok(report) => {
                return Ok(Placement {
                    graph,
                    adversary,
                    root,
                    report,
                })
            }
            Err(Error::Unreachable(_)) => continue,
            Err(e) => return Err(e.into()),
        }
    }
    bail!("no root reaches every honest node after {ROOT_RETRIES} attempts")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub protocol: ProtocolKind,
    pub behavior: Behavior,
    pub g: usize,
    pub run_index: usize,
    pub seed: u64,
    pub root: usize,
    pub rln_analytic: f64,
    pub rln_simulated: Option<f64>,
    pub diagnostics: DistanceDiagnostics,
    pub convergence_round: Option<usize>,
    pub ties_count: usize,
}

/// Mean (or CI half-width) of each numeric column over one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub protocol: ProtocolKind,
    pub behavior: Behavior,
    pub g: usize,
    pub label: &'static str,
    pub rln_analytic: Option<f64>,
    pub rln_simulated: Option<f64>,
    pub mean_dist_root: Option<f64>,
    pub mean_dist_adv: Option<f64>,
    pub effective_adv_dist: Option<f64>,
    pub d_m_r: Option<f64>,
    pub convergence_round: Option<f64>,
    pub ties_count: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub graph: String,
    pub nodes: usize,
    pub edges: usize,
    pub rows: Vec<RunRow>,
    pub summaries: Vec<SummaryRow>,
}

impl CampaignReport {
    pub fn cell(&self, protocol: ProtocolKind, behavior: Behavior, g: usize) -> Vec<&RunRow> {
        self.rows
            .iter()
            .filter(|r| r.protocol == protocol && r.behavior == behavior && r.g == g)
            .collect()
    }

    pub fn summary(
        &self,
        protocol: ProtocolKind,
        behavior: Behavior,
        g: usize,
        label: &str,
    ) -> Option<&SummaryRow> {
        self.summaries.iter().find(|s| {
            s.protocol == protocol && s.behavior == behavior && s.g == g && s.label == label
        })
    }
}

fn simulate(
    cfg: &CampaignConfig,
    p: &Placement,
    protocol: ProtocolKind,
    behavior: Behavior,
    g: usize,
    seed: u64,
) -> Result<(f64, Option<usize>)> {
    // The root's eccentricity bounds the diameter from above by a factor two,
    // which is enough to size the windows without an all-pairs pass.
    let diam = 2 * eccentricity(&p.graph, p.root);
    let window = stability_window(diam);
    let mut rc = RunConfig::new(protocol, Some(behavior), p.root);
    rc.timing = cfg.timing(g);
    rc.scheme = cfg.scheme;
    rc.window = window;
    rc.seed = mix_seed(seed, 3);
    rc.max_rounds = round_limit(behavior, diam, g, p.report.disturbance_budget(), window);
    let out = run(&p.graph, Some(p.adversary), rc)?;
    let w = (window as usize).min(out.trace.len() - 1);
    let lost = simulated_lost_set(&out.trace, 0, w)?;
    let boundary: Vec<bool> = match protocol {
        ProtocolKind::Attested => p.report.s_b.clone(),
        ProtocolKind::Baseline => p
            .report
            .baseline_lost
            .iter()
            .zip(&p.report.baseline_ties)
            .map(|(&l, &t)| l || t)
            .collect(),
    };
    Ok((rln(&lost)?, convergence_round(&out.trace, &boundary)))
}

fn rows_for(
    cfg: &CampaignConfig,
    honest: &Graph,
    g: usize,
    run_index: usize,
) -> Result<Vec<RunRow>> {
    let seed = run_seed(cfg.seed, g, run_index);
    let p = place(honest, g, seed)?;
    ensure!(
        p.report
            .s_l
            .iter()
            .zip(&p.report.s_b)
            .all(|(&l, &b)| !l || b),
        "lost set not contained in boundary set (g={g}, run={run_index})"
    );
    let diagnostics = distance_diagnostics(&p.report);
    let mut rows = Vec::new();
    for &protocol in &cfg.protocols {
        for &behavior in &cfg.behaviors {
            let (rln_simulated, convergence) = if cfg.analytic_only {
                (None, None)
            } else {
                let (r, c) = simulate(cfg, &p, protocol, behavior, g, seed)?;
                (Some(r), c)
            };
            rows.push(RunRow {
                protocol,
                behavior,
                g,
                run_index,
                seed,
                root: p.root,
                rln_analytic: rln(p.report.predicted_lost(protocol, behavior))?,
                rln_simulated,
                diagnostics,
                convergence_round: convergence,
                ties_count: p.report.tie_count(protocol),
            });
        }
    }
    Ok(rows)
}

fn summarize(cfg: &CampaignConfig, rows: &[RunRow]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for &protocol in &cfg.protocols {
        for &behavior in &cfg.behaviors {
            for &g in &cfg.attack_edges {
                let cell: Vec<&RunRow> = rows
                    .iter()
                    .filter(|r| r.protocol == protocol && r.behavior == behavior && r.g == g)
                    .collect();
                let column = |f: &dyn Fn(&RunRow) -> Option<f64>| -> Vec<f64> {
                    cell.iter().filter_map(|r| f(r)).collect()
                };
                let columns: [Vec<f64>; 8] = [
                    column(&|r| Some(r.rln_analytic)),
                    column(&|r| r.rln_simulated),
                    column(&|r| Some(r.diagnostics.mean_dist_root)),
                    column(&|r| Some(r.diagnostics.mean_dist_adv)),
                    column(&|r| Some(r.diagnostics.effective_adv_dist)),
                    column(&|r| Some(r.diagnostics.d_m_r as f64)),
                    column(&|r| r.convergence_round.map(|c| c as f64)),
                    column(&|r| Some(r.ties_count as f64)),
                ];
                let means: Vec<Option<f64>> = columns
                    .iter()
                    .map(|c| (!c.is_empty()).then(|| mean(c)))
                    .collect();
                let halves: Vec<Option<f64>> = columns
                    .iter()
                    .map(|c| mean_ci99(c).ok().map(|(_, h)| h))
                    .collect();
                for (label, v) in [("MEAN", means), ("CI99", halves)] {
                    out.push(SummaryRow {
                        protocol,
                        behavior,
                        g,
                        label,
                        rln_analytic: v[0],
                        rln_simulated: v[1],
                        mean_dist_root: v[2],
                        mean_dist_adv: v[3],
                        effective_adv_dist: v[4],
                        d_m_r: v[5],
                        convergence_round: v[6],
                        ties_count: v[7],
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Runs every cell. Rows come back sorted by protocol, behaviour, attack
/// edge count and run index, in configuration order.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    let loaded = cfg
        .graph
        .build(graph_seed(cfg.seed), cfg.largest_component)?;
    let honest = &loaded.graph;
    ensure!(honest.node_count() >= 2, "graph has fewer than two nodes");
    if let Some(&g) = cfg.attack_edges.iter().find(|&&g| g > honest.node_count()) {
        bail!(
            "{g} attack edges exceed the {} honest nodes",
            honest.node_count()
        );
    }
    let jobs: Vec<(usize, usize)> = cfg
        .attack_edges
        .iter()
        .flat_map(|&g| (0..cfg.runs).map(move |r| (g, r)))
        .collect();
    let mut rows: Vec<RunRow> = jobs
        .par_iter()
        .map(|&(g, r)| rows_for(cfg, honest, g, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let position =
        |list: &[usize], x: usize| list.iter().position(|&y| y == x).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| {
        (
            cfg.protocols.iter().position(|&p| p == r.protocol),
            cfg.behaviors.iter().position(|&b| b == r.behavior),
            position(&cfg.attack_edges, r.g),
            r.run_index,
        )
    });
    let summaries = summarize(cfg, &rows)?;
    let report = CampaignReport {
        graph: cfg.graph.to_string(),
        nodes: honest.node_count(),
        edges: honest.edge_count(),
        rows,
        summaries,
    };
    check_summaries(&report)?;
    Ok(report)
}

/// Every MEAN row must equal the mean of its cell's run rows.
fn check_summaries(report: &CampaignReport) -> Result<()> {
    for s in report.summaries.iter().filter(|s| s.label == "MEAN") {
        let cell = report.cell(s.protocol, s.behavior, s.g);
        let expected = mean(&cell.iter().map(|r| r.rln_analytic).collect::<Vec<_>>());
        let got = s.rln_analytic.unwrap_or(f64::NAN);
        ensure!(
            (expected - got).abs() <= 1e-12,
            "summary mean {got} differs from row mean {expected}"
        );
    }
    Ok(())
}

pub const CSV_HEADER: [&str; 14] = [
    "protocol",
    "behavior",
    "g",
    "run_index",
    "seed",
    "root",
    "rln_analytic",
    "rln_simulated",
    "mean_dist_root",
    "mean_dist_adv",
    "effective_adv_dist",
    "d_m_r",
    "convergence_round",
    "ties_count",
];

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes the report. With `timestamp`, a leading `#` comment line records
/// when the file was produced; everything else is deterministic.
pub fn write_csv<W: Write>(report: &CampaignReport, out: W, timestamp: Option<u64>) -> Result<()> {
    let mut out = out;
    if let Some(t) = timestamp {
        writeln!(out, "# generated at unix time {t}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let mut summaries = report.summaries.iter().peekable();
    let mut rows = report.rows.iter().peekable();
    // Each cell's run rows are followed by its summary rows.
    while let Some(r) = rows.next() {
        w.write_record([
            r.protocol.name().to_string(),
            r.behavior.name().to_string(),
            r.g.to_string(),
            r.run_index.to_string(),
            r.seed.to_string(),
            r.root.to_string(),
            num(r.rln_analytic),
            opt(r.rln_simulated),
            num(r.diagnostics.mean_dist_root),
            num(r.diagnostics.mean_dist_adv),
            num(r.diagnostics.effective_adv_dist),
            r.diagnostics.d_m_r.to_string(),
            r.convergence_round
                .map(|c| c.to_string())
                .unwrap_or_default(),
            r.ties_count.to_string(),
        ])?;
        let cell_ends = rows
            .peek()
            .is_none_or(|n| (n.protocol, n.behavior, n.g) != (r.protocol, r.behavior, r.g));
        if cell_ends {
            while let Some(s) = summaries
                .next_if(|s| (s.protocol, s.behavior, s.g) == (r.protocol, r.behavior, r.g))
            {
                w.write_record([
                    s.protocol.name().to_string(),
                    s.behavior.name().to_string(),
                    s.g.to_string(),
                    s.label.to_string(),
                    String::new(),
                    String::new(),
                    opt(s.rln_analytic),
                    opt(s.rln_simulated),
                    opt(s.mean_dist_root),
                    opt(s.mean_dist_adv),
                    opt(s.effective_adv_dist),
                    opt(s.d_m_r),
                    opt(s.convergence_round),
                    opt(s.ties_count),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

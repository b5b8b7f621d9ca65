//! Cross-checks between simulated runs and the closed-form containment sets.

use std::fmt;

use anyhow::{ensure, Result};
use attestree_core::adversary::Behavior;
use attestree_core::analysis::{ill_directed_set, ContainmentReport};
use attestree_core::attestation::Timing;
use attestree_core::graph::{diameter, erdos_renyi, preferential_attachment, Graph};
use attestree_core::mix_seed;
use attestree_core::protocol::{Level, ProtocolKind};
use attestree_core::sim::{run, Direction, RunConfig, RunOutcome, Simulation, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::campaign::place;
use crate::config::KeyValues;

/// One failed check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub check: Check,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Check {
    /// Every ill-directed node under relay cheating lies in the boundary set.
    CheatWithinBoundary,
    /// Every lost-set node ends up ill-directed under relay cheating.
    CheatCapturesLost,
    /// Nodes outside the lost set end up stable under disturbance.
    DisturbStableOutsideLost,
    /// Nodes outside the boundary set are legitimate and stable from round diam + 1.
    ConvergenceOutsideBoundary,
    /// Disturbances after the boundary set settled stay within the budget.
    DisturbanceBudget,
    /// An adversary advertising its true level captures no more than the
    /// plain boundary set, and no more than a cheating one.
    CheatByOne,
    /// No honest neighbour of the malicious node accepts an attestation
    /// shorter than `d(m, r)` from it.
    AdversaryLevel,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.check, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub nodes: usize,
    pub attack_edges: usize,
    pub root: usize,
    pub diameter: u32,
    pub lost: usize,
    pub boundary: usize,
    pub budget: u64,
    pub disturbances: usize,
    pub rounds: u32,
    pub violations: Vec<Violation>,
}

impl InstanceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Rounds of quiet that count as stable: two adversary periods per hop.
pub fn stability_window(diam: u32) -> u32 {
    2 * 2 * (diam + 1)
}

/// `base` with a clock bound that lets relayed material outlive a full
/// rotation over `g` victims.
pub fn relay_timing(base: Timing, g: usize) -> Timing {
    Timing {
        delta_c: base.round() * g.max(1) as u64,
        ..base
    }
}

/// Rounds to simulate for a behaviour: convergence plus room for the relay
/// rotation, and for the disturbance budget to run out, plus the window.
pub fn round_limit(behavior: Behavior, diam: u32, g: usize, budget: u64, window: u32) -> u32 {
    let g = g as u32;
    match behavior {
        Behavior::CheatMinLevel => diam + 1 + 2 * g + 2 * window,
        Behavior::Disturb => 3 * (diam + 1) + 4 * g + 2 * budget.min(500) as u32 + window,
        Behavior::HonestMinLevel => diam + 1 + 2 * window,
    }
}

fn members(set: &[bool]) -> Vec<usize> {
    (0..set.len()).filter(|&u| set[u]).collect()
}

fn first_outside(set: &[bool], pred: impl Fn(usize) -> bool) -> Option<usize> {
    (0..set.len()).find(|&u| !set[u] && pred(u))
}

struct Ctx<'a> {
    report: &'a ContainmentReport,
    diam: u32,
    violations: Vec<Violation>,
}

impl Ctx<'_> {
    fn fail(&mut self, check: Check, detail: String) {
        self.violations.push(Violation { check, detail });
    }

    /// Nodes outside the boundary set: legitimate from round diam + 1 on and
    /// unchanged afterwards.
    fn convergence(&mut self, trace: &Trace, label: &str) {
        let from = self.diam as usize + 1;
        for k in from..trace.len() {
            let rec = &trace.records[k];
            if let Some(u) = first_outside(&self.report.s_b, |u| {
                !rec.legitimate[u] || (k > from && trace.changed(k, u))
            }) {
                self.fail(
                    Check::ConvergenceOutsideBoundary,
                    format!("{label}: node {u} unsettled at round {k}"),
                );
                return;
            }
        }
        if trace.len() <= from {
            self.fail(
                Check::ConvergenceOutsideBoundary,
                format!("{label}: trace ends before round {from}"),
            );
        }
    }
}

/// Runs one instance end to end and collects violated checks.
///
/// `graph` is the honest graph, which must be connected. The malicious node
/// gets `g` degree-weighted attack edges; the root is uniform among honest
/// nodes.
pub fn check_instance(graph: &Graph, g: usize, seed: u64) -> Result<InstanceReport> {
    let placement = place(graph, g, seed)?;
    let (s, m, root, report) = (
        &placement.graph,
        placement.adversary,
        placement.root,
        &placement.report,
    );
    let diam = diameter(s);
    let window = stability_window(diam);
    let timing = relay_timing(Timing::default(), g);
    let budget = report.disturbance_budget();
    let mut ctx = Ctx {
        report,
        diam,
        violations: Vec::new(),
    };

    let base = |behavior: Option<Behavior>| {
        let mut cfg = RunConfig::new(ProtocolKind::Attested, behavior, root);
        cfg.timing = timing;
        cfg.window = window;
        cfg.seed = mix_seed(seed, 3);
        cfg
    };

    // Adversary-free: all honest nodes legitimate by diam(H) + 1.
    let honest_diam = diameter(graph);
    let mut free = base(None);
    free.max_rounds = honest_diam + 1 + window;
    free.stop_when_stable = false;
    let out = run(graph, None, free)?;
    let from = honest_diam as usize + 1;
    for k in from..out.trace.len() {
        let rec = &out.trace.records[k];
        if let Some(u) = (0..rec.node_count())
            .find(|&u| !rec.legitimate[u] || rec.direction[u] != Direction::Well)
        {
            ctx.fail(
                Check::ConvergenceOutsideBoundary,
                format!("adversary-free: node {u} at round {k}"),
            );
            break;
        }
    }

    // Relay cheating.
    let mut cheat_cfg = base(Some(Behavior::CheatMinLevel));
    cheat_cfg.max_rounds = round_limit(Behavior::CheatMinLevel, diam, g, budget, window);
    let mut sim = Simulation::new(s, Some(m), cheat_cfg)?;
    let stopped = sim.advance();
    for (k, &u) in s.neighbors(m).iter().enumerate() {
        let u = u as usize;
        let back = s.neighbor_index(u, m).expect("undirected edge");
        let (level, _) = sim.effective_offer(u, back);
        if level < Level::finite(report.d_min - 1) {
            ctx.fail(
                Check::AdversaryLevel,
                format!("neighbour {k} (node {u}) accepts level {level}"),
            );
        }
    }
    let cheat = sim.into_outcome(stopped);
    ctx.convergence(&cheat.trace, "cheat");
    for k in diam as usize + 1..cheat.trace.len() {
        let ill = ill_directed_set(&cheat.trace.records[k]);
        if let Some(u) = first_outside(&report.s_b, |u| ill[u]) {
            ctx.fail(
                Check::CheatWithinBoundary,
                format!("node {u} ill-directed at round {k}"),
            );
            break;
        }
    }
    let cheat_ill = final_ill(&cheat, window as usize);
    if let Some(u) = (0..report.honest).find(|&u| report.s_l[u] && !cheat_ill[u]) {
        ctx.fail(
            Check::CheatCapturesLost,
            format!(
                "node {u} in lost set not captured after {} rounds",
                cheat.rounds
            ),
        );
    }

    // Disturbance.
    let mut disturb_cfg = base(Some(Behavior::Disturb));
    disturb_cfg.max_rounds = round_limit(Behavior::Disturb, diam, g, budget, window);
    let disturb = run(s, Some(m), disturb_cfg)?;
    ctx.convergence(&disturb.trace, "disturb");
    let outside_b: Vec<bool> = report.s_b.iter().map(|&b| !b).collect();
    let mut disturbances = 0;
    match disturb.trace.settled_from(&outside_b) {
        None => ctx.fail(
            Check::DisturbanceBudget,
            "boundary set never settles".into(),
        ),
        Some(gamma) => {
            disturbances = disturb.trace.count_disturbances(&report.s_l, gamma);
            if disturbances as u64 > budget {
                ctx.fail(
                    Check::DisturbanceBudget,
                    format!("{disturbances} disturbances after round {gamma}, budget {budget}"),
                );
            }
        }
    }
    let tail = disturb.trace.len() - window as usize;
    for u in 0..report.honest {
        if report.s_l[u] {
            continue;
        }
        let bad = (tail..disturb.trace.len()).find(|&k| {
            let rec = &disturb.trace.records[k];
            !rec.legitimate[u]
                || rec.direction[u] != Direction::Well
                || (k > tail && disturb.trace.changed(k, u))
        });
        if let Some(k) = bad {
            ctx.fail(
                Check::DisturbStableOutsideLost,
                format!("node {u} not stable at round {k}"),
            );
            break;
        }
    }

    // Faithful adversary.
    let mut honest_cfg = base(Some(Behavior::HonestMinLevel));
    honest_cfg.max_rounds = round_limit(Behavior::HonestMinLevel, diam, g, budget, window);
    let faithful = run(s, Some(m), honest_cfg)?;
    let faithful_ill = final_ill(&faithful, window as usize);
    if let Some(u) = (0..report.honest).find(|&u| faithful_ill[u] && !report.s_b_plain[u]) {
        ctx.fail(
            Check::CheatByOne,
            format!("node {u} captured by a faithful adversary outside the plain boundary"),
        );
    }
    if let Some(u) = (0..report.honest).find(|&u| faithful_ill[u] && !cheat_ill[u]) {
        ctx.fail(
            Check::CheatByOne,
            format!("node {u} captured by a faithful adversary but not by a cheating one"),
        );
    }
    if let Some(u) = (0..report.honest).find(|&u| report.s_b_plain[u] && !report.s_b[u]) {
        ctx.fail(
            Check::CheatByOne,
            format!("node {u} in plain boundary but not in boundary"),
        );
    }

    let violations = ctx.violations;
    Ok(InstanceReport {
        nodes: graph.node_count(),
        attack_edges: g,
        root,
        diameter: diam,
        lost: members(&report.s_l).len(),
        boundary: members(&report.s_b).len(),
        budget,
        disturbances,
        rounds: cheat.rounds + disturb.rounds + faithful.rounds + out.rounds,
        violations,
    })
}

/// Nodes ill-directed in any of the last `window` records.
fn final_ill(out: &RunOutcome, window: usize) -> Vec<bool> {
    let t = &out.trace;
    let start = t.len().saturating_sub(window);
    let n = t.last().node_count();
    (0..n)
        .map(|u| (start..t.len()).all(|k| t.records[k].direction[u] == Direction::Ill))
        .collect()
}

/// Random instance family for oracle campaigns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub instances: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub min_attack_edges: usize,
    pub max_attack_edges: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            instances: 500,
            min_nodes: 20,
            max_nodes: 200,
            min_attack_edges: 1,
            max_attack_edges: 10,
            seed: 0,
        }
    }
}

impl OracleConfig {
    /// Keys: `instances`, `min_nodes`, `max_nodes`, `min_attack_edges`,
    /// `max_attack_edges`, `seed`; all optional.
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let d = OracleConfig::default();
        let cfg = OracleConfig {
            instances: kv.take_or("instances", d.instances)?,
            min_nodes: kv.take_or("min_nodes", d.min_nodes)?,
            max_nodes: kv.take_or("max_nodes", d.max_nodes)?,
            min_attack_edges: kv.take_or("min_attack_edges", d.min_attack_edges)?,
            max_attack_edges: kv.take_or("max_attack_edges", d.max_attack_edges)?,
            seed: kv.take_or("seed", d.seed)?,
        };
        kv.finish()?;
        ensure!(
            cfg.min_nodes >= 3 && cfg.min_nodes <= cfg.max_nodes,
            "need 3 <= min_nodes <= max_nodes"
        );
        ensure!(
            cfg.min_attack_edges >= 1 && cfg.min_attack_edges <= cfg.max_attack_edges,
            "need 1 <= min_attack_edges <= max_attack_edges"
        );
        Ok(cfg)
    }
}

/// Which generator produced an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    ErdosRenyi,
    PreferentialAttachment,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub graph: Graph,
    pub family: Family,
    pub attack_edges: usize,
    pub seed: u64,
}

/// Instance `i`: even indices are sparse random graphs (largest component,
/// regenerated until it has at least `min_nodes` nodes), odd indices are
/// preferential-attachment graphs with one to three edges per new node.
pub fn instance(cfg: &OracleConfig, i: usize) -> Result<Instance> {
    let seed = mix_seed(cfg.seed, i as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(cfg.min_nodes..=cfg.max_nodes);
    let g = rng.random_range(cfg.min_attack_edges..=cfg.max_attack_edges);
    let (graph, family) = if i % 2 == 0 {
        let mut attempt = 0u64;
        loop {
            let mean_degree = rng.random_range(3..=8) as u64;
            let m = (n as u64 * mean_degree / 2).min(n as u64 * (n as u64 - 1) / 2);
            let (lcc, _) = erdos_renyi(n, m, mix_seed(seed, 100 + attempt))?.largest_component();
            if lcc.node_count() >= cfg.min_nodes {
                break (lcc, Family::ErdosRenyi);
            }
            attempt += 1;
        }
    } else {
        let k = rng.random_range(1..=3usize).min(n - 1);
        (
            preferential_attachment(n, k, mix_seed(seed, 100))?,
            Family::PreferentialAttachment,
        )
    };
    let attack_edges = g.min(graph.node_count());
    Ok(Instance {
        graph,
        family,
        attack_edges,
        seed,
    })
}

/// Checks every instance of `cfg` in parallel; reports are in instance order.
pub fn run_oracle(cfg: &OracleConfig) -> Result<Vec<InstanceReport>> {
    (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = instance(cfg, i)?;
            check_instance(&inst.graph, inst.attack_edges, inst.seed)
        })
        .collect()
}

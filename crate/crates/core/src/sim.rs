//! Round-based simulator.
//!
//! Registers are double-buffered: in lock-step mode every honest node reads
//! the registers of the previous round and all writes become visible at the
//! next round. A rushing adversary additionally sees the current round's
//! honest writes before writing its own. Time advances by one round duration
//! `delta_d + delta_e` per round; round `k` runs at `start_time + k * round`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use crate::adversary::{adversary_step, AdversaryState, Behavior, Bundle};
use crate::attestation::{
    is_consistent_under, AttTuple, ConsistencyRule, KeyDirectory, LevelAttestation, LinkSignature,
    Nid, Timestamp, Timing, ValidityContext,
};
use crate::crypto::{level_message, link_message, KeyPair, PublicKey, Scheme};
use crate::graph::{bfs_distances, Graph, UNREACHABLE};
use crate::protocol::{
    accepts, clean_outputs, init_node, random_nid, step, ArbitrarySource, InitMode, Level,
    NodeState, ProtocolKind, RegisterContent, StepContext,
};
use crate::{mix_seed, Error, Result, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitKind {
    /// Every node starts as an orphan with empty offers.
    Clean,
    /// Arbitrary node and register content, with stale attestations whose
    /// timestamps do not exceed `start_time + delta_c`.
    Adversarial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    LockStep,
    /// Nodes run one after another in a fresh random order each round and
    /// see the writes of nodes that ran before them.
    RandomSequential,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    pub behavior: Option<Behavior>,
    pub root: usize,
    pub timing: Timing,
    pub init: InitKind,
    pub max_rounds: u32,
    /// Rounds without any change after which a run counts as stable.
    pub window: u32,
    pub stop_when_stable: bool,
    pub seed: u64,
    pub scheme: Scheme,
    pub schedule: Schedule,
    /// Give every node a fixed clock offset in `0..=delta_c`.
    pub clock_jitter: bool,
    pub start_time: Timestamp,
}

impl RunConfig {
    pub fn new(protocol: ProtocolKind, behavior: Option<Behavior>, root: usize) -> Self {
        RunConfig {
            protocol,
            behavior,
            root,
            timing: Timing::default(),
            init: InitKind::Clean,
            max_rounds: 200,
            window: 20,
            stop_when_stable: true,
            seed: 0,
            scheme: Scheme::Model,
            schedule: Schedule::LockStep,
            clock_jitter: false,
            start_time: 1_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// The parent chain reaches the root.
    Well,
    /// The parent chain reaches the malicious node.
    Ill,
    /// The node or some node on its parent chain is not legitimate, or the
    /// chain loops.
    Unsettled,
}

/// Pid code for keys outside the directory.
pub const FOREIGN_PID: u32 = u32::MAX;

/// Per-round observation of the honest nodes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundRecord {
    pub round: u32,
    pub now: Timestamp,
    pub level: Vec<Level>,
    /// Owner of the parent identifier, or [`FOREIGN_PID`].
    pub pid: Vec<u32>,
    pub direction: Vec<Direction>,
    pub legitimate: Vec<bool>,
}

impl RoundRecord {
    pub fn node_count(&self) -> usize {
        self.level.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    /// Record `k` describes the configuration after round `k`; record 0 is
    /// the initial configuration.
    pub records: Vec<RoundRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> &RoundRecord {
        self.records.last().expect("trace holds the initial record")
    }

    /// Whether node `u` changed its level or parent identifier in round `k`.
    pub fn changed(&self, k: usize, u: usize) -> bool {
        let (a, b) = (&self.records[k - 1], &self.records[k]);
        a.level[u] != b.level[u] || a.pid[u] != b.pid[u]
    }

    /// Number of rounds after `from` in which some node outside `set`
    /// changed its level or parent identifier.
    pub fn count_disturbances(&self, set: &[bool], from: usize) -> usize {
        (from + 1..self.len())
            .filter(|&k| (0..set.len()).any(|u| !set[u] && self.changed(k, u)))
            .count()
    }

    /// Whether no candidate changed during records `from..=to`.
    pub fn detect_stable(&self, candidates: &[bool], from: usize, to: usize) -> bool {
        (from + 1..=to)
            .all(|k| (0..candidates.len()).all(|u| !candidates[u] || !self.changed(k, u)))
    }

    /// First record from which every node in `set` stays legitimate and
    /// unchanged until the end of the trace. The record itself may differ
    /// from its predecessor.
    pub fn settled_from(&self, set: &[bool]) -> Option<usize> {
        let legit = |k: usize| (0..set.len()).all(|u| !set[u] || self.records[k].legitimate[u]);
        let quiet = |k: usize| (0..set.len()).all(|u| !set[u] || !self.changed(k, u));
        let mut k = self.len().checked_sub(1)?;
        if !legit(k) {
            return None;
        }
        while k > 0 && quiet(k) && legit(k - 1) {
            k -= 1;
        }
        Some(k)
    }
}

/// Complete simulator state between rounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub round: u32,
    pub now: Timestamp,
    /// Honest node states, by node index.
    pub states: Vec<NodeState>,
    /// Register content by directed slot.
    pub registers: Vec<RegisterContent>,
    pub adversary: Option<AdversaryState>,
}

/// Static part of a run.
#[derive(Clone, Debug)]
pub struct World<'g> {
    pub graph: &'g Graph,
    pub honest: usize,
    pub adversary: Option<usize>,
    pub root: usize,
    pub keys: Vec<Arc<KeyPair>>,
    pub directory: KeyDirectory,
    pub cfg: RunConfig,
    pub skew: Vec<u64>,
}

impl World<'_> {
    pub fn root_id(&self) -> PublicKey {
        *self.keys[self.root].public()
    }

    pub fn is_adversary(&self, u: usize) -> bool {
        self.adversary == Some(u)
    }

    fn ctx(&self, u: usize, now: Timestamp) -> StepContext {
        StepContext {
            now: now + self.skew[u],
            timing: self.cfg.timing,
            root_id: self.root_id(),
            protocol: self.cfg.protocol,
        }
    }
}

/// Where an inconsistent attestation was found.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Holder {
    /// The adopted attestation of a node.
    Node(usize),
    /// A register, by directed slot.
    Register(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Inconsistency {
    pub holder: Holder,
    pub reader: usize,
    pub len: usize,
    /// Time at which the attestation was checked.
    pub at: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub trace: Trace,
    pub rounds: u32,
    pub stopped_early: bool,
    pub final_configuration: Configuration,
}

pub struct Simulation<'g> {
    world: World<'g>,
    config: Configuration,
    spare: Vec<RegisterContent>,
    trace: Trace,
    rng: SimRng,
}

const STREAM_KEYS: u64 = 1;
const STREAM_INIT: u64 = 2;
const STREAM_SCHEDULE: u64 = 3;

impl<'g> Simulation<'g> {
    /// Sets up a run on `graph`. If present, the adversary must be the last
    /// node; all other nodes are honest.
    pub fn new(graph: &'g Graph, adversary: Option<usize>, cfg: RunConfig) -> Result<Self> {
        let n = graph.node_count();
        if let Some(m) = adversary {
            if m + 1 != n {
                return Err(Error::AdversaryNotLast);
            }
        }
        if cfg.behavior.is_some() && adversary.is_none() {
            return Err(Error::InvalidParameter(
                "a behaviour needs an adversary node",
            ));
        }
        let honest = n - adversary.map_or(0, |_| 1);
        if honest == 0 {
            return Err(Error::NoHonestNodes);
        }
        if cfg.root >= honest {
            return Err(Error::InvalidRoot(cfg.root));
        }
        let dist = bfs_distances(graph, &[cfg.root])?;
        if let Some(u) = (0..honest).find(|&u| dist[u] == UNREACHABLE) {
            return Err(Error::Unreachable(u));
        }
        let eccentricity = dist
            .iter()
            .copied()
            .filter(|&d| d != UNREACHABLE)
            .max()
            .unwrap_or(0);
        if cfg.max_rounds <= eccentricity {
            return Err(Error::TooFewRounds {
                max_rounds: cfg.max_rounds,
                eccentricity,
            });
        }

        let key_seed = mix_seed(cfg.seed, STREAM_KEYS);
        let keys: Vec<Arc<KeyPair>> = (0..n)
            .map(|u| Arc::new(KeyPair::generate(cfg.scheme, mix_seed(key_seed, u as u64))))
            .collect();
        let directory = KeyDirectory::new(keys.iter().map(|k| k.public()));
        let mut rng = SimRng::seed_from_u64(mix_seed(cfg.seed, STREAM_INIT));
        let skew = (0..n)
            .map(|_| {
                if cfg.clock_jitter {
                    rng.random_range(0..=cfg.timing.delta_c)
                } else {
                    0
                }
            })
            .collect();
        let schedule_seed = mix_seed(cfg.seed, STREAM_SCHEDULE);
        let world = World {
            graph,
            honest,
            adversary,
            root: cfg.root,
            keys,
            directory,
            cfg,
            skew,
        };
        let config = match world.cfg.init {
            InitKind::Clean => clean_configuration(&world, &mut rng),
            InitKind::Adversarial => arbitrary_configuration(&world, &mut rng),
        };
        let mut sim = Simulation {
            spare: config.registers.clone(),
            world,
            config,
            trace: Trace::default(),
            rng: SimRng::seed_from_u64(schedule_seed),
        };
        let record = sim.observe();
        sim.trace.records.push(record);
        Ok(sim)
    }

    pub fn world(&self) -> &World<'g> {
        &self.world
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    fn inputs_of<'a>(
        graph: &Graph,
        registers: &'a [RegisterContent],
        u: usize,
    ) -> Vec<&'a RegisterContent> {
        (0..graph.degree(u))
            .map(|k| &registers[graph.reverse_slot(graph.slot(u, k))])
            .collect()
    }

    /// Executes one round.
    pub fn step(&mut self) {
        let graph = self.world.graph;
        let round = self.config.round + 1;
        let now = self.world.cfg.start_time + round as u64 * self.world.cfg.timing.round();
        let rushing = self
            .config
            .adversary
            .as_ref()
            .is_some_and(|a| a.behavior.is_rushing());

        match self.world.cfg.schedule {
            Schedule::LockStep => {
                for u in 0..self.world.honest {
                    let inputs = Self::inputs_of(graph, &self.config.registers, u);
                    let (next, outputs) =
                        step(&self.config.states[u], &inputs, &self.world.ctx(u, now));
                    self.config.states[u] = next;
                    for (k, out) in outputs.into_iter().enumerate() {
                        self.spare[graph.slot(u, k)] = out;
                    }
                }
                if !rushing {
                    self.adversary_round(now, false);
                }
                core::mem::swap(&mut self.config.registers, &mut self.spare);
                if rushing {
                    self.adversary_round(now, true);
                }
            }
            Schedule::RandomSequential => {
                let mut order: Vec<usize> = (0..self.world.honest).collect();
                if !rushing {
                    order.extend(self.world.adversary);
                }
                order.shuffle(&mut self.rng);
                for u in order {
                    if self.world.is_adversary(u) {
                        self.adversary_round(now, true);
                        continue;
                    }
                    let inputs = Self::inputs_of(graph, &self.config.registers, u);
                    let (next, outputs) =
                        step(&self.config.states[u], &inputs, &self.world.ctx(u, now));
                    self.config.states[u] = next;
                    for (k, out) in outputs.into_iter().enumerate() {
                        self.config.registers[graph.slot(u, k)] = out;
                    }
                }
                if rushing {
                    self.adversary_round(now, true);
                }
            }
        }
        self.config.round = round;
        self.config.now = now;
        let record = self.observe();
        self.trace.records.push(record);
    }

    /// Runs the adversary. With `in_place` the adversary reads and writes
    /// the live registers, otherwise it reads the live registers and writes
    /// the buffer of the next round.
    fn adversary_round(&mut self, now: Timestamp, in_place: bool) {
        let (Some(m), Some(state)) = (self.world.adversary, self.config.adversary.as_ref()) else {
            return;
        };
        let graph = self.world.graph;
        let inputs = Self::inputs_of(graph, &self.config.registers, m);
        let (next, outputs) = adversary_step(state, &inputs, &self.world.ctx(m, now));
        self.config.adversary = Some(next);
        let target = if in_place {
            &mut self.config.registers
        } else {
            &mut self.spare
        };
        for (k, out) in outputs.into_iter().enumerate() {
            target[graph.slot(m, k)] = out;
        }
    }

    /// Runs until `max_rounds`, or until no honest node changed for
    /// `window` rounds when early stopping is enabled.
    pub fn run(mut self) -> RunOutcome {
        let stopped_early = self.advance();
        self.into_outcome(stopped_early)
    }

    /// Steps like [`run`](Self::run) but keeps the simulation for
    /// inspection. Returns whether it stopped before `max_rounds`.
    pub fn advance(&mut self) -> bool {
        while self.config.round < self.world.cfg.max_rounds {
            self.step();
            if self.world.cfg.stop_when_stable && self.quiet_for(self.world.cfg.window as usize) {
                return self.config.round < self.world.cfg.max_rounds;
            }
        }
        false
    }

    pub fn into_outcome(self, stopped_early: bool) -> RunOutcome {
        RunOutcome {
            rounds: self.config.round,
            stopped_early,
            trace: self.trace,
            final_configuration: self.config,
        }
    }

    fn quiet_for(&self, window: usize) -> bool {
        let len = self.trace.len();
        if window == 0 || len <= window {
            return false;
        }
        let all = vec![true; self.world.honest];
        self.trace.detect_stable(&all, len - 1 - window, len - 1)
    }

    /// Level and identifier of neighbour `k` of honest node `u`, as the
    /// legitimacy predicate sees them. For a non-faithful adversary this is
    /// what its register offers `u`, or infinity if `u` would reject it.
    pub fn effective_offer(&self, u: usize, k: usize) -> (Level, PublicKey) {
        let graph = self.world.graph;
        let v = graph.neighbor(u, k);
        if !self.world.is_adversary(v) {
            return (self.config.states[v].level, *self.world.keys[v].public());
        }
        let adv = self.config.adversary.as_ref().expect("adversary state");
        if let Some(own) = &adv.own {
            return (own.level, *adv.id());
        }
        let reg = &self.config.registers[graph.reverse_slot(graph.slot(u, k))];
        let read_at = self.config.now + self.world.cfg.timing.round();
        let ok = accepts(&self.config.states[u], k, reg, &self.world.ctx(u, read_at));
        (if ok { reg.level } else { Level::INF }, reg.id)
    }

    /// Legitimate state: the root has level 0 and itself as parent; any other
    /// node has level one above its minimal neighbour and one of those
    /// minimal neighbours as parent.
    pub fn detect_legitimate(&self, u: usize) -> bool {
        let s = &self.config.states[u];
        if u == self.world.root {
            return s.level == Level::ZERO && s.pid == *s.id();
        }
        let deg = self.world.graph.degree(u);
        let offers: Vec<(Level, PublicKey)> =
            (0..deg).map(|k| self.effective_offer(u, k)).collect();
        let Some(min) = offers.iter().map(|o| o.0).min().filter(|l| l.is_finite()) else {
            return false;
        };
        s.level == min.succ()
            && s.pid != *s.id()
            && offers.iter().any(|o| o.0 == min && o.1 == s.pid)
    }

    fn observe(&self) -> RoundRecord {
        let h = self.world.honest;
        let legitimate: Vec<bool> = (0..h).map(|u| self.detect_legitimate(u)).collect();
        let direction = self.directions(&legitimate);
        RoundRecord {
            round: self.config.round,
            now: self.config.now,
            level: self.config.states.iter().map(|s| s.level).collect(),
            pid: self
                .config
                .states
                .iter()
                .map(|s| {
                    self.world
                        .directory
                        .node_of(&s.pid)
                        .map_or(FOREIGN_PID, |v| v as u32)
                })
                .collect(),
            direction,
            legitimate,
        }
    }

    /// Follows parent indices from every honest node.
    fn directions(&self, legitimate: &[bool]) -> Vec<Direction> {
        let graph = self.world.graph;
        let h = self.world.honest;
        let mut memo: Vec<Option<Direction>> = vec![None; h];
        let mut on_path = vec![false; h];
        let mut path = Vec::new();
        for start in 0..h {
            let mut cur = start;
            let result = loop {
                if self.world.is_adversary(cur) {
                    break Direction::Ill;
                }
                if let Some(d) = memo[cur] {
                    break d;
                }
                if !legitimate[cur] || on_path[cur] {
                    break Direction::Unsettled;
                }
                if cur == self.world.root {
                    break Direction::Well;
                }
                let p = self.config.states[cur].prnt;
                if p >= graph.degree(cur) {
                    break Direction::Unsettled;
                }
                on_path[cur] = true;
                path.push(cur);
                cur = graph.neighbor(cur, p);
            };
            if cur == self.world.root && result == Direction::Well {
                memo[cur] = Some(Direction::Well);
            }
            for x in path.drain(..) {
                on_path[x] = false;
                memo[x] = Some(result);
            }
            if memo[start].is_none() {
                memo[start] = Some(result);
            }
        }
        memo.into_iter()
            .map(|d| d.expect("every node resolved"))
            .collect()
    }

    /// Inconsistent attestations currently held by honest nodes or waiting
    /// in registers for honest readers. Adopted attestations are checked at
    /// the current time, registers at the time they will be read.
    pub fn inconsistencies(&self) -> Vec<Inconsistency> {
        self.inconsistencies_under(ConsistencyRule::Strict)
    }

    pub fn inconsistencies_under(&self, rule: ConsistencyRule) -> Vec<Inconsistency> {
        let w = &self.world;
        let graph = w.graph;
        let malicious: Vec<usize> = w.adversary.into_iter().collect();
        let mut found = Vec::new();
        let check = |att: &LevelAttestation, reader: usize, at: Timestamp| {
            let ctx = ValidityContext {
                root_id: w.root_id(),
                now: at + w.skew[reader],
                timing: w.cfg.timing,
            };
            is_consistent_under(
                rule,
                att,
                graph,
                &w.directory,
                reader,
                w.keys[reader].public(),
                &malicious,
                &ctx,
            )
        };
        let next = self.config.now + w.cfg.timing.round();
        for u in 0..w.honest {
            let att = &self.config.states[u].level_att;
            if !att.is_empty() && !check(att, u, self.config.now) {
                found.push(Inconsistency {
                    holder: Holder::Node(u),
                    reader: u,
                    len: att.len(),
                    at: self.config.now,
                });
            }
            for k in 0..graph.degree(u) {
                let slot = graph.reverse_slot(graph.slot(u, k));
                let att = &self.config.registers[slot].att;
                if !att.is_empty() && !check(att, u, next) {
                    found.push(Inconsistency {
                        holder: Holder::Register(slot),
                        reader: u,
                        len: att.len(),
                        at: next,
                    });
                }
            }
        }
        found
    }
}

/// Runs a whole simulation.
pub fn run(graph: &Graph, adversary: Option<usize>, cfg: RunConfig) -> Result<RunOutcome> {
    Ok(Simulation::new(graph, adversary, cfg)?.run())
}

fn clean_configuration(w: &World<'_>, rng: &mut SimRng) -> Configuration {
    let graph = w.graph;
    let states: Vec<NodeState> = (0..w.honest)
        .map(|u| {
            init_node(
                w.keys[u].clone(),
                u == w.root,
                graph.degree(u),
                rng,
                InitMode::Clean,
            )
        })
        .collect();
    let mut registers =
        vec![RegisterContent::orphan(w.root_id(), Nid::default()); graph.slot_count()];
    for (u, s) in states.iter().enumerate() {
        for (k, r) in clean_outputs(s).into_iter().enumerate() {
            registers[graph.slot(u, k)] = r;
        }
    }
    let adversary = adversary_state(w, rng, None);
    if let (Some(m), Some(a)) = (w.adversary, &adversary) {
        for (k, r) in a.initial_outputs().into_iter().enumerate() {
            registers[graph.slot(m, k)] = r;
        }
    }
    Configuration {
        round: 0,
        now: w.cfg.start_time,
        states,
        registers,
        adversary,
    }
}

fn adversary_state(
    w: &World<'_>,
    rng: &mut SimRng,
    forge: Option<&mut Forge<'_>>,
) -> Option<AdversaryState> {
    let m = w.adversary?;
    let degree = w.graph.degree(m);
    let keys = w.keys[m].clone();
    let behavior = w.cfg.behavior?;
    let mode = match forge {
        Some(f) => InitMode::Arbitrary {
            max_level: w.honest as u32,
            source: f,
        },
        None => InitMode::Clean,
    };
    Some(AdversaryState::new(
        m,
        behavior,
        w.cfg.protocol,
        keys,
        degree,
        rng,
        mode,
    ))
}

/// Source of stale material for adversarial starts. Attestations are signed
/// by honest keys along random sequences, so they may or may not follow
/// graph edges, and carry timestamps up to `start_time + delta_c`.
struct Forge<'a> {
    world: &'a World<'a>,
    max_len: usize,
}

impl Forge<'_> {
    fn latest(&self) -> Timestamp {
        self.world.cfg.start_time + self.world.cfg.timing.delta_c
    }

    fn stamp(&self, rng: &mut SimRng) -> Timestamp {
        let t = &self.world.cfg.timing;
        let span = t.delta_c + t.round() * (self.max_len as u64 + 1);
        let hi = self.latest();
        rng.random_range(hi.saturating_sub(span)..=hi)
    }

    fn signer(&self, rng: &mut SimRng, prev: Option<usize>) -> usize {
        let g = self.world.graph;
        match prev {
            // Mostly follow an edge so that some material is consistent.
            Some(p) if rng.random_bool(0.6) && g.degree(p) > 0 => {
                let v = g.neighbor(p, rng.random_range(0..g.degree(p)));
                if self.world.is_adversary(v) {
                    p
                } else {
                    v
                }
            }
            _ => rng.random_range(0..self.world.honest),
        }
    }

    /// A stale attestation addressed to `reader` (most of the time) and the
    /// index of its last signer.
    fn make(&mut self, rng: &mut SimRng, reader: &PublicKey) -> (LevelAttestation, usize) {
        let len = rng.random_range(1..=self.max_len);
        let mut path = Vec::with_capacity(len);
        let first = if rng.random_bool(0.9) {
            self.world.root
        } else {
            self.signer(rng, None)
        };
        path.push(first);
        while path.len() < len {
            let next = self.signer(rng, path.last().copied());
            path.push(next);
        }
        let mut att = LevelAttestation::nil();
        for (i, &p) in path.iter().enumerate() {
            let target = match path.get(i + 1) {
                Some(&q) => *self.world.keys[q].public(),
                None if rng.random_bool(0.8) => *reader,
                None => *self.world.keys[rng.random_range(0..self.world.honest)].public(),
            };
            let ts = self.stamp(rng);
            let signed = if rng.random_bool(0.95) {
                target
            } else {
                *self.world.keys[p].public()
            };
            let sig = self.world.keys[p].sign(&level_message(&signed, ts));
            att = att.push(AttTuple {
                key: *self.world.keys[p].public(),
                ts,
                sig,
            });
        }
        (att, *path.last().expect("non-empty"))
    }

    /// A full register offer for `reader`, link-signed for `nid` most of the time.
    fn offer(
        &mut self,
        rng: &mut SimRng,
        writer_id: PublicKey,
        reader: &PublicKey,
        nid: Nid,
    ) -> RegisterContent {
        let (att, last) = self.make(rng, reader);
        let level = if rng.random_bool(0.8) {
            Level::finite(att.len() as u32 - 1)
        } else {
            Level::finite(rng.random_range(0..=self.world.honest as u32))
        };
        let link = rng.random_bool(0.8).then(|| {
            let bound = if rng.random_bool(0.9) {
                nid
            } else {
                random_nid(rng)
            };
            LinkSignature(self.world.keys[last].sign(&link_message(&bound.0, &att.digest())))
        });
        RegisterContent {
            id: writer_id,
            level,
            att,
            nid: random_nid(rng),
            link,
        }
    }
}

impl ArbitrarySource for Forge<'_> {
    fn attestation(&mut self, rng: &mut SimRng, reader: &PublicKey) -> LevelAttestation {
        if rng.random_bool(0.2) {
            return LevelAttestation::nil();
        }
        self.make(rng, reader).0
    }

    fn key(&mut self, rng: &mut SimRng) -> PublicKey {
        if rng.random_bool(0.8) {
            *self.world.keys[rng.random_range(0..self.world.honest)].public()
        } else {
            PublicKey::unowned(self.world.cfg.scheme, rng.random())
        }
    }
}

fn arbitrary_configuration(w: &World<'_>, rng: &mut SimRng) -> Configuration {
    let graph = w.graph;
    let max_len = crate::graph::eccentricity(graph, w.root).max(1) as usize;
    let mut forge = Forge { world: w, max_len };
    let states: Vec<NodeState> = (0..w.honest)
        .map(|u| {
            let mode = InitMode::Arbitrary {
                max_level: w.honest as u32,
                source: &mut forge,
            };
            init_node(w.keys[u].clone(), u == w.root, graph.degree(u), rng, mode)
        })
        .collect();
    let mut adversary = adversary_state(w, rng, Some(&mut forge));
    let nid_for = |reader: usize, k: usize, adv: &Option<AdversaryState>| -> Nid {
        if w.is_adversary(reader) {
            adv.as_ref().expect("adversary state").nids[k]
        } else {
            states[reader].nids[k]
        }
    };
    let mut registers =
        vec![RegisterContent::orphan(w.root_id(), Nid::default()); graph.slot_count()];
    for u in 0..graph.node_count() {
        for k in 0..graph.degree(u) {
            let slot = graph.slot(u, k);
            let reader = graph.neighbor(u, k);
            let back = graph.reverse_slot(slot) - graph.slot(reader, 0);
            let nid = nid_for(reader, back, &adversary);
            let writer_id = if rng.random_bool(0.8) {
                *w.keys[u].public()
            } else {
                forge.key(rng)
            };
            registers[slot] = if rng.random_bool(0.15) {
                RegisterContent::orphan(writer_id, random_nid(rng))
            } else {
                forge.offer(rng, writer_id, w.keys[reader].public(), nid)
            };
        }
    }
    // Stale material the adversary may replay, bound to its neighbours.
    if let (Some(m), Some(adv)) = (w.adversary, adversary.as_mut()) {
        for k in 0..graph.degree(m) {
            let victim = graph.neighbor(m, k);
            if !rng.random_bool(0.5) {
                continue;
            }
            let nid =
                states[victim].nids[graph.reverse_slot(graph.slot(m, k)) - graph.slot(victim, 0)];
            let (att, last) = forge.make(rng, w.keys[victim].public());
            let link = LinkSignature(w.keys[last].sign(&link_message(&nid.0, &att.digest())));
            adv.stock[k] = Some(Bundle {
                relay_id: *w.keys[last].public(),
                att,
                link,
            });
        }
    }
    Configuration {
        round: 0,
        now: w.cfg.start_time,
        states,
        registers,
        adversary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap().0
    }

    #[test]
    fn clean_path_converges_in_eccentricity_plus_one() {
        let g = path(5);
        let mut sim =
            Simulation::new(&g, None, RunConfig::new(ProtocolKind::Attested, None, 0)).unwrap();
        for _ in 0..5 {
            sim.step();
        }
        let t = sim.trace();
        assert!(t.records[5].legitimate.iter().all(|&l| l));
        assert!(!t.records[4].legitimate[4]);
        assert_eq!(
            t.records[5].level,
            (0..5).map(Level::finite).collect::<Vec<_>>()
        );
        assert!(t.records[5].direction.iter().all(|&d| d == Direction::Well));
    }

    #[test]
    fn rejects_bad_setups() {
        let g = path(3);
        let cfg = RunConfig::new(ProtocolKind::Attested, None, 5);
        assert_eq!(
            Simulation::new(&g, None, cfg).err(),
            Some(Error::InvalidRoot(5))
        );
        let cfg = RunConfig {
            max_rounds: 2,
            ..RunConfig::new(ProtocolKind::Attested, None, 0)
        };
        assert!(matches!(
            Simulation::new(&g, None, cfg).err(),
            Some(Error::TooFewRounds { .. })
        ));
        let cfg = RunConfig::new(ProtocolKind::Attested, Some(Behavior::CheatMinLevel), 0);
        assert_eq!(
            Simulation::new(&g, Some(1), cfg).err(),
            Some(Error::AdversaryNotLast)
        );
        let (split, _) = Graph::from_edges(3, [(0, 1)]).unwrap();
        let cfg = RunConfig::new(ProtocolKind::Attested, None, 0);
        assert_eq!(
            Simulation::new(&split, None, cfg).err(),
            Some(Error::Unreachable(2))
        );
    }

    #[test]
    fn runs_are_reproducible() {
        let g = crate::graph::erdos_renyi(30, 60, 3)
            .unwrap()
            .largest_component()
            .0;
        let (s, m) = crate::adversary::place_attack_edges(&g, g.node_count(), 3, 4).unwrap();
        let mut cfg = RunConfig::new(ProtocolKind::Attested, Some(Behavior::Disturb), 0);
        cfg.init = InitKind::Adversarial;
        cfg.max_rounds = 40;
        let a = run(&s, Some(m), cfg.clone()).unwrap();
        let b = run(&s, Some(m), cfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_configuration, b.final_configuration);
    }
}

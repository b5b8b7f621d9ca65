//! Per-node protocol step.
//!
//! Every node repeatedly reads the registers its neighbours wrote for it,
//! keeps the neighbours whose offers check out, picks a parent among those
//! with minimal level and writes a fresh offer into each outgoing register.
//! The attested protocol backs each offer with a level attestation; the
//! baseline trusts the advertised level.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::attestation::{
    extend, is_valid_att, is_valid_link, LevelAttestation, LinkSignature, Nid, Timestamp, Timing,
    ValidityContext,
};
use crate::crypto::{KeyPair, PublicKey};
use crate::{Error, Result, SimRng};

/// A hop count, or infinity for nodes without a valid offer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Level(u32);

impl Level {
    pub const INF: Level = Level(u32::MAX);
    pub const ZERO: Level = Level(0);

    pub fn finite(v: u32) -> Level {
        assert!(v != u32::MAX, "level overflow");
        Level(v)
    }

    pub fn is_finite(self) -> bool {
        self != Self::INF
    }

    pub fn value(self) -> Option<u32> {
        self.is_finite().then_some(self.0)
    }

    /// `self + 1`, saturating at infinity.
    pub fn succ(self) -> Level {
        Level(self.0.saturating_add(1))
    }

    pub fn raw(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "inf"),
        }
    }
}

impl fmt::Debug for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProtocolKind {
    Attested,
    Baseline,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 2] = [ProtocolKind::Attested, ProtocolKind::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Attested => "attested",
            ProtocolKind::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolKind> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Content of the register written by one node for one neighbour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterContent {
    pub id: PublicKey,
    pub level: Level,
    pub att: LevelAttestation,
    /// Identifier the writer assigned to the reader.
    pub nid: Nid,
    pub link: Option<LinkSignature>,
}

impl RegisterContent {
    /// An offer nobody accepts.
    pub fn orphan(id: PublicKey, nid: Nid) -> Self {
        RegisterContent {
            id,
            level: Level::INF,
            att: LevelAttestation::nil(),
            nid,
            link: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    pub keys: Arc<KeyPair>,
    pub is_root: bool,
    pub level: Level,
    pub pid: PublicKey,
    /// Index of the parent in the neighbour list.
    pub prnt: usize,
    pub i_start: usize,
    pub level_att: LevelAttestation,
    /// Identifier assigned to each neighbour, by neighbour index.
    pub nids: Vec<Nid>,
}

impl NodeState {
    pub fn id(&self) -> &PublicKey {
        self.keys.public()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepContext {
    pub now: Timestamp,
    pub timing: Timing,
    pub root_id: PublicKey,
    pub protocol: ProtocolKind,
}

impl StepContext {
    pub fn validity(&self) -> ValidityContext {
        ValidityContext {
            root_id: self.root_id,
            now: self.now,
            timing: self.timing,
        }
    }
}

/// Cyclic order starting at `i_start`: `a` precedes `b` if `a` comes first
/// when neighbours are scanned from `i_start` upwards with wrap-around.
pub fn prec(a: usize, b: usize, i_start: usize) -> Result<bool> {
    if a == b {
        return Err(Error::Irreflexive(a));
    }
    Ok((i_start <= a && a < b) || (b < i_start && i_start <= a) || (a < b && b < i_start))
}

/// Whether the register offer of neighbour `i` is acceptable to the node.
pub fn accepts(state: &NodeState, i: usize, input: &RegisterContent, ctx: &StepContext) -> bool {
    let Some(l) = input.level.value() else {
        return false;
    };
    match ctx.protocol {
        ProtocolKind::Baseline => true,
        ProtocolKind::Attested => {
            let Some(link) = &input.link else {
                return false;
            };
            is_valid_att(&input.att, state.id(), &ctx.validity(), l as usize + 1)
                && is_valid_link(&input.att, &state.nids[i], link)
        }
    }
}

/// One loop iteration. `inputs[i]` is the register written for this node by
/// its `i`-th neighbour. Returns the new state and the register content for
/// every neighbour, in neighbour order.
pub fn step(
    state: &NodeState,
    inputs: &[&RegisterContent],
    ctx: &StepContext,
) -> (NodeState, Vec<RegisterContent>) {
    let deg = inputs.len();
    let mut s = state.clone();
    if deg > 0 {
        s.i_start %= deg;
    }
    if s.is_root {
        s.level = Level::ZERO;
        s.pid = *s.id();
        s.level_att = LevelAttestation::nil();
    } else {
        let valid: Vec<bool> = (0..deg)
            .map(|i| accepts(state, i, inputs[i], ctx))
            .collect();
        let min = (0..deg)
            .filter(|&i| valid[i])
            .map(|i| inputs[i].level)
            .min();
        match min {
            Some(min) if min.succ().is_finite() => {
                s.level = min.succ();
                let chosen = (0..deg)
                    .map(|k| (s.i_start + k) % deg)
                    .find(|&j| valid[j] && inputs[j].level == min)
                    .expect("a minimal valid neighbour exists");
                if chosen != s.prnt && prec(s.prnt, chosen, s.i_start).expect("distinct") {
                    s.i_start = chosen;
                }
                s.prnt = chosen;
                s.pid = inputs[chosen].id;
                s.level_att = inputs[chosen].att.clone();
            }
            _ => {
                s.level = Level::INF;
                s.pid = *s.id();
                s.level_att = LevelAttestation::nil();
            }
        }
    }
    let outputs = (0..deg).map(|i| offer(&s, i, inputs[i], ctx)).collect();
    (s, outputs)
}

fn offer(s: &NodeState, i: usize, input: &RegisterContent, ctx: &StepContext) -> RegisterContent {
    if !s.level.is_finite() {
        return RegisterContent::orphan(*s.id(), s.nids[i]);
    }
    match ctx.protocol {
        ProtocolKind::Baseline => RegisterContent {
            id: *s.id(),
            level: s.level,
            att: LevelAttestation::nil(),
            nid: s.nids[i],
            link: None,
        },
        ProtocolKind::Attested => {
            let (att, link) = extend(&s.level_att, &s.keys, &input.id, &input.nid, ctx.now);
            RegisterContent {
                id: *s.id(),
                level: s.level,
                att,
                nid: s.nids[i],
                link: Some(link),
            }
        }
    }
}

pub fn random_nid(rng: &mut SimRng) -> Nid {
    Nid(rng.random())
}

/// Supplier of arbitrary but well-typed values for adversarial initial states.
pub trait ArbitrarySource {
    fn attestation(&mut self, rng: &mut SimRng, reader: &PublicKey) -> LevelAttestation;
    fn key(&mut self, rng: &mut SimRng) -> PublicKey;
}

pub enum InitMode<'a> {
    /// Orphan state with fresh neighbour identifiers.
    Clean,
    /// Arbitrary levels up to `max_level`, parents, attestations and identifiers.
    Arbitrary {
        max_level: u32,
        source: &'a mut dyn ArbitrarySource,
    },
}

pub fn init_node(
    keys: Arc<KeyPair>,
    is_root: bool,
    degree: usize,
    rng: &mut SimRng,
    mode: InitMode<'_>,
) -> NodeState {
    let nids = (0..degree).map(|_| random_nid(rng)).collect();
    let id = *keys.public();
    match mode {
        InitMode::Clean => NodeState {
            keys,
            is_root,
            level: Level::INF,
            pid: id,
            prnt: 0,
            i_start: 0,
            level_att: LevelAttestation::nil(),
            nids,
        },
        InitMode::Arbitrary { max_level, source } => {
            let level = if rng.random_bool(0.1) {
                Level::INF
            } else {
                Level::finite(rng.random_range(0..=max_level))
            };
            let pid = if rng.random_bool(0.2) {
                id
            } else {
                source.key(rng)
            };
            let bound = degree.max(1);
            NodeState {
                keys,
                is_root,
                level,
                pid,
                prnt: rng.random_range(0..bound),
                i_start: rng.random_range(0..bound),
                level_att: source.attestation(rng, &id),
                nids,
            }
        }
    }
}

/// Registers a node writes before its first step in a clean start: its
/// identity and identifiers, no offer.
pub fn clean_outputs(state: &NodeState) -> Vec<RegisterContent> {
    state
        .nids
        .iter()
        .map(|nid| RegisterContent::orphan(*state.id(), *nid))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Scheme;
    use rand::SeedableRng;

    #[test]
    fn prec_cases() {
        assert_eq!(prec(1, 2, 0), Ok(true));
        assert_eq!(prec(3, 1, 2), Ok(true));
        assert_eq!(prec(1, 3, 2), Ok(false));
        assert_eq!(prec(0, 1, 2), Ok(true));
        assert_eq!(prec(2, 2, 0), Err(Error::Irreflexive(2)));
    }

    #[test]
    fn prec_is_strict_total_order() {
        for d in 1..7 {
            for s in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        if a == b {
                            continue;
                        }
                        assert_ne!(prec(a, b, s).unwrap(), prec(b, a, s).unwrap());
                        for c in 0..d {
                            if c != a && c != b && prec(a, b, s).unwrap() && prec(b, c, s).unwrap()
                            {
                                assert!(prec(a, c, s).unwrap());
                            }
                        }
                    }
                    if a != s {
                        assert!(prec(s, a, s).unwrap(), "i_start comes first");
                    }
                }
            }
        }
    }

    #[test]
    fn level_arithmetic() {
        assert!(!Level::INF.is_finite());
        assert_eq!(Level::INF.succ(), Level::INF);
        assert_eq!(Level::finite(2).succ(), Level::finite(3));
        assert!(Level::finite(5) < Level::INF);
    }

    fn node(seed: u64, degree: usize) -> NodeState {
        let mut rng = SimRng::seed_from_u64(seed);
        init_node(
            Arc::new(KeyPair::generate(Scheme::Model, seed)),
            false,
            degree,
            &mut rng,
            InitMode::Clean,
        )
    }

    fn baseline_offer(id: u64, level: u32) -> RegisterContent {
        RegisterContent {
            id: *KeyPair::generate(Scheme::Model, id).public(),
            level: Level::finite(level),
            att: LevelAttestation::nil(),
            nid: Nid::default(),
            link: None,
        }
    }

    fn ctx(protocol: ProtocolKind) -> StepContext {
        StepContext {
            now: 10,
            timing: Timing::default(),
            root_id: *KeyPair::generate(Scheme::Model, 1000).public(),
            protocol,
        }
    }

    #[test]
    fn keeps_first_minimal_parent_from_i_start() {
        let s = node(1, 2);
        let a = baseline_offer(10, 3);
        let b = baseline_offer(11, 3);
        let (s2, out) = step(&s, &[&a, &b], &ctx(ProtocolKind::Baseline));
        assert_eq!((s2.prnt, s2.i_start, s2.level), (0, 0, Level::finite(4)));
        assert_eq!(s2.pid, a.id);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].level, Level::finite(4));
    }

    #[test]
    fn switching_parent_moves_i_start() {
        let s = node(2, 3);
        let worse = baseline_offer(10, 5);
        let none = RegisterContent::orphan(baseline_offer(11, 0).id, Nid::default());
        let better = baseline_offer(12, 2);
        let (s2, _) = step(&s, &[&worse, &none, &better], &ctx(ProtocolKind::Baseline));
        assert_eq!((s2.prnt, s2.i_start), (2, 2));
        // A later tie at index 0 does not pull the parent back.
        let tie = baseline_offer(13, 2);
        let (s3, _) = step(&s2, &[&tie, &none, &better], &ctx(ProtocolKind::Baseline));
        assert_eq!((s3.prnt, s3.i_start), (2, 2));
    }

    #[test]
    fn orphan_without_valid_offers() {
        let s = node(3, 2);
        let a = RegisterContent::orphan(baseline_offer(10, 0).id, Nid::default());
        let (s2, out) = step(&s, &[&a, &a], &ctx(ProtocolKind::Baseline));
        assert_eq!(s2.level, Level::INF);
        assert_eq!(s2.pid, *s2.id());
        assert!(out.iter().all(|r| !r.level.is_finite() && r.att.is_empty()));
    }

    #[test]
    fn attested_rejects_unbacked_levels() {
        let s = node(4, 1);
        let a = baseline_offer(10, 0);
        let (s2, _) = step(&s, &[&a], &ctx(ProtocolKind::Attested));
        assert_eq!(s2.level, Level::INF);
    }

    #[test]
    fn root_and_child_attested() {
        let mut rng = SimRng::seed_from_u64(9);
        let rk = Arc::new(KeyPair::generate(Scheme::Model, 1000));
        let root = init_node(rk.clone(), true, 1, &mut rng, InitMode::Clean);
        let child = node(5, 1);
        let c = ctx(ProtocolKind::Attested);
        let to_root = clean_outputs(&child);
        let (root2, out) = step(&root, &[&to_root[0]], &c);
        assert_eq!(root2.level, Level::ZERO);
        assert_eq!(out[0].att.len(), 1);
        let (child2, _) = step(&child, &[&out[0]], &StepContext { now: 12, ..c });
        assert_eq!(child2.level, Level::finite(1));
        assert_eq!(child2.pid, *rk.public());
        assert_eq!(child2.level_att.len(), 1);
    }
}

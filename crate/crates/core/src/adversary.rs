//! The malicious node and its behaviours.
//!
//! The adversary owns one node `m`, appended to the honest graph with `g`
//! attack edges. It can write anything into its registers but can only sign
//! with its own key, so against the attested protocol the best it can do is
//! to forward attestations that honest neighbours produce.
//!
//! The relay trick: `m` shows a neighbour with minimal level (a relay) the
//! identity of another neighbour (a victim). The relay then writes an
//! attestation addressed to the victim into its register for `m`, which `m`
//! forwards verbatim. Every victim is assigned to one relay, each relay serves its victims round-robin, and harvested
//! material is replayed for as long as it stays fresh.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use crate::attestation::{
    is_valid_att, is_valid_link, LevelAttestation, LinkSignature, Nid, ValidityContext,
};
use crate::crypto::{KeyPair, PublicKey};
use crate::graph::Graph;
use crate::protocol::{
    self, init_node, random_nid, InitMode, Level, NodeState, ProtocolKind, RegisterContent,
    StepContext,
};
use crate::{Error, Result, SimRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    /// Alternate between the lowest level it can back and withdrawing.
    Disturb,
    /// Permanently offer the lowest level it can back.
    CheatMinLevel,
    /// Run the protocol faithfully with its own key.
    HonestMinLevel,
}

impl Behavior {
    pub const ALL: [Behavior; 3] = [
        Behavior::Disturb,
        Behavior::CheatMinLevel,
        Behavior::HonestMinLevel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Behavior::Disturb => "disturb",
            Behavior::CheatMinLevel => "cheat",
            Behavior::HonestMinLevel => "honest",
        }
    }

    pub fn parse(s: &str) -> Option<Behavior> {
        Self::ALL.into_iter().find(|b| b.name() == s)
    }

    /// Whether the adversary sees the honest writes of the current round
    /// before writing its own.
    pub fn is_rushing(self) -> bool {
        !matches!(self, Behavior::HonestMinLevel)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdversaryConfig {
    pub behavior: Behavior,
    pub attack_edges: usize,
    pub seed: u64,
}

/// Fenwick tree over integer weights, for sampling without replacement.
struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(weights: &[u64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0u64; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            let mut j = i + 1;
            while j <= n {
                tree[j] += w;
                j += j & j.wrapping_neg();
            }
        }
        Fenwick { tree }
    }

    fn sub(&mut self, i: usize, w: u64) {
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] -= w;
            j += j & j.wrapping_neg();
        }
    }

    /// Index whose cumulative weight range contains `target`.
    fn find(&self, mut target: u64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Attaches a new malicious node to `g` distinct nodes among the first
/// `honest_count`, chosen without replacement with probability proportional
/// to degree. Returns the extended graph and the malicious node index.
pub fn place_attack_edges(
    graph: &Graph,
    honest_count: usize,
    g: usize,
    seed: u64,
) -> Result<(Graph, usize)> {
    if honest_count > graph.node_count() {
        return Err(Error::NodeOutOfRange {
            node: honest_count,
            nodes: graph.node_count(),
        });
    }
    if g > honest_count {
        return Err(Error::NotEnoughNodes {
            requested: g,
            available: honest_count,
        });
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let mut weights: Vec<u64> = (0..honest_count).map(|u| graph.degree(u) as u64).collect();
    let mut fenwick = Fenwick::new(&weights);
    let mut total: u64 = weights.iter().sum();
    let mut remaining: Vec<usize> = (0..honest_count).collect();
    let mut taken = vec![false; honest_count];
    let mut picked = Vec::with_capacity(g);
    while picked.len() < g {
        let u = if total > 0 {
            fenwick.find(rng.random_range(0..total))
        } else {
            // Only weightless nodes are left: fall back to uniform choice.
            remaining.retain(|&v| !taken[v]);
            remaining[rng.random_range(0..remaining.len())]
        };
        taken[u] = true;
        fenwick.sub(u, weights[u]);
        total -= weights[u];
        weights[u] = 0;
        picked.push(u);
    }
    picked.sort_unstable();
    let m = graph.node_count();
    Ok((graph.with_extra_node(&picked)?, m))
}

/// Forwardable material bound to one victim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bundle {
    pub relay_id: PublicKey,
    pub att: LevelAttestation,
    pub link: LinkSignature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdversaryState {
    pub node: usize,
    pub behavior: Behavior,
    pub protocol: ProtocolKind,
    pub keys: Arc<KeyPair>,
    /// Protocol state when running faithfully.
    pub own: Option<NodeState>,
    /// Victim shown to each neighbour in the previous round.
    pub presented: Vec<Option<usize>>,
    /// Best harvested material per victim.
    pub stock: Vec<Option<Bundle>>,
    /// Rotation position of each relay over its victims.
    pub cursors: Vec<usize>,
    pub round: u64,
    pub nids: Vec<Nid>,
}

impl AdversaryState {
    pub fn new(
        node: usize,
        behavior: Behavior,
        protocol: ProtocolKind,
        keys: Arc<KeyPair>,
        degree: usize,
        rng: &mut SimRng,
        mode: InitMode<'_>,
    ) -> Self {
        let nids: Vec<Nid> = (0..degree).map(|_| random_nid(rng)).collect();
        let own = (behavior == Behavior::HonestMinLevel).then(|| {
            let mut s = init_node(keys.clone(), false, degree, rng, mode);
            s.nids = nids.clone();
            s
        });
        AdversaryState {
            node,
            behavior,
            protocol,
            keys,
            own,
            presented: vec![None; degree],
            stock: vec![None; degree],
            cursors: vec![0; degree],
            round: 0,
            nids,
        }
    }

    pub fn id(&self) -> &PublicKey {
        self.keys.public()
    }

    fn withdrawn(&self, slot: usize) -> RegisterContent {
        RegisterContent::orphan(*self.id(), self.nids[slot])
    }

    /// Registers written before the first round.
    pub fn initial_outputs(&self) -> Vec<RegisterContent> {
        (0..self.nids.len()).map(|i| self.withdrawn(i)).collect()
    }
}

/// One adversary round. `inputs[i]` is what the `i`-th neighbour of `m`
/// wrote for it: the current round's writes for rushing behaviours, the
/// previous round's otherwise. Outputs are indexed like `inputs`.
pub fn adversary_step(
    state: &AdversaryState,
    inputs: &[&RegisterContent],
    ctx: &StepContext,
) -> (AdversaryState, Vec<RegisterContent>) {
    let mut s = state.clone();
    s.round += 1;
    if let Some(own) = &state.own {
        let (next, outputs) = protocol::step(own, inputs, ctx);
        s.own = Some(next);
        return (s, outputs);
    }
    let withdraw = state.behavior == Behavior::Disturb && s.round % 2 == 0;
    let outputs = match ctx.protocol {
        ProtocolKind::Baseline => (0..inputs.len())
            .map(|i| {
                if withdraw {
                    s.withdrawn(i)
                } else {
                    RegisterContent {
                        id: ctx.root_id,
                        level: Level::ZERO,
                        att: LevelAttestation::nil(),
                        nid: s.nids[i],
                        link: None,
                    }
                }
            })
            .collect(),
        ProtocolKind::Attested => relay_round(&mut s, state, inputs, ctx, withdraw),
    };
    (s, outputs)
}

fn relay_round(
    s: &mut AdversaryState,
    prev: &AdversaryState,
    inputs: &[&RegisterContent],
    ctx: &StepContext,
    withdraw: bool,
) -> Vec<RegisterContent> {
    let deg = inputs.len();
    // Outputs are read one round from now.
    let read_ctx = ValidityContext {
        root_id: ctx.root_id,
        now: ctx.now + ctx.timing.round(),
        timing: ctx.timing,
    };
    let usable = |b: &Bundle, v: usize| {
        is_valid_att(&b.att, &inputs[v].id, &read_ctx, b.att.len())
            && is_valid_link(&b.att, &inputs[v].nid, &b.link)
    };

    for (r, shown) in prev.presented.iter().enumerate() {
        let (Some(v), Some(link)) = (*shown, inputs[r].link) else {
            continue;
        };
        let input = inputs[r];
        let Some(level) = input.level.value() else {
            continue;
        };
        let candidate = Bundle {
            relay_id: input.id,
            att: input.att.clone(),
            link,
        };
        if candidate.att.len() != level as usize + 1 || !usable(&candidate, v) {
            continue;
        }
        let replace = match &s.stock[v] {
            None => true,
            Some(old) => candidate.att.len() <= old.att.len() || !usable(old, v),
        };
        if replace {
            s.stock[v] = Some(candidate);
        }
    }

    let min = inputs
        .iter()
        .map(|r| r.level)
        .min()
        .filter(|l| l.is_finite());
    let is_relay: Vec<bool> = (0..deg).map(|i| Some(inputs[i].level) == min).collect();
    let relays: Vec<usize> = (0..deg).filter(|&i| is_relay[i]).collect();
    let victims: Vec<usize> = (0..deg).filter(|&i| !is_relay[i]).collect();

    let mut outputs: Vec<RegisterContent> = Vec::with_capacity(deg);
    for i in 0..deg {
        if is_relay[i] {
            // Each victim is always served by the same relay, so the identity
            // it sees behind the forwarded offer does not change.
            let j = relays.iter().position(|&r| r == i).expect("relay listed");
            let mine: Vec<usize> = victims
                .iter()
                .copied()
                .skip(j)
                .step_by(relays.len())
                .collect();
            if mine.is_empty() {
                s.presented[i] = None;
                outputs.push(s.withdrawn(i));
            } else {
                let v = mine[s.cursors[i] % mine.len()];
                s.cursors[i] = s.cursors[i].wrapping_add(1);
                s.presented[i] = Some(v);
                outputs.push(RegisterContent::orphan(inputs[v].id, inputs[v].nid));
            }
            continue;
        }
        s.presented[i] = None;
        let forwarded = match &s.stock[i] {
            Some(b) if !withdraw && usable(b, i) => Some(RegisterContent {
                id: b.relay_id,
                level: Level::finite(b.att.len() as u32 - 1),
                att: b.att.clone(),
                nid: s.nids[i],
                link: Some(b.link),
            }),
            _ => None,
        };
        outputs.push(forwarded.unwrap_or_else(|| s.withdrawn(i)));
    }
    outputs
}

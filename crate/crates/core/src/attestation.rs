//! Level attestations and link signatures.
//!
//! A level attestation is a sequence of `(key, timestamp, signature)` tuples
//! starting at the root. Tuple `i` signs the key of tuple `i + 1` together
//! with its own timestamp, and the last tuple signs the identity of the node
//! the attestation is addressed to. A link signature binds an attestation to
//! the register it was written into.
//!
//! Attestations are persistent lists: extending one shares the prefix, so
//! copying registers is cheap and per-prefix work (digest, signature chain
//! check) is done once.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicU8, Ordering};

use hashbrown::HashMap;

use crate::crypto::{
    self, digest, digest_parts, level_message, link_message, put_prefixed, Digest, KeyPair,
    PublicKey, Signature, KEY_LEN, NID_LEN, SIGNATURE_LEN,
};
use crate::graph::Graph;

pub type Timestamp = u64;

/// Timing bounds: clock skew `delta_c`, register delay `delta_d` and loop
/// iteration time `delta_e`. One lock-step round lasts `delta_d + delta_e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Timing {
    pub delta_c: u64,
    pub delta_d: u64,
    pub delta_e: u64,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            delta_c: 1,
            delta_d: 1,
            delta_e: 1,
        }
    }
}

impl Timing {
    pub fn round(&self) -> u64 {
        self.delta_d + self.delta_e
    }

    /// Maximum age of tuple `i` (1-based) in an attestation of length `n`.
    pub fn max_age(&self, n: usize, i: usize) -> u64 {
        self.delta_c + self.round() * (n - i + 1) as u64
    }
}

/// Identifier a node assigns to each of its neighbours.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Nid(pub [u8; NID_LEN]);

impl fmt::Debug for Nid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nid({:02x}{:02x}..)", self.0[0], self.0[1])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttTuple {
    pub key: PublicKey,
    pub ts: Timestamp,
    pub sig: Signature,
}

const TUPLE_ENCODING_LEN: usize = 4 + KEY_LEN + 8 + 4 + SIGNATURE_LEN;

impl AttTuple {
    fn encode_into(&self, out: &mut [u8; TUPLE_ENCODING_LEN]) {
        out[..4].copy_from_slice(&(KEY_LEN as u32).to_be_bytes());
        out[4..36].copy_from_slice(self.key.as_bytes());
        out[36..44].copy_from_slice(&self.ts.to_be_bytes());
        out[44..48].copy_from_slice(&(SIGNATURE_LEN as u32).to_be_bytes());
        out[48..].copy_from_slice(&self.sig.to_bytes());
    }
}

const UNCHECKED: u8 = 0;
const CHAIN_OK: u8 = 1;
const CHAIN_BAD: u8 = 2;

struct Link {
    tuple: AttTuple,
    prev: Option<Arc<Link>>,
    len: usize,
    first_key: PublicKey,
    digest: Digest,
    chain: AtomicU8,
}

impl Link {
    /// Whether every inner signature signs the next key and its own timestamp.
    fn chain_ok(&self) -> bool {
        match self.chain.load(Ordering::Relaxed) {
            CHAIN_OK => return true,
            CHAIN_BAD => return false,
            _ => {}
        }
        let ok = match &self.prev {
            None => true,
            Some(prev) => {
                let m = level_message(&self.tuple.key, prev.tuple.ts);
                prev.chain_ok() && crypto::verify(&prev.tuple.key, &m, &prev.tuple.sig)
            }
        };
        self.chain
            .store(if ok { CHAIN_OK } else { CHAIN_BAD }, Ordering::Relaxed);
        ok
    }
}

fn empty_digest() -> Digest {
    digest(b"")
}

/// An ordered sequence of attestation tuples. The empty sequence is `nil`.
#[derive(Clone, Default)]
pub struct LevelAttestation {
    head: Option<Arc<Link>>,
}

impl LevelAttestation {
    pub fn nil() -> Self {
        Self::default()
    }

    pub fn from_tuples<I: IntoIterator<Item = AttTuple>>(tuples: I) -> Self {
        tuples.into_iter().fold(Self::nil(), |att, t| att.push(t))
    }

    pub fn len(&self) -> usize {
        self.head.as_ref().map_or(0, |l| l.len)
    }

    pub fn is_empty(&self) -> bool {
        self.head.is_none()
    }

    /// Appends a tuple, sharing the existing prefix.
    pub fn push(&self, tuple: AttTuple) -> Self {
        let mut enc = [0u8; TUPLE_ENCODING_LEN];
        tuple.encode_into(&mut enc);
        let d = digest_parts(&[&self.digest().0, &enc]);
        let (len, first_key) = match &self.head {
            Some(h) => (h.len + 1, h.first_key),
            None => (1, tuple.key),
        };
        LevelAttestation {
            head: Some(Arc::new(Link {
                tuple,
                prev: self.head.clone(),
                len,
                first_key,
                digest: d,
                chain: AtomicU8::new(UNCHECKED),
            })),
        }
    }

    pub fn last(&self) -> Option<&AttTuple> {
        self.head.as_ref().map(|l| &l.tuple)
    }

    pub fn first_key(&self) -> Option<&PublicKey> {
        self.head.as_ref().map(|l| &l.first_key)
    }

    /// The first `k` tuples.
    pub fn prefix(&self, k: usize) -> Self {
        let mut cur = self.head.clone();
        while let Some(l) = &cur {
            if l.len <= k {
                break;
            }
            cur = l.prev.clone();
        }
        LevelAttestation { head: cur }
    }

    /// Tuples in order, root first.
    pub fn tuples(&self) -> Vec<&AttTuple> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = self.head.as_deref();
        while let Some(l) = cur {
            out.push(&l.tuple);
            cur = l.prev.as_deref();
        }
        out.reverse();
        out
    }

    /// Chained digest: `h(nil) = H("")`, `h(P ‖ t) = H(h(P) ‖ enc(t))`.
    pub fn digest(&self) -> Digest {
        self.head.as_ref().map_or_else(empty_digest, |l| l.digest)
    }

    /// Canonical serialisation: a 4-byte tuple count, then per tuple
    /// `len(key) ‖ key ‖ ts ‖ len(sig) ‖ sig`, all big-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.len() * TUPLE_ENCODING_LEN);
        out.extend_from_slice(&(self.len() as u32).to_be_bytes());
        for t in self.tuples() {
            put_prefixed(&mut out, t.key.as_bytes());
            out.extend_from_slice(&t.ts.to_be_bytes());
            put_prefixed(&mut out, &t.sig.to_bytes());
        }
        out
    }

    fn chain_ok(&self) -> bool {
        self.head.as_ref().is_none_or(|l| l.chain_ok())
    }

    fn same(&self, other: &Self) -> bool {
        match (&self.head, &other.head) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        }
    }
}

impl PartialEq for LevelAttestation {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
            || (self.len() == other.len()
                && self.digest() == other.digest()
                && self.tuples() == other.tuples())
    }
}

impl Eq for LevelAttestation {}

impl fmt::Debug for LevelAttestation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.tuples().iter().map(|t| (t.key, t.ts)))
            .finish()
    }
}

/// Signature over `nID ‖ h(P)` by the last signer of `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LinkSignature(pub Signature);

/// What a reader needs besides the attestation itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidityContext {
    pub root_id: PublicKey,
    pub now: Timestamp,
    pub timing: Timing,
}

/// Whether `att` is a valid level attestation for `reader` of length
/// `expected_len`. The empty attestation is never accepted by a reader.
pub fn is_valid_att(
    att: &LevelAttestation,
    reader: &PublicKey,
    ctx: &ValidityContext,
    expected_len: usize,
) -> bool {
    let n = att.len();
    if n == 0 || n != expected_len || att.first_key() != Some(&ctx.root_id) {
        return false;
    }
    let mut cur = att.head.as_deref();
    while let Some(l) = cur {
        let age = ctx.now.saturating_sub(l.tuple.ts);
        if age > ctx.timing.max_age(n, l.len) {
            return false;
        }
        cur = l.prev.as_deref();
    }
    if !att.chain_ok() {
        return false;
    }
    let last = att.last().expect("non-empty");
    crypto::verify(&last.key, &level_message(reader, last.ts), &last.sig)
}

/// Whether `link` binds `att` to the register whose reader assigned `nid` to
/// the writer.
pub fn is_valid_link(att: &LevelAttestation, nid: &Nid, link: &LinkSignature) -> bool {
    match att.last() {
        None => false,
        Some(last) => crypto::verify(&last.key, &link_message(&nid.0, &att.digest()), &link.0),
    }
}

/// Extends `level_att` with a tuple addressed to `target`, and link-signs the
/// result under the identifier `target_nid` that the target assigned to the
/// signer.
pub fn extend(
    level_att: &LevelAttestation,
    signer: &KeyPair,
    target: &PublicKey,
    target_nid: &Nid,
    ts: Timestamp,
) -> (LevelAttestation, LinkSignature) {
    let sig = signer.sign(&level_message(target, ts));
    let ex = level_att.push(AttTuple {
        key: *signer.public(),
        ts,
        sig,
    });
    let link = signer.sign(&link_message(&target_nid.0, &ex.digest()));
    (ex, LinkSignature(link))
}

/// Maps public keys to the nodes that own them.
#[derive(Clone, Debug, Default)]
pub struct KeyDirectory {
    map: HashMap<PublicKey, usize>,
}

impl KeyDirectory {
    pub fn new<'a, I: IntoIterator<Item = &'a PublicKey>>(keys: I) -> Self {
        KeyDirectory {
            map: keys.into_iter().enumerate().map(|(i, k)| (*k, i)).collect(),
        }
    }

    pub fn node_of(&self, key: &PublicKey) -> Option<usize> {
        self.map.get(key).copied()
    }
}

/// Which signer sequences count as walks for the consistency oracle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ConsistencyRule {
    /// Consecutive signers must be adjacent.
    #[default]
    Strict,
    /// Consecutive signers may also be joined through a shared malicious
    /// neighbour, which is exactly what relaying produces.
    RelayAware,
}

/// Consistency oracle: an attestation is consistent for `reader` if it is
/// invalid for the reader, or its signers form a walk in `graph` whose last
/// node is adjacent to the reader or shares a malicious neighbour with it.
pub fn is_consistent(
    att: &LevelAttestation,
    graph: &Graph,
    directory: &KeyDirectory,
    reader: usize,
    reader_id: &PublicKey,
    malicious: &[usize],
    ctx: &ValidityContext,
) -> bool {
    is_consistent_under(
        ConsistencyRule::Strict,
        att,
        graph,
        directory,
        reader,
        reader_id,
        malicious,
        ctx,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn is_consistent_under(
    rule: ConsistencyRule,
    att: &LevelAttestation,
    graph: &Graph,
    directory: &KeyDirectory,
    reader: usize,
    reader_id: &PublicKey,
    malicious: &[usize],
    ctx: &ValidityContext,
) -> bool {
    if !is_valid_att(att, reader_id, ctx, att.len()) {
        return true;
    }
    let mut nodes = Vec::with_capacity(att.len());
    for t in att.tuples() {
        match directory.node_of(&t.key) {
            Some(v) => nodes.push(v),
            None => return false,
        }
    }
    let via_malicious = |a: usize, b: usize| {
        malicious
            .iter()
            .any(|&m| graph.has_edge(m, a) && graph.has_edge(m, b))
    };
    let joined = |a: usize, b: usize| {
        graph.has_edge(a, b) || (rule == ConsistencyRule::RelayAware && via_malicious(a, b))
    };
    if nodes.windows(2).any(|w| !joined(w[0], w[1])) {
        return false;
    }
    let last = *nodes.last().expect("valid attestations are non-empty");
    graph.has_edge(reader, last) || via_malicious(reader, last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::Scheme;

    fn keys(n: u64) -> Vec<KeyPair> {
        (0..n)
            .map(|i| KeyPair::generate(Scheme::Model, i))
            .collect()
    }

    fn ctx(root: &KeyPair, now: u64) -> ValidityContext {
        ValidityContext {
            root_id: *root.public(),
            now,
            timing: Timing::default(),
        }
    }

    /// Attestation along `path` (indices into `k`) addressed to `reader`, all stamped `ts`.
    fn chain(k: &[KeyPair], path: &[usize], reader: usize, ts: u64) -> LevelAttestation {
        let mut att = LevelAttestation::nil();
        for (i, &p) in path.iter().enumerate() {
            let next = path.get(i + 1).copied().unwrap_or(reader);
            att = extend(&att, &k[p], k[next].public(), &Nid([0; 8]), ts).0;
        }
        att
    }

    #[test]
    fn valid_chain_of_three() {
        let k = keys(4);
        let att = chain(&k, &[0, 1, 2], 3, 10);
        assert!(is_valid_att(&att, k[3].public(), &ctx(&k[0], 10), 3));
        assert!(!is_valid_att(&att, k[3].public(), &ctx(&k[0], 10), 2));
        assert!(!is_valid_att(&att, k[2].public(), &ctx(&k[0], 10), 3));
        assert!(!is_valid_att(&att, k[3].public(), &ctx(&k[1], 10), 3));
    }

    #[test]
    fn freshness_bound_per_position() {
        let k = keys(3);
        // Length 2 with default timing: tuple 1 may be 1 + 2*2 = 5 old, tuple 2 may be 3 old.
        let att = chain(&k, &[0, 1], 2, 100);
        assert!(is_valid_att(&att, k[2].public(), &ctx(&k[0], 103), 2));
        assert!(!is_valid_att(&att, k[2].public(), &ctx(&k[0], 104), 2));
        // Future stamps are not penalised.
        assert!(is_valid_att(&att, k[2].public(), &ctx(&k[0], 50), 2));
        let t = Timing {
            delta_c: 3,
            delta_d: 2,
            delta_e: 5,
        };
        assert_eq!(t.max_age(4, 1), 3 + 7 * 4);
        assert_eq!(t.max_age(4, 4), 3 + 7);
    }

    #[test]
    fn empty_is_never_accepted() {
        let k = keys(2);
        let nil = LevelAttestation::nil();
        assert!(!is_valid_att(&nil, k[1].public(), &ctx(&k[0], 0), 0));
        assert!(!is_valid_link(
            &nil,
            &Nid([0; 8]),
            &LinkSignature(k[0].sign(b""))
        ));
        assert_eq!(nil.digest(), digest(b""));
    }

    #[test]
    fn truncation_is_rejected() {
        let k = keys(5);
        let att = chain(&k, &[0, 1, 2, 3], 4, 7);
        for cut in 1..4 {
            let p = att.prefix(cut);
            assert_eq!(p.len(), cut);
            assert!(!is_valid_att(&p, k[4].public(), &ctx(&k[0], 7), cut));
        }
    }

    #[test]
    fn link_signature_binds_nid_and_content() {
        let k = keys(3);
        let base = chain(&k, &[0], 1, 5);
        let (ex, link) = extend(&base, &k[1], k[2].public(), &Nid([4; 8]), 6);
        assert!(is_valid_link(&ex, &Nid([4; 8]), &link));
        assert!(!is_valid_link(&ex, &Nid([5; 8]), &link));
        let (other, _) = extend(&base, &k[1], k[2].public(), &Nid([4; 8]), 7);
        assert!(!is_valid_link(&other, &Nid([4; 8]), &link));
    }

    #[test]
    fn structural_equality_and_prefix_sharing() {
        let k = keys(3);
        let a = chain(&k, &[0, 1], 2, 3);
        let b = LevelAttestation::from_tuples(a.tuples().into_iter().cloned());
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.prefix(1).len(), 1);
        assert_eq!(a.prefix(5), a);
    }

    #[test]
    fn encoding_layout() {
        let k = keys(2);
        let att = chain(&k, &[0], 1, 0x0a0b);
        let enc = att.encode();
        assert_eq!(enc.len(), 4 + 4 + 32 + 8 + 4 + 64);
        assert_eq!(&enc[..4], &[0, 0, 0, 1]);
        assert_eq!(&enc[4..8], &[0, 0, 0, 32]);
        assert_eq!(&enc[8..40], k[0].public().as_bytes());
        assert_eq!(&enc[40..48], &[0, 0, 0, 0, 0, 0, 0x0a, 0x0b]);
        assert_eq!(&enc[48..52], &[0, 0, 0, 64]);
    }

    #[test]
    fn consistency_oracle() {
        // Path 0-1-2-3, malicious 4 adjacent to 1 and 3.
        let (g, _) = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (1, 4), (3, 4)]).unwrap();
        let k = keys(5);
        let dir = KeyDirectory::new(k.iter().map(|x| x.public()));
        let c = ctx(&k[0], 1);
        let real = chain(&k, &[0, 1], 2, 1);
        assert!(is_consistent(&real, &g, &dir, 2, k[2].public(), &[4], &c));
        // Relayed through the malicious node: 0,1 addressed to 3.
        let relayed = chain(&k, &[0, 1], 3, 1);
        assert!(is_consistent(
            &relayed,
            &g,
            &dir,
            3,
            k[3].public(),
            &[4],
            &c
        ));
        assert!(!is_consistent(
            &relayed,
            &g,
            &dir,
            3,
            k[3].public(),
            &[],
            &c
        ));
        // Skips an edge: 0 then 2.
        let skip = chain(&k, &[0, 2], 3, 1);
        assert!(!is_consistent(&skip, &g, &dir, 3, k[3].public(), &[4], &c));
        // Invalid attestations are consistent by definition.
        assert!(is_consistent(&skip, &g, &dir, 2, k[2].public(), &[4], &c));
        let stranger = KeyPair::generate(Scheme::Model, 99);
        let mut ks = k.clone();
        ks.push(stranger);
        let foreign = chain(&ks, &[0, 5], 2, 1);
        assert!(!is_consistent(
            &foreign,
            &g,
            &dir,
            2,
            k[2].public(),
            &[4],
            &c
        ));
        // 1 and 3 are joined only through the malicious node.
        let hop = chain(&k, &[0, 1, 3], 2, 1);
        assert!(!is_consistent(&hop, &g, &dir, 2, k[2].public(), &[4], &c));
        let relay = ConsistencyRule::RelayAware;
        assert!(is_consistent_under(
            relay,
            &hop,
            &g,
            &dir,
            2,
            k[2].public(),
            &[4],
            &c
        ));
        assert!(!is_consistent_under(
            relay,
            &hop,
            &g,
            &dir,
            2,
            k[2].public(),
            &[],
            &c
        ));
    }
}

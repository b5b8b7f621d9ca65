//! Hashing, signatures and hash chains.
//!
//! Two signature schemes share one interface. [`Scheme::Model`] produces a
//! structural token recording the signer and the digest of the message; it
//! cannot be built outside this module, so a holder of tokens can copy them
//! but never mint new ones. [`Scheme::Ed25519`] uses real signatures.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use sha2::{Digest as _, Sha256};

use crate::{Error, Result};

pub const KEY_LEN: usize = 32;
pub const DIGEST_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Scheme {
    #[default]
    Model,
    Ed25519,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest(")?;
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, "..)")
    }
}

/// SHA-256 of `message`.
pub fn digest(message: &[u8]) -> Digest {
    Digest(Sha256::digest(message).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn digest_parts(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicKey {
    scheme: Scheme,
    bytes: [u8; KEY_LEN],
}

impl PublicKey {
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.bytes
    }

    /// A key nobody holds the secret for. Used for arbitrary initial state.
    pub fn unowned(scheme: Scheme, bytes: [u8; KEY_LEN]) -> Self {
        PublicKey { scheme, bytes }
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pk(")?;
        for b in &self.bytes[..6] {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone)]
enum Secret {
    Model,
    Ed25519(Box<SigningKey>),
}

#[derive(Clone)]
pub struct KeyPair {
    public: PublicKey,
    secret: Secret,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public)
            .finish_non_exhaustive()
    }
}

/// Key pairs compare by public key.
impl PartialEq for KeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.public == other.public
    }
}

impl Eq for KeyPair {}

impl KeyPair {
    /// Deterministic key pair. Model keys embed the seed, so distinct seeds
    /// always give distinct keys.
    pub fn generate(scheme: Scheme, seed: u64) -> Self {
        let material = digest_parts(&[b"attestree-key", &seed.to_be_bytes()]).0;
        match scheme {
            Scheme::Model => {
                let mut bytes = material;
                bytes[..8].copy_from_slice(&seed.to_be_bytes());
                KeyPair {
                    public: PublicKey { scheme, bytes },
                    secret: Secret::Model,
                }
            }
            Scheme::Ed25519 => {
                let signing = SigningKey::from_bytes(&material);
                KeyPair {
                    public: PublicKey {
                        scheme,
                        bytes: signing.verifying_key().to_bytes(),
                    },
                    secret: Secret::Ed25519(Box::new(signing)),
                }
            }
        }
    }

    pub fn public(&self) -> &PublicKey {
        &self.public
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        match &self.secret {
            Secret::Model => Signature(SigRepr::Model {
                signer: self.public.bytes,
                digest: digest(message),
            }),
            Secret::Ed25519(key) => Signature(SigRepr::Ed25519(key.sign(message).to_bytes())),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum SigRepr {
    Model {
        signer: [u8; KEY_LEN],
        digest: Digest,
    },
    Ed25519([u8; SIGNATURE_LEN]),
}

/// An opaque signature. There is no constructor from bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(SigRepr);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.to_bytes();
        write!(f, "Sig({:02x}{:02x}{:02x}..)", b[0], b[1], b[2])
    }
}

impl Signature {
    pub fn scheme(&self) -> Scheme {
        match self.0 {
            SigRepr::Model { .. } => Scheme::Model,
            SigRepr::Ed25519(_) => Scheme::Ed25519,
        }
    }

    pub fn to_bytes(&self) -> [u8; SIGNATURE_LEN] {
        match self.0 {
            SigRepr::Model { signer, digest } => {
                let mut out = [0u8; SIGNATURE_LEN];
                out[..KEY_LEN].copy_from_slice(&signer);
                out[KEY_LEN..].copy_from_slice(&digest.0);
                out
            }
            SigRepr::Ed25519(bytes) => bytes,
        }
    }
}

pub fn sign(keys: &KeyPair, message: &[u8]) -> Signature {
    keys.sign(message)
}

pub fn verify(public: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    match (&signature.0, public.scheme) {
        (SigRepr::Model { signer, digest: d }, Scheme::Model) => {
            *signer == public.bytes && *d == digest(message)
        }
        (SigRepr::Ed25519(bytes), Scheme::Ed25519) => {
            let Ok(key) = VerifyingKey::from_bytes(&public.bytes) else {
                return false;
            };
            key.verify(message, &ed25519_dalek::Signature::from_bytes(bytes))
                .is_ok()
        }
        _ => false,
    }
}

/// Appends a 4-byte big-endian length followed by `bytes`.
pub fn put_prefixed(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(bytes);
}

pub const LEVEL_MESSAGE_LEN: usize = 4 + KEY_LEN + 4 + 8;

/// Message signed inside a level attestation: `len(ID) ‖ ID ‖ len(ts) ‖ ts`.
pub fn level_message(id: &PublicKey, ts: u64) -> [u8; LEVEL_MESSAGE_LEN] {
    let mut m = [0u8; LEVEL_MESSAGE_LEN];
    m[..4].copy_from_slice(&(KEY_LEN as u32).to_be_bytes());
    m[4..36].copy_from_slice(&id.bytes);
    m[36..40].copy_from_slice(&8u32.to_be_bytes());
    m[40..].copy_from_slice(&ts.to_be_bytes());
    m
}

pub const NID_LEN: usize = 8;
pub const LINK_MESSAGE_LEN: usize = 4 + NID_LEN + 4 + DIGEST_LEN;

/// Message of a link signature: `len(nID) ‖ nID ‖ len(digest) ‖ digest`.
pub fn link_message(nid: &[u8; NID_LEN], d: &Digest) -> [u8; LINK_MESSAGE_LEN] {
    let mut m = [0u8; LINK_MESSAGE_LEN];
    m[..4].copy_from_slice(&(NID_LEN as u32).to_be_bytes());
    m[4..12].copy_from_slice(nid);
    m[12..16].copy_from_slice(&(DIGEST_LEN as u32).to_be_bytes());
    m[16..].copy_from_slice(&d.0);
    m
}

/// Hash chain `h_1 = H(r)`, `h_{k+1} = H(h_k)` with anchor `h_len`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashChain {
    links: Vec<Digest>,
}

impl HashChain {
    pub fn build(seed: &[u8], length: u32) -> Result<Self> {
        if length == 0 {
            return Err(Error::EmptyChain);
        }
        let mut links = Vec::with_capacity(length as usize);
        let mut h = digest(seed);
        links.push(h);
        for _ in 1..length {
            h = digest(&h.0);
            links.push(h);
        }
        Ok(HashChain { links })
    }

    pub fn len(&self) -> u32 {
        self.links.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// `h_k` for `1 <= k <= len`.
    pub fn link(&self, k: u32) -> Option<Digest> {
        k.checked_sub(1)
            .and_then(|i| self.links.get(i as usize))
            .copied()
    }

    pub fn anchor(&self) -> Digest {
        *self.links.last().expect("chain is non-empty")
    }
}

/// Distance claimed by `value` against `anchor` for a chain of length `diam`.
///
/// If `k` applications of the hash turn `value` into the anchor (`k = 0`
/// meaning `value` is the anchor) the result is `diam - k`; if the anchor is
/// not reached within `diam` applications the result is `None`.
pub fn hash_chain_distance(value: &[u8], anchor: &Digest, diam: u32) -> Option<u32> {
    if value == anchor.0 {
        return Some(diam);
    }
    let mut h = digest(value);
    for k in 1..=diam {
        if h == *anchor {
            return Some(diam - k);
        }
        h = digest(&h.0);
    }
    None
}

//! Domain-separated Poseidon sponge with 4-element digests.
//!
//! The capacity carries a domain tag and the input length, so every hashing context lives in its
//! own function family and inputs of different lengths never collide through padding.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::field::FieldElement;
use crate::poseidon::{self, RATE, WIDTH};

pub const DIGEST_LEN: usize = 4;
pub const DOMAIN_SLOT: usize = RATE;
pub const LENGTH_SLOT: usize = RATE + 1;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [FieldElement; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Self = Self([FieldElement::ZERO; DIGEST_LEN]);

    pub fn elements(&self) -> &[FieldElement; DIGEST_LEN] {
        &self.0
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (chunk, e) in out.chunks_exact_mut(8).zip(self.0.iter()) {
            chunk.copy_from_slice(&e.value().to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 32]) -> Result<Self, DigestParseError> {
        let mut els = [FieldElement::ZERO; DIGEST_LEN];
        for (e, chunk) in els.iter_mut().zip(bytes.chunks_exact(8)) {
            let v = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
            *e = FieldElement::from_canonical(v).ok_or(DigestParseError::NonCanonical)?;
        }
        Ok(Self(els))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    /// Adds `delta` to one element; used to fabricate near-miss digests in fault injection.
    pub fn perturbed(&self, position: usize, delta: u64) -> Self {
        let mut out = *self;
        out.0[position % DIGEST_LEN] += FieldElement::new(delta);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum DigestParseError {
    #[error("digest must be 64 hex characters")]
    BadHex,
    #[error("digest element is not a canonical field element")]
    NonCanonical,
}

impl FromStr for Digest {
    type Err = DigestParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|_| DigestParseError::BadHex)?;
        Self::from_bytes(&bytes)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl de::Visitor<'_> for V {
            type Value = Digest;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a 64-character hex digest")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Digest, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_str(V)
    }
}

/// Domain tags written into the capacity before absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Plain = 0,
    TxEncode = 1,
    Leaf = 2,
    Node = 3,
    Lone = 4,
    Roots = 5,
    Spec = 6,
    Params = 7,
    Transcript = 8,
}

impl Domain {
    pub const ALL: [Domain; 9] = [
        Domain::Plain,
        Domain::TxEncode,
        Domain::Leaf,
        Domain::Node,
        Domain::Lone,
        Domain::Roots,
        Domain::Spec,
        Domain::Params,
        Domain::Transcript,
    ];

    pub fn tag(self) -> FieldElement {
        FieldElement::new(self as u64)
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Plain => "plain",
            Domain::TxEncode => "tx_encode",
            Domain::Leaf => "leaf",
            Domain::Node => "node",
            Domain::Lone => "lone",
            Domain::Roots => "roots",
            Domain::Spec => "spec",
            Domain::Params => "params",
            Domain::Transcript => "transcript",
        }
    }
}

/// Initial sponge state for a domain and input length.
pub fn initial_state(domain: Domain, len: usize) -> poseidon::State {
    let mut state = [FieldElement::ZERO; WIDTH];
    state[DOMAIN_SLOT] = domain.tag();
    state[LENGTH_SLOT] = FieldElement::new(len as u64);
    state
}

/// Overwrite-mode sponge: each rate-sized chunk replaces the leading state words, then the state
/// is permuted. A short final chunk leaves the remaining rate words untouched. An empty input
/// still permutes the header state once.
pub fn hash_with_domain(domain: Domain, input: &[FieldElement]) -> Digest {
    let mut state = initial_state(domain, input.len());
    if input.is_empty() {
        state = poseidon::permute(state);
    }
    for chunk in input.chunks(RATE) {
        state[..chunk.len()].copy_from_slice(chunk);
        state = poseidon::permute(state);
    }
    Digest([state[0], state[1], state[2], state[3]])
}

pub fn hash_elements(input: &[FieldElement]) -> Digest {
    hash_with_domain(Domain::Plain, input)
}

pub fn hash_leaf(leaf: &Digest) -> Digest {
    hash_with_domain(Domain::Leaf, &leaf.0)
}

pub fn hash_node(left: &Digest, right: &Digest) -> Digest {
    let mut buf = [FieldElement::ZERO; 2 * DIGEST_LEN];
    buf[..DIGEST_LEN].copy_from_slice(&left.0);
    buf[DIGEST_LEN..].copy_from_slice(&right.0);
    hash_with_domain(Domain::Node, &buf)
}

pub fn hash_lone(left: &Digest) -> Digest {
    hash_with_domain(Domain::Lone, &left.0)
}

/// Number of permutations `hash_with_domain` spends on `len` inputs.
pub const fn permutations_for(len: usize) -> usize {
    if len == 0 {
        1
    } else {
        len.div_ceil(RATE)
    }
}

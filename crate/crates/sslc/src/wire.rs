//! On-disk and on-the-wire formats: chain fixtures, request/response bodies, the proof file and
//! the canonical claim encoding.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use sslc_core::ledger::LedgerError;
use sslc_core::proof::{Proof, PublicInputs};
use sslc_core::{AccountId, Block, Chain, ChainView, Claim, Digest, QueryResult};

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("malformed proof file: {0}")]
    ProofFile(&'static str),
    #[error("bad base64: {0}")]
    Base64(#[from] base64::DecodeError),
}

/// Writes one JSON block per line.
pub fn write_chain<W: Write>(chain: &Chain, mut out: W) -> Result<(), WireError> {
    for b in chain.blocks() {
        serde_json::to_writer(&mut out, b).map_err(|e| WireError::Json { line: b.index as usize + 1, source: e })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a fixture and re-derives every root; a block whose stored root disagrees is an error.
pub fn read_chain<R: BufRead>(input: R) -> Result<Chain, WireError> {
    let mut blocks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let b: Block = serde_json::from_str(&line).map_err(|e| WireError::Json { line: i + 1, source: e })?;
        b.validate()?;
        blocks.push(b);
    }
    Ok(Chain::new(blocks)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRequest {
    pub account: AccountId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResponse {
    pub count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootsRequest {
    pub indices: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootReply {
    pub index: u64,
    pub digest: Option<Digest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootsResponse {
    pub roots: Vec<RootReply>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub result: QueryResult,
    pub chain_view: ChainView,
    /// Base64 of a [`ProofFile`].
    pub proof: String,
    pub parameter_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// `u32 len ‖ proof bytes ‖ u32 len ‖ public inputs JSON ‖ 32-byte parameter digest`, lengths
/// little-endian.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofFile {
    pub proof: Proof,
    pub parameter_digest: Digest,
}

impl ProofFile {
    pub fn encode(&self) -> Vec<u8> {
        let pis = serde_json::to_vec(&self.proof.public_inputs).expect("public inputs serialize");
        let mut out = Vec::with_capacity(8 + self.proof.bytes.len() + pis.len() + 32);
        out.extend_from_slice(&(self.proof.bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.proof.bytes);
        out.extend_from_slice(&(pis.len() as u32).to_le_bytes());
        out.extend_from_slice(&pis);
        out.extend_from_slice(&self.parameter_digest.to_bytes());
        out
    }

    pub fn decode(mut b: &[u8]) -> Result<Self, WireError> {
        let bytes = take_prefixed(&mut b)?.to_vec();
        let pis = take_prefixed(&mut b)?;
        let public_inputs: PublicInputs =
            serde_json::from_slice(pis).map_err(|_| WireError::ProofFile("public inputs"))?;
        let digest: &[u8; 32] = b.try_into().map_err(|_| WireError::ProofFile("parameter digest"))?;
        let parameter_digest = Digest::from_bytes(digest).map_err(|_| WireError::ProofFile("parameter digest"))?;
        Ok(Self { proof: Proof { bytes, public_inputs }, parameter_digest })
    }

    pub fn to_base64(&self) -> String {
        B64.encode(self.encode())
    }

    pub fn from_base64(s: &str) -> Result<Self, WireError> {
        Self::decode(&B64.decode(s)?)
    }
}

fn take_prefixed<'a>(b: &mut &'a [u8]) -> Result<&'a [u8], WireError> {
    let len: [u8; 4] = b.get(..4).and_then(|s| s.try_into().ok()).ok_or(WireError::ProofFile("truncated length"))?;
    let len = u32::from_le_bytes(len) as usize;
    let body = b.get(4..4 + len).ok_or(WireError::ProofFile("truncated body"))?;
    *b = &b[4 + len..];
    Ok(body)
}

/// Canonical claim JSON: fixed field order, hex digests, no whitespace.
pub fn claim_json(claim: &Claim) -> String {
    serde_json::to_string(claim).expect("claim serializes")
}

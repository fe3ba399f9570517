//! Closed-form download cost of answering one query with a full light client (ONLC), a
//! sublinear light client (SLC), and the stateless client (SSLC).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const KIB: f64 = 1024.0;
pub const MIB: f64 = 1024.0 * 1024.0;
pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;

/// The constants shipped with the crate.
pub const DEFAULT_PARAMS: &str = include_str!("../data/costmodel.toml");

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("unknown scenario `{0}` (expected bitcoin or eth)")]
    UnknownScenario(String),
    #[error("unknown approach `{0}` (expected onlc, slc or sslc)")]
    UnknownApproach(String),
    #[error("bad cost parameters: {0}")]
    Params(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Bitcoin,
    Eth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Onlc,
    Slc,
    Sslc,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Bitcoin, Scenario::Eth];
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Onlc, Approach::Slc, Approach::Sslc];
}

impl FromStr for Scenario {
    type Err = CostError;
    fn from_str(s: &str) -> Result<Self, CostError> {
        match s.to_ascii_lowercase().as_str() {
            "bitcoin" | "btc" | "bitcoin_satoshi" => Ok(Scenario::Bitcoin),
            "eth" | "ethereum" | "eth_voting" => Ok(Scenario::Eth),
            _ => Err(CostError::UnknownScenario(s.to_string())),
        }
    }
}

impl FromStr for Approach {
    type Err = CostError;
    fn from_str(s: &str) -> Result<Self, CostError> {
        match s.to_ascii_lowercase().as_str() {
            "onlc" => Ok(Approach::Onlc),
            "slc" => Ok(Approach::Slc),
            "sslc" => Ok(Approach::Sslc),
            _ => Err(CostError::UnknownApproach(s.to_string())),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Bitcoin => "bitcoin",
            Scenario::Eth => "eth",
        })
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Onlc => "onlc",
            Approach::Slc => "slc",
            Approach::Sslc => "sslc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitcoinParams {
    pub header_bytes: u64,
    pub headers: u64,
    pub relevant_txs: u64,
    pub raw_tx_kib: f64,
    pub txout_proof_kib: f64,
    pub block_hash_bytes: u64,
    pub result_bytes: u64,
    pub proof_kib: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthParams {
    pub block_details_kib: f64,
    pub election_blocks: u64,
    pub sslc_headers: u64,
    pub votes: u64,
    pub transactions_mib: f64,
    pub transaction_proofs_mib: f64,
    pub receipts_mib: f64,
    pub receipt_proofs_mib: f64,
    pub state_proof_kib: f64,
    pub result_bytes: u64,
    pub proof_kib: f64,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub bitcoin: BitcoinParams,
    pub eth: EthParams,
}

impl CostParams {
    pub fn parse(text: &str) -> Result<Self, CostError> {
        Ok(toml::from_str(text)?)
    }

    pub fn shipped() -> Self {
        Self::parse(DEFAULT_PARAMS).expect("shipped cost parameters parse")
    }
}

/// A sublinear client keeps the log of the header set's size in MiB, as MiB.
fn sublinear(headers_bytes: f64) -> f64 {
    (headers_bytes / MIB).log2() * MIB
}

fn bitcoin(p: &BitcoinParams, a: Approach) -> f64 {
    let headers = (p.headers * p.header_bytes) as f64;
    let per_tx = p.relevant_txs as f64 * (p.raw_tx_kib + p.txout_proof_kib) * KIB;
    match a {
        Approach::Onlc => headers + per_tx,
        Approach::Slc => sublinear(headers) + per_tx,
        Approach::Sslc => {
            let per_node = (p.relevant_txs * p.block_hash_bytes + p.result_bytes) as f64 + p.proof_kib * KIB;
            p.nodes as f64 * per_node
        }
    }
}

fn eth(p: &EthParams, a: Approach) -> f64 {
    let headers = p.election_blocks as f64 * p.block_details_kib * KIB;
    let rest = (p.transactions_mib + p.transaction_proofs_mib + p.receipts_mib + p.receipt_proofs_mib) * MIB
        + p.state_proof_kib * KIB;
    match a {
        Approach::Onlc => headers + rest,
        Approach::Slc => sublinear(headers) + rest,
        Approach::Sslc => {
            let per_node = p.sslc_headers as f64 * p.block_details_kib * KIB + p.result_bytes as f64 + p.proof_kib * KIB;
            p.nodes as f64 * per_node
        }
    }
}

/// Total bytes downloaded, rounded to the nearest byte.
pub fn cost_model(scenario: Scenario, approach: Approach, params: &CostParams) -> u64 {
    let bytes = match scenario {
        Scenario::Bitcoin => bitcoin(&params.bitcoin, approach),
        Scenario::Eth => eth(&params.eth, approach),
    };
    bytes.round() as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub scenario: Scenario,
    pub approach: Approach,
    pub bytes: u64,
    pub mib: f64,
}

pub fn table(params: &CostParams) -> Vec<CostRow> {
    Scenario::ALL
        .iter()
        .flat_map(|&s| Approach::ALL.iter().map(move |&a| (s, a)))
        .map(|(scenario, approach)| {
            let bytes = cost_model(scenario, approach, params);
            CostRow { scenario, approach, bytes, mib: bytes as f64 / MIB }
        })
        .collect()
}

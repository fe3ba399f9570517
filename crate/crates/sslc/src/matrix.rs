//! Every oracle behaviour against every full-node configuration, in process.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use sslc_core::{Chain, QuerySpec, Reason, Verdict};

use crate::client::{run_protocol, ClientConfig};
use crate::fullnode::{FullNode, NodeBehavior};
use crate::oracle::{Oracle, OracleBehavior, SharedBackend};
use crate::service::Endpoint;
use crate::transport::{InProcess, Transport, TransportError};

pub const NODE_COUNTS: [usize; 3] = [2, 3, 5];

/// Which full node, if any, misbehaves. The faulty node is always the last one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeConfig {
    AllHonest,
    OneWrongCount,
    OneWrongRoot,
    OneUnavailable,
    OneStaleView,
}

impl NodeConfig {
    pub const ALL: [NodeConfig; 5] = [
        NodeConfig::AllHonest,
        NodeConfig::OneWrongCount,
        NodeConfig::OneWrongRoot,
        NodeConfig::OneUnavailable,
        NodeConfig::OneStaleView,
    ];

    /// `relevant_block` is a block the honest view includes.
    pub fn behaviors(self, n: usize, chain_len: usize, relevant_block: u64) -> Vec<NodeBehavior> {
        let mut v = vec![NodeBehavior::Honest; n];
        v[n - 1] = match self {
            NodeConfig::AllHonest => NodeBehavior::Honest,
            NodeConfig::OneWrongCount => NodeBehavior::WrongCount(1),
            NodeConfig::OneWrongRoot => NodeBehavior::WrongRoot(relevant_block),
            NodeConfig::OneUnavailable => NodeBehavior::Unavailable,
            NodeConfig::OneStaleView => NodeBehavior::StaleView(chain_len / 2),
        };
        v
    }
}

impl fmt::Display for NodeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Outcome the rejection taxonomy prescribes for a cell.
pub fn expected(oracle: OracleBehavior, nodes: NodeConfig) -> (Verdict, Reason) {
    use OracleBehavior::*;
    match nodes {
        NodeConfig::OneWrongCount | NodeConfig::OneWrongRoot => return (Verdict::Abort, Reason::NodeDisagreement),
        NodeConfig::OneUnavailable | NodeConfig::OneStaleView => return (Verdict::Abort, Reason::NodeBottom),
        NodeConfig::AllHonest => {}
    }
    match oracle {
        Honest => (Verdict::Accept, Reason::Ok),
        OmitTx(_) | TamperK(_) => (Verdict::Reject, Reason::KMismatch),
        DuplicateTx | TamperResult(_) => (Verdict::Reject, Reason::ProofInvalid),
        TamperRoot(_) | ForeignTx => (Verdict::Reject, Reason::RootMismatch),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Decided { verdict: Verdict, reason: Reason, bytes_down: u64, bytes_up: u64 },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub oracle: OracleBehavior,
    pub nodes: NodeConfig,
    pub n: usize,
    pub outcome: CellOutcome,
    pub expected_verdict: Verdict,
    pub expected_reason: Reason,
}

impl Cell {
    pub fn matches(&self) -> bool {
        matches!(self.outcome, CellOutcome::Decided { verdict, reason, .. }
            if verdict == self.expected_verdict && reason == self.expected_reason)
    }

    pub fn accepted(&self) -> bool {
        matches!(self.outcome, CellOutcome::Decided { verdict: Verdict::Accept, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub backend: String,
    pub blocks: usize,
    pub k: u64,
    pub cells: Vec<Cell>,
}

impl ScenarioReport {
    pub fn violations(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| !c.matches()).collect()
    }

    pub fn accepts(&self) -> Vec<&Cell> {
        self.cells.iter().filter(|c| c.accepted()).collect()
    }

    /// Accepts outside an all-honest cell.
    pub fn false_accepts(&self) -> Vec<&Cell> {
        self.accepts()
            .into_iter()
            .filter(|c| c.oracle != OracleBehavior::Honest || c.nodes != NodeConfig::AllHonest)
            .collect()
    }
}

type Memo = HashMap<(Endpoint, Vec<u8>), Result<Vec<u8>, TransportError>>;

/// Replays earlier answers to identical requests, so each oracle proves once per matrix.
pub struct MemoTransport {
    inner: Arc<dyn Transport>,
    seen: Mutex<Memo>,
}

impl MemoTransport {
    pub fn new(inner: Arc<dyn Transport>) -> Self {
        Self { inner, seen: Mutex::new(HashMap::new()) }
    }
}

impl Transport for MemoTransport {
    fn peer(&self) -> &str {
        self.inner.peer()
    }

    fn call(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let key = (endpoint, body.to_vec());
        if let Some(hit) = self.seen.lock().expect("memo lock").get(&key) {
            return hit.clone();
        }
        let out = self.inner.call(endpoint, body);
        self.seen.lock().expect("memo lock").insert(key, out.clone());
        out
    }
}

pub fn run_matrix(chain: Arc<Chain>, backend: SharedBackend, spec: QuerySpec, node_counts: &[usize]) -> ScenarioReport {
    let k = sslc_core::tx_count_for_account(&chain, &spec.account);
    let relevant_block = chain.blocks().iter().find(|b| b.transactions.iter().any(|t| spec.selects(t))).map_or(0, |b| b.index);
    let mut cells = Vec::new();
    for oracle_mode in OracleBehavior::MODES {
        let oracle: Arc<dyn Transport> = Arc::new(MemoTransport::new(Arc::new(InProcess::new(
            format!("oracle[{oracle_mode}]"),
            Arc::new(Oracle::new(chain.clone(), backend.clone(), oracle_mode)),
        ))));
        for nodes in NodeConfig::ALL {
            for &n in node_counts {
                let node_transports = nodes
                    .behaviors(n, chain.len(), relevant_block)
                    .into_iter()
                    .enumerate()
                    .map(|(i, b)| {
                        Arc::new(InProcess::new(format!("node{i}"), Arc::new(FullNode::new(chain.clone(), b))))
                            as Arc<dyn Transport>
                    })
                    .collect();
                let config = ClientConfig { oracle: oracle.clone(), nodes: node_transports, backend: backend.clone(), spec };
                let outcome = match run_protocol(&config) {
                    Ok(o) => CellOutcome::Decided {
                        verdict: o.verdict,
                        reason: o.reason,
                        bytes_down: o.bandwidth.bytes_down(),
                        bytes_up: o.bandwidth.bytes_up,
                    },
                    Err(e) => CellOutcome::Failed { error: e.to_string() },
                };
                let (expected_verdict, expected_reason) = expected(oracle_mode, nodes);
                cells.push(Cell { oracle: oracle_mode, nodes, n, outcome, expected_verdict, expected_reason });
            }
        }
    }
    let p = backend.params();
    let label = format!("{:?}({})", p.backend, p.shape).to_lowercase();
    ScenarioReport { backend: label, blocks: chain.len(), k, cells }
}

//! The stateless client: one round trip to the oracle, one to each full node, then a decision.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use sslc_core::statement::Ratio;
use sslc_core::{decide, ChainView, Claim, NodeAnswer, QueryResult, QuerySpec, Reason, Verdict};

use crate::oracle::SharedBackend;
use crate::service::{Endpoint, ServiceError};
use crate::transport::{Transport, TransportError};
use crate::wire::{CountRequest, CountResponse, ProofFile, QueryResponse, RootsRequest, RootsResponse};

pub const MIN_NODES: usize = 2;

#[derive(Clone)]
pub struct ClientConfig {
    pub oracle: Arc<dyn Transport>,
    pub nodes: Vec<Arc<dyn Transport>>,
    /// Verification side of the backend the oracle is expected to prove with.
    pub backend: SharedBackend,
    pub spec: QuerySpec,
}

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("need at least {MIN_NODES} full nodes, got {0}")]
    TooFewNodes(usize),
    #[error("oracle unreachable: {0}")]
    OracleUnreachable(TransportError),
    #[error("oracle refused the query: {0}")]
    Rejected(String),
    #[error("malformed oracle response: {0}")]
    Malformed(String),
}

/// Request and response body bytes, excluding HTTP framing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthLedger {
    pub bytes_down_per_peer: BTreeMap<String, u64>,
    pub bytes_up: u64,
}

impl BandwidthLedger {
    pub fn bytes_down(&self) -> u64 {
        self.bytes_down_per_peer.values().sum()
    }

    pub fn total(&self) -> u64 {
        self.bytes_down() + self.bytes_up
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub verdict: Verdict,
    pub reason: Reason,
    pub result: QueryResult,
    pub view: ChainView,
    pub bandwidth: BandwidthLedger,
}

#[derive(Default)]
struct Meter(Mutex<BandwidthLedger>);

impl Meter {
    fn call(&self, t: &dyn Transport, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, TransportError> {
        let out = t.call(endpoint, body);
        let mut l = self.0.lock().expect("meter lock");
        l.bytes_up += body.len() as u64;
        let down = l.bytes_down_per_peer.entry(t.peer().to_string()).or_default();
        if let Ok(b) = &out {
            *down += b.len() as u64;
        }
        out
    }

    fn into_ledger(self) -> BandwidthLedger {
        self.0.into_inner().expect("meter lock")
    }
}

fn query_phase(config: &ClientConfig, meter: &Meter) -> Result<QueryResponse, ClientError> {
    let body = serde_json::to_vec(&config.spec).expect("request serializes");
    let bytes = match meter.call(config.oracle.as_ref(), Endpoint::Query, &body) {
        Ok(b) => b,
        Err(TransportError::Service(ServiceError::QueryRejected(m))) => return Err(ClientError::Rejected(m)),
        Err(e) => return Err(ClientError::OracleUnreachable(e)),
    };
    serde_json::from_slice(&bytes).map_err(|e| ClientError::Malformed(e.to_string()))
}

fn ask_node(node: &dyn Transport, account: &CountRequest, indices: &[u64], meter: &Meter) -> NodeAnswer {
    let attempt = || -> Option<NodeAnswer> {
        let body = serde_json::to_vec(account).ok()?;
        let count: CountResponse = serde_json::from_slice(&meter.call(node, Endpoint::Count, &body).ok()?).ok()?;
        let body = serde_json::to_vec(&RootsRequest { indices: indices.to_vec() }).ok()?;
        let roots: RootsResponse = serde_json::from_slice(&meter.call(node, Endpoint::Roots, &body).ok()?).ok()?;
        Some(NodeAnswer { count: count.count, roots: roots.roots.into_iter().map(|r| (r.index, r.digest)).collect() })
    };
    attempt().unwrap_or_else(|| NodeAnswer::unavailable(indices))
}

fn proof_checks(config: &ClientConfig, resp: &QueryResponse) -> bool {
    let params = config.backend.params();
    if resp.parameter_digest != params.parameter_digest || resp.result.k != resp.chain_view.k {
        return false;
    }
    let Ok(file) = ProofFile::from_base64(&resp.proof) else { return false };
    if file.parameter_digest != params.parameter_digest {
        return false;
    }
    let claim = Claim {
        roots: resp.chain_view.roots.clone(),
        k: resp.chain_view.k,
        result: Ratio { numerator: resp.result.numerator, denominator: resp.result.denominator },
        spec_digest: config.spec.digest(),
    };
    config.backend.verify(&file.proof, &claim)
}

fn verify_phase(config: &ClientConfig, resp: &QueryResponse, meter: &Meter) -> (Verdict, Reason) {
    let indices = resp.chain_view.indices();
    let req = CountRequest { account: config.spec.account };
    let answers: Vec<NodeAnswer> = std::thread::scope(|s| {
        let handles: Vec<_> = config
            .nodes
            .iter()
            .map(|n| s.spawn(|| ask_node(n.as_ref(), &req, &indices, meter)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| NodeAnswer::unavailable(&indices)))
            .collect()
    });
    let d = decide(&resp.chain_view, &answers, || proof_checks(config, resp));
    (d.verdict, d.reason)
}

pub fn run_protocol(config: &ClientConfig) -> Result<ProtocolOutcome, ClientError> {
    if config.nodes.len() < MIN_NODES {
        return Err(ClientError::TooFewNodes(config.nodes.len()));
    }
    let meter = Meter::default();
    let resp = query_phase(config, &meter)?;
    let (verdict, reason) = verify_phase(config, &resp, &meter);
    Ok(ProtocolOutcome { verdict, reason, result: resp.result, view: resp.chain_view, bandwidth: meter.into_ledger() })
}

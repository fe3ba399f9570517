//! Simulated full nodes answering the two lookups a client needs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sslc_core::{tx_count_for_account, tx_root_of, Chain};

use crate::service::{arg, parse, respond, split_mode, BehaviorParseError, Endpoint, Service, ServiceError};
use crate::wire::{CountRequest, CountResponse, RootReply, RootsRequest, RootsResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeBehavior {
    Honest,
    WrongCount(i64),
    WrongRoot(u64),
    Unavailable,
    StaleView(usize),
}

impl fmt::Display for NodeBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeBehavior::Honest => write!(f, "HONEST"),
            NodeBehavior::WrongCount(d) => write!(f, "WRONG_COUNT:{d:+}"),
            NodeBehavior::WrongRoot(i) => write!(f, "WRONG_ROOT:{i}"),
            NodeBehavior::Unavailable => write!(f, "UNAVAILABLE"),
            NodeBehavior::StaleView(h) => write!(f, "STALE_VIEW:{h}"),
        }
    }
}

impl FromStr for NodeBehavior {
    type Err = BehaviorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mode, a) = split_mode(s);
        Ok(match mode.to_ascii_uppercase().as_str() {
            "HONEST" => NodeBehavior::Honest,
            "WRONG_COUNT" => NodeBehavior::WrongCount(arg(s, a)?),
            "WRONG_ROOT" => NodeBehavior::WrongRoot(arg(s, a)?),
            "UNAVAILABLE" => NodeBehavior::Unavailable,
            "STALE_VIEW" => NodeBehavior::StaleView(arg(s, a)?),
            _ => return Err(BehaviorParseError(s.to_string())),
        })
    }
}

impl TryFrom<String> for NodeBehavior {
    type Error = BehaviorParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeBehavior> for String {
    fn from(b: NodeBehavior) -> String {
        b.to_string()
    }
}

#[derive(Debug, Clone)]
pub struct FullNode {
    chain: Arc<Chain>,
    behavior: NodeBehavior,
}

impl FullNode {
    pub fn new(chain: Arc<Chain>, behavior: NodeBehavior) -> Self {
        let chain = match behavior {
            NodeBehavior::StaleView(h) => Arc::new(chain.prefix(h)),
            _ => chain,
        };
        Self { chain, behavior }
    }

    pub fn behavior(&self) -> NodeBehavior {
        self.behavior
    }

    /// ⊥ for an account the node has never seen.
    pub fn count(&self, req: &CountRequest) -> CountResponse {
        let honest = Some(tx_count_for_account(&self.chain, &req.account)).filter(|&c| c > 0);
        let count = match self.behavior {
            NodeBehavior::WrongCount(d) => Some(honest.unwrap_or(0).saturating_add_signed(d)),
            _ => honest,
        };
        CountResponse { count }
    }

    pub fn roots(&self, req: &RootsRequest) -> RootsResponse {
        let roots = req
            .indices
            .iter()
            .map(|&index| {
                let mut digest = tx_root_of(&self.chain, index);
                if self.behavior == NodeBehavior::WrongRoot(index) {
                    digest = digest.map(|d| d.perturbed(0, 1));
                }
                RootReply { index, digest }
            })
            .collect();
        RootsResponse { roots }
    }
}

impl Service for FullNode {
    fn handle(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, ServiceError> {
        if self.behavior == NodeBehavior::Unavailable {
            return Err(ServiceError::Unavailable);
        }
        match endpoint {
            Endpoint::Count => respond(&self.count(&parse(body)?)),
            Endpoint::Roots => respond(&self.roots(&parse(body)?)),
            Endpoint::Query => Err(ServiceError::NotFound(endpoint.to_string())),
        }
    }
}

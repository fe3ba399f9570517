//! The untrusted query oracle, with injectable misbehaviour.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use sslc_core::proof::{prove_claim, ProofBackend, ProveError};
use sslc_core::query::{PartialResult, QueryError};
use sslc_core::statement::{reclaim, Batch};
use sslc_core::{build_claim, AccountId, Block, Chain, Claim, QueryResult, QuerySpec, Transaction, Witness};

use crate::service::{arg, parse, respond, split_mode, BehaviorParseError, Endpoint, Service, ServiceError};
use crate::wire::{ProofFile, QueryResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OracleBehavior {
    Honest,
    /// Leaves the last `n` selected transactions out of the witness.
    OmitTx(u64),
    /// Counts one transaction twice and drops another, keeping `k`.
    DuplicateTx,
    /// Shifts the numerator of an otherwise honest response.
    TamperResult(i64),
    /// Reports a wrong root for the given block.
    TamperRoot(u64),
    TamperK(i64),
    /// Answers over a chain in which one relevant transaction was swapped for a fabricated one.
    ForeignTx,
}

impl OracleBehavior {
    /// One representative per mode, as exercised by the scenario matrix.
    pub const MODES: [OracleBehavior; 7] = [
        OracleBehavior::Honest,
        OracleBehavior::OmitTx(1),
        OracleBehavior::DuplicateTx,
        OracleBehavior::TamperResult(1),
        OracleBehavior::TamperRoot(0),
        OracleBehavior::TamperK(1),
        OracleBehavior::ForeignTx,
    ];
}

impl fmt::Display for OracleBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleBehavior::Honest => write!(f, "HONEST"),
            OracleBehavior::OmitTx(n) => write!(f, "OMIT_TX:{n}"),
            OracleBehavior::DuplicateTx => write!(f, "DUPLICATE_TX"),
            OracleBehavior::TamperResult(d) => write!(f, "TAMPER_RESULT:{d:+}"),
            OracleBehavior::TamperRoot(i) => write!(f, "TAMPER_ROOT:{i}"),
            OracleBehavior::TamperK(d) => write!(f, "TAMPER_K:{d:+}"),
            OracleBehavior::ForeignTx => write!(f, "FOREIGN_TX"),
        }
    }
}

impl FromStr for OracleBehavior {
    type Err = BehaviorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mode, a) = split_mode(s);
        Ok(match mode.to_ascii_uppercase().as_str() {
            "HONEST" => OracleBehavior::Honest,
            "OMIT_TX" => OracleBehavior::OmitTx(if a.is_some() { arg(s, a)? } else { 1 }),
            "DUPLICATE_TX" => OracleBehavior::DuplicateTx,
            "TAMPER_RESULT" => OracleBehavior::TamperResult(if a.is_some() { arg(s, a)? } else { 1 }),
            "TAMPER_ROOT" => OracleBehavior::TamperRoot(if a.is_some() { arg(s, a)? } else { 0 }),
            "TAMPER_K" => OracleBehavior::TamperK(if a.is_some() { arg(s, a)? } else { 1 }),
            "FOREIGN_TX" => OracleBehavior::ForeignTx,
            _ => return Err(BehaviorParseError(s.to_string())),
        })
    }
}

impl TryFrom<String> for OracleBehavior {
    type Error = BehaviorParseError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<OracleBehavior> for String {
    fn from(b: OracleBehavior) -> String {
        b.to_string()
    }
}

pub type SharedBackend = Arc<dyn ProofBackend + Send + Sync>;

pub struct Oracle {
    chain: Arc<Chain>,
    backend: SharedBackend,
    behavior: OracleBehavior,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("blocks", &self.chain.len())
            .field("backend", &self.backend.params().backend)
            .field("behavior", &self.behavior)
            .finish()
    }
}

impl Oracle {
    pub fn new(chain: Arc<Chain>, backend: SharedBackend, behavior: OracleBehavior) -> Self {
        Self { chain, backend, behavior }
    }

    pub fn behavior(&self) -> OracleBehavior {
        self.behavior
    }

    pub fn answer(&self, spec: &QuerySpec) -> Result<QueryResponse, ProveError> {
        let backend = self.backend.as_ref();
        let (honest, witness) = build_claim(&self.chain, spec)?;
        let honest_proof = || prove_claim(backend, spec, &honest, &witness);

        let (mut claim, proof) = match self.behavior {
            OracleBehavior::Honest => (honest.clone(), honest_proof()?),
            OracleBehavior::OmitTx(n) => {
                let (claim, w) = omit(&honest, &witness, spec, n)?;
                let proof = prove_claim(backend, spec, &claim, &w)?;
                (claim, proof)
            }
            OracleBehavior::DuplicateTx => {
                let (claim, w) = duplicate(&honest, &witness, spec)?;
                let proof = match prove_claim(backend, spec, &claim, &w) {
                    Ok(p) => p,
                    Err(_) => honest_proof()?,
                };
                (claim, proof)
            }
            OracleBehavior::TamperResult(d) => {
                let mut claim = honest.clone();
                claim.result.numerator = claim.result.numerator.saturating_add_signed(d);
                (claim, honest_proof()?)
            }
            OracleBehavior::TamperRoot(idx) => {
                let mut claim = honest.clone();
                if !claim.roots.is_empty() {
                    let m = claim.roots.len();
                    let pos = claim.roots.iter().position(|r| r.index == idx).unwrap_or(idx as usize % m);
                    claim.roots[pos].digest = claim.roots[pos].digest.perturbed(0, 1);
                }
                (claim, honest_proof()?)
            }
            OracleBehavior::TamperK(_) => (honest.clone(), honest_proof()?),
            OracleBehavior::ForeignTx => {
                let forged = forge_chain(&self.chain, spec);
                let (claim, w) = build_claim(&forged, spec)?;
                let proof = prove_claim(backend, spec, &claim, &w)?;
                (claim, proof)
            }
        };
        let mut result = QueryResult { numerator: claim.result.numerator, denominator: claim.result.denominator, k: claim.k };
        if let OracleBehavior::TamperK(d) = self.behavior {
            claim.k = claim.k.saturating_add_signed(d);
            result.k = claim.k;
        }
        let parameter_digest = backend.params().parameter_digest;
        Ok(QueryResponse {
            result,
            chain_view: claim.view(),
            proof: ProofFile { proof, parameter_digest }.to_base64(),
            parameter_digest,
        })
    }
}

impl Service for Oracle {
    fn handle(&self, endpoint: Endpoint, body: &[u8]) -> Result<Vec<u8>, ServiceError> {
        if endpoint != Endpoint::Query {
            return Err(ServiceError::NotFound(endpoint.to_string()));
        }
        let spec: QuerySpec = parse(body)?;
        match self.answer(&spec) {
            Ok(r) => respond(&r),
            Err(ProveError::Query(e)) => Err(ServiceError::QueryRejected(e.to_string())),
            Err(e) => Err(ServiceError::Internal(e.to_string())),
        }
    }
}

fn flat(witness: &Witness) -> Vec<(usize, usize)> {
    witness
        .batches
        .iter()
        .enumerate()
        .flat_map(|(b, batch)| (0..batch.len()).map(move |i| (b, i)))
        .collect()
}

/// Drops the trailing `n` transactions (at least one survives) and any root left without one.
fn omit(honest: &Claim, witness: &Witness, spec: &QuerySpec, n: u64) -> Result<(Claim, Witness), QueryError> {
    let mut w = witness.clone();
    let k = w.transaction_count() as u64;
    let mut n = n.min(k.saturating_sub(1));
    while n > 0 {
        let Some(last) = w.batches.last_mut() else { break };
        last.transactions.pop();
        last.paths.pop();
        if last.is_empty() {
            w.batches.pop();
        }
        n -= 1;
    }
    let roots = honest.roots.iter().filter(|r| w.batches.iter().any(|b| b.block_index == r.index)).copied().collect();
    Ok((reclaim(roots, &w, spec)?, w))
}

/// Replaces a transaction with a second copy of one whose contribution differs, placed next to
/// the original. Without such a pair the copy is simply added.
fn duplicate(honest: &Claim, witness: &Witness, spec: &QuerySpec) -> Result<(Claim, Witness), QueryError> {
    let mut w = witness.clone();
    let slots = flat(&w);
    let tx = |(b, i): (usize, usize)| &witness.batches[b].transactions[i];
    let pair = slots.iter().find_map(|&a| {
        slots
            .iter()
            .find(|&&d| d != a && PartialResult::of(tx(d), spec) != PartialResult::of(tx(a), spec))
            .map(|&d| (a, d))
    });
    let insert = |w: &mut Witness, (b, i): (usize, usize)| {
        let batch: &mut Batch = &mut w.batches[b];
        let (t, p) = (batch.transactions[i].clone(), batch.paths[i].clone());
        batch.transactions.insert(i + 1, t);
        batch.paths.insert(i + 1, p);
    };
    match pair {
        Some((keep, (db, di))) => {
            w.batches[db].transactions.remove(di);
            w.batches[db].paths.remove(di);
            let keep = if keep.0 == db && keep.1 > di { (keep.0, keep.1 - 1) } else { keep };
            insert(&mut w, keep);
            w.batches.retain(|b| !b.is_empty());
        }
        None if !slots.is_empty() => insert(&mut w, slots[0]),
        None => {}
    }
    Ok((reclaim(honest.roots.clone(), &w, spec)?, w))
}

/// A copy of `chain` where the first transaction touching the account is replaced by a
/// fabricated one that still touches it.
fn forge_chain(chain: &Chain, spec: &QuerySpec) -> Chain {
    let mut blocks: Vec<Block> = chain.blocks().to_vec();
    for block in blocks.iter_mut() {
        let Some(pos) = block.transactions.iter().position(|t| spec.selects(t)) else { continue };
        let old = &block.transactions[pos];
        let fake = Transaction::new(
            spec.account,
            AccountId([0xfa; 32]),
            (old.amount() + 1) % (sslc_core::ledger::MAX_AMOUNT + 1),
            old.nonce() ^ 0xdead_beef,
            old.payload_tag(),
        )
        .expect("amount within range");
        let mut txs = block.transactions.clone();
        txs[pos] = fake;
        *block = Block::new(block.index, txs).expect("same shape as a valid block");
        break;
    }
    Chain::new(blocks).expect("indices unchanged")
}

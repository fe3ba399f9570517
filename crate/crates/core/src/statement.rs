//! Public claim, private witness, and a direct checker for the relation the proofs attest.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::hash::{hash_with_domain, Digest, Domain};
use crate::ledger::{Chain, Transaction};
use crate::merkle::{verify_path, MerklePath};
use crate::query::{finalize, map_block, reduce_all, PartialResult, QueryError, QueryResult, QuerySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RootEntry {
    pub index: u64,
    pub digest: Digest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
}

impl From<&QueryResult> for Ratio {
    fn from(r: &QueryResult) -> Self {
        Self { numerator: r.numerator, denominator: r.denominator }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub roots: Vec<RootEntry>,
    pub k: u64,
    pub result: Ratio,
    pub spec_digest: Digest,
}

/// Number of field elements in [`Claim::to_elements`].
pub const CLAIM_ELEMENTS: usize = 11;

impl Claim {
    pub fn view(&self) -> ChainView {
        ChainView { roots: self.roots.clone(), k: self.k }
    }

    pub fn roots_accumulator(&self) -> Digest {
        accumulate_roots(&self.roots)
    }

    /// [spec_digest, roots accumulator, k, numerator, denominator]: the final proof's public inputs.
    pub fn to_elements(&self) -> [FieldElement; CLAIM_ELEMENTS] {
        let mut out = [FieldElement::ZERO; CLAIM_ELEMENTS];
        out[..4].copy_from_slice(&self.spec_digest.0);
        out[4..8].copy_from_slice(&self.roots_accumulator().0);
        out[8] = FieldElement::new(self.k);
        out[9] = FieldElement::new(self.result.numerator);
        out[10] = FieldElement::new(self.result.denominator);
        out
    }

    /// Whether every numeric field is representable without reduction.
    pub fn is_canonical(&self) -> bool {
        [self.k, self.result.numerator, self.result.denominator]
            .iter()
            .all(|&v| FieldElement::from_canonical(v).is_some())
    }
}

/// One step of the running commitment to the covered block roots.
pub fn roots_step(acc: &Digest, index: u64, root: &Digest) -> Digest {
    let mut buf = [FieldElement::ZERO; 9];
    buf[..4].copy_from_slice(&acc.0);
    buf[4] = FieldElement::new(index);
    buf[5..].copy_from_slice(&root.0);
    hash_with_domain(Domain::Roots, &buf)
}

pub fn accumulate_roots(roots: &[RootEntry]) -> Digest {
    roots.iter().fold(Digest::ZERO, |acc, r| roots_step(&acc, r.index, &r.digest))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainView {
    pub roots: Vec<RootEntry>,
    pub k: u64,
}

impl ChainView {
    pub fn indices(&self) -> Vec<u64> {
        self.roots.iter().map(|r| r.index).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub block_index: u64,
    pub transactions: Vec<Transaction>,
    pub paths: Vec<MerklePath>,
    /// Hash of the last transaction of this block seen in an earlier batch; `None` opens the block.
    pub carry_in_hash: Option<Digest>,
}

impl Batch {
    /// Placeholder batch proving nothing, used when a query covers no transactions.
    pub fn empty() -> Self {
        Self { block_index: 0, transactions: Vec::new(), paths: Vec::new(), carry_in_hash: None }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn last_hash(&self) -> Option<Digest> {
        self.transactions.last().map(Transaction::tx_hash)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Witness {
    pub batches: Vec<Batch>,
}

impl Witness {
    pub fn transaction_count(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }

    /// Splits every batch into chunks of at most `capacity`, threading the carry hash through the
    /// pieces of each block. Batches never merge, so no chunk spans two blocks.
    pub fn rebatch(&self, capacity: usize) -> Witness {
        assert!(capacity > 0, "batch capacity must be positive");
        let mut out = Vec::new();
        for b in &self.batches {
            if b.is_empty() {
                out.push(b.clone());
                continue;
            }
            let mut carry = b.carry_in_hash;
            for (txs, paths) in b.transactions.chunks(capacity).zip(b.paths.chunks(capacity)) {
                out.push(Batch {
                    block_index: b.block_index,
                    transactions: txs.to_vec(),
                    paths: paths.to_vec(),
                    carry_in_hash: carry,
                });
                carry = txs.last().map(Transaction::tx_hash);
            }
        }
        Witness { batches: out }
    }
}

/// Builds the honest claim and its witness: one batch per block with at least one selected
/// transaction.
pub fn build_claim(chain: &Chain, spec: &QuerySpec) -> Result<(Claim, Witness), QueryError> {
    let mut roots = Vec::new();
    let mut batches = Vec::new();
    let mut partials = Vec::new();
    for block in chain.blocks() {
        let (partial, relevant) = map_block(block, spec);
        partials.push(partial);
        if relevant.is_empty() {
            continue;
        }
        roots.push(RootEntry { index: block.index, digest: block.tx_root });
        let (transactions, paths) = relevant.into_iter().unzip();
        batches.push(Batch { block_index: block.index, transactions, paths, carry_in_hash: None });
    }
    let result = reduce_all(&partials, spec)?;
    let claim = Claim { roots, k: result.k, result: Ratio::from(&result), spec_digest: spec.digest() };
    Ok((claim, Witness { batches }))
}

/// Recomputes a claim's result and count from an arbitrary witness, keeping its roots.
pub fn reclaim(roots: Vec<RootEntry>, witness: &Witness, spec: &QuerySpec) -> Result<Claim, QueryError> {
    let partial = witness
        .batches
        .iter()
        .flat_map(|b| &b.transactions)
        .fold(PartialResult::default(), |acc, tx| acc.combine(PartialResult::of(tx, spec)));
    let (numerator, denominator) = finalize(partial.sum, partial.count, spec.finalize)?;
    Ok(Claim {
        roots,
        k: witness.transaction_count() as u64,
        result: Ratio { numerator, denominator },
        spec_digest: spec.digest(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationFailure {
    ResultMismatch,
    CountMismatch,
    BadPath,
    OrderViolation,
    PredicateViolation,
}

impl fmt::Display for RelationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RelationFailure::ResultMismatch => "RESULT_MISMATCH",
            RelationFailure::CountMismatch => "COUNT_MISMATCH",
            RelationFailure::BadPath => "BAD_PATH",
            RelationFailure::OrderViolation => "ORDER_VIOLATION",
            RelationFailure::PredicateViolation => "PREDICATE_VIOLATION",
        })
    }
}

/// Checks the relation bullet by bullet. Membership is checked first, then the predicate, then
/// ordering, then the count, then the result, so a mutation aimed at one bullet reports that
/// bullet even when it disturbs later ones as a side effect.
pub fn check_relation(claim: &Claim, witness: &Witness, spec: &QuerySpec) -> Result<(), RelationFailure> {
    use RelationFailure::*;

    // Membership against the claimed roots; every claimed root must be exercised.
    if claim.roots.windows(2).any(|w| w[0].index >= w[1].index) {
        return Err(BadPath);
    }
    let roots: BTreeMap<u64, Digest> = claim.roots.iter().map(|r| (r.index, r.digest)).collect();
    let mut used = BTreeMap::new();
    for b in &witness.batches {
        if b.transactions.len() != b.paths.len() {
            return Err(BadPath);
        }
        if b.is_empty() {
            continue;
        }
        let root = roots.get(&b.block_index).ok_or(BadPath)?;
        if !b.transactions.iter().zip(&b.paths).all(|(tx, p)| verify_path(root, &tx.tx_hash(), p)) {
            return Err(BadPath);
        }
        used.insert(b.block_index, ());
    }
    if used.len() != roots.len() {
        return Err(BadPath);
    }

    if claim.spec_digest != spec.digest() {
        return Err(PredicateViolation);
    }
    if !witness.batches.iter().flat_map(|b| &b.transactions).all(|tx| spec.selects(tx)) {
        return Err(PredicateViolation);
    }

    let mut prev_block: Option<u64> = None;
    let mut last_hash: Option<Digest> = None;
    for b in witness.batches.iter().filter(|b| !b.is_empty()) {
        if prev_block.is_some_and(|p| b.block_index < p) {
            return Err(OrderViolation);
        }
        let expected = if prev_block == Some(b.block_index) { last_hash } else { None };
        if b.carry_in_hash != expected {
            return Err(OrderViolation);
        }
        let mut cur = b.carry_in_hash;
        for tx in &b.transactions {
            if cur.is_some_and(|c| tx.tx_hash() <= c) {
                return Err(OrderViolation);
            }
            cur = Some(tx.tx_hash());
        }
        prev_block = Some(b.block_index);
        last_hash = cur;
    }

    if witness.transaction_count() as u64 != claim.k {
        return Err(CountMismatch);
    }

    match reclaim(claim.roots.clone(), witness, spec) {
        Ok(c) if c.result == claim.result => Ok(()),
        _ => Err(ResultMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{generate_chain, AccountId, Block};
    use crate::query::evaluate_native;
    use alloc::vec;

    fn acc() -> AccountId {
        AccountId([5; 32])
    }

    #[test]
    fn honest_claim_shape() {
        let c = generate_chain(2, 16, 64, 8, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();
        assert_eq!(claim.roots.len(), 16);
        assert_eq!(claim.k, 128);
        let r = evaluate_native(&c, &spec).unwrap();
        assert_eq!(claim.result, Ratio::from(&r));
        assert_eq!(check_relation(&claim, &w, &spec), Ok(()));
        assert_eq!(check_relation(&claim, &w.rebatch(3), &spec), Ok(()));
    }

    #[test]
    fn only_matching_block_is_claimed() {
        let other = AccountId([6; 32]);
        let mut blocks = vec![];
        for i in 0..5u64 {
            let (s, r) = if i == 3 { (acc(), other) } else { (other, other) };
            blocks.push(Block::new(i, vec![Transaction::new(s, r, 10 + i, i, 0).unwrap()]).unwrap());
        }
        let c = Chain::new(blocks).unwrap();
        let (claim, _) = build_claim(&c, &QuerySpec::average_amount(acc())).unwrap();
        assert_eq!(claim.roots, [RootEntry { index: 3, digest: c.blocks()[3].tx_root }]);
    }

    #[test]
    fn rebatch_threads_carry() {
        let c = generate_chain(3, 2, 64, 10, acc()).unwrap();
        let (_, w) = build_claim(&c, &QuerySpec::average_amount(acc())).unwrap();
        let r = w.rebatch(4);
        assert_eq!(r.batches.iter().map(Batch::len).collect::<Vec<_>>(), [4, 4, 2, 4, 4, 2]);
        assert_eq!(r.batches[1].carry_in_hash, r.batches[0].last_hash());
        assert_eq!(r.batches[3].carry_in_hash, None);
    }

    #[test]
    fn targeted_mutations() {
        let c = generate_chain(4, 3, 32, 4, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();

        let mut dup = w.clone();
        dup.batches[0].transactions[1] = dup.batches[0].transactions[0].clone();
        dup.batches[0].paths[1] = dup.batches[0].paths[0].clone();
        assert_eq!(check_relation(&claim, &dup, &spec), Err(RelationFailure::OrderViolation));

        let mut dropped = w.clone();
        dropped.batches[1].transactions.pop();
        dropped.batches[1].paths.pop();
        assert_eq!(check_relation(&claim, &dropped, &spec), Err(RelationFailure::CountMismatch));

        let mut minimal = claim.clone();
        minimal.roots.remove(1);
        assert_eq!(check_relation(&minimal, &w, &spec), Err(RelationFailure::BadPath));
    }
}

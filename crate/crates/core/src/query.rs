//! Map-reduce queries: per-block map, order-free fold, exact rational finalization.
//!
//! A query always selects the transactions touching `account`; that selection is what `k`
//! counts and what full nodes can confirm. The predicate then decides which selected
//! transactions the map phase folds into the result.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::field::{FieldElement, MODULUS};
use crate::hash::{hash_with_domain, Digest, Domain};
use crate::ledger::{AccountId, Block, Chain, Transaction};
use crate::merkle::{open, MerklePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Predicate {
    AccountTouch,
    PayloadTag(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MapKind {
    SumAmountAndCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReduceKind {
    FoldSumCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Finalize {
    Average,
    Total,
    Count,
}

impl Finalize {
    pub fn code(self) -> u64 {
        match self {
            Finalize::Average => 0,
            Finalize::Total => 1,
            Finalize::Count => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub predicate: Predicate,
    pub map_kind: MapKind,
    pub reduce_kind: ReduceKind,
    pub finalize: Finalize,
    pub account: AccountId,
}

pub const SPEC_ELEMENTS: usize = 13;

impl QuerySpec {
    pub fn average_amount(account: AccountId) -> Self {
        Self {
            predicate: Predicate::AccountTouch,
            map_kind: MapKind::SumAmountAndCount,
            reduce_kind: ReduceKind::FoldSumCount,
            finalize: Finalize::Average,
            account,
        }
    }

    pub fn with_finalize(mut self, finalize: Finalize) -> Self {
        self.finalize = finalize;
        self
    }

    pub fn with_predicate(mut self, predicate: Predicate) -> Self {
        self.predicate = predicate;
        self
    }

    /// Selection: the transactions `k` counts.
    pub fn selects(&self, tx: &Transaction) -> bool {
        tx.touches(&self.account)
    }

    /// Whether a selected transaction contributes to the fold.
    pub fn matches(&self, tx: &Transaction) -> bool {
        match self.predicate {
            Predicate::AccountTouch => true,
            Predicate::PayloadTag(t) => tx.payload_tag() == t,
        }
    }

    /// [predicate kind, tag, map, reduce, finalize, account limbs x 8]
    pub fn to_elements(&self) -> [FieldElement; SPEC_ELEMENTS] {
        let (kind, tag) = match self.predicate {
            Predicate::AccountTouch => (0, 0),
            Predicate::PayloadTag(t) => (1, t as u64),
        };
        let mut out = [FieldElement::ZERO; SPEC_ELEMENTS];
        out[0] = FieldElement::new(kind);
        out[1] = FieldElement::new(tag);
        out[2] = FieldElement::new(0);
        out[3] = FieldElement::new(0);
        out[4] = FieldElement::new(self.finalize.code());
        out[5..].copy_from_slice(&self.account.to_elements());
        out
    }

    pub fn digest(&self) -> Digest {
        hash_with_domain(Domain::Spec, &self.to_elements())
    }
}

pub fn spec_digest(spec: &QuerySpec) -> Digest {
    spec.digest()
}

/// Per-block map output. `selected` counts every transaction the query covers, `count` and
/// `sum` only those the predicate matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PartialResult {
    pub sum: u64,
    pub count: u64,
    pub selected: u64,
}

impl PartialResult {
    pub fn of(tx: &Transaction, spec: &QuerySpec) -> Self {
        if spec.matches(tx) {
            Self { sum: tx.amount(), count: 1, selected: 1 }
        } else {
            Self { sum: 0, count: 0, selected: 1 }
        }
    }

    pub fn combine(self, other: Self) -> Self {
        Self {
            sum: self.sum.saturating_add(other.sum),
            count: self.count + other.count,
            selected: self.selected + other.selected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub numerator: u64,
    pub denominator: u64,
    pub k: u64,
}

impl QueryResult {
    /// Decimal rendering truncated to `precision` fractional digits.
    pub fn to_decimal(&self, precision: usize) -> String {
        let mut s = String::new();
        let _ = write!(s, "{}", self.numerator / self.denominator);
        if precision > 0 {
            s.push('.');
            let mut rem = (self.numerator % self.denominator) as u128;
            for _ in 0..precision {
                rem *= 10;
                let _ = write!(s, "{}", rem / self.denominator as u128);
                rem %= self.denominator as u128;
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("average over zero matching transactions")]
    EmptyQuery,
    #[error("sum does not fit in the field")]
    Overflow,
}

/// (numerator, denominator) for the finalize step.
pub fn finalize(sum: u64, count: u64, kind: Finalize) -> Result<(u64, u64), QueryError> {
    if sum >= MODULUS {
        return Err(QueryError::Overflow);
    }
    match kind {
        Finalize::Average if count == 0 => Err(QueryError::EmptyQuery),
        Finalize::Average => Ok((sum, count)),
        Finalize::Total => Ok((sum, 1)),
        Finalize::Count => Ok((count, 1)),
    }
}

/// Selected transactions of a block, ascending by hash, each with its opening.
pub type RelevantList = Vec<(Transaction, MerklePath)>;

pub fn map_block(block: &Block, spec: &QuerySpec) -> (PartialResult, RelevantList) {
    let positions: Vec<usize> = (0..block.transactions.len())
        .filter(|&i| spec.selects(&block.transactions[i]))
        .collect();
    if positions.is_empty() {
        return (PartialResult::default(), Vec::new());
    }
    let tree = block.tree();
    let mut relevant: RelevantList = positions
        .into_iter()
        .map(|i| (block.transactions[i].clone(), open(&tree, i).expect("index in range")))
        .collect();
    relevant.sort_by_key(|(tx, _)| tx.tx_hash());
    let partial = relevant
        .iter()
        .fold(PartialResult::default(), |acc, (tx, _)| acc.combine(PartialResult::of(tx, spec)));
    (partial, relevant)
}

/// Map without openings, for callers that only need the value.
pub fn partial_of(block: &Block, spec: &QuerySpec) -> PartialResult {
    block
        .transactions
        .iter()
        .filter(|tx| spec.selects(tx))
        .fold(PartialResult::default(), |acc, tx| acc.combine(PartialResult::of(tx, spec)))
}

pub fn reduce_all(partials: &[PartialResult], spec: &QuerySpec) -> Result<QueryResult, QueryError> {
    let total = partials.iter().fold(PartialResult::default(), |a, p| a.combine(*p));
    let (numerator, denominator) = finalize(total.sum, total.count, spec.finalize)?;
    Ok(QueryResult { numerator, denominator, k: total.selected })
}

pub fn evaluate_native(chain: &Chain, spec: &QuerySpec) -> Result<QueryResult, QueryError> {
    let partials: Vec<PartialResult> = chain.blocks().iter().map(|b| partial_of(b, spec)).collect();
    reduce_all(&partials, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{generate_chain, tx_count_for_account};
    use alloc::vec;

    fn acc() -> AccountId {
        AccountId([3; 32])
    }

    fn other() -> AccountId {
        AccountId([4; 32])
    }

    #[test]
    fn map_of_small_blocks() {
        let spec = QuerySpec::average_amount(acc());
        let b = Block::new(0, vec![Transaction::new(other(), other(), 9, 0, 0).unwrap()]).unwrap();
        assert_eq!(map_block(&b, &spec), (PartialResult::default(), vec![]));

        let txs = vec![
            Transaction::new(acc(), other(), 5, 1, 0).unwrap(),
            Transaction::new(other(), other(), 100, 2, 0).unwrap(),
            Transaction::new(other(), acc(), 7, 3, 0).unwrap(),
        ];
        let b = Block::new(0, txs).unwrap();
        let (p, rel) = map_block(&b, &spec);
        assert_eq!((p.sum, p.count), (12, 2));
        assert_eq!(rel.len(), 2);
        assert!(rel[0].0.tx_hash() < rel[1].0.tx_hash());
    }

    #[test]
    fn reduce_examples() {
        let spec = QuerySpec::average_amount(acc());
        let p = |sum, count| PartialResult { sum, count, selected: count };
        let r = reduce_all(&[p(12, 2), p(8, 2)], &spec).unwrap();
        assert_eq!((r.numerator, r.denominator, r.k), (20, 4, 4));
        assert_eq!(r.to_decimal(0), "5");
        assert_eq!(reduce_all(&[p(8, 2), p(12, 2)], &spec).unwrap(), r);
        assert_eq!(reduce_all(&[p(0, 0), p(0, 0)], &spec), Err(QueryError::EmptyQuery));
        assert_eq!(reduce_all(&[], &spec.with_finalize(Finalize::Count)).unwrap().numerator, 0);
    }

    #[test]
    fn single_block_single_match() {
        let spec = QuerySpec::average_amount(acc());
        let b = Block::new(0, vec![Transaction::new(acc(), other(), 3, 0, 0).unwrap()]).unwrap();
        let c = Chain::new(vec![b]).unwrap();
        assert_eq!(
            evaluate_native(&c, &spec).unwrap(),
            QueryResult { numerator: 3, denominator: 1, k: 1 }
        );
    }

    #[test]
    fn generated_chain_against_flat_scan() {
        let c = generate_chain(1, 16, 256, 8, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let r = evaluate_native(&c, &spec).unwrap();
        assert_eq!(r.k, 128);
        let flat: Vec<&Transaction> = c.blocks().iter().flat_map(|b| b.transactions.iter()).collect();
        let mine: Vec<u64> = flat.iter().filter(|t| t.sender() == acc() || t.receiver() == acc()).map(|t| t.amount()).collect();
        assert_eq!(r.numerator, mine.iter().sum::<u64>());
        assert_eq!(r.denominator, mine.len() as u64);
        let total = evaluate_native(&c, &spec.with_finalize(Finalize::Total)).unwrap();
        assert_eq!((total.numerator, total.denominator), (r.numerator, 1));
        assert_eq!(r.k, tx_count_for_account(&c, &acc()));
    }

    #[test]
    fn payload_filter_keeps_k() {
        let c = generate_chain(9, 6, 64, 5, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc()).with_predicate(Predicate::PayloadTag(1)).with_finalize(Finalize::Count);
        let r = evaluate_native(&c, &spec).unwrap();
        assert_eq!(r.k, 30);
        let votes = c.blocks().iter().flat_map(|b| &b.transactions).filter(|t| t.touches(&acc()) && t.payload_tag() == 1).count();
        assert_eq!(r.numerator, votes as u64);
    }

    #[test]
    fn decimal_rendering() {
        let r = QueryResult { numerator: 10, denominator: 3, k: 3 };
        assert_eq!(r.to_decimal(4), "3.3333");
        assert_eq!(QueryResult { numerator: 1, denominator: 8, k: 8 }.to_decimal(3), "0.125");
    }

    #[test]
    fn spec_json_shape() {
        let spec = QuerySpec::average_amount(acc()).with_predicate(Predicate::PayloadTag(2));
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"PAYLOAD_TAG\":2"));
        assert!(json.contains("\"SUM_AMOUNT_AND_COUNT\""));
        assert_eq!(serde_json::from_str::<QuerySpec>(&json).unwrap(), spec);
        assert_ne!(spec.digest(), QuerySpec::average_amount(acc()).digest());
    }
}

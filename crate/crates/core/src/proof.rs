//! Backend contract for the recursive proof chain and the state machine every step enforces.
//!
//! A query is proven as a linear chain: one step per batch, each step consuming the previous
//! step's public state, then a reduce step that turns the final state into the claim. The
//! native mirror of one step, [`apply_batch`], is the reference the circuits are tested against.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::hash::{hash_with_domain, Digest, Domain};
use crate::ledger::Chain;
use crate::params::HashParams;
use crate::query::{finalize, QueryError, QueryResult, QuerySpec};
use crate::statement::{accumulate_roots, build_claim, roots_step, Batch, ChainView, Claim, RelationFailure, Witness};

/// Largest supported tree depth; leaf indices must fit the circuits' bit decomposition.
pub const MAX_TREE_DEPTH: usize = 32;

/// Block indices are range-checked to 32 bits in-circuit.
pub const MAX_BLOCK_INDEX: u64 = u32::MAX as u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitShape {
    pub batch_capacity: usize,
    pub tree_depth: usize,
}

impl CircuitShape {
    pub const fn new(batch_capacity: usize, tree_depth: usize) -> Self {
        Self { batch_capacity, tree_depth }
    }

    pub fn validate(&self) -> Result<(), SetupError> {
        if self.batch_capacity == 0 || self.tree_depth == 0 || self.tree_depth > MAX_TREE_DEPTH {
            return Err(SetupError::UnsupportedShape(*self));
        }
        Ok(())
    }
}

impl fmt::Display for CircuitShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "capacity {} / depth {}", self.batch_capacity, self.tree_depth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Native,
    Plonky2,
}

impl BackendKind {
    fn code(self) -> u64 {
        match self {
            BackendKind::Native => 1,
            BackendKind::Plonky2 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendParams {
    pub backend: BackendKind,
    pub shape: CircuitShape,
    pub parameter_digest: Digest,
}

impl BackendParams {
    /// Binds the hash parameters, the backend, the shape, and backend-specific circuit
    /// commitments (`extra`) into one digest.
    pub fn derive(backend: BackendKind, shape: CircuitShape, extra: &[Digest]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(&HashParams::current().digest().0);
        buf.push(FieldElement::new(backend.code()));
        buf.push(FieldElement::new(shape.batch_capacity as u64));
        buf.push(FieldElement::new(shape.tree_depth as u64));
        for d in extra {
            buf.extend_from_slice(&d.0);
        }
        Self { backend, shape, parameter_digest: hash_with_domain(Domain::Params, &buf) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SetupError {
    #[error("unsupported circuit shape ({0})")]
    UnsupportedShape(CircuitShape),
    #[error("backend setup failed: {0}")]
    Backend(String),
}

/// Public state threaded through the recursive chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepState {
    pub spec_digest: Digest,
    /// Running commitment to every block root opened so far.
    pub roots_acc: Digest,
    pub has_block: bool,
    pub block_index: u64,
    pub block_root: Digest,
    /// Hash of the last transaction proven in the current block.
    pub carry_hash: Digest,
    pub running_sum: u64,
    pub running_count: u64,
    /// Selected transactions so far.
    pub k: u64,
    pub step_index: u64,
}

pub const STEP_ELEMENTS: usize = 22;

impl StepState {
    /// The state a base step extends.
    pub fn genesis() -> Self {
        Self {
            spec_digest: Digest::ZERO,
            roots_acc: Digest::ZERO,
            has_block: false,
            block_index: 0,
            block_root: Digest::ZERO,
            carry_hash: Digest::ZERO,
            running_sum: 0,
            running_count: 0,
            k: 0,
            step_index: 0,
        }
    }

    pub fn to_elements(&self) -> [FieldElement; STEP_ELEMENTS] {
        let mut out = [FieldElement::ZERO; STEP_ELEMENTS];
        out[0..4].copy_from_slice(&self.spec_digest.0);
        out[4..8].copy_from_slice(&self.roots_acc.0);
        out[8] = FieldElement::from(self.has_block);
        out[9] = FieldElement::new(self.block_index);
        out[10..14].copy_from_slice(&self.block_root.0);
        out[14..18].copy_from_slice(&self.carry_hash.0);
        out[18] = FieldElement::new(self.running_sum);
        out[19] = FieldElement::new(self.running_count);
        out[20] = FieldElement::new(self.k);
        out[21] = FieldElement::new(self.step_index);
        out
    }

    pub fn from_elements(e: &[FieldElement]) -> Option<Self> {
        if e.len() != STEP_ELEMENTS || e[8].value() > 1 {
            return None;
        }
        let d = |i: usize| Digest([e[i], e[i + 1], e[i + 2], e[i + 3]]);
        Some(Self {
            spec_digest: d(0),
            roots_acc: d(4),
            has_block: e[8].value() == 1,
            block_index: e[9].value(),
            block_root: d(10),
            carry_hash: d(14),
            running_sum: e[18].value(),
            running_count: e[19].value(),
            k: e[20].value(),
            step_index: e[21].value(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StepError {
    #[error("batch of {len} exceeds capacity {capacity}")]
    CapacityExceeded { len: usize, capacity: usize },
    #[error("batch violates the relation: {0}")]
    Relation(RelationFailure),
    #[error("step is bound to a different query")]
    SpecMismatch,
    #[error("block index {0} does not fit in 32 bits")]
    BlockIndexOutOfRange(u64),
}

impl StepError {
    pub fn relation(&self) -> Option<RelationFailure> {
        match self {
            StepError::Relation(r) => Some(*r),
            StepError::SpecMismatch => Some(RelationFailure::PredicateViolation),
            StepError::CapacityExceeded { .. } | StepError::BlockIndexOutOfRange(_) => None,
        }
    }
}

/// One recursive step, natively. `prev == None` is the base case. `root` is the claimed root of
/// the batch's block (ignored for an empty batch).
pub fn apply_batch(
    prev: Option<&StepState>,
    spec: &QuerySpec,
    batch: &Batch,
    root: &Digest,
    shape: &CircuitShape,
) -> Result<StepState, StepError> {
    use RelationFailure::*;

    let spec_digest = spec.digest();
    let prev = match prev {
        Some(p) if p.spec_digest != spec_digest => return Err(StepError::SpecMismatch),
        Some(p) => *p,
        None => StepState::genesis(),
    };
    if batch.len() > shape.batch_capacity {
        return Err(StepError::CapacityExceeded { len: batch.len(), capacity: shape.batch_capacity });
    }
    if batch.transactions.len() != batch.paths.len() {
        return Err(StepError::Relation(BadPath));
    }
    let mut next = StepState { spec_digest, step_index: prev.step_index + 1, ..prev };
    if batch.is_empty() {
        return Ok(next);
    }
    if batch.block_index > MAX_BLOCK_INDEX {
        return Err(StepError::BlockIndexOutOfRange(batch.block_index));
    }

    for (tx, path) in batch.transactions.iter().zip(&batch.paths) {
        if path.depth() > shape.tree_depth || path.root_from(&tx.tx_hash()).as_ref() != Some(root) {
            return Err(StepError::Relation(BadPath));
        }
    }
    if !batch.transactions.iter().all(|tx| spec.selects(tx)) {
        return Err(StepError::Relation(PredicateViolation));
    }

    let mut lower = match batch.carry_in_hash {
        None => {
            if prev.has_block && batch.block_index <= prev.block_index {
                return Err(StepError::Relation(OrderViolation));
            }
            next.roots_acc = roots_step(&prev.roots_acc, batch.block_index, root);
            None
        }
        Some(c) => {
            let continues = prev.has_block
                && batch.block_index == prev.block_index
                && *root == prev.block_root
                && c == prev.carry_hash;
            if !continues {
                return Err(StepError::Relation(OrderViolation));
            }
            Some(c)
        }
    };
    for tx in &batch.transactions {
        if lower.is_some_and(|l| tx.tx_hash() <= l) {
            return Err(StepError::Relation(OrderViolation));
        }
        lower = Some(tx.tx_hash());
        if spec.matches(tx) {
            next.running_sum += tx.amount();
            next.running_count += 1;
        }
    }
    next.has_block = true;
    next.block_index = batch.block_index;
    next.block_root = *root;
    next.carry_hash = lower.expect("nonempty batch");
    next.k += batch.len() as u64;
    Ok(next)
}

/// What the reduce step enforces between the last step state and the claim.
pub fn reduce_check(state: &StepState, spec: &QuerySpec, claim: &Claim) -> Result<(), RelationFailure> {
    if state.spec_digest != spec.digest() || claim.spec_digest != state.spec_digest {
        return Err(RelationFailure::PredicateViolation);
    }
    if state.roots_acc != accumulate_roots(&claim.roots) {
        return Err(RelationFailure::BadPath);
    }
    if state.k != claim.k {
        return Err(RelationFailure::CountMismatch);
    }
    match finalize(state.running_sum, state.running_count, spec.finalize) {
        Ok((n, d)) if n == claim.result.numerator && d == claim.result.denominator => Ok(()),
        _ => Err(RelationFailure::ResultMismatch),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublicInputs {
    Step(StepState),
    Final(Claim),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub bytes: Vec<u8>,
    pub public_inputs: PublicInputs,
}

impl Proof {
    pub fn step_state(&self) -> Option<&StepState> {
        match &self.public_inputs {
            PublicInputs::Step(s) => Some(s),
            PublicInputs::Final(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProveError {
    #[error("no proof exists for this witness: {0}")]
    WitnessUnsatisfiable(StepError),
    #[error("previous proof does not verify")]
    InvalidPredecessor,
    #[error("claim rejected by the reduce step: {0}")]
    ReduceUnsatisfiable(RelationFailure),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("backend failure: {0}")]
    Backend(String),
}

impl ProveError {
    pub fn relation(&self) -> Option<RelationFailure> {
        match self {
            ProveError::WitnessUnsatisfiable(e) => e.relation(),
            ProveError::ReduceUnsatisfiable(r) => Some(*r),
            _ => None,
        }
    }
}

pub trait ProofBackend {
    fn params(&self) -> &BackendParams;

    fn prove_base(&self, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError>;

    fn prove_step(&self, prev: &Proof, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError>;

    fn prove_reduce(&self, last: &Proof, spec: &QuerySpec, claim: &Claim) -> Result<Proof, ProveError>;

    /// False on any malformation, never panics.
    fn verify(&self, proof: &Proof, claim: &Claim) -> bool;
}

impl<B: ProofBackend + ?Sized> ProofBackend for &B {
    fn params(&self) -> &BackendParams {
        (**self).params()
    }
    fn prove_base(&self, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        (**self).prove_base(spec, batch, root)
    }
    fn prove_step(&self, prev: &Proof, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        (**self).prove_step(prev, spec, batch, root)
    }
    fn prove_reduce(&self, last: &Proof, spec: &QuerySpec, claim: &Claim) -> Result<Proof, ProveError> {
        (**self).prove_reduce(last, spec, claim)
    }
    fn verify(&self, proof: &Proof, claim: &Claim) -> bool {
        (**self).verify(proof, claim)
    }
}

/// The step sequence for a witness: chunks of at most `capacity`, or a single empty batch when
/// there is nothing to prove.
pub fn partition(witness: &Witness, capacity: usize) -> Vec<Batch> {
    let batches = witness.rebatch(capacity).batches;
    if batches.iter().all(Batch::is_empty) {
        alloc::vec![Batch::empty()]
    } else {
        batches.into_iter().filter(|b| !b.is_empty()).collect()
    }
}

/// Proves `claim` from `witness`: base, steps, reduce.
pub fn prove_claim<B: ProofBackend + ?Sized>(
    backend: &B,
    spec: &QuerySpec,
    claim: &Claim,
    witness: &Witness,
) -> Result<Proof, ProveError> {
    let batches = partition(witness, backend.params().shape.batch_capacity);
    let root_of = |b: &Batch| -> Result<Digest, ProveError> {
        if b.is_empty() {
            return Ok(Digest::ZERO);
        }
        claim
            .roots
            .iter()
            .find(|r| r.index == b.block_index)
            .map(|r| r.digest)
            .ok_or(ProveError::WitnessUnsatisfiable(StepError::Relation(RelationFailure::BadPath)))
    };
    let mut proof = backend.prove_base(spec, &batches[0], &root_of(&batches[0])?)?;
    for b in &batches[1..] {
        proof = backend.prove_step(&proof, spec, b, &root_of(b)?)?;
    }
    backend.prove_reduce(&proof, spec, claim)
}

pub fn prove_query<B: ProofBackend + ?Sized>(
    backend: &B,
    chain: &Chain,
    spec: &QuerySpec,
) -> Result<(QueryResult, ChainView, Proof), ProveError> {
    let (claim, witness) = build_claim(chain, spec)?;
    let proof = prove_claim(backend, spec, &claim, &witness)?;
    let result = QueryResult {
        numerator: claim.result.numerator,
        denominator: claim.result.denominator,
        k: claim.k,
    };
    Ok((result, claim.view(), proof))
}

/// Number of recursive steps `prove_query` takes for a witness.
pub fn step_count(witness: &Witness, capacity: usize) -> usize {
    partition(witness, capacity).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{generate_chain, AccountId};

    fn acc() -> AccountId {
        AccountId([8; 32])
    }

    #[test]
    fn partition_arithmetic() {
        let c = generate_chain(1, 16, 32, 8, acc()).unwrap();
        let (_, w) = build_claim(&c, &QuerySpec::average_amount(acc())).unwrap();
        // Batches never span blocks, so 16 blocks take 16 steps even at a large capacity.
        assert_eq!(step_count(&w, 1000), 16);
        assert_eq!(step_count(&w, 3), 16 * 3);
        assert_eq!(step_count(&Witness::default(), 10), 1);

        let c = generate_chain(1, 4, 1000, 1000, acc()).unwrap();
        let (_, w) = build_claim(&c, &QuerySpec::average_amount(acc())).unwrap();
        assert_eq!(step_count(&w, 1000), 4);
    }

    #[test]
    fn state_elements_round_trip() {
        let c = generate_chain(3, 2, 16, 3, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();
        let shape = CircuitShape::new(8, 8);
        let s1 = apply_batch(None, &spec, &w.batches[0], &claim.roots[0].digest, &shape).unwrap();
        let s2 = apply_batch(Some(&s1), &spec, &w.batches[1], &claim.roots[1].digest, &shape).unwrap();
        assert_eq!(StepState::from_elements(&s2.to_elements()), Some(s2));
        assert_eq!(reduce_check(&s2, &spec, &claim), Ok(()));
        assert_eq!(s2.step_index, 2);
    }

    #[test]
    fn shape_bounds() {
        assert!(CircuitShape::new(1, 1).validate().is_ok());
        assert!(CircuitShape::new(0, 4).validate().is_err());
        assert!(CircuitShape::new(4, 0).validate().is_err());
        assert!(CircuitShape::new(4, MAX_TREE_DEPTH + 1).validate().is_err());
    }

    #[test]
    fn block_index_is_32_bit() {
        let c = generate_chain(5, 1, 8, 2, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();
        let mut b = w.batches[0].clone();
        b.block_index = MAX_BLOCK_INDEX + 1;
        let shape = CircuitShape::new(8, 8);
        assert_eq!(
            apply_batch(None, &spec, &b, &claim.roots[0].digest, &shape),
            Err(StepError::BlockIndexOutOfRange(MAX_BLOCK_INDEX + 1))
        );
    }
}

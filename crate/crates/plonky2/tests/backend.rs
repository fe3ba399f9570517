use std::sync::OnceLock;

use sslc_core::proof::{prove_claim, ProofBackend, ProveError, PublicInputs};
use sslc_core::statement::{build_claim, Batch, Claim, RootEntry, Witness};
use sslc_core::{generate_chain, AccountId, Chain, CircuitShape, Digest, Finalize, Predicate, QuerySpec};
use sslc_plonky2::Plonky2Backend;

const SHAPE: CircuitShape = CircuitShape::new(4, 6);

fn backend() -> &'static Plonky2Backend {
    static B: OnceLock<Plonky2Backend> = OnceLock::new();
    B.get_or_init(|| Plonky2Backend::setup(SHAPE).expect("setup"))
}

fn acc() -> AccountId {
    AccountId([0x5a; 32])
}

fn chain(seed: u64, blocks: usize, relevant: usize) -> Chain {
    generate_chain(seed, blocks, 20, relevant, acc()).unwrap()
}

fn mutations(claim: &Claim) -> Vec<Claim> {
    let mut out = Vec::new();
    let mut c = claim.clone();
    c.k += 1;
    out.push(c);
    let mut c = claim.clone();
    c.result.numerator += 1;
    out.push(c);
    let mut c = claim.clone();
    c.result.denominator += 1;
    out.push(c);
    let mut c = claim.clone();
    c.spec_digest = c.spec_digest.perturbed(2, 1);
    out.push(c);
    for i in 0..claim.roots.len() {
        let mut c = claim.clone();
        c.roots[i].digest = c.roots[i].digest.perturbed(i, 1);
        out.push(c);
        let mut c = claim.clone();
        c.roots[i].index += 100;
        out.push(c);
    }
    let mut c = claim.clone();
    c.roots.push(RootEntry { index: 999, digest: Digest::ZERO });
    out.push(c);
    out
}

#[test]
fn honest_chains_verify_and_bind_the_claim() {
    let b = backend();
    let spec = QuerySpec::average_amount(acc());
    // Six relevant per block at capacity four: every block spans two batches.
    let c = chain(21, 2, 6);
    let (claim, witness) = build_claim(&c, &spec).unwrap();
    let proof = prove_claim(b, &spec, &claim, &witness).unwrap();
    assert!(b.verify(&proof, &claim));

    for m in mutations(&claim) {
        let mut relabelled = proof.clone();
        relabelled.public_inputs = PublicInputs::Final(m.clone());
        assert!(!b.verify(&proof, &m), "mutated claim accepted: {m:?}");
        assert!(!b.verify(&relabelled, &m), "relabelled proof accepted: {m:?}");
    }

    let mut flipped = proof.clone();
    let mid = flipped.bytes.len() / 2;
    flipped.bytes[mid] ^= 1;
    assert!(!b.verify(&flipped, &claim));
    let mut cut = proof.clone();
    cut.bytes.truncate(100);
    assert!(!b.verify(&cut, &claim));

    // Four steps against two: the serialized proof does not grow.
    let c2 = chain(22, 1, 3);
    let (claim2, w2) = build_claim(&c2, &spec).unwrap();
    let short = prove_claim(b, &spec, &claim2, &w2).unwrap();
    assert!(b.verify(&short, &claim2));
    assert_eq!(short.bytes.len(), proof.bytes.len());
}

#[test]
fn finalize_variants_and_empty_queries() {
    let b = backend();
    let c = chain(23, 1, 2);
    for spec in [
        QuerySpec::average_amount(acc()).with_finalize(Finalize::Total),
        QuerySpec::average_amount(acc()).with_finalize(Finalize::Count).with_predicate(Predicate::PayloadTag(1)),
    ] {
        let (claim, w) = build_claim(&c, &spec).unwrap();
        let p = prove_claim(b, &spec, &claim, &w).unwrap();
        assert!(b.verify(&p, &claim));
    }

    // Nothing selected: one empty step, k = 0.
    let spec = QuerySpec::average_amount(AccountId([1; 32])).with_finalize(Finalize::Count);
    let (claim, w) = build_claim(&c, &spec).unwrap();
    assert_eq!(claim.k, 0);
    let p = prove_claim(b, &spec, &claim, &w).unwrap();
    assert!(b.verify(&p, &claim));
}

fn one_block_witness() -> (QuerySpec, Claim, Witness, Chain) {
    let spec = QuerySpec::average_amount(acc());
    let c = chain(24, 1, 3);
    let (claim, w) = build_claim(&c, &spec).unwrap();
    (spec, claim, w, c)
}

#[test]
fn circuit_rejects_bad_witnesses() {
    let b = backend();
    let (spec, claim, w, c) = one_block_witness();
    let root = claim.roots[0].digest;
    let honest = &w.batches[0];
    assert!(b.prove_step_unchecked(None, &spec, honest, &root).is_ok());

    let mut dup = honest.clone();
    dup.transactions[1] = dup.transactions[0].clone();
    dup.paths[1] = dup.paths[0].clone();
    assert!(b.prove_step_unchecked(None, &spec, &dup, &root).is_err());

    let mut swapped = honest.clone();
    swapped.transactions.swap(0, 1);
    swapped.paths.swap(0, 1);
    assert!(b.prove_step_unchecked(None, &spec, &swapped, &root).is_err());

    assert!(b.prove_step_unchecked(None, &spec, honest, &root.perturbed(0, 1)).is_err());

    // A genuine member of the block that does not touch the account.
    let block = &c.blocks()[0];
    let pos = block.transactions.iter().position(|t| !t.touches(&acc())).unwrap();
    let foreign = Batch {
        block_index: 0,
        transactions: vec![block.transactions[pos].clone()],
        paths: vec![sslc_core::open(&block.tree(), pos).unwrap()],
        carry_in_hash: None,
    };
    assert!(b.prove_step_unchecked(None, &spec, &foreign, &root).is_err());

    // The checked path reports the native reason instead.
    match b.prove_base(&spec, &dup, &root) {
        Err(ProveError::WitnessUnsatisfiable(e)) => assert!(e.relation().is_some()),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn predecessor_and_continuity_are_enforced() {
    let b = backend();
    let (spec, claim, w, _) = one_block_witness();
    let root = claim.roots[0].digest;
    let first = Batch { transactions: w.batches[0].transactions[..1].to_vec(), paths: w.batches[0].paths[..1].to_vec(), ..w.batches[0].clone() };
    let second = Batch {
        transactions: w.batches[0].transactions[1..].to_vec(),
        paths: w.batches[0].paths[1..].to_vec(),
        carry_in_hash: Some(first.transactions[0].tx_hash()),
        ..w.batches[0].clone()
    };
    let base = b.prove_base(&spec, &first, &root).unwrap();
    let next = b.prove_step(&base, &spec, &second, &root).unwrap();
    assert!(b.check_step(&next).is_some());

    let mut forged = base.clone();
    if let PublicInputs::Step(s) = &mut forged.public_inputs {
        s.running_sum += 1;
    }
    assert_eq!(b.prove_step(&forged, &spec, &second, &root), Err(ProveError::InvalidPredecessor));

    // Re-opening the same block as new, or skipping the carry, cannot be proven.
    let reopened = Batch { carry_in_hash: None, ..second.clone() };
    assert!(b.prove_step_unchecked(Some(&base), &spec, &reopened, &root).is_err());

    let other_spec = QuerySpec::average_amount(acc()).with_finalize(Finalize::Total);
    assert!(b.prove_step_unchecked(Some(&base), &other_spec, &second, &root).is_err());
    assert!(matches!(b.prove_reduce(&next, &other_spec, &claim), Err(ProveError::ReduceUnsatisfiable(_))));
}

#[test]
fn setup_is_deterministic() {
    let again = Plonky2Backend::setup(SHAPE).unwrap();
    assert_eq!(again.params(), backend().params());
    assert!(Plonky2Backend::setup(CircuitShape::new(0, 6)).is_err());
}

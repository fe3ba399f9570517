mod support;

use proptest::prelude::*;
use sslc_core::proof::{prove_claim, CircuitShape, ProofBackend};
use sslc_core::query::{Finalize, Predicate};
use sslc_core::statement::RelationFailure;
use sslc_core::{build_claim, check_relation, generate_chain, AccountId, NativeBackend, QuerySpec};
use support::mutations::{mutate, slots, REASONS};

fn acc() -> AccountId {
    AccountId([0x44; 32])
}

fn specs() -> Vec<QuerySpec> {
    let s = QuerySpec::average_amount(acc());
    vec![
        s,
        s.with_finalize(Finalize::Total),
        s.with_finalize(Finalize::Count).with_predicate(Predicate::PayloadTag(1)),
    ]
}

#[test]
fn every_mutation_reports_its_reason_exhaustively() {
    for seed in 0..6u64 {
        let relevant = 1 + seed as usize % 4;
        let chain = generate_chain(seed, 4, 12, relevant, acc()).unwrap();
        for spec in specs() {
            let Ok((claim, witness)) = build_claim(&chain, &spec) else { continue };
            assert!(witness.transaction_count() <= 16);
            assert_eq!(check_relation(&claim, &witness, &spec), Ok(()));
            for slot in slots(&witness) {
                for reason in REASONS {
                    let (c, w) = mutate(&chain, &spec, &claim, &witness, slot, reason)
                        .unwrap_or_else(|| panic!("no {reason} mutation at {slot:?}"));
                    assert_eq!(check_relation(&c, &w, &spec), Err(reason), "seed {seed} slot {slot:?}");
                }
            }
        }
    }
}

#[test]
fn claim_level_mutations() {
    let chain = generate_chain(9, 3, 8, 2, acc()).unwrap();
    let spec = QuerySpec::average_amount(acc());
    let (claim, w) = build_claim(&chain, &spec).unwrap();

    let mut c = claim.clone();
    c.roots[0].digest = c.roots[0].digest.perturbed(2, 5);
    assert_eq!(check_relation(&c, &w, &spec), Err(RelationFailure::BadPath));

    let mut c = claim.clone();
    c.roots.swap(0, 1);
    assert_eq!(check_relation(&c, &w, &spec), Err(RelationFailure::BadPath));

    let mut c = claim.clone();
    c.spec_digest = QuerySpec::average_amount(AccountId([1; 32])).digest();
    assert_eq!(check_relation(&c, &w, &spec), Err(RelationFailure::PredicateViolation));

    let mut shuffled = w.clone();
    shuffled.batches.swap(0, 1);
    assert_eq!(check_relation(&claim, &shuffled, &spec), Err(RelationFailure::OrderViolation));

    let mut c = claim.clone();
    c.k -= 1;
    assert_eq!(check_relation(&c, &w, &spec), Err(RelationFailure::CountMismatch));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn completeness(seed in any::<u64>(), blocks in 1usize..6, txs in 1usize..24, frac in 0.0f64..1.0, cap in 1usize..6) {
        let relevant = 1 + ((txs - 1) as f64 * frac) as usize;
        let chain = generate_chain(seed, blocks, txs, relevant, acc()).unwrap();
        let backend = NativeBackend::setup(CircuitShape::new(cap, 5)).unwrap();
        for spec in specs() {
            let Ok((claim, witness)) = build_claim(&chain, &spec) else { continue };
            prop_assert_eq!(check_relation(&claim, &witness, &spec), Ok(()));
            prop_assert_eq!(check_relation(&claim, &witness.rebatch(cap), &spec), Ok(()));
            let proof = prove_claim(&backend, &spec, &claim, &witness).unwrap();
            prop_assert!(backend.verify(&proof, &claim));
        }
    }

    #[test]
    fn random_mutations_are_caught(seed in any::<u64>(), pick in any::<prop::sample::Index>(), r in 0usize..5) {
        let chain = generate_chain(seed, 3, 10, 3, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, witness) = build_claim(&chain, &spec).unwrap();
        let slot = *pick.get(&slots(&witness));
        let (c, w) = mutate(&chain, &spec, &claim, &witness, slot, REASONS[r]).unwrap();
        prop_assert_eq!(check_relation(&c, &w, &spec), Err(REASONS[r]));
        let backend = NativeBackend::setup(CircuitShape::new(4, 5)).unwrap();
        prop_assert!(prove_claim(&backend, &spec, &c, &w).is_err());
    }
}

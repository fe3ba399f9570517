use proptest::prelude::*;
use sslc_core::query::{partial_of, Finalize, PartialResult, Predicate};
use sslc_core::{evaluate_native, generate_chain, map_block, reduce_all, AccountId, QuerySpec};

fn acc() -> AccountId {
    AccountId([0x66; 32])
}

// Straight scan over every transaction, written without the map/reduce helpers.
fn flat_scan(chain: &sslc_core::Chain, spec: &QuerySpec) -> (u64, u64, u64) {
    let (mut sum, mut count, mut k) = (0u64, 0u64, 0u64);
    for b in chain.blocks() {
        for t in &b.transactions {
            if t.sender() == spec.account || t.receiver() == spec.account {
                k += 1;
                let hit = match spec.predicate {
                    Predicate::AccountTouch => true,
                    Predicate::PayloadTag(tag) => t.payload_tag() == tag,
                };
                if hit {
                    sum += t.amount();
                    count += 1;
                }
            }
        }
    }
    (sum, count, k)
}

#[test]
fn decomposition_over_seeds() {
    for seed in 0..120u64 {
        let blocks = 1 + (seed % 9) as usize;
        let txs = 4 + (seed * 7 % 60) as usize;
        let chain = generate_chain(seed, blocks, txs, 1 + (seed % 4) as usize, acc()).unwrap();
        for spec in [
            QuerySpec::average_amount(acc()),
            QuerySpec::average_amount(acc()).with_predicate(Predicate::PayloadTag((seed % 4) as u32)),
        ] {
            let (sum, count, k) = flat_scan(&chain, &spec);
            let partials: Vec<PartialResult> = chain.blocks().iter().map(|b| map_block(b, &spec).0).collect();
            let total = partials.iter().fold(PartialResult::default(), |a, p| a.combine(*p));
            assert_eq!((total.sum, total.count, total.selected), (sum, count, k), "seed {seed}");
            match evaluate_native(&chain, &spec) {
                Ok(r) => assert_eq!((r.numerator, r.denominator, r.k), (sum, count, k)),
                Err(_) => assert_eq!(count, 0),
            }
            let t = reduce_all(&partials, &spec.with_finalize(Finalize::Total)).unwrap();
            assert_eq!((t.numerator, t.denominator), (sum, 1));
            let c = reduce_all(&partials, &spec.with_finalize(Finalize::Count)).unwrap();
            assert_eq!((c.numerator, c.denominator), (count, 1));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduce_ignores_order(seed in any::<u64>(), blocks in 1usize..10, rot in 0usize..10) {
        let chain = generate_chain(seed, blocks, 16, 3, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let mut partials: Vec<_> = chain.blocks().iter().map(|b| partial_of(b, &spec)).collect();
        let base = reduce_all(&partials, &spec).unwrap();
        partials.rotate_left(rot % blocks);
        prop_assert_eq!(reduce_all(&partials, &spec).unwrap(), base);
        partials.reverse();
        prop_assert_eq!(reduce_all(&partials, &spec).unwrap(), base);
    }

    #[test]
    fn relevant_lists_are_sorted_and_open(seed in any::<u64>(), txs in 1usize..40) {
        let chain = generate_chain(seed, 1, txs, 1 + txs / 3, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let block = &chain.blocks()[0];
        let (_, list) = map_block(block, &spec);
        prop_assert_eq!(list.len(), 1 + txs / 3);
        prop_assert!(list.windows(2).all(|w| w[0].0.tx_hash() < w[1].0.tx_hash()));
        for (tx, path) in &list {
            prop_assert!(sslc_core::verify_path(&block.tx_root, &tx.tx_hash(), path));
        }
    }
}

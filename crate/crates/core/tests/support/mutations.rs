// Targeted mutations of an honest (claim, witness) pair, one per relation failure.

use sslc_core::merkle::open;
use sslc_core::statement::RelationFailure;
use sslc_core::{Chain, Claim, QuerySpec, Witness};

pub const REASONS: [RelationFailure; 5] = [
    RelationFailure::BadPath,
    RelationFailure::PredicateViolation,
    RelationFailure::OrderViolation,
    RelationFailure::CountMismatch,
    RelationFailure::ResultMismatch,
];

/// Every (batch, position) of the witness.
pub fn slots(w: &Witness) -> Vec<(usize, usize)> {
    w.batches.iter().enumerate().flat_map(|(b, batch)| (0..batch.len()).map(move |i| (b, i))).collect()
}

/// Mutates the pair at `slot` so that exactly `reason` is violated first. `None` when the
/// fixture has no material for it, e.g. a block without unrelated transactions.
pub fn mutate(
    chain: &Chain,
    spec: &QuerySpec,
    claim: &Claim,
    witness: &Witness,
    (b, i): (usize, usize),
    reason: RelationFailure,
) -> Option<(Claim, Witness)> {
    let mut c = claim.clone();
    let mut w = witness.clone();
    match reason {
        RelationFailure::BadPath => {
            let path = &mut w.batches[b].paths[i];
            let s = path.siblings.iter_mut().find_map(Option::as_mut)?;
            *s = s.perturbed(i, 1);
        }
        RelationFailure::PredicateViolation => {
            let block = chain.block(w.batches[b].block_index)?;
            let j = block.transactions.iter().position(|t| !spec.selects(t))?;
            w.batches[b].transactions[i] = block.transactions[j].clone();
            w.batches[b].paths[i] = open(&block.tree(), j).ok()?;
        }
        RelationFailure::OrderViolation => {
            let batch = &mut w.batches[b];
            let (tx, p) = (batch.transactions[i].clone(), batch.paths[i].clone());
            batch.transactions.insert(i + 1, tx);
            batch.paths.insert(i + 1, p);
        }
        RelationFailure::CountMismatch => {
            if w.batches[b].len() > 1 {
                w.batches[b].transactions.remove(i);
                w.batches[b].paths.remove(i);
            } else {
                c.k += 1 + i as u64;
            }
        }
        RelationFailure::ResultMismatch => {
            c.result.numerator += 1 + i as u64;
        }
    }
    Some((c, w))
}

//! Core of a stateless superlight client system.
//!
//! Everything here is pure computation over in-memory values: field and hash primitives, Merkle
//! commitments, the ledger model, map-reduce queries, the claim/witness relation, the recursive
//! step state machine with its backend contract, and the client's decision function. IO, wire
//! formats and the succinct backend live in companion crates.

#![no_std]

extern crate alloc;

pub mod field;
pub mod hash;
pub mod ledger;
pub mod merkle;
pub mod native;
pub mod params;
pub mod poseidon;
pub mod proof;
pub mod protocol;
pub mod query;
pub mod statement;

pub use field::FieldElement;
pub use hash::{hash_elements, Digest};
pub use ledger::{generate_chain, tx_count_for_account, tx_root_of, AccountId, Block, Chain, Transaction};
pub use merkle::{build_tree, open, verify_path, MerklePath, TxTree};
pub use native::NativeBackend;
pub use proof::{prove_claim, prove_query, BackendParams, CircuitShape, Proof, ProofBackend, ProveError, StepState};
pub use protocol::{decide, Decision, NodeAnswer, Reason, Verdict};
pub use query::{evaluate_native, map_block, reduce_all, Finalize, Predicate, QueryResult, QuerySpec};
pub use statement::{build_claim, check_relation, Batch, ChainView, Claim, RelationFailure, RootEntry, Witness};

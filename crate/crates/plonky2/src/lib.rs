//! Succinct backend for the recursive query proofs.
//!
//! One cyclic circuit proves every step: it verifies the previous step proof (a dummy at the
//! base) and applies one batch. A separate reduce circuit verifies the final step against the
//! fixed step key and exposes the claim, so a verifier only ever touches the reduce proof, whose
//! size does not depend on the chain.

mod backend;
pub mod gadgets;
pub mod reduce;
pub mod step;

use plonky2::field::goldilocks_field::GoldilocksField;
use plonky2::field::types::Field;
use plonky2::plonk::config::PoseidonGoldilocksConfig;

use sslc_core::FieldElement;

pub use backend::Plonky2Backend;

pub type F = GoldilocksField;
pub type C = PoseidonGoldilocksConfig;
pub const D: usize = 2;

pub fn to_field(e: FieldElement) -> F {
    F::from_canonical_u64(e.value())
}

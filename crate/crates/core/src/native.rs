//! A backend that runs the step state machine directly and emits a tagged transcript instead of
//! a succinct argument.
//!
//! Proofs exist exactly when the native checks pass, which makes this backend the fast reference
//! for protocol tests. The tag is a hash keyed by the public parameter digest, so it only
//! authenticates against accidental corruption and claim tampering by parties that do not re-run
//! the tagging; it is not sound against an adversary who holds the parameters.

use alloc::vec::Vec;

use crate::field::FieldElement;
use crate::hash::{hash_with_domain, Digest, Domain};
use crate::proof::{
    apply_batch, reduce_check, BackendKind, BackendParams, CircuitShape, Proof, ProofBackend,
    ProveError, PublicInputs, SetupError, StepState,
};
use crate::query::QuerySpec;
use crate::statement::{Batch, Claim};

const STEP_TAG: u64 = 1;
const FINAL_TAG: u64 = 2;

#[derive(Debug, Clone)]
pub struct NativeBackend {
    params: BackendParams,
}

impl NativeBackend {
    pub fn setup(shape: CircuitShape) -> Result<Self, SetupError> {
        shape.validate()?;
        Ok(Self { params: BackendParams::derive(BackendKind::Native, shape, &[]) })
    }

    fn tag(&self, kind: u64, elements: &[FieldElement]) -> Digest {
        let mut buf = Vec::with_capacity(elements.len() + 5);
        buf.extend_from_slice(&self.params.parameter_digest.0);
        buf.push(FieldElement::new(kind));
        buf.extend_from_slice(elements);
        hash_with_domain(Domain::Transcript, &buf)
    }

    fn step_proof(&self, state: StepState) -> Proof {
        let tag = self.tag(STEP_TAG, &state.to_elements());
        Proof { bytes: tag.to_bytes().to_vec(), public_inputs: PublicInputs::Step(state) }
    }

    fn check_step(&self, proof: &Proof) -> Option<StepState> {
        let state = *proof.step_state()?;
        let tag = self.tag(STEP_TAG, &state.to_elements());
        (proof.bytes == tag.to_bytes()).then_some(state)
    }
}

impl ProofBackend for NativeBackend {
    fn params(&self) -> &BackendParams {
        &self.params
    }

    fn prove_base(&self, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        let state = apply_batch(None, spec, batch, root, &self.params.shape)
            .map_err(ProveError::WitnessUnsatisfiable)?;
        Ok(self.step_proof(state))
    }

    fn prove_step(&self, prev: &Proof, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        let prev = self.check_step(prev).ok_or(ProveError::InvalidPredecessor)?;
        let state = apply_batch(Some(&prev), spec, batch, root, &self.params.shape)
            .map_err(ProveError::WitnessUnsatisfiable)?;
        Ok(self.step_proof(state))
    }

    fn prove_reduce(&self, last: &Proof, spec: &QuerySpec, claim: &Claim) -> Result<Proof, ProveError> {
        let state = self.check_step(last).ok_or(ProveError::InvalidPredecessor)?;
        reduce_check(&state, spec, claim).map_err(ProveError::ReduceUnsatisfiable)?;
        let tag = self.tag(FINAL_TAG, &claim.to_elements());
        Ok(Proof { bytes: tag.to_bytes().to_vec(), public_inputs: PublicInputs::Final(claim.clone()) })
    }

    fn verify(&self, proof: &Proof, claim: &Claim) -> bool {
        if !claim.is_canonical() {
            return false;
        }
        match &proof.public_inputs {
            PublicInputs::Final(c) if c == claim => {
                proof.bytes == self.tag(FINAL_TAG, &claim.to_elements()).to_bytes()
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{generate_chain, AccountId};
    use crate::proof::{prove_claim, prove_query};
    use crate::statement::build_claim;

    fn acc() -> AccountId {
        AccountId([9; 32])
    }

    #[test]
    fn honest_chain_verifies_and_claims_bind() {
        let b = NativeBackend::setup(CircuitShape::new(4, 8)).unwrap();
        let c = generate_chain(11, 5, 40, 6, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();
        let proof = prove_claim(&b, &spec, &claim, &w).unwrap();
        assert!(b.verify(&proof, &claim));

        let mut k = claim.clone();
        k.k += 1;
        assert!(!b.verify(&proof, &k));
        let mut r = claim.clone();
        r.result.numerator += 1;
        assert!(!b.verify(&proof, &r));
        let (_, view, p2) = prove_query(&b, &c, &spec).unwrap();
        assert_eq!(view, claim.view());
        assert_eq!(p2, proof);
    }

    #[test]
    fn tampered_predecessor() {
        let b = NativeBackend::setup(CircuitShape::new(4, 8)).unwrap();
        let c = generate_chain(12, 2, 40, 3, acc()).unwrap();
        let spec = QuerySpec::average_amount(acc());
        let (claim, w) = build_claim(&c, &spec).unwrap();
        let mut base = b.prove_base(&spec, &w.batches[0], &claim.roots[0].digest).unwrap();
        if let PublicInputs::Step(s) = &mut base.public_inputs {
            s.running_sum += 1;
        }
        assert_eq!(
            b.prove_step(&base, &spec, &w.batches[1], &claim.roots[1].digest),
            Err(ProveError::InvalidPredecessor)
        );
    }

    #[test]
    fn setup_is_deterministic_and_shape_bound() {
        let a = NativeBackend::setup(CircuitShape::new(1, 1)).unwrap();
        let b = NativeBackend::setup(CircuitShape::new(1, 1)).unwrap();
        let c = NativeBackend::setup(CircuitShape::new(2, 1)).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params().parameter_digest, c.params().parameter_digest);
    }
}

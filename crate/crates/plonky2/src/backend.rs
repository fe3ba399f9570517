use plonky2::field::types::PrimeField64;
use plonky2::hash::hash_types::HashOut;
use plonky2::plonk::proof::ProofWithPublicInputs;

use sslc_core::proof::{
    apply_batch, reduce_check, BackendKind, BackendParams, CircuitShape, Proof, ProofBackend, ProveError,
    PublicInputs, SetupError, StepState, STEP_ELEMENTS,
};
use sslc_core::statement::{Batch, Claim};
use sslc_core::{Digest, FieldElement, QuerySpec};

use crate::reduce::ReduceCircuit;
use crate::step::StepCircuit;
use crate::{to_field, C, D, F};

type PlonkyProof = ProofWithPublicInputs<F, C, D>;

fn digest_of(h: &HashOut<F>) -> Digest {
    Digest(h.elements.map(|x| FieldElement::new(x.to_canonical_u64())))
}

fn backend_err(e: impl core::fmt::Display) -> ProveError {
    ProveError::Backend(e.to_string())
}

pub struct Plonky2Backend {
    params: BackendParams,
    step: StepCircuit,
    reduce: ReduceCircuit,
}

impl core::fmt::Debug for Plonky2Backend {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Plonky2Backend")
            .field("params", &self.params)
            .field("step_degree_bits", &self.step.degree_bits())
            .finish()
    }
}

impl Plonky2Backend {
    /// Builds both circuits. Deterministic: the same shape always yields the same keys.
    pub fn setup(shape: CircuitShape) -> Result<Self, SetupError> {
        shape.validate()?;
        let backend = |e: anyhow::Error| SetupError::Backend(e.to_string());
        let step = StepCircuit::build(shape).map_err(backend)?;
        let reduce = ReduceCircuit::build(&step).map_err(backend)?;
        let extra = [
            digest_of(&step.data.verifier_only.circuit_digest),
            digest_of(&reduce.data.verifier_only.circuit_digest),
        ];
        let params = BackendParams::derive(BackendKind::Plonky2, shape, &extra);
        Ok(Self { params, step, reduce })
    }

    pub fn step_circuit(&self) -> &StepCircuit {
        &self.step
    }

    pub fn reduce_circuit(&self) -> &ReduceCircuit {
        &self.reduce
    }

    /// Decodes and verifies a step proof, returning the state it attests.
    pub fn check_step(&self, proof: &Proof) -> Option<StepState> {
        let p = self.decode_step(&proof.bytes)?;
        self.step.verify(&p).ok()?;
        let state = state_of(&p)?;
        (proof.public_inputs == PublicInputs::Step(state)).then_some(state)
    }

    fn decode_step(&self, bytes: &[u8]) -> Option<PlonkyProof> {
        PlonkyProof::from_bytes(bytes.to_vec(), &self.step.data.common).ok()
    }

    /// Proves a step without the native precheck, so the circuit alone decides. Used to show
    /// that bad witnesses are rejected by the constraints and not only by the host code.
    pub fn prove_step_unchecked(
        &self,
        prev: Option<&Proof>,
        spec: &QuerySpec,
        batch: &Batch,
        root: &Digest,
    ) -> Result<Proof, ProveError> {
        let prev = match prev {
            Some(p) => {
                let decoded = self.decode_step(&p.bytes).ok_or(ProveError::InvalidPredecessor)?;
                if self.check_step(p).is_none() {
                    return Err(ProveError::InvalidPredecessor);
                }
                Some(decoded)
            }
            None => None,
        };
        let proof = catch(|| self.step.prove(prev.as_ref(), spec, batch, root))?;
        let state = state_of(&proof).ok_or_else(|| backend_err("malformed step output"))?;
        Ok(Proof { bytes: proof.to_bytes(), public_inputs: PublicInputs::Step(state) })
    }

    fn step_with(&self, prev: Option<(&Proof, StepState)>, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        let expected = apply_batch(prev.map(|(_, s)| s).as_ref(), spec, batch, root, &self.params.shape)
            .map_err(ProveError::WitnessUnsatisfiable)?;
        let proof = self.prove_step_unchecked(prev.map(|(p, _)| p), spec, batch, root)?;
        if proof.public_inputs != PublicInputs::Step(expected) {
            return Err(backend_err("circuit output differs from the native step"));
        }
        Ok(proof)
    }
}

/// The prover panics on some unsatisfiable witnesses instead of returning an error.
fn catch<T>(f: impl FnOnce() -> anyhow::Result<T>) -> Result<T, ProveError> {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(backend_err(e)),
        Err(_) => Err(backend_err("prover rejected the witness")),
    }
}

fn state_of(p: &PlonkyProof) -> Option<StepState> {
    let el: Vec<FieldElement> =
        p.public_inputs.get(..STEP_ELEMENTS)?.iter().map(|x| FieldElement::new(x.to_canonical_u64())).collect();
    StepState::from_elements(&el)
}

impl ProofBackend for Plonky2Backend {
    fn params(&self) -> &BackendParams {
        &self.params
    }

    fn prove_base(&self, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        self.step_with(None, spec, batch, root)
    }

    fn prove_step(&self, prev: &Proof, spec: &QuerySpec, batch: &Batch, root: &Digest) -> Result<Proof, ProveError> {
        let state = self.check_step(prev).ok_or(ProveError::InvalidPredecessor)?;
        self.step_with(Some((prev, state)), spec, batch, root)
    }

    fn prove_reduce(&self, last: &Proof, spec: &QuerySpec, claim: &Claim) -> Result<Proof, ProveError> {
        let state = self.check_step(last).ok_or(ProveError::InvalidPredecessor)?;
        reduce_check(&state, spec, claim).map_err(ProveError::ReduceUnsatisfiable)?;
        let inner = self.decode_step(&last.bytes).ok_or(ProveError::InvalidPredecessor)?;
        let proof = catch(|| self.reduce.prove(&inner, spec))?;
        if proof.public_inputs != claim.to_elements().map(to_field) {
            return Err(backend_err("reduce output differs from the claim"));
        }
        Ok(Proof { bytes: proof.to_bytes(), public_inputs: PublicInputs::Final(claim.clone()) })
    }

    fn verify(&self, proof: &Proof, claim: &Claim) -> bool {
        if !claim.is_canonical() || proof.public_inputs != PublicInputs::Final(claim.clone()) {
            return false;
        }
        let Ok(p) = PlonkyProof::from_bytes(proof.bytes.clone(), &self.reduce.data.common) else {
            return false;
        };
        if p.public_inputs != claim.to_elements().map(to_field) {
            return false;
        }
        self.reduce.data.verify(p).is_ok()
    }
}

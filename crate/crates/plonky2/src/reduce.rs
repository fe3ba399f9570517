//! The reduce circuit: verifies the last step proof against the fixed step verifier key and
//! exposes the claim.

use anyhow::Result;
use plonky2::field::types::Field;
use plonky2::iop::witness::PartialWitness;
use plonky2::iop::witness::WitnessWrite;
use plonky2::plonk::circuit_builder::CircuitBuilder;
use plonky2::plonk::circuit_data::{CircuitConfig, CircuitData};
use plonky2::plonk::proof::{ProofWithPublicInputs, ProofWithPublicInputsTarget};

use sslc_core::proof::STEP_ELEMENTS;
use sslc_core::query::QuerySpec;

use crate::step::{SpecTargets, StepCircuit};
use crate::{C, D, F};

pub struct ReduceCircuit {
    pub data: CircuitData<F, C, D>,
    inner: ProofWithPublicInputsTarget<D>,
    spec: SpecTargets,
}

impl ReduceCircuit {
    pub fn build(step: &StepCircuit) -> Result<Self> {
        let mut b = CircuitBuilder::<F, D>::new(CircuitConfig::standard_recursion_config());
        let common = &step.data.common;
        let inner = b.add_virtual_proof_with_pis(common);
        let vd = b.constant_verifier_data::<C>(&step.data.verifier_only);
        b.verify_proof::<C>(&inner, &vd, common);

        // The step circuit only promises that its verifier-data inputs are self-consistent, so pin
        // them to the real key.
        let vk = &step.data.verifier_only;
        let expected = vk
            .circuit_digest
            .elements
            .iter()
            .chain(vk.constants_sigmas_cap.0.iter().flat_map(|h| h.elements.iter()))
            .copied()
            .collect::<Vec<_>>();
        for (t, v) in inner.public_inputs[STEP_ELEMENTS..].iter().zip(expected) {
            let c = b.constant(v);
            b.connect(*t, c);
        }

        let pis = &inner.public_inputs;
        let spec = SpecTargets::add(&mut b);
        let digest = spec.digest(&mut b);
        for i in 0..4 {
            b.connect(digest[i], pis[i]);
        }

        let (sum, count, k) = (pis[18], pis[19], pis[20]);
        let avg_code = b.zero();
        let total_code = b.one();
        let count_code = b.constant(F::TWO);
        let is_avg = b.is_equal(spec.finalize, avg_code);
        let is_total = b.is_equal(spec.finalize, total_code);
        let is_count = b.is_equal(spec.finalize, count_code);
        let known = b.add_many([is_avg.target, is_total.target, is_count.target]);
        let one = b.one();
        b.connect(known, one);
        let empty = b.is_equal(count, avg_code);
        let undefined = b.mul(is_avg.target, empty.target);
        b.assert_zero(undefined);

        let numerator = b.select(is_count, count, sum);
        let denominator = b.select(is_avg, count, one);

        b.register_public_inputs(&pis[0..8]);
        b.register_public_inputs(&[k, numerator, denominator]);

        Ok(Self { data: b.build::<C>(), inner, spec })
    }

    pub fn prove(&self, last: &ProofWithPublicInputs<F, C, D>, spec: &QuerySpec) -> Result<ProofWithPublicInputs<F, C, D>> {
        let mut pw = PartialWitness::new();
        pw.set_proof_with_pis_target(&self.inner, last)?;
        self.spec.set(&mut pw, spec)?;
        self.data.prove(pw)
    }
}

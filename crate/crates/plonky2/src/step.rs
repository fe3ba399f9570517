//! The cyclic step circuit: verifies the previous step (or a dummy at the base) and applies one
//! batch to the public state.


use anyhow::{anyhow, Result};
use plonky2::field::types::{Field, PrimeField64};
use plonky2::gates::noop::NoopGate;
use plonky2::iop::target::{BoolTarget, Target};
use plonky2::iop::witness::{PartialWitness, WitnessWrite};
use plonky2::plonk::circuit_builder::CircuitBuilder;
use plonky2::plonk::circuit_data::{CircuitConfig, CircuitData, CommonCircuitData};
use plonky2::plonk::proof::{ProofWithPublicInputs, ProofWithPublicInputsTarget};
use plonky2::recursion::dummy_circuit::cyclic_base_proof;

use sslc_core::hash::{Digest, Domain};
use sslc_core::ledger::TX_LIMBS;
use sslc_core::proof::{CircuitShape, STEP_ELEMENTS};
use sslc_core::query::QuerySpec;
use sslc_core::statement::Batch;

use crate::gadgets::*;
use crate::{to_field, C, D, F};

const SENDER: core::ops::Range<usize> = 0..8;
const RECEIVER: core::ops::Range<usize> = 8..16;
const AMOUNT_LO: usize = 16;
const AMOUNT_HI: usize = 17;
const TAG: usize = 20;

/// Witness targets of the query specification; their sponge is the spec digest.
#[derive(Debug, Clone)]
pub struct SpecTargets {
    pub tag_filter: BoolTarget,
    pub tag: Target,
    pub finalize: Target,
    pub account: [Target; 8],
}

impl SpecTargets {
    pub fn add(b: &mut CircuitBuilder<F, D>) -> Self {
        Self {
            tag_filter: b.add_virtual_bool_target_safe(),
            tag: b.add_virtual_target(),
            finalize: b.add_virtual_target(),
            account: b.add_virtual_target_arr(),
        }
    }

    /// Same layout as `QuerySpec::to_elements`.
    pub fn digest(&self, b: &mut CircuitBuilder<F, D>) -> DigestTarget {
        let zero = b.zero();
        let mut el = vec![self.tag_filter.target, self.tag, zero, zero, self.finalize];
        el.extend_from_slice(&self.account);
        sponge(b, Domain::Spec, &el)
    }

    pub fn set(&self, pw: &mut PartialWitness<F>, spec: &QuerySpec) -> Result<()> {
        let e = spec.to_elements();
        pw.set_bool_target(self.tag_filter, e[0].value() == 1)?;
        pw.set_target(self.tag, to_field(e[1]))?;
        pw.set_target(self.finalize, to_field(e[4]))?;
        for (t, v) in self.account.iter().zip(&e[5..]) {
            pw.set_target(*t, to_field(*v))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LevelTargets {
    active: BoolTarget,
    is_right: BoolTarget,
    lone: BoolTarget,
    sibling: DigestTarget,
}

#[derive(Debug, Clone)]
struct SlotTargets {
    enabled: BoolTarget,
    limbs: [Target; TX_LIMBS],
    levels: Vec<LevelTargets>,
}

/// Indices into the state part of the public inputs.
mod pi {
    pub const SPEC: usize = 0;
    pub const ACC: usize = 4;
    pub const HAS_BLOCK: usize = 8;
    pub const INDEX: usize = 9;
    pub const ROOT: usize = 10;
    pub const CARRY: usize = 14;
    pub const SUM: usize = 18;
    pub const COUNT: usize = 19;
    pub const K: usize = 20;
    pub const STEP: usize = 21;
}

#[derive(Debug, Clone)]
struct StepTargets {
    condition: BoolTarget,
    inner: ProofWithPublicInputsTarget<D>,
    verifier_data: plonky2::plonk::circuit_data::VerifierCircuitTarget,
    spec: SpecTargets,
    block_index: Target,
    root: DigestTarget,
    new_block: BoolTarget,
    slots: Vec<SlotTargets>,
}

pub struct StepCircuit {
    pub data: CircuitData<F, C, D>,
    targets: StepTargets,
    base_proof: ProofWithPublicInputs<F, C, D>,
    shape: CircuitShape,
}

fn digest_at(v: &[Target], at: usize) -> DigestTarget {
    [v[at], v[at + 1], v[at + 2], v[at + 3]]
}

fn build(shape: &CircuitShape, goal: &CommonCircuitData<F, D>) -> Result<(CircuitData<F, C, D>, StepTargets, bool)> {
    let mut b = CircuitBuilder::<F, D>::new(CircuitConfig::standard_recursion_config());
    let one = b.one();

    let spec = SpecTargets::add(&mut b);
    let block_index = b.add_virtual_target();
    b.range_check(block_index, 32);
    let root: DigestTarget = b.add_virtual_target_arr();
    let new_block = b.add_virtual_bool_target_safe();

    let condition = b.add_virtual_bool_target_safe();
    let mut goal = goal.clone();
    // Registered below: the state, then the verifier data.
    goal.num_public_inputs = STEP_ELEMENTS + verifier_data_len(&goal);
    let inner = b.add_virtual_proof_with_pis(&goal);
    let prev: Vec<Target> = inner.public_inputs[..STEP_ELEMENTS].iter().map(|&t| b.mul(condition.target, t)).collect();

    let spec_digest = spec.digest(&mut b);
    conditional_eq_digest(&mut b, condition.target, digest_at(&prev, pi::SPEC), spec_digest);

    let mut slots = Vec::with_capacity(shape.batch_capacity);
    let mut sum = prev[pi::SUM];
    let mut count = prev[pi::COUNT];
    let mut k = prev[pi::K];
    let mut carry = digest_at(&prev, pi::CARRY);
    let mut prev_enabled: Option<BoolTarget> = None;
    let mut prev_limbs: Option<[Target; 8]> = None;
    let carry_limbs = digest_limbs(&mut b, carry);

    for _ in 0..shape.batch_capacity {
        let enabled = b.add_virtual_bool_target_safe();
        if let Some(p) = prev_enabled {
            let np = b.not(p);
            assert_zero_if(&mut b, enabled.target, np.target);
        }
        let limbs: [Target; TX_LIMBS] = b.add_virtual_target_arr();
        b.range_check(limbs[AMOUNT_LO], 32);
        b.range_check(limbs[AMOUNT_HI], 8);

        let encoded = sponge(&mut b, Domain::TxEncode, &limbs);
        let tx_hash = sponge(&mut b, Domain::Plain, &encoded);
        let mut cur = sponge(&mut b, Domain::Leaf, &tx_hash);

        let mut levels = Vec::with_capacity(shape.tree_depth);
        let mut prev_active: Option<BoolTarget> = None;
        for _ in 0..shape.tree_depth {
            let l = LevelTargets {
                active: b.add_virtual_bool_target_safe(),
                is_right: b.add_virtual_bool_target_safe(),
                lone: b.add_virtual_bool_target_safe(),
                sibling: b.add_virtual_target_arr(),
            };
            if let Some(p) = prev_active {
                let np = b.not(p);
                assert_zero_if(&mut b, l.active.target, np.target);
            }
            assert_zero_if(&mut b, l.lone.target, l.is_right.target);
            let inactive = b.not(l.active);
            assert_zero_if(&mut b, inactive.target, l.is_right.target);

            let left = select_digest(&mut b, l.is_right, l.sibling, cur);
            let right = select_digest(&mut b, l.is_right, cur, l.sibling);
            let next = level_hash(&mut b, left, right, l.lone);
            cur = select_digest(&mut b, l.active, next, cur);
            prev_active = Some(l.active);
            levels.push(l);
        }
        conditional_eq_digest(&mut b, enabled.target, cur, root);

        // Selection: the account appears as sender or receiver.
        let eq_s = all_equal(&mut b, &limbs[SENDER], &spec.account);
        let eq_r = all_equal(&mut b, &limbs[RECEIVER], &spec.account);
        let touch = b.or(eq_s, eq_r);
        let not_touch = b.not(touch);
        assert_zero_if(&mut b, enabled.target, not_touch.target);

        let tag_eq = b.is_equal(limbs[TAG], spec.tag);
        let no_filter = b.not(spec.tag_filter);
        let filtered = b.and(spec.tag_filter, tag_eq);
        let matched = b.or(no_filter, filtered);
        let contributes = b.and(enabled, matched);

        // Strictly increasing hashes; slot 0 continues from the carry unless the block is new.
        let limbs_i = digest_limbs(&mut b, tx_hash);
        let (lower, gate) = match prev_limbs {
            None => {
                let continuing = b.not(new_block);
                (carry_limbs, b.and(enabled, continuing))
            }
            Some(p) => (p, enabled),
        };
        let gt = lex_lt(&mut b, &lower, &limbs_i);
        let bad = b.not(gt);
        assert_zero_if(&mut b, gate.target, bad.target);

        let amount = b.mul_const_add(F::from_canonical_u64(1 << 32), limbs[AMOUNT_HI], limbs[AMOUNT_LO]);
        sum = b.mul_add(contributes.target, amount, sum);
        count = b.add(count, contributes.target);
        k = b.add(k, enabled.target);
        carry = select_digest(&mut b, enabled, tx_hash, carry);

        prev_limbs = Some(limbs_i);
        prev_enabled = Some(enabled);
        slots.push(SlotTargets { enabled, limbs, levels });
    }

    let nonempty = slots[0].enabled;
    let prev_has = prev[pi::HAS_BLOCK];
    let prev_index = prev[pi::INDEX];
    let prev_root = digest_at(&prev, pi::ROOT);

    // Opening a block: it must come after the previous one.
    let opens = b.and(nonempty, new_block);
    let after = lt32(&mut b, prev_index, block_index);
    let not_after = b.not(after);
    let bad = b.mul(prev_has, not_after.target);
    assert_zero_if(&mut b, opens.target, bad);

    // Continuing a block: same index and root as the previous step.
    let not_new = b.not(new_block);
    let continues = b.and(nonempty, not_new);
    b.conditional_assert_eq(continues.target, prev_has, one);
    b.conditional_assert_eq(continues.target, prev_index, block_index);
    conditional_eq_digest(&mut b, continues.target, prev_root, root);

    let mut acc_input = digest_at(&prev, pi::ACC).to_vec();
    acc_input.push(block_index);
    acc_input.extend_from_slice(&root);
    let extended = sponge(&mut b, Domain::Roots, &acc_input);
    let roots_acc = select_digest(&mut b, opens, extended, digest_at(&prev, pi::ACC));

    let has_block = b.select(nonempty, one, prev_has);
    let out_index = b.select(nonempty, block_index, prev_index);
    let out_root = select_digest(&mut b, nonempty, root, prev_root);
    let step = b.add(prev[pi::STEP], one);

    let mut out = Vec::with_capacity(STEP_ELEMENTS);
    out.extend_from_slice(&spec_digest);
    out.extend_from_slice(&roots_acc);
    out.push(has_block);
    out.push(out_index);
    out.extend_from_slice(&out_root);
    out.extend_from_slice(&carry);
    out.extend_from_slice(&[sum, count, k, step]);
    debug_assert_eq!(out.len(), STEP_ELEMENTS);
    b.register_public_inputs(&out);

    let verifier_data = b.add_verifier_data_public_inputs();
    b.conditionally_verify_cyclic_proof_or_dummy::<C>(condition, &inner, &goal)?;

    // Keep the degree from shrinking below the goal between fixpoint rounds.
    let target_rows = (1usize << goal.degree_bits()) / 2 + 1;
    while b.num_gates() < target_rows {
        b.add_gate(NoopGate, vec![]);
    }

    let (data, ok) = b.try_build_with_options::<C>(true);
    let targets = StepTargets { condition, inner, verifier_data, spec, block_index, root, new_block, slots };
    Ok((data, targets, ok))
}

fn verifier_data_len(common: &CommonCircuitData<F, D>) -> usize {
    4 + 4 * common.config.fri_config.num_cap_elements()
}

/// A small recursive circuit whose common data seeds the fixpoint search.
fn seed_common() -> CommonCircuitData<F, D> {
    let config = CircuitConfig::standard_recursion_config();
    let data = CircuitBuilder::<F, D>::new(config.clone()).build::<C>();
    let mut b = CircuitBuilder::<F, D>::new(config.clone());
    let p = b.add_virtual_proof_with_pis(&data.common);
    let vd = b.add_virtual_verifier_data(data.common.config.fri_config.cap_height);
    b.verify_proof::<C>(&p, &vd, &data.common);
    let data = b.build::<C>();
    let mut b = CircuitBuilder::<F, D>::new(config);
    let p = b.add_virtual_proof_with_pis(&data.common);
    let vd = b.add_virtual_verifier_data(data.common.config.fri_config.cap_height);
    b.verify_proof::<C>(&p, &vd, &data.common);
    let mut common = b.build::<C>().common;
    common.num_public_inputs = verifier_data_len(&common);
    common
}

impl StepCircuit {
    pub fn build(shape: CircuitShape) -> Result<Self> {
        const MAX_ROUNDS: usize = 8;
        let mut goal = seed_common();
        for _ in 0..MAX_ROUNDS {
            let (data, targets, ok) = build(&shape, &goal)?;
            if ok {
                let base_proof = cyclic_base_proof(&data.common, &data.verifier_only, Default::default());
                return Ok(Self { data, targets, base_proof, shape });
            }
            goal = data.common;
        }
        Err(anyhow!("step circuit common data did not converge"))
    }

    pub fn degree_bits(&self) -> usize {
        self.data.common.degree_bits()
    }

    pub fn shape(&self) -> &CircuitShape {
        &self.shape
    }

    /// Proves one step. Nothing is checked natively; an unsatisfiable witness fails inside the
    /// prover.
    pub fn prove(
        &self,
        prev: Option<&ProofWithPublicInputs<F, C, D>>,
        spec: &QuerySpec,
        batch: &Batch,
        root: &Digest,
    ) -> Result<ProofWithPublicInputs<F, C, D>> {
        let t = &self.targets;
        if batch.len() > self.shape.batch_capacity {
            return Err(anyhow!("batch exceeds capacity"));
        }
        let mut pw = PartialWitness::new();
        pw.set_bool_target(t.condition, prev.is_some())?;
        pw.set_proof_with_pis_target(&t.inner, prev.unwrap_or(&self.base_proof))?;
        pw.set_verifier_data_target(&t.verifier_data, &self.data.verifier_only)?;
        t.spec.set(&mut pw, spec)?;

        let nonempty = !batch.is_empty();
        let index = if nonempty { batch.block_index } else { 0 };
        pw.set_target(t.block_index, F::from_canonical_u64(index))?;
        for (tt, e) in t.root.iter().zip(root.0) {
            pw.set_target(*tt, to_field(e))?;
        }
        pw.set_bool_target(t.new_block, nonempty && batch.carry_in_hash.is_none())?;

        for (i, slot) in t.slots.iter().enumerate() {
            let entry = batch.transactions.get(i).zip(batch.paths.get(i));
            pw.set_bool_target(slot.enabled, entry.is_some())?;
            let limbs = entry.map(|(tx, _)| tx.limbs()).unwrap_or([0; TX_LIMBS]);
            for (tt, v) in slot.limbs.iter().zip(limbs) {
                pw.set_target(*tt, F::from_canonical_u32(v))?;
            }
            let path = entry.map(|(_, p)| p);
            for (j, level) in slot.levels.iter().enumerate() {
                let (active, is_right, sibling) = match path {
                    Some(p) if j < p.siblings.len() => (true, (p.leaf_index >> j) & 1 == 1, p.siblings[j]),
                    _ => (false, false, None),
                };
                pw.set_bool_target(level.active, active)?;
                pw.set_bool_target(level.is_right, is_right)?;
                pw.set_bool_target(level.lone, active && sibling.is_none())?;
                let s = sibling.unwrap_or(Digest::ZERO);
                for (tt, e) in level.sibling.iter().zip(s.0) {
                    pw.set_target(*tt, to_field(e))?;
                }
            }
        }
        self.data.prove(pw)
    }

    pub fn verify(&self, proof: &ProofWithPublicInputs<F, C, D>) -> Result<()> {
        plonky2::recursion::cyclic_recursion::check_cyclic_proof_verifier_data(
            proof,
            &self.data.verifier_only,
            &self.data.common,
        )?;
        self.data.verify(proof.clone())
    }

    pub fn state_elements(proof: &ProofWithPublicInputs<F, C, D>) -> Vec<u64> {
        proof.public_inputs[..STEP_ELEMENTS].iter().map(|x| x.to_canonical_u64()).collect()
    }
}

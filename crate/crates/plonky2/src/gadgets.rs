//! Circuit gadgets mirroring the native hashing and comparison code.

use plonky2::hash::hash_types::RichField;
use plonky2::hash::hashing::PlonkyPermutation;
use plonky2::hash::poseidon::{PoseidonHash, PoseidonPermutation};
use plonky2::iop::target::{BoolTarget, Target};
use plonky2::plonk::circuit_builder::CircuitBuilder;
use plonky2::field::extension::Extendable;

use sslc_core::hash::{Domain, DIGEST_LEN, DOMAIN_SLOT, LENGTH_SLOT};
use sslc_core::poseidon::{RATE, WIDTH};

pub type DigestTarget = [Target; DIGEST_LEN];

fn permute<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    state: [Target; WIDTH],
) -> [Target; WIDTH] {
    let perm = PoseidonPermutation::new(state);
    let out = b.permute::<PoseidonHash>(perm);
    let mut s = [state[0]; WIDTH];
    s.copy_from_slice(out.as_ref());
    s
}

/// In-circuit `hash_with_domain`.
pub fn sponge<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    domain: Domain,
    input: &[Target],
) -> DigestTarget {
    let zero = b.zero();
    let mut state = [zero; WIDTH];
    state[DOMAIN_SLOT] = b.constant(F::from_canonical_u64(domain as u64));
    state[LENGTH_SLOT] = b.constant(F::from_canonical_usize(input.len()));
    if input.is_empty() {
        state = permute(b, state);
    }
    for chunk in input.chunks(RATE) {
        state[..chunk.len()].copy_from_slice(chunk);
        state = permute(b, state);
    }
    [state[0], state[1], state[2], state[3]]
}

/// One Merkle level in a single permutation: `hash_node(l, r)` when `lone` is false and
/// `hash_lone(l)` when it is true. Both are the sponge over one chunk, differing only in the
/// header and in whether the right half is absorbed.
pub fn level_hash<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    left: DigestTarget,
    right: DigestTarget,
    lone: BoolTarget,
) -> DigestTarget {
    let zero = b.zero();
    let not_lone = b.not(lone);
    let mut state = [zero; WIDTH];
    state[..DIGEST_LEN].copy_from_slice(&left);
    for i in 0..DIGEST_LEN {
        state[DIGEST_LEN + i] = b.mul(right[i], not_lone.target);
    }
    let node = F::from_canonical_u64(Domain::Node as u64);
    let lone_minus_node = F::from_canonical_u64(Domain::Lone as u64 - Domain::Node as u64);
    state[DOMAIN_SLOT] = {
        let c = b.constant(node);
        b.mul_const_add(lone_minus_node, lone.target, c)
    };
    state[LENGTH_SLOT] = {
        let eight = b.constant(F::from_canonical_usize(2 * DIGEST_LEN));
        b.mul_const_add(-F::from_canonical_usize(DIGEST_LEN), lone.target, eight)
    };
    let out = permute(b, state);
    [out[0], out[1], out[2], out[3]]
}

pub fn select_digest<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    cond: BoolTarget,
    x: DigestTarget,
    y: DigestTarget,
) -> DigestTarget {
    core::array::from_fn(|i| b.select(cond, x[i], y[i]))
}

pub fn conditional_eq_digest<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    cond: Target,
    x: DigestTarget,
    y: DigestTarget,
) {
    for i in 0..DIGEST_LEN {
        b.conditional_assert_eq(cond, x[i], y[i]);
    }
}

/// Asserts `cond * x == 0`.
pub fn assert_zero_if<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    cond: Target,
    x: Target,
) {
    let t = b.mul(cond, x);
    b.assert_zero(t);
}

/// Big-endian 32-bit limbs of a digest, most significant first, so that lexicographic limb order
/// equals the native `Digest` order. Each element's split is forced to be the canonical one.
pub fn digest_limbs<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    d: DigestTarget,
) -> [Target; 2 * DIGEST_LEN] {
    let max = b.constant(F::from_canonical_u64(u32::MAX as u64));
    let mut out = [d[0]; 2 * DIGEST_LEN];
    for (i, &e) in d.iter().enumerate() {
        let (lo, hi) = b.split_low_high(e, 32, 64);
        // lo + hi * 2^32 could also equal e + p, which needs hi == 2^32 - 1 and lo > 0.
        let hi_max = b.is_equal(hi, max);
        assert_zero_if(b, hi_max.target, lo);
        out[2 * i] = hi;
        out[2 * i + 1] = lo;
    }
    out
}

/// `x < y` for values already known to be below 2^32.
pub fn lt32<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    x: Target,
    y: Target,
) -> BoolTarget {
    let two32 = b.constant(F::from_canonical_u64(1 << 32));
    let t = b.add(two32, x);
    let t = b.sub(t, y);
    let bits = b.split_le(t, 33);
    b.not(bits[32])
}

/// Lexicographic `a < b` over equal-length limb vectors, most significant first.
pub fn lex_lt<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    x: &[Target],
    y: &[Target],
) -> BoolTarget {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mut acc = lt32(b, x[n - 1], y[n - 1]);
    for j in (0..n - 1).rev() {
        let lt = lt32(b, x[j], y[j]);
        let eq = b.is_equal(x[j], y[j]);
        // lt and eq are exclusive, so the sum stays boolean.
        let v = b.mul_add(eq.target, acc.target, lt.target);
        acc = BoolTarget::new_unsafe(v);
    }
    acc
}

/// Product of limb equalities.
pub fn all_equal<F: RichField + Extendable<D>, const D: usize>(
    b: &mut CircuitBuilder<F, D>,
    x: &[Target],
    y: &[Target],
) -> BoolTarget {
    let mut acc = b._true();
    for (&u, &v) in x.iter().zip(y) {
        let e = b.is_equal(u, v);
        acc = b.and(acc, e);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use plonky2::field::types::{Field, PrimeField64};
    use plonky2::iop::witness::{PartialWitness, WitnessWrite};
    use plonky2::plonk::circuit_data::CircuitConfig;
    use proptest::prelude::*;
    use sslc_core::hash::{hash_lone, hash_node, hash_with_domain, Digest};
    use sslc_core::{poseidon, FieldElement};

    use crate::{to_field, C, D, F};

    fn fe(x: F) -> FieldElement {
        FieldElement::new(x.to_canonical_u64())
    }

    fn digest(d: &[F]) -> Digest {
        Digest([fe(d[0]), fe(d[1]), fe(d[2]), fe(d[3])])
    }

    #[test]
    fn native_permutation_is_plonky2_poseidon() {
        for round in 0..8u64 {
            let seed = hash_with_domain(Domain::Plain, &[FieldElement::new(round)]);
            let input: [F; WIDTH] = core::array::from_fn(|i| to_field(seed.0[i % 4]) * F::from_canonical_u64(i as u64 + 1));
            let mut p = PoseidonPermutation::new(input);
            p.permute();
            let theirs: Vec<u64> = p.as_ref().iter().map(|x| x.to_canonical_u64()).collect();
            let ours = poseidon::permute(input.map(fe));
            assert_eq!(ours.map(|x| x.value()).to_vec(), theirs);
        }
    }

    #[test]
    fn circuit_sponge_matches_native() {
        let lens = [0usize, 1, 4, 8, 9, 13, 21];
        let mut b = CircuitBuilder::<F, D>::new(CircuitConfig::standard_recursion_config());
        let mut cases = Vec::new();
        for (i, &len) in lens.iter().enumerate() {
            let domain = Domain::ALL[i % Domain::ALL.len()];
            let inputs = b.add_virtual_targets(len);
            let out = sponge(&mut b, domain, &inputs);
            b.register_public_inputs(&out);
            cases.push((domain, inputs));
        }
        let data = b.build::<C>();
        let mut pw = PartialWitness::new();
        let mut expected = Vec::new();
        for (domain, inputs) in &cases {
            let vals: Vec<FieldElement> = (0..inputs.len()).map(|j| FieldElement::new(j as u64 * 977 + 5)).collect();
            for (t, v) in inputs.iter().zip(&vals) {
                pw.set_target(*t, to_field(*v)).unwrap();
            }
            expected.push(hash_with_domain(*domain, &vals));
        }
        let proof = data.prove(pw).unwrap();
        for (i, e) in expected.iter().enumerate() {
            assert_eq!(digest(&proof.public_inputs[4 * i..4 * i + 4]), *e);
        }
    }

    #[test]
    fn level_hash_matches_node_and_lone() {
        let mut b = CircuitBuilder::<F, D>::new(CircuitConfig::standard_recursion_config());
        let l: DigestTarget = b.add_virtual_target_arr();
        let r: DigestTarget = b.add_virtual_target_arr();
        let yes = b._true();
        let no = b._false();
        let node = level_hash(&mut b, l, r, no);
        let lone = level_hash(&mut b, l, r, yes);
        b.register_public_inputs(&node);
        b.register_public_inputs(&lone);
        let data = b.build::<C>();
        let dl = hash_with_domain(Domain::Plain, &[FieldElement::new(1)]);
        let dr = hash_with_domain(Domain::Plain, &[FieldElement::new(2)]);
        let mut pw = PartialWitness::new();
        for i in 0..4 {
            pw.set_target(l[i], to_field(dl.0[i])).unwrap();
            pw.set_target(r[i], to_field(dr.0[i])).unwrap();
        }
        let proof = data.prove(pw).unwrap();
        assert_eq!(digest(&proof.public_inputs[0..4]), hash_node(&dl, &dr));
        assert_eq!(digest(&proof.public_inputs[4..8]), hash_lone(&dl));
    }

    struct LtCircuit {
        data: plonky2::plonk::circuit_data::CircuitData<F, C, D>,
        x: DigestTarget,
        y: DigestTarget,
    }

    fn lt_circuit() -> &'static LtCircuit {
        static CELL: std::sync::OnceLock<LtCircuit> = std::sync::OnceLock::new();
        CELL.get_or_init(|| {
            let mut b = CircuitBuilder::<F, D>::new(CircuitConfig::standard_recursion_config());
            let x: DigestTarget = b.add_virtual_target_arr();
            let y: DigestTarget = b.add_virtual_target_arr();
            let xl = digest_limbs(&mut b, x);
            let yl = digest_limbs(&mut b, y);
            let lt = lex_lt(&mut b, &xl, &yl);
            b.register_public_input(lt.target);
            LtCircuit { data: b.build::<C>(), x, y }
        })
    }

    fn circuit_lt(x: &Digest, y: &Digest) -> bool {
        let c = lt_circuit();
        let mut pw = PartialWitness::new();
        for i in 0..4 {
            pw.set_target(c.x[i], to_field(x.0[i])).unwrap();
            pw.set_target(c.y[i], to_field(y.0[i])).unwrap();
        }
        let p = c.data.prove(pw).unwrap();
        p.public_inputs[0] == F::ONE
    }

    // Values near the limb and modulus boundaries, where a split or borrow error would show.
    fn element() -> impl Strategy<Value = u64> {
        let p = sslc_core::field::MODULUS;
        prop_oneof![
            Just(0u64),
            Just(1),
            Just(u32::MAX as u64),
            Just(1 << 32),
            Just(p - 1),
            Just(p - 2),
            Just(p - (1 << 32)),
            0..p,
        ]
    }

    fn digest_strategy() -> impl Strategy<Value = Digest> {
        [element(), element(), element(), element()].prop_map(|v| Digest(v.map(FieldElement::new)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn lexicographic_order_matches_native(x in digest_strategy(), y in digest_strategy(), share in 0usize..4) {
            let mut y = y;
            // Force long shared prefixes so the lower limbs decide.
            y.0[..share].copy_from_slice(&x.0[..share]);
            prop_assert_eq!(circuit_lt(&x, &y), x < y);
            prop_assert!(!circuit_lt(&x, &x));
        }
    }
}

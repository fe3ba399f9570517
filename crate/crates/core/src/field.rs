//! Arithmetic in the Goldilocks prime field, p = 2^64 - 2^32 + 1.

use core::fmt;
use core::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

pub const MODULUS: u64 = 0xffff_ffff_0000_0001;

/// 2^64 mod p.
const EPSILON: u64 = 0xffff_ffff;

/// Canonical element: the stored value is always below [`MODULUS`].
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct FieldElement(u64);

impl FieldElement {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);

    /// Reduces any `u64` into the field.
    pub const fn new(value: u64) -> Self {
        if value >= MODULUS {
            Self(value - MODULUS)
        } else {
            Self(value)
        }
    }

    /// Accepts only already-canonical values.
    pub const fn from_canonical(value: u64) -> Option<Self> {
        if value < MODULUS {
            Some(Self(value))
        } else {
            None
        }
    }

    pub const fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `None` for zero.
    pub fn inverse(self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.pow(MODULUS - 2))
        }
    }

    /// Reduces a 128-bit value modulo p.
    pub fn reduce128(x: u128) -> Self {
        let lo = x as u64;
        let hi = (x >> 64) as u64;
        let hi_hi = hi >> 32;
        let hi_lo = hi & EPSILON;

        // x = lo + hi_lo * 2^64 + hi_hi * 2^96, with 2^96 = -1 and 2^64 = EPSILON.
        let (mut t0, borrow) = lo.overflowing_sub(hi_hi);
        if borrow {
            t0 = t0.wrapping_sub(EPSILON);
        }
        let t1 = hi_lo * EPSILON;
        let (mut res, carry) = t0.overflowing_add(t1);
        if carry {
            res = res.wrapping_add(EPSILON);
        }
        Self::new(res)
    }
}

impl TryFrom<u64> for FieldElement {
    type Error = NonCanonical;

    fn try_from(value: u64) -> Result<Self, Self::Error> {
        Self::from_canonical(value).ok_or(NonCanonical(value))
    }
}

impl From<FieldElement> for u64 {
    fn from(f: FieldElement) -> u64 {
        f.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonCanonical(pub u64);

impl fmt::Display for NonCanonical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} is not a canonical field element", self.0)
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for FieldElement {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (sum, over) = self.0.overflowing_add(rhs.0);
        let (sum, over2) = sum.overflowing_add(if over { EPSILON } else { 0 });
        // Both operands are canonical, so a second overflow is impossible.
        debug_assert!(!over2);
        Self::new(sum)
    }
}

impl Sub for FieldElement {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let (diff, under) = self.0.overflowing_sub(rhs.0);
        if under {
            Self(diff.wrapping_sub(EPSILON))
        } else {
            Self(diff)
        }
    }
}

impl Mul for FieldElement {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self::reduce128(self.0 as u128 * rhs.0 as u128)
    }
}

impl Neg for FieldElement {
    type Output = Self;

    fn neg(self) -> Self {
        Self::ZERO - self
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl From<u32> for FieldElement {
    fn from(v: u32) -> Self {
        Self(v as u64)
    }
}

impl From<bool> for FieldElement {
    fn from(v: bool) -> Self {
        Self(v as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fe() -> impl Strategy<Value = FieldElement> {
        prop_oneof![
            (0..MODULUS).prop_map(FieldElement::new),
            (0u64..16).prop_map(|d| FieldElement::new(MODULUS - 1 - d)),
            (0u64..16).prop_map(FieldElement::new),
        ]
    }

    fn slow_mul(a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % MODULUS as u128) as u64
    }

    #[test]
    fn modulus_shape() {
        assert_eq!(MODULUS as u128, (1u128 << 64) - (1u128 << 32) + 1);
    }

    #[test]
    fn wraparound_edges() {
        let top = FieldElement::new(MODULUS - 1);
        assert_eq!(top + FieldElement::ONE, FieldElement::ZERO);
        assert_eq!(FieldElement::ZERO - FieldElement::ONE, top);
        assert_eq!(top * top, FieldElement::ONE);
        assert_eq!(FieldElement::new(u64::MAX).value(), EPSILON - 1);
        assert!(FieldElement::from_canonical(MODULUS).is_none());
        assert_eq!(FieldElement::ZERO.inverse(), None);
    }

    #[test]
    fn reduce128_matches_bigint_mod() {
        for x in [0u128, 1, u64::MAX as u128, u128::MAX, (MODULUS as u128) << 64, 1 << 96] {
            assert_eq!(FieldElement::reduce128(x).value() as u128, x % MODULUS as u128);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn ring_axioms(a in fe(), b in fe(), c in fe()) {
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - a, FieldElement::ZERO);
            prop_assert_eq!(a + (-a), FieldElement::ZERO);
            prop_assert_eq!((a * b).value(), slow_mul(a.value(), b.value()));
        }

        #[test]
        fn inverses(a in fe()) {
            if let Some(inv) = a.inverse() {
                prop_assert_eq!(a * inv, FieldElement::ONE);
            } else {
                prop_assert!(a.is_zero());
            }
        }
    }
}

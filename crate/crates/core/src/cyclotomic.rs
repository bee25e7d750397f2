//! Exact arithmetic with powers of a fixed primitive `4r`-th root of unity.
//!
//! `ζ = exp(iπ/(2r))`, so `A = ζ²` is a primitive `2r`-th root of unity and
//! `A² = exp(2πi/r)`. Half-integer powers of `A` are integer powers of `ζ`,
//! which keeps every coefficient in this crate integral.
//!
//! Equality is tested in the group ring `Z[ζ]/(ζ^{4r} − 1)`, not in the
//! cyclotomic field: two [`CycElem`]s compare equal only if they agree term
//! by term. Group-ring equality implies equality of complex values.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The level `r = 2m + 1` together with the exponent modulus `4r` of `ζ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RootSystem {
    r: u32,
}

impl RootSystem {
    pub fn new(r: i64) -> Result<Self> {
        if r < 3 || r % 2 == 0 || r > (u32::MAX / 8) as i64 {
            return Err(Error::InvalidLevel(r));
        }
        Ok(RootSystem { r: r as u32 })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    /// Dimension of the torus space, `(r − 1)/2`.
    pub fn m(&self) -> u32 {
        (self.r - 1) / 2
    }

    /// Exponent modulus of `ζ`.
    pub fn order(&self) -> u32 {
        4 * self.r
    }

    pub fn reduce_exp(&self, exp: i64) -> u32 {
        exp.rem_euclid(self.order() as i64) as u32
    }

    /// `sign · ζ^exp` in canonical form.
    pub fn monomial(&self, sign: i8, exp: i64) -> Monomial {
        match sign.signum() {
            0 => Monomial::ZERO,
            s => Monomial {
                sign: s,
                exp: self.reduce_exp(exp),
            },
        }
    }

    /// `ζ^exp`.
    pub fn zeta(&self, exp: i64) -> Monomial {
        self.monomial(1, exp)
    }

    pub fn mono_mul(&self, a: Monomial, b: Monomial) -> Monomial {
        if a.is_zero() || b.is_zero() {
            return Monomial::ZERO;
        }
        Monomial {
            sign: a.sign * b.sign,
            exp: (a.exp + b.exp) % self.order(),
        }
    }

    /// Multiplicative inverse of a nonzero monomial; zero maps to zero.
    pub fn mono_inv(&self, a: Monomial) -> Monomial {
        if a.is_zero() {
            return Monomial::ZERO;
        }
        Monomial {
            sign: a.sign,
            exp: (self.order() - a.exp) % self.order(),
        }
    }

    pub fn cyc_mul(&self, a: &CycElem, b: &CycElem) -> CycElem {
        let mut out = CycElem::zero();
        for (&ea, &ca) in &a.coeffs {
            for (&eb, &cb) in &b.coeffs {
                out.add_raw((ea + eb) % self.order(), ca * cb);
            }
        }
        out
    }

    /// `m · x` for a monomial `m`.
    pub fn scale(&self, x: &CycElem, m: Monomial) -> CycElem {
        if m.is_zero() {
            return CycElem::zero();
        }
        let order = self.order();
        CycElem {
            coeffs: x
                .coeffs
                .iter()
                .map(|(&e, &c)| ((e + m.exp) % order, c * m.sign as i64))
                .collect(),
        }
    }

    /// `ζ^exp` as a complex number.
    pub fn zeta_value(&self, exp: u32) -> Complex64 {
        Complex64::from_polar(1.0, PI * exp as f64 / (2.0 * self.r as f64))
    }

    pub fn eval_mono(&self, m: Monomial) -> Complex64 {
        if m.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        self.zeta_value(m.exp) * m.sign as f64
    }

    pub fn eval(&self, x: &CycElem) -> Complex64 {
        x.coeffs
            .iter()
            .map(|(&e, &c)| self.zeta_value(e) * c as f64)
            .sum()
    }
}

/// A signed power `±ζ^exp`, or zero.
///
/// The zero monomial is stored as `(0, 0)`; nonzero monomials keep their
/// exponent reduced into `[0, 4r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    sign: i8,
    exp: u32,
}

impl Monomial {
    pub const ZERO: Monomial = Monomial { sign: 0, exp: 0 };
    pub const ONE: Monomial = Monomial { sign: 1, exp: 0 };

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn exp(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }
}

impl Neg for Monomial {
    type Output = Monomial;

    fn neg(self) -> Monomial {
        Monomial {
            sign: -self.sign,
            exp: self.exp,
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            0 => write!(f, "0"),
            1 => write!(f, "ζ^{}", self.exp),
            _ => write!(f, "-ζ^{}", self.exp),
        }
    }
}

/// Integer combination of powers of `ζ`, exponents in `[0, 4r)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CycElem {
    coeffs: BTreeMap<u32, i64>,
}

impl CycElem {
    pub fn zero() -> Self {
        CycElem::default()
    }

    pub fn one() -> Self {
        Monomial::ONE.into()
    }

    /// Builds an element from `(exponent, coefficient)` pairs with arbitrary
    /// integer exponents.
    pub fn from_terms<I>(sys: &RootSystem, terms: I) -> Self
    where
        I: IntoIterator<Item = (i64, i64)>,
    {
        let mut out = CycElem::zero();
        for (e, c) in terms {
            out.add_raw(sys.reduce_exp(e), c);
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Number of stored (nonzero) terms.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, exp: u32) -> i64 {
        self.coeffs.get(&exp).copied().unwrap_or(0)
    }

    /// `(exponent, coefficient)` pairs in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (u32, i64)> + '_ {
        self.coeffs.iter().map(|(&e, &c)| (e, c))
    }

    pub fn add_monomial(&mut self, m: Monomial) {
        if !m.is_zero() {
            self.add_raw(m.exp, m.sign as i64);
        }
    }

    /// The element as a single signed monomial, if it is one.
    pub fn as_monomial(&self) -> Option<Monomial> {
        if self.coeffs.len() != 1 {
            return None;
        }
        let (&exp, &c) = self.coeffs.iter().next()?;
        match c {
            1 => Some(Monomial { sign: 1, exp }),
            -1 => Some(Monomial { sign: -1, exp }),
            _ => None,
        }
    }

    fn add_raw(&mut self, exp: u32, c: i64) {
        if c == 0 {
            return;
        }
        let slot = self.coeffs.entry(exp).or_insert(0);
        *slot += c;
        if *slot == 0 {
            self.coeffs.remove(&exp);
        }
    }
}

impl From<Monomial> for CycElem {
    fn from(m: Monomial) -> Self {
        let mut out = CycElem::zero();
        out.add_monomial(m);
        out
    }
}

impl Add for &CycElem {
    type Output = CycElem;

    fn add(self, rhs: &CycElem) -> CycElem {
        let mut out = self.clone();
        for (&e, &c) in &rhs.coeffs {
            out.add_raw(e, c);
        }
        out
    }
}

impl Sub for &CycElem {
    type Output = CycElem;

    fn sub(self, rhs: &CycElem) -> CycElem {
        let mut out = self.clone();
        for (&e, &c) in &rhs.coeffs {
            out.add_raw(e, -c);
        }
        out
    }
}

impl Neg for &CycElem {
    type Output = CycElem;

    fn neg(self) -> CycElem {
        CycElem {
            coeffs: self.coeffs.iter().map(|(&e, &c)| (e, -c)).collect(),
        }
    }
}

impl fmt::Display for CycElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        for (n, (e, c)) in self.coeffs.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}ζ^{e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sys(r: i64) -> RootSystem {
        RootSystem::new(r).unwrap()
    }

    #[test]
    fn rejects_bad_levels() {
        for r in [-3, 0, 1, 2, 4, 10] {
            assert_eq!(RootSystem::new(r), Err(Error::InvalidLevel(r)));
        }
        let s = sys(13);
        assert_eq!((s.r(), s.m(), s.order()), (13, 6, 52));
    }

    #[test]
    fn mono_mul_examples() {
        let s = sys(7);
        let one = s.monomial(1, 0);
        assert_eq!(s.mono_mul(one, one), one);
        let a = s.monomial(-1, 3);
        let b = s.monomial(1, 4 * 7 - 3);
        assert_eq!(s.mono_mul(a, b), s.monomial(-1, 0));
        assert_eq!(s.mono_mul(Monomial::ZERO, s.monomial(1, 5)), Monomial::ZERO);
    }

    #[test]
    fn canonical_zero() {
        let s = sys(5);
        assert_eq!(s.monomial(0, 17), Monomial::ZERO);
        assert_eq!(s.monomial(1, -1).exp(), 19);
        assert_eq!(s.mono_inv(s.monomial(-1, 3)), s.monomial(-1, 17));
    }

    #[test]
    fn mono_mul_group_laws_exhaustive() {
        let s = sys(3);
        let all: Vec<Monomial> = [-1i8, 0, 1]
            .iter()
            .flat_map(|&sg| (0..12).map(move |e| (sg, e)))
            .map(|(sg, e)| s.monomial(sg, e))
            .collect();
        for &a in &all {
            assert_eq!(s.mono_mul(a, Monomial::ONE), a);
            for &b in &all {
                assert_eq!(s.mono_mul(a, b), s.mono_mul(b, a));
                for &c in &all {
                    assert_eq!(
                        s.mono_mul(s.mono_mul(a, b), c),
                        s.mono_mul(a, s.mono_mul(b, c))
                    );
                }
            }
        }
    }

    #[test]
    fn cyc_examples() {
        let s = sys(7);
        let a = CycElem::from_terms(&s, [(0, 1)]);
        let b = CycElem::from_terms(&s, [(0, -1)]);
        assert!((&a + &b).is_zero());

        let x = CycElem::from_terms(&s, [(1, 1)]);
        let y = CycElem::from_terms(&s, [(4 * 7 - 1, 1)]);
        assert_eq!(s.cyc_mul(&x, &y), CycElem::one());

        let z = CycElem::from_terms(&s, [(0, 1), (2, 1)]);
        assert_eq!(s.cyc_mul(&z, &CycElem::one()), z);
    }

    #[test]
    fn eval_examples() {
        for r in [3, 7, 13, 101] {
            let s = sys(r);
            let one = s.eval(&CycElem::one());
            assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            let minus = s.eval(&CycElem::from_terms(&s, [(2 * r, 1)]));
            assert!((minus - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
            let cancel = s.eval(&CycElem::from_terms(&s, [(0, 1), (2 * r, 1)]));
            assert!(cancel.norm() < 1e-12);
        }
    }

    #[test]
    fn as_monomial_only_for_single_unit_terms() {
        let s = sys(5);
        assert_eq!(
            CycElem::from_terms(&s, [(3, -1)]).as_monomial(),
            Some(s.monomial(-1, 3))
        );
        assert_eq!(CycElem::from_terms(&s, [(3, 2)]).as_monomial(), None);
        assert_eq!(
            CycElem::from_terms(&s, [(3, 1), (4, 1)]).as_monomial(),
            None
        );
        assert_eq!(CycElem::zero().as_monomial(), None);
    }

    fn elem_strategy(order: i64) -> impl Strategy<Value = Vec<(i64, i64)>> {
        prop::collection::vec((-3 * order..3 * order, -5i64..=5), 0..=10)
    }

    proptest! {
        #[test]
        fn eval_is_ring_homomorphism(
            r in (1i64..40).prop_map(|k| 2 * k + 1),
            a in elem_strategy(200),
            b in elem_strategy(200),
        ) {
            let s = sys(r);
            let x = CycElem::from_terms(&s, a);
            let y = CycElem::from_terms(&s, b);
            let lhs = s.eval(&s.cyc_mul(&x, &y));
            let rhs = s.eval(&x) * s.eval(&y);
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()) * 10.0);
            let sum = s.eval(&(&x + &y)) - (s.eval(&x) + s.eval(&y));
            prop_assert!(sum.norm() < 1e-12 * 100.0);
        }

        #[test]
        fn group_ring_equality_implies_complex_equality(
            r in (1i64..40).prop_map(|k| 2 * k + 1),
            a in elem_strategy(200),
            b in elem_strategy(200),
            c in elem_strategy(200),
        ) {
            // (x + y)·z and x·z + y·z are equal in the group ring.
            let s = sys(r);
            let x = CycElem::from_terms(&s, a);
            let y = CycElem::from_terms(&s, b);
            let z = CycElem::from_terms(&s, c);
            let lhs = s.cyc_mul(&(&x + &y), &z);
            let rhs = &s.cyc_mul(&x, &z) + &s.cyc_mul(&y, &z);
            prop_assert_eq!(&lhs, &rhs);
            prop_assert!((s.eval(&lhs) - s.eval(&rhs)).norm() < 1e-12 * (1.0 + s.eval(&lhs).norm()) * 10.0);
        }

        #[test]
        fn nonzero_monomials_have_unit_modulus(
            r in (1i64..200).prop_map(|k| 2 * k + 1),
            sign in prop::sample::select(vec![-1i8, 1]),
            exp in -100_000i64..100_000,
        ) {
            let s = sys(r);
            let v = s.eval_mono(s.monomial(sign, exp));
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }
}

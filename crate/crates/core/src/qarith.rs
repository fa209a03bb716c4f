//! Exact rationals and the symmetric q-deformed integers, factorials and
//! binomials that every weight and duality value is built from.
//!
//! `[k]_q` is evaluated as the balanced Laurent sum
//! `q^{k-1} + q^{k-3} + ... + q^{1-k}`, which is regular at `q = ±1` and is
//! invariant under `q -> 1/q`.

use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms with a positive
/// denominator. Serializes as `"p/q"`, or `"p"` when the denominator is 1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        assert!(denom != 0, "zero denominator");
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(v: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Self {
        Rational(BigRational::new(numer, denom))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    /// Multiplicative inverse. Panics on zero; callers check first.
    pub fn recip(&self) -> Self {
        assert!(!self.is_zero(), "reciprocal of zero");
        Rational(self.0.recip())
    }

    pub fn checked_recip(&self) -> Result<Self> {
        if self.is_zero() {
            Err(Error::Domain("reciprocal of zero".into()))
        } else {
            Ok(self.recip())
        }
    }

    /// Integer power; negative exponents require a nonzero base.
    pub fn pow(&self, exp: i64) -> Self {
        if exp == 0 {
            return Rational::one();
        }
        let base = if exp < 0 { self.recip() } else { self.clone() };
        let mut e = exp.unsigned_abs();
        let mut acc = BigRational::one();
        let mut sq = base.0;
        while e > 0 {
            if e & 1 == 1 {
                acc *= &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Rational(acc)
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("not a rational: {s:?}"));
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return Err(bad());
        }
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p, q),
            None => (s, "1"),
        };
        let numer: BigInt = p.parse().map_err(|_| bad())?;
        let denom: BigInt = q.parse().map_err(|_| bad())?;
        if denom.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::from_integer(v)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $atr:ident, $am:ident) => {
        impl $tr<Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational($tr::$m(self.0, rhs.0))
            }
        }
        impl<'a> $tr<&'a Rational> for Rational {
            type Output = Rational;
            fn $m(self, rhs: &'a Rational) -> Rational {
                Rational($tr::$m(self.0, &rhs.0))
            }
        }
        impl<'a> $tr<Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: Rational) -> Rational {
                Rational($tr::$m(&self.0, rhs.0))
            }
        }
        impl<'a, 'b> $tr<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $m(self, rhs: &'b Rational) -> Rational {
                Rational($tr::$m(&self.0, &rhs.0))
            }
        }
        impl $atr<Rational> for Rational {
            fn $am(&mut self, rhs: Rational) {
                $atr::$am(&mut self.0, rhs.0)
            }
        }
        impl<'a> $atr<&'a Rational> for Rational {
            fn $am(&mut self, rhs: &'a Rational) {
                $atr::$am(&mut self.0, &rhs.0)
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);
binop!(Div, div, DivAssign, div_assign);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl<'a> Neg for &'a Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Rational {
        iter.fold(Rational::zero(), |a, b| a + b)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Rational {
        iter.fold(Rational::one(), |a, b| a * b)
    }
}

fn check_q(q: &Rational) -> Result<()> {
    if q.is_zero() {
        Err(Error::Domain("q must be nonzero".into()))
    } else {
        Ok(())
    }
}

/// The symmetric q-integer `[k]_q`.
pub fn q_int(k: u32, q: &Rational) -> Result<Rational> {
    check_q(q)?;
    let k = i64::from(k);
    Ok((0..k).map(|i| q.pow(k - 1 - 2 * i)).sum())
}

/// `[1]_q [2]_q ... [k]_q`, with `[0]_q^! = 1`.
pub fn q_fact(k: u32, q: &Rational) -> Result<Rational> {
    check_q(q)?;
    let mut acc = Rational::one();
    for i in 1..=k {
        acc *= q_int(i, q)?;
    }
    Ok(acc)
}

/// q-binomial; zero when `k < 0` or `n < k`.
pub fn q_binom(n: i64, k: i64, q: &Rational) -> Result<Rational> {
    check_q(q)?;
    if k < 0 || n < k {
        return Ok(Rational::zero());
    }
    // n >= k >= 0 here
    let (n, k) = (n as u32, k as u32);
    Ok(q_fact(n, q)? / (q_fact(k, q)? * q_fact(n - k, q)?))
}

/// Precomputed q-factorials and a cache of integer powers for one fixed `q`.
///
/// The hot loops of the duality checks only ever need `q^e` for moderate `e`
/// and `[k]_q^!` for `k` up to the largest site capacity, so both are tabulated.
#[derive(Clone, Debug)]
pub struct QTables {
    q: Rational,
    facts: Vec<Rational>,
    pow_offset: i64,
    pows: Vec<Rational>,
}

impl QTables {
    /// Tables valid for factorial arguments up to `max_fact` and powers in
    /// `[-max_pow, max_pow]`; powers outside the range are computed on demand.
    pub fn new(q: &Rational, max_fact: u32, max_pow: i64) -> Result<Self> {
        check_q(q)?;
        let mut facts = Vec::with_capacity(max_fact as usize + 1);
        facts.push(Rational::one());
        for i in 1..=max_fact {
            let next = &facts[i as usize - 1] * q_int(i, q)?;
            facts.push(next);
        }
        let qinv = q.recip();
        let mut pows = vec![Rational::one(); (2 * max_pow + 1) as usize];
        for e in 1..=max_pow {
            pows[(max_pow + e) as usize] = &pows[(max_pow + e - 1) as usize] * q;
            pows[(max_pow - e) as usize] = &pows[(max_pow - e + 1) as usize] * &qinv;
        }
        Ok(QTables {
            q: q.clone(),
            facts,
            pow_offset: max_pow,
            pows,
        })
    }

    pub fn q(&self) -> &Rational {
        &self.q
    }

    pub fn pow(&self, e: i64) -> Rational {
        match usize::try_from(e + self.pow_offset) {
            Ok(i) if i < self.pows.len() => self.pows[i].clone(),
            _ => self.q.pow(e),
        }
    }

    pub fn fact(&self, k: u32) -> Rational {
        match self.facts.get(k as usize) {
            Some(v) => v.clone(),
            None => q_fact(k, &self.q).expect("q checked nonzero"),
        }
    }

    pub fn binom(&self, n: i64, k: i64) -> Rational {
        if k < 0 || n < k {
            return Rational::zero();
        }
        self.fact(n as u32) / (self.fact(k as u32) * self.fact((n - k) as u32))
    }

    pub fn int(&self, k: u32) -> Rational {
        q_int(k, &self.q).expect("q checked nonzero")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    /// `(q^k - q^-k) / (q - q^-1)`, valid when `q^2 != 1`.
    fn quotient_oracle(k: u32, q: &Rational) -> Rational {
        let k = i64::from(k);
        (q.pow(k) - q.pow(-k)) / (q - &q.recip())
    }

    #[test]
    fn q_int_examples() {
        for q in ["2", "-3/7", "1", "-1"] {
            assert_eq!(q_int(0, &r(q)).unwrap(), Rational::zero());
            assert_eq!(q_int(1, &r(q)).unwrap(), Rational::one());
        }
        assert_eq!(q_int(3, &r("2")).unwrap(), r("21/4"));
        assert_eq!(q_int(2, &r("1/2")).unwrap(), r("5/2"));
        assert_eq!(q_int(2, &r("1/2")).unwrap(), q_int(2, &r("2")).unwrap());
        assert_eq!(q_int(5, &r("1")).unwrap(), r("5"));
        assert_eq!(q_int(4, &r("-1")).unwrap(), r("-4"));
    }

    #[test]
    fn q_int_matches_quotient_away_from_unit_q() {
        for q in ["2", "3/5", "-7/4", "11/13"] {
            for k in 0..10 {
                assert_eq!(q_int(k, &r(q)).unwrap(), quotient_oracle(k, &r(q)));
            }
        }
    }

    #[test]
    fn q_fact_and_binom_examples() {
        assert_eq!(q_fact(0, &r("5")).unwrap(), Rational::one());
        assert_eq!(q_fact(3, &r("2")).unwrap(), r("105/8"));
        assert_eq!(q_fact(3, &r("1/2")).unwrap(), r("105/8"));
        assert_eq!(q_binom(1, 2, &r("2")).unwrap(), Rational::zero());
        assert_eq!(q_binom(2, 1, &r("2")).unwrap(), r("5/2"));
        assert_eq!(q_binom(4, 2, &r("2")).unwrap(), r("357/16"));
        assert_eq!(q_binom(3, -1, &r("2")).unwrap(), Rational::zero());
        assert_eq!(q_binom(-1, 0, &r("2")).unwrap(), Rational::zero());
    }

    #[test]
    fn gaussian_binomial_laurent_cross_check() {
        // q^-4 + q^-2 + 2 + q^2 + q^4 at q = 2
        let q = r("2");
        let laurent = q.pow(-4) + q.pow(-2) + r("2") + q.pow(2) + q.pow(4);
        assert_eq!(q_binom(4, 2, &q).unwrap(), laurent);
    }

    #[test]
    fn zero_q_is_rejected() {
        let z = Rational::zero();
        assert!(matches!(q_int(2, &z), Err(Error::Domain(_))));
        assert!(matches!(q_fact(2, &z), Err(Error::Domain(_))));
        assert!(matches!(q_binom(2, 1, &z), Err(Error::Domain(_))));
        assert!(QTables::new(&z, 3, 3).is_err());
    }

    #[test]
    fn rational_string_format() {
        assert_eq!(r("4/6").to_string(), "2/3");
        assert_eq!(r("-4/2").to_string(), "-2");
        assert_eq!(r("3/-6").to_string(), "-1/2");
        assert_eq!(r("0/5").to_string(), "0");
        assert!("1 /2".parse::<Rational>().is_err());
        assert!("1/0".parse::<Rational>().is_err());
        assert!("x".parse::<Rational>().is_err());
        assert_eq!(serde_json::to_string(&r("-7/3")).unwrap(), "\"-7/3\"");
        let back: Rational = serde_json::from_str("\"10/4\"").unwrap();
        assert_eq!(back, r("5/2"));
    }

    #[test]
    fn powers_and_tables_agree() {
        let q = r("-5/3");
        let t = QTables::new(&q, 6, 8).unwrap();
        for e in -12..=12 {
            assert_eq!(t.pow(e), q.pow(e));
        }
        for n in -1..=6 {
            for k in -1..=7 {
                assert_eq!(t.binom(n, k), q_binom(n, k, &q).unwrap());
            }
        }
        assert_eq!(q.pow(-2), r("9/25"));
    }

    fn nonzero_rational() -> impl proptest::strategy::Strategy<Value = Rational> {
        use proptest::prelude::*;
        (1i64..=1000, 1i64..=1000, any::<bool>())
            .prop_map(|(a, b, neg)| Rational::new(if neg { -a } else { a }, b))
    }

    fn ordinary_binomial(n: i64, k: i64) -> i64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn q_one_gives_ordinary_binomials() {
        let one = Rational::one();
        for n in 0..=10 {
            for k in 0..=n {
                assert_eq!(q_binom(n, k, &one).unwrap(), Rational::from_integer(ordinary_binomial(n, k)));
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(20))]
        #[test]
        fn inversion_invariance(q in nonzero_rational()) {
            let qi = q.recip();
            for k in 0..=12u32 {
                proptest::prop_assert_eq!(q_int(k, &q).unwrap(), q_int(k, &qi).unwrap());
                proptest::prop_assert_eq!(q_fact(k, &q).unwrap(), q_fact(k, &qi).unwrap());
                for j in 0..=i64::from(k) {
                    proptest::prop_assert_eq!(q_binom(i64::from(k), j, &q).unwrap(), q_binom(i64::from(k), j, &qi).unwrap());
                }
            }
        }

        #[test]
        fn binomial_symmetry_and_factorial_identity(q in nonzero_rational()) {
            for n in 0..=10i64 {
                for k in 0..=n {
                    let b = q_binom(n, k, &q).unwrap();
                    proptest::prop_assert_eq!(&b, &q_binom(n, n - k, &q).unwrap());
                    let lhs = b * q_fact(k as u32, &q).unwrap() * q_fact((n - k) as u32, &q).unwrap();
                    proptest::prop_assert_eq!(lhs, q_fact(n as u32, &q).unwrap());
                }
            }
        }
    }
}

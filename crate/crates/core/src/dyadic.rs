//! Exact dyadic rationals `m / 2^k`.
//!
//! Every value produced by the constructions is a finite sum of powers of
//! two, so this type never rounds. Values are kept in canonical form: the
//! mantissa is odd, or the value is zero and stored as `0 / 2^0`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseDyadicError {
    #[error("expected `m/2^k` or `m/d` with d a power of two, got {0:?}")]
    Shape(String),
    #[error("bad mantissa in {0:?}")]
    Mantissa(String),
    #[error("bad exponent in {0:?}")]
    Exponent(String),
}

/// An exact rational of the form `mantissa / 2^exponent`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exponent: u64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic {
            mantissa: BigInt::zero(),
            exponent: 0,
        }
    }

    pub fn one() -> Self {
        Dyadic::from_integer(1)
    }

    pub fn from_integer(n: impl Into<BigInt>) -> Self {
        Dyadic::new(n.into(), 0)
    }

    /// Builds `mantissa / 2^exponent` and brings it into canonical form.
    pub fn new(mantissa: BigInt, exponent: u64) -> Self {
        let mut d = Dyadic { mantissa, exponent };
        d.canonicalize();
        d
    }

    /// `2^k` for any signed `k`.
    pub fn pow2(k: i64) -> Self {
        if k >= 0 {
            Dyadic {
                mantissa: BigInt::one() << (k as u64),
                exponent: 0,
            }
        } else {
            Dyadic {
                mantissa: BigInt::one(),
                exponent: k.unsigned_abs(),
            }
        }
    }

    /// `2^-k`, the jump size attached to exponent `k`.
    pub fn inv_pow2(k: u64) -> Self {
        Dyadic {
            mantissa: BigInt::one(),
            exponent: k,
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa.is_positive()
    }

    pub fn is_canonical(&self) -> bool {
        if self.mantissa.is_zero() {
            self.exponent == 0
        } else {
            self.exponent == 0 || self.mantissa.bit(0)
        }
    }

    /// Returns `k` when the value is exactly `2^k`.
    pub fn log2_exact(&self) -> Option<i64> {
        if !self.mantissa.is_positive() {
            return None;
        }
        let m = self.mantissa.magnitude();
        if m.count_ones() != 1 {
            return None;
        }
        // canonical: either m == 1, or exponent == 0 and m = 2^j
        let j = m.bits() as i64 - 1;
        Some(j - self.exponent as i64)
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.mantissa.clone(), BigInt::one() << self.exponent)
    }

    fn canonicalize(&mut self) {
        if self.mantissa.is_zero() {
            self.exponent = 0;
            return;
        }
        let tz = self.mantissa.trailing_zeros().unwrap_or(0);
        let shift = tz.min(self.exponent);
        if shift > 0 {
            self.mantissa >>= shift;
            self.exponent -= shift;
        }
    }

    /// Mantissas of `self` and `other` over the common exponent.
    fn aligned(&self, other: &Dyadic) -> (BigInt, BigInt, u64) {
        let e = self.exponent.max(other.exponent);
        let a = &self.mantissa << (e - self.exponent);
        let b = &other.mantissa << (e - other.exponent);
        (a, b, e)
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::zero()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.exponent == other.exponent {
            return self.mantissa.cmp(&other.mantissa);
        }
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add<&Dyadic> for &Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;

    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl AddAssign<&Dyadic> for Dyadic {
    fn add_assign(&mut self, rhs: &Dyadic) {
        *self = &*self + rhs;
    }
}

impl Sub<&Dyadic> for &Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: &Dyadic) -> Dyadic {
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a - b, e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;

    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul<&Dyadic> for &Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exponent + rhs.exponent)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;

    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;

    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl<'a> std::iter::Sum<&'a Dyadic> for Dyadic {
    fn sum<I: Iterator<Item = &'a Dyadic>>(iter: I) -> Self {
        iter.fold(Dyadic::zero(), |acc, d| &acc + d)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.mantissa, self.exponent)
    }
}

impl FromStr for Dyadic {
    type Err = ParseDyadicError;

    /// Accepts `m/2^k`, `m/d` with `d` a power of two, and bare integers.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (m, k) = match s.split_once('/') {
            Some((m, rest)) => (m.trim(), Some(rest.trim())),
            None => (s, None),
        };
        let mantissa =
            BigInt::from_str(m).map_err(|_| ParseDyadicError::Mantissa(s.to_string()))?;
        let exponent = match k {
            Some(k) => match k.strip_prefix("2^") {
                Some(k) => k
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| ParseDyadicError::Exponent(s.to_string()))?,
                None => {
                    let d = k
                        .parse::<u64>()
                        .map_err(|_| ParseDyadicError::Shape(s.to_string()))?;
                    if !d.is_power_of_two() {
                        return Err(ParseDyadicError::Shape(s.to_string()));
                    }
                    d.trailing_zeros() as u64
                }
            },
            None => 0,
        };
        Ok(Dyadic::new(mantissa, exponent))
    }
}

#[derive(Serialize, Deserialize)]
struct DyadicRepr {
    m: String,
    k: u64,
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DyadicRepr {
            m: self.mantissa.to_string(),
            k: self.exponent,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Dyadic {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = DyadicRepr::deserialize(deserializer)?;
        let m = BigInt::from_str(&repr.m).map_err(serde::de::Error::custom)?;
        Ok(Dyadic::new(m, repr.k))
    }
}

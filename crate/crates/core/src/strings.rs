//! Finite binary strings: prefix and lexicographic orders, the
//! length-lexicographic numbering, the string/number pairing used by
//! counters, and a finite-window estimate of the true path.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StringsError {
    #[error("invalid bit string {0:?}")]
    BadBits(String),
    #[error("empty window [{0}, {1})")]
    EmptyWindow(usize, usize),
    #[error("window end {end} exceeds the {len} recorded settlements")]
    WindowOutOfRange { end: usize, len: usize },
    #[error("threshold must be at least 1")]
    ZeroThreshold,
}

/// A finite binary string; the empty string is written `λ` for humans and
/// `""` in machine formats.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinStr {
    bits: Vec<bool>,
}

impl BinStr {
    pub fn empty() -> Self {
        BinStr { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BinStr { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn last(&self) -> Option<bool> {
        self.bits.last().copied()
    }

    pub fn push(&mut self, b: bool) {
        self.bits.push(b);
    }

    pub fn pop(&mut self) -> Option<bool> {
        self.bits.pop()
    }

    /// `self` followed by bit `b`.
    pub fn child(&self, b: bool) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len() + 1);
        bits.extend_from_slice(&self.bits);
        bits.push(b);
        BinStr { bits }
    }

    /// The prefix of length `n` (clamped to the whole string).
    pub fn prefix(&self, n: usize) -> Self {
        BinStr {
            bits: self.bits[..n.min(self.bits.len())].to_vec(),
        }
    }

    /// All prefixes from `λ` up to and including `self`.
    pub fn prefixes(&self) -> impl Iterator<Item = BinStr> + '_ {
        (0..=self.bits.len()).map(move |n| self.prefix(n))
    }

    pub fn count_zeros(&self) -> usize {
        self.bits.iter().filter(|b| !**b).count()
    }

    /// `self ⊑ other`.
    pub fn is_prefix_of(&self, other: &BinStr) -> bool {
        is_prefix(self, other)
    }

    /// `self ⊑ other` and `self != other`.
    pub fn is_proper_prefix_of(&self, other: &BinStr) -> bool {
        self.len() < other.len() && is_prefix(self, other)
    }

    pub fn nu(&self) -> BigUint {
        nu(self)
    }

    /// `ν(self)` when it fits in a `u64`.
    pub fn nu_u64(&self) -> Option<u64> {
        let mut v: u64 = 0;
        for &b in &self.bits {
            v = v.checked_mul(2)?.checked_add(1 + b as u64)?;
        }
        Some(v)
    }

    /// Bit text with no marker for the empty string.
    pub fn to_bit_string(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for BinStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            f.write_str("λ")
        } else {
            f.write_str(&self.to_bit_string())
        }
    }
}

impl fmt::Debug for BinStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinStr({self})")
    }
}

impl FromStr for BinStr {
    type Err = StringsError;

    /// Accepts `""` or `"λ"` for the empty string.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "λ" {
            return Ok(BinStr::empty());
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(StringsError::BadBits(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BinStr { bits })
    }
}

impl Serialize for BinStr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for BinStr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn is_prefix(sigma: &BinStr, tau: &BinStr) -> bool {
    sigma.len() <= tau.len() && tau.bits[..sigma.len()] == sigma.bits[..]
}

/// `σ <_L τ`: some `ρ` has `ρ0 ⊑ σ` and `ρ1 ⊑ τ`.
pub fn lex_less(sigma: &BinStr, tau: &BinStr) -> bool {
    sigma
        .bits
        .iter()
        .zip(&tau.bits)
        .find(|(a, b)| a != b)
        .is_some_and(|(a, _)| !*a)
}

/// Position of `σ` in the length-lexicographic order `λ, 0, 1, 00, ...`.
pub fn nu(sigma: &BinStr) -> BigUint {
    if let Some(v) = sigma.nu_u64() {
        return BigUint::from(v);
    }
    let mut value = BigUint::zero();
    for &b in &sigma.bits {
        value <<= 1u32;
        if b {
            value += 1u32;
        }
    }
    (BigUint::one() << sigma.len()) - 1u32 + value
}

pub fn nu_inv(n: &BigUint) -> BinStr {
    let m = n + 1u32;
    let len = (m.bits() - 1) as usize;
    let value = m - (BigUint::one() << len);
    let bits = (0..len).rev().map(|i| value.bit(i as u64)).collect();
    BinStr { bits }
}

/// Cantor's pairing `P(m, n) = (m+n)(m+n+1)/2 + n`.
pub fn cantor_pair(m: &BigUint, n: &BigUint) -> BigUint {
    let s = m + n;
    (&s * (&s + 1u32)) / 2u32 + n
}

pub fn cantor_unpair(z: &BigUint) -> (BigUint, BigUint) {
    // largest s with s(s+1)/2 <= z
    let mut s = ((z * 8u32 + 1u32).sqrt() - 1u32) / 2u32;
    while (&s * (&s + 1u32)) / 2u32 > *z {
        s -= 1u32;
    }
    let tri = (&s * (&s + 1u32)) / 2u32;
    let n = z - tri;
    let m = &s - &n;
    (m, n)
}

/// `⟨σ, n⟩ = P(ν(σ), n)`.
pub fn pair(sigma: &BinStr, n: &BigUint) -> BigUint {
    cantor_pair(&nu(sigma), n)
}

pub fn unpair(c: &BigUint) -> (BinStr, BigUint) {
    let (m, n) = cantor_unpair(c);
    (nu_inv(&m), n)
}

/// Finite-horizon estimate of the true path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruePathEstimate {
    pub path: BinStr,
    /// Number of leading bits whose choice won by at least the threshold.
    pub stable_upto: usize,
    pub window: (usize, usize),
    pub threshold: usize,
}

impl TruePathEstimate {
    /// The stable prefix of length `len`, if the estimate reaches that far.
    pub fn stable_prefix(&self, len: usize) -> Option<BinStr> {
        (len <= self.stable_upto).then(|| self.path.prefix(len))
    }
}

pub const DEFAULT_THRESHOLD: usize = 3;

/// The default observation window: the second half of the run.
pub fn default_window(stages: usize) -> (usize, usize) {
    (stages / 2, stages)
}

/// Extends the path bit by bit: `0` when at least `threshold` settlements in
/// the window pass through `prefix·0`, else `1`. Stops once no settlement in
/// the window extends the current prefix.
pub fn true_path_estimate(
    settlements: &[BinStr],
    window: (usize, usize),
    threshold: usize,
) -> Result<TruePathEstimate, StringsError> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(StringsError::EmptyWindow(lo, hi));
    }
    if hi > settlements.len() {
        return Err(StringsError::WindowOutOfRange {
            end: hi,
            len: settlements.len(),
        });
    }
    if threshold == 0 {
        return Err(StringsError::ZeroThreshold);
    }
    let observed = &settlements[lo..hi];
    let mut path = BinStr::empty();
    let mut stable_upto = 0;
    let mut stable = true;
    loop {
        let depth = path.len();
        let (mut zeros, mut ones) = (0usize, 0usize);
        for s in observed {
            if s.len() > depth && is_prefix(&path, s) {
                if s.bit(depth) {
                    ones += 1;
                } else {
                    zeros += 1;
                }
            }
        }
        if zeros + ones == 0 {
            break;
        }
        let (bit, chosen, other) = if zeros >= threshold {
            (false, zeros, ones)
        } else {
            (true, ones, zeros)
        };
        stable = stable && chosen >= other + threshold;
        if stable {
            stable_upto += 1;
        }
        path.push(bit);
    }
    Ok(TruePathEstimate {
        path,
        stable_upto,
        window,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(text: &str) -> BinStr {
        text.parse().unwrap()
    }

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn prefix_examples() {
        assert!(is_prefix(&s(""), &s("01")));
        assert!(is_prefix(&s("01"), &s("01")));
        assert!(!is_prefix(&s("10"), &s("01")));
    }

    #[test]
    fn lex_examples() {
        assert!(lex_less(&s("0"), &s("1")));
        assert!(!lex_less(&s(""), &s("1")));
        assert!(!lex_less(&s("1"), &s("")));
        assert!(lex_less(&s("01"), &s("1")));
    }

    #[test]
    fn nu_examples() {
        assert_eq!(nu(&s("")), big(0));
        assert_eq!(nu(&s("0")), big(1));
        assert_eq!(nu(&s("1")), big(2));
        assert_eq!(nu(&s("00")), big(3));
        assert_eq!(nu(&s("11")), big(6));
        assert_eq!(nu_inv(&big(0)), s(""));
        assert_eq!(nu_inv(&big(3)), s("00"));
        assert_eq!(nu_inv(&big(6)), s("11"));
    }

    #[test]
    fn nu_of_long_strings() {
        let long = BinStr::from_bits(vec![true; 100]);
        assert_eq!(long.nu_u64(), None);
        assert_eq!(nu(&long), (BigUint::one() << 101u32) - 2u32);
        assert_eq!(nu_inv(&nu(&long)), long);
    }

    #[test]
    fn pairing_examples() {
        assert_eq!(cantor_pair(&big(0), &big(0)), big(0));
        assert_eq!(cantor_pair(&big(2), &big(1)), big(7));
        assert_eq!(cantor_pair(&big(1), &big(2)), big(8));
        assert_eq!(pair(&s(""), &big(0)), big(0));
        assert_eq!(pair(&s("1"), &big(1)), big(7));
        assert_eq!(unpair(&big(7)), (s("1"), big(1)));
    }

    #[test]
    fn unpair_huge_codes() {
        let n = BigUint::one() << 3000u32;
        let sigma = s("0110");
        assert_eq!(unpair(&pair(&sigma, &n)), (sigma, n));
    }

    #[test]
    fn text_forms() {
        assert_eq!(s("").to_string(), "λ");
        assert_eq!(s("λ"), BinStr::empty());
        assert_eq!(serde_json::to_string(&s("")).unwrap(), "\"\"");
        assert_eq!(serde_json::to_string(&s("0110")).unwrap(), "\"0110\"");
        assert!("012".parse::<BinStr>().is_err());
    }

    #[test]
    fn estimate_all_lambda() {
        let settled = vec![BinStr::empty(); 10];
        let est = true_path_estimate(&settled, (0, 10), 3).unwrap();
        assert!(est.path.bits().iter().all(|&b| b));
        assert_eq!(est.stable_upto, 0);
    }

    #[test]
    fn estimate_majority_zero() {
        let settled = vec![s("0"), s("0"), s("0"), s("1")];
        let est = true_path_estimate(&settled, (0, 4), 3).unwrap();
        assert!(!est.path.bit(0));
    }

    #[test]
    fn estimate_alternating() {
        let settled: Vec<_> = (0..8)
            .map(|i| if i % 2 == 0 { s("0") } else { s("1") })
            .collect();
        let est = true_path_estimate(&settled, (0, 8), 5).unwrap();
        assert!(est.path.bit(0));
        assert_eq!(est.stable_upto, 0);
    }

    #[test]
    fn estimate_errors() {
        let settled = vec![s("0"); 4];
        assert_eq!(
            true_path_estimate(&settled, (2, 2), 3),
            Err(StringsError::EmptyWindow(2, 2))
        );
        assert!(true_path_estimate(&settled, (0, 5), 3).is_err());
        assert_eq!(
            true_path_estimate(&settled, (0, 4), 0),
            Err(StringsError::ZeroThreshold)
        );
    }

    #[test]
    fn estimate_stable_prefix() {
        let settled = vec![s("01"); 6];
        let est = true_path_estimate(&settled, (0, 6), 3).unwrap();
        assert_eq!(est.path, s("01"));
        assert_eq!(est.stable_upto, 2);
        assert_eq!(est.stable_prefix(1), Some(s("0")));
    }

    fn arb_binstr() -> impl Strategy<Value = BinStr> {
        proptest::collection::vec(any::<bool>(), 0..12).prop_map(BinStr::from_bits)
    }

    proptest! {
        #[test]
        fn order_trichotomy(a in arb_binstr(), b in arb_binstr()) {
            prop_assume!(a != b);
            let relations = [
                lex_less(&a, &b),
                lex_less(&b, &a),
                is_prefix(&a, &b),
                is_prefix(&b, &a),
            ];
            prop_assert_eq!(relations.iter().filter(|r| **r).count(), 1);
        }

        #[test]
        fn lex_irreflexive_transitive(a in arb_binstr(), b in arb_binstr(), c in arb_binstr()) {
            prop_assert!(!lex_less(&a, &a));
            if lex_less(&a, &b) && lex_less(&b, &c) {
                prop_assert!(lex_less(&a, &c));
            }
        }

        #[test]
        fn nu_orders_by_length_then_value(a in arb_binstr(), b in arb_binstr()) {
            let by_key = (a.len(), a.bits().to_vec()).cmp(&(b.len(), b.bits().to_vec()));
            prop_assert_eq!(nu(&a).cmp(&nu(&b)), by_key);
        }
    }
}

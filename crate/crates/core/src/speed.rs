//! Transformations between speedable, regainingly approximable and nearly
//! computable approximations, over finite sequences.
//!
//! Everything involving the limit needs it exactly, so those operations take
//! sequences carrying a `known_limit` and refuse otherwise.

use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpeedError {
    #[error("sequence has no known limit")]
    NoLimit,
    #[error("known limit is below x_{0}")]
    LimitBelow(usize),
    #[error("sequence is not {what} at index {n}")]
    NotMonotone { what: &'static str, n: usize },
    #[error("known limit must exceed every value, but x_{0} reaches it")]
    LimitReached(usize),
    #[error("ratio must lie strictly between 0 and 1, got {0}")]
    Ratio(Dyadic),
    #[error("the two ratio forms disagree at index {0}")]
    FormMismatch(usize),
    #[error("f is not a modulus: |x - x_{j}| ≥ 2^-{n} although {j} ≥ f({n})")]
    NotModulus { n: u64, j: u64 },
    #[error("f is not non-decreasing: f({n}) > f({})", n + 1)]
    ModulusDecreases { n: u64 },
    #[error("f stays ≤ {bound} on its first {budget} arguments")]
    ModulusBounded { bound: u64, budget: u64 },
    #[error("modulus undefined at {0}")]
    Undefined(u64),
    #[error("incomplete: no i in [f(0), {budget}) with g(i) ≥ k")]
    Incomplete { budget: u64 },
}

/// A finite approximation `x_0, x_1, …`, optionally with its exact limit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApproxSequence {
    pub values: Vec<Dyadic>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_limit: Option<Dyadic>,
    #[serde(default)]
    pub tag: String,
}

impl ApproxSequence {
    pub fn new(
        values: Vec<Dyadic>,
        known_limit: Option<Dyadic>,
        tag: impl Into<String>,
    ) -> Result<Self, SpeedError> {
        if let Some(x) = &known_limit {
            if let Some(n) = values.iter().position(|v| v > x) {
                return Err(SpeedError::LimitBelow(n));
            }
        }
        Ok(ApproxSequence {
            values,
            known_limit,
            tag: tag.into(),
        })
    }

    /// `x_n = f(n)` for `n < len`.
    pub fn from_fn(
        len: usize,
        known_limit: Option<Dyadic>,
        tag: &str,
        f: impl Fn(u64) -> Dyadic,
    ) -> Result<Self, SpeedError> {
        ApproxSequence::new((0..len as u64).map(f).collect(), known_limit, tag)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn limit(&self) -> Result<&Dyadic, SpeedError> {
        self.known_limit.as_ref().ok_or(SpeedError::NoLimit)
    }

    pub fn require_non_decreasing(&self) -> Result<(), SpeedError> {
        match self.values.windows(2).position(|w| w[1] < w[0]) {
            Some(n) => Err(SpeedError::NotMonotone {
                what: "non-decreasing",
                n: n + 1,
            }),
            None => Ok(()),
        }
    }

    pub fn require_increasing(&self) -> Result<(), SpeedError> {
        match self.values.windows(2).position(|w| w[1] <= w[0]) {
            Some(n) => Err(SpeedError::NotMonotone {
                what: "increasing",
                n: n + 1,
            }),
            None => Ok(()),
        }
    }

    /// `(x_{n+1} - x_n) / (x - x_n)`, when the limit is known and above
    /// `x_n`.
    pub fn ratio(&self, n: usize) -> Option<BigRational> {
        let x = self.known_limit.as_ref()?;
        let (a, b) = (self.values.get(n)?, self.values.get(n + 1)?);
        let gap = x - a;
        if !gap.is_positive() {
            return None;
        }
        Some((b - a).to_rational() / gap.to_rational())
    }

    /// Indices with `x - x_n < 2^-n`.
    pub fn regaining_indices(&self) -> Result<Vec<u64>, SpeedError> {
        let x = self.limit()?;
        Ok(self
            .values
            .iter()
            .enumerate()
            .filter(|(n, v)| (x - *v) < Dyadic::inv_pow2(*n as u64))
            .map(|(n, _)| n as u64)
            .collect())
    }
}

/// A non-decreasing map `ℕ → ℕ`, as a closed form or a table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusFn {
    /// `n ↦ mul·n + add`.
    Affine { mul: u64, add: u64 },
    /// `n ↦ v` for the last `(k, v)` with `k ≤ n`; 0 before the first step.
    Step { steps: Vec<(u64, u64)> },
    /// `n ↦ values[n]`; undefined past the end.
    Table { values: Vec<u64> },
}

impl ModulusFn {
    pub fn identity() -> Self {
        ModulusFn::Affine { mul: 1, add: 0 }
    }

    pub fn eval(&self, n: u64) -> Option<u64> {
        match self {
            ModulusFn::Affine { mul, add } => mul.checked_mul(n)?.checked_add(*add),
            ModulusFn::Step { steps } => Some(
                steps
                    .iter()
                    .take_while(|(k, _)| *k <= n)
                    .last()
                    .map_or(0, |(_, v)| *v),
            ),
            ModulusFn::Table { values } => values.get(n as usize).copied(),
        }
    }

    /// Values on `0..len`, failing at the first undefined argument.
    pub fn table(&self, len: u64) -> Result<Vec<u64>, SpeedError> {
        (0..len)
            .map(|n| self.eval(n).ok_or(SpeedError::Undefined(n)))
            .collect()
    }

    /// Length of the defined prefix, capped at `cap`.
    pub fn defined_upto(&self, cap: u64) -> u64 {
        match self {
            ModulusFn::Table { values } => (values.len() as u64).min(cap),
            _ => (0..cap).find(|n| self.eval(*n).is_none()).unwrap_or(cap),
        }
    }

    pub fn require_non_decreasing(&self, len: u64) -> Result<(), SpeedError> {
        let t = self.table(len)?;
        match t.windows(2).position(|w| w[1] < w[0]) {
            Some(n) => Err(SpeedError::ModulusDecreases { n: n as u64 }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for ModulusFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModulusFn::Affine { mul, add } => write!(f, "n ↦ {mul}n + {add}"),
            ModulusFn::Step { steps } => write!(f, "step {steps:?}"),
            ModulusFn::Table { values } => write!(f, "table of {} values", values.len()),
        }
    }
}

fn check_ratio(rho: &Dyadic) -> Result<(), SpeedError> {
    if rho.is_positive() && *rho < Dyadic::one() {
        Ok(())
    } else {
        Err(SpeedError::Ratio(rho.clone()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedupIndices {
    /// `n` with `(x_{n+1} - x_n) / (x - x_n) ≥ ρ`.
    pub indices: Vec<u64>,
    /// `n` with `(x - x_{n+1}) / (x - x_n) ≤ 1 - ρ`.
    pub complement_form: Vec<u64>,
}

/// Both forms of the speed-up condition, computed separately; the first by
/// cross-multiplying in dyadics, the second by exact rational division.
pub fn speedup_indices(seq: &ApproxSequence, rho: &Dyadic) -> Result<SpeedupIndices, SpeedError> {
    check_ratio(rho)?;
    let x = seq.limit()?;
    seq.require_increasing()?;
    if let Some(n) = seq.values.iter().position(|v| v >= x) {
        return Err(SpeedError::LimitReached(n));
    }
    let mut indices = Vec::new();
    let mut complement_form = Vec::new();
    let rho_c = (Dyadic::one() - rho.clone()).to_rational();
    for (n, w) in seq.values.windows(2).enumerate() {
        if &w[1] - &w[0] >= rho * &(x - &w[0]) {
            indices.push(n as u64);
        }
        let q = (x - &w[1]).to_rational() / (x - &w[0]).to_rational();
        if q <= rho_c {
            complement_form.push(n as u64);
        }
        if indices.last() != complement_form.last() {
            return Err(SpeedError::FormMismatch(n));
        }
    }
    Ok(SpeedupIndices {
        indices,
        complement_form,
    })
}

/// `y_n = x_n - 2^-n`, same limit.
pub fn regain_to_speed(seq: &ApproxSequence) -> Result<ApproxSequence, SpeedError> {
    seq.require_non_decreasing()?;
    let values = seq
        .values
        .iter()
        .enumerate()
        .map(|(n, v)| v - &Dyadic::inv_pow2(n as u64))
        .collect();
    Ok(ApproxSequence {
        values,
        known_limit: seq.known_limit.clone(),
        tag: format!("{}-shifted", seq.tag),
    })
}

/// The shifted sequence's ratio at one regaining index of the original.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegainRatio {
    pub n: u64,
    pub ratio: BigRational,
    pub above_quarter: bool,
}

/// Ratios of `regain_to_speed(seq)` at every regaining index of `seq` that
/// has a successor.
pub fn regaining_ratios(seq: &ApproxSequence) -> Result<Vec<RegainRatio>, SpeedError> {
    let y = regain_to_speed(seq)?;
    let quarter = Dyadic::inv_pow2(2).to_rational();
    Ok(seq
        .regaining_indices()?
        .into_iter()
        .filter_map(|n| {
            let ratio = y.ratio(n as usize)?;
            let above_quarter = ratio > quarter;
            Some(RegainRatio {
                n,
                ratio,
                above_quarter,
            })
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedToRegain {
    /// `g(n) = 0` if `f(0) > n`, else `max{k : f(k) ≤ n}`.
    pub g: ModulusFn,
    /// Least `k` with `1/ρ ≤ 2^k`.
    pub k: u64,
    /// `h(n) = max(0, g(n) - k)`.
    pub h: ModulusFn,
    /// `min{i ≥ f(0) : g(i) ≥ k}`.
    pub m: u64,
}

/// `g` on `0..len` for a non-decreasing unbounded `f`.
pub fn inverse_modulus(f: &ModulusFn, len: u64) -> Result<Vec<u64>, SpeedError> {
    let f0 = f.eval(0).ok_or(SpeedError::Undefined(0))?;
    let mut g = Vec::with_capacity(len as usize);
    // f(k) for k = 0..=cursor is known to be ≤ n
    let mut k = 0u64;
    let mut f_next = f0;
    let budget = len.saturating_mul(4).max(1 << 16);
    for n in 0..len {
        if f0 > n {
            g.push(0);
            continue;
        }
        while f_next <= n {
            k += 1;
            if k > budget {
                return Err(SpeedError::ModulusBounded { bound: n, budget });
            }
            let next = f.eval(k).ok_or(SpeedError::Undefined(k))?;
            if next < f_next {
                return Err(SpeedError::ModulusDecreases { n: k - 1 });
            }
            f_next = next;
        }
        g.push(k - 1);
    }
    Ok(g)
}

/// Least `k` with `1 ≤ ρ·2^k`.
pub fn ratio_exponent(rho: &Dyadic) -> Result<u64, SpeedError> {
    check_ratio(rho)?;
    Ok((0..)
        .find(|&k| rho * &Dyadic::pow2(k as i64) >= Dyadic::one())
        .expect("ρ > 0"))
}

/// The moduli of the speedable-to-regaining direction, tabulated on
/// `0..len`.
pub fn speed_to_regain(f: &ModulusFn, rho: &Dyadic, len: u64) -> Result<SpeedToRegain, SpeedError> {
    let k = ratio_exponent(rho)?;
    let g = inverse_modulus(f, len)?;
    let h: Vec<u64> = g.iter().map(|v| v.saturating_sub(k)).collect();
    let f0 = f.eval(0).ok_or(SpeedError::Undefined(0))?;
    let m = (f0..len)
        .find(|&i| g[i as usize] >= k)
        .ok_or(SpeedError::Incomplete { budget: len })?;
    Ok(SpeedToRegain {
        g: ModulusFn::Table { values: g },
        k,
        h: ModulusFn::Table { values: h },
        m,
    })
}

/// Indices `n` with `x - x_n ≤ 2^-h(n)`, over the range where both are
/// defined.
pub fn certify_regaining(seq: &ApproxSequence, h: &ModulusFn) -> Result<Vec<u64>, SpeedError> {
    let x = seq.limit()?;
    let len = h.defined_upto(seq.len() as u64);
    Ok((0..len)
        .filter(|&n| {
            let hn = h.eval(n).expect("within the defined prefix");
            x - &seq.values[n as usize] <= Dyadic::inv_pow2(hn)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    /// Indices `n ≥ f(0)` whose gap `x_{n+1} - x_n` was compared.
    pub checked: u64,
    /// `n` with `x_{n+1} - x_n ≥ 2^-g(n)`.
    pub violations: Vec<u64>,
}

impl GapReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `f` is a modulus of convergence on the evaluated range, then
/// that `x_{n+1} - x_n < 2^-g(n)` for every `n ≥ f(0)`.
pub fn modulus_to_gapbound(f: &ModulusFn, seq: &ApproxSequence) -> Result<GapReport, SpeedError> {
    let x = seq.limit()?;
    let len = seq.len() as u64;
    if len == 0 {
        return Ok(GapReport {
            checked: 0,
            violations: Vec::new(),
        });
    }
    // largest |x - x_j| over j ≥ i, and where it is attained
    let mut tail: Vec<(Dyadic, u64)> = Vec::with_capacity(len as usize);
    for j in (0..len).rev() {
        let d = (x - &seq.values[j as usize]).abs();
        match tail.last() {
            Some((best, _)) if *best >= d => {
                let keep = tail.last().expect("nonempty").clone();
                tail.push(keep);
            }
            _ => tail.push((d, j)),
        }
    }
    tail.reverse();
    let mut n = 0u64;
    while let Some(fn_) = f.eval(n) {
        if fn_ >= len {
            break;
        }
        let (d, j) = &tail[fn_ as usize];
        if *d >= Dyadic::inv_pow2(n) {
            return Err(SpeedError::NotModulus { n, j: *j });
        }
        n += 1;
    }
    let f0 = f.eval(0).ok_or(SpeedError::Undefined(0))?;
    let g = inverse_modulus(f, len)?;
    let mut report = GapReport {
        checked: 0,
        violations: Vec::new(),
    };
    for i in f0..len.saturating_sub(1) {
        report.checked += 1;
        let gap = &seq.values[i as usize + 1] - &seq.values[i as usize];
        if gap >= Dyadic::inv_pow2(g[i as usize]) {
            report.violations.push(i);
        }
    }
    Ok(report)
}

//! Per-strategy parameters with full history.
//!
//! Strategies live in a trie that only materializes nodes that were ever
//! written or used as the root of an initialized region; every other
//! strategy reads its defaults lazily from `ν(σ)`. Each field keeps its
//! write history and each node keeps the stages at which its subtree was
//! initialized, so the value of any parameter at any stage can be read back
//! after the fact.
//!
//! Reading "at stage `t`" means the value `p(σ)[t]`, fixed by events of
//! stages `< t`. An event recorded at stage `t` fixes `[t+1]` values.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strings::{lex_less, pair, unpair, BinStr};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamError {
    #[error("counter code {0} decodes to a label with zero pending jumps")]
    ZeroCount(BigUint),
    #[error("witness {value} of {sigma} is below its floor ν(σ)")]
    WitnessBelowFloor { sigma: BinStr, value: BigUint },
    #[error("value {value} does not fit field {field}")]
    Range { field: Field, value: BigUint },
}

/// A non-zero counter `⟨label, count⟩`: `count ≥ 1` split jumps owed on
/// behalf of the threatened strategy `label`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Counter {
    pub label: BinStr,
    pub count: BigUint,
}

impl Counter {
    pub fn code(&self) -> BigUint {
        pair(&self.label, &self.count)
    }

    /// Code `0` is the empty counter. Any other code must carry a positive
    /// count.
    pub fn decode(code: &BigUint) -> Result<Option<Counter>, ParamError> {
        if code.is_zero() {
            return Ok(None);
        }
        let (label, count) = unpair(code);
        if count.is_zero() {
            return Err(ParamError::ZeroCount(code.clone()));
        }
        Ok(Some(Counter { label, count }))
    }
}

pub fn counter_code(c: Option<&Counter>) -> BigUint {
    c.map(Counter::code).unwrap_or_default()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "c")]
    Counter,
    #[serde(rename = "r")]
    Restraint,
    /// Satisfaction flag `s` in the first construction, pause flag `p` in
    /// the second.
    #[serde(rename = "flag")]
    Flag,
    #[serde(rename = "w")]
    Witness,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Counter => "c",
            Field::Restraint => "r",
            Field::Flag => "flag",
            Field::Witness => "w",
        })
    }
}

impl FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c" => Ok(Field::Counter),
            "r" => Ok(Field::Restraint),
            "flag" | "s" | "p" => Ok(Field::Flag),
            "w" => Ok(Field::Witness),
            _ => Err(format!("unknown parameter {s:?}")),
        }
    }
}

/// Region of strategies reset by one initialization event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// `{τ : anchor <_L τ}`
    #[serde(rename = "lex-greater")]
    LexGreater,
    /// `{τ : anchor <_L τ or anchor ≺ τ}`
    #[serde(rename = "lex-greater-or-extends")]
    LexGreaterOrExtends,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InitRegion {
    pub anchor: BinStr,
    pub relation: Relation,
}

impl InitRegion {
    pub fn new(anchor: BinStr, relation: Relation) -> Self {
        InitRegion { anchor, relation }
    }

    pub fn covers(&self, tau: &BinStr) -> bool {
        lex_less(&self.anchor, tau)
            || (self.relation == Relation::LexGreaterOrExtends
                && self.anchor.is_proper_prefix_of(tau))
    }

    /// Roots of the disjoint subtrees whose union is the region.
    pub fn subtree_roots(&self) -> Vec<BinStr> {
        let mut roots: Vec<BinStr> = (0..self.anchor.len())
            .filter(|&i| !self.anchor.bit(i))
            .map(|i| self.anchor.prefix(i).child(true))
            .collect();
        if self.relation == Relation::LexGreaterOrExtends {
            roots.push(self.anchor.child(false));
            roots.push(self.anchor.child(true));
        }
        roots
    }
}

/// A single recorded write.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Counter(Option<Counter>),
    Restraint(u64),
    Flag(bool),
    /// Witness stored as its offset above `ν(σ)`.
    WitnessOffset(u64),
}

/// Which fields an initialization resets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResetPolicy {
    pub flag: bool,
}

#[derive(Default)]
struct Node {
    children: [u32; 2],
    inits: Vec<u64>,
    counter: Vec<(u64, Option<Counter>)>,
    restraint: Vec<(u64, u64)>,
    flag: Vec<(u64, bool)>,
    witness: Vec<(u64, u64)>,
}

/// Parameters of one strategy at one stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Params<'a> {
    pub counter: Option<&'a Counter>,
    pub restraint: u64,
    pub flag: bool,
    pub witness_offset: u64,
    /// Stage of the latest initialization covering the strategy.
    pub last_init: Option<u64>,
}

fn latest<V>(hist: &[(u64, V)], t: u64) -> Option<&(u64, V)> {
    let i = hist.partition_point(|(s, _)| *s < t);
    i.checked_sub(1).map(|i| &hist[i])
}

fn latest_init(inits: &[u64], t: u64) -> Option<u64> {
    let i = inits.partition_point(|s| *s < t);
    i.checked_sub(1).map(|i| inits[i])
}

pub struct ParamStore {
    nodes: Vec<Node>,
    policy: ResetPolicy,
}

impl ParamStore {
    pub fn new(policy: ResetPolicy) -> Self {
        ParamStore {
            nodes: vec![Node::default()],
            policy,
        }
    }

    pub fn policy(&self) -> ResetPolicy {
        self.policy
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn node_mut(&mut self, sigma: &BinStr) -> &mut Node {
        let mut idx = 0usize;
        for &b in sigma.bits() {
            let next = self.nodes[idx].children[b as usize];
            idx = if next == 0 {
                let fresh = self.nodes.len();
                self.nodes.push(Node::default());
                self.nodes[idx].children[b as usize] = fresh as u32;
                fresh
            } else {
                next as usize
            };
        }
        &mut self.nodes[idx]
    }

    /// Records `value` as written during stage `stage`. Stages must be
    /// recorded in non-decreasing order; a second write in the same stage
    /// replaces the first.
    pub fn write(&mut self, sigma: &BinStr, stage: u64, value: Value) {
        fn push<V>(hist: &mut Vec<(u64, V)>, stage: u64, v: V) {
            match hist.last_mut() {
                Some(last) if last.0 == stage => last.1 = v,
                Some(last) => {
                    assert!(last.0 < stage, "writes must come in stage order");
                    hist.push((stage, v));
                }
                None => hist.push((stage, v)),
            }
        }
        let node = self.node_mut(sigma);
        match value {
            Value::Counter(c) => push(&mut node.counter, stage, c),
            Value::Restraint(r) => push(&mut node.restraint, stage, r),
            Value::Flag(f) => push(&mut node.flag, stage, f),
            Value::WitnessOffset(w) => push(&mut node.witness, stage, w),
        }
    }

    /// Initializes the subtree rooted at `root` at the end of `stage`.
    pub fn init_subtree(&mut self, root: &BinStr, stage: u64) {
        let node = self.node_mut(root);
        if node.inits.last() != Some(&stage) {
            assert!(node.inits.last().is_none_or(|s| *s < stage));
            node.inits.push(stage);
        }
    }

    pub fn init_region(&mut self, region: &InitRegion, stage: u64) {
        for root in region.subtree_roots() {
            self.init_subtree(&root, stage);
        }
    }

    pub fn cursor(&self, t: u64) -> Cursor<'_> {
        Cursor {
            store: self,
            t,
            node: Some(0),
            last_init: latest_init(&self.nodes[0].inits, t),
            depth: 0,
            nu: Some(0),
        }
    }

    /// Parameters of `sigma` at stage `t`.
    pub fn read(&self, sigma: &BinStr, t: u64) -> Params<'_> {
        let mut cur = self.cursor(t);
        for &b in sigma.bits() {
            cur = cur.child(b);
        }
        cur.params()
    }

    /// `w(σ)[t]` as an exact natural.
    pub fn witness(&self, sigma: &BinStr, t: u64) -> BigUint {
        sigma.nu() + self.read(sigma, t).witness_offset
    }

    /// Every strategy that carries a write or roots an initialized subtree,
    /// parents before children.
    pub fn strategies(&self) -> Vec<BinStr> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![(0usize, BinStr::empty())];
        while let Some((i, sigma)) = stack.pop() {
            for b in [true, false] {
                let c = self.nodes[i].children[b as usize];
                if c != 0 {
                    stack.push((c as usize, sigma.child(b)));
                }
            }
            out.push(sigma);
        }
        out
    }

    /// Sorted stages at which a parameter of `sigma` may change: its own
    /// writes and the initializations covering it.
    pub fn event_stages(&self, sigma: &BinStr) -> Vec<u64> {
        let mut out = Vec::new();
        let mut idx = Some(0usize);
        let mut depth = 0;
        while let Some(i) = idx {
            let node = &self.nodes[i];
            out.extend_from_slice(&node.inits);
            if depth == sigma.len() {
                out.extend(node.counter.iter().map(|(s, _)| *s));
                out.extend(node.restraint.iter().map(|(s, _)| *s));
                out.extend(node.flag.iter().map(|(s, _)| *s));
                out.extend(node.witness.iter().map(|(s, _)| *s));
                break;
            }
            let c = node.children[sigma.bit(depth) as usize];
            idx = (c != 0).then_some(c as usize);
            depth += 1;
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The last initialization of `sigma` at a stage in `[from, to)`.
    pub fn init_between(&self, sigma: &BinStr, from: u64, to: u64) -> Option<u64> {
        let mut best: Option<u64> = None;
        let mut idx = Some(0usize);
        let mut consider = |inits: &[u64]| {
            let hi = inits.partition_point(|s| *s < to);
            if hi > 0 && inits[hi - 1] >= from {
                best = best.max(Some(inits[hi - 1]));
            }
        };
        if let Some(i) = idx {
            consider(&self.nodes[i].inits);
        }
        for &b in sigma.bits() {
            idx = idx.and_then(|i| {
                let c = self.nodes[i].children[b as usize];
                (c != 0).then_some(c as usize)
            });
            match idx {
                Some(i) => consider(&self.nodes[i].inits),
                None => break,
            }
        }
        best
    }
}

/// Walks down the trie one bit at a time, tracking the node (if it exists),
/// the latest initialization covering the current strategy, and `ν`.
#[derive(Clone)]
pub struct Cursor<'a> {
    store: &'a ParamStore,
    t: u64,
    node: Option<usize>,
    last_init: Option<u64>,
    depth: usize,
    nu: Option<u64>,
}

impl<'a> Cursor<'a> {
    pub fn child(&self, b: bool) -> Cursor<'a> {
        let node = self.node.and_then(|i| {
            let c = self.store.nodes[i].children[b as usize];
            (c != 0).then_some(c as usize)
        });
        let last_init = match node {
            Some(i) => self
                .last_init
                .max(latest_init(&self.store.nodes[i].inits, self.t)),
            None => self.last_init,
        };
        Cursor {
            store: self.store,
            t: self.t,
            node,
            last_init,
            depth: self.depth + 1,
            nu: self
                .nu
                .and_then(|v| v.checked_mul(2))
                .and_then(|v| v.checked_add(1 + b as u64)),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// `ν` of the current strategy, if it fits in a `u64`.
    pub fn nu(&self) -> Option<u64> {
        self.nu
    }

    pub fn params(&self) -> Params<'a> {
        let init = self.last_init;
        let Some(i) = self.node else {
            return Params {
                counter: None,
                restraint: 0,
                flag: false,
                witness_offset: init.map_or(0, |s| s + 2),
                last_init: init,
            };
        };
        let node = &self.store.nodes[i];
        let t = self.t;
        // a write survives unless an initialization at the same or a later stage follows it
        let survives = |stage: u64| init.is_none_or(|s| stage > s);
        let counter = match latest(&node.counter, t) {
            Some((s, c)) if survives(*s) => c.as_ref(),
            _ => None,
        };
        let restraint = latest(&node.restraint, t).map_or(0, |(_, r)| *r);
        let flag = match latest(&node.flag, t) {
            Some((s, f)) if !self.store.policy.flag || survives(*s) => *f,
            _ => false,
        };
        let witness_offset = match latest(&node.witness, t) {
            Some((s, w)) if survives(*s) => *w,
            _ => init.map_or(0, |s| s + 2),
        };
        Params {
            counter,
            restraint,
            flag,
            witness_offset,
            last_init: init,
        }
    }

    /// `w` of the current strategy if it fits in a `u64`.
    pub fn witness(&self, params: &Params<'_>) -> Option<u64> {
        self.nu?.checked_add(params.witness_offset)
    }
}

/// Converts a natural to `u64` or reports which field overflowed.
pub fn small(field: Field, value: &BigUint) -> Result<u64, ParamError> {
    value.to_u64().ok_or_else(|| ParamError::Range {
        field,
        value: value.clone(),
    })
}

/// Natural-number encoding of a stored value, as it appears in traces.
pub fn encode(sigma: &BinStr, value: &Value) -> BigUint {
    match value {
        Value::Counter(c) => counter_code(c.as_ref()),
        Value::Restraint(r) => BigUint::from(*r),
        Value::Flag(f) => BigUint::from(*f as u8),
        Value::WitnessOffset(o) => sigma.nu() + *o,
    }
}

/// Inverse of [`encode`].
pub fn decode(sigma: &BinStr, field: Field, n: &BigUint) -> Result<Value, ParamError> {
    Ok(match field {
        Field::Counter => Value::Counter(Counter::decode(n)?),
        Field::Restraint => Value::Restraint(small(field, n)?),
        Field::Flag => match small(field, n)? {
            0 => Value::Flag(false),
            1 => Value::Flag(true),
            _ => {
                return Err(ParamError::Range {
                    field,
                    value: n.clone(),
                })
            }
        },
        Field::Witness => {
            let floor = sigma.nu();
            if *n < floor {
                return Err(ParamError::WitnessBelowFloor {
                    sigma: sigma.clone(),
                    value: n.clone(),
                });
            }
            Value::WitnessOffset(small(field, &(n - floor))?)
        }
    })
}

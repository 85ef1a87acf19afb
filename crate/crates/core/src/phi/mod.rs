//! The configured enumeration `(φ_e)_e` with step semantics and the length
//! function `ℓ`.
//!
//! A value computed within `t` steps is only reported at stage `t` if it is
//! itself at most `t`, so every index `φ_e(n)` handed out at stage `t` is a
//! stage that has already happened.

pub mod config;
pub mod machine;

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use thiserror::Error;

pub use config::{PhiConfig, SlotKind, SlotSpec};
use machine::{Program, Run};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhiError {
    #[error("index {0} is configured twice")]
    DuplicateIndex(u64),
    #[error("bad registry config: {0}")]
    Config(String),
    #[error("partial slot {index} lists input {n} twice")]
    DuplicateInput { index: u64, n: u64 },
    #[error("toy program at index {index}: {source}")]
    Program {
        index: u64,
        source: machine::ProgramError,
    },
}

enum Slot {
    Identity,
    Double,
    Shift(u64),
    Square,
    Constant(u64),
    Partial(BTreeMap<u64, u64>),
    Diverge,
    Toy(Program),
}

impl Slot {
    /// Raw `(halting time, value)` for formula slots: the time is the input.
    fn formula(&self, n: u64) -> Option<(u64, u64)> {
        let v = match self {
            Slot::Identity => n,
            Slot::Double => n.checked_mul(2)?,
            Slot::Shift(c) => n.checked_add(*c)?,
            Slot::Square => n.checked_mul(n)?,
            Slot::Constant(c) => *c,
            Slot::Partial(graph) => *graph.get(&n)?,
            Slot::Diverge | Slot::Toy(_) => return None,
        };
        Some((n, v))
    }
}

/// Lengths `ℓ(e)[0], ℓ(e)[1], …` computed so far.
#[derive(Default)]
struct EllCache {
    values: Vec<i64>,
}

pub struct PhiRegistry {
    config: PhiConfig,
    slots: HashMap<u64, Slot>,
    runs: Mutex<HashMap<(u64, u64), Run>>,
    ells: Mutex<HashMap<u64, EllCache>>,
}

impl std::fmt::Debug for PhiRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhiRegistry")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl PhiRegistry {
    pub fn new(config: &PhiConfig) -> Result<Self, PhiError> {
        let config = config.canonical();
        let mut slots = HashMap::new();
        for spec in &config.slots {
            let slot = match &spec.kind {
                SlotKind::Identity => Slot::Identity,
                SlotKind::Double => Slot::Double,
                SlotKind::Shift { c } => Slot::Shift(*c),
                SlotKind::Square => Slot::Square,
                SlotKind::Constant { c } => Slot::Constant(*c),
                SlotKind::Partial { graph } => {
                    let mut map = BTreeMap::new();
                    for &(n, v) in graph {
                        if map.insert(n, v).is_some() {
                            return Err(PhiError::DuplicateInput {
                                index: spec.index,
                                n,
                            });
                        }
                    }
                    Slot::Partial(map)
                }
                SlotKind::Diverge => Slot::Diverge,
                SlotKind::Toy { code, .. } => Slot::Toy(Program::new(code.clone()).map_err(
                    |source| PhiError::Program {
                        index: spec.index,
                        source,
                    },
                )?),
            };
            if slots.insert(spec.index, slot).is_some() {
                return Err(PhiError::DuplicateIndex(spec.index));
            }
        }
        Ok(PhiRegistry {
            config,
            slots,
            runs: Mutex::new(HashMap::new()),
            ells: Mutex::new(HashMap::new()),
        })
    }

    /// Registry with every index divergent.
    pub fn empty() -> Self {
        PhiRegistry::new(&PhiConfig::empty()).expect("empty config is valid")
    }

    pub fn default_suite(toys: usize) -> Self {
        PhiRegistry::new(&PhiConfig::default_suite(toys)).expect("default suite is valid")
    }

    pub fn config(&self) -> &PhiConfig {
        &self.config
    }

    /// Whether `φ_e` is known to be total and increasing; `None` when the
    /// slot is a toy program without a declaration. Unconfigured indices are
    /// divergent, hence `Some(false)`.
    pub fn total_increasing(&self, e: u64) -> Option<bool> {
        match self.config.slots.iter().find(|s| s.index == e) {
            Some(spec) => spec.kind.total_increasing(),
            None => Some(false),
        }
    }

    /// `φ_e(n)[t]`: the value if the computation halts within `t` steps and
    /// the value is at most `t`.
    pub fn step(&self, e: u64, n: u64, t: u64) -> Option<u64> {
        let (time, value) = self.raw(e, n, t)?;
        let out = (time <= t && value <= t).then_some(value);
        debug_assert!(out.is_none_or(|v| v <= t));
        out
    }

    /// Raw halting time and value, looking at most `t` steps ahead.
    fn raw(&self, e: u64, n: u64, t: u64) -> Option<(u64, u64)> {
        match self.slots.get(&e)? {
            Slot::Toy(program) => {
                let mut runs = self.runs.lock().expect("run cache poisoned");
                let run = runs.entry((e, n)).or_insert_with(|| Run::start(program, n));
                if run.result().is_none() && run.steps() < t {
                    run.advance(program, t);
                }
                run.result()
            }
            slot => slot.formula(n),
        }
    }

    /// `ℓ(e)[t]`: the largest `l ≤ t` such that `φ_e(0), …, φ_e(l)` have all
    /// converged by stage `t` and are strictly increasing; `-1` when
    /// `φ_e(0)` has not converged.
    pub fn ell(&self, e: u64, t: u64) -> i64 {
        match self.slots.get(&e) {
            None | Some(Slot::Diverge) => return -1,
            _ => {}
        }
        let mut ells = self.ells.lock().expect("ell cache poisoned");
        let cache = ells.entry(e).or_default();
        while cache.values.len() as u64 <= t {
            let s = cache.values.len() as u64;
            let prev = cache.values.last().copied().unwrap_or(-1);
            let next = self.extend_chain(e, prev, s);
            cache.values.push(next);
        }
        cache.values[t as usize]
    }

    /// Extends a valid chain `φ_e(0) < … < φ_e(l)` as far as stage `s` allows.
    fn extend_chain(&self, e: u64, mut l: i64, s: u64) -> i64 {
        let mut last = if l < 0 {
            match self.step(e, 0, s) {
                Some(v) => {
                    l = 0;
                    v
                }
                None => return -1,
            }
        } else {
            self.step(e, l as u64, s)
                .expect("chain values stay converged")
        };
        while ((l + 1) as u64) <= s {
            match self.step(e, (l + 1) as u64, s) {
                Some(v) if v > last => {
                    l += 1;
                    last = v;
                }
                _ => break,
            }
        }
        l
    }

    /// `φ_e(ℓ(e)[t])`, the stage whose approximation the predicates compare
    /// against; `None` when `ℓ(e)[t] = -1`.
    pub fn anchor(&self, e: u64, t: u64) -> Option<(i64, u64)> {
        let l = self.ell(e, t);
        if l < 0 {
            return None;
        }
        let v = self
            .step(e, l as u64, t)
            .expect("ℓ covers converged values only");
        Some((l, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg(kind: SlotKind) -> PhiRegistry {
        PhiRegistry::new(&PhiConfig::single(0, kind)).unwrap()
    }

    #[test]
    fn step_convention() {
        let r = reg(SlotKind::Identity);
        assert_eq!(r.step(0, 3, 2), None);
        assert_eq!(r.step(0, 3, 3), Some(3));
        let d = reg(SlotKind::Diverge);
        assert_eq!(d.step(0, 0, 100), None);
        assert_eq!(r.step(42, 0, 100), None);
    }

    #[test]
    fn ell_examples() {
        let id = reg(SlotKind::Identity);
        assert_eq!(id.ell(0, 5), 5);
        for t in 0..50 {
            assert_eq!(id.ell(0, t), t as i64);
        }
        let c5 = reg(SlotKind::Constant { c: 5 });
        assert_eq!(c5.ell(0, 4), -1);
        for t in 5..40 {
            assert_eq!(c5.ell(0, t), 0);
        }
        let dv = reg(SlotKind::Diverge);
        assert_eq!(dv.ell(0, 30), -1);
        let dbl = PhiRegistry::new(&PhiConfig::single(1, SlotKind::Double)).unwrap();
        for t in 0..60 {
            assert_eq!(dbl.ell(1, t), (t / 2) as i64);
        }
    }

    #[test]
    fn empty_config_is_divergent() {
        let r = PhiRegistry::empty();
        for e in 0..5 {
            assert_eq!(r.ell(e, 20), -1);
        }
    }

    #[test]
    fn duplicate_index_rejected() {
        let mut c = PhiConfig::single(0, SlotKind::Identity);
        c.slots.push(SlotSpec {
            index: 0,
            kind: SlotKind::Square,
        });
        assert_eq!(
            PhiRegistry::new(&c).unwrap_err(),
            PhiError::DuplicateIndex(0)
        );
    }

    #[test]
    fn partial_slot() {
        let r = reg(SlotKind::Partial {
            graph: vec![(0, 2), (1, 3), (3, 7)],
        });
        assert_eq!(r.ell(0, 1), -1);
        assert_eq!(r.ell(0, 2), 0);
        assert_eq!(r.ell(0, 3), 1);
        assert_eq!(r.ell(0, 100), 1);
    }

    #[test]
    fn toy_doubling_ell() {
        let r = reg(SlotKind::Toy {
            code: Program::doubling().code,
            total_increasing: Some(true),
        });
        // φ(k) = 2k appears at stage 4k + 2
        for t in 0..80u64 {
            let expect = if t < 2 { -1 } else { ((t - 2) / 4) as i64 };
            assert_eq!(r.ell(0, t), expect, "t = {t}");
        }
    }

    #[test]
    fn undeclared_toy_is_unknown() {
        let r = PhiRegistry::default_suite(2);
        assert_eq!(r.total_increasing(0), Some(true));
        assert_eq!(r.total_increasing(4), Some(false));
        assert_eq!(r.total_increasing(7), Some(true));
        assert_eq!(r.total_increasing(8), None);
        assert_eq!(r.total_increasing(99), Some(false));
    }

    #[test]
    fn seeded_total_slots_grow() {
        let r = PhiRegistry::default_suite(3);
        for e in [0u64, 1, 2, 3, 7, 9] {
            let mut t = 64;
            while t <= 4096 {
                assert!(r.ell(e, t) >= r.ell(e, t / 2));
                t *= 2;
            }
            assert!(r.ell(e, 4096) > r.ell(e, 64), "slot {e} stalls");
        }
    }

    proptest! {
        #[test]
        fn ell_monotone_and_anchored(e in 0u64..10, t in 0u64..300) {
            let r = PhiRegistry::default_suite(3);
            let l = r.ell(e, t);
            prop_assert!(l <= t as i64);
            prop_assert!(l >= r.ell(e, t.saturating_sub(1)));
            if l >= 0 {
                let v = r.step(e, l as u64, t);
                prop_assert!(v.is_some_and(|v| v <= t));
            }
        }

        #[test]
        fn step_is_stable(e in 0u64..10, n in 0u64..40, t in 0u64..200) {
            let r = PhiRegistry::default_suite(3);
            if let Some(v) = r.step(e, n, t) {
                prop_assert!(v <= t);
                prop_assert_eq!(r.step(e, n, t + 17), Some(v));
            }
        }
    }
}

//! The stage/substage driver shared by both constructions.
//!
//! Each stage starts by applying `λ` and walks down the tree of strategies,
//! one substage per bit, until some strategy ends the stage. What a strategy
//! does when applied is the same skeleton for both constructions; the
//! differences live in [`rules`].

pub mod rules;

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::params::{self, Counter, Cursor, Field, ParamStore, Params, ResetPolicy, Value};
use crate::phi::PhiRegistry;
use crate::strings::BinStr;
use crate::trace::{Action, ParamRead, ParamWrite, StageRecord, Trace};
use rules::Rules;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    A,
    B,
}

impl EngineKind {
    pub fn rules(self) -> &'static Rules {
        match self {
            EngineKind::A => &rules::A,
            EngineKind::B => &rules::B,
        }
    }

    pub fn reset_policy(self) -> ResetPolicy {
        self.rules().reset
    }

    /// Name of the flag parameter in this construction.
    pub fn flag_name(self) -> &'static str {
        match self {
            EngineKind::A => "s",
            EngineKind::B => "p",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::A => "A",
            EngineKind::B => "B",
        })
    }
}

impl FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(EngineKind::A),
            "B" | "b" => Ok(EngineKind::B),
            _ => Err(format!("unknown engine {s:?} (expected A or B)")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("internal inconsistency at stage {t}: {msg}")]
    Inconsistent { t: u64, msg: String },
    #[error("a run needs at least one stage")]
    NoStages,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Attach the parameter values consulted in each stage to its record.
    pub record_reads: bool,
}

pub struct Engine<'r> {
    kind: EngineKind,
    rules: &'static Rules,
    reg: &'r PhiRegistry,
    store: ParamStore,
    x: Vec<Dyadic>,
    options: RunOptions,
}

/// A write decided during a stage, applied when the stage ends.
struct Pending {
    sigma: BinStr,
    old: Value,
    new: Value,
}

impl<'r> Engine<'r> {
    pub fn new(kind: EngineKind, reg: &'r PhiRegistry) -> Self {
        Engine::with_options(kind, reg, RunOptions::default())
    }

    pub fn with_options(kind: EngineKind, reg: &'r PhiRegistry, options: RunOptions) -> Self {
        let rules = kind.rules();
        Engine {
            kind,
            rules,
            reg,
            store: ParamStore::new(rules.reset),
            x: vec![Dyadic::zero()],
            options,
        }
    }

    pub fn kind(&self) -> EngineKind {
        self.kind
    }

    /// The stage about to run.
    pub fn stage(&self) -> u64 {
        self.x.len() as u64 - 1
    }

    pub fn x(&self) -> &[Dyadic] {
        &self.x
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Parameters of `sigma` at stage `t ≤ self.stage()`.
    pub fn params(&self, sigma: &BinStr, t: u64) -> Params<'_> {
        self.store.read(sigma, t)
    }

    pub fn witness(&self, sigma: &BinStr, t: u64) -> BigUint {
        self.store.witness(sigma, t)
    }

    fn cursor_at(&self, sigma: &BinStr) -> Cursor<'_> {
        let mut cur = self.store.cursor(self.stage());
        for &b in sigma.bits() {
            cur = cur.child(b);
        }
        cur
    }

    /// `x_t - x_{φ_e(ℓ(e)[t])}` with `ℓ(e)[t]`, or `None` when `ℓ(e)[t] = -1`.
    fn gap(&self, e: u64, t: u64) -> Option<(u64, Dyadic)> {
        let (l, v) = self.reg.anchor(e, t)?;
        let gap = &self.x[t as usize] - &self.x[v as usize];
        Some((l as u64, gap))
    }

    fn threat_witness(
        &self,
        cur: &Cursor<'_>,
        p: &Params<'_>,
        gap: &Option<(u64, Dyadic)>,
    ) -> Option<u64> {
        if p.flag {
            return None;
        }
        let (l, gap) = gap.as_ref()?;
        let w = cur.witness(p)?;
        (*l >= w && *gap < Dyadic::inv_pow2(w)).then_some(w)
    }

    fn expansionary_with(&self, p: &Params<'_>, gap: &Option<(u64, Dyadic)>) -> bool {
        if self.rules.expansionary_needs_flag && !p.flag {
            return false;
        }
        gap.as_ref()
            .is_some_and(|(_, g)| *g < Dyadic::inv_pow2(p.restraint))
    }

    /// Whether `sigma` is threatened at the current stage.
    pub fn is_threatened(&self, sigma: &BinStr) -> bool {
        let cur = self.cursor_at(sigma);
        let p = cur.params();
        let gap = self.gap(sigma.len() as u64, self.stage());
        self.threat_witness(&cur, &p, &gap).is_some()
    }

    /// Whether `sigma` is expansionary at the current stage.
    pub fn is_expansionary(&self, sigma: &BinStr) -> bool {
        let p = self.cursor_at(sigma).params();
        let gap = self.gap(sigma.len() as u64, self.stage());
        self.expansionary_with(&p, &gap)
    }

    fn log_reads(&self, reads: &mut Vec<ParamRead>, sigma: &BinStr, p: &Params<'_>) {
        let values = [
            (Field::Flag, BigUint::from(p.flag as u8)),
            (Field::Witness, sigma.nu() + p.witness_offset),
            (Field::Restraint, BigUint::from(p.restraint)),
            (Field::Counter, params::counter_code(p.counter)),
        ];
        for (field, value) in values {
            reads.push(ParamRead {
                sigma: sigma.clone(),
                field,
                next: false,
                value,
            });
        }
    }

    pub fn run_stage(&mut self) -> Result<StageRecord, EngineError> {
        let t = self.stage();
        let rules = self.rules;
        let inconsistent = |msg: String| EngineError::Inconsistent { t, msg };
        let mut sigma = BinStr::empty();
        let mut cur = self.store.cursor(t);
        // (|γ|, r(γ)[t+1]) for every γ with γ0 ⊑ σ, shortest first
        let mut zeros: Vec<(usize, u64)> = Vec::new();
        let mut pending: Vec<Pending> = Vec::new();
        let mut reads: Vec<ParamRead> = Vec::new();
        let record = self.options.record_reads;

        let (action, jump, region) = loop {
            let e = sigma.len() as u64;
            if e == t {
                break (Action::TopOut, Dyadic::zero(), rules::after_top_out(&sigma));
            }
            let p = cur.params();
            if record {
                self.log_reads(&mut reads, &sigma, &p);
            }
            let gap = self.gap(e, t);

            if let Some(w) = self.threat_witness(&cur, &p, &gap) {
                let gamma = zeros.iter().rev().find(|(_, r)| *r >= w).copied();
                if record {
                    for (len, r) in zeros.iter().rev() {
                        reads.push(ParamRead {
                            sigma: sigma.prefix(*len),
                            field: Field::Restraint,
                            next: true,
                            value: BigUint::from(*r),
                        });
                        if *r >= w {
                            break;
                        }
                    }
                }
                let (action, jump) = match gamma {
                    None => (
                        Action::ThreatJump {
                            sigma: sigma.clone(),
                            witness: w,
                        },
                        Dyadic::inv_pow2(w),
                    ),
                    Some((len, r_gamma)) => {
                        let gamma = sigma.prefix(len);
                        let count = BigUint::one() << (r_gamma - w);
                        let old = self.store.read(&gamma, t).counter.cloned();
                        pending.push(Pending {
                            sigma: gamma.clone(),
                            old: Value::Counter(old),
                            new: Value::Counter(Some(Counter {
                                label: sigma.clone(),
                                count: count.clone(),
                            })),
                        });
                        (
                            Action::ThreatSchedule {
                                sigma: sigma.clone(),
                                witness: w,
                                gamma,
                                count,
                            },
                            Dyadic::zero(),
                        )
                    }
                };
                pending.push(Pending {
                    sigma: sigma.clone(),
                    old: Value::Flag(false),
                    new: Value::Flag(true),
                });
                if rules.threat_bumps_witness {
                    pending.push(Pending {
                        sigma: sigma.clone(),
                        old: Value::WitnessOffset(p.witness_offset),
                        new: Value::WitnessOffset(p.witness_offset + 1),
                    });
                }
                break (action, jump, (rules.after_threat)(&sigma));
            }

            if rules.clear_flag_when_calm && p.flag {
                pending.push(Pending {
                    sigma: sigma.clone(),
                    old: Value::Flag(true),
                    new: Value::Flag(false),
                });
            }

            if !self.expansionary_with(&p, &gap) {
                sigma.push(true);
                cur = cur.child(true);
                continue;
            }

            let Some(counter) = p.counter else {
                let r = p.restraint + 1;
                pending.push(Pending {
                    sigma: sigma.clone(),
                    old: Value::Restraint(p.restraint),
                    new: Value::Restraint(r),
                });
                zeros.push((sigma.len(), r));
                sigma.push(false);
                cur = cur.child(false);
                continue;
            };

            let label = counter.label.clone();
            let k = &counter.count - 1u32;
            let r_sigma = p.restraint;
            let action = match zeros.last().copied() {
                None => Action::ExpansionJump {
                    sigma: sigma.clone(),
                    restraint: r_sigma,
                    label: label.clone(),
                    k: k.clone(),
                },
                Some((len, r_gamma)) => {
                    if record {
                        reads.push(ParamRead {
                            sigma: sigma.prefix(len),
                            field: Field::Restraint,
                            next: true,
                            value: BigUint::from(r_gamma),
                        });
                    }
                    if r_gamma < r_sigma {
                        return Err(inconsistent(format!(
                            "restraint of {} below that of {sigma}",
                            sigma.prefix(len)
                        )));
                    }
                    let gamma = sigma.prefix(len);
                    let count = BigUint::one() << (r_gamma - r_sigma);
                    let old = self.store.read(&gamma, t).counter.cloned();
                    pending.push(Pending {
                        sigma: gamma.clone(),
                        old: Value::Counter(old),
                        new: Value::Counter(Some(Counter {
                            label: label.clone(),
                            count: count.clone(),
                        })),
                    });
                    Action::ExpansionDelegate {
                        sigma: sigma.clone(),
                        restraint: r_sigma,
                        label: label.clone(),
                        k: k.clone(),
                        gamma,
                        count,
                    }
                }
            };
            let jump = match action {
                Action::ExpansionJump { .. } => Dyadic::inv_pow2(r_sigma),
                _ => Dyadic::zero(),
            };
            let remaining = (k > BigUint::ZERO).then(|| Counter {
                label: label.clone(),
                count: k,
            });
            pending.push(Pending {
                sigma: sigma.clone(),
                old: Value::Counter(Some(counter.clone())),
                new: Value::Counter(remaining),
            });
            break (action, jump, (rules.after_counter_step)(&sigma, &label));
        };

        let mut param_writes = Vec::with_capacity(pending.len());
        for w in pending {
            if w.old == w.new {
                continue;
            }
            param_writes.push(ParamWrite {
                field: field_of(&w.new),
                old: params::encode(&w.sigma, &w.old),
                new: params::encode(&w.sigma, &w.new),
                sigma: w.sigma.clone(),
            });
            self.store.write(&w.sigma, t, w.new);
        }
        self.store.init_region(&region, t);
        let next = &self.x[t as usize] + &jump;
        self.x.push(next);
        Ok(StageRecord {
            t,
            settled: sigma,
            action,
            jump,
            init_regions: vec![region],
            param_writes,
            reads,
        })
    }
}

fn field_of(v: &Value) -> Field {
    match v {
        Value::Counter(_) => Field::Counter,
        Value::Restraint(_) => Field::Restraint,
        Value::Flag(_) => Field::Flag,
        Value::WitnessOffset(_) => Field::Witness,
    }
}

/// Runs `stages` stages, calling `hook` after each one.
pub fn run_with(
    kind: EngineKind,
    reg: &PhiRegistry,
    stages: u64,
    options: RunOptions,
    hook: &mut dyn FnMut(&StageRecord),
) -> Result<Trace, EngineError> {
    if stages == 0 {
        return Err(EngineError::NoStages);
    }
    let mut engine = Engine::with_options(kind, reg, options);
    let mut records = Vec::with_capacity(stages as usize);
    for _ in 0..stages {
        let record = engine.run_stage()?;
        hook(&record);
        records.push(record);
    }
    Ok(Trace {
        engine: kind,
        phi_config: reg.config().clone(),
        x: engine.x,
        stages: records,
        timestamp: None,
    })
}

pub fn run(kind: EngineKind, reg: &PhiRegistry, stages: u64) -> Result<Trace, EngineError> {
    run_with(kind, reg, stages, RunOptions::default(), &mut |_| {})
}

pub fn run_a(reg: &PhiRegistry, stages: u64) -> Result<Trace, EngineError> {
    run(EngineKind::A, reg, stages)
}

pub fn run_b(reg: &PhiRegistry, stages: u64) -> Result<Trace, EngineError> {
    run(EngineKind::B, reg, stages)
}

//! A second, deliberately naive implementation of both constructions.
//!
//! Every strategy ever looked at gets an explicit entry; initializations
//! walk all entries and are also kept in a log that fresh entries replay
//! from the start. No cursors, no region trees, no shared code with the
//! engine beyond the registry and dyadic arithmetic.

#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use injurybench::params::{Counter, Field};
use injurybench::trace::{Action, Trace};
use injurybench::{Dyadic, EngineKind, PhiRegistry};

type Bits = Vec<bool>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct P {
    pub counter: Option<(Bits, BigUint)>,
    pub restraint: u64,
    pub flag: bool,
    pub witness: BigUint,
}

fn nu(s: &[bool]) -> BigUint {
    let mut v = BigUint::one();
    for &b in s {
        v = (v << 1u32) + BigUint::from(b as u8);
    }
    v - 1u32
}

/// `a` strictly left of `b`.
fn left_of(a: &[bool], b: &[bool]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return !*x;
        }
    }
    false
}

fn strictly_extends(a: &[bool], b: &[bool]) -> bool {
    b.len() > a.len() && b[..a.len()] == *a
}

#[derive(Clone, Debug)]
struct Init {
    stage: u64,
    anchor: Bits,
    with_extensions: bool,
}

impl Init {
    fn covers(&self, tau: &[bool]) -> bool {
        left_of(&self.anchor, tau) || (self.with_extensions && strictly_extends(&self.anchor, tau))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    TopOut,
    ThreatJump,
    ThreatSchedule,
    ExpansionJump,
    ExpansionDelegate,
}

pub struct StageResult {
    pub settled: Bits,
    pub outcome: Outcome,
    /// Parameters at `[t]` of every applied strategy.
    pub seen: Vec<(Bits, P)>,
}

pub struct Oracle<'r> {
    kind: EngineKind,
    reg: &'r PhiRegistry,
    pub x: Vec<Dyadic>,
    params: HashMap<Bits, P>,
    log: Vec<Init>,
}

impl<'r> Oracle<'r> {
    pub fn new(kind: EngineKind, reg: &'r PhiRegistry) -> Self {
        Oracle {
            kind,
            reg,
            x: vec![Dyadic::zero()],
            params: HashMap::new(),
            log: Vec::new(),
        }
    }

    fn reset(&self, p: &mut P, tau: &[bool], stage: u64) {
        p.counter = None;
        p.witness = nu(tau) + stage + 2u32;
        if self.kind == EngineKind::A {
            p.flag = false;
        }
    }

    /// Current parameters of `tau`, creating the entry from scratch if new.
    pub fn get(&mut self, tau: &[bool]) -> P {
        if let Some(p) = self.params.get(tau) {
            return p.clone();
        }
        let mut p = P {
            counter: None,
            restraint: 0,
            flag: false,
            witness: nu(tau),
        };
        for init in self.log.clone() {
            if init.covers(tau) {
                self.reset(&mut p, tau, init.stage);
            }
        }
        self.params.insert(tau.to_vec(), p.clone());
        p
    }

    /// Every entry created so far, with its current parameters.
    pub fn entries(&self) -> impl Iterator<Item = (&Bits, &P)> {
        self.params.iter()
    }

    fn gap(&self, e: u64, t: u64) -> Option<(i64, Dyadic)> {
        let l = self.reg.ell(e, t);
        if l < 0 {
            return None;
        }
        let v = self.reg.step(e, l as u64, t).expect("φ_e(ℓ) has converged");
        Some((l, &self.x[t as usize] - &self.x[v as usize]))
    }

    pub fn stage(&mut self) -> StageResult {
        let t = (self.x.len() - 1) as u64;
        let mut sigma: Bits = Vec::new();
        let mut next: HashMap<Bits, P> = HashMap::new();
        let mut seen = Vec::new();
        let mut jump = Dyadic::zero();

        let (outcome, init) = loop {
            let e = sigma.len() as u64;
            if e == t {
                break (
                    Outcome::TopOut,
                    Init {
                        stage: t,
                        anchor: sigma.clone(),
                        with_extensions: false,
                    },
                );
            }
            let p = self.get(&sigma);
            seen.push((sigma.clone(), p.clone()));
            let gap = self.gap(e, t);
            let threatened = !p.flag
                && gap.as_ref().is_some_and(|(l, g)| {
                    BigUint::from(*l as u64) >= p.witness
                        && *g < Dyadic::inv_pow2(p.witness.to_u64().unwrap())
                });
            if threatened {
                let w = p.witness.to_u64().unwrap();
                // longest γ with γ0 ⊑ σ and r(γ)[t+1] ≥ w
                let mut gamma = None;
                for len in (0..sigma.len()).rev() {
                    if sigma[len] {
                        continue;
                    }
                    let g = sigma[..len].to_vec();
                    let r_next = match next.get(&g) {
                        Some(q) => q.restraint,
                        None => self.get(&g).restraint,
                    };
                    if r_next >= w {
                        gamma = Some((g, r_next));
                        break;
                    }
                }
                let outcome = match gamma {
                    None => {
                        jump = Dyadic::inv_pow2(w);
                        Outcome::ThreatJump
                    }
                    Some((g, r_next)) => {
                        let mut q = next.get(&g).cloned().unwrap_or_else(|| self.get(&g));
                        q.counter = Some((sigma.clone(), BigUint::one() << (r_next - w)));
                        next.insert(g, q);
                        Outcome::ThreatSchedule
                    }
                };
                let mut q = next.get(&sigma).cloned().unwrap_or_else(|| p.clone());
                q.flag = true;
                if self.kind == EngineKind::B {
                    q.witness = &p.witness + 1u32;
                }
                next.insert(sigma.clone(), q);
                let with_extensions = self.kind == EngineKind::A;
                break (
                    outcome,
                    Init {
                        stage: t,
                        anchor: sigma.clone(),
                        with_extensions,
                    },
                );
            }
            if self.kind == EngineKind::B && p.flag {
                let mut q = next.get(&sigma).cloned().unwrap_or_else(|| p.clone());
                q.flag = false;
                next.insert(sigma.clone(), q);
            }
            let flag_ok = self.kind == EngineKind::B || p.flag;
            let expansionary = flag_ok
                && gap
                    .as_ref()
                    .is_some_and(|(_, g)| *g < Dyadic::inv_pow2(p.restraint));
            if !expansionary {
                sigma.push(true);
                continue;
            }
            let Some((alpha, count)) = p.counter.clone() else {
                let mut q = next.get(&sigma).cloned().unwrap_or_else(|| p.clone());
                q.restraint = p.restraint + 1;
                next.insert(sigma.clone(), q);
                sigma.push(false);
                continue;
            };
            let k = &count - 1u32;
            // longest γ with γ0 ⊑ σ
            let gamma = (0..sigma.len()).rev().find(|&len| !sigma[len]);
            let outcome = match gamma {
                None => {
                    jump = Dyadic::inv_pow2(p.restraint);
                    Outcome::ExpansionJump
                }
                Some(len) => {
                    let g = sigma[..len].to_vec();
                    let mut q = next.get(&g).cloned().unwrap_or_else(|| self.get(&g));
                    assert!(
                        q.restraint >= p.restraint,
                        "restraint order broken at stage {t}"
                    );
                    q.counter =
                        Some((alpha.clone(), BigUint::one() << (q.restraint - p.restraint)));
                    next.insert(g, q);
                    Outcome::ExpansionDelegate
                }
            };
            let mut q = next.get(&sigma).cloned().unwrap_or_else(|| p.clone());
            q.counter = (!k.is_zero()).then(|| (alpha.clone(), k));
            next.insert(sigma.clone(), q);
            let init = match self.kind {
                EngineKind::A => Init {
                    stage: t,
                    anchor: alpha,
                    with_extensions: true,
                },
                EngineKind::B => {
                    let mut anchor = sigma.clone();
                    anchor.push(false);
                    Init {
                        stage: t,
                        anchor,
                        with_extensions: false,
                    }
                }
            };
            break (outcome, init);
        };

        for (s, p) in next {
            self.params.insert(s, p);
        }
        let keys: Vec<Bits> = self.params.keys().cloned().collect();
        for tau in keys {
            if init.covers(&tau) {
                let mut p = self.params[&tau].clone();
                self.reset(&mut p, &tau, t);
                self.params.insert(tau, p);
            }
        }
        self.log.push(init);
        let x_next = &self.x[t as usize] + &jump;
        self.x.push(x_next);
        StageResult {
            settled: sigma,
            outcome,
            seen,
        }
    }
}

pub fn outcome_of(a: &Action) -> Outcome {
    match a {
        Action::TopOut => Outcome::TopOut,
        Action::ThreatJump { .. } => Outcome::ThreatJump,
        Action::ThreatSchedule { .. } => Outcome::ThreatSchedule,
        Action::ExpansionJump { .. } => Outcome::ExpansionJump,
        Action::ExpansionDelegate { .. } => Outcome::ExpansionDelegate,
    }
}

pub fn encode(p: &P, field: Field) -> BigUint {
    match field {
        Field::Flag => BigUint::from(p.flag as u8),
        Field::Witness => p.witness.clone(),
        Field::Restraint => BigUint::from(p.restraint),
        Field::Counter => match &p.counter {
            None => BigUint::zero(),
            Some((label, count)) => Counter {
                label: injurybench::BinStr::from_bits(label.clone()),
                count: count.clone(),
            }
            .code(),
        },
    }
}

/// Runs the oracle alongside a trace recorded with parameter reads and
/// returns the first disagreement.
pub fn compare(trace: &Trace, reg: &PhiRegistry) -> Result<usize, String> {
    let mut oracle = Oracle::new(trace.engine, reg);
    let mut reads = 0usize;
    for rec in &trace.stages {
        let t = rec.t;
        let r = oracle.stage();
        if r.settled != rec.settled.bits() {
            return Err(format!(
                "stage {t}: settled {:?} vs {}",
                r.settled, rec.settled
            ));
        }
        if r.outcome != outcome_of(&rec.action) {
            return Err(format!("stage {t}: {:?} vs {:?}", r.outcome, rec.action));
        }
        if oracle.x[t as usize + 1] != trace.x[t as usize + 1] {
            return Err(format!("x_{} differs", t + 1));
        }
        let at_t: HashMap<&Bits, &P> = r.seen.iter().map(|(s, p)| (s, p)).collect();
        for read in &rec.reads {
            let key = read.sigma.bits().to_vec();
            let p = if read.next {
                oracle.get(&key)
            } else {
                match at_t.get(&key) {
                    Some(p) => (*p).clone(),
                    None => {
                        return Err(format!(
                            "stage {t}: engine read {} which was not applied",
                            read.sigma
                        ))
                    }
                }
            };
            let expected = encode(&p, read.field);
            if expected != read.value {
                return Err(format!(
                    "stage {t}: {}({})[{}] read as {} but oracle has {expected}",
                    read.field,
                    read.sigma,
                    if read.next { "t+1" } else { "t" },
                    read.value
                ));
            }
            reads += 1;
        }
    }
    Ok(reads)
}

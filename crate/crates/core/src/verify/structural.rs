use std::collections::HashMap;

use num_bigint::BigUint;

use crate::dyadic::Dyadic;
use crate::engine::EngineKind;
use crate::params::Field;
use crate::strings::BinStr;
use crate::trace::Action;

use super::index::action_name;
use super::{Check, Context, Report, Witness};

/// `r ≤ t`, `r` and `w` non-decreasing in `t`, and in the first
/// construction `w` non-decreasing along prefixes.
pub fn check_monotonicity(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::Monotonicity);
    report.assume(
        "checked at every event stage of every strategy carrying a write or an initialization root; \
         other strategies hold lazily derived defaults",
    );
    let store = ctx.replay.store();
    let horizon = ctx.horizon();
    let prefix_monotone = ctx.trace.engine == EngineKind::A;
    let w = |sigma: &BinStr, t: u64| store.witness(sigma, t);

    for sigma in store.strategies() {
        let events = store.event_stages(&sigma);
        for &e in events.iter().filter(|e| **e < horizon) {
            let before = store.read(&sigma, e);
            let after = store.read(&sigma, e + 1);
            if after.restraint < before.restraint {
                report.push(
                    Witness::fail(format!(
                        "r drops from {} to {}",
                        before.restraint, after.restraint
                    ))
                    .at(e + 1)
                    .sigma(&sigma),
                );
            }
            if after.restraint > e + 1 {
                report.push(
                    Witness::fail(format!("r = {} exceeds the stage", after.restraint))
                        .at(e + 1)
                        .sigma(&sigma),
                );
            }
            if after.witness_offset < before.witness_offset {
                report.push(
                    Witness::fail(format!(
                        "w drops from {} to {}",
                        w(&sigma, e),
                        w(&sigma, e + 1)
                    ))
                    .at(e + 1)
                    .sigma(&sigma),
                );
            }
        }
        if prefix_monotone && !sigma.is_empty() {
            let parent = sigma.prefix(sigma.len() - 1);
            let mut stages = events;
            stages.extend(store.event_stages(&parent));
            stages.sort_unstable();
            stages.dedup();
            let points = std::iter::once(0).chain(stages.iter().map(|e| e + 1));
            for t in points.filter(|t| *t <= horizon) {
                let (wp, ws) = (w(&parent, t), w(&sigma, t));
                if wp > ws {
                    report.push(
                        Witness::fail(format!("w({parent}) = {wp} exceeds w({sigma}) = {ws}"))
                            .at(t)
                            .sigma(&sigma),
                    );
                }
            }
        }
    }
    report
}

/// `x_0 = 0`, `x` non-decreasing, each jump zero or a power of two matching
/// the recorded jump, and `x_T < 4`.
pub fn check_convergence_bound(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::ConvergenceBound);
    let x = &ctx.trace.x;
    if !x[0].is_zero() {
        report.push(Witness::fail(format!("x_0 = {} instead of 0", x[0])).at(0));
    }
    for rec in &ctx.trace.stages {
        let t = rec.t as usize;
        let d = &x[t + 1] - &x[t];
        if d.is_negative() {
            report.push(Witness::fail(format!("x decreases by {}", -d)).at(rec.t));
            continue;
        }
        if !d.is_zero() && d.log2_exact().is_none() {
            report.push(Witness::fail(format!("jump {d} is not a power of two")).at(rec.t));
        }
        if d != rec.jump {
            report.push(
                Witness::fail(format!("recorded jump {} but x moves by {d}", rec.jump)).at(rec.t),
            );
        }
    }
    let limit = Dyadic::from_integer(4);
    let last = ctx.final_x();
    if *last >= limit {
        report.push(Witness::fail(format!("x_T = {last} is not below 4")).at(ctx.horizon()));
    } else {
        report.push(Witness::pass(format!("x_T = {last}")).at(ctx.horizon()));
    }
    report
}

/// Re-evaluates both predicates along every settled path from the replayed
/// parameters and checks that each substage took the branch the rules
/// prescribe. Also: threats settle on the threatened strategy, counters
/// above applied strategies are empty, `u` is total on the jump stages,
/// immediate jumps form singleton fibers, and each witness value is
/// threatened at most once.
pub fn check_settlement_facts(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::SettlementFacts);
    let store = ctx.replay.store();
    for rec in &ctx.trace.stages {
        let t = rec.t;
        let path = &rec.settled;
        if path.len() as u64 > t {
            report.push(
                Witness::fail("settled strategy longer than the stage")
                    .at(t)
                    .sigma(path),
            );
            continue;
        }
        if let Some(actor) = rec.action.sigma() {
            if actor != path {
                report.push(
                    Witness::fail(format!("action by {actor} but the stage settles on {path}"))
                        .at(t)
                        .sigma(path),
                );
            }
        }
        let mut cur = store.cursor(t);
        for i in 0..=path.len() {
            let sigma = || path.prefix(i);
            if i as u64 == t {
                if rec.action != Action::TopOut {
                    report.push(
                        Witness::fail(format!(
                            "strategy of length t ends with {}",
                            action_name(&rec.action)
                        ))
                        .at(t)
                        .sigma(&sigma()),
                    );
                }
                break;
            }
            let gap = ctx.gap(i as u64, t);
            let threatened = ctx.threatened(&cur, &gap);
            let expansionary = ctx.expansionary(&cur, &gap);
            let counter = cur.params().counter.is_some();
            if i < path.len() {
                let bit = path.bit(i);
                if threatened {
                    report.push(
                        Witness::fail("threatened strategy did not end the stage")
                            .at(t)
                            .sigma(&sigma()),
                    );
                } else if !bit && !expansionary {
                    report.push(
                        Witness::fail("descended left without being expansionary")
                            .at(t)
                            .sigma(&sigma()),
                    );
                } else if bit && expansionary {
                    report.push(
                        Witness::fail("expansionary strategy descended right")
                            .at(t)
                            .sigma(&sigma()),
                    );
                }
                if !bit && counter {
                    report.push(
                        Witness::fail(format!(
                            "counter of {} is non-zero while {path} is applied",
                            sigma()
                        ))
                        .at(t)
                        .sigma(&sigma()),
                    );
                }
                cur = cur.child(bit);
            } else if threatened {
                if !rec.action.is_threat() {
                    report.push(
                        Witness::fail(format!(
                            "threatened strategy ends with {}",
                            action_name(&rec.action)
                        ))
                        .at(t)
                        .sigma(path),
                    );
                }
            } else if expansionary && counter {
                if !rec.action.is_counter_step() {
                    report.push(
                        Witness::fail(format!(
                            "expansionary strategy with a counter ends with {}",
                            action_name(&rec.action)
                        ))
                        .at(t)
                        .sigma(path),
                    );
                }
            } else {
                report.push(
                    Witness::fail("stage ends on a strategy that can neither act nor descend")
                        .at(t)
                        .sigma(path),
                );
            }
        }
        let expected_jump = match &rec.action {
            Action::ThreatJump { witness, .. } => Dyadic::inv_pow2(*witness),
            Action::ExpansionJump { restraint, .. } => Dyadic::inv_pow2(*restraint),
            _ => Dyadic::zero(),
        };
        if rec.jump != expected_jump {
            report.push(
                Witness::fail(format!(
                    "{} records jump {} instead of {expected_jump}",
                    action_name(&rec.action),
                    rec.jump
                ))
                .at(t),
            );
        }
    }

    let Some(index) = ctx.index_or_fail(&mut report) else {
        return report;
    };
    for rec in &ctx.trace.stages {
        if let Action::ThreatJump { sigma, .. } = &rec.action {
            if index.fiber(rec.t) != [rec.t] {
                report.push(
                    Witness::fail(format!("immediate jump has fiber {:?}", index.fiber(rec.t)))
                        .at(rec.t)
                        .sigma(sigma),
                );
            }
        }
    }
    let mut seen: HashMap<(&BinStr, u64), u64> = HashMap::new();
    for rec in &ctx.trace.stages {
        if let (Some(sigma), Some(w)) = (rec.action.sigma(), rec.action.witness()) {
            if let Some(prev) = seen.insert((sigma, w), rec.t) {
                report.push(
                    Witness::fail(format!("witness {w} already threatened at stage {prev}"))
                        .at(rec.t)
                        .sigma(sigma),
                );
            }
        }
    }
    report
}

/// Second construction: the pause flag is clear at one of any two
/// consecutive applications, no two consecutive applications are both
/// threatened, and every handled threat raises the witness by exactly one.
pub fn check_pause_dynamics(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::PauseDynamics);
    let store = ctx.replay.store();
    // strategy → (stage, flag, threatened) at its previous application
    let mut last: HashMap<BinStr, (u64, bool, bool)> = HashMap::new();
    let mut threats = 0usize;
    for rec in &ctx.trace.stages {
        let t = rec.t;
        let mut cur = store.cursor(t);
        let mut sigma = BinStr::empty();
        for i in 0..=rec.settled.len() {
            let flag = cur.params().flag;
            let threatened = i == rec.settled.len() && rec.action.is_threat();
            if let Some((t1, flag1, threatened1)) =
                last.insert(sigma.clone(), (t, flag, threatened))
            {
                if flag1 && flag {
                    report.push(
                        Witness::fail(format!("pause flag set at both {t1} and {t}"))
                            .at(t)
                            .sigma(&sigma),
                    );
                }
                if threatened1 && threatened {
                    report.push(
                        Witness::fail(format!(
                            "threatened at consecutive applications {t1} and {t}"
                        ))
                        .at(t)
                        .sigma(&sigma),
                    );
                }
            }
            if i < rec.settled.len() {
                let b = rec.settled.bit(i);
                cur = cur.child(b);
                sigma.push(b);
            }
        }
        if rec.action.is_threat() {
            threats += 1;
            let sigma = &rec.settled;
            let before = store.witness(sigma, t);
            let after = store.witness(sigma, t + 1);
            if after != &before + BigUint::from(1u32) {
                report.push(
                    Witness::fail(format!("witness moves from {before} to {after}"))
                        .at(t)
                        .sigma(sigma),
                );
            }
            let flag_writes = rec.writes_to(sigma, Field::Flag).count();
            if flag_writes != 1 {
                report.push(
                    Witness::fail(format!("threat records {flag_writes} pause-flag writes"))
                        .at(t)
                        .sigma(sigma),
                );
            }
        }
    }
    report.push(Witness::pass(format!("{threats} handled threats")));
    report
}

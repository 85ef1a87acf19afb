//! Targeted corruptions of a valid trace, one per check. Each is aimed at
//! the fact its check guards, so a check that passes on the original trace
//! must fail on the mutant.

use num_bigint::BigUint;

use crate::dyadic::Dyadic;
use crate::params::Field;
use crate::trace::{Action, Trace};

use super::requirements::p_check_detail;
use super::{cutoff_stages, Check, Context, Report, VerifyOptions};

#[derive(Clone, Debug)]
pub struct Mutation {
    pub trace: Trace,
    pub description: String,
}

fn first_threat_jump(trace: &Trace) -> Option<(u64, u64)> {
    trace.stages.iter().find_map(|s| match s.action {
        Action::ThreatJump { witness, .. } => Some((s.t, witness)),
        _ => None,
    })
}

/// Builds the mutant for `check`; `e` selects the index for the requirement
/// checks. `None` when the trace has nothing the mutation can attach to.
pub fn mutate(check: Check, trace: &Trace, e: u64, options: &VerifyOptions) -> Option<Mutation> {
    let mut m = trace.clone();
    let description = match check {
        Check::Monotonicity => {
            let (t, k, lowered) = trace.stages.iter().find_map(|s| {
                s.param_writes
                    .iter()
                    .position(|w| w.field == Field::Restraint && w.old >= BigUint::from(1u32))
                    .map(|k| (s.t, k, true))
                    .or_else(|| {
                        s.param_writes
                            .iter()
                            .position(|w| w.field == Field::Restraint)
                            .map(|k| (s.t, k, false))
                    })
            })?;
            let w = &mut m.stages[t as usize].param_writes[k];
            if lowered {
                w.new = &w.old - 1u32;
                format!("restraint write at stage {t} lowered below its old value")
            } else {
                w.new = BigUint::from(t + 5);
                format!("restraint write at stage {t} raised past the stage")
            }
        }
        Check::JumpSums => {
            let (t, w) = first_threat_jump(trace)?;
            let t = t as usize;
            m.x[t + 1] = &m.x[t] + &Dyadic::pow2(1 - w as i64);
            format!("jump at stage {t} doubled")
        }
        Check::ConvergenceBound => {
            let last = m.x.len() - 1;
            m.x[last] = &m.x[last - 1] + &Dyadic::from_integer(8);
            "final value raised by 8".to_string()
        }
        Check::RequirementN => {
            let ctx = Context::new(trace, options.clone()).ok()?;
            let index = &ctx.index;
            let store = ctx.replay.store();
            let t1 = trace
                .stages
                .iter()
                .filter(|s| s.action.is_threat())
                .find_map(|s| {
                    let sigma = s.action.sigma()?;
                    if sigma.len() as u64 != e {
                        return None;
                    }
                    let t2 = index.next_application(sigma, s.t)?;
                    store.init_between(sigma, s.t, t2).is_none().then_some(s.t)
                })?;
            let frozen = m.x[t1 as usize].clone();
            for v in &mut m.x[t1 as usize + 1..] {
                *v = frozen.clone();
            }
            format!("x frozen from the threat at stage {t1}")
        }
        Check::RequirementP => {
            let ctx = Context::new(trace, options.clone()).ok()?;
            let mut scratch = Report::new(Check::RequirementP);
            let detail = p_check_detail(&ctx, e, &mut scratch).ok()?;
            let level = detail.levels.iter().find(|l| !l.checked.is_empty())?;
            let i = level.checked.start;
            let horizon = ctx.horizon();
            let lo = ctx.reg.step(e, i, horizon)? as usize;
            let hi = ctx.reg.step(e, i + 1, horizon)? as usize;
            m.x[hi] = &m.x[lo] + &Dyadic::one();
            format!(
                "x_φ({}) set one above x_φ({i}) inside the level-{} range",
                i + 1,
                level.n
            )
        }
        Check::Cutoffs => {
            let ctx = Context::new(trace, options.clone()).ok()?;
            let index = &ctx.index;
            let mut sigmas: Vec<_> = index.threats.keys().collect();
            sigmas.sort();
            let stage = sigmas.into_iter().find_map(|s| cutoff_stages(&ctx, s))?;
            m.stages[stage as usize].init_regions.clear();
            format!("initializations dropped at cut-off stage {stage}")
        }
        Check::SettlementFacts => {
            let t = trace.stages.iter().find(|s| s.action.is_threat())?.t;
            m.stages[t as usize].settled.push(true);
            format!("settled strategy at threat stage {t} extended by 1")
        }
        Check::PauseDynamics => {
            let (t, k) = trace.stages.iter().find_map(|s| {
                s.param_writes
                    .iter()
                    .position(|w| w.field == Field::Witness)
                    .map(|k| (s.t, k))
            })?;
            let w = &mut m.stages[t as usize].param_writes[k];
            w.new += 1u32;
            format!("witness write at stage {t} raised by one")
        }
    };
    Some(Mutation {
        trace: m,
        description,
    })
}

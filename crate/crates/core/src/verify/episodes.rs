use crate::dyadic::Dyadic;
use crate::params::{InitRegion, Relation};
use crate::strings::{lex_less, BinStr};
use crate::trace::Action;

use super::{Check, Context, Index, Report, Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EpisodeKind {
    /// Applied and threatened; the bound is `2^-w`.
    Threat,
    /// Applied and expansionary with a pending counter; the bound is `2^-r`.
    CounterStep,
}

/// The jumps traced back to one action, up to the next application of the
/// acting strategy.
#[derive(Clone, Debug)]
pub struct Episode {
    pub kind: EpisodeKind,
    pub sigma: BinStr,
    pub t1: u64,
    /// The threat stage the jumps are traced back to.
    pub origin: u64,
    /// `k` in the bound `2^-k`.
    pub exponent: u64,
    pub t2: Option<u64>,
    /// Some initialization of `sigma` happened in `[t1, t2)`.
    pub interrupted: bool,
    pub sum: Dyadic,
}

impl Episode {
    pub fn bound(&self) -> Dyadic {
        Dyadic::inv_pow2(self.exponent)
    }

    /// Both hypotheses of the exact identity hold inside the horizon.
    pub fn exact(&self) -> bool {
        self.t2.is_some() && !self.interrupted
    }
}

fn sum_fiber(ctx: &Context<'_>, index: &Index, origin: u64, lo: u64, hi: u64) -> Dyadic {
    let fiber = index.fiber(origin);
    let start = fiber.partition_point(|t| *t < lo);
    let mut sum = Dyadic::zero();
    for &t in fiber[start..].iter().take_while(|t| **t < hi) {
        sum += &(ctx.x(t + 1) - ctx.x(t));
    }
    sum
}

/// Every threat and counter-step episode of the trace.
pub fn episodes(ctx: &Context<'_>, index: &Index) -> Result<Vec<Episode>, Witness> {
    let horizon = ctx.horizon();
    let store = ctx.replay.store();
    let mut out = Vec::new();
    for rec in &ctx.trace.stages {
        let t1 = rec.t;
        let (kind, sigma, exponent, origin) = match &rec.action {
            Action::ThreatJump { sigma, witness }
            | Action::ThreatSchedule { sigma, witness, .. } => {
                (EpisodeKind::Threat, sigma, *witness, t1)
            }
            Action::ExpansionJump {
                sigma,
                restraint,
                label,
                ..
            }
            | Action::ExpansionDelegate {
                sigma,
                restraint,
                label,
                ..
            } => {
                let origin = index.last_threat_before(label, t1).ok_or_else(|| {
                    Witness::fail(format!("counter label {label} has no earlier threat"))
                        .at(t1)
                        .sigma(sigma)
                })?;
                (EpisodeKind::CounterStep, sigma, *restraint, origin)
            }
            Action::TopOut => continue,
        };
        let t2 = index.next_application(sigma, t1);
        let hi = t2.unwrap_or(horizon);
        out.push(Episode {
            kind,
            sigma: sigma.clone(),
            t1,
            origin,
            exponent,
            t2,
            interrupted: store.init_between(sigma, t1, hi).is_some(),
            sum: sum_fiber(ctx, index, origin, t1, hi),
        });
    }
    Ok(out)
}

pub fn check_jump_sums(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::JumpSums);
    report
        .assume("x diffs are summed over jump stages whose origin under u is the episode's threat");
    let Some(index) = ctx.index_or_fail(&mut report) else {
        return report;
    };
    let eps = match episodes(ctx, index) {
        Ok(e) => e,
        Err(w) => {
            report.push(w);
            return report;
        }
    };
    let (mut exact, mut bounded, mut open) = (0usize, 0usize, 0usize);
    for ep in &eps {
        let bound = ep.bound();
        let what = match ep.kind {
            EpisodeKind::Threat => "threat",
            EpisodeKind::CounterStep => "counter step",
        };
        if ep.sum > bound {
            report.push(
                Witness::fail(format!(
                    "{what}: jump sum {} exceeds 2^-{}",
                    ep.sum, ep.exponent
                ))
                .at(ep.t1)
                .sigma(&ep.sigma),
            );
        } else if ep.exact() {
            if ep.sum != bound {
                report.push(
                    Witness::fail(format!(
                        "{what}: jump sum {} differs from 2^-{} up to the next application at {}",
                        ep.sum,
                        ep.exponent,
                        ep.t2.expect("exact episodes have t2")
                    ))
                    .at(ep.t1)
                    .sigma(&ep.sigma),
                );
            } else {
                exact += 1;
            }
        } else if ep.t2.is_none() && ep.sum < bound {
            open += 1;
            report.push(
                Witness::incomplete(format!(
                    "{what}: no later application within the horizon; {} of 2^-{} executed",
                    ep.sum, ep.exponent
                ))
                .at(ep.t1)
                .sigma(&ep.sigma),
            );
        } else {
            bounded += 1;
        }
    }
    report.push(Witness::pass(format!(
        "{exact} exact episodes, {bounded} bounded by initialization or horizon, {open} open"
    )));
    report
}

/// Where the cut-off search for one strategy ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CutoffStatus {
    /// No applied-and-threatened stage after the last initialization.
    NoThreat,
    /// Some split jumps for the threat at `threat` are still pending at the
    /// horizon.
    Pending {
        threat: u64,
    },
    Found {
        threat: u64,
        stage: u64,
    },
}

/// The cut-off stage for `sigma`: the threat after its last initialization,
/// provided every jump traced back to that threat ran within the horizon.
pub fn cutoff_status(ctx: &Context<'_>, index: &Index, sigma: &BinStr) -> CutoffStatus {
    let horizon = ctx.horizon();
    let after = ctx.last_init(sigma);
    let threats = index.threats_of(sigma);
    let Some(&threat) = threats.iter().find(|t| after.is_none_or(|l| **t > l)) else {
        return CutoffStatus::NoThreat;
    };
    let pending = (0..sigma.len()).any(|i| {
        let gamma = sigma.prefix(i);
        ctx.replay
            .params(&gamma, horizon)
            .counter
            .is_some_and(|c| &c.label == sigma)
    });
    if pending {
        return CutoffStatus::Pending { threat };
    }
    match index.fiber(threat).last() {
        Some(&stage) => CutoffStatus::Found { threat, stage },
        None => CutoffStatus::Pending { threat },
    }
}

/// `t_σ` for `sigma`, when it is identifiable in the trace.
pub fn cutoff_stages(ctx: &Context<'_>, sigma: &BinStr) -> Option<u64> {
    let index = ctx.index_or_none()?;
    match cutoff_status(ctx, index, sigma) {
        CutoffStatus::Found { stage, .. } => Some(stage),
        _ => None,
    }
}

pub fn check_cutoffs(ctx: &Context<'_>) -> Report {
    let mut report = Report::new(Check::Cutoffs);
    report.assume("the last initialization in the trace stands in for the last one overall");
    report.assume(
        "cut-offs are identified for every threatened strategy, not only those on the true path",
    );
    let Some(index) = ctx.index_or_fail(&mut report) else {
        return report;
    };
    let horizon = ctx.horizon();
    let store = ctx.replay.store();
    let holders = store.strategies();
    let mut sigmas: Vec<&BinStr> = index.threats.keys().collect();
    sigmas.sort();
    let mut found = 0usize;
    for sigma in sigmas {
        let (threat, stage) = match cutoff_status(ctx, index, sigma) {
            CutoffStatus::NoThreat => continue,
            CutoffStatus::Pending { threat } => {
                report.push(
                    Witness::incomplete("split jumps still pending at the horizon")
                        .at(threat)
                        .sigma(sigma),
                );
                continue;
            }
            CutoffStatus::Found { threat, stage } => (threat, stage),
        };
        found += 1;
        let rec = &ctx.trace.stages[stage as usize];

        // item (1): {τ : σ ≺ τ or σ <_L τ} is initialized at t_σ
        let wanted = InitRegion::new(sigma.clone(), Relation::LexGreaterOrExtends);
        let uncovered: Vec<BinStr> = wanted
            .subtree_roots()
            .into_iter()
            .filter(|root| !rec.init_regions.iter().any(|r| r.covers(root)))
            .collect();
        if !uncovered.is_empty() {
            let list: Vec<String> = uncovered.iter().map(ToString::to_string).collect();
            report.push(
                Witness::fail(format!(
                    "cut-off stage {stage} leaves subtrees {} uninitialized",
                    list.join(", ")
                ))
                .at(stage)
                .sigma(sigma),
            );
        }

        // item (2): positive counters at t_σ+1 sit left of σ
        for tau in &holders {
            let p = ctx.replay.params(tau, stage + 1);
            if p.counter.is_some() && !lex_less(&tau.child(false), sigma) {
                report.push(
                    Witness::fail(format!(
                        "counter of {tau} still positive after cut-off stage {stage}"
                    ))
                    .at(stage)
                    .sigma(sigma),
                );
            }
        }

        // item (5), one-sided at the horizon
        let tail = ctx.final_x() - ctx.x(stage + 1);
        if tail > Dyadic::inv_pow2(stage + 1) {
            report.push(
                Witness::fail(format!(
                    "x_T - x_{} = {tail} exceeds 2^-{}",
                    stage + 1,
                    stage + 1
                ))
                .at(stage)
                .sigma(sigma),
            );
        } else {
            report.push(
                Witness::pass(format!(
                    "threat at {threat}, cut-off at {stage}, horizon {horizon}"
                ))
                .at(stage)
                .sigma(sigma),
            );
        }
    }
    if found == 0 {
        report.assume("no cut-off stage identified; the check is vacuous");
    }
    report
}

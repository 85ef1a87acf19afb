use std::ops::Range;

use num_traits::ToPrimitive;

use crate::dyadic::Dyadic;
use crate::engine::EngineKind;
use crate::strings::BinStr;
use crate::trace::Action;

use super::{Check, Context, Index, Refusal, Report, Witness};

fn declared(ctx: &Context<'_>, e: u64, check: Check) -> Result<(), Refusal> {
    match ctx.reg.total_increasing(e) {
        Some(true) => Ok(()),
        Some(false) => Err(Refusal::new(
            check,
            format!("slot {e} is not declared total and increasing"),
        )),
        None => Err(Refusal::new(
            check,
            format!("slot {e} is a toy program without a declared classification"),
        )),
    }
}

fn true_path_prefix(ctx: &Context<'_>, e: u64, check: Check) -> Result<BinStr, Refusal> {
    let est = ctx.true_path().map_err(|m| Refusal::new(check, m))?;
    est.stable_prefix(e as usize).ok_or_else(|| {
        Refusal::new(
            check,
            format!(
                "true-path estimate {} is stable only up to length {}, need {e}",
                est.path, est.stable_upto
            ),
        )
    })
}

/// For each threat of a length-`e` strategy whose episode closes within the
/// horizon: the recorded threat is a threat, and
/// `x_{t2} - x_{φ_e(ℓ(e)[t1])} ≥ 2^-w`.
fn threat_gaps(ctx: &Context<'_>, index: &Index, e: u64, report: &mut Report) {
    let mut sigmas: Vec<&BinStr> = index
        .threats
        .keys()
        .filter(|s| s.len() as u64 == e)
        .collect();
    sigmas.sort();
    let store = ctx.replay.store();
    for sigma in sigmas {
        for &t1 in index.threats_of(sigma) {
            let w = ctx.trace.stages[t1 as usize]
                .action
                .witness()
                .expect("threat stages carry a witness");
            let Some((l, v)) = ctx.reg.anchor(e, t1) else {
                report.push(
                    Witness::fail("recorded threat while ℓ(e) = -1")
                        .e(e)
                        .at(t1)
                        .sigma(sigma),
                );
                continue;
            };
            if (l as u64) < w {
                report.push(
                    Witness::fail(format!("recorded threat with ℓ(e) = {l} below witness {w}"))
                        .e(e)
                        .at(t1)
                        .sigma(sigma),
                );
                continue;
            }
            let Some(t2) = index.next_application(sigma, t1) else {
                continue;
            };
            if store.init_between(sigma, t1, t2).is_some() {
                continue;
            }
            let gained = ctx.x(t2) - ctx.x(v);
            if gained < Dyadic::inv_pow2(w) {
                report.push(
                    Witness::fail(format!(
                        "x_{t2} - x_{v} = {gained} is below 2^-{w} after the threat"
                    ))
                    .e(e)
                    .at(t1)
                    .sigma(sigma),
                );
            }
        }
    }
}

/// First construction: the least `m` with `x_T - x_{φ_e(m)} ≥ 2^-m`, which
/// certifies the requirement since `x ≥ x_T`. Second construction: the
/// window `[m, n_hi]` on which `x_T - x_{φ_e(n)} ≥ 2^-n` holds throughout,
/// starting from the witness of the estimated true-path strategy after its
/// last initialization.
pub fn check_requirement_n(ctx: &Context<'_>, e: u64) -> Result<Report, Refusal> {
    let check = Check::RequirementN;
    declared(ctx, e, check)?;
    let index = &ctx.index;
    let horizon = ctx.horizon();
    let x_t = ctx.final_x();
    let mut report = Report::new(check);
    threat_gaps(ctx, index, e, &mut report);
    let holds = |n: u64| -> Option<bool> {
        let v = ctx.reg.step(e, n, horizon)?;
        Some(x_t - ctx.x(v) >= Dyadic::inv_pow2(n))
    };
    match ctx.trace.engine {
        EngineKind::A => {
            let found = (0..=horizon)
                .map_while(|m| holds(m).map(|ok| (m, ok)))
                .find(|(_, ok)| *ok);
            match found {
                Some((m, _)) => {
                    report.push(Witness::pass(format!("x_T - x_φ({m}) ≥ 2^-{m}")).e(e).n(m))
                }
                None => report
                    .push(Witness::incomplete("not yet: no m certified within the horizon").e(e)),
            }
        }
        EngineKind::B => {
            let sigma = true_path_prefix(ctx, e, check)?;
            report.assume(
                "the window starts at the witness after the last initialization in the trace",
            );
            let t0 = ctx.last_init(&sigma).map_or(0, |l| l + 1);
            let m = ctx
                .replay
                .store()
                .witness(&sigma, t0)
                .to_u64()
                .ok_or_else(|| {
                    Refusal::new(
                        check,
                        format!("witness of {sigma} does not fit a stage index"),
                    )
                })?;
            let mut hi = None;
            let mut n = m;
            while n <= horizon && holds(n) == Some(true) {
                hi = Some(n);
                n += 1;
            }
            match hi {
                Some(hi) => report.push(
                    Witness::pass(format!("x_T - x_φ(n) ≥ 2^-n for every n in [{m}, {hi}]"))
                        .e(e)
                        .n(m)
                        .sigma(&sigma),
                ),
                None => report.push(
                    Witness::incomplete(format!(
                        "not yet: the inequality fails or is undefined at m = {m}"
                    ))
                    .e(e)
                    .n(m)
                    .sigma(&sigma),
                ),
            }
        }
    }
    Ok(report)
}

/// One realized level of the modulus.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PLevel {
    pub n: u64,
    pub t_n: u64,
    pub v_n: u64,
    /// Indices `i` with `x_{φ(i+1)} - x_{φ(i)}` checked against `2^-n`.
    pub checked: Range<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCheckDetail {
    pub sigma: BinStr,
    pub t0: u64,
    /// Applied-and-expansionary stages of `sigma` from `t0` on.
    pub expansionary: Vec<u64>,
    pub levels: Vec<PLevel>,
    /// The first `n` whose `t(n)` lies beyond the horizon.
    pub unrealized: u64,
}

/// Whether `sigma`, applied at the stage of `rec`, was expansionary there.
fn applied_expansionary(ctx: &Context<'_>, sigma: &BinStr, t: u64) -> bool {
    let rec = &ctx.trace.stages[t as usize];
    let depth = sigma.len();
    if rec.settled.len() > depth {
        return !rec.settled.bit(depth);
    }
    match &rec.action {
        a if a.is_counter_step() => true,
        Action::ThreatJump { .. } | Action::ThreatSchedule { .. } => {
            // threatened and expansionary can coincide in the second construction
            ctx.trace.engine == EngineKind::B && {
                let cur = ctx.cursor(sigma, t);
                ctx.expansionary(&cur, &ctx.gap(depth as u64, t))
            }
        }
        _ => false,
    }
}

/// `Σ_{τ ⊑ σ, |τ| ∈ S} 2^{-w(τ)[t]+1}`.
fn witness_sum(ctx: &Context<'_>, sigma: &BinStr, t: u64) -> Dyadic {
    let store = ctx.replay.store();
    let mut sum = Dyadic::zero();
    for i in 0..=sigma.len() {
        if ctx.reg.total_increasing(i as u64) == Some(true) {
            let w = store.witness(&sigma.prefix(i), t);
            let w = w.to_i64().unwrap_or(i64::MAX / 2);
            sum += &Dyadic::pow2(1 - w);
        }
    }
    sum
}

pub fn p_check_detail(
    ctx: &Context<'_>,
    e: u64,
    report: &mut Report,
) -> Result<PCheckDetail, Refusal> {
    let check = Check::RequirementP;
    declared(ctx, e, check)?;
    let index = &ctx.index;
    let sigma = true_path_prefix(ctx, e, check)?;
    let engine = ctx.trace.engine;
    let horizon = ctx.horizon();
    let store = ctx.replay.store();

    let mut t0 = ctx.last_init(&sigma).map_or(0, |l| l + 1);
    for i in 0..=sigma.len() {
        let tau = sigma.prefix(i);
        let counts = match engine {
            EngineKind::A => i == sigma.len(),
            EngineKind::B => match ctx.reg.total_increasing(i as u64) {
                Some(b) => !b,
                None => {
                    return Err(Refusal::new(
                        check,
                        format!("slot {i} is a toy program without a declared classification"),
                    ))
                }
            },
        };
        if counts {
            if let Some(last) = index.threats_of(&tau).last() {
                t0 = t0.max(last + 1);
            }
        }
    }
    report.assume(
        "t0 follows the last initialization and the last relevant threat seen in the trace",
    );
    report.assume(
        "among several bracketing stage pairs for an index, any one suffices; the earliest is used",
    );

    let expansionary: Vec<u64> = ctx
        .trace
        .stages
        .iter()
        .filter(|s| s.t >= t0 && sigma.is_prefix_of(&s.settled))
        .map(|s| s.t)
        .filter(|&t| applied_expansionary(ctx, &sigma, t))
        .collect();

    // consecutive expansionary stages: x_{t2} - x_{t1} stays within the bound
    for pair in expansionary.windows(2) {
        let (t1, t2) = (pair[0], pair[1]);
        let r = store.read(&sigma, t1).restraint;
        let mut bound = Dyadic::pow2(1 - r as i64);
        if engine == EngineKind::B {
            bound += &witness_sum(ctx, &sigma, t1);
        }
        let moved = ctx.x(t2) - ctx.x(t1);
        if moved > bound {
            report.push(
                Witness::fail(format!(
                    "x moves {moved} between expansionary stages {t1} and {t2}, bound {bound}"
                ))
                .e(e)
                .at(t1)
                .sigma(&sigma),
            );
        }
    }

    let i_hi = expansionary
        .last()
        .map_or(0, |&t| ctx.reg.ell(e, t).max(0) as u64);
    let phi = |i: u64| {
        ctx.reg
            .step(e, i, horizon)
            .expect("indices below ℓ at an applied stage have converged")
    };
    let diffs: Vec<Dyadic> = (0..i_hi)
        .map(|i| ctx.x(phi(i + 1)) - ctx.x(phi(i)))
        .collect();
    let mut suffix_max = diffs.clone();
    for i in (0..suffix_max.len().saturating_sub(1)).rev() {
        if suffix_max[i + 1] > suffix_max[i] {
            suffix_max[i] = suffix_max[i + 1].clone();
        }
    }

    let offset = match engine {
        EngineKind::A => 2,
        EngineKind::B => 3,
    };
    let mut levels = Vec::new();
    let mut cursor = 0usize;
    let mut n = 0u64;
    let unrealized = loop {
        let qualifies = |t: u64| {
            store.read(&sigma, t).restraint >= n + offset
                && (engine == EngineKind::A
                    || witness_sum(ctx, &sigma, t) <= Dyadic::inv_pow2(n + 1))
        };
        while cursor < expansionary.len() && !qualifies(expansionary[cursor]) {
            cursor += 1;
        }
        let Some(&t_n) = expansionary.get(cursor) else {
            break n;
        };
        let v_n = ctx.reg.ell(e, t_n) as u64;
        let checked = v_n..i_hi.max(v_n);
        let eps = Dyadic::inv_pow2(n);
        if !checked.is_empty() && suffix_max[v_n as usize] >= eps {
            let i = checked
                .clone()
                .find(|&i| diffs[i as usize] >= eps)
                .expect("suffix maximum has a witness");
            report.push(
                Witness::fail(format!(
                    "x_φ({}) - x_φ({i}) = {} is not below 2^-{n} although i ≥ v(n) = {v_n}",
                    i + 1,
                    diffs[i as usize]
                ))
                .e(e)
                .n(n)
                .at(t_n)
                .sigma(&sigma),
            );
        } else {
            report.push(
                Witness::pass(format!(
                    "t(n) = {t_n}, v(n) = {v_n}, {} differences below 2^-{n}",
                    checked.end - checked.start
                ))
                .e(e)
                .n(n)
                .sigma(&sigma),
            );
        }
        levels.push(PLevel {
            n,
            t_n,
            v_n,
            checked,
        });
        n += 1;
    };
    report.push(
        Witness::incomplete(format!("t(n) lies beyond the horizon {horizon}"))
            .e(e)
            .n(unrealized)
            .sigma(&sigma),
    );
    Ok(PCheckDetail {
        sigma,
        t0,
        expansionary,
        levels,
        unrealized,
    })
}

/// The modulus `v(n) = ℓ(e)[t(n)]` for the estimated true-path strategy of
/// length `e`, checked against every difference the horizon brackets; plus
/// the bound on `x` between consecutive expansionary stages.
pub fn check_requirement_p(ctx: &Context<'_>, e: u64) -> Result<Report, Refusal> {
    let mut report = Report::new(Check::RequirementP);
    p_check_detail(ctx, e, &mut report)?;
    Ok(report)
}

//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! All comparisons are exact dyadic or rational comparisons; no tolerance
//! anywhere. The only timing bound is the T=500 run budget of 10 s.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use injurybench::engine::{run_with, RunOptions};
use injurybench::params::Field;
use injurybench::phi::{SlotKind, SlotSpec};
use injurybench::speed::{
    regain_to_speed, regaining_ratios, speed_to_regain, speedup_indices, ApproxSequence, ModulusFn,
};
use injurybench::strings::{cantor_pair, cantor_unpair, nu, nu_inv, pair, unpair};
use injurybench::verify::{
    mutate, p_check_detail, run_check, verify, Check, Context, Report, Status, VerifyOptions,
};
use injurybench::{run, Dyadic, EngineKind, PhiConfig, PhiRegistry, Trace};

const T_MAX: u64 = 2000;
const RUN_BUDGET: Duration = Duration::from_secs(10);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&mut Traces) -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn id_dbl() -> PhiConfig {
    PhiConfig {
        slots: vec![
            SlotSpec {
                index: 0,
                kind: SlotKind::Identity,
            },
            SlotSpec {
                index: 1,
                kind: SlotKind::Double,
            },
        ],
    }
}

#[derive(Default)]
struct Traces {
    cache: HashMap<(EngineKind, bool, u64), Trace>,
}

impl Traces {
    /// `seeded` selects identity/double over the standard suite.
    fn get(&mut self, kind: EngineKind, seeded: bool, stages: u64) -> &Trace {
        self.cache.entry((kind, seeded, stages)).or_insert_with(|| {
            let config = if seeded {
                id_dbl()
            } else {
                PhiConfig::standard()
            };
            run(kind, &PhiRegistry::new(&config).unwrap(), stages).unwrap()
        })
    }
}

fn check(trace: &Trace, c: Check, indices: Option<Vec<u64>>) -> Report {
    let options = VerifyOptions {
        indices,
        ..VerifyOptions::default()
    };
    let ctx = Context::new(trace, options).unwrap();
    run_check(&ctx, c)
}

fn no_fail(report: &Report, what: &str) -> Result<(), String> {
    match report.failures().next() {
        None => Ok(()),
        Some(w) => Err(format!(
            "{what}: {} failed: {} (t={:?}, σ={:?})",
            report.check, w.detail, w.t, w.sigma
        )),
    }
}

fn both() -> [EngineKind; 2] {
    [EngineKind::A, EngineKind::B]
}

fn determinism(_: &mut Traces) -> Outcome {
    let reg = PhiRegistry::new(&PhiConfig::standard()).unwrap();
    let mut notes = Vec::new();
    for kind in both() {
        let start = Instant::now();
        let first = run(kind, &reg, 500).unwrap();
        let elapsed = start.elapsed();
        let second = run(kind, &reg, 500).unwrap();
        ensure(first.to_jsonl() == second.to_jsonl(), || {
            format!("{kind}: two T=500 runs differ")
        })?;
        ensure(first.digest() == second.digest(), || {
            format!("{kind}: digests differ")
        })?;
        ensure(elapsed < RUN_BUDGET, || {
            format!("{kind}: T=500 took {elapsed:?}")
        })?;
        notes.push(format!("{kind} T=500 in {:.2}s", elapsed.as_secs_f64()));
    }
    let mut reads = 0;
    for config in [PhiConfig::standard(), id_dbl()] {
        let reg = PhiRegistry::new(&config).unwrap();
        for kind in both() {
            let trace = run_with(
                kind,
                &reg,
                200,
                RunOptions { record_reads: true },
                &mut |_| {},
            )
            .unwrap();
            reads += common::compare(&trace, &reg).map_err(|e| format!("oracle, {kind}: {e}"))?;
        }
    }
    notes.push(format!(
        "oracle agrees on {reads} parameter reads over T=200"
    ));
    Ok(notes.join("; "))
}

fn global_bound(traces: &mut Traces) -> Outcome {
    let four = Dyadic::from_integer(4);
    for kind in both() {
        for stages in [100, 500, T_MAX] {
            let trace = traces.get(kind, false, stages);
            for (t, w) in trace.x.windows(2).enumerate() {
                let d = &w[1] - &w[0];
                ensure(!d.is_negative(), || {
                    format!("{kind} T={stages}: x decreases at {t}")
                })?;
                let power = d.is_zero()
                    || d.mantissa() == &1.into()
                    || d.exponent() == 0 && is_pow2(d.mantissa());
                ensure(power, || {
                    format!("{kind} T={stages}: jump {d} at {t} is not a power of two")
                })?;
            }
            ensure(trace.final_x() < &four, || {
                format!("{kind} T={stages}: x_T = {}", trace.final_x())
            })?;
            no_fail(
                &check(trace, Check::ConvergenceBound, None),
                &format!("{kind} T={stages}"),
            )?;
        }
    }
    Ok("x non-decreasing, jumps powers of two, x_T < 4 for A,B at T=100,500,2000".into())
}

fn is_pow2(m: &num_bigint::BigInt) -> bool {
    m.sign() == num_bigint::Sign::Plus && m.magnitude().count_ones() == 1
}

fn monotonicity(traces: &mut Traces) -> Outcome {
    for kind in both() {
        let trace = traces.get(kind, false, T_MAX);
        let r = check(trace, Check::Monotonicity, None);
        ensure(r.status == Status::Pass, || format!("{kind}: {r}"))?;
        // restraint never exceeds the stage, read straight off the writes
        for s in &trace.stages {
            for w in &s.param_writes {
                if w.field == Field::Restraint {
                    ensure(w.new <= BigUint::from(s.t + 1) && w.new >= w.old, || {
                        format!("{kind}: restraint write {} → {} at {}", w.old, w.new, s.t)
                    })?;
                }
            }
        }
    }
    Ok("no violations over T=2000 for A and B".into())
}

fn jump_sums(traces: &mut Traces) -> Outcome {
    let mut notes = Vec::new();
    for kind in both() {
        let trace = traces.get(kind, false, T_MAX);
        let r = check(trace, Check::JumpSums, None);
        no_fail(&r, &kind.to_string())?;
        let summary = r.witnesses.iter().find(|w| w.status == Status::Pass);
        let summary = summary.ok_or_else(|| format!("{kind}: no episode certified"))?;
        notes.push(format!("{kind}: {} ({})", summary.detail, r.status));
    }
    Ok(notes.join("; "))
}

fn cutoffs(traces: &mut Traces) -> Outcome {
    let trace = traces.get(EngineKind::A, false, T_MAX);
    let r = check(trace, Check::Cutoffs, None);
    no_fail(&r, "A")?;
    let passed = r
        .witnesses
        .iter()
        .filter(|w| w.status == Status::Pass)
        .count();
    ensure(passed > 0, || "no cut-off stage certified".into())?;
    Ok(format!("{passed} cut-off facts certified, {}", r.status))
}

fn requirements(traces: &mut Traces) -> Outcome {
    let indices = Some(vec![0, 1]);
    let a = traces.get(EngineKind::A, true, T_MAX).clone();
    let n = check(&a, Check::RequirementN, indices.clone());
    for e in [0, 1] {
        let certified = n
            .witnesses
            .iter()
            .any(|w| w.e == Some(e) && w.status == Status::Pass && w.n.is_some());
        ensure(certified, || format!("A: N_{e} not certified\n{n}"))?;
    }
    let ctx = Context::new(
        &a,
        VerifyOptions {
            indices: indices.clone(),
            ..Default::default()
        },
    )
    .unwrap();
    let p = run_check(&ctx, Check::RequirementP);
    no_fail(&p, "A")?;
    let mut levels = 0;
    for e in [0, 1] {
        let mut scratch = Report::new(Check::RequirementP);
        let Ok(detail) = p_check_detail(&ctx, e, &mut scratch) else {
            continue;
        };
        for level in &detail.levels {
            let passed = p
                .witnesses
                .iter()
                .any(|w| w.e == Some(e) && w.n == Some(level.n) && w.status == Status::Pass);
            ensure(passed, || {
                format!("A: P_{e} level {} realized but not passed", level.n)
            })?;
            levels += 1;
        }
        let open = p.witnesses.iter().any(|w| {
            w.e == Some(e) && w.n == Some(detail.unrealized) && w.status == Status::Incomplete
        });
        ensure(open, || {
            format!(
                "A: P_{e} unrealized level {} not reported incomplete",
                detail.unrealized
            )
        })?;
    }

    let b = traces.get(EngineKind::B, true, T_MAX).clone();
    let n = check(&b, Check::RequirementN, indices.clone());
    no_fail(&n, "B")?;
    let windowed = n
        .witnesses
        .iter()
        .find(|w| w.e == Some(0) && w.status == Status::Pass);
    ensure(windowed.is_some(), || {
        format!("B: windowed N_0 not certified\n{n}")
    })?;
    let p = check(&b, Check::RequirementP, indices);
    no_fail(&p, "B")?;
    Ok(format!(
        "A: N_0, N_1 certified, {levels} P levels pass, rest incomplete; B: {}; B P {}",
        windowed.unwrap().detail,
        p.status
    ))
}

fn pause_dynamics(traces: &mut Traces) -> Outcome {
    let trace = traces.get(EngineKind::B, false, T_MAX);
    let r = check(trace, Check::PauseDynamics, None);
    ensure(r.status == Status::Pass, || r.to_string())?;
    let mut handled = 0;
    for s in &trace.stages {
        if let Some(sigma) = s.action.sigma().filter(|_| s.action.is_threat()) {
            let bump = s.writes_to(sigma, Field::Witness).next();
            let ok = bump.is_some_and(|w| w.new == &w.old + 1u32);
            ensure(ok, || {
                format!(
                    "threat of {sigma} at {} does not raise its witness by 1",
                    s.t
                )
            })?;
            handled += 1;
        }
    }
    Ok(format!(
        "pass; {handled} threats each raise the witness by exactly 1"
    ))
}

fn quarter_sequence() -> ApproxSequence {
    ApproxSequence::from_fn(40, Some(Dyadic::one()), "1-4^-n", |n| {
        Dyadic::one() - Dyadic::inv_pow2(2 * n)
    })
    .unwrap()
}

fn synthetic() -> Vec<ApproxSequence> {
    let mut out = Vec::new();
    for k in 2..=11u64 {
        let tag = format!("1-2^-{k}n");
        out.push(
            ApproxSequence::from_fn(48, Some(Dyadic::one()), &tag, |n| {
                Dyadic::one() - Dyadic::inv_pow2(k * n)
            })
            .unwrap(),
        );
    }
    // regaining only at multiples of j
    for j in 2..=11u64 {
        let tag = format!("blocks of {j}");
        out.push(
            ApproxSequence::from_fn(64, Some(Dyadic::one()), &tag, |n| {
                Dyadic::one() - Dyadic::inv_pow2(j * (n / j) + 1)
            })
            .unwrap(),
        );
    }
    out
}

fn transforms(_: &mut Traces) -> Outcome {
    let seq = quarter_sequence();
    let y = regain_to_speed(&seq).map_err(|e| e.to_string())?;
    let r1 = y.ratio(1).ok_or("no ratio at n=1")?;
    let expected = BigRational::new(7.into(), 12.into());
    ensure(r1 == expected, || format!("ratio at 1 is {r1}"))?;

    let quarter = BigRational::new(1.into(), 4.into());
    let mut ratios = 0;
    for s in synthetic() {
        let found = regaining_ratios(&s).map_err(|e| e.to_string())?;
        ensure(!found.is_empty(), || {
            format!("{}: no regaining index", s.tag)
        })?;
        for r in found {
            // recompute by hand from the shifted values
            let n = r.n as usize;
            let y = |i: usize| (&s.values[i] - &Dyadic::inv_pow2(i as u64)).to_rational();
            let x = BigRational::one();
            let direct = (y(n + 1) - y(n)) / (x - y(n));
            ensure(direct == r.ratio && direct > quarter, || {
                format!("{}: ratio {direct} at {n}", s.tag)
            })?;
            ratios += 1;
        }
    }

    let f = ModulusFn::Affine { mul: 2, add: 0 };
    let len = 64;
    let got = speed_to_regain(&f, &Dyadic::inv_pow2(2), len).map_err(|e| e.to_string())?;
    let g: Vec<u64> = (0..len).map(|n| n / 2).collect();
    let h: Vec<u64> = g.iter().map(|v| v.saturating_sub(2)).collect();
    ensure(got.g == ModulusFn::Table { values: g }, || {
        "g differs from ⌊n/2⌋".into()
    })?;
    ensure(got.h == ModulusFn::Table { values: h }, || {
        "h differs from max(0, ⌊n/2⌋-2)".into()
    })?;
    ensure(got.k == 2 && got.m == 4, || {
        format!("k={}, m={}", got.k, got.m)
    })?;

    let mut rng = TestRunner::deterministic();
    let mut total = 0;
    for i in 0..50 {
        let (seq, rho) = random_instance(&mut rng, i);
        let found = speedup_indices(&seq, &rho).map_err(|e| format!("instance {i}: {e}"))?;
        let x = seq.known_limit.clone().unwrap().to_rational();
        let rho_q = rho.to_rational();
        let (mut first, mut second) = (Vec::new(), Vec::new());
        for (n, w) in seq.values.windows(2).enumerate() {
            let (a, b) = (w[0].to_rational(), w[1].to_rational());
            if (&b - &a) / (&x - &a) >= rho_q {
                first.push(n as u64);
            }
            if (&x - &b) / (&x - &a) <= BigRational::one() - &rho_q {
                second.push(n as u64);
            }
        }
        ensure(first == second, || {
            format!("instance {i}: forms differ by hand")
        })?;
        ensure(
            found.indices == first && found.complement_form == second,
            || format!("instance {i}: library disagrees"),
        )?;
        total += first.len();
    }
    Ok(format!(
        "7/12 at n=1; {ratios} regaining ratios > 1/4 over 20 sequences; (⌊n/2⌋, 2, ⌊n/2⌋-2, 4); 50 instances, {total} speed-up indices"
    ))
}

fn draw(rng: &mut TestRunner, range: std::ops::Range<u64>) -> u64 {
    range.new_tree(rng).unwrap().current()
}

fn random_instance(rng: &mut TestRunner, i: usize) -> (ApproxSequence, Dyadic) {
    let len = draw(rng, 8..48) as usize;
    let mut v = Dyadic::zero();
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(v.clone());
        let m = draw(rng, 1..16);
        let e = draw(rng, 0..12);
        v = &v + &Dyadic::new(m.into(), e);
    }
    let limit = &v + &Dyadic::new(draw(rng, 1..8).into(), draw(rng, 0..10));
    let e = draw(rng, 1..7);
    let m = draw(rng, 1..1 << e);
    let seq = ApproxSequence::new(values, Some(limit), format!("random {i}")).unwrap();
    (seq, Dyadic::new(m.into(), e))
}

fn bijections(_: &mut Traces) -> Outcome {
    for n in 0..1u64 << 16 {
        let n = BigUint::from(n);
        ensure(nu(&nu_inv(&n)) == n, || format!("ν(ν⁻¹({n})) ≠ {n}"))?;
        let (a, b) = cantor_unpair(&n);
        ensure(cantor_pair(&a, &b) == n, || format!("pairing fails at {n}"))?;
        let (sigma, k) = unpair(&n);
        ensure(pair(&sigma, &k) == n, || {
            format!("string pairing fails at {n}")
        })?;
    }
    let p = |a: u32, b: u32| cantor_pair(&BigUint::from(a), &BigUint::from(b));
    ensure(p(0, 0) == BigUint::zero(), || "P(0,0) ≠ 0".into())?;
    ensure(p(2, 1) == BigUint::from(7u32), || "P(2,1) ≠ 7".into())?;
    ensure(p(1, 2) == BigUint::from(8u32), || "P(1,2) ≠ 8".into())?;
    Ok("all codes < 2^16 round-trip; P(0,0)=0, P(2,1)=7, P(1,2)=8".into())
}

fn mutation_kill(traces: &mut Traces) -> Outcome {
    let mut table = BTreeMap::new();
    for kind in both() {
        let base = traces.get(kind, true, T_MAX).clone();
        let options = VerifyOptions {
            indices: Some(vec![0]),
            ..VerifyOptions::default()
        };
        for c in Check::for_engine(kind) {
            let before = verify(&base, Some(&[c]), options.clone())
                .unwrap()
                .remove(0);
            ensure(before.status != Status::Fail, || {
                format!("{kind}: {c:?} fails unmutated\n{before}")
            })?;
            let m = mutate::mutate(c, &base, 0, &options)
                .ok_or_else(|| format!("{kind}: no mutation for {c:?}"))?;
            let after = verify(&m.trace, Some(&[c]), options.clone())
                .unwrap()
                .remove(0);
            ensure(after.status == Status::Fail, || {
                format!("{kind}: {c:?} survives '{}'\n{after}", m.description)
            })?;
            table.insert(format!("{kind}/{}", c.name()), before.status);
        }
    }
    let summary: Vec<String> = table.iter().map(|(k, s)| format!("{k}={s}")).collect();
    Ok(format!(
        "every mutant fails; unmutated: {}",
        summary.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 determinism and replay", determinism),
        ("2 global bound", global_bound),
        ("3 monotonicity", monotonicity),
        ("4 jump sums", jump_sums),
        ("5 cut-offs", cutoffs),
        ("6 requirements", requirements),
        ("7 pause dynamics", pause_dynamics),
        ("8 speed transforms", transforms),
        ("9 bijections", bijections),
        ("10 mutation kill", mutation_kill),
    ];
    let mut traces = Traces::default();
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(|| f(&mut traces))).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(note) => println!("PASS {name}: {note}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

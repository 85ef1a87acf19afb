mod common;

use injurybench::engine::{run_with, RunOptions};
use injurybench::phi::{SlotKind, SlotSpec};
use injurybench::{EngineKind, PhiConfig, PhiRegistry};

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

fn agree(kind: EngineKind, config: &PhiConfig, stages: u64) -> usize {
    let reg = PhiRegistry::new(config).unwrap();
    let trace = run_with(
        kind,
        &reg,
        stages,
        RunOptions { record_reads: true },
        &mut |_| {},
    )
    .unwrap();
    match common::compare(&trace, &reg) {
        Ok(reads) => reads,
        Err(e) => panic!("{kind}: {e}"),
    }
}

#[test]
fn oracle_matches_standard_suite() {
    for kind in [EngineKind::A, EngineKind::B] {
        assert!(agree(kind, &PhiConfig::standard(), 200) > 200);
    }
}

#[test]
fn oracle_matches_identity_and_double() {
    for kind in [EngineKind::A, EngineKind::B] {
        assert!(agree(kind, &id_dbl(), 200) > 200);
    }
}

#[test]
fn oracle_matches_sparse_configs() {
    let configs = [
        PhiConfig::empty(),
        PhiConfig::single(0, SlotKind::Identity),
        PhiConfig::single(2, SlotKind::Shift { c: 3 }),
        PhiConfig {
            slots: vec![
                SlotSpec {
                    index: 0,
                    kind: SlotKind::Square,
                },
                SlotSpec {
                    index: 1,
                    kind: SlotKind::Partial {
                        graph: vec![(0, 1), (1, 4), (2, 9)],
                    },
                },
                SlotSpec {
                    index: 3,
                    kind: SlotKind::Double,
                },
            ],
        },
    ];
    for config in &configs {
        for kind in [EngineKind::A, EngineKind::B] {
            agree(kind, config, 120);
        }
    }
}

#[test]
fn oracle_notices_tampering() {
    let reg = PhiRegistry::new(&id_dbl()).unwrap();
    let trace = run_with(
        EngineKind::A,
        &reg,
        60,
        RunOptions { record_reads: true },
        &mut |_| {},
    )
    .unwrap();
    let jump = trace.jump_stages().next().unwrap() as usize;
    let mut bent = trace.clone();
    bent.x[jump + 1] = bent.x[jump].clone();
    assert!(common::compare(&bent, &reg).is_err());

    let (t, k) = trace
        .stages
        .iter()
        .find_map(|s| (!s.reads.is_empty()).then(|| (s.t as usize, s.reads.len() - 1)))
        .unwrap();
    let mut bent = trace.clone();
    bent.stages[t].reads[k].value += 1u32;
    assert!(common::compare(&bent, &reg)
        .unwrap_err()
        .contains("oracle has"));
}

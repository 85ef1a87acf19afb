use std::collections::{BTreeMap, HashMap};

use crate::strings::BinStr;
use crate::trace::{Action, Trace};

/// Jump stages, the map `u` sending each back to the threat behind it, and
/// per-strategy stage lists for every strategy that ever acted.
#[derive(Clone, Debug, Default)]
pub struct Index {
    /// `J = {t : x_{t+1} > x_t}`.
    pub jumps: Vec<u64>,
    pub u: BTreeMap<u64, u64>,
    /// Jump stages grouped by origin, each sorted.
    pub fibers: BTreeMap<u64, Vec<u64>>,
    /// Applied-and-threatened stages per strategy.
    pub threats: HashMap<BinStr, Vec<u64>>,
    /// Stages at which each acting strategy was applied.
    pub applications: HashMap<BinStr, Vec<u64>>,
    /// Set when some jump stage has no origin; `jumps`, `u` and `fibers`
    /// are then partial. Threats and applications never depend on `x`.
    pub error: Option<String>,
}

impl Index {
    pub fn new(trace: &Trace) -> Index {
        let mut index = Index::default();
        for rec in &trace.stages {
            if rec.action.is_threat() {
                let sigma = rec.action.sigma().expect("threats name a strategy");
                index.threats.entry(sigma.clone()).or_default().push(rec.t);
            }
        }
        for rec in &trace.stages {
            let t = rec.t;
            let (lo, hi) = (&trace.x[t as usize], &trace.x[t as usize + 1]);
            if hi <= lo {
                continue;
            }
            index.jumps.push(t);
            let origin = match &rec.action {
                Action::ThreatJump { .. } => Ok(t),
                Action::ExpansionJump { label, .. } => {
                    index.last_threat_before(label, t).ok_or_else(|| {
                        format!("stage {t} jumps for {label}, which was never threatened before")
                    })
                }
                other => Err(format!(
                    "stage {t} increases x but its action {} makes no jump",
                    action_name(other)
                )),
            };
            let origin = match origin {
                Ok(o) => o,
                Err(msg) => {
                    index.error.get_or_insert(msg);
                    continue;
                }
            };
            index.u.insert(t, origin);
            index.fibers.entry(origin).or_default().push(t);
        }
        let mut acting: Vec<BinStr> = trace
            .stages
            .iter()
            .filter_map(|s| s.action.sigma().cloned())
            .collect();
        acting.sort();
        acting.dedup();
        for sigma in acting {
            let stages = trace
                .stages
                .iter()
                .filter(|s| sigma.is_prefix_of(&s.settled))
                .map(|s| s.t)
                .collect();
            index.applications.insert(sigma, stages);
        }
        index
    }

    /// The latest stage `< t` at which `alpha` was applied and threatened.
    pub fn last_threat_before(&self, alpha: &BinStr, t: u64) -> Option<u64> {
        let stages = self.threats.get(alpha)?;
        let i = stages.partition_point(|s| *s < t);
        i.checked_sub(1).map(|i| stages[i])
    }

    pub fn fiber(&self, origin: u64) -> &[u64] {
        self.fibers.get(&origin).map_or(&[], Vec::as_slice)
    }

    pub fn threats_of(&self, sigma: &BinStr) -> &[u64] {
        self.threats.get(sigma).map_or(&[], Vec::as_slice)
    }

    /// The first stage after `t` at which `sigma` is applied. Only known for
    /// strategies that acted at least once.
    pub fn next_application(&self, sigma: &BinStr, t: u64) -> Option<u64> {
        let stages = self.applications.get(sigma)?;
        let i = stages.partition_point(|s| *s <= t);
        stages.get(i).copied()
    }
}

pub fn action_name(a: &Action) -> &'static str {
    match a {
        Action::TopOut => "top_out",
        Action::ThreatJump { .. } => "threat_jump",
        Action::ThreatSchedule { .. } => "threat_schedule",
        Action::ExpansionJump { .. } => "expansion_jump",
        Action::ExpansionDelegate { .. } => "expansion_delegate",
    }
}

/// `u` on the jump stages of a trace; fails when some jump stage matches
/// neither case of the definition.
pub fn u_map(trace: &Trace) -> Result<BTreeMap<u64, u64>, String> {
    let index = Index::new(trace);
    match index.error {
        Some(msg) => Err(msg),
        None => Ok(index.u),
    }
}

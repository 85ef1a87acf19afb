//! Mechanical checks of the construction's facts and lemmas on a finished
//! trace.
//!
//! Most statements quantify over the whole infinite run, so every report has
//! three outcomes: `pass`, `fail`, and `incomplete` for conclusions the
//! horizon cannot reach. Stages after which a strategy "is no longer
//! initialized" are approximated by the last initialization seen in the
//! trace; reports say so in their assumptions.

mod episodes;
mod index;
pub mod mutate;
mod requirements;
mod structural;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::engine::EngineKind;
use crate::params::Cursor;
use crate::phi::PhiRegistry;
use crate::strings::{self, BinStr, TruePathEstimate};
use crate::trace::{Replay, Trace};

pub use episodes::{check_cutoffs, check_jump_sums, cutoff_stages, episodes, Episode, EpisodeKind};
pub use index::{action_name, u_map, Index};
pub use requirements::{
    check_requirement_n, check_requirement_p, p_check_detail, PCheckDetail, PLevel,
};
pub use structural::{
    check_convergence_bound, check_monotonicity, check_pause_dynamics, check_settlement_facts,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Incomplete,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Incomplete => "incomplete",
            Status::Fail => "fail",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<BinStr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub detail: String,
}

impl Witness {
    fn new(status: Status, detail: impl Into<String>) -> Self {
        Witness {
            status,
            e: None,
            sigma: None,
            t: None,
            n: None,
            detail: detail.into(),
        }
    }

    pub fn pass(detail: impl Into<String>) -> Self {
        Witness::new(Status::Pass, detail)
    }

    pub fn fail(detail: impl Into<String>) -> Self {
        Witness::new(Status::Fail, detail)
    }

    pub fn incomplete(detail: impl Into<String>) -> Self {
        Witness::new(Status::Incomplete, detail)
    }

    pub fn at(mut self, t: u64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn sigma(mut self, sigma: &BinStr) -> Self {
        self.sigma = Some(sigma.clone());
        self
    }

    pub fn e(mut self, e: u64) -> Self {
        self.e = Some(e);
        self
    }

    pub fn n(mut self, n: u64) -> Self {
        self.n = Some(n);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub status: Status,
    pub witnesses: Vec<Witness>,
    pub assumptions: Vec<String>,
}

impl Report {
    pub fn new(check: Check) -> Self {
        Report {
            check: check.name().to_string(),
            status: Status::Pass,
            witnesses: Vec::new(),
            assumptions: Vec::new(),
        }
    }

    pub fn push(&mut self, w: Witness) {
        self.status = self.status.max(w.status);
        self.witnesses.push(w);
    }

    pub fn assume(&mut self, text: impl Into<String>) {
        let text = text.into();
        if !self.assumptions.contains(&text) {
            self.assumptions.push(text);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Witness> {
        self.witnesses.iter().filter(|w| w.status == Status::Fail)
    }

    /// Folds another report for the same check into this one.
    pub fn absorb(&mut self, other: Report) {
        for w in other.witnesses {
            self.push(w);
        }
        for a in other.assumptions {
            self.assume(a);
        }
        self.status = self.status.max(other.status);
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.check, self.status)?;
        for w in &self.witnesses {
            if w.status == Status::Pass && self.witnesses.len() > 12 {
                continue;
            }
            write!(f, "  [{}]", w.status)?;
            if let Some(e) = w.e {
                write!(f, " e={e}")?;
            }
            if let Some(s) = &w.sigma {
                write!(f, " σ={s}")?;
            }
            if let Some(t) = w.t {
                write!(f, " t={t}")?;
            }
            if let Some(n) = w.n {
                write!(f, " n={n}")?;
            }
            writeln!(f, " {}", w.detail)?;
        }
        for a in &self.assumptions {
            writeln!(f, "  assuming: {a}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    Monotonicity,
    JumpSums,
    ConvergenceBound,
    RequirementN,
    RequirementP,
    Cutoffs,
    SettlementFacts,
    PauseDynamics,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::Monotonicity,
        Check::JumpSums,
        Check::ConvergenceBound,
        Check::RequirementN,
        Check::RequirementP,
        Check::Cutoffs,
        Check::SettlementFacts,
        Check::PauseDynamics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Monotonicity => "monotonicity",
            Check::JumpSums => "jump_sums",
            Check::ConvergenceBound => "convergence_bound",
            Check::RequirementN => "requirement_n",
            Check::RequirementP => "requirement_p",
            Check::Cutoffs => "cutoffs",
            Check::SettlementFacts => "settlement_facts",
            Check::PauseDynamics => "pause_dynamics",
        }
    }

    /// Cut-off stages belong to the first construction, pause flags to the
    /// second.
    pub fn applies_to(self, engine: EngineKind) -> bool {
        match self {
            Check::Cutoffs => engine == EngineKind::A,
            Check::PauseDynamics => engine == EngineKind::B,
            _ => true,
        }
    }

    pub fn for_engine(engine: EngineKind) -> Vec<Check> {
        Check::ALL
            .into_iter()
            .filter(|c| c.applies_to(engine))
            .collect()
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase().replace('-', "_");
        Check::ALL
            .into_iter()
            .find(|c| c.name() == wanted)
            .ok_or_else(|| {
                let names: Vec<_> = Check::ALL.iter().map(|c| c.name()).collect();
                format!("unknown check {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("trace cannot be replayed: {0}")]
    Replay(String),
    #[error("trace configuration is invalid: {0}")]
    Config(String),
}

/// A checker declining to run because its preconditions do not hold.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{check} refused: {reason}")]
pub struct Refusal {
    pub check: Check,
    pub reason: String,
}

impl Refusal {
    pub fn new(check: Check, reason: impl Into<String>) -> Self {
        Refusal {
            check,
            reason: reason.into(),
        }
    }

    /// A refusal is a horizon-conditional outcome, never a failure.
    pub fn into_report(self, e: Option<u64>) -> Report {
        let mut r = Report::new(self.check);
        let mut w = Witness::incomplete(format!("refused: {}", self.reason));
        w.e = e;
        r.push(w);
        r
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// Settlement window for the true-path estimate; defaults to the second
    /// half of the run.
    pub window: Option<(usize, usize)>,
    /// Margin for the true-path estimate; defaults to
    /// [`strings::DEFAULT_THRESHOLD`].
    pub threshold: Option<usize>,
    /// Indices for the requirement checks; defaults to every slot declared
    /// total and increasing.
    pub indices: Option<Vec<u64>>,
}

/// Everything the checkers share: the trace, its parameter replay, the
/// registry rebuilt from the embedded configuration, and the jump index.
pub struct Context<'a> {
    pub trace: &'a Trace,
    pub replay: Replay,
    pub reg: PhiRegistry,
    pub index: Index,
    pub options: VerifyOptions,
}

impl<'a> Context<'a> {
    pub fn new(trace: &'a Trace, options: VerifyOptions) -> Result<Self, VerifyError> {
        let replay = Replay::new(trace).map_err(|e| VerifyError::Replay(e.to_string()))?;
        let reg =
            PhiRegistry::new(&trace.phi_config).map_err(|e| VerifyError::Config(e.to_string()))?;
        let index = Index::new(trace);
        Ok(Context {
            trace,
            replay,
            reg,
            index,
            options,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.trace.horizon()
    }

    pub fn x(&self, t: u64) -> &Dyadic {
        &self.trace.x[t as usize]
    }

    pub fn final_x(&self) -> &Dyadic {
        self.trace.final_x()
    }

    pub fn true_path(&self) -> Result<TruePathEstimate, String> {
        let stages = self.trace.stages.len();
        let window = self
            .options
            .window
            .unwrap_or_else(|| strings::default_window(stages));
        let threshold = self.options.threshold.unwrap_or(strings::DEFAULT_THRESHOLD);
        strings::true_path_estimate(&self.trace.settlements(), window, threshold)
            .map_err(|e| e.to_string())
    }

    pub fn requirement_indices(&self) -> Vec<u64> {
        match &self.options.indices {
            Some(v) => v.clone(),
            None => {
                let mut v: Vec<u64> = self
                    .trace
                    .phi_config
                    .slots
                    .iter()
                    .filter(|s| s.kind.total_increasing() == Some(true))
                    .map(|s| s.index)
                    .collect();
                v.sort_unstable();
                v
            }
        }
    }

    /// `(ℓ(e)[t], x_t - x_{φ_e(ℓ(e)[t])})`, recomputed from the registry.
    pub fn gap(&self, e: u64, t: u64) -> Option<(u64, Dyadic)> {
        let (l, v) = self.reg.anchor(e, t)?;
        Some((l as u64, self.x(t) - self.x(v)))
    }

    /// Threatened predicate at the strategy under `cur`, from replayed
    /// parameters.
    pub fn threatened(&self, cur: &Cursor<'_>, gap: &Option<(u64, Dyadic)>) -> bool {
        let p = cur.params();
        if p.flag {
            return false;
        }
        let (Some((l, g)), Some(w)) = (gap, cur.witness(&p)) else {
            return false;
        };
        *l >= w && *g < Dyadic::inv_pow2(w)
    }

    pub fn expansionary(&self, cur: &Cursor<'_>, gap: &Option<(u64, Dyadic)>) -> bool {
        let p = cur.params();
        if self.trace.engine.rules().expansionary_needs_flag && !p.flag {
            return false;
        }
        gap.as_ref()
            .is_some_and(|(_, g)| *g < Dyadic::inv_pow2(p.restraint))
    }

    /// Cursor on `sigma` at stage `t` over the replayed parameters.
    pub fn cursor(&self, sigma: &BinStr, t: u64) -> Cursor<'_> {
        let mut cur = self.replay.store().cursor(t);
        for &b in sigma.bits() {
            cur = cur.child(b);
        }
        cur
    }

    /// Last stage `< T` at which `sigma` was initialized.
    pub fn last_init(&self, sigma: &BinStr) -> Option<u64> {
        self.replay.store().init_between(sigma, 0, self.horizon())
    }

    /// The jump index, unless some jump stage has no origin.
    pub fn index_or_none(&self) -> Option<&Index> {
        self.index.error.is_none().then_some(&self.index)
    }

    fn index_or_fail(&self, report: &mut Report) -> Option<&Index> {
        match &self.index.error {
            None => Some(&self.index),
            Some(msg) => {
                report.push(Witness::fail(format!("jump index: {msg}")));
                None
            }
        }
    }
}

/// Runs one check. Requirement checks cover every selected index; refusals
/// turn into `incomplete` entries.
pub fn run_check(ctx: &Context<'_>, check: Check) -> Report {
    if !check.applies_to(ctx.trace.engine) {
        let mut r = Report::new(check);
        r.push(Witness::incomplete(format!(
            "not applicable to engine {}",
            ctx.trace.engine
        )));
        return r;
    }
    match check {
        Check::Monotonicity => check_monotonicity(ctx),
        Check::JumpSums => check_jump_sums(ctx),
        Check::ConvergenceBound => check_convergence_bound(ctx),
        Check::Cutoffs => check_cutoffs(ctx),
        Check::SettlementFacts => check_settlement_facts(ctx),
        Check::PauseDynamics => check_pause_dynamics(ctx),
        Check::RequirementN | Check::RequirementP => {
            let mut all = Report::new(check);
            let indices = ctx.requirement_indices();
            if indices.is_empty() {
                all.push(Witness::incomplete(
                    "no slot is declared total and increasing",
                ));
            }
            for e in indices {
                let one = if check == Check::RequirementN {
                    check_requirement_n(ctx, e)
                } else {
                    check_requirement_p(ctx, e)
                };
                all.absorb(one.unwrap_or_else(|r| r.into_report(Some(e))));
            }
            all
        }
    }
}

/// Runs the selected checks, by default all that apply to the trace's
/// engine.
pub fn verify(
    trace: &Trace,
    checks: Option<&[Check]>,
    options: VerifyOptions,
) -> Result<Vec<Report>, VerifyError> {
    let ctx = Context::new(trace, options)?;
    let selected = match checks {
        Some(c) => c.to_vec(),
        None => Check::for_engine(trace.engine),
    };
    Ok(selected.into_iter().map(|c| run_check(&ctx, c)).collect())
}

/// The worst status over a set of reports.
pub fn overall(reports: &[Report]) -> Status {
    reports
        .iter()
        .map(|r| r.status)
        .max()
        .unwrap_or(Status::Pass)
}

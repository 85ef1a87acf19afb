//! Stage records, whole-run traces, their JSONL form, and parameter replay.

use std::io::{BufRead, Write};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::engine::EngineKind;
use crate::params::{self, Field, InitRegion, ParamError, ParamStore, Params};
use crate::phi::PhiConfig;
use crate::strings::BinStr;

pub const FORMAT: &str = "injurybench-trace";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("stage {t}: {source}")]
    Param { t: u64, source: ParamError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// BigUint as a decimal string.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom(format!("not a natural number: {text:?}")))
    }
}

/// What the last applied strategy of a stage did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    /// The strategy reached length `t`; nothing happens.
    TopOut,
    /// A threat answered by an immediate jump of `2^-witness`.
    ThreatJump { sigma: BinStr, witness: u64 },
    /// A threat answered by scheduling `count` jumps on `gamma`.
    ThreatSchedule {
        sigma: BinStr,
        witness: u64,
        gamma: BinStr,
        #[serde(with = "decimal")]
        count: BigUint,
    },
    /// A scheduled jump of `2^-restraint` executed on behalf of `label`,
    /// leaving `k` more on `sigma`.
    ExpansionJump {
        sigma: BinStr,
        restraint: u64,
        label: BinStr,
        #[serde(with = "decimal")]
        k: BigUint,
    },
    /// A scheduled jump passed up to `gamma`, split into `count` pieces.
    ExpansionDelegate {
        sigma: BinStr,
        restraint: u64,
        label: BinStr,
        #[serde(with = "decimal")]
        k: BigUint,
        gamma: BinStr,
        #[serde(with = "decimal")]
        count: BigUint,
    },
}

impl Action {
    pub fn sigma(&self) -> Option<&BinStr> {
        match self {
            Action::TopOut => None,
            Action::ThreatJump { sigma, .. }
            | Action::ThreatSchedule { sigma, .. }
            | Action::ExpansionJump { sigma, .. }
            | Action::ExpansionDelegate { sigma, .. } => Some(sigma),
        }
    }

    /// The acting strategy was applied and threatened.
    pub fn is_threat(&self) -> bool {
        matches!(
            self,
            Action::ThreatJump { .. } | Action::ThreatSchedule { .. }
        )
    }

    /// The acting strategy worked off one scheduled jump.
    pub fn is_counter_step(&self) -> bool {
        matches!(
            self,
            Action::ExpansionJump { .. } | Action::ExpansionDelegate { .. }
        )
    }

    pub fn label(&self) -> Option<&BinStr> {
        match self {
            Action::ExpansionJump { label, .. } | Action::ExpansionDelegate { label, .. } => {
                Some(label)
            }
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<u64> {
        match self {
            Action::ThreatJump { witness, .. } | Action::ThreatSchedule { witness, .. } => {
                Some(*witness)
            }
            _ => None,
        }
    }

    pub fn restraint(&self) -> Option<u64> {
        match self {
            Action::ExpansionJump { restraint, .. }
            | Action::ExpansionDelegate { restraint, .. } => Some(*restraint),
            _ => None,
        }
    }
}

/// One parameter change made during a stage: `old` is the value at `[t]`,
/// `new` the value at `[t+1]`. Values are naturals; counters appear as their
/// pairing codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamWrite {
    pub sigma: BinStr,
    pub field: Field,
    #[serde(with = "decimal")]
    pub old: BigUint,
    #[serde(with = "decimal")]
    pub new: BigUint,
}

/// A parameter value consulted by the engine, captured only on request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamRead {
    pub sigma: BinStr,
    pub field: Field,
    /// `false` for `[t]`, `true` for `[t+1]`.
    pub next: bool,
    pub value: BigUint,
}

/// Per-substage view of a stage, derived from the settled string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Substep<'a> {
    /// Not expansionary: continue with `σ1`.
    Descend(BinStr),
    /// Expansionary with an empty counter: restraint raised, continue with `σ0`.
    ExpansionIncrement(BinStr),
    Terminal(&'a Action),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub t: u64,
    /// The last strategy applied; every prefix of it was applied too.
    pub settled: BinStr,
    pub action: Action,
    pub jump: Dyadic,
    pub init_regions: Vec<InitRegion>,
    pub param_writes: Vec<ParamWrite>,
    #[serde(skip)]
    pub reads: Vec<ParamRead>,
}

impl StageRecord {
    pub fn applied(&self) -> impl Iterator<Item = BinStr> + '_ {
        self.settled.prefixes()
    }

    pub fn is_applied(&self, sigma: &BinStr) -> bool {
        sigma.is_prefix_of(&self.settled)
    }

    pub fn substeps(&self) -> Vec<Substep<'_>> {
        let mut out: Vec<Substep<'_>> = (0..self.settled.len())
            .map(|i| {
                let sigma = self.settled.prefix(i);
                if self.settled.bit(i) {
                    Substep::Descend(sigma)
                } else {
                    Substep::ExpansionIncrement(sigma)
                }
            })
            .collect();
        out.push(Substep::Terminal(&self.action));
        out
    }

    pub fn writes_to<'a>(
        &'a self,
        sigma: &'a BinStr,
        field: Field,
    ) -> impl Iterator<Item = &'a ParamWrite> {
        self.param_writes
            .iter()
            .filter(move |w| w.field == field && &w.sigma == sigma)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub engine: EngineKind,
    pub phi_config: PhiConfig,
    /// `x_0, …, x_T`.
    pub x: Vec<Dyadic>,
    pub stages: Vec<StageRecord>,
    /// Wall-clock note; excluded from the digest.
    pub timestamp: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct HeaderCore {
    format: String,
    version: u32,
    engine: EngineKind,
    stages: u64,
    x0: Dyadic,
    phi_config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    core: HeaderCore,
    phi_config: PhiConfig,
    digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
}

#[derive(Serialize)]
struct StageLineOut<'a> {
    #[serde(flatten)]
    record: &'a StageRecord,
    x_next: &'a Dyadic,
}

#[derive(Deserialize)]
struct StageLineIn {
    #[serde(flatten)]
    record: StageRecord,
    x_next: Dyadic,
}

impl Trace {
    pub fn horizon(&self) -> u64 {
        self.stages.len() as u64
    }

    pub fn settlements(&self) -> Vec<BinStr> {
        self.stages.iter().map(|s| s.settled.clone()).collect()
    }

    pub fn final_x(&self) -> &Dyadic {
        self.x.last().expect("x_0 always present")
    }

    fn header_core(&self) -> HeaderCore {
        HeaderCore {
            format: FORMAT.to_string(),
            version: VERSION,
            engine: self.engine,
            stages: self.horizon(),
            x0: self.x[0].clone(),
            phi_config_digest: self.phi_config.digest(),
        }
    }

    fn stage_lines(&self) -> Vec<String> {
        self.stages
            .iter()
            .zip(&self.x[1..])
            .map(|(record, x_next)| {
                serde_json::to_string(&StageLineOut { record, x_next }).expect("stage serializes")
            })
            .collect()
    }

    fn digest_of(core: &HeaderCore, lines: &[String]) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(core).expect("header serializes"));
        for line in lines {
            h.update(b"\n");
            h.update(line.as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// Content digest; independent of the timestamp.
    pub fn digest(&self) -> String {
        Trace::digest_of(&self.header_core(), &self.stage_lines())
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<String> {
        let core = self.header_core();
        let lines = self.stage_lines();
        let digest = Trace::digest_of(&core, &lines);
        let header = Header {
            core,
            phi_config: self.phi_config.canonical(),
            digest: digest.clone(),
            timestamp: self.timestamp.clone(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for line in lines {
            out.write_all(line.as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(digest)
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Parses a trace. The recorded digest is returned alongside but not
    /// enforced, so hand-edited traces can still be checked.
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<(Trace, String), TraceError> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, msg: String| TraceError::Parse { line, msg };
        let (_, first) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty input".into()))?;
        let header: Header =
            serde_json::from_str(&first?).map_err(|e| parse_err(1, e.to_string()))?;
        if header.core.format != FORMAT {
            return Err(parse_err(
                1,
                format!("unknown format {:?}", header.core.format),
            ));
        }
        if header.core.version != VERSION {
            return Err(parse_err(
                1,
                format!("unsupported version {}", header.core.version),
            ));
        }
        let mut x = vec![header.core.x0.clone()];
        let mut stages = Vec::new();
        for (i, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: StageLineIn =
                serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?;
            if parsed.record.t != stages.len() as u64 {
                return Err(parse_err(
                    i + 1,
                    format!("expected stage {}, found {}", stages.len(), parsed.record.t),
                ));
            }
            stages.push(parsed.record);
            x.push(parsed.x_next);
        }
        if stages.len() as u64 != header.core.stages {
            return Err(parse_err(
                stages.len() + 1,
                format!(
                    "header announces {} stages, found {}",
                    header.core.stages,
                    stages.len()
                ),
            ));
        }
        let trace = Trace {
            engine: header.core.engine,
            phi_config: header.phi_config,
            x,
            stages,
            timestamp: header.timestamp,
        };
        Ok((trace, header.digest))
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        Trace::read_jsonl(text.as_bytes()).map(|(t, _)| t)
    }

    /// `t,mantissa,exponent` rows for `x_0, …, x_T`.
    pub fn write_sequence_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_sequence_csv(&self.x, out)
    }

    /// Stages where `x` grows.
    pub fn jump_stages(&self) -> impl Iterator<Item = u64> + '_ {
        self.stages
            .iter()
            .filter(|s| s.jump.is_positive())
            .map(|s| s.t)
    }
}

pub fn write_sequence_csv<W: Write>(x: &[Dyadic], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,mantissa,exponent")?;
    for (t, v) in x.iter().enumerate() {
        writeln!(out, "{t},{},{}", v.mantissa(), v.exponent())?;
    }
    Ok(())
}

/// Parameter values reconstructed from a trace alone: defaults, then the
/// recorded writes and initialization regions in stage order.
pub struct Replay {
    store: ParamStore,
}

impl Replay {
    pub fn new(trace: &Trace) -> Result<Self, TraceError> {
        let mut store = ParamStore::new(trace.engine.reset_policy());
        for stage in &trace.stages {
            for w in &stage.param_writes {
                let value = params::decode(&w.sigma, w.field, &w.new)
                    .map_err(|source| TraceError::Param { t: stage.t, source })?;
                store.write(&w.sigma, stage.t, value);
            }
            for region in &stage.init_regions {
                store.init_region(region, stage.t);
            }
        }
        Ok(Replay { store })
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn params(&self, sigma: &BinStr, t: u64) -> Params<'_> {
        self.store.read(sigma, t)
    }

    /// Value of `field` for `sigma` at stage `t`, encoded as a natural.
    pub fn value(&self, sigma: &BinStr, t: u64, field: Field) -> BigUint {
        let p = self.params(sigma, t);
        match field {
            Field::Counter => params::counter_code(p.counter),
            Field::Restraint => BigUint::from(p.restraint),
            Field::Flag => BigUint::from(p.flag as u8),
            Field::Witness => sigma.nu() + p.witness_offset,
        }
    }

    /// Writes whose recorded old value disagrees with the replayed value at
    /// `[t]`, as `(stage, write, replayed)`.
    pub fn old_value_mismatches<'a>(
        &self,
        trace: &'a Trace,
    ) -> Vec<(u64, &'a ParamWrite, BigUint)> {
        let mut out = Vec::new();
        for stage in &trace.stages {
            for w in &stage.param_writes {
                let replayed = self.value(&w.sigma, stage.t, w.field);
                if replayed != w.old {
                    out.push((stage.t, w, replayed));
                }
            }
        }
        out
    }
}

//! Registry configuration: which function sits at which index.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::machine::{Instr, Program};
use super::PhiError;

/// One configured slot. Indices missing from a config are divergent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotSpec {
    pub index: u64,
    #[serde(flatten)]
    pub kind: SlotKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SlotKind {
    Identity,
    Double,
    Shift {
        c: u64,
    },
    Square,
    Constant {
        c: u64,
    },
    /// A finite graph of `(n, value)` pairs; all other inputs diverge.
    Partial {
        graph: Vec<(u64, u64)>,
    },
    Diverge,
    Toy {
        code: Vec<Instr>,
        /// Whether the program is known to compute a total increasing
        /// function. Left undeclared, checkers that need it refuse.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_increasing: Option<bool>,
    },
}

impl SlotKind {
    /// Membership in the set of total increasing functions, where known.
    pub fn total_increasing(&self) -> Option<bool> {
        match self {
            SlotKind::Identity | SlotKind::Double | SlotKind::Shift { .. } | SlotKind::Square => {
                Some(true)
            }
            SlotKind::Constant { .. } | SlotKind::Diverge => Some(false),
            SlotKind::Partial { .. } => Some(false),
            SlotKind::Toy {
                total_increasing, ..
            } => *total_increasing,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiConfig {
    pub slots: Vec<SlotSpec>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ConfigFile {
    Table(PhiConfig),
    List(Vec<SlotSpec>),
}

impl PhiConfig {
    pub fn empty() -> Self {
        PhiConfig::default()
    }

    /// The documented default family:
    ///
    /// | index | function |
    /// |---|---|
    /// | 0 | `n` |
    /// | 1 | `2n` |
    /// | 2 | `n + 3` |
    /// | 3 | `n²` |
    /// | 4 | constant `5` |
    /// | 5 | partial `{0↦2, 1↦3, 3↦7}` |
    /// | 6 | divergent |
    /// | 7.. | toy programs, cycling through doubling (declared total increasing), halving-on-even, successor (declared) |
    pub fn default_suite(toys: usize) -> Self {
        let mut slots = vec![
            SlotSpec {
                index: 0,
                kind: SlotKind::Identity,
            },
            SlotSpec {
                index: 1,
                kind: SlotKind::Double,
            },
            SlotSpec {
                index: 2,
                kind: SlotKind::Shift { c: 3 },
            },
            SlotSpec {
                index: 3,
                kind: SlotKind::Square,
            },
            SlotSpec {
                index: 4,
                kind: SlotKind::Constant { c: 5 },
            },
            SlotSpec {
                index: 5,
                kind: SlotKind::Partial {
                    graph: vec![(0, 2), (1, 3), (3, 7)],
                },
            },
            SlotSpec {
                index: 6,
                kind: SlotKind::Diverge,
            },
        ];
        let programs = [
            (Program::doubling(), Some(true)),
            (Program::halving_even(), None),
            (Program::successor(), Some(true)),
        ];
        for i in 0..toys {
            let (program, total_increasing) = programs[i % programs.len()].clone();
            slots.push(SlotSpec {
                index: 7 + i as u64,
                kind: SlotKind::Toy {
                    code: program.code,
                    total_increasing,
                },
            });
        }
        PhiConfig { slots }
    }

    /// The default suite with two toy programs.
    pub fn standard() -> Self {
        PhiConfig::default_suite(2)
    }

    pub fn single(index: u64, kind: SlotKind) -> Self {
        PhiConfig {
            slots: vec![SlotSpec { index, kind }],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PhiError> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| PhiError::Config(e.to_string()))?;
        Ok(match file {
            ConfigFile::Table(c) => c,
            ConfigFile::List(slots) => PhiConfig { slots },
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, PhiError> {
        toml::from_str(text).map_err(|e| PhiError::Config(e.to_string()))
    }

    /// Reads JSON or TOML, chosen by file extension (`.toml` → TOML).
    pub fn load(path: &Path) -> Result<Self, PhiError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PhiError::Config(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => PhiConfig::from_toml(&text),
            _ => PhiConfig::from_json(&text),
        }
    }

    /// Slots sorted by index; the form that is hashed and embedded in traces.
    pub fn canonical(&self) -> PhiConfig {
        let mut slots = self.slots.clone();
        slots.sort_by_key(|s| s.index);
        PhiConfig { slots }
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

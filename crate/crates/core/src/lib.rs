//! Execution, tracing and verification of two priority constructions of
//! left-computable reals, plus the transformations between speedable,
//! regainingly approximable and nearly computable approximations.

pub mod dyadic;
pub mod engine;
pub mod params;
pub mod phi;
pub mod speed;
pub mod strings;
pub mod trace;
pub mod verify;

pub use dyadic::Dyadic;
pub use engine::{run, Engine, EngineKind};
pub use phi::{PhiConfig, PhiRegistry};
pub use strings::BinStr;
pub use trace::{StageRecord, Trace};

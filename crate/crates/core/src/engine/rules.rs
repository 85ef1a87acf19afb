//! The points where the two constructions differ, side by side.

use crate::params::{InitRegion, Relation, ResetPolicy};
use crate::strings::BinStr;

pub struct Rules {
    /// Initialization resets the flag (`s`) or leaves it alone (`p`).
    pub reset: ResetPolicy,
    /// Expansionary stages also require the flag to be set.
    pub expansionary_needs_flag: bool,
    /// A strategy that is applied but not threatened clears its flag.
    pub clear_flag_when_calm: bool,
    /// A handled threat raises the strategy's witness by one.
    pub threat_bumps_witness: bool,
    /// Region initialized after a handled threat on `σ`.
    pub after_threat: fn(&BinStr) -> InitRegion,
    /// Region initialized after `σ` worked off a jump owed to `α`.
    pub after_counter_step: fn(sigma: &BinStr, alpha: &BinStr) -> InitRegion,
}

/// First construction: satisfaction flag, large initialization regions.
pub static A: Rules = Rules {
    reset: ResetPolicy { flag: true },
    expansionary_needs_flag: true,
    clear_flag_when_calm: false,
    threat_bumps_witness: false,
    after_threat: |sigma| InitRegion::new(sigma.clone(), Relation::LexGreaterOrExtends),
    after_counter_step: |_, alpha| InitRegion::new(alpha.clone(), Relation::LexGreaterOrExtends),
};

/// Second construction: pause flag untouched by initialization, witness
/// bumped on every threat, only lexicographically greater strategies reset.
pub static B: Rules = Rules {
    reset: ResetPolicy { flag: false },
    expansionary_needs_flag: false,
    clear_flag_when_calm: true,
    threat_bumps_witness: true,
    after_threat: |sigma| InitRegion::new(sigma.clone(), Relation::LexGreater),
    after_counter_step: |sigma, _| InitRegion::new(sigma.child(false), Relation::LexGreater),
};

/// Region initialized when a strategy of length `t` ends stage `t`.
pub fn after_top_out(sigma: &BinStr) -> InitRegion {
    InitRegion::new(sigma.clone(), Relation::LexGreater)
}

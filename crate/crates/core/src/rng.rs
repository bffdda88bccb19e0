//! Deterministic seeding for parallel simulation.
//!
//! Every unit of work (a scenario/path pair, or a module inside a path) gets
//! its own generator whose seed is a pure function of the master seed and the
//! unit's coordinates. Results therefore do not depend on how units are
//! scheduled across workers.
//!
//! Seeds are mixed with the SplitMix64 finaliser, which is a bijection on
//! `u64`. Each mixing step folds one coordinate into the running state, so for
//! a fixed prefix two different coordinates can never map to the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Steele, Lea & Flood).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn fold(state: u64, coordinate: u64) -> u64 {
    splitmix64(state ^ coordinate.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Seed for path `path_index` of scenario `scenario_index`.
pub fn derive_path_seed(master_seed: u64, scenario_index: u64, path_index: u64) -> u64 {
    let s = fold(splitmix64(master_seed), scenario_index);
    fold(s, path_index)
}

/// Seed for streams shared by every path of a scenario (inner pricing draws,
/// capital calibration).
pub fn scenario_seed(master_seed: u64, scenario_index: u64) -> u64 {
    fold(splitmix64(master_seed ^ 0x5C0F_FEE5_EED5_0001), scenario_index)
}

/// Seed for a named sub-stream of an existing seed.
pub fn substream_seed(seed: u64, tag: u64) -> u64 {
    fold(seed ^ 0xA5A5_A5A5_5A5A_5A5A, tag)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn substream(seed: u64, tag: u64) -> SimRng {
    rng_from_seed(substream_seed(seed, tag))
}

/// Sub-stream tags used inside one simulated path.
pub mod tags {
    pub const MEMBER: u64 = 1;
    /// Climate variables use `CLIMATE_VAR + variable index`.
    pub const CLIMATE_VAR: u64 = 100;
    pub const HAZARD: u64 = 200;
    pub const INFLATION: u64 = 300;
    pub const REAL_RATE: u64 = 301;
    pub const EQUITY: u64 = 302;
    pub const NONCAT: u64 = 400;
    pub const LAYER_BANK: u64 = 500;
    pub const CAPITAL_CALIBRATION: u64 = 600;
}

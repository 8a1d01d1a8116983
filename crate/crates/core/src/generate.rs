//! Seeded random additive instances.
//!
//! The generator is SplitMix64 started from the seed itself. Values are drawn
//! agent by agent, item by item, each as `next_u64() % (max_value + 1)`, so any
//! SplitMix64 implementation reproduces the same instances.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::instance::{Instance, InstanceError};

pub fn random_rows(seed: u64, agents: usize, items: usize, max_value: u64) -> Vec<Vec<i64>> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..agents).map(|_| (0..items).map(|_| (rng.next_u64() % (max_value + 1)) as i64).collect()).collect()
}

pub fn random_additive(seed: u64, agents: usize, items: usize, max_value: u64) -> Result<Instance, InstanceError> {
    if max_value > i64::MAX as u64 {
        return Err(InstanceError::Json(format!("max value {max_value} does not fit in a signed 64-bit integer")));
    }
    Instance::additive_ints(&random_rows(seed, agents, items, max_value))
}

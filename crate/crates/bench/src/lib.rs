//! Shared fixtures for the criterion benches.

use crsvm_core::{generate_synthetic, shard, standardize, DataShard, Dataset, SyntheticSpec};

/// Standardised synthetic data with the default correlation and noise.
pub fn dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let raw = generate_synthetic(&SyntheticSpec { n, p, rho: 0.5, alpha: 0.2, seed }).expect("valid spec");
    standardize(&raw).expect("n >= 2").0
}

/// The first of `k` shards of [`dataset`].
pub fn first_shard(n: usize, p: usize, k: usize, seed: u64) -> DataShard {
    shard(&dataset(n, p, seed), k, seed).expect("k <= n").swap_remove(0)
}

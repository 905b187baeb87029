//! Shared fixtures for the link simulator benchmarks.

use dfesim_core::{ChannelConfig, ComparatorConfig, SimConfig};

/// A moderately lossy link with comparator noise, sized for benchmarking.
pub fn lossy_link(n_bits: usize) -> SimConfig {
    SimConfig {
        channel: ChannelConfig {
            tau_ui: 0.8,
            ..Default::default()
        },
        cmp: ComparatorConfig {
            noise_sigma: 1.5e-3,
            ..Default::default()
        },
        n_bits,
        shard_bits: n_bits.min(10_000),
        ..Default::default()
    }
}

//! Shared fixtures for the benchmarks.

use satmarl_core::{ConstellationSpec, EnvConfig};

/// Default environment with `n` clustered satellites.
pub fn cluster_env(n: usize) -> EnvConfig {
    EnvConfig { constellation: ConstellationSpec::cluster(n), ..EnvConfig::default() }
}

//! Workloads shared by the benchmarks in `benches/`.

use rmdp_core::generate::{generate_instance, GeneratorConfig, GeneratorMode};
use rmdp_core::MdpInstance;

/// A generated instance of the given shape; panics on an invalid shape.
pub fn instance(mode: GeneratorMode, states: usize, actions: usize, seed: u64) -> MdpInstance {
    generate_instance(&GeneratorConfig::new(mode, states, actions), seed).expect("valid shape")
}

/// Instance whose canonical graph is a path of `states` blocks of size two.
pub fn path_instance(states: usize, actions: usize, seed: u64) -> MdpInstance {
    let mut cfg = GeneratorConfig::new(GeneratorMode::Weighted, states, actions);
    cfg.edges = Some((1..states).map(|i| (i, i + 1)).collect());
    generate_instance(&cfg, seed).expect("valid shape")
}

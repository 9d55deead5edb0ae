//! Fixtures shared by the benchmarks.

use gasgrid::ingest::{generate_synthetic, ComponentMix, Synthetic};

/// A meshed passive network: `nodes` nodes and a fifth again as many pipes
/// as a spanning tree needs.
pub fn meshed(seed: u64, nodes: usize) -> Synthetic {
    let mix = ComponentMix { pipes: nodes - 1 + nodes / 5, multipliers: vec![0.8, 1.0, 1.3], ..Default::default() };
    generate_synthetic(seed, nodes, &mix).expect("fixture generates")
}

/// A small network with every active element kind, for the design loop.
pub fn mixed(seed: u64) -> Synthetic {
    let mix = ComponentMix {
        pipes: 6,
        resistors: 1,
        compressors: 1,
        control_valves: 1,
        valves: 1,
        slack: 0.3,
        multipliers: vec![0.8, 1.3],
        ..Default::default()
    };
    generate_synthetic(seed, 7, &mix).expect("fixture generates")
}

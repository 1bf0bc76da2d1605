//! Fixtures shared by the benchmarks.

use wpcn_core::{sample_channels, ChannelRealization, SystemParams, Topology};

/// Default parameters with `antennas` transmit antennas and a channel drawn
/// from `seed` on the standard topology.
pub fn instance(antennas: usize, seed: u64) -> (SystemParams, ChannelRealization) {
    let params = SystemParams { antennas, ..SystemParams::default() };
    let ch = sample_channels(&Topology::standard(), antennas, seed).expect("standard topology is valid");
    (params, ch)
}

/// First seed at or after `from` for which `kind` is feasible, so that the
/// timed solve always runs the full pipeline.
pub fn feasible_seed(kind: wpcn_core::ProblemKind, antennas: usize, from: u64) -> u64 {
    (from..from + 100)
        .find(|&s| {
            let (p, ch) = instance(antennas, s);
            wpcn_core::optimize(kind, &p, &ch, &Default::default()).is_ok_and(|r| r.is_optimal())
        })
        .expect("a feasible seed within 100 draws")
}

//! Joint time, beamforming and power allocation for a two-group
//! wireless-powered cooperation network.
//!
//! Group 1 (S1 with `N` antennas to D1) lends energy to an energy-harvesting
//! relay, which in return forwards group 2's traffic (S2 to D2) and gives
//! S1 spectrum access. The non-convex allocation problems are relaxed to
//! conic programs (PSD plus exponential cones), solved by an interior-point
//! backend, and mapped back to a rank-one beamformer.
//!
//! Module map:
//! * [`sysmodel`]: rates, harvested energy, feasibility checks.
//! * [`channel`]: topology and seeded fading.
//! * [`conic`]: program builder and solver backend.
//! * [`problems`]: the relaxed WSR (fixed and flexible power) and
//!   power-minimization programs.
//! * [`rankone`] and [`optimize`]: beamformer recovery and the one-call API.
//! * [`baselines`]: random benchmark schemes and the grid oracle.
//! * [`experiment`]: configs, presets and Monte Carlo sweeps.

pub mod baselines;
pub mod channel;
pub mod conic;
mod error;
pub mod experiment;
pub mod optimize;
pub mod problems;
pub mod rankone;
pub mod sysmodel;

pub use baselines::{BaselineResult, BaselineStatus, Scheme};
pub use channel::{sample_channels, ChannelRealization, Topology};
pub use conic::Tolerances;
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, Method, Mode};
pub use optimize::{optimize, OptResult, OptStatus};
pub use problems::ProblemKind;
pub use rankone::RankOneReport;
pub use sysmodel::{Evaluation, PowerMode, ResourceAllocation, SystemParams};

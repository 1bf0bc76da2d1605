//! Experiment harness: configs, presets, Monte Carlo sweeps, artifacts and
//! the oracle cross-check.

pub mod config;
pub mod output;
pub mod presets;
pub mod run;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::oracle::{refine_min_power, refine_wsr, GridSpec, Refinement};
use crate::channel::{sample_channels, Topology};
use crate::conic::Tolerances;
use crate::error::Result;
use crate::optimize::optimize;
use crate::problems::ProblemKind;
use crate::sysmodel::{PowerMode, SystemParams};

pub use config::{Axis, ExperimentConfig, Method, Mode, OutputSpec, SweepSpec, SweepVar, TopologySpec};
pub use output::{summary_csv, write_all, Written, CSV_COLUMNS};
pub use presets::{preset, PRESETS};
pub use run::{run_sweep, run_sweep_threads, solve_once, ResultRow, SolveOnce, SweepOutput, TrialRecord, TrialStatus};

/// Solver optimum against the grid oracle on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub seed: u64,
    pub kind: ProblemKind,
    pub solver: Option<f64>,
    pub oracle: Refinement,
    /// Solver advantage over the finest grid (positive when the solver is
    /// better); `None` unless both are feasible.
    pub gap: Option<f64>,
    pub agrees: bool,
}

impl OracleCheck {
    pub fn relative_gap(&self) -> Option<f64> {
        Some(self.gap? / self.solver?.abs().max(f64::MIN_POSITIVE))
    }
}

/// Solver-side slack of the sandwich `oracle <= optimum` (reversed for power).
pub const ORACLE_SLACK: f64 = 1e-6;

/// Compares the joint optimum with the refined grid oracle.
///
/// The instance agrees when both sides find it infeasible, or when
/// `-ORACLE_SLACK <= gap <= bound` with the bound of [`Refinement`].
pub fn oracle_check(
    kind: ProblemKind,
    params: &SystemParams,
    topology: &Topology,
    seed: u64,
    grid: GridSpec,
    tol: &Tolerances,
) -> Result<OracleCheck> {
    let ch = sample_channels(topology, params.antennas, seed)?;
    let oracle = match kind {
        ProblemKind::P1 => refine_wsr(params, &ch, PowerMode::Fixed, grid)?,
        ProblemKind::P2 => refine_wsr(params, &ch, PowerMode::Flexible, grid)?,
        ProblemKind::P3 => refine_min_power(params, &ch, grid)?,
    };
    let solver = optimize(kind, params, &ch, tol)?.objective;
    let gap = match (solver, oracle.values[0]) {
        (Some(s), Some(o)) => Some(if kind.is_wsr() { s - o } else { o - s }),
        _ => None,
    };
    let agrees = match (gap, oracle.bound) {
        (Some(g), Some(b)) => g >= -ORACLE_SLACK && g <= b,
        (None, _) => solver.is_none() && oracle.values[0].is_none(),
        (Some(_), None) => false,
    };
    Ok(OracleCheck { seed, kind, solver, oracle, gap, agrees })
}

/// [`oracle_check`] over `seeds` on the standard topology, in parallel.
pub fn oracle_checks(kind: ProblemKind, params: &SystemParams, seeds: &[u64], grid: GridSpec, tol: &Tolerances) -> Result<Vec<OracleCheck>> {
    let topo = Topology::standard();
    seeds.par_iter().map(|&s| oracle_check(kind, params, &topo, s, grid, tol)).collect()
}

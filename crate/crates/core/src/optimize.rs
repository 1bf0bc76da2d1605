//! One-call joint optimization: relaxed conic solve, rank-one recovery and
//! physical re-evaluation.

use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::conic::Tolerances;
use crate::error::Result;
use crate::problems::{diagnose_qos, solve_relaxed, BuildOptions, ProblemKind, QosDiagnosis, RelaxedOutcome, SolveInfo};
use crate::rankone::{extract, ExtractOptions, RankOneReport};
use crate::sysmodel::{Evaluation, ResourceAllocation, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Optimal,
    /// The QoS targets cannot both be met (no win-win cooperation).
    Infeasible,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub kind: ProblemKind,
    pub status: OptStatus,
    /// WSR for `P1`/`P2`, average power for `P3`, recomputed on the
    /// recovered allocation.
    pub objective: Option<f64>,
    pub relaxed_objective: Option<f64>,
    pub allocation: Option<ResourceAllocation>,
    pub evaluation: Option<Evaluation>,
    pub rank: Option<RankOneReport>,
    pub solver: Option<SolveInfo>,
    /// Present for infeasible instances when the probe solved.
    pub qos: Option<QosDiagnosis>,
    pub message: Option<String>,
}

impl OptResult {
    fn empty(kind: ProblemKind, status: OptStatus) -> Self {
        OptResult {
            kind,
            status,
            objective: None,
            relaxed_objective: None,
            allocation: None,
            evaluation: None,
            rank: None,
            solver: None,
            qos: None,
            message: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == OptStatus::Optimal
    }
}

pub fn optimize(kind: ProblemKind, params: &SystemParams, ch: &ChannelRealization, tol: &Tolerances) -> Result<OptResult> {
    optimize_with(kind, params, ch, &BuildOptions::default(), tol)
}

/// As [`optimize`], with parts of the allocation pinned by `opts`.
///
/// With a pinned beam the relaxed matrix is rank one by construction and is
/// used as is; the auxiliary problem would otherwise re-optimize the
/// direction.
pub fn optimize_with(
    kind: ProblemKind,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &BuildOptions,
    tol: &Tolerances,
) -> Result<OptResult> {
    params.validate()?;
    let (solution, info) = match solve_relaxed(kind, params, ch, opts, tol)? {
        RelaxedOutcome::Optimal { solution, info } => (solution, info),
        RelaxedOutcome::Infeasible => {
            let mut r = OptResult::empty(kind, OptStatus::Infeasible);
            let pinned = opts.beam.is_some() || opts.tau.is_some();
            if !pinned {
                r.qos = diagnose_qos(kind, params, ch, tol).ok();
            }
            let which = r.qos.as_ref().map(|q| q.violated(params)).unwrap_or_default();
            r.message = Some(if which.is_empty() {
                "no win-win cooperation: the rate thresholds cannot both be met".into()
            } else {
                format!("no win-win cooperation: cannot meet {}", which.join(" and "))
            });
            return Ok(r);
        }
        RelaxedOutcome::Failed { reason } => {
            let mut r = OptResult::empty(kind, OptStatus::Failed);
            r.message = Some(reason);
            return Ok(r);
        }
    };
    let xopts = ExtractOptions { always_solve: opts.beam.is_none(), tolerances: *tol, ..ExtractOptions::default() };
    let mut r = OptResult::empty(kind, OptStatus::Optimal);
    r.relaxed_objective = Some(solution.objective());
    r.solver = Some(info);
    match extract(&solution, params, ch, &xopts) {
        Ok(rec) => {
            r.objective = Some(rec.report.objective_after);
            r.allocation = Some(rec.allocation);
            r.evaluation = Some(rec.evaluation);
            r.rank = Some(rec.report);
        }
        Err(e) => {
            r.status = OptStatus::Failed;
            r.message = Some(e.to_string());
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, Topology};
    use crate::sysmodel::{check_feasibility, PowerMode};

    #[test]
    fn optimal_result_is_feasible_and_consistent() {
        let params = SystemParams::default();
        for (kind, mode) in
            [(ProblemKind::P1, PowerMode::Fixed), (ProblemKind::P2, PowerMode::Flexible), (ProblemKind::P3, PowerMode::Unconstrained)]
        {
            let ch = sample_channels(&Topology::standard(), 4, 11).unwrap();
            let r = optimize(kind, &params, &ch, &Tolerances::default()).unwrap();
            assert!(r.is_optimal(), "{kind:?}: {:?}", r.message);
            let alloc = r.allocation.as_ref().unwrap();
            assert!(check_feasibility(&params, &ch, alloc, mode, 1e-6).feasible);
            let rel = (r.objective.unwrap() - r.relaxed_objective.unwrap()).abs() / r.relaxed_objective.unwrap();
            assert!(rel <= 1e-5);
            assert_eq!(r.rank.as_ref().unwrap().rank_after, 1);
        }
    }

    #[test]
    fn infeasible_thresholds_explain_themselves() {
        let params = SystemParams { r_s2: 50.0, antennas: 2, ..SystemParams::default() };
        let ch = sample_channels(&Topology::standard(), 2, 4).unwrap();
        let r = optimize(ProblemKind::P1, &params, &ch, &Tolerances::default()).unwrap();
        assert_eq!(r.status, OptStatus::Infeasible);
        let msg = r.message.unwrap();
        assert!(msg.contains("no win-win cooperation"), "{msg}");
        assert!(r.qos.unwrap().margin < 0.0);
    }
}

//! Randomized benchmark schemes and the brute-force grid oracle.
//!
//! * RBOT: random unit beam, time (and powers) optimized.
//! * OBRT: random time split from Dirichlet(1, 1, 1, 1), beam (and powers)
//!   optimized.
//! * RBRT: both random. Rate modes only check feasibility: fixed mode uses
//!   `P_S1`, `P_S2`; flexible mode spreads each budget evenly over the
//!   source's active phases. The relay spends all harvested energy. In the
//!   power-minimization mode the powers are still minimized.
//!
//! Draw `k` of a trial is shared across schemes: RBOT and RBRT see the same
//! `k`-th beam, OBRT and RBRT the same `k`-th time split. Every scheme uses
//! the first draw at which RBRT is feasible; the RBRT point is then feasible
//! for RBOT and OBRT too, so both dominate RBRT trial by trial. When no draw
//! within [`MAX_DRAWS`] makes RBRT feasible, each scheme takes its own first
//! feasible draw.

pub mod oracle;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::conic::Tolerances;
use crate::error::Result;
use crate::optimize::{optimize_with, OptStatus};
use crate::problems::{BuildOptions, ProblemKind};
use crate::sysmodel::{check_feasibility, evaluate, PowerMode, ResourceAllocation, SystemParams};

pub use oracle::{brute_force_min_power, brute_force_wsr, GridSpec, OracleResult};

pub const MAX_DRAWS: usize = 20;

/// Feasibility tolerance for accepting a baseline allocation.
pub const FEAS_TOL: f64 = 1e-6;

const BEAM_STREAM: u64 = 11;
const TAU_STREAM: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Rbot,
    Obrt,
    Rbrt,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rbot, Scheme::Obrt, Scheme::Rbrt];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rbot => "rbot",
            Scheme::Obrt => "obrt",
            Scheme::Rbrt => "rbrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineStatus {
    Feasible,
    /// No feasible draw within [`MAX_DRAWS`].
    Infeasible,
    /// Every draw ended in a numerical failure.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub scheme: Scheme,
    pub kind: ProblemKind,
    pub status: BaselineStatus,
    pub allocation: Option<ResourceAllocation>,
    /// WSR for the rate modes, average power for `P3`.
    pub metric: Option<f64>,
    pub attempts_used: usize,
    pub numerical_failures: usize,
}

impl BaselineResult {
    pub fn feasible(&self) -> bool {
        self.status == BaselineStatus::Feasible
    }
}

pub(crate) fn power_mode(kind: ProblemKind) -> PowerMode {
    match kind {
        ProblemKind::P1 => PowerMode::Fixed,
        ProblemKind::P2 => PowerMode::Flexible,
        ProblemKind::P3 => PowerMode::Unconstrained,
    }
}

/// `k`-th unit beam of a trial: normalized complex Gaussian.
pub fn random_beam(seed: u64, n: usize, k: usize) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(BEAM_STREAM);
    let mut w = Vec::new();
    for _ in 0..=k {
        w = (0..n)
            .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
    }
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    w.into_iter().map(|z| z / norm).collect()
}

/// `k`-th time split of a trial: Dirichlet(1, 1, 1, 1) via normalized
/// exponentials.
pub fn random_tau(seed: u64, k: usize) -> [f64; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TAU_STREAM);
    let mut e = [0.0; 4];
    for _ in 0..=k {
        e = [0; 4].map(|_| rng.sample::<f64, _>(Exp1));
    }
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

enum Attempt {
    Feasible(ResourceAllocation, f64),
    Infeasible,
    Failed,
}

fn restricted(
    kind: ProblemKind,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &BuildOptions,
    tol: &Tolerances,
) -> Result<Attempt> {
    let r = optimize_with(kind, params, ch, opts, tol)?;
    Ok(match r.status {
        OptStatus::Optimal => {
            let alloc = r.allocation.expect("optimal result carries an allocation");
            if check_feasibility(params, ch, &alloc, power_mode(kind), FEAS_TOL).feasible {
                Attempt::Feasible(alloc, r.objective.expect("optimal result carries an objective"))
            } else {
                Attempt::Failed
            }
        }
        OptStatus::Infeasible => Attempt::Infeasible,
        OptStatus::Failed => Attempt::Failed,
    })
}

/// Random-beam, random-time allocation for the rate modes.
pub fn rbrt_allocation(params: &SystemParams, ch: &ChannelRealization, kind: ProblemKind, tau: [f64; 4], beam: Vec<Complex64>) -> ResourceAllocation {
    let [t1, t2, t3, t4] = tau;
    let p_phase = match kind {
        ProblemKind::P2 => {
            let s1 = t1 + t2;
            let p = if s1 > 0.0 { params.p_s1 / s1 } else { 0.0 };
            [p, p, if t3 > 0.0 { params.p_s2 / t3 } else { 0.0 }]
        }
        _ => [params.p_s1, params.p_s1, params.p_s2],
    };
    let mut alloc = ResourceAllocation { tau, omega: beam, p_phase, p_relay: 0.0 };
    if t4 > 0.0 {
        let ev = evaluate(params, ch, &alloc);
        alloc.p_relay = (ev.e_r1 + ev.e_r2) / t4;
    }
    alloc
}

fn attempt(
    scheme: Scheme,
    kind: ProblemKind,
    params: &SystemParams,
    ch: &ChannelRealization,
    seed: u64,
    k: usize,
    tol: &Tolerances,
) -> Result<Attempt> {
    let n = ch.antennas();
    Ok(match scheme {
        Scheme::Rbot => {
            let opts = BuildOptions { beam: Some(random_beam(seed, n, k)), ..BuildOptions::default() };
            restricted(kind, params, ch, &opts, tol)?
        }
        Scheme::Obrt => {
            let opts = BuildOptions { tau: Some(random_tau(seed, k)), ..BuildOptions::default() };
            restricted(kind, params, ch, &opts, tol)?
        }
        Scheme::Rbrt if kind == ProblemKind::P3 => {
            let opts = BuildOptions {
                beam: Some(random_beam(seed, n, k)),
                tau: Some(random_tau(seed, k)),
                ..BuildOptions::default()
            };
            restricted(kind, params, ch, &opts, tol)?
        }
        Scheme::Rbrt => {
            let alloc = rbrt_allocation(params, ch, kind, random_tau(seed, k), random_beam(seed, n, k));
            if check_feasibility(params, ch, &alloc, power_mode(kind), FEAS_TOL).feasible {
                let wsr = evaluate(params, ch, &alloc).wsr;
                Attempt::Feasible(alloc, wsr)
            } else {
                Attempt::Infeasible
            }
        }
    })
}

/// First draw at which RBRT is feasible.
fn common_draw(kind: ProblemKind, params: &SystemParams, ch: &ChannelRealization, seed: u64, tol: &Tolerances) -> Result<Option<usize>> {
    for k in 0..MAX_DRAWS {
        if let Attempt::Feasible(..) = attempt(Scheme::Rbrt, kind, params, ch, seed, k, tol)? {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

fn run(
    scheme: Scheme,
    kind: ProblemKind,
    params: &SystemParams,
    ch: &ChannelRealization,
    seed: u64,
    tol: &Tolerances,
) -> Result<BaselineResult> {
    let feasible = |alloc, metric, k: usize, failures| BaselineResult {
        scheme,
        kind,
        status: BaselineStatus::Feasible,
        allocation: Some(alloc),
        metric: Some(metric),
        attempts_used: k + 1,
        numerical_failures: failures,
    };
    let mut failures = 0;
    if scheme != Scheme::Rbrt {
        if let Some(k) = common_draw(kind, params, ch, seed, tol)? {
            match attempt(scheme, kind, params, ch, seed, k, tol)? {
                Attempt::Feasible(alloc, metric) => return Ok(feasible(alloc, metric, k, 0)),
                // the pinned problem holds the RBRT point, so only numerics end here
                Attempt::Infeasible | Attempt::Failed => failures += 1,
            }
        }
    }
    let mut infeasible = 0;
    for k in 0..MAX_DRAWS {
        match attempt(scheme, kind, params, ch, seed, k, tol)? {
            Attempt::Feasible(alloc, metric) => return Ok(feasible(alloc, metric, k, failures)),
            Attempt::Infeasible => infeasible += 1,
            Attempt::Failed => failures += 1,
        }
    }
    Ok(BaselineResult {
        scheme,
        kind,
        status: if infeasible == 0 { BaselineStatus::Failed } else { BaselineStatus::Infeasible },
        allocation: None,
        metric: None,
        attempts_used: MAX_DRAWS,
        numerical_failures: failures,
    })
}

pub fn rbot(params: &SystemParams, ch: &ChannelRealization, kind: ProblemKind, seed: u64, tol: &Tolerances) -> Result<BaselineResult> {
    run(Scheme::Rbot, kind, params, ch, seed, tol)
}

pub fn obrt(params: &SystemParams, ch: &ChannelRealization, kind: ProblemKind, seed: u64, tol: &Tolerances) -> Result<BaselineResult> {
    run(Scheme::Obrt, kind, params, ch, seed, tol)
}

pub fn rbrt(params: &SystemParams, ch: &ChannelRealization, kind: ProblemKind, seed: u64, tol: &Tolerances) -> Result<BaselineResult> {
    run(Scheme::Rbrt, kind, params, ch, seed, tol)
}

pub fn run_scheme(
    scheme: Scheme,
    params: &SystemParams,
    ch: &ChannelRealization,
    kind: ProblemKind,
    seed: u64,
    tol: &Tolerances,
) -> Result<BaselineResult> {
    run(scheme, kind, params, ch, seed, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, Topology};
    use crate::optimize::optimize;

    #[test]
    fn draws_are_unit_and_reproducible() {
        for k in 0..5 {
            let w = random_beam(9, 4, k);
            let norm: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            assert_eq!(w, random_beam(9, 4, k));
            let t = random_tau(9, k);
            assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(t.iter().all(|&x| x >= 0.0));
        }
        assert_ne!(random_beam(9, 4, 0), random_beam(9, 4, 1));
        assert_ne!(random_tau(9, 0), random_tau(10, 0));
    }

    #[test]
    fn single_antenna_rbot_matches_joint() {
        let params = SystemParams { antennas: 1, ..SystemParams::default() };
        let mut checked = 0;
        for seed in 0..6 {
            let ch = sample_channels(&Topology::standard(), 1, seed).unwrap();
            for kind in [ProblemKind::P1, ProblemKind::P2] {
                let joint = optimize(kind, &params, &ch, &Tolerances::default()).unwrap();
                let b = rbot(&params, &ch, kind, seed, &Tolerances::default()).unwrap();
                if let (Some(j), Some(m)) = (joint.objective, b.metric) {
                    assert!((j - m).abs() <= 1e-6 * j.max(1.0), "{kind:?} seed {seed}: {j} vs {m}");
                    checked += 1;
                }
            }
        }
        assert!(checked >= 6);
    }

    #[test]
    fn oracle_time_split_recovers_joint_optimum() {
        let params = SystemParams::default();
        let ch = sample_channels(&Topology::standard(), 4, 3).unwrap();
        for kind in [ProblemKind::P1, ProblemKind::P2] {
            let joint = optimize(kind, &params, &ch, &Tolerances::default()).unwrap();
            let tau = joint.allocation.as_ref().unwrap().tau;
            let opts = BuildOptions { tau: Some(tau), ..BuildOptions::default() };
            let pinned = optimize_with(kind, &params, &ch, &opts, &Tolerances::default()).unwrap();
            let (j, p) = (joint.objective.unwrap(), pinned.objective.unwrap());
            assert!((j - p).abs() <= 1e-6 * j, "{kind:?}: {j} vs {p}");
        }
    }

    #[test]
    fn baselines_never_beat_the_joint_optimum() {
        let params = SystemParams::default();
        for seed in 0..6 {
            let ch = sample_channels(&Topology::standard(), 4, seed).unwrap();
            for kind in [ProblemKind::P1, ProblemKind::P2, ProblemKind::P3] {
                let joint = optimize(kind, &params, &ch, &Tolerances::default()).unwrap();
                let Some(j) = joint.objective else { continue };
                for scheme in Scheme::ALL {
                    let b = run_scheme(scheme, &params, &ch, kind, seed, &Tolerances::default()).unwrap();
                    let Some(m) = b.metric else { continue };
                    let slack = if kind == ProblemKind::P3 { m - j } else { j - m };
                    assert!(slack >= -1e-6, "{scheme:?} {kind:?} seed {seed}: joint {j}, scheme {m}");
                    let alloc = b.allocation.as_ref().unwrap();
                    assert!(check_feasibility(&params, &ch, alloc, power_mode(kind), FEAS_TOL).feasible);
                }
            }
        }
    }

    #[test]
    fn optimized_baselines_dominate_rbrt_per_trial() {
        let params = SystemParams::default();
        let tol = Tolerances::default();
        let mut compared = 0;
        for seed in 0..12 {
            let ch = sample_channels(&Topology::standard(), 4, seed).unwrap();
            for kind in [ProblemKind::P1, ProblemKind::P2, ProblemKind::P3] {
                let r = rbrt(&params, &ch, kind, seed, &tol).unwrap();
                let Some(base) = r.metric else { continue };
                for scheme in [Scheme::Rbot, Scheme::Obrt] {
                    let b = run_scheme(scheme, &params, &ch, kind, seed, &tol).unwrap();
                    assert_eq!(b.attempts_used, r.attempts_used, "{scheme:?} {kind:?} seed {seed}");
                    let m = b.metric.expect("feasible wherever RBRT is");
                    let slack = if kind == ProblemKind::P3 { base - m } else { m - base };
                    assert!(slack >= -1e-6, "{scheme:?} {kind:?} seed {seed}: {m} vs rbrt {base}");
                    compared += 1;
                }
            }
        }
        assert!(compared >= 30, "only {compared} comparisons");
    }
}

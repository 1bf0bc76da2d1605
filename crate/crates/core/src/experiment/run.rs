//! Monte Carlo sweeps and single-instance inspection.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Method, SweepPoint};
use crate::baselines::{run_scheme, BaselineStatus};
use crate::channel::{sample_channels, ChannelRealization};
use crate::error::{Error, Result};
use crate::optimize::{optimize, OptResult, OptStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Infeasible,
    Failed,
}

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub status: TrialStatus,
    pub metric: Option<f64>,
    pub message: Option<String>,
    pub seconds: f64,
}

/// Aggregate of one method at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub coords: Vec<f64>,
    pub method: Method,
    /// Mean over the successful trials; `None` when there are none.
    pub mean: Option<f64>,
    /// Standard error of the mean; `None` with fewer than two successes.
    pub stderr: Option<f64>,
    pub n_ok: usize,
    pub n_infeasible: usize,
    pub n_failed: usize,
    /// Summed solve time of the point's trials. Metadata only.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub config_hash: String,
    pub rows: Vec<ResultRow>,
    /// Ordered by point, trial, then method order of the config.
    pub trials: Vec<TrialRecord>,
}

impl SweepOutput {
    pub fn failures(&self) -> usize {
        self.trials.iter().filter(|t| t.status == TrialStatus::Failed).count()
    }

    pub fn row(&self, point: usize, method: Method) -> Option<&ResultRow> {
        let per_point = self.rows.len() / self.points().max(1);
        self.rows[point * per_point..(point + 1) * per_point].iter().find(|r| r.method == method)
    }

    pub fn points(&self) -> usize {
        self.trials.iter().map(|t| t.point + 1).max().unwrap_or(0)
    }

    /// Metric pairs `(a, b)` of the trials at `point` where both methods
    /// succeeded.
    pub fn paired(&self, point: usize, a: Method, b: Method) -> Vec<(f64, f64)> {
        let pick = |m: Method| {
            self.trials
                .iter()
                .filter(move |t| t.point == point && t.method == m)
                .map(|t| (t.trial, t.metric.filter(|_| t.status == TrialStatus::Ok)))
        };
        pick(a)
            .zip(pick(b))
            .filter_map(|((ta, x), (tb, y))| {
                debug_assert_eq!(ta, tb);
                Some((x?, y?))
            })
            .collect()
    }
}

/// Seed of trial `index`. Every sweep point reuses the same seeds, so points
/// are compared on common channel draws.
pub fn trial_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    cfg.base_seed.wrapping_add(index as u64)
}

type Outcome = (TrialStatus, Option<f64>, Option<String>);

fn run_method(cfg: &ExperimentConfig, point: &SweepPoint, ch: &ChannelRealization, method: Method) -> Outcome {
    let seed = ch.seed;
    let kind = method.kind(cfg.mode);
    match method.baseline() {
        None => match optimize(kind, &point.params, ch, &cfg.tolerances) {
            Ok(r) => match r.status {
                OptStatus::Optimal => (TrialStatus::Ok, r.objective, None),
                OptStatus::Infeasible => (TrialStatus::Infeasible, None, r.message),
                OptStatus::Failed => (TrialStatus::Failed, None, r.message),
            },
            Err(e) => (TrialStatus::Failed, None, Some(e.to_string())),
        },
        Some(scheme) => match run_scheme(scheme, &point.params, ch, kind, seed, &cfg.tolerances) {
            Ok(r) => match r.status {
                BaselineStatus::Feasible => (TrialStatus::Ok, r.metric, None),
                BaselineStatus::Infeasible => (TrialStatus::Infeasible, None, None),
                BaselineStatus::Failed => (TrialStatus::Failed, None, Some("every draw failed numerically".into())),
            },
            Err(e) => (TrialStatus::Failed, None, Some(e.to_string())),
        },
    }
}

fn aggregate(cfg: &ExperimentConfig, point: &SweepPoint, method: Method, recs: &[&TrialRecord]) -> ResultRow {
    let ok: Vec<f64> = recs.iter().filter(|r| r.status == TrialStatus::Ok).filter_map(|r| r.metric).collect();
    let n = ok.len();
    let mean = (n > 0).then(|| ok.iter().sum::<f64>() / n as f64);
    let stderr = mean.filter(|_| n > 1).map(|m| {
        let var = ok.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    let count = |s: TrialStatus| recs.iter().filter(|r| r.status == s).count();
    ResultRow {
        sweep_var: cfg.sweep.variable.name().to_string(),
        sweep_value: point.label.clone(),
        coords: point.coords.clone(),
        method,
        mean,
        stderr,
        n_ok: n,
        n_infeasible: count(TrialStatus::Infeasible),
        n_failed: count(TrialStatus::Failed),
        wall_time_s: recs.iter().map(|r| r.seconds).sum(),
    }
}

/// Runs every (point, trial, method) of `cfg` on the current rayon pool.
///
/// Results are collected in index order, so the output does not depend on
/// the number of worker threads.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let points = cfg.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..cfg.trials).map(move |t| (p, t))).collect();
    let trials: Vec<TrialRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(p, t)| {
            let seed = trial_seed(cfg, t);
            let point = &points[p];
            let ch = sample_channels(&point.topology, point.params.antennas, seed);
            cfg.methods
                .iter()
                .map(|&method| {
                    let start = Instant::now();
                    let (status, metric, message) = match &ch {
                        Ok(ch) => run_method(cfg, point, ch, method),
                        Err(e) => (TrialStatus::Failed, None, Some(e.to_string())),
                    };
                    let seconds = start.elapsed().as_secs_f64();
                    TrialRecord { point: p, trial: t, seed, method, status, metric, message, seconds }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut rows = Vec::with_capacity(points.len() * cfg.methods.len());
    for (p, point) in points.iter().enumerate() {
        for &method in &cfg.methods {
            let recs: Vec<&TrialRecord> = trials.iter().filter(|r| r.point == p && r.method == method).collect();
            rows.push(aggregate(cfg, point, method, &recs));
        }
    }
    Ok(SweepOutput { config_hash: cfg.hash(), rows, trials })
}

/// As [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_threads(cfg: &ExperimentConfig, threads: usize) -> Result<SweepOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_sweep(cfg))
}

/// One joint solve with everything needed to inspect it.
#[derive(Debug, Clone, Serialize)]
pub struct SolveOnce {
    pub experiment: String,
    pub sweep_var: String,
    pub sweep_value: String,
    pub seed: u64,
    pub method: Method,
    pub result: OptResult,
}

/// Solves the joint problem of `method` at sweep point `point` for `seed`.
pub fn solve_once(cfg: &ExperimentConfig, point: usize, seed: u64, method: Method) -> Result<SolveOnce> {
    if method.baseline().is_some() {
        return Err(Error::Config(format!("solve-once runs the joint problem, not {}", method.name())));
    }
    let points = cfg.points()?;
    let p = points
        .get(point)
        .ok_or_else(|| Error::Config(format!("sweep point {point} out of range (0..{})", points.len())))?;
    let ch = sample_channels(&p.topology, p.params.antennas, seed)?;
    let result = optimize(method.kind(cfg.mode), &p.params, &ch, &cfg.tolerances)?;
    Ok(SolveOnce {
        experiment: cfg.name.clone(),
        sweep_var: cfg.sweep.variable.name().to_string(),
        sweep_value: p.label.clone(),
        seed,
        method,
        result,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(" ")
}

impl SolveOnce {
    /// Stable line-oriented rendering: `key: value`, fixed key order.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let r = &self.result;
        let mut s = String::new();
        let _ = writeln!(s, "experiment: {}", self.experiment);
        let _ = writeln!(s, "point: {}={}", self.sweep_var, self.sweep_value);
        let _ = writeln!(s, "seed: {}", self.seed);
        let _ = writeln!(s, "problem: {:?} ({})", r.kind, self.method.name());
        let _ = writeln!(s, "status: {}", serde_json::to_value(r.status).unwrap().as_str().unwrap_or("?"));
        if let Some(m) = &r.message {
            let _ = writeln!(s, "message: {m}");
        }
        if let Some(v) = r.objective {
            let _ = writeln!(s, "objective: {v:.9e}");
        }
        if let Some(v) = r.relaxed_objective {
            let _ = writeln!(s, "relaxed_objective: {v:.9e}");
        }
        if let Some(a) = &r.allocation {
            let _ = writeln!(s, "tau: {}", fmt_vec(&a.tau));
            let w: Vec<String> = a.omega.iter().map(|z| format!("{:.9e}{:+.9e}i", z.re, z.im)).collect();
            let _ = writeln!(s, "omega: {}", w.join(" "));
            let _ = writeln!(s, "powers: {}", fmt_vec(&a.p_phase));
            let _ = writeln!(s, "p_relay: {:.9e}", a.p_relay);
        }
        if let Some(e) = &r.evaluation {
            let _ = writeln!(s, "rates: r_s1={:.9e} r_s2={:.9e} wsr={:.9e}", e.r_s1, e.r_s2, e.wsr);
            let _ = writeln!(s, "harvested: e_r1={:.9e} e_r2={:.9e}", e.e_r1, e.e_r2);
            let _ = writeln!(s, "total_power: {:.9e}", e.total_power);
        }
        if let Some(k) = &r.rank {
            let _ = writeln!(s, "rank: before={} after={} ratio={:.3e}", k.rank_before, k.rank_after, k.eigen_ratio());
            let _ = writeln!(s, "eigenvalues: {}", fmt_vec(&k.eigenvalues));
            let _ = writeln!(s, "extraction: used={} purified={} degenerate={}", k.extraction_used, k.purified, k.degenerate);
            let _ = writeln!(s, "feasibility_residual: {:.3e}", k.feasibility_residual);
        }
        if let Some(i) = &r.solver {
            let _ = writeln!(
                s,
                "solver: status={} iterations={} primal_res={:.3e} dual_res={:.3e} gap={:.3e}",
                i.backend_status, i.iterations, i.primal_residual, i.dual_residual, i.gap_abs
            );
        }
        s
    }
}

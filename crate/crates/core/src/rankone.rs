//! Rank-one recovery of the beamformer from a relaxed optimum.
//!
//! The relaxed matrix (`F` for `P1`, `G` for `P2`/`P3`) is replaced by the
//! solution `U` of an auxiliary trace minimization that pins the phase-1
//! rate and keeps the relay energy constraint satisfied:
//!
//! ```text
//! Q1':  min Tr U  s.t.  P_S1 h_R^H U h_R >= max(0, phi4/eta - tau2 P_S1 c2)
//!                       P_S1 h_D^H U h_D  = N0 tau1 beta
//! Q2':  min Tr U  s.t.  h_R^H U h_R >= max(0, phi4/eta - phi2 c2)
//!                       h_D^H U h_D  = xi
//! Q3':  Q2' with the optimum checked against Tr U = Tr G
//! ```
//!
//! with `c2 = |h_R^H h_D|^2 / ||h_D||^2`. The phase-2 harvest term sits on
//! the right-hand side of the energy constraint so that the relaxed matrix
//! stays feasible for the auxiliary problem. If the interior-point solution
//! of `Q'` is not numerically rank one, a rank-reduction step that keeps
//! every constraint value fixed is applied.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::conic::{self, embed, ConicProgram, HermitianMatrix, LinExpr, Relation, Sense, Tolerances};
use crate::error::{Error, Result};
use crate::problems::{acceptable, outer, quad, ProblemKind, RelaxedSolution, RelaxedSolutionP1, RelaxedSolutionP2P3};
use crate::sysmodel::{
    capacity, check_feasibility, evaluate, Evaluation, Gains, PowerMode, ResourceAllocation, SystemParams,
};

/// Phases shorter than this are treated as absent when dividing energy by
/// time.
pub const TAU_EPS: f64 = 1e-9;

pub const RANK_REL_TOL: f64 = 1e-6;

/// Below this the beam matrix is treated as zero and no beamformer is
/// recovered.
const ZERO_BEAM: f64 = 1e-9;

const TRACE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    pub rel_tol: f64,
    /// Solve the auxiliary problem even when the relaxed matrix is already
    /// numerically rank one.
    pub always_solve: bool,
    pub tolerances: Tolerances,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { rel_tol: RANK_REL_TOL, always_solve: true, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankOneReport {
    /// Eigenvalues of the relaxed matrix, descending.
    pub eigenvalues_before: Vec<f64>,
    pub rank_before: usize,
    /// Eigenvalues of the matrix used for recovery, descending.
    pub eigenvalues: Vec<f64>,
    pub rank_after: usize,
    pub extraction_used: bool,
    /// The rank-reduction step was applied.
    pub purified: bool,
    /// Why the auxiliary solution was not used, if it was not.
    pub note: Option<String>,
    /// Set when no beamformer exists (idle phase 1 or zero beam energy).
    pub degenerate: bool,
    pub omega: Vec<Complex64>,
    pub objective_relaxed: f64,
    pub objective_after: f64,
    /// Largest constraint violation of the recovered allocation.
    pub feasibility_residual: f64,
}

impl RankOneReport {
    /// `lambda2 / lambda1` of the recovery matrix (0 for rank <= 1).
    pub fn eigen_ratio(&self) -> f64 {
        match self.eigenvalues.as_slice() {
            [l1, l2, ..] if *l1 > 0.0 => (l2.max(0.0)) / l1,
            _ => 0.0,
        }
    }
}

/// Recovered physical allocation plus diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recovery {
    pub report: RankOneReport,
    pub allocation: ResourceAllocation,
    pub evaluation: Evaluation,
}

fn check_hermitian(m: &HermitianMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Domain("matrix is not square".into()));
    }
    let asym = (m - m.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if asym > 1e-9 * m.norm().max(1.0) {
        return Err(Error::Domain(format!("matrix is not Hermitian (asymmetry {asym:.2e})")));
    }
    Ok(())
}

/// Eigenvalues (descending) and matching unit eigenvectors as columns.
pub fn eigen_desc(m: &HermitianMatrix) -> (Vec<f64>, HermitianMatrix) {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn rank_of(vals: &[f64], rel_tol: f64) -> usize {
    let lmax = vals.first().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return 0;
    }
    vals.iter().filter(|&&l| l > rel_tol * lmax).count()
}

/// Number of eigenvalues above `rel_tol * lambda_max`.
pub fn numerical_rank(m: &HermitianMatrix, rel_tol: f64) -> Result<usize> {
    check_hermitian(m)?;
    Ok(rank_of(&eigen_desc(m).0, rel_tol))
}

/// Lowers the rank of PSD `u` while keeping `Tr(A_k u)` fixed for every
/// `A_k`, until `rank^2 <= constraints.len()`.
pub fn purify(u: &HermitianMatrix, constraints: &[HermitianMatrix], rel_tol: f64) -> HermitianMatrix {
    let mut u = u.clone();
    loop {
        let (vals, vecs) = eigen_desc(&u);
        let r = rank_of(&vals, rel_tol);
        if r * r <= constraints.len() || r <= 1 {
            return u;
        }
        // V = [sqrt(l_i) v_i], u ~= V V^H
        let v = DMatrix::from_fn(u.nrows(), r, |i, j| vecs[(i, j)] * vals[j].max(0.0).sqrt());
        // rows: functionals Delta -> Tr(V^H A_k V Delta) in the real
        // parameterization of r x r Hermitian Delta
        let k = embed::num_params(r);
        let rows: Vec<Vec<f64>> =
            constraints.iter().map(|a| embed::trace_coefficients(&(v.adjoint() * a * &v))).collect();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for row in &rows {
            let x = DVector::from_column_slice(row);
            gram += &x * x.transpose();
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(gram);
        let idx = (0..k).min_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j])).unwrap();
        let params: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let delta = embed::from_params(r, &params);
        let (dvals, _) = eigen_desc(&delta);
        let lead = dvals.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(0.0);
        if lead == 0.0 {
            return u;
        }
        let shrink = HermitianMatrix::identity(r, r) - delta * Complex64::new(1.0 / lead, 0.0);
        u = &v * shrink * v.adjoint();
        // drop the eliminated direction exactly
        let (vals, vecs) = eigen_desc(&u);
        let keep = rank_of(&vals, rel_tol).min(r - 1);
        u = HermitianMatrix::zeros(u.nrows(), u.ncols());
        for j in 0..keep {
            let col = vecs.column(j);
            u += col * col.adjoint() * Complex64::new(vals[j], 0.0);
        }
    }
}

/// Data of one auxiliary trace minimization.
struct Auxiliary {
    /// `Tr(rate_m U) = rate_rhs`
    rate_m: HermitianMatrix,
    rate_rhs: f64,
    /// `Tr(energy_m U) >= energy_rhs`, dropped when the bound is zero.
    energy_m: HermitianMatrix,
    energy_rhs: f64,
    trace_target: Option<f64>,
}

impl Auxiliary {
    fn constraint_matrices(&self) -> Vec<HermitianMatrix> {
        let n = self.rate_m.nrows();
        vec![HermitianMatrix::identity(n, n), self.rate_m.clone(), self.energy_m.clone()]
    }

    fn solve(&self, tol: &Tolerances) -> Result<HermitianMatrix> {
        let n = self.rate_m.nrows();
        let ident = HermitianMatrix::identity(n, n);
        let mut p = ConicProgram::new();
        let u = p.add_hermitian_psd("U", n)?;
        let tr = LinExpr::zero().plus_trace(u, ident);
        p.add_linear(
            "rate_pin",
            LinExpr::zero().plus_trace(u, self.rate_m.clone()),
            Relation::Equal,
            LinExpr::constant(self.rate_rhs),
        )?;
        if self.energy_rhs > 0.0 {
            p.add_linear(
                "energy",
                LinExpr::zero().plus_trace(u, self.energy_m.clone()),
                Relation::GreaterEq,
                LinExpr::constant(self.energy_rhs),
            )?;
        }
        p.set_objective(Sense::Minimize, tr)?;
        let sol = conic::solve(&p, tol)?;
        if !acceptable(&sol) {
            return Err(Error::Extraction(format!("auxiliary problem ended with {}", sol.backend_status)));
        }
        // The trace target is the minimum of the program above, so it is
        // checked on the optimum rather than imposed (imposing it leaves no
        // interior).
        if let Some(t) = self.trace_target {
            let excess = sol.objective - t;
            if excess > TRACE_TOL * t.max(1.0) {
                return Err(Error::Extraction(format!("auxiliary trace exceeds Tr G* by {excess:.3e}")));
            }
        }
        Ok(sol.matrix(u).clone())
    }
}

fn principal(u: &HermitianMatrix) -> (f64, Vec<Complex64>) {
    let (vals, vecs) = eigen_desc(u);
    (vals[0].max(0.0), vecs.column(0).iter().copied().collect())
}

fn divide(energy: f64, tau: f64) -> f64 {
    if tau >= TAU_EPS {
        energy.max(0.0) / tau
    } else {
        0.0
    }
}

struct Recovered {
    u: HermitianMatrix,
    extraction_used: bool,
    purified: bool,
    note: Option<String>,
}

fn recover_matrix(
    relaxed: &HermitianMatrix,
    aux: impl FnOnce() -> Auxiliary,
    opts: &ExtractOptions,
) -> Result<Recovered> {
    let rank = rank_of(&eigen_desc(relaxed).0, opts.rel_tol);
    if rank <= 1 && !opts.always_solve {
        return Ok(Recovered { u: relaxed.clone(), extraction_used: false, purified: false, note: None });
    }
    let aux = aux();
    // The relaxed matrix is feasible for the auxiliary problem, so when the
    // latter does not solve cleanly the relaxed matrix itself is reduced.
    let (mut u, extraction_used, note) = match aux.solve(&opts.tolerances) {
        Ok(u) => (u, true, None),
        Err(e) => (relaxed.clone(), false, Some(format!("{e}; recovered from the relaxed matrix"))),
    };
    let mut purified = false;
    if rank_of(&eigen_desc(&u).0, opts.rel_tol) > 1 {
        u = purify(&u, &aux.constraint_matrices(), opts.rel_tol);
        purified = true;
    }
    let r = rank_of(&eigen_desc(&u).0, opts.rel_tol);
    if r > 1 {
        return Err(Error::Extraction(format!("recovery matrix has numerical rank {r}")));
    }
    Ok(Recovered { u, extraction_used, purified, note })
}

fn finish(
    params: &SystemParams,
    ch: &ChannelRealization,
    kind: ProblemKind,
    relaxed_m: &HermitianMatrix,
    rec: Recovered,
    degenerate: bool,
    allocation: ResourceAllocation,
    objective_relaxed: f64,
) -> Recovery {
    let mode = match kind {
        ProblemKind::P1 => PowerMode::Fixed,
        ProblemKind::P2 => PowerMode::Flexible,
        ProblemKind::P3 => PowerMode::Unconstrained,
    };
    let evaluation = evaluate(params, ch, &allocation);
    let feas = check_feasibility(params, ch, &allocation, mode, 0.0);
    let objective_after = if kind == ProblemKind::P3 { evaluation.total_power } else { evaluation.wsr };
    let (eigenvalues_before, _) = eigen_desc(relaxed_m);
    let (eigenvalues, _) = eigen_desc(&rec.u);
    let report = RankOneReport {
        rank_before: rank_of(&eigenvalues_before, RANK_REL_TOL),
        eigenvalues_before,
        rank_after: rank_of(&eigenvalues, RANK_REL_TOL),
        eigenvalues,
        extraction_used: rec.extraction_used,
        purified: rec.purified,
        note: rec.note,
        degenerate,
        omega: allocation.omega.clone(),
        objective_relaxed,
        objective_after,
        feasibility_residual: feas.worst().map_or(0.0, |c| c.violation.max(0.0)),
    };
    Recovery { report, allocation, evaluation }
}

fn pin_exponent(r_s1: f64, phase2: f64, tau1: f64) -> f64 {
    (2f64.powf((r_s1 - phase2) / tau1) - 1.0).max(0.0)
}

pub fn extract_p1(
    relaxed: &RelaxedSolutionP1,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &ExtractOptions,
) -> Result<Recovery> {
    let n = ch.antennas();
    let g = Gains::of(ch);
    let [t1, t2, _, t4] = relaxed.tau;
    let ps1 = params.p_s1;
    let degenerate = t1 < TAU_EPS || relaxed.f.trace().re <= ZERO_BEAM;
    let rec = if degenerate {
        Recovered { u: HermitianMatrix::zeros(n, n), extraction_used: false, purified: false, note: None }
    } else {
        recover_matrix(
            &relaxed.f,
            || {
                let beta = pin_exponent(relaxed.r_s1, t2 * capacity(ps1 * g.s1d1_norm_sqr / params.n0), t1);
                Auxiliary {
                    // (P_S1 / N0) h_D^H U h_D = tau1 beta
                    rate_m: outer(&ch.h_s1d1) * Complex64::new(ps1 / params.n0, 0.0),
                    rate_rhs: t1 * beta,
                    energy_m: outer(&ch.h_s1r) * Complex64::new(ps1, 0.0),
                    energy_rhs: (relaxed.phi4 / params.eta - t2 * ps1 * g.s1r_mrt).max(0.0),
                    trace_target: None,
                }
            },
            opts,
        )?
    };
    let omega = if degenerate {
        vec![Complex64::new(0.0, 0.0); n]
    } else {
        let (l1, v1) = principal(&rec.u);
        // Tr(F) <= tau1 bounds the ratio by one; with phase 1 nearly idle
        // both sides sit at solver precision and the ratio can overshoot
        let s = (l1 / t1).min(1.0).sqrt();
        v1.into_iter().map(|z| z * s).collect()
    };
    let allocation = ResourceAllocation {
        tau: relaxed.tau,
        omega,
        p_phase: [ps1, ps1, params.p_s2],
        p_relay: divide(relaxed.phi4, t4),
    };
    Ok(finish(params, ch, ProblemKind::P1, &relaxed.f, rec, degenerate, allocation, relaxed.objective))
}

fn extract_flexible(
    relaxed: &RelaxedSolutionP2P3,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &ExtractOptions,
) -> Result<Recovery> {
    let n = ch.antennas();
    let g = Gains::of(ch);
    let [t1, t2, t3, t4] = relaxed.tau;
    let [phi1, phi2, phi3, phi4] = relaxed.phi;
    let degenerate = t1 < TAU_EPS || phi1 <= ZERO_BEAM || relaxed.g.trace().re <= ZERO_BEAM;
    let rec = if degenerate {
        Recovered { u: HermitianMatrix::zeros(n, n), extraction_used: false, purified: false, note: None }
    } else {
        recover_matrix(
            &relaxed.g,
            || {
                let phase2 = crate::sysmodel::perspective_rate(t2, phi2 * g.s1d1_norm_sqr / params.n0);
                // xi / N0
                let snr = t1 * pin_exponent(relaxed.r_s1, phase2, t1);
                Auxiliary {
                    rate_m: outer(&ch.h_s1d1) * Complex64::new(1.0 / params.n0, 0.0),
                    rate_rhs: snr,
                    energy_m: outer(&ch.h_s1r),
                    energy_rhs: (phi4 / params.eta - phi2 * g.s1r_mrt).max(0.0),
                    trace_target: (relaxed.kind == ProblemKind::P3).then(|| relaxed.g.trace().re),
                }
            },
            opts,
        )?
    };
    let omega = if degenerate {
        vec![Complex64::new(0.0, 0.0); n]
    } else {
        let (l1, v1) = principal(&rec.u);
        let s = (l1 / phi1).min(1.0).sqrt();
        v1.into_iter().map(|z| z * s).collect()
    };
    let allocation = ResourceAllocation {
        tau: relaxed.tau,
        omega,
        p_phase: [if degenerate { 0.0 } else { divide(phi1, t1) }, divide(phi2, t2), divide(phi3, t3)],
        p_relay: divide(phi4, t4),
    };
    Ok(finish(params, ch, relaxed.kind, &relaxed.g, rec, degenerate, allocation, relaxed.objective))
}

pub fn extract_p2(
    relaxed: &RelaxedSolutionP2P3,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &ExtractOptions,
) -> Result<Recovery> {
    if relaxed.kind != ProblemKind::P2 {
        return Err(Error::Domain("extract_p2 expects a P2 solution".into()));
    }
    extract_flexible(relaxed, params, ch, opts)
}

pub fn extract_p3(
    relaxed: &RelaxedSolutionP2P3,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &ExtractOptions,
) -> Result<Recovery> {
    if relaxed.kind != ProblemKind::P3 {
        return Err(Error::Domain("extract_p3 expects a P3 solution".into()));
    }
    extract_flexible(relaxed, params, ch, opts)
}

pub fn extract(
    relaxed: &RelaxedSolution,
    params: &SystemParams,
    ch: &ChannelRealization,
    opts: &ExtractOptions,
) -> Result<Recovery> {
    match relaxed {
        RelaxedSolution::P1(s) => extract_p1(s, params, ch, opts),
        RelaxedSolution::P2P3(s) => extract_flexible(s, params, ch, opts),
    }
}

/// `h^H M h` for each given vector, used by tests and diagnostics.
pub fn quadratic_forms(m: &HermitianMatrix, hs: &[&[Complex64]]) -> Vec<f64> {
    hs.iter().map(|h| quad(m, h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rank_examples() {
        let v = [c(0.6, 0.0), c(0.0, 0.8)];
        assert_eq!(numerical_rank(&outer(&v), 1e-6).unwrap(), 1);
        assert_eq!(numerical_rank(&HermitianMatrix::identity(3, 3), 1e-6).unwrap(), 3);
        let v3 = [c(1.0, 0.0), c(0.5, -0.5), c(0.0, 2.0)];
        let m = outer(&v3) + HermitianMatrix::identity(3, 3) * c(1e-9, 0.0);
        assert_eq!(numerical_rank(&m, 1e-6).unwrap(), 1);
        assert_eq!(numerical_rank(&HermitianMatrix::zeros(2, 2), 1e-6).unwrap(), 0);
    }

    #[test]
    fn rank_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(numerical_rank(&m, 1e-6).is_err());
    }

    fn random_vec(seed: &[f64]) -> Vec<Complex64> {
        seed.chunks(2).map(|p| c(p[0], p[1])).collect()
    }

    use crate::channel::{sample_channels, Topology};
    use crate::problems::{solve_relaxed, BuildOptions, RelaxedOutcome};

    fn relaxed(kind: ProblemKind, params: &SystemParams, seed: u64, opts: &BuildOptions) -> (RelaxedSolution, ChannelRealization) {
        let ch = sample_channels(&Topology::standard(), params.antennas, seed).unwrap();
        match solve_relaxed(kind, params, &ch, opts, &Tolerances::default()).unwrap() {
            RelaxedOutcome::Optimal { solution, .. } => (solution, ch),
            other => panic!("{kind:?} seed {seed}: {other:?}"),
        }
    }

    fn with_matrix(s: &RelaxedSolution, m: HermitianMatrix) -> RelaxedSolution {
        let mut s = s.clone();
        match &mut s {
            RelaxedSolution::P1(p) => p.f = m,
            RelaxedSolution::P2P3(p) => p.g = m,
        }
        s
    }

    #[test]
    fn recovery_is_rank_one_and_objective_preserving() {
        let params = SystemParams::default();
        for kind in [ProblemKind::P1, ProblemKind::P2, ProblemKind::P3] {
            let mut done = 0;
            for seed in 0..12 {
                let ch = sample_channels(&Topology::standard(), 4, seed).unwrap();
                let Some(s) = solve_relaxed(kind, &params, &ch, &BuildOptions::default(), &Tolerances::default())
                    .unwrap()
                    .solution()
                    .cloned()
                else {
                    continue;
                };
                let r = extract(&s, &params, &ch, &ExtractOptions::default()).unwrap();
                assert_eq!(r.report.rank_after, 1, "{kind:?} seed {seed}");
                assert!(r.report.eigen_ratio() <= 1e-6);
                let rel = (r.report.objective_after - s.objective()).abs() / s.objective().abs();
                assert!(rel <= 1e-6, "{kind:?} seed {seed}: relative change {rel:.2e}");
                assert!(r.report.feasibility_residual <= 1e-6);
                assert!(r.report.extraction_used && !r.report.degenerate);
                done += 1;
            }
            assert!(done >= 8, "{kind:?}: only {done} feasible seeds");
        }
    }

    #[test]
    fn extraction_is_idempotent() {
        let params = SystemParams::default();
        for kind in [ProblemKind::P1, ProblemKind::P2, ProblemKind::P3] {
            let (s, ch) = relaxed(kind, &params, 3, &BuildOptions::default());
            let first = extract(&s, &params, &ch, &ExtractOptions::default()).unwrap();
            // feed the recovered rank-one matrix back in
            let a = &first.allocation;
            let scale = match kind {
                ProblemKind::P1 => a.tau[0],
                _ => a.tau[0] * a.p_phase[0],
            };
            let m = outer(&a.omega) * Complex64::new(scale, 0.0);
            let again = with_matrix(&s, m);
            for always_solve in [false, true] {
                let opts = ExtractOptions { always_solve, ..ExtractOptions::default() };
                let second = extract(&again, &params, &ch, &opts).unwrap();
                let diff = (second.report.objective_after - first.report.objective_after).abs();
                assert!(diff <= 1e-8, "{kind:?} always_solve={always_solve}: {diff:.2e}");
                assert_eq!(second.report.extraction_used, always_solve);
            }
        }
    }

    #[test]
    fn idle_first_phase_is_flagged() {
        let params = SystemParams::default();
        let opts = BuildOptions { tau: Some([0.0, 0.4, 0.3, 0.3]), ..BuildOptions::default() };
        let (s, ch) = relaxed(ProblemKind::P1, &params, 2, &opts);
        let r = extract(&s, &params, &ch, &ExtractOptions::default()).unwrap();
        assert!(r.report.degenerate && !r.report.extraction_used);
        assert!(r.allocation.omega.iter().all(|z| z.norm() == 0.0));
        assert!(r.report.feasibility_residual <= 1e-6);
    }

    #[test]
    fn zero_targets_give_trivial_power_solution() {
        let params = SystemParams { r_s1: 0.0, r_s2: 0.0, ..SystemParams::default() };
        let (s, ch) = relaxed(ProblemKind::P3, &params, 5, &BuildOptions::default());
        let r = extract(&s, &params, &ch, &ExtractOptions::default()).unwrap();
        assert!(r.report.degenerate);
        assert!(r.evaluation.total_power <= 1e-9);
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let params = SystemParams::default();
        let (s, ch) = relaxed(ProblemKind::P2, &params, 3, &BuildOptions::default());
        let RelaxedSolution::P2P3(p) = s else { unreachable!() };
        assert!(extract_p3(&p, &params, &ch, &ExtractOptions::default()).is_err());
        assert!(extract_p2(&p, &params, &ch, &ExtractOptions::default()).is_ok());
    }

    proptest! {
        #[test]
        fn purification_keeps_constraint_values(
            a in proptest::collection::vec(-1.0f64..1.0, 8),
            b in proptest::collection::vec(-1.0f64..1.0, 8),
            w in proptest::collection::vec(-1.0f64..1.0, 24),
        ) {
            let a = random_vec(&a);
            let b = random_vec(&b);
            // rank-3 PSD start point in 4 x 4
            let mut u = HermitianMatrix::zeros(4, 4);
            for k in 0..3 {
                u += outer(&random_vec(&w[8 * k..8 * k + 8]));
            }
            prop_assume!(rank_of(&eigen_desc(&u).0, 1e-6) == 3);
            let ms = vec![HermitianMatrix::identity(4, 4), outer(&a), outer(&b)];
            let before: Vec<f64> = ms.iter().map(|m| embed::trace_product(m, &u)).collect();
            let out = purify(&u, &ms, 1e-9);
            let after: Vec<f64> = ms.iter().map(|m| embed::trace_product(m, &out)).collect();
            prop_assert_eq!(rank_of(&eigen_desc(&out).0, 1e-9), 1);
            for (x, y) in before.iter().zip(&after) {
                prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{} vs {}", x, y);
            }
            prop_assert!(eigen_desc(&out).0.iter().all(|&l| l >= -1e-10));
        }
    }
}

//! Lowering to Clarabel's standard form
//! `min q'x  s.t.  A x + s = b,  s in K`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::embed;
use super::{
    Constraint, ConicProgram, ConicSolution, LinExpr, Relation, Sense, SolveStatus, Tolerances,
};
use crate::error::{Error, Result};

/// Row block under construction: triplets plus right-hand side.
#[derive(Default)]
struct Rows {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    fn len(&self) -> usize {
        self.b.len()
    }

    /// Appends the row `s = b - a'x`.
    fn push(&mut self, a: &[(usize, f64)], b: f64) {
        let r = self.b.len();
        for &(c, v) in a {
            if v != 0.0 {
                self.rows.push(r);
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.b.push(b);
    }
}

struct Layout {
    herm_offset: Vec<usize>,
    num_cols: usize,
}

impl Layout {
    fn of(prog: &ConicProgram) -> Self {
        let mut off = prog.scalars.len();
        let mut herm_offset = Vec::with_capacity(prog.herms.len());
        for h in &prog.herms {
            herm_offset.push(off);
            off += embed::num_params(h.dim);
        }
        Layout { herm_offset, num_cols: off }
    }

    /// Sparse coefficients and constant of `e`.
    fn lower(&self, e: &LinExpr) -> (Vec<(usize, f64)>, f64) {
        let mut dense = std::collections::BTreeMap::new();
        for &(v, c) in &e.scalars {
            *dense.entry(v.0).or_insert(0.0) += c;
        }
        for (x, a) in &e.traces {
            let off = self.herm_offset[x.0];
            for (k, w) in embed::trace_coefficients(a).into_iter().enumerate() {
                if w != 0.0 {
                    *dense.entry(off + k).or_insert(0.0) += w;
                }
            }
        }
        (dense.into_iter().collect(), e.constant)
    }
}

fn negated(a: &[(usize, f64)]) -> Vec<(usize, f64)> {
    a.iter().map(|&(c, v)| (c, -v)).collect()
}

/// Solves `prog`. Never mutates the program; numerical trouble is reported
/// through [`SolveStatus::NumericalFailure`].
pub fn solve(prog: &ConicProgram, tol: &Tolerances) -> Result<ConicSolution> {
    let layout = Layout::of(prog);
    let mut zero = Rows::default();
    let mut nonneg = Rows::default();
    let mut exp = Rows::default();
    let mut psd_blocks: Vec<(usize, Rows)> = Vec::new();

    for (i, d) in prog.scalars.iter().enumerate() {
        match (d.lower, d.upper) {
            (Some(l), Some(u)) if l == u => zero.push(&[(i, 1.0)], l),
            (l, u) => {
                if let Some(l) = l {
                    nonneg.push(&[(i, -1.0)], -l);
                }
                if let Some(u) = u {
                    nonneg.push(&[(i, 1.0)], u);
                }
                if let (Some(l), Some(u)) = (l, u) {
                    if l > u {
                        return Err(Error::Program(format!("{}: empty bounds [{l}, {u}]", d.name)));
                    }
                }
            }
        }
    }

    for c in &prog.constraints {
        match c {
            Constraint::Linear(lc) => {
                let (a, k) = layout.lower(&lc.expr);
                match lc.relation {
                    // a'x + k = 0
                    Relation::Equal => zero.push(&a, -k),
                    // s = a'x + k >= 0
                    Relation::GreaterEq => nonneg.push(&negated(&a), k),
                    // s = -(a'x + k) >= 0
                    Relation::LessEq => nonneg.push(&a, -k),
                }
            }
            Constraint::PerspectiveLog(p) => {
                // (t ln2, tau, tau + x) in K_exp  <=>  tau * exp(t ln2 / tau) <= tau + x
                let (ax, kx) = layout.lower(&p.x);
                exp.push(&[(p.t.0, -std::f64::consts::LN_2)], 0.0);
                exp.push(&[(p.tau.0, -1.0)], 0.0);
                let mut third = negated(&ax);
                third.push((p.tau.0, -1.0));
                exp.push(&third, kx);
            }
        }
    }

    for (h, decl) in prog.herms.iter().enumerate() {
        let off = layout.herm_offset[h];
        if decl.dim == 1 {
            nonneg.push(&[(off, -1.0)], 0.0);
            continue;
        }
        let mut rows = Rows::default();
        for entry in embed::svec_map(decl.dim) {
            match entry {
                Some((k, c)) => rows.push(&[(off + k, -c)], 0.0),
                None => rows.push(&[], 0.0),
            }
        }
        psd_blocks.push((2 * decl.dim, rows));
    }

    // stack the blocks
    let mut cones = Vec::new();
    let (mut ri, mut ci, mut vi, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let stack = |blk: &Rows, ri: &mut Vec<usize>, ci: &mut Vec<usize>, vi: &mut Vec<f64>, b: &mut Vec<f64>| {
        let base = b.len();
        ri.extend(blk.rows.iter().map(|r| r + base));
        ci.extend_from_slice(&blk.cols);
        vi.extend_from_slice(&blk.vals);
        b.extend_from_slice(&blk.b);
    };
    if zero.len() > 0 {
        stack(&zero, &mut ri, &mut ci, &mut vi, &mut b);
        cones.push(SupportedConeT::ZeroConeT(zero.len()));
    }
    if nonneg.len() > 0 {
        stack(&nonneg, &mut ri, &mut ci, &mut vi, &mut b);
        cones.push(SupportedConeT::NonnegativeConeT(nonneg.len()));
    }
    if exp.len() > 0 {
        stack(&exp, &mut ri, &mut ci, &mut vi, &mut b);
        for _ in 0..exp.len() / 3 {
            cones.push(SupportedConeT::ExponentialConeT());
        }
    }
    for (dim, rows) in &psd_blocks {
        stack(rows, &mut ri, &mut ci, &mut vi, &mut b);
        cones.push(SupportedConeT::PSDTriangleConeT(*dim));
    }

    let n = layout.num_cols;
    let m = b.len();
    let a_mat = CscMatrix::new_from_triplets(m, n, ri, ci, vi);
    let p_mat = CscMatrix::zeros((n, n));
    let (obj_a, _) = layout.lower(&prog.objective);
    let sign = match prog.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let base_scale = tol.objective_scale;
    if !(base_scale > 0.0) || !base_scale.is_finite() {
        return Err(Error::Program(format!("objective scale must be positive, got {base_scale}")));
    }
    let settings = DefaultSettings {
        verbose: false,
        max_iter: tol.max_iter,
        tol_feas: tol.feasibility,
        tol_gap_rel: tol.gap_rel,
        ..DefaultSettings::default()
    };
    let run = |settings: &DefaultSettings<f64>, xs: f64| -> Result<clarabel::solver::DefaultSolution<f64>> {
        let mut q = vec![0.0; n];
        for &(c, v) in &obj_a {
            q[c] = sign * v * xs;
        }
        let settings = DefaultSettings { tol_gap_abs: tol.gap_abs * xs, ..settings.clone() };
        let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        Ok(solver.solution)
    };
    let xs = base_scale;
    let mut sol = run(&settings, xs)?;
    // Stalls (as opposed to reduced-accuracy stops or certificates) are
    // retried once with shorter steps, which keeps iterates further from
    // the cone boundaries.
    if matches!(
        sol.status,
        SolverStatus::InsufficientProgress | SolverStatus::NumericalError | SolverStatus::MaxIterations
    ) {
        let retry = run(&DefaultSettings { max_step_fraction: 0.9, ..settings.clone() }, xs)?;
        if retry.status != sol.status {
            sol = retry;
        }
    }
    let sol = &sol;

    let status = match sol.status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        _ => SolveStatus::NumericalFailure,
    };

    let x = &sol.x;
    let scalar_values = x[..prog.scalars.len()].to_vec();
    let herm_values = prog
        .herms
        .iter()
        .enumerate()
        .map(|(h, d)| {
            let off = layout.herm_offset[h];
            embed::from_params(d.dim, &x[off..off + embed::num_params(d.dim)])
        })
        .collect();
    let objective = {
        let (a, k) = layout.lower(&prog.objective);
        a.iter().map(|&(c, v)| v * x[c]).sum::<f64>() + k
    };
    let dual_norm = sol.z.iter().fold(0.0f64, |acc, z| acc.max(z.abs()));

    Ok(ConicSolution {
        status,
        backend_status: format!("{:?}", sol.status),
        reduced_accuracy: sol.status == SolverStatus::AlmostSolved,
        scalar_values,
        herm_values,
        objective,
        reported_objective: sign * sol.obj_val / xs + prog.objective.constant,
        primal_residual: sol.r_prim,
        dual_residual: sol.r_dual,
        gap_abs: (sol.obj_val - sol.obj_val_dual).abs() / xs,
        iterations: sol.iterations,
        dual_norm,
    })
}

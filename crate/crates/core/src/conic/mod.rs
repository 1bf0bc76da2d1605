//! A small cone-program representation: bounded scalar variables, complex
//! Hermitian PSD matrix variables, real-linear constraints and hypographs of
//! `tau * log2(1 + x / tau)`.
//!
//! Programs are lowered to a real conic form (zero, nonnegative,
//! exponential and PSD-triangle cones) and solved with an interior-point
//! method. Hermitian variables are embedded as `[Re X, -Im X; Im X, Re X]`,
//! which is PSD iff `X` is.

mod backend;
mod dump;
pub(crate) mod embed;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use backend::solve;
pub use dump::{dump, DUMP_VERSION};

pub type HermitianMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarVar(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HermVar(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConstraintId(pub(crate) usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    LessEq,
    Equal,
    GreaterEq,
}

/// `constant + sum(c_i * x_i) + sum(Tr(A_k X_k))` with Hermitian `A_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub(crate) constant: f64,
    pub(crate) scalars: Vec<(ScalarVar, f64)>,
    pub(crate) traces: Vec<(HermVar, HermitianMatrix)>,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr { constant: c, ..LinExpr::default() }
    }

    pub fn var(v: ScalarVar) -> Self {
        LinExpr::zero().plus(v, 1.0)
    }

    /// Adds `coef * v`.
    pub fn plus(mut self, v: ScalarVar, coef: f64) -> Self {
        self.scalars.push((v, coef));
        self
    }

    /// Adds `Tr(a * x)`; `a` must be Hermitian.
    pub fn plus_trace(mut self, x: HermVar, a: HermitianMatrix) -> Self {
        self.traces.push((x, a));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.constant *= k;
        for (_, c) in &mut self.scalars {
            *c *= k;
        }
        for (_, a) in &mut self.traces {
            *a *= Complex64::new(k, 0.0);
        }
        self
    }

    pub fn add(mut self, other: LinExpr) -> Self {
        self.constant += other.constant;
        self.scalars.extend(other.scalars);
        self.traces.extend(other.traces);
        self
    }

    pub fn get_constant(&self) -> f64 {
        self.constant
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ScalarDecl {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct HermDecl {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct LinearConstraint {
    pub name: String,
    pub expr: LinExpr,
    pub relation: Relation,
}

#[derive(Debug, Clone)]
pub(crate) struct PerspectiveLog {
    pub name: String,
    pub t: ScalarVar,
    pub tau: ScalarVar,
    pub x: LinExpr,
}

#[derive(Debug, Clone)]
pub(crate) enum Constraint {
    Linear(LinearConstraint),
    PerspectiveLog(PerspectiveLog),
}

/// A convex program over scalar and Hermitian PSD variables.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub(crate) scalars: Vec<ScalarDecl>,
    pub(crate) herms: Vec<HermDecl>,
    pub(crate) constraints: Vec<Constraint>,
    pub(crate) objective: LinExpr,
    pub(crate) sense: Sense,
}

impl Default for ConicProgram {
    fn default() -> Self {
        ConicProgram::new()
    }
}

fn is_hermitian(a: &HermitianMatrix, tol: f64) -> bool {
    a.is_square() && (a - a.adjoint()).iter().all(|z| z.norm() <= tol * (1.0 + a.norm()))
}

fn is_psd(a: &HermitianMatrix) -> bool {
    let scale = a.norm().max(f64::MIN_POSITIVE);
    let eig = nalgebra::linalg::SymmetricEigen::new(a.clone());
    eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale)
}

impl ConicProgram {
    pub fn new() -> Self {
        ConicProgram {
            scalars: Vec::new(),
            herms: Vec::new(),
            constraints: Vec::new(),
            objective: LinExpr::zero(),
            sense: Sense::Minimize,
        }
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, lower: Option<f64>, upper: Option<f64>) -> ScalarVar {
        self.scalars.push(ScalarDecl { name: name.into(), lower, upper });
        ScalarVar(self.scalars.len() - 1)
    }

    pub fn add_nonneg(&mut self, name: impl Into<String>) -> ScalarVar {
        self.add_scalar(name, Some(0.0), None)
    }

    pub fn add_free(&mut self, name: impl Into<String>) -> ScalarVar {
        self.add_scalar(name, None, None)
    }

    /// Declares a `dim x dim` Hermitian matrix variable constrained PSD.
    pub fn add_hermitian_psd(&mut self, name: impl Into<String>, dim: usize) -> Result<HermVar> {
        if dim == 0 {
            return Err(Error::Program("Hermitian variable dimension must be at least 1".into()));
        }
        self.herms.push(HermDecl { name: name.into(), dim });
        Ok(HermVar(self.herms.len() - 1))
    }

    /// Tightens the bounds of an existing scalar (e.g. to pin it to a value).
    pub fn set_bounds(&mut self, v: ScalarVar, lower: Option<f64>, upper: Option<f64>) {
        let d = &mut self.scalars[v.0];
        d.lower = lower;
        d.upper = upper;
    }

    pub fn fix(&mut self, v: ScalarVar, value: f64) {
        self.set_bounds(v, Some(value), Some(value));
    }

    pub fn herm_dim(&self, x: HermVar) -> usize {
        self.herms[x.0].dim
    }

    pub fn num_scalars(&self) -> usize {
        self.scalars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinExpr) -> Result<()> {
        self.check_expr(&expr)?;
        self.sense = sense;
        self.objective = expr;
        Ok(())
    }

    /// `lhs (<=|=|>=) rhs`.
    pub fn add_linear(
        &mut self,
        name: impl Into<String>,
        lhs: LinExpr,
        relation: Relation,
        rhs: LinExpr,
    ) -> Result<ConstraintId> {
        let expr = lhs.add(rhs.scaled(-1.0));
        self.check_expr(&expr)?;
        self.constraints.push(Constraint::Linear(LinearConstraint { name: name.into(), expr, relation }));
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// `t <= tau * log2(1 + x / tau)`, with the value closed to 0 at
    /// `tau = 0`. Both `tau` and `x` must be provably nonnegative from the
    /// declared bounds and PSD structure.
    pub fn add_perspective_log_hypograph(
        &mut self,
        name: impl Into<String>,
        t: ScalarVar,
        tau: ScalarVar,
        x: LinExpr,
    ) -> Result<ConstraintId> {
        let name = name.into();
        self.check_scalar(t)?;
        self.check_scalar(tau)?;
        self.check_expr(&x)?;
        if !self.scalar_nonneg(tau) {
            return Err(Error::Program(format!("{name}: time variable must be constrained nonnegative")));
        }
        if !self.expr_nonneg(&x) {
            return Err(Error::Program(format!("{name}: SNR expression must be provably nonnegative")));
        }
        self.constraints.push(Constraint::PerspectiveLog(PerspectiveLog { name, t, tau, x }));
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    fn check_scalar(&self, v: ScalarVar) -> Result<()> {
        if v.0 >= self.scalars.len() {
            return Err(Error::Program(format!("undeclared scalar variable #{}", v.0)));
        }
        Ok(())
    }

    fn check_expr(&self, e: &LinExpr) -> Result<()> {
        if !e.constant.is_finite() {
            return Err(Error::Program("non-finite constant".into()));
        }
        for &(v, c) in &e.scalars {
            self.check_scalar(v)?;
            if !c.is_finite() {
                return Err(Error::Program("non-finite coefficient".into()));
            }
        }
        for (x, a) in &e.traces {
            let Some(decl) = self.herms.get(x.0) else {
                return Err(Error::Program(format!("undeclared matrix variable #{}", x.0)));
            };
            if a.nrows() != decl.dim || a.ncols() != decl.dim {
                return Err(Error::Program(format!(
                    "coefficient for {} is {}x{}, expected {}x{}",
                    decl.name,
                    a.nrows(),
                    a.ncols(),
                    decl.dim,
                    decl.dim
                )));
            }
            if !is_hermitian(a, 1e-12) {
                return Err(Error::Program(format!("coefficient for {} is not Hermitian", decl.name)));
            }
        }
        Ok(())
    }

    fn scalar_nonneg(&self, v: ScalarVar) -> bool {
        matches!(self.scalars[v.0].lower, Some(l) if l >= 0.0)
    }

    fn expr_nonneg(&self, e: &LinExpr) -> bool {
        e.constant >= 0.0
            && e.scalars.iter().all(|&(v, c)| c == 0.0 || (c > 0.0 && self.scalar_nonneg(v)))
            && e.traces.iter().all(|(_, a)| is_psd(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

/// Stopping tolerances passed to the interior-point backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub feasibility: f64,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub max_iter: u32,
    /// Factor applied to the objective vector handed to the backend. The
    /// absolute gap tolerance is scaled with it, so it keeps its meaning in
    /// the program's own units; only the backend's residual normalization
    /// changes.
    pub objective_scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { feasibility: 1e-8, gap_abs: 1e-9, gap_rel: 1e-9, max_iter: 200, objective_scale: 1.0 }
    }
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Backend status string, kept for diagnostics.
    pub backend_status: String,
    pub(crate) scalar_values: Vec<f64>,
    pub(crate) herm_values: Vec<HermitianMatrix>,
    /// Objective in the program's own sense, recomputed from the primal values.
    pub objective: f64,
    /// The backend stopped at its reduced-accuracy tolerances; values are
    /// populated but the status is `NumericalFailure`.
    pub reduced_accuracy: bool,
    /// Objective as reported by the backend.
    pub reported_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap_abs: f64,
    pub iterations: u32,
    /// Infinity norm of the dual vector; for infeasible programs this is the
    /// size of the Farkas certificate.
    pub dual_norm: f64,
}

impl ConicSolution {
    pub fn value(&self, v: ScalarVar) -> f64 {
        self.scalar_values[v.0]
    }

    pub fn matrix(&self, x: HermVar) -> &HermitianMatrix {
        &self.herm_values[x.0]
    }

    /// Values of all scalar variables in declaration order.
    pub fn scalar_values(&self) -> &[f64] {
        &self.scalar_values
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        let mut acc = e.constant;
        for &(v, c) in &e.scalars {
            acc += c * self.scalar_values[v.0];
        }
        for (x, a) in &e.traces {
            acc += embed::trace_product(a, &self.herm_values[x.0]);
        }
        acc
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[cfg(test)]
mod tests;

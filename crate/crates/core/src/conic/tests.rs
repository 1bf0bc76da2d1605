use super::*;
use approx::assert_relative_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn outer(h: &[Complex64]) -> HermitianMatrix {
    let n = h.len();
    DMatrix::from_fn(n, n, |i, j| h[i] * h[j].conj())
}

fn identity(n: usize) -> HermitianMatrix {
    DMatrix::identity(n, n)
}

/// max t  s.t.  t <= tau log2(1 + x / tau) with tau and x pinned.
fn max_perspective(tau: f64, x: f64) -> ConicSolution {
    let mut p = ConicProgram::new();
    let t = p.add_free("t");
    let tv = p.add_nonneg("tau");
    let xv = p.add_nonneg("x");
    p.fix(tv, tau);
    p.fix(xv, x);
    p.add_perspective_log_hypograph("rate", t, tv, LinExpr::var(xv)).unwrap();
    p.set_objective(Sense::Maximize, LinExpr::var(t)).unwrap();
    solve(&p, &Tolerances::default()).unwrap()
}

#[test]
fn perspective_unit_examples() {
    let s = max_perspective(1.0, 1.0);
    assert!(s.is_optimal(), "{}", s.backend_status);
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-7);

    let s = max_perspective(0.5, 1.5);
    assert!(s.is_optimal());
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-7);

    let s = max_perspective(0.0, 5.0);
    assert!(s.is_optimal(), "{}", s.backend_status);
    assert!(s.objective.abs() <= 1e-7, "closure at tau = 0 gave {}", s.objective);
}

#[test]
fn perspective_requires_signed_arguments() {
    let mut p = ConicProgram::new();
    let t = p.add_free("t");
    let free_tau = p.add_free("tau");
    let x = p.add_nonneg("x");
    assert!(p.add_perspective_log_hypograph("a", t, free_tau, LinExpr::var(x)).is_err());

    let tau = p.add_nonneg("tau2");
    let free_x = p.add_free("xf");
    assert!(p.add_perspective_log_hypograph("b", t, tau, LinExpr::var(free_x)).is_err());
    assert!(p.add_perspective_log_hypograph("c", t, tau, LinExpr::var(x).scaled(-1.0)).is_err());

    // Tr(A X) with indefinite A is not provably nonnegative
    let m = p.add_hermitian_psd("X", 2).unwrap();
    let indefinite = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-1.0, 0.0)]));
    assert!(p.add_perspective_log_hypograph("d", t, tau, LinExpr::zero().plus_trace(m, indefinite)).is_err());
    let psd = outer(&[c(1.0, 0.0), c(0.0, 1.0)]);
    assert!(p.add_perspective_log_hypograph("e", t, tau, LinExpr::zero().plus_trace(m, psd)).is_ok());
}

#[test]
fn hermitian_dimension_checks() {
    let mut p = ConicProgram::new();
    assert!(p.add_hermitian_psd("X", 0).is_err());
    let x = p.add_hermitian_psd("X", 2).unwrap();
    let wrong = identity(3);
    assert!(p.set_objective(Sense::Minimize, LinExpr::zero().plus_trace(x, wrong)).is_err());
    let not_herm = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    assert!(p.set_objective(Sense::Minimize, LinExpr::zero().plus_trace(x, not_herm)).is_err());
}

#[test]
fn one_by_one_hermitian_is_nonnegative_scalar() {
    let mut p = ConicProgram::new();
    let x = p.add_hermitian_psd("X", 1).unwrap();
    p.set_objective(Sense::Minimize, LinExpr::zero().plus_trace(x, identity(1))).unwrap();
    let s = solve(&p, &Tolerances::default()).unwrap();
    assert!(s.is_optimal());
    assert!(s.matrix(x)[(0, 0)].re >= -1e-9);
    assert!(s.objective.abs() < 1e-7);
}

#[test]
fn trace_budget() {
    let mut p = ConicProgram::new();
    let x = p.add_hermitian_psd("X", 2).unwrap();
    let tr = LinExpr::zero().plus_trace(x, identity(2));
    p.add_linear("budget", tr.clone(), Relation::LessEq, LinExpr::constant(1.0)).unwrap();
    p.set_objective(Sense::Maximize, tr).unwrap();
    let s = solve(&p, &Tolerances::default()).unwrap();
    assert!(s.is_optimal());
    assert_relative_eq!(s.objective, 1.0, epsilon = 1e-7);
}

#[test]
fn single_constraint_trace_minimization() {
    // min Tr(X) s.t. h^H X h >= 1 has the closed form X = h h^H / ||h||^4.
    for h in [vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.3, -0.4), c(0.0, 1.2), c(-0.5, 0.1)]] {
        let n = h.len();
        let norm2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let mut p = ConicProgram::new();
        let x = p.add_hermitian_psd("X", n).unwrap();
        p.add_linear(
            "gain",
            LinExpr::zero().plus_trace(x, outer(&h)),
            Relation::GreaterEq,
            LinExpr::constant(1.0),
        )
        .unwrap();
        p.set_objective(Sense::Minimize, LinExpr::zero().plus_trace(x, identity(n))).unwrap();
        let s = solve(&p, &Tolerances::default()).unwrap();
        assert!(s.is_optimal());
        assert_relative_eq!(s.objective, 1.0 / norm2, max_relative = 1e-7);
        let expected = outer(&h) / c(norm2 * norm2, 0.0);
        let err = (s.matrix(x) - expected).norm();
        assert!(err < 1e-6, "matrix error {err}");
    }
}

#[test]
fn feasibility_over_simplex() {
    let mut p = ConicProgram::new();
    let taus: Vec<_> = (0..4).map(|i| p.add_nonneg(format!("tau{i}"))).collect();
    let sum = taus.iter().fold(LinExpr::zero(), |e, &t| e.plus(t, 1.0));
    p.add_linear("simplex", sum, Relation::Equal, LinExpr::constant(1.0)).unwrap();
    let s = solve(&p, &Tolerances::default()).unwrap();
    assert!(s.is_optimal());
    let total: f64 = taus.iter().map(|&t| s.value(t)).sum();
    assert_relative_eq!(total, 1.0, epsilon = 1e-8);
    assert!(taus.iter().all(|&t| s.value(t) >= -1e-9));
}

#[test]
fn contradictory_budget_is_infeasible() {
    let mut p = ConicProgram::new();
    let x = p.add_hermitian_psd("X", 2).unwrap();
    let tr = LinExpr::zero().plus_trace(x, identity(2));
    p.add_linear("lo", tr.clone(), Relation::GreaterEq, LinExpr::constant(2.0)).unwrap();
    p.add_linear("hi", tr.clone(), Relation::LessEq, LinExpr::constant(1.0)).unwrap();
    p.set_objective(Sense::Minimize, tr).unwrap();
    let s = solve(&p, &Tolerances::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Infeasible);
    assert!(s.dual_norm > 0.0);
}

#[test]
fn unbounded_is_reported() {
    let mut p = ConicProgram::new();
    let x = p.add_nonneg("x");
    p.set_objective(Sense::Maximize, LinExpr::var(x)).unwrap();
    let s = solve(&p, &Tolerances::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Unbounded);
}

#[test]
fn solve_leaves_program_untouched() {
    let mut p = ConicProgram::new();
    let x = p.add_hermitian_psd("X", 2).unwrap();
    let tr = LinExpr::zero().plus_trace(x, identity(2));
    p.add_linear("budget", tr.clone(), Relation::LessEq, LinExpr::constant(1.0)).unwrap();
    p.set_objective(Sense::Maximize, tr).unwrap();
    let before = dump(&p);
    let _ = solve(&p, &Tolerances::default()).unwrap();
    assert_eq!(before, dump(&p));
}

#[test]
fn dump_golden() {
    let mut p = ConicProgram::new();
    let t = p.add_free("rate");
    let tau = p.add_scalar("tau", Some(0.0), Some(1.0));
    let x = p.add_hermitian_psd("G", 2).unwrap();
    let h = outer(&[c(1.0, 0.0), c(0.0, 0.5)]);
    p.add_linear("budget", LinExpr::zero().plus_trace(x, identity(2)), Relation::LessEq, LinExpr::var(tau))
        .unwrap();
    p.add_perspective_log_hypograph("r1", t, tau, LinExpr::zero().plus_trace(x, h).scaled(2.0)).unwrap();
    p.set_objective(Sense::Maximize, LinExpr::var(t)).unwrap();
    let expected = "\
conic-program v1
sense maximize
scalar s0 rate [-inf, inf]
scalar s1 tau [0, 1]
hermitian m0 G dim 2 psd
objective 1*s0
linear budget: -1*s1 + tr(m0, [[1+0i, 0+0i], [0+0i, 1+0i]]) <= 0
plog r1: s0 <= s1 * log2(1 + (tr(m0, [[2+0i, 0-1i], [0+1i, 0.5+0i]])) / s1)
end
";
    assert_eq!(dump(&p), expected);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn perspective_atom_is_tight(tau in 0.01f64..1.0, x in 0.0f64..500.0) {
        let s = max_perspective(tau, x);
        prop_assert!(s.is_optimal());
        let exact = tau * (1.0 + x / tau).log2();
        prop_assert!((s.objective - exact).abs() <= 1e-7, "got {} want {}", s.objective, exact);
    }

    #[test]
    fn objective_self_check(w in proptest::collection::vec(0.1f64..5.0, 3), budget in 0.5f64..3.0) {
        // max sum_i w_i log2(1 + x_i) s.t. sum x_i <= budget  (water filling)
        let mut p = ConicProgram::new();
        let one = p.add_nonneg("one");
        p.fix(one, 1.0);
        let mut obj = LinExpr::zero();
        let mut sum = LinExpr::zero();
        for (i, wi) in w.iter().enumerate() {
            let xi = p.add_nonneg(format!("x{i}"));
            let ti = p.add_free(format!("t{i}"));
            p.add_perspective_log_hypograph(format!("r{i}"), ti, one, LinExpr::var(xi)).unwrap();
            obj = obj.plus(ti, *wi);
            sum = sum.plus(xi, 1.0);
        }
        p.add_linear("budget", sum, Relation::LessEq, LinExpr::constant(budget)).unwrap();
        p.set_objective(Sense::Maximize, obj).unwrap();
        let s = solve(&p, &Tolerances::default()).unwrap();
        prop_assert!(s.is_optimal());
        let rel = (s.objective - s.reported_objective).abs() / s.objective.abs().max(1.0);
        prop_assert!(rel <= 1e-7, "recomputed {} reported {}", s.objective, s.reported_objective);
    }
}

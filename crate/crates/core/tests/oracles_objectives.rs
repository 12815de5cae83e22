use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use newton_fw::objectives::softplus;
use newton_fw::oracles::{local_norm, local_norm_at, project_l1ball, project_simplex};
use newton_fw::{
    CsrMatrix, DOptProblem, FeasibleSet, L1Ball, LogisticProblem, Objective, PortfolioProblem,
    QuadraticObjective, Simplex,
};

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

fn vec_strategy(p: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-5.0f64..5.0, p).prop_map(DVector::from_vec)
}

fn simplex_point(p: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(0.01f64..1.0, p).prop_map(|v| {
        let x = DVector::from_vec(v);
        let s = x.sum();
        x / s
    })
}

#[test]
fn simplex_lmo_examples() {
    let s = Simplex::new(3);
    assert_eq!(s.lmo(&dv(&[3.0, -1.0, 2.0])).unwrap().index, 1);
    assert_eq!(s.lmo(&dv(&[5.0, 5.0, 5.0])).unwrap().index, 0);
    for k in 0..3 {
        let mut g = DVector::zeros(3);
        g[k] = -1.0;
        assert_eq!(s.lmo(&g).unwrap().index, k);
    }
    assert!(s.lmo(&dv(&[0.0, f64::NAN, 1.0])).is_err());
    assert_abs_diff_eq!(Simplex::new(7).diameter(), 2f64.sqrt());
}

#[test]
fn l1_lmo_examples() {
    let b = L1Ball::new(2, 10.0);
    assert_eq!(b.lmo(&dv(&[0.5, -2.0])).unwrap().to_dense(2), dv(&[0.0, 10.0]));
    assert_eq!(b.lmo(&dv(&[0.0, 0.0, 0.0])).unwrap().to_dense(3), dv(&[-10.0, 0.0, 0.0]));
    assert!(b.lmo(&dv(&[f64::NAN, 0.0])).is_err());
    assert_eq!(b.diameter(), 20.0);
    assert_eq!(L1Ball::new(4, 1.0).diameter(), 2.0);
}

#[test]
fn projection_examples() {
    let y = dv(&[0.2, 0.3, 0.5]);
    assert_eq!(project_simplex(&y), y);
    assert_eq!(project_simplex(&dv(&[2.0, 0.0])), dv(&[1.0, 0.0]));
    assert!((project_simplex(&dv(&[0.6, 0.4, -0.2])) - dv(&[0.6, 0.4, 0.0])).amax() <= 1e-15);
    let inside = dv(&[0.3, -0.4]);
    assert_eq!(project_l1ball(&inside, 1.0), inside);
    assert_eq!(project_l1ball(&dv(&[3.0, 0.0]), 1.0), dv(&[1.0, 0.0]));
    assert!((project_l1ball(&dv(&[2.0, -1.0]), 1.0) - dv(&[1.0, 0.0])).amax() <= 1e-15);
}

#[test]
fn local_norm_examples() {
    let id = DMatrix::<f64>::identity(2, 2);
    let (n, hv) = local_norm(&id, &dv(&[3.0, 4.0])).unwrap();
    assert_eq!(n, 5.0);
    assert_eq!(hv, dv(&[3.0, 4.0]));
    assert_eq!(local_norm(&id, &DVector::zeros(2)).unwrap().0, 0.0);
    let neg = -DMatrix::<f64>::identity(2, 2);
    assert!(local_norm(&neg, &dv(&[1.0, 0.0])).is_err());
}

#[test]
fn portfolio_examples() {
    let prob = PortfolioProblem::new(DMatrix::identity(2, 2)).unwrap();
    let x = dv(&[0.5, 0.5]);
    assert_abs_diff_eq!(prob.value(&x), 4f64.ln(), epsilon = 1e-14);
    assert_eq!(prob.gradient(&x).unwrap(), dv(&[-2.0, -2.0]));
    assert_eq!(prob.hvp(&x, &dv(&[1.0, 0.0])).unwrap(), dv(&[4.0, 0.0]));
    assert!(!prob.in_domain(&dv(&[1.0, 0.0])));
    assert!(prob.gradient(&dv(&[1.0, 0.0])).is_err());
}

#[test]
fn dopt_examples() {
    let prob = DOptProblem::new(DMatrix::identity(2, 2)).unwrap();
    let x = dv(&[0.5, 0.5]);
    assert_abs_diff_eq!(prob.value(&x), -(0.25f64.ln()), epsilon = 1e-14);
    assert!((prob.gradient(&x).unwrap() - dv(&[-2.0, -2.0])).amax() <= 1e-14);
    let sym = DOptProblem::new(DMatrix::identity(4, 4)).unwrap();
    let e = DVector::from_element(4, 0.25);
    for j in 0..4 {
        assert_abs_diff_eq!(sym.linesearch_step(&e, j).unwrap(), 0.0, epsilon = 1e-14);
    }
}

#[test]
fn logistic_examples() {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.0, 3.0]);
    let y = [1.0, -1.0, 1.0];
    let prob = LogisticProblem::new(&CsrMatrix::from_dense(&a), &y, 0.1).unwrap();
    let zero = DVector::zeros(2);
    assert_abs_diff_eq!(prob.value(&zero), 2f64.ln(), epsilon = 1e-14);
    // gradient at 0: -(1/2n) sum y_i a_i
    let expected = -(a.transpose() * dv(&y)) / 6.0;
    assert!((prob.gradient(&zero).unwrap() - expected).amax() <= 1e-14);
    assert_abs_diff_eq!(softplus(50.0), 50.0, epsilon = 1e-15);
    assert!(softplus(800.0).is_finite());
    assert_abs_diff_eq!(softplus(-800.0), 0.0);
}

#[test]
fn dopt_hess_column_matches_explicit_inverse() {
    let a = DMatrix::from_fn(3, 7, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.2 * i as f64);
    let prob = DOptProblem::new(a.clone()).unwrap();
    let x = DVector::from_fn(7, |j, _| (j + 1) as f64 / 28.0);
    let m = &a * DMatrix::from_diagonal(&x) * a.transpose();
    let minv = m.try_inverse().unwrap();
    // Hessian entries (a_i^T M^-1 a_j)^2
    let k = a.transpose() * &minv * &a;
    let dense = k.map(|v| v * v);
    let hess = prob.hessian_at(&x).unwrap();
    for j in 0..7 {
        let col = prob.hess_column(&x, j).unwrap();
        assert!((&col - dense.column(j)).amax() <= 1e-10 * dense.amax());
        assert!((hess.column(j) - dense.column(j)).amax() <= 1e-10 * dense.amax());
    }
    // sum_j x_j grad_j = -n
    assert_abs_diff_eq!(prob.gradient(&x).unwrap().dot(&x), -3.0, epsilon = 1e-12);
    let v = DVector::from_fn(7, |j, _| (j as f64).sin());
    assert_abs_diff_eq!(local_norm_at(&prob, &x, &v).unwrap().0, (v.dot(&(&dense * &v))).sqrt(), epsilon = 1e-10);
}

/// Golden-section minimization of `phi` on `[lo, hi]`.
fn golden(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if phi(a) < phi(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn dopt_line_search_matches_golden_section() {
    let a = DMatrix::from_fn(3, 9, |i, j| (((i + 2) * (j + 1)) % 5) as f64 - 2.0 + 0.1 * j as f64);
    let prob = DOptProblem::new(a).unwrap();
    let x = DVector::from_fn(9, |j, _| (1 + j % 4) as f64);
    let x = &x / x.sum();
    for j in 0..9 {
        let tau = prob.linesearch_step(&x, j).unwrap();
        let mut e = DVector::zeros(9);
        e[j] = 1.0;
        let phi = |t: f64| prob.value(&((1.0 - t) * &x + t * &e));
        let reference = golden(phi, 0.0, 1.0 - 1e-12);
        assert!((tau - reference).abs() <= 1e-8, "j = {j}: {tau} vs {reference}");
        // away direction, capped where x_j reaches zero
        let cap = x[j] / (1.0 - x[j]);
        let away = prob.linesearch_toward(&x, j, -cap, 0.0).unwrap();
        let reference = golden(phi, -cap, 0.0);
        assert!((away - reference).abs() <= 1e-8, "away j = {j}: {away} vs {reference}");
    }
}

#[test]
fn quadratic_objective_is_exact() {
    let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let c = dv(&[-1.0, 0.3]);
    let prob = QuadraticObjective::new(q.clone(), c.clone()).unwrap();
    let x = dv(&[0.2, -0.7]);
    assert_abs_diff_eq!(prob.value(&x), 0.5 * x.dot(&(&q * &x)) + c.dot(&x), epsilon = 1e-15);
    assert_eq!(prob.hvp(&x, &dv(&[1.0, 0.0])).unwrap(), dv(&[2.0, 0.5]));
}

fn check_against_dense(obj: &dyn Objective, x: &DVector<f64>, dense_value: f64, dense_hessian: &DMatrix<f64>) {
    assert!((obj.value(x) - dense_value).abs() <= 1e-10 * dense_value.abs().max(1.0));
    let hess = obj.hessian_at(x).unwrap();
    for j in 0..obj.dim() {
        assert!((hess.column(j) - dense_hessian.column(j)).amax() <= 1e-10 * dense_hessian.amax().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplex_lmo_attains_support_function(g in vec_strategy(6)) {
        let s = Simplex::new(6);
        let v = s.lmo(&g).unwrap();
        let best = s.vertices().iter().map(|u| u.dot(&g)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(v.dot(&g), best);
    }

    #[test]
    fn l1_lmo_attains_support_function(g in vec_strategy(5), rho in 0.1f64..20.0) {
        let b = L1Ball::new(5, rho);
        let v = b.lmo(&g).unwrap();
        prop_assert!((v.dot(&g) + rho * g.amax()).abs() <= 1e-12 * rho * g.amax().max(1.0));
        let best = b.vertices().iter().map(|u| u.dot(&g)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(v.dot(&g), best);
    }

    #[test]
    fn projections_are_idempotent_and_nonexpansive(y in vec_strategy(7), z in vec_strategy(7)) {
        let p = project_simplex(&y);
        prop_assert!(Simplex::new(7).contains(&p, 1e-12));
        prop_assert!((project_simplex(&p) - &p).amax() <= 1e-15);
        prop_assert!((project_simplex(&z) - &p).norm() <= (&z - &y).norm() + 1e-12);
        let q = project_l1ball(&y, 2.0);
        prop_assert!(L1Ball::new(7, 2.0).contains(&q, 1e-12));
        prop_assert!((project_l1ball(&q, 2.0) - &q).amax() <= 1e-12);
        prop_assert!((project_l1ball(&z, 2.0) - &q).norm() <= (&z - &y).norm() + 1e-12);
    }

    #[test]
    fn decompose_reconstructs_point(x in simplex_point(6), signs in prop::collection::vec(prop::bool::ANY, 6)) {
        let s = Simplex::new(6);
        let parts = s.decompose(&x).unwrap();
        let mut rebuilt = DVector::zeros(6);
        for (v, w) in &parts {
            v.axpy_into(*w, &mut rebuilt);
        }
        prop_assert!((rebuilt - &x).amax() <= 1e-15);
        let y = DVector::from_fn(6, |i, _| if signs[i] { 3.0 * x[i] } else { -3.0 * x[i] });
        let ball = L1Ball::new(6, 4.0);
        let parts = ball.decompose(&y).unwrap();
        let weights: f64 = parts.iter().map(|p| p.1).sum();
        prop_assert!((weights - 1.0).abs() <= 1e-12);
        let mut rebuilt = DVector::zeros(6);
        for (v, w) in &parts {
            v.axpy_into(*w, &mut rebuilt);
        }
        prop_assert!((rebuilt - &y).amax() <= 1e-12);
    }

    #[test]
    fn portfolio_matches_dense_formulas(x in simplex_point(4), seed in 0u64..1000) {
        let a = DMatrix::from_fn(6, 4, |i, j| 1.0 + 0.1 * (((seed as usize + 3 * i + 7 * j) % 11) as f64 - 5.0) / 5.0);
        let prob = PortfolioProblem::new(a.clone()).unwrap();
        let r = &a * &x;
        let value = -r.iter().map(|v| v.ln()).sum::<f64>();
        let w = r.map(|v| 1.0 / (v * v));
        let hess = a.transpose() * DMatrix::from_diagonal(&w) * &a;
        check_against_dense(&prob, &x, value, &hess);
        let g = -(a.transpose() * r.map(|v| 1.0 / v));
        prop_assert!((prob.gradient(&x).unwrap() - g).amax() <= 1e-12);
    }

    #[test]
    fn logistic_sparse_matches_dense(x in vec_strategy(4), seed in 0u64..1000) {
        let a = DMatrix::from_fn(8, 4, |i, j| {
            let k = (seed as usize + 5 * i + 3 * j) % 7;
            if k < 3 { 0.0 } else { k as f64 - 4.5 }
        });
        let y: Vec<f64> = (0..8).map(|i| if (i + seed as usize).is_multiple_of(3) { 1.0 } else { -1.0 }).collect();
        let mu = 0.05;
        let prob = LogisticProblem::new(&CsrMatrix::from_dense(&a), &y, mu).unwrap();
        let z = &a * &x;
        let mut value = 0.5 * mu * x.norm_squared();
        let mut weights = DVector::zeros(8);
        for i in 0..8 {
            let m = -y[i] * z[i];
            value += (1.0 + m.exp()).ln() / 8.0;
            let s = 1.0 / (1.0 + (-z[i]).exp());
            weights[i] = s * (1.0 - s) / 8.0;
        }
        let hess = a.transpose() * DMatrix::from_diagonal(&weights) * &a + mu * DMatrix::identity(4, 4);
        check_against_dense(&prob, &x, value, &hess);
    }

    #[test]
    fn excess_matches_value_difference(x in simplex_point(5), y in simplex_point(5)) {
        let a = DMatrix::from_fn(7, 5, |i, j| 1.0 + 0.05 * ((i * j) % 5) as f64);
        let prob = PortfolioProblem::new(a).unwrap();
        let direct = prob.value(&x) - prob.value(&y);
        prop_assert!((prob.excess(&x, &y).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn dopt_gradient_trace_identity(x in simplex_point(8)) {
        let a = DMatrix::from_fn(3, 8, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0 + 0.3 * i as f64);
        let prob = DOptProblem::new(a).unwrap();
        prop_assert!((prob.gradient(&x).unwrap().dot(&x) + 3.0).abs() <= 1e-11);
    }
}

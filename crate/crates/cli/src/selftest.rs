use std::f64::consts::PI;

use harmbal::chebyshev::{eval_coeffs, integrate, multiply};
use harmbal::fourier::FourierSeries;
use harmbal::hb::{linear_response, newton_solve, NewtonSettings};
use harmbal::models::{duffing, ModelSpec};
use harmbal::stability::{expm, liouville_determinant, monodromy, sample_jacobian_equidistant, state_matrix, Method};
use harmbal::urabe::tightest_delta;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, passed: value <= limit, detail: format!("{value:.3e} <= {limit:.0e}") }
}

fn two_dof_linear() -> ModelSpec {
    let d = DMatrix::from_row_slice(2, 2, &[0.05, -0.01, -0.01, 0.08]);
    let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 3.0]);
    let f = vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)];
    ModelSpec::linear("linear", d, k, vec![(1, f)]).expect("valid linear model")
}

fn operational_identities() -> f64 {
    let c = 32;
    let a: Vec<f64> = (0..c).map(|j| if j < 10 { 1.0 / (1.0 + j as f64) } else { 0.0 }).collect();
    let b: Vec<f64> = (0..c).map(|j| if j < 12 { (-0.5f64).powi(j as i32) } else { 0.0 }).collect();
    let ab = multiply(&a, &b);
    let mut one = vec![0.0; c];
    one[0] = 1.0;
    let ramp = integrate(&one);
    (0..=40)
        .map(|i| {
            let tau = 2.0 * PI * i as f64 / 40.0;
            let prod = (eval_coeffs(&ab, tau) - eval_coeffs(&a, tau) * eval_coeffs(&b, tau)).abs();
            prod.max((eval_coeffs(&ramp, tau) - tau).abs())
        })
        .fold(0.0, f64::max)
}

fn mexp_constant() -> f64 {
    let model = two_dof_linear();
    let omega = 1.3;
    let q = FourierSeries::zeros(1, 2);
    let traj = sample_jacobian_equidistant(&model, &q, 7, omega).expect("grid");
    let a = state_matrix(&model, &traj.samples[0], omega);
    let exact = expm(&(a * (2.0 * PI))).expect("finite");
    let m = monodromy(&model, &q, omega, Method::Mexp, 7).expect("mexp").monodromy;
    (m - &exact).norm() / exact.norm()
}

fn liouville() -> f64 {
    let model = duffing();
    let omega = 1.0;
    let guess = linear_response(&model, omega, 9).expect("linear");
    let (q, _) = newton_solve(&model, &guess, omega, &NewtonSettings::default()).expect("HB");
    let f = monodromy(&model, &q, omega, Method::Cheby, 60).expect("cheby");
    let det = f.monodromy.determinant();
    let expected = liouville_determinant(&model, omega);
    (det - expected).abs() / expected
}

fn backend_agreement() -> f64 {
    let model = duffing();
    let omega = 1.0;
    let guess = linear_response(&model, omega, 9).expect("linear");
    let (q, _) = newton_solve(&model, &guess, omega, &NewtonSettings::default()).expect("HB");
    let cheby = monodromy(&model, &q, omega, Method::Cheby, 60).expect("cheby").leading();
    let shoot = monodromy(&model, &q, omega, Method::Shooting, 1 << 12).expect("shooting").leading();
    (cheby - shoot).norm() / shoot.norm()
}

fn delta_with_flat_bound() -> f64 {
    let (r, m) = (1e-6, 50.0);
    match tightest_delta(r, m, &|_| 0.0, 1e3) {
        Some((d, _)) => (d - m * r).abs() / (m * r),
        None => f64::INFINITY,
    }
}

pub fn run() -> Vec<Check> {
    vec![
        check("operational matrices", operational_identities(), 1e-12),
        check("mexp on constant system", mexp_constant(), 1e-13),
        check("liouville determinant", liouville(), 1e-6),
        check("cheby vs shooting", backend_agreement(), 1e-4),
        check("tightest delta with flat bound", delta_with_flat_bound(), 1e-12),
    ]
}

#![allow(dead_code)]

use std::f64::consts::PI;

use harmbal::fourier::FourierSeries;
use harmbal::hb::{linear_response, newton_solve, NewtonSettings};
use harmbal::models::{duffing, ModelSpec};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Two coupled, damped oscillators with cosine forcing on the first.
pub fn linear2() -> ModelSpec {
    let d = DMatrix::from_row_slice(2, 2, &[0.05, -0.01, -0.01, 0.08]);
    let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 3.0]);
    let f = vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.0)];
    ModelSpec::linear("linear2", d, k, vec![(1, f)]).unwrap()
}

pub fn duffing_point(omega: f64, h: usize) -> (ModelSpec, FourierSeries) {
    let model = duffing();
    let guess = linear_response(&model, omega, h).unwrap();
    let (q, _) = newton_solve(&model, &guess, omega, &NewtonSettings::default()).unwrap();
    (model, q)
}

/// `A(τ)` of the variational equation along `q`.
pub fn variational_matrix(model: &ModelSpec, q: &FourierSeries, omega: f64, tau: f64) -> DMatrix<f64> {
    let d = model.dofs();
    let qs: Vec<f64> = (0..d).map(|i| q.eval_dof(i, tau)).collect();
    let stiff = &model.stiffness + model.jacobian_nl(&qs);
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a.view_mut((0, d), (d, d)).fill_with_identity();
    a.view_mut((d, 0), (d, d)).copy_from(&(-stiff / (omega * omega)));
    a.view_mut((d, d), (d, d)).copy_from(&(-&model.damping / omega));
    a
}

/// Fundamental matrix on `steps + 1` equidistant points of `[0, 2π]` by
/// classical Runge-Kutta.
pub fn rk4_fundamental(model: &ModelSpec, q: &FourierSeries, omega: f64, steps: usize) -> Vec<DMatrix<f64>> {
    let n = 2 * model.dofs();
    let h = 2.0 * PI / steps as f64;
    let mut phi = DMatrix::identity(n, n);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(phi.clone());
    for s in 0..steps {
        let t = s as f64 * h;
        let a0 = variational_matrix(model, q, omega, t);
        let a1 = variational_matrix(model, q, omega, t + 0.5 * h);
        let a2 = variational_matrix(model, q, omega, t + h);
        let k1 = &a0 * &phi;
        let k2 = &a1 * (&phi + &k1 * (0.5 * h));
        let k3 = &a1 * (&phi + &k2 * (0.5 * h));
        let k4 = &a2 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(phi.clone());
    }
    out
}

/// Right-hand side of the nonlinear equation in state form, normalized time.
pub fn state_rhs(model: &ModelSpec, omega: f64, tau: f64, x: &DVector<f64>) -> DVector<f64> {
    let d = model.dofs();
    let q = x.rows(0, d).into_owned();
    let u = x.rows(d, d).into_owned();
    let f = DVector::from_vec(model.excitation(tau)) - &model.damping * &u * omega - &model.stiffness * &q
        - DVector::from_vec(model.force_nl(q.as_slice()));
    let mut out = DVector::zeros(2 * d);
    out.rows_mut(0, d).copy_from(&u);
    out.rows_mut(d, d).copy_from(&(f / (omega * omega)));
    out
}

/// Nonlinear Runge-Kutta march over `periods` periods; returns the state
/// at every step of the last period.
pub fn rk4_march(model: &ModelSpec, omega: f64, x0: DVector<f64>, periods: usize, steps: usize) -> Vec<DVector<f64>> {
    let h = 2.0 * PI / steps as f64;
    let mut x = x0;
    let mut last = Vec::new();
    for p in 0..periods {
        if p + 1 == periods {
            last.push(x.clone());
        }
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = state_rhs(model, omega, t, &x);
            let k2 = state_rhs(model, omega, t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
            let k3 = state_rhs(model, omega, t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
            let k4 = state_rhs(model, omega, t + h, &(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if p + 1 == periods {
                last.push(x.clone());
            }
        }
    }
    last
}

/// `M` of the existence theorem by brute-force double trapezoidal
/// quadrature of the periodic Green's function on an RK4 grid.
pub fn m_by_quadrature(phis: &[DMatrix<f64>]) -> f64 {
    let steps = phis.len() - 1;
    let h = 2.0 * PI / steps as f64;
    let n = phis[0].nrows();
    let end = &phis[steps];
    let resolvent = (DMatrix::identity(n, n) - end).try_inverse().unwrap();
    let inv: Vec<DMatrix<f64>> = phis.iter().map(|p| p.clone().try_inverse().unwrap()).collect();
    let before: Vec<DMatrix<f64>> = inv.iter().map(|v| &resolvent * v).collect();
    let after: Vec<DMatrix<f64>> = inv.iter().map(|v| &resolvent * end * v).collect();
    let mut best = 0.0f64;
    for t in 0..=steps {
        // s < τ uses B, s > τ uses B₂; both pieces by the trapezoidal rule
        let f = |b: &DMatrix<f64>| (&phis[t] * b).norm_squared();
        let mut total = 0.0;
        for s in 0..t {
            total += 0.5 * h * (f(&before[s]) + f(&before[s + 1]));
        }
        for s in t..steps {
            total += 0.5 * h * (f(&after[s]) + f(&after[s + 1]));
        }
        best = best.max(total);
    }
    (2.0 * PI * best).sqrt()
}

/// `∫_{-1}^{x} T_j(s) ds` from the substitution `s = cos φ`, which turns the
/// integrand into `(sin((j+1)φ) - sin((j-1)φ)) / 2` on `[θ, π]`.
pub fn antiderivative(j: usize, x: f64) -> f64 {
    let theta = x.clamp(-1.0, 1.0).acos();
    let part = |m: i64| -> f64 {
        if m == 0 {
            0.0
        } else {
            let m = m as f64;
            (f64::cos(m * theta) - f64::cos(m * PI)) / m
        }
    };
    0.5 * (part(j as i64 + 1) - part(j as i64 - 1))
}

/// `exp(A)` by scaled Taylor series and repeated squaring.
pub fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.norm();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Monodromy of a model with no nonlinear force, `exp(2π A)`.
pub fn constant_monodromy(model: &ModelSpec, omega: f64) -> DMatrix<f64> {
    let a = harmbal::stability::state_matrix(model, &DMatrix::zeros(model.dofs(), model.dofs()), omega);
    taylor_expm(&(a * (2.0 * PI)))
}

/// Least-squares slope of `log ε` against `log N`, sign flipped.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -num / den
}

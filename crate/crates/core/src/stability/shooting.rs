use nalgebra::{DMatrix, DVector};

use super::{floquet_classify, FloquetResult, Method};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::models::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingSettings {
    /// Time steps per period.
    pub steps: usize,
    /// Tolerance on the periodicity defect, relative to the state norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ShootingSettings {
    fn default() -> Self {
        Self { steps: 1 << 14, tol: 1e-11, max_iter: 30 }
    }
}

#[derive(Debug, Clone)]
pub struct ShootingResult {
    /// Closed initial state `[q(0); q'(0)]`.
    pub initial_state: Vec<f64>,
    pub floquet: FloquetResult,
    pub iterations: usize,
    pub defect: f64,
    /// `max_n cᵀ q_n` over the time levels.
    pub amplitude: f64,
}

struct PeriodMap {
    end: DVector<f64>,
    monodromy: DMatrix<f64>,
    amplitude: f64,
}

/// Nonlinear Newmark integration over one period together with the
/// variational pass, which is the exact derivative of the discrete map.
fn integrate_period(model: &ModelSpec, omega: f64, x0: &DVector<f64>, steps: usize) -> Result<PeriodMap> {
    let d = model.dofs();
    let nf = steps as f64;
    let c1 = nf / std::f64::consts::PI;
    let c2 = c1 * c1;
    let w2 = omega * omega;
    let dmat = &model.damping;
    let kmat = &model.stiffness;

    let mut q = DVector::from_iterator(d, x0.iter().take(d).cloned());
    let mut u = DVector::from_iterator(d, x0.iter().skip(d).cloned());
    let fnl = |q: &DVector<f64>| DVector::from_vec(model.force_nl(q.as_slice()));
    let fex = |t: f64| DVector::from_vec(model.excitation(t));
    let mut a = (fex(0.0) - dmat * &u * omega - kmat * &q - fnl(&q)) / w2;

    let mut qv = DMatrix::zeros(d, 2 * d);
    let mut uv = DMatrix::zeros(d, 2 * d);
    for i in 0..d {
        qv[(i, i)] = 1.0;
        uv[(i, d + i)] = 1.0;
    }
    let j0 = model.jacobian_nl(q.as_slice());
    let mut av = -(dmat * &uv * omega + (kmat + j0) * &qv) / w2;

    let s_base = DMatrix::identity(d, d) * (c1 * omega).powi(2) + dmat * (c1 * omega) + kmat;
    let output = DVector::from_column_slice(&model.output);
    let mut amplitude = output.dot(&q);
    for n in 0..steps {
        let tau = 2.0 * std::f64::consts::PI * (n + 1) as f64 / nf;
        let f_ext = fex(tau);
        let mut qn = &q + &u * (2.0 / c1) + &a * (2.0 / c2);
        let mut converged = false;
        for _ in 0..50 {
            let g = (&qn - &q) * (c2 * w2) - (&u * (2.0 * c1) + &a) * w2 + dmat * ((&qn - &q) * c1 - &u) * omega
                + kmat * &qn
                + fnl(&qn)
                - &f_ext;
            let s = &s_base + model.jacobian_nl(qn.as_slice());
            let delta = s.lu().solve(&g).ok_or(Error::Singular { context: "Newmark step matrix" })?;
            qn -= &delta;
            if delta.norm() <= 1e-14 * (1.0 + qn.norm()) {
                converged = true;
                break;
            }
        }
        if !converged || qn.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShootingDivergence { iterations: n, defect: f64::NAN });
        }
        let dq = &qn - &q;
        let u_new = &dq * c1 - &u;
        let a_new = &dq * c2 - &u * (2.0 * c1) - &a;

        let s = &s_base + model.jacobian_nl(qn.as_slice());
        let b = (&qv * c2 + &uv * (2.0 * c1) + &av) * w2 + dmat * (&qv * c1 + &uv) * omega;
        let qv_new = s.lu().solve(&b).ok_or(Error::Singular { context: "Newmark step matrix" })?;
        let dqv = &qv_new - &qv;
        let uv_new = &dqv * c1 - &uv;
        let av_new = &dqv * c2 - &uv * (2.0 * c1) - &av;

        q = qn;
        u = u_new;
        a = a_new;
        qv = qv_new;
        uv = uv_new;
        av = av_new;
        amplitude = amplitude.max(output.dot(&q));
    }
    let mut end = DVector::zeros(2 * d);
    end.rows_mut(0, d).copy_from(&q);
    end.rows_mut(d, d).copy_from(&u);
    let mut monodromy = DMatrix::zeros(2 * d, 2 * d);
    monodromy.view_mut((0, 0), (d, 2 * d)).copy_from(&qv);
    monodromy.view_mut((d, 0), (d, 2 * d)).copy_from(&uv);
    Ok(PeriodMap { end, monodromy, amplitude })
}

/// Closes the periodic orbit by Newton iteration on the initial state,
/// starting from `[q(0); q'(0)]` of the given series.
pub fn shooting_reference(
    model: &ModelSpec,
    omega: f64,
    q_init: &FourierSeries,
    settings: &ShootingSettings,
) -> Result<ShootingResult> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("Omega must be positive, got {omega}")));
    }
    if settings.steps == 0 {
        return Err(Error::InvalidParameter("at least one time step required".into()));
    }
    let d = model.dofs();
    let mut x0 = DVector::from_fn(2 * d, |r, _| {
        if r < d {
            q_init.eval_dof(r, 0.0)
        } else {
            q_init.eval_dof_derivative(r - d, 0.0)
        }
    });
    let mut defect = f64::INFINITY;
    for it in 0..=settings.max_iter {
        let map = integrate_period(model, omega, &x0, settings.steps)?;
        let f = &map.end - &x0;
        let previous = defect;
        defect = f.norm();
        let scale = x0.norm().max(1.0);
        // long integrations stall at a round-off floor above tol
        let stalled = defect > 0.5 * previous && defect <= 1e3 * settings.tol * scale;
        if defect <= settings.tol * scale || stalled {
            let floquet = floquet_classify(map.monodromy, Method::Shooting, settings.steps)?;
            return Ok(ShootingResult {
                initial_state: x0.as_slice().to_vec(),
                floquet,
                iterations: it,
                defect,
                amplitude: map.amplitude,
            });
        }
        let jac = map.monodromy - DMatrix::identity(2 * d, 2 * d);
        let step = jac.lu().solve(&f).ok_or(Error::Singular { context: "shooting Jacobian" })?;
        x0 -= step;
        if x0.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::ShootingDivergence { iterations: settings.max_iter, defect })
}

//! Pseudo-arclength continuation of HB solutions in the excitation
//! frequency.
//!
//! A secant predictor in scaled unknowns `(x / σ_x, Ω / σ_Ω)` is followed
//! by a bordered Newton corrector on the hyperplane orthogonal to the
//! secant. The scales are the norms of the last converged point.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::hb::{hb_linearize, hb_residual, newton_solve, NewtonSettings, DEFAULT_TOL};
use crate::models::ModelSpec;
use crate::urabe::{adaptive_h, AdaptiveHSettings, CertifySettings, UrabeMeasures};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub omega_start: f64,
    pub omega_end: f64,
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    pub target_iters: usize,
    pub max_corrector_iters: usize,
    pub max_points: usize,
    pub tol: f64,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            omega_start: 0.1,
            omega_end: 2.0,
            ds0: 1e-2,
            ds_min: 1e-6,
            ds_max: 0.1,
            target_iters: 4,
            max_corrector_iters: 12,
            max_points: 20_000,
            tol: DEFAULT_TOL,
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.omega_start > 0.0
            && self.omega_end > 0.0
            && self.omega_start != self.omega_end
            && self.ds_min > 0.0
            && self.ds_min <= self.ds0
            && self.ds0 <= self.ds_max
            && self.target_iters > 0
            && self.tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent continuation settings {self:?}")))
        }
    }

    /// `+1` when tracing towards larger `Ω`.
    pub fn direction(&self) -> f64 {
        (self.omega_end - self.omega_start).signum()
    }

    fn window(&self) -> (f64, f64) {
        (self.omega_start.min(self.omega_end), self.omega_start.max(self.omega_end))
    }
}

/// Harmonic truncation along the branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HPolicy {
    Fixed(usize),
    Adaptive { settings: AdaptiveHSettings, certify: CertifySettings },
}

/// One converged solution point.
#[derive(Debug, Clone)]
pub struct BranchPoint {
    pub omega: f64,
    pub q: FourierSeries,
    pub amplitude: f64,
    /// Cumulative scaled arclength from the first point.
    pub arclength: f64,
    pub iterations: usize,
    pub residual: f64,
    pub urabe: Option<UrabeMeasures>,
    pub conclusive: Option<bool>,
    /// Adaptive refinement failed to converge at a raised order.
    pub flagged: bool,
}

impl BranchPoint {
    pub fn order(&self) -> usize {
        self.q.order()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LeftWindow,
    StepUnderflow,
    MaxPoints,
    /// The branch returned to its first point.
    Closed,
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

impl Branch {
    /// Indices `i` where `Ω` reverses between points `i - 1`, `i`, `i + 1`.
    pub fn turning_points(&self) -> Vec<usize> {
        let p = &self.points;
        (1..p.len().saturating_sub(1))
            .filter(|&i| (p[i].omega - p[i - 1].omega) * (p[i + 1].omega - p[i].omega) < 0.0)
            .collect()
    }
}

struct Scales {
    x: f64,
    omega: f64,
}

impl Scales {
    fn at(x: &[f64], omega: f64) -> Self {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { x: norm.max(1e-9), omega: omega.abs().max(1e-9) }
    }
}

fn packed(q: &FourierSeries, h: usize) -> Vec<f64> {
    if q.order() == h { q.to_real() } else { q.resized(h).to_real() }
}

/// Secant prediction `y_k + ds (y_k - y_{k-1}) / |y_k - y_{k-1}|` in scaled
/// unknowns; returns the prediction and the unit tangent (scaled).
pub fn predict(prev: (&[f64], f64), last: (&[f64], f64), ds: f64, scale_x: f64, scale_omega: f64) -> (Vec<f64>, f64, Vec<f64>, f64) {
    let tx: Vec<f64> = last.0.iter().zip(prev.0).map(|(a, b)| (a - b) / scale_x).collect();
    let tw = (last.1 - prev.1) / scale_omega;
    let norm = (tx.iter().map(|v| v * v).sum::<f64>() + tw * tw).sqrt();
    if norm == 0.0 {
        return (last.0.to_vec(), last.1, vec![0.0; tx.len()], 0.0);
    }
    let tx: Vec<f64> = tx.into_iter().map(|v| v / norm).collect();
    let tw = tw / norm;
    let x = last.0.iter().zip(&tx).map(|(v, t)| v + ds * t * scale_x).collect();
    (x, last.1 + ds * tw * scale_omega, tx, tw)
}

/// Bordered Newton corrector: solves the HB equations together with
/// `t · (y - y_pred) = 0` in scaled unknowns, with `Ω` free.
#[allow(clippy::too_many_arguments)]
pub fn correct(
    model: &ModelSpec,
    h: usize,
    x_pred: &[f64],
    omega_pred: f64,
    tangent: (&[f64], f64),
    scales: (f64, f64),
    tol: f64,
    max_iter: usize,
) -> Result<(FourierSeries, f64, usize, f64)> {
    let d = model.dofs();
    let n_aft = model.default_n_aft(h);
    let (sx, sw) = scales;
    let n = x_pred.len();
    let mut x = x_pred.to_vec();
    let mut omega = omega_pred;
    for it in 0..=max_iter {
        if !(omega > 0.0) || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iterations: it, residual: f64::NAN });
        }
        let q = FourierSeries::from_real(h, d, &x)?;
        let lin = hb_linearize(model, &q, omega, n_aft)?;
        let res = lin.residual.norm;
        let constraint: f64 = tangent.0.iter().zip(x.iter().zip(x_pred)).map(|(t, (a, b))| t * (a - b) / sx).sum::<f64>()
            + tangent.1 * (omega - omega_pred) / sw;
        if !res.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: res });
        }
        if res <= tol && constraint.abs() <= 1e-10 {
            return Ok((q, omega, it, res));
        }
        if it == max_iter {
            return Err(Error::Divergence { iterations: it, residual: res });
        }
        let mut a = DMatrix::zeros(n + 1, n + 1);
        a.view_mut((0, 0), (n, n)).copy_from(&lin.jacobian);
        for i in 0..n {
            a[(i, n)] = lin.d_omega[i];
            a[(n, i)] = tangent.0[i] / sx;
        }
        a[(n, n)] = tangent.1 / sw;
        let mut rhs = DVector::zeros(n + 1);
        for (i, v) in lin.residual.to_real().into_iter().enumerate() {
            rhs[i] = v;
        }
        rhs[n] = constraint;
        let step = a.lu().solve(&rhs).ok_or(Error::Singular { context: "bordered HB Jacobian" })?;
        for i in 0..n {
            x[i] -= step[i];
        }
        omega -= step[n];
    }
    unreachable!("loop returns on its last iteration")
}

/// Traces a branch from `q0` at `omega_start` until `Ω` leaves the window,
/// the step underflows, the branch closes, or `max_points` is reached.
pub fn continue_branch(model: &ModelSpec, q0: &FourierSeries, settings: &ContinuationSettings, policy: &HPolicy) -> Result<Branch> {
    settings.validate()?;
    let (lo, hi) = settings.window();
    let newton = NewtonSettings { tol: settings.tol, max_iter: 60, n_aft: None };
    let start_h = match policy {
        HPolicy::Fixed(h) => *h,
        HPolicy::Adaptive { settings: a, .. } => q0.order().clamp(a.h_min, a.h_max),
    };
    let (q, report) = solve_ramped(model, q0, settings.omega_start, start_h, &newton).map_err(|e| Error::StartPoint(Box::new(e)))?;
    let mut first = BranchPoint {
        omega: settings.omega_start,
        amplitude: model.amplitude(&q),
        q,
        arclength: 0.0,
        iterations: report.iterations,
        residual: report.residual,
        urabe: None,
        conclusive: None,
        flagged: false,
    };
    refine(model, &mut first, policy, &newton)?;
    let mut points = vec![first];
    let mut ds = settings.ds0;
    let dir = settings.direction();

    let termination = loop {
        if points.len() >= settings.max_points {
            break Termination::MaxPoints;
        }
        let last = points.last().expect("non-empty");
        let h = last.order();
        let x_last = packed(&last.q, h);
        let sc = Scales::at(&x_last, last.omega);
        let prev = (points.len() >= 2).then(|| {
            let p = &points[points.len() - 2];
            (packed(&p.q, h), p.omega)
        });
        let attempt = |ds: f64| -> Result<(FourierSeries, f64, usize, f64)> {
            let (x_pred, w_pred, tx, tw) = match &prev {
                Some((xp, wp)) => predict((xp, *wp), (&x_last, last.omega), ds, sc.x, sc.omega),
                None => (x_last.clone(), last.omega + dir * ds * sc.omega, vec![0.0; x_last.len()], dir),
            };
            correct(model, h, &x_pred, w_pred, (&tx, tw), (sc.x, sc.omega), settings.tol, settings.max_corrector_iters)
        };
        let mut outcome = None;
        while ds >= settings.ds_min {
            match attempt(ds) {
                Ok(r) if hb_residual(model, &r.0, r.1).map(|v| v.norm <= settings.tol).unwrap_or(false) => {
                    outcome = Some(r);
                    break;
                }
                Ok(_) | Err(Error::Divergence { .. } | Error::Singular { .. }) => ds *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((q, omega, iters, residual)) = outcome else {
            log::warn!("continuation step underflow at Omega = {}", last.omega);
            break Termination::StepUnderflow;
        };
        let x_new = q.to_real();
        let step_len = (x_new.iter().zip(&x_last).map(|(a, b)| ((a - b) / sc.x).powi(2)).sum::<f64>()
            + ((omega - last.omega) / sc.omega).powi(2))
        .sqrt();
        if step_len == 0.0 {
            log::warn!("continuation stalled at Omega = {omega}");
            break Termination::StepUnderflow;
        }
        let arclength = last.arclength + step_len;
        if omega < lo || omega > hi {
            break Termination::LeftWindow;
        }
        let mut point = BranchPoint {
            omega,
            amplitude: model.amplitude(&q),
            q,
            arclength,
            iterations: iters,
            residual,
            urabe: None,
            conclusive: None,
            flagged: false,
        };
        refine(model, &mut point, policy, &newton)?;
        let closed = closes(&points, &point, ds);
        points.push(point);
        if closed {
            break Termination::Closed;
        }
        let factor = (settings.target_iters as f64 / iters.max(1) as f64).clamp(0.5, 2.0);
        ds = (ds * factor).clamp(settings.ds_min, settings.ds_max);
    };
    Ok(Branch { points, termination })
}

/// Newton at order `h` from `q0`; if that fails, solves at the order of
/// `q0` and raises the order two harmonics at a time.
pub fn solve_ramped(model: &ModelSpec, q0: &FourierSeries, omega: f64, h: usize, newton: &NewtonSettings) -> Result<(FourierSeries, crate::hb::NewtonReport)> {
    let direct = newton_solve(model, &q0.resized(h), omega, newton);
    if direct.is_ok() || q0.order() >= h {
        return direct;
    }
    let mut q = newton_solve(model, q0, omega, newton)?.0;
    let mut order = q0.order();
    loop {
        order = (order + 2).min(h);
        let (next, report) = newton_solve(model, &q.resized(order), omega, newton)?;
        if order == h {
            return Ok((next, report));
        }
        q = next;
    }
}

fn refine(model: &ModelSpec, point: &mut BranchPoint, policy: &HPolicy, newton: &NewtonSettings) -> Result<()> {
    let HPolicy::Adaptive { settings, certify } = policy else { return Ok(()) };
    let out = adaptive_h(model, &point.q, point.omega, settings, certify, newton)?;
    point.q = out.q;
    point.amplitude = model.amplitude(&point.q);
    point.residual = hb_residual(model, &point.q, point.omega)?.norm;
    point.urabe = Some(out.measures);
    point.conclusive = Some(out.conclusive);
    point.flagged = out.diverged;
    Ok(())
}

/// The new point is back near the first one after travelling well away.
fn closes(points: &[BranchPoint], new: &BranchPoint, ds: f64) -> bool {
    let first = &points[0];
    if points.len() < 8 || new.arclength < 20.0 * ds {
        return false;
    }
    let h = new.order().max(first.order());
    let (a, b) = (packed(&first.q, h), packed(&new.q, h));
    let sc = Scales::at(&b, new.omega);
    let dist = (a.iter().zip(&b).map(|(u, v)| ((u - v) / sc.x).powi(2)).sum::<f64>()
        + ((first.omega - new.omega) / sc.omega).powi(2))
    .sqrt();
    dist < 1.5 * ds
}

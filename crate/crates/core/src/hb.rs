//! Harmonic Balance residual, its analytic Jacobian via AFT, and the Newton
//! corrector.
//!
//! The residual of harmonic `k` is
//! `R̂(k) = (-k²Ω² + ikΩD + K) q̂(k) + f̂_nl(k) - f̂_ex(k)`, where `f̂_nl` is
//! obtained by sampling `f_nl(q(τ))` on `N_aft` equidistant points and
//! applying the discrete Fourier transform.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::{real_offset, spectrum, FourierSeries};
use crate::models::ModelSpec;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sample count and highest returned harmonic of the AFT scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AftSettings {
    pub n_aft: usize,
    pub h_out: usize,
}

impl AftSettings {
    pub fn new(n_aft: usize, h_out: usize) -> Result<Self> {
        if n_aft <= 2 * h_out {
            return Err(Error::Aliasing { n_aft, h_out });
        }
        Ok(Self { n_aft, h_out })
    }

    /// Model default sample count for a series of order `h`.
    pub fn for_model(model: &ModelSpec, h: usize) -> Self {
        Self { n_aft: model.default_n_aft(h), h_out: h }
    }
}

/// Fourier coefficients of `f_nl(q(τ))` up to `s.h_out`.
pub fn aft_coeffs(model: &ModelSpec, q: &FourierSeries, s: &AftSettings) -> Result<FourierSeries> {
    let s = AftSettings::new(s.n_aft, s.h_out)?;
    let d = q.dofs();
    let samples = q.sample_equidistant(s.n_aft)?;
    let n = samples.len();
    let mut force = vec![vec![0.0; n]; d];
    let mut f = vec![0.0; d];
    for (t, row) in samples.iter().enumerate() {
        model.nonlinearity.force(row, &mut f);
        for i in 0..d {
            force[i][t] = f[i];
        }
    }
    let mut out = FourierSeries::zeros(s.h_out, d);
    for (i, signal) in force.iter().enumerate() {
        let spec = spectrum(signal);
        for k in 0..=s.h_out {
            out.set_coeff(k, i, spec[k]);
        }
    }
    Ok(out)
}

/// Per-harmonic complex residual blocks and their aggregate norm.
#[derive(Debug, Clone)]
pub struct HbResidual {
    pub blocks: FourierSeries,
    pub norm: f64,
}

impl HbResidual {
    fn from_blocks(blocks: FourierSeries) -> Self {
        let norm = aggregate_norm(&blocks);
        Self { blocks, norm }
    }

    /// Real residual vector in the packing of [`FourierSeries::to_real`].
    pub fn to_real(&self) -> Vec<f64> {
        self.blocks.to_real()
    }
}

/// `sqrt(|R̂(0)|² + 2 Σ_{k≥1} |R̂(k)|²)`.
pub fn aggregate_norm(blocks: &FourierSeries) -> f64 {
    let mut acc = 0.0;
    for k in 0..=blocks.order() {
        let w = if k == 0 { 1.0 } else { 2.0 };
        acc += w * blocks.harmonic(k).iter().map(|c| c.norm_sqr()).sum::<f64>();
    }
    acc.sqrt()
}

/// Dynamic stiffness `-k²Ω² I + ikΩ D + K`.
pub fn dynamic_stiffness(model: &ModelSpec, k: usize, omega: f64) -> DMatrix<Complex64> {
    let d = model.dofs();
    let kf = k as f64;
    DMatrix::from_fn(d, d, |i, j| {
        let inertia = if i == j { -kf * kf * omega * omega } else { 0.0 };
        Complex64::new(model.stiffness[(i, j)] + inertia, kf * omega * model.damping[(i, j)])
    })
}

fn linear_blocks(model: &ModelSpec, q: &FourierSeries, omega: f64) -> FourierSeries {
    let (h, d) = (q.order(), q.dofs());
    let mut out = FourierSeries::zeros(h, d);
    for k in 0..=h {
        let l = dynamic_stiffness(model, k, omega);
        let qk = q.harmonic(k);
        for i in 0..d {
            let mut v = ZERO;
            for j in 0..d {
                v += l[(i, j)] * qk[j];
            }
            if let Some(f) = model.forcing_harmonic(k) {
                v -= f[i];
            }
            out.set_coeff(k, i, v);
        }
    }
    out
}

/// Residual with the model's default AFT sample count.
pub fn hb_residual(model: &ModelSpec, q: &FourierSeries, omega: f64) -> Result<HbResidual> {
    hb_residual_with(model, q, omega, model.default_n_aft(q.order()))
}

pub fn hb_residual_with(model: &ModelSpec, q: &FourierSeries, omega: f64, n_aft: usize) -> Result<HbResidual> {
    check_omega(omega)?;
    let fnl = aft_coeffs(model, q, &AftSettings::new(n_aft, q.order())?)?;
    let mut blocks = linear_blocks(model, q, omega);
    for k in 0..=q.order() {
        for i in 0..q.dofs() {
            blocks.set_coeff(k, i, blocks.coeff(k, i) + fnl.coeff(k, i));
        }
    }
    Ok(HbResidual::from_blocks(blocks))
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("Omega must be positive, got {omega}")))
    }
}

/// Residual, Jacobian with respect to the packed real unknowns, and the
/// derivative with respect to `Ω`, from one AFT pass.
#[derive(Debug, Clone)]
pub struct HbLinearization {
    pub residual: HbResidual,
    pub jacobian: DMatrix<f64>,
    pub d_omega: Vec<f64>,
}

/// Full linearization at `(q, Ω)`.
pub fn hb_linearize(model: &ModelSpec, q: &FourierSeries, omega: f64, n_aft: usize) -> Result<HbLinearization> {
    check_omega(omega)?;
    let (h, d) = (q.order(), q.dofs());
    let s = AftSettings::new(n_aft, h)?;
    let n = s.n_aft;
    let samples = q.sample_equidistant(n)?;

    let mut force = vec![vec![0.0; n]; d];
    let mut jac = vec![vec![0.0; n]; d * d];
    let mut f = vec![0.0; d];
    let mut jm = DMatrix::zeros(d, d);
    for (t, row) in samples.iter().enumerate() {
        model.nonlinearity.force(row, &mut f);
        model.nonlinearity.jacobian(row, &mut jm);
        for i in 0..d {
            force[i][t] = f[i];
            for j in 0..d {
                jac[i * d + j][t] = jm[(i, j)];
            }
        }
    }

    let mut blocks = linear_blocks(model, q, omega);
    for (i, signal) in force.iter().enumerate() {
        let spec = spectrum(signal);
        for k in 0..=h {
            blocks.set_coeff(k, i, blocks.coeff(k, i) + spec[k]);
        }
    }
    // full spectra of every Jacobian entry; index j means harmonic j mod N
    let jhat: Vec<Vec<Complex64>> = jac.iter().map(|s| spectrum(s)).collect();
    let jh = |i: usize, j: usize, m: i64| -> Complex64 {
        let idx = m.rem_euclid(n as i64) as usize;
        jhat[i * d + j][idx]
    };

    let len = q.real_len();
    let mut a = DMatrix::<f64>::zeros(len, len);
    let row_re = |k: usize, i: usize| if k == 0 { i } else { real_offset(d, k, i) };

    // nonlinear part
    for k in 0..=h {
        for m in 0..=h {
            for i in 0..d {
                for j in 0..d {
                    let (dre, dim) = if m == 0 {
                        (jh(i, j, k as i64), ZERO)
                    } else {
                        let minus = jh(i, j, k as i64 - m as i64);
                        let plus = jh(i, j, (k + m) as i64);
                        (minus + plus, Complex64::new(0.0, 1.0) * (minus - plus))
                    };
                    let r = row_re(k, i);
                    let c = row_re(m, j);
                    a[(r, c)] += dre.re;
                    if m > 0 {
                        a[(r, c + 1)] += dim.re;
                    }
                    if k > 0 {
                        a[(r + 1, c)] += dre.im;
                        if m > 0 {
                            a[(r + 1, c + 1)] += dim.im;
                        }
                    }
                }
            }
        }
    }
    // linear part, block diagonal in k
    let mut d_omega = vec![0.0; len];
    for k in 0..=h {
        let l = dynamic_stiffness(model, k, omega);
        let kf = k as f64;
        for i in 0..d {
            let r = row_re(k, i);
            let mut dw = ZERO;
            for j in 0..d {
                let c = row_re(k, j);
                let lij = l[(i, j)];
                a[(r, c)] += lij.re;
                if k > 0 {
                    a[(r, c + 1)] -= lij.im;
                    a[(r + 1, c)] += lij.im;
                    a[(r + 1, c + 1)] += lij.re;
                }
                let dl = Complex64::new(if i == j { -2.0 * kf * kf * omega } else { 0.0 }, kf * model.damping[(i, j)]);
                dw += dl * q.coeff(k, j);
            }
            d_omega[r] = dw.re;
            if k > 0 {
                d_omega[r + 1] = dw.im;
            }
        }
    }
    Ok(HbLinearization { residual: HbResidual::from_blocks(blocks), jacobian: a, d_omega })
}

/// Jacobian of the packed real residual with the default AFT sample count.
pub fn hb_jacobian(model: &ModelSpec, q: &FourierSeries, omega: f64) -> Result<DMatrix<f64>> {
    Ok(hb_linearize(model, q, omega, model.default_n_aft(q.order()))?.jacobian)
}

/// Newton settings; `n_aft = None` selects the model default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub n_aft: Option<usize>,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, n_aft: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Solves the HB equations at fixed `Ω` starting from `q0`.
pub fn newton_solve(
    model: &ModelSpec,
    q0: &FourierSeries,
    omega: f64,
    settings: &NewtonSettings,
) -> Result<(FourierSeries, NewtonReport)> {
    let (h, d) = (q0.order(), q0.dofs());
    if q0.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidParameter("initial guess is not finite".into()));
    }
    let n_aft = settings.n_aft.unwrap_or_else(|| model.default_n_aft(h));
    let mut q = q0.clone();
    for it in 0..=settings.max_iter {
        let lin = hb_linearize(model, &q, omega, n_aft)?;
        let norm = lin.residual.norm;
        if !norm.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: norm });
        }
        if norm <= settings.tol {
            return Ok((q, NewtonReport { iterations: it, residual: norm }));
        }
        if it == settings.max_iter {
            return Err(Error::Divergence { iterations: it, residual: norm });
        }
        let rhs = DVector::from_vec(lin.residual.to_real());
        let step = lin
            .jacobian
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular { context: "HB Jacobian" })?;
        let mut x = q.to_real();
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        q = FourierSeries::from_real(h, d, &x)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Up to `max_steps` further Newton steps on a converged point, stopping
/// once the residual no longer halves. Returns the best iterate.
pub fn newton_polish(model: &ModelSpec, q: &FourierSeries, omega: f64, max_steps: usize) -> Result<(FourierSeries, f64)> {
    let (h, d) = (q.order(), q.dofs());
    let n_aft = model.default_n_aft(h);
    let mut best = q.clone();
    let mut lin = hb_linearize(model, &best, omega, n_aft)?;
    let mut best_norm = lin.residual.norm;
    for _ in 0..max_steps {
        let rhs = DVector::from_vec(lin.residual.to_real());
        let Some(step) = lin.jacobian.lu().solve(&rhs) else { break };
        let mut x = best.to_real();
        for (xi, si) in x.iter_mut().zip(step.iter()) {
            *xi -= si;
        }
        let trial = FourierSeries::from_real(h, d, &x)?;
        lin = hb_linearize(model, &trial, omega, n_aft)?;
        let norm = lin.residual.norm;
        if !(norm < best_norm) {
            break;
        }
        let halved = norm <= 0.5 * best_norm;
        best = trial;
        best_norm = norm;
        if !halved {
            break;
        }
    }
    Ok((best, best_norm))
}

/// Response of the linear part alone, `q̂(k) = (-k²Ω² + ikΩD + K)⁻¹ f̂_ex(k)`.
pub fn linear_response(model: &ModelSpec, omega: f64, h: usize) -> Result<FourierSeries> {
    let d = model.dofs();
    let mut q = FourierSeries::zeros(h, d);
    for (k, f) in &model.forcing {
        if *k > h {
            continue;
        }
        let l = dynamic_stiffness(model, *k, omega);
        let rhs = DVector::from_column_slice(f);
        let sol = l.lu().solve(&rhs).ok_or(Error::Singular { context: "dynamic stiffness" })?;
        for i in 0..d {
            q.set_coeff(*k, i, sol[i]);
        }
    }
    Ok(q)
}

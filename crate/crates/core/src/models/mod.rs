//! Mass-normalized mechanical models
//! `Ω² q'' + Ω D q' + K q + f_nl(q) = f_ex(τ)`.

mod duffing;
mod ecl;
mod fe;
mod stop;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier::FourierSeries;

pub use duffing::{duffing, duffing_with, CubicSpring};
pub use ecl::{ecl_assemble, ecl_model, ecl_modal_reduce, EclBeamConfig, EclFeModel, ModalRecord};
pub use fe::{lowest_modes, BandedSym};
pub use stop::{two_dof_stop, RegularizedStop, STOP_BOUND_SAFETY};

/// Number of equidistant samples used for dense trajectory bounds.
pub const DENSE_SAMPLES: usize = 1 << 12;

/// Nonlinear restoring force depending on the generalized coordinates only.
pub trait Nonlinearity: Send + Sync + Debug {
    /// Writes `f_nl(q)` into `out`.
    fn force(&self, q: &[f64], out: &mut [f64]);

    /// Writes `∂f_nl/∂q` into `out` (`d × d`).
    fn jacobian(&self, q: &[f64], out: &mut DMatrix<f64>);

    /// Polynomial degree of the force, `None` if it is not polynomial.
    fn polynomial_degree(&self) -> Option<usize>;

    /// Upper bound of the Frobenius norm of `J(q + e) - J(q)` over the orbit
    /// for every displacement perturbation with `|e| ≤ delta`.
    fn jacobian_variation(&self, orbit: &OrbitSamples, delta: f64) -> f64;
}

/// The zero force.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForce;

impl Nonlinearity for NoForce {
    fn force(&self, _q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn jacobian(&self, _q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(1)
    }

    fn jacobian_variation(&self, _orbit: &OrbitSamples, _delta: f64) -> f64 {
        0.0
    }
}

/// Dense samples of an orbit together with the series they came from.
#[derive(Debug, Clone)]
pub struct OrbitSamples {
    pub series: FourierSeries,
    /// `samples[n][i]`: DOF `i` at the `n`-th time point.
    pub samples: Vec<Vec<f64>>,
}

impl OrbitSamples {
    /// Samples on `DENSE_SAMPLES` equidistant points plus the `n_aft` AFT grid.
    pub fn new(series: &FourierSeries, n_aft: usize) -> Result<Self> {
        let n_dense = DENSE_SAMPLES.max(2 * series.order() + 1);
        let mut samples = series.sample_equidistant(n_dense)?;
        if n_aft > 2 * series.order() && n_dense % n_aft != 0 {
            samples.extend(series.sample_equidistant(n_aft)?);
        }
        Ok(Self { series: series.clone(), samples })
    }
}

/// A model in the mass-normalized first-order-in-Ω form.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    /// Forcing coefficients `f̂_ex(k)` for `k ≥ 0` (one-sided).
    pub forcing: Vec<(usize, Vec<Complex64>)>,
    /// Output map `y = cᵀ q` used for the amplitude measure.
    pub output: Vec<f64>,
    /// Reference natural frequency.
    pub omega1: f64,
}

impl ModelSpec {
    /// Linear model with harmonic forcing `Σ f̂(k) e^{ikτ} + c.c.`.
    pub fn linear(
        name: &str,
        damping: DMatrix<f64>,
        stiffness: DMatrix<f64>,
        forcing: Vec<(usize, Vec<Complex64>)>,
    ) -> Result<Self> {
        let d = stiffness.nrows();
        let omega1 = lowest_natural_frequency(&stiffness);
        let m = Self {
            name: name.to_string(),
            damping,
            stiffness,
            nonlinearity: Arc::new(NoForce),
            forcing,
            output: unit_output(d, 0),
            omega1,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dofs();
        if d == 0 {
            return Err(Error::Dimension("model without degrees of freedom".into()));
        }
        if self.stiffness.ncols() != d || self.damping.shape() != (d, d) {
            return Err(Error::Dimension("D and K must be square of size d".into()));
        }
        if self.output.len() != d || self.forcing.iter().any(|(_, f)| f.len() != d) {
            return Err(Error::Dimension("forcing/output vectors must have length d".into()));
        }
        Ok(())
    }

    pub fn dofs(&self) -> usize {
        self.stiffness.nrows()
    }

    pub fn force_nl(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs()];
        self.nonlinearity.force(q, &mut out);
        out
    }

    pub fn jacobian_nl(&self, q: &[f64]) -> DMatrix<f64> {
        let d = self.dofs();
        let mut out = DMatrix::zeros(d, d);
        self.nonlinearity.jacobian(q, &mut out);
        out
    }

    /// `f̂_ex(k)` or `None` if harmonic `k` is not forced.
    pub fn forcing_harmonic(&self, k: usize) -> Option<&[Complex64]> {
        self.forcing.iter().find(|(h, _)| *h == k).map(|(_, f)| f.as_slice())
    }

    pub fn max_forcing_harmonic(&self) -> usize {
        self.forcing.iter().map(|(k, _)| *k).max().unwrap_or(0)
    }

    /// Physical excitation at `tau`.
    pub fn excitation(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dofs()];
        for (k, f) in &self.forcing {
            let e = Complex64::from_polar(1.0, *k as f64 * tau);
            for (o, c) in out.iter_mut().zip(f) {
                *o += if *k == 0 { c.re } else { 2.0 * (c * e).re };
            }
        }
        out
    }

    /// Default AFT sample count: alias-free for polynomial forces, `2^13`
    /// otherwise.
    pub fn default_n_aft(&self, h: usize) -> usize {
        match self.nonlinearity.polynomial_degree() {
            Some(p) => (p.max(1) + 1) * h + 1,
            None => (1usize << 13).max(8 * h + 1),
        }
    }

    /// Highest harmonic of `f_nl(q_H)` for polynomial forces.
    pub fn force_harmonic_reach(&self, h: usize) -> Option<usize> {
        self.nonlinearity.polynomial_degree().map(|p| p.max(1) * h)
    }

    /// `max_τ cᵀ q(τ)` over a grid of at least 1024 points.
    pub fn amplitude(&self, q: &FourierSeries) -> f64 {
        let n = 1024usize.max(4 * q.order() + 1);
        let samples = q.sample_equidistant(n).expect("grid exceeds Nyquist");
        samples
            .iter()
            .map(|row| row.iter().zip(&self.output).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Jacobian-variation bound `Δ(δ)` along the orbit.
    pub fn delta_bound(&self, orbit: &OrbitSamples, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        self.nonlinearity.jacobian_variation(orbit, delta)
    }

    /// Same model with every forcing coefficient scaled.
    pub fn with_forcing_scale(mut self, scale: f64) -> Self {
        for (_, f) in &mut self.forcing {
            f.iter_mut().for_each(|c| *c *= scale);
        }
        self
    }
}

pub(crate) fn unit_output(d: usize, i: usize) -> Vec<f64> {
    let mut c = vec![0.0; d];
    c[i] = 1.0;
    c
}

fn lowest_natural_frequency(k: &DMatrix<f64>) -> f64 {
    let sym = (k + k.transpose()) * 0.5;
    let ev = sym.symmetric_eigenvalues();
    ev.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excitation_of_cosine_forcing() {
        let m = duffing();
        for t in [0.0, 1.0, 2.5] {
            assert!((m.excitation(t)[0] - 0.2 * f64::cos(t)).abs() < 1e-15);
        }
    }

    #[test]
    fn n_aft_defaults() {
        assert_eq!(duffing().default_n_aft(9), 37);
        assert_eq!(two_dof_stop(0.2).unwrap().default_n_aft(80), 8192);
    }

    #[test]
    fn linear_model_natural_frequency() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]);
        let m = ModelSpec::linear("chain", DMatrix::zeros(2, 2), k, vec![]).unwrap();
        assert!((m.omega1 - ((3.0 - 5f64.sqrt()) / 2.0).sqrt()).abs() < 1e-12);
    }
}

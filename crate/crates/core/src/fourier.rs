//! One-sided complex Fourier series of real periodic vector signals.
//!
//! A series of order `H` stores `q̂(k)` for `k = 0..=H`; negative harmonics
//! are implied by `q̂(-k) = conj(q̂(k))`, so that
//! `q(τ) = q̂(0) + Σ_k 2 Re(q̂(k) e^{ikτ})`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FourierSeries {
    h: usize,
    d: usize,
    /// `coeffs[k * d + i]` is harmonic `k` of degree of freedom `i`.
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn zeros(h: usize, d: usize) -> Self {
        Self { h, d, coeffs: vec![Complex64::new(0.0, 0.0); (h + 1) * d] }
    }

    /// Builds a series from harmonic-major coefficients. The imaginary part of
    /// the static term is discarded.
    pub fn from_coeffs(h: usize, d: usize, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != (h + 1) * d {
            return Err(Error::Dimension(format!(
                "expected {} Fourier coefficients, got {}",
                (h + 1) * d,
                coeffs.len()
            )));
        }
        for c in coeffs.iter_mut().take(d) {
            c.im = 0.0;
        }
        Ok(Self { h, d, coeffs })
    }

    pub fn order(&self) -> usize {
        self.h
    }

    pub fn dofs(&self) -> usize {
        self.d
    }

    pub fn coeff(&self, k: usize, i: usize) -> Complex64 {
        self.coeffs[k * self.d + i]
    }

    pub fn set_coeff(&mut self, k: usize, i: usize, value: Complex64) {
        let v = if k == 0 { Complex64::new(value.re, 0.0) } else { value };
        self.coeffs[k * self.d + i] = v;
    }

    pub fn harmonic(&self, k: usize) -> &[Complex64] {
        &self.coeffs[k * self.d..(k + 1) * self.d]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Copy truncated or zero-padded to order `h`.
    pub fn resized(&self, h: usize) -> Self {
        let mut out = Self::zeros(h, self.d);
        let keep = (h.min(self.h) + 1) * self.d;
        out.coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        out
    }

    /// Number of real unknowns `d (2H + 1)`.
    pub fn real_len(&self) -> usize {
        self.d * (2 * self.h + 1)
    }

    /// Packs into the real unknown vector: static terms first, then
    /// interleaved real/imaginary parts per harmonic and DOF.
    pub fn to_real(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.real_len());
        x.extend(self.harmonic(0).iter().map(|c| c.re));
        for k in 1..=self.h {
            for c in self.harmonic(k) {
                x.push(c.re);
                x.push(c.im);
            }
        }
        x
    }

    pub fn from_real(h: usize, d: usize, x: &[f64]) -> Result<Self> {
        if x.len() != d * (2 * h + 1) {
            return Err(Error::Dimension(format!(
                "expected {} real unknowns, got {}",
                d * (2 * h + 1),
                x.len()
            )));
        }
        let mut s = Self::zeros(h, d);
        for i in 0..d {
            s.coeffs[i] = Complex64::new(x[i], 0.0);
        }
        for k in 1..=h {
            for i in 0..d {
                let o = real_offset(d, k, i);
                s.coeffs[k * d + i] = Complex64::new(x[o], x[o + 1]);
            }
        }
        Ok(s)
    }

    /// Value of DOF `i` at `tau`.
    pub fn eval_dof(&self, i: usize, tau: f64) -> f64 {
        let mut v = self.coeff(0, i).re;
        for k in 1..=self.h {
            let c = self.coeff(k, i);
            let (s, co) = (k as f64 * tau).sin_cos();
            v += 2.0 * (c.re * co - c.im * s);
        }
        v
    }

    /// Derivative with respect to `tau` of DOF `i`.
    pub fn eval_dof_derivative(&self, i: usize, tau: f64) -> f64 {
        let mut v = 0.0;
        for k in 1..=self.h {
            let c = self.coeff(k, i);
            let kf = k as f64;
            let (s, co) = (kf * tau).sin_cos();
            v += -2.0 * kf * (c.re * s + c.im * co);
        }
        v
    }

    /// Derivative series `q'`.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.h, self.d);
        for k in 1..=self.h {
            for i in 0..self.d {
                out.coeffs[k * self.d + i] = Complex64::new(0.0, k as f64) * self.coeff(k, i);
            }
        }
        out
    }

    /// Upper bound of `max_τ |q_i(τ)|` from the two-sided coefficient sum.
    pub fn coefficient_sum_bound(&self, i: usize) -> f64 {
        self.coeff(0, i).norm() + 2.0 * (1..=self.h).map(|k| self.coeff(k, i).norm()).sum::<f64>()
    }

    /// Samples on `N` equidistant points `τ_n = 2πn/N` (row `n`, column DOF).
    pub fn sample_equidistant(&self, n: usize) -> Result<Vec<Vec<f64>>> {
        if n <= 2 * self.h {
            return Err(Error::Aliasing { n_aft: n, h_out: self.h });
        }
        let mut out = vec![vec![0.0; self.d]; n];
        for i in 0..self.d {
            let col: Vec<Complex64> = (0..=self.h).map(|k| self.coeff(k, i)).collect();
            let values = synthesize(&col, n);
            for (row, v) in out.iter_mut().zip(values) {
                row[i] = v;
            }
        }
        Ok(out)
    }
}

/// Offset of `Re q̂(k)_i` (and `Im` at `+1`) in the packed real vector, `k ≥ 1`.
#[inline]
pub fn real_offset(d: usize, k: usize, i: usize) -> usize {
    debug_assert!(k >= 1);
    d + (k - 1) * 2 * d + 2 * i
}

/// Evaluates the series at every time point; returns `d × taus.len()` samples
/// in DOF-major order.
pub fn fourier_eval(q: &FourierSeries, taus: &[f64]) -> Vec<Vec<f64>> {
    (0..q.d).map(|i| taus.iter().map(|&t| q.eval_dof(i, t)).collect()).collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Real signal on `n` equidistant points from one-sided coefficients
/// `c[0..=H]`; requires `n > 2H`.
pub fn synthesize(c: &[Complex64], n: usize) -> Vec<f64> {
    let h = c.len().saturating_sub(1);
    assert!(n > 2 * h, "synthesis grid too coarse");
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(c[0].re, 0.0);
    for k in 1..=h {
        buf[k] = c[k];
        buf[n - k] = c[k].conj();
    }
    plan(n, true).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Full discrete Fourier spectrum `(1/n) Σ x_m e^{-ikτ_m}` for `k = 0..n`.
pub fn spectrum(samples: &[f64]) -> Vec<Complex64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(n, false).process(&mut buf);
    let inv = 1.0 / n as f64;
    buf.iter_mut().for_each(|z| *z *= inv);
    buf
}

/// One-sided coefficients `0..=h_out` of real samples on an equidistant grid.
pub fn analyze(samples: &[f64], h_out: usize) -> Vec<Complex64> {
    let mut s = spectrum(samples);
    s.truncate(h_out + 1);
    s
}

/// Direct `O(N H)` DFT used to cross-check the FFT path.
pub fn analyze_direct(samples: &[f64], h_out: usize) -> Vec<Complex64> {
    let n = samples.len();
    (0..=h_out)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &v) in samples.iter().enumerate() {
                let phase = -2.0 * PI * ((k * m) % n) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, phase);
            }
            acc / n as f64
        })
        .collect()
}

/// JSON exchange form `{H, d, Omega, re[k][dof], im[k][dof]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierRecord {
    #[serde(rename = "H")]
    pub h: usize,
    pub d: usize,
    #[serde(rename = "Omega")]
    pub omega: f64,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl FourierRecord {
    pub fn new(q: &FourierSeries, omega: f64) -> Self {
        let re = (0..=q.h).map(|k| q.harmonic(k).iter().map(|c| c.re).collect()).collect();
        let im = (0..=q.h).map(|k| q.harmonic(k).iter().map(|c| c.im).collect()).collect();
        Self { h: q.h, d: q.d, omega, re, im }
    }

    pub fn series(&self) -> Result<FourierSeries> {
        if self.re.len() != self.h + 1 || self.im.len() != self.h + 1 {
            return Err(Error::Dimension("harmonic count does not match H".into()));
        }
        let mut coeffs = Vec::with_capacity((self.h + 1) * self.d);
        for (re, im) in self.re.iter().zip(&self.im) {
            if re.len() != self.d || im.len() != self.d {
                return Err(Error::Dimension("DOF count does not match d".into()));
            }
            coeffs.extend(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)));
        }
        FourierSeries::from_coeffs(self.h, self.d, coeffs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

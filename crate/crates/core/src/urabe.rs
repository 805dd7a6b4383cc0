//! Urabe's a-posteriori existence test and error bound for HB solutions.
//!
//! The measures refer to the first-order form `x = [q; q']` in normalized
//! time `τ`, `x' = F(x, τ)` with
//! `F = [u; (f_ex - Ω D u - K q - f_nl(q)) / Ω²]`:
//!
//! * `r` bounds `|x_H' - F(x_H, τ)|`, i.e. the HB time-domain residual
//!   divided by `Ω²`;
//! * `Δ(δ)` bounds the variation of `∂F/∂x`, i.e. the Jacobian variation
//!   divided by `Ω²`;
//! * `M` bounds the propagation of errors over one period.
//!
//! If some `δ > 0` satisfies `M Δ(δ) ≤ κ ≤ 1 - M r / δ` with `κ < 1`, an
//! exact periodic solution exists within `δ` of the approximation.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{integrate_into, multiply_accumulate, operational_matrices, ChebSeries};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::hb::{aft_coeffs, hb_residual, newton_polish, newton_solve, AftSettings, NewtonSettings};
use crate::models::{ModelSpec, OrbitSamples};
use crate::stability::{cheby_fundamental, sample_jacobian_cheby, ChebFundamental};

/// Multipliers closer than this to `+1` make `I - Φ(2π)` singular.
pub const RESOLVENT_TOLERANCE: f64 = 1e-8;

/// Sample count for non-polynomial forces.
pub const NON_POLYNOMIAL_N_AFT: usize = 1 << 13;

/// Certification result at one solution point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrabeMeasures {
    #[serde(rename = "H")]
    pub h: usize,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub feasible: bool,
    /// Largest condition number among the pointwise inverses `Φ⁻¹(s)`.
    pub worst_condition: f64,
}

/// Settings of a single certification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifySettings {
    /// Chebyshev order per harmonic, `C = c_factor · H`.
    pub c_factor: usize,
    /// Lower limit on `C`.
    pub c_min: usize,
    /// Highest harmonic in the residual bound; `None` selects the model
    /// default.
    pub h_plus: Option<usize>,
    /// Upper end of the `δ` bracket relative to `M r`.
    pub cap_factor: f64,
}

impl Default for CertifySettings {
    fn default() -> Self {
        Self { c_factor: 5, c_min: 40, h_plus: None, cap_factor: 1e3 }
    }
}

impl CertifySettings {
    /// `C = 5H` for polynomial forces, `8H` otherwise.
    pub fn for_model(model: &ModelSpec) -> Self {
        let c_factor = if model.nonlinearity.polynomial_degree().is_some() { 5 } else { 8 };
        Self { c_factor, ..Self::default() }
    }

    pub fn order(&self, h: usize) -> usize {
        (self.c_factor * h).max(self.c_min).max(3)
    }
}

/// Default `H⁺`: exact top harmonic for polynomial forces, `N_aft/2 - 1`
/// otherwise.
pub fn default_h_plus(model: &ModelSpec, h: usize) -> usize {
    match model.force_harmonic_reach(h) {
        Some(reach) => reach.max(h),
        None => NON_POLYNOMIAL_N_AFT / 2 - 1,
    }
}

/// Residual bound `r`: retained HB residual plus the higher harmonics of
/// `f_nl(q_H)` up to `h_plus`, each `k ≥ 1` term counted twice, divided
/// by `Ω²`.
pub fn residual_bound(model: &ModelSpec, q: &FourierSeries, omega: f64, h_plus: usize) -> Result<f64> {
    let h = q.order();
    if h_plus < h {
        return Err(Error::Coverage { h_plus, required: h });
    }
    let n_aft = match model.nonlinearity.polynomial_degree() {
        Some(p) => {
            let reach = p.max(1) * h;
            if h_plus < reach {
                return Err(Error::Coverage { h_plus, required: reach });
            }
            // harmonics up to h_plus are alias-free when N > reach + h_plus
            model.default_n_aft(h).max(reach + h_plus + 1).max(2 * h_plus + 1)
        }
        None => NON_POLYNOMIAL_N_AFT.max(2 * h_plus + 1),
    };
    let retained = hb_residual(model, q, omega)?;
    let mut sum = 0.0;
    for k in 0..=h {
        let w = if k == 0 { 1.0 } else { 2.0 };
        sum += w * block_norm(retained.blocks.harmonic(k));
    }
    if h_plus > h {
        let f = aft_coeffs(model, q, &AftSettings::new(n_aft, h_plus)?)?;
        for k in h + 1..=h_plus {
            sum += 2.0 * block_norm(f.harmonic(k));
        }
    }
    Ok(sum / (omega * omega))
}

fn block_norm(b: &[num_complex::Complex64]) -> f64 {
    b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Error-propagation measure together with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MMeasure {
    pub m: f64,
    /// Time at which the inner integral is largest.
    pub tau_max: f64,
    pub worst_condition: f64,
}

/// `M = sqrt(2π max_τ ∫ |H(τ, s)|_F² ds)` from a Chebyshev fundamental
/// matrix, through the Gram form
/// `trace(ΦᵀΦ (∫₀^τ B Bᵀ + ∫_τ^{2π} B₂ B₂ᵀ))` with `B = R Φ⁻¹`,
/// `B₂ = R Φ(2π) Φ⁻¹` and `R = (I - Φ(2π))⁻¹`.
///
/// `Φ⁻¹` is formed by pointwise inversion at the nodes. The Gram form
/// squares the cancellation inside `Φ(τ) R Φ⁻¹(s)`, so strongly hyperbolic
/// orbits lose accuracy roughly as `cond(Φ)²·ε`.
pub fn m_measure(fund: &ChebFundamental) -> Result<MMeasure> {
    let c = fund.order;
    let n2 = 2 * fund.dofs;
    let ch = |r: usize, col: usize| r * n2 + col;
    let ops = operational_matrices(c)?;
    let phi_end = fund.monodromy();

    let eig = phi_end.clone().complex_eigenvalues();
    let distance = eig.iter().map(|l| (l - num_complex::Complex64::new(1.0, 0.0)).norm()).fold(f64::INFINITY, f64::min);
    if distance < RESOLVENT_TOLERANCE {
        return Err(Error::SingularResolvent { distance });
    }
    let resolvent = (DMatrix::identity(n2, n2) - &phi_end)
        .try_inverse()
        .ok_or(Error::SingularResolvent { distance })?;
    let resolvent2 = &resolvent * &phi_end;

    // Φ at the nodes, inverted pointwise and transformed back
    let coeffs = DMatrix::from_fn(c, n2 * n2, |j, k| fund.phi.channel(k)[j]);
    let values = ops.eval_matrix() * &coeffs;
    let mut inv_values = DMatrix::zeros(c, n2 * n2);
    let mut worst_condition: f64 = 0.0;
    for n in 0..c {
        let p = DMatrix::from_fn(n2, n2, |r, col| values[(n, ch(r, col))]);
        let inv = p.clone().try_inverse().ok_or(Error::Singular { context: "fundamental matrix" })?;
        worst_condition = worst_condition.max(p.norm() * inv.norm());
        for r in 0..n2 {
            for col in 0..n2 {
                inv_values[(n, ch(r, col))] = inv[(r, col)];
            }
        }
    }
    let inv_series = ops.transform_channels(&inv_values)?;

    // B(s) = R Φ⁻¹(s) and B₂(s) = R Φ(2π) Φ⁻¹(s), coefficient by coefficient
    let left_multiply = |left: &DMatrix<f64>| -> ChebSeries {
        let mut out = ChebSeries::zeros(c, n2 * n2);
        for r in 0..n2 {
            for col in 0..n2 {
                let dst = out.channel_mut(ch(r, col));
                for k in 0..n2 {
                    let w = left[(r, k)];
                    if w == 0.0 {
                        continue;
                    }
                    for (o, v) in dst.iter_mut().zip(inv_series.channel(ch(k, col))) {
                        *o += w * v;
                    }
                }
            }
        }
        out
    };
    let b1 = left_multiply(&resolvent);
    let b2 = left_multiply(&resolvent2);

    // cumulative Gram integrals ∫₀^τ B Bᵀ ds
    let gram_integral = |b: &ChebSeries| -> ChebSeries {
        let mut out = ChebSeries::zeros(c, n2 * n2);
        let mut prod = vec![0.0; c];
        for a in 0..n2 {
            for bb in a..n2 {
                prod.iter_mut().for_each(|v| *v = 0.0);
                for k in 0..n2 {
                    multiply_accumulate(b.channel(ch(a, k)), b.channel(ch(bb, k)), 1.0, &mut prod);
                }
                integrate_into(&prod, out.channel_mut(ch(a, bb)));
                if bb != a {
                    let copy = out.channel(ch(a, bb)).to_vec();
                    out.channel_mut(ch(bb, a)).copy_from_slice(&copy);
                }
            }
        }
        out
    };
    let w1 = gram_integral(&b1);
    let w2 = gram_integral(&b2);
    let w2_total = w2.end_values();

    let inner = |phi: &[f64], w1v: &[f64], w2v: &[f64]| -> f64 {
        // trace(ΦᵀΦ (W1 + W2)) with W2(τ) = ∫_τ^{2π} B₂B₂ᵀ
        let p = DMatrix::from_fn(n2, n2, |r, col| phi[ch(r, col)]);
        let ptp = p.transpose() * p;
        let mut acc = 0.0;
        for a in 0..n2 {
            for bb in 0..n2 {
                let k = ch(bb, a);
                acc += ptp[(a, bb)] * (w1v[k] + w2_total[k] - w2v[k]);
            }
        }
        acc
    };
    let eval_at = |tau: f64| -> f64 { inner(&fund.phi.eval(tau), &w1.eval(tau), &w2.eval(tau)) };

    let nodes = ops.grid().nodes();
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (n, &tau) in nodes.iter().enumerate() {
        let v = eval_at(tau);
        if v > best.0 {
            best = (v, n);
        }
    }
    let lo = nodes[best.1.saturating_sub(1)];
    let hi = nodes[(best.1 + 1).min(c - 1)];
    let (tau_max, peak) = golden_max(&eval_at, lo, hi, best.0, nodes[best.1]);
    Ok(MMeasure { m: (2.0 * PI * peak.max(0.0)).sqrt(), tau_max, worst_condition })
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, start_value: f64, start: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut best = (start, start_value);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if b - a <= 1e-10 * (1.0 + b.abs()) {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Smallest `δ` satisfying the existence condition, with `κ = M Δ(δ)`.
///
/// The search starts at `δ₀ = M r`, expands geometrically up to
/// `cap_factor · M r` and then bisects to a relative width of `1e-3`.
pub fn tightest_delta(r: f64, m: f64, delta_fn: &dyn Fn(f64) -> f64, cap_factor: f64) -> Option<(f64, f64)> {
    if !(r >= 0.0) || !(m > 0.0) || !r.is_finite() || !m.is_finite() {
        return None;
    }
    let feasible = |delta: f64| -> Option<f64> {
        let kappa = m * delta_fn(delta);
        (kappa < 1.0 && delta * (1.0 - kappa) >= m * r).then_some(kappa)
    };
    let d0 = m * r;
    if d0 == 0.0 {
        return Some((0.0, 0.0));
    }
    if let Some(k) = feasible(d0) {
        return Some((d0, k));
    }
    let cap = cap_factor * d0;
    let mut lo = d0;
    let mut hi = None;
    let mut d = d0;
    while d < cap {
        d = (d * 1.25).min(cap);
        if feasible(d).is_some() {
            hi = Some(d);
            break;
        }
        lo = d;
    }
    let mut hi = hi?;
    while (hi - lo) > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    feasible(hi).map(|k| (hi, k))
}

/// Checks both existence inequalities for a given `(δ, κ)`.
pub fn existence_holds(r: f64, m: f64, delta: f64, kappa: f64, delta_fn: &dyn Fn(f64) -> f64) -> bool {
    delta > 0.0 && kappa < 1.0 && m * delta_fn(delta) <= kappa * (1.0 + 1e-12) && kappa <= 1.0 - m * r / delta
}

/// `Δ(δ)` in the first-order form along the orbit of `q`.
pub fn state_delta_bound<'a>(model: &'a ModelSpec, orbit: &'a OrbitSamples, omega: f64) -> impl Fn(f64) -> f64 + 'a {
    let scale = 1.0 / (omega * omega);
    move |delta| scale * model.delta_bound(orbit, delta)
}

/// Computes `r`, `M` and the tightest `δ` at a converged HB point.
pub fn certify(model: &ModelSpec, q: &FourierSeries, omega: f64, settings: &CertifySettings) -> Result<UrabeMeasures> {
    let h = q.order();
    let h_plus = settings.h_plus.unwrap_or_else(|| default_h_plus(model, h));
    let r = residual_bound(model, q, omega, h_plus)?;
    let traj = sample_jacobian_cheby(model, q, settings.order(h), omega)?;
    let mm = m_measure(&cheby_fundamental(model, &traj)?)?;
    let orbit = OrbitSamples::new(q, model.default_n_aft(h))?;
    let delta_fn = state_delta_bound(model, &orbit, omega);
    let found = tightest_delta(r, mm.m, &delta_fn, settings.cap_factor);
    Ok(UrabeMeasures {
        h,
        r,
        m: mm.m,
        delta: found.map(|x| x.0),
        kappa: found.map(|x| x.1),
        feasible: found.is_some(),
        worst_condition: mm.worst_condition,
    })
}

/// Acceptance criterion of the adaptive `H` refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Delta,
    Residual,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Delta => "delta",
            Criterion::Residual => "residual",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveHSettings {
    pub h_min: usize,
    pub h_max: usize,
    pub step: usize,
    pub threshold: f64,
    pub criterion: Criterion,
}

impl Default for AdaptiveHSettings {
    fn default() -> Self {
        Self { h_min: 1, h_max: 100, step: 2, threshold: 1e-3, criterion: Criterion::Delta }
    }
}

impl AdaptiveHSettings {
    pub fn validate(&self) -> Result<()> {
        if self.h_min == 0 || self.h_min > self.h_max {
            return Err(Error::InvalidParameter(format!("need 1 <= H_min <= H_max, got {} and {}", self.h_min, self.h_max)));
        }
        if self.step == 0 || self.step % 2 != 0 {
            return Err(Error::InvalidParameter(format!("H step must be positive and even, got {}", self.step)));
        }
        if !(self.threshold > 0.0) {
            return Err(Error::InvalidParameter("threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of the refinement at one frequency.
#[derive(Debug, Clone)]
pub struct AdaptiveOutcome {
    pub q: FourierSeries,
    pub measures: UrabeMeasures,
    /// `true` if the criterion is met at the accepted order.
    pub conclusive: bool,
    /// Newton failed at some raised order.
    pub diverged: bool,
    /// Every order visited with its measures.
    pub visited: Vec<UrabeMeasures>,
}

struct Evaluated {
    q: FourierSeries,
    measures: UrabeMeasures,
    ok: bool,
}

fn evaluate(
    model: &ModelSpec,
    guess: &FourierSeries,
    omega: f64,
    h: usize,
    settings: &AdaptiveHSettings,
    cert: &CertifySettings,
    newton: &NewtonSettings,
) -> Result<Option<Evaluated>> {
    let mut ns = *newton;
    ns.n_aft = None;
    ns.max_iter = ns.max_iter.max(60);
    let q = match newton_solve(model, &guess.resized(h), omega, &ns) {
        Ok((q, _)) => newton_polish(model, &q, omega, 4)?.0,
        Err(err @ (Error::Divergence { .. } | Error::Singular { .. })) => {
            log::warn!("HB failed at H = {h}, Omega = {omega}: {err}");
            return Ok(None);
        }
        Err(err) => return Err(err),
    };
    let h_plus = cert.h_plus.unwrap_or_else(|| default_h_plus(model, h));
    let r = residual_bound(model, &q, omega, h_plus)?;
    let unbounded = UrabeMeasures { h, r, m: f64::NAN, delta: None, kappa: None, feasible: false, worst_condition: f64::NAN };
    let measures = match settings.criterion {
        Criterion::Delta => match certify(model, &q, omega, cert) {
            Ok(m) => m,
            // no M means no bound, which the refinement treats like a large δ
            Err(err @ (Error::SingularResolvent { .. } | Error::Singular { .. } | Error::NumericalRange)) => {
                log::debug!("no M at H = {h}, Omega = {omega}: {err}");
                UrabeMeasures { m: f64::INFINITY, ..unbounded }
            }
            Err(err) => return Err(err),
        },
        Criterion::Residual => unbounded,
    };
    let ok = match settings.criterion {
        Criterion::Delta => measures.delta.is_some_and(|d| d <= settings.threshold),
        Criterion::Residual => measures.r < settings.threshold,
    };
    Ok(Some(Evaluated { q, measures, ok }))
}

/// Adaptive harmonic refinement at fixed `Ω`, starting from the order of
/// `guess`:
///
/// 1. compute the measures at the current `H`;
/// 2. accept if the criterion holds and fails at `H - step`;
/// 3. if it fails, raise `H` (or stop inconclusively at `H_max`);
/// 4. if it holds, lower `H` (or accept at `H_min`).
pub fn adaptive_h(
    model: &ModelSpec,
    guess: &FourierSeries,
    omega: f64,
    settings: &AdaptiveHSettings,
    cert: &CertifySettings,
    newton: &NewtonSettings,
) -> Result<AdaptiveOutcome> {
    settings.validate()?;
    let mut h = guess.order().clamp(settings.h_min, settings.h_max);
    // keep H on the lattice H_min + k·step
    h = settings.h_min + (h - settings.h_min) / settings.step * settings.step;
    let mut cache: BTreeMap<usize, Evaluated> = BTreeMap::new();
    let mut last_good = guess.clone();
    loop {
        if !cache.contains_key(&h) {
            let seed = cache.range(..=h).next_back().map(|(_, e)| e.q.clone()).unwrap_or_else(|| last_good.clone());
            match evaluate(model, &seed, omega, h, settings, cert, newton)? {
                Some(e) => {
                    last_good = e.q.clone();
                    cache.insert(h, e);
                }
                None => return finish(cache, h, true, false),
            }
        }
        let ok = cache[&h].ok;
        if ok {
            let below_failed = h >= settings.h_min + settings.step
                && cache.get(&(h - settings.step)).is_some_and(|e| !e.ok);
            if below_failed || h == settings.h_min {
                return finish(cache, h, false, true);
            }
            h -= settings.step;
        } else {
            if h + settings.step > settings.h_max {
                return finish(cache, h, false, false);
            }
            h += settings.step;
        }
    }
}

fn finish(mut cache: BTreeMap<usize, Evaluated>, h: usize, diverged: bool, conclusive: bool) -> Result<AdaptiveOutcome> {
    let visited = cache.values().map(|e| e.measures.clone()).collect();
    // fall back to the highest successful order when Newton failed at h
    let key = if cache.contains_key(&h) { h } else { *cache.keys().next_back().ok_or(Error::Divergence { iterations: 0, residual: f64::NAN })? };
    let e = cache.remove(&key).expect("key present");
    Ok(AdaptiveOutcome { q: e.q, measures: e.measures, conclusive: conclusive && e.ok, diverged, visited })
}

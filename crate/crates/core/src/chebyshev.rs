//! Chebyshev analysis on the normalized period `[0, 2π]`.
//!
//! Polynomials of the first kind are shifted from `[-1, 1]` via
//! `x = (τ - π) / π`. A series of order `C` stores `C` coefficients; the
//! coefficient at zero-based index `j` multiplies the polynomial of degree `j`.
//!
//! Two operational matrices act on coefficient vectors:
//!
//! * the integration matrix `G`, stored in the printed row layout (row `j`
//!   holds the coefficients of the antiderivative of `T_j`, vanishing at
//!   `τ = 0`), so that integration of a coefficient column is `Gᵀ a`;
//! * the product matrix `P(a)`, mapping `b` to the coefficients of `a·b`
//!   truncated to order `C`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};

/// Condition numbers above this are rejected by [`OperationalMatrices::new`].
pub const MAX_TRANSFORM_CONDITION: f64 = 1e12;

/// Non-equidistant collocation grid containing both interval limits.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    order: usize,
    nodes: Vec<f64>,
    /// Angle `θ_n` with `T_j(τ_n) = cos(j θ_n)`.
    angles: Vec<f64>,
}

impl ChebGrid {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidOrder {
                order,
                reason: "a Chebyshev grid needs at least two nodes",
            });
        }
        let c = order as f64;
        // n = 1/2, 2, 3, ..., C-1, C+1/2
        let index = |i: usize| -> f64 {
            if i == 0 {
                0.5
            } else if i == order - 1 {
                c + 0.5
            } else {
                (i + 1) as f64
            }
        };
        let mut nodes = Vec::with_capacity(order);
        let mut angles = Vec::with_capacity(order);
        for i in 0..order {
            let s = (index(i) - 0.5) / c;
            nodes.push(PI * (1.0 - (s * PI).cos()));
            angles.push(PI * (1.0 - s));
        }
        nodes[0] = 0.0;
        nodes[order - 1] = 2.0 * PI;
        angles[0] = PI;
        angles[order - 1] = 0.0;
        Ok(Self { order, nodes, angles })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
}

/// Builds the collocation grid of order `c`.
pub fn cheb_nodes(c: usize) -> Result<ChebGrid> {
    ChebGrid::new(c)
}

/// Value of the degree-`degree` shifted polynomial at angle `theta`.
#[inline]
fn basis_at_angle(degree: usize, theta: f64) -> f64 {
    (degree as f64 * theta).cos()
}

/// Angle of the normalized time `tau` (clamped into `[0, 2π]`).
#[inline]
pub fn angle_of(tau: f64) -> f64 {
    let x = ((tau - PI) / PI).clamp(-1.0, 1.0);
    x.acos()
}

/// Evaluation matrix `T` with entry `(n, j) = T_j(τ_n)`.
///
/// Rows at the endpoints are filled exactly with `(-1)^j` and `1`.
pub fn eval_matrix(grid: &ChebGrid) -> DMatrix<f64> {
    let c = grid.order;
    DMatrix::from_fn(c, c, |n, j| {
        if n == 0 {
            if j % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else if n == c - 1 {
            1.0
        } else {
            basis_at_angle(j, grid.angles[n])
        }
    })
}

/// The printed integration matrix `G` (row layout), including the factor π
/// for the interval length.
pub fn integration_matrix(c: usize) -> Result<DMatrix<f64>> {
    if c < 3 {
        return Err(Error::InvalidOrder {
            order: c,
            reason: "the integration matrix needs C >= 3",
        });
    }
    let mut g = DMatrix::zeros(c, c);
    for_each_integration_entry(c, |row, col, v| g[(row, col)] = v);
    Ok(g)
}

/// Visits the non-zero entries `(row, col, value)` of `G`.
fn for_each_integration_entry(c: usize, mut visit: impl FnMut(usize, usize, f64)) {
    visit(0, 0, PI);
    if c > 1 {
        visit(0, 1, PI);
    }
    if c > 1 {
        visit(1, 0, -PI / 4.0);
        if c > 2 {
            visit(1, 2, PI / 4.0);
        }
    }
    for n in 2..c {
        let nf = n as f64;
        let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
        visit(n, 0, PI * sign / (nf * nf - 1.0));
        visit(n, n - 1, -PI / (2.0 * (nf - 1.0)));
        if n + 1 < c {
            visit(n, n + 1, PI / (2.0 * (nf + 1.0)));
        }
    }
}

/// Coefficients of `∫_0^τ a`, i.e. `Gᵀ a`, in `O(C)` operations.
pub fn integrate(a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    integrate_into(a, &mut out);
    out
}

/// In-place variant of [`integrate`]; `out` is overwritten.
pub fn integrate_into(a: &[f64], out: &mut [f64]) {
    let c = a.len();
    assert_eq!(out.len(), c);
    out.iter_mut().for_each(|v| *v = 0.0);
    if c == 0 {
        return;
    }
    for_each_integration_entry(c, |row, col, v| out[col] += v * a[row]);
}

/// Product operational matrix `P(a)` acting on column vectors.
pub fn product_matrix(a: &[f64]) -> DMatrix<f64> {
    let c = a.len();
    DMatrix::from_fn(c, c, |k, n| {
        let mut v = 0.0;
        if k >= n {
            v += 0.5 * a[k - n];
        }
        if n + k < c {
            v += 0.5 * a[n + k];
        }
        if k > 0 && n >= k {
            v += 0.5 * a[n - k];
        }
        v
    })
}

/// Truncated product `P(a) b` without forming the matrix.
pub fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    multiply_accumulate(a, b, 1.0, &mut out);
    out
}

/// `out += scale · P(a) b`.
pub fn multiply_accumulate(a: &[f64], b: &[f64], scale: f64, out: &mut [f64]) {
    let c = a.len();
    assert!(b.len() == c && out.len() == c);
    let half = 0.5 * scale;
    for (m, &am) in a.iter().enumerate() {
        if am == 0.0 {
            continue;
        }
        for (n, &bn) in b.iter().enumerate() {
            let t = half * am * bn;
            if m + n < c {
                out[m + n] += t;
            }
            out[m.abs_diff(n)] += t;
        }
    }
}

/// Evaluates a single coefficient vector at `tau`.
pub fn eval_coeffs(coeffs: &[f64], tau: f64) -> f64 {
    let theta = angle_of(tau);
    coeffs
        .iter()
        .enumerate()
        .map(|(j, &a)| a * basis_at_angle(j, theta))
        .sum()
}

/// Chebyshev coefficients of one or more scalar channels, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    order: usize,
    channels: usize,
    coeffs: Vec<f64>,
}

impl ChebSeries {
    pub fn from_coeffs(order: usize, channels: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != order * channels {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                order * channels,
                coeffs.len()
            )));
        }
        Ok(Self { order, channels, coeffs })
    }

    pub fn scalar(coeffs: Vec<f64>) -> Self {
        Self { order: coeffs.len(), channels: 1, coeffs }
    }

    pub fn zeros(order: usize, channels: usize) -> Self {
        Self { order, channels, coeffs: vec![0.0; order * channels] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.coeffs[ch * self.order..(ch + 1) * self.order]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.coeffs[ch * self.order..(ch + 1) * self.order]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Values of every channel at `tau`.
    pub fn eval(&self, tau: f64) -> Vec<f64> {
        let theta = angle_of(tau);
        let basis: Vec<f64> = (0..self.order).map(|j| basis_at_angle(j, theta)).collect();
        (0..self.channels)
            .map(|ch| self.channel(ch).iter().zip(&basis).map(|(a, t)| a * t).sum())
            .collect()
    }

    /// Value at `τ = 2π`: the plain coefficient sum.
    pub fn end_values(&self) -> Vec<f64> {
        (0..self.channels).map(|ch| self.channel(ch).iter().sum()).collect()
    }

    /// Value at `τ = 0`: the alternating coefficient sum.
    pub fn start_values(&self) -> Vec<f64> {
        (0..self.channels)
            .map(|ch| {
                self.channel(ch)
                    .iter()
                    .enumerate()
                    .map(|(j, a)| if j % 2 == 0 { *a } else { -*a })
                    .sum()
            })
            .collect()
    }

    /// Antiderivative of every channel, vanishing at `τ = 0`.
    pub fn integrated(&self) -> Self {
        let mut out = Self::zeros(self.order, self.channels);
        for ch in 0..self.channels {
            integrate_into(self.channel(ch), out.channel_mut(ch));
        }
        out
    }
}

/// Evaluation matrix, its factorization and the integration matrix for one order.
#[derive(Debug)]
pub struct OperationalMatrices {
    grid: ChebGrid,
    eval: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
    integration: DMatrix<f64>,
}

impl OperationalMatrices {
    pub fn new(order: usize) -> Result<Self> {
        let grid = ChebGrid::new(order.max(3))?;
        if order < 3 {
            return Err(Error::InvalidOrder { order, reason: "operational matrices need C >= 3" });
        }
        let eval = eval_matrix(&grid);
        let lu = eval.clone().lu();
        let inverse = lu.try_inverse().ok_or(Error::Conditioning { order, condition: f64::INFINITY })?;
        let condition = one_norm(&eval) * one_norm(&inverse);
        if !condition.is_finite() || condition > MAX_TRANSFORM_CONDITION {
            return Err(Error::Conditioning { order, condition });
        }
        let integration = integration_matrix(order)?;
        Ok(Self { grid, eval, lu, condition, integration })
    }

    pub fn order(&self) -> usize {
        self.grid.order
    }

    pub fn grid(&self) -> &ChebGrid {
        &self.grid
    }

    pub fn eval_matrix(&self) -> &DMatrix<f64> {
        &self.eval
    }

    pub fn integration(&self) -> &DMatrix<f64> {
        &self.integration
    }

    /// 1-norm condition number of the evaluation matrix.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `T a = samples` for the coefficients of one channel.
    pub fn transform(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let c = self.order();
        if samples.len() != c {
            return Err(Error::Dimension(format!("expected {c} samples, got {}", samples.len())));
        }
        let rhs = DVector::from_column_slice(samples);
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or(Error::Conditioning { order: c, condition: self.condition })?;
        Ok(sol.as_slice().to_vec())
    }

    /// Transforms several channels at once; `samples` is `C × channels`.
    pub fn transform_channels(&self, samples: &DMatrix<f64>) -> Result<ChebSeries> {
        let c = self.order();
        if samples.nrows() != c {
            return Err(Error::Dimension(format!(
                "expected {c} sample rows, got {}",
                samples.nrows()
            )));
        }
        let sol = self
            .lu
            .solve(samples)
            .ok_or(Error::Conditioning { order: c, condition: self.condition })?;
        ChebSeries::from_coeffs(c, samples.ncols(), sol.as_slice().to_vec())
    }
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

type Cache = RwLock<HashMap<usize, Arc<OperationalMatrices>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized [`OperationalMatrices`] for order `c`.
pub fn operational_matrices(c: usize) -> Result<Arc<OperationalMatrices>> {
    if let Some(m) = cache().read().expect("cache poisoned").get(&c) {
        return Ok(Arc::clone(m));
    }
    let built = Arc::new(OperationalMatrices::new(c)?);
    let mut guard = cache().write().expect("cache poisoned");
    Ok(Arc::clone(guard.entry(c).or_insert(built)))
}

/// Convenience wrapper: coefficients of `samples` taken on the grid of the
/// given matrices.
pub fn cheb_transform(samples: &[f64], ops: &OperationalMatrices) -> Result<ChebSeries> {
    Ok(ChebSeries::scalar(ops.transform(samples)?))
}

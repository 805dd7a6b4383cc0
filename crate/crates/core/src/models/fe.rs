//! Banded symmetric matrices and a subspace-iteration eigensolver for the
//! lowest modes of `K φ = λ M φ`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric matrix stored by its upper band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    /// Adds `v` to entry `(i, j)` (and its mirror); `|i - j|` must lie in the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "entry outside band");
        self.data[i * (self.bw + 1) + (j - i)] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            for (o, &a) in row.iter().enumerate().skip(1) {
                let j = i + o;
                if j >= self.n {
                    break;
                }
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Banded Cholesky factor `U` with `Uᵀ U = A`.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut u = vec![0.0; n * w];
        let at = |u: &[f64], i: usize, j: usize| u[i * w + (j - i)];
        for i in 0..n {
            let k0 = i.saturating_sub(bw);
            let mut s = self.get(i, i);
            for k in k0..i {
                let v = at(&u, k, i);
                s -= v * v;
            }
            if !(s > 0.0) {
                return Err(Error::Assembly(format!("matrix not positive definite at row {i}")));
            }
            let d = s.sqrt();
            u[i * w] = d;
            for j in i + 1..(i + w).min(n) {
                let mut s = self.get(i, j);
                for k in j.saturating_sub(bw)..i {
                    s -= at(&u, k, i) * at(&u, k, j);
                }
                u[i * w + (j - i)] = s / d;
            }
        }
        Ok(BandedCholesky { n, bw, u })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    u: Vec<f64>,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, w) = (self.n, self.bw + 1);
        let mut y = b.to_vec();
        // Uᵀ y = b
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.u[k * w + (i - k)] * y[k];
            }
            y[i] = s / self.u[i * w];
        }
        // U x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..(i + w).min(n) {
                s -= self.u[i * w + (j - i)] * y[j];
            }
            y[i] = s / self.u[i * w];
        }
        y
    }
}

/// Lowest `count` eigenpairs of `K φ = λ M φ`, M-normalized, ascending.
pub fn lowest_modes(k: &BandedSym, m: &BandedSym, count: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k.size();
    if count == 0 || count > n {
        return Err(Error::InvalidParameter(format!("cannot extract {count} modes from {n} DOFs")));
    }
    let p = (2 * count).max(count + 8).min(n);
    let chol = k.cholesky()?;

    // deterministic start: smooth sine shapes over the DOF index
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| (((j + 1) as f64) * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin() + 1e-3 * ((i * (j + 3)) % 7) as f64)
                .collect()
        })
        .collect();

    let mut prev = vec![f64::INFINITY; count];
    for _iter in 0..500 {
        let mx: Vec<Vec<f64>> = x.iter().map(|v| m.mul_vec(v)).collect();
        let y: Vec<Vec<f64>> = mx.iter().map(|v| chol.solve(v)).collect();
        let my: Vec<Vec<f64>> = y.iter().map(|v| m.mul_vec(v)).collect();
        // K Y = M X, so the projected stiffness needs no product with K
        let kr = DMatrix::from_fn(p, p, |a, b| dot(&y[a], &mx[b]));
        let mr = DMatrix::from_fn(p, p, |a, b| dot(&y[a], &my[b]));
        let kr = (&kr + kr.transpose()) * 0.5;
        let mr = (&mr + mr.transpose()) * 0.5;
        let l = mr
            .cholesky()
            .ok_or_else(|| Error::Assembly("subspace lost rank".into()))?
            .l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Assembly("subspace lost rank".into()))?;
        let c = &linv * &kr * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let q = linv.transpose() * &eig.eigenvectors;
        x = order
            .iter()
            .map(|&col| {
                let mut v = vec![0.0; n];
                for (r, yr) in y.iter().enumerate() {
                    let w = q[(r, col)];
                    for (vi, yi) in v.iter_mut().zip(yr) {
                        *vi += w * yi;
                    }
                }
                v
            })
            .collect();
        let lambdas: Vec<f64> = order.iter().take(count).map(|&i| eig.eigenvalues[i]).collect();
        let converged = lambdas
            .iter()
            .zip(&prev)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs());
        prev = lambdas;
        if converged {
            let mut modes = Vec::with_capacity(count);
            for v in x.into_iter().take(count) {
                let norm = dot(&v, &m.mul_vec(&v)).sqrt();
                modes.push(v.into_iter().map(|e| e / norm).collect());
            }
            return Ok((prev, modes));
        }
    }
    Err(Error::EigenNonConvergence)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

use nalgebra::{DMatrix, DVector};

use super::{floquet_classify, FloquetResult, GridKind, JacobianTrajectory, Method};
use crate::chebyshev::{integrate, integrate_into, multiply_accumulate, operational_matrices, ChebSeries};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Linear system `C Δq̌ = c` for the Chebyshev coefficients of the
/// displacement part of the fundamental matrix.
///
/// Unknowns are stacked DOF-major: DOF `i` owns coefficients
/// `i*C .. (i+1)*C`. The right-hand side has one column per unit initial
/// state (`d` displacements followed by `d` velocities).
#[derive(Debug, Clone)]
pub struct ChebStabilitySystem {
    pub order: usize,
    pub dofs: usize,
    pub omega: f64,
    pub matrix: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    /// Coefficients of `J`, channel `i*d + l` holding entry `(i, l)`.
    pub jacobian: ChebSeries,
}

impl ChebStabilitySystem {
    pub fn new(model: &ModelSpec, traj: &JacobianTrajectory) -> Result<Self> {
        let GridKind::Chebyshev { order: c } = traj.kind else {
            return Err(Error::InvalidParameter("Chebyshev method needs the Chebyshev grid".into()));
        };
        let d = model.dofs();
        let ops = operational_matrices(c)?;
        let samples = DMatrix::from_fn(c, d * d, |n, ch| traj.samples[n][(ch / d, ch % d)]);
        let jacobian = ops.transform_channels(&samples)?;
        Self::assemble(model, jacobian, traj.omega)
    }

    /// Builds the system from Jacobian coefficients directly.
    pub fn assemble(model: &ModelSpec, jacobian: ChebSeries, omega: f64) -> Result<Self> {
        let d = model.dofs();
        let c = jacobian.order();
        if jacobian.channels() != d * d {
            return Err(Error::Dimension(format!("expected {} Jacobian channels", d * d)));
        }
        let w2 = omega * omega;
        let gt = integration_transposed(c);
        let n = c * d;
        let mut matrix = DMatrix::zeros(n, n);
        let mut col = vec![0.0; c];
        let mut once = vec![0.0; c];
        let mut twice = vec![0.0; c];
        for i in 0..d {
            for l in 0..d {
                let jil = jacobian.channel(i * d + l);
                let (kil, dil) = (model.stiffness[(i, l)], model.damping[(i, l)]);
                for m in 0..c {
                    // column m of (K_il I + P(J_il)), integrated twice
                    product_column(jil, m, &mut col);
                    col[m] += kil;
                    integrate_into(&col, &mut once);
                    integrate_into(&once, &mut twice);
                    for r in 0..c {
                        let mut v = twice[r] + omega * dil * gt[(r, m)];
                        if i == l && r == m {
                            v += w2;
                        }
                        matrix[(i * c + r, l * c + m)] = v;
                    }
                }
            }
        }
        let mut rhs = DMatrix::zeros(n, 2 * d);
        let g0 = integrate(&unit_vec(c, 0));
        for m in 0..d {
            // unit initial displacement of DOF m
            rhs[(m * c, m)] += w2;
            for i in 0..d {
                let dim = model.damping[(i, m)];
                for r in 0..c {
                    rhs[(i * c + r, m)] += omega * dim * g0[r];
                }
            }
            // unit initial velocity of DOF m
            for r in 0..c {
                rhs[(m * c + r, d + m)] += w2 * g0[r];
            }
        }
        Ok(Self { order: c, dofs: d, omega, matrix, rhs, jacobian })
    }

    /// Displacement coefficients for all `2d` initial states.
    pub fn solve(&self) -> Result<DMatrix<f64>> {
        self.matrix
            .clone()
            .lu()
            .solve(&self.rhs)
            .ok_or(Error::Singular { context: "Chebyshev stability system" })
    }
}

/// Column `m` of the product matrix `P(a)`.
fn product_column(a: &[f64], m: usize, out: &mut [f64]) {
    let c = a.len();
    for (k, o) in out.iter_mut().enumerate() {
        let mut v = 0.0;
        if k >= m {
            v += 0.5 * a[k - m];
        }
        if m + k < c {
            v += 0.5 * a[m + k];
        }
        if k > 0 && m >= k {
            v += 0.5 * a[m - k];
        }
        *o = v;
    }
}

fn unit_vec(c: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; c];
    v[j] = 1.0;
    v
}

fn integration_transposed(c: usize) -> DMatrix<f64> {
    let mut gt = DMatrix::zeros(c, c);
    for m in 0..c {
        let col = integrate(&unit_vec(c, m));
        for r in 0..c {
            gt[(r, m)] = col[r];
        }
    }
    gt
}

/// Chebyshev representation of the fundamental matrix `Φ(τ)` on `[0, 2π]`.
#[derive(Debug, Clone)]
pub struct ChebFundamental {
    pub order: usize,
    pub dofs: usize,
    /// Channel `r * 2d + c` holds entry `(r, c)` of the `2d × 2d` matrix.
    pub phi: ChebSeries,
}

impl ChebFundamental {
    fn to_matrix(&self, values: &[f64]) -> DMatrix<f64> {
        let n = 2 * self.dofs;
        DMatrix::from_fn(n, n, |r, c| values[r * n + c])
    }

    pub fn eval(&self, tau: f64) -> DMatrix<f64> {
        self.to_matrix(&self.phi.eval(tau))
    }

    pub fn monodromy(&self) -> DMatrix<f64> {
        self.to_matrix(&self.phi.end_values())
    }

    pub fn initial(&self) -> DMatrix<f64> {
        self.to_matrix(&self.phi.start_values())
    }
}

/// Solves the collocation system and recovers velocities from the
/// once-integrated variational equation.
pub fn cheby_fundamental(model: &ModelSpec, traj: &JacobianTrajectory) -> Result<ChebFundamental> {
    let sys = ChebStabilitySystem::new(model, traj)?;
    fundamental_from_system(model, &sys)
}

pub(crate) fn fundamental_from_system(model: &ModelSpec, sys: &ChebStabilitySystem) -> Result<ChebFundamental> {
    let (c, d, omega) = (sys.order, sys.dofs, sys.omega);
    let x = sys.solve()?;
    let n2 = 2 * d;
    let mut phi = ChebSeries::zeros(c, n2 * n2);
    let mut force = vec![0.0; c];
    let mut integral = vec![0.0; c];
    for col in 0..n2 {
        let block = |l: usize| -> DVector<f64> { DVector::from_iterator(c, x.view((l * c, col), (c, 1)).iter().cloned()) };
        let blocks: Vec<DVector<f64>> = (0..d).map(block).collect();
        for i in 0..d {
            // Δq_i
            phi.channel_mut(i * n2 + col).copy_from_slice(blocks[i].as_slice());
            // Ω² (Δq'(τ) - Δq'(0)) = -Ω D (Δq - Δq(0)) - ∫ (K + J) Δq
            force.iter_mut().for_each(|v| *v = 0.0);
            for l in 0..d {
                let kil = model.stiffness[(i, l)];
                for (f, xl) in force.iter_mut().zip(blocks[l].iter()) {
                    *f += kil * xl;
                }
                multiply_accumulate(sys.jacobian.channel(i * d + l), blocks[l].as_slice(), 1.0, &mut force);
            }
            integrate_into(&force, &mut integral);
            let vel = phi.channel_mut((d + i) * n2 + col);
            for r in 0..c {
                let mut damp = 0.0;
                for l in 0..d {
                    damp += model.damping[(i, l)] * blocks[l][r];
                }
                vel[r] = -damp / omega - integral[r] / (omega * omega);
            }
            // constant parts: Δq'(0) and the D Δq(0) term
            let mut v0 = if col >= d && col - d == i { 1.0 } else { 0.0 };
            if col < d {
                v0 += model.damping[(i, col)] / omega;
            }
            vel[0] += v0;
        }
    }
    Ok(ChebFundamental { order: c, dofs: d, phi })
}

/// Monodromy matrix from the Chebyshev fundamental matrix.
pub fn monodromy_cheby(model: &ModelSpec, traj: &JacobianTrajectory) -> Result<FloquetResult> {
    let f = cheby_fundamental(model, traj)?;
    floquet_classify(f.monodromy(), Method::Cheby, f.order)
}

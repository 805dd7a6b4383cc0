//! Floquet stability of periodic orbits.
//!
//! The variational equation `Ω² Δq'' + Ω D Δq' + (K + J(τ)) Δq = 0` is
//! integrated over one period for the `2d` unit initial states; the
//! resulting monodromy matrix `Φ(2π)` acts on the state `[Δq; Δq']`.

mod cheby;
mod floquet;
mod mexp;
mod ntp;
mod shooting;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chebyshev::ChebGrid;
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::models::ModelSpec;

pub use cheby::{cheby_fundamental, monodromy_cheby, ChebFundamental, ChebStabilitySystem};
pub use floquet::{floquet_classify, BifurcationHint, FloquetResult, STABILITY_MARGIN};
pub use mexp::{expm, monodromy_mexp};
pub use ntp::monodromy_ntp;
pub use shooting::{shooting_reference, ShootingResult, ShootingSettings};

/// Monodromy backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mexp,
    Ntp,
    Cheby,
    Shooting,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mexp => "mexp",
            Method::Ntp => "ntp",
            Method::Cheby => "cheby",
            Method::Shooting => "shooting",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mexp" => Ok(Method::Mexp),
            "ntp" => Ok(Method::Ntp),
            "cheby" => Ok(Method::Cheby),
            "shooting" => Ok(Method::Shooting),
            other => Err(Error::InvalidParameter(format!("unknown stability method '{other}'"))),
        }
    }
}

/// Time grid on which the Jacobian was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// `N + 1` points `τ_n = 2π(n-1)/N`, both ends included.
    Equidistant { steps: usize },
    /// Chebyshev collocation grid of order `C`.
    Chebyshev { order: usize },
}

/// `J(q(τ_n))` along the orbit.
#[derive(Debug, Clone)]
pub struct JacobianTrajectory {
    pub kind: GridKind,
    pub taus: Vec<f64>,
    pub samples: Vec<DMatrix<f64>>,
    pub omega: f64,
}

impl JacobianTrajectory {
    pub fn dofs(&self) -> usize {
        self.samples.first().map_or(0, |m| m.nrows())
    }
}

/// `N + 1` equidistant points from `0` to `2π` inclusive.
pub fn equidistant_grid(steps: usize) -> Vec<f64> {
    let mut t: Vec<f64> = (0..steps).map(|n| 2.0 * PI * n as f64 / steps as f64).collect();
    t.push(2.0 * PI);
    t
}

/// Samples `J` at arbitrary time points.
pub fn sample_jacobian(model: &ModelSpec, q: &FourierSeries, taus: &[f64]) -> Vec<DMatrix<f64>> {
    let d = model.dofs();
    let mut row = vec![0.0; d];
    taus.iter()
        .map(|&t| {
            for (i, v) in row.iter_mut().enumerate() {
                *v = q.eval_dof(i, t);
            }
            model.jacobian_nl(&row)
        })
        .collect()
}

/// Jacobian on the equidistant grid with `steps` intervals.
pub fn sample_jacobian_equidistant(
    model: &ModelSpec,
    q: &FourierSeries,
    steps: usize,
    omega: f64,
) -> Result<JacobianTrajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("at least one time step required".into()));
    }
    let taus = equidistant_grid(steps);
    let samples = if steps > 2 * q.order() {
        // FFT synthesis on the periodic grid, end point repeats the start
        let mut rows = q.sample_equidistant(steps)?;
        rows.push(rows[0].clone());
        rows.iter().map(|r| model.jacobian_nl(r)).collect()
    } else {
        sample_jacobian(model, q, &taus)
    };
    Ok(JacobianTrajectory { kind: GridKind::Equidistant { steps }, taus, samples, omega })
}

/// Jacobian on the Chebyshev grid of order `order`.
pub fn sample_jacobian_cheby(model: &ModelSpec, q: &FourierSeries, order: usize, omega: f64) -> Result<JacobianTrajectory> {
    let grid = ChebGrid::new(order)?;
    let taus = grid.nodes().to_vec();
    let samples = sample_jacobian(model, q, &taus);
    Ok(JacobianTrajectory { kind: GridKind::Chebyshev { order }, taus, samples, omega })
}

/// First-order system matrix `[[0, I], [-(K + J)/Ω², -D/Ω]]`.
pub fn state_matrix(model: &ModelSpec, j: &DMatrix<f64>, omega: f64) -> DMatrix<f64> {
    let d = model.dofs();
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    let w2 = omega * omega;
    for r in 0..d {
        a[(r, d + r)] = 1.0;
        for c in 0..d {
            a[(d + r, c)] = -(model.stiffness[(r, c)] + j[(r, c)]) / w2;
            a[(d + r, d + c)] = -model.damping[(r, c)] / omega;
        }
    }
    a
}

/// `det Φ(2π) = exp(-2π tr(D) / Ω)`.
pub fn liouville_determinant(model: &ModelSpec, omega: f64) -> f64 {
    (-2.0 * PI * model.damping.trace() / omega).exp()
}

/// Samples the Jacobian for `method` at `resolution` (`N` or `C`) and
/// computes the monodromy matrix. `Shooting` re-integrates the nonlinear
/// equation from the HB orbit with `resolution` time steps.
pub fn monodromy(
    model: &ModelSpec,
    q: &FourierSeries,
    omega: f64,
    method: Method,
    resolution: usize,
) -> Result<FloquetResult> {
    match method {
        Method::Mexp => monodromy_mexp(model, &sample_jacobian_equidistant(model, q, resolution, omega)?),
        Method::Ntp => monodromy_ntp(model, &sample_jacobian_equidistant(model, q, resolution, omega)?),
        Method::Cheby => monodromy_cheby(model, &sample_jacobian_cheby(model, q, resolution, omega)?),
        Method::Shooting => {
            let settings = ShootingSettings { steps: resolution, ..Default::default() };
            Ok(shooting_reference(model, omega, q, &settings)?.floquet)
        }
    }
}

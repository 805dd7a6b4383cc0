use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{unit_output, ModelSpec, Nonlinearity, OrbitSamples};
use crate::error::{Error, Result};

/// Safety factor on the sampled variation bound (the sampled maximum can
/// miss the true peak between grid points).
pub const STOP_BOUND_SAFETY: f64 = 1.05;

/// Smooth unilateral spring
/// `f(q) = s(q-g)/2 + sqrt((s(q-g)/2)² + ε)` acting on one DOF.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedStop {
    pub dof: usize,
    pub stiffness: f64,
    pub clearance: f64,
    pub eps: f64,
}

impl RegularizedStop {
    pub fn value(&self, q: f64) -> f64 {
        let a = 0.5 * self.stiffness * (q - self.clearance);
        let root = (a * a + self.eps).sqrt();
        if a >= 0.0 {
            a + root
        } else {
            // avoids cancellation far from the contact
            self.eps / (root - a)
        }
    }

    pub fn slope(&self, q: f64) -> f64 {
        let s = self.stiffness;
        let x = s * (q - self.clearance);
        0.5 * s * (1.0 + x / (x * x + 4.0 * self.eps).sqrt())
    }
}

impl Nonlinearity for RegularizedStop {
    fn force(&self, q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[self.dof] = self.value(q[self.dof]);
    }

    fn jacobian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        out[(self.dof, self.dof)] = self.slope(q[self.dof]);
    }

    fn polynomial_degree(&self) -> Option<usize> {
        None
    }

    fn jacobian_variation(&self, orbit: &OrbitSamples, delta: f64) -> f64 {
        let peak = orbit
            .samples
            .iter()
            .map(|row| {
                let q = row[self.dof];
                let g = self.slope(q);
                (self.slope(q + delta) - g).max(g - self.slope(q - delta))
            })
            .fold(0.0, f64::max);
        STOP_BOUND_SAFETY * peak
    }
}

/// Two-mass chain with an elastic stop on the first mass (stiffness 100,
/// unit clearance) and forcing `0.1 cos Ωt` on the second.
pub fn two_dof_stop(eps_reg: f64) -> Result<ModelSpec> {
    if !(eps_reg > 0.0) {
        return Err(Error::InvalidParameter(format!("eps_reg must be positive, got {eps_reg}")));
    }
    let stiffness = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]);
    Ok(ModelSpec {
        name: "two_dof_stop".into(),
        damping: DMatrix::from_row_slice(2, 2, &[0.03, -0.03, -0.03, 0.06]),
        stiffness,
        nonlinearity: Arc::new(RegularizedStop { dof: 0, stiffness: 100.0, clearance: 1.0, eps: eps_reg }),
        forcing: vec![(1, vec![Complex64::new(0.0, 0.0), Complex64::new(0.05, 0.0)])],
        output: unit_output(2, 0),
        omega1: ((3.0 - 5f64.sqrt()) / 2.0).sqrt(),
    })
}

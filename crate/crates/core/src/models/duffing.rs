use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{unit_output, ModelSpec, Nonlinearity, OrbitSamples};

/// Elementwise cubic spring `f_i = c q_i³`.
#[derive(Debug, Clone, Copy)]
pub struct CubicSpring {
    pub coeff: f64,
}

impl Nonlinearity for CubicSpring {
    fn force(&self, q: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(q) {
            *o = self.coeff * x * x * x;
        }
    }

    fn jacobian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        out.fill(0.0);
        for (i, &x) in q.iter().enumerate() {
            out[(i, i)] = 3.0 * self.coeff * x * x;
        }
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(3)
    }

    fn jacobian_variation(&self, orbit: &OrbitSamples, delta: f64) -> f64 {
        // |3c((Q + δ)² - Q²)| grows with Q, so the coefficient-sum bound of
        // max|q_i| gives an upper bound.
        let s = &orbit.series;
        (0..s.dofs())
            .map(|i| {
                let q = s.coefficient_sum_bound(i);
                let v = 3.0 * self.coeff.abs() * ((q + delta).powi(2) - q * q);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Softening Duffing oscillator `q'' + 0.12 q' + q - 0.1 q³ = 0.2 cos Ωt`.
pub fn duffing() -> ModelSpec {
    duffing_with(0.12, 1.0, -0.1, 0.2)
}

/// Duffing oscillator `q'' + c q' + k q + k3 q³ = f cos Ωt`.
pub fn duffing_with(damping: f64, stiffness: f64, cubic: f64, forcing: f64) -> ModelSpec {
    ModelSpec {
        name: "duffing".into(),
        damping: DMatrix::from_element(1, 1, damping),
        stiffness: DMatrix::from_element(1, 1, stiffness),
        nonlinearity: Arc::new(CubicSpring { coeff: cubic }),
        forcing: vec![(1, vec![Complex64::new(0.5 * forcing, 0.0)])],
        output: unit_output(1, 0),
        omega1: stiffness.sqrt(),
    }
}

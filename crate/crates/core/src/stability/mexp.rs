use nalgebra::DMatrix;

use super::{floquet_classify, state_matrix, FloquetResult, GridKind, JacobianTrajectory, Method};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalRange);
    }
    let e = a.clone().exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalRange);
    }
    Ok(e)
}

/// `Φ(2π) = Π exp(A(τ_n) 2π/N)`, multiplied from the left.
pub fn monodromy_mexp(model: &ModelSpec, traj: &JacobianTrajectory) -> Result<FloquetResult> {
    let GridKind::Equidistant { steps } = traj.kind else {
        return Err(Error::InvalidParameter("matrix exponential method needs an equidistant grid".into()));
    };
    let h = 2.0 * std::f64::consts::PI / steps as f64;
    let d = model.dofs();
    let mut phi = DMatrix::identity(2 * d, 2 * d);
    for j in traj.samples.iter().take(steps) {
        let step = expm(&(state_matrix(model, j, traj.omega) * h))?;
        phi = step * phi;
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalRange);
    }
    floquet_classify(phi, Method::Mexp, steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_rotation() {
        let t = 0.7f64;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = expm(&a).unwrap();
        let exact = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!((e - exact).amax() < 1e-15);
    }

    #[test]
    fn exponential_of_jordan_block() {
        // exp([[a, 1], [0, a]]) = e^a [[1, 1], [0, 1]]
        let a = -3.5f64;
        let e = expm(&DMatrix::from_row_slice(2, 2, &[a, 1.0, 0.0, a])).unwrap();
        let ea = a.exp();
        let exact = DMatrix::from_row_slice(2, 2, &[ea, ea, 0.0, ea]);
        assert!((e - exact).amax() < 1e-15 * 4.0);
    }

    #[test]
    fn overflow_is_reported() {
        let a = DMatrix::from_element(1, 1, 1e4);
        assert!(matches!(expm(&a), Err(Error::NumericalRange)));
    }
}

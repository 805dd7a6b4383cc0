use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Method;
use crate::error::{Error, Result};

/// Multipliers with `|λ| ≤ 1 + STABILITY_MARGIN` count as stable.
pub const STABILITY_MARGIN: f64 = 1e-6;

/// How the leading multiplier left the unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BifurcationHint {
    /// Real multiplier beyond `+1`.
    TurningPoint,
    /// Real multiplier beyond `-1`.
    PeriodDoubling,
    /// Complex pair outside the unit circle.
    Torus,
}

#[derive(Debug, Clone)]
pub struct FloquetResult {
    pub monodromy: DMatrix<f64>,
    /// Sorted by descending magnitude, then real part, then imaginary part.
    pub multipliers: Vec<Complex64>,
    pub stable: bool,
    pub method: Method,
    pub resolution: usize,
    /// Set for unstable orbits only.
    pub hint: Option<BifurcationHint>,
}

impl FloquetResult {
    pub fn leading(&self) -> Complex64 {
        self.multipliers[0]
    }

    pub fn max_abs(&self) -> f64 {
        self.multipliers[0].norm()
    }

    /// Multipliers outside the unit disk (beyond the stability margin).
    pub fn unstable_count(&self) -> usize {
        self.multipliers.iter().filter(|l| l.norm() > 1.0 + STABILITY_MARGIN).count()
    }
}

fn ordering(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    let (na, nb) = (a.norm(), b.norm());
    let tol = 1e-12 * na.max(nb).max(1e-300);
    if (na - nb).abs() > tol {
        return nb.total_cmp(&na);
    }
    let tol_re = 1e-12 * a.re.abs().max(b.re.abs()).max(1e-300);
    if (a.re - b.re).abs() > tol_re {
        return b.re.total_cmp(&a.re);
    }
    b.im.total_cmp(&a.im)
}

/// Eigenvalues of the monodromy matrix and the stability verdict.
pub fn floquet_classify(monodromy: DMatrix<f64>, method: Method, resolution: usize) -> Result<FloquetResult> {
    if !monodromy.is_square() || monodromy.nrows() % 2 != 0 {
        return Err(Error::Dimension(format!(
            "monodromy must be square of even size, got {}x{}",
            monodromy.nrows(),
            monodromy.ncols()
        )));
    }
    if monodromy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalRange);
    }
    let schur = nalgebra::Schur::try_new(monodromy.clone(), f64::EPSILON, 10_000).ok_or(Error::EigenNonConvergence)?;
    let mut multipliers: Vec<Complex64> = schur.complex_eigenvalues().iter().cloned().collect();
    multipliers.sort_by(ordering);
    let lead = multipliers[0];
    let stable = lead.norm() <= 1.0 + STABILITY_MARGIN;
    let hint = if stable {
        None
    } else if lead.im.abs() > 1e-8 * lead.norm() {
        Some(BifurcationHint::Torus)
    } else if lead.re > 0.0 {
        Some(BifurcationHint::TurningPoint)
    } else {
        Some(BifurcationHint::PeriodDoubling)
    };
    Ok(FloquetResult { monodromy, multipliers, stable, method, resolution, hint })
}

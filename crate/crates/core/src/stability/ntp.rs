use nalgebra::DMatrix;

use super::{floquet_classify, FloquetResult, GridKind, JacobianTrajectory, Method};
use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Constant-average-acceleration Newmark integration of the variational
/// equation for the `2d` unit initial states.
pub fn monodromy_ntp(model: &ModelSpec, traj: &JacobianTrajectory) -> Result<FloquetResult> {
    let GridKind::Equidistant { steps } = traj.kind else {
        return Err(Error::InvalidParameter("Newmark method needs an equidistant grid".into()));
    };
    let phi = newmark_variational(model, &traj.samples, traj.omega, steps)?;
    floquet_classify(phi, Method::Ntp, steps)
}

/// Runs the linear Newmark scheme over `steps` steps with `J` given at the
/// `steps + 1` grid points and returns `[Δq_{N+1}; Δu_{N+1}]`.
pub(crate) fn newmark_variational(
    model: &ModelSpec,
    jac: &[DMatrix<f64>],
    omega: f64,
    steps: usize,
) -> Result<DMatrix<f64>> {
    let d = model.dofs();
    if jac.len() != steps + 1 {
        return Err(Error::Dimension(format!("expected {} Jacobian samples, got {}", steps + 1, jac.len())));
    }
    let nf = steps as f64;
    let c1 = nf / std::f64::consts::PI; // 2/h
    let c2 = c1 * c1; // 4/h²
    let w2 = omega * omega;
    let dmat = &model.damping;

    let mut q = DMatrix::zeros(d, 2 * d);
    let mut u = DMatrix::zeros(d, 2 * d);
    for i in 0..d {
        q[(i, i)] = 1.0;
        u[(i, d + i)] = 1.0;
    }
    // Ω² a = -(Ω D u + (K + J) q)
    let mut a = -(dmat * &u * omega + (&model.stiffness + &jac[0]) * &q) / w2;

    let s_base = DMatrix::identity(d, d) * (c1 * omega).powi(2) + dmat * (c1 * omega) + &model.stiffness;
    for j in jac.iter().skip(1) {
        let s = &s_base + j;
        let b = (&q * c2 + &u * (2.0 * c1) + &a) * w2 + dmat * (&q * c1 + &u) * omega;
        let q_new = s.lu().solve(&b).ok_or(Error::Singular { context: "Newmark step matrix" })?;
        let dq = &q_new - &q;
        let u_new = &dq * c1 - &u;
        let a_new = &dq * c2 - &u * (2.0 * c1) - &a;
        q = q_new;
        u = u_new;
        a = a_new;
    }
    let mut phi = DMatrix::zeros(2 * d, 2 * d);
    phi.view_mut((0, 0), (d, 2 * d)).copy_from(&q);
    phi.view_mut((d, 0), (d, 2 * d)).copy_from(&u);
    Ok(phi)
}

//! Two clamped beams joined rigidly in rotation, with a quadratic + cubic
//! spring acting on the transverse displacement of the joint.
//!
//! The primary beam (length `l1`, square section) and the slender beam
//! (length `l2`, thin section) are discretized with cubic Hermite
//! Euler-Bernoulli elements (two DOFs per node: deflection and rotation).
//! Both outer ends are clamped; the joint node shares its rotation DOF.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fe::{lowest_modes, BandedSym};
use super::{ModelSpec, Nonlinearity, OrbitSamples};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EclBeamConfig {
    /// Density in kg/m³.
    pub rho: f64,
    /// Young's modulus in N/m².
    pub young: f64,
    /// Section width `z` shared by both beams.
    pub width: f64,
    pub h1: f64,
    pub h2: f64,
    pub l1: f64,
    pub l2: f64,
    pub elements: usize,
    /// Retained bending modes.
    pub modes: usize,
    /// Quadratic joint spring in N/m².
    pub k2: f64,
    /// Cubic joint spring in N/m³.
    pub k3: f64,
    /// Rayleigh coefficient multiplying the stiffness matrix.
    pub stiffness_proportional: f64,
    /// Rayleigh coefficient multiplying the mass matrix.
    pub mass_proportional: f64,
    /// Amplitude of the harmonic point load at the joint, in N.
    pub force: f64,
}

impl Default for EclBeamConfig {
    fn default() -> Self {
        Self {
            rho: 7800.0,
            young: 205e9,
            width: 0.014,
            h1: 0.014,
            h2: 0.0005,
            l1: 0.7,
            l2: 0.04,
            elements: 1000,
            modes: 3,
            k2: -1.05e7,
            k3: 8e9,
            stiffness_proportional: 3e-7,
            mass_proportional: 5.0,
            force: 1.0,
        }
    }
}

impl EclBeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elements < 10 {
            return Err(Error::InvalidParameter(format!(
                "at least 10 elements required, got {}",
                self.elements
            )));
        }
        let positive = [
            ("rho", self.rho),
            ("young", self.young),
            ("width", self.width),
            ("h1", self.h1),
            ("h2", self.h2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("k3", self.k3),
            ("stiffness_proportional", self.stiffness_proportional),
            ("mass_proportional", self.mass_proportional),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.modes == 0 {
            return Err(Error::InvalidParameter("at least one mode must be retained".into()));
        }
        Ok(())
    }

    /// Elements on the primary and the slender beam, proportional to length.
    fn split(&self) -> (usize, usize) {
        let n1 = ((self.elements as f64) * self.l1 / (self.l1 + self.l2)).round() as usize;
        let n1 = n1.clamp(1, self.elements - 1);
        (n1, self.elements - n1)
    }
}

/// Assembled FE matrices over the free DOFs.
#[derive(Debug, Clone)]
pub struct EclFeModel {
    pub mass: BandedSym,
    pub stiffness: BandedSym,
    /// Free-DOF index of the joint deflection.
    pub joint_dof: usize,
    pub config: EclBeamConfig,
}

fn element_stiffness(ei: f64, le: f64) -> [[f64; 4]; 4] {
    let c = ei / le.powi(3);
    let l = le;
    [
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l * l * c, -6.0 * l * c, 2.0 * l * l * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l * l * c, -6.0 * l * c, 4.0 * l * l * c],
    ]
}

fn element_mass(rho_a: f64, le: f64) -> [[f64; 4]; 4] {
    let c = rho_a * le / 420.0;
    let l = le;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [22.0 * l * c, 4.0 * l * l * c, 13.0 * l * c, -3.0 * l * l * c],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [-13.0 * l * c, -3.0 * l * l * c, -22.0 * l * c, 4.0 * l * l * c],
    ]
}

/// Assembles mass and stiffness of the clamped-clamped two-beam structure.
pub fn ecl_assemble(config: &EclBeamConfig) -> Result<EclFeModel> {
    config.validate()?;
    let (n1, n2) = config.split();
    let nodes = n1 + n2 + 1;
    // nodes 0 and nodes-1 are clamped; free DOFs belong to nodes 1..nodes-2
    let n_free = 2 * (nodes - 2);
    let free = |node: usize, local: usize| -> Option<usize> {
        if node == 0 || node == nodes - 1 {
            None
        } else {
            Some(2 * (node - 1) + local)
        }
    };
    let mut mass = BandedSym::zeros(n_free, 3);
    let mut stiffness = BandedSym::zeros(n_free, 3);
    let section = |h: f64| (config.width * h, config.width * h.powi(3) / 12.0);
    let (a1, i1) = section(config.h1);
    let (a2, i2) = section(config.h2);
    for e in 0..(n1 + n2) {
        let (area, inertia, le) = if e < n1 {
            (a1, i1, config.l1 / n1 as f64)
        } else {
            (a2, i2, config.l2 / n2 as f64)
        };
        let ke = element_stiffness(config.young * inertia, le);
        let me = element_mass(config.rho * area, le);
        let dofs = [free(e, 0), free(e, 1), free(e + 1, 0), free(e + 1, 1)];
        for a in 0..4 {
            let Some(ga) = dofs[a] else { continue };
            for b in a..4 {
                let Some(gb) = dofs[b] else { continue };
                stiffness.add(ga, gb, ke[a][b]);
                mass.add(ga, gb, me[a][b]);
            }
        }
    }
    let joint_dof = free(n1, 0).ok_or_else(|| Error::Assembly("joint coincides with a clamp".into()))?;
    Ok(EclFeModel { mass, stiffness, joint_dof, config: config.clone() })
}

/// Quadratic + cubic spring on `w = φᵀ q`: `f = φ (k2 w² + k3 w³)`.
#[derive(Debug, Clone)]
pub struct JointSpring {
    pub phi: Vec<f64>,
    pub k2: f64,
    pub k3: f64,
}

impl JointSpring {
    fn displacement(&self, q: &[f64]) -> f64 {
        self.phi.iter().zip(q).map(|(a, b)| a * b).sum()
    }
}

impl Nonlinearity for JointSpring {
    fn force(&self, q: &[f64], out: &mut [f64]) {
        let w = self.displacement(q);
        let f = self.k2 * w * w + self.k3 * w * w * w;
        for (o, p) in out.iter_mut().zip(&self.phi) {
            *o = p * f;
        }
    }

    fn jacobian(&self, q: &[f64], out: &mut DMatrix<f64>) {
        let w = self.displacement(q);
        let g = 2.0 * self.k2 * w + 3.0 * self.k3 * w * w;
        let d = self.phi.len();
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = self.phi[i] * self.phi[j] * g;
            }
        }
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(3)
    }

    fn jacobian_variation(&self, orbit: &OrbitSamples, delta: f64) -> f64 {
        // |g(w+e) - g(w)| <= 2|k2| e + 3|k3| (2|w| e + e²), |e| <= |φ| δ
        let s = &orbit.series;
        let mut w_bound = 0.0;
        for k in 0..=s.order() {
            let c: Complex64 = self.phi.iter().enumerate().map(|(i, p)| s.coeff(k, i) * p).sum();
            w_bound += if k == 0 { c.norm() } else { 2.0 * c.norm() };
        }
        let phi2: f64 = self.phi.iter().map(|p| p * p).sum();
        let e = phi2.sqrt() * delta;
        phi2 * (2.0 * self.k2.abs() * e + 3.0 * self.k3.abs() * (2.0 * w_bound * e + e * e))
    }
}

/// Modal data of the reduced model, for inspection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalRecord {
    pub natural_frequencies: Vec<f64>,
    pub damping_ratios: Vec<f64>,
    pub joint_mode_shapes: Vec<f64>,
    pub modal_stiffness: Vec<f64>,
    pub modal_damping: Vec<f64>,
}

impl ModalRecord {
    pub fn from_model(model: &ModelSpec, joint: &[f64]) -> Self {
        let d = model.dofs();
        let k: Vec<f64> = (0..d).map(|i| model.stiffness[(i, i)]).collect();
        let c: Vec<f64> = (0..d).map(|i| model.damping[(i, i)]).collect();
        let w: Vec<f64> = k.iter().map(|v| v.sqrt()).collect();
        Self {
            damping_ratios: c.iter().zip(&w).map(|(c, w)| c / (2.0 * w)).collect(),
            natural_frequencies: w,
            joint_mode_shapes: joint.to_vec(),
            modal_stiffness: k,
            modal_damping: c,
        }
    }
}

/// Modal truncation to the lowest `modes` bending modes.
pub fn ecl_modal_reduce(fe: &EclFeModel, modes: usize) -> Result<ModelSpec> {
    if modes == 0 {
        return Err(Error::InvalidParameter("at least one mode required".into()));
    }
    let (lambdas, shapes) = lowest_modes(&fe.stiffness, &fe.mass, modes)?;
    let cfg = &fe.config;
    let mut phi: Vec<f64> = shapes.iter().map(|s| s[fe.joint_dof]).collect();
    for p in phi.iter_mut() {
        // sign convention: positive joint deflection
        if *p < 0.0 {
            *p = -*p;
        }
    }
    let stiffness = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&lambdas));
    let damping = DMatrix::from_fn(modes, modes, |i, j| {
        if i == j {
            cfg.stiffness_proportional * lambdas[i] + cfg.mass_proportional
        } else {
            0.0
        }
    });
    let forcing: Vec<Complex64> = phi.iter().map(|p| Complex64::new(0.5 * cfg.force * p, 0.0)).collect();
    Ok(ModelSpec {
        name: format!("ecl_d{modes}"),
        damping,
        stiffness,
        nonlinearity: Arc::new(JointSpring { phi: phi.clone(), k2: cfg.k2, k3: cfg.k3 }),
        forcing: vec![(1, forcing)],
        output: phi,
        omega1: lambdas[0].sqrt(),
    })
}

/// Assembly followed by modal truncation to `config.modes` modes.
pub fn ecl_model(config: &EclBeamConfig) -> Result<ModelSpec> {
    let fe = ecl_assemble(config)?;
    ecl_modal_reduce(&fe, config.modes)
}

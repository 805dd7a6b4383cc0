//! Serializable output records: per-point certification JSON and branch
//! CSV rows.

use serde::{Deserialize, Serialize};

use crate::continuation::BranchPoint;
use crate::stability::FloquetResult;
use crate::urabe::{Criterion, UrabeMeasures};

/// Certification of one continuation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationRecord {
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(rename = "H")]
    pub h: usize,
    pub r: f64,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub conclusive: bool,
    pub criterion: Criterion,
}

impl CertificationRecord {
    pub fn new(omega: f64, measures: &UrabeMeasures, conclusive: bool, criterion: Criterion) -> Self {
        Self {
            omega,
            h: measures.h,
            r: measures.r,
            m: measures.m.is_finite().then_some(measures.m),
            delta: measures.delta,
            kappa: measures.kappa,
            conclusive,
            criterion,
        }
    }
}

/// One branch CSV row; unset quantities serialize as empty fields.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BranchRow {
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(rename = "Omega/omega1")]
    pub omega_ratio: f64,
    pub amplitude: f64,
    #[serde(rename = "max|lambda|")]
    pub max_abs_multiplier: Option<f64>,
    pub stable: Option<bool>,
    #[serde(rename = "H")]
    pub h: usize,
    pub delta: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
}

impl BranchRow {
    pub fn from_point(point: &BranchPoint, omega1: f64, floquet: Option<&FloquetResult>) -> Self {
        let u = point.urabe.as_ref();
        Self {
            omega: point.omega,
            omega_ratio: point.omega / omega1,
            amplitude: point.amplitude,
            max_abs_multiplier: floquet.map(|f| f.max_abs()),
            stable: floquet.map(|f| f.stable),
            h: point.order(),
            delta: u.and_then(|u| u.delta),
            r: u.map(|u| u.r),
            m: u.map(|u| u.m).filter(|m| m.is_finite()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_json_uses_paper_field_names() {
        let m = UrabeMeasures { h: 3, r: 1e-4, m: f64::INFINITY, delta: None, kappa: None, feasible: false, worst_condition: 1.0 };
        let rec = CertificationRecord::new(0.2, &m, false, Criterion::Delta);
        let s = serde_json::to_string(&rec).unwrap();
        assert!(s.contains("\"Omega\":0.2") && s.contains("\"M\":null") && s.contains("\"criterion\":\"delta\""));
    }
}

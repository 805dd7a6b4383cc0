use std::path::{Path, PathBuf};

use harmbal::continuation::ContinuationSettings;
use harmbal::fourier::{FourierRecord, FourierSeries};
use harmbal::models::{duffing_with, ecl_model, two_dof_stop, EclBeamConfig, ModelSpec};
use harmbal::stability::Method;
use harmbal::urabe::{AdaptiveHSettings, CertifySettings, Criterion};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Frf,
    StabConvergence,
    UrabeBranch,
    UrabePoint,
    Selftest,
    Bench,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Duffing {
        #[serde(default = "duffing_defaults::damping")]
        damping: f64,
        #[serde(default = "duffing_defaults::stiffness")]
        stiffness: f64,
        #[serde(default = "duffing_defaults::cubic")]
        cubic: f64,
        #[serde(default = "duffing_defaults::forcing")]
        forcing: f64,
    },
    Stop {
        #[serde(default = "stop_default")]
        eps_reg: f64,
    },
    Ecl(EclBeamConfig),
    /// Linear system with cosine forcing `forcing · cos τ`.
    Linear { damping: Vec<Vec<f64>>, stiffness: Vec<Vec<f64>>, forcing: Vec<f64> },
}

mod duffing_defaults {
    pub fn damping() -> f64 {
        0.12
    }
    pub fn stiffness() -> f64 {
        1.0
    }
    pub fn cubic() -> f64 {
        -0.1
    }
    pub fn forcing() -> f64 {
        0.2
    }
}

fn stop_default() -> f64 {
    0.2
}

fn square(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, Failure> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Failure::Config(format!("{what} must be a non-empty square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec, Failure> {
        let model = match self {
            ModelConfig::Duffing { damping, stiffness, cubic, forcing } => duffing_with(*damping, *stiffness, *cubic, *forcing),
            ModelConfig::Stop { eps_reg } => two_dof_stop(*eps_reg).map_err(|e| Failure::Config(e.to_string()))?,
            ModelConfig::Ecl(cfg) => {
                cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
                ecl_model(cfg).map_err(|e| Failure::Other(e.to_string()))?
            }
            ModelConfig::Linear { damping, stiffness, forcing } => {
                let d = square(damping, "damping")?;
                let k = square(stiffness, "stiffness")?;
                let f = forcing.iter().map(|&v| Complex64::new(0.5 * v, 0.0)).collect();
                ModelSpec::linear("linear", d, k, vec![(1, f)]).map_err(|e| Failure::Config(e.to_string()))?
            }
        };
        Ok(model)
    }
}

/// Frequency window; `relative` windows are multiples of `ω₁`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub relative: bool,
}

impl Window {
    pub fn scale(&self, omega1: f64) -> f64 {
        if self.relative {
            omega1
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub method: Method,
    pub resolution: usize,
}

/// Initial guess: a cosine of the given amplitude in one DOF and harmonic,
/// or a stored series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedConfig {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub dof: usize,
    #[serde(default = "one")]
    pub harmonic: usize,
    /// JSON file holding a series record, relative to the config file.
    #[serde(default)]
    pub series: Option<PathBuf>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pick {
    /// Largest amplitude among the branch crossings.
    #[default]
    Upper,
    /// Smallest amplitude among the branch crossings.
    Lower,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    /// Frequency of the test point, in window units.
    pub point: f64,
    #[serde(default)]
    pub pick: Pick,
    /// Harmonic order for the resolution sweeps.
    pub harmonics: usize,
    pub oracle_steps: usize,
    #[serde(default)]
    pub cheby: Vec<usize>,
    #[serde(default)]
    pub mexp: Vec<usize>,
    #[serde(default)]
    pub ntp: Vec<usize>,
    /// Harmonic orders of the `H` sweep.
    #[serde(default)]
    pub h_sweep: Vec<usize>,
    #[serde(default)]
    pub h_sweep_method: Option<StabilityConfig>,
    /// Accuracy level used by `bench` to pick each method's resolution.
    #[serde(default = "bench_target")]
    pub target: f64,
}

fn bench_target() -> f64 {
    1e-2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrabeConfig {
    #[serde(default = "default_criteria")]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub adaptive: AdaptiveHSettings,
    #[serde(default)]
    pub certify: Option<CertifySettings>,
    /// Point mode: frequencies in window units.
    #[serde(default)]
    pub points: Vec<f64>,
    /// Point mode: orders to certify at each frequency.
    #[serde(default)]
    pub h_sweep: Vec<usize>,
    /// Point mode: take each point from a fixed-`harmonics` branch through
    /// the window instead of solving from the seed.
    #[serde(default)]
    pub pick: Option<Pick>,
    /// Point mode: also run the adaptive refinement at each frequency.
    #[serde(default = "yes")]
    pub run_adaptive: bool,
}

fn yes() -> bool {
    true
}

fn default_criteria() -> Vec<Criterion> {
    vec![Criterion::Delta]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: RunKind,
    pub model: ModelConfig,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default)]
    pub continuation: Option<ContinuationSettings>,
    /// Fixed harmonic order for continuation.
    #[serde(default)]
    pub harmonics: Option<usize>,
    #[serde(default)]
    pub stability: Option<StabilityConfig>,
    #[serde(default)]
    pub seed: Option<SeedConfig>,
    #[serde(default)]
    pub convergence: Option<ConvergenceConfig>,
    #[serde(default)]
    pub urabe: Option<UrabeConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

/// A parsed config with its source location and hash.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub path: PathBuf,
    pub hash: String,
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<LoadedConfig, Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(LoadedConfig { config, path: path.to_path_buf(), hash: hash_bytes(&bytes) })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |msg: &str| Err(Failure::Config(msg.to_string()));
        if let Some(w) = &self.window {
            if !(w.start > 0.0 && w.end > 0.0) || w.start == w.end || !w.start.is_finite() || !w.end.is_finite() {
                return bad("window must have distinct positive ends");
            }
        }
        if self.harmonics == Some(0) {
            return bad("harmonics must be positive");
        }
        if let Some(s) = &self.stability {
            if s.resolution == 0 {
                return bad("stability resolution must be positive");
            }
        }
        if let Some(c) = &self.convergence {
            let lists = [&c.cheby, &c.mexp, &c.ntp, &c.h_sweep];
            if c.harmonics == 0 || c.oracle_steps == 0 || lists.iter().any(|l| l.contains(&0)) {
                return bad("convergence resolutions must be positive");
            }
            if !(c.point > 0.0) {
                return bad("convergence point must be positive");
            }
        }
        if let Some(u) = &self.urabe {
            u.adaptive.validate().map_err(|e| Failure::Config(e.to_string()))?;
            if u.h_sweep.contains(&0) {
                return bad("urabe h_sweep entries must be positive");
            }
            if u.criteria.is_empty() {
                return bad("at least one criterion required");
            }
        }
        let needs = |ok: bool, what: &str| if ok { Ok(()) } else { bad(what) };
        match self.kind {
            RunKind::Frf => {
                needs(self.window.is_some(), "frf needs a [window]")?;
                needs(self.harmonics.is_some(), "frf needs harmonics")
            }
            RunKind::StabConvergence | RunKind::Bench => {
                needs(self.window.is_some(), "convergence runs need a [window]")?;
                needs(self.convergence.is_some(), "convergence runs need a [convergence] table")
            }
            RunKind::UrabeBranch => {
                needs(self.window.is_some(), "urabe-branch needs a [window]")?;
                needs(self.urabe.is_some(), "urabe-branch needs an [urabe] table")
            }
            RunKind::UrabePoint => {
                let u = self.urabe.as_ref().ok_or_else(|| Failure::Config("urabe-point needs an [urabe] table".into()))?;
                needs(!u.points.is_empty(), "urabe-point needs points")
            }
            RunKind::Selftest => Ok(()),
        }
    }

    /// Continuation settings with the window applied.
    pub fn continuation_settings(&self, omega1: f64) -> Result<ContinuationSettings, Failure> {
        let w = self.window.ok_or_else(|| Failure::Config("missing [window]".into()))?;
        let scale = w.scale(omega1);
        let mut s = self.continuation.unwrap_or_default();
        s.omega_start = w.start * scale;
        s.omega_end = w.end * scale;
        s.validate().map_err(|e| Failure::Config(e.to_string()))?;
        Ok(s)
    }

    /// Converts window units to `Ω`.
    pub fn frequency(&self, value: f64, omega1: f64) -> f64 {
        value * self.window.map_or(1.0, |w| w.scale(omega1))
    }

    /// Initial series of order `h`.
    pub fn seed_series(&self, model: &ModelSpec, h: usize, base: &Path) -> Result<FourierSeries, Failure> {
        let d = model.dofs();
        let Some(seed) = &self.seed else {
            return Ok(FourierSeries::zeros(h, d));
        };
        if let Some(file) = &seed.series {
            let path = base.parent().unwrap_or(Path::new(".")).join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            let record = FourierRecord::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?;
            let q = record.series().map_err(|e| Failure::Config(e.to_string()))?;
            if q.dofs() != d {
                return Err(Failure::Config(format!("seed series has {} DOFs, model has {d}", q.dofs())));
            }
            return Ok(q.resized(h));
        }
        if seed.dof >= d || seed.harmonic > h {
            return Err(Failure::Config("seed DOF or harmonic out of range".into()));
        }
        let mut q = FourierSeries::zeros(h, d);
        q.set_coeff(seed.harmonic, seed.dof, Complex64::new(0.5 * seed.amplitude, 0.0));
        Ok(q)
    }
}

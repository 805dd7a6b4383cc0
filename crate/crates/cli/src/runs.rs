use std::time::Instant;

use harmbal::continuation::{continue_branch, solve_ramped, Branch, HPolicy, Termination};
use harmbal::fourier::{FourierRecord, FourierSeries};
use harmbal::hb::{newton_polish, NewtonSettings};
use harmbal::models::ModelSpec;
use harmbal::records::{BranchRow, CertificationRecord};
use harmbal::stability::{monodromy, shooting_reference, BifurcationHint, FloquetResult, Method, ShootingSettings};
use harmbal::urabe::{adaptive_h, certify, default_h_plus, residual_bound, CertifySettings, Criterion, UrabeMeasures};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConvergenceConfig, LoadedConfig, Pick, RunConfig};
use crate::output::Sink;
use crate::Failure;

fn solver(err: harmbal::Error) -> Failure {
    Failure::Other(err.to_string())
}

fn newton() -> NewtonSettings {
    NewtonSettings { max_iter: 60, ..Default::default() }
}

fn stability_all(model: &ModelSpec, branch: &Branch, method: Method, resolution: usize) -> Vec<Option<FloquetResult>> {
    branch
        .points
        .par_iter()
        .map(|p| match monodromy(model, &p.q, p.omega, method, resolution) {
            Ok(f) => Some(f),
            Err(e) => {
                log::warn!("stability failed at Omega = {}: {e}", p.omega);
                None
            }
        })
        .collect()
}

#[derive(Serialize)]
struct StabilityChange {
    omega: f64,
    omega_ratio: f64,
    stable_after: bool,
    hint: Option<BifurcationHint>,
}

#[derive(Serialize)]
struct FrfSummary {
    model: String,
    omega1: f64,
    harmonics: usize,
    points: usize,
    termination: Termination,
    turning_points: Vec<f64>,
    stability: Option<String>,
    stability_changes: Vec<StabilityChange>,
}

fn termination_check(termination: Termination) -> Result<(), Failure> {
    match termination {
        Termination::StepUnderflow => Err(Failure::Partial("continuation step underflow; branch is partial".into())),
        _ => Ok(()),
    }
}

pub fn frf(loaded: &LoadedConfig, sink: &Sink) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let model = cfg.model.build()?;
    let h = cfg.harmonics.ok_or_else(|| Failure::Config("frf needs harmonics".into()))?;
    let settings = cfg.continuation_settings(model.omega1)?;
    let q0 = cfg.seed_series(&model, h, &loaded.path)?;
    let branch = continue_branch(&model, &q0, &settings, &HPolicy::Fixed(h)).map_err(solver)?;
    let floquet = match cfg.stability {
        Some(s) => stability_all(&model, &branch, s.method, s.resolution),
        None => vec![None; branch.points.len()],
    };
    let rows: Vec<BranchRow> = branch
        .points
        .iter()
        .zip(&floquet)
        .map(|(p, f)| BranchRow::from_point(p, model.omega1, f.as_ref()))
        .collect();
    let mut changes = Vec::new();
    for i in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[i - 1].stable, rows[i].stable) {
            if a != b {
                let hint = floquet[if b { i - 1 } else { i }].as_ref().and_then(|f| f.hint);
                changes.push(StabilityChange { omega: rows[i].omega, omega_ratio: rows[i].omega_ratio, stable_after: b, hint });
            }
        }
    }
    let summary = FrfSummary {
        model: model.name.clone(),
        omega1: model.omega1,
        harmonics: h,
        points: rows.len(),
        termination: branch.termination,
        turning_points: branch.turning_points().iter().map(|&i| branch.points[i].omega).collect(),
        stability: cfg.stability.map(|s| format!("{} {}", s.method.name(), s.resolution)),
        stability_changes: changes,
    };
    sink.csv("branch.csv", &rows)?;
    sink.json("summary.json", &summary)?;
    termination_check(branch.termination)
}

/// Solution at the configured test frequency, taken from a fixed-order
/// branch through the window.
pub fn locate_point(loaded: &LoadedConfig, model: &ModelSpec, point: f64, h: usize, pick: Pick) -> Result<(f64, FourierSeries), Failure> {
    let cfg = &loaded.config;
    let target = cfg.frequency(point, model.omega1);
    let settings = cfg.continuation_settings(model.omega1)?;
    let q0 = cfg.seed_series(model, h, &loaded.path)?;
    let branch = continue_branch(model, &q0, &settings, &HPolicy::Fixed(h)).map_err(solver)?;
    let pts = &branch.points;
    let crossings: Vec<usize> =
        (1..pts.len()).filter(|&i| (pts[i - 1].omega - target) * (pts[i].omega - target) <= 0.0).collect();
    let amp = |i: usize| 0.5 * (pts[i - 1].amplitude + pts[i].amplitude);
    let chosen = match pick {
        Pick::Upper => crossings.iter().copied().max_by(|&a, &b| amp(a).total_cmp(&amp(b))),
        Pick::Lower => crossings.iter().copied().min_by(|&a, &b| amp(a).total_cmp(&amp(b))),
    }
    .ok_or_else(|| Failure::Other(format!("branch does not reach Omega = {target}")))?;
    let near = if (pts[chosen - 1].omega - target).abs() < (pts[chosen].omega - target).abs() { chosen - 1 } else { chosen };
    let (q, _) = solve_ramped(model, &pts[near].q, target, h, &newton()).map_err(solver)?;
    Ok((target, q))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub sweep: String,
    pub method: Method,
    #[serde(rename = "H")]
    pub h: usize,
    pub resolution: usize,
    pub eps: Option<f64>,
    pub lambda_re: Option<f64>,
    pub lambda_im: Option<f64>,
    pub seconds: f64,
}

#[derive(Serialize)]
struct Threshold {
    method: Method,
    below_1e_2: Option<usize>,
    below_1e_4: Option<usize>,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    omega: f64,
    omega_ratio: f64,
    amplitude: f64,
    harmonics: usize,
    oracle_steps: usize,
    oracle_defect: f64,
    oracle_lambda: [f64; 2],
    thresholds: Vec<Threshold>,
}

struct Oracle {
    lambda: Complex64,
    defect: f64,
}

fn oracle(model: &ModelSpec, q: &FourierSeries, omega: f64, conv: &ConvergenceConfig) -> Result<Oracle, Failure> {
    let finest = conv.mexp.iter().chain(&conv.ntp).copied().max().unwrap_or(0);
    if conv.oracle_steps < 4 * finest {
        log::warn!("oracle resolution {} is below 4x the finest tested resolution {finest}", conv.oracle_steps);
    }
    let settings = ShootingSettings { steps: conv.oracle_steps, ..Default::default() };
    let sh = shooting_reference(model, omega, q, &settings).map_err(|e| Failure::Oracle(e.to_string()))?;
    Ok(Oracle { lambda: sh.floquet.leading(), defect: sh.defect })
}

/// Resolution cells of the three backends at fixed `H`.
fn resolution_cells(conv: &ConvergenceConfig) -> Vec<(Method, usize)> {
    let mut cells = Vec::new();
    cells.extend(conv.cheby.iter().map(|&c| (Method::Cheby, c)));
    cells.extend(conv.mexp.iter().map(|&n| (Method::Mexp, n)));
    cells.extend(conv.ntp.iter().map(|&n| (Method::Ntp, n)));
    cells
}

fn run_cell(model: &ModelSpec, q: &FourierSeries, omega: f64, method: Method, resolution: usize) -> (Option<Complex64>, f64) {
    let t = Instant::now();
    let res = monodromy(model, q, omega, method, resolution);
    let seconds = t.elapsed().as_secs_f64();
    match res {
        Ok(f) => (Some(f.leading()), seconds),
        Err(e) => {
            log::warn!("{} at resolution {resolution} failed: {e}", method.name());
            (None, seconds)
        }
    }
}

fn make_row(sweep: &str, method: Method, h: usize, resolution: usize, lambda: Option<Complex64>, seconds: f64, reference: Complex64) -> ConvergenceRow {
    ConvergenceRow {
        sweep: sweep.into(),
        method,
        h,
        resolution,
        eps: lambda.map(|l| (l - reference).norm() / reference.norm()),
        lambda_re: lambda.map(|l| l.re),
        lambda_im: lambda.map(|l| l.im),
        seconds,
    }
}

pub fn stab_convergence(loaded: &LoadedConfig, sink: &Sink) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let conv = cfg.convergence.as_ref().ok_or_else(|| Failure::Config("missing [convergence]".into()))?;
    let model = cfg.model.build()?;
    let (omega, q) = locate_point(loaded, &model, conv.point, conv.harmonics, conv.pick)?;
    let oracle = oracle(&model, &q, omega, conv)?;
    let reference = oracle.lambda;

    let mut rows: Vec<ConvergenceRow> = resolution_cells(conv)
        .into_par_iter()
        .map(|(method, res)| {
            let (lambda, seconds) = run_cell(&model, &q, omega, method, res);
            make_row("resolution", method, conv.harmonics, res, lambda, seconds, reference)
        })
        .collect();

    if !conv.h_sweep.is_empty() {
        let stab = conv.h_sweep_method.ok_or_else(|| Failure::Config("h_sweep needs h_sweep_method".into()))?;
        let solutions: Vec<(usize, Option<FourierSeries>)> = conv
            .h_sweep
            .par_iter()
            .map(|&h| {
                let sol = solve_ramped(&model, &q.resized(h.min(q.order())), omega, h, &newton());
                if let Err(e) = &sol {
                    log::warn!("HB failed at H = {h}: {e}");
                }
                (h, sol.ok().map(|s| s.0))
            })
            .collect();
        let h_rows: Vec<ConvergenceRow> = solutions
            .par_iter()
            .map(|(h, sol)| match sol {
                Some(qh) => {
                    let (lambda, seconds) = run_cell(&model, qh, omega, stab.method, stab.resolution);
                    make_row("harmonics", stab.method, *h, stab.resolution, lambda, seconds, reference)
                }
                None => make_row("harmonics", stab.method, *h, stab.resolution, None, 0.0, reference),
            })
            .collect();
        rows.extend(h_rows);
    }

    let first_below = |method: Method, level: f64| {
        rows.iter()
            .filter(|r| r.sweep == "resolution" && r.method == method && r.eps.is_some_and(|e| e < level))
            .map(|r| r.resolution)
            .min()
    };
    let thresholds = [Method::Cheby, Method::Mexp, Method::Ntp]
        .into_iter()
        .map(|m| Threshold { method: m, below_1e_2: first_below(m, 1e-2), below_1e_4: first_below(m, 1e-4) })
        .collect();
    let summary = ConvergenceSummary {
        omega,
        omega_ratio: omega / model.omega1,
        amplitude: model.amplitude(&q),
        harmonics: conv.harmonics,
        oracle_steps: conv.oracle_steps,
        oracle_defect: oracle.defect,
        oracle_lambda: [reference.re, reference.im],
        thresholds,
    };
    sink.csv("convergence.csv", &rows)?;
    sink.json("convergence.json", &summary)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub resolution: usize,
    pub eps: f64,
    pub repeats: usize,
    pub mean_seconds: f64,
    /// NTP time divided by this method's time.
    pub speedup_vs_ntp: Option<f64>,
}

pub fn bench(loaded: &LoadedConfig, sink: &Sink, repeat: usize) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let conv = cfg.convergence.as_ref().ok_or_else(|| Failure::Config("missing [convergence]".into()))?;
    let model = cfg.model.build()?;
    let (omega, q) = locate_point(loaded, &model, conv.point, conv.harmonics, conv.pick)?;
    let reference = oracle(&model, &q, omega, conv)?.lambda;
    let repeat = repeat.max(1);
    let mut rows = Vec::new();
    for (method, list) in [(Method::Cheby, &conv.cheby), (Method::Mexp, &conv.mexp), (Method::Ntp, &conv.ntp)] {
        let mut sorted = list.clone();
        sorted.sort_unstable();
        // coarsest resolution meeting the target
        let found = sorted.into_iter().find_map(|res| {
            let l = monodromy(&model, &q, omega, method, res).ok()?.leading();
            let eps = (l - reference).norm() / reference.norm();
            (eps < conv.target).then_some((res, eps))
        });
        let Some((res, eps)) = found else {
            log::warn!("{} never reaches eps < {}", method.name(), conv.target);
            continue;
        };
        for _ in 0..3 {
            let _ = monodromy(&model, &q, omega, method, res);
        }
        let t = Instant::now();
        for _ in 0..repeat {
            let _ = monodromy(&model, &q, omega, method, res).map_err(solver)?;
        }
        let mean = t.elapsed().as_secs_f64() / repeat as f64;
        rows.push(BenchRow { method, resolution: res, eps, repeats: repeat, mean_seconds: mean, speedup_vs_ntp: None });
    }
    if let Some(ntp) = rows.iter().find(|r| r.method == Method::Ntp).map(|r| r.mean_seconds) {
        for r in &mut rows {
            r.speedup_vs_ntp = Some(ntp / r.mean_seconds);
        }
    }
    for r in &rows {
        log::info!(
            "{} {} eps {:.2e} mean {:.3e} s (informational)",
            r.method.name(),
            r.resolution,
            r.eps,
            r.mean_seconds
        );
    }
    sink.csv("bench.csv", &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrabeRow {
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(rename = "Omega/omega1")]
    pub omega_ratio: f64,
    pub amplitude: f64,
    #[serde(rename = "H")]
    pub h: usize,
    pub r: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub conclusive: Option<bool>,
    pub flagged: bool,
    pub criterion: Criterion,
}

fn cert_settings(cfg: &RunConfig, model: &ModelSpec) -> CertifySettings {
    cfg.urabe.as_ref().and_then(|u| u.certify).unwrap_or_else(|| CertifySettings::for_model(model))
}

pub fn urabe(loaded: &LoadedConfig, sink: &Sink) -> Result<(), Failure> {
    match loaded.config.kind {
        crate::config::RunKind::UrabePoint => urabe_point(loaded, sink),
        _ => urabe_branch(loaded, sink),
    }
}

fn urabe_branch(loaded: &LoadedConfig, sink: &Sink) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let ucfg = cfg.urabe.as_ref().ok_or_else(|| Failure::Config("missing [urabe]".into()))?;
    let model = cfg.model.build()?;
    let settings = cfg.continuation_settings(model.omega1)?;
    let cert = cert_settings(cfg, &model);
    let q0 = cfg.seed_series(&model, ucfg.adaptive.h_min, &loaded.path)?;
    let results: Vec<(Criterion, harmbal::Result<Branch>)> = ucfg
        .criteria
        .par_iter()
        .map(|&criterion| {
            let adaptive = harmbal::urabe::AdaptiveHSettings { criterion, ..ucfg.adaptive };
            let policy = HPolicy::Adaptive { settings: adaptive, certify: cert };
            (criterion, continue_branch(&model, &q0, &settings, &policy))
        })
        .collect();
    let mut partial = false;
    for (criterion, branch) in results {
        let branch = branch.map_err(solver)?;
        partial |= branch.termination == Termination::StepUnderflow;
        let rows: Vec<UrabeRow> = branch
            .points
            .iter()
            .map(|p| {
                let u = p.urabe.as_ref();
                UrabeRow {
                    omega: p.omega,
                    omega_ratio: p.omega / model.omega1,
                    amplitude: p.amplitude,
                    h: p.order(),
                    r: u.map(|u| u.r),
                    m: u.map(|u| u.m).filter(|m| m.is_finite()),
                    delta: u.and_then(|u| u.delta),
                    kappa: u.and_then(|u| u.kappa),
                    conclusive: p.conclusive,
                    flagged: p.flagged,
                    criterion,
                }
            })
            .collect();
        let records: Vec<CertificationRecord> = branch
            .points
            .iter()
            .filter_map(|p| Some(CertificationRecord::new(p.omega, p.urabe.as_ref()?, p.conclusive.unwrap_or(false), criterion)))
            .collect();
        let name = criterion.name();
        sink.csv(&format!("urabe_{name}.csv"), &rows)?;
        sink.json(&format!("urabe_{name}.json"), &serde_json::json!({ "termination": branch.termination, "points": records }))?;
    }
    if partial {
        return Err(Failure::Partial("continuation step underflow; branch is partial".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UrabePointRow {
    #[serde(rename = "Omega")]
    pub omega: f64,
    #[serde(rename = "H")]
    pub h: usize,
    pub amplitude: f64,
    pub r: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub worst_condition: Option<f64>,
    pub note: String,
}

#[derive(Serialize)]
struct AdaptiveRecord {
    record: CertificationRecord,
    diverged: bool,
    visited: Vec<UrabeMeasures>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn urabe_point(loaded: &LoadedConfig, sink: &Sink) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let ucfg = cfg.urabe.as_ref().ok_or_else(|| Failure::Config("missing [urabe]".into()))?;
    let model = cfg.model.build()?;
    let cert = cert_settings(cfg, &model);
    let mut sweep = ucfg.h_sweep.clone();
    sweep.sort_unstable();
    sweep.dedup();
    let h0 = ucfg.adaptive.h_min;
    let mut rows = Vec::new();
    let mut adaptive_records = Vec::new();
    for &point in &ucfg.points {
        let (omega, base) = match ucfg.pick {
            Some(pick) => {
                let h = cfg.harmonics.ok_or_else(|| Failure::Config("pick needs harmonics".into()))?;
                locate_point(loaded, &model, point, h, pick)?
            }
            None => {
                let omega = cfg.frequency(point, model.omega1);
                let seed = cfg.seed_series(&model, h0, &loaded.path)?;
                (omega, solve_ramped(&model, &seed, omega, h0, &newton()).map_err(solver)?.0)
            }
        };
        sink.json(&format!("series_{point}.json"), &FourierRecord::new(&base, omega))?;

        // ordered so each order seeds the next
        let mut q = base.clone();
        for &h in &sweep {
            let solved = solve_ramped(&model, &q, omega, h, &newton()).and_then(|(s, _)| newton_polish(&model, &s, omega, 4));
            let (qh, _) = match solved {
                Ok(v) => v,
                Err(e) => {
                    rows.push(UrabePointRow { omega, h, amplitude: f64::NAN, r: None, m: None, delta: None, kappa: None, worst_condition: None, note: format!("HB failed: {e}") });
                    continue;
                }
            };
            let row = match certify(&model, &qh, omega, &cert) {
                Ok(u) => UrabePointRow {
                    omega,
                    h,
                    amplitude: model.amplitude(&qh),
                    r: Some(u.r),
                    m: finite(u.m),
                    delta: u.delta,
                    kappa: u.kappa,
                    worst_condition: finite(u.worst_condition),
                    note: String::new(),
                },
                Err(e) => UrabePointRow {
                    omega,
                    h,
                    amplitude: model.amplitude(&qh),
                    r: residual_bound(&model, &qh, omega, cert.h_plus.unwrap_or_else(|| default_h_plus(&model, h))).ok(),
                    m: None,
                    delta: None,
                    kappa: None,
                    worst_condition: None,
                    note: e.to_string(),
                },
            };
            log::info!("Omega {omega} H {h}: r {:?} M {:?} delta {:?}", row.r, row.m, row.delta);
            rows.push(row);
            q = qh;
        }

        if ucfg.run_adaptive {
            let outcomes: Vec<_> = ucfg
                .criteria
                .par_iter()
                .map(|&criterion| {
                    let settings = harmbal::urabe::AdaptiveHSettings { criterion, ..ucfg.adaptive };
                    (criterion, adaptive_h(&model, &base, omega, &settings, &cert, &newton()))
                })
                .collect();
            for (criterion, out) in outcomes {
                let out = out.map_err(solver)?;
                adaptive_records.push(AdaptiveRecord {
                    record: CertificationRecord::new(omega, &out.measures, out.conclusive, criterion),
                    diverged: out.diverged,
                    visited: out.visited,
                });
            }
        }
    }
    sink.csv("urabe_points.csv", &rows)?;
    if ucfg.run_adaptive {
        sink.json("urabe_points.json", &serde_json::json!({ "points": adaptive_records }))?;
    }
    Ok(())
}

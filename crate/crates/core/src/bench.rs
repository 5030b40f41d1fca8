//! Contamination sweeps over an ε grid, with per-row theory bounds and rate fits.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::adversary::{corrupt, AdversaryStrategy, CorruptedSet};
use crate::certify::BoundFormulas;
use crate::error::{invalid, Error, Result};
use crate::estimators::{self, EstimateReport, SosOptions};
use crate::relax::BasisKind;
use crate::sdp::{SolveError, SolverOptions};
use crate::synth::{covariance_opnorm, sample, DistributionSpec};

/// Salt mixed into the trial seed for the corruption stream, so the adversary's
/// choices are not drawn from the same stream as the samples.
const CORRUPTION_SALT: u64 = 0x5DEE_CE66_D1CE_4E5B;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Sos,
    Mean,
    Median,
    Geomedian,
    Gauss1d,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sos => "sos",
            EstimatorKind::Mean => "mean",
            EstimatorKind::Median => "median",
            EstimatorKind::Geomedian => "geomedian",
            EstimatorKind::Gauss1d => "gauss1d",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sos" => Ok(EstimatorKind::Sos),
            "mean" => Ok(EstimatorKind::Mean),
            "median" => Ok(EstimatorKind::Median),
            "geomedian" => Ok(EstimatorKind::Geomedian),
            "gauss1d" => Ok(EstimatorKind::Gauss1d),
            other => Err(Error::Parse(format!("unknown estimator `{other}`"))),
        }
    }
}

/// σ handed to the SoS program and used to scale the theory bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Fixed(f64),
    /// max(1, √‖Σ̂‖) of each trial's clean sample.
    Auto,
}

impl fmt::Display for SigmaChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaChoice::Fixed(s) => write!(f, "{s}"),
            SigmaChoice::Auto => f.write_str("auto"),
        }
    }
}

/// A sweep description.
///
/// The text form is one `key = value` per line; `#` starts a comment. Keys:
///
/// | key | meaning | default |
/// |---|---|---|
/// | `dist` | distribution spec, e.g. `gaussian` or `boundedcov:sigma=1` | `gaussian` |
/// | `adversary` | `identity`, `point:<v>`, `spike:k=<k>`, `mixture:<dist>` | `identity` |
/// | `eps` | comma-separated grid | required |
/// | `n`, `d` | sample size and dimension | 40, 2 |
/// | `k`, `r` | moment order and relaxation order | 2, 2 |
/// | `trials`, `seed` | trials per grid point and base seed | 20, 0 |
/// | `sigma` | number or `auto` | `auto` |
/// | `sigma_slack` | multiplier on σ inside the program | 1.1 |
/// | `tol`, `max_iter` | solver settings | 1e-6, 50000 |
/// | `basis` | `full` or `w-linear` | `full` |
/// | `screen` | drop points no integral selection can use | `true` |
/// | `estimators` | comma-separated subset of `sos, mean, median, geomedian, gauss1d` | `sos, mean` |
/// | `geomedian_tol` | Weiszfeld tolerance | 1e-9 |
/// | `grid_halfwidth`, `grid_step` | gauss1d grid | 10, 1e-3 |
/// | `timing` | write wall times (otherwise 0) | `true` |
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub adversary: AdversaryStrategy,
    pub eps_grid: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub k: u32,
    pub r: u32,
    pub trials: usize,
    pub base_seed: u64,
    pub sigma: SigmaChoice,
    pub sigma_slack: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub basis: BasisKind,
    pub screen: bool,
    pub estimators: Vec<EstimatorKind>,
    pub geomedian_tol: f64,
    pub grid_halfwidth: f64,
    pub grid_step: f64,
    pub timing: bool,
}

impl ExperimentConfig {
    /// Defaults for an n = 40, d = 2, r = 2 sweep over `eps_grid`.
    pub fn new(eps_grid: Vec<f64>) -> Self {
        ExperimentConfig {
            distribution: DistributionSpec::standard_gaussian(2),
            adversary: AdversaryStrategy::Identity,
            eps_grid,
            n: 40,
            d: 2,
            k: 2,
            r: 2,
            trials: 20,
            base_seed: 0,
            sigma: SigmaChoice::Auto,
            sigma_slack: 1.1,
            tol: 1e-6,
            max_iter: 50_000,
            basis: BasisKind::Full,
            screen: true,
            estimators: vec![EstimatorKind::Sos, EstimatorKind::Mean],
            geomedian_tol: 1e-9,
            grid_halfwidth: 10.0,
            grid_step: 1e-3,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(invalid("eps grid is empty"));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(0.0..0.5).contains(*e)) {
            return Err(invalid(format!("eps {e} outside [0, 1/2)")));
        }
        if self.trials == 0 || self.n == 0 || self.d == 0 {
            return Err(invalid("trials, n and d must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(invalid("no estimators listed"));
        }
        if self.distribution.dim() != self.d {
            return Err(Error::Dimension(format!("distribution has dimension {} but d = {}", self.distribution.dim(), self.d)));
        }
        self.distribution.validate()?;
        self.adversary.validate(self.d)?;
        if let SigmaChoice::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("sigma must be positive, got {s}")));
            }
        }
        if !(self.sigma_slack >= 1.0) {
            return Err(invalid("sigma_slack must be at least 1"));
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(invalid("tol must be positive and max_iter at least 1"));
        }
        if self.estimators.contains(&EstimatorKind::Gauss1d) {
            if self.d != 1 {
                return Err(invalid("gauss1d needs d = 1"));
            }
            if !(self.grid_step > 0.0 && self.grid_halfwidth > 0.0) {
                return Err(invalid("gauss1d grid needs positive halfwidth and step"));
            }
        }
        if self.estimators.contains(&EstimatorKind::Sos) {
            match (self.k, self.r) {
                (2, 2..=3) => {}
                (4, 3) if self.d <= 2 => {}
                (k, r) => return Err(Error::Unsupported(format!("sos with k = {k}, r = {r}, d = {}", self.d))),
            }
        } else if self.k != 2 && self.k != 4 {
            return Err(invalid(format!("k must be 2 or 4, got {}", self.k)));
        }
        Ok(())
    }

    /// Parse the key-value text form.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim().to_string();
            if kv.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Parse(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        let mut cfg = ExperimentConfig::new(Vec::new());
        let num = |v: &str, key: &str| -> Result<f64> { v.parse::<f64>().map_err(|e| Error::Parse(format!("{key}: {e}"))) };
        let int = |v: &str, key: &str| -> Result<u64> { v.parse::<u64>().map_err(|e| Error::Parse(format!("{key}: {e}"))) };
        let flag = |v: &str, key: &str| -> Result<bool> {
            match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(Error::Parse(format!("{key}: expected true or false, got `{v}`"))),
            }
        };
        // d first: the distribution and adversary parsers depend on it.
        if let Some(v) = kv.get("d") {
            cfg.d = int(v, "d")? as usize;
        }
        let mut dist_text = None;
        let mut adversary_text = None;
        for (key, v) in &kv {
            let v = v.as_str();
            match key.as_str() {
                "d" => {}
                "dist" => dist_text = Some(v.to_string()),
                "adversary" => adversary_text = Some(v.to_string()),
                "eps" => {
                    cfg.eps_grid = v
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| num(s.trim(), "eps"))
                        .collect::<Result<_>>()?
                }
                "n" => cfg.n = int(v, key)? as usize,
                "k" => cfg.k = int(v, key)? as u32,
                "r" => cfg.r = int(v, key)? as u32,
                "trials" => cfg.trials = int(v, key)? as usize,
                "seed" => cfg.base_seed = int(v, key)?,
                "sigma" => cfg.sigma = if v == "auto" { SigmaChoice::Auto } else { SigmaChoice::Fixed(num(v, key)?) },
                "sigma_slack" => cfg.sigma_slack = num(v, key)?,
                "tol" => cfg.tol = num(v, key)?,
                "max_iter" => cfg.max_iter = int(v, key)? as usize,
                "basis" => cfg.basis = v.parse()?,
                "screen" => cfg.screen = flag(v, key)?,
                "estimators" => {
                    cfg.estimators = v
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?
                }
                "geomedian_tol" => cfg.geomedian_tol = num(v, key)?,
                "grid_halfwidth" => cfg.grid_halfwidth = num(v, key)?,
                "grid_step" => cfg.grid_step = num(v, key)?,
                "timing" => cfg.timing = flag(v, key)?,
                other => return Err(Error::Parse(format!("unknown key `{other}`"))),
            }
        }
        cfg.distribution = DistributionSpec::parse(dist_text.as_deref().unwrap_or("gaussian"), cfg.d)?;
        cfg.adversary = AdversaryStrategy::parse(adversary_text.as_deref().unwrap_or("identity"), cfg.d)?;
        if cfg.eps_grid.is_empty() {
            return Err(Error::Parse("missing `eps`".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Canonical text form; [`ExperimentConfig::parse`] reads it back.
    pub fn to_text(&self) -> String {
        let list = |v: &[String]| v.join(", ");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("dist", self.distribution.to_string());
        put("adversary", self.adversary.to_string());
        put("eps", list(&self.eps_grid.iter().map(|e| e.to_string()).collect::<Vec<_>>()));
        put("n", self.n.to_string());
        put("d", self.d.to_string());
        put("k", self.k.to_string());
        put("r", self.r.to_string());
        put("trials", self.trials.to_string());
        put("seed", self.base_seed.to_string());
        put("sigma", self.sigma.to_string());
        put("sigma_slack", self.sigma_slack.to_string());
        put("tol", self.tol.to_string());
        put("max_iter", self.max_iter.to_string());
        put("basis", self.basis.to_string());
        put("screen", self.screen.to_string());
        put("estimators", list(&self.estimators.iter().map(|e| e.to_string()).collect::<Vec<_>>()));
        put("geomedian_tol", self.geomedian_tol.to_string());
        put("grid_halfwidth", self.grid_halfwidth.to_string());
        put("grid_step", self.grid_step.to_string());
        put("timing", self.timing.to_string());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    NotConverged,
    Infeasible,
    Failed,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Ok => "ok",
            RowStatus::NotConverged => "not_converged",
            RowStatus::Infeasible => "infeasible",
            RowStatus::Failed => "failed",
        })
    }
}

/// One (ε, trial, estimator) outcome. `error` is NaN unless the status is ok.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub eps: f64,
    pub trial: usize,
    pub estimator: EstimatorKind,
    pub error: f64,
    /// σ·√(optimal squared-error bound).
    pub bound_optimal: f64,
    /// σ·√(breakdown squared-error bound).
    pub bound_breakdown: f64,
    pub residual_eq: Option<f64>,
    pub residual_psd: Option<f64>,
    pub seconds: f64,
    pub status: RowStatus,
    pub sigma: f64,
}

/// Error-scale theory bounds σ·√b for the squared-error bounds b of order k.
pub fn theory_bounds(eps: f64, k: u32, sigma: f64) -> (f64, f64) {
    let (opt, brk) = BoundFormulas::for_k(eps, k);
    (sigma * opt.sqrt(), sigma * brk.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryEntry {
    pub eps: f64,
    pub estimator: EstimatorKind,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
    pub ok: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub summary: Vec<SummaryEntry>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

impl ExperimentReport {
    /// Assemble a report, computing the per-(ε, estimator) aggregates.
    pub fn from_rows(config: ExperimentConfig, rows: Vec<ReportRow>) -> Self {
        let mut groups: BTreeMap<(u64, EstimatorKind), (Vec<f64>, usize)> = BTreeMap::new();
        for row in &rows {
            let g = groups.entry((row.eps.to_bits(), row.estimator)).or_default();
            if row.status == RowStatus::Ok {
                g.0.push(row.error);
            } else {
                g.1 += 1;
            }
        }
        let mut summary: Vec<SummaryEntry> = groups
            .into_iter()
            .map(|((bits, estimator), (mut errs, failed))| {
                errs.sort_by(f64::total_cmp);
                let (q25, q75) = (quantile(&errs, 0.25), quantile(&errs, 0.75));
                SummaryEntry {
                    eps: f64::from_bits(bits),
                    estimator,
                    median: quantile(&errs, 0.5),
                    q25,
                    q75,
                    iqr: q75 - q25,
                    ok: errs.len(),
                    failed,
                }
            })
            .collect();
        summary.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.estimator.cmp(&b.estimator)));
        ExperimentReport { config, rows, summary }
    }

    pub fn entry(&self, eps: f64, estimator: EstimatorKind) -> Option<&SummaryEntry> {
        self.summary.iter().find(|e| e.eps == eps && e.estimator == estimator)
    }

    /// Medians of `estimator` along the ε grid, in grid order.
    pub fn medians(&self, estimator: EstimatorKind) -> Vec<(f64, f64)> {
        self.summary.iter().filter(|e| e.estimator == estimator).map(|e| (e.eps, e.median)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("eps,trial,estimator,error,bound_optimal,bound_breakdown,residual_eq,residual_psd,seconds,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{:e},{},{},{},{}",
                r.eps,
                r.trial,
                r.estimator,
                r.error,
                r.bound_optimal,
                r.bound_breakdown,
                fmt_opt(r.residual_eq),
                fmt_opt(r.residual_psd),
                if self.config.timing { format!("{:.6}", r.seconds) } else { "0".into() },
                r.status
            );
        }
        out
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let config: BTreeMap<String, String> = self
            .config
            .to_text()
            .lines()
            .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
            .collect();
        serde_json::json!({
            "config": config,
            "rows": self.rows.len(),
            "groups": self.summary,
        })
    }

    /// Write `report.csv` and `summary.json` into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.summary_json()).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("summary.json"), json + "\n")
    }
}

fn run_estimator(cfg: &ExperimentConfig, est: EstimatorKind, z: &CorruptedSet, sigma: f64) -> (RowStatus, Option<EstimateReport>, Option<(f64, f64)>) {
    let done = |rep: Result<EstimateReport>| match rep {
        Ok(r) => (RowStatus::Ok, Some(r), None),
        Err(Error::NotConverged { .. }) => (RowStatus::NotConverged, None, None),
        Err(_) => (RowStatus::Failed, None, None),
    };
    match est {
        EstimatorKind::Mean => done(Ok(estimators::sample_mean(z))),
        EstimatorKind::Median => done(Ok(estimators::coordinate_median(z))),
        EstimatorKind::Geomedian => done(estimators::geometric_median(z, cfg.geomedian_tol)),
        EstimatorKind::Gauss1d => done(estimators::gaussian_projection_1d(z, cfg.grid_halfwidth, cfg.grid_step)),
        EstimatorKind::Sos => {
            let opts = SosOptions {
                sigma_slack: cfg.sigma_slack,
                solver: SolverOptions {
                    tol: cfg.tol,
                    max_iter: cfg.max_iter,
                    ..Default::default()
                },
                anchor: None,
                basis: cfg.basis,
                screen: cfg.screen,
            };
            match estimators::sos_mean_with(z, sigma, cfg.k, cfg.r, &opts) {
                Ok(out) => {
                    let res = (out.pe.residuals.equality, out.pe.residuals.worst_relative_psd());
                    (RowStatus::Ok, Some(out.report), Some(res))
                }
                Err(SolveError::NotConverged { partial }) => (
                    RowStatus::NotConverged,
                    None,
                    Some((partial.residuals.equality, partial.residuals.worst_relative_psd())),
                ),
                Err(SolveError::Infeasible { residuals, .. }) => {
                    (RowStatus::Infeasible, None, Some((residuals.equality, residuals.worst_relative_psd())))
                }
                Err(SolveError::Setup(_)) => (RowStatus::Failed, None, None),
            }
        }
    }
}

/// Run every (trial, ε, estimator) combination. Trial t draws its clean sample
/// with seed `base_seed + t` and reuses it across the ε grid.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.eps_grid.len() * cfg.trials * cfg.estimators.len());
    for trial in 0..cfg.trials {
        let seed = cfg.base_seed.wrapping_add(trial as u64);
        let clean = sample(&cfg.distribution, cfg.n, seed)?;
        let sigma = match cfg.sigma {
            SigmaChoice::Fixed(s) => s,
            SigmaChoice::Auto => covariance_opnorm(&clean.data)?.sqrt().max(1.0),
        };
        for &eps in &cfg.eps_grid {
            let (bound_optimal, bound_breakdown) = theory_bounds(eps, cfg.k, sigma);
            let z = corrupt(clean.clone(), eps, &cfg.adversary, seed ^ CORRUPTION_SALT);
            for &est in &cfg.estimators {
                let start = std::time::Instant::now();
                let (status, rep, residuals) = match &z {
                    Ok(z) => run_estimator(cfg, est, z, sigma),
                    Err(_) => (RowStatus::Failed, None, None),
                };
                rows.push(ReportRow {
                    eps,
                    trial,
                    estimator: est,
                    error: rep.as_ref().map_or(f64::NAN, |r| r.error),
                    bound_optimal,
                    bound_breakdown,
                    residual_eq: residuals.map(|r| r.0),
                    residual_psd: residuals.map(|r| r.1),
                    seconds: start.elapsed().as_secs_f64(),
                    status,
                    sigma,
                });
            }
        }
    }
    rows.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.trial.cmp(&b.trial)).then(a.estimator.cmp(&b.estimator)));
    Ok(ExperimentReport::from_rows(cfg.clone(), rows))
}

/// Theory error curve of order k, up to constants: √(ε/(1−2ε)) for k = 2 and
/// √k/δ^{1/k} otherwise.
pub fn theory_rate(eps: f64, k: u32) -> f64 {
    if k == 2 {
        (eps / (1.0 - 2.0 * eps)).sqrt()
    } else {
        (k as f64).sqrt() / (1.0 - 2.0 * eps).powf(1.0 / k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub eps: f64,
    pub median: f64,
    pub empirical_ratio: f64,
    pub theory_ratio: f64,
    /// empirical_ratio / theory_ratio.
    pub normalized: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub estimator: EstimatorKind,
    pub anchor: f64,
    pub table: Vec<RatioEntry>,
    pub pass: bool,
}

pub const RATIO_BAND: (f64, f64) = (0.5, 2.0);
pub const MIN_FIT_TRIALS: usize = 10;

/// Rate fit anchored at ε = 0.2 when the grid has it, else at the smallest
/// positive grid point.
pub fn fit_rate(report: &ExperimentReport, estimator: EstimatorKind) -> Result<RateFit> {
    let eligible: Vec<f64> = report.medians(estimator).iter().map(|p| p.0).filter(|&e| e > 0.0).collect();
    let anchor = if eligible.contains(&0.2) {
        0.2
    } else {
        *eligible.first().ok_or_else(|| Error::InsufficientData(format!("no positive grid points for {estimator}")))?
    };
    fit_rate_anchored(report, estimator, anchor)
}

/// Compare median-error ratios against theory-curve ratios relative to `anchor`.
/// Grid points at ε = 0 have no theory value and are left out.
pub fn fit_rate_anchored(report: &ExperimentReport, estimator: EstimatorKind, anchor: f64) -> Result<RateFit> {
    let k = report.config.k;
    let points: Vec<&SummaryEntry> = report.summary.iter().filter(|e| e.estimator == estimator && e.eps > 0.0).collect();
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!("{estimator} needs at least 2 positive grid points, found {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| p.ok < MIN_FIT_TRIALS) {
        return Err(Error::InsufficientData(format!(
            "eps {} has {} usable trials, need {MIN_FIT_TRIALS}",
            p.eps, p.ok
        )));
    }
    let base = points
        .iter()
        .find(|p| p.eps == anchor)
        .ok_or_else(|| Error::InsufficientData(format!("anchor eps {anchor} is not on the grid")))?;
    let theory_base = theory_rate(anchor, k);
    let table: Vec<RatioEntry> = points
        .iter()
        .map(|p| {
            let empirical_ratio = p.median / base.median;
            let theory_ratio = theory_rate(p.eps, k) / theory_base;
            let normalized = empirical_ratio / theory_ratio;
            RatioEntry {
                eps: p.eps,
                median: p.median,
                empirical_ratio,
                theory_ratio,
                normalized,
                within: (RATIO_BAND.0..=RATIO_BAND.1).contains(&normalized),
            }
        })
        .collect();
    let pass = table.iter().all(|e| e.within);
    Ok(RateFit {
        estimator,
        anchor,
        table,
        pass,
    })
}

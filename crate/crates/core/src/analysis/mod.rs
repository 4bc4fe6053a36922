//! NEC checks, empirical curvature-bound estimates, margin sweeps, near-null
//! certificates and the bounded/diverging classifier.
//!
//! Two normalizations are reported side by side. With `r = F(v,v)/|g(v,v)|`:
//! the all-non-null constant is `inf r`, so that `F(v,v) >= C |g(v,v)|`; the
//! timelike constant is `sup F/g = −inf r` over timelike `v`, so that
//! `F(v,v) >= C^T g(v,v)` there.

mod point;
mod region;
mod simplex;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvature::{CurvatureError, SymmetricField};
use crate::dsl::MetricSpec;
use crate::flow::{FlowError, NULL_ANCHOR_TOLERANCE};
use crate::numfmt::{g12, opt_real, real, reals};
use point::{analyze_point, certificate_value, form, keep_min, PointOutcome};
pub use region::Region;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("vector is not null: g(v,v) = {causal:e}")]
    NotNull { causal: f64 },
    #[error("only {nonempty} nonempty margin rungs, at least {required} needed")]
    InsufficientData { nonempty: usize, required: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl From<crate::dsl::EvalError> for AnalysisError {
    fn from(e: crate::dsl::EvalError) -> Self {
        Self::Curvature(e.into())
    }
}

/// Tolerances, ladder and refinement budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    #[serde(serialize_with = "real")]
    pub tol_null: f64,
    /// Top of the null-margin ladder `ε_k = ε_0 2^{-k}`.
    #[serde(serialize_with = "real")]
    pub epsilon0: f64,
    /// Number of strata `[ε_{k+1}, ε_k]`.
    pub rungs: usize,
    pub refine_seeds: usize,
    pub refine_iterations: usize,
    /// Divergence needs the final rung below `certificate_inf − margin` ...
    #[serde(serialize_with = "real")]
    pub divergence_margin: f64,
    /// ... and a per-rung slope below this over the last `fit_rungs` rungs.
    #[serde(serialize_with = "real")]
    pub divergence_slope: f64,
    pub fit_rungs: usize,
    /// Worker threads; 0 uses the machine parallelism. Results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            tol_null: 1e-9,
            epsilon0: 1.0,
            rungs: 12,
            refine_seeds: 20,
            refine_iterations: 200,
            divergence_margin: 1.0,
            divergence_slope: -0.5,
            fit_rungs: 6,
            workers: 0,
        }
    }
}

impl AnalysisConfig {
    /// `ε_k`.
    pub fn rung_upper(&self, k: usize) -> f64 {
        self.epsilon0 * 0.5f64.powi(k as i32)
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        let bad = |m: &str| Err(AnalysisError::InvalidConfig(m.into()));
        if !(self.epsilon0 > 0.0 && self.epsilon0.is_finite()) {
            return bad("epsilon0 must be positive");
        }
        if self.rungs == 0 || self.rungs > 60 {
            return bad("rungs must be in 1..=60");
        }
        if self.fit_rungs < 2 {
            return bad("fit_rungs must be at least 2");
        }
        if !(self.tol_null >= 0.0) {
            return bad("tol_null must be non-negative");
        }
        Ok(())
    }
}

/// A sampled point `(p, v)` of the sphere bundle with its causal and field values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSample {
    #[serde(serialize_with = "reals")]
    pub p: Vec<f64>,
    #[serde(serialize_with = "reals")]
    pub v: Vec<f64>,
    /// `g_p(v,v)`.
    #[serde(serialize_with = "real")]
    pub g: f64,
    /// `F_p(v,v)`.
    #[serde(serialize_with = "real")]
    pub f: f64,
    /// `F/|g|`.
    #[serde(serialize_with = "real")]
    pub ratio: f64,
    /// `F/g`.
    #[serde(serialize_with = "real")]
    pub quotient: f64,
}

impl RatioSample {
    pub fn new(p: &[f64], v: &DVector<f64>, g: f64, f: f64) -> Self {
        Self {
            p: p.to_vec(),
            v: v.iter().copied().collect(),
            g,
            f,
            ratio: f / g.abs(),
            quotient: f / g,
        }
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `|g(v,v)|`.
    pub fn margin(&self) -> f64 {
        self.g.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NecVerdict {
    Holds,
    Violated,
    /// No grid point has a null cone.
    VacuouslyHolds,
}

impl NecVerdict {
    pub fn holds(self) -> bool {
        self != Self::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecReport {
    pub verdict: NecVerdict,
    /// Smallest `F(v,v)` over the null samples.
    #[serde(serialize_with = "opt_real")]
    pub min_value: Option<f64>,
    pub worst_sample: Option<RatioSample>,
    pub null_samples: usize,
    pub base_points: usize,
    /// Base points where `g_p` is definite.
    pub riemannian_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Timelike,
    AllNonNull,
}

/// One stratum `ε_{k+1} < |g(v,v)| <= ε_k` of the margin sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    #[serde(serialize_with = "real")]
    pub epsilon: f64,
    #[serde(serialize_with = "real")]
    pub lower: f64,
    /// `None` for an empty stratum.
    #[serde(serialize_with = "opt_real")]
    pub inf_r: Option<f64>,
    pub n_samples: usize,
    #[serde(skip)]
    pub minimizer: Option<RatioSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CzEstimate {
    pub mode: EstimateMode,
    /// Timelike: `sup F/g`; all non-null: `inf F/|g|`.
    #[serde(serialize_with = "opt_real")]
    pub value: Option<f64>,
    pub minimizer: Option<RatioSample>,
    pub strata: Vec<Rung>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Bounded,
    Diverging,
    InsufficientData,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Reported all-non-null constant when bounded.
    #[serde(serialize_with = "opt_real")]
    pub cz: Option<f64>,
    #[serde(serialize_with = "opt_real")]
    pub final_rung: Option<f64>,
    /// Least-squares slope of `inf_r` per rung over the fitted rungs.
    #[serde(serialize_with = "opt_real")]
    pub slope: Option<f64>,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub metric: String,
    pub field: String,
    pub provenance: &'static str,
    pub region: Region,
    pub config: AnalysisConfig,
    pub nec: NecReport,
    /// Timelike constant `C^T = sup_{g(v,v)<0} F/g`.
    #[serde(serialize_with = "opt_real")]
    pub empirical_cz: Option<f64>,
    pub empirical_cz_minimizer: Option<RatioSample>,
    /// All-non-null constant `C_Z = inf_{g(v,v)≠0} F/|g|`.
    #[serde(serialize_with = "opt_real")]
    pub empirical_cz_theorem: Option<f64>,
    pub empirical_cz_theorem_minimizer: Option<RatioSample>,
    pub normalization: &'static str,
    pub margin_sweep: Vec<Rung>,
    /// Smallest near-null certificate over the null samples.
    #[serde(serialize_with = "opt_real")]
    pub certificate_inf: Option<f64>,
    pub samples: usize,
    pub verdict: Verdict,
}

const NORMALIZATION: &str = "empirical_cz = sup over timelike v of F/g = -(inf over timelike v of F/|g|); \
empirical_cz_theorem = inf over non-null v of F/|g|; the verdict is a heuristic classifier, not a proof";

impl BoundReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Margin sweep as CSV with header `epsilon,inf_r,n_samples`.
    pub fn sweep_csv(&self) -> String {
        let mut out = String::from("epsilon,inf_r,n_samples\n");
        for rung in &self.margin_sweep {
            let inf = rung.inf_r.map(g12).unwrap_or_default();
            out += &format!("{},{},{}\n", g12(rung.epsilon), inf, rung.n_samples);
        }
        out
    }
}

fn run_points(
    field: &SymmetricField,
    spec: &MetricSpec,
    region: &Region,
    config: &AnalysisConfig,
    full: bool,
) -> Result<Vec<PointOutcome>, AnalysisError> {
    config.validate()?;
    region.validate(spec)?;
    let points = region.grid_points();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| AnalysisError::Pool(e.to_string()))?;
    pool.install(|| {
        points
            .par_iter()
            .map(|p| analyze_point(field, spec, p, region, config, full))
            .collect()
    })
}

fn nec_from(outcomes: &[PointOutcome], config: &AnalysisConfig) -> NecReport {
    let mut worst: Option<RatioSample> = None;
    for o in outcomes {
        if let Some(s) = &o.nec_worst {
            keep_min(&mut worst, s.clone(), |s| s.f);
        }
    }
    let riemannian_points = outcomes.iter().filter(|o| o.riemannian).count();
    let min_value = worst.as_ref().map(|s| s.f);
    let verdict = match min_value {
        None => NecVerdict::VacuouslyHolds,
        Some(m) if m >= -config.tol_null => NecVerdict::Holds,
        Some(_) => NecVerdict::Violated,
    };
    NecReport {
        verdict,
        min_value,
        worst_sample: worst,
        null_samples: outcomes.iter().map(|o| o.null_count).sum(),
        base_points: outcomes.len(),
        riemannian_points,
    }
}

fn sweep_from(outcomes: &[PointOutcome], config: &AnalysisConfig) -> Vec<Rung> {
    (0..config.rungs)
        .map(|k| {
            let mut best: Option<RatioSample> = None;
            let mut n_samples = 0;
            for o in outcomes {
                n_samples += o.strata[k].count;
                if let Some(s) = &o.strata[k].best {
                    keep_min(&mut best, s.clone(), RatioSample::ratio);
                }
            }
            Rung {
                epsilon: config.rung_upper(k),
                lower: config.rung_upper(k + 1),
                inf_r: best.as_ref().map(|s| s.ratio),
                n_samples,
                minimizer: best,
            }
        })
        .collect()
}

fn best_of(
    outcomes: &[PointOutcome],
    pick: impl Fn(&PointOutcome) -> &Option<RatioSample>,
) -> Option<RatioSample> {
    let mut best = None;
    for o in outcomes {
        if let Some(s) = pick(o) {
            keep_min(&mut best, s.clone(), RatioSample::ratio);
        }
    }
    best
}

fn estimate_from(
    outcomes: &[PointOutcome],
    mode: EstimateMode,
    config: &AnalysisConfig,
) -> CzEstimate {
    let minimizer = match mode {
        EstimateMode::Timelike => best_of(outcomes, |o| &o.best_timelike),
        EstimateMode::AllNonNull => best_of(outcomes, |o| &o.best_all),
    };
    let value = minimizer.as_ref().map(|s| match mode {
        // written as a subtraction so an exact zero stays +0
        EstimateMode::Timelike => 0.0 - s.ratio,
        EstimateMode::AllNonNull => s.ratio,
    });
    CzEstimate {
        mode,
        value,
        minimizer,
        strata: sweep_from(outcomes, config),
    }
}

/// Checks `F(v,v) >= −tol_null` on seeded null samples at every grid point.
pub fn check_nec(
    field: &SymmetricField,
    spec: &MetricSpec,
    region: &Region,
    config: &AnalysisConfig,
) -> Result<NecReport, AnalysisError> {
    let outcomes = run_points(field, spec, region, config, false)?;
    Ok(nec_from(&outcomes, config))
}

/// Stratified sampling followed by simplex refinement on each fiber.
pub fn estimate_cz(
    field: &SymmetricField,
    spec: &MetricSpec,
    region: &Region,
    mode: EstimateMode,
    config: &AnalysisConfig,
) -> Result<CzEstimate, AnalysisError> {
    let outcomes = run_points(field, spec, region, config, true)?;
    Ok(estimate_from(&outcomes, mode, config))
}

/// Infimum of `F/|g|` in each null-margin stratum, from the largest margin down.
pub fn margin_sweep(
    field: &SymmetricField,
    spec: &MetricSpec,
    region: &Region,
    config: &AnalysisConfig,
) -> Result<Vec<Rung>, AnalysisError> {
    let outcomes = run_points(field, spec, region, config, true)?;
    Ok(sweep_from(&outcomes, config))
}

/// Taylor bound `−|F(v0, g v0)| / ⟨g v0, g v0⟩` on the ratio along the flow
/// leaving the null vector `v0`.
pub fn near_null_certificate(
    field: &SymmetricField,
    spec: &MetricSpec,
    p: &[f64],
    v0: &DVector<f64>,
) -> Result<f64, AnalysisError> {
    let (f, g) = field.evaluate_with_metric(spec, p)?;
    if v0.len() != spec.dim() {
        return Err(FlowError::DimensionMismatch {
            expected: spec.dim(),
            found: v0.len(),
        }
        .into());
    }
    let causal = form(&g, v0);
    if causal.abs() > NULL_ANCHOR_TOLERANCE {
        return Err(AnalysisError::NotNull { causal });
    }
    Ok(certificate_value(&f, &g, v0))
}

fn rule_text(config: &AnalysisConfig) -> String {
    format!(
        "diverging iff the last nonempty rung is below certificate_inf - {} and the least-squares \
         slope of inf_r per rung over the last {} nonempty rungs is below {}",
        g12(config.divergence_margin),
        config.fit_rungs,
        g12(config.divergence_slope)
    )
}

fn classify(
    sweep: &[Rung],
    certificate_inf: Option<f64>,
    cz: Option<f64>,
    config: &AnalysisConfig,
) -> Result<Verdict, AnalysisError> {
    let points: Vec<(f64, f64)> = sweep
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.inf_r.map(|v| (k as f64, v)))
        .collect();
    if points.len() < config.fit_rungs {
        return Err(AnalysisError::InsufficientData {
            nonempty: points.len(),
            required: config.fit_rungs,
        });
    }
    let tail = &points[points.len() - config.fit_rungs..];
    let m = tail.len() as f64;
    let mean_k = tail.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_r = tail.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mean_k) * (p.1 - mean_r)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mean_k).powi(2)).sum();
    let slope = sxy / sxx;
    let final_rung = tail[tail.len() - 1].1;
    let below = certificate_inf.map_or(true, |c| final_rung < c - config.divergence_margin);
    let diverging = below && slope < config.divergence_slope;
    Ok(Verdict {
        kind: if diverging {
            VerdictKind::Diverging
        } else {
            VerdictKind::Bounded
        },
        cz: if diverging { None } else { cz },
        final_rung: Some(final_rung),
        slope: Some(slope),
        rule: rule_text(config),
    })
}

/// Re-derives the bounded/diverging classification from a report.
pub fn verdict(report: &BoundReport) -> Result<Verdict, AnalysisError> {
    classify(
        &report.margin_sweep,
        report.certificate_inf,
        report.empirical_cz_theorem,
        &report.config,
    )
}

/// Full analysis: NEC check, both constants, margin sweep, certificates and verdict.
pub fn bound(
    field: &SymmetricField,
    spec: &MetricSpec,
    region: &Region,
    config: &AnalysisConfig,
) -> Result<BoundReport, AnalysisError> {
    let outcomes = run_points(field, spec, region, config, true)?;
    let nec = nec_from(&outcomes, config);
    let timelike = estimate_from(&outcomes, EstimateMode::Timelike, config);
    let all = estimate_from(&outcomes, EstimateMode::AllNonNull, config);
    let certificate_inf = outcomes
        .iter()
        .filter_map(|o| o.certificate.as_ref().map(|c| c.0))
        .fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.min(c)))
        });
    let verdict = match classify(&all.strata, certificate_inf, all.value, config) {
        Ok(v) => v,
        Err(AnalysisError::InsufficientData { .. }) => Verdict {
            kind: VerdictKind::InsufficientData,
            cz: None,
            final_rung: None,
            slope: None,
            rule: rule_text(config),
        },
        Err(e) => return Err(e),
    };
    Ok(BoundReport {
        metric: spec.name().to_string(),
        field: field.label(),
        provenance: field.provenance().as_str(),
        region: region.clone(),
        config: config.clone(),
        nec,
        empirical_cz: timelike.value,
        empirical_cz_minimizer: timelike.minimizer,
        empirical_cz_theorem: all.value,
        empirical_cz_theorem_minimizer: all.minimizer,
        normalization: NORMALIZATION,
        margin_sweep: all.strata,
        certificate_inf,
        samples: outcomes.iter().map(|o| o.samples).sum(),
        verdict,
    })
}

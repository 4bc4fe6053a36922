//! Work done at a single base point. Everything downstream of the field and
//! metric evaluation is fiberwise linear algebra.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::simplex::minimize_on_sphere;
use super::{AnalysisConfig, AnalysisError, RatioSample, Region};
use crate::curvature::SymmetricField;
use crate::dsl::MetricSpec;
use crate::flow::{ConeFlow, DEFAULT_SEARCH_SPAN};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the generator at base point `p`: a function of the run seed and
/// the coordinates only, so a point draws the same samples in any region.
pub(crate) fn point_seed(seed: u64, p: &[f64]) -> u64 {
    p.iter()
        .fold(splitmix(seed), |h, x| splitmix(h ^ x.to_bits()))
}

pub(crate) fn form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// `−|F(v0, g v0)| / ⟨g v0, g v0⟩`.
pub(crate) fn certificate_value(f: &DMatrix<f64>, g: &DMatrix<f64>, v0: &DVector<f64>) -> f64 {
    let gv = g * v0;
    // subtraction keeps an exact zero at +0
    0.0 - v0.dot(&(f * &gv)).abs() / gv.norm_squared()
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Stratum {
    pub count: usize,
    pub best: Option<RatioSample>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct PointOutcome {
    pub riemannian: bool,
    pub null_count: usize,
    /// Null sample with the smallest `F(v,v)`.
    pub nec_worst: Option<RatioSample>,
    pub certificate: Option<(f64, RatioSample)>,
    pub strata: Vec<Stratum>,
    pub samples: usize,
    pub best_all: Option<RatioSample>,
    pub best_timelike: Option<RatioSample>,
}

pub(crate) fn keep_min(
    slot: &mut Option<RatioSample>,
    candidate: RatioSample,
    key: impl Fn(&RatioSample) -> f64,
) {
    let better = match slot {
        Some(current) => key(&candidate) < key(current),
        None => true,
    };
    if better {
        *slot = Some(candidate);
    }
}

/// Stratum index of a null margin: `k` with `ε_{k+1} < m <= ε_k`.
fn stratum_of(margin: f64, config: &AnalysisConfig) -> Option<usize> {
    if !(margin > 0.0) || margin > config.epsilon0 {
        return None;
    }
    (0..config.rungs).find(|&k| margin > config.rung_upper(k + 1))
}

fn unit_gaussian(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

pub(crate) fn analyze_point(
    field: &SymmetricField,
    spec: &MetricSpec,
    p: &[f64],
    region: &Region,
    config: &AnalysisConfig,
    full: bool,
) -> Result<PointOutcome, AnalysisError> {
    let (f, g) = field.evaluate_with_metric(spec, p)?;
    let flow = ConeFlow::new(g.clone())?;
    let n = spec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(point_seed(region.seed, p));
    let sample = |v: DVector<f64>| {
        let (gv, fv) = (form(&g, &v), form(&f, &v));
        RatioSample::new(p, &v, gv, fv)
    };

    let mut out = PointOutcome {
        riemannian: !flow.frame().is_mixed(),
        strata: vec![Stratum::default(); config.rungs],
        ..Default::default()
    };

    let anchors = if out.riemannian {
        Vec::new()
    } else {
        let (neg, pos) = region.null_directions;
        flow.sample_null(neg, pos, rng.random())?.vectors
    };
    out.null_count = anchors.len();
    for v0 in &anchors {
        let s = sample(v0.clone());
        let b = certificate_value(&f, &g, v0);
        if out.certificate.as_ref().map_or(true, |(best, _)| b < *best) {
            out.certificate = Some((b, s.clone()));
        }
        keep_min(&mut out.nec_worst, s, |s| s.f);
    }
    if !full {
        return Ok(out);
    }

    let mut stage: Vec<RatioSample> = Vec::new();
    for _ in 0..region.sphere_samples {
        stage.push(sample(unit_gaussian(&mut rng, n)));
    }
    for v0 in &anchors {
        for k in 0..config.rungs {
            let lower = config.rung_upper(k + 1);
            for side in [1.0, -1.0] {
                let target = side * lower * 2f64.powf(rng.random::<f64>());
                if let Some(t) = flow.time_to_causal(v0, target, DEFAULT_SEARCH_SPAN) {
                    stage.push(sample(flow.flow_unguarded(v0, t)));
                }
            }
        }
    }
    stage.retain(|s| s.g != 0.0 && s.g.is_finite() && s.f.is_finite());
    out.samples = stage.len();

    for s in &stage {
        if let Some(k) = stratum_of(s.margin(), config) {
            out.strata[k].count += 1;
            keep_min(&mut out.strata[k].best, s.clone(), RatioSample::ratio);
        }
        keep_min(&mut out.best_all, s.clone(), RatioSample::ratio);
        if s.g < 0.0 {
            keep_min(&mut out.best_timelike, s.clone(), RatioSample::ratio);
        }
    }

    let floor = config.rung_upper(config.rungs);
    let refine = |timelike: bool, best: &mut Option<RatioSample>| {
        let mut seeds: Vec<&RatioSample> =
            stage.iter().filter(|s| !timelike || s.g < 0.0).collect();
        seeds.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        for seed in seeds.into_iter().take(config.refine_seeds) {
            let objective = |v: &DVector<f64>| {
                let gv = form(&g, v);
                let admissible = if timelike {
                    gv <= -floor
                } else {
                    gv.abs() >= floor
                };
                if admissible {
                    form(&f, v) / gv.abs()
                } else {
                    f64::INFINITY
                }
            };
            let start = DVector::from_column_slice(&seed.v);
            let (v, value) = minimize_on_sphere(objective, &start, config.refine_iterations);
            if value.is_finite() {
                keep_min(best, sample(v), RatioSample::ratio);
            }
        }
    };
    if config.refine_seeds > 0 && config.refine_iterations > 0 {
        refine(false, &mut out.best_all);
        refine(true, &mut out.best_timelike);
    }
    Ok(out)
}

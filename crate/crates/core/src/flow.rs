//! The vertical cone flow on the unit sphere bundle, its inverse onto the
//! null cone, and null-cone sampling.
//!
//! Everything here is fiberwise: a metric value `g_p` and unit vectors `v`.
//! Flow quantities are computed in the eigenbasis of `g_p` with logarithmic
//! weights, so exponents far beyond the double range stay well defined.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::curvature::{spectral_frame, CurvatureError, SpectralFrame};

/// `|2 t λ_max|` above which the closed-form flow refuses to run.
pub const EXPONENT_GUARD: f64 = 300.0;
/// Default search half-width for [`project_to_null`].
pub const DEFAULT_SEARCH_SPAN: f64 = 40.0;
const UNIT_TOLERANCE: f64 = 1e-8;
/// Relative causal value below which a projection input counts as null.
const NULL_INPUT_TOLERANCE: f64 = 1e-12;
/// Absolute causal value above which an anchor is not null.
pub const NULL_ANCHOR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("flow parameter {t} out of range: |2 t λ_max| = {exponent} exceeds {EXPONENT_GUARD}")]
    ParameterOutOfRange { t: f64, exponent: f64 },
    #[error("round trip parameter {0} exceeds 5")]
    RoundTripRange(f64),
    #[error("vector is not in the flow image of the null cone within |t| <= {span}")]
    NotInFlowImage { span: f64 },
    #[error("metric is definite: there are no null vectors")]
    RiemannianSignature,
    #[error("input vector is null (g(v,v) = {causal:e}); projection needs g(v,v) != 0")]
    NullInput { causal: f64 },
    #[error("vector is not null: g(v,v) = {causal:e}")]
    NotNull { causal: f64 },
    #[error("vector is not unit length (norm {norm})")]
    NotUnit { norm: f64 },
    #[error("vector has {found} components, metric has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("step count must be at least 1")]
    InvalidSteps,
}

/// A point of the tangent bundle over a chart: base point and fiber vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub p: Vec<f64>,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub t: f64,
    pub start: DVector<f64>,
    pub end: DVector<f64>,
    /// `g_p(end, end)`.
    pub causal: f64,
}

/// A non-null unit vector written as the flow image of a null anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct NullProjection {
    pub input: DVector<f64>,
    /// Signed flow time that carries `input` onto the null cone:
    /// `Φ(t, input) = anchor`.
    pub t: f64,
    pub anchor: DVector<f64>,
    /// `|g_p(anchor, anchor)|`.
    pub residual: f64,
}

impl NullProjection {
    /// The parameter `s` with `Φ(s, anchor) = input`, i.e. `-t`.
    pub fn flow_parameter(&self) -> f64 {
        -self.t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullSampleSet {
    pub vectors: Vec<DVector<f64>>,
    /// Directions drawn on the negative and positive eigenspace spheres.
    pub negative_directions: usize,
    pub positive_directions: usize,
}

/// Residuals of flowing a null vector and projecting it back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrip {
    pub t_error: f64,
    pub anchor_error: f64,
}

fn quad(g: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    u.dot(&(g * v))
}

fn check_dim(g: &DMatrix<f64>, v: &DVector<f64>) -> Result<(), FlowError> {
    if g.nrows() == v.len() {
        Ok(())
    } else {
        Err(FlowError::DimensionMismatch {
            expected: g.nrows(),
            found: v.len(),
        })
    }
}

fn check_unit(v: &DVector<f64>) -> Result<(), FlowError> {
    let norm = v.norm();
    if (norm - 1.0).abs() <= UNIT_TOLERANCE {
        Ok(())
    } else {
        Err(FlowError::NotUnit { norm })
    }
}

/// `X = 2(g v − g(v,v) v)`, tangent to the unit sphere at `v`.
pub fn vector_field_x(g: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let gv = g * v;
    let h = v.dot(&gv);
    (gv - v * h) * 2.0
}

/// Right-hand side of the fiberwise ODE; identical to [`vector_field_x`].
pub fn ode_rhs(g: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    vector_field_x(g, v)
}

/// `g_p(v, X)`, which for unit `v` equals `2⟨g v, g v⟩ − 2 g(v,v)²`.
pub fn nontangency_value(g: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    quad(g, v, &vector_field_x(g, v))
}

/// Causal value along the flow through a fixed vector, in log-weighted
/// eigen-coordinates: `u(s) ∝ Σ c_i e^{2 s λ_i} q_i`.
struct Profile<'a> {
    frame: &'a SpectralFrame,
    /// `ln |c_i|`, `-inf` for vanishing coordinates.
    log_abs: Vec<f64>,
    signs: Vec<f64>,
}

impl<'a> Profile<'a> {
    fn new(frame: &'a SpectralFrame, v: &DVector<f64>) -> Self {
        let c = frame.to_eigenbasis(v);
        Self {
            frame,
            log_abs: c.iter().map(|x| x.abs().ln()).collect(),
            signs: c.iter().map(|x| x.signum()).collect(),
        }
    }

    fn lambda(&self, i: usize) -> f64 {
        self.frame.eigenvalues[i]
    }

    /// Normalized squared weights `p_i(s) ∝ c_i² e^{4 s λ_i}`.
    fn weights(&self, s: f64) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.log_abs.len())
            .map(|i| 2.0 * self.log_abs[i] + 4.0 * s * self.lambda(i))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// `(h(s), h'(s))` with `h = g(u(s), u(s))` and `h' = 4(E[λ²] − h²)`.
    fn causal(&self, s: f64) -> (f64, f64) {
        let w = self.weights(s);
        let mut h = 0.0;
        let mut second = 0.0;
        for (i, wi) in w.iter().enumerate() {
            let l = self.lambda(i);
            h += wi * l;
            second += wi * l * l;
        }
        (h, 4.0 * (second - h * h))
    }

    fn vector(&self, s: f64) -> DVector<f64> {
        let n = self.log_abs.len();
        let logs: Vec<f64> = (0..n)
            .map(|i| self.log_abs[i] + 2.0 * s * self.lambda(i))
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w = DVector::from_iterator(n, (0..n).map(|i| self.signs[i] * (logs[i] - top).exp()));
        let w = &w / w.norm();
        self.frame.from_eigenbasis(&w)
    }

    /// Solves `h(s) = target` by geometric bracketing out to `±span`,
    /// bisection, and one Newton step. `h` is nondecreasing in `s`.
    fn solve(&self, target: f64, span: f64) -> Option<f64> {
        let (h0, _) = self.causal(0.0);
        if h0 == target {
            return Some(0.0);
        }
        let direction = if h0 < target { 1.0 } else { -1.0 };
        let crossed = |s: f64| (self.causal(s).0 - target) * direction >= 0.0;

        let mut inner = 0.0;
        let mut step = 0.0625f64;
        let outer = loop {
            let s = direction * step.min(span);
            if crossed(s) {
                break s;
            }
            if step >= span {
                return None;
            }
            inner = s;
            step *= 2.0;
        };

        let (mut lo, mut hi) = if direction > 0.0 {
            (inner, outer)
        } else {
            (outer, inner)
        };
        // invariant: h(lo) < target <= h(hi)
        for _ in 0..200 {
            if hi - lo <= 1e-14 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.causal(mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        let (h, dh) = self.causal(mid);
        if dh > 0.0 {
            let polished = mid - (h - target) / dh;
            if (self.causal(polished).0 - target).abs() < (h - target).abs() {
                return Some(polished);
            }
        }
        Some(mid)
    }
}

/// Cone flow on a single fiber, with the spectral frame of `g_p` cached.
#[derive(Debug, Clone)]
pub struct ConeFlow {
    g: DMatrix<f64>,
    frame: SpectralFrame,
}

impl ConeFlow {
    pub fn new(g: DMatrix<f64>) -> Result<Self, FlowError> {
        let frame = spectral_frame(&g)?;
        Ok(Self { g, frame })
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn frame(&self) -> &SpectralFrame {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn causal(&self, v: &DVector<f64>) -> f64 {
        quad(&self.g, v, v)
    }

    fn guard(&self, t: f64) -> Result<(), FlowError> {
        let exponent = (2.0 * t * self.frame.max_abs_eigenvalue()).abs();
        if exponent > EXPONENT_GUARD {
            Err(FlowError::ParameterOutOfRange { t, exponent })
        } else {
            Ok(())
        }
    }

    /// `Φ(t, v0) = e^{2tG} v0 / ‖e^{2tG} v0‖`.
    pub fn flow(&self, v0: &DVector<f64>, t: f64) -> Result<FlowResult, FlowError> {
        check_dim(&self.g, v0)?;
        check_unit(v0)?;
        self.guard(t)?;
        let end = if t == 0.0 {
            v0.clone()
        } else {
            Profile::new(&self.frame, v0).vector(t)
        };
        Ok(FlowResult {
            t,
            start: v0.clone(),
            causal: self.causal(&end),
            end,
        })
    }

    /// Flows the fiber of a bundle point; the base point is carried over unchanged.
    pub fn flow_bundle(&self, point: &BundlePoint, t: f64) -> Result<BundlePoint, FlowError> {
        Ok(BundlePoint {
            p: point.p.clone(),
            v: self.flow(&point.v, t)?.end,
        })
    }

    /// Classical RK4 on [`ode_rhs`] without renormalization.
    pub fn flow_rk(
        &self,
        v0: &DVector<f64>,
        t: f64,
        steps: usize,
    ) -> Result<DVector<f64>, FlowError> {
        check_dim(&self.g, v0)?;
        check_unit(v0)?;
        self.guard(t)?;
        if steps == 0 {
            return Err(FlowError::InvalidSteps);
        }
        let h = t / steps as f64;
        let mut v = v0.clone();
        for _ in 0..steps {
            let k1 = ode_rhs(&self.g, &v);
            let k2 = ode_rhs(&self.g, &(&v + &k1 * (0.5 * h)));
            let k3 = ode_rhs(&self.g, &(&v + &k2 * (0.5 * h)));
            let k4 = ode_rhs(&self.g, &(&v + &k3 * h));
            v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        Ok(v)
    }

    fn require_cone(&self) -> Result<(), FlowError> {
        if self.frame.is_mixed() {
            Ok(())
        } else {
            Err(FlowError::RiemannianSignature)
        }
    }

    pub fn project(&self, v: &DVector<f64>) -> Result<NullProjection, FlowError> {
        self.project_within(v, DEFAULT_SEARCH_SPAN)
    }

    /// Inverse of the flow onto the null cone, searching `s ∈ [−span, span]`.
    pub fn project_within(&self, v: &DVector<f64>, span: f64) -> Result<NullProjection, FlowError> {
        check_dim(&self.g, v)?;
        self.require_cone()?;
        check_unit(v)?;
        let causal = self.causal(v);
        if causal.abs() <= NULL_INPUT_TOLERANCE * self.frame.max_abs_eigenvalue() {
            return Err(FlowError::NullInput { causal });
        }
        let profile = Profile::new(&self.frame, v);
        let t = profile
            .solve(0.0, span)
            .ok_or(FlowError::NotInFlowImage { span })?;
        let anchor = profile.vector(t);
        Ok(NullProjection {
            input: v.clone(),
            t,
            residual: self.causal(&anchor).abs(),
            anchor,
        })
    }

    /// Flow time `t` with `g(Φ(t, v), Φ(t, v)) = target`, if one exists
    /// within `|t| <= span`.
    pub fn time_to_causal(&self, v: &DVector<f64>, target: f64, span: f64) -> Option<f64> {
        Profile::new(&self.frame, v).solve(target, span)
    }

    /// `Φ(t, v)` without the exponent guard; used for internal sampling.
    pub(crate) fn flow_unguarded(&self, v: &DVector<f64>, t: f64) -> DVector<f64> {
        if t == 0.0 {
            v.clone()
        } else {
            Profile::new(&self.frame, v).vector(t)
        }
    }

    pub fn roundtrip(&self, v0: &DVector<f64>, t: f64) -> Result<RoundTrip, FlowError> {
        let causal = self.causal(v0);
        if causal.abs() > NULL_ANCHOR_TOLERANCE {
            return Err(FlowError::NotNull { causal });
        }
        if t.abs() > 5.0 {
            return Err(FlowError::RoundTripRange(t));
        }
        let flowed = self.flow(v0, t)?;
        let projection = self.project(&flowed.end)?;
        Ok(RoundTrip {
            t_error: (projection.flow_parameter() - t).abs(),
            anchor_error: (&projection.anchor - v0).amax(),
        })
    }

    pub fn sample_null(
        &self,
        count_neg: usize,
        count_pos: usize,
        seed: u64,
    ) -> Result<NullSampleSet, FlowError> {
        sample_null_cone(&self.frame, count_neg, count_pos, seed)
    }
}

pub fn flow_closed_form(
    g: &DMatrix<f64>,
    v0: &DVector<f64>,
    t: f64,
) -> Result<FlowResult, FlowError> {
    ConeFlow::new(g.clone())?.flow(v0, t)
}

pub fn flow_rk_oracle(
    g: &DMatrix<f64>,
    v0: &DVector<f64>,
    t: f64,
    steps: usize,
) -> Result<DVector<f64>, FlowError> {
    ConeFlow::new(g.clone())?.flow_rk(v0, t, steps)
}

pub fn project_to_null(g: &DMatrix<f64>, v: &DVector<f64>) -> Result<NullProjection, FlowError> {
    ConeFlow::new(g.clone())?.project(v)
}

pub fn roundtrip_check(
    g: &DMatrix<f64>,
    v0: &DVector<f64>,
    t: f64,
) -> Result<RoundTrip, FlowError> {
    ConeFlow::new(g.clone())?.roundtrip(v0, t)
}

/// The unique null unit vector `Q(s a' ⊕ c b')` mixing eigen-coordinates
/// `a` (supported on negative eigenvalues) and `b` (on positive ones).
pub fn null_from_pair(frame: &SpectralFrame, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let lambda = &frame.eigenvalues;
    let k = frame.signature().0;
    let big_a: f64 = (0..k).map(|i| lambda[i].abs() * a[i] * a[i]).sum();
    let big_b: f64 = (k..lambda.len()).map(|j| lambda[j] * b[j] * b[j]).sum();
    let s = (big_b / (big_a + big_b)).sqrt();
    let c = (big_a / (big_a + big_b)).sqrt();
    frame.from_eigenbasis(&(a * s + b * c))
}

fn sphere_directions(
    rng: &mut ChaCha8Rng,
    range: std::ops::Range<usize>,
    n: usize,
    count: usize,
) -> Vec<DVector<f64>> {
    if range.len() == 1 {
        return [1.0, -1.0]
            .iter()
            .map(|&sign| {
                let mut e = DVector::zeros(n);
                e[range.start] = sign;
                e
            })
            .collect();
    }
    (0..count)
        .map(|_| loop {
            let mut e = DVector::<f64>::zeros(n);
            for i in range.clone() {
                e[i] = StandardNormal.sample(rng);
            }
            let norm = e.norm();
            if norm > 1e-12 {
                break e / norm;
            }
        })
        .collect()
}

/// Seeded sample of the null unit cone: every pairing of `count_neg`
/// negative-space directions with `count_pos` positive-space directions.
///
/// One-dimensional eigenspaces contribute exactly their two unit vectors.
pub fn sample_null_cone(
    frame: &SpectralFrame,
    count_neg: usize,
    count_pos: usize,
    seed: u64,
) -> Result<NullSampleSet, FlowError> {
    if !frame.is_mixed() {
        return Err(FlowError::RiemannianSignature);
    }
    let n = frame.dim();
    let k = frame.signature().0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let negatives = sphere_directions(&mut rng, 0..k, n, count_neg);
    let positives = sphere_directions(&mut rng, k..n, n, count_pos);
    let mut vectors = Vec::with_capacity(negatives.len() * positives.len());
    for a in &negatives {
        for b in &positives {
            vectors.push(null_from_pair(frame, a, b));
        }
    }
    Ok(NullSampleSet {
        vectors,
        negative_directions: negatives.len(),
        positive_directions: positives.len(),
    })
}

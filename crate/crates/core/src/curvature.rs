//! Levi-Civita curvature of a metric jet, weighted Ricci tensors, spectral
//! frames of `g_p`, and the symmetric (0,2)-fields fed to the analysis.

use nalgebra::{DMatrix, DVector};

use crate::dsl::{
    evaluate_jet, packed_index, EvalError, Expression, FieldDocument, JetEvaluation, MetricSpec,
};

/// Default relative threshold below which an eigenvalue counts as zero.
pub const DEFAULT_DEGENERACY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CurvatureError {
    #[error("degenerate metric: smallest |eigenvalue| {smallest:e}, largest {largest:e}")]
    DegenerateMetric { smallest: f64, largest: f64 },
    #[error("metric declares no weight V")]
    MissingWeight,
    #[error("N = n requires a constant weight V")]
    NonConstantWeightAtCriticalDimension,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("field has dimension {found}, metric has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Eigen-decomposition `g_p = Q diag(λ) Qᵀ` with ascending eigenvalues.
///
/// Each eigenvector has its first nonzero component positive. The stored
/// eigenvalues are the true ones, not normalized to ±1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    pub eigenvalues: DVector<f64>,
    /// Columns are orthonormal eigenvectors.
    pub vectors: DMatrix<f64>,
    negatives: usize,
}

impl SpectralFrame {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `(k, n - k)`: counts of negative and positive eigenvalues.
    pub fn signature(&self) -> (usize, usize) {
        (self.negatives, self.dim() - self.negatives)
    }

    /// True when a null cone exists (both signs present).
    pub fn is_mixed(&self) -> bool {
        self.negatives > 0 && self.negatives < self.dim()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, l| m.max(l.abs()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.eigenvalues) * self.vectors.transpose()
    }

    /// `g_p⁻¹` assembled from the frame.
    pub fn inverse(&self) -> DMatrix<f64> {
        let inv = self.eigenvalues.map(|l| 1.0 / l);
        &self.vectors * DMatrix::from_diagonal(&inv) * self.vectors.transpose()
    }

    /// Coordinates of `v` in the eigenbasis, `Qᵀ v`.
    pub fn to_eigenbasis(&self, v: &DVector<f64>) -> DVector<f64> {
        self.vectors.tr_mul(v)
    }

    pub fn from_eigenbasis(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.vectors * c
    }
}

pub fn spectral_frame(g: &DMatrix<f64>) -> Result<SpectralFrame, CurvatureError> {
    spectral_frame_with_threshold(g, DEFAULT_DEGENERACY)
}

/// As [`spectral_frame`] with a custom relative degeneracy threshold.
pub fn spectral_frame_with_threshold(
    g: &DMatrix<f64>,
    threshold: f64,
) -> Result<SpectralFrame, CurvatureError> {
    let n = g.nrows();
    let eigen = nalgebra::SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eigen.eigenvalues[i]));
    let largest = eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let smallest = eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, l| m.min(l.abs()));
    if !(smallest > threshold * largest) {
        return Err(CurvatureError::DegenerateMetric { smallest, largest });
    }

    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eigen.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    let negatives = eigenvalues.iter().filter(|&&l| l < 0.0).count();
    Ok(SpectralFrame {
        eigenvalues,
        vectors,
        negatives,
    })
}

/// Christoffel symbols of the second kind, `Γ^i_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// `Γ^i_jk`
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }
}

/// First-kind symbols `Γ_ljk = ½(∂_j g_lk + ∂_k g_lj − ∂_l g_jk)`, indexed `[l][j][k]`.
fn first_kind(jet: &JetEvaluation) -> Vec<f64> {
    let n = jet.dim();
    let mut out = vec![0.0; n * n * n];
    for l in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(l * n + j) * n + k] = 0.5 * (jet.d(j, l, k) + jet.d(k, l, j) - jet.d(l, j, k));
            }
        }
    }
    out
}

fn raise(ginv: &DMatrix<f64>, lowered: &[f64]) -> Vec<f64> {
    let n = ginv.nrows();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] = (0..n)
                    .map(|l| ginv[(i, l)] * lowered[(l * n + j) * n + k])
                    .sum();
            }
        }
    }
    out
}

pub fn christoffel(jet: &JetEvaluation) -> Result<Christoffel, CurvatureError> {
    let ginv = spectral_frame(&jet.value)?.inverse();
    Ok(Christoffel {
        n: jet.dim(),
        data: raise(&ginv, &first_kind(jet)),
    })
}

/// Ricci tensor from a jet.
///
/// `∂Γ` comes from the exact second derivatives in the jet, with
/// `∂_m g^{il} = −g^{ia} ∂_m g_ab g^{bl}`.
pub fn ricci_from_jet(jet: &JetEvaluation) -> Result<DMatrix<f64>, CurvatureError> {
    let n = jet.dim();
    let ginv = spectral_frame(&jet.value)?.inverse();
    let lowered = first_kind(jet);
    let gamma = raise(&ginv, &lowered);
    let idx3 = |a: usize, b: usize, c: usize| (a * n + b) * n + c;

    // dgamma[m][i][j][k] = ∂_m Γ^i_jk
    let mut dgamma = vec![0.0; n * n * n * n];
    for m in 0..n {
        let dginv = -(&ginv * &jet.first[m] * &ginv);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        let d_lowered =
                            0.5 * (jet.dd(m, j, l, k) + jet.dd(m, k, l, j) - jet.dd(m, l, j, k));
                        acc += dginv[(i, l)] * lowered[idx3(l, j, k)] + ginv[(i, l)] * d_lowered;
                    }
                    dgamma[m * n * n * n + idx3(i, j, k)] = acc;
                }
            }
        }
    }
    let dg = |m: usize, i: usize, j: usize, k: usize| dgamma[m * n * n * n + idx3(i, j, k)];
    let g = |i: usize, j: usize, k: usize| gamma[idx3(i, j, k)];

    let mut ric = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += dg(i, i, j, k) - dg(j, i, i, k);
                for l in 0..n {
                    acc += g(i, i, l) * g(l, j, k) - g(i, j, l) * g(l, i, k);
                }
            }
            ric[(j, k)] = acc;
        }
    }
    Ok(ric)
}

pub fn ricci(spec: &MetricSpec, p: &[f64]) -> Result<DMatrix<f64>, CurvatureError> {
    ricci_from_jet(&evaluate_jet(spec, p)?)
}

/// `Ric + Hess V + (N − n)⁻¹ dV ⊗ dV` from a jet carrying the weight.
pub fn bakry_emery_from_jet(
    jet: &JetEvaluation,
    effective_dim: f64,
) -> Result<DMatrix<f64>, CurvatureError> {
    let n = jet.dim();
    let w = jet.weight.as_ref().ok_or(CurvatureError::MissingWeight)?;
    let mut out = ricci_from_jet(jet)?;
    let gamma = christoffel(jet)?;
    for j in 0..n {
        for k in 0..n {
            let connection: f64 = (0..n).map(|l| gamma.get(l, j, k) * w.grad[l]).sum();
            out[(j, k)] += w.hessian[(j, k)] - connection;
        }
    }
    let flat = w.grad.iter().all(|&x| x == 0.0);
    if effective_dim == n as f64 {
        if !flat {
            return Err(CurvatureError::NonConstantWeightAtCriticalDimension);
        }
    } else if !flat {
        let scale = 1.0 / (effective_dim - n as f64);
        out += &w.grad * w.grad.transpose() * scale;
    }
    Ok(out)
}

pub fn bakry_emery(spec: &MetricSpec, p: &[f64]) -> Result<DMatrix<f64>, CurvatureError> {
    let effective_dim = spec.effective_dim().ok_or(CurvatureError::MissingWeight)?;
    if spec.weight().is_none() {
        return Err(CurvatureError::MissingWeight);
    }
    bakry_emery_from_jet(&evaluate_jet(spec, p)?, effective_dim)
}

/// Where a [`SymmetricField`] comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Ricci,
    BakryEmery,
    UserExpression,
    ConstantMatrix,
    MetricMultiple,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ricci => "ricci",
            Self::BakryEmery => "bakry_emery",
            Self::UserExpression => "user_expression",
            Self::ConstantMatrix => "constant_matrix",
            Self::MetricMultiple => "metric_multiple",
        }
    }
}

/// A symmetric (0,2)-tensor field `p ↦ F_p`, evaluated relative to a metric.
#[derive(Debug, Clone, PartialEq)]
pub enum SymmetricField {
    Ricci,
    BakryEmery,
    UserExpression {
        name: String,
        /// Packed upper triangle.
        components: Vec<Expression>,
        dim: usize,
    },
    ConstantMatrix {
        name: String,
        matrix: DMatrix<f64>,
    },
    /// `F = c · g`.
    MetricMultiple(f64),
}

impl SymmetricField {
    pub fn minus_g() -> Self {
        Self::MetricMultiple(-1.0)
    }

    /// `diag(−1, 0, …, 0)`.
    pub fn neg_diag(n: usize) -> Self {
        let mut matrix = DMatrix::zeros(n, n);
        matrix[(0, 0)] = -1.0;
        Self::ConstantMatrix {
            name: "neg_diag".into(),
            matrix,
        }
    }

    pub fn zero(n: usize) -> Self {
        Self::ConstantMatrix {
            name: "zero".into(),
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn constant(name: impl Into<String>, matrix: DMatrix<f64>) -> Result<Self, CurvatureError> {
        if !matrix.is_square() || matrix != matrix.transpose() {
            return Err(CurvatureError::NotSymmetric);
        }
        Ok(Self::ConstantMatrix {
            name: name.into(),
            matrix,
        })
    }

    pub fn from_document(doc: FieldDocument) -> Self {
        Self::UserExpression {
            name: doc.name,
            components: doc.components,
            dim: doc.dim,
        }
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            Self::Ricci => Provenance::Ricci,
            Self::BakryEmery => Provenance::BakryEmery,
            Self::UserExpression { .. } => Provenance::UserExpression,
            Self::ConstantMatrix { .. } => Provenance::ConstantMatrix,
            Self::MetricMultiple(_) => Provenance::MetricMultiple,
        }
    }

    /// Short human-readable label.
    pub fn label(&self) -> String {
        match self {
            Self::Ricci => "ricci".into(),
            Self::BakryEmery => "bakry_emery".into(),
            Self::UserExpression { name, .. } | Self::ConstantMatrix { name, .. } => name.clone(),
            Self::MetricMultiple(c) if *c == -1.0 => "minus_g".into(),
            Self::MetricMultiple(c) => format!("{c}*g"),
        }
    }

    fn check_dim(&self, n: usize) -> Result<(), CurvatureError> {
        let found = match self {
            Self::UserExpression { dim, .. } => *dim,
            Self::ConstantMatrix { matrix, .. } => matrix.nrows(),
            _ => n,
        };
        if found == n {
            Ok(())
        } else {
            Err(CurvatureError::DimensionMismatch { expected: n, found })
        }
    }

    /// `(F_p, g_p)` at `p`.
    pub fn evaluate_with_metric(
        &self,
        spec: &MetricSpec,
        p: &[f64],
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), CurvatureError> {
        let n = spec.dim();
        self.check_dim(n)?;
        match self {
            Self::Ricci => {
                let jet = evaluate_jet(spec, p)?;
                Ok((ricci_from_jet(&jet)?, jet.value))
            }
            Self::BakryEmery => {
                let nn = spec.effective_dim().ok_or(CurvatureError::MissingWeight)?;
                let jet = evaluate_jet(spec, p)?;
                Ok((bakry_emery_from_jet(&jet, nn)?, jet.value))
            }
            Self::UserExpression { components, .. } => {
                let g = spec.metric_at(p)?;
                let mut f = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in i..n {
                        let v = components[packed_index(n, i, j)].eval(p)?;
                        f[(i, j)] = v;
                        f[(j, i)] = v;
                    }
                }
                Ok((f, g))
            }
            Self::ConstantMatrix { matrix, .. } => Ok((matrix.clone(), spec.metric_at(p)?)),
            Self::MetricMultiple(c) => {
                let g = spec.metric_at(p)?;
                Ok((&g * *c, g))
            }
        }
    }

    pub fn evaluate(&self, spec: &MetricSpec, p: &[f64]) -> Result<DMatrix<f64>, CurvatureError> {
        self.evaluate_with_metric(spec, p).map(|(f, _)| f)
    }
}

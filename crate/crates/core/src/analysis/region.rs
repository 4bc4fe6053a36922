use serde::Serialize;

use super::AnalysisError;
use crate::dsl::MetricSpec;

/// A compact coordinate box with its sampling budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub bounds: Vec<(f64, f64)>,
    /// Grid points per axis; a single point sits at the midpoint.
    pub resolution: Vec<usize>,
    /// Directions drawn on the negative and positive eigenspace spheres per
    /// base point. One-dimensional eigenspaces always use both unit vectors.
    pub null_directions: (usize, usize),
    /// Uniform sphere directions per base point.
    pub sphere_samples: usize,
    pub seed: u64,
}

impl Region {
    pub const DEFAULT_SEED: u64 = 42;

    /// A box with default budget: about 81 grid points, 4×8 null directions
    /// and 64 sphere directions per base point.
    pub fn new(bounds: Vec<(f64, f64)>) -> Self {
        let n = bounds.len().max(1);
        let per_axis = (81f64.powf(1.0 / n as f64) + 1e-9).floor().max(2.0) as usize;
        Self {
            resolution: vec![per_axis; bounds.len()],
            bounds,
            null_directions: (4, 8),
            sphere_samples: 64,
            seed: Self::DEFAULT_SEED,
        }
    }

    pub fn with_resolution(mut self, resolution: Vec<usize>) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Parses `a,b x c,d x …`; whitespace is ignored.
    pub fn parse_bounds(text: &str) -> Result<Vec<(f64, f64)>, AnalysisError> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        compact
            .split('x')
            .map(|axis| {
                let (a, b) = axis.split_once(',').ok_or_else(|| {
                    AnalysisError::InvalidRegion(format!("axis `{axis}` is not `a,b`"))
                })?;
                let parse = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| AnalysisError::InvalidRegion(format!("`{s}` is not a number")))
                };
                Ok((parse(a)?, parse(b)?))
            })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Checks the box against the metric: matching dimension, `a < b`, and
    /// closure inside the open domain.
    pub fn validate(&self, spec: &MetricSpec) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidRegion(msg));
        if self.dim() != spec.dim() {
            return bad(format!(
                "region has {} axes, metric has dimension {}",
                self.dim(),
                spec.dim()
            ));
        }
        if self.resolution.len() != self.dim() || self.resolution.contains(&0) {
            return bad("resolution needs one positive count per axis".into());
        }
        for (axis, (&(a, b), &(lo, hi))) in self.bounds.iter().zip(spec.domain()).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return bad(format!("axis {axis}: need finite a < b, got ({a}, {b})"));
            }
            if !(lo < a && b < hi) {
                return bad(format!(
                    "axis {axis}: [{a}, {b}] is not inside the domain ({lo}, {hi})"
                ));
            }
        }
        Ok(())
    }

    fn axis_points(&self, axis: usize) -> Vec<f64> {
        let (a, b) = self.bounds[axis];
        match self.resolution[axis] {
            1 => vec![0.5 * (a + b)],
            r => (0..r)
                .map(|i| {
                    if i + 1 == r {
                        b
                    } else {
                        a + (b - a) * i as f64 / (r - 1) as f64
                    }
                })
                .collect(),
        }
    }

    /// Grid base points, last axis varying fastest.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|i| self.axis_points(i)).collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&x| {
                        let mut p = prefix.clone();
                        p.push(x);
                        p
                    })
                })
                .collect();
        }
        points
    }
}

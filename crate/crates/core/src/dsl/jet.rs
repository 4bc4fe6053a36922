//! Pointwise second-order jets of a metric (and its weight).

use nalgebra::{DMatrix, DVector};

use super::document::MetricSpec;
use super::eval::{EvalError, Jet};

/// Value, gradient and Hessian of the weight `V` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightJet {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// `g`, `∂g` and `∂²g` at a point, exact to rounding.
///
/// `first[i]` holds `∂_i g` and `second[i][j]` holds `∂_i ∂_j g`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetEvaluation {
    pub point: Vec<f64>,
    pub value: DMatrix<f64>,
    pub first: Vec<DMatrix<f64>>,
    pub second: Vec<Vec<DMatrix<f64>>>,
    pub weight: Option<WeightJet>,
}

impl JetEvaluation {
    pub fn dim(&self) -> usize {
        self.value.nrows()
    }

    /// `∂_i g_jk`
    pub fn d(&self, i: usize, j: usize, k: usize) -> f64 {
        self.first[i][(j, k)]
    }

    /// `∂_i ∂_j g_kl`
    pub fn dd(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.second[i][j][(k, l)]
    }
}

fn finite(jet: Jet) -> Result<Jet, EvalError> {
    if jet.is_finite() {
        Ok(jet)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Evaluates the metric jet at `p` by forward-mode differentiation.
pub fn evaluate_jet(spec: &MetricSpec, p: &[f64]) -> Result<JetEvaluation, EvalError> {
    spec.check_point(p)?;
    let n = spec.dim();
    let seeds = Jet::seed(p);
    let mut value = DMatrix::zeros(n, n);
    let mut first = vec![DMatrix::zeros(n, n); n];
    let mut second = vec![vec![DMatrix::zeros(n, n); n]; n];
    for j in 0..n {
        for k in j..n {
            let jet = finite(spec.component(j, k).eval_with(&seeds)?)?;
            value[(j, k)] = jet.value;
            value[(k, j)] = jet.value;
            for a in 0..n {
                first[a][(j, k)] = jet.grad[a];
                first[a][(k, j)] = jet.grad[a];
                for (b, slot) in second[a].iter_mut().enumerate() {
                    let h = jet.hessian(a, b);
                    slot[(j, k)] = h;
                    slot[(k, j)] = h;
                }
            }
        }
    }
    let weight = spec
        .weight()
        .map(|w| -> Result<WeightJet, EvalError> {
            let jet = finite(w.eval_with(&seeds)?)?;
            Ok(WeightJet {
                value: jet.value,
                grad: DVector::from_column_slice(&jet.grad),
                hessian: DMatrix::from_row_slice(n, n, &jet.hess),
            })
        })
        .transpose()?;
    Ok(JetEvaluation {
        point: p.to_vec(),
        value,
        first,
        second,
        weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_metric;

    #[test]
    fn minkowski_jet_is_flat() {
        let spec = parse_metric("dim = 2\ng00 = \"-1\"\ng11 = \"1\"").unwrap();
        let jet = evaluate_jet(&spec, &[0.4, -3.0]).unwrap();
        assert_eq!(
            jet.value,
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])
        );
        assert!(jet.first.iter().all(|m| m.iter().all(|&x| x == 0.0)));
        assert!(jet
            .second
            .iter()
            .flatten()
            .all(|m| m.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn polynomial_component() {
        let spec = parse_metric("dim = 2\ng00 = \"-(1 + x1^2)\"\ng11 = \"1\"").unwrap();
        let jet = evaluate_jet(&spec, &[0.0, 3.0]).unwrap();
        assert_eq!(jet.d(1, 0, 0), -6.0);
        assert_eq!(jet.dd(1, 1, 0, 0), -2.0);
        assert_eq!(jet.d(0, 0, 0), 0.0);
    }

    #[test]
    fn outside_domain_and_horizon() {
        let spec = parse_metric(
            "dim = 2\ng00 = \"-(1 - 2/x1)\"\ng11 = \"1/(1 - 2/x1)\"\ndomain1 = (2, inf)",
        )
        .unwrap();
        assert!(matches!(
            evaluate_jet(&spec, &[0.0, 1.5]),
            Err(EvalError::OutsideDomain { axis: 1, .. })
        ));
        let unrestricted =
            parse_metric("dim = 2\ng00 = \"-(1 - 2/x1)\"\ng11 = \"1/(1 - 2/x1)\"").unwrap();
        assert_eq!(
            evaluate_jet(&unrestricted, &[0.0, 2.0]),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn weight_jet() {
        let spec = parse_metric("dim = 2\ng00 = \"-1\"\ng11 = \"1\"\nV = \"x1^2\"\nN = 3").unwrap();
        let w = evaluate_jet(&spec, &[0.0, 1.0]).unwrap().weight.unwrap();
        assert_eq!(w.value, 1.0);
        assert_eq!(w.grad.as_slice(), &[0.0, 2.0]);
        assert_eq!(w.hessian[(1, 1)], 2.0);
    }
}

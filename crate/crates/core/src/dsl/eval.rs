//! Scalar arithmetic used by the expression evaluator: plain reals and dense
//! second-order forward-mode jets.

/// Failure while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    LogDomain(f64),
    #[error("sqrt of negative value {0}")]
    SqrtDomain(f64),
    #[error("negative base {base} raised to non-integer power {exponent}")]
    PowDomain { base: f64, exponent: f64 },
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("expected {expected} coordinates, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("coordinate x{axis} = {value} lies outside the domain ({lo}, {hi})")]
    OutsideDomain {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Arithmetic the evaluator needs from a number type.
///
/// `chain(f0, f1, f2)` applies a scalar function with value `f0`, first
/// derivative `f1` and second derivative `f2` at `self.value()`.
pub trait Scalar: Clone {
    /// A constant with the same shape as `self`.
    fn lift(&self, c: f64) -> Self;
    fn value(&self) -> f64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn chain(&self, f0: f64, _f1: f64, _f2: f64) -> Self {
        f0
    }
}

/// Value, gradient and dense Hessian of a scalar with respect to `n` inputs.
///
/// The Hessian is stored row-major and kept exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

impl Jet {
    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    /// The `index`-th coordinate seeded at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut jet = Self::constant(value, n);
        jet.grad[index] = 1.0;
        jet
    }

    /// Seeds every coordinate of `point`.
    pub fn seed(point: &[f64]) -> Vec<Self> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Self::variable(x, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        self.hess[i * self.dim() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|x| x.is_finite())
            && self.hess.iter().all(|x| x.is_finite())
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            value: f(self.value, other.value),
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(a, b)| f(*a, *b))
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&other.hess)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        }
    }
}

impl Scalar for Jet {
    fn lift(&self, c: f64) -> Self {
        Self::constant(c, self.dim())
    }

    fn value(&self) -> f64 {
        self.value
    }

    fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn mul(&self, other: &Self) -> Self {
        let n = self.dim();
        let (a, b) = (self, other);
        let grad = (0..n)
            .map(|i| a.value * b.grad[i] + b.value * a.grad[i])
            .collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = a.value * b.hess[i * n + j]
                    + b.value * a.hess[i * n + j]
                    + a.grad[i] * b.grad[j]
                    + a.grad[j] * b.grad[i];
            }
        }
        Self {
            value: a.value * b.value,
            grad,
            hess,
        }
    }

    fn div(&self, other: &Self) -> Self {
        // q = a/b: q' = (a' - q b')/b, q'' = (a'' - q' b'^T - b' q'^T - q b'')/b
        let n = self.dim();
        let (a, b) = (self, other);
        let q = a.value / b.value;
        let grad: Vec<f64> = (0..n)
            .map(|i| (a.grad[i] - q * b.grad[i]) / b.value)
            .collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = (a.hess[i * n + j]
                    - grad[i] * b.grad[j]
                    - b.grad[i] * grad[j]
                    - q * b.hess[i * n + j])
                    / b.value;
            }
        }
        Self {
            value: q,
            grad,
            hess,
        }
    }

    fn neg(&self) -> Self {
        Self {
            value: -self.value,
            grad: self.grad.iter().map(|x| -x).collect(),
            hess: self.hess.iter().map(|x| -x).collect(),
        }
    }

    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.dim();
        let grad = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = f1 * self.hess[i * n + j] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Self {
            value: f0,
            grad,
            hess,
        }
    }
}

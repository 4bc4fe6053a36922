//! Expression trees for metric components and their parser.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' exponent)*
//! exponent:= ('-' | '+')? primary          (must be free of variables)
//! primary := number | x<d> | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! All binary operators associate to the left, so `x0^2^3` is `(x0^2)^3`.

use std::fmt;

use super::eval::{EvalError, Scalar};

/// Largest number of coordinates an expression can refer to (`x0`..`x9`).
pub const MAX_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Tanh,
}

impl UnaryOp {
    fn function(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            "tanh" => Self::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Neg => "-",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Abs => "abs",
            Self::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
        }
    }
}

/// A parsed scalar expression in the coordinates `x0..x{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
    /// Power with a constant exponent.
    Pow(Box<Expression>, f64),
}

impl Expression {
    pub fn constant(value: f64) -> Self {
        Self::Const(value)
    }

    /// True when no coordinate variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Self::Const(_) => true,
            Self::Var(_) => false,
            Self::Unary(_, e) | Self::Pow(e, _) => e.is_constant(),
            Self::Binary(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// One more than the largest variable index used, or 0.
    pub fn arity(&self) -> usize {
        match self {
            Self::Const(_) => 0,
            Self::Var(i) => i + 1,
            Self::Unary(_, e) | Self::Pow(e, _) => e.arity(),
            Self::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    /// Evaluates at a point given as plain reals.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_with(point)
    }

    /// Evaluates over any [`Scalar`] (plain reals or second-order jets).
    pub fn eval_with<S: Scalar>(&self, vars: &[S]) -> Result<S, EvalError> {
        let template = vars.first().ok_or(EvalError::DimensionMismatch {
            expected: self.arity().max(1),
            found: 0,
        })?;
        if self.arity() > vars.len() {
            return Err(EvalError::DimensionMismatch {
                expected: self.arity(),
                found: vars.len(),
            });
        }
        self.eval_rec(vars, template)
    }

    fn eval_rec<S: Scalar>(&self, vars: &[S], template: &S) -> Result<S, EvalError> {
        let out = match self {
            Self::Const(c) => template.lift(*c),
            Self::Var(i) => vars[*i].clone(),
            Self::Unary(op, e) => {
                let u = e.eval_rec(vars, template)?;
                apply_unary(*op, &u)?
            }
            Self::Binary(op, a, b) => {
                let a = a.eval_rec(vars, template)?;
                let b = b.eval_rec(vars, template)?;
                match op {
                    BinaryOp::Add => a.add(&b),
                    BinaryOp::Sub => a.sub(&b),
                    BinaryOp::Mul => a.mul(&b),
                    BinaryOp::Div => {
                        if b.value() == 0.0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.div(&b)
                    }
                }
            }
            Self::Pow(e, c) => {
                let u = e.eval_rec(vars, template)?;
                apply_pow(&u, *c)?
            }
        };
        if !out.value().is_finite() {
            return Err(EvalError::NonFinite);
        }
        Ok(out)
    }
}

fn apply_unary<S: Scalar>(op: UnaryOp, u: &S) -> Result<S, EvalError> {
    let x = u.value();
    Ok(match op {
        UnaryOp::Neg => u.neg(),
        UnaryOp::Sin => u.chain(x.sin(), x.cos(), -x.sin()),
        UnaryOp::Cos => u.chain(x.cos(), -x.sin(), -x.cos()),
        UnaryOp::Exp => {
            let e = x.exp();
            u.chain(e, e, e)
        }
        UnaryOp::Log => {
            if x <= 0.0 {
                return Err(EvalError::LogDomain(x));
            }
            u.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
        }
        UnaryOp::Sqrt => {
            if x < 0.0 {
                return Err(EvalError::SqrtDomain(x));
            }
            let s = x.sqrt();
            u.chain(s, 0.5 / s, -0.25 / (s * x))
        }
        // Subgradient convention: abs'(0) = 0.
        UnaryOp::Abs => {
            let sign = if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            };
            u.chain(x.abs(), sign, 0.0)
        }
        UnaryOp::Tanh => {
            let t = x.tanh();
            let d = 1.0 - t * t;
            u.chain(t, d, -2.0 * t * d)
        }
    })
}

fn integer_exponent(c: f64) -> Option<i32> {
    (c.fract() == 0.0 && c.abs() <= i32::MAX as f64).then_some(c as i32)
}

fn apply_pow<S: Scalar>(u: &S, c: f64) -> Result<S, EvalError> {
    let x = u.value();
    if c == 0.0 {
        return Ok(u.lift(1.0));
    }
    if x == 0.0 && c < 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let (f0, f1, f2) = match integer_exponent(c) {
        Some(k) => {
            let f1 = c * x.powi(k - 1);
            let f2 = if k == 1 {
                0.0
            } else {
                c * (c - 1.0) * x.powi(k - 2)
            };
            (x.powi(k), f1, f2)
        }
        None => {
            if x < 0.0 {
                return Err(EvalError::PowDomain {
                    base: x,
                    exponent: c,
                });
            }
            (
                x.powf(c),
                c * x.powf(c - 1.0),
                c * (c - 1.0) * x.powf(c - 2.0),
            )
        }
    };
    Ok(u.chain(f0, f1, f2))
}

fn write_const(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{c:?}")
    }
}

/// Fully parenthesized rendering; parsing it back yields an identical tree
/// up to negative literals, which come back as negated positive literals.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Const(c) => write_const(f, *c),
            Self::Var(i) => write!(f, "x{i}"),
            Self::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Self::Unary(op, e) => write!(f, "{}({e})", op.name()),
            Self::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Self::Pow(e, c) => {
                write!(f, "({e})^")?;
                write_const(f, *c)
            }
        }
    }
}

/// What went wrong while parsing, positioned at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("variable x{index} out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("exponent must be constant")]
    NonConstantExponent,
    #[error("missing diagonal component g{0}{0}")]
    MissingDiagonal(usize),
    #[error("asymmetric duplicate entry g{0}{1} / g{1}{0}")]
    AsymmetricDuplicate(usize, usize),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("invalid dimension {0} (must be 2..=10)")]
    InvalidDimension(usize),
    #[error("effective dimension N = {effective} is smaller than n = {dim}")]
    EffectiveDimensionTooSmall { effective: f64, dim: usize },
    #[error("N = n requires a constant weight V")]
    NonConstantWeightAtCriticalDimension,
    #[error("a non-constant weight V requires N")]
    WeightWithoutEffectiveDimension,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
}

/// Parses one expression in the coordinates `x0..x{dim-1}`.
pub fn parse_expression(source: &str, dim: usize) -> Result<Expression, ParseError> {
    let mut parser = Parser::new(source, dim);
    let expr = parser.expr()?;
    parser.skip_ws();
    if let Some(c) = parser.peek() {
        return Err(parser.error(ParseErrorKind::Syntax(format!("unexpected `{c}`"))));
    }
    Ok(expr)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    dim: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, dim: usize) -> Self {
        Self {
            chars: src.chars().collect(),
            pos: 0,
            dim,
            _src: src,
        }
    }

    fn location(&self, at: usize) -> (usize, usize) {
        let mut line = 1;
        let mut column = 1;
        for &c in &self.chars[..at.min(self.chars.len())] {
            if c == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        }
        (line, column)
    }

    fn error_at(&self, at: usize, kind: ParseErrorKind) -> ParseError {
        let (line, column) = self.location(at);
        ParseError { line, column, kind }
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        self.error_at(self.pos, kind)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            let found = self
                .peek()
                .map_or("end of input".to_string(), |f| format!("`{f}`"));
            Err(self.error(ParseErrorKind::Syntax(format!(
                "expected `{c}`, found {found}"
            ))))
        }
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Expression::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expression, ParseError> {
        if self.eat('-') {
            let inner = self.unary()?;
            Ok(Expression::Unary(UnaryOp::Neg, Box::new(inner)))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression, ParseError> {
        let mut base = self.primary()?;
        while self.eat('^') {
            self.skip_ws();
            let start = self.pos;
            let negate = if self.eat('-') {
                true
            } else {
                self.eat('+');
                false
            };
            let exponent = self.primary()?;
            if !exponent.is_constant() {
                return Err(self.error_at(start, ParseErrorKind::NonConstantExponent));
            }
            let value = exponent
                .eval_with(&[0.0])
                .map_err(|e| self.error_at(start, ParseErrorKind::Syntax(e.to_string())))?;
            let value = if negate { -value } else { value };
            base = Expression::Pow(Box::new(base), value);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expression, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    self.pos += 1;
                }
                let ident: String = self.chars[start..self.pos].iter().collect();
                if let Some(op) = UnaryOp::function(&ident) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expression::Unary(op, Box::new(arg)));
                }
                match parse_variable(&ident) {
                    Some(index) if index < self.dim => Ok(Expression::Var(index)),
                    Some(index) => Err(self.error_at(
                        start,
                        ParseErrorKind::VariableOutOfRange {
                            index,
                            dim: self.dim,
                        },
                    )),
                    None => Err(self.error_at(start, ParseErrorKind::UnknownIdentifier(ident))),
                }
            }
            Some(c) => Err(self.error(ParseErrorKind::Syntax(format!("unexpected `{c}`")))),
            None => Err(self.error(ParseErrorKind::Syntax("unexpected end of input".into()))),
        }
    }

    fn number(&mut self) -> Result<Expression, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expression::Const(v)),
            _ => Err(self.error_at(
                start,
                ParseErrorKind::Syntax(format!("invalid number `{text}`")),
            )),
        }
    }
}

fn parse_variable(ident: &str) -> Option<usize> {
    let rest = ident.strip_prefix('x')?;
    if rest.len() == 1 {
        rest.parse().ok()
    } else {
        None
    }
}

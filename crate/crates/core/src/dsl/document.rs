//! Sectioned text documents declaring a metric (or a tensor field).
//!
//! ```text
//! # Schwarzschild exterior, M = 1
//! [metric]
//! name = "schwarzschild"
//! dim = 4
//! g00 = "-(1 - 2/x1)"
//! g11 = "1/(1 - 2/x1)"
//! g22 = "x1^2"
//! g33 = "x1^2 * sin(x2)^2"
//! [domain]
//! domain1 = (2, inf)
//! ```
//!
//! Section headers are accepted and ignored. Off-diagonal components that
//! are not given are zero.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::eval::EvalError;
use super::expr::{parse_expression, Expression, ParseError, ParseErrorKind, MAX_DIM};

/// An expression together with the text it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcedExpr {
    pub text: String,
    pub expr: Expression,
}

impl SourcedExpr {
    pub fn parse(text: &str, dim: usize) -> Result<Self, ParseError> {
        Ok(Self {
            text: text.trim().to_string(),
            expr: parse_expression(text, dim)?,
        })
    }

    pub fn from_expr(expr: Expression) -> Self {
        Self {
            text: expr.to_string(),
            expr,
        }
    }
}

/// Index of `(i, j)` in packed upper-triangular storage.
pub(crate) fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// A symmetric metric field on a single coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    name: String,
    dim: usize,
    components: Vec<SourcedExpr>,
    weight: Option<SourcedExpr>,
    effective_dim: Option<f64>,
    domain: Vec<(f64, f64)>,
}

impl MetricSpec {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The expression for `g_ij`; symmetric in `(i, j)`.
    pub fn component(&self, i: usize, j: usize) -> &Expression {
        &self.components[packed_index(self.dim, i, j)].expr
    }

    pub fn weight(&self) -> Option<&Expression> {
        self.weight.as_ref().map(|w| &w.expr)
    }

    /// The effective dimension `N`, present whenever a weight is.
    pub fn effective_dim(&self) -> Option<f64> {
        self.effective_dim
    }

    /// Open coordinate intervals, one per axis.
    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim
            && self
                .domain
                .iter()
                .zip(p)
                .all(|(&(lo, hi), &x)| lo < x && x < hi)
    }

    pub(crate) fn check_point(&self, p: &[f64]) -> Result<(), EvalError> {
        if p.len() != self.dim {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim,
                found: p.len(),
            });
        }
        for (axis, (&(lo, hi), &value)) in self.domain.iter().zip(p).enumerate() {
            if !(lo < value && value < hi) {
                return Err(EvalError::OutsideDomain {
                    axis,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// The metric matrix `g_p` (values only).
    pub fn metric_at(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        self.check_point(p)?;
        let n = self.dim;
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.component(i, j).eval(p)?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// A copy carrying weight `V` and effective dimension `N`.
    pub fn with_weight(&self, weight: &str, effective_dim: f64) -> Result<Self, ParseError> {
        let w = SourcedExpr::parse(weight, self.dim)?;
        let at_origin = |kind| ParseError {
            line: 1,
            column: 1,
            kind,
        };
        validate_weight(self.dim, Some(&w), Some(effective_dim)).map_err(at_origin)?;
        Ok(Self {
            weight: Some(w),
            effective_dim: Some(effective_dim),
            ..self.clone()
        })
    }

    /// Renders the document form; [`parse_metric`] reads it back.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[metric]");
        let _ = writeln!(out, "name = \"{}\"", self.name);
        let _ = writeln!(out, "dim = {}", self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let c = &self.components[packed_index(self.dim, i, j)];
                if i == j || c.expr != Expression::Const(0.0) {
                    let _ = writeln!(out, "g{i}{j} = \"{}\"", c.text);
                }
            }
        }
        if let Some(w) = &self.weight {
            let _ = writeln!(out, "[weight]");
            let _ = writeln!(out, "V = \"{}\"", w.text);
            if let Some(nn) = self.effective_dim {
                let _ = writeln!(out, "N = {nn:?}");
            }
        }
        let bounded: Vec<_> = self
            .domain
            .iter()
            .enumerate()
            .filter(|(_, (lo, hi))| lo.is_finite() || hi.is_finite())
            .collect();
        if !bounded.is_empty() {
            let _ = writeln!(out, "[domain]");
            for (i, (lo, hi)) in bounded {
                let _ = writeln!(out, "domain{i} = ({}, {})", fmt_bound(*lo), fmt_bound(*hi));
            }
        }
        out
    }
}

fn fmt_bound(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn validate_weight(
    dim: usize,
    weight: Option<&SourcedExpr>,
    effective_dim: Option<f64>,
) -> Result<Option<f64>, ParseErrorKind> {
    if let Some(nn) = effective_dim {
        if !(nn >= dim as f64) {
            return Err(ParseErrorKind::EffectiveDimensionTooSmall { effective: nn, dim });
        }
    }
    let Some(w) = weight else {
        return Ok(effective_dim);
    };
    let constant = w.expr.is_constant();
    match effective_dim {
        None if constant => Ok(Some(dim as f64)),
        None => Err(ParseErrorKind::WeightWithoutEffectiveDimension),
        Some(nn) if nn == dim as f64 && !constant => {
            Err(ParseErrorKind::NonConstantWeightAtCriticalDimension)
        }
        Some(nn) => Ok(Some(nn)),
    }
}

/// One `key = value` line of a document.
struct Entry {
    key: String,
    value: String,
    line: usize,
    /// 1-based column where the (unquoted) value starts.
    value_column: usize,
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn entries(source: &str) -> Result<Vec<Entry>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let text = strip_comment(raw);
        let trimmed = text.trim();
        if trimmed.is_empty() || (trimmed.starts_with('[') && trimmed.ends_with(']')) {
            continue;
        }
        let Some(eq) = text.find('=') else {
            return Err(ParseError {
                line,
                column: text.len() - text.trim_start().len() + 1,
                kind: ParseErrorKind::Syntax("expected `key = value`".into()),
            });
        };
        let key = text[..eq].trim().to_string();
        let rest = &text[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let mut value = rest.trim().to_string();
        let mut value_column = eq + 1 + lead + 1;
        if value.starts_with('"') {
            if value.len() < 2 || !value.ends_with('"') {
                return Err(ParseError {
                    line,
                    column: value_column,
                    kind: ParseErrorKind::Syntax("unterminated string".into()),
                });
            }
            value = value[1..value.len() - 1].to_string();
            value_column += 1;
        }
        out.push(Entry {
            key,
            value,
            line,
            value_column,
        });
    }
    Ok(out)
}

/// Re-anchors an error from an inline expression to document coordinates.
fn relocate(err: ParseError, entry: &Entry) -> ParseError {
    ParseError {
        line: entry.line + err.line - 1,
        column: if err.line == 1 {
            entry.value_column + err.column - 1
        } else {
            err.column
        },
        kind: err.kind,
    }
}

fn entry_error(entry: &Entry, kind: ParseErrorKind) -> ParseError {
    ParseError {
        line: entry.line,
        column: 1,
        kind,
    }
}

fn two_digits(key: &str, prefix: char) -> Option<(usize, usize)> {
    let rest = key.strip_prefix(prefix)?;
    let d: Vec<usize> = rest
        .chars()
        .map(|c| c.to_digit(10).map(|d| d as usize))
        .collect::<Option<_>>()?;
    (d.len() == 2).then(|| (d[0], d[1]))
}

fn parse_real(entry: &Entry) -> Result<f64, ParseError> {
    entry.value.trim().parse::<f64>().map_err(|e| {
        entry_error(
            entry,
            ParseErrorKind::InvalidValue {
                key: entry.key.clone(),
                reason: e.to_string(),
            },
        )
    })
}

fn parse_dim(entries: &[Entry]) -> Result<Option<usize>, ParseError> {
    let Some(entry) = entries.iter().find(|e| e.key == "dim") else {
        return Ok(None);
    };
    let dim: usize = entry.value.trim().parse().map_err(|_| {
        entry_error(
            entry,
            ParseErrorKind::InvalidValue {
                key: "dim".into(),
                reason: format!("`{}` is not a positive integer", entry.value),
            },
        )
    })?;
    if !(2..=MAX_DIM).contains(&dim) {
        return Err(entry_error(entry, ParseErrorKind::InvalidDimension(dim)));
    }
    Ok(Some(dim))
}

fn parse_interval(entry: &Entry) -> Result<(f64, f64), ParseError> {
    let bad = |reason: &str| entry_error(entry, ParseErrorKind::InvalidDomain(reason.to_string()));
    let v = entry.value.trim();
    let inner = v
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| bad("expected `(a, b)`"))?;
    let (a, b) = inner
        .split_once(',')
        .ok_or_else(|| bad("expected `(a, b)`"))?;
    let a: f64 = a
        .trim()
        .parse()
        .map_err(|_| bad("lower bound is not a number"))?;
    let b: f64 = b
        .trim()
        .parse()
        .map_err(|_| bad("upper bound is not a number"))?;
    if a.is_nan() || b.is_nan() || !(a < b) {
        return Err(bad("need a < b"));
    }
    Ok((a, b))
}

/// Collects symmetric component entries keyed by `prefix<i><j>`.
/// Upper-triangle components keyed by `(i, j)` with `i <= j`.
type Components<'a> = BTreeMap<(usize, usize), (SourcedExpr, &'a Entry)>;

fn symmetric_components(
    entries: &[Entry],
    prefix: char,
    dim: usize,
) -> Result<Components<'_>, ParseError> {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut comps: BTreeMap<(usize, usize), (SourcedExpr, &Entry)> = BTreeMap::new();
    for entry in entries {
        let Some((i, j)) = two_digits(&entry.key, prefix) else {
            continue;
        };
        if seen.insert(entry.key.clone(), entry.line).is_some() {
            return Err(entry_error(
                entry,
                ParseErrorKind::DuplicateKey(entry.key.clone()),
            ));
        }
        if i >= dim || j >= dim {
            return Err(entry_error(
                entry,
                ParseErrorKind::VariableOutOfRange {
                    index: i.max(j),
                    dim,
                },
            ));
        }
        let parsed = SourcedExpr::parse(&entry.value, dim).map_err(|e| relocate(e, entry))?;
        let slot = (i.min(j), i.max(j));
        if let Some((existing, _)) = comps.get(&slot) {
            if existing.expr != parsed.expr {
                return Err(entry_error(
                    entry,
                    ParseErrorKind::AsymmetricDuplicate(slot.0, slot.1),
                ));
            }
            continue;
        }
        comps.insert(slot, (parsed, entry));
    }
    Ok(comps)
}

fn reject_unknown(entries: &[Entry], prefix: char, extra: &[&str]) -> Result<(), ParseError> {
    for entry in entries {
        let known = extra.contains(&entry.key.as_str())
            || two_digits(&entry.key, prefix).is_some()
            || (entry.key.starts_with("domain") && entry.key[6..].parse::<usize>().is_ok());
        if !known {
            return Err(entry_error(
                entry,
                ParseErrorKind::UnknownIdentifier(entry.key.clone()),
            ));
        }
    }
    Ok(())
}

/// Parses a metric document.
pub fn parse_metric(source: &str) -> Result<MetricSpec, ParseError> {
    let entries = entries(source)?;
    reject_unknown(&entries, 'g', &["name", "dim", "V", "N"])?;
    let dim = parse_dim(&entries)?.ok_or(ParseError {
        line: 1,
        column: 1,
        kind: ParseErrorKind::MissingKey("dim"),
    })?;
    let name = entries
        .iter()
        .find(|e| e.key == "name")
        .map(|e| e.value.trim().to_string())
        .unwrap_or_else(|| "unnamed".to_string());

    let comps = symmetric_components(&entries, 'g', dim)?;
    let mut components = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            match comps.get(&(i, j)) {
                Some((c, _)) => components.push(c.clone()),
                None if i == j => {
                    return Err(ParseError {
                        line: 1,
                        column: 1,
                        kind: ParseErrorKind::MissingDiagonal(i),
                    })
                }
                None => components.push(SourcedExpr::from_expr(Expression::Const(0.0))),
            }
        }
    }

    let weight_entry = entries.iter().find(|e| e.key == "V");
    let weight = weight_entry
        .map(|e| SourcedExpr::parse(&e.value, dim).map_err(|err| relocate(err, e)))
        .transpose()?;
    let n_entry = entries.iter().find(|e| e.key == "N");
    let effective_dim = n_entry.map(parse_real).transpose()?;
    let effective_dim = validate_weight(dim, weight.as_ref(), effective_dim).map_err(|kind| {
        let line = n_entry.or(weight_entry).map_or(1, |e| e.line);
        ParseError {
            line,
            column: 1,
            kind,
        }
    })?;

    let mut domain = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
    for entry in entries.iter().filter(|e| e.key.starts_with("domain")) {
        let axis: usize = entry.key[6..].parse().expect("checked by reject_unknown");
        if axis >= dim {
            return Err(entry_error(
                entry,
                ParseErrorKind::InvalidDomain(format!("axis {axis} out of range")),
            ));
        }
        domain[axis] = parse_interval(entry)?;
    }

    Ok(MetricSpec {
        name,
        dim,
        components,
        weight,
        effective_dim,
        domain,
    })
}

/// A user-supplied symmetric (0,2)-tensor field given componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDocument {
    pub name: String,
    pub dim: usize,
    /// Packed upper triangle.
    pub components: Vec<Expression>,
}

/// Parses a field document (`f<i><j> = "expr"` lines) for a metric of
/// dimension `dim`. Missing components are zero.
pub fn parse_field(source: &str, dim: usize) -> Result<FieldDocument, ParseError> {
    let entries = entries(source)?;
    reject_unknown(&entries, 'f', &["name", "dim"])?;
    if let Some(declared) = parse_dim(&entries)? {
        if declared != dim {
            return Err(ParseError {
                line: 1,
                column: 1,
                kind: ParseErrorKind::InvalidValue {
                    key: "dim".into(),
                    reason: format!("field has dimension {declared}, metric has {dim}"),
                },
            });
        }
    }
    let name = entries
        .iter()
        .find(|e| e.key == "name")
        .map(|e| e.value.trim().to_string())
        .unwrap_or_else(|| "user_expression".to_string());
    let comps = symmetric_components(&entries, 'f', dim)?;
    let mut components = Vec::new();
    for i in 0..dim {
        for j in i..dim {
            components.push(
                comps
                    .get(&(i, j))
                    .map_or(Expression::Const(0.0), |(c, _)| c.expr.clone()),
            );
        }
    }
    Ok(FieldDocument {
        name,
        dim,
        components,
    })
}

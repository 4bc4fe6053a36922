//! The metric description language: expressions, documents and jets.

mod document;
mod eval;
mod expr;
mod jet;

pub(crate) use document::packed_index;
pub use document::{parse_field, parse_metric, FieldDocument, MetricSpec, SourcedExpr};
pub use eval::{EvalError, Jet, Scalar};
pub use expr::{
    parse_expression, BinaryOp, Expression, ParseError, ParseErrorKind, UnaryOp, MAX_DIM,
};
pub use jet::{evaluate_jet, JetEvaluation, WeightJet};

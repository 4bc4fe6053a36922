//! Null energy condition analysis for symmetric tensor fields on
//! pseudo-Riemannian metrics given as coordinate expressions.

// Negated comparisons are used on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod catalog;
pub mod curvature;
pub mod dsl;
pub mod flow;
pub mod numfmt;

pub use analysis::{
    bound, check_nec, estimate_cz, margin_sweep, near_null_certificate, verdict, AnalysisConfig,
    AnalysisError, BoundReport, CzEstimate, EstimateMode, NecReport, NecVerdict, RatioSample,
    Region, Rung, Verdict, VerdictKind,
};
pub use catalog::{
    builtin_field, catalog_get, catalog_list, CatalogEntry, CatalogError, FieldFixture, Regularity,
};
pub use curvature::{
    bakry_emery, christoffel, ricci, spectral_frame, CurvatureError, Provenance, SpectralFrame,
    SymmetricField,
};
pub use dsl::{parse_expression, parse_field, parse_metric, Expression, MetricSpec, ParseError};
pub use flow::{
    flow_closed_form, flow_rk_oracle, nontangency_value, ode_rhs, project_to_null, roundtrip_check,
    sample_null_cone, vector_field_x, BundlePoint, ConeFlow, FlowError, FlowResult, NullProjection,
    NullSampleSet,
};
pub use nalgebra::{DMatrix, DVector};

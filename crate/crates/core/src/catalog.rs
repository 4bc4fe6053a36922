//! Built-in metrics and fields with known properties, stored as DSL documents.

use std::sync::OnceLock;

use crate::curvature::SymmetricField;
use crate::dsl::{parse_metric, MetricSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("unknown field `{name}` for a metric of dimension {dim}")]
    UnknownField { name: String, dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularity {
    C0,
    C1,
    C2,
    Smooth,
}

impl Regularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::C0 => "C0",
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::Smooth => "Cinf",
        }
    }
}

/// A field attached to a catalog metric with its expected behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFixture {
    pub name: &'static str,
    pub field: SymmetricField,
    pub nec_holds: bool,
    /// Known timelike constant `sup F/g`, where analytic.
    pub timelike_cz: Option<f64>,
    /// Known all-non-null constant `inf F/|g|`, where analytic.
    pub theorem_cz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogEntry {
    pub name: String,
    pub description: &'static str,
    pub source: &'static str,
    pub spec: MetricSpec,
    /// `(negative, positive)` eigenvalue counts.
    pub signature: (usize, usize),
    pub regularity: Regularity,
    /// Compact box inside the domain used when no region is given.
    pub default_region: Vec<(f64, f64)>,
    pub fields: Vec<FieldFixture>,
}

impl CatalogEntry {
    pub fn fixture(&self, name: &str) -> Option<&FieldFixture> {
        self.fields.iter().find(|f| f.name == name)
    }
}

/// Resolves a built-in field name for a metric of dimension `dim`.
pub fn builtin_field(name: &str, dim: usize) -> Result<SymmetricField, CatalogError> {
    match name {
        "ricci" => Ok(SymmetricField::Ricci),
        "bakry_emery" | "bakry-emery" => Ok(SymmetricField::BakryEmery),
        "minus_g" => Ok(SymmetricField::minus_g()),
        "neg_diag" => Ok(SymmetricField::neg_diag(dim)),
        "zero" => Ok(SymmetricField::zero(dim)),
        _ => Err(CatalogError::UnknownField {
            name: name.to_string(),
            dim,
        }),
    }
}

struct Raw {
    description: &'static str,
    source: &'static str,
    regularity: Regularity,
    region: &'static [(f64, f64)],
    /// `(field, nec holds, timelike constant, all-non-null constant)`
    fields: &'static [(&'static str, bool, Option<f64>, Option<f64>)],
}

const FLAT_FIELDS: &[(&str, bool, Option<f64>, Option<f64>)] = &[
    ("ricci", true, Some(0.0), Some(0.0)),
    ("minus_g", true, Some(-1.0), Some(-1.0)),
    ("neg_diag", false, None, None),
    ("zero", true, Some(0.0), Some(0.0)),
];

const RAW: &[Raw] = &[
    Raw {
        description: "flat Minkowski plane",
        source: include_str!("../catalog/minkowski2.metric"),
        regularity: Regularity::Smooth,
        region: &[(-1.0, 1.0), (-1.0, 1.0)],
        fields: FLAT_FIELDS,
    },
    Raw {
        description: "flat 3+1 Minkowski space",
        source: include_str!("../catalog/minkowski4.metric"),
        regularity: Regularity::Smooth,
        region: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        fields: FLAT_FIELDS,
    },
    Raw {
        description: "Schwarzschild exterior, M = 1 (vacuum)",
        source: include_str!("../catalog/schwarzschild.metric"),
        regularity: Regularity::Smooth,
        region: &[(0.0, 1.0), (2.5, 6.0), (1.0, 2.0), (0.0, 1.0)],
        fields: &[("ricci", true, Some(0.0), Some(0.0))],
    },
    Raw {
        description: "de Sitter in flat slicing, Ric = 3g",
        source: include_str!("../catalog/desitter_flat.metric"),
        regularity: Regularity::Smooth,
        region: &[(-0.5, 0.5), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        fields: &[("ricci", true, Some(3.0), Some(-3.0))],
    },
    Raw {
        description: "flat dust FLRW, a(t) = t^(2/3)",
        source: include_str!("../catalog/flrw_dust.metric"),
        regularity: Regularity::Smooth,
        region: &[(1.0, 4.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        fields: &[("ricci", true, None, None)],
    },
    Raw {
        description: "Minkowski plane with a C^2 lapse bump 0.1 |x1|^3",
        source: include_str!("../catalog/c2_bump.metric"),
        regularity: Regularity::C2,
        region: &[(-1.0, 1.0), (-0.9, 0.9)],
        fields: &[("ricci", true, None, None)],
    },
    Raw {
        description: "Minkowski plane with weight V = x1^2, N = 4",
        source: include_str!("../catalog/weighted_minkowski.metric"),
        regularity: Regularity::Smooth,
        region: &[(-1.0, 1.0), (-1.0, 1.0)],
        fields: &[
            ("bakry_emery", true, Some(0.0), Some(0.0)),
            ("ricci", true, Some(0.0), Some(0.0)),
        ],
    },
];

fn build(raw: &Raw) -> CatalogEntry {
    let spec = parse_metric(raw.source).expect("catalog documents parse");
    let dim = spec.dim();
    let probe: Vec<f64> = raw.region.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let g = spec.metric_at(&probe).expect("catalog metric evaluates");
    let negatives = g
        .symmetric_eigenvalues()
        .iter()
        .filter(|&&l| l < 0.0)
        .count();
    let fields = raw
        .fields
        .iter()
        .map(|&(name, nec_holds, timelike_cz, theorem_cz)| FieldFixture {
            name,
            field: builtin_field(name, dim).expect("catalog field names are built in"),
            nec_holds,
            timelike_cz,
            theorem_cz,
        })
        .collect();
    CatalogEntry {
        name: spec.name().to_string(),
        description: raw.description,
        source: raw.source,
        signature: (negatives, dim - negatives),
        regularity: raw.regularity,
        default_region: raw.region.to_vec(),
        fields,
        spec,
    }
}

pub fn catalog_list() -> &'static [CatalogEntry] {
    static ENTRIES: OnceLock<Vec<CatalogEntry>> = OnceLock::new();
    ENTRIES.get_or_init(|| RAW.iter().map(build).collect())
}

pub fn catalog_get(name: &str) -> Result<&'static CatalogEntry, CatalogError> {
    catalog_list()
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| CatalogError::UnknownEntry(name.to_string()))
}

//! Resolution of metric, field, region and vector arguments.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nullbound_core::{
    builtin_field, catalog_get, parse_field, parse_metric, CatalogEntry, MetricSpec, Region,
    SymmetricField,
};

pub struct Metric {
    pub spec: MetricSpec,
    pub entry: Option<&'static CatalogEntry>,
}

pub fn metric(name: &str) -> Result<Metric> {
    if let Ok(entry) = catalog_get(name) {
        return Ok(Metric {
            spec: entry.spec.clone(),
            entry: Some(entry),
        });
    }
    let path = Path::new(name);
    if !path.exists() {
        bail!("`{name}` is neither a catalog entry nor a metric file");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
    let spec = parse_metric(&text).with_context(|| format!("parsing {name}"))?;
    Ok(Metric { spec, entry: None })
}

pub fn field(name: &str, dim: usize) -> Result<SymmetricField> {
    if let Ok(field) = builtin_field(name, dim) {
        return Ok(field);
    }
    let path = Path::new(name);
    if !path.exists() {
        bail!("`{name}` is neither a built-in field nor a field file");
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
    let doc = parse_field(&text, dim).with_context(|| format!("parsing {name}"))?;
    Ok(SymmetricField::from_document(doc))
}

pub fn reals(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{what}: `{}` is not a number", s.trim()))
        })
        .collect()
}

pub fn counts(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .with_context(|| format!("{what}: `{}` is not a count", s.trim()))
        })
        .collect()
}

pub fn bounds(metric: &Metric, region: Option<&str>) -> Result<Vec<(f64, f64)>> {
    match (region, metric.entry) {
        (Some(text), _) => Ok(Region::parse_bounds(text)?),
        (None, Some(entry)) => Ok(entry.default_region.clone()),
        (None, None) => bail!("--region is required for metrics loaded from a file"),
    }
}

/// The base point, defaulting to the centre of the catalog region.
pub fn point(metric: &Metric, text: Option<&str>) -> Result<Vec<f64>> {
    let p = match (text, metric.entry) {
        (Some(text), _) => reals(text, "--point")?,
        (None, Some(entry)) => entry
            .default_region
            .iter()
            .map(|(a, b)| 0.5 * (a + b))
            .collect(),
        (None, None) => bail!("--point is required for metrics loaded from a file"),
    };
    if p.len() != metric.spec.dim() {
        bail!(
            "--point has {} coordinates, metric has dimension {}",
            p.len(),
            metric.spec.dim()
        );
    }
    Ok(p)
}

pub fn unit_direction(text: &str, dim: usize) -> Result<Vec<f64>> {
    let v = reals(text, "--direction")?;
    if v.len() != dim {
        bail!(
            "--direction has {} components, metric has dimension {dim}",
            v.len()
        );
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        bail!("--direction must be a nonzero finite vector");
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

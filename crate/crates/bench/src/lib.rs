//! Shared fixtures for the criterion benches.

use nullbound_core::{catalog_get, CatalogEntry, ConeFlow, DMatrix, DVector};

pub fn entry(name: &str) -> &'static CatalogEntry {
    catalog_get(name).expect("catalog entry exists")
}

/// Centre of the default region of a catalog entry.
pub fn centre(entry: &CatalogEntry) -> Vec<f64> {
    entry
        .default_region
        .iter()
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}

/// Metric value at the centre of an entry's region and one of its null vectors.
pub fn null_case(name: &str) -> (DMatrix<f64>, DVector<f64>) {
    let entry = entry(name);
    let g = entry
        .spec
        .metric_at(&centre(entry))
        .expect("metric evaluates");
    let flow = ConeFlow::new(g.clone()).expect("nondegenerate");
    let v = flow.sample_null(1, 1, 7).expect("mixed signature").vectors[0].clone();
    (g, v)
}

use nullbound_core::{
    bound, catalog_get, check_nec, estimate_cz, margin_sweep, near_null_certificate, verdict,
    AnalysisConfig, AnalysisError, DMatrix, DVector, EstimateMode, NecVerdict, Region,
    SymmetricField, VerdictKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn minkowski2() -> &'static nullbound_core::MetricSpec {
    &catalog_get("minkowski2").unwrap().spec
}

fn square() -> Region {
    Region::new(vec![(-1.0, 1.0), (-1.0, 1.0)]).with_resolution(vec![3, 3])
}

fn neg_diag() -> SymmetricField {
    SymmetricField::neg_diag(2)
}

#[test]
fn nec_examples_on_the_plane() {
    let config = AnalysisConfig::default();
    let spec = minkowski2();
    let ricci = check_nec(&SymmetricField::Ricci, spec, &square(), &config).unwrap();
    assert_eq!(ricci.verdict, NecVerdict::Holds);
    assert_eq!(ricci.min_value, Some(0.0));

    let minus_g = check_nec(&SymmetricField::minus_g(), spec, &square(), &config).unwrap();
    assert_eq!(minus_g.verdict, NecVerdict::Holds);
    assert!(minus_g.min_value.unwrap().abs() < 1e-15);

    let violated = check_nec(&neg_diag(), spec, &square(), &config).unwrap();
    assert_eq!(violated.verdict, NecVerdict::Violated);
    assert!((violated.min_value.unwrap() + 0.5).abs() < 1e-12);
    let worst = violated.worst_sample.unwrap();
    assert!(worst.g.abs() < 1e-12 && (worst.f + 0.5).abs() < 1e-12);
    assert_eq!(violated.base_points, 9);
    assert_eq!(violated.null_samples, 9 * 4);
}

#[test]
fn definite_metrics_hold_vacuously() {
    let spec = nullbound_core::parse_metric("dim = 2\ng00 = \"1\"\ng11 = \"1\"").unwrap();
    let report = check_nec(&neg_diag(), &spec, &square(), &AnalysisConfig::default()).unwrap();
    assert_eq!(report.verdict, NecVerdict::VacuouslyHolds);
    assert_eq!(report.riemannian_points, 9);
    assert_eq!(report.min_value, None);
}

#[test]
fn estimate_examples() {
    let config = AnalysisConfig::default();
    let spec = minkowski2();
    let zero = estimate_cz(
        &SymmetricField::Ricci,
        spec,
        &square(),
        EstimateMode::Timelike,
        &config,
    )
    .unwrap();
    assert!(zero.value.unwrap().abs() <= 1e-9);
    let minus = estimate_cz(
        &SymmetricField::minus_g(),
        spec,
        &square(),
        EstimateMode::Timelike,
        &config,
    )
    .unwrap();
    assert!((minus.value.unwrap() + 1.0).abs() <= 1e-12);

    let ds = catalog_get("desitter_flat").unwrap();
    let region = Region::new(ds.default_region.clone()).with_resolution(vec![2; 4]);
    let est = estimate_cz(
        &SymmetricField::Ricci,
        &ds.spec,
        &region,
        EstimateMode::Timelike,
        &config,
    )
    .unwrap();
    assert!((est.value.unwrap() - 3.0).abs() <= 1e-6);
    let all = estimate_cz(
        &SymmetricField::Ricci,
        &ds.spec,
        &region,
        EstimateMode::AllNonNull,
        &config,
    )
    .unwrap();
    assert!((all.value.unwrap() + 3.0).abs() <= 1e-6);
}

#[test]
fn margin_sweep_examples() {
    let config = AnalysisConfig::default();
    let spec = minkowski2();
    let sweep = margin_sweep(&SymmetricField::Ricci, spec, &square(), &config).unwrap();
    assert_eq!(sweep.len(), 12);
    assert!(sweep.iter().all(|r| r.inf_r == Some(0.0)));
    for pair in sweep.windows(2) {
        assert!(pair[1].epsilon < pair[0].epsilon);
        assert_eq!(pair[0].lower, pair[1].epsilon);
    }

    let sweep = margin_sweep(&SymmetricField::minus_g(), spec, &square(), &config).unwrap();
    assert!(sweep.iter().all(|r| (r.inf_r.unwrap() + 1.0).abs() < 1e-12));

    // For unit v near the cone, r = −v0²/|g| = −1/(2|g|) − 1/2 on the timelike side.
    let sweep = margin_sweep(&neg_diag(), spec, &square(), &config).unwrap();
    for rung in &sweep {
        let r = rung.inf_r.unwrap();
        let lowest = -0.5 / rung.lower - 0.5;
        let highest = -0.5 / rung.epsilon - 0.5;
        assert!(
            r > lowest - 1e-9 && r <= highest + 1e-9,
            "{r} not in [{lowest}, {highest}]"
        );
    }
}

#[test]
fn verdict_examples() {
    let config = AnalysisConfig::default();
    let spec = minkowski2();
    let flat = bound(&SymmetricField::Ricci, spec, &square(), &config).unwrap();
    assert_eq!(flat.verdict.kind, VerdictKind::Bounded);
    assert_eq!(flat.verdict.cz, Some(0.0));
    assert_eq!(verdict(&flat).unwrap(), flat.verdict);

    let failing = bound(&neg_diag(), spec, &square(), &config).unwrap();
    assert_eq!(failing.verdict.kind, VerdictKind::Diverging);
    assert_eq!(failing.verdict.cz, None);
    assert!(failing.verdict.slope.unwrap() < -0.5);
    assert!(failing.margin_sweep.last().unwrap().inf_r.unwrap() < -1e3);
    assert_eq!(verdict(&failing).unwrap(), failing.verdict);

    let schwarzschild = catalog_get("schwarzschild").unwrap();
    let region = Region::new(schwarzschild.default_region.clone()).with_resolution(vec![2; 4]);
    let vacuum = bound(
        &SymmetricField::Ricci,
        &schwarzschild.spec,
        &region,
        &config,
    )
    .unwrap();
    assert_eq!(vacuum.verdict.kind, VerdictKind::Bounded);
    assert!(vacuum.verdict.cz.unwrap().abs() < 1e-6);
}

#[test]
fn too_few_rungs_is_insufficient_data() {
    let config = AnalysisConfig {
        rungs: 4,
        ..AnalysisConfig::default()
    };
    let report = bound(&SymmetricField::Ricci, minkowski2(), &square(), &config).unwrap();
    assert_eq!(report.verdict.kind, VerdictKind::InsufficientData);
    assert_eq!(
        verdict(&report),
        Err(AnalysisError::InsufficientData {
            nonempty: 4,
            required: 6
        })
    );
}

#[test]
fn ratios_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for name in ["desitter_flat", "flrw_dust", "schwarzschild", "c2_bump"] {
        let entry = catalog_get(name).unwrap();
        let p: Vec<f64> = entry
            .default_region
            .iter()
            .map(|&(a, b)| rng.random_range(a..b))
            .collect();
        let (f, g) = SymmetricField::Ricci
            .evaluate_with_metric(&entry.spec, &p)
            .unwrap();
        for _ in 0..50 {
            let v = DVector::<f64>::from_fn(g.nrows(), |_, _| rng.random_range(-1.0..1.0));
            let c: f64 = rng.random_range(-5.0..5.0);
            if c.abs() < 0.1 {
                continue;
            }
            let w = &v * c;
            let (fv, gv) = (v.dot(&(&f * &v)), v.dot(&(&g * &v)));
            let (fw, gw) = (w.dot(&(&f * &w)), w.dot(&(&g * &w)));
            let scale = 1.0 + (fv / gv).abs();
            assert!((fv / gv.abs() - fw / gw.abs()).abs() < 1e-10 * scale);
            assert!((fv / gv - fw / gw).abs() < 1e-10 * scale);
        }
    }
}

#[test]
fn bounded_pairs_satisfy_the_nec() {
    let config = AnalysisConfig::default();
    for (name, field) in [
        ("minkowski2", "zero"),
        ("c2_bump", "ricci"),
        ("weighted_minkowski", "bakry_emery"),
    ] {
        let entry = catalog_get(name).unwrap();
        let fixture = entry.fixture(field).unwrap();
        let region = Region::new(entry.default_region.clone()).with_resolution(vec![5, 5]);
        let report = bound(&fixture.field, &entry.spec, &region, &config).unwrap();
        assert_eq!(report.verdict.kind, VerdictKind::Bounded, "{name}");
        assert!(report.nec.min_value.unwrap() >= -1e-6, "{name}");
        assert!(report.certificate_inf.unwrap().is_finite());
    }
}

#[test]
fn sign_relation_for_minus_g() {
    let report = bound(
        &SymmetricField::minus_g(),
        minkowski2(),
        &square(),
        &AnalysisConfig::default(),
    )
    .unwrap();
    let timelike = report.empirical_cz.unwrap();
    let theorem = report.empirical_cz_theorem.unwrap();
    assert!((timelike + 1.0).abs() < 1e-12);
    assert!((theorem + 1.0).abs() < 1e-12);
    // the timelike constant is minus the infimum of F/|g| over timelike vectors
    let minimizer = report.empirical_cz_minimizer.unwrap();
    assert!(minimizer.g < 0.0);
    assert_eq!(timelike, -minimizer.ratio);
    // both defining inequalities hold on the sampled vectors
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let eta = DMatrix::from_diagonal(&DVector::from_row_slice(&[-1.0, 1.0]));
    for _ in 0..1000 {
        let v = DVector::<f64>::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let g = v.dot(&(&eta * &v));
        let f = -g;
        assert!(f >= theorem * g.abs() - 1e-12);
        if g < 0.0 {
            assert!(f >= timelike * g - 1e-12);
        }
    }
}

#[test]
fn constants_are_additive_over_split_regions() {
    let config = AnalysisConfig::default();
    let cases = [
        ("c2_bump", vec![(-1.0, 1.0), (-0.5, 0.5)], vec![9, 5]),
        (
            "flrw_dust",
            vec![(1.0, 3.0), (-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
            vec![5, 2, 2, 2],
        ),
    ];
    for (name, bounds, resolution) in cases {
        let entry = catalog_get(name).unwrap();
        let full = Region::new(bounds.clone()).with_resolution(resolution.clone());
        let (a, b) = bounds[0];
        let mid = 0.5 * (a + b);
        let mut halves = Vec::new();
        for (lo, hi) in [(a, mid), (mid, b)] {
            let mut part = bounds.clone();
            part[0] = (lo, hi);
            let mut res = resolution.clone();
            res[0] = resolution[0] / 2 + 1;
            halves.push(Region::new(part).with_resolution(res));
        }
        let run = |r: &Region| bound(&SymmetricField::Ricci, &entry.spec, r, &config).unwrap();
        let whole = run(&full);
        let (left, right) = (run(&halves[0]), run(&halves[1]));
        let min = |x: Option<f64>, y: Option<f64>| x.unwrap().min(y.unwrap());
        let theorem = min(left.empirical_cz_theorem, right.empirical_cz_theorem);
        assert!(
            (whole.empirical_cz_theorem.unwrap() - theorem).abs() <= 1e-8,
            "{name}"
        );
        // the timelike constant is a supremum of F/g, so it combines by max
        let timelike = left.empirical_cz.unwrap().max(right.empirical_cz.unwrap());
        assert!(
            (whole.empirical_cz.unwrap() - timelike).abs() <= 1e-8,
            "{name}"
        );
    }
}

#[test]
fn worker_count_does_not_change_the_report() {
    let entry = catalog_get("c2_bump").unwrap();
    let region = Region::new(entry.default_region.clone()).with_resolution(vec![4, 4]);
    let run = |workers| {
        let config = AnalysisConfig {
            workers,
            ..AnalysisConfig::default()
        };
        bound(&SymmetricField::Ricci, &entry.spec, &region, &config)
            .unwrap()
            .to_json()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn certificate_examples() {
    let spec = minkowski2();
    let p = [0.0, 0.0];
    let v0 = DVector::from_row_slice(&[1.0, 1.0]) / 2f64.sqrt();
    assert_eq!(
        near_null_certificate(&SymmetricField::Ricci, spec, &p, &v0).unwrap(),
        0.0
    );
    let b = near_null_certificate(&SymmetricField::minus_g(), spec, &p, &v0).unwrap();
    assert!((b + 1.0).abs() < 1e-15);
    let b = near_null_certificate(&neg_diag(), spec, &p, &v0).unwrap();
    assert!((b + 0.5).abs() < 1e-15);
    let timelike = DVector::from_row_slice(&[1.0, 0.0]);
    assert!(matches!(
        near_null_certificate(&SymmetricField::Ricci, spec, &p, &timelike),
        Err(AnalysisError::NotNull { .. })
    ));
}

#[test]
fn regions_outside_the_domain_are_rejected() {
    let entry = catalog_get("schwarzschild").unwrap();
    let region = Region::new(vec![(0.0, 1.0), (1.5, 3.0), (1.0, 2.0), (0.0, 1.0)]);
    let err = check_nec(
        &SymmetricField::Ricci,
        &entry.spec,
        &region,
        &AnalysisConfig::default(),
    );
    assert!(matches!(err, Err(AnalysisError::InvalidRegion(_))));
}

//! Acceptance gate: one PASS/FAIL line per criterion, with pinned tolerances
//! and wall-clock limits. Exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_PI_3, TAU};
use std::process::Command;
use std::time::{Duration, Instant};

use nullbound_core::{
    bakry_emery, bound, catalog_get, catalog_list, check_nec, flow_closed_form, flow_rk_oracle,
    nontangency_value, project_to_null, ricci, roundtrip_check, sample_null_cone, spectral_frame,
    AnalysisConfig, ConeFlow, DMatrix, DVector, NecVerdict, Region, SymmetricField, VerdictKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Outcome = Result<String, String>;
/// Name, wall-clock limit in seconds, check.
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_point(rng: &mut ChaCha8Rng, region: &[(f64, f64)]) -> Vec<f64> {
    region
        .iter()
        .map(|&(a, b)| rng.random_range(a..b))
        .collect()
}

/// A catalog metric value at a random point of its default region, with a null unit vector.
fn catalog_case(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DVector<f64>) {
    let entries = catalog_list();
    let entry = &entries[rng.random_range(0..entries.len())];
    let p = random_point(rng, &entry.default_region);
    let g = entry.spec.metric_at(&p).unwrap();
    let set = ConeFlow::new(g.clone())
        .unwrap()
        .sample_null(3, 3, rng.random())
        .unwrap();
    let v = set.vectors[rng.random_range(0..set.vectors.len())].clone();
    (g, v)
}

fn random_mixed(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let q = a.qr().q();
    let k = rng.random_range(1..n);
    let d = DVector::from_fn(n, |i, _| {
        let m = rng.random_range(0.3..3.0);
        if i < k {
            -m
        } else {
            m
        }
    });
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

fn curvature_goldens() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let schwarzschild = &catalog_get("schwarzschild").unwrap().spec;
    let mut worst_s = 0.0f64;
    for _ in 0..50 {
        let p = random_point(
            &mut rng,
            &[(-5.0, 5.0), (2.1, 30.0), (0.1, 3.0), (-3.0, 3.0)],
        );
        worst_s = worst_s.max(ricci(schwarzschild, &p).map_err(|e| e.to_string())?.amax());
    }
    let desitter = &catalog_get("desitter_flat").unwrap().spec;
    let mut worst_d = 0.0f64;
    for _ in 0..50 {
        let p = random_point(
            &mut rng,
            &[(-2.0, 2.0), (-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0)],
        );
        let g = desitter.metric_at(&p).unwrap();
        worst_d = worst_d.max((ricci(desitter, &p).unwrap() - g * 3.0).amax());
    }
    let mut flat_exact = true;
    for name in ["minkowski2", "minkowski4"] {
        let spec = &catalog_get(name).unwrap().spec;
        for _ in 0..10 {
            let p: Vec<f64> = (0..spec.dim())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            flat_exact &= ricci(spec, &p).unwrap().iter().all(|&x| x == 0.0);
        }
    }
    ensure(worst_s < 1e-8, || {
        format!("Schwarzschild |Ric| = {worst_s:e}")
    })?;
    ensure(worst_d < 1e-8, || {
        format!("de Sitter |Ric - 3g| = {worst_d:e}")
    })?;
    ensure(flat_exact, || "Minkowski Ricci not exactly zero".into())?;
    Ok(format!(
        "|Ric_schw| <= {worst_s:.1e}, |Ric - 3g| <= {worst_d:.1e}, flat exact"
    ))
}

fn flow_matches_rk() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (g, v0) = catalog_case(&mut rng);
        let t = rng.random_range(-1.0..1.0);
        let closed = flow_closed_form(&g, &v0, t).map_err(|e| e.to_string())?;
        let rk = flow_rk_oracle(&g, &v0, t, 10_000).map_err(|e| e.to_string())?;
        worst = worst.max((&closed.end - &rk).amax());
    }
    ensure(worst < 1e-8, || format!("sup deviation {worst:e}"))?;
    Ok(format!("200 cases, sup deviation {worst:.1e}"))
}

fn roundtrips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_t, mut worst_v) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < 500 {
        let (g, v0) = catalog_case(&mut rng);
        let t: f64 = rng.random_range(-3.0..3.0);
        if t.abs() < 1e-3 {
            continue;
        }
        let r = roundtrip_check(&g, &v0, t).map_err(|e| format!("t = {t}: {e}"))?;
        worst_t = worst_t.max(r.t_error);
        worst_v = worst_v.max(r.anchor_error);
        done += 1;
    }
    ensure(worst_t < 1e-8 && worst_v < 1e-8, || {
        format!("t error {worst_t:e}, anchor error {worst_v:e}")
    })?;
    Ok(format!(
        "500 trips, t error {worst_t:.1e}, anchor error {worst_v:.1e}"
    ))
}

fn nontangency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.random_range(2..6);
        let g = random_mixed(&mut rng, n);
        let v = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let v = &v / v.norm();
        let gv = &g * &v;
        let h = v.dot(&gv);
        let expected = 2.0 * gv.dot(&gv) - 2.0 * h * h;
        worst = worst.max((nontangency_value(&g, &v) - expected).abs() / (1.0 + expected.abs()));
    }
    let mut smallest = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(2..6);
        let g = random_mixed(&mut rng, n);
        let frame = spectral_frame(&g).unwrap();
        for v in sample_null_cone(&frame, 3, 3, rng.random())
            .unwrap()
            .vectors
        {
            smallest = smallest.min(nontangency_value(&g, &v));
        }
    }
    ensure(worst < 1e-12, || format!("identity error {worst:e}"))?;
    ensure(smallest > 0.0, || format!("null value {smallest}"))?;
    Ok(format!(
        "identity error {worst:.1e}, min on null samples {smallest:.3}"
    ))
}

fn causal_derivative() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (g, v0) = catalog_case(&mut rng);
        let flow = ConeFlow::new(g.clone()).unwrap();
        let plus = flow.flow(&v0, h).map_err(|e| e.to_string())?.causal;
        let minus = flow.flow(&v0, -h).map_err(|e| e.to_string())?.causal;
        let gv = &g * &v0;
        let expected = 4.0 * gv.dot(&gv);
        worst = worst.max(((plus - minus) / (2.0 * h) - expected).abs() / expected);
    }
    ensure(worst < 1e-6, || format!("relative error {worst:e}"))?;
    Ok(format!("200 null samples, relative error {worst:.1e}"))
}

fn default_region(name: &str) -> Region {
    Region::new(catalog_get(name).unwrap().default_region.clone())
}

fn forward_direction() -> Outcome {
    let config = AnalysisConfig::default();
    let mut details = Vec::new();
    for (name, field) in [
        ("minkowski4", "ricci"),
        ("schwarzschild", "ricci"),
        ("desitter_flat", "ricci"),
        ("flrw_dust", "ricci"),
        ("minkowski2", "minus_g"),
        ("c2_bump", "ricci"),
    ] {
        let entry = catalog_get(name).unwrap();
        let field = &entry.fixture(field).unwrap().field;
        let region = default_region(name);
        let nec = check_nec(field, &entry.spec, &region, &config).map_err(|e| e.to_string())?;
        let report = bound(field, &entry.spec, &region, &config).map_err(|e| e.to_string())?;
        let final_rung = report.verdict.final_rung.unwrap_or(f64::NEG_INFINITY);
        let certificate = report.certificate_inf.unwrap_or(f64::INFINITY);
        ensure(nec.verdict == NecVerdict::Holds, || {
            format!("{name}: NEC {:?}", nec.verdict)
        })?;
        ensure(report.verdict.kind == VerdictKind::Bounded, || {
            format!("{name}: verdict {:?}", report.verdict.kind)
        })?;
        ensure(final_rung >= certificate - 0.1, || {
            format!("{name}: final rung {final_rung} < certificate {certificate} - 0.1")
        })?;
        details.push(format!("{name} {final_rung:.3}/{certificate:.3}"));
    }
    Ok(format!("final rung/certificate: {}", details.join(", ")))
}

fn failure_direction() -> Outcome {
    let config = AnalysisConfig::default();
    let entry = catalog_get("minkowski2").unwrap();
    let field = &entry.fixture("neg_diag").unwrap().field;
    let region = default_region("minkowski2");
    let nec = check_nec(field, &entry.spec, &region, &config).map_err(|e| e.to_string())?;
    let report = bound(field, &entry.spec, &region, &config).map_err(|e| e.to_string())?;
    let last = report.margin_sweep.last().unwrap();
    let slope = report.verdict.slope.unwrap_or(0.0);
    ensure(nec.verdict == NecVerdict::Violated, || {
        format!("NEC {:?}", nec.verdict)
    })?;
    ensure(report.verdict.kind == VerdictKind::Diverging, || {
        format!("verdict {:?}", report.verdict.kind)
    })?;
    ensure(last.lower == 2f64.powi(-12), || {
        format!("last rung ends at {}", last.lower)
    })?;
    let inf = last.inf_r.unwrap_or(0.0);
    ensure(inf < -1e3, || format!("last rung infimum {inf}"))?;
    ensure(slope < -0.5, || format!("slope {slope}"))?;
    Ok(format!(
        "last rung (2^-12, 2^-11] inf r = {inf:.1}, slope {slope:.1} per rung"
    ))
}

/// Dense angular scan at every grid point: `(inf F/|g|, sup_{g<0} F/g)`.
fn dense_scan(
    field: &SymmetricField,
    spec: &nullbound_core::MetricSpec,
    region: &Region,
) -> (f64, f64) {
    let (mut theorem, mut timelike) = (f64::INFINITY, f64::NEG_INFINITY);
    let count = 1_000_000;
    for p in region.grid_points() {
        let (f, g) = field.evaluate_with_metric(spec, &p).unwrap();
        for i in 0..count {
            let (s, c) = (TAU * i as f64 / count as f64).sin_cos();
            let gv = g[(0, 0)] * c * c + 2.0 * g[(0, 1)] * c * s + g[(1, 1)] * s * s;
            let fv = f[(0, 0)] * c * c + 2.0 * f[(0, 1)] * c * s + f[(1, 1)] * s * s;
            if gv == 0.0 {
                continue;
            }
            theorem = theorem.min(fv / gv.abs());
            if gv < 0.0 {
                timelike = timelike.max(fv / gv);
            }
        }
    }
    (theorem, timelike)
}

fn brute_force_2d() -> Outcome {
    let config = AnalysisConfig::default();
    let mut details = Vec::new();
    for entry in catalog_list().iter().filter(|e| e.spec.dim() == 2) {
        let region = default_region(&entry.name).with_resolution(vec![5, 2]);
        for fixture in &entry.fields {
            let label = format!("{}/{}", entry.name, fixture.name);
            let report =
                bound(&fixture.field, &entry.spec, &region, &config).map_err(|e| e.to_string())?;
            let (theorem, timelike) = dense_scan(&fixture.field, &entry.spec, &region);
            let est_theorem = report.empirical_cz_theorem.unwrap();
            let est_timelike = report.empirical_cz.unwrap();
            if report.verdict.kind == VerdictKind::Diverging {
                // both sides are unbounded; the estimator stops at the 2^-12 margin floor
                ensure(est_theorem < -1e3 && theorem < -1e3, || {
                    format!("{label}: theorem {est_theorem} vs dense {theorem}")
                })?;
                ensure(est_timelike > 1e3 && timelike > 1e3, || {
                    format!("{label}: timelike {est_timelike} vs dense {timelike}")
                })?;
                details.push(format!("{label} diverging"));
            } else {
                let gap = (est_theorem - theorem)
                    .abs()
                    .max((est_timelike - timelike).abs());
                ensure(gap <= 1e-4, || {
                    format!(
                        "{label}: estimate ({est_theorem}, {est_timelike}) vs dense ({theorem}, {timelike})"
                    )
                })?;
                details.push(format!("{label} {gap:.0e}"));
            }
        }
    }
    Ok(details.join(", "))
}

fn exact_constants() -> Outcome {
    let config = AnalysisConfig::default();
    let flat = catalog_get("minkowski2").unwrap();
    let report = bound(
        &SymmetricField::minus_g(),
        &flat.spec,
        &default_region("minkowski2"),
        &config,
    )
    .map_err(|e| e.to_string())?;
    let minus = report.empirical_cz.unwrap();
    let ds = catalog_get("desitter_flat").unwrap();
    let report = bound(
        &SymmetricField::Ricci,
        &ds.spec,
        &default_region("desitter_flat"),
        &config,
    )
    .map_err(|e| e.to_string())?;
    let three = report.empirical_cz.unwrap();
    let v = DVector::from_row_slice(&[FRAC_PI_3.cos(), FRAC_PI_3.sin()]);
    let eta = flat.spec.metric_at(&[0.0, 0.0]).unwrap();
    let t = project_to_null(&eta, &v).map_err(|e| e.to_string())?.t;
    let expected_t = -(3f64.ln()) / 8.0;
    ensure((minus + 1.0).abs() <= 1e-6, || {
        format!("minus_g timelike bound {minus}")
    })?;
    ensure((three - 3.0).abs() <= 1e-4, || {
        format!("de Sitter timelike bound {three}")
    })?;
    ensure((t - expected_t).abs() <= 1e-6, || {
        format!("projection t = {t}")
    })?;
    Ok(format!(
        "C^T(minus_g) = {minus}, C^T(dS) = {three}, t = {t:.9}"
    ))
}

fn weighted_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for entry in catalog_list() {
        let n = entry.spec.dim() as f64;
        for (v, dim) in [("0.7", n + 2.0), ("-3", n + 0.5), ("2", n)] {
            let weighted = entry.spec.with_weight(v, dim).map_err(|e| e.to_string())?;
            for _ in 0..10 {
                let p = random_point(&mut rng, &entry.default_region);
                let diff = bakry_emery(&weighted, &p).unwrap() - ricci(&entry.spec, &p).unwrap();
                worst = worst.max(diff.amax());
            }
        }
    }
    let spec = &catalog_get("weighted_minkowski").unwrap().spec;
    let four = bakry_emery(spec, &[0.0, 1.0]).unwrap();
    let three = bakry_emery(&spec.with_weight("x1^2", 3.0).unwrap(), &[0.0, 1.0]).unwrap();
    ensure(worst <= 1e-12, || {
        format!("constant-weight difference {worst:e}")
    })?;
    ensure(
        four == DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 4.0]),
        || format!("N = 4 gives {four}"),
    )?;
    ensure(
        three == DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 6.0]),
        || format!("N = 3 gives {three}"),
    )?;
    Ok(format!(
        "constant V difference {worst:.1e}, N = 4 diag(0,4), N = 3 diag(0,6)"
    ))
}

fn determinism() -> Outcome {
    let run = |metric: &str, workers: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_nullbound"))
            .args([
                "bound",
                "--metric",
                metric,
                "--field",
                "ricci",
                "--workers",
                workers,
                "--seed",
                "42",
            ])
            .output()
            .map_err(|e| e.to_string())?;
        if out.status.code() != Some(0) {
            return Err(format!("{metric}: exit {:?}", out.status.code()));
        }
        Ok(out.stdout)
    };
    let mut bytes = 0;
    for metric in ["c2_bump", "flrw_dust"] {
        let one = run(metric, "1")?;
        let four = run(metric, "4")?;
        ensure(one == four, || {
            format!("{metric}: reports differ between 1 and 4 workers")
        })?;
        bytes += one.len();
    }
    Ok(format!(
        "c2_bump and flrw_dust identical across 1 and 4 workers ({bytes} bytes)"
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("curvature goldens", Some(5), curvature_goldens),
        ("closed-form flow vs RK4", Some(30), flow_matches_rk),
        ("flow/projection round trips", Some(30), roundtrips),
        ("non-tangency identity", Some(5), nontangency),
        ("causal derivative at the cone", None, causal_derivative),
        ("NEC implies bounded", Some(300), forward_direction),
        ("violated NEC diverges", None, failure_direction),
        ("2D dense-scan oracle", None, brute_force_2d),
        ("exact constants", None, exact_constants),
        ("weighted reduction", None, weighted_reduction),
        ("worker determinism", None, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(secs)) if elapsed > Duration::from_secs(secs) => Err(format!(
                "took {:.1} s, limit {secs} s",
                elapsed.as_secs_f64()
            )),
            (outcome, _) => outcome,
        };
        let (status, detail) = match outcome {
            Ok(detail) => ("PASS", detail),
            Err(detail) => {
                failed += 1;
                ("FAIL", detail)
            }
        };
        println!(
            "{status} {:>2} {name} ({:.2} s): {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

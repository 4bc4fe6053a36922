use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nullbound_core::numfmt::{g12, real, reals};
use nullbound_core::{
    bound, catalog_get, catalog_list, check_nec, AnalysisConfig, ConeFlow, DVector, FlowError,
    NecReport, NecVerdict, Region, VerdictKind,
};
use serde::Serialize;

use crate::source::{self, Metric};
use crate::{AnalysisArgs, BoundArgs, CatalogCommand, Cli, Command, FlowArgs, PointArgs};

pub fn run(cli: &Cli) -> Result<u8> {
    let started = Instant::now();
    let code = match &cli.command {
        Command::CheckNec(args) => cmd_check_nec(cli, args)?,
        Command::Bound(args) => cmd_bound(cli, args)?,
        Command::Flow(args) => cmd_flow(args)?,
        Command::Project(args) => cmd_project(args)?,
        Command::Catalog(cmd) => cmd_catalog(cmd)?,
    };
    if cli.verbose {
        eprintln!("finished in {:.3} s", started.elapsed().as_secs_f64());
    }
    Ok(code)
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes") + "\n"
}

fn region(cli: &Cli, args: &AnalysisArgs, metric: &Metric) -> Result<Region> {
    let mut region =
        Region::new(source::bounds(metric, args.region.as_deref())?).with_seed(cli.seed);
    if let Some(text) = &args.resolution {
        let counts = source::counts(text, "--resolution")?;
        region.resolution = match counts.as_slice() {
            [one] => vec![*one; region.dim()],
            _ => counts,
        };
    }
    if let Some(text) = &args.null_directions {
        match source::counts(text, "--null-directions")?.as_slice() {
            [a, b] => region.null_directions = (*a, *b),
            _ => bail!("--null-directions expects `a,b`"),
        }
    }
    if let Some(n) = args.sphere_samples {
        region.sphere_samples = n;
    }
    region.validate(&metric.spec)?;
    Ok(region)
}

#[derive(Serialize)]
struct NecOutput<'a> {
    metric: &'a str,
    field: String,
    provenance: &'static str,
    region: &'a Region,
    #[serde(serialize_with = "real")]
    tol_null: f64,
    nec: &'a NecReport,
}

fn cmd_check_nec(cli: &Cli, args: &AnalysisArgs) -> Result<u8> {
    let metric = source::metric(&args.metric.metric)?;
    let field = source::field(&args.field, metric.spec.dim())?;
    let region = region(cli, args, &metric)?;
    let config = AnalysisConfig {
        tol_null: args.tol_null,
        workers: cli.workers,
        ..AnalysisConfig::default()
    };
    let nec = check_nec(&field, &metric.spec, &region, &config)?;
    let output = NecOutput {
        metric: metric.spec.name(),
        field: field.label(),
        provenance: field.provenance().as_str(),
        region: &region,
        tol_null: config.tol_null,
        nec: &nec,
    };
    emit(&to_json(&output), args.output.as_deref())?;
    if cli.verbose {
        eprintln!("nec: {:?}, min F(v,v) = {:?}", nec.verdict, nec.min_value);
    }
    Ok(match nec.verdict {
        NecVerdict::Violated => 2,
        NecVerdict::Holds | NecVerdict::VacuouslyHolds => 0,
    })
}

fn cmd_bound(cli: &Cli, args: &BoundArgs) -> Result<u8> {
    let a = &args.analysis;
    let metric = source::metric(&a.metric.metric)?;
    let field = source::field(&a.field, metric.spec.dim())?;
    let region = region(cli, a, &metric)?;
    let config = AnalysisConfig {
        tol_null: a.tol_null,
        epsilon0: args.epsilon0,
        rungs: args.rungs,
        refine_seeds: args.refine_seeds,
        refine_iterations: args.refine_iterations,
        divergence_margin: args.divergence_margin,
        divergence_slope: args.divergence_slope,
        fit_rungs: args.fit_rungs,
        workers: cli.workers,
    };
    let report = bound(&field, &metric.spec, &region, &config)?;
    emit(&report.to_json(), a.output.as_deref())?;
    if let Some(path) = &args.csv {
        emit(&report.sweep_csv(), Some(path))?;
    }
    if cli.verbose {
        eprintln!(
            "verdict {:?}, timelike bound {:?}, all-non-null bound {:?}",
            report.verdict.kind, report.empirical_cz, report.empirical_cz_theorem
        );
    }
    Ok(match report.verdict.kind {
        VerdictKind::Bounded => 0,
        VerdictKind::Diverging => 2,
        VerdictKind::InsufficientData => {
            eprintln!("error: too few nonempty margin rungs for a verdict");
            1
        }
    })
}

fn cone_flow(args: &PointArgs) -> Result<(Metric, Vec<f64>, DVector<f64>, ConeFlow)> {
    let metric = source::metric(&args.metric.metric)?;
    let p = source::point(&metric, args.point.as_deref())?;
    let v = DVector::from_vec(source::unit_direction(&args.direction, metric.spec.dim())?);
    let g = metric.spec.metric_at(&p)?;
    let flow = ConeFlow::new(g)?;
    Ok((metric, p, v, flow))
}

fn cmd_flow(args: &FlowArgs) -> Result<u8> {
    let (_, _, v0, flow) = cone_flow(&args.at)?;
    let (t0, t1) = match source::reals(&args.t_range, "--t-range")?.as_slice() {
        [a, b] => (*a, *b),
        _ => bail!("--t-range expects `start,end`"),
    };
    if args.rows == 0 {
        bail!("--rows must be at least 1");
    }
    let rows = if t0 == t1 { 1 } else { args.rows };
    let n = v0.len();

    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..n).map(|i| format!("v{i}")));
    header.push("g".into());
    if args.oracle {
        header.extend((0..n).map(|i| format!("rk_v{i}")));
        header.push("deviation".into());
    }
    let mut out = header.join(",") + "\n";
    let mut max_deviation = 0.0f64;
    for i in 0..rows {
        let t = match i {
            0 => t0,
            _ if i + 1 == rows => t1,
            _ => t0 + (t1 - t0) * i as f64 / (rows - 1) as f64,
        };
        let result = flow.flow(&v0, t)?;
        let mut row: Vec<String> = vec![g12(t)];
        row.extend(result.end.iter().map(|x| g12(*x)));
        row.push(g12(result.causal));
        if args.oracle {
            let rk = flow.flow_rk(&v0, t, args.steps)?;
            let deviation = (&rk - &result.end).amax();
            max_deviation = max_deviation.max(deviation);
            row.extend(rk.iter().map(|x| g12(*x)));
            row.push(g12(deviation));
        }
        out += &(row.join(",") + "\n");
    }
    emit(&out, None)?;
    if args.oracle {
        eprintln!("max deviation {}", g12(max_deviation));
    }
    Ok(0)
}

#[derive(Serialize)]
struct ProjectOutput<'a> {
    metric: &'a str,
    #[serde(serialize_with = "reals")]
    point: Vec<f64>,
    #[serde(serialize_with = "reals")]
    input: Vec<f64>,
    /// Signed flow time carrying the input onto the null cone.
    #[serde(serialize_with = "real")]
    t: f64,
    /// Parameter s with Φ(s, anchor) = input.
    #[serde(serialize_with = "real")]
    flow_parameter: f64,
    #[serde(serialize_with = "reals")]
    anchor: Vec<f64>,
    #[serde(serialize_with = "real")]
    residual: f64,
}

fn cmd_project(args: &PointArgs) -> Result<u8> {
    let (metric, p, v, flow) = cone_flow(args)?;
    let projection = match flow.project(&v) {
        Ok(projection) => projection,
        Err(e @ FlowError::NotInFlowImage { .. }) => {
            eprintln!("error: NotInFlowImage: {e}");
            return Ok(2);
        }
        Err(e @ FlowError::NullInput { .. }) => bail!("NotNull precondition: {e}"),
        Err(e) => return Err(e.into()),
    };
    let output = ProjectOutput {
        metric: metric.spec.name(),
        point: p,
        input: v.iter().copied().collect(),
        t: projection.t,
        flow_parameter: projection.flow_parameter(),
        anchor: projection.anchor.iter().copied().collect(),
        residual: projection.residual,
    };
    emit(&to_json(&output), None)?;
    Ok(0)
}

fn cmd_catalog(cmd: &CatalogCommand) -> Result<u8> {
    match cmd {
        CatalogCommand::List => {
            let mut out = String::new();
            for e in catalog_list() {
                let fields: Vec<&str> = e.fields.iter().map(|f| f.name).collect();
                out += &format!(
                    "{:<20} dim {}  signature ({}, {})  {:<4}  fields {:<28}  {}\n",
                    e.name,
                    e.spec.dim(),
                    e.signature.0,
                    e.signature.1,
                    e.regularity.as_str(),
                    fields.join(","),
                    e.description
                );
            }
            emit(&out, None)?;
        }
        CatalogCommand::Export { name, output } => {
            let entry = catalog_get(name)?;
            emit(entry.source, output.as_deref())?;
        }
    }
    Ok(0)
}

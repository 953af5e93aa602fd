use std::path::{Path, PathBuf};

use dualmink_core::shapes::{random_box_axes, random_centered_polytope, shifted_ball};
use dualmink_core::{
    admissible_exponent_s, box_bounds, box_dual_volume_mc, build_grid, kappa, orbit_hull_body,
    orbit_intersection_body, q_star, santalo_product, solve as run_solver, BodyFile, BoxSpec,
    IntegrabilityExponent, Scheme, SolverStatus, StandardGroup, SupportPolytope, TraceRow,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    self, build_group, BaseBody, BoundsSweep, BoxSweep, ConstructionKind, Resolved, SantaloSweep,
};
use crate::error::{CliError, CliResult};
use crate::run::{ExponentRecord, GridRecord, GroupRecord, RunDir, RunManifest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Solve { config: PathBuf },
    VerifyBounds { config: PathBuf },
    Construct { config: PathBuf },
    Selftest,
    Export { body: PathBuf, mesh: bool },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::VerifyBounds { .. } => "verify-bounds",
            Command::Construct { .. } => "construct",
            Command::Selftest => "selftest",
            Command::Export { .. } => "export",
        }
    }
}

/// A finished run. `failure` is set when the run completed and was recorded
/// but found a problem (non-convergence, a bound violation, a failed check).
#[derive(Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub summary: String,
    pub failure: Option<CliError>,
}

impl RunOutput {
    pub fn exit_code(&self) -> u8 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }
}

/// Runs one command under `root`. Errors before the run directory exists
/// (bad config, violated hypothesis, unreadable input) come back as `Err`.
pub fn run_command(command: &Command, root: &Path) -> CliResult<RunOutput> {
    match command {
        Command::Solve { config } => solve(&config::parse_config(config)?, root),
        Command::VerifyBounds { config } => verify_bounds(&config::parse_config(config)?, root),
        Command::Construct { config } => construct(&config::parse_config(config)?, root),
        Command::Selftest => selftest(root),
        Command::Export { body, mesh } => export(body, *mesh, root),
    }
}

fn config_json(resolved: &Resolved) -> CliResult<serde_json::Value> {
    serde_json::to_value(&resolved.config)
        .map_err(|e| CliError::Schema(format!("cannot serialise config: {e}")))
}

fn finish(
    run: RunDir,
    mut manifest: RunManifest,
    summary: String,
    failure: Option<CliError>,
) -> CliResult<RunOutput> {
    manifest.exit_code = failure.as_ref().map_or(0, CliError::exit_code);
    let dir = run.finish(manifest)?;
    Ok(RunOutput {
        dir,
        summary,
        failure,
    })
}

pub fn solve(resolved: &Resolved, root: &Path) -> CliResult<RunOutput> {
    let problem = resolved
        .problem
        .as_ref()
        .ok_or_else(|| CliError::Schema("solve needs a [problem] section".into()))?;
    let spec = &problem.spec;
    let config = &resolved.config;
    let report = run_solver(spec, &config.solver)?;

    let mut run = RunDir::create(root, "solve")?;
    let mut manifest = RunManifest::new("solve", config_json(resolved)?);
    manifest.group = Some(GroupRecord::of(&spec.group));
    manifest.exponent = Some(ExponentRecord {
        n: spec.dim(),
        p: spec.p,
        q: spec.q,
        q_star: problem.q_star.is_finite().then_some(problem.q_star),
        s: problem.exponent(),
    });
    manifest
        .grids
        .push(GridRecord::of("quadrature", &spec.grid));

    run.write_toml("config.toml", &config)?;
    run.write_csv("trace.csv", &report.trace)?;
    run.write_toml("body.toml", &report.body.to_file())?;
    run.write_toml("normalized.toml", &report.normalized.to_file())?;
    if spec.dim() == 3 {
        run.write("body.obj", &report.body.facets()?.to_obj()?)?;
    }

    let tol = config.checks.residual_tolerance;
    manifest.outcome = json!({
        "status": report.status,
        "phi": report.phi,
        "lambda": report.lambda,
        "residual": report.residual,
        "euler_lagrange_gap": report.euler_lagrange_gap,
        "iterations": report.trace.last().map_or(0, |r: &TraceRow| r.iter),
        "directions": spec.normals.len(),
        "orbits": spec.parametrization.len(),
        "floor_hit": report.floor_hit,
        "diameter_growth": report.diameter_growth,
        "wall_time": report.wall_time,
    });
    let summary = format!(
        "status {:?}, Φ = {:.6}, λ = {:.6}, residual {:.3e}",
        report.status, report.phi, report.lambda, report.residual
    );
    let failure = if !(report.residual <= tol) {
        Some(CliError::NonConvergence(format!(
            "residual {:.3e} above {tol:.3e} (status {:?})",
            report.residual, report.status
        )))
    } else if report.floor_hit {
        Some(CliError::NonConvergence(
            "a support number reached the floor".into(),
        ))
    } else if report.status == SolverStatus::MaxIters && report.diameter_growth {
        Some(CliError::NonConvergence(
            "iteration budget exhausted with a growing diameter".into(),
        ))
    } else {
        None
    };
    finish(run, manifest, summary, failure)
}

#[derive(Debug, Serialize)]
struct BoxRow {
    n: usize,
    q: f64,
    half_axes: String,
    branch: String,
    lower: f64,
    upper: f64,
    observed: f64,
    pass: bool,
    constants: String,
}

#[derive(Debug, Serialize)]
struct SantaloRow {
    n: usize,
    facets: usize,
    volume: f64,
    polar_volume: f64,
    product: f64,
    kappa_sq: f64,
    ratio: f64,
    centered: bool,
    floor_ok: bool,
    forward_ok: Option<bool>,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

pub fn verify_bounds(resolved: &Resolved, root: &Path) -> CliResult<RunOutput> {
    let sweep = resolved
        .config
        .bounds
        .as_ref()
        .ok_or_else(|| CliError::Schema("verify-bounds needs a [bounds] section".into()))?;
    let mut manifest = RunManifest::new("verify-bounds", config_json(resolved)?);
    let (csv, total, passed, outcome) = match sweep {
        BoundsSweep::BoxBrackets(s) => box_sweep(s, &mut manifest)?,
        BoundsSweep::Santalo(s) => santalo_sweep(s, &mut manifest)?,
    };
    let mut run = RunDir::create(root, "verify-bounds")?;
    run.write("config.toml", &toml_string(&resolved.config)?)?;
    run.write("bounds.csv", &csv)?;
    manifest.outcome = outcome;
    let summary = format!("{passed}/{total} cases inside their bounds");
    let failure = (passed < total)
        .then(|| CliError::BoundViolation(format!("{} of {total} cases", total - passed)));
    finish(run, manifest, summary, failure)
}

fn toml_string<T: Serialize>(value: &T) -> CliResult<String> {
    toml::to_string(value).map_err(|e| CliError::Schema(format!("cannot serialise: {e}")))
}

fn csv_string<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Schema(format!("csv: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Schema(format!("csv: {e}")))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

type SweepResult = (String, usize, usize, serde_json::Value);

fn box_sweep(s: &BoxSweep, manifest: &mut RunManifest) -> CliResult<SweepResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut rows = Vec::new();
    let mut widest = 0.0f64;
    for &n in &s.dims {
        let grid = config::sweep_grid(n, s.node_count, s.seed)?;
        manifest
            .grids
            .push(GridRecord::of(format!("monte-carlo n={n}"), &grid));
        for _ in 0..s.boxes {
            let b = BoxSpec::new(random_box_axes(n, s.max_ratio, &mut rng))?;
            for &q in &s.q_values {
                let report = box_bounds(&b, q)?.with_observed(box_dual_volume_mc(&b, q, &grid)?);
                widest = widest.max(report.upper / report.lower);
                rows.push(BoxRow {
                    n,
                    q,
                    half_axes: join(b.half_axes()),
                    branch: report.branch.clone(),
                    lower: report.lower,
                    upper: report.upper,
                    observed: report.observed.unwrap_or(f64::NAN),
                    pass: report.pass == Some(true),
                    constants: report
                        .constants
                        .iter()
                        .map(|(k, v)| format!("{k}={v}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                });
            }
        }
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let outcome = json!({
        "sweep": "box-brackets",
        "cases": rows.len(),
        "passed": passed,
        "pass_rate": passed as f64 / rows.len().max(1) as f64,
        "widest_upper_over_lower": widest,
    });
    Ok((csv_string(&rows)?, rows.len(), passed, outcome))
}

fn santalo_sweep(s: &SantaloSweep, manifest: &mut RunManifest) -> CliResult<SweepResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut rows = Vec::new();
    for &n in &s.dims {
        let grid = config::sweep_grid(n, s.node_count, 0)?;
        manifest
            .grids
            .push(GridRecord::of(format!("volumes n={n}"), &grid));
        for _ in 0..s.bodies {
            let facets = rng.random_range(s.min_facets..=s.max_facets);
            let body = random_centered_polytope(n, facets, &mut rng)?;
            let r = santalo_product(&body, &grid)?;
            rows.push(SantaloRow {
                n,
                facets: body.len(),
                volume: r.volume,
                polar_volume: r.polar_volume,
                product: r.product,
                kappa_sq: r.kappa_sq,
                ratio: r.product / r.kappa_sq,
                centered: r.centered,
                floor_ok: r.floor_ok,
                forward_ok: r.forward_ok,
            });
        }
    }
    let passed = rows
        .iter()
        .filter(|r| r.floor_ok && r.forward_ok == Some(true))
        .count();
    let (lo, hi) = rows.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.ratio), hi.max(r.ratio))
    });
    let outcome = json!({
        "sweep": "santalo",
        "cases": rows.len(),
        "passed": passed,
        "pass_rate": passed as f64 / rows.len().max(1) as f64,
        "ratio_range": [lo, hi],
    });
    Ok((csv_string(&rows)?, rows.len(), passed, outcome))
}

#[derive(Debug, Serialize)]
struct CertificateRow {
    seed: u64,
    facets: usize,
    extremal_radius: f64,
    unique_extremum: bool,
    max_gap: f64,
    invariance_deviation: f64,
    non_symmetric: bool,
}

pub fn construct(resolved: &Resolved, root: &Path) -> CliResult<RunOutput> {
    let c = resolved
        .config
        .construct
        .as_ref()
        .ok_or_else(|| CliError::Schema("construct needs a [construct] section".into()))?;
    let group = build_group(&c.group, c.n, "construct.group")?;
    let scheme = Scheme::default_for(c.n);
    let BaseBody::ShiftedBall {
        radius,
        center,
        facets,
    } = &c.base;
    let base_normals = build_grid(c.n, *facets, scheme, 0)
        .map_err(|e| CliError::Schema(format!("construct.base: {e}")))?;
    let base = shifted_ball(base_normals.nodes().clone(), *radius, center)
        .map_err(|e| CliError::Schema(format!("construct.base: {e}")))?;
    let probe = build_grid(c.n, c.probe_nodes, scheme, 0)
        .map_err(|e| CliError::Schema(format!("construct.probe_nodes: {e}")))?;

    let mut built = Vec::new();
    for seed in c.first_seed..c.first_seed + c.count as u64 {
        let body = match c.kind {
            ConstructionKind::Intersection => {
                orbit_intersection_body(&group, &base, None, seed, &probe)?
            }
            ConstructionKind::Hull => orbit_hull_body(&group, &base, None, seed, &probe)?,
        };
        built.push((seed, body));
    }

    let mut run = RunDir::create(root, "construct")?;
    let mut manifest = RunManifest::new("construct", config_json(resolved)?);
    manifest.group = Some(GroupRecord::of(&group));
    manifest
        .grids
        .push(GridRecord::of("base normals", &base_normals));
    manifest.grids.push(GridRecord::of("probe", &probe));
    run.write("config.toml", &toml_string(&resolved.config)?)?;
    let mut rows = Vec::new();
    for (seed, b) in &built {
        run.write_toml(&format!("body-{seed}.toml"), &b.body.to_file())?;
        if c.n == 3 {
            run.write(&format!("body-{seed}.obj"), &b.body.facets()?.to_obj()?)?;
        }
        rows.push(CertificateRow {
            seed: *seed,
            facets: b.body.len(),
            extremal_radius: b.extremal_radius,
            unique_extremum: b.unique_extremum,
            max_gap: b.certificate.max_gap,
            invariance_deviation: b.certificate.invariance_deviation,
            non_symmetric: b.certificate.non_symmetric,
        });
    }
    run.write_csv("certificates.csv", &rows)?;
    let certified = rows.iter().filter(|r| r.non_symmetric).count();
    manifest.outcome = json!({
        "bodies": rows.len(),
        "certified_non_symmetric": certified,
        "max_invariance_deviation": rows.iter().map(|r| r.invariance_deviation).fold(0.0, f64::max),
    });
    let summary = format!("{certified}/{} bodies certified non-symmetric", rows.len());
    finish(run, manifest, summary, None)
}

#[derive(Debug, Serialize)]
struct CheckRow {
    check: &'static str,
    pass: bool,
    detail: String,
}

fn selftest_checks() -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut check = |check: &'static str, pass: bool, detail: String| {
        rows.push(CheckRow {
            check,
            pass,
            detail,
        })
    };

    let k3 = kappa(3);
    check(
        "unit ball volume in R^3",
        (k3 - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14,
        format!("{k3}"),
    );
    let qs = q_star(2.0, 3);
    check(
        "dual exponent of q = 2 in R^3",
        matches!(qs, Ok(v) if v == 4.0),
        format!("{qs:?}"),
    );
    let qs = q_star(0.5, 3);
    check(
        "dual exponent of q = 1/2 is infinite",
        matches!(qs, Ok(v) if v.is_infinite()),
        format!("{qs:?}"),
    );
    let s = admissible_exponent_s(-1.0, 2.0, 3);
    check(
        "integrability exponent for p = -1, q = 2, n = 3",
        matches!(s, Ok(IntegrabilityExponent::Exactly(v)) if (v - 4.0 / 3.0).abs() < 1e-12),
        format!("{s:?}"),
    );
    let rejected = admissible_exponent_s(-5.0, 2.0, 3);
    check(
        "p = -5 rejected for q = 2, n = 3",
        rejected.is_err(),
        format!("{rejected:?}"),
    );
    let g = build_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3, "group");
    check(
        "simplex symmetry group of R^3 has order 24",
        matches!(&g, Ok(g) if g.order() == 24),
        format!("{:?}", g.as_ref().map(|g| g.order())),
    );
    let g = build_group(&StandardGroup::Cyclic { order: 5 }, 2, "group");
    check(
        "cyclic group of order 5",
        matches!(&g, Ok(g) if g.order() == 5),
        format!("{:?}", g.as_ref().map(|g| g.order())),
    );
    let missing = config::parse_config_str(
        "[problem]\nn = 3\np = -1.0\nq = 2.0\ngroup = { kind = \"simplex-symmetry\", m = 3 }\n",
    );
    check(
        "missing density is a config error",
        matches!(&missing, Err(e) if e.exit_code() == 2),
        format!("{:?}", missing.err().map(|e| e.to_string())),
    );
    let grid = build_grid(3, 1000, Scheme::FibonacciSphere, 0);
    check(
        "quadrature weights sum to the sphere area",
        matches!(&grid, Ok(g) if (g.total_weight() - 3.0 * k3).abs() < 1e-12),
        format!("{:?}", grid.as_ref().map(|g| g.total_weight())),
    );
    let cube = SupportPolytope::cube(3, 1.0).and_then(|c| c.facets());
    check(
        "cube has 8 vertices and volume 8",
        matches!(&cube, Ok(f) if f.vertices().len() == 8 && (f.volume() - 8.0).abs() < 1e-12),
        format!(
            "{:?}",
            cube.as_ref().map(|f| (f.vertices().len(), f.volume()))
        ),
    );
    let square = mesh_check(&SupportPolytope::cube(2, 1.0).map(|c| c.to_file()));
    check(
        "mesh export of a planar body is refused",
        matches!(&square, Err(e) if e.exit_code() == 2),
        format!("{:?}", square.err().map(|e| e.to_string())),
    );
    rows
}

pub fn selftest(root: &Path) -> CliResult<RunOutput> {
    let rows = selftest_checks();
    let mut run = RunDir::create(root, "selftest")?;
    run.write_csv("selftest.csv", &rows)?;
    let passed = rows.iter().filter(|r| r.pass).count();
    let mut manifest = RunManifest::new("selftest", serde_json::Value::Null);
    manifest.outcome = json!({ "checks": rows.len(), "passed": passed });
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check).collect();
    let failure = (!failed.is_empty()).then(|| CliError::SelftestFailed(failed.join(", ")));
    finish(
        run,
        manifest,
        format!("{passed}/{} checks passed", rows.len()),
        failure,
    )
}

fn mesh_check(file: &dualmink_core::Result<BodyFile>) -> CliResult<()> {
    match file {
        Ok(f) if f.n == 3 => Ok(()),
        Ok(f) => Err(CliError::Schema(format!(
            "mesh export requires n = 3, body has n = {}",
            f.n
        ))),
        Err(e) => Err(CliError::Schema(e.to_string())),
    }
}

pub fn read_body(path: &Path) -> CliResult<(BodyFile, SupportPolytope)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: BodyFile = toml::from_str(&text)
        .map_err(|e| CliError::Schema(format!("{}: {}", path.display(), e.message())))?;
    let body = SupportPolytope::from_file(&file)
        .map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))?;
    Ok((file, body))
}

#[derive(Debug, Serialize)]
struct SupportRow {
    index: usize,
    normal: String,
    support: f64,
}

pub fn export(body_path: &Path, mesh: bool, root: &Path) -> CliResult<RunOutput> {
    let (file, body) = read_body(body_path)?;
    if mesh {
        mesh_check(&Ok(file.clone()))?;
    }
    let obj = if mesh {
        let facets = body
            .facets()
            .map_err(|e| CliError::Schema(format!("mesh export: {e}")))?;
        Some(
            facets
                .to_obj()
                .map_err(|e| CliError::Schema(format!("mesh export: {e}")))?,
        )
    } else {
        None
    };
    let mut run = RunDir::create(root, "export")?;
    let rows: Vec<SupportRow> = (0..body.len())
        .map(|i| SupportRow {
            index: i,
            normal: join(body.normal(i)),
            support: body.support_numbers()[i],
        })
        .collect();
    run.write_toml("body.toml", &file)?;
    run.write_csv("support.csv", &rows)?;
    if let Some(obj) = &obj {
        run.write("body.obj", obj)?;
    }
    let mut manifest = RunManifest::new(
        "export",
        json!({ "body": body_path.display().to_string(), "mesh": mesh }),
    );
    manifest.outcome = json!({ "n": file.n, "facets": body.len() });
    finish(
        run,
        manifest,
        format!("exported {} facets", body.len()),
        None,
    )
}

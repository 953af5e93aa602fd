//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion outside `DOCUMENTED_LIMITATIONS` fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dualmink_core::bounds::CENTERING_TOL;
use dualmink_core::constructions::GENERICITY_MARGIN;
use dualmink_core::linalg::norm;
use dualmink_core::measures::affine_invariance_check;
use dualmink_core::shapes::{
    random_box_axes, random_centered_polytope, random_orbit_support, random_polytope, random_unit,
    shifted_ball, PolytopeFamily,
};
use dualmink_core::sphere::geodesic_sphere;
use dualmink_core::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Criteria that are known not to hold at the pinned tolerance with the
/// prescribed quadrature. They are still run and reported as FAIL.
const DOCUMENTED_LIMITATIONS: &[usize] = &[4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn tetrahedral() -> Arc<OrthogonalGroup> {
    Arc::new(standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3).unwrap())
}

fn grid(n: usize, nodes: usize, seed: u64) -> Result<SphericalGrid> {
    let scheme = match n {
        2 => Scheme::UniformAngle,
        3 => Scheme::FibonacciSphere,
        _ => Scheme::MonteCarlo,
    };
    build_grid(n, nodes, scheme, seed)
}

/// Ball fixed point: `f ≡ c`, `Q = B³`, `p = −1`, `q = 2`.
fn ball_problem(c: f64, directions: usize, nodes: usize) -> Result<ProblemSpec> {
    let g = tetrahedral();
    let normals = stable_directions(&g, directions)?;
    let grid = grid(3, nodes, 0)?.symmetrized(&g)?;
    ProblemSpec::new(
        -1.0,
        2.0,
        g,
        StarBody::unit_ball(),
        normals,
        grid,
        move |_| c,
        false,
    )
}

/// Ball fixed point, exact radius `(n c)^{1/(q−p)}`.
fn ball_radius(c: f64) -> f64 {
    (3.0 * c).powf(1.0 / 3.0)
}

struct BallRun {
    report: SolutionReport,
    spec: ProblemSpec,
    seconds: f64,
}

fn run_ball(c: f64, directions: usize, nodes: usize) -> Result<BallRun> {
    let started = Instant::now();
    let spec = ball_problem(c, directions, nodes)?;
    let report = solve(&spec, &SolverConfig::default())?;
    Ok(BallRun {
        report,
        spec,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn criterion_ball(run: &BallRun) -> Result<Outcome> {
    let r = ball_radius(1.0 / 3.0);
    let rms = rms_radial_error(&run.report.body, &run.spec.grid, |_| r)?;
    let residual = run.report.residual;
    outcome(
        rms <= 0.02 && residual <= 0.02 && run.seconds <= 120.0,
        format!(
            "{} directions, {} nodes: rms radial error {rms:.2e}, residual {residual:.2e}, \
             status {:?}, {:.1}s",
            run.spec.normals.len(),
            run.spec.grid.len(),
            run.report.status,
            run.seconds
        ),
    )
}

fn criterion_scaling(base: &BallRun) -> Result<Outcome> {
    let doubled = run_ball(2.0 / 3.0, 642, 20_000)?;
    let h1 = base.report.body.support_numbers();
    let h2 = doubled.report.body.support_numbers();
    let expected = 2f64.powf(1.0 / 3.0);
    let worst = h1
        .iter()
        .zip(h2)
        .map(|(a, b)| (b / a / expected - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 0.01,
        format!("max |h(2c)/h(c) / 2^(1/3) - 1| = {worst:.2e}"),
    )
}

fn criterion_gradient() -> Result<Outcome> {
    let g = tetrahedral();
    let normals = stable_directions(&g, 120)?;
    let partition = orbits(&g, &normals, 1e-6)?;
    let grid = grid(3, 20_000, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let cases = [
        (-1.0, 2.0),
        (-0.5, 1.0),
        (-2.0, 3.0),
        (-1.5, 1.5),
        (-0.3, 2.5),
    ];
    for (p, q) in cases {
        let h = random_orbit_support(&partition, 0.8, 1.2, &mut rng);
        let body = SupportPolytope::new(normals.clone(), h.clone())?;
        let star = StarBody::unit_ball();
        let mu = TargetMeasure::from_density(&grid, &normals, |u| 1.0 + 0.5 * u[0] * u[1] * u[2])?;
        let kernel = DualKernel::new(&grid, &star, q)?;
        let entropy = Entropy::new(&kernel, &mu, p)?;
        let analytic = entropy.evaluate(&body)?.gradient;
        for _ in 0..20 {
            let i = rng.random_range(0..h.len());
            let eps = 1e-6 * h[i];
            let phi_at = |delta: f64| -> Result<f64> {
                let mut hh = h.clone();
                hh[i] += delta;
                Ok(entropy.evaluate(&body.with_support(hh)?)?.value)
            };
            let fd = (phi_at(eps)? - phi_at(-eps)?) / (2.0 * eps);
            worst = worst.max((fd - analytic[i]).abs() / analytic[i].abs());
        }
    }
    outcome(
        worst <= 1e-4,
        format!("max relative error over 100 coordinates {worst:.2e}"),
    )
}

fn criterion_two_oracles() -> Result<Outcome> {
    let grid = grid(3, 20_000, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let families = [
        PolytopeFamily::Simplex,
        PolytopeFamily::Cube,
        PolytopeFamily::CrossPolytope,
    ];
    let mut worst = 0.0f64;
    for k in 0..10 {
        let body = random_polytope(3, families[k % 3], 0.15, &mut rng)?;
        let star = if k % 2 == 0 {
            StarBody::unit_ball()
        } else {
            StarBody::ellipsoid_axes(&[0.8, 1.0, 1.3])?
        };
        for q in [1.0, 2.0, 3.0] {
            let on_grid = dual_curvature_measure(&body, &star, q, &grid)?;
            let on_boundary = dual_curvature_via_boundary(&body, &star, q, 8)?;
            for (a, b) in on_grid.totals.iter().zip(&on_boundary.totals) {
                worst = worst.max((a - b).abs() / b);
            }
        }
    }
    outcome(
        worst <= 0.01,
        format!("max per-facet relative gap {worst:.2e} (10 polytopes, q = 1, 2, 3)"),
    )
}

fn criterion_box_brackets() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let qs = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5];
    let mut total = 0;
    let mut inside = 0;
    let mut loosest = 0.0f64;
    let mut failures = Vec::new();
    for n in [2, 3, 4] {
        let grid = grid(n, 200_000, 11)?;
        for _ in 0..100 {
            let b = BoxSpec::new(random_box_axes(n, 10.0, &mut rng))?;
            for q in qs {
                let report = box_bounds(&b, q)?.with_observed(box_dual_volume_mc(&b, q, &grid)?);
                total += 1;
                if report.pass == Some(true) {
                    inside += 1;
                    loosest = loosest.max(report.upper / report.lower);
                } else if failures.len() < 3 {
                    failures.push(format!(
                        "n={n} q={q} a={:?} [{:.3e}, {:.3e}] vs {:.3e}",
                        b.half_axes(),
                        report.lower,
                        report.upper,
                        report.observed.unwrap()
                    ));
                }
            }
        }
    }
    outcome(
        inside == total,
        format!(
            "{inside}/{total} inside the bracket, widest upper/lower {loosest:.1} {}",
            failures.join("; ")
        ),
    )
}

fn criterion_santalo() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ok = 0;
    let mut total = 0;
    let mut range = (f64::INFINITY, 0.0f64);
    for n in [2, 3] {
        let grid = grid(n, 20_000, 0)?;
        for _ in 0..100 {
            let facets = rng.random_range(4..16);
            let body = random_centered_polytope(n, facets, &mut rng)?;
            let report = santalo_product(&body, &grid)?;
            total += 1;
            let ratio = report.product / report.kappa_sq;
            range = (range.0.min(ratio), range.1.max(ratio));
            if report.floor_ok && report.forward_ok == Some(true) {
                ok += 1;
            }
        }
    }
    outcome(
        ok == total,
        format!(
            "{ok}/{total} in (κ²/4^n, 1.02 κ²]; V(K)V(K*)/κ² in [{:.3}, {:.3}]",
            range.0, range.1
        ),
    )
}

fn criterion_dual_product() -> Result<Outcome> {
    let grid = grid(3, 20_000, 0)?;
    let ball = StarBody::unit_ball();
    let mut products = Vec::new();
    let mut scale_gap = 0.0f64;
    for k in 0..4 {
        let b = BoxSpec::new(vec![1.0, 1.0, 10f64.powi(k)])?.to_polytope()?;
        let value = bs_dual_product(&b, &ball, &ball, 2.0, 4.0, &grid)?;
        let scaled = bs_dual_product(&b.scaled(3.7)?, &ball, &ball, 2.0, 4.0, &grid)?;
        scale_gap = scale_gap.max((scaled / value - 1.0).abs());
        products.push(value);
    }
    let theta = products.iter().map(|&v| v.max(1.0 / v)).fold(1.0, f64::max);
    outcome(
        scale_gap <= 1e-10,
        format!(
            "scale gap {scale_gap:.1e}; products over aspect 10^0..10^3: {:?}; θ̂ = {theta:.3}",
            products
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
        ),
    )
}

fn criterion_invariance(base: &BallRun, constructed: &[ConstructedBody]) -> Result<Outcome> {
    let trace = &base.report.trace;
    let solver_dev = trace
        .iter()
        .map(|r| r.invariance_deviation)
        .fold(0.0, f64::max);
    let pairing = trace.iter().map(|r| r.scale_pairing).fold(0.0, f64::max);
    let rescale = trace.iter().map(|r| r.rescale_gap).fold(0.0, f64::max);
    let construct_dev = constructed
        .iter()
        .map(|c| c.certificate.invariance_deviation)
        .fold(0.0, f64::max);

    let probe = dualmink_core::bodies::probe_grid(3)?;
    let mut centroid_ratio = 0.0f64;
    let bodies = constructed
        .iter()
        .map(|c| &c.body)
        .chain(std::iter::once(&base.report.body));
    for body in bodies {
        let c = body.facets()?.centroid();
        let stats = body.geometry_stats(&probe)?;
        centroid_ratio = centroid_ratio.max(norm(&c) / stats.circumradius);
    }

    // scale behaviour of Φ on random invariant bodies
    let spec = &base.spec;
    let kernel = DualKernel::new(&spec.grid, &spec.star, spec.q)?;
    let entropy = Entropy::new(&kernel, &spec.mu, spec.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut phi_gap = 0.0f64;
    let mut euler = pairing;
    for _ in 0..5 {
        let h = random_orbit_support(spec.parametrization.partition(), 0.7, 1.3, &mut rng);
        let body = SupportPolytope::new(spec.normals.clone(), h)?;
        let a = entropy.evaluate(&body)?;
        let b = entropy.evaluate(&body.scaled(rng.random_range(0.2..5.0))?)?;
        phi_gap = phi_gap.max((a.value - b.value).abs());
        let pair: f64 = a
            .gradient
            .iter()
            .zip(body.support_numbers())
            .map(|(g, h)| g * h)
            .sum();
        euler = euler.max(pair.abs());
    }
    let pass = solver_dev <= 1e-9
        && construct_dev <= 1e-9
        && centroid_ratio <= CENTERING_TOL
        && phi_gap <= 1e-10
        && rescale <= 1e-10
        && euler <= 1e-9;
    outcome(
        pass,
        format!(
            "deviation solver {solver_dev:.1e} constructions {construct_dev:.1e}; \
             centroid/circumradius {centroid_ratio:.1e}; Φ scale gap {phi_gap:.1e} \
             (rescale steps {rescale:.1e}); |<∇Φ,h>| {euler:.1e}"
        ),
    )
}

fn constructions_run() -> Result<(Vec<ConstructedBody>, usize)> {
    let g = tetrahedral();
    let probe = grid(3, 2000, 0)?;
    let base = shifted_ball(geodesic_sphere(2), 2.0, &[0.5, 0.0, 0.0])?;
    let mut out = Vec::new();
    let mut certified = 0;
    for seed in 0..100 {
        let c = orbit_intersection_body(&g, &base, None, seed, &probe)?;
        if c.certificate.non_symmetric {
            certified += 1;
        }
        out.push(c);
    }
    Ok((out, certified))
}

fn criterion_certificates(certified: usize) -> Result<Outcome> {
    let mut coverage = Vec::new();
    let mut all = true;
    let groups = [
        (StandardGroup::Cyclic { order: 3 }, 2),
        (StandardGroup::Cyclic { order: 5 }, 2),
        (StandardGroup::SimplexSymmetry { m: 3 }, 3),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (spec, n) in groups {
        let g = standard_group(&spec, n)?;
        let anchor = random_unit(n, &mut rng);
        let cone = dirichlet_voronoi_cone(&g, &anchor)?;
        let report = coverage_check(&g, &cone, 10_000, 1);
        all &= report.passed();
        coverage.push(format!(
            "{}: uncovered {} overlaps {}",
            g.label(),
            report.uncovered,
            report.overlaps
        ));
    }
    outcome(
        certified >= 95 && all,
        format!(
            "{certified}/100 certified non-symmetric (margin {GENERICITY_MARGIN}); {}",
            coverage.join(", ")
        ),
    )
}

fn criterion_exponents() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for n in [2, 3, 4] {
        for q in [1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0] {
            let back = q_star(q_star(q, n)?, n)?;
            worst = worst.max((back - q).abs());
        }
    }
    let qs = q_star(2.0, 3)?;
    let rejects = admissible_exponent_s(-qs, 2.0, 3).is_err();
    let accepts = admissible_exponent_s(-qs + 1e-6, 2.0, 3).is_ok();
    outcome(
        worst <= 1e-12 && rejects && accepts,
        format!(
            "max |(q*)* - q| {worst:.1e}; p = -q* rejected: {rejects}; p = -q* + 1e-6 accepted: {accepts}"
        ),
    )
}

fn random_unimodular<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            let noise: f64 = rng.sample(StandardNormal);
            if i == j {
                1.0 + 0.3 * noise
            } else {
                0.3 * noise
            }
        });
        let det = m.determinant();
        if det.abs() < 0.2 {
            continue;
        }
        if det < 0.0 {
            m.column_mut(0).neg_mut();
        }
        return m / det.abs().powf(1.0 / n as f64);
    }
}

fn criterion_affine() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for k in 0..10 {
        let n = if k < 5 { 2 } else { 3 };
        let grid_a = grid(n, 20_000, 0)?;
        let grid_b = grid(n, 20_000, 1)?;
        let body = if n == 2 {
            random_centered_polytope(2, 8, &mut rng)?
        } else {
            random_polytope(3, PolytopeFamily::Cube, 0.15, &mut rng)?
        };
        let axes: Vec<f64> = (0..n).map(|_| rng.random_range(0.7..1.4)).collect();
        let star = StarBody::ellipsoid_axes(&axes)?;
        let phi = random_unimodular(n, &mut rng);
        let q = [1.0, 1.5, 2.0, 2.5, 3.0][k % 5];
        let check = affine_invariance_check(
            &body,
            &star,
            q,
            &phi,
            |u| 1.0 + u[0] * u[0] + 0.5 * u[1],
            &grid_a,
            &grid_b,
        )?;
        worst = worst.max(check.relative_gap);
    }
    outcome(
        worst <= 0.02,
        format!("max relative gap {worst:.2e} over 10 tuples"),
    )
}

fn criterion_refinement(fine: &BallRun) -> Result<Outcome> {
    let coarse = run_ball(1.0 / 3.0, 160, 5000)?;
    let ratio = coarse.report.residual / fine.report.residual;
    outcome(
        ratio >= 1.5,
        format!(
            "residual {:.2e} ({} directions, {} nodes) -> {:.2e} ({} directions, {} nodes), ratio {ratio:.1}",
            coarse.report.residual,
            coarse.spec.normals.len(),
            coarse.spec.grid.len(),
            fine.report.residual,
            fine.spec.normals.len(),
            fine.spec.grid.len(),
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = Vec::new();
    let mut report = |index: usize, name: &str, result: Result<Outcome>, seconds: f64| {
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let note = if !pass && DOCUMENTED_LIMITATIONS.contains(&index) {
            " [documented limitation]"
        } else {
            ""
        };
        if !pass {
            failed.push(index);
        }
        println!(
            "{} [{index:>2}] {name}: {detail} ({seconds:.1}s){note}",
            if pass { "PASS" } else { "FAIL" }
        );
    };
    let timed = |f: &dyn Fn() -> Result<Outcome>| {
        let t = Instant::now();
        let r = f();
        (r, t.elapsed().as_secs_f64())
    };

    let base = match run_ball(1.0 / 3.0, 642, 20_000) {
        Ok(b) => b,
        Err(e) => {
            println!("FAIL [ 1] ball fixed point: error: {e}");
            return ExitCode::FAILURE;
        }
    };
    report(1, "ball fixed point", criterion_ball(&base), base.seconds);
    let (r, s) = timed(&|| criterion_scaling(&base));
    report(2, "scaling law", r, s);
    let (r, s) = timed(&criterion_gradient);
    report(3, "gradient vs finite differences", r, s);
    let (r, s) = timed(&criterion_two_oracles);
    report(4, "two-oracle curvature agreement", r, s);
    let (r, s) = timed(&criterion_box_brackets);
    report(5, "box brackets", r, s);
    let (r, s) = timed(&criterion_santalo);
    report(6, "Santalo sandwich", r, s);
    let (r, s) = timed(&criterion_dual_product);
    report(7, "dual-volume product", r, s);
    let t = Instant::now();
    let constructed = constructions_run();
    let construct_seconds = t.elapsed().as_secs_f64();
    match constructed {
        Ok((bodies, certified)) => {
            let (r, s) = timed(&|| criterion_invariance(&base, &bodies));
            report(8, "invariance suite", r, s);
            let (r, s) = timed(&|| criterion_certificates(certified));
            report(9, "construction certificates", r, s + construct_seconds);
        }
        Err(e) => {
            report(8, "invariance suite", Err(e.clone()), 0.0);
            report(9, "construction certificates", Err(e), construct_seconds);
        }
    }
    let (r, s) = timed(&criterion_exponents);
    report(10, "exponent arithmetic", r, s);
    let (r, s) = timed(&criterion_affine);
    report(11, "affine invariance", r, s);
    let (r, s) = timed(&|| criterion_refinement(&base));
    report(12, "grid refinement", r, s);

    println!(
        "acceptance: {} of 12 criteria passed; failed: {:?}",
        12 - failed.len(),
        failed
    );
    if failed.iter().all(|i| DOCUMENTED_LIMITATIONS.contains(i)) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

//! `G`-invariant bodies that are not origin-symmetric, and Dirichlet–Voronoi
//! fundamental cones.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bodies::SupportPolytope;
use crate::error::{Error, Result};
use crate::groups::{certify, OrthogonalGroup};
use crate::linalg::{distance, dot, mat_vec, norm, normalized, scaled, PointSet};
use crate::sphere::SphericalGrid;

/// Default separation required between `-hz` and the orbit `G h z`.
pub const GENERICITY_MARGIN: f64 = 1e-3;
/// Separation required between `g z̃` and `±z̃` for a Dirichlet–Voronoi anchor.
pub const ANCHOR_MARGIN: f64 = 1e-6;
/// Relative window in which the extremal radius must be attained near one
/// direction only.
pub const UNIQUENESS_MARGIN: f64 = 1e-4;

/// Evidence that a body is (or is not) origin-symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryCertificate {
    /// `max_u |ρ_K(u) − ρ_K(−u)|` over the probe directions.
    pub max_gap: f64,
    /// Direction attaining `max_gap`.
    pub witness: Vec<f64>,
    /// `max_{g,u} |ρ_K(g u) − ρ_K(u)|`.
    pub invariance_deviation: f64,
    /// `max_gap > 10 · invariance_deviation + 1e-6`.
    pub non_symmetric: bool,
}

/// Gap between `ρ_K(u)` and `ρ_K(−u)` over the grid nodes and any extra
/// directions, together with the invariance deviation under `group`.
pub fn certify_asymmetry(
    body: &SupportPolytope,
    group: &OrthogonalGroup,
    grid: &SphericalGrid,
    extra: &[Vec<f64>],
) -> Result<AsymmetryCertificate> {
    let mut max_gap = 0.0f64;
    let mut witness = grid.node(0).to_vec();
    let probes = grid
        .nodes()
        .iter()
        .map(|u| u.to_vec())
        .chain(extra.iter().cloned());
    for u in probes {
        let minus = scaled(&u, -1.0);
        let gap = (body.radial_eval(&u)?.0 - body.radial_eval(&minus)?.0).abs();
        if gap > max_gap {
            max_gap = gap;
            witness = u;
        }
    }
    let invariance_deviation = body.invariance_deviation(group, grid)?;
    Ok(AsymmetryCertificate {
        max_gap,
        witness,
        invariance_deviation,
        non_symmetric: max_gap > 10.0 * invariance_deviation + 1e-6,
    })
}

fn require_admissible(group: &OrthogonalGroup) -> Result<()> {
    let cert = certify(group);
    if !cert.is_admissible() {
        return Err(Error::InvalidGroup(format!(
            "{} has a non-zero fixed point or contains -I",
            group.label()
        )));
    }
    Ok(())
}

/// Haar-distributed element of `O(n)`: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal moved into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// `min_g ‖−h z − g h z‖`.
pub fn antipodal_separation(group: &OrthogonalGroup, h: &DMatrix<f64>, z: &[f64]) -> f64 {
    let hz = mat_vec(h, z);
    let minus = scaled(&hz, -1.0);
    group
        .elements()
        .iter()
        .map(|g| distance(&minus, &mat_vec(g, &hz)))
        .fold(f64::INFINITY, f64::min)
}

/// Draws Haar rotations until `-hz` keeps `margin` away from the orbit `G h z`.
pub fn random_generic_rotation(
    group: &OrthogonalGroup,
    z: &[f64],
    seed: u64,
    max_tries: usize,
    margin: f64,
) -> Result<DMatrix<f64>> {
    require_admissible(group)?;
    if z.len() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            found: z.len(),
        });
    }
    let z = normalized(z);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_tries {
        let h = haar_orthogonal(group.dim(), &mut rng);
        if antipodal_separation(group, &h, &z) >= margin {
            return Ok(h);
        }
    }
    Err(Error::TriesExhausted { tries: max_tries })
}

/// Direction of the smallest (or largest) radius of `body` on the probe grid,
/// and whether it is attained near that direction only.
pub fn extremal_direction(
    body: &SupportPolytope,
    probe: &SphericalGrid,
    largest: bool,
) -> Result<(Vec<f64>, f64, bool)> {
    let rho = body.radial_at_nodes(probe)?;
    let key = |r: f64| if largest { -r } else { r };
    let (best, _) = rho
        .iter()
        .enumerate()
        .min_by(|a, b| key(a.1 .0).total_cmp(&key(b.1 .0)))
        .expect("probe grid is not empty");
    let r0 = rho[best].0;
    let u0 = probe.node(best).to_vec();
    // every node within the margin must sit close to the extremal node
    let unique = rho.iter().enumerate().all(|(j, &(r, _))| {
        (r - r0).abs() > UNIQUENESS_MARGIN * r0 || dot(probe.node(j), &u0) > 0.95
    });
    Ok((u0, r0, unique))
}

/// Output of a symmetrising construction.
#[derive(Debug, Clone)]
pub struct ConstructedBody {
    pub body: SupportPolytope,
    pub rotation: DMatrix<f64>,
    /// Unit direction `u_1` of the extremal radius of the input.
    pub extremal_direction: Vec<f64>,
    pub extremal_radius: f64,
    pub unique_extremum: bool,
    pub certificate: AsymmetryCertificate,
}

/// Every constraint `⟨x, v_i⟩ ≤ c_i` of `base`, rotated by each `g h`.
fn pooled_normals(group: &OrthogonalGroup, base: &SupportPolytope, h: &DMatrix<f64>) -> PointSet {
    let mut normals = PointSet::new(base.dim());
    for g in group.elements() {
        let gh = g * h;
        for v in base.normals().iter() {
            normals
                .push(&mat_vec(&gh, v))
                .expect("rotation preserves dimension");
        }
    }
    normals
}

fn resolve_rotation(
    group: &OrthogonalGroup,
    z: &[f64],
    rotation: Option<DMatrix<f64>>,
    seed: u64,
) -> Result<DMatrix<f64>> {
    match rotation {
        Some(h) => {
            let n = group.dim();
            let defect =
                crate::linalg::max_abs_diff(&(h.transpose() * &h), &DMatrix::identity(n, n));
            if defect > crate::groups::ORTHOGONALITY_TOL {
                return Err(Error::NotOrthogonal { deviation: defect });
            }
            Ok(h)
        }
        None => random_generic_rotation(group, z, seed, 1000, GENERICITY_MARGIN),
    }
}

/// `K = ∩_{g∈G} g h C` for a body `C` with a unique minimal radius.
///
/// The constraint set is the union of the rotated constraints of `C`, which is
/// `G`-stable, so `K` is `G`-invariant. `-hz` stays interior while `hz` is on
/// the boundary, which makes `K` non-symmetric for generic `h`.
pub fn orbit_intersection_body(
    group: &OrthogonalGroup,
    base: &SupportPolytope,
    rotation: Option<DMatrix<f64>>,
    seed: u64,
    probe: &SphericalGrid,
) -> Result<ConstructedBody> {
    require_admissible(group)?;
    let (u1, r, unique) = extremal_direction(base, probe, false)?;
    let h = resolve_rotation(group, &u1, rotation, seed)?;
    let normals = pooled_normals(group, base, &h);
    let support = base
        .support_numbers()
        .iter()
        .copied()
        .cycle()
        .take(normals.len())
        .collect();
    let body = SupportPolytope::new(normals, support)?;
    let witness = mat_vec(&h, &u1);
    let certificate = certify_asymmetry(&body, group, probe, &[witness])?;
    Ok(ConstructedBody {
        body,
        rotation: h,
        extremal_direction: u1,
        extremal_radius: r,
        unique_extremum: unique,
        certificate,
    })
}

/// `G`-invariant body built around a `C` with a unique maximal radius.
///
/// An intersection of rotated copies cannot keep the touching points
/// `g h z` of the other copies, so this takes the convex hull
/// `conv ∪_{g∈G} g h C` instead: `hz` is on its boundary at the circumradius
/// while `-hz` lies strictly inside the circumball. The hull is represented on
/// the pooled normal set with exact support numbers
/// `h_K(w) = max_g h_C((g h)ᵀ w)`.
pub fn orbit_hull_body(
    group: &OrthogonalGroup,
    base: &SupportPolytope,
    rotation: Option<DMatrix<f64>>,
    seed: u64,
    probe: &SphericalGrid,
) -> Result<ConstructedBody> {
    require_admissible(group)?;
    let (u1, r, unique) = extremal_direction(base, probe, true)?;
    let h = resolve_rotation(group, &u1, rotation, seed)?;
    let normals = pooled_normals(group, base, &h);
    let base_support = base_support_oracle(base)?;
    let transposes: Vec<DMatrix<f64>> = group
        .elements()
        .iter()
        .map(|g| (g * &h).transpose())
        .collect();
    let mut support = Vec::with_capacity(normals.len());
    for w in normals.iter() {
        let mut best = f64::NEG_INFINITY;
        for t in &transposes {
            best = best.max(base_support(&mat_vec(t, w))?);
        }
        support.push(best);
    }
    let body = SupportPolytope::new(normals, support)?;
    let witness = mat_vec(&h, &u1);
    let certificate = certify_asymmetry(&body, group, probe, &[witness])?;
    Ok(ConstructedBody {
        body,
        rotation: h,
        extremal_direction: u1,
        extremal_radius: r,
        unique_extremum: unique,
        certificate,
    })
}

type SupportFn = Box<dyn Fn(&[f64]) -> Result<f64>>;

fn base_support_oracle(base: &SupportPolytope) -> Result<SupportFn> {
    if base.dim() <= 3 {
        let vertices = base.facets()?.vertices();
        Ok(Box::new(move |u: &[f64]| {
            Ok(vertices
                .iter()
                .map(|v| dot(v, u))
                .fold(f64::NEG_INFINITY, f64::max))
        }))
    } else {
        let base = base.clone();
        Ok(Box::new(move |u: &[f64]| base.support_eval(u)))
    }
}

/// `D = {x : ⟨g z̃ − z̃, x⟩ ≤ 0 for all g}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletVoronoiCone {
    pub anchor: Vec<f64>,
    /// Outer normals `g z̃ − z̃` of the bounding halfspaces, duplicates merged.
    pub constraints: PointSet,
}

impl DirichletVoronoiCone {
    /// Largest `⟨a, x⟩` over constraints (≤ 0 inside the cone; `-∞` when
    /// there are no constraints).
    pub fn violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|a| dot(a, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.violation(x) <= tol * norm(x)
    }
}

pub fn dirichlet_voronoi_cone(
    group: &OrthogonalGroup,
    anchor: &[f64],
) -> Result<DirichletVoronoiCone> {
    if anchor.len() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            found: anchor.len(),
        });
    }
    let z = normalized(anchor);
    let mut constraints = PointSet::new(group.dim());
    for g in group.elements().iter().skip(1) {
        let gz = mat_vec(g, &z);
        let minus = scaled(&z, -1.0);
        if distance(&gz, &z) < ANCHOR_MARGIN || distance(&gz, &minus) < ANCHOR_MARGIN {
            return Err(Error::NonGeneric(format!(
                "anchor is fixed or reversed by a non-identity element of {}",
                group.label()
            )));
        }
        let a: Vec<f64> = gz.iter().zip(&z).map(|(x, y)| x - y).collect();
        if !constraints.iter().any(|b| distance(b, &a) < 1e-12) {
            constraints.push(&a)?;
        }
    }
    Ok(DirichletVoronoiCone {
        anchor: z,
        constraints,
    })
}

/// Monte-Carlo check that the translates `gD` cover space with disjoint
/// interiors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub samples: usize,
    /// Points lying in no `gD`.
    pub uncovered: usize,
    /// Points lying in the interior of two or more `gD`.
    pub overlaps: usize,
}

impl CoverageReport {
    pub fn passed(&self) -> bool {
        self.uncovered == 0 && self.overlaps == 0
    }
}

pub fn coverage_check(
    group: &OrthogonalGroup,
    cone: &DirichletVoronoiCone,
    samples: usize,
    seed: u64,
) -> CoverageReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inverses: Vec<DMatrix<f64>> = group.elements().iter().map(|g| g.transpose()).collect();
    let mut report = CoverageReport {
        samples,
        uncovered: 0,
        overlaps: 0,
    };
    for _ in 0..samples {
        let x: Vec<f64> = (0..group.dim())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut covered = false;
        let mut interior = 0;
        for inv in &inverses {
            // x ∈ gD  ⟺  g⁻¹x ∈ D
            let y = mat_vec(inv, &x);
            let v = cone.violation(&y) / norm(&y);
            if v <= 1e-12 {
                covered = true;
            }
            if v < -1e-12 {
                interior += 1;
            }
        }
        if !covered {
            report.uncovered += 1;
        }
        if interior > 1 {
            report.overlaps += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{enumerate_group, standard_group, StandardGroup};
    use crate::shapes::shifted_ball;
    use crate::sphere::{build_grid, geodesic_sphere, Scheme};

    fn tetrahedral() -> OrthogonalGroup {
        standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3).unwrap()
    }

    #[test]
    fn haar_samples_are_orthogonal_and_seeded() {
        let g = tetrahedral();
        let a = random_generic_rotation(&g, &[1.0, 0.0, 0.0], 7, 10, GENERICITY_MARGIN).unwrap();
        let b = random_generic_rotation(&g, &[1.0, 0.0, 0.0], 7, 10, GENERICITY_MARGIN).unwrap();
        assert_eq!(a, b);
        let defect = crate::linalg::max_abs_diff(&(a.transpose() * &a), &DMatrix::identity(3, 3));
        assert!(defect < 1e-12);
    }

    #[test]
    fn generic_rotation_acceptance() {
        let c3 = standard_group(&StandardGroup::Cyclic { order: 3 }, 2).unwrap();
        let accepted = |margin: f64| {
            (0..1000)
                .filter(|&s| random_generic_rotation(&c3, &[1.0, 0.0], s, 1, margin).is_ok())
                .count()
        };
        let base = accepted(GENERICITY_MARGIN);
        assert!(base >= 950, "{base}");
        assert!(accepted(2.0 * GENERICITY_MARGIN) <= base);
        let pm = enumerate_group(&[-DMatrix::<f64>::identity(3, 3)], 2, "pm").unwrap();
        assert!(random_generic_rotation(&pm, &[1.0, 0.0, 0.0], 0, 10, 1e-3).is_err());
    }

    #[test]
    fn intersection_of_shifted_ball_is_invariant_and_asymmetric() {
        let g = tetrahedral();
        let probe = build_grid(3, 2000, Scheme::FibonacciSphere, 0).unwrap();
        let base = shifted_ball(geodesic_sphere(3), 2.0, &[0.5, 0.0, 0.0]).unwrap();
        let out = orbit_intersection_body(&g, &base, None, 11, &probe).unwrap();
        assert!(out.unique_extremum);
        assert!(out.certificate.invariance_deviation <= 1e-9);
        assert!(out.certificate.max_gap > 0.05, "{:?}", out.certificate);
        assert!(out.certificate.non_symmetric);
        let c = out.body.facets().unwrap().centroid();
        let stats = out.body.geometry_stats(&probe).unwrap();
        assert!(norm(&c) <= 1e-3 * stats.circumradius);
        // a supplied rotation reproduces the seeded run
        let again =
            orbit_intersection_body(&g, &base, Some(out.rotation.clone()), 999, &probe).unwrap();
        assert_eq!(again.body, out.body);
    }

    #[test]
    fn symmetric_input_gives_symmetric_output() {
        let g = tetrahedral();
        let probe = build_grid(3, 1000, Scheme::FibonacciSphere, 0).unwrap();
        let ball = SupportPolytope::ball_like(geodesic_sphere(2), 1.0).unwrap();
        let out =
            orbit_intersection_body(&g, &ball, Some(DMatrix::identity(3, 3)), 0, &probe).unwrap();
        // geodesic normals are symmetric under x ↦ −x
        assert!(out.certificate.max_gap <= 1e-9);
        assert!(!out.certificate.non_symmetric);
    }

    #[test]
    fn hull_of_shifted_disc_is_asymmetric() {
        let c3 = standard_group(&StandardGroup::Cyclic { order: 3 }, 2).unwrap();
        let probe = build_grid(2, 720, Scheme::UniformAngle, 0).unwrap();
        let normals = build_grid(2, 64, Scheme::UniformAngle, 0)
            .unwrap()
            .nodes()
            .clone();
        let base = shifted_ball(normals, 1.0, &[-0.3, 0.0]).unwrap();
        let out = orbit_hull_body(&c3, &base, None, 4, &probe).unwrap();
        assert!(out.certificate.invariance_deviation <= 1e-9);
        assert!(out.certificate.non_symmetric, "{:?}", out.certificate);
        let hz = mat_vec(&out.rotation, &out.extremal_direction);
        let (r_plus, _) = out.body.radial_eval(&hz).unwrap();
        let (r_minus, _) = out.body.radial_eval(&scaled(&hz, -1.0)).unwrap();
        assert!((r_plus / out.extremal_radius - 1.0).abs() < 1e-2);
        assert!(r_minus < out.extremal_radius);
    }

    #[test]
    fn certificate_examples() {
        let probe = build_grid(3, 500, Scheme::FibonacciSphere, 0).unwrap();
        let trivial = OrthogonalGroup::trivial(3);
        let cube = SupportPolytope::cube(3, 1.0).unwrap();
        assert!(
            certify_asymmetry(&cube, &trivial, &probe, &[])
                .unwrap()
                .max_gap
                <= 1e-10
        );
        let simplex = SupportPolytope::new(
            PointSet::from_rows(
                3,
                &[
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [0.0, 0.0, 1.0],
                    [-1.0, -1.0, -1.0],
                ],
            )
            .unwrap(),
            vec![1.0, 1.0, 1.0, 0.5],
        )
        .unwrap();
        let c = certify_asymmetry(&simplex, &trivial, &probe, &[]).unwrap();
        assert!(c.max_gap > 0.1);
        let mirrored = SupportPolytope::new(
            simplex
                .normals()
                .transformed(&(-DMatrix::<f64>::identity(3, 3))),
            simplex.support_numbers().to_vec(),
        )
        .unwrap();
        let m = certify_asymmetry(&mirrored, &trivial, &probe, &[]).unwrap();
        assert!((m.max_gap - c.max_gap).abs() < 1e-12);
    }

    #[test]
    fn voronoi_sector_of_cyclic_three() {
        let c3 = standard_group(&StandardGroup::Cyclic { order: 3 }, 2).unwrap();
        let cone = dirichlet_voronoi_cone(&c3, &[1.0, 0.0]).unwrap();
        assert_eq!(cone.constraints.len(), 2);
        for k in 0..360 {
            let t = (k as f64 + 0.5).to_radians();
            let inside = cone.contains(&[t.cos(), t.sin()], 1e-12);
            let angle = if t > std::f64::consts::PI {
                t - 2.0 * std::f64::consts::PI
            } else {
                t
            };
            assert_eq!(inside, angle.abs() <= std::f64::consts::PI / 3.0, "{k}");
        }
        assert!(coverage_check(&c3, &cone, 10_000, 1).passed());
        let trivial = OrthogonalGroup::trivial(2);
        let whole = dirichlet_voronoi_cone(&trivial, &[1.0, 0.0]).unwrap();
        assert!(whole.constraints.is_empty());
        assert!(coverage_check(&trivial, &whole, 100, 1).passed());
    }

    #[test]
    fn voronoi_rejects_non_generic_anchor() {
        let g = tetrahedral();
        // (1,1,1) lies on a mirror of the tetrahedral group
        assert!(matches!(
            dirichlet_voronoi_cone(&g, &[1.0, 1.0, 1.0]),
            Err(Error::NonGeneric(_))
        ));
        let cone = dirichlet_voronoi_cone(&g, &[0.9, 0.3, 0.1]).unwrap();
        assert!(coverage_check(&g, &cone, 10_000, 2).passed());
    }
}

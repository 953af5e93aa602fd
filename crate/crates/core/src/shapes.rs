//! Generators for the bodies used by examples, tests and sweeps.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bodies::SupportPolytope;
use crate::error::{Error, Result};
use crate::groups::OrbitPartition;
use crate::linalg::{dot, normalized, PointSet};

/// `{x : ⟨x, v⟩ ≤ r + ⟨c, v⟩}`, a polytope approximating the ball `c + rB^n`.
pub fn shifted_ball(normals: PointSet, radius: f64, center: &[f64]) -> Result<SupportPolytope> {
    if crate::linalg::norm(center) >= radius {
        return Err(Error::InvalidInput(
            "the origin must be interior to the shifted ball".into(),
        ));
    }
    let h = normals
        .iter()
        .map(|v| radius + dot(center, v) / crate::linalg::norm(v))
        .collect();
    SupportPolytope::new(normals, h)
}

/// `K − c`: every support number drops by `⟨c, v_i⟩`.
pub fn translated(body: &SupportPolytope, shift: &[f64]) -> Result<SupportPolytope> {
    let h = body
        .support_numbers()
        .iter()
        .zip(body.normals().iter())
        .map(|(h, v)| h + dot(shift, v))
        .collect();
    SupportPolytope::new(body.normals().clone(), h)
}

/// Moves the exact centroid (dimensions 2 and 3) to the origin.
pub fn centered(body: &SupportPolytope) -> Result<SupportPolytope> {
    let mut k = body.clone();
    for _ in 0..3 {
        let c = k.facets()?.centroid();
        if crate::linalg::norm(&c) <= 1e-13 {
            break;
        }
        let shift: Vec<f64> = c.iter().map(|x| -x).collect();
        k = translated(&k, &shift)?;
    }
    Ok(k)
}

pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if crate::linalg::norm(&v) > 1e-8 {
            return normalized(&v);
        }
    }
}

/// Base normal sets of a few familiar polytopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolytopeFamily {
    Simplex,
    Cube,
    CrossPolytope,
}

fn family_normals(n: usize, family: PolytopeFamily) -> Vec<Vec<f64>> {
    match family {
        PolytopeFamily::Cube => (0..2 * n)
            .map(|k| {
                let mut v = vec![0.0; n];
                v[k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect(),
        PolytopeFamily::CrossPolytope => (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 })
                    .collect()
            })
            .collect(),
        PolytopeFamily::Simplex => {
            // e_1, …, e_n and −(1, …, 1)
            let mut out: Vec<Vec<f64>> = (0..n)
                .map(|k| {
                    let mut v = vec![0.0; n];
                    v[k] = 1.0;
                    v
                })
                .collect();
            out.push(vec![-1.0; n]);
            out
        }
    }
}

/// A polytope with the combinatorics of `family`: normals jittered by
/// `jitter` (radians, roughly) and support numbers drawn from `[0.7, 1.3]`.
/// Facets stay large, so every normal carries a genuine facet.
pub fn random_polytope<R: Rng + ?Sized>(
    n: usize,
    family: PolytopeFamily,
    jitter: f64,
    rng: &mut R,
) -> Result<SupportPolytope> {
    let mut normals = PointSet::new(n);
    for v in family_normals(n, family) {
        let v = normalized(&v);
        let noise = random_unit(n, rng);
        let w: Vec<f64> = v.iter().zip(&noise).map(|(a, b)| a + jitter * b).collect();
        normals.push(&normalized(&w))?;
    }
    let h = (0..normals.len())
        .map(|_| rng.random_range(0.7..1.3))
        .collect();
    SupportPolytope::new(normals, h)
}

/// A random polytope with `facets` random normals (plus the cube normals so
/// that it is bounded) and random support numbers, centred exactly.
pub fn random_centered_polytope<R: Rng + ?Sized>(
    n: usize,
    facets: usize,
    rng: &mut R,
) -> Result<SupportPolytope> {
    let mut normals = PointSet::new(n);
    for v in family_normals(n, PolytopeFamily::Cube) {
        let w: Vec<f64> = v
            .iter()
            .zip(random_unit(n, rng))
            .map(|(a, b)| a + 0.2 * b)
            .collect();
        normals.push(&normalized(&w))?;
    }
    for _ in 0..facets {
        normals.push(&random_unit(n, rng))?;
    }
    let h = (0..normals.len())
        .map(|_| rng.random_range(0.6..1.4))
        .collect();
    centered(&SupportPolytope::new(normals, h)?)
}

/// Support numbers constant on each orbit, drawn from `[lo, hi]`.
pub fn random_orbit_support<R: Rng + ?Sized>(
    partition: &OrbitPartition,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut h = vec![0.0; partition.orbit_of.len()];
    for orbit in &partition.orbits {
        let value = rng.random_range(lo..hi);
        for &i in orbit {
            h[i] = value;
        }
    }
    h
}

/// Half-axes drawn log-uniformly from `[1, max_ratio]`.
pub fn random_box_axes<R: Rng + ?Sized>(n: usize, max_ratio: f64, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| max_ratio.powf(rng.random::<f64>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shifted_ball_support() {
        let normals = crate::sphere::geodesic_sphere(2);
        let k = shifted_ball(normals, 2.0, &[0.5, 0.0, 0.0]).unwrap();
        let i = k
            .normals()
            .iter()
            .position(|v| (v[0] + 1.0).abs() < 1e-12)
            .unwrap();
        assert!((k.support_numbers()[i] - 1.5).abs() < 1e-12);
        assert!(shifted_ball(crate::sphere::geodesic_sphere(1), 1.0, &[1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn centering_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            let k = random_centered_polytope(n, 12, &mut rng).unwrap();
            let c = k.facets().unwrap().centroid();
            assert!(crate::linalg::norm(&c) < 1e-12);
        }
    }

    #[test]
    fn families_keep_all_facets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for family in [
            PolytopeFamily::Simplex,
            PolytopeFamily::Cube,
            PolytopeFamily::CrossPolytope,
        ] {
            for _ in 0..5 {
                let k = random_polytope(3, family, 0.15, &mut rng).unwrap();
                let f = k.facets().unwrap();
                assert!(f.measures().iter().all(|a| *a > 1e-3), "{family:?}");
            }
        }
    }
}

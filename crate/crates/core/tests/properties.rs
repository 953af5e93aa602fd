use std::sync::{Arc, OnceLock};

use dualmink_core::bounds::is_dual_pair;
use dualmink_core::shapes::{random_polytope, PolytopeFamily};
use dualmink_core::{
    build_grid, dual_curvature_measure, dual_mixed_volume, entropy_gradient, entropy_value, orbits,
    q_star, standard_group, symmetrize_density, Scheme, SphericalGrid, StandardGroup, StarBody,
    SupportPolytope, TargetMeasure,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid() -> &'static SphericalGrid {
    static GRID: OnceLock<SphericalGrid> = OnceLock::new();
    GRID.get_or_init(|| build_grid(3, 3000, Scheme::FibonacciSphere, 0).unwrap())
}

fn family(k: u8) -> PolytopeFamily {
    match k % 3 {
        0 => PolytopeFamily::Simplex,
        1 => PolytopeFamily::Cube,
        _ => PolytopeFamily::CrossPolytope,
    }
}

fn body(seed: u64, k: u8) -> SupportPolytope {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_polytope(3, family(k), 0.1, &mut rng).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_volume_is_homogeneous_of_degree_q(
        seed in 0u64..1000, k in 0u8..3, q in 0.3f64..4.0, t in 0.2f64..5.0,
    ) {
        let star = StarBody::unit_ball();
        let k0 = body(seed, k);
        let v = dual_mixed_volume(&k0, &star, q, grid()).unwrap();
        let vt = dual_mixed_volume(&k0.scaled(t).unwrap(), &star, q, grid()).unwrap();
        prop_assert!(rel(vt, t.powf(q) * v) < 1e-12);
    }

    #[test]
    fn dual_volume_is_monotone_under_inclusion(
        seed in 0u64..1000, k in 0u8..3, q in 0.3f64..4.0, grow in 0.0f64..0.5,
    ) {
        let star = StarBody::unit_ball();
        let small = body(seed, k);
        let h: Vec<f64> = small.support_numbers().iter().map(|h| h * (1.0 + grow)).collect();
        let mut bumped = h.clone();
        bumped[0] += grow;
        let large = small.with_support(bumped).unwrap();
        let vs = dual_mixed_volume(&small, &star, q, grid()).unwrap();
        let vl = dual_mixed_volume(&large, &star, q, grid()).unwrap();
        prop_assert!(vl >= vs * (1.0 - 1e-12));
    }

    #[test]
    fn curvature_atoms_partition_the_dual_volume(
        seed in 0u64..1000, k in 0u8..3, q in 0.3f64..4.0,
    ) {
        let star = StarBody::ellipsoid_axes(&[0.8, 1.0, 1.3]).unwrap();
        let k0 = body(seed, k);
        let m = dual_curvature_measure(&k0, &star, q, grid()).unwrap();
        let v = dual_mixed_volume(&k0, &star, q, grid()).unwrap();
        prop_assert!(m.totals.iter().all(|&a| a >= 0.0));
        prop_assert!(rel(m.total(), v) < 1e-12);
    }

    #[test]
    fn entropy_is_scale_invariant(
        seed in 0u64..1000, k in 0u8..3, p in -3.0f64..-0.1, q in 0.3f64..4.0, t in 0.2f64..5.0,
    ) {
        let star = StarBody::unit_ball();
        let k0 = body(seed, k);
        let mu = TargetMeasure::from_density(grid(), k0.normals(), |u| 1.0 + 0.5 * u[0]).unwrap();
        let a = entropy_value(&k0, &mu, &star, p, q, grid()).unwrap();
        let b = entropy_value(&k0.scaled(t).unwrap(), &mu, &star, p, q, grid()).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn entropy_gradient_is_orthogonal_to_support(
        seed in 0u64..1000, k in 0u8..3, p in -3.0f64..-0.1, q in 0.3f64..4.0,
    ) {
        let star = StarBody::unit_ball();
        let k0 = body(seed, k);
        let mu = TargetMeasure::from_density(grid(), k0.normals(), |u| 1.0 + 0.5 * u[1]).unwrap();
        let g = entropy_gradient(&k0, &mu, &star, p, q, grid()).unwrap();
        let pairing: f64 = g.iter().zip(k0.support_numbers()).map(|(g, h)| g * h).sum();
        let scale: f64 = g.iter().zip(k0.support_numbers()).map(|(g, h)| (g * h).abs()).sum();
        prop_assert!(pairing.abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn dual_exponent_is_an_involution(q in 1.0001f64..50.0, n in 2usize..6) {
        let qs = q_star(q, n).unwrap();
        prop_assert!(qs > 1.0);
        prop_assert!(is_dual_pair(q, qs * (1.0 - 1e-9), n));
        prop_assert!(!is_dual_pair(q, qs * (1.0 + 1e-9), n));
        let back = q_star(qs, n).unwrap();
        prop_assert!(rel(back, q) < 1e-12);
    }

    #[test]
    fn symmetrized_density_is_invariant(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
        let group = standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3).unwrap();
        let f = |u: &[f64]| (1.0 + u[0]).powi(2) + u[1] * u[2];
        let sym = symmetrize_density(&group, &f);
        let u = [x, y, z];
        let reference = sym(&u);
        for g in group.elements() {
            let gu: Vec<f64> = (0..3).map(|r| (0..3).map(|c| g[(r, c)] * u[c]).sum()).collect();
            prop_assert!((sym(&gu) - reference).abs() < 1e-12);
        }
    }
}

#[test]
fn orbit_sizes_divide_the_group_order() {
    let group = Arc::new(standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3).unwrap());
    let dirs = dualmink_core::stable_directions(&group, 200).unwrap();
    let partition = orbits(&group, &dirs, 1e-6).unwrap();
    let covered: usize = partition.orbits.iter().map(|o| o.len()).sum();
    assert_eq!(covered, dirs.len());
    for o in &partition.orbits {
        assert_eq!(group.order() % o.len(), 0, "orbit of size {}", o.len());
    }
}

//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use dualmink_core::{
    build_grid, stable_directions, standard_group, OrthogonalGroup, PointSet, ProblemSpec, Result,
    Scheme, SphericalGrid, StandardGroup, StarBody, SupportPolytope, TargetMeasure,
};

pub fn tetrahedral() -> Arc<OrthogonalGroup> {
    Arc::new(
        standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3)
            .expect("simplex symmetry group of R^3"),
    )
}

pub struct Fixture {
    pub grid: SphericalGrid,
    pub normals: PointSet,
    pub body: SupportPolytope,
    pub mu: TargetMeasure,
}

/// A lumpy invariant polytope on `directions` normals with a constant target
/// measure, discretised on a symmetrised grid of `nodes` points.
pub fn fixture(directions: usize, nodes: usize) -> Result<Fixture> {
    let g = tetrahedral();
    let grid = build_grid(3, nodes, Scheme::FibonacciSphere, 0)?.symmetrized(&g)?;
    let normals = stable_directions(&g, directions)?;
    let h = normals
        .iter()
        .map(|v| 1.0 + 0.2 * v[0] * v[1] * v[2])
        .collect();
    let body = SupportPolytope::new(normals.clone(), h)?;
    let mu = TargetMeasure::from_density(&grid, &normals, |_| 1.0 / 3.0)?;
    Ok(Fixture {
        grid,
        normals,
        body,
        mu,
    })
}

/// Ball fixed point: constant density `1/3`, `p = −1`, `q = 2`.
pub fn ball_problem(directions: usize, nodes: usize) -> Result<ProblemSpec> {
    let g = tetrahedral();
    let normals = stable_directions(&g, directions)?;
    let grid = build_grid(3, nodes, Scheme::FibonacciSphere, 0)?.symmetrized(&g)?;
    ProblemSpec::new(
        -1.0,
        2.0,
        g,
        StarBody::unit_ball(),
        normals,
        grid,
        |_| 1.0 / 3.0,
        false,
    )
}

//! Numerical tools for the L_p dual Minkowski problem with symmetry.
//!
//! Given a target measure `μ` on the sphere that is invariant under a finite
//! group `G ⊂ O(n)`, the solver looks for a `G`-invariant convex body `K`
//! whose `(p, q)`-dual curvature measure relative to a star body `Q` equals
//! `μ`. Bodies are discretised as polytopes with fixed facet normals and the
//! measure is discretised by a spherical quadrature grid.

pub mod bodies;
pub mod bounds;
pub mod constructions;
pub mod error;
pub mod groups;
pub mod linalg;
pub mod measures;
pub mod shapes;
pub mod solver;
pub mod sphere;

pub use bodies::{BodyFile, FacetComplex, GeometryStats, StarBody, SupportPolytope};
pub use bounds::{
    admissible_exponent_s, box_bounds, box_dual_volume_mc, bs_dual_product, q_star,
    santalo_product, BoundsReport, BoxSpec, IntegrabilityExponent, SantaloReport,
};
pub use constructions::{
    certify_asymmetry, coverage_check, dirichlet_voronoi_cone, orbit_hull_body,
    orbit_intersection_body, random_generic_rotation, AsymmetryCertificate, ConstructedBody,
    CoverageReport, DirichletVoronoiCone,
};
pub use error::{Error, Result};
pub use groups::{
    certify, enumerate_group, invariant_directions, orbits, standard_group, symmetrize_density,
    GroupCertificate, OrbitPartition, OrthogonalGroup, StandardGroup,
};
pub use linalg::{compensated_sum, CompensatedSum, PointSet};
pub use measures::{
    dual_curvature_measure, dual_curvature_via_boundary, dual_mixed_volume, entropy_gradient,
    entropy_value, lp_dual_curvature_measure, DualKernel, Entropy, FacetMeasure, TargetMeasure,
};
pub use solver::{
    assemble_solution, euler_lagrange_check, minimize_entropy, rms_radial_error, solve,
    stable_directions, DirectionRule, Minimization, OrbitParametrization, ProblemSpec,
    SolutionReport, SolverConfig, SolverStatus, TraceRow,
};
pub use sphere::{build_grid, integrate, kappa, GridSpec, Scheme, SphericalGrid};

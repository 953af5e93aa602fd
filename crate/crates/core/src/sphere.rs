//! Deterministic quadrature on the unit sphere `S^{n-1}`.
//!
//! Every integral in the crate (dual mixed volumes, curvature measures, the
//! entropy functional) is a weighted sum over the nodes of a [`SphericalGrid`].
//! Three schemes are available:
//!
//! * `uniform-angle` (n = 2): equally spaced angles, exact weights `2π/N`;
//! * `fibonacci-sphere` (n = 3): golden-angle spiral, equal weights `4π/N`;
//! * `monte-carlo` (any n): seeded Gaussian directions, weights `α_n/N`.
//!
//! Grids can be made exactly stable under a finite group with
//! [`SphericalGrid::symmetrized`]: the nodes falling in one fundamental cell are
//! kept and transported by every group element.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::OrthogonalGroup;
use crate::linalg::{compensated_sum, dot, mat_vec, normalized, PointSet};

pub const MIN_NODES: usize = 8;

/// Volume `κ_n` of the unit ball of `R^n`.
pub fn kappa(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * kappa(n - 2),
    }
}

/// Surface area of the unit sphere in `R^k`, i.e. `k κ_k`.
///
/// Counting conventions: `α_1 = 2` (two points) and `α_0 = 1`.
pub fn alpha(k: usize) -> f64 {
    match k {
        0 => 1.0,
        _ => k as f64 * kappa(k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    FibonacciSphere,
    UniformAngle,
    MonteCarlo,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::FibonacciSphere => "fibonacci-sphere",
            Scheme::UniformAngle => "uniform-angle",
            Scheme::MonteCarlo => "monte-carlo",
        }
    }

    /// The default scheme for a dimension.
    pub fn default_for(n: usize) -> Scheme {
        match n {
            2 => Scheme::UniformAngle,
            3 => Scheme::FibonacciSphere,
            _ => Scheme::MonteCarlo,
        }
    }
}

/// Reproducible description of a grid, as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub scheme: Option<Scheme>,
    pub node_count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Make the grid stable under the run's symmetry group.
    #[serde(default)]
    pub symmetrize: bool,
}

impl GridSpec {
    pub fn build(&self, n: usize, group: Option<&OrthogonalGroup>) -> Result<SphericalGrid> {
        let scheme = self.scheme.unwrap_or(Scheme::default_for(n));
        let grid = build_grid(n, self.node_count, scheme, self.seed)?;
        match (self.symmetrize, group) {
            (true, Some(g)) => grid.symmetrized(g),
            _ => Ok(grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalGrid {
    nodes: PointSet,
    weights: Vec<f64>,
    scheme: Scheme,
    seed: u64,
    /// Label and order of the group the grid was symmetrized under, if any.
    symmetry: Option<(String, usize)>,
}

/// Builds a quadrature grid on `S^{n-1}`.
pub fn build_grid(n: usize, node_count: usize, scheme: Scheme, seed: u64) -> Result<SphericalGrid> {
    if n < 2 {
        return Err(Error::UnsupportedScheme {
            n,
            scheme: scheme.name(),
        });
    }
    if node_count < MIN_NODES {
        return Err(Error::TooFewNodes {
            requested: node_count,
            minimum: MIN_NODES,
        });
    }
    let mut nodes = PointSet::new(n);
    match scheme {
        Scheme::UniformAngle => {
            if n != 2 {
                return Err(Error::UnsupportedScheme {
                    n,
                    scheme: scheme.name(),
                });
            }
            for i in 0..node_count {
                // Half-step offset keeps nodes off the coordinate axes.
                let t = 2.0 * PI * (i as f64 + 0.5) / node_count as f64;
                nodes.push(&[t.cos(), t.sin()])?;
            }
        }
        Scheme::FibonacciSphere => {
            if n != 3 {
                return Err(Error::UnsupportedScheme {
                    n,
                    scheme: scheme.name(),
                });
            }
            let golden = PI * (3.0 - 5f64.sqrt());
            for i in 0..node_count {
                let y = 1.0 - (2.0 * i as f64 + 1.0) / node_count as f64;
                let r = (1.0 - y * y).max(0.0).sqrt();
                let t = golden * i as f64;
                nodes.push(&normalized(&[r * t.cos(), y, r * t.sin()]))?;
            }
        }
        Scheme::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = vec![0.0; n];
            while nodes.len() < node_count {
                for x in p.iter_mut() {
                    *x = StandardNormal.sample(&mut rng);
                }
                if crate::linalg::norm(&p) > 1e-12 {
                    nodes.push(&normalized(&p))?;
                }
            }
        }
    }
    let w = alpha(n) / node_count as f64;
    Ok(SphericalGrid {
        nodes,
        weights: vec![w; node_count],
        scheme,
        seed,
        symmetry: None,
    })
}

impl SphericalGrid {
    /// Assembles a grid from explicit nodes and weights.
    pub fn from_parts(nodes: PointSet, weights: Vec<f64>, scheme: Scheme) -> Result<Self> {
        if nodes.len() != weights.len() {
            return Err(Error::InvalidInput("node and weight counts differ".into()));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput(format!("weight {i} is not positive")));
        }
        for (i, u) in nodes.iter().enumerate() {
            if (crate::linalg::norm(u) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "node {i} is not a unit vector"
                )));
            }
        }
        Ok(Self {
            nodes,
            weights,
            scheme,
            seed: 0,
            symmetry: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &PointSet {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &[f64] {
        self.nodes.get(i)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn symmetry(&self) -> Option<(&str, usize)> {
        self.symmetry.as_ref().map(|(l, o)| (l.as_str(), *o))
    }

    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// Largest angular distance from a probe direction to its nearest node,
    /// estimated with a seeded Monte-Carlo probe set.
    pub fn covering_angle_estimate(&self, probes: usize, seed: u64) -> f64 {
        let probe = build_grid(self.dim(), probes.max(MIN_NODES), Scheme::MonteCarlo, seed)
            .expect("monte-carlo grid is valid in every dimension");
        probe
            .nodes
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|p| {
                let best = self
                    .nodes
                    .iter()
                    .map(|u| dot(u, p))
                    .fold(f64::NEG_INFINITY, f64::max);
                best.clamp(-1.0, 1.0).acos()
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Restriction to one fundamental cell of `group`, transported by every
    /// element. The result is stable under the group as a set of nodes and
    /// carries equal weights summing to the original total.
    pub fn symmetrized(&self, group: &OrthogonalGroup) -> Result<SphericalGrid> {
        if group.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: group.dim(),
            });
        }
        let anchor = generic_anchor(group)?;
        let images: Vec<Vec<f64>> = group
            .elements()
            .iter()
            .skip(1)
            .map(|g| mat_vec(g, &anchor))
            .collect();
        let cell: Vec<&[f64]> = self
            .nodes
            .iter()
            .filter(|u| {
                let own = dot(u, &anchor);
                images.iter().all(|a| own > dot(u, a))
            })
            .collect();
        if cell.is_empty() {
            return Err(Error::Degenerate(
                "no grid node falls in the fundamental cell".into(),
            ));
        }
        let mut nodes = PointSet::new(self.dim());
        for g in group.elements() {
            for u in &cell {
                nodes.push(&normalized(&mat_vec(g, u)))?;
            }
        }
        let w = self.total_weight() / nodes.len() as f64;
        Ok(SphericalGrid {
            weights: vec![w; nodes.len()],
            nodes,
            scheme: self.scheme,
            seed: self.seed,
            symmetry: Some((group.label().to_string(), group.order())),
        })
    }
}

/// A unit vector moved by every non-identity element of the group.
pub(crate) fn generic_anchor(group: &OrthogonalGroup) -> Result<Vec<f64>> {
    let n = group.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a11c);
    for _ in 0..64 {
        let p: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = normalized(&p);
        let moved = group.elements().iter().skip(1).all(|g| {
            let gz = mat_vec(g, &z);
            crate::linalg::distance(&gz, &z) > 1e-3
        });
        if moved {
            return Ok(z);
        }
    }
    Err(Error::NonGeneric(
        "could not find a direction moved by every non-identity element".into(),
    ))
}

/// `Σ_i w_i f(u_i)` with order-stable compensated summation.
///
/// `f` is evaluated at the nodes in parallel; the reduction runs in node order,
/// so results do not depend on the thread count.
pub fn integrate<F>(grid: &SphericalGrid, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values = evaluate_at_nodes(grid, &f)?;
    Ok(compensated_sum(
        values.iter().zip(grid.weights()).map(|(v, w)| v * w),
    ))
}

/// Values of `f` at every node, failing on the first non-finite one.
pub fn evaluate_at_nodes<F>(grid: &SphericalGrid, f: &F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| f(grid.node(i)))
        .collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index,
            value: values[index],
        });
    }
    Ok(values)
}

/// `∫_{R^k} (t + |z|)^{-p} dz` evaluated in radial coordinates,
/// `α_k ∫_0^∞ (t + r)^{-p} r^{k-1} dr`, by composite Gauss–Legendre quadrature
/// after mapping `r = t s / (1 - s)` onto `[0, 1)`.
pub fn radial_power_integral(k: usize, p: f64, t: f64) -> Result<f64> {
    if k == 0 || !(p > k as f64) || !(t > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radial integral needs k >= 1, p > k and t > 0 (k={k}, p={p}, t={t})"
        )));
    }
    // After the substitution the integrand is t^{k-p} s^{k-1} (1-s)^{p-k-1}.
    let kf = k as f64;
    let integrand = |s: f64| s.powf(kf - 1.0) * (1.0 - s).powf(p - kf - 1.0);
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189,
        0.478_628_670_499_366,
        0.568_888_888_888_889,
        0.478_628_670_499_366,
        0.236_926_885_056_189,
    ];
    let panels = 400;
    let h = 1.0 / panels as f64;
    let total = compensated_sum((0..panels).flat_map(|j| {
        let mid = (j as f64 + 0.5) * h;
        NODES
            .iter()
            .zip(WEIGHTS)
            .map(move |(x, w)| 0.5 * h * w * integrand(mid + 0.5 * h * x))
    }));
    Ok(alpha(k) * t.powf(kf - p) * total)
}

/// Icosahedral geodesic sphere of the given frequency: `10 ν² + 2` vertices.
pub fn geodesic_sphere(frequency: usize) -> PointSet {
    let f = frequency.max(1);
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let v: Vec<[f64; 3]> = vec![
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let mut out = PointSet::new(3);
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for face in faces {
        let [a, b, c] = face.map(|i| v[i]);
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let p: Vec<f64> = (0..3)
                    .map(|d| (a[d] * i as f64 + b[d] * j as f64 + c[d] * k as f64) / f as f64)
                    .collect();
                let p = normalized(&p);
                let q = [p[0], p[1], p[2]];
                if !seen.iter().any(|s| crate::linalg::distance(s, &q) < 1e-9) {
                    seen.push(q);
                    out.push(&q).expect("dimension 3");
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_constants() {
        assert!((kappa(2) - PI).abs() < 1e-15);
        assert!((kappa(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((alpha(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert_eq!(alpha(1), 2.0);
        assert_eq!(alpha(0), 1.0);
        for n in 1..8 {
            assert!((alpha(n) - n as f64 * kappa(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_angle_grid_is_exact() {
        let g = build_grid(2, 360, Scheme::UniformAngle, 0).unwrap();
        assert_eq!(g.len(), 360);
        for w in g.weights() {
            assert!((w - 2.0 * PI / 360.0).abs() < 1e-15);
        }
        assert!((g.total_weight() - 2.0 * PI).abs() < 1e-9);
        for u in g.nodes().iter() {
            assert!((crate::linalg::norm(u) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fibonacci_total_weight() {
        let g = build_grid(3, 1000, Scheme::FibonacciSphere, 0).unwrap();
        assert!((g.total_weight() / (4.0 * PI) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn monte_carlo_total_weight_in_four_dimensions() {
        let g = build_grid(4, 10_000, Scheme::MonteCarlo, 7).unwrap();
        assert!((g.total_weight() / (2.0 * PI * PI) - 1.0).abs() < 1e-2);
        let again = build_grid(4, 10_000, Scheme::MonteCarlo, 7).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn rejects_unsupported_pairs() {
        assert!(matches!(
            build_grid(3, 100, Scheme::UniformAngle, 0),
            Err(Error::UnsupportedScheme { .. })
        ));
        assert!(matches!(
            build_grid(2, 100, Scheme::FibonacciSphere, 0),
            Err(Error::UnsupportedScheme { .. })
        ));
        assert!(matches!(
            build_grid(3, 4, Scheme::FibonacciSphere, 0),
            Err(Error::TooFewNodes { .. })
        ));
    }

    #[test]
    fn integrate_examples() {
        let g = build_grid(3, 20_000, Scheme::FibonacciSphere, 0).unwrap();
        let one = integrate(&g, |_| 1.0).unwrap();
        assert!((one - 4.0 * PI).abs() < 1e-9);
        let sq = integrate(&g, |u| u[0] * u[0]).unwrap();
        assert!((sq / (4.0 * PI / 3.0) - 1.0).abs() < 1e-2);
        let odd = integrate(&g, |u| u[0]).unwrap();
        assert!(odd.abs() < 1e-3);
    }

    #[test]
    fn integrate_reports_non_finite_node() {
        let g = build_grid(2, 16, Scheme::UniformAngle, 0).unwrap();
        let err = integrate(&g, |u| {
            if u[0] > 0.98 && u[1] > 0.0 {
                f64::NAN
            } else {
                1.0
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 0, .. }));
    }

    #[test]
    fn geodesic_sphere_counts() {
        for (f, count) in [(1, 12), (2, 42), (3, 92), (8, 642)] {
            assert_eq!(geodesic_sphere(f).len(), count);
        }
    }

    #[test]
    fn radial_integral_rejects_divergent_exponents() {
        assert!(radial_power_integral(2, 2.0, 1.0).is_err());
        assert!(radial_power_integral(1, 2.0, 0.0).is_err());
    }
}

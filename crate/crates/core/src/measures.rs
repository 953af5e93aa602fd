//! Dual mixed volumes, facet-atomised dual curvature measures, target
//! measures and the scale-invariant entropy functional.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{StarBody, SupportPolytope, DEGENERATE_CELL};
use crate::error::{Error, Result};
use crate::groups::OrbitPartition;
use crate::linalg::{compensated_sum, dot, CompensatedSum, PointSet};
use crate::sphere::SphericalGrid;

/// Per-facet masses of a measure concentrated on the normals of a polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetMeasure {
    pub totals: Vec<f64>,
    /// Which quadrature produced the totals.
    pub grid_id: String,
}

impl FacetMeasure {
    pub fn total(&self) -> f64 {
        compensated_sum(self.totals.iter().copied())
    }

    /// `∫ g dC = Σ_i g(v_i) C_i`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, normals: &PointSet, g: F) -> f64 {
        compensated_sum(
            self.totals
                .iter()
                .zip(normals.iter())
                .map(|(c, v)| c * g(v)),
        )
    }
}

pub(crate) fn grid_id(grid: &SphericalGrid) -> String {
    let mut id = format!("{}:{}:{}", grid.scheme().name(), grid.len(), grid.seed());
    if let Some((label, order)) = grid.symmetry() {
        id.push_str(&format!(":{label}/{order}"));
    }
    id
}

fn check_q(q: f64) -> Result<()> {
    if q == 0.0 || !q.is_finite() {
        return Err(Error::Hypothesis(format!(
            "q must be finite and non-zero, got {q}"
        )));
    }
    Ok(())
}

/// Node weights `w_u ρ_Q(u)^{n-q} / n` for a fixed grid, star body and `q`,
/// so that `Ṽ_q(K, Q) = Σ_u kernel_u ρ_K(u)^q`.
#[derive(Debug, Clone)]
pub struct DualKernel {
    grid: SphericalGrid,
    q: f64,
    node_weights: Vec<f64>,
    grid_id: String,
}

/// Dual mixed volume together with its facet atoms, from one pass over the
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub volume: f64,
    pub atoms: Vec<f64>,
    /// Number of grid nodes assigned to each facet.
    pub node_counts: Vec<usize>,
}

impl DualKernel {
    pub fn new(grid: &SphericalGrid, star: &StarBody, q: f64) -> Result<Self> {
        check_q(q)?;
        let n = grid.dim() as f64;
        let rho_q = star.radial_at_nodes(grid)?;
        let node_weights = rho_q
            .iter()
            .zip(grid.weights())
            .map(|(r, w)| w * r.powf(n - q) / n)
            .collect();
        Ok(Self {
            grid: grid.clone(),
            q,
            node_weights,
            grid_id: grid_id(grid),
        })
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn grid_id(&self) -> &str {
        &self.grid_id
    }

    pub fn evaluate(&self, body: &SupportPolytope) -> Result<DualEvaluation> {
        if body.dim() != self.grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.dim(),
                found: body.dim(),
            });
        }
        let rho = body.radial_at_nodes(&self.grid)?;
        let contributions: Vec<f64> = rho
            .par_iter()
            .zip(&self.node_weights)
            .map(|(&(r, _), w)| w * r.powf(self.q))
            .collect();
        if let Some(index) = contributions.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                index,
                value: contributions[index],
            });
        }
        let mut bins = vec![CompensatedSum::new(); body.len()];
        let mut node_counts = vec![0; body.len()];
        let mut volume = CompensatedSum::new();
        for (c, &(_, facet)) in contributions.iter().zip(&rho) {
            volume.add(*c);
            bins[facet].add(*c);
            node_counts[facet] += 1;
        }
        Ok(DualEvaluation {
            volume: volume.value(),
            atoms: bins.iter().map(|b| b.value()).collect(),
            node_counts,
        })
    }
}

/// `Ṽ_q(K, Q) = (1/n) ∫ ρ_K^q ρ_Q^{n-q} du`.
pub fn dual_mixed_volume(
    body: &SupportPolytope,
    star: &StarBody,
    q: f64,
    grid: &SphericalGrid,
) -> Result<f64> {
    Ok(DualKernel::new(grid, star, q)?.evaluate(body)?.volume)
}

/// `C̃_q(K, Q; ·)` atomised on the facet normals: each node goes to the facet
/// hit by its ray.
pub fn dual_curvature_measure(
    body: &SupportPolytope,
    star: &StarBody,
    q: f64,
    grid: &SphericalGrid,
) -> Result<FacetMeasure> {
    let kernel = DualKernel::new(grid, star, q)?;
    Ok(FacetMeasure {
        totals: kernel.evaluate(body)?.atoms,
        grid_id: kernel.grid_id,
    })
}

/// `C̃_{p,q}(K, Q; ·)`: the atoms of `C̃_q` weighted by `h_i^{-p}`.
pub fn lp_dual_curvature_measure(
    body: &SupportPolytope,
    star: &StarBody,
    p: f64,
    q: f64,
    grid: &SphericalGrid,
) -> Result<FacetMeasure> {
    let mut m = dual_curvature_measure(body, star, q, grid)?;
    weight_by_support(&mut m.totals, body.support_numbers(), p);
    Ok(m)
}

fn weight_by_support(atoms: &mut [f64], h: &[f64], p: f64) {
    if p != 0.0 {
        for (a, h) in atoms.iter_mut().zip(h) {
            *a *= h.powf(-p);
        }
    }
}

/// Dunavant's 7-point rule on the reference triangle, exact for degree 5:
/// barycentric coordinates and weights summing to 1.
const TRIANGLE_RULE: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [0.059715871789770, 0.470142064105115, 0.470142064105115],
        0.132394152788506,
    ),
    (
        [0.470142064105115, 0.059715871789770, 0.470142064105115],
        0.132394152788506,
    ),
    (
        [0.470142064105115, 0.470142064105115, 0.059715871789770],
        0.132394152788506,
    ),
    (
        [0.797426985353087, 0.101286507323456, 0.101286507323456],
        0.125939180544827,
    ),
    (
        [0.101286507323456, 0.797426985353087, 0.101286507323456],
        0.125939180544827,
    ),
    (
        [0.101286507323456, 0.101286507323456, 0.797426985353087],
        0.125939180544827,
    ),
];

/// 5-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

fn triangle_integral<F: Fn(&[f64]) -> f64>(a: &[f64], b: &[f64], c: &[f64], f: &F) -> f64 {
    let ab: Vec<f64> = (0..3).map(|k| b[k] - a[k]).collect();
    let ac: Vec<f64> = (0..3).map(|k| c[k] - a[k]).collect();
    let cross = [
        ab[1] * ac[2] - ab[2] * ac[1],
        ab[2] * ac[0] - ab[0] * ac[2],
        ab[0] * ac[1] - ab[1] * ac[0],
    ];
    let area = 0.5 * dot(&cross, &cross).sqrt();
    let mut acc = CompensatedSum::new();
    for (bary, w) in TRIANGLE_RULE {
        let x: Vec<f64> = (0..3)
            .map(|k| bary[0] * a[k] + bary[1] * b[k] + bary[2] * c[k])
            .collect();
        acc.add(w * f(&x));
    }
    area * acc.value()
}

/// Splits a triangle into `m²` congruent pieces and sums the 7-point rule.
fn subdivided_triangle_integral<F: Fn(&[f64]) -> f64>(
    a: &[f64],
    b: &[f64],
    c: &[f64],
    m: usize,
    f: &F,
) -> f64 {
    let point = |i: usize, j: usize| -> Vec<f64> {
        let (s, t) = (i as f64 / m as f64, j as f64 / m as f64);
        (0..3)
            .map(|k| a[k] + s * (b[k] - a[k]) + t * (c[k] - a[k]))
            .collect()
    };
    let mut acc = CompensatedSum::new();
    for i in 0..m {
        for j in 0..m - i {
            acc.add(triangle_integral(
                &point(i, j),
                &point(i + 1, j),
                &point(i, j + 1),
                f,
            ));
            if i + j + 1 < m {
                acc.add(triangle_integral(
                    &point(i + 1, j),
                    &point(i + 1, j + 1),
                    &point(i, j + 1),
                    f,
                ));
            }
        }
    }
    acc.value()
}

/// `C̃_q(K, Q; ·)` from the boundary: atom `i` is
/// `(1/n) h_i ∫_{F_i} ρ_Q(x)^{n-q} dA`, integrated over the facet itself
/// (`n = 3`: triangulated polygon; `n = 2`: edge) with no spherical grid.
/// `subdivisions` refines each fan triangle (or edge) into that many pieces
/// per side.
pub fn dual_curvature_via_boundary(
    body: &SupportPolytope,
    star: &StarBody,
    q: f64,
    subdivisions: usize,
) -> Result<FacetMeasure> {
    check_q(q)?;
    let n = body.dim();
    let facets = body.facets()?;
    let m = subdivisions.max(1);
    let exponent = n as f64 - q;
    let integrand = |x: &[f64]| star.radial(x).powf(exponent);
    let h = body.support_numbers();
    let totals = facets
        .cells()
        .par_iter()
        .zip(facets.measures())
        .enumerate()
        .map(|(i, (cell, &measure))| {
            if measure <= DEGENERATE_CELL || cell.is_empty() {
                return 0.0;
            }
            let integral = if n == 2 {
                let (a, b) = (&cell[0], &cell[1]);
                let mut acc = CompensatedSum::new();
                for k in 0..m {
                    let (s0, s1) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
                    for (t, w) in GAUSS5 {
                        let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * t;
                        let x = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                        acc.add(0.5 * (s1 - s0) * w * integrand(&x));
                    }
                }
                measure * acc.value()
            } else {
                let mut acc = CompensatedSum::new();
                for t in 1..cell.len() - 1 {
                    acc.add(subdivided_triangle_integral(
                        &cell[0],
                        &cell[t],
                        &cell[t + 1],
                        m,
                        &integrand,
                    ));
                }
                acc.value()
            };
            h[i] * integral / n as f64
        })
        .collect();
    Ok(FacetMeasure {
        totals,
        grid_id: format!("boundary:{m}"),
    })
}

/// A target measure `μ` discretised on the normals of the unknown body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMeasure {
    /// Mass `μ_i` attached to normal `i`.
    pub atoms: Vec<f64>,
    pub total: f64,
    pub grid_id: String,
}

impl TargetMeasure {
    /// Bins `w_u f(u)` over grid nodes into the nearest normal (largest
    /// `⟨u, v_i⟩`, smallest index on ties).
    pub fn from_density<F>(grid: &SphericalGrid, normals: &PointSet, density: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        if normals.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                found: normals.dim(),
            });
        }
        let values = crate::sphere::evaluate_at_nodes(grid, &density)?;
        if let Some(index) = values.iter().position(|v| *v < 0.0) {
            return Err(Error::Hypothesis(format!(
                "density is negative ({}) at node {index}",
                values[index]
            )));
        }
        let nearest: Vec<usize> = (0..grid.len())
            .into_par_iter()
            .map(|j| nearest_normal(normals, grid.node(j)))
            .collect();
        let mut bins = vec![CompensatedSum::new(); normals.len()];
        for (j, &i) in nearest.iter().enumerate() {
            bins[i].add(grid.weights()[j] * values[j]);
        }
        Self::from_atoms(bins.iter().map(|b| b.value()).collect(), grid_id(grid))
    }

    pub fn from_atoms(atoms: Vec<f64>, grid_id: String) -> Result<Self> {
        if let Some(index) = atoms.iter().position(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Hypothesis(format!(
                "measure atom {index} is {}",
                atoms[index]
            )));
        }
        let total = compensated_sum(atoms.iter().copied());
        if total <= 0.0 {
            return Err(Error::Hypothesis("target measure has zero mass".into()));
        }
        Ok(Self {
            atoms,
            total,
            grid_id,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

fn nearest_normal(normals: &PointSet, u: &[f64]) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, v) in normals.iter().enumerate() {
        let d = dot(u, v);
        if d > best {
            best = d;
            arg = i;
        }
    }
    arg
}

/// Value and gradient of the entropy functional
/// `Φ(h) = (1/p) log Σ_i h_i^p μ_i − (1/q) log Ṽ_q(K_h, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyEvaluation {
    pub value: f64,
    /// `∂Φ/∂h_i`.
    pub gradient: Vec<f64>,
    pub dual_volume: f64,
    /// Atoms of `C̃_q(K_h, Q; ·)`.
    pub atoms: Vec<f64>,
    /// `Σ_i h_i^p μ_i`.
    pub weighted_mass: f64,
    pub node_counts: Vec<usize>,
}

/// Entropy functional on bodies with a fixed normal set.
#[derive(Debug, Clone)]
pub struct Entropy<'a> {
    kernel: &'a DualKernel,
    mu: &'a TargetMeasure,
    p: f64,
}

impl<'a> Entropy<'a> {
    pub fn new(kernel: &'a DualKernel, mu: &'a TargetMeasure, p: f64) -> Result<Self> {
        if !(p < 0.0 && p.is_finite()) {
            return Err(Error::Hypothesis(format!("entropy needs p < 0, got {p}")));
        }
        if kernel.q() <= 0.0 {
            return Err(Error::Hypothesis(format!(
                "entropy needs q > 0, got {}",
                kernel.q()
            )));
        }
        Ok(Self { kernel, mu, p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.kernel.q()
    }

    pub fn evaluate(&self, body: &SupportPolytope) -> Result<EntropyEvaluation> {
        let h = body.support_numbers();
        if h.len() != self.mu.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mu.len(),
                found: h.len(),
            });
        }
        let (p, q) = (self.p, self.q());
        let dual = self.kernel.evaluate(body)?;
        let weighted: Vec<f64> = h
            .iter()
            .zip(&self.mu.atoms)
            .map(|(h, m)| h.powf(p) * m)
            .collect();
        let s = compensated_sum(weighted.iter().copied());
        let value = s.ln() / p - dual.volume.ln() / q;
        if !value.is_finite() {
            return Err(Error::NonFinite { index: 0, value });
        }
        let gradient = (0..h.len())
            .map(|i| weighted[i] / (h[i] * s) - dual.atoms[i] / (h[i] * dual.volume))
            .collect();
        Ok(EntropyEvaluation {
            value,
            gradient,
            dual_volume: dual.volume,
            atoms: dual.atoms,
            weighted_mass: s,
            node_counts: dual.node_counts,
        })
    }
}

/// Φ for a body, target measure and star body on a given grid.
pub fn entropy_value(
    body: &SupportPolytope,
    mu: &TargetMeasure,
    star: &StarBody,
    p: f64,
    q: f64,
    grid: &SphericalGrid,
) -> Result<f64> {
    let kernel = DualKernel::new(grid, star, q)?;
    Ok(Entropy::new(&kernel, mu, p)?.evaluate(body)?.value)
}

/// `∂Φ/∂h_i = h_i^{p-1} μ_i / Σ_j h_j^p μ_j − C̃_{q,i} / (h_i Ṽ_q)`.
pub fn entropy_gradient(
    body: &SupportPolytope,
    mu: &TargetMeasure,
    star: &StarBody,
    p: f64,
    q: f64,
    grid: &SphericalGrid,
) -> Result<Vec<f64>> {
    let kernel = DualKernel::new(grid, star, q)?;
    Ok(Entropy::new(&kernel, mu, p)?.evaluate(body)?.gradient)
}

/// Gradient with respect to one shared value per orbit: the sum over orbit
/// members.
pub fn orbit_summed(gradient: &[f64], partition: &OrbitPartition) -> Vec<f64> {
    partition
        .orbits
        .iter()
        .map(|o| compensated_sum(o.iter().map(|&i| gradient[i])))
        .collect()
}

/// Both sides of the equi-affine identity
/// `∫ g dC̃_q(φK, φQ) = ∫ g(φ^{-t}v / |φ^{-t}v|) dC̃_q(K, Q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Largest condition number accepted for the linear map.
pub const MAX_CONDITION: f64 = 1e6;

/// Evaluates both sides of the equi-affine identity, the left on `grid_a`
/// and the right on `grid_b`.
pub fn affine_invariance_check<G>(
    body: &SupportPolytope,
    star: &StarBody,
    q: f64,
    phi: &DMatrix<f64>,
    g: G,
    grid_a: &SphericalGrid,
    grid_b: &SphericalGrid,
) -> Result<AffineCheck>
where
    G: Fn(&[f64]) -> f64,
{
    let n = body.dim();
    if phi.nrows() != n || phi.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phi.nrows(),
        });
    }
    let det = phi.determinant();
    if (det - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnimodular { det });
    }
    let sv = phi.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let image = body.linear_image(phi)?;
    let image_star = StarBody::linear_image(star.clone(), phi)?;
    let lhs =
        dual_curvature_measure(&image, &image_star, q, grid_a)?.integrate(image.normals(), &g);
    let rhs = dual_curvature_measure(body, star, q, grid_b)?.integrate(image.normals(), &g);
    let scale = lhs.abs().max(rhs.abs());
    Ok(AffineCheck {
        lhs,
        rhs,
        relative_gap: if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        },
    })
}

/// `∫_{F_i}` helper exposed for facet-area cross checks in `R^3`.
pub fn facet_integral<F: Fn(&[f64]) -> f64>(
    body: &SupportPolytope,
    facet: usize,
    subdivisions: usize,
    f: F,
) -> Result<f64> {
    if body.dim() != 3 {
        return Err(Error::InvalidInput("facet integrals need n = 3".into()));
    }
    let facets = body.facets()?;
    let cell = &facets.cells()[facet];
    if cell.is_empty() {
        return Ok(0.0);
    }
    Ok(compensated_sum((1..cell.len() - 1).map(|t| {
        subdivided_triangle_integral(&cell[0], &cell[t], &cell[t + 1], subdivisions.max(1), &f)
    })))
}

//! Convex polytopes with a fixed set of facet normals and star bodies given
//! by radial functions.

use std::sync::Arc;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::OrthogonalGroup;
use crate::linalg::{dot, mat_t_vec, mat_vec, norm, normalized, CompensatedSum, PointSet};
use crate::sphere::{build_grid, Scheme, SphericalGrid};

/// Ratio between the support floor and the geometric mean of the initial
/// support numbers.
pub const FLOOR_RATIO: f64 = 1e-6;

/// `K = {x : ⟨x, v_i⟩ ≤ h_i}` for unit normals `v_i`.
///
/// Redundant constraints are allowed; the normal set never changes once the
/// polytope is built, only the support numbers do.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolytope {
    normals: Arc<PointSet>,
    support: Vec<f64>,
    floor: f64,
}

fn geometric_mean(values: &[f64]) -> f64 {
    (values.iter().map(|h| h.ln()).sum::<f64>() / values.len() as f64).exp()
}

impl SupportPolytope {
    /// Builds a polytope, normalising the normals and deriving the support
    /// floor from `support`.
    pub fn new(normals: PointSet, support: Vec<f64>) -> Result<Self> {
        let n = normals.dim();
        if support.len() != normals.len() {
            return Err(Error::DimensionMismatch {
                expected: normals.len(),
                found: support.len(),
            });
        }
        if normals.len() < n + 1 {
            return Err(Error::InvalidInput(format!(
                "{} normals cannot bound a body in R^{n}",
                normals.len()
            )));
        }
        let mut unit = PointSet::new(n);
        for v in normals.iter() {
            let r = norm(v);
            if !(r.is_finite() && r > 1e-12) {
                return Err(Error::InvalidInput("zero or non-finite normal".into()));
            }
            unit.push(&normalized(v))?;
        }
        for (index, &value) in support.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::FloorViolation {
                    index,
                    value,
                    floor: 0.0,
                });
            }
        }
        let floor = FLOOR_RATIO * geometric_mean(&support);
        let body = Self {
            normals: Arc::new(unit),
            support,
            floor,
        };
        body.check_positive_spanning()?;
        Ok(body)
    }

    /// Axis-parallel box `Π [-a_k, a_k]` with normals `e_1, -e_1, e_2, …`.
    pub fn coordinate_box(half_widths: &[f64]) -> Result<Self> {
        let n = half_widths.len();
        let mut normals = PointSet::new(n);
        let mut support = Vec::with_capacity(2 * n);
        for (k, &a) in half_widths.iter().enumerate() {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; n];
                v[k] = s;
                normals.push(&v)?;
                support.push(a);
            }
        }
        Self::new(normals, support)
    }

    pub fn cube(n: usize, half_width: f64) -> Result<Self> {
        Self::coordinate_box(&vec![half_width; n])
    }

    /// `{x : ⟨x, v⟩ ≤ r}` over the given normals, a polytope approximating `rB^n`.
    pub fn ball_like(normals: PointSet, radius: f64) -> Result<Self> {
        let support = vec![radius; normals.len()];
        Self::new(normals, support)
    }

    /// Same normals with new support numbers, keeping the current floor.
    pub fn with_support(&self, support: Vec<f64>) -> Result<Self> {
        if support.len() != self.support.len() {
            return Err(Error::DimensionMismatch {
                expected: self.support.len(),
                found: support.len(),
            });
        }
        for (index, &value) in support.iter().enumerate() {
            if !(value.is_finite() && value >= self.floor) {
                return Err(Error::FloorViolation {
                    index,
                    value,
                    floor: self.floor,
                });
            }
        }
        Ok(Self {
            normals: Arc::clone(&self.normals),
            support,
            floor: self.floor,
        })
    }

    /// Replaces the floor, e.g. to carry the floor of an initial body along a
    /// rescaled run.
    pub fn with_floor(mut self, floor: f64) -> Result<Self> {
        if let Some((index, &value)) = self.support.iter().enumerate().find(|(_, &h)| h < floor) {
            return Err(Error::FloorViolation {
                index,
                value,
                floor,
            });
        }
        self.floor = floor;
        Ok(self)
    }

    /// `λK`; the floor scales along.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor {lambda}")));
        }
        Ok(Self {
            normals: Arc::clone(&self.normals),
            support: self.support.iter().map(|h| h * lambda).collect(),
            floor: self.floor * lambda,
        })
    }

    /// Image `φK` of the polytope under an invertible linear map, through
    /// `⟨x, v⟩ ≤ h ⟼ ⟨y, φ^{-t} v⟩ ≤ h` renormalised.
    pub fn linear_image(&self, phi: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim();
        let inv = phi
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("linear map is singular".into()))?;
        let mut normals = PointSet::new(n);
        let mut support = Vec::with_capacity(self.len());
        for (v, h) in self.normals.iter().zip(&self.support) {
            let w = mat_t_vec(&inv, v);
            let r = norm(&w);
            normals.push(&w.iter().map(|x| x / r).collect::<Vec<_>>())?;
            support.push(h / r);
        }
        Self::new(normals, support)
    }

    /// Image under an orthogonal map.
    pub fn rotated(&self, g: &DMatrix<f64>) -> Result<Self> {
        Self::new(self.normals.transformed(g), self.support.clone())
    }

    pub fn dim(&self) -> usize {
        self.normals.dim()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn normals(&self) -> &PointSet {
        &self.normals
    }

    pub fn shared_normals(&self) -> Arc<PointSet> {
        Arc::clone(&self.normals)
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        self.normals.get(i)
    }

    pub fn support_numbers(&self) -> &[f64] {
        &self.support
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    fn check_positive_spanning(&self) -> Result<()> {
        // {x : ⟨x, v_i⟩ ≤ 1} is bounded iff the normals positively span R^n.
        let n = self.dim();
        let ones = vec![1.0; self.len()];
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                match lp_support(&self.normals, &ones, &e) {
                    Ok(_) => {}
                    Err(Error::Lp(_)) => return Err(Error::NotPositivelySpanning { probe: k }),
                    Err(other) => return Err(other),
                }
            }
        }
        Ok(())
    }

    /// Radial function `ρ_K(u) = min_{⟨u,v_i⟩>0} h_i / ⟨u,v_i⟩` together with
    /// the facet attaining it (smallest index on ties). `u` need not be unit;
    /// the result is homogeneous of degree `-1`.
    #[inline]
    pub fn radial_eval(&self, u: &[f64]) -> Result<(f64, usize)> {
        radial_min(&self.normals, &self.support, u).ok_or(Error::NotPositivelySpanning { probe: 0 })
    }

    /// `radial_eval` at every node of `grid`, in parallel.
    pub fn radial_at_nodes(&self, grid: &SphericalGrid) -> Result<Vec<(f64, usize)>> {
        let gauge: Vec<f64> = self.support.iter().map(|h| 1.0 / h).collect();
        (0..grid.len())
            .into_par_iter()
            .map(|j| {
                radial_min_gauge(&self.normals, &gauge, grid.node(j))
                    .ok_or(Error::NotPositivelySpanning { probe: j })
            })
            .collect()
    }

    /// `h_K(u) = max_{x∈K} ⟨x, u⟩` by linear programming.
    pub fn support_eval(&self, u: &[f64]) -> Result<f64> {
        lp_support(&self.normals, &self.support, u)
    }

    /// `ρ_{K*}(u) = 1 / h_K(u)`.
    pub fn polar_radial(&self, u: &[f64]) -> Result<f64> {
        Ok(1.0 / self.support_eval(u)?)
    }

    /// Wulff shape `{x : ⟨x,v_i⟩ ≤ h_i + t φ_i}`, without pruning.
    pub fn wulff_shape(&self, phi: &[f64], t: f64) -> Result<Self> {
        if phi.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: phi.len(),
            });
        }
        let support = self
            .support
            .iter()
            .zip(phi)
            .map(|(h, f)| h + t * f)
            .collect();
        self.with_support(support)
    }

    /// Facet polygons (n = 3) or edges (n = 2) by clipping each supporting
    /// hyperplane against every other halfspace.
    pub fn facets(&self) -> Result<FacetComplex> {
        FacetComplex::build(self)
    }

    /// Support numbers attained by the body, `h_K(v_i)`, with redundant
    /// constraints pulled in to the body.
    pub fn tight_support(&self) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|i| Ok(self.support_eval(self.normal(i))?.min(self.support[i])))
            .collect()
    }

    pub fn geometry_stats(&self, grid: &SphericalGrid) -> Result<GeometryStats> {
        let n = self.dim();
        let rho = self.radial_at_nodes(grid)?;
        let mut mass = CompensatedSum::new();
        let mut moment = vec![CompensatedSum::new(); n];
        for (j, &(r, _)) in rho.iter().enumerate() {
            let cone = grid.weights()[j] * r.powi(n as i32) / n as f64;
            mass.add(cone);
            let arm = n as f64 / (n as f64 + 1.0) * r;
            for (m, x) in moment.iter_mut().zip(grid.node(j)) {
                m.add(cone * arm * x);
            }
        }
        let volume = mass.value();
        let centroid = moment.iter().map(|m| m.value() / volume).collect();
        let circumradius = rho.iter().map(|r| r.0).fold(0.0, f64::max);
        let gauge: Vec<f64> = self.support.iter().map(|h| 1.0 / h).collect();
        let mut diameter = 0.0f64;
        for (j, &(r, _)) in rho.iter().enumerate() {
            let minus: Vec<f64> = grid.node(j).iter().map(|x| -x).collect();
            let back = radial_min_gauge(&self.normals, &gauge, &minus)
                .ok_or(Error::NotPositivelySpanning { probe: j })?;
            diameter = diameter.max(r + back.0);
        }
        let inradius = self.support.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(GeometryStats {
            centroid,
            volume,
            diameter,
            inradius,
            circumradius,
        })
    }

    /// Largest `|ρ_K(g u) − ρ_K(u)|` over group elements and grid nodes.
    pub fn invariance_deviation(
        &self,
        group: &OrthogonalGroup,
        grid: &SphericalGrid,
    ) -> Result<f64> {
        let gauge: Vec<f64> = self.support.iter().map(|h| 1.0 / h).collect();
        invariance_deviation(
            |u| {
                radial_min_gauge(&self.normals, &gauge, u)
                    .map(|r| r.0)
                    .ok_or(Error::NotPositivelySpanning { probe: 0 })
            },
            group,
            grid,
        )
    }

    pub fn is_invariant(
        &self,
        group: &OrthogonalGroup,
        grid: &SphericalGrid,
        tol: f64,
    ) -> Result<(bool, f64)> {
        let dev = self.invariance_deviation(group, grid)?;
        Ok((dev <= tol, dev))
    }

    pub fn to_file(&self) -> BodyFile {
        BodyFile {
            n: self.dim(),
            normals: self.normals.to_rows(),
            support_numbers: self.support.clone(),
        }
    }

    pub fn from_file(file: &BodyFile) -> Result<Self> {
        let normals = PointSet::from_rows(file.n, &file.normals)?;
        Self::new(normals, file.support_numbers.clone())
    }
}

#[inline]
fn radial_min(normals: &PointSet, support: &[f64], u: &[f64]) -> Option<(f64, usize)> {
    let gauge: Vec<f64> = support.iter().map(|h| 1.0 / h).collect();
    radial_min_gauge(normals, &gauge, u)
}

/// Radial function from the reciprocal support numbers: the largest
/// `⟨u, v_i⟩ / h_i` wins, which avoids a division per facet.
fn radial_min_gauge(normals: &PointSet, gauge: &[f64], u: &[f64]) -> Option<(f64, usize)> {
    let mut best = 0.0f64;
    let mut arg = usize::MAX;
    let flat = normals.as_flat();
    match u {
        [a, b, c] => {
            for (i, (v, g)) in flat.chunks_exact(3).zip(gauge).enumerate() {
                let s = (a * v[0] + b * v[1] + c * v[2]) * g;
                if s > best {
                    best = s;
                    arg = i;
                }
            }
        }
        _ => {
            for (i, (v, g)) in flat.chunks_exact(u.len()).zip(gauge).enumerate() {
                let s = dot(u, v) * g;
                if s > best {
                    best = s;
                    arg = i;
                }
            }
        }
    }
    (arg != usize::MAX).then(|| (1.0 / best, arg))
}

fn lp_support(normals: &PointSet, support: &[f64], u: &[f64]) -> Result<f64> {
    let n = normals.dim();
    if u.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.len(),
        });
    }
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = u
        .iter()
        .map(|&c| problem.add_var(c, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for (v, &h) in normals.iter().zip(support) {
        let terms: Vec<_> = vars.iter().copied().zip(v.iter().copied()).collect();
        problem.add_constraint(terms.as_slice(), ComparisonOp::Le, h);
    }
    let value = problem
        .solve()
        .map(|s| s.objective())
        .map_err(|e| Error::Lp(e.to_string()))?;
    // minilp reports some unbounded problems with free variables as a NaN optimum
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Lp("problem is unbounded".into()))
    }
}

/// `max_{g, u} |ρ(g u) − ρ(u)|` for any radial function.
pub fn invariance_deviation<F>(rho: F, group: &OrthogonalGroup, grid: &SphericalGrid) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let per_node: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|j| {
            let u = grid.node(j);
            let base = rho(u)?;
            let mut worst = 0.0f64;
            for g in group.elements().iter().skip(1) {
                worst = worst.max((rho(&mat_vec(g, u))? - base).abs());
            }
            Ok(worst)
        })
        .collect();
    Ok(per_node?.into_iter().fold(0.0, f64::max))
}

/// Diagnostics estimated on a grid. `volume` and `centroid` come from the cone
/// decomposition over the nodes; `diameter` is the longest chord through the
/// origin among node directions, a lower estimate; `inradius` is exact for
/// the inscribed ball centred at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryStats {
    pub centroid: Vec<f64>,
    pub volume: f64,
    pub diameter: f64,
    pub inradius: f64,
    pub circumradius: f64,
}

/// On-disk form of a polytope: normals and support numbers in matching order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyFile {
    pub n: usize,
    pub normals: Vec<Vec<f64>>,
    pub support_numbers: Vec<f64>,
}

/// Boundary cells of a polytope in the plane or in space.
///
/// In `R^3` cell `i` is the facet polygon on normal `i`, vertices ordered
/// counter-clockwise seen from outside; in `R^2` it is an edge with two
/// endpoints. Redundant constraints have empty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetComplex {
    dim: usize,
    cells: Vec<Vec<Vec<f64>>>,
    measures: Vec<f64>,
    support: Vec<f64>,
}

/// Cells with area (or length) below this are treated as empty.
pub const DEGENERATE_CELL: f64 = 1e-12;

impl FacetComplex {
    fn build(body: &SupportPolytope) -> Result<Self> {
        let n = body.dim();
        if n != 2 && n != 3 {
            return Err(Error::InvalidInput(format!(
                "facet enumeration is available in dimensions 2 and 3, not {n}"
            )));
        }
        // Half-size of a square/segment that certainly contains every facet.
        let mut extent = 0.0f64;
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                extent = extent.max(body.support_eval(&e)?.abs());
            }
        }
        let half = 2.0 * extent * (n as f64).sqrt() + 1.0;
        let h = body.support_numbers();
        let mut cells = Vec::with_capacity(body.len());
        let mut measures = Vec::with_capacity(body.len());
        for i in 0..body.len() {
            let v = body.normal(i);
            let (cell, measure) = if n == 2 {
                clip_edge(body, i, v, h[i], half)
            } else {
                clip_polygon(body, i, v, h[i], half)
            };
            if measure > DEGENERATE_CELL {
                cells.push(cell);
                measures.push(measure);
            } else {
                cells.push(Vec::new());
                measures.push(0.0);
            }
        }
        Ok(Self {
            dim: n,
            cells,
            measures,
            support: h.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self) -> &[Vec<Vec<f64>>] {
        &self.cells
    }

    /// Facet areas (`n = 3`) or edge lengths (`n = 2`).
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    /// Distinct vertices of the polytope.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let scale = self
            .cells
            .iter()
            .flatten()
            .map(|p| norm(p))
            .fold(1.0, f64::max);
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in self.cells.iter().flatten() {
            if !out
                .iter()
                .any(|q| crate::linalg::distance(p, q) <= 1e-9 * scale)
            {
                out.push(p.clone());
            }
        }
        out
    }

    /// `Σ_i h_i |F_i| / n`.
    pub fn volume(&self) -> f64 {
        let n = self.dim as f64;
        crate::linalg::compensated_sum(
            self.measures
                .iter()
                .zip(&self.support)
                .map(|(a, h)| a * h / n),
        )
    }

    /// Centroid from the decomposition into simplices with apex at the origin.
    pub fn centroid(&self) -> Vec<f64> {
        let mut mass = CompensatedSum::new();
        let mut moment = vec![CompensatedSum::new(); self.dim];
        for cell in &self.cells {
            if cell.is_empty() {
                continue;
            }
            if self.dim == 2 {
                let (a, b) = (&cell[0], &cell[1]);
                let area = 0.5 * (a[0] * b[1] - a[1] * b[0]).abs();
                mass.add(area);
                for k in 0..2 {
                    moment[k].add(area * (a[k] + b[k]) / 3.0);
                }
            } else {
                for t in 1..cell.len() - 1 {
                    let (a, b, c) = (&cell[0], &cell[t], &cell[t + 1]);
                    let vol = (det3(a, b, c) / 6.0).abs();
                    mass.add(vol);
                    for k in 0..3 {
                        moment[k].add(vol * (a[k] + b[k] + c[k]) / 4.0);
                    }
                }
            }
        }
        let m = mass.value();
        moment.iter().map(|x| x.value() / m).collect()
    }

    /// `max ⟨x, u⟩` over the vertices.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.cells
            .iter()
            .flatten()
            .map(|p| dot(p, u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Wavefront OBJ triangle mesh of the boundary (`n = 3` only).
    pub fn to_obj(&self) -> Result<String> {
        if self.dim != 3 {
            return Err(Error::InvalidInput("mesh export needs n = 3".into()));
        }
        let vertices = self.vertices();
        let scale = vertices.iter().map(|p| norm(p)).fold(1.0, f64::max);
        let index_of = |p: &[f64]| {
            vertices
                .iter()
                .position(|q| crate::linalg::distance(p, q) <= 1e-9 * scale)
                .expect("cell vertex was collected")
                + 1
        };
        let mut out = String::new();
        for p in &vertices {
            out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
        for cell in self.cells.iter().filter(|c| !c.is_empty()) {
            let ids: Vec<usize> = cell.iter().map(|p| index_of(p)).collect();
            for t in 1..ids.len() - 1 {
                if ids[0] != ids[t] && ids[t] != ids[t + 1] && ids[0] != ids[t + 1] {
                    out.push_str(&format!("f {} {} {}\n", ids[0], ids[t], ids[t + 1]));
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Orthonormal `(e1, e2)` with `e1 × e2 = v` for a unit `v ∈ R^3`.
pub(crate) fn plane_basis(v: &[f64]) -> ([f64; 3], [f64; 3]) {
    let helper = if v[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let d = dot(&helper, v);
    let e1 = normalized(&[
        helper[0] - d * v[0],
        helper[1] - d * v[1],
        helper[2] - d * v[2],
    ]);
    let e2 = [
        v[1] * e1[2] - v[2] * e1[1],
        v[2] * e1[0] - v[0] * e1[2],
        v[0] * e1[1] - v[1] * e1[0],
    ];
    ([e1[0], e1[1], e1[2]], e2)
}

fn clip_polygon(
    body: &SupportPolytope,
    i: usize,
    v: &[f64],
    h: f64,
    half: f64,
) -> (Vec<Vec<f64>>, f64) {
    let (e1, e2) = plane_basis(v);
    let center: Vec<f64> = v.iter().map(|x| x * h).collect();
    let mut poly: Vec<[f64; 2]> = vec![[-half, -half], [half, -half], [half, half], [-half, half]];
    let support = body.support_numbers();
    for j in 0..body.len() {
        if j == i || poly.is_empty() {
            continue;
        }
        let w = body.normal(j);
        let a = [dot(&e1, w), dot(&e2, w)];
        let b = support[j] - dot(&center, w);
        if a[0].abs() + a[1].abs() < 1e-14 {
            // parallel plane: keeps all or nothing
            if b < 0.0 || (b == 0.0 && j < i) {
                poly.clear();
            }
            continue;
        }
        let mut next = Vec::with_capacity(poly.len() + 1);
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            let fp = a[0] * p[0] + a[1] * p[1] - b;
            let fq = a[0] * q[0] + a[1] * q[1] - b;
            if fp <= 0.0 {
                next.push(p);
            }
            if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                let t = fp / (fp - fq);
                next.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        poly = next;
    }
    if poly.len() < 3 {
        return (Vec::new(), 0.0);
    }
    let mut area = 0.0;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        area += p[0] * q[1] - p[1] * q[0];
    }
    let cell = poly
        .iter()
        .map(|p| {
            (0..3)
                .map(|k| center[k] + p[0] * e1[k] + p[1] * e2[k])
                .collect()
        })
        .collect();
    (cell, 0.5 * area.abs())
}

fn clip_edge(
    body: &SupportPolytope,
    i: usize,
    v: &[f64],
    h: f64,
    half: f64,
) -> (Vec<Vec<f64>>, f64) {
    let w = [-v[1], v[0]];
    let center = [v[0] * h, v[1] * h];
    let (mut lo, mut hi) = (-half, half);
    let support = body.support_numbers();
    for j in 0..body.len() {
        if j == i {
            continue;
        }
        let u = body.normal(j);
        let a = dot(&w, u);
        let b = support[j] - dot(&center, u);
        if a.abs() < 1e-14 {
            if b < 0.0 || (b == 0.0 && j < i) {
                return (Vec::new(), 0.0);
            }
        } else if a > 0.0 {
            hi = hi.min(b / a);
        } else {
            lo = lo.max(b / a);
        }
    }
    if hi <= lo {
        return (Vec::new(), 0.0);
    }
    let point = |t: f64| vec![center[0] + t * w[0], center[1] + t * w[1]];
    (vec![point(lo), point(hi)], hi - lo)
}

/// A star body given by a positive radial function, homogeneous of degree -1.
#[derive(Debug, Clone)]
pub enum StarBody {
    Ball {
        radius: f64,
    },
    /// `{x : xᵀ M x ≤ 1}` for a symmetric positive definite `M`.
    Ellipsoid {
        matrix: DMatrix<f64>,
    },
    Polytope(SupportPolytope),
    /// Group average of the radial function of `base`.
    Symmetrized {
        base: Box<StarBody>,
        group: Arc<OrthogonalGroup>,
    },
    /// `φ Q` for the base body `Q`, stored through `φ^{-1}`.
    Linear {
        base: Box<StarBody>,
        inverse: DMatrix<f64>,
    },
}

impl StarBody {
    pub fn unit_ball() -> Self {
        StarBody::Ball { radius: 1.0 }
    }

    /// Ellipsoid with the given semi-axes along the coordinate axes.
    pub fn ellipsoid_axes(axes: &[f64]) -> Result<Self> {
        if axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidInput(
                "ellipsoid axes must be positive".into(),
            ));
        }
        let n = axes.len();
        Ok(StarBody::Ellipsoid {
            matrix: DMatrix::from_fn(n, n, |i, j| if i == j { axes[i].powi(-2) } else { 0.0 }),
        })
    }

    pub fn linear_image(base: StarBody, phi: &DMatrix<f64>) -> Result<Self> {
        let inverse = phi
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("linear map is singular".into()))?;
        Ok(StarBody::Linear {
            base: Box::new(base),
            inverse,
        })
    }

    pub fn symmetrized(base: StarBody, group: Arc<OrthogonalGroup>) -> Self {
        StarBody::Symmetrized {
            base: Box::new(base),
            group,
        }
    }

    /// `ρ_Q(x)` for any non-zero `x`.
    pub fn radial(&self, x: &[f64]) -> f64 {
        match self {
            StarBody::Ball { radius } => radius / norm(x),
            StarBody::Ellipsoid { matrix } => 1.0 / dot(x, &mat_vec(matrix, x)).sqrt(),
            StarBody::Polytope(p) => p.radial_eval(x).map(|r| r.0).unwrap_or(f64::NAN),
            StarBody::Symmetrized { base, group } => {
                let values = group.elements().iter().map(|g| base.radial(&mat_vec(g, x)));
                crate::linalg::compensated_sum(values) / group.order() as f64
            }
            StarBody::Linear { base, inverse } => base.radial(&mat_vec(inverse, x)),
        }
    }

    /// `ρ_Q` at every node, failing on a non-positive or non-finite value.
    pub fn radial_at_nodes(&self, grid: &SphericalGrid) -> Result<Vec<f64>> {
        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|j| self.radial(grid.node(j)))
            .collect();
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonFinite {
                index,
                value: values[index],
            });
        }
        Ok(values)
    }

    /// Smallest `c ≥ 1` with `c⁻¹ ≤ ρ_Q ≤ c` on the probe grid.
    pub fn sandwich_constant(&self, probe: &SphericalGrid) -> Result<f64> {
        let values = self.radial_at_nodes(probe)?;
        let hi = values.iter().copied().fold(0.0, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(hi.max(1.0 / lo).max(1.0))
    }
}

/// A moderate default probe grid for validity checks and diagnostics.
pub fn probe_grid(n: usize) -> Result<SphericalGrid> {
    match n {
        2 => build_grid(2, 720, Scheme::UniformAngle, 0),
        3 => build_grid(3, 2000, Scheme::FibonacciSphere, 0),
        _ => build_grid(n, 4000, Scheme::MonteCarlo, 7),
    }
}

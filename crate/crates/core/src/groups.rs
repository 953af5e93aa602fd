//! Finite subgroups of `O(n)`: enumeration, the standard families without
//! non-zero fixed points, certificates, orbits and Haar averaging.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, distance, mat_vec, max_abs_diff, normalized, PointSet};

/// Tolerance for deciding that two group elements are the same matrix.
pub const MATCH_TOL: f64 = 1e-8;
/// Tolerance for `gᵀg = I`.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalGroup {
    dim: usize,
    elements: Vec<DMatrix<f64>>,
    generator_indices: Vec<usize>,
    label: String,
}

/// The two properties a symmetry group must have for the existence theory,
/// together with the numbers they are decided from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupCertificate {
    pub has_nonzero_fixed_point: bool,
    pub contains_negation: bool,
    pub order: usize,
    /// Largest entry of `|G|⁻¹ Σ_g g`, the projector onto the fixed subspace.
    pub averaging_norm: f64,
}

impl GroupCertificate {
    /// No non-zero fixed point and `-I ∉ G`.
    pub fn is_admissible(&self) -> bool {
        !self.has_nonzero_fixed_point && !self.contains_negation
    }
}

fn orthogonality_defect(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    max_abs_diff(&(g.transpose() * g), &DMatrix::identity(n, n))
}

impl OrthogonalGroup {
    pub fn trivial(dim: usize) -> Self {
        Self {
            dim,
            elements: vec![DMatrix::identity(dim, dim)],
            generator_indices: Vec::new(),
            label: "trivial".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// All elements; the identity is always first.
    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    pub fn generator_indices(&self) -> &[usize] {
        &self.generator_indices
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Index of the element matching `m` within [`MATCH_TOL`].
    pub fn find(&self, m: &DMatrix<f64>) -> Option<usize> {
        self.elements
            .iter()
            .position(|g| max_abs_diff(g, m) <= MATCH_TOL)
    }

    /// Applies every element to `u`.
    pub fn orbit_of(&self, u: &[f64]) -> Vec<Vec<f64>> {
        self.elements.iter().map(|g| mat_vec(g, u)).collect()
    }

    /// Largest closure defect: `min_k ‖g_i g_j − g_k‖_max` over all pairs.
    pub fn closure_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.elements {
            for b in &self.elements {
                let ab = a * b;
                let best = self
                    .elements
                    .iter()
                    .map(|c| max_abs_diff(&ab, c))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(best);
            }
        }
        worst
    }
}

/// Breadth-first closure of a generating set.
pub fn enumerate_group(
    generators: &[DMatrix<f64>],
    max_order: usize,
    label: impl Into<String>,
) -> Result<OrthogonalGroup> {
    let dim = match generators.first() {
        Some(g) => g.nrows(),
        None => {
            return Err(Error::InvalidGroup(
                "at least one generator is required".into(),
            ))
        }
    };
    if max_order == 0 {
        return Err(Error::InvalidGroup("max_order must be at least 1".into()));
    }
    for g in generators {
        if g.nrows() != dim || g.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.nrows().max(g.ncols()),
            });
        }
        let deviation = orthogonality_defect(g);
        if deviation > ORTHOGONALITY_TOL {
            return Err(Error::NotOrthogonal { deviation });
        }
    }
    let mut elements = vec![DMatrix::identity(dim, dim)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        frontier += 1;
        for s in generators {
            let candidate = s * &current;
            if !elements
                .iter()
                .any(|e| max_abs_diff(e, &candidate) <= MATCH_TOL)
            {
                if elements.len() == max_order {
                    return Err(Error::ClosureNotReached { max_order });
                }
                elements.push(candidate);
            }
        }
    }
    let mut group = OrthogonalGroup {
        dim,
        elements,
        generator_indices: Vec::new(),
        label: label.into(),
    };
    group.generator_indices = generators
        .iter()
        .map(|g| group.find(g).expect("generators belong to their closure"))
        .collect();
    Ok(group)
}

/// Named families of groups acting without non-zero fixed points and
/// without `-I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StandardGroup {
    /// Full symmetry group of a centred regular simplex in `R^m` (≅ `S_{m+1}`).
    SimplexSymmetry { m: usize },
    /// Orientation-preserving simplex symmetries (≅ `A_{m+1}`).
    SimplexRotation { m: usize },
    /// Rotation group of the cube `[-1,1]^m`, `m ≥ 3` odd.
    CubeRotation { m: usize },
    /// Rotations of a regular `ℓ`-gon in the plane, `ℓ ≥ 3` odd.
    Cyclic { order: usize },
    /// Block-diagonal direct sum acting on orthogonal coordinate blocks.
    DirectSum { parts: Vec<StandardGroup> },
}

impl StandardGroup {
    pub fn dim(&self) -> usize {
        match self {
            StandardGroup::SimplexSymmetry { m }
            | StandardGroup::SimplexRotation { m }
            | StandardGroup::CubeRotation { m } => *m,
            StandardGroup::Cyclic { .. } => 2,
            StandardGroup::DirectSum { parts } => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            StandardGroup::SimplexSymmetry { m } => format!("simplex-symmetry({m})"),
            StandardGroup::SimplexRotation { m } => format!("simplex-rotation({m})"),
            StandardGroup::CubeRotation { m } => format!("cube-rotation({m})"),
            StandardGroup::Cyclic { order } => format!("cyclic({order})"),
            StandardGroup::DirectSum { parts } => {
                let inner: Vec<String> = parts.iter().map(|p| p.label()).collect();
                format!("direct-sum({})", inner.join(", "))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StandardGroup::SimplexSymmetry { m } | StandardGroup::SimplexRotation { m } => {
                if *m < 2 {
                    return Err(Error::InvalidGroup(format!(
                        "simplex groups need m >= 2, got {m}"
                    )));
                }
            }
            StandardGroup::CubeRotation { m } => {
                if *m < 3 || m % 2 == 0 {
                    return Err(Error::InvalidGroup(format!(
                        "cube rotations need odd m >= 3, got {m}"
                    )));
                }
            }
            StandardGroup::Cyclic { order } => {
                if *order < 3 || order % 2 == 0 {
                    return Err(Error::InvalidGroup(format!(
                        "cyclic groups need odd order >= 3, got {order}"
                    )));
                }
            }
            StandardGroup::DirectSum { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidGroup("direct sum with no parts".into()));
                }
                for p in parts {
                    p.validate()?;
                }
            }
        }
        Ok(())
    }

    fn generators(&self) -> Vec<DMatrix<f64>> {
        match self {
            StandardGroup::SimplexSymmetry { m } => {
                let basis = simplex_basis(*m);
                (0..*m)
                    .map(|i| {
                        let mut perm: Vec<usize> = (0..=*m).collect();
                        perm.swap(i, i + 1);
                        permutation_action(&basis, &perm)
                    })
                    .collect()
            }
            StandardGroup::SimplexRotation { m } => {
                let basis = simplex_basis(*m);
                (2..=*m)
                    .map(|k| {
                        // 3-cycle (0 1 k)
                        let mut perm: Vec<usize> = (0..=*m).collect();
                        perm[0] = 1;
                        perm[1] = k;
                        perm[k] = 0;
                        permutation_action(&basis, &perm)
                    })
                    .collect()
            }
            StandardGroup::CubeRotation { m } => (0..m - 1)
                .map(|i| {
                    let mut r = DMatrix::identity(*m, *m);
                    r[(i, i)] = 0.0;
                    r[(i + 1, i + 1)] = 0.0;
                    r[(i, i + 1)] = -1.0;
                    r[(i + 1, i)] = 1.0;
                    r
                })
                .collect(),
            StandardGroup::Cyclic { order } => {
                let t = 2.0 * std::f64::consts::PI / *order as f64;
                vec![DMatrix::from_row_slice(
                    2,
                    2,
                    &[t.cos(), -t.sin(), t.sin(), t.cos()],
                )]
            }
            StandardGroup::DirectSum { parts } => {
                let n = self.dim();
                let mut offset = 0;
                let mut gens = Vec::new();
                for p in parts {
                    let d = p.dim();
                    for g in p.generators() {
                        let mut big = DMatrix::identity(n, n);
                        big.view_mut((offset, offset), (d, d)).copy_from(&g);
                        gens.push(big);
                    }
                    offset += d;
                }
                gens
            }
        }
    }

    /// Upper bound on the group order, used as the enumeration budget.
    fn order_bound(&self) -> usize {
        fn factorial(k: usize) -> usize {
            (1..=k).product()
        }
        match self {
            StandardGroup::SimplexSymmetry { m } | StandardGroup::SimplexRotation { m } => {
                factorial(m + 1)
            }
            StandardGroup::CubeRotation { m } => (1usize << m) * factorial(*m),
            StandardGroup::Cyclic { order } => *order,
            StandardGroup::DirectSum { parts } => parts.iter().map(|p| p.order_bound()).product(),
        }
    }
}

/// Orthonormal basis (as columns of an `(m+1) × m` matrix) of the hyperplane
/// `Σ x_i = 0`, the space of a centred regular simplex with vertices `e_i`.
///
/// For `m = 3` the basis comes from a Hadamard matrix, which puts the
/// tetrahedron at the alternate cube vertices `(1,1,1), (1,-1,-1), …`.
fn simplex_basis(m: usize) -> DMatrix<f64> {
    if m == 3 {
        return DMatrix::from_row_slice(
            4,
            3,
            &[
                1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, 1.0,
            ],
        ) * 0.5;
    }
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut v = vec![0.0; m + 1];
        v[i] = 1.0;
        v[i + 1] = -1.0;
        for c in &cols {
            let proj = crate::linalg::dot(&v, c);
            for (x, y) in v.iter_mut().zip(c) {
                *x -= proj * y;
            }
        }
        cols.push(normalized(&v));
    }
    DMatrix::from_fn(m + 1, m, |r, c| cols[c][r])
}

/// `Bᵀ P B` for the permutation `i ↦ perm[i]` of simplex vertices.
fn permutation_action(basis: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let k = perm.len();
    let mut p = DMatrix::zeros(k, k);
    for (i, &j) in perm.iter().enumerate() {
        p[(j, i)] = 1.0;
    }
    basis.transpose() * p * basis
}

/// Builds a standard group in dimension `n` and checks its certificate.
pub fn standard_group(spec: &StandardGroup, n: usize) -> Result<OrthogonalGroup> {
    spec.validate()?;
    if spec.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: spec.dim(),
        });
    }
    let group = enumerate_group(&spec.generators(), spec.order_bound(), spec.label())?;
    let cert = certify(&group);
    if !cert.is_admissible() {
        return Err(Error::InvalidGroup(format!(
            "{} fails its certificate: {cert:?}",
            spec.label()
        )));
    }
    Ok(group)
}

pub fn certify(group: &OrthogonalGroup) -> GroupCertificate {
    let n = group.dim();
    let mut avg = DMatrix::zeros(n, n);
    for g in group.elements() {
        avg += g;
    }
    avg /= group.order() as f64;
    let averaging_norm = avg.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let neg = -DMatrix::<f64>::identity(n, n);
    GroupCertificate {
        has_nonzero_fixed_point: averaging_norm > 1e-8,
        contains_negation: group
            .elements()
            .iter()
            .any(|g| max_abs_diff(g, &neg) <= MATCH_TOL),
        order: group.order(),
        averaging_norm,
    }
}

/// Partition of a direction set into group orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPartition {
    /// Member indices of each orbit, ascending; orbits sorted by first member.
    pub orbits: Vec<Vec<usize>>,
    /// Smallest member of each orbit.
    pub representatives: Vec<usize>,
    /// Orbit index of every direction.
    pub orbit_of: Vec<usize>,
    /// Every image of every direction matched some direction of the set.
    pub closed: bool,
}

impl OrbitPartition {
    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }
}

/// Hash of points on a cubic lattice, for tolerance lookups.
struct NearIndex<'a> {
    points: &'a PointSet,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> NearIndex<'a> {
    fn new(points: &'a PointSet, tol: f64) -> Self {
        let cell = tol.max(1e-12) * 2.0;
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn key(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|x| (x / cell).floor() as i64).collect()
    }

    /// Indices within `tol` of `p`.
    fn near(&self, p: &[f64], tol: f64) -> Vec<usize> {
        let base = Self::key(p, self.cell);
        let d = base.len();
        let mut out = Vec::new();
        let mut offset = vec![-1i64; d];
        loop {
            let key: Vec<i64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
            if let Some(ids) = self.buckets.get(&key) {
                for &i in ids {
                    if distance(self.points.get(i), p) <= tol {
                        out.push(i);
                    }
                }
            }
            let mut k = 0;
            while k < d {
                offset[k] += 1;
                if offset[k] <= 1 {
                    break;
                }
                offset[k] = -1;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        out.sort_unstable();
        out
    }
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Orbit partition of `directions` under `group`.
///
/// Two directions share an orbit when some element maps one onto the other
/// within `merge_tol`. Distinct inputs closer than `merge_tol` are rejected.
pub fn orbits(
    group: &OrthogonalGroup,
    directions: &PointSet,
    merge_tol: f64,
) -> Result<OrbitPartition> {
    if directions.dim() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            found: directions.dim(),
        });
    }
    let index = NearIndex::new(directions, merge_tol);
    for (i, u) in directions.iter().enumerate() {
        if let Some(&j) = index.near(u, merge_tol).iter().find(|&&j| j != i) {
            return Err(Error::MergeCollision {
                first: i.min(j),
                second: i.max(j),
                distance: distance(u, directions.get(j)),
            });
        }
    }
    let count = directions.len();
    let mut parent: Vec<usize> = (0..count).collect();
    let mut closed = true;
    for (i, u) in directions.iter().enumerate() {
        for g in group.elements().iter().skip(1) {
            let image = mat_vec(g, u);
            match index.near(&image, merge_tol).first() {
                Some(&j) => {
                    let (a, b) = (find_root(&mut parent, i), find_root(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                None => closed = false,
            }
        }
    }
    let mut orbit_ids: HashMap<usize, usize> = HashMap::new();
    let mut orbit_list: Vec<Vec<usize>> = Vec::new();
    let mut orbit_of = vec![0; count];
    for i in 0..count {
        let root = find_root(&mut parent, i);
        let id = *orbit_ids.entry(root).or_insert_with(|| {
            orbit_list.push(Vec::new());
            orbit_list.len() - 1
        });
        orbit_list[id].push(i);
        orbit_of[i] = id;
    }
    Ok(OrbitPartition {
        representatives: orbit_list.iter().map(|o| o[0]).collect(),
        orbits: orbit_list,
        orbit_of,
        closed,
    })
}

/// Haar average `u ↦ |G|⁻¹ Σ_g f(g u)`.
///
/// The summands are sorted before the compensated sum, so the result at `u`
/// and at `g u` is built from the same values in the same order.
pub fn symmetrize_density<'a, F>(
    group: &'a OrthogonalGroup,
    f: F,
) -> impl Fn(&[f64]) -> f64 + Sync + Send + 'a
where
    F: Fn(&[f64]) -> f64 + Sync + Send + 'a,
{
    move |u: &[f64]| {
        let mut values: Vec<f64> = group.elements().iter().map(|g| f(&mat_vec(g, u))).collect();
        values.sort_by(|a, b| a.total_cmp(b));
        compensated_sum(values) / group.order() as f64
    }
}

/// A direction set that is stable under `group`, built greedily from `base`.
///
/// Each base point contributes its whole orbit unless some image would land
/// within `min_separation` of an accepted point. Points whose orbit folds onto
/// itself (near a mirror or an axis) are first snapped onto the fixed set of
/// the nearby stabiliser.
pub fn invariant_directions(
    group: &OrthogonalGroup,
    base: &PointSet,
    min_separation: f64,
) -> Result<PointSet> {
    if base.dim() != group.dim() {
        return Err(Error::DimensionMismatch {
            expected: group.dim(),
            found: base.dim(),
        });
    }
    let n = group.dim();
    let mut accepted = PointSet::new(n);
    let distinct = |u: &[f64]| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for p in group.orbit_of(u) {
            let p = normalized(&p);
            if !out.iter().any(|q| distance(q, &p) < 1e-7) {
                out.push(p);
            }
        }
        out
    };
    for u in base.iter() {
        let mut u = normalized(u);
        let close: Vec<Vec<f64>> = group
            .orbit_of(&u)
            .into_iter()
            .filter(|p| distance(p, &u) < min_separation)
            .collect();
        if close.len() > 1 {
            let mut mean = vec![0.0; n];
            for p in &close {
                for (m, x) in mean.iter_mut().zip(p) {
                    *m += x;
                }
            }
            u = normalized(&mean);
        }
        let orbit = distinct(&u);
        let self_sep = orbit
            .iter()
            .enumerate()
            .flat_map(|(i, a)| orbit[i + 1..].iter().map(move |b| distance(a, b)))
            .fold(f64::INFINITY, f64::min);
        if self_sep < min_separation {
            continue;
        }
        let clash = orbit
            .iter()
            .any(|p| accepted.iter().any(|q| distance(p, q) < min_separation));
        if clash {
            continue;
        }
        for p in &orbit {
            accepted.push(p)?;
        }
    }
    Ok(accepted)
}

//! Exponent arithmetic, two-sided dual-volume estimates for boxes and
//! Santaló-type volume products.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bodies::{StarBody, SupportPolytope};
use crate::error::{Error, Result};
use crate::linalg::{compensated_sum, norm};
use crate::measures::DualKernel;
use crate::sphere::{alpha, kappa, SphericalGrid};

/// Width of the gate that routes a near-integer `q` to the logarithmic
/// branch of the box estimates.
pub const INTEGER_GATE: f64 = 1e-9;
/// Quadrature slack allowed on the forward Santaló inequality.
pub const SANTALO_SLACK: f64 = 0.02;
/// Centering tolerance relative to the circumradius.
pub const CENTERING_TOL: f64 = 1e-3;

fn check_dimension(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "dimension must be at least 2, got {n}"
        )));
    }
    Ok(())
}

/// The dual exponent `q*`: `q/(q-n+1)` for `q ≥ n`, `(n-1)q/(q-1)` for
/// `1 < q < n` and `+∞` for `0 < q ≤ 1`.
pub fn q_star(q: f64, n: usize) -> Result<f64> {
    check_dimension(n)?;
    if !(q > 0.0) || q.is_nan() {
        return Err(Error::Hypothesis(format!("q* needs q > 0, got {q}")));
    }
    let nf = n as f64;
    Ok(if q.is_infinite() {
        1.0
    } else if q >= nf {
        q / (q - nf + 1.0)
    } else if q > 1.0 {
        (nf - 1.0) * q / (q - 1.0)
    } else {
        f64::INFINITY
    })
}

/// `(n-1)/q + 1/r ≥ 1` and `(n-1)/r + 1/q ≥ 1`.
pub fn is_dual_pair(q: f64, r: f64, n: usize) -> bool {
    let m = n as f64 - 1.0;
    m / q + 1.0 / r >= 1.0 && m / r + 1.0 / q >= 1.0
}

/// Checks that `q*` is the supremum of the admissible `r`: the pair
/// condition holds at `q* − ε` and fails at `q* + ε` (only the first part
/// when `q*` is infinite).
pub fn sup_characterization_holds(q: f64, n: usize, eps: f64) -> Result<bool> {
    let qs = q_star(q, n)?;
    if qs.is_infinite() {
        return Ok(is_dual_pair(q, 1.0 / eps, n));
    }
    Ok(is_dual_pair(q, qs - eps, n) && !is_dual_pair(q, qs + eps, n))
}

/// Integrability exponent required of the density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum IntegrabilityExponent {
    /// Any `s > 1` will do (`q ≤ 1`).
    AnyAboveOne,
    Exactly(f64),
}

/// `s = 1/(1 + p/q*)`, after checking `−q* < p < 0`.
pub fn admissible_exponent_s(p: f64, q: f64, n: usize) -> Result<IntegrabilityExponent> {
    let qs = q_star(q, n)?;
    if !(p < 0.0) {
        return Err(Error::Hypothesis(format!("p must be negative, got {p}")));
    }
    if !(p > -qs) {
        return Err(Error::Hypothesis(format!(
            "p = {p} is outside the admissible range (-q*, 0) with q* = {qs}"
        )));
    }
    Ok(if qs.is_infinite() {
        IntegrabilityExponent::AnyAboveOne
    } else {
        IntegrabilityExponent::Exactly(1.0 / (1.0 + p / qs))
    })
}

/// A centred box `Π [-a_k, a_k]` with `a_1 ≤ … ≤ a_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    half_axes: Vec<f64>,
}

impl BoxSpec {
    /// Sorts the half-axes ascending.
    pub fn new(mut half_axes: Vec<f64>) -> Result<Self> {
        check_dimension(half_axes.len())?;
        if half_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidInput("box half-axes must be positive".into()));
        }
        half_axes.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { half_axes })
    }

    pub fn dim(&self) -> usize {
        self.half_axes.len()
    }

    pub fn half_axes(&self) -> &[f64] {
        &self.half_axes
    }

    /// `ρ_R(u) = min_k a_k / |u_k|`.
    pub fn radial(&self, u: &[f64]) -> f64 {
        self.half_axes
            .iter()
            .zip(u)
            .map(|(a, x)| a / x.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `a_1 ⋯ a_k`.
    fn prefix_product(&self, k: usize) -> f64 {
        self.half_axes[..k].iter().product()
    }

    pub fn to_polytope(&self) -> Result<SupportPolytope> {
        SupportPolytope::coordinate_box(&self.half_axes)
    }
}

/// Two-sided estimate of a dual volume with the constants that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub lower: f64,
    pub upper: f64,
    pub observed: Option<f64>,
    pub pass: Option<bool>,
    pub branch: String,
    /// Named constants, e.g. the factor in front of the shape monomial.
    pub constants: Vec<(String, f64)>,
}

impl BoundsReport {
    pub fn with_observed(mut self, value: f64) -> Self {
        self.observed = Some(value);
        self.pass = Some(self.lower <= value && value <= self.upper);
        self
    }
}

/// Upper and lower envelopes for `Ṽ_q(R)` with `R` a centred box and
/// `Q = B^n`.
///
/// Constants come from the standard slicing argument: the upper bounds split
/// `R` into a short block, one critical coordinate block and a long block and
/// integrate `(|t| + |z|)^{q-n}` over the long block; the lower bounds restrict
/// to sub-boxes on which `|x|` is comparable to one half-axis.
pub fn box_bounds(b: &BoxSpec, q: f64) -> Result<BoundsReport> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Hypothesis(format!("box bounds need q > 0, got {q}")));
    }
    let n = b.dim();
    let nf = n as f64;
    let a = b.half_axes();
    let rounded = q.round();
    let integer = (q - rounded).abs() < INTEGER_GATE && rounded >= 1.0 && rounded <= nf - 1.0;

    if integer {
        let i = rounded as usize;
        let fi = i as f64;
        let shape = b.prefix_product(i);
        let log_ratio = (a[i] / a[i - 1]).ln();
        // r1: sub-box with |x| ≤ √n a_i
        let c1 = fi / nf * nf.powf((fi - nf) / 2.0) * 2f64.powi(i as i32);
        let r1 = c1 * shape;
        // r2: shell a_i ≤ |z| ≤ a_{i+1} in the last n − i coordinates
        let c2 = fi.powf((fi - nf) / 2.0 + 1.0) / nf * alpha(n - i) * 2f64.powf(fi - nf);
        let r2 = c2 * shape * log_ratio;
        // upper: D = first i−1 axes, N = axes i, i+1, J = the rest
        let cu = fi * 2f64.powf(nf - fi) * alpha(n - i - 1) / nf
            * 2f64.powi(i as i32 - 1)
            * 8.0
            * std::f64::consts::SQRT_2;
        let upper = cu * shape * (1.0 + log_ratio);
        return Ok(BoundsReport {
            lower: r1.max(r2),
            upper,
            observed: None,
            pass: None,
            branch: format!("integer q = {i}: a_1..a_{i} (1 + log(a_{}/a_{i}))", i + 1),
            constants: vec![
                ("lower_r1".into(), c1),
                ("lower_r2_log".into(), c2),
                ("upper".into(), cu),
            ],
        });
    }

    if q > nf - 1.0 {
        let shape = b.prefix_product(n - 1) * a[n - 1].powf(q - nf + 1.0);
        let c = if q <= nf { nf.sqrt() } else { 0.5 };
        let cl = q / nf * c.powf(q - nf) * 2f64.powi(n as i32 - 1);
        let (cu, branch) = if q < nf {
            (
                q * 2f64.powf(nf - q + 1.0) / (nf * (q - nf + 1.0)) * 2f64.powi(n as i32 - 1),
                "n-1 < q < n: a_1..a_{n-1} a_n^{q-n+1}",
            )
        } else {
            (
                2f64.powi(n as i32) * q * nf.powf((q - nf) / 2.0) / (q - nf + 1.0),
                "q >= n: a_1..a_{n-1} a_n^{q-n+1}",
            )
        };
        return Ok(BoundsReport {
            lower: cl * shape,
            upper: cu * shape,
            observed: None,
            pass: None,
            branch: branch.into(),
            constants: vec![("lower".into(), cl), ("upper".into(), cu)],
        });
    }

    let i = q.floor() as usize;
    let fi = i as f64;
    let shape = b.prefix_product(i) * a[i].powf(q - fi);
    let cl = q / nf * nf.sqrt().powf(q - nf) * 2f64.powi(i as i32);
    let cu = q * 2f64.powf(nf - q + 1.0) * alpha(n - i - 1) / (nf * (fi + 1.0 - q) * (q - fi))
        * 2f64.powi(i as i32);
    Ok(BoundsReport {
        lower: cl * shape,
        upper: cu * shape,
        observed: None,
        pass: None,
        branch: format!("{i} < q < {}: a_1..a_{i} a_{}^(q-{i})", i + 1, i + 1),
        constants: vec![("lower".into(), cl), ("upper".into(), cu)],
    })
}

/// `Ṽ_q(R, B^n) = (1/n) ∫ ρ_R^q du` on a grid, with the exact box radial
/// function.
pub fn box_dual_volume_mc(b: &BoxSpec, q: f64, grid: &SphericalGrid) -> Result<f64> {
    if grid.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: grid.dim(),
        });
    }
    let n = b.dim() as f64;
    crate::sphere::integrate(grid, |u| b.radial(u).powf(q) / n)
}

/// `h_K` at every node: vertex maxima in dimensions 2 and 3, linear
/// programming otherwise.
pub fn support_at_nodes(body: &SupportPolytope, grid: &SphericalGrid) -> Result<Vec<f64>> {
    if body.dim() <= 3 {
        let vertices = body.facets()?.vertices();
        Ok((0..grid.len())
            .into_par_iter()
            .map(|j| {
                let u = grid.node(j);
                vertices
                    .iter()
                    .map(|v| crate::linalg::dot(v, u))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    } else {
        (0..grid.len())
            .into_par_iter()
            .map(|j| body.support_eval(grid.node(j)))
            .collect()
    }
}

/// Centroid: exact from the facet decomposition in dimensions 2 and 3, the
/// grid cone estimate otherwise.
pub fn centroid(body: &SupportPolytope, grid: &SphericalGrid) -> Result<Vec<f64>> {
    if body.dim() <= 3 {
        Ok(body.facets()?.centroid())
    } else {
        Ok(body.geometry_stats(grid)?.centroid)
    }
}

/// `‖centroid‖ ≤ CENTERING_TOL · circumradius`.
pub fn is_centered(body: &SupportPolytope, grid: &SphericalGrid) -> Result<bool> {
    let c = centroid(body, grid)?;
    let stats = body.geometry_stats(grid)?;
    Ok(norm(&c) <= CENTERING_TOL * stats.circumradius)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SantaloReport {
    pub volume: f64,
    pub polar_volume: f64,
    pub product: f64,
    pub kappa_sq: f64,
    pub kuperberg_floor: f64,
    pub centered: bool,
    /// `product ≤ (1 + slack) κ_n²`; `None` when the body is not centred.
    pub forward_ok: Option<bool>,
    /// `product > κ_n² / 4^n`.
    pub floor_ok: bool,
}

/// `V(K) V(K*)` with `V(K) = Ṽ_n(K, B^n)` and `V(K*) = (1/n) ∫ h_K^{-n}`.
pub fn santalo_product(body: &SupportPolytope, grid: &SphericalGrid) -> Result<SantaloReport> {
    let n = body.dim();
    let nf = n as f64;
    let volume = DualKernel::new(grid, &StarBody::unit_ball(), nf)?
        .evaluate(body)?
        .volume;
    let h = support_at_nodes(body, grid)?;
    let polar_volume = compensated_sum(
        h.iter()
            .zip(grid.weights())
            .map(|(h, w)| w * h.powf(-nf) / nf),
    );
    let product = volume * polar_volume;
    let kappa_sq = kappa(n).powi(2);
    let kuperberg_floor = kappa_sq / 4f64.powi(n as i32);
    let centered = is_centered(body, grid)?;
    Ok(SantaloReport {
        volume,
        polar_volume,
        product,
        kappa_sq,
        kuperberg_floor,
        centered,
        forward_ok: centered.then_some(product <= (1.0 + SANTALO_SLACK) * kappa_sq),
        floor_ok: product > kuperberg_floor,
    })
}

/// `Ṽ_q(K, Q_1)^{1/q} · Ṽ_r(K*, Q_2)^{1/r}` for a centred `K` and `r ≤ q*`.
///
/// `Ṽ_r(K*, Q_2)` is `(1/n) ∫ h_K^{-r} ρ_{Q_2}^{n-r}`, which for `Q_2 = B^n`
/// is the support-function integral form.
pub fn bs_dual_product(
    body: &SupportPolytope,
    q1: &StarBody,
    q2: &StarBody,
    q: f64,
    r: f64,
    grid: &SphericalGrid,
) -> Result<f64> {
    let n = body.dim();
    let qs = q_star(q, n)?;
    if !(r > 0.0) || r > qs {
        return Err(Error::Hypothesis(format!(
            "r = {r} must lie in (0, q*] with q* = {qs}"
        )));
    }
    if !is_centered(body, grid)? {
        return Err(Error::Hypothesis("body is not centred".into()));
    }
    let nf = n as f64;
    let primal = DualKernel::new(grid, q1, q)?.evaluate(body)?.volume;
    let h = support_at_nodes(body, grid)?;
    let rho2 = q2.radial_at_nodes(grid)?;
    let polar = compensated_sum(
        h.iter()
            .zip(&rho2)
            .zip(grid.weights())
            .map(|((h, rq), w)| w * h.powf(-r) * rq.powf(nf - r) / nf),
    );
    Ok(primal.powf(1.0 / q) * polar.powf(1.0 / r))
}

/// `inradius / Ṽ_q(K, Q)^{1/q}`, which stays bounded below on families of
/// centred bodies in a fixed ball.
pub fn inradius_diagnostic(
    body: &SupportPolytope,
    star: &StarBody,
    q: f64,
    grid: &SphericalGrid,
) -> Result<f64> {
    let t = DualKernel::new(grid, star, q)?.evaluate(body)?.volume;
    let inradius = body
        .support_numbers()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(inradius / t.powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, geodesic_sphere, Scheme};

    #[test]
    fn q_star_examples() {
        assert_eq!(q_star(3.0, 3).unwrap(), 3.0);
        assert_eq!(q_star(2.0, 3).unwrap(), 4.0);
        assert_eq!(q_star(0.5, 3).unwrap(), f64::INFINITY);
        assert_eq!(q_star(1.0, 4).unwrap(), f64::INFINITY);
        assert!(q_star(0.0, 3).is_err());
        assert!(q_star(-1.0, 3).is_err());
    }

    #[test]
    fn q_star_is_an_involution() {
        for n in 2..=4 {
            for q in [1.1, 1.5, 2.0, std::f64::consts::E, 3.0, 10.0] {
                let back = q_star(q_star(q, n).unwrap(), n).unwrap();
                assert!((back - q).abs() <= 1e-12 * q, "n={n} q={q}: {back}");
                if q <= n as f64 {
                    assert!(q_star(q, n).unwrap() >= n as f64);
                }
                assert!(sup_characterization_holds(q, n, 1e-6).unwrap());
            }
        }
    }

    #[test]
    fn exponent_s_examples() {
        assert_eq!(
            admissible_exponent_s(-1.0, 2.0, 3).unwrap(),
            IntegrabilityExponent::Exactly(4.0 / 3.0)
        );
        assert_eq!(
            admissible_exponent_s(-2.0, 2.0, 3).unwrap(),
            IntegrabilityExponent::Exactly(2.0)
        );
        assert!(admissible_exponent_s(-4.0, 2.0, 3).is_err());
        assert!(admissible_exponent_s(-4.0 + 1e-6, 2.0, 3).is_ok());
        assert_eq!(
            admissible_exponent_s(-100.0, 0.5, 3).unwrap(),
            IntegrabilityExponent::AnyAboveOne
        );
        assert!(admissible_exponent_s(0.5, 2.0, 3).is_err());
    }

    #[test]
    fn cube_volume_is_bracketed() {
        for n in 2..=4 {
            let b = BoxSpec::new(vec![1.0; n]).unwrap();
            let r = box_bounds(&b, n as f64).unwrap();
            let v = 2f64.powi(n as i32);
            assert!(r.lower <= v && v <= r.upper, "{r:?}");
        }
    }

    #[test]
    fn box_oracle_examples() {
        let grid = build_grid(3, 20000, Scheme::FibonacciSphere, 0).unwrap();
        let cube = BoxSpec::new(vec![1.0; 3]).unwrap();
        let v = box_dual_volume_mc(&cube, 3.0, &grid).unwrap();
        assert!((v / 8.0 - 1.0).abs() < 1e-2);
        let b = BoxSpec::new(vec![0.7, 1.0, 2.0]).unwrap();
        let scaled = BoxSpec::new(vec![1.4, 2.0, 4.0]).unwrap();
        let (x, y) = (
            box_dual_volume_mc(&b, 1.7, &grid).unwrap(),
            box_dual_volume_mc(&scaled, 1.7, &grid).unwrap(),
        );
        assert!((y / (2f64.powf(1.7) * x) - 1.0).abs() < 1e-12);
        for (axes, q) in [(vec![1.0, 1.0, 100.0], 2.0), (vec![1.0, 10.0, 100.0], 3.5)] {
            let b = BoxSpec::new(axes).unwrap();
            let v = box_dual_volume_mc(&b, q, &grid).unwrap();
            let r = box_bounds(&b, q).unwrap().with_observed(v);
            assert_eq!(r.pass, Some(true), "{r:?}");
        }
        let grid4 = build_grid(4, 40000, Scheme::MonteCarlo, 1).unwrap();
        let b = BoxSpec::new(vec![1.0, 1.0, 1.0, 100.0]).unwrap();
        let v = box_dual_volume_mc(&b, 2.5, &grid4).unwrap();
        assert_eq!(
            box_bounds(&b, 2.5).unwrap().with_observed(v).pass,
            Some(true)
        );
    }

    #[test]
    fn box_oracle_matches_polytope_dual_volume() {
        let grid = build_grid(3, 5000, Scheme::FibonacciSphere, 0).unwrap();
        let b = BoxSpec::new(vec![0.5, 1.0, 3.0]).unwrap();
        let direct = box_dual_volume_mc(&b, 1.3, &grid).unwrap();
        let via = crate::measures::dual_mixed_volume(
            &b.to_polytope().unwrap(),
            &StarBody::unit_ball(),
            1.3,
            &grid,
        )
        .unwrap();
        assert!((direct / via - 1.0).abs() < 1e-12);
    }

    #[test]
    fn santalo_examples() {
        let grid = build_grid(3, 20000, Scheme::FibonacciSphere, 0).unwrap();
        let cube = SupportPolytope::cube(3, 1.0).unwrap();
        let r = santalo_product(&cube, &grid).unwrap();
        assert!((r.product / (32.0 / 3.0) - 1.0).abs() < 1e-2, "{r:?}");
        assert_eq!(r.forward_ok, Some(true));
        assert!(r.floor_ok);
        let ball = SupportPolytope::ball_like(geodesic_sphere(12), 1.0).unwrap();
        let r = santalo_product(&ball, &grid).unwrap();
        assert!((r.product / r.kappa_sq - 1.0).abs() < 2e-2, "{r:?}");
    }

    #[test]
    fn dual_product_examples() {
        let grid = build_grid(3, 8000, Scheme::FibonacciSphere, 0).unwrap();
        let ball = StarBody::unit_ball();
        let k = SupportPolytope::ball_like(geodesic_sphere(8), 1.0).unwrap();
        let v = bs_dual_product(&k, &ball, &ball, 2.0, 4.0, &grid).unwrap();
        let expected = kappa(3).powf(0.5 + 0.25);
        assert!((v / expected - 1.0).abs() < 2e-2);
        let b = SupportPolytope::coordinate_box(&[1.0, 2.0, 5.0]).unwrap();
        let base = bs_dual_product(&b, &ball, &ball, 2.0, 4.0, &grid).unwrap();
        for lambda in [0.5, 2.0] {
            let s =
                bs_dual_product(&b.scaled(lambda).unwrap(), &ball, &ball, 2.0, 4.0, &grid).unwrap();
            assert!((s - base).abs() <= 1e-10 * base);
        }
        assert!(bs_dual_product(&b, &ball, &ball, 2.0, 4.5, &grid).is_err());
    }

    #[test]
    fn inradius_ratio_of_a_ball() {
        let grid = build_grid(3, 20000, Scheme::FibonacciSphere, 0).unwrap();
        let k = SupportPolytope::ball_like(geodesic_sphere(12), 1.5).unwrap();
        let ratio = inradius_diagnostic(&k, &StarBody::unit_ball(), 2.0, &grid).unwrap();
        assert!((ratio / kappa(3).powf(-0.5) - 1.0).abs() < 1e-2);
        let ratio2 =
            inradius_diagnostic(&k.scaled(3.0).unwrap(), &StarBody::unit_ball(), 2.0, &grid)
                .unwrap();
        assert!((ratio - ratio2).abs() < 1e-12);
    }
}

//! Run configuration: one TOML file per run, every section optional except
//! the one the command needs. Defaults are filled in by [`parse_config`] and
//! the filled-in form is what lands in the manifest.

use std::path::Path;
use std::sync::Arc;

use dualmink_core::{
    admissible_exponent_s, build_grid, certify, q_star, standard_group, GridSpec,
    IntegrabilityExponent, OrthogonalGroup, PointSet, ProblemSpec, Scheme, SolverConfig,
    StandardGroup, StarBody,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construct: Option<ConstructConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub group: StandardGroup,
    #[serde(default)]
    pub star: StarSpec,
    pub density: DensitySpec,
    /// Requested number of facet normals; the actual set is the nearest
    /// group-stable one.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Skip the range and fixed-point checks (the functional still needs
    /// `p < 0 < q`).
    #[serde(default)]
    pub unsupported_regime: bool,
}

fn default_directions() -> usize {
    642
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StarSpec {
    Ball {
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipsoid {
        axes: Vec<f64>,
    },
    /// Group average of an ellipsoid's radial function.
    SymmetrizedEllipsoid {
        axes: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for StarSpec {
    fn default() -> Self {
        StarSpec::Ball { radius: 1.0 }
    }
}

impl StarSpec {
    pub fn build(&self, n: usize, group: &Arc<OrthogonalGroup>) -> CliResult<StarBody> {
        let check_axes = |axes: &[f64]| {
            if axes.len() != n {
                return Err(CliError::Schema(format!(
                    "problem.star.axes has {} entries, expected {n}",
                    axes.len()
                )));
            }
            StarBody::ellipsoid_axes(axes)
                .map_err(|e| CliError::Schema(format!("problem.star: {e}")))
        };
        match self {
            StarSpec::Ball { radius } if radius.is_finite() && *radius > 0.0 => {
                Ok(StarBody::Ball { radius: *radius })
            }
            StarSpec::Ball { radius } => Err(CliError::Schema(format!(
                "problem.star.radius must be positive, got {radius}"
            ))),
            StarSpec::Ellipsoid { axes } => check_axes(axes),
            StarSpec::SymmetrizedEllipsoid { axes } => {
                Ok(StarBody::symmetrized(check_axes(axes)?, Arc::clone(group)))
            }
        }
    }
}

/// Density `f` of the target measure `μ = f du`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    /// `base + amplitude ⟨axis, u⟩²`.
    Axial {
        base: f64,
        amplitude: f64,
        axis: Vec<f64>,
    },
}

impl DensitySpec {
    fn validate(&self, n: usize) -> CliResult<()> {
        match self {
            DensitySpec::Constant { value } if value.is_finite() && *value > 0.0 => Ok(()),
            DensitySpec::Constant { value } => Err(CliError::Schema(format!(
                "problem.density.value must be positive, got {value}"
            ))),
            DensitySpec::Axial {
                base,
                amplitude,
                axis,
            } => {
                if axis.len() != n {
                    return Err(CliError::Schema(format!(
                        "problem.density.axis has {} entries, expected {n}",
                        axis.len()
                    )));
                }
                let len2: f64 = axis.iter().map(|a| a * a).sum();
                let low = base + amplitude.min(0.0) * len2;
                if !(base.is_finite() && amplitude.is_finite() && low > 0.0) {
                    return Err(CliError::Schema(
                        "problem.density must stay positive on the sphere".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        match self {
            DensitySpec::Constant { value } => *value,
            DensitySpec::Axial {
                base,
                amplitude,
                axis,
            } => {
                let t: f64 = axis.iter().zip(u).map(|(a, x)| a * x).sum();
                base + amplitude * t * t
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// `solve` reports non-convergence above this orbit-binned residual.
    pub residual_tolerance: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            residual_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundsSweep {
    /// Monte-Carlo dual volumes of random boxes against the two-sided
    /// estimates.
    BoxBrackets(BoxSweep),
    /// `κ_n²/4^n < V(K)V(K*) ≤ (1 + slack) κ_n²` for random centred polytopes.
    Santalo(SantaloSweep),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoxSweep {
    pub dims: Vec<usize>,
    pub q_values: Vec<f64>,
    pub boxes: usize,
    pub max_ratio: f64,
    pub node_count: usize,
    pub seed: u64,
}

impl Default for BoxSweep {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 4],
            q_values: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
            boxes: 100,
            max_ratio: 10.0,
            node_count: 200_000,
            seed: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SantaloSweep {
    pub dims: Vec<usize>,
    pub bodies: usize,
    pub min_facets: usize,
    pub max_facets: usize,
    pub node_count: usize,
    pub seed: u64,
}

impl Default for SantaloSweep {
    fn default() -> Self {
        Self {
            dims: vec![2, 3],
            bodies: 100,
            min_facets: 4,
            max_facets: 16,
            node_count: 20_000,
            seed: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionKind {
    /// Intersection of rotated copies; needs a unique minimal radius.
    Intersection,
    /// Convex hull of rotated copies; needs a unique maximal radius.
    Hull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstructConfig {
    pub n: usize,
    pub group: StandardGroup,
    pub kind: ConstructionKind,
    pub base: BaseBody,
    #[serde(default)]
    pub first_seed: u64,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_probe_nodes")]
    pub probe_nodes: usize,
}

fn default_count() -> usize {
    10
}

fn default_probe_nodes() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BaseBody {
    /// Polytope circumscribed about the ball `center + radius B^n`.
    ShiftedBall {
        radius: f64,
        center: Vec<f64>,
        #[serde(default = "default_base_facets")]
        facets: usize,
    },
}

fn default_base_facets() -> usize {
    162
}

/// A config with every default written out, plus the objects built from it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: Config,
    pub problem: Option<ResolvedProblem>,
}

#[derive(Debug, Clone)]
pub struct ResolvedProblem {
    pub spec: ProblemSpec,
    pub q_star: f64,
}

impl ResolvedProblem {
    pub fn exponent(&self) -> Option<IntegrabilityExponent> {
        self.spec.exponent
    }
}

pub fn read_config(path: &Path) -> CliResult<Config> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> CliResult<Config> {
    toml::from_str(text).map_err(|e| CliError::Schema(e.message().to_string()))
}

/// Reads, fills in defaults and runs every hypothesis check up front.
pub fn parse_config(path: &Path) -> CliResult<Resolved> {
    resolve(read_config(path)?)
}

pub fn resolve(mut config: Config) -> CliResult<Resolved> {
    config
        .solver
        .validate()
        .map_err(|e| CliError::Schema(format!("solver: {e}")))?;
    if !(config.checks.residual_tolerance > 0.0) {
        return Err(CliError::Schema(
            "checks.residual_tolerance must be positive".into(),
        ));
    }
    let problem = match &config.problem {
        Some(p) => {
            let grid = config.grid.get_or_insert(GridSpec {
                scheme: None,
                node_count: 20_000,
                seed: 0,
                symmetrize: true,
            });
            grid.scheme.get_or_insert(Scheme::default_for(p.n));
            Some(resolve_problem(p, grid)?)
        }
        None => None,
    };
    if let Some(BoundsSweep::Santalo(s)) = &config.bounds {
        if s.min_facets > s.max_facets {
            return Err(CliError::Schema(
                "bounds.min_facets exceeds bounds.max_facets".into(),
            ));
        }
    }
    if let Some(c) = &config.construct {
        build_group(&c.group, c.n, "construct.group")?;
        let BaseBody::ShiftedBall { center, radius, .. } = &c.base;
        if center.len() != c.n || !(*radius > 0.0) {
            return Err(CliError::Schema(
                "construct.base needs a positive radius and a center of length n".into(),
            ));
        }
    }
    Ok(Resolved { config, problem })
}

/// Builds a standard group. Malformed parameters are schema errors; a group
/// that fails its certificate violates a hypothesis.
pub fn build_group(spec: &StandardGroup, n: usize, field: &str) -> CliResult<OrthogonalGroup> {
    spec.validate()
        .map_err(|e| CliError::Schema(format!("{field}: {e}")))?;
    if spec.dim() != n {
        return Err(CliError::Schema(format!(
            "{field} acts on R^{} but n = {n}",
            spec.dim()
        )));
    }
    standard_group(spec, n).map_err(|e| CliError::Hypothesis(format!("{field}: {e}")))
}

fn resolve_problem(p: &ProblemConfig, grid: &GridSpec) -> CliResult<ResolvedProblem> {
    if p.n < 2 {
        return Err(CliError::Schema(format!(
            "problem.n must be >= 2, got {}",
            p.n
        )));
    }
    if p.directions < 2 * p.n {
        return Err(CliError::Schema(format!(
            "problem.directions must be at least {}",
            2 * p.n
        )));
    }
    p.density.validate(p.n)?;
    if !(p.q > 0.0 && p.q.is_finite()) {
        return Err(CliError::Hypothesis(format!("q > 0 violated: q = {}", p.q)));
    }
    let qs = q_star(p.q, p.n).map_err(|e| CliError::Hypothesis(e.to_string()))?;
    if !(p.p < 0.0) {
        return Err(CliError::Hypothesis(format!("p < 0 violated: p = {}", p.p)));
    }
    if !p.unsupported_regime {
        if p.p <= -qs {
            return Err(CliError::Hypothesis(format!(
                "p ≤ −q*: p = {} but −q* = {}",
                p.p, -qs
            )));
        }
        admissible_exponent_s(p.p, p.q, p.n).map_err(|e| CliError::Hypothesis(e.to_string()))?;
    }
    let group = Arc::new(build_group(&p.group, p.n, "problem.group")?);
    if !p.unsupported_regime && certify(&group).has_nonzero_fixed_point {
        return Err(CliError::Hypothesis(format!(
            "group {} fixes a non-zero vector",
            group.label()
        )));
    }
    let star = p.star.build(p.n, &group)?;
    let normals: PointSet = dualmink_core::stable_directions(&group, p.directions)
        .map_err(|e| CliError::Schema(format!("problem.directions: {e}")))?;
    let grid = grid
        .build(p.n, Some(&group))
        .map_err(|e| CliError::Schema(format!("grid: {e}")))?;
    let density = p.density.clone();
    let spec = ProblemSpec::new(
        p.p,
        p.q,
        group,
        star,
        normals,
        grid,
        move |u| density.evaluate(u),
        p.unsupported_regime,
    )
    .map_err(|e| match e {
        dualmink_core::Error::Hypothesis(m) => CliError::Hypothesis(m),
        other => CliError::Schema(format!("problem: {other}")),
    })?;
    Ok(ResolvedProblem { spec, q_star: qs })
}

/// The grid a sweep uses in dimension `n`.
pub fn sweep_grid(n: usize, nodes: usize, seed: u64) -> CliResult<dualmink_core::SphericalGrid> {
    build_grid(n, nodes, Scheme::default_for(n), seed)
        .map_err(|e| CliError::Schema(format!("bounds: {e}")))
}

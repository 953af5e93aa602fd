//! Entropy minimisation over `G`-invariant polytopes with a fixed normal set,
//! and assembly of the solution of `C̃_{p,q}(K, Q; ·) = μ`.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bodies::{probe_grid, StarBody, SupportPolytope};
use crate::bounds::{admissible_exponent_s, IntegrabilityExponent};
use crate::error::{Error, Result};
use crate::groups::{
    certify, invariant_directions, orbits, symmetrize_density, OrbitPartition, OrthogonalGroup,
};
use crate::linalg::{compensated_sum, dot, norm, PointSet};
use crate::measures::{DualKernel, Entropy, EntropyEvaluation, TargetMeasure};
use crate::sphere::{build_grid, Scheme, SphericalGrid};

/// Tolerance used to match directions to their images when partitioning.
pub const ORBIT_MERGE_TOL: f64 = 1e-6;
/// `Q` must be `G`-invariant to within this on the probe grid.
pub const STAR_INVARIANCE_TOL: f64 = 1e-8;

/// One value per orbit, expanded to a full vector of support numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitParametrization {
    partition: OrbitPartition,
}

impl OrbitParametrization {
    pub fn new(partition: OrbitPartition) -> Result<Self> {
        if !partition.closed {
            return Err(Error::InvalidGroup(
                "direction set is not stable under the group".into(),
            ));
        }
        Ok(Self { partition })
    }

    pub fn partition(&self) -> &OrbitPartition {
        &self.partition
    }

    /// Number of free parameters.
    pub fn len(&self) -> usize {
        self.partition.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partition.is_empty()
    }

    pub fn directions(&self) -> usize {
        self.partition.orbit_of.len()
    }

    pub fn expand(&self, values: &[f64]) -> Vec<f64> {
        self.partition.orbit_of.iter().map(|&o| values[o]).collect()
    }

    /// Sum of a full-space gradient over each orbit.
    pub fn collapse(&self, gradient: &[f64]) -> Vec<f64> {
        crate::measures::orbit_summed(gradient, &self.partition)
    }

    /// Mean of a full vector over each orbit.
    pub fn average(&self, values: &[f64]) -> Vec<f64> {
        self.partition
            .orbits
            .iter()
            .map(|o| compensated_sum(o.iter().map(|&i| values[i])) / o.len() as f64)
            .collect()
    }
}

/// A fully checked instance of the `L_p` dual Minkowski problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub p: f64,
    pub q: f64,
    pub group: Arc<OrthogonalGroup>,
    pub star: StarBody,
    pub normals: PointSet,
    pub grid: SphericalGrid,
    pub parametrization: OrbitParametrization,
    /// Target atoms, averaged over each orbit.
    pub mu: TargetMeasure,
    pub exponent: Option<IntegrabilityExponent>,
    pub unsupported_regime: bool,
}

impl ProblemSpec {
    /// Checks the existence hypotheses and discretises `μ = f du`
    /// on `normals`.
    ///
    /// `f` is averaged over the group before binning. With
    /// `unsupported_regime`, the range `−q* < p` and the group condition are
    /// not enforced (the functional itself still needs `p < 0 < q`).
    #[allow(clippy::too_many_arguments)]
    pub fn new<F>(
        p: f64,
        q: f64,
        group: Arc<OrthogonalGroup>,
        star: StarBody,
        normals: PointSet,
        grid: SphericalGrid,
        density: F,
        unsupported_regime: bool,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let n = group.dim();
        for found in [normals.dim(), grid.dim()] {
            if found != n {
                return Err(Error::DimensionMismatch { expected: n, found });
            }
        }
        if !(p < 0.0 && q > 0.0) {
            return Err(Error::Hypothesis(format!(
                "the entropy method needs p < 0 < q, got p = {p}, q = {q}"
            )));
        }
        let exponent = match admissible_exponent_s(p, q, n) {
            Ok(s) => Some(s),
            Err(e) if !unsupported_regime => return Err(e),
            Err(_) => None,
        };
        if !unsupported_regime && certify(&group).has_nonzero_fixed_point {
            return Err(Error::Hypothesis(format!(
                "group {} fixes a non-zero vector",
                group.label()
            )));
        }
        let probe = probe_grid(n)?;
        let star_dev = crate::bodies::invariance_deviation(|u| Ok(star.radial(u)), &group, &probe)?;
        if star_dev > STAR_INVARIANCE_TOL {
            return Err(Error::Hypothesis(format!(
                "star body is not invariant under {} (deviation {star_dev:e})",
                group.label()
            )));
        }
        let partition = orbits(&group, &normals, ORBIT_MERGE_TOL)?;
        let parametrization = OrbitParametrization::new(partition)?;
        let f = symmetrize_density(&group, &density);
        let binned = TargetMeasure::from_density(&grid, &normals, f)?;
        let averaged = parametrization.expand(&parametrization.average(&binned.atoms));
        let mu = TargetMeasure::from_atoms(averaged, binned.grid_id)?;
        Ok(Self {
            p,
            q,
            group,
            star,
            normals,
            grid,
            parametrization,
            mu,
            exponent,
            unsupported_regime,
        })
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }
}

/// A `G`-stable set of roughly `target` unit directions, obtained by orbit
/// closure of a Fibonacci set with a tuned minimum separation.
pub fn stable_directions(group: &OrthogonalGroup, target: usize) -> Result<PointSet> {
    let n = group.dim();
    let scheme = if n == 2 {
        Scheme::UniformAngle
    } else {
        Scheme::FibonacciSphere
    };
    let base = build_grid(n, 2 * target.max(4), scheme, 0)?;
    let nominal = (crate::sphere::kappa(n) * n as f64 / target as f64).powf(1.0 / (n as f64 - 1.0));
    let (mut lo, mut hi) = (0.2 * nominal, 2.0 * nominal);
    let mut best: Option<PointSet> = None;
    for _ in 0..14 {
        let sep = 0.5 * (lo + hi);
        let dirs = invariant_directions(group, base.nodes(), sep)?;
        let count = dirs.len();
        let better = best
            .as_ref()
            .is_none_or(|b| count.abs_diff(target) < b.len().abs_diff(target));
        if better {
            best = Some(dirs);
        }
        if count > target {
            lo = sep;
        } else {
            hi = sep;
        }
    }
    best.ok_or_else(|| Error::Degenerate("no stable direction set found".into()))
}

/// Search direction of the descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DirectionRule {
    /// Mass-preconditioned steepest descent.
    Gradient,
    /// Limited-memory BFGS on top of the preconditioned gradient.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Bound on the Euclidean norm of the orbit-summed gradient.
    pub gradient_tolerance: f64,
    /// First trial step for a preconditioned gradient direction.
    pub initial_step: f64,
    pub shrink: f64,
    /// Armijo slope factor.
    pub armijo: f64,
    /// Line search gives up below this step.
    pub min_step: f64,
    pub direction: DirectionRule,
    /// Stop when `Φ` drops by less than `stall_tolerance · max(1, |Φ|)` over
    /// `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tolerance: f64,
    /// `h_floor = floor_ratio × geometric mean of the initial h`.
    pub floor_ratio: f64,
    /// Random orbit-constant log-perturbation of the starting ball.
    pub initial_perturbation: f64,
    pub seed: u64,
    /// Record `G`-invariance deviation and diameter at every iterate.
    pub track_geometry: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 400,
            gradient_tolerance: 1e-7,
            initial_step: 0.1,
            shrink: 0.5,
            armijo: 1e-4,
            min_step: 1e-12,
            direction: DirectionRule::Lbfgs { memory: 10 },
            stall_window: 10,
            stall_tolerance: 1e-8,
            floor_ratio: 1e-6,
            initial_perturbation: 0.0,
            seed: 0,
            track_geometry: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("initial_step", self.initial_step),
            ("armijo", self.armijo),
            ("min_step", self.min_step),
            ("stall_tolerance", self.stall_tolerance),
            ("floor_ratio", self.floor_ratio),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidInput(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.initial_perturbation >= 0.0 && self.initial_perturbation.is_finite()) {
            return Err(Error::InvalidInput(
                "initial_perturbation must be >= 0".into(),
            ));
        }
        if let DirectionRule::Lbfgs { memory: 0 } = self.direction {
            return Err(Error::InvalidInput("L-BFGS memory must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverStatus {
    Converged,
    MaxIters,
    /// The line search underflowed or `Φ` stopped decreasing.
    Stalled,
}

/// One row of the convergence trace, recorded at each normalised iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub phi: f64,
    pub grad_norm: f64,
    /// Orbit-binned relative ℓ¹ residual of the rescaled iterate.
    pub residual: f64,
    pub step: f64,
    /// `NaN` when geometry tracking is off.
    pub diameter: f64,
    pub invariance_deviation: f64,
    /// `|⟨∇Φ, h⟩|`.
    pub scale_pairing: f64,
    /// `|Φ(after rescale) − Φ(before)|`.
    pub rescale_gap: f64,
    /// `|Ṽ_q − 1|` after rescaling.
    pub volume_gap: f64,
}

/// Minimiser of `Φ` normalised to `Ṽ_q(K̃, Q) = 1`.
#[derive(Debug, Clone)]
pub struct Minimization {
    pub body: SupportPolytope,
    pub status: SolverStatus,
    pub trace: Vec<TraceRow>,
    pub floor_hit: bool,
    /// The diameter exceeded ten times the initial circumradius.
    pub diameter_growth: bool,
    pub evaluation: EntropyEvaluation,
}

struct State {
    x: Vec<f64>,
    body: SupportPolytope,
    eval: EntropyEvaluation,
    grad_x: Vec<f64>,
}

struct Problem<'a> {
    spec: &'a ProblemSpec,
    entropy: Entropy<'a>,
    floor: f64,
}

impl Problem<'_> {
    fn body(&self, x: &[f64]) -> Result<(SupportPolytope, bool)> {
        let mut hit = false;
        let h = self
            .spec
            .parametrization
            .expand(x)
            .into_iter()
            .map(|v| {
                let h = v.exp();
                if h < self.floor {
                    hit = true;
                    self.floor
                } else {
                    h
                }
            })
            .collect();
        let body = SupportPolytope::new(self.spec.normals.clone(), h)?.with_floor(self.floor)?;
        Ok((body, hit))
    }

    fn state(&self, x: Vec<f64>) -> Result<(State, bool)> {
        let (body, hit) = self.body(&x)?;
        let eval = self.entropy.evaluate(&body)?;
        let weighted: Vec<f64> = eval
            .gradient
            .iter()
            .zip(body.support_numbers())
            .map(|(g, h)| g * h)
            .collect();
        let grad_x = self.spec.parametrization.collapse(&weighted);
        Ok((
            State {
                x,
                body,
                eval,
                grad_x,
            },
            hit,
        ))
    }

    /// Shifts every log-support number so that `Ṽ_q = 1`.
    fn normalize(&self, state: State) -> Result<(State, bool)> {
        let shift = state.eval.dual_volume.ln() / self.spec.q;
        let x = state.x.iter().map(|v| v - shift).collect();
        self.state(x)
    }

    /// Per-orbit share of the two terms of the gradient, used as a diagonal
    /// preconditioner in log coordinates.
    fn mass(&self, state: &State) -> Vec<f64> {
        let h = state.body.support_numbers();
        let share: Vec<f64> = (0..h.len())
            .map(|i| {
                let a = h[i].powf(self.spec.p) * self.spec.mu.atoms[i] / state.eval.weighted_mass;
                let b = state.eval.atoms[i] / state.eval.dual_volume;
                0.5 * (a + b)
            })
            .collect();
        let floor = 1e-3 / self.spec.parametrization.directions() as f64;
        self.spec
            .parametrization
            .collapse(&share)
            .into_iter()
            .map(|m| m.max(floor))
            .collect()
    }
}

/// Orbit-binned relative ℓ¹ gap between `λ C̃_{p,q}(K̃)` and `μ`, with
/// `Ṽ_q(K̃) = 1` and `λ = Σ h̃^p μ`; this is the residual of the rescaled body.
fn residual_of(spec: &ProblemSpec, body: &SupportPolytope, eval: &EntropyEvaluation) -> f64 {
    let lambda = eval.weighted_mass / eval.dual_volume;
    let produced: Vec<f64> = eval
        .atoms
        .iter()
        .zip(body.support_numbers())
        .map(|(a, h)| lambda * a * h.powf(-spec.p))
        .collect();
    orbit_l1_gap(&spec.parametrization, &produced, &spec.mu.atoms)
}

fn orbit_l1_gap(param: &OrbitParametrization, produced: &[f64], target: &[f64]) -> f64 {
    let a = param.collapse(produced);
    let b = param.collapse(target);
    let total = compensated_sum(b.iter().copied());
    compensated_sum(a.iter().zip(&b).map(|(x, y)| (x - y).abs())) / total
}

fn lbfgs_direction(
    grad: &[f64],
    mass: &[f64],
    history: &VecDeque<(Vec<f64>, Vec<f64>)>,
) -> Vec<f64> {
    let mut r: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y) in history.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &r);
        for (ri, yi) in r.iter_mut().zip(y) {
            *ri -= a * yi;
        }
        alphas.push((a, rho));
    }
    let gamma = history
        .back()
        .map(|(s, y)| {
            let num = dot(s, y);
            let den: f64 = y.iter().zip(mass).map(|(yi, m)| yi * yi / m).sum();
            num / den
        })
        .unwrap_or(1.0);
    for (ri, m) in r.iter_mut().zip(mass) {
        *ri *= gamma / m;
    }
    for ((s, y), (a, rho)) in history.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter().map(|v| -v).collect()
}

/// Minimises `Φ` over orbit-constant support numbers, normalising every
/// iterate to `Ṽ_q = 1`.
pub fn minimize_entropy(spec: &ProblemSpec, config: &SolverConfig) -> Result<Minimization> {
    config.validate()?;
    let kernel = DualKernel::new(&spec.grid, &spec.star, spec.q)?;
    let entropy = Entropy::new(&kernel, &spec.mu, spec.p)?;
    let probe = probe_grid(spec.dim())?;
    let param = &spec.parametrization;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x0: Vec<f64> = (0..param.len())
        .map(|_| config.initial_perturbation * rng.random_range(-1.0..1.0))
        .collect();
    let start = Problem {
        spec,
        entropy: entropy.clone(),
        floor: 0.0,
    };
    let (raw, _) = start.state(x0)?;
    let (first, _) = start.normalize(raw)?;
    let h0 = first.body.support_numbers();
    let geometric_mean = (h0.iter().map(|h| h.ln()).sum::<f64>() / h0.len() as f64).exp();
    let problem = Problem {
        spec,
        entropy,
        floor: config.floor_ratio * geometric_mean,
    };
    let (mut state, mut floor_hit) = problem.state(first.x)?;
    let initial_circumradius = if config.track_geometry {
        state.body.geometry_stats(&probe)?.circumradius
    } else {
        f64::NAN
    };

    let mut trace = Vec::new();
    let mut diameter_growth = false;
    let record = |trace: &mut Vec<TraceRow>,
                  growth: &mut bool,
                  state: &State,
                  iter: usize,
                  step: f64,
                  rescale_gap: f64|
     -> Result<f64> {
        let h = state.body.support_numbers();
        let grad_h = param.collapse(&state.eval.gradient);
        let grad_norm = norm(&grad_h);
        let scale_pairing = dot(&state.eval.gradient, h).abs();
        let (diameter, deviation) = if config.track_geometry {
            let stats = state.body.geometry_stats(&probe)?;
            if stats.diameter > 10.0 * initial_circumradius {
                *growth = true;
            }
            (
                stats.diameter,
                state.body.invariance_deviation(&spec.group, &probe)?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        trace.push(TraceRow {
            iter,
            phi: state.eval.value,
            grad_norm,
            residual: residual_of(spec, &state.body, &state.eval),
            step,
            diameter,
            invariance_deviation: deviation,
            scale_pairing,
            rescale_gap,
            volume_gap: (state.eval.dual_volume - 1.0).abs(),
        });
        Ok(grad_norm)
    };

    let memory = match config.direction {
        DirectionRule::Gradient => 0,
        DirectionRule::Lbfgs { memory } => memory,
    };
    let mut history: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut grad_norm = record(&mut trace, &mut diameter_growth, &state, 0, 0.0, 0.0)?;
    let mut status = SolverStatus::MaxIters;
    for iter in 1..=config.max_iters {
        if grad_norm <= config.gradient_tolerance {
            status = SolverStatus::Converged;
            break;
        }
        let mass = problem.mass(&state);
        let preconditioned: Vec<f64> = state
            .grad_x
            .iter()
            .zip(&mass)
            .map(|(g, m)| -g / m)
            .collect();
        let (mut direction, mut step) = if history.is_empty() {
            (preconditioned.clone(), config.initial_step)
        } else {
            (lbfgs_direction(&state.grad_x, &mass, &history), 1.0)
        };
        if dot(&direction, &state.grad_x) >= -1e-14 * norm(&direction) * norm(&state.grad_x) {
            history.clear();
            direction = preconditioned;
            step = config.initial_step;
        }

        let mut accepted = None;
        while step >= config.min_step {
            let x: Vec<f64> = state
                .x
                .iter()
                .zip(&direction)
                .map(|(x, d)| x + step * d)
                .collect();
            let (trial, hit) = match problem.state(x) {
                Ok(t) => t,
                Err(Error::NonFinite { .. }) => {
                    step *= config.shrink;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let moved: f64 = trial
                .x
                .iter()
                .zip(&state.x)
                .zip(&state.grad_x)
                .map(|((a, b), g)| (a - b) * g)
                .sum();
            if trial.eval.value <= state.eval.value + config.armijo * moved {
                accepted = Some((trial, hit));
                break;
            }
            step *= config.shrink;
        }
        let Some((trial, hit)) = accepted else {
            status = SolverStatus::Stalled;
            break;
        };
        floor_hit |= hit;
        let before = trial.eval.value;
        let (next, hit) = problem.normalize(trial)?;
        floor_hit |= hit;
        if memory > 0 {
            let s: Vec<f64> = next.x.iter().zip(&state.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next
                .grad_x
                .iter()
                .zip(&state.grad_x)
                .map(|(a, b)| a - b)
                .collect();
            if dot(&s, &y) > 1e-12 * norm(&s) * norm(&y) {
                history.push_back((s, y));
                if history.len() > memory {
                    history.pop_front();
                }
            }
        }
        let rescale_gap = (next.eval.value - before).abs();
        state = next;
        grad_norm = record(
            &mut trace,
            &mut diameter_growth,
            &state,
            iter,
            step,
            rescale_gap,
        )?;
        if trace.len() > config.stall_window {
            let old = trace[trace.len() - 1 - config.stall_window].phi;
            let drop = old - state.eval.value;
            if drop < config.stall_tolerance * state.eval.value.abs().max(1.0) {
                status = SolverStatus::Stalled;
                break;
            }
        }
    }
    if status == SolverStatus::MaxIters && grad_norm <= config.gradient_tolerance {
        status = SolverStatus::Converged;
    }
    Ok(Minimization {
        body: state.body,
        status,
        trace,
        floor_hit,
        diameter_growth,
        evaluation: state.eval,
    })
}

/// Solution of the measure equation with its diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionReport {
    /// `K = λ^{1/(q−p)} K̃`.
    pub body: SupportPolytope,
    /// `K̃`, normalised to `Ṽ_q(K̃, Q) = 1`.
    pub normalized: SupportPolytope,
    pub lambda: f64,
    pub phi: f64,
    pub status: SolverStatus,
    pub trace: Vec<TraceRow>,
    /// Orbit-binned relative ℓ¹ gap between `C̃_{p,q}(K, Q; ·)` and `μ`.
    pub residual: f64,
    pub euler_lagrange_gap: f64,
    pub floor_hit: bool,
    pub diameter_growth: bool,
    pub wall_time: f64,
}

/// Scales the minimiser to the solution and measures the residual from a
/// fresh evaluation of `C̃_{p,q}(K, Q; ·)`.
pub fn assemble_solution(spec: &ProblemSpec, minimization: Minimization) -> Result<SolutionReport> {
    let eval = &minimization.evaluation;
    let lambda = eval.weighted_mass;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::NonFinite {
            index: 0,
            value: lambda,
        });
    }
    let scale = lambda.powf(1.0 / (spec.q - spec.p));
    let body = minimization.body.scaled(scale)?;
    let kernel = DualKernel::new(&spec.grid, &spec.star, spec.q)?;
    let atoms = kernel.evaluate(&body)?.atoms;
    let produced: Vec<f64> = atoms
        .iter()
        .zip(body.support_numbers())
        .map(|(a, h)| a * h.powf(-spec.p))
        .collect();
    let residual = orbit_l1_gap(&spec.parametrization, &produced, &spec.mu.atoms);
    let euler_lagrange_gap = euler_lagrange_check(spec, &minimization.body, eval, lambda);
    Ok(SolutionReport {
        body,
        normalized: minimization.body,
        lambda,
        phi: eval.value,
        status: minimization.status,
        trace: minimization.trace,
        residual,
        euler_lagrange_gap,
        floor_hit: minimization.floor_hit,
        diameter_growth: minimization.diameter_growth,
        wall_time: 0.0,
    })
}

/// Largest orbit-wise relative gap in `μ_i = λ C̃_{q,i}(K̃) h̃_i^{−p}` over
/// orbits carrying mass.
pub fn euler_lagrange_check(
    spec: &ProblemSpec,
    normalized: &SupportPolytope,
    eval: &EntropyEvaluation,
    lambda: f64,
) -> f64 {
    let produced: Vec<f64> = eval
        .atoms
        .iter()
        .zip(normalized.support_numbers())
        .map(|(a, h)| lambda * a / eval.dual_volume * h.powf(-spec.p))
        .collect();
    let a = spec.parametrization.collapse(&produced);
    let b = spec.parametrization.collapse(&spec.mu.atoms);
    a.iter()
        .zip(&b)
        .filter(|(_, m)| **m > 0.0)
        .map(|(x, m)| (x - m).abs() / m)
        .fold(0.0, f64::max)
}

pub fn solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<SolutionReport> {
    let started = Instant::now();
    let minimization = minimize_entropy(spec, config)?;
    let mut report = assemble_solution(spec, minimization)?;
    report.wall_time = started.elapsed().as_secs_f64();
    Ok(report)
}

/// Root-mean-square of `ρ_K(u)/ρ_target(u) − 1` over the grid nodes.
pub fn rms_radial_error<F: Fn(&[f64]) -> f64>(
    body: &SupportPolytope,
    grid: &SphericalGrid,
    target: F,
) -> Result<f64> {
    let rho = body.radial_at_nodes(grid)?;
    let mean = compensated_sum(rho.iter().enumerate().map(|(j, &(r, _))| {
        let e = r / target(grid.node(j)) - 1.0;
        grid.weights()[j] * e * e
    })) / grid.total_weight();
    Ok(mean.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{standard_group, StandardGroup};

    fn tetrahedral() -> Arc<OrthogonalGroup> {
        Arc::new(standard_group(&StandardGroup::SimplexSymmetry { m: 3 }, 3).unwrap())
    }

    fn ball_problem(c: f64, directions: usize, nodes: usize) -> ProblemSpec {
        let g = tetrahedral();
        let normals = stable_directions(&g, directions).unwrap();
        let grid = build_grid(3, nodes, Scheme::FibonacciSphere, 0)
            .unwrap()
            .symmetrized(&g)
            .unwrap();
        ProblemSpec::new(
            -1.0,
            2.0,
            g,
            StarBody::unit_ball(),
            normals,
            grid,
            move |_| c,
            false,
        )
        .unwrap()
    }

    #[test]
    fn trivial_parametrization_is_identity() {
        let dirs = crate::sphere::geodesic_sphere(1);
        let part = orbits(&OrthogonalGroup::trivial(3), &dirs, 1e-6).unwrap();
        let param = OrbitParametrization::new(part).unwrap();
        assert_eq!(param.len(), dirs.len());
        let v: Vec<f64> = (0..dirs.len()).map(|i| i as f64).collect();
        assert_eq!(param.expand(&v), v);
        assert_eq!(param.collapse(&v), v);
    }

    #[test]
    fn collapse_is_adjoint_of_expand() {
        let g = tetrahedral();
        let dirs = stable_directions(&g, 92).unwrap();
        let param = OrbitParametrization::new(orbits(&g, &dirs, 1e-6).unwrap()).unwrap();
        assert!(param.len() < dirs.len());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let full: Vec<f64> = (0..dirs.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let reduced: Vec<f64> = (0..param.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let lhs = dot(&param.expand(&reduced), &full);
        let rhs = dot(&reduced, &param.collapse(&full));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn stable_directions_hit_the_target_roughly() {
        let g = tetrahedral();
        let dirs = stable_directions(&g, 200).unwrap();
        assert!(dirs.len().abs_diff(200) <= 40, "{}", dirs.len());
        assert!(orbits(&g, &dirs, 1e-6).unwrap().closed);
    }

    #[test]
    fn hypotheses_are_checked() {
        let g = tetrahedral();
        let normals = stable_directions(&g, 60).unwrap();
        let grid = build_grid(3, 1000, Scheme::FibonacciSphere, 0).unwrap();
        let make = |p: f64, q: f64, star: StarBody, group: Arc<OrthogonalGroup>| {
            ProblemSpec::new(
                p,
                q,
                group,
                star,
                normals.clone(),
                grid.clone(),
                |_| 1.0,
                false,
            )
        };
        assert!(matches!(
            make(-5.0, 2.0, StarBody::unit_ball(), g.clone()),
            Err(Error::Hypothesis(_))
        ));
        assert!(matches!(
            make(-1.0, -2.0, StarBody::unit_ball(), g.clone()),
            Err(Error::Hypothesis(_))
        ));
        let skew = StarBody::ellipsoid_axes(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            make(-1.0, 2.0, skew, g.clone()),
            Err(Error::Hypothesis(_))
        ));
        let trivial = Arc::new(OrthogonalGroup::trivial(3));
        assert!(matches!(
            make(-1.0, 2.0, StarBody::unit_ball(), trivial),
            Err(Error::Hypothesis(_))
        ));
        assert!(make(-1.0, 2.0, StarBody::unit_ball(), g).is_ok());
    }

    #[test]
    fn ball_fixed_point_small() {
        let spec = ball_problem(1.0 / 3.0, 150, 4000);
        let report = solve(&spec, &SolverConfig::default()).unwrap();
        let err = rms_radial_error(&report.body, &spec.grid, |_| 1.0).unwrap();
        assert!(err < 0.03, "rms {err}");
        assert!(report.residual < 0.05, "residual {}", report.residual);
        for pair in report.trace.windows(2) {
            assert!(pair[1].phi <= pair[0].phi + 1e-12);
        }
        for row in &report.trace {
            assert!(row.invariance_deviation <= 1e-9);
            assert!(row.volume_gap <= 1e-10);
            assert!(row.scale_pairing <= 1e-9);
        }
    }

    #[test]
    fn perturbed_start_reaches_the_same_value() {
        let spec = ball_problem(1.0 / 3.0, 100, 3000);
        let tight = SolverConfig {
            max_iters: 1000,
            stall_tolerance: 1e-13,
            ..SolverConfig::default()
        };
        let plain = minimize_entropy(&spec, &tight).unwrap();
        let config = SolverConfig {
            initial_perturbation: 0.2,
            seed: 9,
            ..tight
        };
        let perturbed = minimize_entropy(&spec, &config).unwrap();
        let first = perturbed.trace[0].phi;
        let last = perturbed.trace.last().unwrap().phi;
        assert!(first > last + 1e-2);
        assert!(
            (last - plain.trace.last().unwrap().phi).abs() < 1e-6,
            "{last}"
        );
    }
}

//! Worst-case log-growth maximization over a Wasserstein ambiguity ball.
//!
//! The solved program is the finite concave maximization
//!
//! ```text
//! sup over (w, λ, s_j, z_j) of (1/n)(−λε + (1/N) Σ_j s_j)
//! s.t.  min over corners x of [log(c(w) + wᵀx) + z_jᵀ(x − x̂_j)] ≥ s_j
//!       ‖z_j‖_* ≤ λ,  λ ≥ 0,  w in the survivable simplex
//! ```
//!
//! λ and s_j are eliminated (λ = max_j ‖z_j‖_*, s_j = the corner minimum),
//! leaving a concave problem over (w, Z). The outer loop runs projected
//! supergradient ascent with Polyak-style steps on w, the inner engine
//! maximizes over the dual block exactly for each visited w, and pairwise
//! golden-section sweeps polish the weights. Corners are generated lazily
//! by the oracle; a full corner sweep at termination certifies feasibility.
//! Every reported objective comes from a feasible (λ, Z, s), so it is a
//! guaranteed lower bound on the true worst-case growth rate.

mod corner;
mod inner;
mod projection;

pub use corner::{CornerContext, CornerId, SweepReport};
pub use projection::{project_simplex, project_simplex_halfspace};

use serde::{Deserialize, Serialize};

use crate::ambiguity::{dual_norm, ClipReport, NormKind, SampleSet, SupportBox, WassersteinBall};
use crate::cost_model::CostModel;
use crate::error::{Error, Result};

use inner::{inner_solve, InnerConfig, InnerEngine, InnerEval};
use projection::dot;

/// Problem instance: samples, support box, ball radius, costs, horizon.
#[derive(Debug, Clone)]
pub struct DroProblem {
    samples: SampleSet,
    support: SupportBox,
    epsilon: f64,
    cost: CostModel,
    horizon: usize,
    norm_kind: NormKind,
    v0: f64,
    clip: ClipReport,
}

impl DroProblem {
    /// Validate dimensions and clip samples into the support box.
    pub fn new(
        mut samples: SampleSet,
        support: SupportBox,
        epsilon: f64,
        cost: CostModel,
        horizon: usize,
        norm_kind: NormKind,
        v0: f64,
    ) -> Result<Self> {
        let m = support.dimension();
        if samples.dimension() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: samples.dimension(),
            });
        }
        if cost.dimension() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: cost.dimension(),
            });
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "epsilon".into(),
                message: format!("radius must be >= 0, got {epsilon}"),
            });
        }
        if horizon == 0 {
            return Err(Error::InvalidConfig {
                field: "horizon".into(),
                message: "horizon n must be >= 1".into(),
            });
        }
        if !(v0 > 0.0) {
            return Err(Error::InvalidConfig {
                field: "v0".into(),
                message: format!("initial value must be positive, got {v0}"),
            });
        }
        let clip = samples.clip_to_box(&support)?;
        Ok(Self {
            samples,
            support,
            epsilon,
            cost,
            horizon,
            norm_kind,
            v0,
            clip,
        })
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn norm_kind(&self) -> NormKind {
        self.norm_kind
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    pub fn dimension(&self) -> usize {
        self.support.dimension()
    }

    pub fn clip_report(&self) -> ClipReport {
        self.clip
    }
}

/// Solver tuning. Tolerances must be positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target accuracy of the reported objective.
    pub objective_tol: f64,
    /// Total outer iteration budget for the subgradient phases.
    pub max_iterations: usize,
    /// Maximum number of non-degenerate box dimensions for corner
    /// enumeration (the final sweep costs 2^d per sample).
    pub corner_cap: usize,
    /// Margin δ_s replacing the strict survivability inequality.
    pub survivability_margin: f64,
    /// Smallest admissible log argument.
    pub log_floor: f64,
    /// Seed for the diagnostic perturbation probes.
    pub seed: u64,
    /// Frank-Wolfe duality-gap target of the inner engine.
    pub inner_gap_tol: f64,
    /// Frank-Wolfe iteration cap per sample and λ.
    pub fw_max_iters: usize,
    /// Bisection steps of the λ search.
    pub lambda_bisections: usize,
    /// Maximum pairwise golden-section sweeps per refinement phase.
    pub refine_sweeps: usize,
    /// Alternations of subgradient and refinement phases.
    pub rounds: usize,
    /// In-ball distributions sampled for the diagnostic gap estimate
    /// (0 disables the probe).
    pub perturbation_probes: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            objective_tol: 1e-6,
            max_iterations: 600,
            corner_cap: 20,
            survivability_margin: 1e-8,
            log_floor: 1e-12,
            seed: 0,
            inner_gap_tol: 1e-11,
            fw_max_iters: 240,
            lambda_bisections: 64,
            refine_sweeps: 40,
            rounds: 2,
            perturbation_probes: 64,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("objective_tol", self.objective_tol),
            ("survivability_margin", self.survivability_margin),
            ("log_floor", self.log_floor),
            ("inner_gap_tol", self.inner_gap_tol),
        ];
        for (name, v) in positives {
            if !(v > 0.0) {
                return Err(Error::InvalidConfig {
                    field: name.into(),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// The survivable weight set: the simplex intersected with
/// `{w : Σ w_i lower_i + c(w) ≥ δ_s}`.
#[derive(Debug, Clone)]
pub struct FeasibleSet {
    lower: Vec<f64>,
    cost: CostModel,
    v0: f64,
    /// Margin δ_s standing in for the strict inequality.
    pub delta: f64,
}

impl FeasibleSet {
    pub fn new(support: &SupportBox, cost: &CostModel, v0: f64, delta: f64) -> Self {
        Self {
            lower: support.lower().to_vec(),
            cost: cost.clone(),
            v0,
            delta,
        }
    }

    /// `Σ w_i lower_i + c(w)`; positive values certify survival for every
    /// in-box realization.
    pub fn margin_at(&self, w: &[f64]) -> f64 {
        dot(w, &self.lower) + self.cost.cost_fraction_raw(w, self.v0)
    }

    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        let sum: f64 = w.iter().sum();
        (sum - 1.0).abs() <= tol
            && w.iter().all(|&x| x >= -tol)
            && self.margin_at(w) >= self.delta - tol
    }

    /// Vertex with the largest margin (used as the feasibility anchor).
    pub fn best_vertex(&self) -> (usize, f64) {
        let m = self.lower.len();
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..m {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            let margin = self.margin_at(&e);
            if margin > best.1 {
                best = (i, margin);
            }
        }
        best
    }

    pub fn is_nonempty(&self) -> bool {
        self.best_vertex().1 >= self.delta
    }

    /// Margin coefficients when the cost model keeps the margin linear in w
    /// (zero or proportional costs): margin(w) = aᵀw + 1.
    fn linear_coeffs(&self) -> Option<Vec<f64>> {
        let rates = self.cost.proportional_rates()?;
        Some(
            self.lower
                .iter()
                .zip(&rates)
                .map(|(&l, &r)| l - r)
                .collect(),
        )
    }

    /// Euclidean projection onto the set: simplex projection first, then the
    /// survivability half-space via bisection on its dual multiplier. For
    /// nonlinear (piecewise) costs the projection falls back to walking
    /// toward the best vertex along the concave margin.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let w = project_simplex(v);
        if self.margin_at(&w) >= self.delta {
            return w;
        }
        if let Some(a) = self.linear_coeffs() {
            let p = project_simplex_halfspace(v, &a, self.delta - 1.0);
            if self.margin_at(&p) >= self.delta - 1e-12 {
                return p;
            }
        }
        // concave margin along the segment toward the anchor vertex crosses
        // δ_s exactly once
        let (anchor, anchor_margin) = self.best_vertex();
        let mut target = vec![0.0; v.len()];
        target[anchor] = 1.0;
        if anchor_margin < self.delta {
            return target; // infeasible set; caller rejects separately
        }
        let mix = |t: f64| -> Vec<f64> {
            w.iter()
                .zip(&target)
                .map(|(&a, &b)| (1.0 - t) * a + t * b)
                .collect()
        };
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.margin_at(&mix(mid)) >= self.delta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        mix(hi)
    }

    /// Feasible step interval for the segment `w + t d` given simplex bounds
    /// `[t_lo, t_hi]`; shrinks the bounds until the margin holds at both
    /// ends (the margin is concave along the segment).
    fn feasible_interval(&self, w: &[f64], d: &[f64], mut t_lo: f64, mut t_hi: f64) -> (f64, f64) {
        let at = |t: f64| -> Vec<f64> { w.iter().zip(d).map(|(&a, &b)| a + t * b).collect() };
        if self.margin_at(&at(t_lo)) < self.delta {
            let mut bad = t_lo;
            let mut good = 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (bad + good);
                if self.margin_at(&at(mid)) >= self.delta {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            t_lo = good;
        }
        if self.margin_at(&at(t_hi)) < self.delta {
            let mut bad = t_hi;
            let mut good = 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (bad + good);
                if self.margin_at(&at(mid)) >= self.delta {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            t_hi = good;
        }
        (t_lo, t_hi)
    }
}

/// Solved variables plus certification data.
#[derive(Debug, Clone, Serialize)]
pub struct DroSolution {
    pub weights: Vec<f64>,
    pub lambda: f64,
    /// Worst-case growth rate per period (nats).
    pub objective: f64,
    pub epsilon: f64,
    pub norm_kind: NormKind,
    pub horizon: usize,
    #[serde(skip)]
    pub s: Vec<f64>,
    #[serde(skip)]
    pub z: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

/// Solver health report; see the invariants asserted by the tests.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub inner_iterations: usize,
    pub converged: bool,
    /// Distinct corners generated lazily across all samples.
    pub active_corners: usize,
    pub survivability_margin: f64,
    pub simplex_residual: f64,
    pub lambda_finite: bool,
    pub s_min: f64,
    pub s_max: f64,
    /// Certified inner-maximization gap (upper bound minus reported value).
    pub inner_gap: f64,
    /// Optional estimate of the approximation gap: smallest empirical
    /// expected log growth over sampled in-ball distributions minus the
    /// reported objective.
    pub perturbation_gap: Option<f64>,
    /// Full corner sweep at termination (absent on the ε = 0 fast path,
    /// which does not carry corner constraints).
    pub corner_sweep: Option<SweepReport>,
    pub clip: Option<ClipReport>,
}

/// `Σ w_i lower_i + c(w)`: positive values certify a strictly positive
/// account for every realization in the support box and, with it, for every
/// distribution in the ambiguity ball.
pub fn survivability_margin(w: &[f64], support: &SupportBox, cost: &CostModel, v0: f64) -> f64 {
    dot(w, support.lower()) + cost.cost_fraction_raw(w, v0)
}

/// Constraint integrand `log(c(w) + wᵀx) + zᵀ(x − x̂)`; arguments below the
/// floor count as −∞ (maximally violated).
pub fn phi(
    w: &[f64],
    z: &[f64],
    x: &[f64],
    xhat: &[f64],
    cost: &CostModel,
    v0: f64,
    log_floor: f64,
) -> f64 {
    let arg = cost.cost_fraction_raw(w, v0) + dot(w, x);
    if arg < log_floor {
        return f64::NEG_INFINITY;
    }
    let lin: f64 = z
        .iter()
        .zip(x)
        .zip(xhat)
        .map(|((&zi, &xi), &hi)| zi * (xi - hi))
        .sum();
    arg.ln() + lin
}

/// Exact minimum of [`phi`] over every corner of the box, by enumeration in
/// lexicographic order; ties keep the lowest corner index. Errors when the
/// corner count exceeds the cap.
pub fn inner_constraint_min(
    w: &[f64],
    z: &[f64],
    xhat: &[f64],
    support: &SupportBox,
    cost: &CostModel,
    v0: f64,
    log_floor: f64,
    cap: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for corner in support.extreme_points(cap)? {
        let val = phi(w, z, &corner, xhat, cost, v0, log_floor);
        if best.as_ref().map_or(true, |(b, _)| val < *b) {
            best = Some((val, corner));
        }
    }
    Ok(best.expect("a box has at least one corner"))
}

/// The reduced objective after eliminating λ and s:
/// `(1/n)(−ε·max_j ‖z_j‖_* + (1/N) Σ_j min over corners of φ_j)`.
///
/// At ε = 0 the ball is the singleton empirical distribution and the value
/// is the classical empirical log growth `(1/n)(1/N) Σ log(c(w) + wᵀx̂_j)`,
/// matching the fast-path dispatch. Errors when `w` is outside the feasible
/// set.
pub fn reduced_objective(
    problem: &DroProblem,
    w: &[f64],
    zs: &[Vec<f64>],
    config: &SolverConfig,
) -> Result<f64> {
    let feasible = FeasibleSet::new(
        &problem.support,
        &problem.cost,
        problem.v0,
        config.survivability_margin,
    );
    if !feasible.contains(w, 1e-9) {
        return Err(Error::Infeasible(format!(
            "weights violate the survivable simplex (margin {})",
            feasible.margin_at(w)
        )));
    }
    if zs.len() != problem.samples.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.samples.len(),
            got: zs.len(),
        });
    }
    let c = problem.cost.cost_fraction_raw(w, problem.v0);
    if problem.epsilon == 0.0 {
        let mean = problem
            .samples
            .samples()
            .iter()
            .map(|x| (c + dot(w, x)).max(config.log_floor).ln())
            .sum::<f64>()
            / problem.samples.len() as f64;
        return Ok(mean / problem.horizon as f64);
    }
    let ctx = CornerContext::new(&problem.support, w, c, config.log_floor);
    let lambda = zs
        .iter()
        .map(|z| dual_norm(z, problem.norm_kind))
        .fold(0.0f64, f64::max);
    let mean_s = zs
        .iter()
        .zip(problem.samples.samples())
        .map(|(z, xhat)| ctx.corner_min(z, xhat).value)
        .sum::<f64>()
        / problem.samples.len() as f64;
    Ok((-lambda * problem.epsilon + mean_s) / problem.horizon as f64)
}

/// Stateful fixed-weight evaluator of the worst-case objective: maximizes
/// the dual block only, with warm starts across calls. This is the same
/// inner routine the solver ascends, exposed so oracle-style verification
/// (e.g. exhaustive weight grids) can reuse it.
pub struct WorstCaseEvaluator<'a> {
    problem: &'a DroProblem,
    inner_cfg: InnerConfig,
    log_floor: f64,
    engine: InnerEngine,
}

impl<'a> WorstCaseEvaluator<'a> {
    pub fn new(problem: &'a DroProblem, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            problem,
            inner_cfg: InnerConfig {
                gap_tol: config.inner_gap_tol,
                fw_max_iters: config.fw_max_iters,
                lambda_bisections: config.lambda_bisections,
                smoothing_floor: 1e-11,
            },
            log_floor: config.log_floor,
            engine: InnerEngine::new(problem.samples.len()),
        })
    }

    /// Worst-case per-period growth rate at `w` (certified lower bound).
    pub fn value(&mut self, w: &[f64]) -> f64 {
        let problem = self.problem;
        let c = problem.cost.cost_fraction_raw(w, problem.v0);
        let n_scale = 1.0 / problem.horizon as f64;
        if problem.epsilon == 0.0 {
            let mean = problem
                .samples
                .samples()
                .iter()
                .map(|x| (c + dot(w, x)).max(self.log_floor).ln())
                .sum::<f64>()
                / problem.samples.len() as f64;
            return mean * n_scale;
        }
        let ctx = CornerContext::new(&problem.support, w, c, self.log_floor);
        let grad_c = problem.cost.cost_fraction_gradient(w, problem.v0);
        let ev = inner_solve(
            &ctx,
            problem.samples.samples(),
            problem.epsilon,
            problem.norm_kind,
            &self.inner_cfg,
            &mut self.engine,
            &grad_c,
        );
        ev.value * n_scale
    }
}

/// Shared golden-section refinement along all coordinate-pair directions.
/// Returns the improved point, its value, and the evaluation count.
fn refine_pairwise<F>(
    feasible: &FeasibleSet,
    mut w: Vec<f64>,
    mut best: f64,
    sweeps: usize,
    eval: &mut F,
) -> (Vec<f64>, f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let m = w.len();
    let mut evals = 0;
    if m < 2 {
        return (w, best, evals);
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..sweeps {
        let mut improved = false;
        for i in 0..m {
            for k in (i + 1)..m {
                let mut d = vec![0.0; m];
                d[i] = 1.0;
                d[k] = -1.0;
                let (t_lo, t_hi) = feasible.feasible_interval(&w, &d, -w[i], w[k]);
                if t_hi - t_lo < 1e-14 {
                    continue;
                }
                let point = |t: f64| -> Vec<f64> {
                    let mut p: Vec<f64> = w.iter().zip(&d).map(|(&a, &b)| a + t * b).collect();
                    // clean tiny negatives from rounding
                    for x in &mut p {
                        if *x < 0.0 {
                            *x = 0.0;
                        }
                    }
                    p
                };
                let mut a = t_lo;
                let mut b = t_hi;
                let mut x1 = b - INV_PHI * (b - a);
                let mut x2 = a + INV_PHI * (b - a);
                let mut f1 = eval(&point(x1));
                let mut f2 = eval(&point(x2));
                evals += 2;
                for _ in 0..48 {
                    if f1 < f2 {
                        a = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = a + INV_PHI * (b - a);
                        f2 = eval(&point(x2));
                    } else {
                        b = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = b - INV_PHI * (b - a);
                        f1 = eval(&point(x1));
                    }
                    evals += 1;
                    if b - a < 1e-13 {
                        break;
                    }
                }
                let t_star = if f1 >= f2 { x1 } else { x2 };
                let cand = point(t_star);
                let val = eval(&cand);
                evals += 1;
                if val > best + 1e-15 {
                    best = val;
                    w = cand;
                    improved = true;
                } else {
                    // leave the engine state at the kept point
                    let _ = eval(&w);
                    evals += 1;
                }
            }
        }
        if !improved {
            break;
        }
    }
    (w, best, evals)
}

/// Polyak-style projected supergradient ascent with an adaptive target.
/// `eval` returns the value and a supergradient. Returns the best point,
/// its value, iterations used, and whether the vanishing-step criterion
/// fired.
fn polyak_ascent<F>(
    feasible: &FeasibleSet,
    mut w: Vec<f64>,
    eval: &mut F,
    delta0: f64,
    tol: f64,
    max_iters: usize,
) -> (Vec<f64>, f64, usize, bool)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (mut cur_val, mut cur_grad) = eval(&w);
    let mut w_best = w.clone();
    let mut best = cur_val;
    let mut delta = delta0;
    let mut stall = 0usize;
    let mut iters = 0usize;
    let mut vanished = false;

    while iters < max_iters {
        iters += 1;
        let gn2: f64 = cur_grad.iter().map(|g| g * g).sum();
        if gn2 < 1e-30 {
            vanished = true;
            break;
        }
        let target = best + delta;
        let mut step = (target - cur_val) / gn2;
        // cap the displacement at the simplex diameter
        let max_step = 2.0 / gn2.sqrt();
        if step > max_step {
            step = max_step;
        }
        let next: Vec<f64> = w
            .iter()
            .zip(&cur_grad)
            .map(|(&wi, &gi)| wi + step * gi)
            .collect();
        w = feasible.project(&next);
        let (v, g) = eval(&w);
        cur_val = v;
        cur_grad = g;
        if v > best + 1e-14 {
            best = v;
            w_best = w.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= 4 {
                delta *= 0.5;
                stall = 0;
                if delta < 0.25 * tol {
                    vanished = true;
                    break;
                }
            }
        }
    }
    (w_best, best, iters, vanished)
}

fn assert_problem_ready(problem: &DroProblem, config: &SolverConfig) -> Result<FeasibleSet> {
    config.validate()?;
    let d = problem.support.non_degenerate().len();
    if d > config.corner_cap {
        return Err(Error::CornerCapExceeded {
            dims: d,
            cap: config.corner_cap,
        });
    }
    let feasible = FeasibleSet::new(
        &problem.support,
        &problem.cost,
        problem.v0,
        config.survivability_margin,
    );
    if !feasible.is_nonempty() {
        return Err(Error::Infeasible(format!(
            "no vertex satisfies the survivability margin {}",
            config.survivability_margin
        )));
    }
    Ok(feasible)
}

/// Diagnostic upper envelope: smallest empirical expected log growth over
/// seeded in-ball perturbations of the sample set.
fn perturbation_envelope(problem: &DroProblem, w: &[f64], config: &SolverConfig) -> Option<f64> {
    if config.perturbation_probes == 0 {
        return None;
    }
    let ball = WassersteinBall::new(
        problem.samples.clone(),
        problem.epsilon,
        problem.norm_kind,
    )
    .ok()?;
    let c = problem.cost.cost_fraction_raw(w, problem.v0);
    let mut envelope = f64::INFINITY;
    for probe in 0..config.perturbation_probes {
        let set = ball.perturb_within(&problem.support, config.seed.wrapping_add(probe as u64));
        let mean: f64 = set
            .samples()
            .iter()
            .map(|x| (c + dot(w, x)).max(config.log_floor).ln())
            .sum::<f64>()
            / set.len() as f64;
        envelope = envelope.min(mean / problem.horizon as f64);
    }
    Some(envelope)
}

/// Solve the robust program. ε = 0 dispatches to the classical fast path.
/// Non-convergence is not an error: the best iterate is returned with
/// `diagnostics.converged == false`.
pub fn solve(problem: &DroProblem, config: &SolverConfig) -> Result<DroSolution> {
    let feasible = assert_problem_ready(problem, config)?;
    if problem.epsilon == 0.0 {
        return Ok(elg_with_feasible(problem, &feasible, config));
    }

    let n_scale = 1.0 / problem.horizon as f64;
    let inner_cfg = InnerConfig {
        gap_tol: config.inner_gap_tol,
        fw_max_iters: config.fw_max_iters,
        lambda_bisections: config.lambda_bisections,
        smoothing_floor: 1e-11,
    };
    let mut engine = InnerEngine::new(problem.samples.len());
    let mut inner_total = 0usize;

    let run_inner = |w: &[f64], engine: &mut InnerEngine| -> InnerEval {
        let c = problem.cost.cost_fraction_raw(w, problem.v0);
        let ctx = CornerContext::new(&problem.support, w, c, config.log_floor);
        let grad_c = problem.cost.cost_fraction_gradient(w, problem.v0);
        inner_solve(
            &ctx,
            problem.samples.samples(),
            problem.epsilon,
            problem.norm_kind,
            &inner_cfg,
            engine,
            &grad_c,
        )
    };

    let m = problem.dimension();
    let mut w = feasible.project(&vec![1.0 / m as f64; m]);
    let mut best_val = f64::NEG_INFINITY;
    let mut w_best = w.clone();
    let mut outer_iterations = 0usize;
    let mut converged = false;

    let budget_per_round = (config.max_iterations / config.rounds.max(1)).max(1);
    for round in 0..config.rounds.max(1) {
        let delta0 = if round == 0 {
            0.05 * (1.0 + best_val.abs().min(10.0))
        } else {
            100.0 * config.objective_tol
        };
        let mut eval_grad = |x: &[f64]| -> (f64, Vec<f64>) {
            let ev = run_inner(x, &mut engine);
            inner_total += ev.fw_iters;
            let g: Vec<f64> = ev.supergrad.iter().map(|v| v * n_scale).collect();
            (ev.value * n_scale, g)
        };
        let (w_p, val_p, iters, vanished) = polyak_ascent(
            &feasible,
            w.clone(),
            &mut eval_grad,
            delta0,
            config.objective_tol,
            budget_per_round,
        );
        outer_iterations += iters;
        converged = vanished;
        if val_p > best_val {
            best_val = val_p;
            w_best = w_p;
        }

        let mut eval_val = |x: &[f64]| -> f64 {
            let ev = run_inner(x, &mut engine);
            inner_total += ev.fw_iters;
            ev.value * n_scale
        };
        let (w_r, val_r, _) = refine_pairwise(
            &feasible,
            w_best.clone(),
            best_val,
            config.refine_sweeps,
            &mut eval_val,
        );
        best_val = val_r;
        w_best = w_r;
        w = w_best.clone();
    }

    // final tight evaluation and certificate assembly
    let final_eval = run_inner(&w_best, &mut engine);
    inner_total += final_eval.fw_iters;
    let objective = final_eval.value * n_scale;
    let sweep = {
        let c = problem.cost.cost_fraction_raw(&w_best, problem.v0);
        let ctx = CornerContext::new(&problem.support, &w_best, c, config.log_floor);
        ctx.sweep(
            &final_eval.zs,
            problem.samples.samples(),
            &final_eval.s,
            1e-7,
        )
    };
    let s_min = final_eval.s.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = final_eval
        .s
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let simplex_residual = (w_best.iter().sum::<f64>() - 1.0).abs();
    let margin = feasible.margin_at(&w_best);
    let perturbation_gap = perturbation_envelope(problem, &w_best, config)
        .map(|envelope| envelope - objective);

    Ok(DroSolution {
        weights: w_best,
        lambda: final_eval.lambda_report,
        objective,
        epsilon: problem.epsilon,
        norm_kind: problem.norm_kind,
        horizon: problem.horizon,
        s: final_eval.s,
        z: final_eval.zs,
        diagnostics: Diagnostics {
            iterations: outer_iterations,
            inner_iterations: inner_total,
            converged,
            active_corners: final_eval.active_corners,
            survivability_margin: margin,
            simplex_residual,
            lambda_finite: final_eval.lambda_report.is_finite(),
            s_min,
            s_max,
            inner_gap: (final_eval.upper - final_eval.value).max(0.0) * n_scale,
            perturbation_gap,
            corner_sweep: Some(sweep),
            clip: Some(problem.clip),
        },
    })
}

/// Classical log-optimal fast path (ε = 0): maximize the empirical mean of
/// `(1/n) log(c(w) + wᵀx̂_j)` over the survivable simplex.
pub fn elg_classical(
    samples: &SampleSet,
    cost: &CostModel,
    horizon: usize,
    v0: f64,
    config: &SolverConfig,
) -> Result<DroSolution> {
    // implicit support from the empirical sample bounds
    let m = samples.dimension();
    let mut lower = vec![f64::INFINITY; m];
    let mut upper = vec![f64::NEG_INFINITY; m];
    for s in samples.samples() {
        for i in 0..m {
            lower[i] = lower[i].min(s[i]);
            upper[i] = upper[i].max(s[i]);
        }
    }
    let support = SupportBox::new(lower, upper)?;
    let problem = DroProblem::new(
        samples.clone(),
        support,
        0.0,
        cost.clone(),
        horizon,
        NormKind::Two,
        v0,
    )?;
    let feasible = assert_problem_ready(&problem, config)?;
    Ok(elg_with_feasible(&problem, &feasible, config))
}

fn elg_with_feasible(
    problem: &DroProblem,
    feasible: &FeasibleSet,
    config: &SolverConfig,
) -> DroSolution {
    let n_scale = 1.0 / problem.horizon as f64;
    let n_samples = problem.samples.len() as f64;
    let floor = config.log_floor;

    let value_and_grad = |w: &[f64]| -> (f64, Vec<f64>) {
        let c = problem.cost.cost_fraction_raw(w, problem.v0);
        let grad_c = problem.cost.cost_fraction_gradient(w, problem.v0);
        let mut value = 0.0;
        let mut grad = vec![0.0; w.len()];
        for x in problem.samples.samples() {
            let arg = (c + dot(w, x)).max(floor);
            value += arg.ln();
            let inv = 1.0 / (arg * n_samples);
            for i in 0..w.len() {
                grad[i] += (x[i] + grad_c[i]) * inv;
            }
        }
        (value / n_samples * n_scale, grad.iter().map(|g| g * n_scale).collect())
    };

    let m = problem.dimension();
    let mut w = feasible.project(&vec![1.0 / m as f64; m]);
    let (mut val, mut grad) = value_and_grad(&w);
    let mut iterations = 0usize;
    let mut converged = false;

    // projected gradient ascent with backtracking
    let mut step = 1.0;
    for _ in 0..config.max_iterations {
        iterations += 1;
        let mut improved = false;
        let mut local = step;
        for _ in 0..40 {
            let trial: Vec<f64> = w
                .iter()
                .zip(&grad)
                .map(|(&wi, &gi)| wi + local * gi)
                .collect();
            let trial = feasible.project(&trial);
            let (tv, tg) = value_and_grad(&trial);
            if tv > val + 1e-16 {
                let move_norm: f64 = trial
                    .iter()
                    .zip(&w)
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                w = trial;
                val = tv;
                grad = tg;
                improved = true;
                step = local * 2.0;
                if move_norm < 1e-14 {
                    converged = true;
                }
                break;
            }
            local *= 0.5;
        }
        if !improved {
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let mut eval_val = |x: &[f64]| -> f64 { value_and_grad(x).0 };
    let (w_fin, val_fin, _) =
        refine_pairwise(feasible, w, val, config.refine_sweeps, &mut eval_val);

    let c = problem.cost.cost_fraction_raw(&w_fin, problem.v0);
    let s: Vec<f64> = problem
        .samples
        .samples()
        .iter()
        .map(|x| (c + dot(&w_fin, x)).max(floor).ln())
        .collect();
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let s_max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let margin = feasible.margin_at(&w_fin);
    let simplex_residual = (w_fin.iter().sum::<f64>() - 1.0).abs();
    let zeros = vec![vec![0.0; problem.dimension()]; problem.samples.len()];

    DroSolution {
        weights: w_fin.clone(),
        lambda: 0.0,
        objective: val_fin,
        epsilon: 0.0,
        norm_kind: problem.norm_kind,
        horizon: problem.horizon,
        s,
        z: zeros,
        diagnostics: Diagnostics {
            iterations,
            inner_iterations: 0,
            converged,
            active_corners: 0,
            survivability_margin: margin,
            simplex_residual,
            lambda_finite: true,
            s_min,
            s_max,
            inner_gap: 0.0,
            perturbation_gap: None,
            corner_sweep: None,
            clip: Some(problem.clip),
        },
    }
}

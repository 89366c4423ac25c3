//! One-step estimators, full proximal-gradient and proximal-Newton runs, and the
//! `c / sqrt(n)` stopping rule.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Curvature, ParamPoint, ScalingMatrix};
use crate::objective::{CompositeObjective, NonsmoothTerm, RegularityConstants, SmoothTerm};
use crate::prox::{scaled_prox, InnerSolveConfig};

/// Consecutive objective increases after which a run is declared diverging.
pub const DIVERGENCE_PATIENCE: usize = 10;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `theta_init - C^{-1} grad g(theta_init)`.
pub fn one_newton_step(
    g: &dyn SmoothTerm,
    c: &ScalingMatrix,
    theta_init: &ParamPoint,
) -> Result<ParamPoint> {
    check_dim(g.dim(), theta_init.dim())?;
    check_dim(c.dim(), theta_init.dim())?;
    let grad = g.gradient(theta_init);
    theta_init.like(theta_init.as_vector() - c.solve(&grad))
}

/// One scaled proximal gradient step: `prox_h^C(theta_init - C^{-1} grad g(theta_init))`.
pub fn ose_prox_gradient(
    g: &dyn SmoothTerm,
    h: &NonsmoothTerm,
    c: &ScalingMatrix,
    theta_init: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ParamPoint> {
    check_dim(g.dim(), h.dim())?;
    let v = one_newton_step(g, c, theta_init)?;
    let f = CompositeObjective::nonsmooth_only(h.clone());
    Ok(scaled_prox(&f, c, &v, cfg)?.point)
}

/// One scaled proximal descent step: `prox_f^C(theta_init)`.
pub fn ose_prox_descent(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    theta_init: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ParamPoint> {
    Ok(scaled_prox(f, c, theta_init, cfg)?.point)
}

/// `theta - alpha grad g(theta)`.
pub fn gd_step_fixed(g: &dyn SmoothTerm, alpha: f64, theta: &ParamPoint) -> Result<ParamPoint> {
    check_dim(g.dim(), theta.dim())?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::contract("gradient step length must be positive"));
    }
    theta.like(theta.as_vector() - g.gradient(theta) * alpha)
}

#[derive(Clone, Debug)]
pub struct ExactStep {
    pub point: ParamPoint,
    /// `None` when the gradient vanishes and the step length is undefined.
    pub alpha: Option<f64>,
}

/// Steepest descent with the exact step `alpha = g^T g / (g^T Q g)` on a
/// quadratic with constant Hessian `Q`.
pub fn gd_step_exact(g: &dyn SmoothTerm, theta: &ParamPoint) -> Result<ExactStep> {
    check_dim(g.dim(), theta.dim())?;
    let q = g
        .hessian(theta)
        .ok_or_else(|| Error::contract("exact step needs the quadratic's Hessian"))?;
    let grad = g.gradient(theta);
    let gg = grad.norm_squared();
    if gg == 0.0 {
        return Ok(ExactStep {
            point: theta.clone(),
            alpha: None,
        });
    }
    let gqg = grad.dot(&q.apply(&grad));
    if !(gqg > 0.0) {
        return Err(Error::contract("exact step needs positive curvature along the gradient"));
    }
    let alpha = gg / gqg;
    Ok(ExactStep {
        point: theta.like(theta.as_vector() - grad * alpha)?,
        alpha: Some(alpha),
    })
}

/// How the scaling `C` is chosen at each iteration of a full run.
#[derive(Clone, Debug)]
pub enum ScalingRule {
    Fixed(ScalingMatrix),
    /// Ridge-adapted Hessian at the starting point, kept fixed.
    HessianAtInit,
    /// Ridge-adapted Hessian at every iterate (proximal Newton).
    HessianAtIterate,
    /// Model-supplied Fisher information.
    FisherInformation(ScalingMatrix),
}

#[derive(Clone, Debug)]
pub struct OseConfig {
    pub scaling: ScalingRule,
    pub inner: InnerSolveConfig,
}

impl OseConfig {
    pub fn new(scaling: ScalingRule) -> Self {
        OseConfig {
            scaling,
            inner: InnerSolveConfig::default(),
        }
    }
}

fn hessian_scaling(obj: &CompositeObjective, theta: &DVector<f64>) -> Result<ScalingMatrix> {
    let h: Curvature = obj
        .smooth_hessian(theta)
        .ok_or_else(|| Error::contract("smooth term supplies no Hessian"))?;
    ScalingMatrix::ridge_adapted(&h)
}

/// Backtracking parameters wrapped around full runs (never single steps).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub shrink: f64,
    pub c: f64,
    pub max_steps: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            shrink: 0.5,
            c: 1e-4,
            max_steps: 50,
        }
    }
}

/// Stop once the proximal-gradient step is no longer than `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    #[serde(with = "crate::extreal")]
    pub threshold: f64,
    pub max_iterations: usize,
    pub sample_size: usize,
    pub line_search: LineSearch,
}

impl StopRule {
    pub fn new(threshold: f64, max_iterations: usize) -> Self {
        StopRule {
            threshold,
            max_iterations,
            sample_size: 0,
            line_search: LineSearch::default(),
        }
    }

    /// Threshold `c / sqrt(n)`.
    pub fn root_n(c: f64, n: usize, max_iterations: usize) -> Self {
        StopRule {
            threshold: c / (n as f64).sqrt(),
            max_iterations,
            sample_size: n,
            line_search: LineSearch::default(),
        }
    }

    /// Long run used to produce reference minimizers.
    pub fn reference() -> Self {
        Self::new(REFERENCE_THRESHOLD, REFERENCE_MAX_ITERATIONS)
    }

    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::contract("stopping threshold must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::contract("max_iterations must be at least 1"));
        }
        let ls = &self.line_search;
        if !(ls.shrink > 0.0 && ls.shrink < 1.0 && ls.c > 0.0 && ls.c < 1.0) {
            return Err(Error::contract("line search needs 0 < shrink < 1 and 0 < c < 1"));
        }
        Ok(())
    }
}

pub const REFERENCE_THRESHOLD: f64 = 1e-12;
pub const REFERENCE_MAX_ITERATIONS: usize = 1_000_000;
pub const REFERENCE_RESIDUAL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoppingReason {
    StepBelowThreshold,
    MaxIterations,
    Stationary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoppingReport {
    #[serde(with = "crate::extreal")]
    pub threshold: f64,
    /// Number of iterations taken when the run stopped.
    pub triggered_at: usize,
    /// Norm of the last full proximal-gradient step.
    #[serde(with = "crate::extreal")]
    pub final_step_norm: f64,
    pub constants: Option<RegularityConstants>,
}

#[derive(Clone, Debug)]
pub struct EstimatorTrace {
    pub iterates: Vec<ParamPoint>,
    /// `||theta_{k+1} - theta_k||` of the steps actually taken.
    pub step_norms: Vec<f64>,
    pub objective_values: Vec<f64>,
    pub stopping_reason: StoppingReason,
    pub sample_size_n: usize,
    pub stopping: StoppingReport,
}

impl EstimatorTrace {
    pub fn final_point(&self) -> &ParamPoint {
        self.iterates.last().expect("trace holds the starting point")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_values.last().expect("trace holds the starting value")
    }

    pub fn iterations(&self) -> usize {
        self.step_norms.len()
    }
}

/// Scaled proximal gradient descent with backtracking, stopped by `stop`.
pub fn run_prox_gradient(
    obj: &CompositeObjective,
    rule: &OseConfig,
    theta0: &ParamPoint,
    stop: &StopRule,
) -> Result<EstimatorTrace> {
    run(obj, &rule.scaling, &rule.inner, theta0, stop)
}

/// Proximal Newton: the scaling is the ridge-adapted Hessian at each iterate.
pub fn run_prox_newton(
    obj: &CompositeObjective,
    theta0: &ParamPoint,
    stop: &StopRule,
    cfg: &InnerSolveConfig,
) -> Result<EstimatorTrace> {
    if obj.smooth_hessian(theta0).is_none() {
        return Err(Error::contract("proximal Newton needs a Hessian"));
    }
    run(obj, &ScalingRule::HessianAtIterate, cfg, theta0, stop)
}

fn run(
    obj: &CompositeObjective,
    scaling: &ScalingRule,
    inner: &InnerSolveConfig,
    theta0: &ParamPoint,
    stop: &StopRule,
) -> Result<EstimatorTrace> {
    stop.validate()?;
    check_dim(obj.dim(), theta0.dim())?;
    let h_only = CompositeObjective::nonsmooth_only(obj.nonsmooth.clone());
    let fixed_c = match scaling {
        ScalingRule::Fixed(c) | ScalingRule::FisherInformation(c) => Some(c.clone()),
        ScalingRule::HessianAtInit => Some(hessian_scaling(obj, theta0)?),
        ScalingRule::HessianAtIterate => None,
    };
    if let Some(c) = &fixed_c {
        check_dim(c.dim(), theta0.dim())?;
    }
    let ls = stop.line_search;

    let mut theta = theta0.clone();
    let mut value = obj.value(&theta);
    let mut trace = EstimatorTrace {
        iterates: vec![theta.clone()],
        step_norms: Vec::new(),
        objective_values: vec![value],
        stopping_reason: StoppingReason::MaxIterations,
        sample_size_n: stop.sample_size,
        stopping: StoppingReport {
            threshold: stop.threshold,
            triggered_at: 0,
            final_step_norm: f64::NAN,
            constants: None,
        },
    };
    let mut increases = 0;

    for k in 1..=stop.max_iterations {
        let c = match &fixed_c {
            Some(c) => c.clone(),
            None => hessian_scaling(obj, &theta)?,
        };
        let grad = obj.smooth_gradient(&theta);
        let v = theta.like(theta.as_vector() - c.solve(&grad))?;
        let target = scaled_prox(&h_only, &c, &v, inner)?.point;
        let d = target.as_vector() - theta.as_vector();
        let full_norm = d.norm();
        trace.stopping.final_step_norm = full_norm;
        trace.stopping.triggered_at = k - 1;
        if full_norm == 0.0 {
            trace.stopping_reason = StoppingReason::Stationary;
            return Ok(trace);
        }

        let model_decrease = grad.dot(&d) + obj.nonsmooth.value_difference(&target, &theta);
        let mut exhausted = false;
        let (next, next_value) = if value.is_finite() {
            let noise = 4.0 * f64::EPSILON * value.abs().max(1.0);
            let band = f64::EPSILON.sqrt() * (1.0 + value.abs());
            let mut s = 1.0;
            let mut attempt = 0;
            let mut best: Option<(ParamPoint, f64)> = None;
            loop {
                let cand = if s == 1.0 {
                    target.clone()
                } else {
                    theta.like(theta.as_vector() + &d * s)?
                };
                let cv = obj.value(&cand);
                let bound = ls.c * s * model_decrease;
                // The rounding slack applies to the unit step only; otherwise a
                // step that rounds to zero would always be accepted.
                let slack = if s == 1.0 { noise } else { 0.0 };
                let mut accept = cv.is_finite() && cv <= value + bound + slack;
                if !accept && cv.is_finite() && (cv - value).abs() <= band {
                    // Value differences are at rounding level here; estimate the
                    // change of g by the trapezoid rule on gradients instead.
                    let gc = obj.smooth_gradient(&cand);
                    let dg = 0.5 * s * (&grad + &gc).dot(&d);
                    accept = dg + obj.nonsmooth.value_difference(&cand, &theta) <= bound;
                }
                attempt += 1;
                let moved = cand.as_vector() != theta.as_vector();
                if accept && moved {
                    break (cand, cv);
                }
                if attempt >= ls.max_steps || !moved {
                    // Exhausted backtracking is nearly always rounding close to
                    // a minimizer. Take the full step unless it visibly raises
                    // the objective, then the best point tried.
                    exhausted = true;
                    let tv = obj.value(&target);
                    match best {
                        Some((bp, bv)) if tv > value + noise && bv < tv => break (bp, bv),
                        _ => break (target.clone(), tv),
                    }
                }
                if moved && best.as_ref().map_or(true, |(_, bv)| cv < *bv) {
                    best = Some((cand, cv));
                }
                s *= ls.shrink;
            }
        } else {
            let tv = obj.value(&target);
            (target, tv)
        };

        let noise = 4.0 * f64::EPSILON * value.abs().max(1.0);
        if exhausted && next_value > value + noise {
            increases += 1;
        } else {
            increases = 0;
        }
        let step = (next.as_vector() - theta.as_vector()).norm();
        theta = next;
        value = next_value;
        trace.iterates.push(theta.clone());
        trace.step_norms.push(step);
        trace.objective_values.push(value);
        trace.stopping.triggered_at = k;

        if increases >= DIVERGENCE_PATIENCE {
            return Err(Error::Diverging {
                consecutive: increases,
                trace: Box::new(trace),
            });
        }
        if full_norm <= stop.threshold {
            trace.stopping_reason = StoppingReason::StepBelowThreshold;
            return Ok(trace);
        }
    }
    trace.stopping_reason = StoppingReason::MaxIterations;
    Ok(trace)
}

/// `|| C (theta - prox_h^C(theta - C^{-1} grad g(theta))) ||`, zero exactly at
/// composite stationary points.
pub fn composite_stationarity(
    obj: &CompositeObjective,
    c: &ScalingMatrix,
    theta: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<f64> {
    let g = obj.smooth_gradient(theta);
    let v = theta.like(theta.as_vector() - c.solve(&g))?;
    let h_only = CompositeObjective::nonsmooth_only(obj.nonsmooth.clone());
    let p = scaled_prox(&h_only, c, &v, cfg)?.point;
    Ok(c.apply(&(theta.as_vector() - p.as_vector())).norm())
}

/// Reference minimizer: a long run with threshold `1e-12`, accepted only if the
/// composite stationarity residual under `c` is at most `1e-10`.
pub fn reference_minimizer(
    obj: &CompositeObjective,
    c: &ScalingMatrix,
    theta0: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<(ParamPoint, EstimatorTrace)> {
    let trace = run_prox_gradient(
        obj,
        &OseConfig {
            scaling: ScalingRule::Fixed(c.clone()),
            inner: *cfg,
        },
        theta0,
        &StopRule::reference(),
    )?;
    let theta = trace.final_point().clone();
    let residual = composite_stationarity(obj, c, &theta, cfg)?;
    if !(residual <= REFERENCE_RESIDUAL) {
        return Err(Error::NotStationary {
            residual,
            iterations: trace.iterations(),
        });
    }
    Ok((theta, trace))
}

/// `min{sqrt(q), q}` and `max{sqrt(q), q}` with `q = m / (2 (2L + M))`.
pub fn stop_cond_kappas(k: &RegularityConstants) -> (f64, f64) {
    let q = k.strong_convexity_m / (2.0 * (2.0 * k.scaling_bound_l + k.grad_lipschitz_big_m));
    (q.sqrt().min(q), q.sqrt().max(q))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StopCondReport {
    /// `||theta_ose - theta_init||`.
    pub step: f64,
    /// `||theta_init - theta_hat||`.
    pub distance: f64,
    pub kappa_min: f64,
    /// The larger branch constant, reported for comparison only.
    pub kappa_max: f64,
    pub holds: bool,
    pub holds_with_kappa_max: bool,
    /// `step - kappa_min * distance`.
    pub margin: f64,
    /// `f(theta_init) - f(theta_hat)`.
    pub objective_gap: f64,
}

/// Audits `||theta_ose - theta_init|| >= kappa ||theta_init - theta_hat||` with the
/// conservative `kappa_min`. A relative slack of `1e-12` absorbs rounding.
pub fn check_stop_cond_inequality(
    obj: &CompositeObjective,
    constants: &RegularityConstants,
    theta_init: &ParamPoint,
    theta_hat: &ParamPoint,
    theta_ose: &ParamPoint,
) -> Result<StopCondReport> {
    check_dim(theta_init.dim(), theta_hat.dim())?;
    check_dim(theta_init.dim(), theta_ose.dim())?;
    let step = (theta_ose.as_vector() - theta_init.as_vector()).norm();
    let distance = (theta_init.as_vector() - theta_hat.as_vector()).norm();
    let (kappa_min, kappa_max) = stop_cond_kappas(constants);
    let slack = 1e-12 * (1.0 + distance);
    Ok(StopCondReport {
        step,
        distance,
        kappa_min,
        kappa_max,
        holds: step + slack >= kappa_min * distance,
        holds_with_kappa_max: step + slack >= kappa_max * distance,
        margin: step - kappa_min * distance,
        objective_gap: obj.value(theta_init) - obj.value(theta_hat),
    })
}

//! Monte Carlo harnesses: one-step equivalence on the Cauchy model, the
//! gradient-descent counterexample, low-rank logistic fits, and randomized audits
//! of the stopping inequality and the proximal operators.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{Curvature, ParamPoint, ScalingMatrix};
use crate::models::{
    cauchy_nll, cauchy_objective, cauchy_sample, logistic_objective, normal_nll, normal_sample,
    sigmoid, BivariateNormalModel, CauchyModel, LogisticMatrixModel,
};
use crate::objective::{CompositeObjective, NonsmoothTerm, QuadraticTerm, RegularityConstants, SmoothTerm};
use crate::prox::{scaled_prox, InnerSolveConfig};
use crate::random::{replicate_seed, rng_from_seed, standard_normal, uniform_open01};
use crate::solvers::{
    check_stop_cond_inequality, gd_step_exact, gd_step_fixed, one_newton_step,
    ose_prox_descent, ose_prox_gradient, reference_minimizer, run_prox_newton, StopRule,
    StoppingReason,
};

/// Linear-interpolation sample quantile (type 7). `sorted` must be ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Upper standard normal tail `P(Z > x)`.
pub fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OseKind {
    /// One scaled proximal gradient step with `C` the Fisher information.
    ProxGradientMap,
    /// One scaled proximal descent step with `C = Fisher / sqrt(n)`.
    ProxDescent,
}

#[derive(Clone, Debug)]
pub struct McConfig {
    pub model: CauchyModel,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub kind: OseKind,
    pub base_seed: u64,
    /// Start the one-step estimator at the reference minimizer itself.
    pub zero_deviation_init: bool,
    pub inner: InnerSolveConfig,
}

impl McConfig {
    pub fn new(
        model: CauchyModel,
        sample_sizes: Vec<usize>,
        replicates: usize,
        kind: OseKind,
        base_seed: u64,
    ) -> Self {
        McConfig {
            model,
            sample_sizes,
            replicates,
            kind,
            base_seed,
            zero_deviation_init: false,
            inner: InnerSolveConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub n: usize,
    pub replicate: usize,
    pub theta_hat: f64,
    pub theta_init: f64,
    pub theta_ose: f64,
    /// `sqrt(n) |theta_ose - theta_hat|`.
    pub ose_deviation: f64,
    /// `sqrt(n) |theta_init - theta_hat|`.
    pub init_deviation: f64,
    /// Smooth-part curvature at the reference minimizer is positive.
    pub locally_convex: bool,
    /// `|H(theta_hat) / C - 1|` for the scaling used by the one-step map.
    #[serde(with = "crate::extreal")]
    pub scaling_mismatch: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McFailure {
    pub n: usize,
    pub replicate: usize,
    pub category: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    #[serde(with = "crate::extreal")]
    pub median_ose: f64,
    #[serde(with = "crate::extreal")]
    pub q90_ose: f64,
    #[serde(with = "crate::extreal")]
    pub median_init: f64,
    #[serde(with = "crate::extreal")]
    pub q90_init: f64,
    /// Fraction of replicates whose smooth part was locally convex at the minimizer.
    #[serde(with = "crate::extreal")]
    pub convex_fraction: f64,
    /// `median_ose <= median_init`.
    pub ordering_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub kind: OseKind,
    pub model: CauchyModel,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub base_seed: u64,
    pub records: Vec<McRecord>,
    pub failures: Vec<McFailure>,
    pub summaries: Vec<McSummary>,
}

impl McReport {
    /// Recomputes the summaries from the raw records.
    pub fn recompute_summaries(&self) -> Vec<McSummary> {
        summarize(&self.sample_sizes, &self.records, &self.failures)
    }

    /// Sample sizes at which the one step made the median deviation worse.
    pub fn ordering_violations(&self) -> Vec<usize> {
        self.summaries
            .iter()
            .filter(|s| !s.ordering_holds)
            .map(|s| s.n)
            .collect()
    }
}

fn summarize(sizes: &[usize], records: &[McRecord], failures: &[McFailure]) -> Vec<McSummary> {
    sizes
        .iter()
        .map(|&n| {
            let rs: Vec<&McRecord> = records.iter().filter(|r| r.n == n).collect();
            let mut ose: Vec<f64> = rs.iter().map(|r| r.ose_deviation).collect();
            let mut init: Vec<f64> = rs.iter().map(|r| r.init_deviation).collect();
            ose.sort_by(f64::total_cmp);
            init.sort_by(f64::total_cmp);
            let median_ose = quantile(&ose, 0.5);
            let median_init = quantile(&init, 0.5);
            let convex = rs.iter().filter(|r| r.locally_convex).count();
            McSummary {
                n,
                successes: rs.len(),
                failures: failures.iter().filter(|f| f.n == n).count(),
                median_ose,
                q90_ose: quantile(&ose, 0.9),
                median_init,
                q90_init: quantile(&init, 0.9),
                convex_fraction: if rs.is_empty() {
                    f64::NAN
                } else {
                    convex as f64 / rs.len() as f64
                },
                ordering_holds: median_ose <= median_init,
            }
        })
        .collect()
}

/// One-step equivalence on the Cauchy location model.
pub fn mc_equivalence_cauchy(
    model: &CauchyModel,
    sample_sizes: &[usize],
    replicates: usize,
    kind: OseKind,
    base_seed: u64,
) -> Result<McReport> {
    run_mc_equivalence(&McConfig::new(
        *model,
        sample_sizes.to_vec(),
        replicates,
        kind,
        base_seed,
    ))
}

pub fn run_mc_equivalence(cfg: &McConfig) -> Result<McReport> {
    if cfg.sample_sizes.is_empty() || cfg.sample_sizes.contains(&0) {
        return Err(Error::contract("sample sizes must be nonempty and positive"));
    }
    if cfg.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::contract("sample sizes must be strictly increasing"));
    }
    if cfg.replicates == 0 {
        return Err(Error::contract("replicates must be at least 1"));
    }
    cfg.inner.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..cfg.replicates).map(move |r| (n, r)))
        .collect();
    let outcomes: Vec<std::result::Result<McRecord, McFailure>> = jobs
        .par_iter()
        .map(|&(n, r)| {
            mc_replicate(cfg, n, r).map_err(|e| McFailure {
                n,
                replicate: r,
                category: e.category().to_string(),
                message: e.to_string(),
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    let summaries = summarize(&cfg.sample_sizes, &records, &failures);
    Ok(McReport {
        kind: cfg.kind,
        model: cfg.model,
        sample_sizes: cfg.sample_sizes.clone(),
        replicates: cfg.replicates,
        base_seed: cfg.base_seed,
        records,
        failures,
        summaries,
    })
}

fn mc_replicate(cfg: &McConfig, n: usize, r: usize) -> Result<McRecord> {
    let seed = replicate_seed(cfg.base_seed, n as u64, r as u64);
    let batch = cauchy_sample(&cfg.model, n, seed)?;
    let obj = cauchy_objective(&cfg.model, &batch)?;
    let nll = cauchy_nll(&cfg.model, &batch);
    let fisher = crate::models::cauchy_fisher(&cfg.model);
    let c_fisher = ScalingMatrix::scaled_identity(1, fisher)?;

    let start = ParamPoint::scalar(nll.sample_median())?;
    let (theta_hat, _) = reference_minimizer(&obj, &c_fisher, &start, &cfg.inner)?;

    let root_n = (n as f64).sqrt();
    let theta_init = if cfg.zero_deviation_init {
        theta_hat.clone()
    } else {
        let mut rng = rng_from_seed(replicate_seed(seed, 1, 0));
        let u = 2.0 * uniform_open01(&mut rng) - 1.0;
        ParamPoint::scalar(theta_hat[0] + u / root_n)?
    };

    let (theta_ose, c_used) = match cfg.kind {
        OseKind::ProxGradientMap => (
            ose_prox_gradient(&nll, &obj.nonsmooth, &c_fisher, &theta_init, &cfg.inner)?,
            fisher,
        ),
        OseKind::ProxDescent => {
            let c = fisher / root_n;
            let c_n = ScalingMatrix::scaled_identity(1, c)?;
            (ose_prox_descent(&obj, &c_n, &theta_init, &cfg.inner)?, c)
        }
    };
    let curvature = match nll.hessian(&theta_hat) {
        Some(Curvature::Diagonal(d)) => d[0],
        _ => f64::NAN,
    };
    Ok(McRecord {
        n,
        replicate: r,
        theta_hat: theta_hat[0],
        theta_init: theta_init[0],
        theta_ose: theta_ose[0],
        ose_deviation: root_n * (theta_ose[0] - theta_hat[0]).abs(),
        init_deviation: root_n * (theta_init[0] - theta_hat[0]).abs(),
        locally_convex: curvature > 0.0,
        scaling_mismatch: (curvature / c_used - 1.0).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterexampleMode {
    /// Gradient descent with the fixed step `sigma2^2`.
    FixedStep,
    /// Steepest descent with the exact line-search step.
    ExactStep,
    /// One Newton step, `C = Sigma^{-1}`.
    ScaledNewton,
}

/// `integral_0^1 P(Z > m u) du = P(Z > m) + (1 - exp(-m^2 / 2)) / (sqrt(2 pi) m)`.
pub fn tail_integral_closed_form(m: f64) -> f64 {
    if m == 0.0 {
        return 0.5;
    }
    normal_tail(m) + (-(-0.5 * m * m).exp_m1()) / ((2.0 * PI).sqrt() * m)
}

/// The expression `P(Z > m) + (1 - exp(-m^2 / 2) / sqrt(2 pi)) / m`, kept for
/// comparison against the correct closed form.
pub fn tail_integral_alternate_form(m: f64) -> f64 {
    normal_tail(m) + (1.0 - (-0.5 * m * m).exp() / (2.0 * PI).sqrt()) / m
}

/// `integral_0^1 P(Z > m u) du` by adaptive quadrature.
pub fn tail_integral_quadrature(m: f64) -> f64 {
    quadrature::integrate(|u| normal_tail(m * u), 0.0, 1.0, 1e-14).integral
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormReport {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `sigma1 / sigma2^2 - 1 / sigma1`.
    pub m_constant: f64,
    pub probability: f64,
    /// Closed-form evaluation of the same integral.
    pub closed_form: f64,
    pub closed_form_agrees: bool,
    /// The alternate printed expression and its gap to the quadrature value.
    #[serde(with = "crate::extreal")]
    pub alternate_form: f64,
    #[serde(with = "crate::extreal")]
    pub alternate_form_gap: f64,
    /// `m <= 0`: outside the counterexample regime, probability above one half.
    pub flagged: bool,
}

/// Probability that one fixed-step gradient iteration overshoots the first mean
/// coordinate, computed as `integral_0^1 P(Z > M u) du`.
pub fn counterexample_closed_form(sigma1: f64, sigma2: f64) -> Result<ClosedFormReport> {
    BivariateNormalModel::new([0.0, 0.0], sigma1, sigma2)?;
    Ok(closed_form_for_m(sigma1, sigma2, sigma1 / (sigma2 * sigma2) - 1.0 / sigma1))
}

fn closed_form_for_m(sigma1: f64, sigma2: f64, m: f64) -> ClosedFormReport {
    let probability = tail_integral_quadrature(m);
    let closed_form = tail_integral_closed_form(m);
    let alternate_form = tail_integral_alternate_form(m);
    ClosedFormReport {
        sigma1,
        sigma2,
        m_constant: m,
        probability,
        closed_form,
        closed_form_agrees: (probability - closed_form).abs() <= 1e-8,
        alternate_form,
        alternate_form_gap: (alternate_form - probability).abs(),
        flagged: m <= 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleRecord {
    pub replicate: usize,
    /// `sqrt(n) (theta_hat - mu)`, both coordinates.
    pub scaled_error_1: f64,
    pub scaled_error_2: f64,
    pub exceeds: bool,
    /// Step length used (`NaN` for the Newton step).
    #[serde(with = "crate::extreal")]
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub mode: CounterexampleMode,
    pub sigma1: f64,
    pub sigma2: f64,
    pub n: usize,
    pub replicates: usize,
    pub base_seed: u64,
    /// Constant `M` of the reference probability for this mode.
    pub m_constant: f64,
    pub empirical_prob: f64,
    /// Reference value: exact for the fixed step, the bound for the exact step,
    /// one half for the Newton step.
    pub closed_form_prob: f64,
    pub std_error: f64,
    pub within_three_se: bool,
    /// Reference constant outside the counterexample regime (`M <= 0`).
    pub flagged: bool,
    #[serde(with = "crate::extreal")]
    pub alpha_min: f64,
    #[serde(with = "crate::extreal")]
    pub alpha_max: f64,
    pub records: Vec<CounterexampleRecord>,
}

/// One step of the chosen method from a uniform initializer just below the mean,
/// repeated over independent samples.
pub fn counterexample_monte_carlo(
    sigma1: f64,
    sigma2: f64,
    n: usize,
    replicates: usize,
    mode: CounterexampleMode,
    base_seed: u64,
) -> Result<CounterexampleReport> {
    let model = BivariateNormalModel::new([0.0, 0.0], sigma1, sigma2)?;
    if n == 0 || replicates == 0 {
        return Err(Error::contract("n and replicates must be at least 1"));
    }
    let root_n = (n as f64).sqrt();
    let records: Vec<CounterexampleRecord> = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<CounterexampleRecord> {
            let seed = replicate_seed(base_seed, n as u64, r as u64);
            let batch = normal_sample(&model, n, seed)?;
            let g = normal_nll(&model, &batch);
            let mut rng = rng_from_seed(replicate_seed(seed, 1, 0));
            let u1 = uniform_open01(&mut rng);
            let u2 = uniform_open01(&mut rng);
            let init = ParamPoint::new(vec![
                model.mean[0] - u1 / root_n,
                model.mean[1] - u2 / root_n,
            ])?;
            let (theta, alpha) = match mode {
                CounterexampleMode::FixedStep => {
                    let a = sigma2 * sigma2;
                    (gd_step_fixed(&g, a, &init)?, a)
                }
                CounterexampleMode::ExactStep => {
                    let s = gd_step_exact(&g, &init)?;
                    (s.point, s.alpha.unwrap_or(f64::NAN))
                }
                CounterexampleMode::ScaledNewton => {
                    let c = ScalingMatrix::dense(model.precision())?;
                    (one_newton_step(&g, &c, &init)?, f64::NAN)
                }
            };
            Ok(CounterexampleRecord {
                replicate: r,
                scaled_error_1: root_n * (theta[0] - model.mean[0]),
                scaled_error_2: root_n * (theta[1] - model.mean[1]),
                exceeds: theta[0] > model.mean[0],
                alpha,
            })
        })
        .collect::<Result<_>>()?;

    let hits = records.iter().filter(|r| r.exceeds).count();
    let p = hits as f64 / replicates as f64;
    let se = (p * (1.0 - p) / replicates as f64).sqrt();
    let (m, reference) = match mode {
        CounterexampleMode::FixedStep => {
            let m = sigma1 / (sigma2 * sigma2) - 1.0 / sigma1;
            (m, tail_integral_quadrature(m))
        }
        CounterexampleMode::ExactStep => {
            let m = sigma1 / (sigma1 + sigma2) - 1.0 / sigma1;
            (m, tail_integral_quadrature(m))
        }
        CounterexampleMode::ScaledNewton => (0.0, 0.5),
    };
    let alphas = records.iter().map(|r| r.alpha).filter(|a| a.is_finite());
    let alpha_min = alphas.clone().fold(f64::INFINITY, f64::min);
    let alpha_max = alphas.fold(f64::NEG_INFINITY, f64::max);
    Ok(CounterexampleReport {
        mode,
        sigma1,
        sigma2,
        n,
        replicates,
        base_seed,
        m_constant: m,
        empirical_prob: p,
        closed_form_prob: reference,
        std_error: se,
        within_three_se: (p - reference).abs() <= 3.0 * se,
        flagged: m <= 0.0 && mode != CounterexampleMode::ScaledNewton,
        alpha_min,
        alpha_max,
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankReport {
    pub lambda: f64,
    pub objective_trajectory: Vec<f64>,
    /// Singular values above `1e-6` times the largest.
    pub final_rank: usize,
    pub singular_values: Vec<f64>,
    pub iterations: usize,
    #[serde(with = "crate::extreal")]
    pub stopping_threshold: f64,
    pub stopping_reason: StoppingReason,
    pub effective_n: usize,
    pub dimension: usize,
    /// Final estimate, column-major.
    pub theta: Vec<f64>,
}

impl LowRankReport {
    pub fn theta_point(&self) -> Result<ParamPoint> {
        ParamPoint::new(self.theta.clone())?.with_shape(self.dimension, self.dimension)
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trajectory.last().unwrap_or(&f64::NAN)
    }
}

pub const LOWRANK_RANK_TOL: f64 = 1e-6;

pub fn numerical_rank(singular_values: &[f64], rel_tol: f64) -> usize {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    if smax <= 0.0 {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Proximal Newton on the nuclear-norm penalized logistic objective, stopped
/// when the step is below `stopping_c / sqrt(N^2 T)`.
pub fn lowrank_fit(
    model: &LogisticMatrixModel,
    stopping_c: f64,
    max_iter: usize,
) -> Result<LowRankReport> {
    lowrank_fit_from(model, stopping_c, max_iter, None)
}

pub fn lowrank_fit_from(
    model: &LogisticMatrixModel,
    stopping_c: f64,
    max_iter: usize,
    warm_start: Option<&ParamPoint>,
) -> Result<LowRankReport> {
    if !(stopping_c > 0.0) {
        return Err(Error::contract("stopping constant must be positive"));
    }
    let obj = logistic_objective(model)?;
    let n = model.n;
    let theta0 = match warm_start {
        Some(p) => p.clone().with_shape(n, n)?,
        None => ParamPoint::from_matrix(&DMatrix::zeros(n, n))?,
    };
    let effective_n = model.effective_n();
    let stop = StopRule::root_n(stopping_c, effective_n, max_iter);
    let trace = run_prox_newton(&obj, &theta0, &stop, &lowrank_inner())?;
    let theta = trace.final_point();
    let sv: Vec<f64> = theta
        .to_matrix()
        .expect("shaped iterate")
        .singular_values()
        .iter()
        .cloned()
        .collect();
    let mut sorted = sv.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(LowRankReport {
        lambda: model.penalty,
        objective_trajectory: trace.objective_values.clone(),
        final_rank: numerical_rank(&sorted, LOWRANK_RANK_TOL),
        singular_values: sorted,
        iterations: trace.iterations(),
        stopping_threshold: stop.threshold,
        stopping_reason: trace.stopping_reason,
        effective_n,
        dimension: n,
        theta: theta.as_slice().to_vec(),
    })
}

fn lowrank_inner() -> InnerSolveConfig {
    InnerSolveConfig::default()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub lambda: f64,
    pub report: Option<LowRankReport>,
    pub error: Option<String>,
}

/// One fit per penalty, in the given order, each warm-started from the last
/// successful fit.
pub fn lambda_sweep(
    model: &LogisticMatrixModel,
    lambdas: &[f64],
    stopping_c: f64,
    max_iter: usize,
) -> Result<Vec<SweepEntry>> {
    if lambdas.is_empty() {
        return Err(Error::contract("lambda list must be nonempty"));
    }
    let mut warm: Option<ParamPoint> = None;
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let fit = model
            .with_penalty(lambda)
            .and_then(|m| lowrank_fit_from(&m, stopping_c, max_iter, warm.as_ref()));
        match fit {
            Ok(rep) => {
                warm = Some(rep.theta_point()?);
                out.push(SweepEntry {
                    lambda,
                    report: Some(rep),
                    error: None,
                });
            }
            Err(e) => out.push(SweepEntry {
                lambda,
                report: None,
                error: Some(format!("[{}] {e}", e.category())),
            }),
        }
    }
    Ok(out)
}

/// Smallest penalty at which `theta = 0` solves the problem: the spectral norm of
/// the smooth gradient at zero.
pub fn lambda_zero_solution(model: &LogisticMatrixModel) -> f64 {
    model.freq.map(|x| 0.5 - x).singular_values().max()
}

/// Synthetic instance with `theta* = A B^T` of the given rank and per-cell
/// frequencies from `trials` Bernoulli draws with success probability
/// `sigmoid(theta*)`.
pub fn synthetic_lowrank(
    n: usize,
    rank: usize,
    trials: usize,
    penalty: f64,
    seed: u64,
) -> Result<(LogisticMatrixModel, DMatrix<f64>)> {
    if n == 0 || rank == 0 || rank > n || trials == 0 {
        return Err(Error::contract("need 1 <= rank <= n and trials >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let entry_scale = (2.0_f64 / rank as f64).powf(0.25);
    let a = DMatrix::from_fn(n, rank, |_, _| entry_scale * standard_normal(&mut rng));
    let b = DMatrix::from_fn(n, rank, |_, _| entry_scale * standard_normal(&mut rng));
    let theta = &a * b.transpose();
    let freq = theta.map(|t| {
        let p = sigmoid(t);
        let hits = (0..trials).filter(|_| uniform_open01(&mut rng) < p).count();
        hits as f64 / trials as f64
    });
    Ok((LogisticMatrixModel::new(freq, trials, penalty)?, theta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCondRecord {
    pub instance: usize,
    pub dim: usize,
    pub m: f64,
    pub big_m: f64,
    pub l: f64,
    pub step: f64,
    pub distance: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub holds: bool,
    pub holds_with_kappa_max: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCondAudit {
    pub instances: usize,
    pub base_seed: u64,
    pub violations: usize,
    pub violations_with_kappa_max: usize,
    pub records: Vec<StopCondRecord>,
}

/// Random strongly convex `quadratic + l1` instance with a diagonal scaling.
pub struct StopCondInstance {
    pub objective: CompositeObjective,
    pub quadratic: QuadraticTerm,
    pub l1: NonsmoothTerm,
    pub scaling: ScalingMatrix,
    pub constants: RegularityConstants,
    pub theta_init: ParamPoint,
}

fn random_orthogonal(d: usize, rng: &mut crate::random::SimRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    g.qr().q()
}

pub fn stop_cond_instance(seed: u64) -> Result<StopCondInstance> {
    let mut rng = rng_from_seed(seed);
    let d = 2 + (uniform_open01(&mut rng) * 5.0) as usize;
    let q = random_orthogonal(d, &mut rng);
    let m = 0.1 + uniform_open01(&mut rng);
    let big_m = m * (1.0 + 20.0 * uniform_open01(&mut rng));
    let mut eig: Vec<f64> = (0..d)
        .map(|_| m + (big_m - m) * uniform_open01(&mut rng))
        .collect();
    eig[0] = m;
    eig[d - 1] = big_m;
    let hmat = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
    let hmat = (&hmat + hmat.transpose()) * 0.5;
    let center = DVector::from_fn(d, |_, _| 3.0 * standard_normal(&mut rng));
    let quad = QuadraticTerm::centered(hmat, &center)?;
    let weight = 2.0 * uniform_open01(&mut rng);
    let l1 = NonsmoothTerm::l1(d, weight)?;
    let l = 0.05 + 10.0 * uniform_open01(&mut rng);
    let cdiag = DVector::from_fn(d, |_, _| l * (0.1 + 0.9 * uniform_open01(&mut rng)));
    let mut cdiag = cdiag;
    cdiag[0] = l;
    let scaling = ScalingMatrix::diagonal(cdiag)?;
    let theta_init = ParamPoint::from_vector(DVector::from_fn(d, |_, _| {
        5.0 * standard_normal(&mut rng)
    }))?;
    let objective = CompositeObjective::new(std::sync::Arc::new(quad.clone()), l1.clone())?;
    Ok(StopCondInstance {
        objective,
        quadratic: quad,
        l1,
        scaling,
        constants: RegularityConstants::new(m, big_m, l)?,
        theta_init,
    })
}

/// Checks the stopping inequality on random instances, with the minimizer found
/// by a long reference run.
pub fn stop_cond_audit(instances: usize, base_seed: u64) -> Result<StopCondAudit> {
    if instances == 0 {
        return Err(Error::contract("need at least one instance"));
    }
    let inner = InnerSolveConfig::default();
    let records: Vec<StopCondRecord> = (0..instances)
        .into_par_iter()
        .map(|i| -> Result<StopCondRecord> {
            let inst = stop_cond_instance(replicate_seed(base_seed, 0, i as u64))?;
            let lipschitz = ScalingMatrix::scaled_identity(
                inst.theta_init.dim(),
                inst.constants.grad_lipschitz_big_m,
            )?;
            let (theta_hat, _) =
                reference_minimizer(&inst.objective, &lipschitz, &inst.theta_init, &inner)?;
            let theta_ose = ose_prox_gradient(
                &inst.quadratic,
                &inst.l1,
                &inst.scaling,
                &inst.theta_init,
                &inner,
            )?;
            let rep = check_stop_cond_inequality(
                &inst.objective,
                &inst.constants,
                &inst.theta_init,
                &theta_hat,
                &theta_ose,
            )?;
            Ok(StopCondRecord {
                instance: i,
                dim: inst.theta_init.dim(),
                m: inst.constants.strong_convexity_m,
                big_m: inst.constants.grad_lipschitz_big_m,
                l: inst.constants.scaling_bound_l,
                step: rep.step,
                distance: rep.distance,
                kappa_min: rep.kappa_min,
                kappa_max: rep.kappa_max,
                holds: rep.holds,
                holds_with_kappa_max: rep.holds_with_kappa_max,
                margin: rep.margin,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StopCondAudit {
        instances,
        base_seed,
        violations: records.iter().filter(|r| !r.holds).count(),
        violations_with_kappa_max: records.iter().filter(|r| !r.holds_with_kappa_max).count(),
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxCheckKind {
    Nonexpansive,
    NuclearOptimality,
    EnvelopeDomination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxCheckRecord {
    pub kind: ProxCheckKind,
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxCheckReport {
    pub trials: usize,
    pub base_seed: u64,
    pub failures: usize,
    pub records: Vec<ProxCheckRecord>,
}

/// Randomized self-check of the proximal operators: C-norm nonexpansiveness,
/// nuclear-norm optimality residuals and envelope domination `e_C f <= f`.
pub fn prox_check(trials: usize, base_seed: u64) -> Result<ProxCheckReport> {
    if trials == 0 {
        return Err(Error::contract("need at least one trial"));
    }
    let cfg = InnerSolveConfig::default();
    let per_trial: Vec<Vec<ProxCheckRecord>> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<ProxCheckRecord>> {
            let mut rng = rng_from_seed(replicate_seed(base_seed, 7, t as u64));
            let d = 1 + (uniform_open01(&mut rng) * 5.0) as usize;
            let cdiag = DVector::from_fn(d, |_, _| 0.2 + 5.0 * uniform_open01(&mut rng));
            let c = ScalingMatrix::diagonal(cdiag)?;
            let weight = 2.0 * uniform_open01(&mut rng);
            let f = CompositeObjective::from(NonsmoothTerm::l1(d, weight)?);
            let x = ParamPoint::from_vector(DVector::from_fn(d, |_, _| 3.0 * standard_normal(&mut rng)))?;
            let y = ParamPoint::from_vector(DVector::from_fn(d, |_, _| 3.0 * standard_normal(&mut rng)))?;
            let px = scaled_prox(&f, &c, &x, &cfg)?;
            let py = scaled_prox(&f, &c, &y, &cfg)?;
            let lhs = c.quad_form(&(px.point.as_vector() - py.point.as_vector())).sqrt();
            let rhs = c.quad_form(&(x.as_vector() - y.as_vector())).sqrt();
            let mut out = vec![ProxCheckRecord {
                kind: ProxCheckKind::Nonexpansive,
                trial: t,
                lhs,
                rhs,
                ok: lhs <= rhs + 1e-9,
            }];
            let fx = f.value(&x);
            out.push(ProxCheckRecord {
                kind: ProxCheckKind::EnvelopeDomination,
                trial: t,
                lhs: px.objective_value,
                rhs: fx,
                ok: px.objective_value <= fx + 1e-12,
            });
            let rows = 1 + (uniform_open01(&mut rng) * 8.0) as usize;
            let cols = 1 + (uniform_open01(&mut rng) * 8.0) as usize;
            let xm = DMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng));
            let nw = 2.0 * uniform_open01(&mut rng);
            let scale = 0.5 + 2.0 * uniform_open01(&mut rng);
            let pr = crate::prox::prox_nuclear(&ParamPoint::from_matrix(&xm)?, nw, scale)?;
            out.push(ProxCheckRecord {
                kind: ProxCheckKind::NuclearOptimality,
                trial: t,
                lhs: pr.stationarity_residual,
                rhs: 1e-8,
                ok: pr.stationarity_residual <= 1e-8,
            });
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let records: Vec<ProxCheckRecord> = per_trial.into_iter().flatten().collect();
    Ok(ProxCheckReport {
        trials,
        base_seed,
        failures: records.iter().filter(|r| !r.ok).count(),
        records,
    })
}

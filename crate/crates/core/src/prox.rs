//! Closed-form and generic scaled proximal operators, and the scaled Moreau
//! envelope.
//!
//! `prox_f^C(x) = argmin_w f(w) + 1/2 ||w - x||_C^2` and `e_C f(x)` is the
//! minimal value. The envelope gradient is `C (x - prox_f^C(x))`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ParamPoint, ScalingMatrix};
use crate::objective::{CompositeObjective, NonsmoothTerm};

/// Relative cutoff below which singular values count as zero for rank decisions.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ProxResult {
    pub point: ParamPoint,
    /// `f(w) + 1/2 ||w - x||_C^2` at `point`, i.e. `e_C f(x)`.
    pub objective_value: f64,
    /// Zero exactly when a closed form was used.
    pub inner_iterations: usize,
    pub stationarity_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Fixed(f64),
    /// Shrink factor and curvature constant.
    Backtracking { shrink: f64, c: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSolveConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub step_rule: StepRule,
}

impl Default for InnerSolveConfig {
    fn default() -> Self {
        InnerSolveConfig {
            max_iterations: 10_000,
            tolerance: 1e-10,
            step_rule: StepRule::Backtracking {
                shrink: 0.5,
                c: 1e-4,
            },
        }
    }
}

impl InnerSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::contract("inner max_iterations must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::contract("inner tolerance must be positive"));
        }
        match self.step_rule {
            StepRule::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                Err(Error::contract("fixed inner step must be positive"))
            }
            StepRule::Backtracking { shrink, c }
                if !(shrink > 0.0 && shrink < 1.0 && c > 0.0 && c < 1.0) =>
            {
                Err(Error::contract("backtracking needs 0 < shrink < 1 and 0 < c < 1"))
            }
            _ => Ok(()),
        }
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn soft_threshold(v: f64, k: f64) -> f64 {
    v.signum() * (v.abs() - k).max(0.0)
}

/// `prox` of `weight * ||.||_1` under a diagonal scaling.
pub fn prox_l1(x: &ParamPoint, weight: f64, c: &ScalingMatrix) -> Result<ProxResult> {
    check_dim(c.dim(), x.dim())?;
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::contract("l1 weight must be finite and nonnegative"));
    }
    let diag = c.as_diagonal().ok_or(Error::NonDiagonalScaling)?;
    let w = DVector::from_fn(x.dim(), |i, _| soft_threshold(x[i], weight / diag[i]));
    let mut residual_sq = 0.0;
    for i in 0..w.len() {
        let pull = diag[i] * (x[i] - w[i]);
        let r = if w[i] != 0.0 {
            pull - weight * w[i].signum()
        } else {
            (pull.abs() - weight).max(0.0)
        };
        residual_sq += r * r;
    }
    let diff = &w - x.as_vector();
    let value = weight * w.lp_norm(1) + 0.5 * c.quad_form(&diff);
    Ok(ProxResult {
        point: x.like(w)?,
        objective_value: value,
        inner_iterations: 0,
        stationarity_residual: residual_sq.sqrt(),
    })
}

/// Euclidean projection onto `[lo, hi]`. Also the scaled prox of the box
/// indicator for every diagonal scaling.
pub fn project_box(x: &ParamPoint, lo: &ParamPoint, hi: &ParamPoint) -> Result<ProxResult> {
    check_dim(x.dim(), lo.dim())?;
    check_dim(x.dim(), hi.dim())?;
    if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
        return Err(Error::contract("box bounds need lo <= hi componentwise"));
    }
    let w = DVector::from_fn(x.dim(), |i, _| x[i].clamp(lo[i], hi[i]));
    let value = 0.5 * (&w - x.as_vector()).norm_squared();
    Ok(ProxResult {
        point: x.like(w)?,
        objective_value: value,
        inner_iterations: 0,
        stationarity_residual: 0.0,
    })
}

/// Singular value soft-thresholding: `prox` of `weight * ||.||_*` under `scale * I`.
pub fn prox_nuclear(x: &ParamPoint, weight: f64, scale: f64) -> Result<ProxResult> {
    let xm = x
        .to_matrix()
        .ok_or_else(|| Error::contract("nuclear prox needs a matrix-shaped parameter"))?;
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(Error::contract("nuclear weight must be finite and nonnegative"));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::contract("nuclear prox scale must be positive"));
    }
    let w = svt(&xm, weight / scale);
    let residual = nuclear_optimality_residual(&xm, &w, weight, scale);
    let value = weight * w.singular_values().sum() + 0.5 * scale * (&w - &xm).norm_squared();
    Ok(ProxResult {
        point: x.like(DVector::from_column_slice(w.as_slice()))?,
        objective_value: value,
        inner_iterations: 0,
        stationarity_residual: residual,
    })
}

fn svt(x: &DMatrix<f64>, k: f64) -> DMatrix<f64> {
    if k == 0.0 {
        return x.clone();
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested V^T");
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (i, s) in svd.singular_values.iter().enumerate() {
        let shrunk = s - k;
        if shrunk > 0.0 {
            out += u.column(i) * vt.row(i) * shrunk;
        }
    }
    out
}

/// Distance-style residual of `scale (X - W) in weight * d||W||_*`.
///
/// With `W = U1 S V1^T` (rank `r`) and `G = scale (X - W)`, the inclusion holds iff
/// `U1^T G V1 = weight I`, `U1^T G` and `G V1` have no component off the singular
/// subspaces, and the remaining block has spectral norm at most `weight`. The
/// residual is the Frobenius norm of the violations.
pub fn nuclear_optimality_residual(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    weight: f64,
    scale: f64,
) -> f64 {
    let g = (x - w) * scale;
    if weight == 0.0 {
        return g.norm();
    }
    let (rows, cols) = w.shape();
    let svd = w.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let rank = if smax > 0.0 {
        svd.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * smax)
            .count()
    } else {
        0
    };
    let (pu, pv, diag_err) = if rank > 0 {
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = svd.u.as_ref().expect("requested U");
        let v = svd.v_t.as_ref().expect("requested V^T").transpose();
        let u1 = DMatrix::from_fn(rows, rank, |i, j| u[(i, idx[j])]);
        let v1 = DMatrix::from_fn(cols, rank, |i, j| v[(i, idx[j])]);
        let core = u1.transpose() * &g * &v1 - DMatrix::identity(rank, rank) * weight;
        (&u1 * u1.transpose(), &v1 * v1.transpose(), core.norm())
    } else {
        (DMatrix::zeros(rows, rows), DMatrix::zeros(cols, cols), 0.0)
    };
    let qu = DMatrix::identity(rows, rows) - &pu;
    let qv = DMatrix::identity(cols, cols) - &pv;
    let cross_a = (&pu * &g * &qv).norm();
    let cross_b = (&qu * &g * &pv).norm();
    let rest = &qu * &g * &qv;
    let excess = (rest.singular_values().max() - weight).max(0.0);
    (diag_err.powi(2) + cross_a.powi(2) + cross_b.powi(2) + excess.powi(2)).sqrt()
}

/// `prox_{t h}` in the Euclidean metric, the building block of the inner solver.
fn euclidean_prox(h: &NonsmoothTerm, v: DVector<f64>, t: f64) -> Result<DVector<f64>> {
    match h {
        NonsmoothTerm::Zero { .. } => Ok(v),
        NonsmoothTerm::L1 { weight, .. } => Ok(v.map(|e| soft_threshold(e, t * weight))),
        NonsmoothTerm::Nuclear { rows, cols, weight } => {
            let m = DMatrix::from_column_slice(*rows, *cols, v.as_slice());
            Ok(DVector::from_column_slice(svt(&m, t * weight).as_slice()))
        }
        NonsmoothTerm::BoxIndicator { lo, hi } => {
            Ok(DVector::from_fn(v.len(), |i, _| v[i].clamp(lo[i], hi[i])))
        }
        NonsmoothTerm::Custom { name, .. } => Err(Error::contract(format!(
            "term '{name}' has no proximal operator"
        ))),
    }
}

/// Scaled prox, using a closed form when the structure allows one and the
/// generic inner solver otherwise.
pub fn scaled_prox(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ProxResult> {
    check_dim(f.dim(), x.dim())?;
    check_dim(c.dim(), x.dim())?;
    if f.smooth.is_none() {
        if f.nonsmooth.is_zero() {
            return Ok(ProxResult {
                point: x.clone(),
                objective_value: 0.0,
                inner_iterations: 0,
                stationarity_residual: 0.0,
            });
        }
        match &f.nonsmooth {
            NonsmoothTerm::L1 { weight, .. } if c.is_diagonal() => {
                return prox_l1(x, *weight, c);
            }
            NonsmoothTerm::BoxIndicator { lo, hi } if c.is_diagonal() => {
                let mut r = project_box(x, &x.like(lo.clone())?, &x.like(hi.clone())?)?;
                r.objective_value = 0.5 * c.quad_form(&(r.point.as_vector() - x.as_vector()));
                return Ok(r);
            }
            NonsmoothTerm::Nuclear { rows, cols, weight } => {
                if let Some(s) = c.as_scalar() {
                    let shaped = match x.shape() {
                        Some(_) => x.clone(),
                        None => x.clone().with_shape(*rows, *cols)?,
                    };
                    let mut r = prox_nuclear(&shaped, *weight, s)?;
                    r.point = x.like(r.point.into_vector())?;
                    return Ok(r);
                }
            }
            _ => {}
        }
    }
    scaled_prox_generic(f, c, x, cfg)
}

/// Scaled prox by inner proximal gradient iterations started at `x`.
pub fn scaled_prox_generic(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ProxResult> {
    scaled_prox_generic_from(f, c, x, x, cfg)
}

/// Scaled prox by inner proximal gradient iterations from the warm start `start`.
///
/// The smooth part of the subproblem is `psi(w) = g(w) + 1/2 ||w - x||_C^2`; each
/// iteration takes `w+ = prox_{t h}(w - t grad psi(w))`. Under backtracking the
/// step `t` is halved until the secant curvature along the step satisfies
/// `(grad psi(w+) - grad psi(w))^T d <= (1 - c) ||d||^2 / t`, and is allowed to
/// grow again after every accepted step. The stationarity residual is
/// `||grad psi(w+) - grad psi(w) - d / t||`, an element of the subdifferential of
/// the full subproblem at `w+`.
pub fn scaled_prox_generic_from(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    start: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ProxResult> {
    cfg.validate()?;
    check_dim(f.dim(), x.dim())?;
    check_dim(c.dim(), x.dim())?;
    check_dim(x.dim(), start.dim())?;
    if !f.nonsmooth.has_prox() {
        return Err(Error::contract("nonsmooth term has no proximal operator"));
    }
    let xv = x.as_vector();
    let grad_psi = |w: &DVector<f64>| f.smooth_gradient(w) + c.apply(&(w - xv));

    let (mut t, growth, shrink, curv_c) = match cfg.step_rule {
        StepRule::Fixed(g) => (g, 1.0, 1.0, 0.0),
        StepRule::Backtracking { shrink, c: cc } => (1.0 / c.lambda_max(), 1.0 / shrink, shrink, cc),
    };
    let fixed = matches!(cfg.step_rule, StepRule::Fixed(_));

    let mut w = start.as_vector().clone();
    let mut gw = grad_psi(&w);
    let mut best = (w.clone(), f64::INFINITY);

    for iter in 1..=cfg.max_iterations {
        let (w_new, g_new, d) = loop {
            let w_new = euclidean_prox(&f.nonsmooth, &w - &gw * t, t)?;
            let d = &w_new - &w;
            let g_new = grad_psi(&w_new);
            if fixed {
                break (w_new, g_new, d);
            }
            let dd = d.norm_squared();
            let curvature = (&g_new - &gw).dot(&d);
            if dd == 0.0 || curvature <= (1.0 - curv_c) * dd / t {
                break (w_new, g_new, d);
            }
            t *= shrink;
            if !(t > f64::MIN_POSITIVE) {
                return Err(Error::NonFinite("inner step length"));
            }
        };
        if w_new.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("inner iterate"));
        }
        let residual = (&g_new - &gw - &d / t).norm();
        w = w_new;
        gw = g_new;
        if residual < best.1 {
            best = (w.clone(), residual);
        }
        if residual <= cfg.tolerance {
            let value = f.value(&w) + 0.5 * c.quad_form(&(&w - xv));
            return Ok(ProxResult {
                point: x.like(w)?,
                objective_value: value,
                inner_iterations: iter,
                stationarity_residual: residual,
            });
        }
        t *= growth;
    }
    Err(Error::InnerNotConverged {
        best: best.0,
        residual: best.1,
        iterations: cfg.max_iterations,
    })
}

/// Envelope value, gradient and the prox point they share.
#[derive(Clone, Debug)]
pub struct MoreauEval {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub prox: ProxResult,
}

/// `e_C f(x)` and `C (x - prox_f^C(x))` from a single prox evaluation.
pub fn moreau(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<MoreauEval> {
    let prox = scaled_prox(f, c, x, cfg)?;
    let gradient = c.apply(&(x.as_vector() - prox.point.as_vector()));
    Ok(MoreauEval {
        value: prox.objective_value,
        gradient,
        prox,
    })
}

pub fn moreau_value(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<f64> {
    Ok(scaled_prox(f, c, x, cfg)?.objective_value)
}

pub fn moreau_gradient(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x: &ParamPoint,
    cfg: &InnerSolveConfig,
) -> Result<ParamPoint> {
    let m = moreau(f, c, x, cfg)?;
    x.like(m.gradient)
}

/// Scaled gradient descent on the envelope, `x <- x - C^{-1} grad e_C f(x)`,
/// which is the proximal point iteration `x <- prox_f^C(x)`. Stops when a step is
/// no longer than `tol`.
pub fn minimize_envelope(
    f: &CompositeObjective,
    c: &ScalingMatrix,
    x0: &ParamPoint,
    tol: f64,
    max_iterations: usize,
    cfg: &InnerSolveConfig,
) -> Result<(ParamPoint, usize)> {
    let mut x = x0.clone();
    for k in 1..=max_iterations {
        let m = moreau(f, c, &x, cfg)?;
        let next = x.like(x.as_vector() - c.solve(&m.gradient))?;
        let step = (next.as_vector() - x.as_vector()).norm();
        x = next;
        if step <= tol {
            return Ok((x, k));
        }
    }
    Err(Error::InnerNotConverged {
        best: x.into_vector(),
        residual: f64::NAN,
        iterations: max_iterations,
    })
}

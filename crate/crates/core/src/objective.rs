//! Smooth terms, nonsmooth terms and the composite objective `f = g + h`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Curvature, ScalingMatrix, SYMMETRY_TOL};
use crate::random::{rng_from_seed, standard_normal, uniform_open01};

/// A continuously differentiable term. Implementations must be pure.
pub trait SmoothTerm: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Raw Hessian. Symmetric, not necessarily positive definite.
    fn hessian(&self, _x: &DVector<f64>) -> Option<Curvature> {
        None
    }
}

/// `1/2 x^T Q x - b^T x + offset`.
#[derive(Clone, Debug)]
pub struct QuadraticTerm {
    q: DMatrix<f64>,
    b: DVector<f64>,
    offset: f64,
}

impl QuadraticTerm {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let d = q.nrows();
        if q.ncols() != d {
            return Err(Error::contract("quadratic matrix must be square"));
        }
        if b.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: b.len(),
            });
        }
        let asym = (&q - q.transpose()).amax();
        if asym > SYMMETRY_TOL * q.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(QuadraticTerm { q, b, offset: 0.0 })
    }

    /// `1/2 (x - center)^T Q (x - center)`.
    pub fn centered(q: DMatrix<f64>, center: &DVector<f64>) -> Result<Self> {
        let b = &q * center;
        let offset = 0.5 * center.dot(&b);
        let mut t = Self::new(q, b)?;
        t.offset = offset;
        Ok(t)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }
}

impl SmoothTerm for QuadraticTerm {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) - self.b.dot(x) + self.offset
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.b
    }

    fn hessian(&self, _x: &DVector<f64>) -> Option<Curvature> {
        Some(Curvature::Dense(self.q.clone()))
    }
}

type ValueFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// The nonsmooth part `h`. Values may be `+inf` (indicator functions).
#[derive(Clone)]
pub enum NonsmoothTerm {
    Zero {
        dim: usize,
    },
    /// `weight * ||x||_1`.
    L1 {
        dim: usize,
        weight: f64,
    },
    /// `weight * ||X||_*` on a `rows x cols` column-major matrix.
    Nuclear {
        rows: usize,
        cols: usize,
        weight: f64,
    },
    /// Indicator of the box `[lo, hi]`.
    BoxIndicator {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    /// Value-only term with no proximal capability. Usable in diagnostics such
    /// as [`convexity_spot_check`], rejected by proximal operators.
    Custom {
        dim: usize,
        name: String,
        value: ValueFn,
    },
}

impl fmt::Debug for NonsmoothTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NonsmoothTerm::Zero { dim } => write!(f, "Zero({dim})"),
            NonsmoothTerm::L1 { dim, weight } => write!(f, "L1(dim={dim}, weight={weight})"),
            NonsmoothTerm::Nuclear { rows, cols, weight } => {
                write!(f, "Nuclear({rows}x{cols}, weight={weight})")
            }
            NonsmoothTerm::BoxIndicator { lo, .. } => write!(f, "Box(dim={})", lo.len()),
            NonsmoothTerm::Custom { dim, name, .. } => write!(f, "Custom({name}, dim={dim})"),
        }
    }
}

impl NonsmoothTerm {
    pub fn zero(dim: usize) -> Self {
        NonsmoothTerm::Zero { dim }
    }

    pub fn l1(dim: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::contract("l1 weight must be finite and nonnegative"));
        }
        Ok(NonsmoothTerm::L1 { dim, weight })
    }

    pub fn nuclear(rows: usize, cols: usize, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(Error::contract("nuclear weight must be finite and nonnegative"));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::contract("nuclear norm needs a non-empty shape"));
        }
        Ok(NonsmoothTerm::Nuclear { rows, cols, weight })
    }

    pub fn box_indicator(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h || l.is_nan() || h.is_nan()) {
            return Err(Error::contract("box bounds need lo <= hi componentwise"));
        }
        Ok(NonsmoothTerm::BoxIndicator { lo, hi })
    }

    /// Value-only term. Properness is checked at `feasible`.
    pub fn custom(
        name: impl Into<String>,
        feasible: &DVector<f64>,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !value(feasible).is_finite() {
            return Err(Error::contract("term is not proper at the supplied feasible point"));
        }
        Ok(NonsmoothTerm::Custom {
            dim: feasible.len(),
            name: name.into(),
            value: Arc::new(value),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            NonsmoothTerm::Zero { dim }
            | NonsmoothTerm::L1 { dim, .. }
            | NonsmoothTerm::Custom { dim, .. } => *dim,
            NonsmoothTerm::Nuclear { rows, cols, .. } => rows * cols,
            NonsmoothTerm::BoxIndicator { lo, .. } => lo.len(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NonsmoothTerm::Zero { .. } => true,
            NonsmoothTerm::L1 { weight, .. } | NonsmoothTerm::Nuclear { weight, .. } => {
                *weight == 0.0
            }
            _ => false,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            NonsmoothTerm::Zero { .. } => 0.0,
            NonsmoothTerm::L1 { weight, .. } => weight * x.lp_norm(1),
            NonsmoothTerm::Nuclear { rows, cols, weight } => {
                if *weight == 0.0 {
                    return 0.0;
                }
                let m = DMatrix::from_column_slice(*rows, *cols, x.as_slice());
                weight * m.singular_values().sum()
            }
            NonsmoothTerm::BoxIndicator { lo, hi } => {
                let inside = x
                    .iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .all(|(v, (l, h))| v >= l && v <= h);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            NonsmoothTerm::Custom { value, .. } => value(x),
        }
    }

    /// `h(y) - h(x)`, termwise for the separable penalties so that nearby
    /// points do not lose the difference to cancellation.
    pub fn value_difference(&self, y: &DVector<f64>, x: &DVector<f64>) -> f64 {
        match self {
            NonsmoothTerm::Zero { .. } => 0.0,
            NonsmoothTerm::L1 { weight, .. } => {
                weight * y.iter().zip(x.iter()).map(|(a, b)| a.abs() - b.abs()).sum::<f64>()
            }
            _ => self.value(y) - self.value(x),
        }
    }

    pub fn has_prox(&self) -> bool {
        !matches!(self, NonsmoothTerm::Custom { .. })
    }
}

/// `f = g + h`. A missing smooth part means `g = 0`.
#[derive(Clone)]
pub struct CompositeObjective {
    pub smooth: Option<Arc<dyn SmoothTerm>>,
    pub nonsmooth: NonsmoothTerm,
}

impl fmt::Debug for CompositeObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeObjective")
            .field("smooth", &self.smooth.as_ref().map(|s| s.dim()))
            .field("nonsmooth", &self.nonsmooth)
            .finish()
    }
}

impl CompositeObjective {
    pub fn new(smooth: Arc<dyn SmoothTerm>, nonsmooth: NonsmoothTerm) -> Result<Self> {
        if smooth.dim() != nonsmooth.dim() {
            return Err(Error::DimensionMismatch {
                expected: smooth.dim(),
                found: nonsmooth.dim(),
            });
        }
        Ok(CompositeObjective {
            smooth: Some(smooth),
            nonsmooth,
        })
    }

    pub fn smooth_only(smooth: Arc<dyn SmoothTerm>) -> Self {
        let dim = smooth.dim();
        CompositeObjective {
            smooth: Some(smooth),
            nonsmooth: NonsmoothTerm::zero(dim),
        }
    }

    pub fn nonsmooth_only(nonsmooth: NonsmoothTerm) -> Self {
        CompositeObjective {
            smooth: None,
            nonsmooth,
        }
    }

    pub fn dim(&self) -> usize {
        self.nonsmooth.dim()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.smooth_value(x) + self.nonsmooth.value(x)
    }

    pub fn smooth_value(&self, x: &DVector<f64>) -> f64 {
        self.smooth.as_ref().map_or(0.0, |s| s.value(x))
    }

    pub fn smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.smooth
            .as_ref()
            .map_or_else(|| DVector::zeros(x.len()), |s| s.gradient(x))
    }

    pub fn smooth_hessian(&self, x: &DVector<f64>) -> Option<Curvature> {
        match &self.smooth {
            Some(s) => s.hessian(x),
            None => Some(Curvature::Diagonal(DVector::zeros(x.len()))),
        }
    }
}

impl From<NonsmoothTerm> for CompositeObjective {
    fn from(h: NonsmoothTerm) -> Self {
        CompositeObjective::nonsmooth_only(h)
    }
}

/// Strong convexity `m` and gradient Lipschitz constant `M` of the smooth part,
/// and the bound `C <= L I` on the scaling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityConstants {
    pub strong_convexity_m: f64,
    pub grad_lipschitz_big_m: f64,
    pub scaling_bound_l: f64,
}

impl RegularityConstants {
    pub fn new(m: f64, big_m: f64, l: f64) -> Result<Self> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !(positive(m) && positive(big_m) && positive(l)) {
            return Err(Error::contract("regularity constants must be positive and finite"));
        }
        if m > big_m {
            return Err(Error::contract(
                "strong convexity modulus cannot exceed the gradient Lipschitz constant",
            ));
        }
        Ok(RegularityConstants {
            strong_convexity_m: m,
            grad_lipschitz_big_m: big_m,
            scaling_bound_l: l,
        })
    }

    /// Constants of `1/2 x^T Q x + ...` under scaling `c`.
    pub fn for_quadratic(q: &DMatrix<f64>, c: &ScalingMatrix) -> Result<Self> {
        let eig = q.clone().symmetric_eigenvalues();
        Self::new(eig.min(), eig.max(), c.lambda_max())
    }
}

/// Outcome of a random midpoint-convexity probe.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `h(mid) - (h(a) + h(b)) / 2` seen.
    pub worst_gap: f64,
}

const MIDPOINT_SLACK: f64 = 1e-9;

/// Samples pairs in the centred ball of the given radius and counts failures of
/// `h((a+b)/2) <= (h(a)+h(b))/2 + 1e-9`. Diagnostic only.
pub fn convexity_spot_check(
    h: &NonsmoothTerm,
    trials: usize,
    radius: f64,
    seed: u64,
) -> Result<ConvexityReport> {
    if trials == 0 {
        return Err(Error::contract("convexity spot check needs at least one trial"));
    }
    let d = h.dim();
    let mut rng = rng_from_seed(seed);
    let mut sample = || {
        let dir = DVector::from_fn(d, |_, _| standard_normal(&mut rng));
        let r = radius * uniform_open01(&mut rng).powf(1.0 / d as f64);
        dir.normalize() * r
    };
    let mut violations = 0;
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a = sample();
        let b = sample();
        let mid = (&a + &b) * 0.5;
        let rhs = 0.5 * (h.value(&a) + h.value(&b));
        let lhs = h.value(&mid);
        let gap = lhs - rhs;
        if gap.is_finite() {
            worst_gap = worst_gap.max(gap);
        }
        if !(lhs <= rhs + MIDPOINT_SLACK) {
            violations += 1;
        }
    }
    Ok(ConvexityReport {
        trials,
        violations,
        worst_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn spot_check_l1_is_clean() {
        let h = NonsmoothTerm::l1(4, 1.0).unwrap();
        let r = convexity_spot_check(&h, 100, 3.0, 1).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn spot_check_flags_concave_term() {
        let h = NonsmoothTerm::custom("neg_sq_norm", &DVector::zeros(3), |w| -w.norm_squared())
            .unwrap();
        let r = convexity_spot_check(&h, 100, 1.0, 7).unwrap();
        assert!(r.violations >= 1);
    }

    #[test]
    fn spot_check_box_indicator_is_clean() {
        let h = NonsmoothTerm::box_indicator(DVector::zeros(2), DVector::from_element(2, 1.0))
            .unwrap();
        let r = convexity_spot_check(&h, 100, 0.5, 11).unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn spot_check_needs_trials() {
        let h = NonsmoothTerm::zero(1);
        assert!(convexity_spot_check(&h, 0, 1.0, 0).is_err());
    }

    #[test]
    fn custom_term_must_be_proper() {
        let res = NonsmoothTerm::custom("inf", &DVector::zeros(1), |_| f64::INFINITY);
        assert!(res.is_err());
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(NonsmoothTerm::box_indicator(dvector![1.0], dvector![0.0]).is_err());
    }

    #[test]
    fn composite_dims_must_agree() {
        let q = QuadraticTerm::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        let err = CompositeObjective::new(Arc::new(q), NonsmoothTerm::zero(3)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn quadratic_centered_value_and_gradient() {
        let q = QuadraticTerm::centered(dmatrix![2.0, 0.0; 0.0, 4.0], &dvector![1.0, -1.0])
            .unwrap();
        assert!(q.value(&dvector![1.0, -1.0]).abs() < 1e-15);
        assert_eq!(q.gradient(&dvector![1.0, -1.0]), dvector![0.0, 0.0]);
        assert!((q.value(&dvector![0.0, 0.0]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn regularity_ordering() {
        assert!(RegularityConstants::new(2.0, 1.0, 1.0).is_err());
        assert!(RegularityConstants::new(1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn nuclear_value_is_sum_of_singular_values() {
        let h = NonsmoothTerm::nuclear(2, 2, 2.0).unwrap();
        let x = DVector::from_column_slice(&[3.0, 0.0, 0.0, -1.0]);
        assert!((h.value(&x) - 8.0).abs() < 1e-12);
    }
}

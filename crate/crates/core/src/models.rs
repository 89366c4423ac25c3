//! Cauchy location, bivariate normal mean and Bernoulli logistic matrix models.
//!
//! Additive constants are dropped from every negative log-likelihood.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Curvature, ParamPoint};
use crate::objective::{CompositeObjective, NonsmoothTerm, QuadraticTerm, SmoothTerm};
use crate::random::{rng_from_seed, standard_normal_pair, uniform_open01};

/// `n` iid observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch<T> {
    pub observations: Vec<T>,
}

impl<T> SampleBatch<T> {
    pub fn new(observations: Vec<T>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::contract("a sample batch needs at least one observation"));
        }
        Ok(SampleBatch { observations })
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyModel {
    pub location: f64,
    pub scale: f64,
    /// Laplace prior scale; `None` for plain maximum likelihood.
    pub prior_gamma: Option<f64>,
}

impl CauchyModel {
    pub fn new(location: f64, scale: f64, prior_gamma: Option<f64>) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::contract("Cauchy location must be finite"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::contract("Cauchy scale must be positive"));
        }
        if let Some(g) = prior_gamma {
            if !(g > 0.0) {
                return Err(Error::contract("prior scale must be positive"));
            }
        }
        Ok(CauchyModel {
            location,
            scale,
            prior_gamma,
        })
    }
}

/// Inverse-CDF draws `location + scale * tan(pi (U - 1/2))`.
pub fn cauchy_sample(model: &CauchyModel, n: usize, seed: u64) -> Result<SampleBatch<f64>> {
    if n == 0 {
        return Err(Error::contract("sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let obs = (0..n)
        .map(|_| cauchy_quantile(model, uniform_open01(&mut rng)))
        .collect();
    SampleBatch::new(obs)
}

pub fn cauchy_quantile(model: &CauchyModel, u: f64) -> f64 {
    model.location + model.scale * (PI * (u - 0.5)).tan()
}

/// `(1/n) sum log(1 + ((x_i - theta) / scale)^2)`.
#[derive(Clone, Debug)]
pub struct CauchyNll {
    obs: Vec<f64>,
    scale: f64,
}

impl CauchyNll {
    pub fn observations(&self) -> &[f64] {
        &self.obs
    }

    pub fn sample_median(&self) -> f64 {
        let mut v = self.obs.clone();
        v.sort_by(f64::total_cmp);
        let m = v.len();
        if m % 2 == 1 {
            v[m / 2]
        } else {
            0.5 * (v[m / 2 - 1] + v[m / 2])
        }
    }
}

impl SmoothTerm for CauchyNll {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let th = x[0];
        let s = self.scale;
        let sum: f64 = self.obs.iter().map(|&xi| ((xi - th) / s).powi(2).ln_1p()).sum();
        sum / self.obs.len() as f64
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let th = x[0];
        let s2 = self.scale * self.scale;
        let sum: f64 = self
            .obs
            .iter()
            .map(|&xi| {
                let r = xi - th;
                -2.0 * r / (s2 + r * r)
            })
            .sum();
        DVector::from_element(1, sum / self.obs.len() as f64)
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<Curvature> {
        let th = x[0];
        let s2 = self.scale * self.scale;
        let sum: f64 = self
            .obs
            .iter()
            .map(|&xi| {
                let r2 = (xi - th).powi(2);
                2.0 * (s2 - r2) / (s2 + r2).powi(2)
            })
            .sum();
        Some(Curvature::Diagonal(DVector::from_element(
            1,
            sum / self.obs.len() as f64,
        )))
    }
}

pub fn cauchy_nll(model: &CauchyModel, batch: &SampleBatch<f64>) -> CauchyNll {
    CauchyNll {
        obs: batch.observations.clone(),
        scale: model.scale,
    }
}

/// Negative log-likelihood plus the Laplace prior penalty `|theta| / (n gamma)`.
pub fn cauchy_map_objective(
    model: &CauchyModel,
    batch: &SampleBatch<f64>,
) -> Result<CompositeObjective> {
    let gamma = model
        .prior_gamma
        .ok_or_else(|| Error::contract("MAP objective needs a prior scale"))?;
    let weight = 1.0 / (batch.n() as f64 * gamma);
    CompositeObjective::new(
        Arc::new(cauchy_nll(model, batch)),
        NonsmoothTerm::l1(1, weight)?,
    )
}

/// MAP objective when a prior is set, plain likelihood otherwise.
pub fn cauchy_objective(model: &CauchyModel, batch: &SampleBatch<f64>) -> Result<CompositeObjective> {
    match model.prior_gamma {
        Some(_) => cauchy_map_objective(model, batch),
        None => Ok(CompositeObjective::smooth_only(Arc::new(cauchy_nll(model, batch)))),
    }
}

/// Fisher information of the location parameter, `1 / (2 scale^2)`.
pub fn cauchy_fisher(model: &CauchyModel) -> f64 {
    1.0 / (2.0 * model.scale * model.scale)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BivariateNormalModel {
    pub mean: [f64; 2],
    pub sigma1: f64,
    pub sigma2: f64,
}

impl BivariateNormalModel {
    pub fn new(mean: [f64; 2], sigma1: f64, sigma2: f64) -> Result<Self> {
        if !(mean[0].is_finite() && mean[1].is_finite()) {
            return Err(Error::contract("mean must be finite"));
        }
        if !(sigma1 > sigma2 && sigma2 > 0.0 && sigma1.is_finite()) {
            return Err(Error::contract("need sigma1 > sigma2 > 0"));
        }
        Ok(BivariateNormalModel {
            mean,
            sigma1,
            sigma2,
        })
    }

    /// `Sigma^{-1} = diag(sigma1^-2, sigma2^-2)`.
    pub fn precision(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            self.sigma1.powi(-2),
            self.sigma2.powi(-2),
        ]))
    }
}

pub fn normal_sample(
    model: &BivariateNormalModel,
    n: usize,
    seed: u64,
) -> Result<SampleBatch<[f64; 2]>> {
    if n == 0 {
        return Err(Error::contract("sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let obs = (0..n)
        .map(|_| {
            let (z1, z2) = standard_normal_pair(&mut rng);
            [
                model.mean[0] + model.sigma1 * z1,
                model.mean[1] + model.sigma2 * z2,
            ]
        })
        .collect();
    SampleBatch::new(obs)
}

pub fn sample_mean(batch: &SampleBatch<[f64; 2]>) -> DVector<f64> {
    let n = batch.n() as f64;
    let (s1, s2) = batch
        .observations
        .iter()
        .fold((0.0, 0.0), |(a, b), x| (a + x[0], b + x[1]));
    DVector::from_vec(vec![s1 / n, s2 / n])
}

/// `1/2 (theta - xbar)^T Sigma^{-1} (theta - xbar)`, the averaged Gaussian
/// negative log-likelihood up to a constant.
pub fn normal_nll(model: &BivariateNormalModel, batch: &SampleBatch<[f64; 2]>) -> QuadraticTerm {
    QuadraticTerm::centered(model.precision(), &sample_mean(batch))
        .expect("diagonal precision is symmetric")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticMatrixModel {
    pub n: usize,
    pub freq: DMatrix<f64>,
    pub trials_per_cell: usize,
    pub penalty: f64,
}

impl LogisticMatrixModel {
    pub fn new(freq: DMatrix<f64>, trials_per_cell: usize, penalty: f64) -> Result<Self> {
        let n = freq.nrows();
        if n == 0 || freq.ncols() != n {
            return Err(Error::contract("frequency matrix must be square and non-empty"));
        }
        if trials_per_cell == 0 {
            return Err(Error::contract("trials per cell must be at least 1"));
        }
        if !(penalty >= 0.0 && penalty.is_finite()) {
            return Err(Error::contract("penalty must be finite and nonnegative"));
        }
        let t = trials_per_cell as f64;
        for &v in freq.iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::contract("frequencies must lie in [0, 1]"));
            }
            if ((v * t).round() - v * t).abs() > 1e-9 {
                return Err(Error::contract(
                    "frequencies must be multiples of 1 / trials_per_cell",
                ));
            }
        }
        Ok(LogisticMatrixModel {
            n,
            freq,
            trials_per_cell,
            penalty,
        })
    }

    pub fn with_penalty(&self, penalty: f64) -> Result<Self> {
        Self::new(self.freq.clone(), self.trials_per_cell, penalty)
    }

    /// Total Bernoulli trials, the sample size used by the stopping rule.
    pub fn effective_n(&self) -> usize {
        self.n * self.n * self.trials_per_cell
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// `sum_ij log(1 + exp(theta_ij)) - xbar_ij theta_ij`.
#[derive(Clone, Debug)]
pub struct LogisticSmooth {
    freq: DVector<f64>,
}

impl SmoothTerm for LogisticSmooth {
    fn dim(&self) -> usize {
        self.freq.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(self.freq.iter())
            .map(|(&t, &f)| softplus(t) - f * t)
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| sigmoid(x[i]) - self.freq[i])
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<Curvature> {
        Some(Curvature::Diagonal(x.map(|t| sigmoid(t) * sigmoid(-t))))
    }
}

pub fn logistic_smooth(model: &LogisticMatrixModel) -> LogisticSmooth {
    LogisticSmooth {
        freq: DVector::from_column_slice(model.freq.as_slice()),
    }
}

pub fn logistic_objective(model: &LogisticMatrixModel) -> Result<CompositeObjective> {
    CompositeObjective::new(
        Arc::new(logistic_smooth(model)),
        NonsmoothTerm::nuclear(model.n, model.n, model.penalty)?,
    )
}

/// Elementwise logistic transform of a square matrix parameter.
pub fn probability_matrix(theta: &ParamPoint) -> Result<DMatrix<f64>> {
    let m = theta
        .to_matrix()
        .ok_or_else(|| Error::contract("probability matrix needs a matrix-shaped parameter"))?;
    if m.nrows() != m.ncols() {
        return Err(Error::contract("probability matrix needs a square parameter"));
    }
    Ok(m.map(sigmoid))
}

//! Parameter vectors and symmetric positive definite scalings.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check on scaling matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest eigenvalue a ridge-adapted curvature is lifted to.
pub const RIDGE_FLOOR: f64 = 1e-8;

/// A finite parameter vector. Matrix-valued parameters are stored column-major
/// with their `(rows, cols)` shape recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamPoint {
    coords: DVector<f64>,
    shape: Option<(usize, usize)>,
}

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(coords))
    }

    pub fn from_vector(coords: DVector<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::contract("parameter dimension must be at least 1"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter point"));
        }
        Ok(ParamPoint {
            coords,
            shape: None,
        })
    }

    /// Flattens `m` column-major and records its shape.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let p = Self::from_vector(DVector::from_column_slice(m.as_slice()))?;
        Ok(ParamPoint {
            shape: Some((m.nrows(), m.ncols())),
            ..p
        })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "parameter dimension must be at least 1");
        ParamPoint {
            coords: DVector::zeros(dim),
            shape: None,
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn with_shape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: rows * cols,
            });
        }
        self.shape = Some((rows, cols));
        Ok(self)
    }

    /// Same shape as `self`, new coordinates.
    pub fn like(&self, coords: DVector<f64>) -> Result<Self> {
        if coords.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: coords.len(),
            });
        }
        let mut p = Self::from_vector(coords)?;
        p.shape = self.shape;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.shape
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.coords
    }

    pub fn to_matrix(&self) -> Option<DMatrix<f64>> {
        self.shape
            .map(|(r, c)| DMatrix::from_column_slice(r, c, self.coords.as_slice()))
    }
}

impl Deref for ParamPoint {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.coords
    }
}

/// Raw second-order information of a smooth term. May be indefinite.
#[derive(Clone, Debug)]
pub enum Curvature {
    Dense(DMatrix<f64>),
    Diagonal(DVector<f64>),
}

impl Curvature {
    pub fn dim(&self) -> usize {
        match self {
            Curvature::Dense(m) => m.nrows(),
            Curvature::Diagonal(d) => d.len(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Curvature::Dense(m) => m.clone(),
            Curvature::Diagonal(d) => DMatrix::from_diagonal(d),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Curvature::Dense(m) => m * x,
            Curvature::Diagonal(d) => d.component_mul(x),
        }
    }

    pub fn lambda_min(&self) -> f64 {
        match self {
            Curvature::Dense(m) => SymmetricEigen::new(m.clone()).eigenvalues.min(),
            Curvature::Diagonal(d) => d.min(),
        }
    }
}

#[derive(Clone, Debug)]
enum Structure {
    ScaledIdentity(f64),
    Diagonal(DVector<f64>),
    Dense {
        matrix: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
}

/// Symmetric positive definite scaling `C`. Scalar step lengths `lambda` are
/// represented as `(1/lambda) I`.
#[derive(Clone, Debug)]
pub struct ScalingMatrix {
    dim: usize,
    structure: Structure,
    lambda_min: f64,
    lambda_max: f64,
}

impl ScalingMatrix {
    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0).expect("identity is positive definite")
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("scaling dimension must be at least 1"));
        }
        if !scale.is_finite() {
            return Err(Error::NonFinite("scaling"));
        }
        if scale <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(ScalingMatrix {
            dim,
            structure: Structure::ScaledIdentity(scale),
            lambda_min: scale,
            lambda_max: scale,
        })
    }

    /// `(1/step) I`, the scaling of an unscaled proximal step of length `step`.
    pub fn from_step(dim: usize, step: f64) -> Result<Self> {
        if step <= 0.0 {
            return Err(Error::contract("step length must be positive"));
        }
        Self::scaled_identity(dim, 1.0 / step)
    }

    pub fn diagonal(entries: DVector<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::contract("scaling dimension must be at least 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scaling"));
        }
        if entries.iter().any(|&v| v <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        let (lo, hi) = (entries.min(), entries.max());
        Ok(ScalingMatrix {
            dim: entries.len(),
            structure: Structure::Diagonal(entries),
            lambda_min: lo,
            lambda_max: hi,
        })
    }

    /// Dense scaling. Cholesky is the positive-definiteness test.
    pub fn dense(matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if d == 0 || matrix.ncols() != d {
            return Err(Error::contract("scaling matrix must be square and non-empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scaling"));
        }
        let asym = max_asymmetry(&matrix);
        let scale = matrix.amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let chol = Cholesky::new(matrix.clone()).ok_or(Error::NotPositiveDefinite)?;
        let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
        let (lo, hi) = (eig.min(), eig.max());
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(ScalingMatrix {
            dim: d,
            structure: Structure::Dense { matrix, chol },
            lambda_min: lo,
            lambda_max: hi,
        })
    }

    /// Adds `tau I` with `tau = max(0, RIDGE_FLOOR - lambda_min)` so the result is
    /// a valid scaling even when the raw curvature is indefinite.
    pub fn ridge_adapted(curvature: &Curvature) -> Result<Self> {
        match curvature {
            Curvature::Diagonal(d) => {
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("curvature"));
                }
                let tau = (RIDGE_FLOOR - d.min()).max(0.0);
                let lifted = d.add_scalar(tau);
                let first = lifted[0];
                if lifted.iter().all(|&v| v == first) {
                    Self::scaled_identity(lifted.len(), first)
                } else {
                    Self::diagonal(lifted)
                }
            }
            Curvature::Dense(m) => {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("curvature"));
                }
                let asym = max_asymmetry(m);
                if asym > SYMMETRY_TOL * m.amax() {
                    return Err(Error::NotSymmetric(asym));
                }
                let sym = (m + m.transpose()) * 0.5;
                let lo = SymmetricEigen::new(sym.clone()).eigenvalues.min();
                let tau = (RIDGE_FLOOR - lo).max(0.0);
                let mut lifted = sym;
                for i in 0..lifted.nrows() {
                    lifted[(i, i)] += tau;
                }
                Self::dense(lifted)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Returns `c` when the scaling is `c I`.
    pub fn as_scalar(&self) -> Option<f64> {
        match &self.structure {
            Structure::ScaledIdentity(c) => Some(*c),
            Structure::Diagonal(d) => {
                let first = d[0];
                d.iter().all(|&v| v == first).then_some(first)
            }
            Structure::Dense { matrix, .. } => {
                let first = matrix[(0, 0)];
                let diag_uniform = (0..self.dim).all(|i| matrix[(i, i)] == first);
                (diag_uniform && is_diagonal(matrix)).then_some(first)
            }
        }
    }

    /// Diagonal entries when the scaling is diagonal.
    pub fn as_diagonal(&self) -> Option<DVector<f64>> {
        match &self.structure {
            Structure::ScaledIdentity(c) => Some(DVector::from_element(self.dim, *c)),
            Structure::Diagonal(d) => Some(d.clone()),
            Structure::Dense { matrix, .. } => is_diagonal(matrix).then(|| matrix.diagonal()),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.structure {
            Structure::Dense { matrix, .. } => is_diagonal(matrix),
            _ => true,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.structure {
            Structure::ScaledIdentity(c) => DMatrix::identity(self.dim, self.dim) * *c,
            Structure::Diagonal(d) => DMatrix::from_diagonal(d),
            Structure::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// `C x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim);
        match &self.structure {
            Structure::ScaledIdentity(c) => x * *c,
            Structure::Diagonal(d) => d.component_mul(x),
            Structure::Dense { matrix, .. } => matrix * x,
        }
    }

    /// `C^{-1} b` through the cached factorization.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(b.len(), self.dim);
        match &self.structure {
            Structure::ScaledIdentity(c) => b / *c,
            Structure::Diagonal(d) => b.component_div(d),
            Structure::Dense { chol, .. } => chol.solve(b),
        }
    }

    /// `x^T C x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        match &self.structure {
            Structure::ScaledIdentity(c) => c * x.norm_squared(),
            Structure::Diagonal(d) => d.iter().zip(x.iter()).map(|(c, v)| c * v * v).sum(),
            Structure::Dense { matrix, .. } => x.dot(&(matrix * x)),
        }
    }

    /// Spectral norm of `C^{-1} H - I`; a finite-sample look at how well the
    /// scaling matches a reference curvature.
    pub fn mismatch_to(&self, reference: &DMatrix<f64>) -> f64 {
        let mut m = reference.clone();
        for j in 0..m.ncols() {
            let col = self.solve(&m.column(j).into_owned());
            m.set_column(j, &col);
        }
        for i in 0..self.dim {
            m[(i, i)] -= 1.0;
        }
        m.singular_values().max()
    }
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `||x||_C = sqrt(x^T C x)`.
pub fn weighted_norm(x: &DVector<f64>, c: &ScalingMatrix) -> Result<f64> {
    check_dim(c.dim(), x.len())?;
    Ok(c.quad_form(x).max(0.0).sqrt())
}

/// Solves `C y = b`.
pub fn spd_solve(c: &ScalingMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(c.dim(), b.len())?;
    Ok(c.solve(b))
}

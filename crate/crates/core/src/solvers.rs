//! Biased ridge inner solver, split and non-split outer losses, their exact
//! quadratic forms, closed-form ERM and the plug-in sandwich covariance.

use crate::numerics::{cholesky, min_norm_interpolate, CholeskyFactor, Matrix, Vector};
use crate::tasks::{split_task, SplitConfig, TaskSample};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RidgeConfig {
    pub lambda: f64,
}

impl RidgeConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }
}

fn check_shapes(w0: &Vector, x: &Matrix, y: &Vector) -> Result<()> {
    if x.ncols() != w0.len() || x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "design {}x{}, responses {}, centroid {}",
            x.nrows(),
            x.ncols(),
            y.len(),
            w0.len()
        )));
    }
    Ok(())
}

fn regularized(mut g: Matrix, shift: f64) -> Matrix {
    for i in 0..g.nrows() {
        g[(i, i)] += shift;
    }
    g
}

/// `XXᵀ + nλI`, used when the design has no more rows than columns.
fn dual_factor(x: &Matrix, lambda: f64) -> Result<CholeskyFactor> {
    let n = x.nrows() as f64;
    cholesky(&regularized(x * x.transpose(), n * lambda))
}

/// `XᵀX + nλI`.
fn primal_factor(x: &Matrix, lambda: f64) -> Result<CholeskyFactor> {
    let n = x.nrows() as f64;
    cholesky(&regularized(x.tr_mul(x), n * lambda))
}

/// `argmin_w (1/2n)‖Xw − y‖² + (λ/2)‖w − w0‖²`, or the interpolator
/// closest to `w0` when `λ = 0`.
pub fn ridge_solve(w0: &Vector, x: &Matrix, y: &Vector, cfg: RidgeConfig) -> Result<Vector> {
    check_shapes(w0, x, y)?;
    let (n, d) = x.shape();
    if n == 0 {
        return Ok(w0.clone());
    }
    let r = y - x * w0;
    if cfg.lambda == 0.0 {
        return Ok(w0 + min_norm_interpolate(x, &r)?);
    }
    let step = if n <= d {
        x.transpose() * dual_factor(x, cfg.lambda)?.solve(&r)?
    } else {
        primal_factor(x, cfg.lambda)?.solve(&(x.transpose() * r))?
    };
    Ok(w0 + step)
}

/// `(1/2n₂)‖y_val − X_val·ridge_solve(w0, X_train, y_train)‖²`.
pub fn split_loss(
    w0: &Vector,
    task: &TaskSample,
    split: SplitConfig,
    cfg: RidgeConfig,
) -> Result<f64> {
    if cfg.lambda == 0.0 && split.n1 == 0 {
        return Err(Error::InvalidSplit(
            "lambda = 0 needs at least one training row".into(),
        ));
    }
    let (train, val) = split_task(task, split)?;
    let w = ridge_solve(w0, &train.x, &train.y, cfg)?;
    check_shapes(&w, &val.x, &val.y)?;
    Ok((&val.y - &val.x * w).norm_squared() / (2.0 * split.n2 as f64))
}

/// `(1/2n)‖y − X·ridge_solve(w0, X, y)‖²`; requires `λ > 0`.
pub fn nonsplit_loss(w0: &Vector, task: &TaskSample, cfg: RidgeConfig) -> Result<f64> {
    require_positive_lambda(cfg)?;
    let w = ridge_solve(w0, &task.x, &task.y, cfg)?;
    Ok((&task.y - &task.x * w).norm_squared() / (2.0 * task.samples() as f64))
}

fn require_positive_lambda(cfg: RidgeConfig) -> Result<()> {
    if cfg.lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "lambda must be > 0 here, got {}",
            cfg.lambda
        )))
    }
}

/// Per-task loss written as `½‖A w0 − c‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub a: Matrix,
    pub c: Vector,
}

impl QuadraticForm {
    pub fn new(a: Matrix, c: Vector) -> Result<Self> {
        if a.nrows() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows, c has length {}",
                a.nrows(),
                c.len()
            )));
        }
        Ok(Self { a, c })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn residual(&self, w0: &Vector) -> Vector {
        &self.a * w0 - &self.c
    }

    pub fn loss(&self, w0: &Vector) -> f64 {
        0.5 * self.residual(w0).norm_squared()
    }

    pub fn gradient(&self, w0: &Vector) -> Vector {
        self.a.tr_mul(&self.residual(w0))
    }

    pub fn hessian(&self) -> Matrix {
        self.a.tr_mul(&self.a)
    }
}

/// Running sums `M = Σ AᵀA`, `b = Σ Aᵀc` over tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticAccumulator {
    pub m: Matrix,
    pub b: Vector,
    pub count: usize,
}

impl QuadraticAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            m: Matrix::zeros(dim, dim),
            b: Vector::zeros(dim),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn add(&mut self, form: &QuadraticForm) -> Result<()> {
        if form.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "form has dimension {}, accumulator {}",
                form.dim(),
                self.dim()
            )));
        }
        self.m.gemm_tr(1.0, &form.a, &form.a, 1.0);
        self.b.gemv_tr(1.0, &form.a, &form.c, 1.0);
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &QuadraticAccumulator) -> Result<()> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "merging accumulators of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        self.m += &other.m;
        self.b += &other.b;
        self.count += other.count;
        Ok(())
    }

    /// Accumulated empirical risk `Σ ½‖A w − c‖²` up to the constant `Σ ½‖c‖²`.
    pub fn gradient(&self, w: &Vector) -> Vector {
        &self.m * w - &self.b
    }
}

/// Split loss as a quadratic in `w0`. Needs `λ > 0`.
///
/// With `K = (XᵀX + n₁λI)⁻¹Xᵀ` from the training rows the inner map is
/// `w = (I − K X) w0 + K y`, so `A = (X_val − X_val K X)/√n₂` and
/// `c = (y_val − X_val K y)/√n₂`.
pub fn assemble_split_quadratic(
    task: &TaskSample,
    split: SplitConfig,
    cfg: RidgeConfig,
) -> Result<QuadraticForm> {
    require_positive_lambda(cfg)?;
    let (train, val) = split_task(task, split)?;
    let scale = 1.0 / (split.n2 as f64).sqrt();
    if split.n1 == 0 {
        return QuadraticForm::new(&val.x * scale, &val.y * scale);
    }
    let (n1, d) = train.x.shape();
    // eᵀ = (X_val K)ᵀ, n1 x n2
    let e_t = if n1 <= d {
        dual_factor(&train.x, cfg.lambda)?.solve_matrix(&(&train.x * val.x.transpose()))?
    } else {
        &train.x * primal_factor(&train.x, cfg.lambda)?.solve_matrix(&val.x.transpose())?
    };
    let a = (&val.x - e_t.tr_mul(&train.x)) * scale;
    let c = (&val.y - e_t.tr_mul(&train.y)) * scale;
    QuadraticForm::new(a, c)
}

/// Non-split loss as a quadratic in `w0`: `A = √n λ G⁻¹X`, `c = √n λ G⁻¹y`
/// with `G = XXᵀ + nλI`. Needs `λ > 0`.
pub fn assemble_nonsplit_quadratic(task: &TaskSample, cfg: RidgeConfig) -> Result<QuadraticForm> {
    require_positive_lambda(cfg)?;
    let (n, d) = task.x.shape();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "non-split loss needs at least one row".into(),
        ));
    }
    let root_n = (n as f64).sqrt();
    if n <= d {
        let g = dual_factor(&task.x, cfg.lambda)?;
        let coef = root_n * cfg.lambda;
        QuadraticForm::new(g.solve_matrix(&task.x)? * coef, g.solve(&task.y)? * coef)
    } else {
        // X(XᵀX + nλI)⁻¹ and the fitted residual
        let h = primal_factor(&task.x, cfg.lambda)?;
        let coef = root_n * cfg.lambda;
        let a = h.solve_matrix(&task.x.transpose())?.transpose() * coef;
        let fit = h.solve(&task.x.tr_mul(&task.y))?;
        let c = (&task.y - &task.x * fit) / root_n;
        QuadraticForm::new(a, c)
    }
}

fn singular(err: Error, what: &str) -> Error {
    match err {
        Error::NotPositiveDefinite { index, pivot } => Error::SingularSystem(format!(
            "{what} is not positive definite (pivot {pivot:e} at index {index})"
        )),
        other => other,
    }
}

/// `ŵ = M⁻¹b`. A singular `M` is reported, never regularized away.
pub fn erm_solve(acc: &QuadraticAccumulator) -> Result<Vector> {
    if acc.count == 0 {
        return Err(Error::SingularSystem("no tasks accumulated".into()));
    }
    let factor = cholesky(&acc.m).map_err(|e| singular(e, "accumulated Hessian"))?;
    factor.solve(&acc.b)
}

/// Plug-in `Ĥ⁻¹ĈĤ⁻¹` with `Ĥ = mean AᵀA` and `Ĉ = mean ∇ℓ∇ℓᵀ` at `w_hat`.
/// Its trace estimates the asymptotic MSE of the ERM.
pub fn sandwich_covariance<'a, I>(forms: I, w_hat: &Vector) -> Result<Matrix>
where
    I: IntoIterator<Item = &'a QuadraticForm>,
{
    let d = w_hat.len();
    let mut h = Matrix::zeros(d, d);
    let mut c = Matrix::zeros(d, d);
    let mut count = 0usize;
    for form in forms {
        if form.dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "form has dimension {}, estimate {d}",
                form.dim()
            )));
        }
        h.gemm_tr(1.0, &form.a, &form.a, 1.0);
        let g = form.gradient(w_hat);
        c.ger(1.0, &g, &g, 1.0);
        count += 1;
    }
    if count == 0 {
        return Err(Error::SingularSystem("no tasks supplied".into()));
    }
    let t = count as f64;
    h /= t;
    c /= t;
    let factor = cholesky(&h).map_err(|e| singular(e, "mean Hessian"))?;
    let y = factor.solve_matrix(&c)?;
    let z = factor.solve_matrix(&y.transpose())?;
    Ok((&z + z.transpose()) * 0.5)
}

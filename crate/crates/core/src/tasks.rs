//! Task distributions: the realizable Gaussian linear model and the
//! one-dimensional two-point counterexample.

use crate::numerics::{gaussian_matrix, gaussian_vector, Matrix, Rng, Vector};
use crate::{Error, Result};

/// `y_t = X_t w_t` with `X_t` standard Gaussian and
/// `w_t ~ N(centroid, param_std² I_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizableModel {
    pub dim: usize,
    pub samples: usize,
    pub centroid: Vector,
    pub param_std: f64,
}

impl RealizableModel {
    /// Model with task variance `R² = r_sq`, i.e. `param_std = √(r_sq / d)`.
    pub fn new(dim: usize, samples: usize, centroid: Vector, r_sq: f64) -> Result<Self> {
        if dim == 0 || samples == 0 {
            return Err(Error::InvalidArgument(format!(
                "realizable model needs d, n >= 1 (got d={dim}, n={samples})"
            )));
        }
        if centroid.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "centroid has length {}, expected {dim}",
                centroid.len()
            )));
        }
        if !centroid.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("centroid"));
        }
        if !(r_sq >= 0.0 && r_sq.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "r_sq must be >= 0, got {r_sq}"
            )));
        }
        Ok(Self {
            dim,
            samples,
            centroid,
            param_std: (r_sq / dim as f64).sqrt(),
        })
    }

    pub fn r_squared(&self) -> f64 {
        self.dim as f64 * self.param_std * self.param_std
    }
}

/// `d = 1`; each row is `(1, 3)` or `(3, -1)` with probability one half.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterexampleModel {
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSample {
    pub x: Matrix,
    pub y: Vector,
    pub w_true: Option<Vector>,
}

impl TaskSample {
    pub fn samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitConfig {
    pub n1: usize,
    pub n2: usize,
}

impl SplitConfig {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n2 == 0 {
            return Err(Error::InvalidSplit(
                "validation part must be non-empty".into(),
            ));
        }
        Ok(Self { n1, n2 })
    }

    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }
}

/// Draws task `task_index`: first `w_t`, then `X_t` row by row.
pub fn sample_realizable_task(model: &RealizableModel, rng: &Rng, task_index: u64) -> TaskSample {
    let mut rng = rng.derive(task_index);
    let w = &model.centroid + gaussian_vector(&mut rng, model.dim) * model.param_std;
    let x = gaussian_matrix(&mut rng, model.samples, model.dim);
    let y = &x * &w;
    TaskSample {
        x,
        y,
        w_true: Some(w),
    }
}

pub fn sample_counterexample_task(
    model: &CounterexampleModel,
    rng: &Rng,
    task_index: u64,
) -> TaskSample {
    let mut rng = rng.derive(task_index);
    let n = model.samples;
    let mut x = Matrix::zeros(n, 1);
    let mut y = Vector::zeros(n);
    for i in 0..n {
        let (xi, yi) = if rng.coin_flip() {
            (3.0, -1.0)
        } else {
            (1.0, 3.0)
        };
        x[(i, 0)] = xi;
        y[i] = yi;
    }
    TaskSample { x, y, w_true: None }
}

/// Prefix split: the first `n1` rows train, the remaining `n2` validate.
pub fn split_task(task: &TaskSample, split: SplitConfig) -> Result<(TaskSample, TaskSample)> {
    let n = task.samples();
    if split.n2 == 0 || split.total() != n {
        return Err(Error::InvalidSplit(format!(
            "split ({}, {}) does not partition {n} rows",
            split.n1, split.n2
        )));
    }
    let part = |start: usize, len: usize| TaskSample {
        x: task.x.rows(start, len).into_owned(),
        y: task.y.rows(start, len).into_owned(),
        w_true: task.w_true.clone(),
    };
    Ok((part(0, split.n1), part(split.n1, split.n2)))
}

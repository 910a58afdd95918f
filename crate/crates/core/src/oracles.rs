//! Independent ground truth for testing: exact population minimizers of the
//! one-dimensional counterexample and Gaussian quadratic-form moments.

use rayon::prelude::*;

use crate::numerics::{gaussian_vector, Matrix, Rng};
use crate::solvers::{
    assemble_nonsplit_quadratic, assemble_split_quadratic, erm_solve, sandwich_covariance,
    QuadraticAccumulator, QuadraticForm, RidgeConfig,
};
use crate::tasks::{sample_counterexample_task, split_task, CounterexampleModel, SplitConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleMinimizers {
    /// Population minimizer of the non-split objective.
    pub w_trtr_star: f64,
    /// Population minimizer of the meta-test objective with `n` inner samples.
    pub w_test_star: f64,
    pub gap: f64,
}

/// Compensated sum; the numerator mixes signs and cancels heavily for
/// larger `n`.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Expectations `E[x̄y/(s+λ)²]`, `E[s/(s+λ)²]`, `E[1/(s+λ)²]` accumulated
/// from per-outcome `(weight, count of (3,-1) rows)` pairs.
fn minimizers_from_outcomes(
    n: usize,
    lambda: f64,
    outcomes: impl Iterator<Item = (f64, usize)>,
) -> CounterexampleMinimizers {
    let nf = n as f64;
    let (mut e_xy, mut e_s, mut e_one) = (
        Neumaier::default(),
        Neumaier::default(),
        Neumaier::default(),
    );
    for (weight, k) in outcomes {
        let kf = k as f64;
        let s = (nf + 8.0 * kf) / nf;
        let xy = 3.0 * (nf - 2.0 * kf) / nf;
        let inv = 1.0 / ((s + lambda) * (s + lambda));
        e_xy.add(weight * xy * inv);
        e_s.add(weight * s * inv);
        e_one.add(weight * inv);
    }
    let (e_xy, e_s, e_one) = (e_xy.total(), e_s.total(), e_one.total());
    let w_trtr_star = e_xy / e_s;
    let w_test_star = -e_xy / (lambda * e_one);
    CounterexampleMinimizers {
        w_trtr_star,
        w_test_star,
        gap: (w_trtr_star - w_test_star).abs(),
    }
}

fn check_counterexample_args(n: usize, lambda: f64, max_n: usize) -> Result<()> {
    if n == 0 || n > max_n {
        return Err(Error::InvalidArgument(format!(
            "n must lie in 1..={max_n}, got {n}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be > 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Exact minimizers by summing over the Binomial(n, ½) count of `(3, -1)` rows.
pub fn counterexample_minimizers_exact(n: usize, lambda: f64) -> Result<CounterexampleMinimizers> {
    check_counterexample_args(n, lambda, 30)?;
    let total = 2f64.powi(n as i32);
    let mut binom = 1.0_f64;
    let weights = (0..=n).map(move |k| {
        let w = binom / total;
        binom = binom * (n - k) as f64 / (k + 1) as f64;
        (w, k)
    });
    Ok(minimizers_from_outcomes(n, lambda, weights))
}

/// Same quantities by enumerating all `2ⁿ` row assignments.
pub fn counterexample_minimizers_bruteforce(
    n: usize,
    lambda: f64,
) -> Result<CounterexampleMinimizers> {
    check_counterexample_args(n, lambda, 12)?;
    let total = 1usize << n;
    let weight = 1.0 / total as f64;
    let outcomes = (0..total).map(move |mask: usize| (weight, mask.count_ones() as usize));
    Ok(minimizers_from_outcomes(n, lambda, outcomes))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Claim1Moments {
    pub mean_sq_same: f64,
    pub stderr_same: f64,
    pub mean_sq_cross: f64,
    pub stderr_cross: f64,
}

/// Exact `(E[(vᵀAv)²], E[(vᵀAu)²]) = (2‖A‖²_F + tr²A, ‖A‖²_F)`.
pub fn claim1_expected(a: &Matrix) -> (f64, f64) {
    let fro = a.norm_squared();
    let tr = a.trace();
    (2.0 * fro + tr * tr, fro)
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Monte-Carlo estimates of `E[(vᵀAv)²]` and `E[(vᵀAu)²]` for independent
/// standard Gaussian `u, v`. Sample `i` uses `rng.derive(i)`.
pub fn claim1_moments(a: &Matrix, samples: usize, rng: &Rng) -> Result<Claim1Moments> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(
            "claim 1 needs a square matrix".into(),
        ));
    }
    let scale = a.amax();
    let asymmetry = (a - a.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asymmetry / scale,
        });
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "claim 1 check needs >= 10000 samples, got {samples}"
        )));
    }
    let d = a.nrows();
    let (same, cross): (Vec<f64>, Vec<f64>) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng.derive(i as u64);
            let v = gaussian_vector(&mut stream, d);
            let u = gaussian_vector(&mut stream, d);
            let av = a * &v;
            let q_same = v.dot(&av);
            let q_cross = u.dot(&av);
            (q_same * q_same, q_cross * q_cross)
        })
        .unzip();
    let (mean_sq_same, stderr_same) = mean_and_stderr(&same);
    let (mean_sq_cross, stderr_cross) = mean_and_stderr(&cross);
    Ok(Claim1Moments {
        mean_sq_same,
        stderr_same,
        mean_sq_cross,
        stderr_cross,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterexampleRun {
    pub tasks: usize,
    /// Non-split ERM fitted on the first `n` rows of every task.
    pub w_trtr_hat: f64,
    /// Sandwich standard error of `w_trtr_hat`.
    pub w_trtr_stderr: f64,
    pub gap_to_test_star: f64,
    /// Split ERM with `n₁ = n`, `n₂ = 1` on the same tasks.
    pub w_split_hat: f64,
    pub split_distance: f64,
    pub minimizers: CounterexampleMinimizers,
}

/// Fits both ERMs on `T` counterexample tasks and compares them with the
/// exact minimizers.
///
/// Every task carries `n + 1` rows. The non-split method sees the first `n`;
/// the split method trains on those same `n` and validates on the extra row,
/// so both target the `n`-sample meta-test objective.
pub fn counterexample_erm_gap(
    n: usize,
    lambda: f64,
    tasks: usize,
    rng: &Rng,
) -> Result<CounterexampleRun> {
    let minimizers = counterexample_minimizers_exact(n, lambda)?;
    if tasks < 100 {
        return Err(Error::InvalidArgument(format!(
            "counterexample ERM needs T >= 100, got {tasks}"
        )));
    }
    let model = CounterexampleModel { samples: n + 1 };
    let cfg = RidgeConfig::new(lambda)?;
    let split = SplitConfig::new(n, 1)?;
    let pairs = (0..tasks)
        .into_par_iter()
        .map(|t| -> Result<(QuadraticForm, QuadraticForm)> {
            let task = sample_counterexample_task(&model, rng, t as u64);
            let (train, _) = split_task(&task, split)?;
            Ok((
                assemble_nonsplit_quadratic(&train, cfg)?,
                assemble_split_quadratic(&task, split, cfg)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trtr = QuadraticAccumulator::new(1);
    let mut sp = QuadraticAccumulator::new(1);
    for (a, b) in &pairs {
        trtr.add(a)?;
        sp.add(b)?;
    }
    let w_trtr = erm_solve(&trtr)?;
    let w_split = erm_solve(&sp)?;
    let cov = sandwich_covariance(pairs.iter().map(|p| &p.0), &w_trtr)?;
    let w_trtr_hat = w_trtr[0];
    let w_split_hat = w_split[0];
    Ok(CounterexampleRun {
        tasks,
        w_trtr_hat,
        w_trtr_stderr: (cov.trace() / tasks as f64).sqrt(),
        gap_to_test_star: (w_trtr_hat - minimizers.w_test_star).abs(),
        w_split_hat,
        split_distance: (w_split_hat - minimizers.w_test_star).abs(),
        minimizers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hand_enumeration_n1() {
        let m = counterexample_minimizers_exact(1, 1.0).unwrap();
        assert_relative_eq!(m.w_trtr_star, 0.36 / 0.17, max_relative = 1e-14);
        assert_relative_eq!(m.w_test_star, -0.36 / 0.13, max_relative = 1e-14);
        assert_relative_eq!(m.gap, 0.36 / 0.17 + 0.36 / 0.13, max_relative = 1e-14);
        assert!((m.w_trtr_star - 2.117647).abs() < 1e-6);
        assert!((m.w_test_star + 2.769231).abs() < 1e-6);
        assert!((m.gap - 4.886878).abs() < 1e-6);
    }

    #[test]
    fn positive_numerator_and_gap() {
        for n in 1..=30 {
            for lambda in [0.1, 1.0, 10.0, 100.0] {
                let m = counterexample_minimizers_exact(n, lambda).unwrap();
                assert!(m.w_trtr_star > 0.0 && m.w_test_star < 0.0);
                assert!(m.gap > 0.0 && m.gap.is_finite());
            }
        }
    }

    #[test]
    fn enumeration_agrees() {
        for n in 1..=12 {
            for lambda in [0.3, 1.0, 7.0] {
                let a = counterexample_minimizers_exact(n, lambda).unwrap();
                let b = counterexample_minimizers_bruteforce(n, lambda).unwrap();
                assert_relative_eq!(a.w_trtr_star, b.w_trtr_star, max_relative = 1e-14);
                assert_relative_eq!(a.w_test_star, b.w_test_star, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn argument_checks() {
        assert!(counterexample_minimizers_exact(0, 1.0).is_err());
        assert!(counterexample_minimizers_exact(31, 1.0).is_err());
        assert!(counterexample_minimizers_exact(3, 0.0).is_err());
        assert!(counterexample_minimizers_bruteforce(13, 1.0).is_err());
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(claim1_moments(&a, 10_000, &Rng::new(0, 0)).is_err());
        assert!(claim1_moments(&Matrix::identity(2, 2), 10, &Rng::new(0, 0)).is_err());
    }

    #[test]
    fn claim1_identity_and_zero() {
        let rng = Rng::new(1, 0);
        let m = claim1_moments(&Matrix::identity(2, 2), 40_000, &rng).unwrap();
        assert!((m.mean_sq_same - 8.0).abs() <= 3.0 * m.stderr_same);
        assert!((m.mean_sq_cross - 2.0).abs() <= 3.0 * m.stderr_cross);
        assert_eq!(claim1_expected(&Matrix::identity(2, 2)), (8.0, 2.0));
        let z = claim1_moments(&Matrix::zeros(3, 3), 10_000, &rng).unwrap();
        assert_eq!((z.mean_sq_same, z.mean_sq_cross), (0.0, 0.0));
    }

    #[test]
    fn small_counterexample_run() {
        let run = counterexample_erm_gap(3, 1.0, 2000, &Rng::new(2, 0)).unwrap();
        assert!(run.w_trtr_stderr > 0.0);
        assert!((run.w_trtr_hat - run.minimizers.w_trtr_star).abs() < 5.0 * run.w_trtr_stderr);
        assert!(run.gap_to_test_star > 0.5 * run.minimizers.gap);
        assert!(counterexample_erm_gap(3, 1.0, 50, &Rng::new(2, 0)).is_err());
    }
}

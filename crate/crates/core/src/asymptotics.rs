//! Asymptotic estimation rates of the ERM centroid.
//!
//! Finite-`(n, d)` rates are ratios of expectations over Wishart spectra and
//! are estimated by Monte Carlo. In the proportional limit `d/n → γ` they
//! reduce to closed forms built from the Marchenko-Pastur Stieltjes
//! transform.

use rayon::prelude::*;

use crate::numerics::{gaussian_matrix, gram_eigvals, Rng, Vector};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMethod {
    ClosedForm,
    MonteCarlo,
}

impl RateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RateMethod::ClosedForm => "closed_form",
            RateMethod::MonteCarlo => "monte_carlo",
        }
    }
}

/// Coordinates a rate was evaluated at. Fields that do not apply are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RateMeta {
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub r_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    /// Zero exactly for closed forms.
    pub stderr: f64,
    pub method: RateMethod,
    pub meta: RateMeta,
}

impl RateEstimate {
    fn closed_form(value: f64, meta: RateMeta) -> Self {
        Self {
            value,
            stderr: 0.0,
            method: RateMethod::ClosedForm,
            meta,
        }
    }
}

/// Point `(λ, γ)` of the proportional limit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapePoint {
    pub lambda: f64,
    pub gamma: f64,
}

impl ShapePoint {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        check_positive("gamma", gamma)?;
        Ok(Self { lambda, gamma })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

/// Monte-Carlo budget: 2000 spectra up to `d = 100`, 200 beyond.
pub fn default_mc_samples(d: usize) -> usize {
    if d <= 100 {
        2000
    } else {
        200
    }
}

/// Independent spectra of `XᵀX / n` for `n x d` standard Gaussian `X`.
/// Spectrum `i` is drawn from `rng.derive(i)`.
#[derive(Clone, Debug)]
pub struct WishartSpectra {
    pub d: usize,
    pub n: usize,
    pub eigvals: Vec<Vector>,
}

impl WishartSpectra {
    pub fn sample(d: usize, n: usize, samples: usize, rng: &Rng) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let eigvals = (0..samples)
            .into_par_iter()
            .map(|i| {
                if n == 0 {
                    return Ok(Vector::zeros(d));
                }
                let mut stream = rng.derive(i as u64);
                gram_eigvals(&gaussian_matrix(&mut stream, n, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { d, n, eigvals })
    }

    pub fn len(&self) -> usize {
        self.eigvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigvals.is_empty()
    }

    /// Train-train rate `d R² · E[Σσ²/(σ+λ)⁴] / (E[Σσ/(σ+λ)²])²`.
    pub fn rho_trtr(&self, lambda: f64, r_sq: f64) -> Result<RateEstimate> {
        check_positive("lambda", lambda)?;
        self.require_samples()?;
        let (num, den): (Vec<f64>, Vec<f64>) = self
            .eigvals
            .iter()
            .map(|e| {
                e.iter().fold((0.0, 0.0), |(a, b), &s| {
                    let inv = 1.0 / (s + lambda);
                    let t = s * inv * inv;
                    (a + t * t, b + t)
                })
            })
            .unzip();
        let (ratio, se) = ratio_over_square(&num, &den);
        let scale = self.d as f64 * r_sq;
        Ok(RateEstimate {
            value: scale * ratio,
            stderr: scale * se,
            method: RateMethod::MonteCarlo,
            meta: RateMeta {
                d: Some(self.d),
                n: Some(self.n),
                gamma: Some(self.d as f64 / self.n as f64),
                lambda: Some(lambda),
                r_sq,
                ..RateMeta::default()
            },
        })
    }

    /// Train-validation rate with these spectra as the `n₁`-sample Gram
    /// matrices: `(d R²/n₂) · E[(Σx)² + (n₂+1)Σx²] / (E Σx)²` where
    /// `x = λ²/(σ+λ)²`.
    pub fn rho_sp(&self, lambda: f64, n2: usize, r_sq: f64) -> Result<RateEstimate> {
        check_positive("lambda", lambda)?;
        if n2 == 0 {
            return Err(Error::InvalidArgument("n2 must be >= 1".into()));
        }
        self.require_samples()?;
        let k = (n2 + 1) as f64;
        let (num, den): (Vec<f64>, Vec<f64>) = self
            .eigvals
            .iter()
            .map(|e| {
                let (s1, s2) = e.iter().fold((0.0, 0.0), |(a, b), &s| {
                    let r = 1.0 / (1.0 + s / lambda);
                    let x = r * r;
                    (a + x, b + x * x)
                });
                (s1 * s1 + k * s2, s1)
            })
            .unzip();
        let (ratio, se) = ratio_over_square(&num, &den);
        let scale = self.d as f64 * r_sq / n2 as f64;
        Ok(RateEstimate {
            value: scale * ratio,
            stderr: scale * se,
            method: RateMethod::MonteCarlo,
            meta: RateMeta {
                d: Some(self.d),
                n: Some(self.n + n2),
                lambda: Some(lambda),
                n1: Some(self.n),
                n2: Some(n2),
                r_sq,
                ..RateMeta::default()
            },
        })
    }

    fn require_samples(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 spectra, have {}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// `mean(num) / mean(den)²` and its delta-method standard error, treating
/// each index as one batch.
pub fn ratio_over_square(num: &[f64], den: &[f64]) -> (f64, f64) {
    let m = num.len() as f64;
    let a = num.iter().sum::<f64>() / m;
    let b = den.iter().sum::<f64>() / m;
    let ratio = a / (b * b);
    let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
    for (x, y) in num.iter().zip(den) {
        let (dx, dy) = (x - a, y - b);
        vaa += dx * dx;
        vbb += dy * dy;
        vab += dx * dy;
    }
    let denom = (m - 1.0) * m;
    let (vaa, vbb, vab) = (vaa / denom, vbb / denom, vab / denom);
    let ga = 1.0 / (b * b);
    let gb = -2.0 * a / (b * b * b);
    let var = ga * ga * vaa + gb * gb * vbb + 2.0 * ga * gb * vab;
    (ratio, var.max(0.0).sqrt())
}

/// Monte-Carlo train-train rate at finite `(d, n)`.
pub fn rho_trtr_mc(
    d: usize,
    n: usize,
    lambda: f64,
    samples: usize,
    rng: &Rng,
    r_sq: f64,
) -> Result<RateEstimate> {
    check_positive("lambda", lambda)?;
    if samples < 2 || n == 0 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and samples >= 2 (got n={n}, samples={samples})"
        )));
    }
    WishartSpectra::sample(d, n, samples, rng)?.rho_trtr(lambda, r_sq)
}

/// Monte-Carlo train-validation rate. `n1 = 0` is exact and skips sampling.
pub fn rho_sp_mc(
    d: usize,
    n1: usize,
    n2: usize,
    lambda: f64,
    samples: usize,
    rng: &Rng,
    r_sq: f64,
) -> Result<RateEstimate> {
    check_positive("lambda", lambda)?;
    if n2 == 0 {
        return Err(Error::InvalidArgument("n2 must be >= 1".into()));
    }
    if n1 == 0 {
        let mut est = sp_optimal_rate(d, n2, r_sq)?;
        est.meta.lambda = Some(lambda);
        est.meta.n1 = Some(0);
        est.meta.n = Some(n2);
        return Ok(est);
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("samples must be >= 2".into()));
    }
    WishartSpectra::sample(d, n1, samples, rng)?.rho_sp(lambda, n2, r_sq)
}

/// Best train-validation rate at finite `(n, d)`: `(d + n₂ + 1) R² / n₂`.
pub fn sp_optimal_rate(d: usize, n2: usize, r_sq: f64) -> Result<RateEstimate> {
    if n2 == 0 {
        return Err(Error::InvalidArgument("n2 must be >= 1".into()));
    }
    let value = (d + n2 + 1) as f64 * r_sq / n2 as f64;
    Ok(RateEstimate::closed_form(
        value,
        RateMeta {
            d: Some(d),
            n2: Some(n2),
            r_sq,
            ..RateMeta::default()
        },
    ))
}

/// `(z + 1 + γ)² − 4γ` written as a product of two positive factors.
fn mp_discriminant(z: f64, gamma: f64) -> f64 {
    let r = gamma.sqrt();
    let disc = (z + (r - 1.0) * (r - 1.0)) * (z + (r + 1.0) * (r + 1.0));
    assert!(disc > 0.0, "Marchenko-Pastur discriminant must be positive");
    disc
}

/// Marchenko-Pastur Stieltjes transform in two-parameter form,
/// `s(λ₁, λ₂) = lim (1/d) tr((λ₁ I + λ₂ Σ̂)⁻¹)`.
pub fn stieltjes_mp(lambda1: f64, lambda2: f64, gamma: f64) -> f64 {
    let z = lambda1 / lambda2;
    let root = mp_discriminant(z, gamma).sqrt();
    let shifted = z + 1.0 - gamma;
    if shifted >= 0.0 {
        // rationalized to avoid cancellation in γ − 1 − z + √D
        2.0 / (lambda2 * (root + shifted))
    } else {
        (root - shifted) / (2.0 * gamma * lambda1)
    }
}

/// `lim (1/d) E tr((Σ̂ + λI)⁻² Σ̂)`, i.e. `−∂s/∂λ₂` at `(λ, 1)`.
pub fn resolvent_trace_first(point: ShapePoint) -> f64 {
    let ShapePoint { lambda, gamma } = point;
    let a = lambda + 1.0 + gamma;
    let root = mp_discriminant(lambda, gamma).sqrt();
    2.0 / (root * (a + root))
}

/// `lim (1/d) E tr((Σ̂ + λI)⁻⁴ Σ̂²)`, i.e. `−⅙ ∂λ₁∂²λ₂ s` at `(λ, 1)`.
pub fn resolvent_trace_second(point: ShapePoint) -> f64 {
    let ShapePoint { lambda, gamma } = point;
    let disc = mp_discriminant(lambda, gamma);
    ((gamma - 1.0).powi(2) + (gamma + 1.0) * lambda) / disc.powf(2.5)
}

/// Proportional-limit train-train rate `ρ(λ, γ)` (asymptotic MSE per unit R²).
pub fn rho_limit(point: ShapePoint) -> f64 {
    let ShapePoint { lambda, gamma } = point;
    let a = lambda + 1.0 + gamma;
    let disc = mp_discriminant(lambda, gamma);
    let root = disc.sqrt();
    let numer = (gamma - 1.0).powi(2) + (gamma + 1.0) * lambda;
    numer * (a + root) * (a + root) / (4.0 * disc * root)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoOptimum {
    pub lambda_star: f64,
    pub value: f64,
}

pub const RHO_BRACKET: (f64, f64) = (1e-4, 1e4);
const RHO_SCAN_POINTS: usize = 401;

/// Minimizes `ρ(·, γ)` over `λ ∈ [1e-4, 1e4]`: a log-spaced scan locates the
/// basin, then golden-section search on `log λ` shrinks it below `tol`.
pub fn optimize_rho(gamma: f64, tol: f64) -> Result<RhoOptimum> {
    check_positive("gamma", gamma)?;
    check_positive("tol", tol)?;
    let (lo, hi) = (RHO_BRACKET.0.ln(), RHO_BRACKET.1.ln());
    let f = |t: f64| {
        rho_limit(ShapePoint {
            lambda: t.exp(),
            gamma,
        })
    };
    let step = (hi - lo) / (RHO_SCAN_POINTS - 1) as f64;
    let grid = |i: usize| lo + step * i as f64;
    let best = (0..RHO_SCAN_POINTS)
        .map(|i| (i, f(grid(i))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let mut a = grid(best.saturating_sub(1));
    let mut b = grid((best + 1).min(RHO_SCAN_POINTS - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    let t = 0.5 * (a + b);
    Ok(RhoOptimum {
        lambda_star: t.exp(),
        value: f(t),
    })
}

/// `max{1 + 5γ/27, 5/27 + γ}`.
pub fn rho_upper_bound(gamma: f64) -> f64 {
    (1.0 + 5.0 * gamma / 27.0).max(5.0 / 27.0 + gamma)
}

/// Optimally tuned train-validation rate in the proportional limit, `1 + γ`.
pub fn sp_limit_rate(gamma: f64) -> f64 {
    1.0 + gamma
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TunedLambda {
    pub lambda: f64,
    pub estimate: RateEstimate,
}

/// Train-train regularization for finite `(d, n)`: start from the
/// proportional-limit optimizer at `γ = d/n`, then pick the best of
/// `λ₀·2^{k/2}`, `k = −2..=2`, by Monte-Carlo rate on shared spectra.
pub fn tune_trtr_lambda(
    d: usize,
    n: usize,
    samples: usize,
    rng: &Rng,
    r_sq: f64,
) -> Result<TunedLambda> {
    let base = optimize_rho(d as f64 / n as f64, 1e-8)?.lambda_star;
    let spectra = WishartSpectra::sample(d, n, samples, rng)?;
    let mut best: Option<TunedLambda> = None;
    for k in -2..=2 {
        let lambda = base * 2f64.powf(k as f64 / 2.0);
        let estimate = spectra.rho_trtr(lambda, r_sq)?;
        if best.is_none_or(|b| estimate.value < b.estimate.value) {
            best = Some(TunedLambda { lambda, estimate });
        }
    }
    Ok(best.expect("five candidates"))
}

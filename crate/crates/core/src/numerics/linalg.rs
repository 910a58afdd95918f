use crate::{Error, Result};

use super::{Matrix, Vector};

/// Relative asymmetry accepted by [`sym_eigvals`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Cholesky pivots at or below this fraction of the largest diagonal entry
/// are treated as loss of positive definiteness.
pub const PIVOT_TOLERANCE: f64 = 1e-13;
/// Singular values below this fraction of the largest are dropped by the
/// pseudo-inverse.
pub const PSEUDO_INVERSE_RCOND: f64 = 1e-10;

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = max_abs(s);
    let n = s.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    let asymmetry = if scale > 0.0 { worst / scale } else { 0.0 };
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix, largest first.
pub fn sym_eigvals(s: &Matrix) -> Result<Vector> {
    check_symmetric(s)?;
    let mut vals: Vec<f64> = s.clone().symmetric_eigenvalues().iter().copied().collect();
    sort_descending(&mut vals);
    Ok(Vector::from_vec(vals))
}

fn sort_descending(vals: &mut [f64]) {
    vals.sort_by(|a, b| b.total_cmp(a));
}

/// Spectrum of `XᵀX / n` for an `n x d` design, largest first, length `d`.
///
/// With fewer rows than columns the Gram matrix is rank deficient, so the
/// nonzero part comes from the singular values of `X / √n` and the rest is
/// padded with exact zeros.
pub fn gram_eigvals(x: &Matrix) -> Result<Vector> {
    let (n, d) = x.shape();
    if n == 0 {
        return Ok(Vector::zeros(d));
    }
    let scaled = x / (n as f64).sqrt();
    let mut vals: Vec<f64> = if n < d {
        let mut v: Vec<f64> = scaled.singular_values().iter().map(|s| s * s).collect();
        v.resize(d, 0.0);
        v
    } else {
        let g = scaled.tr_mul(&scaled);
        let g = (&g + g.transpose()) * 0.5;
        g.symmetric_eigenvalues().iter().copied().collect()
    };
    sort_descending(&mut vals);
    Ok(Vector::from_vec(vals))
}

/// Lower-triangular factor `L` with `S = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: Matrix,
}

/// Cholesky factorization of a symmetric positive definite matrix. Only the
/// lower triangle of `s` is read.
pub fn cholesky(s: &Matrix) -> Result<CholeskyFactor> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let n = s.nrows();
    let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(s[(i, i)].abs()));
    let floor = PIVOT_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = s[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot.is_nan() || pivot <= floor {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let ljj = pivot.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut acc = s[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / ljj;
        }
    }
    Ok(CholeskyFactor { l })
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has length {}, factor is {}x{}",
                b.len(),
                self.dim(),
                self.dim()
            )));
        }
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        Ok(x)
    }

    /// Solves `S X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Result<Matrix> {
        if b.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, factor is {}x{}",
                b.nrows(),
                self.dim(),
                self.dim()
            )));
        }
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        Ok(x)
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        let l = &self.l;
        // L z = b
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= l[(i, k)] * x[k];
            }
            x[i] = acc / l[(i, i)];
        }
        // Lᵀ x = z
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * x[k];
            }
            x[i] = acc / l[(i, i)];
        }
    }
}

/// Solves `S x = b` for symmetric positive definite `S` via Cholesky.
pub fn solve_spd(s: &Matrix, b: &Vector) -> Result<Vector> {
    cholesky(s)?.solve(b)
}

/// Moore-Penrose pseudo-inverse via SVD, dropping singular values below
/// `PSEUDO_INVERSE_RCOND · σ_max`.
pub fn pseudo_inverse(x: &Matrix) -> Matrix {
    let (n, d) = x.shape();
    if n == 0 || d == 0 {
        return Matrix::zeros(d, n);
    }
    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s_max = svd.singular_values.max();
    let cutoff = PSEUDO_INVERSE_RCOND * s_max;
    let mut out = Matrix::zeros(d, n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v_t.row(k).transpose() * u.column(k).transpose() / s;
        }
    }
    out
}

/// Minimum-norm solution of `X w = r`, i.e. `X† r`.
pub fn min_norm_interpolate(x: &Matrix, r: &Vector) -> Result<Vector> {
    if r.len() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs has length {}, design has {} rows",
            r.len(),
            x.nrows()
        )));
    }
    Ok(pseudo_inverse(x) * r)
}

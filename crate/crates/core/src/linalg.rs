//! Small dense kernels: Householder QR for the regression, one-sided Jacobi
//! singular values for the condition guard, and Cholesky for the covariate
//! covariance solve.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, hypot, sqrt};

use crate::error::{Error, Result};

/// Columns whose norm drops below this fraction of their original norm during
/// elimination are treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-13;

/// Householder QR of an `n x p` column-major matrix, `n >= p`.
#[derive(Debug, Clone)]
pub struct Qr {
    n: usize,
    p: usize,
    // Householder vectors; column j holds v_j in rows j..n.
    reflectors: Vec<f64>,
    betas: Vec<f64>,
    // Upper triangle of R, column-major p x p.
    r: Vec<f64>,
}

impl Qr {
    /// Factorises `columns` (column-major, `n` rows, `labels.len()` columns).
    /// Fails with the label of the first column found to be linearly
    /// dependent on its predecessors.
    pub fn factor(columns: &[f64], n: usize, labels: &[String]) -> Result<Self> {
        let p = labels.len();
        if columns.len() != n * p {
            return Err(Error::Dimension(alloc::format!(
                "expected {} entries for a {n}x{p} matrix, got {}",
                n * p,
                columns.len()
            )));
        }
        if n < p {
            return Err(Error::TooFewObservations {
                n,
                params: p,
                required: p,
            });
        }
        let mut a = columns.to_vec();
        let original: Vec<f64> = (0..p).map(|j| norm(&a[j * n..(j + 1) * n])).collect();
        let mut betas = vec![0.0; p];
        let mut r = vec![0.0; p * p];

        for j in 0..p {
            let x = &mut a[j * n + j..(j + 1) * n];
            let alpha_norm = norm(x);
            if original[j] == 0.0 || alpha_norm <= RANK_TOLERANCE * original[j] {
                return Err(Error::RankDeficient {
                    column: labels[j].clone(),
                });
            }
            let alpha = if x[0] >= 0.0 { -alpha_norm } else { alpha_norm };
            x[0] -= alpha;
            let vtv = dot(x, x);
            betas[j] = 2.0 / vtv;
            r[j * p + j] = alpha;

            // Apply H_j to the remaining columns.
            let v: Vec<f64> = x.to_vec();
            for c in (j + 1)..p {
                let target = &mut a[c * n + j..(c + 1) * n];
                let s = betas[j] * dot(&v, target);
                for (t, vi) in target.iter_mut().zip(&v) {
                    *t -= s * vi;
                }
                r[c * p + j] = a[c * n + j];
            }
        }
        Ok(Qr {
            n,
            p,
            reflectors: a,
            betas,
            r,
        })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    fn reflector(&self, j: usize) -> &[f64] {
        &self.reflectors[j * self.n + j..(j + 1) * self.n]
    }

    /// Overwrites `y` with `Q^T y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        for j in 0..self.p {
            let v = self.reflector(j);
            let target = &mut y[j..];
            let s = self.betas[j] * dot(v, target);
            for (t, vi) in target.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    /// Overwrites `y` with `Q y`.
    pub fn apply_q(&self, y: &mut [f64]) {
        for j in (0..self.p).rev() {
            let v = self.reflector(j);
            let target = &mut y[j..];
            let s = self.betas[j] * dot(v, target);
            for (t, vi) in target.iter_mut().zip(v) {
                *t -= s * vi;
            }
        }
    }

    /// Entry `(row, col)` of R.
    pub fn r(&self, row: usize, col: usize) -> f64 {
        if row > col {
            0.0
        } else {
            self.r[col * self.p + row]
        }
    }

    /// Least-squares coefficients and residuals for the response `y`.
    /// Residuals are formed as `Q [0; (Q^T y)_tail]`, which keeps them
    /// orthogonal to the column space at working precision.
    pub fn least_squares(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = y.to_vec();
        self.apply_qt(&mut z);
        let coef = self.solve_upper(&z[..self.p]);
        for zi in z.iter_mut().take(self.p) {
            *zi = 0.0;
        }
        self.apply_q(&mut z);
        (coef, z)
    }

    /// Solves `R x = b`.
    pub fn solve_upper(&self, b: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut x = b[..p].to_vec();
        for i in (0..p).rev() {
            let mut s = x[i];
            for c in (i + 1)..p {
                s -= self.r(i, c) * x[c];
            }
            x[i] = s / self.r(i, i);
        }
        x
    }

    /// Diagonal entry `i` of `(X^T X)^{-1} = R^{-1} R^{-T}`.
    pub fn inverse_gram_diagonal(&self, i: usize) -> f64 {
        // Row i of R^{-1} is e_i^T R^{-1}; solve R^T u = e_i.
        let p = self.p;
        let mut u = vec![0.0; p];
        for row in 0..p {
            let mut s = if row == i { 1.0 } else { 0.0 };
            for c in 0..row {
                s -= self.r(c, row) * u[c];
            }
            u[row] = s / self.r(row, row);
        }
        dot(&u, &u)
    }

    /// Two-norm condition number of the factored matrix (equal to that of R).
    pub fn condition_number(&self) -> f64 {
        let p = self.p;
        let mut m = vec![0.0; p * p];
        for c in 0..p {
            for row in 0..=c {
                m[c * p + row] = self.r(row, c);
            }
        }
        let sv = singular_values(&mut m, p, p);
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Singular values of an `n x p` column-major matrix (destroyed) by
/// one-sided Jacobi rotations.
pub fn singular_values(a: &mut [f64], n: usize, p: usize) -> Vec<f64> {
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let (alpha, beta, gamma) = {
                    let ci = &a[i * n..(i + 1) * n];
                    let cj = &a[j * n..(j + 1) * n];
                    (dot(ci, ci), dot(cj, cj), dot(ci, cj))
                };
                if fabs(gamma) <= 1e-15 * sqrt(alpha * beta) || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (fabs(zeta) + hypot(1.0, zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / hypot(1.0, t);
                let s = c * t;
                for row in 0..n {
                    let xi = a[i * n + row];
                    let xj = a[j * n + row];
                    a[i * n + row] = c * xi - s * xj;
                    a[j * n + row] = s * xi + c * xj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..p).map(|j| norm(&a[j * n..(j + 1) * n])).collect()
}

/// Cholesky factor (lower, row-major) of a symmetric positive definite
/// `d x d` matrix given row-major.
pub fn cholesky(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    let scale = (0..d).map(|i| fabs(a[i * d + i])).fold(0.0, f64::max);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for m in 0..j {
                s -= l[i * d + m] * l[j * d + m];
            }
            if i == j {
                if !(s > 1e-14 * scale) {
                    return Err(Error::SingularCovariance);
                }
                l[i * d + i] = sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the Cholesky factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..d {
        let mut s = y[i];
        for m in 0..i {
            s -= l[i * d + m] * y[m];
        }
        y[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = y[i];
        for m in (i + 1)..d {
            s -= l[m * d + i] * y[m];
        }
        y[i] = s / l[i * d + i];
    }
    y
}

/// Solves a small dense system by Gaussian elimination with partial
/// pivoting. `a` is row-major `d x d`.
pub fn solve_dense(a: &[f64], d: usize, b: &[f64]) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().copied().map(fabs).fold(0.0, f64::max);
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&r1, &r2| fabs(m[r1 * d + col]).total_cmp(&fabs(m[r2 * d + col])))
            .unwrap_or(col);
        if !(fabs(m[pivot * d + col]) > 1e-14 * scale) {
            return Err(Error::SingularCovariance);
        }
        if pivot != col {
            for c in 0..d {
                m.swap(col * d + c, pivot * d + c);
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..d {
            let f = m[row * d + col] / m[col * d + col];
            if f != 0.0 {
                for c in col..d {
                    m[row * d + c] -= f * m[col * d + c];
                }
                x[row] -= f * x[col];
            }
        }
    }
    for row in (0..d).rev() {
        let mut s = x[row];
        for c in (row + 1)..d {
            s -= m[row * d + c] * x[c];
        }
        x[row] = s / m[row * d + row];
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    // Scaled to avoid overflow on large entries.
    let scale = a.iter().copied().map(fabs).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = a.iter().map(|x| (x / scale) * (x / scale)).sum();
    scale * sqrt(s)
}

//! Small dense matrices and the linear solves the allocator needs.
//!
//! Everything here is sized for control problems with a few dozen unknowns:
//! storage is row-major `Vec`, solves are LU with partial pivoting, and the
//! condition estimate is exact (`n` extra solves) rather than approximated.

use super::scalar::Scalar;
use super::NumericsError;

/// Condition-estimate threshold above which a solve is refused.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Dense row-major matrix with explicit dimensions. Generic over the scalar
/// type so regressors and Jacobian blocks can hold AD carriers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S = f64> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: &[&[S]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows in Mat::from_rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols, "Mat::from_vec size mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        assert!(i < self.rows, "row {i} out of range {}", self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(
            self.cols,
            x.len(),
            "matvec: {}x{} by vector of length {}",
            self.rows,
            self.cols,
            x.len()
        );
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..self.cols {
                    acc += self[(i, j)].clone() * x[j].clone();
                }
                acc
            })
            .collect()
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)].clone();
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let t = a.clone() * rhs[(k, j)].clone();
                    out[(i, j)] += t;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn scale(&self, k: S) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clone() * k.clone();
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add: shape mismatch");
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b.clone();
        }
        out
    }

    /// Kronecker product `self (x) rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)].clone();
                for p in 0..rhs.rows {
                    for q in 0..rhs.cols {
                        out[(i * rhs.rows + p, j * rhs.cols + q)] =
                            a.clone() * rhs[(p, q)].clone();
                    }
                }
            }
        }
        out
    }

    /// Copy `block` into `self` with its upper-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(
            r0 + block.rows <= self.rows && c0 + block.cols <= self.cols,
            "set_block out of range"
        );
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)].clone();
            }
        }
    }

    /// Extract the `nr` x `nc` block at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "block out of range");
        let mut out = Self::zeros(nr, nc);
        for i in 0..nr {
            for j in 0..nc {
                out[(i, j)] = self[(r0 + i, c0 + j)].clone();
            }
        }
        out
    }
}

impl Mat<f64> {
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting.
    pub fn lu(&self) -> Result<Lu, NumericsError> {
        Lu::factor(self)
    }

    /// Condition estimate in the 1-norm: `||A||_1 * ||A^-1||_1`, the inverse
    /// norm computed exactly column by column.
    pub fn condition_estimate(&self) -> f64 {
        let lu = match Lu::factor(self) {
            Ok(lu) => lu,
            Err(_) => return f64::INFINITY,
        };
        let n = self.rows;
        let mut inv_norm: f64 = 0.0;
        let mut col_sums = vec![0.0; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let x = lu.solve(&e);
            for (s, xi) in col_sums.iter_mut().zip(&x) {
                *s = xi.abs();
            }
            inv_norm = inv_norm.max(col_sums.iter().sum::<f64>());
        }
        self.norm_one() * inv_norm
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of {}x{}", self.rows, self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// LU factors of a square matrix, with the pivot permutation.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Mat<f64>,
    piv: Vec<usize>,
}

impl Lu {
    fn factor(a: &Mat<f64>) -> Result<Self, NumericsError> {
        assert_eq!(a.rows, a.cols, "LU of a non-square {}x{} matrix", a.rows, a.cols);
        let n = a.rows;
        let mut lu = a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(NumericsError::SingularHessian {
                    estimate: f64::INFINITY,
                });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                piv.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let m = lu[(i, k)] / pivot;
                lu[(i, k)] = m;
                for j in (k + 1)..n {
                    let t = m * lu[(k, j)];
                    lu[(i, j)] -= t;
                }
            }
        }
        Ok(Self { lu, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows;
        assert_eq!(b.len(), n, "solve: rhs length {} vs {}", b.len(), n);
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.lu[(i, j)] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[(i, j)] * x[j];
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }
}

/// Solve `A x = b` by LU with partial pivoting, refusing systems whose
/// condition estimate exceeds [`CONDITION_LIMIT`].
pub fn solve_linear(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let estimate = a.condition_estimate();
    if !estimate.is_finite() || estimate > CONDITION_LIMIT {
        return Err(NumericsError::SingularHessian { estimate });
    }
    Ok(a.lu()?.solve(b))
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
/// Reference-quality for the small, well-scaled matrices used in tests.
pub fn expm(a: &Mat<f64>) -> Mat<f64> {
    assert_eq!(a.rows, a.cols, "expm of non-square matrix");
    let n = a.rows;
    let norm = a.norm_inf();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a.scale(1.0 / f64::powi(2.0, s as i32));
    let mut term = Mat::<f64>::identity(n);
    let mut sum = Mat::<f64>::identity(n);
    for k in 1..=24 {
        term = term.matmul(&b).scale(1.0 / k as f64);
        sum = sum.add(&term);
    }
    let mut out = sum;
    for _ in 0..s {
        out = out.matmul(&out);
    }
    out
}

/// Characteristic polynomial coefficients (monic, descending powers) of the
/// chain-integrator companion matrix whose last row is `-gains`:
/// `s^d + g_d s^(d-1) + ... + g_1`.
pub fn companion_char_poly(gains: &[f64]) -> Vec<f64> {
    let d = gains.len();
    let mut coeffs = vec![1.0];
    coeffs.extend(gains.iter().rev());
    assert_eq!(coeffs.len(), d + 1);
    coeffs
}

/// Routh–Hurwitz test: true iff all roots of the polynomial (coefficients in
/// descending powers, leading coefficient positive) lie strictly in the open
/// left half-plane.
pub fn routh_hurwitz_stable(coeffs: &[f64]) -> bool {
    let n = coeffs.len();
    if n == 0 || coeffs[0] <= 0.0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    if coeffs.iter().any(|c| *c <= 0.0) {
        // A Hurwitz polynomial with positive leading coefficient has all
        // coefficients positive.
        return false;
    }
    // Build the Routh array; all first-column entries must stay positive.
    let cols = n.div_ceil(2);
    let mut row0: Vec<f64> = (0..cols).map(|i| *coeffs.get(2 * i).unwrap_or(&0.0)).collect();
    let mut row1: Vec<f64> = (0..cols)
        .map(|i| *coeffs.get(2 * i + 1).unwrap_or(&0.0))
        .collect();
    for _ in 2..n {
        if row1[0] == 0.0 {
            return false;
        }
        let mut next = vec![0.0; cols];
        for j in 0..cols - 1 {
            next[j] = (row1[0] * row0[j + 1] - row0[0] * row1[j + 1]) / row1[0];
        }
        if next[0] <= 0.0 {
            return false;
        }
        row0 = row1;
        row1 = next;
    }
    true
}

/// Roots of `s^2 + b s + c` (the eigenvalues of a 2nd-order companion block),
/// returned as (real, imaginary) pairs.
pub fn quadratic_roots(b: f64, c: f64) -> [(f64, f64); 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        [((-b + sq) / 2.0, 0.0), ((-b - sq) / 2.0, 0.0)]
    } else {
        let im = (-disc).sqrt() / 2.0;
        [(-b / 2.0, im), (-b / 2.0, -im)]
    }
}

/// Dot product with a length check.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `y += k * x` with a length check.
pub fn axpy(y: &mut [f64], k: f64, x: &[f64]) {
    assert_eq!(y.len(), x.len(), "axpy: length mismatch");
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

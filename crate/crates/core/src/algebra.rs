//! Dense small-matrix algebra.
//!
//! Everything the estimators need lives here: a row-major [`Mat`], the
//! `vec`/`vech` operators (column-stacking order), Kronecker products,
//! commutation and elimination matrices, Cholesky, LU and Householder QR
//! solves, a cyclic Jacobi eigensolver for symmetric matrices, and the
//! companion matrix of a VAR together with its spectral radius.
//!
//! Matrices here are tiny (a few dozen rows at most), so the routines favour
//! clarity over blocking or cache tricks.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix stored row-major: `data[i * cols + j] = m[(i, j)]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "Mat::from_row_major",
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Column vector (n x 1).
    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product. Panics on non-conformable shapes.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape(), "add shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!(self.shape(), other.shape(), "sub shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add_assign_scaled(&mut self, other: &Mat, s: f64) {
        assert_eq!(self.shape(), other.shape(), "add_assign_scaled shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(M + M^T) / 2`.
    pub fn symmetrize(&self) -> Mat {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        Mat::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        Mat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        assert!(
            r0 + b.rows <= self.rows && c0 + b.cols <= self.cols,
            "set_block out of range"
        );
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn is_lower_triangular(&self) -> bool {
        (0..self.rows).all(|i| ((i + 1)..self.cols).all(|j| self[(i, j)] == 0.0))
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Column-stacking: entry `(i, j)` lands at position `j * rows + i`.
pub fn vec(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.rows * m.cols);
    for j in 0..m.cols {
        for i in 0..m.rows {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`vec`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Mat> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            context: "unvec",
            expected: format!("{}", rows * cols),
            got: format!("{}", v.len()),
        });
    }
    Ok(Mat::from_fn(rows, cols, |i, j| v[j * rows + i]))
}

/// Column-stacked lower triangle, diagonal included.
pub fn vech(m: &Mat) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let d = m.rows;
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for j in 0..d {
        for i in j..d {
            out.push(m[(i, j)]);
        }
    }
    Ok(out)
}

/// Rebuilds the symmetric matrix whose `vech` is `v`.
pub fn unvech(v: &[f64], d: usize) -> Result<Mat> {
    if v.len() != d * (d + 1) / 2 {
        return Err(Error::DimensionMismatch {
            context: "unvech",
            expected: format!("{}", d * (d + 1) / 2),
            got: format!("{}", v.len()),
        });
    }
    let mut m = Mat::zeros(d, d);
    let mut pos = 0;
    for j in 0..d {
        for i in j..d {
            m[(i, j)] = v[pos];
            m[(j, i)] = v[pos];
            pos += 1;
        }
    }
    Ok(m)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (br, bc) = b.shape();
    Mat::from_fn(a.rows * br, a.cols * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// `K_{mn}` with `K_{mn} vec(G) = vec(G^T)` for every `m x n` matrix `G`.
pub fn commutation_matrix(m: usize, n: usize) -> Mat {
    let mut k = Mat::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..n {
            // G[i,j] sits at j*m+i in vec(G) and at i*n+j in vec(G^T).
            k[(i * n + j, j * m + i)] = 1.0;
        }
    }
    k
}

/// `L_d` with `L_d vec(F) = vech(F)` for every `d x d` matrix `F`.
pub fn elimination_matrix(d: usize) -> Mat {
    let mut l = Mat::zeros(d * (d + 1) / 2, d * d);
    let mut row = 0;
    for j in 0..d {
        for i in j..d {
            l[(row, j * d + i)] = 1.0;
            row += 1;
        }
    }
    l
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
///
/// The input is symmetrized first, since kernel-averaged covariance matrices
/// are symmetric only up to rounding. Failure reports the 1-based pivot.
pub fn cholesky_lower(omega: &Mat) -> Result<Mat> {
    if !omega.is_square() {
        return Err(Error::NotSquare {
            rows: omega.rows,
            cols: omega.cols,
        });
    }
    let a = omega.symmetrize();
    let n = a.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j + 1 });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Solves `L L^T X = B` given the lower Cholesky factor.
pub fn cholesky_solve(l: &Mat, b: &Mat) -> Mat {
    let n = l.rows;
    assert_eq!(b.rows, n, "cholesky_solve shape mismatch");
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    if b.rows != a.rows {
        return Err(Error::DimensionMismatch {
            context: "lu_solve",
            expected: format!("{} rows", a.rows),
            got: format!("{} rows", b.rows),
        });
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 && n > 0 {
        return Err(Error::Singular("lu_solve"));
    }
    for k in 0..n {
        let (piv, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if pmax <= scale * 1e-15 {
            return Err(Error::Singular("lu_solve"));
        }
        if piv != k {
            for j in 0..n {
                lu.data.swap(k * n + j, piv * n + j);
            }
            for j in 0..x.cols {
                let c = x.cols;
                x.data.swap(k * c + j, piv * c + j);
            }
        }
        for i in (k + 1)..n {
            let f = lu[(i, k)] / lu[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..x.cols {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for c in 0..x.cols {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for j in (i + 1)..n {
                s -= lu[(i, j)] * x[(j, c)];
            }
            x[(i, c)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    lu_solve(a, &Mat::identity(a.rows))
}

/// Result of a Householder QR least-squares solve.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// `k x m` coefficient matrix minimizing `||X B - Y||_F`.
    pub coef: Mat,
    /// Condition number estimate of `X^T X` (squared 1-norm condition of `R`).
    pub gram_condition: f64,
}

/// Least squares via Householder QR on `X` (`n x k`, `n >= k`).
pub fn qr_least_squares(x: &Mat, y: &Mat) -> Result<LeastSquares> {
    let (n, k) = x.shape();
    if y.rows != n {
        return Err(Error::DimensionMismatch {
            context: "qr_least_squares",
            expected: format!("{n} rows"),
            got: format!("{} rows", y.rows),
        });
    }
    if n < k {
        return Err(Error::InsufficientSample { needed: k, got: n });
    }
    let m = y.cols;
    let mut a = x.clone();
    let mut b = y.clone();
    let mut v = vec![0.0; n];
    for j in 0..k {
        let norm = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(j, j)] > 0.0 { -norm } else { norm };
        for i in j..n {
            v[i] = a[(i, j)];
        }
        v[j] -= alpha;
        let vnorm2: f64 = (j..n).map(|i| v[i] * v[i]).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        for c in j..k {
            let dot: f64 = (j..n).map(|i| v[i] * a[(i, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..n {
                a[(i, c)] -= f * v[i];
            }
        }
        for c in 0..m {
            let dot: f64 = (j..n).map(|i| v[i] * b[(i, c)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..n {
                b[(i, c)] -= f * v[i];
            }
        }
    }
    let r = Mat::from_fn(k, k, |i, j| if j >= i { a[(i, j)] } else { 0.0 });
    let gram_condition = triangular_condition(&r, true).powi(2);
    if !gram_condition.is_finite() {
        return Err(Error::Singular("qr_least_squares"));
    }
    let mut coef = Mat::zeros(k, m);
    for c in 0..m {
        for i in (0..k).rev() {
            let mut s = b[(i, c)];
            for j in (i + 1)..k {
                s -= r[(i, j)] * coef[(j, c)];
            }
            coef[(i, c)] = s / r[(i, i)];
        }
    }
    Ok(LeastSquares {
        coef,
        gram_condition,
    })
}

/// 1-norm condition number of a triangular matrix (`upper` selects the
/// triangle), computed through the explicit inverse. Infinite when a
/// diagonal entry vanishes.
pub fn triangular_condition(t: &Mat, upper: bool) -> f64 {
    let n = t.rows;
    if (0..n).any(|i| t[(i, i)] == 0.0) {
        return f64::INFINITY;
    }
    let mut inv = Mat::zeros(n, n);
    for c in 0..n {
        if upper {
            for i in (0..n).rev() {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in (i + 1)..n {
                    s -= t[(i, j)] * inv[(j, c)];
                }
                inv[(i, c)] = s / t[(i, i)];
            }
        } else {
            for i in 0..n {
                let mut s = if i == c { 1.0 } else { 0.0 };
                for j in 0..i {
                    s -= t[(i, j)] * inv[(j, c)];
                }
                inv[(i, c)] = s / t[(i, i)];
            }
        }
    }
    one_norm(t) * one_norm(&inv)
}

fn one_norm(m: &Mat) -> f64 {
    (0..m.cols)
        .map(|j| (0..m.rows).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn symmetric_eigen(m: &Mat) -> Result<(Vec<f64>, Mat)> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    let mut a = m.symmetrize();
    let mut v = Mat::identity(n);
    let max_sweeps = 100;
    for sweep in 0..=max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let total: f64 = a.data.iter().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        if sweep == max_sweeps {
            return Err(Error::EigenNoConvergence {
                iterations: max_sweeps,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// Replaces eigenvalues below `floor` by `floor`. Returns the repaired
/// matrix and whether any eigenvalue was moved.
pub fn clip_eigenvalues(m: &Mat, floor: f64) -> Result<(Mat, bool)> {
    let (values, vectors) = symmetric_eigen(m)?;
    if values.iter().all(|&l| l >= floor) {
        return Ok((m.symmetrize(), false));
    }
    let clipped: Vec<f64> = values.iter().map(|&l| l.max(floor)).collect();
    let rebuilt = vectors
        .matmul(&Mat::diag(&clipped))
        .matmul(&vectors.transpose())
        .symmetrize();
    Ok((rebuilt, true))
}

/// Companion matrix of a VAR(p): top block row `[A_1 ... A_p]`, identity
/// blocks on the first block subdiagonal, zeros elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionMatrix {
    d: usize,
    p: usize,
    mat: Mat,
}

impl CompanionMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lags(&self) -> usize {
        self.p
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    /// Reads `A_j` (1-based) back from the top block row.
    pub fn lag(&self, j: usize) -> Mat {
        assert!(j >= 1 && j <= self.p, "lag index out of range");
        self.mat.block(0, (j - 1) * self.d, self.d, self.d)
    }

    /// `J = [I_d, 0]`, the `d x dp` selector of the first block.
    pub fn selector(&self) -> Mat {
        let mut j = Mat::zeros(self.d, self.d * self.p);
        for i in 0..self.d {
            j[(i, i)] = 1.0;
        }
        j
    }
}

pub fn build_companion(a_mats: &[Mat]) -> Result<CompanionMatrix> {
    let p = a_mats.len();
    if p == 0 {
        return Err(Error::InvalidParameter(
            "companion matrix needs at least one lag".into(),
        ));
    }
    let d = a_mats[0].rows();
    for a in a_mats {
        if a.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                context: "build_companion",
                expected: format!("{d}x{d}"),
                got: format!("{}x{}", a.rows(), a.cols()),
            });
        }
    }
    let mut mat = Mat::zeros(d * p, d * p);
    for (j, a) in a_mats.iter().enumerate() {
        mat.set_block(0, j * d, a);
    }
    for i in 0..d * (p - 1) {
        mat[(d + i, i)] = 1.0;
    }
    Ok(CompanionMatrix { d, p, mat })
}

/// Largest eigenvalue modulus, from a real Schur decomposition capped at
/// `500 * n` QR iterations.
pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows,
            cols: m.cols,
        });
    }
    let n = m.rows;
    if n == 0 {
        return Ok(0.0);
    }
    if m.data.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let dm = nalgebra::DMatrix::from_row_slice(n, n, &m.data);
    let cap = 500 * n;
    let schur = nalgebra::linalg::Schur::try_new(dm, f64::EPSILON, cap)
        .ok_or(Error::EigenNoConvergence { iterations: cap })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m22(a: f64, b: f64, c: f64, d: f64) -> Mat {
        Mat::from_rows(&[&[a, b], &[c, d]])
    }

    #[test]
    fn vec_stacks_columns() {
        assert_eq!(vec(&m22(1.0, 2.0, 3.0, 4.0)), vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(vec(&Mat::identity(2)), vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(vec(&Mat::from_rows(&[&[7.5]])), vec![7.5]);
    }

    #[test]
    fn vech_lower_triangle() {
        assert_eq!(vech(&m22(1.0, 2.0, 2.0, 3.0)).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            vech(&Mat::identity(3)).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0]
        );
        assert_eq!(vech(&Mat::from_rows(&[&[5.0]])).unwrap(), vec![5.0]);
        assert!(matches!(
            vech(&Mat::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn commutation_small_cases() {
        assert_eq!(commutation_matrix(1, 1), Mat::identity(1));
        let g = m22(1.0, 2.0, 3.0, 4.0);
        assert_eq!(commutation_matrix(2, 2).matvec(&vec(&g)), vec![1.0, 2.0, 3.0, 4.0]);
        let k = commutation_matrix(2, 3);
        for i in 0..6 {
            assert_eq!(k.row(i).iter().sum::<f64>(), 1.0);
            assert_eq!(k.col(i).iter().sum::<f64>(), 1.0);
        }
        assert_eq!(k.transpose().matmul(&k), Mat::identity(6));
    }

    #[test]
    fn elimination_small_cases() {
        assert_eq!(elimination_matrix(1), Mat::identity(1));
        let f = m22(1.0, 2.0, 2.0, 3.0);
        assert_eq!(elimination_matrix(2).matvec(&vec(&f)), vec![1.0, 2.0, 3.0]);
        let i3 = Mat::identity(3);
        assert_eq!(
            elimination_matrix(3).matvec(&vec(&i3)),
            vech(&i3).unwrap()
        );
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky_lower(&m22(4.0, 2.0, 2.0, 5.0)).unwrap();
        assert_eq!(l, m22(2.0, 0.0, 1.0, 2.0));
        assert_eq!(cholesky_lower(&Mat::identity(3)).unwrap(), Mat::identity(3));
        assert_eq!(
            cholesky_lower(&m22(1.0, 2.0, 2.0, 1.0)),
            Err(Error::NotPositiveDefinite { pivot: 2 })
        );
    }

    #[test]
    fn cholesky_absorbs_rounding_asymmetry() {
        let a = m22(4.0, 2.0 + 1e-15, 2.0 - 1e-15, 5.0);
        let l = cholesky_lower(&a).unwrap();
        assert!(l.max_abs_diff(&m22(2.0, 0.0, 1.0, 2.0)) < 1e-14);
    }

    #[test]
    fn companion_examples() {
        let c = build_companion(&[Mat::from_rows(&[&[0.5]])]).unwrap();
        assert_eq!(c.matrix(), &Mat::from_rows(&[&[0.5]]));
        let c = build_companion(&[Mat::from_rows(&[&[0.5]]), Mat::from_rows(&[&[0.3]])]).unwrap();
        assert_eq!(c.matrix(), &m22(0.5, 0.3, 1.0, 0.0));
        let a1 = m22(0.1, 0.2, 0.3, 0.4);
        let a2 = m22(-0.1, 0.0, 0.05, 0.2);
        let c = build_companion(&[a1.clone(), a2.clone()]).unwrap();
        assert_eq!(c.matrix().block(2, 0, 2, 2), Mat::identity(2));
        assert_eq!(c.matrix().block(2, 2, 2, 2), Mat::zeros(2, 2));
        assert_eq!(c.lag(1), a1);
        assert_eq!(c.lag(2), a2);
        assert!(build_companion(&[a1, Mat::identity(3)]).is_err());
    }

    #[test]
    fn spectral_radius_examples() {
        assert!((spectral_radius(&Mat::diag(&[0.5, -0.2])).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(spectral_radius(&Mat::zeros(3, 3)).unwrap(), 0.0);
        // Largest root of l^2 - 0.5 l - 0.3 by the quadratic formula.
        let oracle = (0.5 + (0.25f64 + 1.2).sqrt()) / 2.0;
        let c = m22(0.5, 0.3, 1.0, 0.0);
        assert!((spectral_radius(&c).unwrap() - oracle).abs() < 1e-10);
        assert!((oracle - 0.852_079_728_939_614_8).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_complex_pair() {
        // Rotation scaled by 0.9: eigenvalues 0.9 e^{+-i theta}.
        let (s, c) = 0.7f64.sin_cos();
        let m = m22(0.9 * c, -0.9 * s, 0.9 * s, 0.9 * c);
        assert!((spectral_radius(&m).unwrap() - 0.9).abs() < 1e-10);
    }

    #[test]
    fn lu_and_inverse() {
        let a = Mat::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let inv = inverse(&a).unwrap();
        assert!(a.matmul(&inv).max_abs_diff(&Mat::identity(3)) < 1e-14);
        assert_eq!(
            inverse(&m22(1.0, 2.0, 2.0, 4.0)),
            Err(Error::Singular("lu_solve"))
        );
    }

    #[test]
    fn qr_matches_normal_equations() {
        let x = Mat::from_fn(20, 3, |i, j| ((i * 7 + j * 3) % 11) as f64 + if j == 0 { 1.0 } else { 0.3 * i as f64 });
        let y = Mat::from_fn(20, 2, |i, j| (i as f64).sin() + j as f64);
        let ls = qr_least_squares(&x, &y).unwrap();
        let xtx = x.transpose().matmul(&x);
        let xty = x.transpose().matmul(&y);
        let ne = lu_solve(&xtx, &xty).unwrap();
        assert!(ls.coef.max_abs_diff(&ne) < 1e-10);
        assert!(ls.gram_condition >= 1.0);
    }

    #[test]
    fn qr_flags_rank_deficiency() {
        let x = Mat::from_fn(10, 2, |i, _| i as f64);
        let y = Mat::zeros(10, 1);
        assert!(qr_least_squares(&x, &y).is_err() || qr_least_squares(&x, &y).unwrap().gram_condition > 1e20);
    }

    #[test]
    fn jacobi_eigen_reconstructs() {
        let m = Mat::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, -0.2], &[0.5, -0.2, 1.0]]);
        let (vals, vecs) = symmetric_eigen(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = vecs.matmul(&Mat::diag(&vals)).matmul(&vecs.transpose());
        assert!(rebuilt.max_abs_diff(&m) < 1e-12);
        assert!((vals.iter().sum::<f64>() - m.trace()).abs() < 1e-12);
    }

    #[test]
    fn clipping_repairs_indefinite() {
        let m = m22(1.0, 2.0, 2.0, 1.0);
        let (c, moved) = clip_eigenvalues(&m, 0.0).unwrap();
        assert!(moved);
        let (vals, _) = symmetric_eigen(&c).unwrap();
        assert!(vals[0] > -1e-12);
        let (same, moved) = clip_eigenvalues(&Mat::identity(2), 0.0).unwrap();
        assert!(!moved);
        assert_eq!(same, Mat::identity(2));
    }
}

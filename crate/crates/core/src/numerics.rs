//! Dense complex matrix kernel.
//!
//! Everything here works on small dense matrices (dimension up to a few
//! dozen). Eigen and singular value decompositions use cyclic Jacobi
//! sweeps, which are deterministic for a fixed input and accurate to a few
//! ulps, so golden outputs are reproducible across runs.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Per-entry tolerance used when checking Hermitian symmetry.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default PSD / rank tolerance, relative to the spectral scale.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

const MAX_JACOBI_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from complex rows; all rows must share a length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), ncols, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let ncols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(rows.len(), ncols, |i, j| re(rows[i][j]))
    }

    /// Builds a `dim x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(dim: usize, columns: &[Vec<C64>]) -> Result<Self> {
        if columns.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "column length differs from {dim}"
            )));
        }
        let m = Self::from_fn(dim, columns.len(), |i, j| columns[j][i]);
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = re(*v);
        }
        m
    }

    /// Block-diagonal matrix from square or rectangular blocks.
    pub fn block_diag(blocks: &[ComplexMatrix]) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            m.set_block(r0, c0, b);
            r0 += b.rows;
            c0 += b.cols;
        }
        m
    }

    /// Concatenates matrices with equal row counts side by side.
    pub fn hstack(parts: &[&ComplexMatrix]) -> Result<Self> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if parts.iter().any(|p| p.rows != rows) {
            return Err(Error::DimensionMismatch("hstack row counts differ".into()));
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut m = Self::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            m.set_block(0, c0, p);
            c0 += p.cols;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|z| z * s)
    }

    pub fn scale_c(&self, s: C64) -> Self {
        self.map(|z| z * s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| f(*z)).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest per-entry deviation from the identity.
    pub fn identity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((self[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// `max |H_ij - conj(H_ji)|`; infinite for non-square input.
    pub fn hermitian_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(H + H^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()) * 0.5
        })
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (i, z) in v.iter().enumerate() {
            self[(i, j)] = *z;
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(
            r0 + nr <= self.rows && c0 + nc <= self.cols,
            "block out of range"
        );
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        assert!(r0 + b.rows <= self.rows && c0 + b.cols <= self.cols);
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    fn check_square_hermitian(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite);
        }
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let residual = self.hermitian_residual();
        if residual > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NonHermitian { residual });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Multiplies `v` by a unit phase so that its first component with modulus
/// above `1e-10 * max|v_i|` is real and positive. Returns the applied phase.
pub fn phase_fix(v: &mut [C64]) -> C64 {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return ONE;
    }
    let pivot = v
        .iter()
        .find(|z| z.norm() > 1e-10 * scale)
        .copied()
        .unwrap_or(ONE);
    let phase = (pivot / pivot.norm()).conj();
    for z in v.iter_mut() {
        *z *= phase;
    }
    phase
}

/// Extends a set of orthonormal vectors in `C^dim` to a full orthonormal
/// basis by Gram-Schmidt over standard basis vectors taken in `order`.
pub fn complete_orthonormal(
    mut basis: Vec<Vec<C64>>,
    dim: usize,
    order: &[usize],
) -> Vec<Vec<C64>> {
    for &k in order {
        if basis.len() >= dim {
            break;
        }
        let mut e = vec![ZERO; dim];
        e[k] = ONE;
        if let Some(v) = orthonormalize_against(&e, &basis, 1e-6) {
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), dim);
    basis
}

/// Two passes of modified Gram-Schmidt; `None` if the residual norm falls
/// below `min_norm` times the input norm.
pub fn orthonormalize_against(v: &[C64], basis: &[Vec<C64>], min_norm: f64) -> Option<Vec<C64>> {
    let start = norm_sqr(v).sqrt();
    if start == 0.0 {
        return None;
    }
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let proj = inner(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= proj * bi;
            }
        }
    }
    let n = norm_sqr(&w).sqrt();
    if n <= min_norm * start {
        return None;
    }
    w.iter_mut().for_each(|z| *z /= n);
    Some(w)
}

/// Unitary 2x2 rotation `G` with `G^dagger [[a, b], [b*, d]] G` diagonal.
/// Returned as `(g00, g01, g10, g11)`.
fn jacobi_rotation(a: f64, d: f64, b: C64) -> (C64, C64, C64, C64) {
    let beta = b.norm();
    let phase = b / beta;
    let tau = (d - a) / (2.0 * beta);
    let t = if tau == 0.0 {
        1.0
    } else {
        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    let sn = t * cs;
    let pc = phase.conj();
    (re(cs), re(sn), pc * (-sn), pc * cs)
}

/// Eigendecomposition `H = V diag(values) V^dagger` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermEig {
    /// Ascending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let vd = ComplexMatrix::from_fn(self.vectors.rows, self.vectors.cols, |i, j| {
            self.vectors[(i, j)] * self.values[j]
        });
        &vd * &self.vectors.adjoint()
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Indices of eigenvalues above `tol * max(eigenvalue)`, largest first.
    pub fn significant(&self, tol: f64) -> Vec<usize> {
        let top = self.max_value();
        if top <= 0.0 {
            return Vec::new();
        }
        (0..self.values.len())
            .rev()
            .filter(|&i| self.values[i] > tol * top)
            .collect()
    }
}

/// Cyclic complex Jacobi eigensolver.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermEig> {
    h.check_square_hermitian()?;
    let n = h.rows;
    let mut a = h.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let fro = a.frobenius_norm();
    let skip = 1e-18 * fro;

    let mut converged = n < 2 || fro == 0.0;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_JACOBI_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let b = a[(p, q)];
                if b.norm() <= skip {
                    continue;
                }
                rotated = true;
                let (g00, g01, g10, g11) = jacobi_rotation(a[(p, p)].re, a[(q, q)].re, b);
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = akp * g00 + akq * g10;
                    a[(k, q)] = akp * g01 + akq * g11;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = g00.conj() * apk + g10.conj() * aqk;
                    a[(q, k)] = g01.conj() * apk + g11.conj() * aqk;
                }
                a[(p, q)] = ZERO;
                a[(q, p)] = ZERO;
                a[(p, p)] = re(a[(p, p)].re);
                a[(q, q)] = re(a[(q, q)].re);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * g00 + vkq * g10;
                    v[(k, q)] = vkp * g01 + vkq * g11;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off > 1e-12 * fro {
            return Err(Error::NoConvergence {
                algorithm: "Hermitian Jacobi",
                sweeps,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        phase_fix(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(HermEig { values, vectors })
}

/// `M = left * diag(singulars) * right^dagger`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub left: ComplexMatrix,
    /// Descending, length `min(rows, cols)`.
    pub singulars: Vec<f64>,
    pub right: ComplexMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.left.rows, self.right.rows);
        let mut sigma = ComplexMatrix::zeros(m, n);
        for (i, s) in self.singulars.iter().enumerate() {
            sigma[(i, i)] = re(*s);
        }
        &(&self.left * &sigma) * &self.right.adjoint()
    }
}

/// Singular value decomposition by one-sided (Hestenes) Jacobi.
pub fn svd(m: &ComplexMatrix) -> Result<SvdResult> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    if m.rows >= m.cols {
        one_sided_jacobi(m)
    } else {
        let t = one_sided_jacobi(&m.adjoint())?;
        Ok(SvdResult {
            left: t.right,
            singulars: t.singulars,
            right: t.left,
        })
    }
}

fn one_sided_jacobi(a: &ComplexMatrix) -> Result<SvdResult> {
    let (m, n) = (a.rows, a.cols);
    let mut u = a.clone();
    let mut v = ComplexMatrix::identity(n);

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_JACOBI_SWEEPS {
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, ZERO);
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    alpha += up.norm_sqr();
                    beta += uq.norm_sqr();
                    gamma += up.conj() * uq;
                }
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                let (g00, g01, g10, g11) = jacobi_rotation(alpha, beta, gamma);
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = up * g00 + uq * g10;
                    u[(i, q)] = up * g01 + uq * g11;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = vp * g00 + vq * g10;
                    v[(i, q)] = vp * g01 + vq * g11;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence {
            algorithm: "one-sided Jacobi SVD",
            sweeps,
        });
    }

    let norms: Vec<f64> = (0..n).map(|j| norm_sqr(&u.column(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut right = ComplexMatrix::zeros(n, n);
    let mut left_cols: Vec<Vec<C64>> = Vec::with_capacity(m);
    let mut singulars = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut vcol = v.column(src);
        let phase = phase_fix(&mut vcol);
        right.set_column(dst, &vcol);
        let sigma = norms[src];
        singulars.push(sigma);
        if sigma > 0.0 && left_cols.len() == dst {
            let ucol: Vec<C64> = u.column(src).iter().map(|z| z * phase / sigma).collect();
            if let Some(w) = orthonormalize_against(&ucol, &left_cols, 1e-6) {
                left_cols.push(w);
            }
        }
    }
    let order_all: Vec<usize> = (0..m).collect();
    let left_cols = complete_orthonormal(left_cols, m, &order_all);
    let left = ComplexMatrix::from_columns(m, &left_cols)?;
    Ok(SvdResult {
        left,
        singulars,
        right,
    })
}

/// Rank-revealing factor `L` with `H = L L^dagger`; one column per
/// eigenvalue above `tol * max eigenvalue`, largest first.
pub fn psd_factor(h: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let scale = eig.spectral_norm().max(1.0);
    if eig.min_value() < -tol * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let keep = eig.significant(tol);
    let mut l = ComplexMatrix::zeros(h.rows, keep.len());
    for (dst, &i) in keep.iter().enumerate() {
        let s = eig.values[i].sqrt();
        for r in 0..h.rows {
            l[(r, dst)] = eig.vectors[(r, i)] * s;
        }
    }
    Ok(l)
}

/// Principal square root of a PSD matrix. Eigenvalues below
/// `4 n eps ||H||`, including small negative ones within tolerance, are
/// rounding noise and map to zero.
pub fn matrix_sqrt_psd(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let scale = eig.spectral_norm().max(1.0);
    if eig.min_value() < -DEFAULT_PSD_TOL * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.min_value(),
        });
    }
    let noise = 4.0 * h.rows as f64 * f64::EPSILON * eig.spectral_norm();
    let roots: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v <= noise { 0.0 } else { v.sqrt() })
        .collect();
    let s = HermEig {
        values: roots,
        vectors: eig.vectors,
    }
    .reconstruct();
    Ok(s.hermitian_part())
}

pub fn min_eigenvalue(h: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eig(h)?.min_value())
}

/// Number of eigenvalues above `tol * max eigenvalue`.
pub fn numerical_rank(h: &ComplexMatrix, tol: f64) -> Result<usize> {
    Ok(hermitian_eig(h)?.significant(tol).len())
}

/// Lower Cholesky factor of a Hermitian positive definite matrix, or `None`
/// when a pivot is not strictly positive.
pub fn cholesky(h: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = h.rows;
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !d.is_finite() || d <= 0.0 {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = re(djj);
        for i in j + 1..n {
            let mut s = h[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Inverse and log-determinant of a Hermitian positive definite matrix.
pub fn hpd_inverse_logdet(h: &ComplexMatrix) -> Option<(ComplexMatrix, f64)> {
    let n = h.rows;
    let l = cholesky(h)?;
    let logdet = 2.0 * (0..n).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    // Invert L by forward substitution, then H^-1 = L^-dagger L^-1.
    let mut linv = ComplexMatrix::zeros(n, n);
    for col in 0..n {
        for i in col..n {
            let mut s = if i == col { ONE } else { ZERO };
            for k in col..i {
                s -= l[(i, k)] * linv[(k, col)];
            }
            linv[(i, col)] = s / l[(i, i)];
        }
    }
    let inv = (&linv.adjoint() * &linv).hermitian_part();
    Some((inv, logdet))
}

/// Solves the dense real system `a x = b` (row-major `n x n`) by Gaussian
/// elimination with partial pivoting.
pub fn solve_real(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col] == 0.0 || !m[piv * n + col].is_finite() {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            x.swap(piv, col);
        }
        let d = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        let d = (a - b).max_abs();
        assert!(d <= tol, "matrices differ by {d}");
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = hermitian_eig(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!((&e.vectors.adjoint() * &e.vectors).identity_residual() < 1e-12);

        let e = hermitian_eig(&ComplexMatrix::diag_real(&[0.75, 0.25])).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn eig_all_half_matrix() {
        let h = ComplexMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let e = hermitian_eig(&h).unwrap();
        assert_abs_diff_eq!(e.values[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-15);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.vectors[(0, 1)].re, s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.vectors[(1, 1)].re, s, epsilon = 1e-12);
        assert_close(&e.reconstruct(), &h, 1e-14);
    }

    #[test]
    fn eig_complex_entries() {
        let h = ComplexMatrix::from_rows(&[
            vec![re(2.0), c(0.0, -1.0), c(0.5, 0.5)],
            vec![c(0.0, 1.0), re(3.0), c(1.0, 0.0)],
            vec![c(0.5, -0.5), re(1.0), re(-1.0)],
        ])
        .unwrap();
        let e = hermitian_eig(&h).unwrap();
        assert_close(&e.reconstruct(), &h, 1e-13);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        // trace is preserved
        assert_abs_diff_eq!(e.values.iter().sum::<f64>(), 4.0, epsilon = 1e-13);
    }

    #[test]
    fn eig_rejects_bad_input() {
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&h), Err(Error::NonHermitian { .. })));
        let nan = ComplexMatrix {
            rows: 1,
            cols: 1,
            data: vec![c(f64::NAN, 0.0)],
        };
        assert!(matches!(hermitian_eig(&nan), Err(Error::NonFinite)));
        assert!(ComplexMatrix::new(1, 1, vec![c(f64::INFINITY, 0.0)]).is_err());
    }

    #[test]
    fn svd_examples() {
        let z = svd(&ComplexMatrix::zeros(2, 3)).unwrap();
        assert_eq!(z.singulars, vec![0.0, 0.0]);
        assert!((&z.left.adjoint() * &z.left).identity_residual() < 1e-14);
        assert!((&z.right.adjoint() * &z.right).identity_residual() < 1e-14);

        let d = svd(&ComplexMatrix::diag_real(&[3.0, 1.0])).unwrap();
        assert_eq!(d.singulars, vec![3.0, 1.0]);

        // M^dagger M = diag(1, 4) by hand
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 2.0], &[1.0, 0.0]]);
        let s = svd(&m).unwrap();
        assert_abs_diff_eq!(s.singulars[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.singulars[1], 1.0, epsilon = 1e-14);
        assert_close(&s.reconstruct(), &m, 1e-14);
    }

    #[test]
    fn svd_wide_and_rank_deficient() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 1.0), re(2.0), c(0.0, -1.0), re(0.5)],
            vec![c(2.0, 2.0), re(4.0), c(0.0, -2.0), re(1.0)],
        ])
        .unwrap();
        let s = svd(&m).unwrap();
        assert_eq!(s.singulars.len(), 2);
        assert!(s.singulars[1] < 1e-14);
        assert_close(&s.reconstruct(), &m, 1e-13);
        assert!((&s.left.adjoint() * &s.left).identity_residual() < 1e-13);
        assert!((&s.right.adjoint() * &s.right).identity_residual() < 1e-13);
    }

    #[test]
    fn psd_factor_examples() {
        let l = psd_factor(&ComplexMatrix::identity(3), DEFAULT_PSD_TOL).unwrap();
        assert_eq!(l.cols(), 3);
        assert_close(&(&l * &l.adjoint()), &ComplexMatrix::identity(3), 1e-15);

        let l = psd_factor(&ComplexMatrix::diag_real(&[4.0, 0.0]), DEFAULT_PSD_TOL).unwrap();
        assert_eq!(l.cols(), 1);
        assert_abs_diff_eq!(l[(0, 0)].norm(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 0)].norm(), 0.0, epsilon = 1e-15);

        let h = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let l = psd_factor(&h, DEFAULT_PSD_TOL).unwrap();
        assert_close(&(&l * &l.adjoint()), &h, 1e-12);

        let bad = ComplexMatrix::diag_real(&[1.0, -0.1]);
        assert!(matches!(
            psd_factor(&bad, DEFAULT_PSD_TOL),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn sqrt_examples() {
        let s = matrix_sqrt_psd(&ComplexMatrix::diag_real(&[4.0, 9.0])).unwrap();
        assert_close(&s, &ComplexMatrix::diag_real(&[2.0, 3.0]), 1e-14);
        let s = matrix_sqrt_psd(&ComplexMatrix::identity(3)).unwrap();
        assert_close(&s, &ComplexMatrix::identity(3), 1e-15);
        let h = ComplexMatrix::from_real_rows(&[&[5.0, 4.0], &[4.0, 5.0]]);
        let expected = ComplexMatrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert_close(&matrix_sqrt_psd(&h).unwrap(), &expected, 1e-13);
        assert!(matrix_sqrt_psd(&ComplexMatrix::diag_real(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_abs_diff_eq!(
            min_eigenvalue(&ComplexMatrix::diag_real(&[-1.0, 2.0])).unwrap(),
            -1.0
        );
        assert_abs_diff_eq!(min_eigenvalue(&ComplexMatrix::identity(2)).unwrap(), 1.0);
        let h = ComplexMatrix::from_real_rows(&[&[1.0, 0.999], &[0.999, 1.0]]);
        assert_abs_diff_eq!(min_eigenvalue(&h).unwrap(), 0.001, epsilon = 1e-14);
    }

    #[test]
    fn inverse_and_solve() {
        let h =
            ComplexMatrix::from_rows(&[vec![re(2.0), c(0.0, 1.0)], vec![c(0.0, -1.0), re(2.0)]])
                .unwrap();
        let (inv, logdet) = hpd_inverse_logdet(&h).unwrap();
        assert!((&inv * &h).identity_residual() < 1e-14);
        assert_abs_diff_eq!(logdet, 3.0f64.ln(), epsilon = 1e-14);
        assert!(hpd_inverse_logdet(&ComplexMatrix::diag_real(&[1.0, 0.0])).is_none());

        let x = solve_real(&[0.0, 2.0, 1.0, 1.0], &[4.0, 3.0]).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-15);
        assert!(solve_real(&[1.0, 1.0, 1.0, 1.0], &[1.0, 2.0]).is_none());
    }
}

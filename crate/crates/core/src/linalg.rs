//! Dense complex linear algebra: SVD, cosine-sine decomposition,
//! demultiplexing of block-diagonal unitaries and unitary basis completion.
//!
//! Matrices are stored row-major. When a matrix acts on qubits, the row/column
//! index is the computational-basis integer with the first qubit of the
//! associated qubit list as the least significant bit.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::TOLERANCES;
use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{}", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Build from row-major entries, rejecting non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            ));
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<C64>]) -> Self {
        let rows = cols.first().map_or(0, Vec::len);
        Self::from_fn(rows, cols.len(), |r, c| cols[c][r])
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[C64]) {
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(())
        } else {
            invalid("matrix contains NaN or infinite entries")
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, k: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * k).collect() }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self[(r / other.rows, c / other.cols)] * other[(r % other.rows, c % other.cols)]
        })
    }

    /// `self ⊕ other` as a block-diagonal matrix.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let mut m = Self::zeros(self.rows + other.rows, self.cols + other.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                m[(r, c)] = self[(r, c)];
            }
        }
        for r in 0..other.rows {
            for c in 0..other.cols {
                m[(self.rows + r, self.cols + c)] = other[(r, c)];
            }
        }
        m
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max-norm of `U†U - I`; infinite for non-square input.
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Max-norm distance `min_φ |e^{iφ}·self - other|` using the phase that
    /// aligns the two traces `tr(self† other)`.
    pub fn distance_up_to_phase(&self, other: &Self) -> f64 {
        let overlap: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { ONE };
        self.scale(phase).max_abs_diff(other)
    }

    /// True when the matrix equals `e^{iφ}·I` within `tol` in max-norm.
    pub fn is_identity_up_to_phase(&self, tol: f64) -> bool {
        self.is_square() && Self::identity(self.rows).distance_up_to_phase(self) <= tol
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Index of the largest-modulus entry; the lowest index wins near-ties.
pub(crate) fn dominant_index(v: &[C64]) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap_or(0)
}

/// Phase `e^{iφ}` such that multiplying `v` by its conjugate makes the dominant entry real positive.
pub(crate) fn dominant_phase(v: &[C64]) -> C64 {
    let z = v[dominant_index(v)];
    if z.norm() > 0.0 {
        z / z.norm()
    } else {
        ONE
    }
}

/// Singular value decomposition `M = U · diag(s) · V†` with square unitary `U`, `V†`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Descending, length `min(rows, cols)`.
    pub s: Vec<f64>,
    pub vdag: ComplexMatrix,
}

impl Svd {
    /// Rebuild `U · diag(s) · V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, n) = (self.u.rows(), self.vdag.cols());
        let mut sigma = ComplexMatrix::zeros(m, n);
        for (i, &s) in self.s.iter().enumerate() {
            sigma[(i, i)] = C64::new(s, 0.0);
        }
        self.u.matmul(&sigma).matmul(&self.vdag)
    }

    /// Number of singular values above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.s.iter().filter(|&&s| s > cutoff).count()
    }
}

pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    m.check_finite()?;
    let (rows, cols) = (m.rows(), m.cols());
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: ComplexMatrix::identity(rows),
            s: Vec::new(),
            vdag: ComplexMatrix::identity(cols),
        });
    }
    let (u_cols, sv, v_cols) = if rows >= cols {
        jacobi_svd(m)
    } else {
        let (v, s, u) = jacobi_svd(&m.adjoint());
        (u, s, v)
    };
    // Canonical phase: dominant entry of each left vector real positive.
    let mut triples: Vec<(f64, Vec<C64>, Vec<C64>)> = (0..k)
        .map(|i| {
            let mut ucol = u_cols[i].clone();
            let mut vrow: Vec<C64> = v_cols[i].iter().map(|z| z.conj()).collect();
            let ph = dominant_phase(&ucol);
            ucol.iter_mut().for_each(|z| *z *= ph.conj());
            vrow.iter_mut().for_each(|z| *z *= ph);
            (sv[i].max(0.0), ucol, vrow)
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Near-equal singular values are ordered by the row of the dominant component.
    let scale = triples[0].0.max(1.0);
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && (triples[end - 1].0 - triples[end].0).abs() <= 1e-12 * scale {
            end += 1;
        }
        triples[start..end].sort_by_key(|t| dominant_index(&t.1));
        start = end;
    }

    let ucols: Vec<Vec<C64>> = triples.iter().map(|t| t.1.clone()).collect();
    let vcols: Vec<Vec<C64>> =
        triples.iter().map(|t| t.2.iter().map(|z| z.conj()).collect()).collect();
    let u = complete_columns(&ucols, rows);
    let v = complete_columns(&vcols, cols);
    Ok(Svd { u, s: triples.iter().map(|t| t.0).collect(), vdag: v.adjoint() })
}

/// One-sided Jacobi SVD of a tall matrix (`rows >= cols`): returns left
/// vectors, singular values and right vectors, unsorted. Left vectors of
/// zero singular values are zero.
fn jacobi_svd(m: &ComplexMatrix) -> (Vec<Vec<C64>>, Vec<f64>, Vec<Vec<C64>>) {
    let n = m.cols();
    let mut a: Vec<Vec<C64>> = (0..n).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = inner(&a[p], &a[q]);
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let ph = (gamma / g).conj();
                for cols in [&mut a, &mut v] {
                    let (lo, hi) = cols.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let yq = *y * ph;
                        let xp = *x;
                        *x = xp * c - yq * s;
                        *y = xp * s + yq * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = a.iter().map(|col| norm(col)).collect();
    let u = a
        .into_iter()
        .zip(&s)
        .map(|(col, &sv)| if sv > 0.0 { col.into_iter().map(|z| z / sv).collect() } else { col })
        .collect();
    (u, s, v)
}

/// Modified Gram–Schmidt step: remove the components of `v` along `basis`, twice.
fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let p = inner(b, v);
            for (x, &y) in v.iter_mut().zip(b) {
                *x -= p * y;
            }
        }
    }
}

/// Orthonormal completion without input validation; used internally on
/// vectors that are orthonormal up to rounding.
fn complete_columns(cols: &[Vec<C64>], dim: usize) -> ComplexMatrix {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(dim);
    for c in cols {
        let mut v = c.clone();
        orthogonalize(&mut v, &basis);
        let nv = norm(&v);
        if nv > 1e-6 {
            v.iter_mut().for_each(|z| *z /= nv);
            basis.push(v);
        }
    }
    let mut k = 0;
    while basis.len() < dim && k < dim {
        let mut e = vec![ZERO; dim];
        e[k] = ONE;
        orthogonalize(&mut e, &basis);
        let ne = norm(&e);
        if ne > 1e-6 {
            e.iter_mut().for_each(|z| *z /= ne);
            basis.push(e);
        }
        k += 1;
    }
    ComplexMatrix::from_columns(&basis)
}

/// Extend orthonormal vectors to a `dim × dim` unitary whose leading columns
/// are the inputs. Remaining columns come from Gram–Schmidt over the canonical
/// basis vectors `e_0, e_1, …` in order.
pub fn complete_basis(cols: &[Vec<C64>], dim: usize) -> Result<ComplexMatrix> {
    if cols.len() > dim {
        return invalid(format!("{} vectors cannot be orthonormal in dimension {dim}", cols.len()));
    }
    for (i, a) in cols.iter().enumerate() {
        if a.len() != dim {
            return invalid(format!("vector {i} has length {}, expected {dim}", a.len()));
        }
        for (j, b) in cols.iter().enumerate().skip(i) {
            let expected = if i == j { ONE } else { ZERO };
            let err = (inner(a, b) - expected).norm();
            if !err.is_finite() || err > TOLERANCES.orthonormality {
                return invalid(format!(
                    "vectors {i} and {j} are not orthonormal (deviation {err:.3e})"
                ));
            }
        }
    }
    let m = complete_columns(cols, dim);
    if m.cols() != dim {
        return Err(Error::Verification("basis completion lost rank".into()));
    }
    Ok(m)
}

/// Cosine-sine decomposition `U = (L1 ⊕ L2) · CS(θ) · (R1 ⊕ R2)` with
/// `CS(θ) = [[C, -S], [S, C]]`, `C = diag(cos θ)`, `S = diag(sin θ)`.
#[derive(Debug, Clone)]
pub struct CosSin {
    pub l1: ComplexMatrix,
    pub l2: ComplexMatrix,
    /// Angles in `[0, π/2]`.
    pub theta: Vec<f64>,
    pub r1: ComplexMatrix,
    pub r2: ComplexMatrix,
}

impl CosSin {
    pub fn cs_matrix(theta: &[f64]) -> ComplexMatrix {
        let n = theta.len();
        let mut m = ComplexMatrix::zeros(2 * n, 2 * n);
        for (i, &t) in theta.iter().enumerate() {
            let (s, c) = t.sin_cos();
            m[(i, i)] = C64::new(c, 0.0);
            m[(i, n + i)] = C64::new(-s, 0.0);
            m[(n + i, i)] = C64::new(s, 0.0);
            m[(n + i, n + i)] = C64::new(c, 0.0);
        }
        m
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let left = self.l1.direct_sum(&self.l2);
        let right = self.r1.direct_sum(&self.r2);
        left.matmul(&Self::cs_matrix(&self.theta)).matmul(&right)
    }
}

pub fn cs_decompose(u: &ComplexMatrix) -> Result<CosSin> {
    if !u.is_square() || !u.rows().is_multiple_of(2) || u.rows() == 0 {
        return invalid(format!("cosine-sine decomposition needs an even square matrix, got {}x{}", u.rows(), u.cols()));
    }
    u.check_finite()?;
    let err = u.unitarity_error();
    if err > TOLERANCES.unitarity {
        return invalid(format!("matrix is not unitary (error {err:.3e})"));
    }
    let n = u.rows() / 2;
    let u00 = u.submatrix(0, 0, n, n);
    let u01 = u.submatrix(0, n, n, n);
    let u10 = u.submatrix(n, 0, n, n);
    let u11 = u.submatrix(n, n, n, n);

    // u00 = l1 c r1 with c ascending, so the sines come out descending.
    let dec = svd(&u00)?;
    let mut l1 = dec.u.clone();
    let mut r1 = dec.vdag.clone();
    let mut c = dec.s.clone();
    reverse_columns(&mut l1);
    reverse_rows(&mut r1);
    c.reverse();

    // Columns of u10 r1† are mutually orthogonal with norms s_j = sqrt(1 - c_j²).
    let x = u10.matmul(&r1.adjoint());
    let cols: Vec<Vec<C64>> = (0..n).map(|j| x.column(j)).collect();
    let s: Vec<f64> = cols.iter().map(|v| norm(v)).collect();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut l2_cols: Vec<Option<Vec<C64>>> = vec![None; n];
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        orthogonalize(&mut v, &basis);
        let nv = norm(&v);
        if nv > 1e-13 {
            v.iter_mut().for_each(|z| *z /= nv);
            basis.push(v.clone());
            l2_cols[j] = Some(v);
        }
    }
    let mut k = 0;
    for slot in l2_cols.iter_mut().filter(|s| s.is_none()) {
        loop {
            let mut e = vec![ZERO; n];
            e[k] = ONE;
            k += 1;
            orthogonalize(&mut e, &basis);
            let ne = norm(&e);
            if ne > 1e-6 {
                e.iter_mut().for_each(|z| *z /= ne);
                basis.push(e.clone());
                *slot = Some(e);
                break;
            }
        }
    }
    let l2 = ComplexMatrix::from_columns(&l2_cols.into_iter().map(Option::unwrap).collect::<Vec<_>>());

    // u01 = -l1 s r2 and u11 = l2 c r2; use whichever diagonal entry is larger.
    let a = l1.adjoint().matmul(&u01);
    let b = l2.adjoint().matmul(&u11);
    let mut r2 = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            r2[(i, j)] = if s[i] > c[i] { -a[(i, j)] / s[i] } else { b[(i, j)] / c[i] };
        }
    }
    let theta = c.iter().zip(&s).map(|(&ci, &si)| si.atan2(ci.max(0.0))).collect();
    Ok(CosSin { l1, l2, theta, r1, r2 })
}

fn reverse_columns(m: &mut ComplexMatrix) {
    let n = m.cols();
    for r in 0..m.rows() {
        for c in 0..n / 2 {
            let tmp = m[(r, c)];
            m[(r, c)] = m[(r, n - 1 - c)];
            m[(r, n - 1 - c)] = tmp;
        }
    }
}

fn reverse_rows(m: &mut ComplexMatrix) {
    let rows = m.rows();
    for r in 0..rows / 2 {
        for c in 0..m.cols() {
            let tmp = m[(r, c)];
            m[(r, c)] = m[(rows - 1 - r, c)];
            m[(rows - 1 - r, c)] = tmp;
        }
    }
}

/// `U1 = V·diag(d)·W` and `U2 = V·diag(d)*·W`.
#[derive(Debug, Clone)]
pub struct Demultiplexed {
    pub v: ComplexMatrix,
    pub d: Vec<C64>,
    pub w: ComplexMatrix,
}

impl Demultiplexed {
    pub fn reconstruct(&self) -> (ComplexMatrix, ComplexMatrix) {
        let dm = ComplexMatrix::from_diagonal(&self.d);
        let dc: Vec<C64> = self.d.iter().map(|z| z.conj()).collect();
        let dcm = ComplexMatrix::from_diagonal(&dc);
        (self.v.matmul(&dm).matmul(&self.w), self.v.matmul(&dcm).matmul(&self.w))
    }
}

/// Demultiplex `U1 ⊕ U2` via the eigendecomposition of `U1·U2†`.
/// Eigenvalues are ordered by phase ascending in `(-π, π]`.
pub fn demultiplex(u1: &ComplexMatrix, u2: &ComplexMatrix) -> Result<Demultiplexed> {
    if !u1.is_square() || u1.rows() != u2.rows() || u1.cols() != u2.cols() {
        return invalid("demultiplex needs two square matrices of equal size");
    }
    for (name, m) in [("first", u1), ("second", u2)] {
        m.check_finite()?;
        let err = m.unitarity_error();
        if err > TOLERANCES.unitarity {
            return invalid(format!("{name} block is not unitary (error {err:.3e})"));
        }
    }
    let x = u1.matmul(&u2.adjoint());
    let (vecs, vals) = unitary_eigen(&x)?;
    let d: Vec<C64> = vals.iter().map(|l| C64::from_polar(1.0, l.arg() / 2.0)).collect();
    let v = vecs;
    // W = D V† U2
    let w = ComplexMatrix::from_diagonal(&d).matmul(&v.adjoint()).matmul(u2);
    Ok(Demultiplexed { v, d, w })
}

/// Eigendecomposition of a unitary (normal) matrix through its complex Schur
/// form. Returns orthonormal eigenvectors as columns and unit-modulus
/// eigenvalues, sorted by phase ascending.
fn unitary_eigen(x: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<C64>)> {
    let n = x.rows();
    let schur = nalgebra::linalg::Schur::try_new(x.to_nalgebra(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Verification("Schur decomposition failed to converge".into()))?;
    let (q, t) = schur.unpack();
    let q = ComplexMatrix::from_nalgebra(&q);
    let mut order: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let l = t[(i, i)];
            let mut ph = l.arg();
            if ph <= -std::f64::consts::PI {
                ph += 2.0 * std::f64::consts::PI;
            }
            (ph, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let cols: Vec<Vec<C64>> = order.iter().map(|&(_, i)| q.column(i)).collect();
    let vals: Vec<C64> = order.iter().map(|&(ph, _)| C64::from_polar(1.0, ph)).collect();
    Ok((ComplexMatrix::from_columns(&cols), vals))
}

/// Eigendecomposition of a Hermitian matrix: eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn eigh(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    if !h.is_square() {
        return invalid("eigh needs a square matrix");
    }
    h.check_finite()?;
    let sym = h.to_nalgebra();
    let sym = (&sym + sym.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..h.rows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vecs = ComplexMatrix::from_nalgebra(&eig.eigenvectors);
    let cols: Vec<Vec<C64>> = order.iter().map(|&i| vecs.column(i)).collect();
    Ok((order.iter().map(|&i| eig.eigenvalues[i]).collect(), ComplexMatrix::from_columns(&cols)))
}

/// `exp(-i·H)` for Hermitian `H`, by scaling and squaring a Taylor series.
pub fn expm_neg_i_hermitian(h: &ComplexMatrix) -> ComplexMatrix {
    let n = h.rows();
    let a = h.scale(C64::new(0.0, -1.0));
    let norm1 = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm1 * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let a = a.scale(C64::new(scale, 0.0));
    let mut result = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=16 {
        term = term.matmul(&a).scale(C64::new(1.0 / k as f64, 0.0));
        result = ComplexMatrix { data: result.data.iter().zip(&term.data).map(|(x, y)| x + y).collect(), ..result };
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    result
}

pub fn random_complex_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// Haar-distributed unitary: Gram–Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let cols: Vec<Vec<C64>> = (0..dim).map(|_| random_complex_vector(dim, rng)).collect();
    complete_columns(&cols, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Cyclic complex Jacobi eigenvalue iteration for Hermitian matrices.
    /// Independent of the SVD path; returns eigenvalues only, descending.
    fn jacobi_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
        let n = h.rows();
        let mut a = h.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)].norm_sqr())
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq.norm() < 1e-300 {
                        continue;
                    }
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let phase = apq / apq.norm();
                    let tau = (aqq - app) / (2.0 * apq.norm());
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let t = if tau == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    // Rotation J with J[p,p]=c, J[p,q]=s·phase, J[q,p]=-s·conj(phase), J[q,q]=c
                    let mut j = ComplexMatrix::identity(n);
                    j[(p, p)] = C64::new(c, 0.0);
                    j[(q, q)] = C64::new(c, 0.0);
                    j[(p, q)] = phase * s;
                    j[(q, p)] = -phase.conj() * s;
                    a = j.adjoint().matmul(&a).matmul(&j);
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        ev
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut r = rng(seed);
        let v = random_complex_vector(rows * cols, &mut r);
        ComplexMatrix::from_row_major(rows, cols, v).unwrap()
    }

    #[test]
    fn svd_rank_deficient_complex() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for (r, c, rank) in [(4, 2, 1), (2, 4, 1), (8, 4, 2), (4, 8, 3), (6, 6, 2)] {
            let mut m = ComplexMatrix::zeros(r, c);
            for _ in 0..rank {
                let a = random_complex_vector(r, &mut rng);
                let b = random_complex_vector(c, &mut rng);
                m = ComplexMatrix::from_fn(r, c, |i, j| m[(i, j)] + a[i] * b[j]);
            }
            let d = svd(&m).unwrap();
            assert!(d.reconstruct().max_abs_diff(&m) <= 1e-10, "{r}x{c}");
            assert_eq!(d.rank(1e-9), rank);
            assert!(d.u.is_unitary(1e-10) && d.vdag.is_unitary(1e-10));
        }
    }

    #[test]
    fn svd_identity() {
        let d = svd(&ComplexMatrix::identity(2)).unwrap();
        assert!((d.s[0] - 1.0).abs() < 1e-14 && (d.s[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn svd_diagonal_rank_one() {
        let m = ComplexMatrix::from_diagonal(&[C64::new(3.0, 0.0), ZERO]);
        let d = svd(&m).unwrap();
        assert!((d.s[0] - 3.0).abs() < 1e-14 && d.s[1].abs() < 1e-14);
        assert!((d.u[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((d.vdag[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(d.reconstruct().max_abs_diff(&m) < 1e-12);
    }

    #[test]
    fn svd_matches_jacobi_oracle() {
        let m = random_matrix(8, 8, 11);
        let d = svd(&m).unwrap();
        assert!(d.reconstruct().max_abs_diff(&m) <= 1e-10);
        let oracle = jacobi_eigenvalues(&m.adjoint().matmul(&m));
        for (s, ev) in d.s.iter().zip(&oracle) {
            assert!((s - ev.max(0.0).sqrt()).abs() < 1e-10, "{s} vs {}", ev.sqrt());
        }
    }

    #[test]
    fn svd_rectangular_is_full() {
        for (r, c) in [(2, 8), (8, 2), (4, 16)] {
            let m = random_matrix(r, c, 3);
            let d = svd(&m).unwrap();
            assert!(d.u.is_unitary(1e-10) && d.vdag.is_unitary(1e-10));
            assert!(d.reconstruct().max_abs_diff(&m) <= 1e-10);
            assert!(d.s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_rejects_nan() {
        let mut m = ComplexMatrix::identity(2);
        m[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(matches!(svd(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn csd_identity_and_block_diagonal() {
        let d = cs_decompose(&ComplexMatrix::identity(4)).unwrap();
        assert!(d.theta.iter().all(|t| t.abs() < 1e-12));
        assert!(d.reconstruct().max_abs_diff(&ComplexMatrix::identity(4)) < 1e-12);

        let mut r = rng(5);
        let block = random_unitary(2, &mut r).direct_sum(&random_unitary(2, &mut r));
        let d = cs_decompose(&block).unwrap();
        assert!(d.theta.iter().all(|t| t.abs() < 1e-7));
        assert!(d.reconstruct().max_abs_diff(&block) <= 1e-10);
    }

    #[test]
    fn csd_rejects_bad_input() {
        assert!(cs_decompose(&ComplexMatrix::identity(3)).is_err());
        let m = ComplexMatrix::from_diagonal(&[ONE, ONE, ONE, C64::new(2.0, 0.0)]);
        assert!(cs_decompose(&m).is_err());
    }

    #[test]
    fn csd_random_reconstructs() {
        let mut r = rng(8);
        let u = random_unitary(8, &mut r);
        let d = cs_decompose(&u).unwrap();
        assert!(d.reconstruct().max_abs_diff(&u) <= 1e-10);
        for m in [&d.l1, &d.l2, &d.r1, &d.r2] {
            assert!(m.is_unitary(1e-10));
        }
        assert!(d.theta.iter().all(|&t| (0.0..=std::f64::consts::FRAC_PI_2).contains(&t)));
    }

    #[test]
    fn csd_of_reconstruction_keeps_angles() {
        let mut r = rng(21);
        let u = random_unitary(8, &mut r);
        let d = cs_decompose(&u).unwrap();
        let again = cs_decompose(&d.reconstruct()).unwrap();
        for (a, b) in d.theta.iter().zip(&again.theta) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn demultiplex_equal_blocks() {
        let mut r = rng(2);
        let u = random_unitary(4, &mut r);
        let d = demultiplex(&u, &u).unwrap();
        assert!(d.d.iter().all(|z| (z - ONE).norm() < 1e-10));
        assert!(d.v.matmul(&d.w).max_abs_diff(&u) < 1e-10);
    }

    #[test]
    fn demultiplex_z_identity() {
        let z = ComplexMatrix::from_diagonal(&[ONE, -ONE]);
        let d = demultiplex(&z, &ComplexMatrix::identity(2)).unwrap();
        let (a, b) = d.reconstruct();
        assert!(a.max_abs_diff(&z) <= 1e-9);
        assert!(b.max_abs_diff(&ComplexMatrix::identity(2)) <= 1e-9);
        // d² are the eigenvalues of Z, i.e. ±1, so d ∈ {1, i} up to ordering by phase.
        let phases: Vec<f64> = d.d.iter().map(|z| z.arg()).collect();
        assert!((phases[0] - 0.0).abs() < 1e-12 && (phases[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn demultiplex_rejects_mismatch() {
        assert!(demultiplex(&ComplexMatrix::identity(2), &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn complete_basis_cases() {
        let e0 = vec![ONE, ZERO];
        let m = complete_basis(&[e0], 2).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = vec![C64::new(h, 0.0), ZERO, ZERO, C64::new(h, 0.0)];
        let m = complete_basis(std::slice::from_ref(&bell), 4).unwrap();
        assert!(m.is_unitary(1e-12));
        assert!(m.column(0).iter().zip(&bell).all(|(a, b)| (a - b).norm() < 1e-15));

        let mut r = rng(4);
        let u = random_unitary(8, &mut r);
        let cols: Vec<Vec<C64>> = (0..3).map(|j| u.column(j)).collect();
        let m = complete_basis(&cols, 8).unwrap();
        assert!(m.is_unitary(1e-12));
        for (j, c) in cols.iter().enumerate() {
            assert!(m.column(j).iter().zip(c).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn complete_basis_rejects_non_orthonormal() {
        let a = vec![ONE, ZERO];
        let b = vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)];
        assert!(complete_basis(&[a, b], 2).is_err());
    }

    #[test]
    fn expm_matches_pauli_closed_form() {
        let theta = 0.7;
        let y = ComplexMatrix::from_row_major(2, 2, vec![ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]).unwrap();
        let u = expm_neg_i_hermitian(&y.scale(C64::new(theta / 2.0, 0.0)));
        let (s, c) = (theta / 2.0).sin_cos();
        let expect = ComplexMatrix::from_row_major(2, 2, vec![C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)]).unwrap();
        assert!(u.max_abs_diff(&expect) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn svd_reconstructs(seed in any::<u64>(), r in 1usize..9, c in 1usize..9) {
            let m = random_matrix(r, c, seed);
            let d = svd(&m).unwrap();
            prop_assert!(d.u.is_unitary(1e-10));
            prop_assert!(d.vdag.is_unitary(1e-10));
            prop_assert!(d.reconstruct().max_abs_diff(&m) <= 1e-10);
        }

        #[test]
        fn csd_and_demux_reconstruct(seed in any::<u64>(), half in prop::sample::select(vec![1usize, 2, 4, 8])) {
            let mut r = rng(seed);
            let u = random_unitary(2 * half, &mut r);
            let d = cs_decompose(&u).unwrap();
            prop_assert!(d.reconstruct().max_abs_diff(&u) <= 1e-10);
            for m in [&d.l1, &d.l2, &d.r1, &d.r2] {
                prop_assert!(m.is_unitary(1e-10));
            }
            let dm = demultiplex(&d.l1, &d.l2).unwrap();
            prop_assert!(dm.v.is_unitary(1e-10) && dm.w.is_unitary(1e-10));
            let (a, b) = dm.reconstruct();
            prop_assert!(a.max_abs_diff(&d.l1) <= 1e-9);
            prop_assert!(b.max_abs_diff(&d.l2) <= 1e-9);
        }
    }
}

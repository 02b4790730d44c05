//! Dense symmetric linear algebra.
//!
//! Matrices are row-major `f64` buffers. The eigensolver is a cyclic Jacobi
//! method in round-robin (tournament) ordering: every round applies `m/2`
//! disjoint plane rotations at once, so a round is two row-parallel passes
//! whose output does not depend on the number of worker threads.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Largest asymmetry accepted before an input is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Allowed deviation of a correlation matrix diagonal from one.
pub const UNIT_DIAGONAL_TOL: f64 = 1e-12;
/// Eigenvalues in `[-PSD_TOL, 0)` are clamped to zero; anything lower is an error.
pub const PSD_TOL: f64 = 1e-8;
/// Jacobi iteration stops once every off-diagonal entry is below this.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Blocks passed to [`block_diag_orthogonal`] must be orthogonal to this tolerance.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 60;
// Pairs whose coupling is already negligible are not rotated. Exact zeros
// stay exact zeros, which keeps block structure intact.
const JACOBI_SKIP_TOL: f64 = 1e-15;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
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

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows"));
        }
        Self::from_row_major(n, cols, rows.concat())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Matrix product, parallel over output rows.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = rhs.cols;
        let mut out = Matrix::zeros(self.rows, n);
        if n == 0 {
            return Ok(out);
        }
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(r, out_row)| {
                for (k, &a) in self.row(r).iter().enumerate() {
                    if a == 0.0 {
                        continue;
                    }
                    for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                        *o += a * b;
                    }
                }
            });
        Ok(out)
    }

    /// `self · selfᵀ`, exactly symmetric.
    pub fn gram_rows(&self) -> Matrix {
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        if n == 0 {
            return out;
        }
        out.data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let ri = self.row(i);
            for (j, slot) in row.iter_mut().enumerate().skip(i) {
                *slot = ri.iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
            }
        });
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i];
            }
        }
        out
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mat_vec");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// `‖QᵀQ − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        let qt = self.transpose();
        // rows of Qᵀ are the columns of Q
        let gram = qt.gram_rows();
        gram.max_abs_diff(&Matrix::identity(self.cols))
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter().enumerate() {
                if i != j {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    /// Determinant by partial-pivot LU. Intended for small checks.
    pub fn determinant(&self) -> f64 {
        assert!(self.is_square());
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))
                .unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(pivot * n + c, col * n + c);
                }
                det = -det;
            }
            let p = a[col * n + col];
            det *= p;
            for r in (col + 1)..n {
                let factor = a[r * n + col] / p;
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
        det
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Symmetric positive semidefinite dispersion matrix of the test statistics.
///
/// A correlation matrix (unit diagonal) is the usual case; the explicit
/// spectral constructions generally produce unequal variances, which the
/// PFA layer handles by standardizing each statistic. Construction checks
/// symmetry and the diagonal; positive semidefiniteness is checked by
/// [`eigendecompose`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: Matrix,
}

impl CovarianceMatrix {
    /// Accepts asymmetry up to [`SYMMETRY_TOL`] and stores the symmetrized
    /// matrix, so `entries[i][j] == entries[j][i]` holds exactly. Diagonal
    /// entries must be strictly positive.
    pub fn new(mut entries: Matrix) -> Result<Self> {
        if !entries.is_square() || entries.rows() == 0 {
            return Err(Error::invalid(format!(
                "covariance matrix must be square and non-empty, got {}x{}",
                entries.rows(),
                entries.cols()
            )));
        }
        if entries.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let asym = entries.max_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        entries.symmetrize();
        if let Some((i, d)) = entries.diag().into_iter().enumerate().find(|(_, d)| *d <= 0.0) {
            return Err(Error::invalid(format!(
                "diagonal entry {i} is {d}; variances must be positive"
            )));
        }
        Ok(Self { entries })
    }

    /// Like [`CovarianceMatrix::new`] but additionally requires a unit
    /// diagonal (within [`UNIT_DIAGONAL_TOL`]).
    pub fn correlation(entries: Matrix) -> Result<Self> {
        let out = Self::new(entries)?;
        for (i, d) in out.entries.diag().into_iter().enumerate() {
            if (d - 1.0).abs() > UNIT_DIAGONAL_TOL {
                return Err(Error::invalid(format!(
                    "diagonal entry {i} is {d}, expected 1"
                )));
            }
        }
        Ok(out)
    }

    /// `T·diag(λ)·Tᵀ`, exactly symmetric.
    pub fn from_spectrum(eigenvectors: &Matrix, eigenvalues: &[f64]) -> Result<Self> {
        let m = eigenvalues.len();
        if eigenvectors.rows() != m || eigenvectors.cols() != m {
            return Err(Error::invalid("eigenvector matrix does not match spectrum"));
        }
        if let Some(bad) = eigenvalues.iter().find(|&&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::invalid(format!("invalid eigenvalue {bad}")));
        }
        let roots: Vec<f64> = eigenvalues.iter().map(|l| l.sqrt()).collect();
        let scaled = Matrix::from_fn(m, m, |i, j| eigenvectors[(i, j)] * roots[j]);
        Self::new(scaled.gram_rows())
    }

    pub fn identity(m: usize) -> Self {
        Self {
            entries: Matrix::identity(m),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    #[inline]
    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn variances(&self) -> Vec<f64> {
        self.entries.diag()
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().iter().sum()
    }

    pub fn is_unit_diagonal(&self) -> bool {
        self.entries
            .diag()
            .iter()
            .all(|d| (d - 1.0).abs() <= UNIT_DIAGONAL_TOL)
    }

    /// `D^{-1/2} Σ D^{-1/2}` with the diagonal set to exactly one.
    pub fn to_correlation(&self) -> CovarianceMatrix {
        let sd: Vec<f64> = self.variances().iter().map(|v| v.sqrt()).collect();
        let m = self.dim();
        let entries = Matrix::from_fn(m, m, |i, j| {
            if i == j {
                1.0
            } else {
                self.entries[(i, j)] / (sd[i] * sd[j])
            }
        });
        CovarianceMatrix { entries }
    }
}

/// Eigenvalues in descending order with matching eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `T·D·Tᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let m = self.dim();
        let t = &self.eigenvectors;
        let l = &self.eigenvalues;
        let mut out = Matrix::zeros(m, m);
        out.data.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let ti = t.row(i);
            for (j, slot) in row.iter_mut().enumerate() {
                let tj = t.row(j);
                *slot = (0..m).map(|c| ti[c] * l[c] * tj[c]).sum();
            }
        });
        out
    }
}

/// Spectral decomposition of a correlation matrix.
///
/// Eigenvalues are sorted descending with a stable sort (ties keep the
/// Jacobi output order), values in `[-1e-8, 0)` are clamped to zero, and
/// each eigenvector is signed so its largest-magnitude entry is positive.
pub fn eigendecompose(sigma: &CovarianceMatrix) -> Result<SpectralDecomposition> {
    symmetric_eigen(sigma.entries())
}

/// [`eigendecompose`] for an arbitrary symmetric matrix.
pub fn symmetric_eigen(a: &Matrix) -> Result<SpectralDecomposition> {
    if !a.is_square() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let mut work = a.clone();
    work.symmetrize();
    let (values, vectors) = jacobi(work)?;
    let m = values.len();

    let mut order: Vec<usize> = (0..m).collect();
    // stable: equal eigenvalues keep their Jacobi order
    order.sort_by(|&x, &y| values[y].total_cmp(&values[x]));

    let mut eigenvalues = Vec::with_capacity(m);
    for &src in &order {
        let v = values[src];
        if v < -PSD_TOL {
            return Err(Error::NotPsd { eigenvalue: v });
        }
        eigenvalues.push(v.max(0.0));
    }
    let mut eigenvectors = Matrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        let col = vectors.column(src);
        let peak = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        // first entry within roundoff of the peak magnitude decides the sign
        let lead = col
            .iter()
            .position(|v| v.abs() >= peak * (1.0 - 1e-10))
            .unwrap_or(0);
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in col.iter().enumerate() {
            eigenvectors[(i, dst)] = sign * v;
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Round-robin schedule: `players − 1` rounds of disjoint pairs covering
/// every unordered pair once. Odd `n` gets a bye slot.
fn tournament_rounds(n: usize) -> Vec<Vec<(usize, usize)>> {
    if n < 2 {
        return Vec::new();
    }
    let players = n + n % 2;
    let mut ring: Vec<usize> = (0..players).collect();
    let mut rounds = Vec::with_capacity(players - 1);
    for _ in 0..players - 1 {
        let mut pairs = Vec::with_capacity(players / 2);
        for i in 0..players / 2 {
            let (p, q) = (ring[i], ring[players - 1 - i]);
            if p < n && q < n {
                pairs.push((p.min(q), p.max(q)));
            }
        }
        rounds.push(pairs);
        ring[1..].rotate_right(1);
    }
    rounds
}

#[derive(Clone, Copy)]
struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
}

/// Cyclic Jacobi on a symmetric matrix. Returns unsorted eigenvalues and
/// the accumulated rotation (eigenvectors in columns).
fn jacobi(mut a: Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    let mut v = Matrix::identity(n);
    if n < 2 {
        return Ok((a.diag(), v));
    }
    let rounds = tournament_rounds(n);
    let mut scratch = Matrix::zeros(n, n);
    // partner[r] = (rotation index, r is the p side)
    let mut partner: Vec<Option<(usize, bool)>> = vec![None; n];

    let mut off = a.max_off_diagonal();
    let mut sweeps = 0;
    while off >= JACOBI_OFF_DIAGONAL_TOL {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        for pairs in &rounds {
            let rotations: Vec<Rotation> = pairs
                .iter()
                .filter_map(|&(p, q)| {
                    let apq = a[(p, q)];
                    if apq.abs() < JACOBI_SKIP_TOL {
                        return None;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    Some(Rotation { p, q, c, s: t * c })
                })
                .collect();
            if rotations.is_empty() {
                continue;
            }
            apply_round(&mut a, &mut scratch, &mut v, &rotations, &mut partner);
        }
        a.symmetrize();
        off = a.max_off_diagonal();
        sweeps += 1;
    }
    Ok((a.diag(), v))
}

/// Applies `A ← JᵀAJ` and `V ← VJ` for a set of disjoint rotations `J`.
fn apply_round(
    a: &mut Matrix,
    scratch: &mut Matrix,
    v: &mut Matrix,
    rotations: &[Rotation],
    partner: &mut [Option<(usize, bool)>],
) {
    let n = a.rows();
    let rotate_columns = |row: &mut [f64]| {
        for r in rotations {
            let (x, y) = (row[r.p], row[r.q]);
            row[r.p] = r.c * x - r.s * y;
            row[r.q] = r.s * x + r.c * y;
        }
    };
    // B = A·J, in place; each row is independent
    a.data.par_chunks_mut(n).for_each(rotate_columns);
    v.data.par_chunks_mut(n).for_each(rotate_columns);

    // A' = Jᵀ·B, written into scratch
    for (idx, r) in rotations.iter().enumerate() {
        partner[r.p] = Some((idx, true));
        partner[r.q] = Some((idx, false));
    }
    let b = &*a;
    let partner_ref = &*partner;
    scratch
        .data
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(row, out)| match partner_ref[row] {
            None => out.copy_from_slice(b.row(row)),
            Some((idx, is_p)) => {
                let r = rotations[idx];
                let (bp, bq) = (b.row(r.p), b.row(r.q));
                if is_p {
                    for ((o, x), y) in out.iter_mut().zip(bp).zip(bq) {
                        *o = r.c * x - r.s * y;
                    }
                } else {
                    for ((o, x), y) in out.iter_mut().zip(bp).zip(bq) {
                        *o = r.s * x + r.c * y;
                    }
                }
            }
        });
    for r in rotations {
        scratch[(r.p, r.q)] = 0.0;
        scratch[(r.q, r.p)] = 0.0;
        partner[r.p] = None;
        partner[r.q] = None;
    }
    std::mem::swap(a, scratch);
}

/// Householder reflection `I − 2uuᵀ` through the hyperplane orthogonal to `u`.
/// Column `i` is `e_i − 2u_i·u`.
pub fn householder_reflection(u: &[f64]) -> Result<Matrix> {
    if u.is_empty() {
        return Err(Error::invalid("reflection vector is empty"));
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "reflection vector must have unit norm, got {norm}"
        )));
    }
    let m = u.len();
    Ok(Matrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * u[i] * u[j]
    }))
}

/// `diag{Q1, Q2}` for orthogonal blocks; coupling entries are exactly zero.
pub fn block_diag_orthogonal(q1: &Matrix, q2: &Matrix) -> Result<Matrix> {
    for (name, q) in [("first", q1), ("second", q2)] {
        if !q.is_square() || q.rows() == 0 {
            return Err(Error::invalid(format!("{name} block is not square")));
        }
        let err = q.orthogonality_error();
        if err > ORTHOGONALITY_TOL {
            return Err(Error::invalid(format!(
                "{name} block is not orthogonal (error {err:e})"
            )));
        }
    }
    let k = q1.rows();
    let m = k + q2.rows();
    Ok(Matrix::from_fn(m, m, |i, j| match (i < k, j < k) {
        (true, true) => q1[(i, j)],
        (false, false) => q2[(i - k, j - k)],
        _ => 0.0,
    }))
}

/// Orthonormalized Gaussian matrix (QR with positive `R` diagonal), which
/// is Haar distributed on the orthogonal group. Deterministic in `seed`.
pub fn random_orthogonal(dim: usize, seed: u64) -> Result<Matrix> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = rng_for(seed, &[0x0f7e_0a11, dim as u64]);
    // columns stored as rows for contiguous access
    let mut cols: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    for j in 0..dim {
        // modified Gram-Schmidt, two passes
        for _ in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qi = &done[i];
                let cj = &mut rest[0];
                let proj: f64 = qi.iter().zip(cj.iter()).map(|(a, b)| a * b).sum();
                for (c, q) in cj.iter_mut().zip(qi) {
                    *c -= proj * q;
                }
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::Construction(
                "Gaussian draw was numerically rank deficient".into(),
            ));
        }
        for c in cols[j].iter_mut() {
            *c /= norm;
        }
    }
    Ok(Matrix::from_fn(dim, dim, |r, c| cols[c][r]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn corr2(r: f64) -> CovarianceMatrix {
        CovarianceMatrix::correlation(Matrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap())
            .unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let d = eigendecompose(&CovarianceMatrix::identity(4)).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0; 4]);
        assert!(d.eigenvectors.orthogonality_error() <= 1e-12);
    }

    #[test]
    fn two_by_two_closed_form() {
        let d = eigendecompose(&corr2(0.5)).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(d.eigenvalues[1], 0.5, epsilon = 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = &d.eigenvectors;
        assert_abs_diff_eq!(t[(0, 0)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(t[(1, 0)], h, epsilon = 1e-14);
        // second column is ±(1,−1)/√2; the sign rule picks the first
        // max-magnitude entry positive
        assert_abs_diff_eq!(t[(0, 1)], h, epsilon = 1e-14);
        assert_abs_diff_eq!(t[(1, 1)], -h, epsilon = 1e-14);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(matches!(
            CovarianceMatrix::new(a.clone()),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(symmetric_eigen(&a), Err(Error::InvalidInput(_))));

        let c = Matrix::from_rows(&[
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ])
        .unwrap();
        let c = CovarianceMatrix::correlation(c).unwrap();
        assert!(matches!(eigendecompose(&c), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn clamps_tiny_negative_eigenvalues() {
        // rank one: eigenvalues 2 and 0 up to roundoff
        let d = eigendecompose(&corr2(1.0)).unwrap();
        assert_abs_diff_eq!(d.eigenvalues[0], 2.0, epsilon = 1e-14);
        assert!(d.eigenvalues[1] >= 0.0);
    }

    #[test]
    fn tournament_covers_every_pair_once() {
        for n in 2..12 {
            let mut seen = std::collections::BTreeSet::new();
            for round in tournament_rounds(n) {
                let mut used = std::collections::BTreeSet::new();
                for (p, q) in round {
                    assert!(used.insert(p) && used.insert(q), "overlap in round");
                    assert!(seen.insert((p, q)), "pair repeated");
                }
            }
            assert_eq!(seen.len(), n * (n - 1) / 2);
        }
    }

    #[test]
    fn random_spectrum_is_recovered() {
        let m = 24;
        let q = random_orthogonal(m, 11).unwrap();
        let lambdas: Vec<f64> = (0..m).map(|i| 0.2 + 1.6 * i as f64 / (m - 1) as f64).collect();
        let d = Matrix::diagonal(&lambdas);
        let mut a = q.matmul(&d).unwrap().matmul(&q.transpose()).unwrap();
        a.symmetrize();
        let dec = symmetric_eigen(&a).unwrap();
        let mut expected = lambdas.clone();
        expected.sort_by(|x, y| y.total_cmp(x));
        for (got, want) in dec.eigenvalues.iter().zip(&expected) {
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
        assert!(dec.eigenvectors.orthogonality_error() <= 1e-10);
        assert!(dec.reconstruct().max_abs_diff(&a) <= 1e-10);
    }

    #[test]
    fn eigensolve_is_thread_count_invariant() {
        let m = 40;
        let q = random_orthogonal(m, 3).unwrap();
        let lambdas: Vec<f64> = (0..m).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let mut a = q
            .matmul(&Matrix::diagonal(&lambdas))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        a.symmetrize();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| symmetric_eigen(&a).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one, four);
    }

    #[test]
    fn householder_examples() {
        let t = householder_reflection(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(t, Matrix::diagonal(&[-1.0, 1.0, 1.0]));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = householder_reflection(&[h, h]).unwrap();
        let expected = Matrix::from_rows(&[vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(t.max_abs_diff(&expected) < 1e-15);

        assert!(householder_reflection(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn householder_is_orthogonal_symmetric_involution() {
        let m = 16;
        let raw: Vec<f64> = (1..=m).map(|i| (i as f64).sqrt()).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let t = householder_reflection(&u).unwrap();
        assert!(t.orthogonality_error() <= 1e-12);
        assert_eq!(t.max_asymmetry(), 0.0);
        assert!(t.matmul(&t).unwrap().max_abs_diff(&Matrix::identity(m)) <= 1e-10);
        assert_abs_diff_eq!(t.determinant(), -1.0, epsilon = 1e-10);
    }

    #[test]
    fn block_diag_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(block_diag_orthogonal(&i2, &i2).unwrap(), Matrix::identity(4));

        let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
        let rot = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
        let b = block_diag_orthogonal(&rot, &i2).unwrap();
        assert_eq!(b[(0, 1)], -s);
        assert_eq!(b[(1, 0)], s);
        assert_eq!(b[(2, 2)], 1.0);
        assert_eq!(b[(0, 2)], 0.0);
        assert_eq!(b[(3, 1)], 0.0);

        let q1 = random_orthogonal(4, 1).unwrap();
        let q2 = random_orthogonal(4, 2).unwrap();
        let b = block_diag_orthogonal(&q1, &q2).unwrap();
        assert!(b.orthogonality_error() <= 1e-10);

        let bad = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
        assert!(block_diag_orthogonal(&bad, &i2).is_err());
    }

    #[test]
    fn random_orthogonal_examples() {
        let one = random_orthogonal(1, 5).unwrap();
        assert_eq!(one[(0, 0)].abs(), 1.0);
        assert_eq!(random_orthogonal(4, 9).unwrap(), random_orthogonal(4, 9).unwrap());
        assert_ne!(random_orthogonal(4, 9).unwrap(), random_orthogonal(4, 10).unwrap());
        assert!(random_orthogonal(8, 1).unwrap().orthogonality_error() <= 1e-10);
        assert!(random_orthogonal(0, 1).is_err());
    }
}

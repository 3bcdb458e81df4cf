//! Minimal dense linear algebra: matrix-vector products, Gram matrices,
//! least-squares solves via the normal equations, dominant-eigenvalue
//! estimation by power iteration, and numerical column rank.
//!
//! Everything here is sized for hand-entered instances (a few dozen rows,
//! single-digit columns), so plain row-major storage and `O(n^3)` elimination
//! are the right tools. All operations are pure functions over immutable
//! inputs.

use std::fmt;

use crate::rng::SplitMix64;

/// Relative pivot tolerance used for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Rayleigh-quotient convergence threshold for power iteration.
const POWER_ITERATION_TOL: f64 = 1e-12;
/// Iteration cap for power iteration.
const POWER_ITERATION_MAX: usize = 10_000;
/// Fixed seed for the power-iteration start vector, so repeated invocations
/// are byte-identical.
const POWER_ITERATION_SEED: u64 = 0x5EED_1A16_0000_0001;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// A constructor was handed NaN or infinite entries.
    NonFinite,
    /// Operand shapes do not line up.
    DimensionMismatch { expected: usize, found: usize },
    /// An operation requiring a square matrix got a rectangular one.
    NotSquare { rows: usize, cols: usize },
    /// The matrix does not have full column rank; `column` is the 0-based
    /// index of the first column that is linearly dependent on its
    /// predecessors.
    RankDeficient { column: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NonFinite => write!(f, "entries must be finite (no NaN/Inf)"),
            LinalgError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            LinalgError::NotSquare { rows, cols } => {
                write!(f, "expected a square matrix, got {rows}x{cols}")
            }
            LinalgError::RankDeficient { column } => {
                write!(f, "rank-deficient matrix, column {}", column + 1)
            }
        }
    }
}

impl std::error::Error for LinalgError {}

/// Dense vector of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Vector { data })
    }

    pub fn from_slice(data: &[f64]) -> Result<Self, LinalgError> {
        Vector::new(data.to_vec())
    }

    pub fn zeros(len: usize) -> Self {
        Vector {
            data: vec![0.0; len],
        }
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|x| x.is_finite()));
        Vector { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Largest absolute entry (0 for the empty vector).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dense row-major matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Result of a least-squares solve `argmin_w ||m w - b||_2`.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    /// Minimizing coefficients `w`.
    pub coeffs: Vector,
    /// `m w`, the projection of `b` onto the column space of `m`.
    pub projection: Vector,
    /// `||m w - b||_2`.
    pub residual_norm: f64,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(LinalgError::DimensionMismatch {
                    expected: ncols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(nrows, ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index out of bounds");
        self.data[i * self.cols + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Standard matrix-vector product.
    pub fn matvec(&self, v: &Vector) -> Result<Vector, LinalgError> {
        if v.len() != self.cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        self.matvec_into(v.as_slice(), &mut out);
        Ok(Vector { data: out })
    }

    /// Allocation-free product for hot loops. Panics on shape mismatch.
    pub(crate) fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `x^T M` accumulated row-wise; `out` has length `cols`.
    pub(crate) fn tr_matvec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(out.len(), self.cols);
        out.fill(0.0);
        for (i, xi) in x.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += xi * m;
            }
        }
    }

    /// Gram matrix of the columns, `M^T M` (cols x cols).
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let row = self.row(i);
            for a in 0..self.cols {
                for b in a..self.cols {
                    let v = g.get(a, b) + row[a] * row[b];
                    g.set(a, b, v);
                    if a != b {
                        g.set(b, a, v);
                    }
                }
            }
        }
        g
    }

    /// Gram matrix of the rows, `M M^T` (rows x rows).
    pub fn row_gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.rows, self.rows);
        for a in 0..self.rows {
            for b in a..self.rows {
                let v = dot(self.row(a), self.row(b));
                g.set(a, b, v);
                g.set(b, a, v);
            }
        }
        g
    }

    /// Least squares through the normal equations `(M^T M) w = M^T b`,
    /// solved with a diagonally pivoted LDL^T factorization. Requires full
    /// column rank; on failure the error names the first dependent column.
    pub fn least_squares(&self, b: &Vector) -> Result<LeastSquaresFit, LinalgError> {
        if b.len() != self.rows {
            return Err(LinalgError::DimensionMismatch {
                expected: self.rows,
                found: b.len(),
            });
        }
        let (rank, dep) = self.column_rank_detail(DEFAULT_RANK_TOL);
        if rank < self.cols {
            return Err(LinalgError::RankDeficient {
                column: dep.unwrap_or(self.cols - 1),
            });
        }
        let gram = self.gram();
        let mut rhs = vec![0.0; self.cols];
        self.tr_matvec_into(b.as_slice(), &mut rhs);
        let coeffs = solve_symmetric(&gram, &rhs)?;
        let coeffs = Vector { data: coeffs };
        let projection = self.matvec(&coeffs)?;
        let residual_norm = projection
            .iter()
            .zip(b.iter())
            .map(|(p, x)| (p - x) * (p - x))
            .sum::<f64>()
            .sqrt();
        Ok(LeastSquaresFit {
            coeffs,
            projection,
            residual_norm,
        })
    }

    /// Dominant eigenvalue of a square symmetric PSD matrix via power
    /// iteration with a fixed-seed start vector. Stops once successive
    /// Rayleigh quotients differ by less than 1e-12, or after 10,000 rounds.
    pub fn lambda_max(&self) -> Result<f64, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        if n == 0 {
            return Ok(0.0);
        }
        let mut rng = SplitMix64::new(POWER_ITERATION_SEED);
        let mut v: Vec<f64> = (0..n).map(|_| rng.next_range(-1.0, 1.0)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm == 0.0 {
            v[0] = 1.0;
        } else {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let mut av = vec![0.0; n];
        let mut rayleigh_prev = f64::INFINITY;
        for _ in 0..POWER_ITERATION_MAX {
            self.matvec_into(&v, &mut av);
            let rayleigh = dot(&v, &av);
            let av_norm = dot(&av, &av).sqrt();
            if av_norm == 0.0 {
                // v is in the null space; for PSD input the spectrum seen
                // from here is zero.
                return Ok(0.0);
            }
            for (x, y) in v.iter_mut().zip(&av) {
                *x = y / av_norm;
            }
            if (rayleigh - rayleigh_prev).abs() < POWER_ITERATION_TOL {
                return Ok(rayleigh);
            }
            rayleigh_prev = rayleigh;
        }
        Ok(rayleigh_prev)
    }

    /// Numerical column rank via elimination with partial pivoting. A pivot
    /// candidate below `tol` times the largest absolute entry of the input
    /// counts as zero.
    pub fn column_rank(&self, tol: f64) -> usize {
        self.column_rank_detail(tol).0
    }

    /// Rank plus the 0-based index of the first column that failed to
    /// produce a pivot (the first dependent column), if any.
    pub(crate) fn column_rank_detail(&self, tol: f64) -> (usize, Option<usize>) {
        assert!(tol > 0.0, "rank tolerance must be positive");
        let scale = self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return (0, if self.cols > 0 { Some(0) } else { None });
        }
        let thresh = tol * scale;
        let mut work = self.data.clone();
        let at = |w: &[f64], i: usize, j: usize| w[i * self.cols + j];
        let mut rank = 0;
        let mut first_dep = None;
        for col in 0..self.cols {
            // pick the largest remaining entry in this column
            let mut pivot_row = rank;
            let mut pivot_abs = 0.0;
            for r in rank..self.rows {
                let a = at(&work, r, col).abs();
                if a > pivot_abs {
                    pivot_abs = a;
                    pivot_row = r;
                }
            }
            if pivot_abs < thresh || rank == self.rows {
                if first_dep.is_none() {
                    first_dep = Some(col);
                }
                continue;
            }
            if pivot_row != rank {
                for j in 0..self.cols {
                    work.swap(rank * self.cols + j, pivot_row * self.cols + j);
                }
            }
            let pivot = at(&work, rank, col);
            for r in (rank + 1)..self.rows {
                let factor = at(&work, r, col) / pivot;
                if factor != 0.0 {
                    for j in col..self.cols {
                        work[r * self.cols + j] -= factor * work[rank * self.cols + j];
                    }
                }
            }
            rank += 1;
        }
        (rank, first_dep)
    }
}

/// Solve `A x = b` for symmetric positive-definite `A` by LDL^T with
/// symmetric (diagonal) pivoting.
fn solve_symmetric(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.len(), n);
    let mut m: Vec<f64> = a.data.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // bring the largest remaining diagonal entry to position k
        let mut best = k;
        for j in (k + 1)..n {
            if m[j * n + j] > m[best * n + best] {
                best = j;
            }
        }
        if best != k {
            for j in 0..n {
                m.swap(k * n + j, best * n + j);
            }
            for i in 0..n {
                m.swap(i * n + k, i * n + best);
            }
            rhs.swap(k, best);
            perm.swap(k, best);
        }
        let pivot = m[k * n + k];
        if pivot.abs() < f64::EPSILON {
            return Err(LinalgError::RankDeficient { column: k });
        }
        for i in (k + 1)..n {
            let factor = m[i * n + k] / pivot;
            if factor != 0.0 {
                for j in k..n {
                    m[i * n + j] -= factor * m[k * n + j];
                }
            }
            rhs[i] -= factor * rhs[k];
        }
    }
    // back substitution
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut s = rhs[k];
        for j in (k + 1)..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    // undo the permutation
    let mut out = vec![0.0; n];
    for (pos, &orig) in perm.iter().enumerate() {
        out[orig] = x[pos];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s).unwrap()
    }

    /// Feature matrix with rows (0,-2), (-1,0), (0,1), (2,0).
    fn x_first() -> Matrix {
        Matrix::from_rows(&[
            vec![0.0, -2.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![2.0, 0.0],
        ])
        .unwrap()
    }

    /// Feature matrix with rows (0,-2), (0,1), (-1,0), (2,0).
    fn x_second() -> Matrix {
        Matrix::from_rows(&[
            vec![0.0, -2.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![2.0, 0.0],
        ])
        .unwrap()
    }

    /// Feature matrix with rows (-1,0), (0,-2), (0,1), (2,0).
    fn x_third() -> Matrix {
        Matrix::from_rows(&[
            vec![-1.0, 0.0],
            vec![0.0, -2.0],
            vec![0.0, 1.0],
            vec![2.0, 0.0],
        ])
        .unwrap()
    }

    /// Feature matrix with rows (0,-2), (-10,4), (0,1).
    fn x_counterexample() -> Matrix {
        Matrix::from_rows(&[vec![0.0, -2.0], vec![-10.0, 4.0], vec![0.0, 1.0]]).unwrap()
    }

    /// Closed-form dominant eigenvalue of a symmetric 2x2 [[a,b],[b,d]].
    fn eig2x2_max(a: f64, b: f64, d: f64) -> f64 {
        0.5 * ((a + d) + ((a - d) * (a - d) + 4.0 * b * b).sqrt())
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    #[test]
    fn matvec_matches_hand_products() {
        let out = x_first().matvec(&v(&[-1.0, -1.0])).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 1.0, -1.0, -2.0]);

        let out = x_third().matvec(&v(&[-3.0, -1.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 2.0, -1.0, -6.0]);
    }

    #[test]
    fn matvec_zero_vector_gives_zero() {
        let out = x_second().matvec(&v(&[0.0, 0.0])).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn matvec_rejects_dimension_mismatch() {
        let err = x_first().matvec(&v(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(
            err,
            LinalgError::DimensionMismatch {
                expected: 2,
                found: 3
            }
        ));
    }

    #[test]
    fn constructors_reject_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn least_squares_first_instance() {
        let fit = x_first().least_squares(&v(&[9.0, 8.0, 7.0, 6.0])).unwrap();
        let expected = [22.0 / 5.0, -4.0 / 5.0, -11.0 / 5.0, 8.0 / 5.0];
        for (got, want) in fit.projection.iter().zip(expected) {
            assert_close(*got, want, 1e-12);
        }
        assert_close(fit.residual_norm, 202.6_f64.sqrt(), 1e-9);
        assert_close(fit.coeffs[0], 4.0 / 5.0, 1e-12);
        assert_close(fit.coeffs[1], -11.0 / 5.0, 1e-12);
    }

    #[test]
    fn least_squares_second_instance() {
        let fit = x_second().least_squares(&v(&[9.0, 8.0, 7.0, 6.0])).unwrap();
        let expected = [4.0, -2.0, -1.0, 2.0];
        for (got, want) in fit.projection.iter().zip(expected) {
            assert_close(*got, want, 1e-12);
        }
        assert_close(fit.residual_norm, 205.0_f64.sqrt(), 1e-9);
    }

    #[test]
    fn least_squares_third_instance() {
        let fit = x_third().least_squares(&v(&[9.0, 8.0, 7.0, 6.0])).unwrap();
        let expected = [-0.6, 3.6, -1.8, 1.2];
        for (got, want) in fit.projection.iter().zip(expected) {
            assert_close(*got, want, 1e-12);
        }
        assert_close(fit.residual_norm, 212.0_f64.sqrt(), 1e-9);
    }

    #[test]
    fn least_squares_recovers_representable_target() {
        let m = x_first();
        let w = v(&[3.5, -0.25]);
        let b = m.matvec(&w).unwrap();
        let fit = m.least_squares(&b).unwrap();
        assert_close(fit.coeffs[0], 3.5, 1e-12);
        assert_close(fit.coeffs[1], -0.25, 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn least_squares_names_dependent_column() {
        let m = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let err = m.least_squares(&v(&[1.0, 2.0, 3.0])).unwrap_err();
        assert!(matches!(err, LinalgError::RankDeficient { column: 1 }));
    }

    #[test]
    fn lambda_max_diagonal_and_identity() {
        let g = x_first().gram();
        assert_eq!(g.get(0, 0), 5.0);
        assert_eq!(g.get(1, 1), 5.0);
        assert_eq!(g.get(0, 1), 0.0);
        assert_close(g.lambda_max().unwrap(), 5.0, 1e-12);
        assert_close(Matrix::identity(3).lambda_max().unwrap(), 1.0, 1e-12);
    }

    #[test]
    fn lambda_max_matches_closed_form_2x2() {
        let g = x_counterexample().gram();
        assert_eq!(g.get(0, 0), 100.0);
        assert_eq!(g.get(0, 1), -40.0);
        assert_eq!(g.get(1, 1), 21.0);
        let oracle = eig2x2_max(100.0, -40.0, 21.0);
        assert_close(g.lambda_max().unwrap(), oracle, 1e-9);
    }

    #[test]
    fn lambda_max_rejects_rectangular() {
        assert!(matches!(
            x_first().lambda_max().unwrap_err(),
            LinalgError::NotSquare { rows: 4, cols: 2 }
        ));
    }

    #[test]
    fn lambda_max_zero_matrix() {
        assert_eq!(Matrix::zeros(3, 3).lambda_max().unwrap(), 0.0);
    }

    #[test]
    fn column_rank_cases() {
        assert_eq!(x_first().column_rank(DEFAULT_RANK_TOL), 2);
        let dup = Matrix::from_rows(&[
            vec![1.0, 1.0, 2.0],
            vec![0.0, 0.0, 1.0],
            vec![2.0, 2.0, 0.0],
        ])
        .unwrap();
        assert_eq!(dup.column_rank(DEFAULT_RANK_TOL), 2);
        assert_eq!(Matrix::zeros(3, 2).column_rank(DEFAULT_RANK_TOL), 0);
        assert_eq!(Matrix::identity(4).column_rank(DEFAULT_RANK_TOL), 4);
    }

    #[test]
    fn solve_symmetric_small_system() {
        let a = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = solve_symmetric(&a, &[1.0, 2.0]).unwrap();
        // 4x + y = 1, x + 3y = 2  =>  x = 1/11, y = 7/11
        assert_close(x[0], 1.0 / 11.0, 1e-12);
        assert_close(x[1], 7.0 / 11.0, 1e-12);
    }

    /// Wide full-rank matrices (cols < rows) that are not close to rank
    /// deficiency. The coarse pivot threshold keeps the conditioning in the
    /// regime the normal equations are meant for; near-singular draws are
    /// rejected rather than asserted against.
    fn arb_full_rank() -> impl Strategy<Value = (Matrix, Vector)> {
        (3usize..=7, 1usize..=3)
            .prop_flat_map(|(rows, cols)| {
                let cols = cols.min(rows - 1);
                (
                    proptest::collection::vec(-2.0..2.0f64, rows * cols),
                    proptest::collection::vec(-3.0..3.0f64, rows),
                    Just(rows),
                    Just(cols),
                )
            })
            .prop_filter_map(
                "rank deficient or ill-conditioned draw",
                |(m, b, rows, cols)| {
                    let m = Matrix::new(rows, cols, m).ok()?;
                    if m.column_rank(1e-2) < cols {
                        return None;
                    }
                    let b = Vector::new(b).ok()?;
                    Some((m, b))
                },
            )
    }

    proptest! {
        #[test]
        fn residual_orthogonal_and_reconstructs((m, b) in arb_full_rank()) {
            let fit = m.least_squares(&b).unwrap();
            let residual: Vec<f64> = b.iter().zip(fit.projection.iter()).map(|(x, p)| x - p).collect();
            // residual orthogonal to every column
            for j in 0..m.cols() {
                let col_dot: f64 = (0..m.rows()).map(|i| m.get(i, j) * residual[i]).sum();
                prop_assert!(col_dot.abs() < 1e-8, "column {} dot {}", j, col_dot);
            }
            // m*coeffs + residual reconstructs b
            let mw = m.matvec(&fit.coeffs).unwrap();
            for i in 0..b.len() {
                prop_assert!((mw[i] + residual[i] - b[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn projection_is_idempotent((m, b) in arb_full_rank()) {
            let fit = m.least_squares(&b).unwrap();
            let again = m.least_squares(&fit.projection).unwrap();
            for (a, b) in again.projection.iter().zip(fit.projection.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rayleigh_quotient_lower_bounds_lambda_max() {
        let g = x_counterexample().gram();
        let lam = g.lambda_max().unwrap();
        let mut rng = SplitMix64::new(99);
        for _ in 0..100 {
            let x: Vec<f64> = (0..2).map(|_| rng.next_range(-1.0, 1.0)).collect();
            let den = dot(&x, &x);
            if den == 0.0 {
                continue;
            }
            let mut gx = vec![0.0; 2];
            g.matvec_into(&x, &mut gx);
            let quotient = dot(&x, &gx) / den;
            assert!(quotient <= lam + 1e-9, "rayleigh {quotient} exceeds {lam}");
        }
    }
}

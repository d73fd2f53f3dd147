//! Dense row-major linear algebra with exact flop accounting.
//!
//! Every kernel takes a [`FlopCounter`] and tallies the operations its loops
//! actually perform: multiplies, adds, subtracts, divides, and square roots,
//! one flop each. The counts are part of the contract — the factorization of
//! an m-by-m matrix costs exactly m(m+1)(2m+1)/6 flops, a triangular
//! solve-pair costs 2m², and a matrix-vector product costs 2·rows·cols − rows
//! — because downstream the a-priori execution budget is asserted against
//! these numbers.

use crate::error::{Error, Result};
use crate::flops::{FlopCounter, Phase};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    context: "from_rows",
                    expected: c,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    /// Build from a flat row-major slice of length `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "from_row_major",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at (i, j).
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    /// Overwrite entry at (i, j).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = value;
    }

    /// Row `i` as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert!(i < self.rows);
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Flat row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat row-major view of the entries.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Entries copied out as nested rows (used by the file formats).
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// Transposed copy. Pure data movement, no flops.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// True if square and symmetric to within `tol` entrywise.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// True if every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

// On the wire a matrix is a list of rows, so config and problem files can
// write it the way humans do. A ragged list is rejected at parse time.
impl serde::Serialize for DenseMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> serde::Deserialize<'de> for DenseMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Lower-triangular Cholesky factor L with L·Lᵀ equal to the factored
/// matrix. Stores the full square layout with the strict upper triangle
/// zero, plus the flop count consumed producing it.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor {
    dim: usize,
    entries: Vec<f64>,
    flop_cost: u64,
}

impl LowerFactor {
    /// Zero factor used as a reusable output buffer for
    /// [`cholesky_into`].
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
            flop_cost: 0,
        }
    }

    /// Order of the factored matrix.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry L(i, j); zero above the diagonal.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.dim && j < self.dim);
        self.entries[i * self.dim + j]
    }

    /// Flops spent producing this factor.
    pub fn flop_cost(&self) -> u64 {
        self.flop_cost
    }

    /// The factor as a dense matrix (diagnostics; no flops counted).
    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.dim,
            cols: self.dim,
            data: self.entries.clone(),
        }
    }
}

/// Cholesky factorization A = L·Lᵀ of a symmetric positive definite matrix.
///
/// Only the lower triangle of `a` is read. Costs exactly
/// m(m+1)(2m+1)/6 = m³/3 + m²/2 + m/6 flops for an m-by-m input (square
/// roots count one flop each), charged to [`Phase::Factorize`]. Fails with
/// [`Error::NotPositiveDefinite`] on the first non-positive pivot.
pub fn cholesky(a: &DenseMatrix, counter: &mut FlopCounter) -> Result<LowerFactor> {
    let mut out = LowerFactor::zeros(a.rows());
    cholesky_into(a, &mut out, counter)?;
    Ok(out)
}

/// In-place variant of [`cholesky`] writing into a preallocated factor.
pub fn cholesky_into(a: &DenseMatrix, out: &mut LowerFactor, counter: &mut FlopCounter) -> Result<()> {
    let m = a.rows();
    if a.cols() != m {
        return Err(Error::DimensionMismatch {
            context: "cholesky",
            expected: m,
            got: a.cols(),
        });
    }
    if out.dim != m {
        return Err(Error::DimensionMismatch {
            context: "cholesky output buffer",
            expected: m,
            got: out.dim,
        });
    }
    let l = &mut out.entries;
    let mut flops: u64 = 0;
    for j in 0..m {
        // Diagonal: a_jj minus the squared prefix of row j, then a root.
        // j multiplies, j subtracts, one square root.
        let mut s = a.get(j, j);
        for k in 0..j {
            s -= l[j * m + k] * l[j * m + k];
        }
        if s <= 0.0 {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let d = s.sqrt();
        l[j * m + j] = d;
        // Subdiagonal entries of column j: j multiplies, j subtracts, one
        // divide each. Column total (m - j) * (2j + 1) flops.
        for i in (j + 1)..m {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            l[i * m + j] = s / d;
        }
        // Zero the strict upper triangle so stale entries never leak when
        // the buffer is reused.
        for k in (j + 1)..m {
            l[j * m + k] = 0.0;
        }
        flops += (m - j) as u64 * (2 * j + 1) as u64;
    }
    counter.add(Phase::Factorize, flops);
    out.flop_cost = flops;
    Ok(())
}

/// Solve A·x = rhs given the Cholesky factor of A, by one forward and one
/// backward substitution. Costs exactly 2·dim² flops, charged to
/// [`Phase::Substitute`].
pub fn solve_spd(l: &LowerFactor, rhs: &[f64], counter: &mut FlopCounter) -> Result<Vec<f64>> {
    let mut x = rhs.to_vec();
    solve_spd_in_place(l, &mut x, counter)?;
    Ok(x)
}

/// In-place variant of [`solve_spd`]; `x` holds the right-hand side on
/// entry and the solution on exit.
pub fn solve_spd_in_place(l: &LowerFactor, x: &mut [f64], counter: &mut FlopCounter) -> Result<()> {
    forward_solve_in_place(l, x, counter)?;
    backward_solve_in_place(l, x, counter)
}

/// Solve L·y = x in place (lower triangle only). Costs dim² flops: row i
/// takes i multiplies, i subtracts, and one divide.
pub fn forward_solve_in_place(l: &LowerFactor, x: &mut [f64], counter: &mut FlopCounter) -> Result<()> {
    let n = l.dim;
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "forward substitution",
            expected: n,
            got: x.len(),
        });
    }
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l.entries[i * n + k] * x[k];
        }
        x[i] = s / l.entries[i * n + i];
    }
    counter.add(Phase::Substitute, (n * n) as u64);
    Ok(())
}

/// Solve Lᵀ·y = x in place. Costs dim² flops, mirroring the forward pass.
pub fn backward_solve_in_place(l: &LowerFactor, x: &mut [f64], counter: &mut FlopCounter) -> Result<()> {
    let n = l.dim;
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "backward substitution",
            expected: n,
            got: x.len(),
        });
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l.entries[k * n + i] * x[k];
        }
        x[i] = s / l.entries[i * n + i];
    }
    counter.add(Phase::Substitute, (n * n) as u64);
    Ok(())
}

/// Dot product of two equal-length vectors. Costs 2k − 1 flops for length
/// k ≥ 1 (k multiplies, k − 1 adds): the accumulator starts from the first
/// product. Zero length costs nothing.
pub fn dot(x: &[f64], y: &[f64], counter: &mut FlopCounter) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    if x.is_empty() {
        return 0.0;
    }
    let mut s = x[0] * y[0];
    for k in 1..x.len() {
        s += x[k] * y[k];
    }
    counter.add(Phase::Multiply, (2 * x.len() - 1) as u64);
    s
}

/// Matrix-vector product A·x. Costs 2·rows·cols − rows flops (each row is a
/// length-cols dot), charged to [`Phase::Multiply`].
pub fn matvec(a: &DenseMatrix, x: &[f64], counter: &mut FlopCounter) -> Result<Vec<f64>> {
    if x.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "matvec",
            expected: a.cols(),
            got: x.len(),
        });
    }
    let mut y = vec![0.0; a.rows()];
    if a.cols() == 0 {
        return Ok(y);
    }
    for (i, yi) in y.iter_mut().enumerate() {
        let row = a.row(i);
        let mut s = row[0] * x[0];
        for k in 1..row.len() {
            s += row[k] * x[k];
        }
        *yi = s;
    }
    counter.add(Phase::Multiply, (2 * a.rows() * a.cols() - a.rows()) as u64);
    Ok(y)
}

/// Matrix product A·B. Costs rows·cols·(2k − 1) flops where k is the inner
/// dimension, charged to [`Phase::Multiply`].
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix, counter: &mut FlopCounter) -> Result<DenseMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            context: "matmul",
            expected: a.cols(),
            got: b.rows(),
        });
    }
    let (r, k, c) = (a.rows(), a.cols(), b.cols());
    let mut out = DenseMatrix::zeros(r, c);
    if k == 0 {
        return Ok(out);
    }
    for i in 0..r {
        for j in 0..c {
            let mut s = a.get(i, 0) * b.get(0, j);
            for p in 1..k {
                s += a.get(i, p) * b.get(p, j);
            }
            out.set(i, j, s);
        }
    }
    counter.add(Phase::Multiply, (r * c * (2 * k - 1)) as u64);
    Ok(out)
}

/// Infinity norm of a vector. Charged one flop per scanned entry (the
/// absolute-value-and-compare step), which is how the zero test on the
/// box-QP linear term is budgeted.
pub fn norm_inf(x: &[f64], counter: &mut FlopCounter) -> f64 {
    let mut m = 0.0f64;
    for &v in x {
        m = m.max(v.abs());
    }
    counter.add(Phase::Vector, x.len() as u64);
    m
}

//! Dense symmetric matrices, 2×2 blocks and the pair embeddings between them.
//!
//! `embed(S, i, j, n)` places a 2×2 block on rows/columns `{i, j}` of an n×n
//! zero matrix; `extract(M, i, j)` is its adjoint under the trace inner product.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance used by cone membership checks unless a caller overrides it.
pub const DEFAULT_CONE_TOL: f64 = 1e-8;

/// A dense symmetric matrix stored as its packed upper triangle.
///
/// Entry `(i, j)` with `i <= j` lives at `j * (j + 1) / 2 + i` (column-major
/// upper triangle), so `(i, j)` and `(j, i)` share storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PackedRepr", into = "PackedRepr")]
pub struct SymMatrix {
    dim: usize,
    packed: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PackedRepr {
    dim: usize,
    upper: Vec<f64>,
}

impl TryFrom<PackedRepr> for SymMatrix {
    type Error = Error;

    fn try_from(r: PackedRepr) -> Result<Self> {
        SymMatrix::from_packed(r.dim, r.upper)
    }
}

impl From<SymMatrix> for PackedRepr {
    fn from(m: SymMatrix) -> Self {
        PackedRepr { dim: m.dim, upper: m.packed }
    }
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

pub(crate) fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

impl SymMatrix {
    /// Zero matrix. Panics if `dim == 0`.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        SymMatrix { dim, packed: vec![0.0; packed_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// The all-ones matrix `E`.
    pub fn ones(dim: usize) -> Self {
        assert!(dim >= 1, "SymMatrix dimension must be positive");
        SymMatrix { dim, packed: vec![1.0; packed_len(dim)] }
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle `i <= j`.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            for i in 0..=j {
                m.packed[packed_index(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from full rows; the rows must form an exactly symmetric square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j}): {} vs {}",
                        rows[i][j], rows[j][i]
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Builds a matrix from its packed upper triangle (column-major).
    pub fn from_packed(dim: usize, upper: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if upper.len() != packed_len(dim) {
            return Err(Error::DimensionMismatch { expected: packed_len(dim), found: upper.len() });
        }
        Ok(SymMatrix { dim, packed: upper })
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let mut m = Self::zeros(v.len());
        m.add_outer(1.0, v);
        m
    }

    /// `diag(d)`.
    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    /// Packed upper triangle, column-major.
    pub fn packed(&self) -> &[f64] {
        &self.packed
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) -> Result<()> {
        self.check_same_dim(other)?;
        for (a, b) in self.packed.iter_mut().zip(&other.packed) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, packed: self.packed.iter().map(|x| alpha * x).collect() }
    }

    /// `self += alpha * v vᵀ`.
    pub fn add_outer(&mut self, alpha: f64, v: &[f64]) {
        assert_eq!(v.len(), self.dim);
        for j in 0..self.dim {
            let avj = alpha * v[j];
            if avj == 0.0 {
                continue;
            }
            let col = j * (j + 1) / 2;
            for (p, vi) in self.packed[col..=col + j].iter_mut().zip(v) {
                *p += avj * vi;
            }
        }
    }

    /// `self += alpha * (u vᵀ + v uᵀ)`.
    pub fn add_sym_outer(&mut self, alpha: f64, u: &[f64], v: &[f64]) {
        assert_eq!(u.len(), self.dim);
        assert_eq!(v.len(), self.dim);
        for j in 0..self.dim {
            let col = j * (j + 1) / 2;
            for i in 0..=j {
                self.packed[col + i] += alpha * (u[i] * v[j] + v[i] * u[j]);
            }
        }
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for j in 0..self.dim {
            let col = j * (j + 1) / 2;
            for i in 0..j {
                let a = self.packed[col + i];
                out[i] += a * v[j];
                out[j] += a * v[i];
            }
            out[j] += self.packed[col + j] * v[j];
        }
        out
    }

    /// `uᵀ self v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        dot(u, &self.mul_vec(v))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.trace_inner_unchecked(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.packed.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.packed.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(())
    }

    fn trace_inner_unchecked(&self, other: &SymMatrix) -> f64 {
        let mut total = 0.0;
        for j in 0..self.dim {
            let col = j * (j + 1) / 2;
            for i in 0..j {
                total += 2.0 * self.packed[col + i] * other.packed[col + i];
            }
            total += self.packed[col + j] * other.packed[col + j];
        }
        total
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A symmetric 2×2 matrix `[[s11, s12], [s12, s22]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Block2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Block2 {
    pub const fn new(s11: f64, s12: f64, s22: f64) -> Self {
        Block2 { s11, s12, s22 }
    }

    pub const fn zero() -> Self {
        Block2 { s11: 0.0, s12: 0.0, s22: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.s11 + self.s22
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    /// Trace inner product with another block.
    pub fn inner(&self, other: &Block2) -> f64 {
        self.s11 * other.s11 + 2.0 * self.s12 * other.s12 + self.s22 * other.s22
    }
}

impl From<[[f64; 2]; 2]> for Block2 {
    fn from(m: [[f64; 2]; 2]) -> Self {
        Block2::new(m[0][0], m[0][1], m[1][1])
    }
}

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfRange { index: idx, dim: n });
        }
    }
    if i == j {
        return Err(Error::DiagonalPair(i));
    }
    if i > j {
        return Err(Error::InvalidArgument(format!("pair ({i}, {j}) must satisfy i < j")));
    }
    Ok(())
}

/// `ι_ij`: the n×n matrix carrying `block` on rows/columns `{i, j}` and zeros elsewhere.
pub fn embed(block: &Block2, i: usize, j: usize, n: usize) -> Result<SymMatrix> {
    check_pair(i, j, n)?;
    let mut m = SymMatrix::zeros(n);
    m.set(i, i, block.s11);
    m.set(i, j, block.s12);
    m.set(j, j, block.s22);
    Ok(m)
}

/// `ι*_ij`: the principal 2×2 submatrix of `m` on `{i, j}`.
pub fn extract(m: &SymMatrix, i: usize, j: usize) -> Result<Block2> {
    check_pair(i, j, m.dim())?;
    Ok(Block2::new(m.get(i, i), m.get(i, j), m.get(j, j)))
}

/// Frobenius inner product `tr(AB) = Σ a_ij b_ij`.
pub fn trace_inner(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    a.check_same_dim(b)?;
    Ok(a.trace_inner_unchecked(b))
}

/// Whether `block` is positive semidefinite up to `tol`.
///
/// Diagonals must be `>= -tol` and the determinant `>= -tol * max(1, s11 * s22)`.
pub fn psd2_check(block: &Block2, tol: f64) -> bool {
    let scale = (block.s11 * block.s22).max(1.0);
    block.s11 >= -tol && block.s22 >= -tol && block.det() >= -tol * scale
}

/// Whether `block` lies in `S²₊ ∩ N²` up to `tol`.
pub fn in_psd_nonneg(block: &Block2, tol: f64) -> bool {
    psd2_check(block, tol) && block.s12 >= -tol
}

/// Whether the 2×2 block is copositive, i.e. lies in `S²₊ + N²`, the dual of `S²₊ ∩ N²`.
pub fn copositive2(block: &Block2, tol: f64) -> bool {
    block.s11 >= -tol && block.s22 >= -tol && block.s12 >= -(block.s11.max(0.0) * block.s22.max(0.0)).sqrt() - tol
}

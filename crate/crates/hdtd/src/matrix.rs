//! Dense matrix primitives shared by the estimators, tests and the sampler:
//! the transposable sample itself, symmetric matrices with PSD square roots,
//! and the N x N Gram matrix of vectorized observations.

use ndarray::{Array2, ArrayView2};

use crate::eigen::{reconstruct, sym_eigen};
use crate::error::{Error, Result};

/// Default relative eigenvalue cutoff for PSD clamping and PD checks.
pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// An ordered collection of `n` real `rows x cols` data matrices, stored
/// row-major in one contiguous buffer. Entries are validated to be finite at
/// construction; nothing downstream re-checks.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    n: usize,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MatrixSample {
    pub fn new(n: usize, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "sample dimensions must be positive, got n={n}, r={rows}, c={cols}"
            )));
        }
        if data.len() != n * rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for n={n}, r={rows}, c={cols}, got {}",
                n * rows * cols,
                data.len()
            )));
        }
        for (pos, &x) in data.iter().enumerate() {
            if !x.is_finite() {
                let per = rows * cols;
                return Err(Error::NonFinite {
                    index: pos / per,
                    row: (pos % per) / cols,
                    col: pos % cols,
                });
            }
        }
        Ok(Self {
            n,
            rows,
            cols,
            data,
        })
    }

    pub fn from_matrices(mats: &[Array2<f64>]) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::DimensionMismatch("empty sample".into()));
        }
        let (rows, cols) = (mats[0].nrows(), mats[0].ncols());
        let mut data = Vec::with_capacity(mats.len() * rows * cols);
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != rows || m.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "matrix {i} is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            data.extend(m.iter().copied());
        }
        Self::new(mats.len(), rows, cols, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// View of the i-th matrix.
    pub fn mat(&self, i: usize) -> ArrayView2<'_, f64> {
        let per = self.rows * self.cols;
        ArrayView2::from_shape((self.rows, self.cols), &self.data[i * per..(i + 1) * per])
            .expect("stored buffer is contiguous")
    }

    /// The sample viewed as `n` stacked row vectors of length `rows*cols`.
    /// All estimators only ever need inner products of these vectors, so the
    /// flattening order is irrelevant as long as it is consistent.
    pub fn as_vectors(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n, self.rows * self.cols), &self.data)
            .expect("stored buffer is contiguous")
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    /// Sample mean matrix.
    pub fn mean_matrix(&self) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((self.rows, self.cols));
        for i in 0..self.n {
            m += &self.mat(i);
        }
        m / self.n as f64
    }

    /// The sample with every matrix replaced by its transpose (rows and
    /// columns swap roles). Exact involution.
    pub fn transposed(&self) -> MatrixSample {
        let per = self.rows * self.cols;
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.n {
            let src = &self.data[i * per..(i + 1) * per];
            let dst = &mut data[i * per..(i + 1) * per];
            for a in 0..self.rows {
                for b in 0..self.cols {
                    dst[b * self.rows + a] = src[a * self.cols + b];
                }
            }
        }
        MatrixSample {
            n: self.n,
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// N x N matrix of inner products of the (optionally centered) vectorized
/// sample. Exactly symmetric by construction.
pub fn pairwise_gram(s: &MatrixSample, centered: bool) -> Array2<f64> {
    let y = s.as_vectors();
    let mut g = if centered {
        let mean = y.mean_axis(ndarray::Axis(0)).expect("n >= 1");
        let yc = &y - &mean;
        yc.dot(&yc.t())
    } else {
        y.dot(&y.t())
    };
    for i in 0..s.n() {
        for j in i + 1..s.n() {
            let v = g[[i, j]];
            g[[j, i]] = v;
        }
    }
    g
}

/// A real symmetric matrix. Construction mirrors the mean of the two
/// triangles so the stored entries satisfy `A[a,b] == A[b,a]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: Array2<f64>,
}

impl SymMatrix {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square and nonempty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some((idx, _)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: 0,
                row: idx.0,
                col: idx.1,
            });
        }
        let mut m = a;
        for i in 0..m.nrows() {
            for j in i + 1..m.ncols() {
                let v = 0.5 * (m[[i, j]] + m[[j, i]]);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        Ok(Self { m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: Array2::eye(dim),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Array2::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            m[[i, i]] = d;
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.m.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diag().sum()
    }

    /// tr(A^2), which for symmetric A is the squared Frobenius norm.
    pub fn trace_sq(&self) -> f64 {
        self.m.iter().map(|x| x * x).sum()
    }

    pub fn scale(&self, t: f64) -> SymMatrix {
        SymMatrix { m: &self.m * t }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        sym_eigen(self.m.view()).values[0]
    }

    /// Symmetric PSD square root via spectral decomposition. Eigenvalues in
    /// `[-tol*max, tol*max]` are clamped to zero before rooting; anything
    /// below the band is an error.
    pub fn sym_sqrt(&self, tol: f64) -> Result<SymMatrix> {
        let eig = sym_eigen(self.m.view());
        let max = eig.values.iter().cloned().fold(0.0_f64, f64::max).max(0.0);
        let floor = tol * max;
        if let Some(&bad) = eig.values.iter().find(|&&l| l < -floor) {
            return Err(Error::NotPositiveSemiDefinite {
                eigenvalue: bad,
                tol: floor,
            });
        }
        let b = reconstruct(&eig, |l| if l <= floor { 0.0 } else { l.sqrt() });
        SymMatrix::new(b)
    }

    /// Symmetric inverse square root; requires positive definiteness
    /// (smallest eigenvalue strictly above `tol * largest`).
    pub fn sym_inv_sqrt(&self, tol: f64) -> Result<SymMatrix> {
        let eig = sym_eigen(self.m.view());
        let max = eig.values.iter().cloned().fold(0.0_f64, f64::max).max(0.0);
        let floor = tol * max;
        let min = eig.values[0];
        if min <= floor || max == 0.0 {
            return Err(Error::SingularMatrix {
                eigenvalue: min,
                tol: floor,
            });
        }
        let b = reconstruct(&eig, |l| 1.0 / l.sqrt());
        SymMatrix::new(b)
    }
}

//! Symmetric eigendecomposition via the cyclic Jacobi method.
//!
//! The covariance factors handled here are small (dimension at most a few
//! hundred), so Jacobi is plenty fast and gives eigenvectors that are
//! orthogonal to machine precision, which keeps the reconstructed symmetric
//! roots accurate.

use ndarray::{Array2, ArrayView2};

/// Eigenvalues (ascending) and the matching eigenvectors as columns.
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

fn off_diag_sq(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                s += m[[p, q]] * m[[p, q]];
            }
        }
    }
    s
}

/// Decompose a symmetric matrix. Symmetry of the input is assumed; only the
/// value `(a + a')/2` of each entry pair participates in the rotations since
/// the sweep reads and writes both triangles consistently.
pub fn sym_eigen(a: ArrayView2<'_, f64>) -> SymEigen {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eigen requires a square matrix");
    let mut m = a.to_owned();
    let mut v = Array2::<f64>::eye(n);
    if n > 1 {
        let fro_sq: f64 = m.iter().map(|x| x * x).sum();
        let stop = (f64::EPSILON * f64::EPSILON) * fro_sq.max(f64::MIN_POSITIVE);
        for _sweep in 0..60 {
            if off_diag_sq(&m) <= stop {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = m[[p, q]];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[[p, p]];
                    let aqq = m[[q, q]];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        1.0 / (theta - (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        if k != p && k != q {
                            let akp = m[[k, p]];
                            let akq = m[[k, q]];
                            m[[k, p]] = c * akp - s * akq;
                            m[[p, k]] = m[[k, p]];
                            m[[k, q]] = s * akp + c * akq;
                            m[[q, k]] = m[[k, q]];
                        }
                    }
                    m[[p, p]] = app - t * apq;
                    m[[q, q]] = aqq + t * apq;
                    m[[p, q]] = 0.0;
                    m[[q, p]] = 0.0;
                    for k in 0..n {
                        let vkp = v[[k, p]];
                        let vkq = v[[k, q]];
                        v[[k, p]] = c * vkp - s * vkq;
                        v[[k, q]] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    SymEigen { values, vectors }
}

/// Rebuild `V diag(f(lambda)) V'` for a spectral function `f`.
pub fn reconstruct(eig: &SymEigen, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let n = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let fl = f(lam);
        for i in 0..n {
            scaled[[i, j]] *= fl;
        }
    }
    scaled.dot(&eig.vectors.t())
}

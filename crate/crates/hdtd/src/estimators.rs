//! Unbiased trace-functional estimators for the row covariance matrix and
//! the vectorized covariance: T1N (estimates tr(S_R)), T2N (tr(S_R^2)) and
//! T2N* (tr(Omega^2) for Omega = S_C kron S_R), plus the plug-in estimate of
//! tr(S_C^2) and the sample row covariance.
//!
//! Each of T2N and T2N* exists twice: a definitional O(N^4) evaluation over
//! tuples of distinct indices (the oracle, for small N), and an O(N^2)
//! reformulation whose double sums run over pair cross-products of the
//! smaller matrix dimension. The two routes agree to roughly 1e-12 relative
//! and the tests enforce 1e-10.
//!
//! All estimators are exactly location invariant: the lower-order U-statistic
//! terms cancel any fixed mean shift identically, not just in expectation.
//!
//! Evaluation is sequential with compensated (Neumaier) accumulation, so a
//! given sample always produces the same bits; callers parallelize across
//! replicates, never inside an estimator.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::matrix::{pairwise_gram, MatrixSample, SymMatrix};

/// P(s, t) = s! / (s - t)!, the number of ordered t-tuples of distinct
/// indices, exact for s <= 10^6 and t <= 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FallingFactorial(u128);

impl FallingFactorial {
    pub fn new(s: usize, t: usize) -> Result<Self> {
        if t > 4 {
            return Err(Error::InvalidConfig(format!(
                "falling factorial order {t} exceeds the supported maximum 4"
            )));
        }
        if s > 1_000_000 {
            return Err(Error::InvalidConfig(format!(
                "falling factorial base {s} exceeds the supported maximum 10^6"
            )));
        }
        if s < t {
            return Err(Error::InvalidConfig(format!(
                "falling factorial P({s}, {t}) undefined for s < t"
            )));
        }
        let mut v: u128 = 1;
        for k in 0..t {
            v *= (s - k) as u128;
        }
        Ok(Self(v))
    }

    pub fn value(&self) -> u128 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64
    }
}

fn perm(s: usize, t: usize) -> f64 {
    FallingFactorial::new(s, t)
        .expect("caller checks the sample-size precondition")
        .as_f64()
}

/// Neumaier-compensated accumulator; used for every sum whose term count
/// grows with N or N^2 so results stay reproducible to ~1e-15 regardless of
/// magnitude cancellation between the U-statistic terms.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn frob_dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let (sa, sb) = (a.as_slice().unwrap(), b.as_slice().unwrap());
    sa.iter().zip(sb).map(|(x, y)| x * y).sum()
}

fn frob_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// tr(B * B) for a square (not necessarily symmetric) matrix.
fn trace_of_square(b: &Array2<f64>) -> f64 {
    let n = b.nrows();
    let s = b.as_slice().unwrap();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += s[i * n + j] * s[j * n + i];
        }
    }
    acc
}

fn view_dot(a: &ArrayView2<'_, f64>, b: &ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Which side the pair cross-products are formed on. `Auto` picks the
/// smaller of the two dimensions; the explicit variants exist so tests can
/// pin the cyclic-trace equivalence of both routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(dead_code)] // the forced variants are exercised by tests
pub(crate) enum ProductSide {
    Auto,
    Rows,
    Cols,
}

impl ProductSide {
    fn use_rows(self, rows: usize, cols: usize) -> bool {
        match self {
            ProductSide::Auto => rows <= cols,
            ProductSide::Rows => true,
            ProductSide::Cols => false,
        }
    }
}

/// The star-sums of the O(N^2) reformulation of T2N. Names follow the roles:
/// `pair_*` are sums over ordered pairs of distinct indices, `self_*` over
/// single indices, and the `centered_*` ones are built from X_i - Xbar.
struct FastSums {
    pair_symm: f64,       // sum* tr(Xi Xi' Xj Xj')
    pair_outer: f64,      // sum* tr(Xi Xj' Xj Xi')
    pair_twisted: f64,    // sum* tr(Xi Xj' Xi Xj')
    pair_third: f64,      // sum* tr(Xi Xi' Xi Xj')
    self_fourth: f64,     // sum  tr((Xi Xi')^2)
    centered_mixed: f64,  // sum  tr((Xi-Xbar)(Xi-Xbar)' Xi Xi')
    centered_fourth: f64, // sum  tr([(Xi-Xbar)(Xi-Xbar)']^2)
    centered_gram: f64,   // sum  tr((Xi-Xbar) Xi' Xi (Xi-Xbar)')
    centered_twist: f64,  // sum  tr(Xi (Xi-Xbar)' Xi (Xi-Xbar)')
}

fn fast_sums(s: &MatrixSample, side: ProductSide) -> FastSums {
    let n = s.n();
    let (r, c) = (s.rows(), s.cols());
    let on_rows = side.use_rows(r, c);
    let xbar = s.mean_matrix();

    let mut k_sum = Array2::<f64>::zeros(if on_rows { (r, r) } else { (c, c) });
    let mut self_sq_frob = Kahan::default(); // sum_i || small_i ||_F^2
    let mut self_fourth = Kahan::default();
    let mut pair_third = Kahan::default();
    let mut centered_mixed = Kahan::default();
    let mut centered_fourth = Kahan::default();
    let mut centered_gram = Kahan::default();
    let mut centered_twist = Kahan::default();

    for i in 0..n {
        let x = s.mat(i);
        let d = &x - &xbar;
        let small = if on_rows {
            x.dot(&x.t()) // Xi Xi'  (r x r)
        } else {
            x.t().dot(&x) // Xi' Xi  (c x c)
        };
        let f2 = frob_sq(&small);
        self_sq_frob.add(f2);
        self_fourth.add(f2); // tr((Xi Xi')^2) = ||Xi Xi'||^2 = ||Xi' Xi||^2

        // third-power pair sum via W_i = Xi Xi' Xi against N*Xbar - Xi
        let w = if on_rows {
            small.dot(&x)
        } else {
            x.dot(&small)
        };
        let against = n as f64 * frob_dot(&w, &xbar) - view_dot(&w.view(), &x);
        pair_third.add(against);

        if on_rows {
            let ddt = d.dot(&d.t());
            let dxt = d.dot(&x.t());
            centered_mixed.add(frob_dot(&ddt, &small));
            centered_fourth.add(frob_sq(&ddt));
            centered_gram.add(frob_sq(&dxt)); // tr(D X' X D') = ||D X'||^2
            centered_twist.add(trace_of_square(&dxt)); // tr(X D' X D') = tr((D X')^2)
        } else {
            let dtd = d.t().dot(&d);
            let dtx = d.t().dot(&x);
            centered_mixed.add(frob_sq(&dtx)); // tr(D D' X X') = ||D' X||^2
            centered_fourth.add(frob_sq(&dtd));
            centered_gram.add(frob_dot(&small, &dtd)); // tr(X' X D' D)
            centered_twist.add(trace_of_square(&dtx)); // tr((D' X)^2)
        }

        k_sum += &small;
    }

    // sum* <S_i, S_j> = ||sum_i S_i||^2 - sum_i ||S_i||^2, valid for both the
    // r-side squares (giving tr(Xi Xi' Xj Xj')) and the c-side squares
    // (giving tr(Xi Xj' Xj Xi')); the other of the two comes from the
    // complementary-side accumulation below.
    let same_side_pairs = frob_sq(&k_sum) - self_sq_frob.total();

    // complementary-side per-index squares, accumulated without storage
    let mut o_sum = Array2::<f64>::zeros(if on_rows { (c, c) } else { (r, r) });
    let mut o_frob = Kahan::default();
    for i in 0..n {
        let x = s.mat(i);
        let other = if on_rows {
            x.t().dot(&x)
        } else {
            x.dot(&x.t())
        };
        o_frob.add(frob_sq(&other));
        o_sum += &other;
    }
    let other_side_pairs = frob_sq(&o_sum) - o_frob.total();

    let (pair_symm, pair_outer) = if on_rows {
        (same_side_pairs, other_side_pairs)
    } else {
        (other_side_pairs, same_side_pairs)
    };

    // the twisted pair sum genuinely needs each pair's cross-product
    let mut twisted = Kahan::default();
    for i in 0..n {
        for j in i + 1..n {
            let b = if on_rows {
                s.mat(i).dot(&s.mat(j).t())
            } else {
                s.mat(i).t().dot(&s.mat(j))
            };
            twisted.add(2.0 * trace_of_square(&b));
        }
    }

    FastSums {
        pair_symm,
        pair_outer,
        pair_twisted: twisted.total(),
        pair_third: pair_third.total(),
        self_fourth: self_fourth.total(),
        centered_mixed: centered_mixed.total(),
        centered_fourth: centered_fourth.total(),
        centered_gram: centered_gram.total(),
        centered_twist: centered_twist.total(),
    }
}

/// T1N: unbiased estimator of tr(S_R) under the tr(S_C) = c scaling.
pub fn t1n(s: &MatrixSample) -> Result<f64> {
    if s.n() < 2 {
        return Err(Error::SampleTooSmall {
            what: "T1N",
            needed: 2,
            got: s.n(),
        });
    }
    let (n, c) = (s.n() as f64, s.cols() as f64);
    let mut self_norm = Kahan::default();
    for i in 0..s.n() {
        let x = s.mat(i);
        self_norm.add(view_dot(&x, &x));
    }
    let xbar = s.mean_matrix();
    let total = n * n * frob_sq(&xbar);
    let cross = total - self_norm.total(); // sum* <Xi, Xj>
    Ok(self_norm.total() / (c * n) - cross / (c * perm(s.n(), 2)))
}

fn require_n4(s: &MatrixSample, what: &'static str) -> Result<()> {
    if s.n() < 4 {
        return Err(Error::SampleTooSmall {
            what,
            needed: 4,
            got: s.n(),
        });
    }
    Ok(())
}

/// T2N by direct enumeration of the order-2/3/4 U-statistics. O(N^4) in the
/// tuple count; intended as an oracle for small N.
pub fn t2n_naive(s: &MatrixSample) -> Result<f64> {
    require_n4(s, "T2N")?;
    let n = s.n();
    let c = s.cols() as f64;
    // precompute all ordered pair products on the smaller side
    let on_rows = s.rows() <= s.cols();
    let mut prod = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = if on_rows {
                s.mat(i).dot(&s.mat(j).t())
            } else {
                s.mat(i).t().dot(&s.mat(j))
            };
            prod.push(p);
        }
    }
    // tr(Xi Xj' Xk Xl') from the stored products: with P[i][j] = Xi Xj' it is
    // tr(P[i][j] P[k][l]); with Q[i][j] = Xi' Xj it is tr(Q[j][k] Q[l][i]).
    let tr4 = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        if on_rows {
            let a = &prod[i * n + j];
            let b = &prod[k * n + l];
            let (sa, sb) = (a.as_slice().unwrap(), b.as_slice().unwrap());
            let m = a.nrows();
            let mut acc = 0.0;
            for p in 0..m {
                for q in 0..m {
                    acc += sa[p * m + q] * sb[q * m + p];
                }
            }
            acc
        } else {
            let a = &prod[j * n + k];
            let b = &prod[l * n + i];
            let (sa, sb) = (a.as_slice().unwrap(), b.as_slice().unwrap());
            let m = a.nrows();
            let mut acc = 0.0;
            for p in 0..m {
                for q in 0..m {
                    acc += sa[p * m + q] * sb[q * m + p];
                }
            }
            acc
        }
    };

    let mut y2 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                y2.add(tr4(i, i, j, j));
            }
        }
    }
    let mut y4 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && i != k && j != k {
                    y4.add(tr4(i, i, j, k));
                }
            }
        }
    }
    let mut y5 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if i != j && i != k && i != l && j != k && j != l && k != l {
                        y5.add(tr4(i, j, k, l));
                    }
                }
            }
        }
    }
    Ok(
        (y2.total() / perm(n, 2) - 2.0 * y4.total() / perm(n, 3) + y5.total() / perm(n, 4))
            / (c * c),
    )
}

pub(crate) fn t2n_fast_on(s: &MatrixSample, side: ProductSide) -> Result<f64> {
    require_n4(s, "T2N")?;
    let n = s.n();
    let nf = n as f64;
    let c = s.cols() as f64;
    let f = fast_sums(s, side);

    let y4_star =
        nf * nf * f.centered_mixed - (nf - 1.0) * (nf - 1.0) * f.self_fourth - f.pair_symm
            + 2.0 * (nf - 1.0) * f.pair_third;
    let y54_star = nf * nf * f.centered_gram + 2.0 * (nf - 1.0) * f.pair_third
        - (nf - 1.0) * (nf - 1.0) * f.self_fourth
        - f.pair_outer;
    let y55_star = nf * nf * f.centered_twist + 2.0 * (nf - 1.0) * f.pair_third
        - (nf - 1.0) * (nf - 1.0) * f.self_fourth
        - f.pair_twisted;
    let poly = nf * nf - 3.0 * nf + 3.0;
    let y5_star = ((nf - 1.0) * poly * f.self_fourth
        + (2.0 * nf - 3.0) * (f.pair_symm + f.pair_outer + f.pair_twisted)
        + 2.0 * (nf - 3.0) * (y4_star + y54_star + y55_star)
        - 4.0 * poly * f.pair_third
        - nf * nf * nf * f.centered_fourth)
        / 3.0;

    Ok((f.pair_symm / perm(n, 2) - 2.0 * y4_star / perm(n, 3) + y5_star / perm(n, 4)) / (c * c))
}

/// T2N via the O(N^2) star-sum reformulation. Equal to [`t2n_naive`] up to
/// floating-point rounding.
pub fn t2n_fast(s: &MatrixSample) -> Result<f64> {
    t2n_fast_on(s, ProductSide::Auto)
}

/// T2N* by direct enumeration over the pairwise Gram entries. O(N^4) scalar
/// loop; oracle only.
pub fn t2n_star_naive(s: &MatrixSample) -> Result<f64> {
    require_n4(s, "T2N*")?;
    let n = s.n();
    let g = pairwise_gram(s, false);
    let mut s2 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s2.add(g[[i, j]] * g[[i, j]]);
            }
        }
    }
    let mut s3 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if i != j && i != k && j != k {
                    s3.add(g[[i, j]] * g[[i, k]]);
                }
            }
        }
    }
    let mut s4 = Kahan::default();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    if i != j && i != k && i != l && j != k && j != l && k != l {
                        s4.add(g[[i, j]] * g[[k, l]]);
                    }
                }
            }
        }
    }
    Ok(s2.total() / perm(n, 2) - 2.0 * s3.total() / perm(n, 3) + s4.total() / perm(n, 4))
}

/// T2N* via the closed form over the centered Gram matrix G:
/// tr(S) = tr(G)/(N-1), tr(S^2) = ||G||_F^2/(N-1)^2, Q = sum_i G_ii^2/(N-1),
/// T2N* = (N-1)/(N(N-2)(N-3)) [ (N-1)(N-2) tr(S^2) + tr(S)^2 - N Q ].
/// The rc x rc sample covariance S itself is never materialized.
pub fn t2n_star_fast(s: &MatrixSample) -> Result<f64> {
    require_n4(s, "T2N*")?;
    let n = s.n();
    let nf = n as f64;
    let g = pairwise_gram(s, true);
    let mut tr_g = Kahan::default();
    let mut q_sum = Kahan::default();
    let mut frob = Kahan::default();
    for i in 0..n {
        let gii = g[[i, i]];
        tr_g.add(gii);
        q_sum.add(gii * gii);
        for j in 0..n {
            frob.add(g[[i, j]] * g[[i, j]]);
        }
    }
    let tr_s = tr_g.total() / (nf - 1.0);
    let tr_s2 = frob.total() / ((nf - 1.0) * (nf - 1.0));
    let q = q_sum.total() / (nf - 1.0);
    Ok((nf - 1.0) / (nf * (nf - 2.0) * (nf - 3.0))
        * ((nf - 1.0) * (nf - 2.0) * tr_s2 + tr_s * tr_s - nf * q))
}

/// The bundle of estimates a test consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEstimates {
    /// T1N, estimates tr(S_R).
    pub t1: f64,
    /// T2N, estimates tr(S_R^2).
    pub t2: f64,
    /// T2N*, estimates tr(Omega^2) = tr(S_C^2) tr(S_R^2).
    pub t2_star: f64,
    /// T2N*/T2N, estimates tr(S_C^2).
    pub tr_sigma_c2_hat: f64,
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    /// Whether the known-zero-mean shortcut (leading terms only) was used.
    pub centered: bool,
}

/// Compute T1N, T2N (fast path), T2N* (closed form) and tr(S_C^2)-hat.
///
/// With `centered = true` the data are taken to have known mean zero and only
/// the leading term of each estimator is used; n >= 2 then suffices.
pub fn estimate_all(s: &MatrixSample, centered: bool) -> Result<TraceEstimates> {
    let (t1, t2, t2_star) = if centered {
        if s.n() < 2 {
            return Err(Error::SampleTooSmall {
                what: "centered estimators",
                needed: 2,
                got: s.n(),
            });
        }
        let n = s.n();
        let c = s.cols() as f64;
        let g = pairwise_gram(s, false);
        let mut diag = Kahan::default();
        let mut offd_sq = Kahan::default();
        for i in 0..n {
            diag.add(g[[i, i]]);
            for j in 0..n {
                if i != j {
                    offd_sq.add(g[[i, j]] * g[[i, j]]);
                }
            }
        }
        let t1 = diag.total() / (c * n as f64);
        // leading term of T2N: needs tr(Xi Xi' Xj Xj') pair sums
        let f = fast_sums(s, ProductSide::Auto);
        let t2 = f.pair_symm / (c * c * perm(n, 2));
        let t2_star = offd_sq.total() / perm(n, 2);
        (t1, t2, t2_star)
    } else {
        (t1n(s)?, t2n_fast(s)?, t2n_star_fast(s)?)
    };

    if t2 <= 0.0 {
        return Err(Error::DegenerateSample {
            estimator: "T2N",
            value: t2,
        });
    }
    if t2_star <= 0.0 {
        return Err(Error::DegenerateSample {
            estimator: "T2N*",
            value: t2_star,
        });
    }
    Ok(TraceEstimates {
        t1,
        t2,
        t2_star,
        tr_sigma_c2_hat: t2_star / t2,
        n: s.n(),
        rows: s.rows(),
        cols: s.cols(),
        centered,
    })
}

/// Sample row covariance (1/((N-1)c)) sum_i (Xi - Xbar)(Xi - Xbar)',
/// unbiased for S_R under the tr(S_C) = c constraint. The r x r orientation
/// is the dimensionally consistent one for a row covariance.
pub fn sample_row_covariance(s: &MatrixSample) -> Result<SymMatrix> {
    if s.n() < 2 {
        return Err(Error::SampleTooSmall {
            what: "sample row covariance",
            needed: 2,
            got: s.n(),
        });
    }
    let xbar = s.mean_matrix();
    let mut acc = Array2::<f64>::zeros((s.rows(), s.rows()));
    for i in 0..s.n() {
        let d = &s.mat(i) - &xbar;
        acc += &d.dot(&d.t());
    }
    acc /= (s.n() - 1) as f64 * s.cols() as f64;
    SymMatrix::new(acc)
}

/// T1N with the star normalization: (1/N) sum_i Ri'Ri - (1/P(N,2)) sum* Ri'Rj,
/// which estimates tr(S_R) tr(S_C*) for the unscaled column covariance S_C*.
/// Used by the known-covariance test's scale estimator; equals c * T1N.
pub fn t1n_star(s: &MatrixSample, centered: bool) -> Result<f64> {
    if centered {
        if s.n() < 1 {
            return Err(Error::SampleTooSmall {
                what: "T1N*",
                needed: 1,
                got: s.n(),
            });
        }
        let mut diag = Kahan::default();
        for i in 0..s.n() {
            let x = s.mat(i);
            diag.add(view_dot(&x, &x));
        }
        Ok(diag.total() / s.n() as f64)
    } else {
        Ok(s.cols() as f64 * t1n(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_from(n: usize, r: usize, c: usize, data: Vec<f64>) -> MatrixSample {
        MatrixSample::new(n, r, c, data).unwrap()
    }

    /// Deterministic pseudo-random entries, heavy-ish tails.
    fn pseudo_sample(seed: u64, n: usize, r: usize, c: usize) -> MatrixSample {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let v = 2.0 * u - 1.0;
            v * v * v * 5.0 + v
        };
        let data = (0..n * r * c).map(|_| next()).collect();
        sample_from(n, r, c, data)
    }

    #[test]
    fn falling_factorial_values() {
        assert_eq!(FallingFactorial::new(5, 0).unwrap().value(), 1);
        assert_eq!(FallingFactorial::new(5, 2).unwrap().value(), 20);
        assert_eq!(FallingFactorial::new(10, 4).unwrap().value(), 5040);
        assert_eq!(
            FallingFactorial::new(1_000_000, 4).unwrap().value(),
            1_000_000u128 * 999_999 * 999_998 * 999_997
        );
        assert!(FallingFactorial::new(3, 4).is_err());
        assert!(FallingFactorial::new(10, 5).is_err());
    }

    #[test]
    fn t1n_identical_matrices_is_zero() {
        let s = sample_from(3, 2, 2, [1.5, -2.0, 0.5, 3.0].repeat(3));
        assert!(t1n(&s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn t1n_two_scalar_points() {
        // X1 = [[1]], X2 = [[-1]]: Y1N = 1, Y3N = -1, T1N = 2
        let s = sample_from(2, 1, 1, vec![1.0, -1.0]);
        assert!((t1n(&s).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn t1n_needs_two() {
        let s = sample_from(1, 1, 1, vec![1.0]);
        assert!(matches!(t1n(&s), Err(Error::SampleTooSmall { .. })));
    }

    #[test]
    fn t2n_zero_sample() {
        let s = sample_from(5, 2, 3, vec![0.0; 30]);
        assert_eq!(t2n_naive(&s).unwrap(), 0.0);
        assert_eq!(t2n_fast(&s).unwrap(), 0.0);
        assert_eq!(t2n_star_naive(&s).unwrap(), 0.0);
        assert_eq!(t2n_star_fast(&s).unwrap(), 0.0);
    }

    /// Independent scalar enumeration for r = c = 1, written directly from
    /// the definitional sums over distinct tuples.
    fn scalar_t2n(xs: &[f64]) -> f64 {
        let n = xs.len();
        let (mut y2, mut y4, mut y5) = (0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                y2 += xs[i] * xs[i] * xs[j] * xs[j];
                for k in 0..n {
                    if k == i || k == j {
                        continue;
                    }
                    y4 += xs[i] * xs[i] * xs[j] * xs[k];
                    for l in 0..n {
                        if l == i || l == j || l == k {
                            continue;
                        }
                        y5 += xs[i] * xs[j] * xs[k] * xs[l];
                    }
                }
            }
        }
        y2 / perm(n, 2) - 2.0 * y4 / perm(n, 3) + y5 / perm(n, 4)
    }

    fn scalar_t2n_star(xs: &[f64]) -> f64 {
        // for scalars Ri'Rj = xi*xj, so the sums coincide with scalar_t2n
        scalar_t2n(xs)
    }

    #[test]
    fn t2n_matches_scalar_enumeration() {
        let xs = [0.7, -1.3, 2.1, 0.4];
        let s = sample_from(4, 1, 1, xs.to_vec());
        let want = scalar_t2n(&xs);
        assert!((t2n_naive(&s).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
        assert!((t2n_fast(&s).unwrap() - want).abs() <= 1e-10 * want.abs().max(1.0));
        let want_star = scalar_t2n_star(&xs);
        assert!(
            (t2n_star_naive(&s).unwrap() - want_star).abs() <= 1e-12 * want_star.abs().max(1.0)
        );
        assert!((t2n_star_fast(&s).unwrap() - want_star).abs() <= 1e-10 * want_star.abs().max(1.0));
    }

    #[test]
    fn fast_equals_naive_spot_checks() {
        for (seed, n, r, c) in [
            (1u64, 4usize, 3usize, 2usize),
            (2, 6, 3, 2),
            (3, 6, 2, 3),
            (4, 5, 1, 4),
            (5, 7, 4, 4),
            (6, 8, 5, 1),
        ] {
            let s = pseudo_sample(seed, n, r, c);
            let naive = t2n_naive(&s).unwrap();
            let fast = t2n_fast(&s).unwrap();
            assert!(
                (fast - naive).abs() <= 1e-10 * naive.abs().max(1.0),
                "t2n mismatch at seed {seed}: naive {naive}, fast {fast}"
            );
            let naive_s = t2n_star_naive(&s).unwrap();
            let fast_s = t2n_star_fast(&s).unwrap();
            assert!(
                (fast_s - naive_s).abs() <= 1e-10 * naive_s.abs().max(1.0),
                "t2n* mismatch at seed {seed}: naive {naive_s}, fast {fast_s}"
            );
        }
    }

    #[test]
    fn cyclic_sides_agree() {
        for (seed, n, r, c) in [
            (11u64, 6usize, 4usize, 2usize),
            (12, 6, 2, 5),
            (13, 5, 3, 3),
        ] {
            let s = pseudo_sample(seed, n, r, c);
            let rows = t2n_fast_on(&s, ProductSide::Rows).unwrap();
            let cols = t2n_fast_on(&s, ProductSide::Cols).unwrap();
            assert!(
                (rows - cols).abs() <= 1e-12 * rows.abs().max(1.0),
                "side mismatch: rows {rows} cols {cols}"
            );
        }
    }

    #[test]
    fn t1n_equals_both_explicit_trace_routes() {
        let s = pseudo_sample(14, 5, 3, 4);
        let n = 5usize;
        let c = 4.0;
        // r-side: tr(Xi Xj'); c-side: tr(Xi' Xj) — evaluate both explicitly
        let mut per_side = [0.0_f64; 2];
        for (side, acc) in per_side.iter_mut().enumerate() {
            let mut y1 = 0.0;
            let mut y3 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let prod = if side == 0 {
                        s.mat(i).dot(&s.mat(j).t()).diag().sum()
                    } else {
                        s.mat(i).t().dot(&s.mat(j)).diag().sum()
                    };
                    if i == j {
                        y1 += prod;
                    } else {
                        y3 += prod;
                    }
                }
            }
            *acc = y1 / (c * n as f64) - y3 / (c * perm(n, 2));
        }
        let fast = t1n(&s).unwrap();
        assert!((per_side[0] - per_side[1]).abs() <= 1e-12 * per_side[0].abs().max(1.0));
        assert!((fast - per_side[0]).abs() <= 1e-12 * fast.abs().max(1.0));
    }

    #[test]
    fn location_invariance_exact_shift() {
        let s = pseudo_sample(21, 6, 3, 2);
        let shift: Vec<f64> = (0..6).map(|k| 3.0 + k as f64).collect();
        let shifted: Vec<f64> = s
            .raw()
            .iter()
            .enumerate()
            .map(|(pos, &v)| v + shift[pos % 6])
            .collect();
        let s2 = sample_from(6, 3, 2, shifted);
        type Estimator = fn(&MatrixSample) -> Result<f64>;
        let cases: [(Estimator, &str); 5] = [
            (t1n, "t1n"),
            (t2n_naive, "t2n_naive"),
            (t2n_fast, "t2n_fast"),
            (t2n_star_naive, "t2n_star_naive"),
            (t2n_star_fast, "t2n_star_fast"),
        ];
        for (f, name) in cases {
            let a = f(&s).unwrap();
            let b = f(&s2).unwrap();
            assert!(
                (a - b).abs() <= 1e-9 * a.abs().max(1.0),
                "{name} not location invariant: {a} vs {b}"
            );
        }
    }

    #[test]
    fn scaling_covariance() {
        let s = pseudo_sample(31, 5, 2, 3);
        let t = 1.7_f64;
        let scaled: Vec<f64> = s.raw().iter().map(|&v| t * v).collect();
        let s2 = sample_from(5, 2, 3, scaled);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1e-300);
        assert!(rel(t.powi(2) * t1n(&s).unwrap(), t1n(&s2).unwrap()) <= 1e-10);
        assert!(rel(t.powi(4) * t2n_fast(&s).unwrap(), t2n_fast(&s2).unwrap()) <= 1e-10);
        assert!(
            rel(
                t.powi(4) * t2n_star_fast(&s).unwrap(),
                t2n_star_fast(&s2).unwrap()
            ) <= 1e-10
        );
        let e1 = estimate_all(&s, false).unwrap();
        let e2 = estimate_all(&s2, false).unwrap();
        assert!(rel(e1.tr_sigma_c2_hat, e2.tr_sigma_c2_hat) <= 1e-10);
    }

    #[test]
    fn himeno_form_zero_for_equal_matrices() {
        let s = sample_from(5, 2, 2, [1.0, 2.0, 3.0, 4.0].repeat(5));
        assert_eq!(t2n_star_fast(&s).unwrap(), 0.0);
    }

    #[test]
    fn estimate_all_flags_degenerate() {
        let s = sample_from(5, 2, 2, vec![0.0; 20]);
        assert!(matches!(
            estimate_all(&s, false),
            Err(Error::DegenerateSample { .. })
        ));
    }

    #[test]
    fn estimate_all_ratio_field() {
        let s = pseudo_sample(41, 6, 2, 3);
        let e = estimate_all(&s, false).unwrap();
        assert_eq!(e.tr_sigma_c2_hat, e.t2_star / e.t2);
        assert_eq!((e.n, e.rows, e.cols), (6, 2, 3));
    }

    #[test]
    fn centered_path_small_n() {
        let s = pseudo_sample(43, 2, 2, 2);
        let e = estimate_all(&s, true).unwrap();
        assert!(e.t2 > 0.0 && e.t2_star > 0.0);
        assert!(matches!(
            estimate_all(&s, false),
            Err(Error::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn row_covariance_examples() {
        let s = sample_from(3, 2, 2, [1.0, 2.0, 3.0, 4.0].repeat(3));
        let cov = sample_row_covariance(&s).unwrap();
        assert_eq!(cov.view().iter().map(|x| x.abs()).sum::<f64>(), 0.0);

        let (a, b) = (2.5_f64, -0.5_f64);
        let s = sample_from(2, 1, 1, vec![a, b]);
        let cov = sample_row_covariance(&s).unwrap();
        assert!((cov.view()[[0, 0]] - (a - b) * (a - b) / 2.0).abs() < 1e-14);

        let one = sample_from(1, 1, 1, vec![1.0]);
        assert!(sample_row_covariance(&one).is_err());
    }

    #[test]
    fn t1n_star_is_c_times_t1n() {
        let s = pseudo_sample(51, 5, 2, 3);
        let a = t1n_star(&s, false).unwrap();
        let b = 3.0 * t1n(&s).unwrap();
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

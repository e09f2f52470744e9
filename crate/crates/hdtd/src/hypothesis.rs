//! The sphericity and identity tests for the row (or column) covariance
//! matrix, the known-covariance reduction, and the analytic power lower
//! bounds.
//!
//! Both test statistics are one-sided upper-tail and asymptotically standard
//! normal under their nulls:
//!
//! * sphericity: `U = (r T2N / T1N^2 - 1) / sigma_u0_hat`
//! * identity:   `V = (T2N/r - 2 T1N/r + 1) / sigma_u0_hat`
//!
//! where `sigma_u0_hat = (2/N) (T2N*/T2N) / c^2` estimates the common
//! null standard deviation of the unnormalized statistics. Column tests
//! transpose the sample first, swapping the roles of r and c throughout.

use crate::error::{Error, Result};
use crate::estimators::{estimate_all, t1n_star, TraceEstimates};
use crate::matrix::{MatrixSample, SymMatrix, DEFAULT_EIG_TOL};
use crate::normal::{std_normal_sf, std_normal_upper_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullKind {
    /// H0: S_R = sigma^2 I for an unknown sigma^2 > 0.
    Sphericity,
    /// H0: S_R = I (meaningful under the tr(S_C) = c scaling).
    Identity,
    /// H0: S_R = S_R0 for a known positive definite S_R0.
    KnownCovariance,
}

/// How the known-covariance test handles the scale of the unscaled column
/// covariance: either its trace is trusted to equal c, or it is estimated
/// and divided out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    ColumnTraceKnown,
    EstimateScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Rows,
    Columns,
}

/// Everything that parameterizes one hypothesis test run.
#[derive(Debug, Clone)]
pub struct NullSpec {
    pub kind: NullKind,
    /// Required exactly when `kind == KnownCovariance`; its dimension must
    /// equal r for row tests and c for column tests.
    pub sigma_r0: Option<SymMatrix>,
    pub scale_mode: ScaleMode,
    pub target: Target,
    pub alpha: f64,
    pub centered: bool,
}

impl NullSpec {
    pub fn sphericity(alpha: f64) -> Self {
        Self {
            kind: NullKind::Sphericity,
            sigma_r0: None,
            scale_mode: ScaleMode::ColumnTraceKnown,
            target: Target::Rows,
            alpha,
            centered: false,
        }
    }

    pub fn identity(alpha: f64) -> Self {
        Self {
            kind: NullKind::Identity,
            ..Self::sphericity(alpha)
        }
    }

    pub fn known(sigma_r0: SymMatrix, scale_mode: ScaleMode, alpha: f64) -> Self {
        Self {
            kind: NullKind::KnownCovariance,
            sigma_r0: Some(sigma_r0),
            scale_mode,
            ..Self::sphericity(alpha)
        }
    }

    pub fn on_columns(mut self) -> Self {
        self.target = Target::Columns;
        self
    }

    pub fn centered(mut self, yes: bool) -> Self {
        self.centered = yes;
        self
    }

    fn validate(&self, expected_kind: NullKind) -> Result<()> {
        if self.kind != expected_kind {
            return Err(Error::InvalidConfig(format!(
                "null kind {:?} passed to the {:?} test",
                self.kind, expected_kind
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        match (self.kind, &self.sigma_r0) {
            (NullKind::KnownCovariance, None) => Err(Error::InvalidConfig(
                "known-covariance test requires sigma_r0".into(),
            )),
            (NullKind::KnownCovariance, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::InvalidConfig(
                "sigma_r0 is only meaningful for the known-covariance test".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Result of a single test run.
#[derive(Debug, Clone)]
pub struct TestOutcome {
    pub statistic: f64,
    /// One-sided upper tail: 1 - Phi(statistic).
    pub p_value: f64,
    /// Rejection happens exactly when `statistic >= z_alpha` (ties reject).
    pub reject: bool,
    pub z_alpha: f64,
    pub sigma_u0_hat: f64,
    /// Estimates of the (possibly transformed and transposed) sample the
    /// statistic was computed from.
    pub estimates: TraceEstimates,
    pub null: NullSpec,
    /// Scale estimate k for `KnownCovariance` with `EstimateScale`.
    pub k_hat: Option<f64>,
}

/// sigma_u0_hat = (2/N) tr(S_C^2)-hat / c^2, the estimated null standard
/// deviation shared by both statistics.
pub fn sigma_u0_hat(est: &TraceEstimates) -> Result<f64> {
    if est.t2 <= 0.0 {
        return Err(Error::DegenerateSample {
            estimator: "T2N",
            value: est.t2,
        });
    }
    if est.t2_star <= 0.0 {
        return Err(Error::DegenerateSample {
            estimator: "T2N*",
            value: est.t2_star,
        });
    }
    let c = est.cols as f64;
    Ok((2.0 / est.n as f64) * (est.t2_star / est.t2) / (c * c))
}

enum Statistic {
    Sphericity,
    Identity,
}

fn run_statistic(
    working: &MatrixSample,
    null: &NullSpec,
    which: Statistic,
    k_hat: Option<f64>,
) -> Result<TestOutcome> {
    let est = estimate_all(working, null.centered)?;
    let sigma = sigma_u0_hat(&est)?;
    let r = working.rows() as f64;
    let raw = match which {
        Statistic::Sphericity => {
            if est.t1 == 0.0 {
                return Err(Error::DegenerateSample {
                    estimator: "T1N",
                    value: 0.0,
                });
            }
            r * est.t2 / (est.t1 * est.t1) - 1.0
        }
        Statistic::Identity => est.t2 / r - 2.0 * est.t1 / r + 1.0,
    };
    let statistic = raw / sigma;
    let z_alpha = std_normal_upper_quantile(null.alpha);
    Ok(TestOutcome {
        statistic,
        p_value: std_normal_sf(statistic),
        reject: statistic >= z_alpha,
        z_alpha,
        sigma_u0_hat: sigma,
        estimates: est,
        null: null.clone(),
        k_hat,
    })
}

fn oriented(s: &MatrixSample, target: Target) -> std::borrow::Cow<'_, MatrixSample> {
    match target {
        Target::Rows => std::borrow::Cow::Borrowed(s),
        Target::Columns => std::borrow::Cow::Owned(s.transposed()),
    }
}

/// Test H0: S_R = sigma^2 I against a general alternative.
pub fn sphericity_test(s: &MatrixSample, null: &NullSpec) -> Result<TestOutcome> {
    null.validate(NullKind::Sphericity)?;
    let w = oriented(s, null.target);
    run_statistic(&w, null, Statistic::Sphericity, None)
}

/// Test H0: S_R = I against a general alternative.
pub fn identity_test(s: &MatrixSample, null: &NullSpec) -> Result<TestOutcome> {
    null.validate(NullKind::Identity)?;
    let w = oriented(s, null.target);
    run_statistic(&w, null, Statistic::Identity, None)
}

/// Test H0: S_R = S_R0 by reduction to the identity test on transformed
/// matrices `S_R0^{-1/2} X_i`.
///
/// `ColumnTraceKnown` trusts that the unscaled column covariance has trace
/// equal to its dimension (true for correlation matrices). `EstimateScale`
/// estimates k = tr(S_C*)-hat = T1N*/tr(S_R0) from the untransformed sample
/// and rescales the transformed matrices by sqrt(k/c), restoring the
/// tr(S_C) = c convention the identity test is calibrated for.
pub fn known_covariance_test(s: &MatrixSample, null: &NullSpec) -> Result<TestOutcome> {
    null.validate(NullKind::KnownCovariance)?;
    let w = oriented(s, null.target);
    let sigma_r0 = null.sigma_r0.as_ref().expect("validated above");
    if sigma_r0.dim() != w.rows() {
        return Err(Error::DimensionMismatch(format!(
            "sigma_r0 is {}x{} but the {} dimension under test is {}",
            sigma_r0.dim(),
            sigma_r0.dim(),
            match null.target {
                Target::Rows => "row",
                Target::Columns => "column",
            },
            w.rows()
        )));
    }
    let inv_root = sigma_r0.sym_inv_sqrt(DEFAULT_EIG_TOL)?;

    let k_hat = match null.scale_mode {
        ScaleMode::ColumnTraceKnown => None,
        ScaleMode::EstimateScale => {
            let t1s = t1n_star(&w, null.centered)?;
            let k = t1s / sigma_r0.trace();
            if k <= 0.0 {
                return Err(Error::NonpositiveScale(k));
            }
            Some(k)
        }
    };
    let scale = match k_hat {
        Some(k) => (k / w.cols() as f64).sqrt(),
        None => 1.0,
    };

    let mut mats = Vec::with_capacity(w.n());
    for i in 0..w.n() {
        let y = inv_root.view().dot(&w.mat(i));
        mats.push(if scale == 1.0 { y } else { y / scale });
    }
    let transformed = MatrixSample::from_matrices(&mats)?;
    run_statistic(&transformed, null, Statistic::Identity, k_hat)
}

/// Inputs for the analytic lower bounds on the power functions. `sigma_c`
/// must carry the tr(S_C) = c normalization; `b` is the kurtosis offset of
/// the innovation law (>= -2).
#[derive(Debug, Clone)]
pub struct PowerBoundInputs {
    pub sigma_r: SymMatrix,
    pub sigma_c: SymMatrix,
    pub n: usize,
    pub b: f64,
    pub alpha: f64,
}

impl PowerBoundInputs {
    fn validate(&self) -> Result<(f64, f64)> {
        if self.b < -2.0 {
            return Err(Error::InvalidConfig(format!(
                "kurtosis offset B must be >= -2, got {}",
                self.b
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        let c = self.sigma_c.dim() as f64;
        let tr_c = self.sigma_c.trace();
        if (tr_c - c).abs() > 1e-10 * c {
            return Err(Error::InvalidConfig(format!(
                "sigma_c must satisfy tr = dim (trace-normalized), got tr = {tr_c} for dim {c}"
            )));
        }
        let psi = 2.0 + self.b.max(0.0);
        let col_term = (c * c / self.sigma_c.trace_sq()).sqrt();
        Ok((psi, col_term))
    }
}

/// Lower bound on the power of the sphericity test at a fixed alternative.
pub fn power_bound_sphericity(inp: &PowerBoundInputs) -> Result<f64> {
    let (psi, col_term) = inp.validate()?;
    let r = inp.sigma_r.dim() as f64;
    let n = inp.n as f64;
    let tr = inp.sigma_r.trace();
    let tr2 = inp.sigma_r.trace_sq();
    let xi1 = 1.0 - tr * tr / (r * tr2);
    if xi1 < 1e-12 {
        return Err(Error::NullAlternative(
            "sigma_r is proportional to the identity (xi_1N ~ 0)",
        ));
    }
    // xi_2N = tr[(S_R^2/tr(S_R^2) - S_R/tr(S_R))^2]
    let sq = inp.sigma_r.view().dot(&inp.sigma_r.view());
    let m = &sq / tr2 - &(inp.sigma_r.view().to_owned() / tr);
    let xi2: f64 = m.iter().map(|x| x * x).sum();

    let z = std_normal_upper_quantile(inp.alpha);
    let denom = 2.0 * (1.0 / (n * n * xi1 * xi1) + psi * xi2 / (n * xi1 * xi1)).sqrt();
    let arg = -(1.0 - xi1) / (n * xi1) * z + col_term / denom;
    Ok(crate::normal::std_normal_cdf(arg))
}

/// Lower bound on the power of the identity test at a fixed alternative.
pub fn power_bound_identity(inp: &PowerBoundInputs) -> Result<f64> {
    let (psi, col_term) = inp.validate()?;
    let r = inp.sigma_r.dim() as f64;
    let n = inp.n as f64;
    let tr2 = inp.sigma_r.trace_sq();
    // tr[(S_R - I)^2]
    let mut dist = 0.0;
    for i in 0..inp.sigma_r.dim() {
        for j in 0..inp.sigma_r.dim() {
            let v = inp.sigma_r.view()[[i, j]] - if i == j { 1.0 } else { 0.0 };
            dist += v * v;
        }
    }
    if dist < 1e-12 {
        return Err(Error::NullAlternative("sigma_r equals the identity"));
    }
    let xi3 = tr2 / (n * dist);
    let z = std_normal_upper_quantile(inp.alpha);
    let arg = -(r / tr2) * z + col_term / (2.0 * (xi3 * xi3 + psi * xi3).sqrt());
    Ok(crate::normal::std_normal_cdf(arg))
}

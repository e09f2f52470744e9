//! Generation of transposable samples X_i = S_R^{1/2} Z_i S_C^{1/2} + M with
//! configurable covariance structures and innovation laws.
//!
//! Randomness is counter-based: every (seed, replicate, matrix) triple keys
//! its own ChaCha stream, so datasets are bit-reproducible no matter how the
//! surrounding Monte Carlo run is scheduled or threaded.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{MatrixSample, SymMatrix, DEFAULT_EIG_TOL};

/// Covariance structures used by the simulation study plus plain scaled
/// identities for scale alternatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovConfig {
    Identity {
        dim: usize,
    },
    ScaledIdentity {
        dim: usize,
        sigma2: f64,
    },
    /// First floor(dim/8) diagonal entries 2, the rest 1.
    DiagonalHeteroskedastic {
        dim: usize,
    },
    /// v I + rho 1 1'.
    CompoundSymmetry {
        dim: usize,
        v: f64,
        rho: f64,
    },
    /// Unit diagonal, `rho` on the first off-diagonals.
    Tridiagonal {
        dim: usize,
        rho: f64,
    },
    /// Entries rho^|a-b|.
    Ar1 {
        dim: usize,
        rho: f64,
    },
}

impl CovConfig {
    pub fn dim(&self) -> usize {
        match *self {
            CovConfig::Identity { dim }
            | CovConfig::ScaledIdentity { dim, .. }
            | CovConfig::DiagonalHeteroskedastic { dim }
            | CovConfig::CompoundSymmetry { dim, .. }
            | CovConfig::Tridiagonal { dim, .. }
            | CovConfig::Ar1 { dim, .. } => dim,
        }
    }
}

/// Build the dense symmetric matrix for a covariance configuration.
pub fn build_cov(cfg: &CovConfig) -> Result<SymMatrix> {
    let dim = cfg.dim();
    if dim == 0 {
        return Err(Error::InvalidConfig(
            "covariance dimension must be positive".into(),
        ));
    }
    match *cfg {
        CovConfig::Identity { .. } => Ok(SymMatrix::identity(dim)),
        CovConfig::ScaledIdentity { sigma2, .. } => {
            if sigma2 <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "scaled identity requires sigma2 > 0, got {sigma2}"
                )));
            }
            Ok(SymMatrix::from_diag(&vec![sigma2; dim]))
        }
        CovConfig::DiagonalHeteroskedastic { .. } => {
            let mut d = vec![1.0; dim];
            for x in d.iter_mut().take(dim / 8) {
                *x = 2.0;
            }
            Ok(SymMatrix::from_diag(&d))
        }
        CovConfig::CompoundSymmetry { v, rho, .. } => {
            // eigenvalues are v (dim-1 times) and v + dim*rho
            if v <= 0.0 || v + dim as f64 * rho <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "compound symmetry (v = {v}, rho = {rho}) is not positive definite at dim {dim}"
                )));
            }
            let mut m = Array2::from_elem((dim, dim), rho);
            for i in 0..dim {
                m[[i, i]] += v;
            }
            SymMatrix::new(m)
        }
        CovConfig::Tridiagonal { rho, .. } => {
            if rho.abs() >= 0.5 {
                return Err(Error::InvalidConfig(format!(
                    "tridiagonal correlation requires |rho| < 0.5 for positive definiteness, got {rho}"
                )));
            }
            let mut m = Array2::zeros((dim, dim));
            for i in 0..dim {
                m[[i, i]] = 1.0;
                if i + 1 < dim {
                    m[[i, i + 1]] = rho;
                    m[[i + 1, i]] = rho;
                }
            }
            SymMatrix::new(m)
        }
        CovConfig::Ar1 { rho, .. } => {
            if rho.abs() >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "AR(1) requires |rho| < 1, got {rho}"
                )));
            }
            let mut m = Array2::zeros((dim, dim));
            for i in 0..dim {
                for j in 0..dim {
                    m[[i, j]] = rho.powi((i as i32 - j as i32).abs());
                }
            }
            SymMatrix::new(m)
        }
    }
}

/// Rescale so the trace equals the dimension (the identifiability constraint
/// for the column covariance).
pub fn normalize_trace(a: &SymMatrix) -> Result<SymMatrix> {
    let tr = a.trace();
    if tr <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "trace normalization requires tr > 0, got {tr}"
        )));
    }
    Ok(a.scale(a.dim() as f64 / tr))
}

/// Innovation law for the entries of Z_i: mean 0, variance 1 by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnovationLaw {
    Gaussian,
    /// (G - shape/rate) / (sqrt(shape)/rate) for G ~ Gamma(shape, rate).
    StandardizedGamma {
        shape: f64,
        rate: f64,
    },
}

impl InnovationLaw {
    /// The paper's non-normal scenario: Gamma(4, 0.5) standardized as
    /// (Z* - 8)/4.
    pub fn standardized_gamma_default() -> Self {
        InnovationLaw::StandardizedGamma {
            shape: 4.0,
            rate: 0.5,
        }
    }

    /// Kurtosis offset B = E[Z^4] - 3: zero for the gaussian law, 6/shape
    /// for the standardized gamma.
    pub fn kurtosis_offset(&self) -> f64 {
        match *self {
            InnovationLaw::Gaussian => 0.0,
            InnovationLaw::StandardizedGamma { shape, .. } => 6.0 / shape,
        }
    }

    fn validate(&self) -> Result<()> {
        if let InnovationLaw::StandardizedGamma { shape, rate } = *self {
            if shape < 1.0 || !shape.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "gamma innovations require shape >= 1, got {shape}"
                )));
            }
            if rate <= 0.0 || !rate.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "gamma innovations require rate > 0, got {rate}"
                )));
            }
        }
        Ok(())
    }
}

/// Generative description of one dataset draw.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    /// Mean matrix M; `None` means zero.
    pub mean: Option<Array2<f64>>,
    pub row_cov: CovConfig,
    pub col_cov: CovConfig,
    /// Apply the tr(S_C) = c constraint to the column covariance before
    /// factorization. All of the simulation study's column structures are
    /// correlation matrices, for which this is a no-op.
    pub col_trace_normalize: bool,
    pub law: InnovationLaw,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(n: usize, rows: usize, cols: usize, row_cov: CovConfig, col_cov: CovConfig) -> Self {
        Self {
            n,
            rows,
            cols,
            mean: None,
            row_cov,
            col_cov,
            col_trace_normalize: true,
            law: InnovationLaw::Gaussian,
            seed: 0,
        }
    }

    pub fn with_law(mut self, law: InnovationLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mean(mut self, mean: Array2<f64>) -> Self {
        self.mean = Some(mean);
        self
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a counter (used for per-cell
/// seeds in the Monte Carlo harness).
pub fn derive_seed(seed: u64, counter: u64) -> u64 {
    splitmix(seed ^ splitmix(counter))
}

/// ChaCha stream keyed by (seed, replicate, matrix): scheduling-independent.
fn stream_rng(seed: u64, replicate: u64, matrix: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    let lanes = [
        splitmix(seed),
        splitmix(replicate ^ 0x5851f42d4c957f2d),
        splitmix(matrix ^ 0x14057b7ef767814f),
        0,
    ];
    let mut acc = lanes[0] ^ lanes[1].rotate_left(21) ^ lanes[2].rotate_left(42);
    for chunk in key.chunks_exact_mut(8) {
        acc = splitmix(acc);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// A prepared sampler: covariance roots are factorized once and reused for
/// every replicate drawn from it.
pub struct Sampler {
    n: usize,
    rows: usize,
    cols: usize,
    row_root: Option<Array2<f64>>,
    col_root: Option<Array2<f64>>,
    mean: Option<Array2<f64>>,
    law: InnovationLaw,
    gamma: Option<Gamma<f64>>,
    seed: u64,
}

impl Sampler {
    pub fn prepare(spec: &ModelSpec) -> Result<Self> {
        if spec.n == 0 || spec.rows == 0 || spec.cols == 0 {
            return Err(Error::InvalidConfig(format!(
                "sample dimensions must be positive, got n={}, r={}, c={}",
                spec.n, spec.rows, spec.cols
            )));
        }
        if spec.row_cov.dim() != spec.rows {
            return Err(Error::DimensionMismatch(format!(
                "row covariance has dim {}, expected {}",
                spec.row_cov.dim(),
                spec.rows
            )));
        }
        if spec.col_cov.dim() != spec.cols {
            return Err(Error::DimensionMismatch(format!(
                "column covariance has dim {}, expected {}",
                spec.col_cov.dim(),
                spec.cols
            )));
        }
        if let Some(m) = &spec.mean {
            if m.nrows() != spec.rows || m.ncols() != spec.cols {
                return Err(Error::DimensionMismatch(format!(
                    "mean matrix is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    spec.rows,
                    spec.cols
                )));
            }
        }
        spec.law.validate()?;

        let row_root = match spec.row_cov {
            CovConfig::Identity { .. } => None,
            _ => Some(
                build_cov(&spec.row_cov)?
                    .sym_sqrt(DEFAULT_EIG_TOL)?
                    .into_inner(),
            ),
        };
        let col_root = match spec.col_cov {
            CovConfig::Identity { .. } => None,
            _ => {
                let cov = build_cov(&spec.col_cov)?;
                let cov = if spec.col_trace_normalize {
                    normalize_trace(&cov)?
                } else {
                    cov
                };
                Some(cov.sym_sqrt(DEFAULT_EIG_TOL)?.into_inner())
            }
        };
        let gamma = match spec.law {
            InnovationLaw::StandardizedGamma { shape, rate } => Some(
                Gamma::new(shape, 1.0 / rate)
                    .map_err(|e| Error::InvalidConfig(format!("gamma law: {e}")))?,
            ),
            InnovationLaw::Gaussian => None,
        };
        Ok(Self {
            n: spec.n,
            rows: spec.rows,
            cols: spec.cols,
            row_root,
            col_root,
            mean: spec.mean.clone(),
            law: spec.law,
            gamma,
            seed: spec.seed,
        })
    }

    fn innovations(&self, rng: &mut ChaCha12Rng) -> Array2<f64> {
        let count = self.rows * self.cols;
        let mut buf = Vec::with_capacity(count);
        match self.law {
            InnovationLaw::Gaussian => {
                for _ in 0..count {
                    let z: f64 = rng.sample(StandardNormal);
                    buf.push(z);
                }
            }
            InnovationLaw::StandardizedGamma { shape, rate } => {
                let g = self.gamma.as_ref().expect("prepared in Sampler::prepare");
                let mean = shape / rate;
                let sd = shape.sqrt() / rate;
                for _ in 0..count {
                    buf.push((g.sample(rng) - mean) / sd);
                }
            }
        }
        Array2::from_shape_vec((self.rows, self.cols), buf).expect("length matches")
    }

    /// Draw the dataset for one replicate index. Bitwise deterministic in
    /// (seed, replicate).
    pub fn draw(&self, replicate: u64) -> MatrixSample {
        let per = self.rows * self.cols;
        let mut data = Vec::with_capacity(self.n * per);
        for i in 0..self.n {
            let mut rng = stream_rng(self.seed, replicate, i as u64);
            let z = self.innovations(&mut rng);
            let zc = match &self.col_root {
                Some(ch) => z.dot(ch),
                None => z,
            };
            let mut x = match &self.row_root {
                Some(rh) => rh.dot(&zc),
                None => zc,
            };
            if let Some(m) = &self.mean {
                x += m;
            }
            data.extend(x.iter().copied());
        }
        MatrixSample::new(self.n, self.rows, self.cols, data)
            .expect("generated data are finite by construction")
    }
}

/// Draw a dataset straight from a model description (replicate index 0).
pub fn sample_dataset(spec: &ModelSpec) -> Result<MatrixSample> {
    Ok(Sampler::prepare(spec)?.draw(0))
}

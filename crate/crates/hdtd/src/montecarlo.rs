//! Empirical size and power experiments over grids of
//! (N, r, c, rho, scenario, row configuration), with deterministic
//! parallelism: per-cell seeds derive from (seed, cell index) and every
//! replicate draws from its own counter-based stream, so rates are identical
//! at any thread count.
//!
//! Replicates whose estimators come out degenerate are counted and reported
//! in the cell result rather than dropped; the rejection rate keeps the full
//! replicate count in its denominator.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hypothesis::{identity_test, sphericity_test, NullSpec};
use crate::simulate::{derive_seed, CovConfig, InnovationLaw, ModelSpec, Sampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Sphericity,
    Identity,
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Sphericity => "sphericity",
            TestKind::Identity => "identity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Gaussian,
    Gamma,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Gaussian => "gaussian",
            Scenario::Gamma => "gamma",
        })
    }
}

impl Scenario {
    pub fn law(&self) -> InnovationLaw {
        match self {
            Scenario::Gaussian => InnovationLaw::Gaussian,
            Scenario::Gamma => InnovationLaw::standardized_gamma_default(),
        }
    }
}

/// The four row-covariance configurations of the simulation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum RowConfig {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "diag8")]
    DiagonalHeteroskedastic,
    #[serde(rename = "cs")]
    CompoundSymmetry,
    #[serde(rename = "tridiag")]
    Tridiagonal,
}

impl fmt::Display for RowConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowConfig::Identity => "identity",
            RowConfig::DiagonalHeteroskedastic => "diag8",
            RowConfig::CompoundSymmetry => "cs",
            RowConfig::Tridiagonal => "tridiag",
        })
    }
}

impl RowConfig {
    pub fn cov(&self, dim: usize) -> CovConfig {
        match self {
            RowConfig::Identity => CovConfig::Identity { dim },
            RowConfig::DiagonalHeteroskedastic => CovConfig::DiagonalHeteroskedastic { dim },
            RowConfig::CompoundSymmetry => CovConfig::CompoundSymmetry {
                dim,
                v: 0.9,
                rho: 0.2,
            },
            RowConfig::Tridiagonal => CovConfig::Tridiagonal { dim, rho: 0.1 },
        }
    }
}

/// One grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub test: TestKind,
    pub scenario: Scenario,
    pub row_config: RowConfig,
    pub n: usize,
    pub r: usize,
    pub c: usize,
    pub rho: f64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} N={} r={} c={} rho={}",
            self.test, self.scenario, self.row_config, self.n, self.r, self.c, self.rho
        )
    }
}

/// Empirical result for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub cell: Cell,
    pub alpha: f64,
    pub replicates: u32,
    pub rejections: u32,
    /// Replicates whose estimators were degenerate (reported, not dropped).
    pub degenerate: u32,
    pub wall: Duration,
}

impl CellResult {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replicates as f64
    }

    /// Binomial Monte Carlo standard error sqrt(p(1-p)/reps).
    pub fn mc_se(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.replicates as f64).sqrt()
    }
}

fn model_for(cell: &Cell, seed: u64) -> ModelSpec {
    ModelSpec::new(
        cell.n,
        cell.r,
        cell.c,
        cell.row_config.cov(cell.r),
        CovConfig::Ar1 {
            dim: cell.c,
            rho: cell.rho,
        },
    )
    .with_law(cell.scenario.law())
    .with_seed(seed)
}

/// Run one cell: `replicates` independent datasets, each tested at level
/// `alpha`; returns the rejection proportion. Deterministic in `seed`
/// regardless of thread count.
pub fn run_cell(cell: &Cell, replicates: u32, seed: u64, alpha: f64) -> Result<CellResult> {
    if replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    if cell.n < 4 {
        return Err(Error::InvalidConfig(format!(
            "grid cell needs n >= 4, got n = {}",
            cell.n
        )));
    }
    let start = Instant::now();
    let sampler = Sampler::prepare(&model_for(cell, seed))?;
    let null = match cell.test {
        TestKind::Sphericity => NullSpec::sphericity(alpha),
        TestKind::Identity => NullSpec::identity(alpha),
    };

    let (rejections, degenerate) = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<(u32, u32)> {
            let data = sampler.draw(rep as u64);
            let outcome = match cell.test {
                TestKind::Sphericity => sphericity_test(&data, &null),
                TestKind::Identity => identity_test(&data, &null),
            };
            match outcome {
                Ok(out) => Ok((out.reject as u32, 0)),
                Err(Error::DegenerateSample { .. }) => Ok((0, 1)),
                Err(e) => Err(e),
            }
        })
        .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;

    Ok(CellResult {
        cell: *cell,
        alpha,
        replicates,
        rejections,
        degenerate,
        wall: start.elapsed(),
    })
}

/// A full experiment: the cross product of the grid axes.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub r_values: Vec<usize>,
    pub c_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub test: TestKind,
    pub scenarios: Vec<Scenario>,
    pub row_configs: Vec<RowConfig>,
    pub alpha: f64,
    pub replicates: u32,
    pub seed: u64,
    /// 0 means "use the global default pool".
    pub threads: usize,
}

impl ExperimentConfig {
    /// Cells in deterministic lexicographic order
    /// (scenario, row_config, n, r, c, rho).
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &scenario in &self.scenarios {
            for &row_config in &self.row_configs {
                for &n in &self.n_values {
                    for &r in &self.r_values {
                        for &c in &self.c_values {
                            for &rho in &self.rho_values {
                                out.push(Cell {
                                    test: self.test,
                                    scenario,
                                    row_config,
                                    n,
                                    r,
                                    c,
                                    rho,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() {
            return Err(Error::InvalidConfig(
                "experiment grid is empty; every axis needs at least one value".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidConfig(format!(
                "every grid cell needs n >= 4, got n = {n}"
            )));
        }
        for &rho in &self.rho_values {
            if rho.abs() >= 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "AR(1) column structure needs |rho| < 1, got {rho}"
                )));
            }
        }
        Ok(())
    }

    /// Parse from the TOML configuration format:
    ///
    /// ```toml
    /// [grid]
    /// n = [20, 40]
    /// r = [8]
    /// c = [10]
    /// rho = [0.15, 0.85]
    ///
    /// [test]
    /// kind = "sphericity"
    /// scenarios = ["gaussian", "gamma"]
    /// row_configs = ["identity"]
    ///
    /// [run]
    /// alpha = 0.05
    /// replicates = 1000
    /// seed = 1
    /// threads = 0
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::MalformedInput(format!("config: {e}")))?;
        let run = raw.run.unwrap_or_default();
        let cfg = ExperimentConfig {
            n_values: raw.grid.n,
            r_values: raw.grid.r,
            c_values: raw.grid.c,
            rho_values: raw.grid.rho,
            test: raw.test.kind,
            scenarios: raw.test.scenarios,
            row_configs: raw.test.row_configs,
            alpha: run.alpha.unwrap_or(0.05),
            replicates: run.replicates.unwrap_or(1000),
            seed: run.seed.unwrap_or(0),
            threads: run.threads.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Deserialize)]
struct RawConfig {
    grid: RawGrid,
    test: RawTest,
    run: Option<RawRun>,
}

#[derive(Deserialize)]
struct RawGrid {
    #[serde(default)]
    n: Vec<usize>,
    #[serde(default)]
    r: Vec<usize>,
    #[serde(default)]
    c: Vec<usize>,
    #[serde(default)]
    rho: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTest {
    kind: TestKind,
    #[serde(default)]
    scenarios: Vec<Scenario>,
    #[serde(default)]
    row_configs: Vec<RowConfig>,
}

#[derive(Deserialize, Default)]
struct RawRun {
    alpha: Option<f64>,
    replicates: Option<u32>,
    seed: Option<u64>,
    threads: Option<usize>,
}

/// Run every cell of the grid, invoking `on_cell` as each finishes.
pub fn run_grid_with(
    cfg: &ExperimentConfig,
    mut on_cell: impl FnMut(&CellResult) + Send,
) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let mut body = |results: &mut Vec<CellResult>| -> Result<()> {
        for (idx, cell) in cells.iter().enumerate() {
            let cell_seed = derive_seed(cfg.seed, idx as u64);
            let res = run_cell(cell, cfg.replicates, cell_seed, cfg.alpha)?;
            on_cell(&res);
            results.push(res);
        }
        Ok(())
    };
    let mut results = Vec::with_capacity(cells.len());
    if cfg.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| body(&mut results))?;
    } else {
        body(&mut results)?;
    }
    Ok(results)
}

pub fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    run_grid_with(cfg, |_| {})
}

/// CSV and aligned-text renderings of a result set.
pub struct Summary {
    pub csv: String,
    pub table: String,
}

pub const CSV_HEADER: &str =
    "test,scenario,row_config,N,r,c,rho,alpha,replicates,rejections,rate,mc_se,degenerate_count,wall_ms";

pub fn summarize(results: &[CellResult]) -> Summary {
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for res in results {
        let c = &res.cell;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{},{}\n",
            c.test,
            c.scenario,
            c.row_config,
            c.n,
            c.r,
            c.c,
            c.rho,
            res.alpha,
            res.replicates,
            res.rejections,
            res.rate(),
            res.mc_se(),
            res.degenerate,
            res.wall.as_millis(),
        ));
    }
    Summary {
        csv,
        table: render_table(results),
    }
}

/// Pivot the results the way the paper lays its tables out: one block per
/// (test, row configuration); rows indexed by scenario, N and c; one rate
/// column per (rho, r) pair.
fn render_table(results: &[CellResult]) -> String {
    use std::collections::BTreeSet;

    let mut out = String::new();
    if results.is_empty() {
        out.push_str("(no cells)\n");
        return out;
    }

    let mut blocks: Vec<(TestKind, RowConfig)> = Vec::new();
    for r in results {
        let key = (r.cell.test, r.cell.row_config);
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }

    for (test, row_config) in blocks {
        let subset: Vec<&CellResult> = results
            .iter()
            .filter(|r| r.cell.test == test && r.cell.row_config == row_config)
            .collect();
        let mut columns: BTreeSet<(u64, usize)> = BTreeSet::new();
        let mut rows: BTreeSet<(String, usize, usize)> = BTreeSet::new();
        for r in &subset {
            columns.insert((r.cell.rho.to_bits(), r.cell.r));
            rows.insert((r.cell.scenario.to_string(), r.cell.n, r.cell.c));
        }
        let columns: Vec<(f64, usize)> = {
            let mut v: Vec<(f64, usize)> = columns
                .into_iter()
                .map(|(bits, r)| (f64::from_bits(bits), r))
                .collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };

        out.push_str(&format!("test={test} row_config={row_config}\n"));
        out.push_str(&format!("{:>10} {:>4} {:>4}", "scenario", "N", "c"));
        for (rho, r) in &columns {
            out.push_str(&format!(" {:>14}", format!("rho={rho} r={r}")));
        }
        out.push('\n');
        for (scenario, n, c) in rows {
            out.push_str(&format!("{scenario:>10} {n:>4} {c:>4}"));
            for (rho, r) in &columns {
                let hit = subset.iter().find(|res| {
                    res.cell.scenario.to_string() == scenario
                        && res.cell.n == n
                        && res.cell.c == c
                        && res.cell.rho == *rho
                        && res.cell.r == *r
                });
                match hit {
                    Some(res) => out.push_str(&format!(" {:>14.3}", res.rate())),
                    None => out.push_str(&format!(" {:>14}", "-")),
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

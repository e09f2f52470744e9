//! `hdtd` — covariance hypothesis tests for transposable data files.
//!
//! Subcommands:
//! * `test` — run the sphericity / identity / known-covariance test on a
//!   data file and report text or JSON
//! * `simulate` — write a simulated dataset in the matrix-stack format
//! * `mc` — run a Monte Carlo size/power grid from a TOML config
//!
//! Exit codes: 0 success (whatever the test decision), 2 malformed input or
//! invalid parameters, 3 dimension mismatch, 4 statistical degeneracy.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hdtd::{
    datafile, identity_test, known_covariance_test, sample_dataset, sphericity_test, CovConfig,
    Error, ExperimentConfig, InnovationLaw, MatrixSample, ModelSpec, NullSpec, ScaleMode, Target,
    TestOutcome,
};

#[derive(Parser)]
#[command(
    name = "hdtd",
    version,
    about = "Covariance tests for high-dimensional transposable data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a covariance structure hypothesis on a data file
    Test(TestArgs),
    /// Generate a simulated dataset file
    Simulate(SimulateArgs),
    /// Run a Monte Carlo experiment grid from a config file
    Mc(McArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Row,
    Column,
}

#[derive(Clone, Copy, ValueEnum)]
enum NullArg {
    Sphericity,
    Identity,
    Known,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    /// Trust that the unscaled column covariance has trace c
    KnownTrace,
    /// Estimate the column-trace scale k and divide it out
    Estimate,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Text,
    Json,
}

#[derive(Args)]
struct TestArgs {
    /// Data file: matrix-stack format or long-form CSV
    #[arg(long)]
    input: PathBuf,
    /// Which covariance matrix to test
    #[arg(long, value_enum, default_value_t = TargetArg::Row)]
    target: TargetArg,
    /// Null hypothesis
    #[arg(long, value_enum, default_value_t = NullArg::Sphericity)]
    null: NullArg,
    /// Known covariance matrix as a square CSV (required for --null known)
    #[arg(long)]
    sigma0: Option<PathBuf>,
    /// Scale handling for --null known
    #[arg(long, value_enum, default_value_t = ScaleArg::KnownTrace)]
    scale: ScaleArg,
    /// Significance level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Treat the data as having known mean zero (leading estimator terms only)
    #[arg(long)]
    centered: bool,
    #[arg(long, value_enum, default_value_t = OutputArg::Text)]
    output: OutputArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    c: usize,
    /// identity | diag8 | cs | tridiag | ar1:RHO
    #[arg(long, default_value = "identity")]
    row_cov: String,
    /// identity | diag8 | cs | tridiag | ar1:RHO
    #[arg(long, default_value = "identity")]
    col_cov: String,
    /// gaussian | gamma
    #[arg(long, default_value = "gaussian")]
    law: String,
    /// zero | FILE (CSV matrix of shape r x c)
    #[arg(long, default_value = "zero")]
    mean: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McArgs {
    /// Experiment description (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; 0 = all cores (falls back to HDTD_THREADS, then config)
    #[arg(long)]
    threads: Option<usize>,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Where to write the CSV results
    #[arg(long)]
    out: PathBuf,
    /// Quick mode: 200 replicates per cell
    #[arg(long)]
    fast: bool,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::MalformedInput(_)
        | Error::Io(_)
        | Error::InvalidConfig(_)
        | Error::NonFinite { .. } => 2,
        Error::DimensionMismatch(_) => 3,
        Error::DegenerateSample { .. }
        | Error::NonpositiveScale(_)
        | Error::SampleTooSmall { .. }
        | Error::SingularMatrix { .. }
        | Error::NotPositiveSemiDefinite { .. }
        | Error::NullAlternative(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mc(args) => cmd_mc(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn read_to_string(path: &PathBuf) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Flat JSON report with a stable schema.
#[derive(Serialize)]
struct Report {
    statistic: f64,
    p_value: f64,
    reject: bool,
    alpha: f64,
    null: &'static str,
    target: &'static str,
    n: usize,
    r: usize,
    c: usize,
    tr_sigma_c2_hat: f64,
    k_hat: Option<f64>,
}

fn report(
    out: &TestOutcome,
    null: &'static str,
    target: TargetArg,
    sample: &MatrixSample,
) -> Report {
    Report {
        statistic: out.statistic,
        p_value: out.p_value,
        reject: out.reject,
        alpha: out.null.alpha,
        null,
        target: match target {
            TargetArg::Row => "row",
            TargetArg::Column => "column",
        },
        // dimensions of the input data, not of the transposed working copy
        n: sample.n(),
        r: sample.rows(),
        c: sample.cols(),
        tr_sigma_c2_hat: out.estimates.tr_sigma_c2_hat,
        k_hat: out.k_hat,
    }
}

fn cmd_test(args: TestArgs) -> Result<(), Error> {
    let sample = datafile::read_data(&read_to_string(&args.input)?)?;
    let target = match args.target {
        TargetArg::Row => Target::Rows,
        TargetArg::Column => Target::Columns,
    };
    let (outcome, null_name) = match args.null {
        NullArg::Sphericity => {
            let mut null = NullSpec::sphericity(args.alpha).centered(args.centered);
            null.target = target;
            (sphericity_test(&sample, &null)?, "sphericity")
        }
        NullArg::Identity => {
            let mut null = NullSpec::identity(args.alpha).centered(args.centered);
            null.target = target;
            (identity_test(&sample, &null)?, "identity")
        }
        NullArg::Known => {
            let sigma0_path = args.sigma0.as_ref().ok_or_else(|| {
                Error::InvalidConfig("--null known requires --sigma0 PATH".into())
            })?;
            let sigma0 = datafile::read_square_csv(&read_to_string(sigma0_path)?)?;
            let mode = match args.scale {
                ScaleArg::KnownTrace => ScaleMode::ColumnTraceKnown,
                ScaleArg::Estimate => ScaleMode::EstimateScale,
            };
            let mut null = NullSpec::known(sigma0, mode, args.alpha).centered(args.centered);
            null.target = target;
            (known_covariance_test(&sample, &null)?, "known")
        }
    };

    let rep = report(&outcome, null_name, args.target, &sample);
    match args.output {
        OutputArg::Json => println!(
            "{}",
            serde_json::to_string_pretty(&rep).expect("report serializes")
        ),
        OutputArg::Text => {
            let mut text = String::new();
            let _ = writeln!(text, "null:            {}", rep.null);
            let _ = writeln!(text, "target:          {}", rep.target);
            let _ = writeln!(text, "N, r, c:         {}, {}, {}", rep.n, rep.r, rep.c);
            let _ = writeln!(text, "statistic:       {:.6}", rep.statistic);
            let _ = writeln!(text, "p_value:         {:.6e}", rep.p_value);
            let _ = writeln!(text, "tr_sigma_c2_hat: {:.6}", rep.tr_sigma_c2_hat);
            if let Some(k) = rep.k_hat {
                let _ = writeln!(text, "k_hat:           {k:.6}");
            }
            let _ = writeln!(text, "alpha:           {}", rep.alpha);
            let _ = writeln!(
                text,
                "decision:        {}",
                if rep.reject {
                    "reject"
                } else {
                    "fail to reject"
                }
            );
            print!("{text}");
        }
    }
    Ok(())
}

fn parse_cov(spec: &str, dim: usize) -> Result<CovConfig, Error> {
    let lower = spec.to_ascii_lowercase();
    if let Some(rho_text) = lower.strip_prefix("ar1:") {
        let rho: f64 = rho_text.parse().map_err(|_| {
            Error::InvalidConfig(format!("cannot parse AR(1) parameter '{rho_text}'"))
        })?;
        if rho.abs() >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "AR(1) requires |rho| < 1, got {rho}"
            )));
        }
        return Ok(CovConfig::Ar1 { dim, rho });
    }
    match lower.as_str() {
        "identity" => Ok(CovConfig::Identity { dim }),
        "diag8" => Ok(CovConfig::DiagonalHeteroskedastic { dim }),
        "cs" => Ok(CovConfig::CompoundSymmetry {
            dim,
            v: 0.9,
            rho: 0.2,
        }),
        "tridiag" => Ok(CovConfig::Tridiagonal { dim, rho: 0.1 }),
        other => Err(Error::InvalidConfig(format!(
            "unknown covariance spec '{other}' (expected identity|diag8|cs|tridiag|ar1:RHO)"
        ))),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Error> {
    let row_cov = parse_cov(&args.row_cov, args.r)?;
    let col_cov = parse_cov(&args.col_cov, args.c)?;
    let law = match args.law.to_ascii_lowercase().as_str() {
        "gaussian" => InnovationLaw::Gaussian,
        "gamma" => InnovationLaw::standardized_gamma_default(),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown law '{other}' (expected gaussian|gamma)"
            )))
        }
    };
    let mut spec = ModelSpec::new(args.n, args.r, args.c, row_cov, col_cov)
        .with_law(law)
        .with_seed(args.seed);
    if args.mean != "zero" {
        let mean = datafile::read_matrix_csv(&read_to_string(&PathBuf::from(&args.mean))?)?;
        spec = spec.with_mean(mean);
    }
    let sample = sample_dataset(&spec)?;
    fs::write(&args.out, datafile::write_stack(&sample))
        .map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    Ok(())
}

fn cmd_mc(args: McArgs) -> Result<(), Error> {
    let mut cfg: ExperimentConfig =
        ExperimentConfig::from_toml_str(&read_to_string(&args.config)?)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.fast {
        cfg.replicates = 200;
    }
    cfg.threads = args
        .threads
        .or_else(|| {
            std::env::var("HDTD_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(cfg.threads);

    let total = cfg.cells().len();
    let mut done = 0usize;
    let results = hdtd::run_grid_with(&cfg, |res| {
        done += 1;
        eprintln!(
            "[{done}/{total}] {} -> rate {:.3} (se {:.3}, degenerate {}, {} ms)",
            res.cell,
            res.rate(),
            res.mc_se(),
            res.degenerate,
            res.wall.as_millis()
        );
    })?;
    let summary = hdtd::summarize(&results);
    fs::write(&args.out, &summary.csv)
        .map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    print!("{}", summary.table);
    Ok(())
}

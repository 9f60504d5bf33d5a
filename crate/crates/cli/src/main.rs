//! `fusionspec`: simulate fusion spectra, calibrate and run the ratio test,
//! compute free convolutions and run the verification checks.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 numerical or contract
//! failure, 3 I/O failure.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod measure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fusionspec::inference::DrawModel;
use fusionspec::FusionKind;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] fusionspec::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(fusionspec::Error::Parse(_)) => 1,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fusionspec", version, about = "Kernel sensor-fusion spectra and the eigenvalue-ratio independence test")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed for every random draw.
    #[arg(long, global = true, env = "FUSIONSPEC_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Output file (a directory for `simulate`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = KernelChoice::Gaussian)]
    pub kernel: KernelChoice,
    /// Kernel bandwidth.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub sigma: f64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KernelChoice {
    Gaussian,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelChoice {
    Null,
    Alt,
}

impl From<ModelChoice> for DrawModel {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Null => DrawModel::Null,
            ModelChoice::Alt => DrawModel::Alternative,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StatisticChoice {
    Ncca,
    Ad,
}

impl From<StatisticChoice> for FusionKind {
    fn from(s: StatisticChoice) -> Self {
        match s {
            StatisticChoice::Ncca => FusionKind::Ncca,
            StatisticChoice::Ad => FusionKind::Ad,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConvolutionChoice {
    Mult,
    Add,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one data pair and write the spectrum of n²S_xy and its
    /// imaginary-to-real ratio profile.
    Simulate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        #[arg(long, value_enum, default_value_t = ModelChoice::Null)]
        model: ModelChoice,
        #[arg(long, value_enum, default_value_t = StatisticChoice::Ncca)]
        statistic: StatisticChoice,
        /// Also write the spectra of S1, S2, S3 and Q_xy.
        #[arg(long)]
        emit_chain: bool,
        /// Also write the two data clouds.
        #[arg(long)]
        emit_data: bool,
    },
    /// Calibrate (θ*, L*) on null replicates; writes the table as JSON.
    Calibrate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long = "l0", default_value_t = 80)]
        l0: usize,
        #[arg(long = "b", default_value_t = 1000)]
        b: usize,
        #[arg(long, value_enum, default_value_t = StatisticChoice::Ncca)]
        statistic: StatisticChoice,
    },
    /// Test independence of two data clouds against a calibration table.
    Test {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
    },
    /// Empirical power over several sample sizes; writes CSV.
    Power {
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        #[arg(long, default_value_t = 0.95)]
        alpha: f64,
        #[arg(long = "l0", default_value_t = 80)]
        l0: usize,
        #[arg(long = "b-calib", default_value_t = 1000)]
        b_calib: usize,
        #[arg(long = "b-power", default_value_t = 500)]
        b_power: usize,
        #[arg(long, value_enum, default_value_t = ModelChoice::Alt)]
        model: ModelChoice,
        #[arg(long, value_enum, default_value_t = StatisticChoice::Ncca)]
        statistic: StatisticChoice,
    },
    /// Eigenvalues of a matrix CSV, or of the fusion matrix of two clouds.
    Spectrum {
        #[arg(long, conflicts_with_all = ["x", "y"])]
        matrix: Option<PathBuf>,
        #[arg(long, requires = "y")]
        x: Option<PathBuf>,
        #[arg(long, requires = "x")]
        y: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = StatisticChoice::Ncca)]
        statistic: StatisticChoice,
        /// Multiply the fusion matrix by n².
        #[arg(long)]
        scaled: bool,
    },
    /// Density of μ_a ⊠ μ_b (or μ_a ⊞ μ_b) by Stieltjes inversion.
    Freeconv {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Output grid `lo:hi:k`; defaults to the inversion grid.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 1e-6)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = ConvolutionChoice::Mult)]
        op: ConvolutionChoice,
    },
    /// Verification reports as JSON.
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCheck {
    /// Eigenvalue rigidity of one kernel affinity matrix.
    Rigidity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
    },
    /// Clustering of λ₃..λ_L of n²S_xy at the predicted edge.
    Edge {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p1: usize,
        #[arg(long)]
        p2: usize,
        #[arg(long = "l", default_value_t = 10)]
        l: usize,
        #[arg(long, value_enum, default_value_t = StatisticChoice::Ncca)]
        statistic: StatisticChoice,
    },
    /// Haar Monte-Carlo oracle against the inverted ⊠ density.
    Oracle {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p1: Option<usize>,
        #[arg(long)]
        p2: Option<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Hoffman–Wielandt, Weyl and Lévy checks on random symmetric pairs.
    Inequalities {
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        draws: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))?;
    }
    let common = &cli.common;
    match cli.command {
        Command::Simulate {
            n,
            p1,
            p2,
            model,
            statistic,
            emit_chain,
            emit_data,
        } => commands::simulate(common, n, p1, p2, model.into(), statistic.into(), emit_chain, emit_data),
        Command::Calibrate {
            n,
            p1,
            p2,
            alpha,
            l0,
            b,
            statistic,
        } => commands::calibrate(common, n, p1, p2, alpha, l0, b, statistic.into()),
        Command::Test { x, y, calibration } => commands::test(common, &x, &y, &calibration),
        Command::Power {
            n,
            p1,
            p2,
            alpha,
            l0,
            b_calib,
            b_power,
            model,
            statistic,
        } => {
            let spec = fusionspec::inference::PowerSpec {
                alpha,
                l0,
                b_calib,
                b_power,
                model: model.into(),
                statistic: statistic.into(),
            };
            commands::power(common, &n, p1, p2, &spec)
        }
        Command::Spectrum {
            matrix,
            x,
            y,
            statistic,
            scaled,
        } => commands::spectrum(common, matrix.as_deref(), x.as_deref().zip(y.as_deref()), statistic.into(), scaled),
        Command::Freeconv { a, b, grid, eta, op } => commands::freeconv(common, &a, &b, grid.as_deref(), eta, op),
        Command::Verify { check } => commands::verify(common, check),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fusionspec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

//! `moclust` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure,
//! 4 fit finished without converging (outputs are still written).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use moclust::nullmodel::{SubsetRefit, DEFAULT_WARM_ITERS};
use moclust::simgen::Family;
use moclust::FitConfig;

#[derive(Parser)]
#[command(
    name = "moclust",
    version,
    about = "Matrix-variate normal mixture clustering with outlier trimming"
)]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 1 gives bit-reproducible output.
    #[arg(long, global = true, env = "MOCLUST_THREADS")]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate labeled datasets from one of the simulation designs.
    Simulate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Number of datasets; seeds run seed, seed+1, ...
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Override the number of observations.
        #[arg(long)]
        n: Option<usize>,
        /// Override the number of contaminated observations.
        #[arg(long)]
        contamination: Option<usize>,
    },
    /// Fit a G-component mixture; writes model.json and labels.csv.
    Fit {
        data: PathBuf,
        #[arg(short = 'G', long = "groups")]
        g: usize,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Run the trimming loop; writes trace.csv, outliers.txt, model.json,
    /// labels.csv and summary.json.
    Oclust {
        data: PathBuf,
        #[arg(short = 'G', long = "groups")]
        g: usize,
        /// Maximum number of outliers removed.
        #[arg(short = 'F', long = "max-outliers")]
        max_outliers: usize,
        #[command(flatten)]
        fit: FitFlags,
        #[command(flatten)]
        subset: SubsetFlags,
        /// Chi-squared quantile for removing gross outliers up front.
        #[arg(long)]
        gross_quantile: Option<f64>,
        /// Also write kl_plot.csv with the min-max normalized KL trace.
        #[arg(long)]
        emit_plot: bool,
        /// Refit the chosen iteration at the end instead of keeping every model.
        #[arg(long)]
        lean: bool,
    },
    /// Score result bundles against labeled datasets; writes report.json.
    Eval {
        /// Result directories (each with labels.csv).
        #[arg(long, num_args = 1.., required = true)]
        pred: Vec<PathBuf>,
        /// Labeled dataset files, paired with --pred in order.
        #[arg(long, num_args = 1.., required = true)]
        truth: Vec<PathBuf>,
    },
    /// Leave-one-out log-likelihood differences against the gamma null;
    /// writes nullcheck.json.
    Nullcheck {
        data: PathBuf,
        #[arg(short = 'G', long = "groups")]
        g: usize,
        #[command(flatten)]
        fit: FitFlags,
        #[command(flatten)]
        subset: SubsetFlags,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Viroli,
    Tomarchio,
    Clean,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Viroli => Family::Viroli,
            FamilyArg::Tomarchio => Family::Tomarchio,
            FamilyArg::Clean => Family::Clean,
        }
    }
}

#[derive(Args)]
struct FitFlags {
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 5)]
    n_inits: usize,
    /// Upper bound on U/V alternations per M-step.
    #[arg(long, default_value_t = 1)]
    uv_sweeps: usize,
}

impl FitFlags {
    fn config(&self, seed: u64) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            n_inits: self.n_inits,
            inner_uv_sweeps: self.uv_sweeps,
            seed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RefitMode {
    Warm,
    Converged,
    Frozen,
}

#[derive(Args)]
struct SubsetFlags {
    /// How leave-one-out models are obtained.
    #[arg(long, value_enum, default_value = "warm")]
    subset_refit: RefitMode,
    /// Iteration cap for warm-started subset refits.
    #[arg(long, default_value_t = DEFAULT_WARM_ITERS)]
    warm_iters: usize,
}

impl SubsetFlags {
    fn mode(&self) -> SubsetRefit {
        match self.subset_refit {
            RefitMode::Warm => SubsetRefit::WarmStart {
                max_iters: self.warm_iters,
            },
            RefitMode::Converged => SubsetRefit::Converged,
            RefitMode::Frozen => SubsetRefit::Frozen,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("moclust: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("moclust: could not start thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("moclust: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

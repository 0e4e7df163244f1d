//! `rpsvr` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or flags, 3 solver did not
//! converge.

mod cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "rpsvr", version, about = "Reward-cum-penalty eps-SVR and eps-SVR toolkit")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by most subcommands.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for data generation and fold assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory that receives every output file.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// KKT tolerance of the solver.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Iteration cap of the solver.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_iter: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelArg {
    Linear,
    Rbf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleArg {
    None,
    Minmax,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalArg {
    Std,
    Variance,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveArg {
    Loss,
    Influence,
    Density,
    #[value(name = "tau1_sweep", alias = "tau1-sweep")]
    Tau1Sweep,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    SseSst,
    SsrSst,
    Rmse,
    Mae,
    Sparsity,
}

/// Model hyperparameters as flags.
#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    pub kernel: KernelArg,
    /// RBF width: K(x, z) = exp(-|x - z|^2 / q).
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    #[arg(long = "C", alias = "c", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    /// Reward slope inside the tube (0 with tau2 = 1 gives eps-SVR).
    #[arg(long, default_value_t = 0.0)]
    pub tau1: f64,
    /// Penalty slope outside the tube.
    #[arg(long, default_value_t = 1.0)]
    pub tau2: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic train/test pair with a manifest.
    Gen {
        /// type1..type8 or linear_outlier.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
        /// How the normal-noise parameter is read (default depends on kind).
        #[arg(long, value_enum)]
        normal_param: Option<NormalArg>,
        /// File name prefix (default: the kind).
        #[arg(long)]
        stem: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a CSV file and write it as JSON.
    Fit {
        #[arg(long)]
        train: PathBuf,
        /// The CSV has no header line.
        #[arg(long)]
        no_header: bool,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = ScaleArg::None)]
        scale: ScaleArg,
        /// Output model file name, placed under --out.
        #[arg(long, visible_alias = "model", default_value = "model.json")]
        model_file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Predict with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// CSV laid out like the training file (features, then target).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        no_header: bool,
        /// Every column of --data is a feature (no target column).
        #[arg(long)]
        features_only: bool,
        #[arg(long, default_value = "predictions.csv")]
        pred_file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against the targets of a CSV file.
    Eval {
        /// CSV whose last column holds the true targets.
        #[arg(long)]
        truth: PathBuf,
        /// CSV whose last column holds the predictions.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        no_header: bool,
        /// Write the report as JSON under --out as well as to stdout.
        #[arg(long)]
        report_file: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validated grid search.
    Gridsearch {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Synthetic dataset kind, when no --config or --train is given.
        #[arg(long)]
        kind: Option<String>,
        /// CSV training file instead of a synthetic set.
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        /// Search every cell jointly instead of the two-stage protocol.
        #[arg(long)]
        single_stage: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated benchmark of eps-SVR against RP-eps-SVR.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Tabulate loss, influence or density curves, or a tau1 sweep.
    Curves {
        #[arg(long, value_enum)]
        kind: CurveArg,
        /// tau1 values, one per curve (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = vec![0.0])]
        tau1: Vec<f64>,
        /// tau2 values, one per curve or a single shared value.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0])]
        tau2: Vec<f64>,
        /// eps values, one per curve or a single shared value.
        #[arg(long, value_delimiter = ',', default_values_t = vec![2.0])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 6.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        /// Permit tau1 < 0 for loss and influence curves.
        #[arg(long)]
        allow_nonconvex: bool,
        /// Dataset for tau1_sweep.
        #[arg(long, default_value = "type1")]
        dataset: String,
        /// Kernel for tau1_sweep; the sweep uses the first --eps and --tau2
        /// and retrains at every --tau1 value.
        #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
        #[arg(long = "C", alias = "c", default_value_t = 0.5)]
        c: f64,
        #[arg(long, value_enum, default_value_t = MetricArg::SseSst)]
        metric: MetricArg,
        #[arg(long, default_value = "curves.csv")]
        curve_file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Gen {
            kind,
            n_train,
            n_test,
            normal_param,
            stem,
            common,
        } => cmd::gen(&kind, n_train, n_test, normal_param, stem, &common),
        Command::Fit {
            train,
            no_header,
            model,
            scale,
            model_file,
            common,
        } => cmd::fit(&train, !no_header, &model, scale, &model_file, &common),
        Command::Predict {
            model,
            data,
            no_header,
            features_only,
            pred_file,
            common,
        } => cmd::predict(&model, &data, !no_header, features_only, &pred_file, &common),
        Command::Eval {
            truth,
            pred,
            no_header,
            report_file,
            common,
        } => cmd::eval(&truth, &pred, !no_header, report_file.as_deref(), &common),
        Command::Gridsearch {
            config,
            kind,
            train,
            folds,
            single_stage,
            common,
        } => cmd::gridsearch(config.as_deref(), kind.as_deref(), train, folds, single_stage, &common),
        Command::Bench {
            config,
            kind,
            train,
            repeats,
            common,
        } => cmd::bench(config.as_deref(), kind.as_deref(), train, repeats, &common),
        Command::Curves {
            kind,
            tau1,
            tau2,
            eps,
            from,
            to,
            step,
            allow_nonconvex,
            dataset,
            kernel,
            q,
            c,
            metric,
            curve_file,
            common,
        } => cmd::curves(
            &cmd::CurveRequest {
                kind,
                tau1,
                tau2,
                eps,
                range: (from, to),
                step,
                allow_nonconvex,
                dataset,
                kernel,
                q,
                c,
                metric,
                curve_file,
            },
            &common,
        ),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cmd::exit_code(&e))
        }
    }
}

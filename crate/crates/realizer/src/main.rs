//! Command-line interface: realize / diagnose / experiment / covariance.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 numerical or estimator
//! error.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use realizer::diagnostics::{asymptotic_covariances, sensitivity_report, sensitivity_report_with_truth};
use realizer::estimators::{kung_realize, ols_realize, tls_realize, wls_realize, Method, WlsConfig};
use realizer::experiments::{preset, records_to_csv, run_experiment, summaries_to_json, ExperimentConfig, ExperimentOutput};
use realizer::hankel::build_hankel;
use realizer::model::{char_poly_of, markov, MarkovSequence, StateSpaceModel};
use realizer::plot::scatter_svg;
use realizer::{Matrix, RealizeError};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "realizer", version, about = "State-space realization from noisy Markov parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate (A, B, C) from a Markov-parameter CSV
    Realize(RealizeArgs),
    /// Singular-value sensitivity diagnostics of the data Hankel matrix
    Diagnose(DiagnoseArgs),
    /// Run a Monte Carlo study preset or a JSON config
    Experiment(ExperimentArgs),
    /// Asymptotic covariance formulas for a known model
    Covariance(CovarianceArgs),
}

#[derive(Args)]
struct RealizeArgs {
    /// Markov parameters, one scalar per line (optional header "g")
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    method: Method,
    /// Covariance of the Markov estimates (n x n CSV); WLS only
    #[arg(long)]
    pg: Option<PathBuf>,
    /// Write the realization JSON here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    nx: usize,
    /// True model JSON; adds the stability bound and sin-theta distances
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Preset name: exp1, exp2, exp3 or exp4
    name: Option<String>,
    /// Experiment config JSON (single group or a list) instead of a preset
    #[arg(long, conflicts_with = "name")]
    config: Option<PathBuf>,
    /// Output directory for records.csv / summary.json / scatter.svg
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a FIT-vs-FIT scatter plot
    #[arg(long)]
    svg: bool,
    /// Override the per-group trial count
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct CovarianceArgs {
    /// Model JSON: {"nx": .., "A": [[..]], "B": [[..]], "C": [[..]]}
    #[arg(long)]
    model: PathBuf,
    /// Number of Markov parameters for the exact Hankel
    #[arg(long)]
    n: usize,
    #[arg(long)]
    pg: Option<PathBuf>,
}

enum CliError {
    Input(String),
    Numerical(String),
}

impl From<RealizeError> for CliError {
    fn from(e: RealizeError) -> Self {
        match e {
            RealizeError::Dimension(_) => CliError::Input(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => m,
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("REALIZER_THREADS") {
        if let Ok(k) = threads.trim().parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Realize(args) => cmd_realize(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Covariance(args) => cmd_covariance(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn read_markov_csv(path: &Path) -> Result<MarkovSequence, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("g") {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Input(format!("{}: line {}: not a number: '{line}'", path.display(), idx + 1))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Input(format!("{}: no data", path.display())));
    }
    Ok(MarkovSequence { values })
}

fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|_| {
            CliError::Input(format!("{}: line {}: malformed row", path.display(), idx + 1))
        })?);
    }
    Matrix::from_rows(&rows).map_err(|e| CliError::Input(e.to_string()))
}

fn read_model_json(path: &Path) -> Result<StateSpaceModel, CliError> {
    let content = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&content)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check_length(n: usize, nx: usize) -> Result<(), CliError> {
    if nx == 0 {
        return Err(CliError::Input("nx must be positive".into()));
    }
    if n < 2 * nx + 1 {
        return Err(CliError::Input(format!(
            "need at least 2*nx + 1 = {} Markov parameters for nx = {nx}, got {n}",
            2 * nx + 1
        )));
    }
    Ok(())
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    match out {
        Some(path) => fs::write(path, text.as_bytes())
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_realize(args: RealizeArgs) -> Result<(), CliError> {
    let g = read_markov_csv(&args.input)?;
    check_length(g.values.len(), args.nx)?;
    let h = build_hankel(&g, args.nx, args.nx)?;
    let result = match args.method {
        Method::Ols => ols_realize(&h)?,
        Method::Tls => tls_realize(&h)?,
        Method::Kung => kung_realize(&h)?,
        Method::Wls => {
            let p_g = match &args.pg {
                Some(path) => {
                    let m = read_matrix_csv(path)?;
                    if m.rows() != g.values.len() || m.cols() != g.values.len() {
                        return Err(CliError::Input(format!(
                            "p_g must be {0} x {0}",
                            g.values.len()
                        )));
                    }
                    m
                }
                None => {
                    eprintln!("warning: no --pg given; using identity covariance for WLS");
                    Matrix::identity(g.values.len())
                }
            };
            wls_realize(&h, &g, &WlsConfig::with_p_g(p_g))?
        }
    };
    let value = serde_json::to_value(&result).map_err(|e| CliError::Input(e.to_string()))?;
    emit_json(&value, args.out.as_deref())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let g = read_markov_csv(&args.input)?;
    check_length(g.values.len(), args.nx)?;
    let h = build_hankel(&g, args.nx, args.nx)?;
    let report = match &args.truth {
        Some(path) => {
            let truth = read_model_json(path)?;
            sensitivity_report_with_truth(&h, &truth, 500)?
        }
        None => sensitivity_report(&h)?,
    };
    let value = serde_json::to_value(&report).map_err(|e| CliError::Input(e.to_string()))?;
    emit_json(&value, None)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let configs: Vec<ExperimentConfig> = match (&args.name, &args.config) {
        (Some(name), None) => preset(name, args.seed, args.trials)?,
        (None, Some(path)) => {
            let content = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            let mut configs: Vec<ExperimentConfig> = serde_json::from_str::<Vec<ExperimentConfig>>(&content)
                .or_else(|_| serde_json::from_str::<ExperimentConfig>(&content).map(|c| vec![c]))
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            for cfg in configs.iter_mut() {
                cfg.seed = args.seed;
                if let Some(t) = args.trials {
                    cfg.trials = t;
                }
            }
            configs
        }
        _ => return Err(CliError::Input("give a preset name or --config".into())),
    };
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.out.display())))?;
    let mut outputs: Vec<ExperimentOutput> = Vec::with_capacity(configs.len());
    for cfg in &configs {
        outputs.push(run_experiment(cfg)?);
    }
    let csv = records_to_csv(&outputs);
    fs::write(args.out.join("records.csv"), csv.as_bytes())
        .map_err(|e| CliError::Input(e.to_string()))?;
    let summary = summaries_to_json(&outputs);
    let pretty = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(args.out.join("summary.json"), pretty.as_bytes())
        .map_err(|e| CliError::Input(e.to_string()))?;
    if args.svg {
        fs::write(args.out.join("scatter.svg"), scatter_svg(&outputs).as_bytes())
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    println!("{pretty}");
    Ok(())
}

fn cmd_covariance(args: CovarianceArgs) -> Result<(), CliError> {
    let model = read_model_json(&args.model)?;
    let nx = model.order();
    check_length(args.n, nx)?;
    let p_g = match &args.pg {
        Some(path) => {
            let m = read_matrix_csv(path)?;
            if m.rows() != args.n || m.cols() != args.n {
                return Err(CliError::Input(format!("p_g must be {0} x {0}", args.n)));
            }
            m
        }
        None => Matrix::identity(args.n),
    };
    let g = markov(&model, args.n);
    let h = build_hankel(&g, nx, nx)?;
    let cov = asymptotic_covariances(&h, &char_poly_of(&model), &p_g)?;
    let value = serde_json::to_value(&cov).map_err(|e| CliError::Input(e.to_string()))?;
    emit_json(&value, None)
}

//! `wsr`: command-line harness for weakly supervised regression experiments.
//!
//! Every subcommand starts from an experiment config (a TOML file, or the
//! Example 1a preset when `--config` is absent) and applies the flag
//! overrides on top. Failures print one JSON line `{"error", "message"}` to
//! stderr and exit with status 1 (2 for unusable arguments).

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use wsr_core::experiment::{
    emit_report, grid_search, repetition_dataset, repetition_seed, run_experiment, CvCell, DataSource,
    ExperimentConfig, GridResult, Method, Model, ReportFormat, TuningGrid,
};
use wsr_core::ingest::{load_dataset, load_predictions, write_dataset, write_predictions};
use wsr_core::metrics::{mae, mse, mwd};
use wsr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "wsr", version, about = "Weakly supervised regression with low-rank co-association regularization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the repetition-0 dataset (features, true target, weak label, role) as CSV.
    Gen(Common),
    /// Fit once and write `index,a_star,sigma_star` for every point.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Dataset file written by `gen`; generated from the config when absent.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the Monte-Carlo experiment and emit a report.
    Bench(Common),
    /// Grid search over (beta, gamma) by k-fold cross-validation.
    Tune {
        #[command(flatten)]
        common: Common,
        /// Overrides the config grid's betas.
        #[arg(long, value_delimiter = ',')]
        betas: Vec<f64>,
        /// Overrides the config grid's gammas.
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Score a predictions file against the test points of a dataset file.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Dataset file written by `gen`.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = parse_format)]
        format: Option<ReportFormat>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    #[arg(long)]
    reps: Option<usize>,
    /// Synthetic point count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<ReportFormat>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<ReportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::example_1a(1000, 0.1, 0.1, Method::WsrLrcm),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(method) = self.method {
            config.method = method;
        }
        if let Some(reps) = self.reps {
            config.repetitions = Some(reps);
        }
        if let Some(n) = self.n {
            match &mut config.data {
                DataSource::Synthetic { n: current, .. } => *current = n,
                DataSource::Csv { .. } => {
                    return Err(Error::Config("--n applies to synthetic data only".into()));
                }
            }
        }
        if let Some(path) = &self.out {
            config.output.path = Some(path.clone());
        }
        if let Some(format) = self.format {
            config.output.format = format;
        }
        config.validate()?;
        Ok(config)
    }
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn gen(common: &Common) -> Result<()> {
    let config = common.resolve()?;
    let data = repetition_dataset(&config, 0)?;
    write_dataset(open_output(config.output.path.as_deref())?, &data)
}

fn fit(common: &Common, data_path: Option<&Path>) -> Result<()> {
    let config = common.resolve()?;
    let data = match data_path {
        Some(p) => load_dataset(p)?,
        None => repetition_dataset(&config, 0)?,
    };
    let model = Model::build(&config, data.x.view(), repetition_seed(config.seed, 0))?;
    let pred = model.fit(&data.split.labels, &config.solver)?;
    let test = data.split.test_mask();
    if test.iter().any(|&t| t) {
        log::info!("test MWD {:.6}", mwd(&pred, data.y_true.view(), &test)?);
    }
    write_predictions(open_output(config.output.path.as_deref())?, &pred)
}

fn bench(common: &Common) -> Result<()> {
    let config = common.resolve()?;
    let format = config.output.format;
    match run_experiment(&config) {
        Ok(report) => {
            let mut out = open_output(config.output.path.as_deref())?;
            emit_report(&report, format, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Err(Error::Repetition { index, source, partial }) => {
            if !partial.records.is_empty() {
                let mut out = open_output(config.output.path.as_deref())?;
                emit_report(&partial, format, &mut out)?;
                out.flush()?;
            }
            Err(Error::Repetition { index, source, partial })
        }
        Err(e) => Err(e),
    }
}

fn tune(common: &Common, betas: &[f64], gammas: &[f64], folds: Option<usize>) -> Result<()> {
    let mut config = common.resolve()?;
    let mut grid = config
        .tuning
        .clone()
        .unwrap_or_else(|| TuningGrid::new(vec![config.solver.beta], vec![config.solver.gamma]));
    if !betas.is_empty() {
        grid.betas = betas.to_vec();
    }
    if !gammas.is_empty() {
        grid.gammas = gammas.to_vec();
    }
    if let Some(k) = folds {
        grid.cv_folds = k;
    }
    config.tuning = Some(grid);
    config.validate()?;
    let result = grid_search(&config)?;
    let mut out = open_output(config.output.path.as_deref())?;
    write_grid(&result, config.output.format, &mut out)?;
    out.flush()?;
    Ok(())
}

fn write_grid<W: Write>(result: &GridResult, format: ReportFormat, w: &mut W) -> Result<()> {
    let is_best = |c: &CvCell| c.beta == result.best.beta && c.gamma == result.best.gamma;
    match format {
        ReportFormat::HumanTable => {
            writeln!(w, "{:>12} {:>12} {:>14}", "beta", "gamma", "cv_w2")?;
            for c in &result.table {
                let mark = if is_best(c) { " *" } else { "" };
                writeln!(w, "{:>12} {:>12} {:>14.6e}{mark}", c.beta, c.gamma, c.score)?;
            }
            writeln!(w, "best: beta = {}, gamma = {}", result.best.beta, result.best.gamma)?;
        }
        ReportFormat::Csv => {
            writeln!(w, "beta,gamma,cv_w2,best")?;
            for c in &result.table {
                writeln!(w, "{},{},{},{}", c.beta, c.gamma, c.score, is_best(c))?;
            }
        }
        ReportFormat::JsonLines => {
            for c in &result.table {
                writeln!(w, "{}", json!({"beta": c.beta, "gamma": c.gamma, "cv_w2": c.score}))?;
            }
            writeln!(w, "{}", json!({"best": {"beta": result.best.beta, "gamma": result.best.gamma}}))?;
        }
    }
    Ok(())
}

fn eval(predictions: &Path, truth: &Path, out: Option<&Path>, format: ReportFormat) -> Result<()> {
    let pred = load_predictions(predictions)?;
    let data = load_dataset(truth)?;
    let test = data.split.test_mask();
    let y = data.y_true.view();
    let (n_test, w2, abs, sq) = (
        test.iter().filter(|&&t| t).count(),
        mwd(&pred, y, &test)?,
        mae(&pred, y, &test)?,
        mse(&pred, y, &test)?,
    );
    let mut w = open_output(out)?;
    match format {
        ReportFormat::HumanTable => {
            writeln!(w, "{:>8} {:>12} {:>12} {:>12}", "n_test", "mwd", "mae", "mse")?;
            writeln!(w, "{n_test:>8} {w2:>12.6} {abs:>12.6} {sq:>12.6}")?;
        }
        ReportFormat::Csv => {
            writeln!(w, "n_test,mwd,mae,mse")?;
            writeln!(w, "{n_test},{w2},{abs},{sq}")?;
        }
        ReportFormat::JsonLines => {
            writeln!(w, "{}", json!({"n_test": n_test, "mwd": w2, "mae": abs, "mse": sq}))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(common) => gen(&common),
        Command::Fit { common, data } => fit(&common, data.as_deref()),
        Command::Bench(common) => bench(&common),
        Command::Tune {
            common,
            betas,
            gammas,
            folds,
        } => tune(&common, &betas, &gammas, folds),
        Command::Eval {
            predictions,
            truth,
            out,
            format,
        } => eval(&predictions, &truth, out.as_deref(), format.unwrap_or_default()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", json!({"error": "UsageError", "message": first}));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut line = json!({"error": e.kind(), "message": e.to_string()});
            if let Error::Repetition { index, .. } = &e {
                line["repetition"] = json!(index);
            }
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

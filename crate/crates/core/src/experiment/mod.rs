//! Monte-Carlo experiments: data, fit, metrics, repetition, grid search and
//! reports.

mod config;
mod report;

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2};
use rand::seq::SliceRandom;

pub use config::{
    DataSource, EnsembleSettings, ExperimentConfig, KernelSettings, Method, OutputSettings, TuningGrid,
    DEFAULT_REPETITIONS, LARGE_N,
};
pub use report::{emit_report, parse_report_csv, RepetitionRecord, ReportFormat, RunReport, Summary};

use crate::datagen::{synthetic_dataset, Dataset};
use crate::error::{Error, Result};
use crate::ingest::{assign_roles, load_csv};
use crate::metrics::{mae, mwd, w2_gaussian, GaussianLabel};
use crate::par;
use crate::regression::{
    check_dense_size, DenseModel, LabelRole, LowRankModel, Prediction, SolverParams, WeakLabel, WeakTreatment,
};
use crate::seed::{derive_seed, rng_from_seed};

/// Seed sub-streams of one repetition.
const STREAM_DATA: u64 = 0;
const STREAM_ENSEMBLE: u64 = 1;
const STREAM_FOLDS: u64 = 2;

/// A similarity structure built once per dataset and refit for any labels
/// and parameters.
#[derive(Debug, Clone)]
pub enum Model {
    LowRank(LowRankModel),
    Dense(DenseModel, WeakTreatment),
}

impl Model {
    /// Builds the ensemble (and its low-rank factor) or the dense kernel
    /// Laplacian for `method`.
    pub fn build(config: &ExperimentConfig, x: ArrayView2<f64>, seed: u64) -> Result<Self> {
        match config.method {
            Method::WsrLrcm => Ok(Model::LowRank(LowRankModel::from_features(
                x,
                &config.ensemble.with_seed(derive_seed(seed, STREAM_ENSEMBLE)),
            )?)),
            Method::SsrRbfDense => Ok(Model::Dense(
                DenseModel::from_features(x, &config.kernel.spec())?,
                config.kernel.treat_weak_as,
            )),
        }
    }

    pub fn fit(&self, labels: &[WeakLabel], params: &SolverParams) -> Result<Prediction> {
        match self {
            Model::LowRank(m) => m.fit(labels, params),
            Model::Dense(m, treat) => m.fit(labels, params, *treat),
        }
    }

    /// Whether weak labels reach the solver.
    pub fn uses_weak_labels(&self) -> bool {
        !matches!(self, Model::Dense(_, WeakTreatment::Unlabeled))
    }
}

/// Features and targets shared by all repetitions of a file-backed
/// experiment; synthetic data is regenerated per repetition.
enum Source {
    Synthetic,
    Loaded(Array2<f64>, Array1<f64>),
}

impl Source {
    fn open(config: &ExperimentConfig) -> Result<Self> {
        match &config.data {
            DataSource::Synthetic { .. } => Ok(Source::Synthetic),
            DataSource::Csv { path, schema } => {
                let (x, y) = load_csv(path, schema)?;
                Ok(Source::Loaded(x, y))
            }
        }
    }

    fn n(&self, config: &ExperimentConfig) -> usize {
        match (self, &config.data) {
            (Source::Loaded(_, y), _) => y.len(),
            (Source::Synthetic, DataSource::Synthetic { n, .. }) => *n,
            (Source::Synthetic, DataSource::Csv { .. }) => unreachable!("csv source is loaded"),
        }
    }

    fn dataset(&self, config: &ExperimentConfig, seed: u64) -> Result<Dataset> {
        let data_seed = derive_seed(seed, STREAM_DATA);
        match (self, &config.data) {
            (Source::Loaded(x, y), _) => Ok(Dataset {
                x: x.clone(),
                y_true: y.clone(),
                split: assign_roles(y.as_slice().expect("contiguous"), &config.split, data_seed)?,
            }),
            (Source::Synthetic, DataSource::Synthetic { n, mixture }) => {
                synthetic_dataset(mixture, &config.split, *n, data_seed)
            }
            (Source::Synthetic, DataSource::Csv { .. }) => unreachable!("csv source is loaded"),
        }
    }
}

/// Seed of repetition `index`.
pub fn repetition_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

/// The dataset repetition `index` of `config` runs on.
pub fn repetition_dataset(config: &ExperimentConfig, index: usize) -> Result<Dataset> {
    config.validate()?;
    Source::open(config)?.dataset(config, repetition_seed(config.seed, index))
}

fn run_repetition(config: &ExperimentConfig, source: &Source, index: usize) -> Result<RepetitionRecord> {
    let seed = repetition_seed(config.seed, index);
    let data = source.dataset(config, seed)?;
    let start = Instant::now();
    let model = Model::build(config, data.x.view(), seed)?;
    let pred = model.fit(&data.split.labels, &config.solver)?;
    let seconds = start.elapsed().as_secs_f64();
    let test = data.split.test_mask();
    Ok(RepetitionRecord {
        index,
        seed,
        mwd: mwd(&pred, data.y_true.view(), &test)?,
        mae: mae(&pred, data.y_true.view(), &test)?,
        seconds,
    })
}

/// Runs every repetition (in parallel with the `parallel` feature) and
/// collects a report. If any repetition fails, the error of the lowest failing
/// index is returned together with the successful records.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    if let (Method::SsrRbfDense, DataSource::Synthetic { n, .. }) = (config.method, &config.data) {
        check_dense_size(*n)?;
    }
    let source = Source::open(config)?;
    let n = source.n(config);
    if config.method == Method::SsrRbfDense {
        check_dense_size(n)?;
    }
    let reps = config.resolved_repetitions(n);
    let mut resolved = config.clone();
    resolved.repetitions = Some(reps);

    let results = par::map_range(reps, |i| run_repetition(config, &source, i));

    let sigma_eps = match &config.data {
        DataSource::Synthetic { mixture, .. } => Some(mixture.sigma_eps),
        DataSource::Csv { .. } => None,
    };
    let mut report = RunReport {
        method: config.method,
        n,
        sigma_eps,
        delta: config.split.delta,
        master_seed: config.seed,
        config: resolved.to_toml_string()?,
        records: Vec::with_capacity(reps),
    };
    let mut failure = None;
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => report.records.push(rec),
            Err(e) if failure.is_none() => failure = Some((index, e)),
            Err(e) => log::warn!("repetition {index} also failed: {e}"),
        }
    }
    match failure {
        None => Ok(report),
        Some((index, source)) => Err(Error::Repetition {
            index,
            source: Box::new(source),
            partial: Box::new(report),
        }),
    }
}

/// One grid cell of a cross-validation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvCell {
    pub beta: f64,
    pub gamma: f64,
    /// Mean over folds of the held-out w2 distance.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: SolverParams,
    pub table: Vec<CvCell>,
}

/// Relative tolerance under which two CV scores count as tied.
pub const CV_TIE_TOL: f64 = 1e-9;

/// Picks the lowest score; among cells tied with it, the largest β and then
/// the largest γ.
pub fn select_best(table: &[CvCell]) -> Option<SolverParams> {
    let best = table.iter().map(|c| c.score).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = CV_TIE_TOL * best.abs().max(1.0);
    table
        .iter()
        .filter(|c| c.score <= best + tol)
        .max_by(|a, b| a.beta.total_cmp(&b.beta).then(a.gamma.total_cmp(&b.gamma)))
        .map(|c| SolverParams {
            gamma: c.gamma,
            beta: c.beta,
        })
}

/// k-fold cross-validation of `(β, γ)` on the dataset of repetition 0.
///
/// Folds partition the observed points the model can use (labeled and weak,
/// or labeled only when the baseline ignores weak labels). In each fold the
/// held-out points are demoted to unlabeled, the model is refit, and the
/// prediction is scored by its w2 distance to the held-out observed labels.
pub fn grid_search(config: &ExperimentConfig) -> Result<GridResult> {
    config.validate()?;
    let grid = config
        .tuning
        .as_ref()
        .ok_or_else(|| Error::Config("grid search needs a [tuning] section".into()))?;
    let source = Source::open(config)?;
    if config.method == Method::SsrRbfDense {
        check_dense_size(source.n(config))?;
    }
    let seed = repetition_seed(config.seed, 0);
    let data = source.dataset(config, seed)?;
    let model = Model::build(config, data.x.view(), seed)?;
    let labels = &data.split.labels;
    grid_search_on(&model, labels, grid, derive_seed(seed, STREAM_FOLDS))
}

/// Grid search over a prebuilt model.
pub fn grid_search_on(model: &Model, labels: &[WeakLabel], grid: &TuningGrid, seed: u64) -> Result<GridResult> {
    grid.validate()?;
    let usable = |l: &WeakLabel| match l.role {
        LabelRole::Labeled => true,
        LabelRole::Weak => model.uses_weak_labels(),
        LabelRole::Unlabeled => false,
    };
    let mut observed: Vec<usize> = (0..labels.len()).filter(|&i| usable(&labels[i])).collect();
    let k = grid.cv_folds;
    if observed.len() < k {
        return Err(Error::InsufficientLabels(format!(
            "{} usable labeled points for {k} folds",
            observed.len()
        )));
    }
    observed.shuffle(&mut rng_from_seed(seed));
    let folds: Vec<Vec<usize>> = (0..k).map(|f| observed.iter().skip(f).step_by(k).copied().collect()).collect();

    let cells: Vec<(f64, f64)> = grid
        .betas
        .iter()
        .flat_map(|&b| grid.gammas.iter().map(move |&g| (b, g)))
        .collect();
    let jobs = cells.len() * k;
    let fold_scores = par::map_range(jobs, |job| -> Result<f64> {
        let (beta, gamma) = cells[job / k];
        let held = &folds[job % k];
        let mut train = labels.to_vec();
        for &i in held {
            train[i] = WeakLabel::unlabeled();
        }
        let pred = model.fit(&train, &SolverParams::new(gamma, beta)?)?;
        let total: f64 = held
            .iter()
            .map(|&i| w2_gaussian(GaussianLabel::new(labels[i].mean, labels[i].std), pred.distribution(i)))
            .sum();
        Ok(total / held.len() as f64)
    });
    let fold_scores = fold_scores.into_iter().collect::<Result<Vec<_>>>()?;
    let table: Vec<CvCell> = cells
        .iter()
        .enumerate()
        .map(|(c, &(beta, gamma))| CvCell {
            beta,
            gamma,
            score: fold_scores[c * k..(c + 1) * k].iter().sum::<f64>() / k as f64,
        })
        .collect();
    let best = select_best(&table)
        .ok_or_else(|| Error::InvalidParameter("every grid cell produced a non-finite score".into()))?;
    Ok(GridResult { best, table })
}

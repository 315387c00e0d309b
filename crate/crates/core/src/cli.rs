//! Command-line front end: `gen`, `train`, `predict`, `cv` and `bench`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::admm::{fit_with, FitOptions, Progress};
use crate::bench::{run_bench, BenchConfig, Experiment, Penalties};
use crate::data::cv::{cv_grid_search, default_grid, default_lambda2_grid, TuneOptions};
use crate::data::io::{format_csv, format_mask, load_model, read_csv_table, save_model, LabelColumn};
use crate::data::preprocess::standardize;
use crate::data::synthetic::{SyntheticSpec, Variant};
use crate::error::{Error, Result};
use crate::model::{Dataset, RegularizerKind};

/// Exit status for a run that stopped at `maxit` without meeting the tolerance.
pub const EXIT_NOT_CONVERGED: i32 = 1;
/// Exit status for usage, parse and I/O errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "msvm", version, about = "Sparse multiclass SVMs trained by ADMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic train/test pair and its relevance mask.
    Gen(GenArgs),
    /// Fit a model and write it to a file.
    Train(TrainArgs),
    /// Predict labels with a saved model.
    Predict(PredictArgs),
    /// Select penalties by stratified cross validation.
    Cv(CvArgs),
    /// Repeated synthetic trials with a TSV report.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    FiveClass,
    FourClass,
}

#[derive(Debug, Clone, Args)]
pub struct VariantArgs {
    #[arg(long, value_enum, default_value = "five-class")]
    pub variant: VariantArg,
    /// Dimension of the four-class mixture.
    #[arg(long, default_value_t = 500)]
    pub p: usize,
    /// Informative block size of the four-class mixture.
    #[arg(long, default_value_t = 30)]
    pub s: usize,
    /// Within-block correlation of the four-class mixture.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
}

impl VariantArgs {
    fn variant(&self) -> Variant {
        match self.variant {
            VariantArg::FiveClass => Variant::FiveClass,
            VariantArg::FourClass => Variant::FourClass {
                p: self.p,
                s: self.s,
                rho: self.rho,
            },
        }
    }
}

/// Solver overrides; unset values follow the data-dependent defaults.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub lambda3: f64,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub maxit: usize,
}

impl SolverArgs {
    fn options(&self) -> TuneOptions {
        TuneOptions {
            lambda3: self.lambda3,
            alpha: self.alpha,
            mu: self.mu,
            nu: self.nu,
            tol: self.tol,
            maxit: self.maxit,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, one sample per row.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column: `auto`, `none`, a 1-based index or a header name.
    #[arg(long, default_value = "auto")]
    pub label: String,
    /// Number of classes; defaults to the largest label.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Standardize features with the file's own mean and standard deviation.
    #[arg(long)]
    pub standardize: bool,
}

impl DataArgs {
    fn label_column(&self) -> Result<LabelColumn> {
        self.label.parse()
    }

    fn load(&self) -> Result<Dataset> {
        let data = read_csv_table(&self.data, &self.label_column()?)?.into_dataset(self.classes)?;
        self.maybe_standardize(data)
    }

    fn maybe_standardize(&self, data: Dataset) -> Result<Dataset> {
        if self.standardize {
            Ok(standardize(&data)?.0)
        } else {
            Ok(data)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub variant: VariantArgs,
    /// Training samples.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Test samples; defaults to `--n`.
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for `train.csv`, `test.csv` and `mask.txt`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "elastic")]
    pub reg: RegularizerKind,
    #[arg(long, default_value_t = 0.0)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda2: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Per-iteration TSV trace of the objective and residuals.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Model file to write.
    #[arg(long, default_value = "model.txt")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV file; unlabeled files are detected when the column count equals the model's `p`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "auto")]
    pub label: String,
    #[arg(long)]
    pub standardize: bool,
    /// Predictions file, one label per line; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "elastic")]
    pub reg: RegularizerKind,
    /// Comma-separated `lambda1` candidates.
    #[arg(long, value_delimiter = ',')]
    pub grid1: Option<Vec<f64>>,
    /// Comma-separated `lambda2` candidates; `1` for the elastic net by default.
    #[arg(long, value_delimiter = ',')]
    pub grid2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub variant: VariantArgs,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Training (and tuning) samples per trial.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub n_test: usize,
    /// Base seed; trial `i` uses `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Models to run; all three when absent.
    #[arg(long, value_delimiter = ',')]
    pub reg: Vec<RegularizerKind>,
    /// Fixed `lambda1`; skips tuning when given together with `--lambda2`
    /// (or alone, with `lambda2 = 1`).
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Comma-separated tuning grid.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Leave out the wall-time column so reruns compare byte for byte.
    #[arg(long)]
    pub no_time: bool,
    /// Report file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a successful command: whether every fit met its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub converged: bool,
}

/// Process exit status for a command result.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome { converged: true }) => 0,
        Ok(Outcome { converged: false }) | Err(Error::Divergence(_)) => EXIT_NOT_CONVERGED,
        Err(_) => EXIT_USAGE,
    }
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen(a) => cmd_gen(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Cv(a) => cmd_cv(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_gen(a: &GenArgs) -> Result<Outcome> {
    let spec = SyntheticSpec {
        variant: a.variant.variant(),
        n: a.n,
        seed: a.seed,
    };
    let split = spec.generate(a.n_test.unwrap_or(a.n))?;
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_file(&a.out.join("train.csv"), &format_csv(&split.train))?;
    write_file(&a.out.join("test.csv"), &format_csv(&split.test))?;
    write_file(&a.out.join("mask.txt"), &format_mask(&split.relevance))?;
    println!(
        "n = {}, n_test = {}, p = {}, J = {}, seed = {}",
        split.train.num_samples(),
        split.test.num_samples(),
        split.train.num_features(),
        split.train.num_classes(),
        a.seed
    );
    Ok(Outcome { converged: true })
}

fn cmd_train(a: &TrainArgs) -> Result<Outcome> {
    let data = a.data.load()?;
    let hp = a.solver.options().hyperparams(&data, a.lambda1, a.lambda2);
    let mut trace = String::from("iter\tobjective\tr_a\tr_u\tr_v\n");
    let mut record = |p: &Progress| {
        use std::fmt::Write as _;
        let _ = writeln!(
            trace,
            "{}\t{:e}\t{:e}\t{:e}\t{:e}",
            p.iteration, p.objective, p.r_a, p.r_u, p.r_v
        );
    };
    let callback: Option<&mut dyn FnMut(&Progress)> = if a.trace.is_some() { Some(&mut record) } else { None };
    let report = fit_with(&data, &hp, a.reg, FitOptions::default(), callback)?;
    if let Some(path) = &a.trace {
        write_file(path, &trace)?;
    }
    save_model(&a.out, &report.classifier)?;
    let r = report.residuals;
    println!("model\t{}", a.reg);
    println!("converged\t{}", report.converged);
    println!("iterations\t{}", report.iterations);
    println!("objective\t{:.10e}", report.objective);
    println!(
        "residuals\tr_a={:e}\tr_u={:e}\tr_v={:e}\trel_obj={:e}",
        r.r_a, r.r_u, r.r_v, r.rel_obj_change
    );
    println!("time\t{:.4}", report.elapsed.as_secs_f64());
    if !report.converged {
        log::warn!(
            "stopped after {} iterations without meeting tol = {}",
            report.iterations,
            hp.tol
        );
    }
    Ok(Outcome {
        converged: report.converged,
    })
}

fn cmd_predict(a: &PredictArgs) -> Result<Outcome> {
    let clf = load_model(&a.model)?;
    let mut label: LabelColumn = a.label.parse()?;
    if label == LabelColumn::Auto {
        let probe = read_csv_table(&a.data, &LabelColumn::None)?;
        if probe.features.nrows() == clf.num_features() {
            label = LabelColumn::None;
        }
    }
    let table = read_csv_table(&a.data, &label)?;
    if table.features.nrows() != clf.num_features() {
        return Err(Error::DimensionMismatch(format!(
            "model has p = {}, data has {} feature columns",
            clf.num_features(),
            table.features.nrows()
        )));
    }
    let (features, labels) = match table.labels {
        Some(labels) => {
            let data = Dataset::new(table.features, labels, clf.num_classes())?;
            let data = if a.standardize { standardize(&data)?.0 } else { data };
            let (x, y, _) = data.into_parts();
            (x, Some(y))
        }
        None if a.standardize => {
            // a throwaway single-class labeling lets the standardizer run
            let n = table.features.ncols();
            let data = Dataset::new(table.features, vec![1; n], clf.num_classes())?;
            (standardize(&data)?.0.into_parts().0, None)
        }
        None => (table.features, None),
    };
    let predicted = clf.predict_batch(features.view())?;
    let mut text = String::with_capacity(predicted.len() * 2);
    for y in &predicted {
        text.push_str(&y.to_string());
        text.push('\n');
    }
    match &a.out {
        Some(path) => write_file(path, &text)?,
        None => {
            let path = Path::new("<stdout>");
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| Error::io(path, e))?;
        }
    }
    if let Some(labels) = labels {
        let correct = predicted.iter().zip(&labels).filter(|(p, y)| p == y).count();
        eprintln!("accuracy\t{:.6}", correct as f64 / labels.len() as f64);
    }
    Ok(Outcome { converged: true })
}

fn cmd_cv(a: &CvArgs) -> Result<Outcome> {
    let data = a.data.load()?;
    let grid1 = a.grid1.clone().unwrap_or_else(default_grid);
    let grid2 = a.grid2.clone().unwrap_or_else(|| default_lambda2_grid(a.reg));
    let sel = cv_grid_search(&data, a.reg, &grid1, &grid2, a.folds, a.seed, &a.solver.options())?;
    let folds: Vec<String> = (1..=a.folds).map(|f| format!("fold{f}")).collect();
    println!("lambda1\tlambda2\t{}\tmean", folds.join("\t"));
    for row in &sel.table {
        let accs: Vec<String> = row.accuracies.iter().map(|v| format!("{v:.6}")).collect();
        println!(
            "{}\t{}\t{}\t{:.6}",
            row.lambda1,
            row.lambda2,
            accs.join("\t"),
            row.mean()
        );
    }
    println!("selected\tlambda1={}\tlambda2={}", sel.lambda1, sel.lambda2);
    Ok(Outcome { converged: true })
}

fn cmd_bench(a: &BenchArgs) -> Result<Outcome> {
    let experiment = match a.variant.variant() {
        Variant::FiveClass => Experiment::Example1,
        Variant::FourClass { p, s, rho } => Experiment::Example2 { p, s, rho },
    };
    let mut config = BenchConfig::new(experiment, a.trials, a.n, a.n_test, a.seed);
    if !a.reg.is_empty() {
        config.kinds = a.reg.clone();
    }
    config.solver = a.solver.options();
    config.penalties = match (a.lambda1, a.lambda2) {
        (None, None) => Penalties::Tuned {
            grid: a.grid.clone().unwrap_or_else(default_grid),
        },
        (l1, l2) => Penalties::Fixed {
            lambda1: l1.unwrap_or(0.0),
            lambda2: l2.unwrap_or(1.0),
        },
    };
    let report = run_bench(&config)?;
    let tsv = report.to_tsv(!a.no_time);
    match &a.out {
        Some(path) => write_file(path, &tsv)?,
        None => print!("{tsv}"),
    }
    Ok(Outcome {
        converged: report.all_converged(),
    })
}

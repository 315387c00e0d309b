//! Repeated-trial benchmarks on the synthetic mixtures with TSV reports.
//!
//! Penalties are tuned once on a training set and an equally sized validation
//! set drawn with seed `base_seed - 1`. Trial `i` then draws fresh training and
//! test sets with seed `base_seed + i`, fits every requested model with the
//! tuned penalties, and records accuracy, fit time and sparsity counts of the
//! truncated weights.

use std::fmt::Write as _;
use std::time::Duration;

use rayon::prelude::*;

use crate::admm::fit;
use crate::data::cv::{default_grid, default_lambda2_grid, holdout_search, TuneOptions};
use crate::data::synthetic::{SyntheticSpec, Variant};
use crate::error::{Error, Result};
use crate::model::{sparsity_metrics, truncate, RegularizerKind, SparsityMetrics, DEFAULT_TRUNCATION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Experiment {
    /// Five-class mixture, `p = 10`.
    Example1,
    /// Four-class mixture with block size `s` and block correlation `rho`.
    Example2 { p: usize, s: usize, rho: f64 },
}

impl Experiment {
    pub fn variant(&self) -> Variant {
        match *self {
            Experiment::Example1 => Variant::FiveClass,
            Experiment::Example2 { p, s, rho } => Variant::FourClass { p, s, rho },
        }
    }
}

/// How the penalties of each model are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Penalties {
    /// Holdout search over `grid`; the elastic net keeps `lambda2 = 1`,
    /// the other models search `grid x grid`.
    Tuned { grid: Vec<f64> },
    /// The same pair for every model.
    Fixed { lambda1: f64, lambda2: f64 },
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties::Tuned { grid: default_grid() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub experiment: Experiment,
    pub trials: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub kinds: Vec<RegularizerKind>,
    pub penalties: Penalties,
    pub base_seed: u64,
    pub solver: TuneOptions,
}

impl BenchConfig {
    /// All three models, tuned penalties, default solver settings.
    pub fn new(experiment: Experiment, trials: usize, n_train: usize, n_test: usize, base_seed: u64) -> Self {
        BenchConfig {
            experiment,
            trials,
            n_train,
            n_test,
            kinds: RegularizerKind::ALL.to_vec(),
            penalties: Penalties::default(),
            base_seed,
            solver: TuneOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return Err(Error::InvalidParameter("sample sizes must be positive".into()));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidParameter("no models requested".into()));
        }
        Ok(())
    }
}

/// Penalties used for one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPenalty {
    pub kind: RegularizerKind,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub kind: RegularizerKind,
    pub accuracy: f64,
    pub time: Duration,
    pub metrics: SparsityMetrics,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub experiment: Experiment,
    pub penalties: Vec<ModelPenalty>,
    /// Ordered by trial, then by the requested model order.
    pub rows: Vec<TrialRow>,
}

/// Tunes (if asked) and runs every trial. Trials run in parallel; the report
/// does not depend on scheduling.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let variant = config.experiment.variant();
    let penalties = choose_penalties(config, variant)?;

    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            run_trial(config, variant, &penalties, trial)
                .map_err(|e| Error::InvalidData(format!("trial {trial} failed: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(BenchReport {
        experiment: config.experiment,
        penalties,
        rows: per_trial.into_iter().flatten().collect(),
    })
}

fn choose_penalties(config: &BenchConfig, variant: Variant) -> Result<Vec<ModelPenalty>> {
    match &config.penalties {
        Penalties::Fixed { lambda1, lambda2 } => Ok(config
            .kinds
            .iter()
            .map(|&kind| ModelPenalty {
                kind,
                lambda1: *lambda1,
                lambda2: *lambda2,
            })
            .collect()),
        Penalties::Tuned { grid } => {
            let split = SyntheticSpec {
                variant,
                n: config.n_train,
                seed: config.base_seed.wrapping_sub(1),
            }
            .generate(config.n_train)?;
            config
                .kinds
                .iter()
                .map(|&kind| {
                    let grid2 = match kind {
                        RegularizerKind::ElasticNet => default_lambda2_grid(kind),
                        _ => grid.clone(),
                    };
                    let sel = holdout_search(&split.train, &split.test, kind, grid, &grid2, &config.solver)?;
                    log::info!("{kind}: lambda1 = {}, lambda2 = {}", sel.lambda1, sel.lambda2);
                    Ok(ModelPenalty {
                        kind,
                        lambda1: sel.lambda1,
                        lambda2: sel.lambda2,
                    })
                })
                .collect()
        }
    }
}

fn run_trial(
    config: &BenchConfig,
    variant: Variant,
    penalties: &[ModelPenalty],
    trial: usize,
) -> Result<Vec<TrialRow>> {
    let split = SyntheticSpec {
        variant,
        n: config.n_train,
        seed: config.base_seed.wrapping_add(trial as u64),
    }
    .generate(config.n_test)?;
    penalties
        .iter()
        .map(|pen| {
            let hp = config.solver.hyperparams(&split.train, pen.lambda1, pen.lambda2);
            let report = fit(&split.train, &hp, pen.kind)?;
            let w = truncate(report.classifier.weights.view(), DEFAULT_TRUNCATION);
            Ok(TrialRow {
                trial,
                kind: pen.kind,
                accuracy: report.classifier.accuracy(&split.test)?,
                time: report.elapsed,
                metrics: sparsity_metrics(w.view(), split.relevance.view())?,
                converged: report.converged,
            })
        })
        .collect()
}

/// Mean and standard error (sample standard deviation over `sqrt(len)`;
/// zero for a single value).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates over the trials of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub kind: RegularizerKind,
    pub accuracy: f64,
    pub accuracy_se: f64,
    pub time: f64,
    pub correct_zeros: f64,
    pub incorrect_zeros: f64,
    pub nonzero_rows: f64,
    pub nonzeros_per_column: Vec<f64>,
    pub converged: usize,
}

impl BenchReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn summary(&self) -> Vec<ModelSummary> {
        self.penalties
            .iter()
            .map(|pen| {
                let rows: Vec<&TrialRow> = self.rows.iter().filter(|r| r.kind == pen.kind).collect();
                let mean_of = |f: &dyn Fn(&TrialRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / rows.len() as f64;
                let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
                let (accuracy, accuracy_se) = mean_se(&acc);
                let j = rows.first().map_or(0, |r| r.metrics.nonzeros_per_column.len());
                ModelSummary {
                    kind: pen.kind,
                    accuracy,
                    accuracy_se,
                    time: mean_of(&|r| r.time.as_secs_f64()),
                    correct_zeros: mean_of(&|r| r.metrics.correct_zeros as f64),
                    incorrect_zeros: mean_of(&|r| r.metrics.incorrect_zeros as f64),
                    nonzero_rows: mean_of(&|r| r.metrics.nonzero_rows as f64),
                    nonzeros_per_column: (0..j)
                        .map(|c| mean_of(&|r| r.metrics.nonzeros_per_column[c] as f64))
                        .collect(),
                    converged: rows.iter().filter(|r| r.converged).count(),
                }
            })
            .collect()
    }

    /// Tab-separated report: one row per trial and model, then one `mean` row
    /// per model. `with_time = false` drops the wall-time column, which is the
    /// only nondeterministic field.
    pub fn to_tsv(&self, with_time: bool) -> String {
        let example1 = matches!(self.experiment, Experiment::Example1);
        let j = self.experiment.variant().num_classes();
        let mut cols = vec!["trial".to_string(), "model".into(), "accuracy".into(), "se".into()];
        if with_time {
            cols.push("time".into());
        }
        if example1 {
            cols.extend(["CZ".into(), "IZ".into(), "NR".into()]);
        } else {
            cols.push("IZ".into());
            cols.extend((1..=j).map(|c| format!("NZ{c}")));
        }
        cols.extend(["lambda1".into(), "lambda2".into(), "converged".into()]);
        let mut out = cols.join("\t");
        out.push('\n');

        let penalty = |kind| {
            self.penalties
                .iter()
                .find(|p| p.kind == kind)
                .copied()
                .expect("every row has a model penalty")
        };
        for r in &self.rows {
            let pen = penalty(r.kind);
            let mut f = vec![
                r.trial.to_string(),
                r.kind.name().into(),
                format!("{:.6}", r.accuracy),
                "-".into(),
            ];
            if with_time {
                f.push(format!("{:.4}", r.time.as_secs_f64()));
            }
            let m = &r.metrics;
            if example1 {
                f.extend([m.correct_zeros, m.incorrect_zeros, m.nonzero_rows].map(|v| v.to_string()));
            } else {
                f.push(m.incorrect_zeros.to_string());
                f.extend(m.nonzeros_per_column.iter().map(usize::to_string));
            }
            f.extend([
                pen.lambda1.to_string(),
                pen.lambda2.to_string(),
                u8::from(r.converged).to_string(),
            ]);
            let _ = writeln!(out, "{}", f.join("\t"));
        }
        let trials = self.rows.iter().map(|r| r.trial + 1).max().unwrap_or(0);
        for s in self.summary() {
            let pen = penalty(s.kind);
            let mut f = vec![
                "mean".to_string(),
                s.kind.name().into(),
                format!("{:.6}", s.accuracy),
                format!("{:.6}", s.accuracy_se),
            ];
            if with_time {
                f.push(format!("{:.4}", s.time));
            }
            if example1 {
                f.extend([s.correct_zeros, s.incorrect_zeros, s.nonzero_rows].map(|v| format!("{v:.2}")));
            } else {
                f.push(format!("{:.2}", s.incorrect_zeros));
                f.extend(s.nonzeros_per_column.iter().map(|v| format!("{v:.2}")));
            }
            f.extend([
                pen.lambda1.to_string(),
                pen.lambda2.to_string(),
                format!("{}/{trials}", s.converged),
            ]);
            let _ = writeln!(out, "{}", f.join("\t"));
        }
        out
    }
}

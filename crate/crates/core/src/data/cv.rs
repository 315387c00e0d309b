//! Penalty selection by stratified k-fold cross validation or a holdout set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::admm::{default_hyperparams, fit};
use crate::error::{Error, Result};
use crate::model::{Dataset, Hyperparams, RegularizerKind};

/// The lambda grid `{0, 0.001, 0.01, 0.02, ..., 0.1, 0.15, 0.2, 0.25, 0.3}`.
pub fn default_grid() -> Vec<f64> {
    let mut grid = vec![0.0, 0.001];
    grid.extend((1..=10).map(|k| k as f64 / 100.0));
    grid.extend([0.15, 0.20, 0.25, 0.30]);
    grid
}

/// The `lambda2` candidates for a penalty: just `1` for the elastic net,
/// the default grid otherwise.
pub fn default_lambda2_grid(kind: RegularizerKind) -> Vec<f64> {
    match kind {
        RegularizerKind::ElasticNet => vec![1.0],
        _ => default_grid(),
    }
}

/// Solver settings shared by every fit in a search. `alpha`, `mu`, `nu`
/// follow the defaults for each training subset unless overridden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneOptions {
    pub lambda3: f64,
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub tol: f64,
    pub maxit: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            lambda3: 1.0,
            alpha: None,
            mu: None,
            nu: None,
            tol: 1e-5,
            maxit: 5000,
        }
    }
}

impl TuneOptions {
    pub fn hyperparams(&self, train: &Dataset, lambda1: f64, lambda2: f64) -> Hyperparams {
        let mut hp = default_hyperparams(train.num_samples(), train.num_features(), train.num_classes());
        hp.lambda1 = lambda1;
        hp.lambda2 = lambda2;
        hp.lambda3 = self.lambda3;
        hp.alpha = self.alpha.unwrap_or(hp.alpha);
        hp.mu = self.mu.unwrap_or(hp.mu);
        hp.nu = self.nu.unwrap_or(hp.nu);
        hp.tol = self.tol;
        hp.maxit = self.maxit;
        hp
    }
}

/// Validation accuracies of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScore {
    pub lambda1: f64,
    pub lambda2: f64,
    pub accuracies: Vec<f64>,
}

impl GridScore {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub lambda1: f64,
    pub lambda2: f64,
    pub table: Vec<GridScore>,
}

/// Splits sample indices into `folds` groups with every class spread as
/// evenly as possible. Each class is shuffled, then dealt round-robin,
/// continuing the deal across classes.
pub fn stratified_folds(labels: &[usize], num_classes: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {folds}")));
    }
    let mut by_class = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y - 1].push(i);
    }
    if let Some(j) = by_class.iter().position(|m| m.len() < folds) {
        return Err(Error::InvalidData(format!(
            "class {} has {} samples, fewer than {folds} folds",
            j + 1,
            by_class[j].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut slot = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            out[slot].push(i);
            slot = (slot + 1) % folds;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

fn check_grids(grid1: &[f64], grid2: &[f64]) -> Result<()> {
    if grid1.is_empty() || grid2.is_empty() {
        return Err(Error::InvalidParameter("lambda grids must be nonempty".into()));
    }
    if grid1.iter().chain(grid2).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "lambda grids must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn grid_points(grid1: &[f64], grid2: &[f64]) -> Vec<(f64, f64)> {
    grid2
        .iter()
        .flat_map(|&l2| grid1.iter().map(move |&l1| (l1, l2)))
        .collect()
}

/// Highest mean accuracy wins; ties go to larger `lambda1`, then larger `lambda2`.
fn pick(table: Vec<GridScore>) -> Selection {
    let best = table
        .iter()
        .max_by(|a, b| {
            a.mean()
                .total_cmp(&b.mean())
                .then(a.lambda1.total_cmp(&b.lambda1))
                .then(a.lambda2.total_cmp(&b.lambda2))
        })
        .expect("grids are nonempty");
    Selection {
        lambda1: best.lambda1,
        lambda2: best.lambda2,
        table: table.clone(),
    }
}

fn validation_accuracy(
    train: &Dataset,
    valid: &Dataset,
    kind: RegularizerKind,
    lambda1: f64,
    lambda2: f64,
    opts: &TuneOptions,
) -> Result<f64> {
    let report = fit(train, &opts.hyperparams(train, lambda1, lambda2), kind)?;
    if !report.converged {
        log::debug!("fit at ({lambda1}, {lambda2}) stopped at maxit");
    }
    report.classifier.accuracy(valid)
}

/// Chooses `(lambda1, lambda2)` maximizing mean validation accuracy over
/// stratified folds.
pub fn cv_grid_search(
    data: &Dataset,
    kind: RegularizerKind,
    grid1: &[f64],
    grid2: &[f64],
    folds: usize,
    seed: u64,
    opts: &TuneOptions,
) -> Result<Selection> {
    check_grids(grid1, grid2)?;
    let parts = stratified_folds(data.labels(), data.num_classes(), folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = parts
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let mut train = train;
            train.sort_unstable();
            Ok((data.select(&train)?, data.select(&parts[f])?))
        })
        .collect::<Result<_>>()?;

    let table = grid_points(grid1, grid2)
        .into_par_iter()
        .map(|(l1, l2)| {
            let accuracies = splits
                .iter()
                .map(|(tr, va)| validation_accuracy(tr, va, kind, l1, l2, opts))
                .collect::<Result<Vec<_>>>()?;
            Ok(GridScore {
                lambda1: l1,
                lambda2: l2,
                accuracies,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(table))
}

/// Chooses `(lambda1, lambda2)` by accuracy on a separate validation set.
pub fn holdout_search(
    train: &Dataset,
    valid: &Dataset,
    kind: RegularizerKind,
    grid1: &[f64],
    grid2: &[f64],
    opts: &TuneOptions,
) -> Result<Selection> {
    check_grids(grid1, grid2)?;
    let table = grid_points(grid1, grid2)
        .into_par_iter()
        .map(|(l1, l2)| {
            Ok(GridScore {
                lambda1: l1,
                lambda2: l2,
                accuracies: vec![validation_accuracy(train, valid, kind, l1, l2, opts)?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick(table))
}

//! Domain types of the all-together multiclass SVM and the functions that
//! evaluate a classifier: generalized hinge loss, regularizers, objective,
//! prediction and sparsity counting on truncated weights.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Relative tolerance on `We = 0` and `e'b = 0` for a classifier to count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Default relative threshold used to truncate small weights before counting zeros.
pub const DEFAULT_TRUNCATION: f64 = 1e-3;

/// Labeled samples. Features are stored `p x n`, one column per sample; labels
/// are 1-based class indices in `1..=num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let (p, n) = features.dim();
        if p == 0 || n == 0 {
            return Err(Error::InvalidData(format!(
                "dataset needs p >= 1 and n >= 1, got p = {p}, n = {n}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {n} samples",
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y == 0 || y > num_classes) {
            return Err(Error::InvalidData(format!(
                "label {y} of sample {} is outside 1..={num_classes}",
                i + 1
            )));
        }
        if let Some(((g, i), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature {} of sample {}",
                g + 1,
                i + 1
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
        })
    }

    /// Builds a dataset whose class count is the largest label present (at least 2).
    pub fn with_inferred_classes(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let j = labels.iter().copied().max().unwrap_or(0).max(2);
        Dataset::new(features, labels, j)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_samples(&self) -> usize {
        self.features.ncols()
    }

    /// Sample counts per class, index `j - 1` for class `j`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Subset of samples, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let features = self.features.select(Axis(1), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.num_classes)
    }

    pub fn into_parts(self) -> (Array2<f64>, Vec<usize>, usize) {
        (self.features, self.labels, self.num_classes)
    }
}

/// `c_ij = 1` iff sample `i` does not belong to class `j`, stored `n x J`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMask(Array2<f64>);

impl CostMask {
    pub fn new(labels: &[usize], num_classes: usize) -> Self {
        let mut c = Array2::ones((labels.len(), num_classes));
        for (i, &y) in labels.iter().enumerate() {
            c[[i, y - 1]] = 0.0;
        }
        CostMask(c)
    }

    pub fn from_dataset(data: &Dataset) -> Self {
        CostMask::new(data.labels(), data.num_classes())
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }
}

/// `J` linear score functions `f_j(x) = w_j'x + b_j` with `We = 0`, `e'b = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub weights: Array2<f64>,
    pub intercept: Array1<f64>,
}

impl Classifier {
    pub fn new(weights: Array2<f64>, intercept: Array1<f64>) -> Result<Self> {
        if weights.ncols() != intercept.len() {
            return Err(Error::DimensionMismatch(format!(
                "weights have {} columns but intercept has length {}",
                weights.ncols(),
                intercept.len()
            )));
        }
        Ok(Classifier { weights, intercept })
    }

    pub fn zeros(p: usize, num_classes: usize) -> Self {
        Classifier {
            weights: Array2::zeros((p, num_classes)),
            intercept: Array1::zeros(num_classes),
        }
    }

    pub fn num_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Largest violations of the sum-to-zero constraints: `(||We||_inf, |e'b|)`.
    pub fn constraint_violation(&self) -> (f64, f64) {
        let we = self
            .weights
            .sum_axis(Axis(1))
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        (we, self.intercept.sum().abs())
    }

    /// Whether both constraints hold to `tol` relative to `max(1, ||.||_inf)`.
    pub fn is_feasible(&self, tol: f64) -> bool {
        let (we, eb) = self.constraint_violation();
        let w_max = max_abs(self.weights.iter());
        let b_max = max_abs(self.intercept.iter());
        we <= tol * w_max.max(1.0) && eb <= tol * b_max.max(1.0)
    }

    /// Class scores `W'x + b` for one sample.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if x.len() != self.num_features() {
            return Err(Error::DimensionMismatch(format!(
                "sample has {} features, classifier expects {}",
                x.len(),
                self.num_features()
            )));
        }
        Ok(self.weights.t().dot(&x) + &self.intercept)
    }

    /// `argmax_j f_j(x)` as a 1-based label; ties go to the smallest class index.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        Ok(argmax_first(self.scores(x)?.view()) + 1)
    }

    /// Predicted labels for every column of a `p x n` feature matrix.
    pub fn predict_batch(&self, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        if features.nrows() != self.num_features() {
            return Err(Error::DimensionMismatch(format!(
                "data has {} features, classifier expects {}",
                features.nrows(),
                self.num_features()
            )));
        }
        let scores = score_matrix(features, self);
        Ok(scores.outer_iter().map(|row| argmax_first(row) + 1).collect())
    }

    /// Fraction of samples whose predicted label matches the true label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let predicted = self.predict_batch(data.features())?;
        let correct = predicted.iter().zip(data.labels()).filter(|(a, b)| a == b).count();
        Ok(correct as f64 / data.num_samples() as f64)
    }
}

/// Choice of the structured regularizer `phi(W)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegularizerKind {
    /// `phi(W) = ||W||_F^2 / 2`
    ElasticNet,
    /// `phi(W) = sum_j ||w^j||_2` over rows
    GroupLasso,
    /// `phi(W) = sum_j ||w^j||_inf` over rows
    Supnorm,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 3] = [
        RegularizerKind::ElasticNet,
        RegularizerKind::GroupLasso,
        RegularizerKind::Supnorm,
    ];

    /// Short name used on the command line and in reports.
    pub fn name(self) -> &'static str {
        match self {
            RegularizerKind::ElasticNet => "elastic",
            RegularizerKind::GroupLasso => "group",
            RegularizerKind::Supnorm => "sup",
        }
    }

    /// Whether the model carries the extra `V = W` split (group lasso and supnorm).
    pub fn uses_row_split(self) -> bool {
        !matches!(self, RegularizerKind::ElasticNet)
    }
}

impl std::fmt::Display for RegularizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elastic" | "elastic-net" => Ok(RegularizerKind::ElasticNet),
            "group" | "group-lasso" => Ok(RegularizerKind::GroupLasso),
            "sup" | "supnorm" => Ok(RegularizerKind::Supnorm),
            other => Err(Error::InvalidParameter(format!(
                "unknown regularizer '{other}' (expected elastic, group or sup)"
            ))),
        }
    }
}

/// Model weights and ADMM settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    /// Penalty on `A = X'W + eb' + E`.
    pub alpha: f64,
    /// Penalty on `U = W`.
    pub mu: f64,
    /// Penalty on `V = W`; ignored for the elastic net.
    pub nu: f64,
    pub tol: f64,
    pub maxit: usize,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("lambda1", self.lambda1, self.lambda1 >= 0.0),
            ("lambda2", self.lambda2, self.lambda2 >= 0.0),
            ("lambda3", self.lambda3, self.lambda3 > 0.0),
            ("alpha", self.alpha, self.alpha > 0.0),
            ("mu", self.mu, self.mu > 0.0),
            ("nu", self.nu, self.nu > 0.0),
            ("tol", self.tol, self.tol > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {value}")));
            }
        }
        if self.maxit == 0 {
            return Err(Error::InvalidParameter("maxit must be positive".into()));
        }
        Ok(())
    }
}

/// `S = X'W + e b'`, the `n x J` matrix of class scores.
pub(crate) fn score_matrix(features: ArrayView2<'_, f64>, clf: &Classifier) -> Array2<f64> {
    features.t().dot(&clf.weights) + &clf.intercept
}

fn check_dims(data: &Dataset, clf: &Classifier) -> Result<()> {
    if data.num_features() != clf.num_features() || data.num_classes() != clf.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "data is p = {}, J = {}; classifier is p = {}, J = {}",
            data.num_features(),
            data.num_classes(),
            clf.num_features(),
            clf.num_classes()
        )));
    }
    Ok(())
}

/// `(1/n) sum_i sum_j c_ij [a_ij]_+`.
pub(crate) fn weighted_hinge(a: ArrayView2<'_, f64>, cost: &CostMask) -> f64 {
    let n = a.nrows() as f64;
    let total: f64 = a.iter().zip(cost.view().iter()).map(|(&v, &c)| c * v.max(0.0)).sum();
    total / n
}

/// Generalized hinge loss `(1/n) sum_i sum_{j != y_i} [b_j + w_j'x_i + 1]_+`.
pub fn hinge_loss(data: &Dataset, clf: &Classifier) -> Result<f64> {
    check_dims(data, clf)?;
    let margins = score_matrix(data.features(), clf) + 1.0;
    Ok(weighted_hinge(margins.view(), &CostMask::from_dataset(data)))
}

pub fn l1_norm(w: ArrayView2<'_, f64>) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

/// `phi(W)` for the chosen regularizer.
pub fn regularizer_value(w: ArrayView2<'_, f64>, kind: RegularizerKind) -> f64 {
    match kind {
        RegularizerKind::ElasticNet => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        RegularizerKind::GroupLasso => w
            .outer_iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum(),
        RegularizerKind::Supnorm => w.outer_iter().map(|row| max_abs(row.iter())).sum(),
    }
}

/// `hinge + lambda1 ||W||_1 + lambda2 phi(W) + (lambda3/2) ||b||^2`.
pub fn objective(data: &Dataset, clf: &Classifier, hp: &Hyperparams, kind: RegularizerKind) -> Result<f64> {
    let loss = hinge_loss(data, clf)?;
    let w = clf.weights.view();
    Ok(loss
        + hp.lambda1 * l1_norm(w)
        + hp.lambda2 * regularizer_value(w, kind)
        + 0.5 * hp.lambda3 * clf.intercept.dot(&clf.intercept))
}

/// Zeroes every entry with `|w_ij| <= rel_tol * max |w|`.
pub fn truncate(w: ArrayView2<'_, f64>, rel_tol: f64) -> Array2<f64> {
    let threshold = rel_tol * max_abs(w.iter());
    w.mapv(|v| if v.abs() <= threshold { 0.0 } else { v })
}

/// Zero counts of a truncated weight matrix against a ground-truth relevance mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityMetrics {
    /// Zeros where the mask says irrelevant (CZ).
    pub correct_zeros: usize,
    /// Zeros where the mask says relevant (IZ).
    pub incorrect_zeros: usize,
    /// Rows with at least one nonzero (NR).
    pub nonzero_rows: usize,
    /// Nonzeros in each column (NZ_j).
    pub nonzeros_per_column: Vec<usize>,
}

pub fn sparsity_metrics(w_trunc: ArrayView2<'_, f64>, relevance: ArrayView2<'_, bool>) -> Result<SparsityMetrics> {
    if w_trunc.dim() != relevance.dim() {
        return Err(Error::DimensionMismatch(format!(
            "weights are {:?} but relevance mask is {:?}",
            w_trunc.dim(),
            relevance.dim()
        )));
    }
    let mut correct_zeros = 0;
    let mut incorrect_zeros = 0;
    for (&w, &relevant) in w_trunc.iter().zip(relevance.iter()) {
        if w == 0.0 {
            if relevant {
                incorrect_zeros += 1;
            } else {
                correct_zeros += 1;
            }
        }
    }
    let nonzero_rows = w_trunc.outer_iter().filter(|row| row.iter().any(|&v| v != 0.0)).count();
    let nonzeros_per_column = w_trunc
        .axis_iter(Axis(1))
        .map(|col| col.iter().filter(|&&v| v != 0.0).count())
        .collect();
    Ok(SparsityMetrics {
        correct_zeros,
        incorrect_zeros,
        nonzero_rows,
        nonzeros_per_column,
    })
}

pub(crate) fn max_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    values.fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn argmax_first(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

//! Two-block ADMM for the regularized all-together multiclass SVM.
//!
//! The auxiliary blocks are `A = X'W + eb' + E`, `U = W` and, for group lasso
//! and supnorm, `V = W`. Each iteration solves the `(W, b)` subproblem on the
//! sum-to-zero set through the reduced coordinates, applies the closed-form
//! prox maps for `A`, `U` (and `V`), then takes multiplier ascent steps.

use std::time::{Duration, Instant};

use ndarray::{s, Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linsolve::{ReducedBasis, Strategy, SystemFactor};
use crate::model::{
    l1_norm, regularizer_value, weighted_hinge, Classifier, CostMask, Dataset, Hyperparams, RegularizerKind,
};
use crate::prox::{update_a, update_u, update_v};

/// Iterations between finiteness checks of the iterates.
const DIVERGENCE_CHECK_EVERY: usize = 100;

/// Default penalties and stopping rule for `n` samples, `p` features, `J` classes:
/// `alpha = 50J/n`, `mu = nu = sqrt(pJ)`, `lambda3 = 1`, `tol = 1e-5`,
/// `maxit = 5000`. `lambda1` and `lambda2` are left at zero.
pub fn default_hyperparams(n: usize, p: usize, num_classes: usize) -> Hyperparams {
    let j = num_classes as f64;
    let pen = (p as f64 * j).sqrt();
    Hyperparams {
        lambda1: 0.0,
        lambda2: 0.0,
        lambda3: 1.0,
        alpha: 50.0 * j / n as f64,
        mu: pen,
        nu: pen,
        tol: 1e-5,
        maxit: 5000,
    }
}

/// Primal blocks, multipliers and history of one ADMM run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub a: Array2<f64>,
    pub u: Array2<f64>,
    /// Present only for group lasso and supnorm.
    pub v: Option<Array2<f64>>,
    pub pi: Array2<f64>,
    pub lam: Array2<f64>,
    /// Present only for group lasso and supnorm.
    pub gam: Option<Array2<f64>>,
    pub iteration: usize,
    pub objective_history: Vec<f64>,
    pub residual_history: Vec<Residuals>,
}

impl SolverState {
    /// All blocks and multipliers at the origin.
    pub fn zeros(n: usize, p: usize, num_classes: usize, kind: RegularizerKind) -> Self {
        let pj = || Array2::zeros((p, num_classes));
        let split = kind.uses_row_split();
        SolverState {
            w: pj(),
            b: Array1::zeros(num_classes),
            a: Array2::zeros((n, num_classes)),
            u: pj(),
            v: split.then(pj),
            pi: Array2::zeros((n, num_classes)),
            lam: pj(),
            gam: split.then(pj),
            iteration: 0,
            objective_history: Vec::new(),
            residual_history: Vec::new(),
        }
    }

    fn check_shape(&self, n: usize, p: usize, j: usize, kind: RegularizerKind) -> Result<()> {
        let pj = (p, j);
        let nj = (n, j);
        let ok = self.w.dim() == pj
            && self.b.len() == j
            && self.a.dim() == nj
            && self.u.dim() == pj
            && self.pi.dim() == nj
            && self.lam.dim() == pj
            && self.v.as_ref().map(|v| v.dim()) == kind.uses_row_split().then_some(pj)
            && self.gam.as_ref().map(|g| g.dim()) == kind.uses_row_split().then_some(pj);
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "initial state does not match n = {n}, p = {p}, J = {j}, {kind}"
            )))
        }
    }

    fn is_finite(&self) -> bool {
        let blocks = [&self.w, &self.a, &self.u, &self.pi, &self.lam];
        blocks.iter().all(|m| m.iter().all(|v| v.is_finite()))
            && self.b.iter().all(|v| v.is_finite())
            && self.v.iter().chain(&self.gam).all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// Normalized primal residuals and relative objective change of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `||X'W + eb' + E - A||_F / sqrt(nJ)`
    pub r_a: f64,
    /// `||W - U||_F / sqrt(pJ)`
    pub r_u: f64,
    /// `||W - V||_F / sqrt(pJ)`; zero for the elastic net.
    pub r_v: f64,
    /// `|F_new - F_old| / (1 + F_old)`
    pub rel_obj_change: f64,
}

impl Residuals {
    /// The quantity compared against `tol`.
    pub fn max(&self) -> f64 {
        self.r_a.max(self.r_u).max(self.r_v).max(self.rel_obj_change)
    }
}

/// Per-iteration diagnostics handed to a progress callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Progress {
    pub iteration: usize,
    pub objective: f64,
    pub r_a: f64,
    pub r_u: f64,
    pub r_v: f64,
}

/// Outcome of [`fit`].
#[derive(Debug, Clone)]
pub struct FitReport {
    pub classifier: Classifier,
    pub iterations: usize,
    /// Split objective at the last iterate.
    pub objective: f64,
    pub residuals: Residuals,
    pub converged: bool,
    pub elapsed: Duration,
    pub state: SolverState,
}

impl PartialEq for FitReport {
    // wall time is not part of the result
    fn eq(&self, other: &Self) -> bool {
        self.classifier == other.classifier
            && self.iterations == other.iterations
            && self.objective == other.objective
            && self.residuals == other.residuals
            && self.converged == other.converged
            && self.state == other.state
    }
}

/// Optional knobs for [`fit_with`].
#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub initial_state: Option<SolverState>,
    /// Forces a linear-solve strategy; automatic when `None`.
    pub strategy: Option<Strategy>,
}

/// Top diagonal of the `(W, b)` system: `lambda2 + mu` for the elastic net,
/// `mu + nu` otherwise.
pub fn system_diagonal(hp: &Hyperparams, kind: RegularizerKind) -> f64 {
    match kind {
        RegularizerKind::ElasticNet => hp.lambda2 + hp.mu,
        RegularizerKind::GroupLasso | RegularizerKind::Supnorm => hp.mu + hp.nu,
    }
}

/// `F1` (elastic net) or `F2` (group lasso, supnorm) at the current blocks.
pub fn split_objective(state: &SolverState, cost: &CostMask, hp: &Hyperparams, kind: RegularizerKind) -> f64 {
    let hinge = weighted_hinge(state.a.view(), cost);
    let structured = match (kind, &state.v) {
        (RegularizerKind::ElasticNet, _) => hp.lambda2 * regularizer_value(state.w.view(), RegularizerKind::ElasticNet),
        (_, Some(v)) => hp.lambda2 * regularizer_value(v.view(), kind),
        (_, None) => hp.lambda2 * regularizer_value(state.w.view(), kind),
    };
    hinge + hp.lambda1 * l1_norm(state.u.view()) + structured + 0.5 * hp.lambda3 * state.b.dot(&state.b)
}

/// `X'W + eb' + E`.
fn affine_scores(x: ArrayView2<'_, f64>, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let mut s = x.t().dot(w);
    s += b;
    s += 1.0;
    s
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `W` with every row zeroed where a split copy (`U`, or `V` when present)
/// has an exactly zero row. Such rows of `W` are within the tolerance of zero,
/// and zeroing a whole row keeps `We = 0`.
fn certified_weights(state: &SolverState) -> Array2<f64> {
    let mut w = state.w.clone();
    let zero_row = |m: &Array2<f64>, g: usize| m.row(g).iter().all(|v| *v == 0.0);
    for g in 0..w.nrows() {
        if zero_row(&state.u, g) || state.v.as_ref().is_some_and(|v| zero_row(v, g)) {
            w.row_mut(g).fill(0.0);
        }
    }
    w
}

fn frobenius_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Solves the `(W, b)` subproblem on `{We = 0, e'b = 0}` with the given factor.
pub fn update_wb(
    state: &SolverState,
    x: ArrayView2<'_, f64>,
    factor: &SystemFactor,
    basis: &ReducedBasis,
    hp: &Hyperparams,
    kind: RegularizerKind,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let (w, b, _) = update_wb_scores(state, x, factor, basis, hp, kind)?;
    Ok((w, b))
}

/// [`update_wb`] that also returns the new `X'W + eb' + E`.
fn update_wb_scores(
    state: &SolverState,
    x: ArrayView2<'_, f64>,
    factor: &SystemFactor,
    basis: &ReducedBasis,
    hp: &Hyperparams,
    kind: RegularizerKind,
) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let expected = system_diagonal(hp, kind);
    if (factor.diag_top() - expected).abs() > 1e-12 * expected
        || factor.alpha() != hp.alpha
        || factor.diag_bottom() != hp.lambda3
    {
        return Err(Error::InvalidParameter(format!(
            "factor built with (alpha, c, lambda3) = ({}, {}, {}), {kind} needs ({}, {expected}, {})",
            factor.alpha(),
            factor.diag_top(),
            factor.diag_bottom(),
            hp.alpha,
            hp.lambda3
        )));
    }
    let p = x.nrows();

    // Theta = alpha A - Pi - alpha E; rhs = [X Theta G + Q G; e' Theta G]
    let mut theta = &state.a * hp.alpha - &state.pi;
    theta -= hp.alpha;
    let mut q = state.u.clone() * hp.mu;
    q -= &state.lam;
    if let (Some(v), Some(gam)) = (&state.v, &state.gam) {
        q -= gam;
        q.scaled_add(hp.nu, v);
    }
    let y = basis.reduce_columns(theta.view())?;
    let q = basis.reduce_columns(q.view())?;
    let (sol, xts) = factor.solve_factored(y.view(), q.view())?;

    let (w, b) = basis.lift_solution(sol.slice(s![..p, ..]), sol.row(p))?;
    let (mut scores, _) = basis.lift_solution(xts.view(), sol.row(p))?;
    scores += &b;
    scores += 1.0;
    Ok((w, b, scores))
}

/// Primal residuals `(r_A, r_U, r_V)` of a state, normalized as in the stopping rule.
pub fn residuals(state: &SolverState, x: ArrayView2<'_, f64>) -> (f64, f64, f64) {
    let (n, j) = state.a.dim();
    let p = state.w.nrows();
    let scores = affine_scores(x, &state.w, &state.b);
    let r_a = frobenius_diff(&scores, &state.a) / ((n * j) as f64).sqrt();
    let pj = ((p * j) as f64).sqrt();
    let r_u = frobenius_diff(&state.w, &state.u) / pj;
    let r_v = state.v.as_ref().map_or(0.0, |v| frobenius_diff(&state.w, v) / pj);
    (r_a, r_u, r_v)
}

/// `|F_new - F_old| / (1 + |F_old|)`.
pub fn relative_change(f_old: f64, f_new: f64) -> f64 {
    (f_new - f_old).abs() / (1.0 + f_old.abs())
}

/// Multiplier ascent: `Pi += alpha (X'W + eb' - A + E)`, `Lambda += mu (W - U)`,
/// `Gamma += nu (W - V)`.
pub fn update_multipliers(state: &mut SolverState, x: ArrayView2<'_, f64>, hp: &Hyperparams) {
    let scores = affine_scores(x, &state.w, &state.b);
    multiplier_step(state, &scores, hp);
}

fn multiplier_step(state: &mut SolverState, scores: &Array2<f64>, hp: &Hyperparams) {
    state.pi.scaled_add(hp.alpha, &(scores - &state.a));
    state.lam.scaled_add(hp.mu, &(&state.w - &state.u));
    if let (Some(v), Some(gam)) = (&state.v, &mut state.gam) {
        gam.scaled_add(hp.nu, &(&state.w - v));
    }
}

/// Fits from the origin with automatic strategy selection.
pub fn fit(data: &Dataset, hp: &Hyperparams, kind: RegularizerKind) -> Result<FitReport> {
    fit_with(data, hp, kind, FitOptions::default(), None)
}

/// Runs ADMM until the stopping rule holds or `maxit` iterations are spent.
///
/// The run stops once `max(rel_obj_change, r_A, r_U[, r_V]) <= tol`. The
/// callback, when given, sees every iteration.
pub fn fit_with(
    data: &Dataset,
    hp: &Hyperparams,
    kind: RegularizerKind,
    options: FitOptions,
    mut progress: Option<&mut dyn FnMut(&Progress)>,
) -> Result<FitReport> {
    hp.validate()?;
    let start = Instant::now();
    let x = data.features();
    let (p, n) = x.dim();
    let j = data.num_classes();
    let cost = CostMask::from_dataset(data);
    let basis = ReducedBasis::new(j)?;
    let factor = SystemFactor::build(x, hp.alpha, system_diagonal(hp, kind), hp.lambda3, options.strategy)?;

    let mut state = match options.initial_state {
        Some(s) => {
            s.check_shape(n, p, j, kind)?;
            s
        }
        None => SolverState::zeros(n, p, j, kind),
    };

    let mut f_old = split_objective(&state, &cost, hp, kind);
    let mut last = Residuals::default();
    let mut converged = false;
    let inv_alpha = 1.0 / hp.alpha;
    let norm_nj = ((n * j) as f64).sqrt();
    let norm_pj = ((p * j) as f64).sqrt();

    for k in 1..=hp.maxit {
        let (w, b, scores) = update_wb_scores(&state, x, &factor, &basis, hp, kind)?;
        state.w = w;
        state.b = b;

        let mut shifted = scores.clone();
        shifted.scaled_add(inv_alpha, &state.pi);
        state.a = update_a(shifted.view(), &cost, hp.alpha)?;
        state.u = update_u(state.w.view(), state.lam.view(), hp.lambda1, hp.mu)?;
        if let Some(gam) = &state.gam {
            state.v = Some(update_v(state.w.view(), gam.view(), hp.lambda2, hp.nu, kind)?);
        }
        multiplier_step(&mut state, &scores, hp);
        state.iteration += 1;

        let f_new = split_objective(&state, &cost, hp, kind);
        last = Residuals {
            r_a: frobenius(&(&scores - &state.a)) / norm_nj,
            r_u: frobenius_diff(&state.w, &state.u) / norm_pj,
            r_v: state.v.as_ref().map_or(0.0, |v| frobenius_diff(&state.w, v) / norm_pj),
            rel_obj_change: relative_change(f_old, f_new),
        };
        state.objective_history.push(f_new);
        state.residual_history.push(last);
        if let Some(cb) = progress.as_mut() {
            cb(&Progress {
                iteration: state.iteration,
                objective: f_new,
                r_a: last.r_a,
                r_u: last.r_u,
                r_v: last.r_v,
            });
        }
        f_old = f_new;

        if (k % DIVERGENCE_CHECK_EVERY == 0 || k == hp.maxit) && (!f_new.is_finite() || !state.is_finite()) {
            return Err(Error::Divergence(state.iteration));
        }
        if last.max() <= hp.tol {
            converged = true;
            break;
        }
    }
    if !converged && !state.is_finite() {
        return Err(Error::Divergence(state.iteration));
    }

    let classifier = Classifier::new(certified_weights(&state), state.b.clone())?;
    Ok(FitReport {
        classifier,
        iterations: state.iteration,
        objective: f_old,
        residuals: last,
        converged,
        elapsed: start.elapsed(),
        state,
    })
}

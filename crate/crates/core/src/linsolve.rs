//! The `(p+1) x (p+1)` SPD system solved in every `(W, b)` update.
//!
//! Feasible `(W, b)` are parameterized as `W = W_hat P'`, `b = P b_hat` with
//! `P = [I; -e']` (`J x (J-1)`), which turns the constrained subproblem into
//! an unconstrained one whose normal equations have the coefficient matrix
//!
//! ```text
//! M = [ alpha X X' + c I    alpha X e      ]  =  D + alpha Z Z',
//!     [ alpha e' X'         n alpha + l3   ]
//! ```
//!
//! with `D = diag(c I_p, l3)` and `Z = [X; e']`. The matrix only depends on
//! quantities fixed for a whole run, so it is factored once. When `n < p` the
//! factor is the `n x n` capacitance matrix `I + alpha Z' D^-1 Z` and solves go
//! through the Woodbury identity.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Maps between full `J`-column quantities and the reduced `J-1` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducedBasis {
    num_classes: usize,
}

impl ReducedBasis {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        Ok(ReducedBasis { num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `P = [I; -e']`.
    pub fn p_matrix(&self) -> Array2<f64> {
        let j = self.num_classes;
        let mut p = Array2::zeros((j, j - 1));
        for k in 0..j - 1 {
            p[[k, k]] = 1.0;
            p[[j - 1, k]] = -1.0;
        }
        p
    }

    /// `G = P (P'P)^-1 = [I; 0] - E / J`.
    pub fn g_matrix(&self) -> Array2<f64> {
        let j = self.num_classes;
        let mut g = Array2::from_elem((j, j - 1), -1.0 / j as f64);
        for k in 0..j - 1 {
            g[[k, k]] += 1.0;
        }
        g
    }

    /// `M G`: column `k` of `M` minus the row means of `M`, for `k < J - 1`.
    pub fn reduce_columns(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let j = self.num_classes;
        if m.ncols() != j {
            return Err(Error::DimensionMismatch(format!(
                "expected {j} columns, got {}",
                m.ncols()
            )));
        }
        let means = m.mean_axis(Axis(1)).expect("J >= 2 columns");
        let mut out = m.slice(s![.., ..j - 1]).to_owned();
        for mut col in out.columns_mut() {
            col -= &means;
        }
        Ok(out)
    }

    /// `W = W_hat P'` and `b = P b_hat`; the last class is minus the sum of the others.
    pub fn lift_solution(
        &self,
        w_hat: ArrayView2<'_, f64>,
        b_hat: ArrayView1<'_, f64>,
    ) -> Result<(Array2<f64>, Array1<f64>)> {
        let j = self.num_classes;
        if w_hat.ncols() != j - 1 || b_hat.len() != j - 1 {
            return Err(Error::DimensionMismatch(format!(
                "reduced solution must have {} columns, got W_hat {:?} and b_hat {}",
                j - 1,
                w_hat.dim(),
                b_hat.len()
            )));
        }
        let mut w = Array2::zeros((w_hat.nrows(), j));
        w.slice_mut(s![.., ..j - 1]).assign(&w_hat);
        w.column_mut(j - 1).assign(&-w_hat.sum_axis(Axis(1)));
        let mut b = Array1::zeros(j);
        b.slice_mut(s![..j - 1]).assign(&b_hat);
        b[j - 1] = -b_hat.sum();
        Ok((w, b))
    }
}

/// How the system is factored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Cholesky factor of the full `(p+1) x (p+1)` matrix.
    Direct,
    /// Cholesky factor of the `n x n` capacitance matrix.
    Woodbury,
}

impl Strategy {
    /// Woodbury whenever the capacitance matrix is strictly smaller.
    pub fn auto(p: usize, n: usize) -> Strategy {
        if n < p {
            Strategy::Woodbury
        } else {
            Strategy::Direct
        }
    }
}

/// Dense lower Cholesky factor `L` with `L L' = A`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
    /// `L'`, so back substitution also reads contiguous rows.
    upper: Array2<f64>,
}

impl Cholesky {
    pub fn factor(a: ArrayView2<'_, f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "Cholesky needs a square matrix, got {:?}",
                a.dim()
            )));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[[j, j]];
            for k in 0..j {
                d -= l[[j, k]] * l[[j, k]];
            }
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::Factorization { pivot: j, value: d });
            }
            let d = d.sqrt();
            l[[j, j]] = d;
            for i in j + 1..n {
                let mut v = a[[i, j]];
                for k in 0..j {
                    v -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = v / d;
            }
        }
        let upper = l.t().as_standard_layout().into_owned();
        Ok(Cholesky { lower: l, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn diagonal(&self) -> ArrayView1<'_, f64> {
        self.lower.diag()
    }

    pub fn lower(&self) -> ArrayView2<'_, f64> {
        self.lower.view()
    }

    /// Solves `A X = B` for every column of `B` in place.
    pub fn solve_in_place(&self, b: &mut Array2<f64>) {
        let n = self.lower.nrows();
        debug_assert_eq!(b.nrows(), n);
        let lower = self.lower.as_slice().expect("owned standard layout");
        let upper = self.upper.as_slice().expect("owned standard layout");
        let mut col = vec![0.0; n];
        for mut out in b.columns_mut() {
            for (c, v) in col.iter_mut().zip(out.iter()) {
                *c = *v;
            }
            for i in 0..n {
                let row = &lower[i * n..i * n + i];
                col[i] = (col[i] - dot(row, &col[..i])) / lower[i * n + i];
            }
            for i in (0..n).rev() {
                let row = &upper[i * n + i + 1..(i + 1) * n];
                col[i] = (col[i] - dot(row, &col[i + 1..])) / upper[i * n + i];
            }
            for (v, c) in out.iter_mut().zip(&col) {
                *v = *c;
            }
        }
    }
}

/// `A B` for a wide `A` and a thin `B`, as one contiguous dot product per
/// output entry.
///
/// General-purpose matrix products repack `A` on every call, which dominates
/// when `B` has only a handful of columns.
pub(crate) fn thin_dot(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (rows, inner) = a.dim();
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), inner);
    let a = a.as_standard_layout();
    let bt = b.t().as_standard_layout().into_owned();
    let (a, bt) = (a.as_slice().expect("standard"), bt.as_slice().expect("standard"));
    let mut out = vec![0.0; rows * m];
    if inner > 0 {
        for (arow, orow) in a.chunks_exact(inner).zip(out.chunks_exact_mut(m)) {
            for (o, bcol) in orow.iter_mut().zip(bt.chunks_exact(inner)) {
                *o = dot(arow, bcol);
            }
        }
    }
    Array2::from_shape_vec((rows, m), out).expect("shape matches")
}

/// `A' B` for a tall `A` and a thin `B`, as one axpy per row of `A` and
/// column of `B`.
pub(crate) fn thin_tdot(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (rows, cols) = a.dim();
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), rows);
    let a = a.as_standard_layout();
    let a = a.as_slice().expect("standard");
    let mut out_t = Array2::<f64>::zeros((m, cols));
    if cols > 0 {
        let os = out_t.as_slice_mut().expect("fresh array");
        for (arow, brow) in a.chunks_exact(cols).zip(b.outer_iter()) {
            for (ocol, &bv) in os.chunks_exact_mut(cols).zip(brow.iter()) {
                for (o, &av) in ocol.iter_mut().zip(arow) {
                    *o += av * bv;
                }
            }
        }
    }
    out_t.t().as_standard_layout().into_owned()
}

/// Four-way unrolled dot product; the independent partial sums let the
/// compiler vectorize without reassociating a single accumulator.
fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (xc, yc) = (x.chunks_exact(4), y.chunks_exact(4));
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (a, b) in xc.zip(yc) {
        for k in 0..4 {
            acc[k] += a[k] * b[k];
        }
    }
    let tail: f64 = xr.iter().zip(yr).map(|(a, b)| a * b).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// A factored `D + alpha Z Z'`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct SystemFactor {
    x: Array2<f64>,
    alpha: f64,
    diag_top: f64,
    diag_bottom: f64,
    strategy: Strategy,
    chol: Cholesky,
    /// `X'X`, kept for the Woodbury path.
    gram: Option<Array2<f64>>,
}

impl SystemFactor {
    /// Factors the system for data `X` (`p x n`), penalty `alpha`, top diagonal
    /// `c` and bottom diagonal `lambda3`. `strategy = None` picks automatically.
    pub fn build(
        x: ArrayView2<'_, f64>,
        alpha: f64,
        diag_top: f64,
        lambda3: f64,
        strategy: Option<Strategy>,
    ) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("c", diag_top), ("lambda3", lambda3)] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        let (p, n) = x.dim();
        let strategy = strategy.unwrap_or_else(|| Strategy::auto(p, n));
        let mut gram = None;
        let chol = match strategy {
            Strategy::Direct => {
                let mut m = Array2::zeros((p + 1, p + 1));
                let xxt = x.dot(&x.t());
                m.slice_mut(s![..p, ..p]).assign(&(xxt * alpha));
                for g in 0..p {
                    m[[g, g]] += diag_top;
                }
                let xe = x.sum_axis(Axis(1)) * alpha;
                m.slice_mut(s![..p, p]).assign(&xe);
                m.slice_mut(s![p, ..p]).assign(&xe);
                m[[p, p]] = n as f64 * alpha + lambda3;
                Cholesky::factor(m.view())?
            }
            Strategy::Woodbury => {
                // I + alpha (X'X / c + e e' / lambda3)
                let xtx = x.t().dot(&x);
                let mut cap = &xtx * (alpha / diag_top);
                cap += alpha / lambda3;
                for i in 0..n {
                    cap[[i, i]] += 1.0;
                }
                gram = Some(xtx);
                Cholesky::factor(cap.view())?
            }
        };
        Ok(SystemFactor {
            x: x.to_owned(),
            alpha,
            diag_top,
            diag_bottom: lambda3,
            strategy,
            chol,
            gram,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn diag_top(&self) -> f64 {
        self.diag_top
    }

    pub fn diag_bottom(&self) -> f64 {
        self.diag_bottom
    }

    /// Diagonal of the Cholesky factor in use; strictly positive by construction.
    pub fn pivots(&self) -> ArrayView1<'_, f64> {
        self.chol.diagonal()
    }

    /// `M s` without forming `M`.
    pub fn apply(&self, sol: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let p = self.x.nrows();
        self.check_rows(sol.nrows())?;
        // Z's = X' s_top + e s_bottom
        let zt = self.zt_dot(sol);
        let mut out = self.z_dot(zt.view()) * self.alpha;
        let mut top = out.slice_mut(s![..p, ..]);
        top.scaled_add(self.diag_top, &sol.slice(s![..p, ..]));
        let mut bottom = out.slice_mut(s![p, ..]);
        bottom.scaled_add(self.diag_bottom, &sol.slice(s![p, ..]));
        Ok(out)
    }

    /// Solves `M S = rhs` for a `(p+1) x m` right-hand side.
    pub fn solve(&self, rhs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_rows(rhs.nrows())?;
        let p = self.x.nrows();
        match self.strategy {
            Strategy::Direct => {
                let mut sol = rhs.to_owned();
                self.chol.solve_in_place(&mut sol);
                Ok(sol)
            }
            Strategy::Woodbury => {
                // M^-1 = D^-1 - alpha D^-1 Z (I + alpha Z' D^-1 Z)^-1 Z' D^-1
                let mut y = rhs.to_owned();
                y.slice_mut(s![..p, ..]).mapv_inplace(|v| v / self.diag_top);
                y.slice_mut(s![p, ..]).mapv_inplace(|v| v / self.diag_bottom);
                let mut t = self.zt_dot(y.view());
                self.chol.solve_in_place(&mut t);
                let mut corr = self.z_dot(t.view());
                corr.slice_mut(s![..p, ..])
                    .mapv_inplace(|v| v * self.alpha / self.diag_top);
                corr.slice_mut(s![p, ..])
                    .mapv_inplace(|v| v * self.alpha / self.diag_bottom);
                y -= &corr;
                Ok(y)
            }
        }
    }

    /// Solves `M S = Z Y + [Q; 0]` for `Y` (`n x m`) and `Q` (`p x m`), returning
    /// `S` together with `X' S_top`.
    ///
    /// On the Woodbury path every `p`-sized product is against `Q` or the final
    /// combination, so only two `p x n` multiplications are needed.
    pub fn solve_factored(&self, y: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let (p, n) = self.x.dim();
        if y.nrows() != n || q.nrows() != p || y.ncols() != q.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected Y with {n} rows and Q with {p} rows and equal widths, got {:?} and {:?}",
                y.dim(),
                q.dim()
            )));
        }
        match (&self.gram, self.strategy) {
            (Some(xtx), Strategy::Woodbury) => {
                let c = self.diag_top;
                let xtq = thin_tdot(self.x.view(), q);
                // T = C^-1 (K Y + X'Q / c) with K = X'X / c + e e' / lambda3
                let mut t = thin_dot(xtx.view(), y) / c;
                t += &(y.sum_axis(Axis(0)) / self.diag_bottom);
                t.scaled_add(1.0 / c, &xtq);
                self.chol.solve_in_place(&mut t);
                let mut r = y.to_owned();
                r.scaled_add(-self.alpha, &t);

                let mut sol = Array2::zeros((p + 1, y.ncols()));
                let mut top = sol.slice_mut(s![..p, ..]);
                top.assign(&thin_dot(self.x.view(), r.view()));
                top += &q;
                top /= c;
                sol.row_mut(p).assign(&(r.sum_axis(Axis(0)) / self.diag_bottom));
                let mut xts = thin_dot(xtx.view(), r.view());
                xts += &xtq;
                xts /= c;
                Ok((sol, xts))
            }
            _ => {
                let mut rhs = Array2::zeros((p + 1, y.ncols()));
                let mut top = rhs.slice_mut(s![..p, ..]);
                top.assign(&thin_dot(self.x.view(), y));
                top += &q;
                rhs.row_mut(p).assign(&y.sum_axis(Axis(0)));
                let sol = self.solve(rhs.view())?;
                let xts = thin_tdot(self.x.view(), sol.slice(s![..p, ..]));
                Ok((sol, xts))
            }
        }
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        let p = self.x.nrows();
        if rows != p + 1 {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {rows} rows, system has {}",
                p + 1
            )));
        }
        Ok(())
    }

    /// `Z' y` for `y` of shape `(p+1) x m`.
    fn zt_dot(&self, y: ArrayView2<'_, f64>) -> Array2<f64> {
        let p = self.x.nrows();
        let mut out = thin_tdot(self.x.view(), y.slice(s![..p, ..]));
        out += &y.slice(s![p, ..]);
        out
    }

    /// `Z t` for `t` of shape `n x m`.
    fn z_dot(&self, t: ArrayView2<'_, f64>) -> Array2<f64> {
        let (p, _) = self.x.dim();
        let mut out = Array2::zeros((p + 1, t.ncols()));
        out.slice_mut(s![..p, ..]).assign(&thin_dot(self.x.view(), t));
        out.slice_mut(s![p, ..]).assign(&t.sum_axis(Axis(0)));
        out
    }
}

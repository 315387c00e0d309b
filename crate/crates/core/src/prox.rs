//! Closed-form proximal maps used by the `A`, `U` and `V` block updates.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::model::{CostMask, RegularizerKind};

fn check_threshold(name: &str, t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} threshold must be >= 0, got {t}"
        )))
    }
}

#[inline]
fn hinge_prox_unchecked(delta: f64, nu: f64) -> f64 {
    if delta > nu {
        delta - nu
    } else if delta >= 0.0 {
        0.0
    } else {
        delta
    }
}

#[inline]
fn soft_threshold_unchecked(delta: f64, nu: f64) -> f64 {
    delta.signum() * (delta.abs() - nu).max(0.0)
}

/// `argmin_a nu [a]_+ + (a - delta)^2 / 2`.
pub fn hinge_prox(delta: f64, nu: f64) -> Result<f64> {
    check_threshold("hinge", nu)?;
    Ok(hinge_prox_unchecked(delta, nu))
}

/// `sign(delta) max(0, |delta| - nu)`, the prox of `nu |.|`.
pub fn soft_threshold(delta: f64, nu: f64) -> Result<f64> {
    check_threshold("soft", nu)?;
    Ok(soft_threshold_unchecked(delta, nu))
}

/// Entrywise hinge prox of `M = X'W + eb' + Pi/alpha + E` with thresholds `c_ij / (n alpha)`.
pub fn update_a(m: ArrayView2<'_, f64>, cost: &CostMask, alpha: f64) -> Result<Array2<f64>> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if m.dim() != cost.view().dim() {
        return Err(Error::DimensionMismatch(format!(
            "A-update input is {:?}, cost mask is {:?}",
            m.dim(),
            cost.view().dim()
        )));
    }
    let scale = 1.0 / (m.nrows() as f64 * alpha);
    Ok(Zip::from(&m)
        .and(&cost.view())
        .map_collect(|&delta, &c| hinge_prox_unchecked(delta, c * scale)))
}

/// Block soft thresholding: the prox of `t ||.||_2`.
pub fn group_row_shrink(z: ArrayView1<'_, f64>, t: f64) -> Result<Array1<f64>> {
    check_threshold("group", t)?;
    let mut out = z.to_owned();
    group_shrink_in_place(out.view_mut(), t);
    Ok(out)
}

fn group_shrink_in_place(mut z: ndarray::ArrayViewMut1<'_, f64>, t: f64) {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t {
        z.fill(0.0);
    } else {
        let scale = (norm - t) / norm;
        z.mapv_inplace(|v| v * scale);
    }
}

/// The prox of `t ||.||_inf`: clips magnitudes at a level `tau` chosen so that
/// the clipped-off mass equals `t`.
pub fn supnorm_row_prox(v: ArrayView1<'_, f64>, t: f64) -> Result<Array1<f64>> {
    check_threshold("supnorm", t)?;
    let mut out = v.to_owned();
    let mut scratch = Vec::with_capacity(v.len());
    supnorm_prox_in_place(out.view_mut(), t, &mut scratch);
    Ok(out)
}

fn supnorm_prox_in_place(mut v: ndarray::ArrayViewMut1<'_, f64>, t: f64, sorted: &mut Vec<f64>) {
    if t == 0.0 {
        return;
    }
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= t {
        v.fill(0.0);
        return;
    }
    sorted.clear();
    sorted.extend(v.iter().map(|x| x.abs()));
    // stable, descending
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));

    // r_hat = max { r : t - sum_{s<=r} (u_s - u_r) > 0 }; the left side is
    // nonincreasing in r, and r = 1 always qualifies for t > 0.
    let mut prefix = 0.0;
    let mut best_sum = sorted[0];
    let mut r_hat = 1;
    for (idx, &u_r) in sorted.iter().enumerate() {
        prefix += u_r;
        let r = idx + 1;
        if t - (prefix - r as f64 * u_r) > 0.0 {
            r_hat = r;
            best_sum = prefix;
        } else {
            break;
        }
    }
    let tau = (best_sum - t) / r_hat as f64;
    v.mapv_inplace(|x| x.signum() * x.abs().min(tau));
}

/// `U = S_{lambda1/mu}(W + Lambda/mu)` entrywise.
pub fn update_u(w: ArrayView2<'_, f64>, lam: ArrayView2<'_, f64>, lambda1: f64, mu: f64) -> Result<Array2<f64>> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
    }
    let t = lambda1 / mu;
    check_threshold("U-update", t)?;
    let inv_mu = 1.0 / mu;
    Ok(Zip::from(&w)
        .and(&lam)
        .map_collect(|&w, &l| soft_threshold_unchecked(w + inv_mu * l, t)))
}

/// Row-wise prox of `(lambda2/nu) ||.||_q` applied to `Z = W + Gamma/nu`,
/// with `q = 2` for group lasso and `q = inf` for supnorm.
pub fn update_v(
    w: ArrayView2<'_, f64>,
    gam: ArrayView2<'_, f64>,
    lambda2: f64,
    nu: f64,
    kind: RegularizerKind,
) -> Result<Array2<f64>> {
    if nu.is_nan() || nu <= 0.0 {
        return Err(Error::InvalidParameter(format!("nu must be > 0, got {nu}")));
    }
    let t = lambda2 / nu;
    check_threshold("V-update", t)?;
    let mut z = &w + &(&gam * (1.0 / nu));
    match kind {
        RegularizerKind::GroupLasso => {
            for row in z.outer_iter_mut() {
                group_shrink_in_place(row, t);
            }
        }
        RegularizerKind::Supnorm => {
            let mut scratch = Vec::with_capacity(z.ncols());
            for row in z.outer_iter_mut() {
                supnorm_prox_in_place(row, t, &mut scratch);
            }
        }
        RegularizerKind::ElasticNet => return Err(Error::InvalidParameter("elastic net has no V block".into())),
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm2(v: ArrayView1<'_, f64>) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn dist2(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
    }

    fn supnorm(v: ArrayView1<'_, f64>) -> f64 {
        v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn scalar_examples() {
        assert_eq!(hinge_prox(-1.0, 0.5).unwrap(), -1.0);
        assert_eq!(hinge_prox(0.3, 0.5).unwrap(), 0.0);
        assert_abs_diff_eq!(hinge_prox(2.0, 0.5).unwrap(), 1.5);
        assert_eq!(soft_threshold(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(soft_threshold(-0.5, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(soft_threshold(1.2, 0.5).unwrap(), 0.7, epsilon = 1e-15);
        assert!(hinge_prox(1.0, -0.1).is_err());
        assert!(soft_threshold(1.0, -0.1).is_err());
        assert!(group_row_shrink(array![1.0].view(), -1.0).is_err());
        assert!(supnorm_row_prox(array![1.0].view(), -1.0).is_err());
    }

    #[test]
    fn group_examples() {
        let z = array![0.06, 0.08];
        assert_eq!(group_row_shrink(z.view(), 0.5).unwrap(), array![0.0, 0.0]);
        let out = group_row_shrink(array![3.0, 4.0].view(), 2.5).unwrap();
        assert_abs_diff_eq!(out[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 2.0, epsilon = 1e-15);
        assert_eq!(group_row_shrink(z.view(), 0.0).unwrap(), z);
    }

    #[test]
    fn supnorm_examples() {
        let out = supnorm_row_prox(array![0.4, -0.3].view(), 1.0).unwrap();
        assert_eq!(out, array![0.0, 0.0]);
        let out = supnorm_row_prox(array![3.0, 1.0].view(), 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 2.0);
        assert_abs_diff_eq!(out[1], 1.0);
        let out = supnorm_row_prox(array![2.0, 2.0, 1.0].view(), 1.5).unwrap();
        assert_abs_diff_eq!(out[0], 1.25);
        assert_abs_diff_eq!(out[1], 1.25);
        assert_abs_diff_eq!(out[2], 1.0);
        // signs are carried through
        let out = supnorm_row_prox(array![-2.0, 2.0, -1.0].view(), 1.5).unwrap();
        assert_abs_diff_eq!(out[0], -1.25);
        assert_abs_diff_eq!(out[2], -1.0);
    }

    #[test]
    fn update_a_examples() {
        let cost = CostMask::new(&[1, 2], 3);
        // alpha = 0.5, n = 2 -> threshold 1 where c = 1
        let m = array![[2.0, 2.0, 0.5], [-1.0, 3.0, -0.2]];
        let out = update_a(m.view(), &cost, 0.5).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let c = cost.view()[[i, j]];
                assert_eq!(out[[i, j]], hinge_prox(m[[i, j]], c).unwrap());
            }
        }
        // c = 0 entries pass through
        assert_eq!(out[[0, 0]], 2.0);
        assert_eq!(out[[1, 1]], 3.0);
        let negative = array![[-1.0, -2.0, -0.1], [-4.0, -0.5, -3.0]];
        assert_eq!(update_a(negative.view(), &cost, 0.5).unwrap(), negative);
        assert!(update_a(m.view(), &cost, 0.0).is_err());
    }

    #[test]
    fn matrix_updates_with_zero_weight_are_identity() {
        let w = array![[1.0, -2.0, 0.3], [0.0, 0.5, -0.5]];
        let lam = array![[0.2, 0.1, 0.0], [1.0, -1.0, 2.0]];
        let expected = &w + &(&lam / 2.0);
        assert_eq!(update_u(w.view(), lam.view(), 0.0, 2.0).unwrap(), expected);
        for kind in [RegularizerKind::GroupLasso, RegularizerKind::Supnorm] {
            assert_eq!(update_v(w.view(), lam.view(), 0.0, 2.0, kind).unwrap(), expected);
        }
        assert!(update_v(w.view(), lam.view(), 1.0, 2.0, RegularizerKind::ElasticNet).is_err());
    }

    #[test]
    fn matrix_updates_match_rowwise_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = Array2::from_shape_fn((4, 3), |_| rng.random_range(-2.0..2.0));
        let g = Array2::from_shape_fn((4, 3), |_| rng.random_range(-2.0..2.0));
        let (lambda, pen) = (0.8, 1.6);
        let u = update_u(w.view(), g.view(), lambda, pen).unwrap();
        let group = update_v(w.view(), g.view(), lambda, pen, RegularizerKind::GroupLasso).unwrap();
        let sup = update_v(w.view(), g.view(), lambda, pen, RegularizerKind::Supnorm).unwrap();
        for i in 0..4 {
            let z: Array1<f64> = (0..3).map(|j| w[[i, j]] + g[[i, j]] / pen).collect();
            let g_row = group_row_shrink(z.view(), 0.5).unwrap();
            let s_row = supnorm_row_prox(z.view(), 0.5).unwrap();
            for j in 0..3 {
                assert_abs_diff_eq!(u[[i, j]], soft_threshold(z[j], 0.5).unwrap(), epsilon = 1e-14);
                assert_abs_diff_eq!(group[[i, j]], g_row[j], epsilon = 1e-14);
                assert_abs_diff_eq!(sup[[i, j]], s_row[j], epsilon = 1e-14);
            }
        }
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-5.0..5.0f64, len)
    }

    proptest! {
        #[test]
        fn prox_inequality_holds(
            z in vec_strategy(5),
            d in vec_strategy(5),
            t in 0.0..3.0f64,
            eps in prop_oneof![Just(1e-3), Just(-1e-3)],
        ) {
            let z = Array1::from(z);
            let d = Array1::from(d);
            let d = if norm2(d.view()) > 0.0 { &d / norm2(d.view()) } else { d };

            let g = group_row_shrink(z.view(), t).unwrap();
            let f_group = |v: ArrayView1<'_, f64>| t * norm2(v) + 0.5 * dist2(v, z.view());
            let g_moved = &g + &(&d * eps);
            prop_assert!(f_group(g.view()) <= f_group(g_moved.view()) + 1e-10);

            let s = supnorm_row_prox(z.view(), t).unwrap();
            let f_sup = |v: ArrayView1<'_, f64>| t * supnorm(v) + 0.5 * dist2(v, z.view());
            let s_moved = &s + &(&d * eps);
            prop_assert!(f_sup(s.view()) <= f_sup(s_moved.view()) + 1e-10);

            let delta = z[0];
            let h = hinge_prox(delta, t).unwrap();
            let f_h = |a: f64| t * a.max(0.0) + 0.5 * (a - delta).powi(2);
            prop_assert!(f_h(h) <= f_h(h + eps * d[0].signum()) + 1e-10);
            let st = soft_threshold(delta, t).unwrap();
            let f_s = |u: f64| t * u.abs() + 0.5 * (u - delta).powi(2);
            prop_assert!(f_s(st) <= f_s(st + eps * d[0].signum()) + 1e-10);
        }

        #[test]
        fn prox_maps_are_nonexpansive(a in vec_strategy(4), b in vec_strategy(4), t in 0.0..3.0f64) {
            let a = Array1::from(a);
            let b = Array1::from(b);
            let gap = dist2(a.view(), b.view()).sqrt();
            let pg = dist2(
                group_row_shrink(a.view(), t).unwrap().view(),
                group_row_shrink(b.view(), t).unwrap().view(),
            ).sqrt();
            prop_assert!(pg <= gap + 1e-12);
            let ps = dist2(
                supnorm_row_prox(a.view(), t).unwrap().view(),
                supnorm_row_prox(b.view(), t).unwrap().view(),
            ).sqrt();
            prop_assert!(ps <= gap + 1e-12);
            for i in 0..4 {
                let gi = (a[i] - b[i]).abs();
                prop_assert!((hinge_prox(a[i], t).unwrap() - hinge_prox(b[i], t).unwrap()).abs() <= gi + 1e-12);
                prop_assert!((soft_threshold(a[i], t).unwrap() - soft_threshold(b[i], t).unwrap()).abs() <= gi + 1e-12);
            }
        }
    }
}

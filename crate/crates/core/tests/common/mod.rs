//! Reference implementations shared by the integration tests. Nothing here
//! calls into the solver code it is used to check.
#![allow(dead_code)]

use msvm::{Dataset, RegularizerKind};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Minimizes a convex `f` on `[lo, hi]` by repeatedly zooming a uniform grid
/// around its best point.
pub fn grid_minimize(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    const POINTS: usize = 200;
    let mut best = lo;
    for _ in 0..12 {
        let step = (hi - lo) / POINTS as f64;
        let mut best_val = f64::INFINITY;
        for k in 0..=POINTS {
            let x = lo + step * k as f64;
            let v = f(x);
            if v < best_val {
                best_val = v;
                best = x;
            }
        }
        lo = best - 2.0 * step;
        hi = best + 2.0 * step;
    }
    best
}

/// Golden-section search for a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}

/// Euclidean projection onto `{x : ||x||_1 <= t}`, locating the soft
/// threshold by bisection.
pub fn project_l1_ball(z: &[f64], t: f64) -> Vec<f64> {
    let l1: f64 = z.iter().map(|v| v.abs()).sum();
    if l1 <= t {
        return z.to_vec();
    }
    let mass = |theta: f64| z.iter().map(|v| (v.abs() - theta).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    z.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}

/// Solves `A x = b` column by column with partially pivoted Gaussian elimination.
pub fn gauss_solve(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut aug = Array2::zeros((n, n + m));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = a[[i, j]];
        }
        for j in 0..m {
            aug[[i, n + j]] = b[[i, j]];
        }
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[[i, col]].abs().total_cmp(&aug[[j, col]].abs()))
            .unwrap();
        for k in 0..n + m {
            let tmp = aug[[col, k]];
            aug[[col, k]] = aug[[piv, k]];
            aug[[piv, k]] = tmp;
        }
        for i in col + 1..n {
            let f = aug[[i, col]] / aug[[col, col]];
            for k in col..n + m {
                aug[[i, k]] -= f * aug[[col, k]];
            }
        }
    }
    let mut x = Array2::zeros((n, m));
    for j in 0..m {
        for i in (0..n).rev() {
            let mut v = aug[[i, n + j]];
            for k in i + 1..n {
                v -= aug[[i, k]] * x[[k, j]];
            }
            x[[i, j]] = v / aug[[i, i]];
        }
    }
    x
}

/// `[[alpha X X' + c I, alpha X e], [alpha e'X', n alpha + l3]]`, written out entrywise.
pub fn dense_system(x: &Array2<f64>, alpha: f64, c: f64, l3: f64) -> Array2<f64> {
    let (p, n) = x.dim();
    let mut m = Array2::zeros((p + 1, p + 1));
    for g in 0..p {
        for h in 0..p {
            let dot: f64 = (0..n).map(|i| x[[g, i]] * x[[h, i]]).sum();
            m[[g, h]] = alpha * dot + if g == h { c } else { 0.0 };
        }
        let row_sum: f64 = (0..n).map(|i| x[[g, i]]).sum();
        m[[g, p]] = alpha * row_sum;
        m[[p, g]] = alpha * row_sum;
    }
    m[[p, p]] = n as f64 * alpha + l3;
    m
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// The primal objective written as plain loops.
pub fn naive_objective(
    x: &Array2<f64>,
    labels: &[usize],
    w: &Array2<f64>,
    b: &Array1<f64>,
    lambdas: [f64; 3],
    kind: RegularizerKind,
) -> f64 {
    let (p, n) = x.dim();
    let j = w.ncols();
    let mut loss = 0.0;
    for i in 0..n {
        for c in 0..j {
            if c + 1 == labels[i] {
                continue;
            }
            let mut s = b[c] + 1.0;
            for g in 0..p {
                s += w[[g, c]] * x[[g, i]];
            }
            loss += s.max(0.0);
        }
    }
    loss /= n as f64;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let phi: f64 = match kind {
        RegularizerKind::ElasticNet => 0.5 * w.iter().map(|v| v * v).sum::<f64>(),
        RegularizerKind::GroupLasso => (0..p)
            .map(|g| (0..j).map(|c| w[[g, c]] * w[[g, c]]).sum::<f64>().sqrt())
            .sum(),
        RegularizerKind::Supnorm => (0..p).map(|g| (0..j).fold(0.0f64, |m, c| m.max(w[[g, c]].abs()))).sum(),
    };
    let bb: f64 = b.iter().map(|v| v * v).sum();
    loss + lambdas[0] * l1 + lambdas[1] * phi + 0.5 * lambdas[2] * bb
}

/// Best objective found by projected subgradient descent over the sum-to-zero
/// set from several random starts, with diminishing steps.
pub fn subgradient_minimum(
    data: &Dataset,
    lambdas: [f64; 3],
    kind: RegularizerKind,
    starts: usize,
    iters: usize,
    seed: u64,
) -> f64 {
    let x = data.features().to_owned();
    let labels = data.labels();
    let (p, n) = x.dim();
    let j = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for start in 0..starts {
        let scale = if start == 0 { 0.0 } else { 1.0 };
        let mut w = Array2::from_shape_fn((p, j), |_| scale * rng.random_range(-1.0..1.0));
        let mut b = Array1::from_shape_fn(j, |_| scale * rng.random_range(-1.0..1.0));
        center_rows(&mut w, &mut b);
        for k in 0..iters {
            let f = naive_objective(&x, labels, &w, &b, lambdas, kind);
            best = best.min(f);
            let (mut gw, mut gb) = (Array2::zeros((p, j)), Array1::zeros(j));
            for i in 0..n {
                for c in 0..j {
                    if c + 1 == labels[i] {
                        continue;
                    }
                    let s: f64 = b[c] + 1.0 + (0..p).map(|g| w[[g, c]] * x[[g, i]]).sum::<f64>();
                    if s > 0.0 {
                        gb[c] += 1.0 / n as f64;
                        for g in 0..p {
                            gw[[g, c]] += x[[g, i]] / n as f64;
                        }
                    }
                }
            }
            for g in 0..p {
                let norm = (0..j).map(|c| w[[g, c]] * w[[g, c]]).sum::<f64>().sqrt();
                let max = (0..j).fold(0.0f64, |m, c| m.max(w[[g, c]].abs()));
                let argmax = (0..j).find(|&c| w[[g, c]].abs() == max);
                for c in 0..j {
                    let v = w[[g, c]];
                    gw[[g, c]] += lambdas[0] * v.signum() * f64::from(u8::from(v != 0.0));
                    gw[[g, c]] += lambdas[1]
                        * match kind {
                            RegularizerKind::ElasticNet => v,
                            RegularizerKind::GroupLasso if norm > 0.0 => v / norm,
                            RegularizerKind::Supnorm if max > 0.0 && argmax == Some(c) => v.signum(),
                            _ => 0.0,
                        };
                }
            }
            gb.scaled_add(lambdas[2], &b);
            let step = 0.5 / (1.0 + k as f64).sqrt();
            w.scaled_add(-step, &gw);
            b.scaled_add(-step, &gb);
            center_rows(&mut w, &mut b);
        }
        best = best.min(naive_objective(&x, labels, &w, &b, lambdas, kind));
    }
    best
}

/// Projects onto `{We = 0, e'b = 0}`.
fn center_rows(w: &mut Array2<f64>, b: &mut Array1<f64>) {
    for mut row in w.rows_mut() {
        let m = row.mean().unwrap();
        row -= m;
    }
    let m = b.mean().unwrap();
    *b -= m;
}

/// Gaussian classes with shifted means in the first two coordinates.
pub fn random_instance(seed: u64, n: usize, p: usize, j: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % j + 1).collect();
    let shifts: Vec<f64> = (0..j * p).map(|_| rng.random_range(-1.5..1.5)).collect();
    let x = Array2::from_shape_fn((p, n), |(g, i)| {
        let noise: f64 = rng.sample(StandardNormal);
        noise + if g < 2 { shifts[(labels[i] - 1) * p + g] } else { 0.0 }
    });
    Dataset::new(x, labels, j).unwrap()
}

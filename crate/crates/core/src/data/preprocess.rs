//! Feature standardization and between/within-class feature ranking.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::model::Dataset;

/// Per-feature mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Result<Self> {
        let n = data.num_samples();
        if n < 2 {
            return Err(Error::InvalidData(format!(
                "standardization needs at least 2 samples, got {n}"
            )));
        }
        let x = data.features();
        let mean = x.mean_axis(Axis(1)).expect("n >= 2");
        let std = x.std_axis(Axis(1), 1.0);
        Ok(Standardizer { mean, std })
    }

    /// Indices of features with zero spread.
    pub fn constant_features(&self) -> Vec<usize> {
        self.std
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0.0)
            .map(|(g, _)| g)
            .collect()
    }

    /// `(x - mean) / std` per feature; constant features become zero rows.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.num_features() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "standardizer fitted on {} features, data has {}",
                self.mean.len(),
                data.num_features()
            )));
        }
        let mut x: Array2<f64> = data.features().to_owned();
        for ((mut row, &m), &s) in x.outer_iter_mut().zip(&self.mean).zip(&self.std) {
            if s == 0.0 {
                row.fill(0.0);
            } else {
                row.mapv_inplace(|v| (v - m) / s);
            }
        }
        Dataset::new(x, data.labels().to_vec(), data.num_classes())
    }
}

/// Standardizes with the data's own statistics. Returns the new data set and
/// the indices of constant features, which are zeroed rather than divided.
pub fn standardize(data: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    let scaler = Standardizer::fit(data)?;
    let constant = scaler.constant_features();
    for g in &constant {
        log::warn!("feature {} has zero variance; set to zero", g + 1);
    }
    Ok((scaler.apply(data)?, constant))
}

/// Ratio of between-class to within-class sums of squares for every feature.
///
/// A feature with zero within-class spread scores `+inf` if it separates the
/// class means and `0` if it is constant.
pub fn gene_rank(data: &Dataset) -> Result<Vec<f64>> {
    let counts = data.class_counts();
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidData(format!("class {} has no samples", j + 1)));
    }
    let n = data.num_samples();
    if n < data.num_classes() + 1 {
        return Err(Error::InvalidData(format!(
            "ranking needs n >= J + 1, got n = {n}, J = {}",
            data.num_classes()
        )));
    }
    let x = data.features();
    let labels = data.labels();
    let j = data.num_classes();
    let scores = x
        .outer_iter()
        .map(|row| {
            let overall = row.mean().expect("n >= 1");
            let mut class_mean = vec![0.0; j];
            for (&v, &y) in row.iter().zip(labels) {
                class_mean[y - 1] += v;
            }
            for (m, &c) in class_mean.iter_mut().zip(&counts) {
                *m /= c as f64;
            }
            let mut between = 0.0;
            let mut within = 0.0;
            for (&v, &y) in row.iter().zip(labels) {
                between += (class_mean[y - 1] - overall).powi(2);
                within += (v - class_mean[y - 1]).powi(2);
            }
            if within > 0.0 {
                between / within
            } else if between > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect();
    Ok(scores)
}

/// Indices of the `k` largest scores (ties to the smaller index), ascending.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={}, got {k}",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

/// Keeps only the listed feature rows.
pub fn select_features(data: &Dataset, indices: &[usize]) -> Result<Dataset> {
    if let Some(&g) = indices.iter().find(|&&g| g >= data.num_features()) {
        return Err(Error::InvalidParameter(format!(
            "feature index {g} out of range for p = {}",
            data.num_features()
        )));
    }
    let x = data.features().select(Axis(0), indices);
    Dataset::new(x, data.labels().to_vec(), data.num_classes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, p: usize, n: usize, j: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((p, n), |_| rng.random_range(-3.0..5.0));
        Dataset::new(x, (0..n).map(|i| i % j + 1).collect(), j).unwrap()
    }

    #[test]
    fn standardized_moments() {
        let data = random_data(1, 5, 4, 2);
        let (out, constant) = standardize(&data).unwrap();
        assert!(constant.is_empty());
        for row in out.features().outer_iter() {
            let m = row.mean().unwrap();
            let s = row.std(1.0);
            assert!(m.abs() <= 1e-12);
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
        let (twice, _) = standardize(&out).unwrap();
        for (a, b) in twice.features().iter().zip(out.features().iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_feature_is_zeroed() {
        let data = Dataset::new(array![[1.0, 2.0, 4.0], [3.0, 3.0, 3.0]], vec![1, 2, 1], 2).unwrap();
        let (out, constant) = standardize(&data).unwrap();
        assert_eq!(constant, vec![1]);
        assert!(out.features().row(1).iter().all(|&v| v == 0.0));
        let one = Dataset::new(array![[1.0]], vec![1], 2).unwrap();
        assert!(standardize(&one).is_err());
    }

    #[test]
    fn rank_degenerate_features() {
        let data = Dataset::new(
            array![[2.0, 2.0, 2.0, 2.0], [5.0, -1.0, 5.0, -1.0], [0.3, 1.0, -0.2, 4.0]],
            vec![1, 2, 1, 2],
            2,
        )
        .unwrap();
        let r = gene_rank(&data).unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], f64::INFINITY);
        assert!(r[2].is_finite() && r[2] > 0.0);
        assert_eq!(select_top_k(&r, 1).unwrap(), vec![1]);
    }

    #[test]
    fn rank_matches_two_loop_formula() {
        let data = random_data(2, 6, 11, 2);
        let r = gene_rank(&data).unwrap();
        let x = data.features();
        for g in 0..6 {
            let mut sums = [0.0; 2];
            let mut cnt = [0.0; 2];
            let mut total = 0.0;
            for i in 0..11 {
                let c = data.labels()[i] - 1;
                sums[c] += x[[g, i]];
                cnt[c] += 1.0;
                total += x[[g, i]];
            }
            let m = total / 11.0;
            let (mut num, mut den) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..2 {
                    if data.labels()[i] == j + 1 {
                        let mj = sums[j] / cnt[j];
                        num += (mj - m) * (mj - m);
                        den += (x[[g, i]] - mj) * (x[[g, i]] - mj);
                    }
                }
            }
            assert_abs_diff_eq!(r[g], num / den, epsilon = 1e-12 * (1.0 + r[g]));
        }
    }

    #[test]
    fn rank_errors() {
        let data = Dataset::new(array![[1.0, 2.0, 3.0]], vec![1, 1, 1], 2).unwrap();
        assert!(gene_rank(&data).is_err());
        let data = Dataset::new(array![[1.0, 2.0]], vec![1, 2], 2).unwrap();
        assert!(gene_rank(&data).is_err());
    }

    #[test]
    fn top_k_examples() {
        let scores = [0.1, 0.9, 0.5];
        assert_eq!(select_top_k(&scores, 2).unwrap(), vec![1, 2]);
        assert_eq!(select_top_k(&scores, 3).unwrap(), vec![0, 1, 2]);
        assert!(select_top_k(&scores, 0).is_err());
        assert!(select_top_k(&scores, 4).is_err());
        assert_eq!(select_top_k(&[1.0, 1.0, 1.0], 2).unwrap(), vec![0, 1]);
    }

    proptest! {
        #[test]
        fn top_k_agrees_with_full_sort(scores in prop::collection::vec(0u8..20, 1..30), k_frac in 0.0..1.0f64) {
            let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
            let k = 1 + ((scores.len() - 1) as f64 * k_frac) as usize;
            let mut pairs: Vec<(f64, usize)> = scores.iter().copied().zip(0..).collect();
            pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut expected: Vec<usize> = pairs[..k].iter().map(|p| p.1).collect();
            expected.sort();
            prop_assert_eq!(select_top_k(&scores, k).unwrap(), expected);
        }

        #[test]
        fn rank_invariant_under_affine_maps(seed in 0u64..1000, a in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64], c in -10.0..10.0f64) {
            let data = random_data(seed, 3, 9, 3);
            let mapped = Dataset::new(data.features().mapv(|v| a * v + c), data.labels().to_vec(), 3).unwrap();
            let r1 = gene_rank(&data).unwrap();
            let r2 = gene_rank(&mapped).unwrap();
            for (x, y) in r1.iter().zip(&r2) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
            }
        }
    }
}

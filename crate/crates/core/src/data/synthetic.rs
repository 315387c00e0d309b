//! Gaussian-mixture generators for the two synthetic benchmarks.
//!
//! * five-class: `p = 10`; the first two coordinates of class `j` are drawn
//!   from `N(mu_j, 2I)` with `mu_j = 2 (cos((2j-1)pi/5), sin((2j-1)pi/5))`,
//!   the other eight are standard normal noise.
//! * four-class: `p` coordinates, class means supported on overlapping blocks
//!   of size `s`, equicorrelated (`rho`) covariance on the informative block.
//!
//! Classes are balanced: sample `i` gets label `i mod J + 1`.

use std::f64::consts::PI;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linsolve::Cholesky;
use crate::model::Dataset;

/// Which benchmark to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    FiveClass,
    FourClass { p: usize, s: usize, rho: f64 },
}

/// Generator settings; `seed` fixes the whole draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub variant: Variant,
    pub n: usize,
    pub seed: u64,
}

/// Train and test samples from one distribution plus the ground-truth support of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// `p x J`; `true` where the weight is informative.
    pub relevance: Array2<bool>,
}

impl Variant {
    pub fn num_classes(&self) -> usize {
        match self {
            Variant::FiveClass => 5,
            Variant::FourClass { .. } => 4,
        }
    }

    pub fn num_features(&self) -> usize {
        match self {
            Variant::FiveClass => 10,
            Variant::FourClass { p, .. } => *p,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let j = self.num_classes();
        if n < j {
            return Err(Error::InvalidParameter(format!("need at least {j} samples, got {n}")));
        }
        if let Variant::FourClass { p, s, rho } = *self {
            if s == 0 || s % 2 != 0 {
                return Err(Error::InvalidParameter(format!(
                    "block size s must be even and positive, got {s}"
                )));
            }
            if 2 * p < 3 * s {
                return Err(Error::InvalidParameter(format!("need p >= 3s/2, got p = {p}, s = {s}")));
            }
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::InvalidParameter(format!("rho must be in [0, 1), got {rho}")));
            }
        }
        Ok(())
    }

    /// Ground-truth support of the class means.
    pub fn relevance(&self) -> Array2<bool> {
        let p = self.num_features();
        let j = self.num_classes();
        let mut mask = Array2::from_elem((p, j), false);
        match *self {
            Variant::FiveClass => mask.slice_mut(s![..2, ..]).fill(true),
            Variant::FourClass { s, .. } => {
                mask.slice_mut(s![..s, ..2]).fill(true);
                mask.slice_mut(s![s / 2..3 * s / 2, 2..]).fill(true);
            }
        }
        mask
    }
}

/// `mu_j` of the five-class mixture, `j` in `1..=5`.
pub fn five_class_mean(j: usize) -> [f64; 2] {
    let angle = (2.0 * j as f64 - 1.0) * PI / 5.0;
    [2.0 * angle.cos(), 2.0 * angle.sin()]
}

/// Balanced labels `i mod J + 1`: counts differ by at most one, extras go to low labels.
pub fn balanced_labels(n: usize, num_classes: usize) -> Vec<usize> {
    (0..n).map(|i| i % num_classes + 1).collect()
}

/// Draws samples for one variant from a seeded generator.
pub struct Sampler {
    variant: Variant,
    block_factor: Option<Array2<f64>>,
}

impl Sampler {
    pub fn new(variant: Variant) -> Result<Self> {
        variant.validate(variant.num_classes())?;
        let block_factor = match variant {
            Variant::FiveClass => None,
            Variant::FourClass { s, rho, .. } => {
                let mut block = Array2::from_elem((s, s), rho);
                for i in 0..s {
                    block[[i, i]] = 1.0;
                }
                Some(Cholesky::factor(block.view())?.lower().to_owned())
            }
        };
        Ok(Sampler { variant, block_factor })
    }

    /// `n` balanced samples drawn from `rng`.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Dataset> {
        self.variant.validate(n)?;
        let j = self.variant.num_classes();
        let p = self.variant.num_features();
        let labels = balanced_labels(n, j);
        let mut x = Array2::zeros((p, n));
        for (i, &y) in labels.iter().enumerate() {
            let mut col = x.column_mut(i);
            match self.variant {
                Variant::FiveClass => {
                    let mu = five_class_mean(y);
                    let sd = 2f64.sqrt();
                    col[0] = mu[0] + sd * rng.sample::<f64, _>(StandardNormal);
                    col[1] = mu[1] + sd * rng.sample::<f64, _>(StandardNormal);
                    for g in 2..p {
                        col[g] = rng.sample(StandardNormal);
                    }
                }
                Variant::FourClass { s, .. } => {
                    let z: Array1<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
                    col.assign(&z);
                    let (start, sign) = match y {
                        1 => (0, 1.0),
                        2 => (0, -1.0),
                        3 => (s / 2, 1.0),
                        _ => (s / 2, -1.0),
                    };
                    let l = self.block_factor.as_ref().expect("four-class factor");
                    let correlated = l.dot(&z.slice(s![start..start + s]));
                    let mut block = col.slice_mut(s![start..start + s]);
                    block.assign(&correlated);
                    block += sign;
                }
            }
        }
        Dataset::new(x, labels, j)
    }
}

/// Five-class data set and its relevance mask (rows 1-2 relevant in every column).
pub fn gen_five_class(n: usize, seed: u64) -> Result<(Dataset, Array2<bool>)> {
    let variant = Variant::FiveClass;
    let data = Sampler::new(variant)?.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((data, variant.relevance()))
}

/// Four-class data set and its relevance mask.
pub fn gen_four_class(n: usize, p: usize, s: usize, rho: f64, seed: u64) -> Result<(Dataset, Array2<bool>)> {
    let variant = Variant::FourClass { p, s, rho };
    let data = Sampler::new(variant)?.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((data, variant.relevance()))
}

impl SyntheticSpec {
    /// Training set of `n` samples followed by `n_test` test samples, both from
    /// one generator seeded with `seed`.
    pub fn generate(&self, n_test: usize) -> Result<LabeledSplit> {
        let sampler = Sampler::new(self.variant)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let train = sampler.sample(self.n, &mut rng)?;
        let test = sampler.sample(n_test, &mut rng)?;
        Ok(LabeledSplit {
            train,
            test,
            relevance: self.variant.relevance(),
        })
    }
}

//! Gaussian-mixture domain shift benchmark.
//!
//! The train domain is a mixture of labeled Gaussian classes. The test
//! domain draws fresh samples from the same classes and then rotates them
//! by a fixed angle in every plane of a random orthonormal basis and adds a
//! fixed shift. Nearest-neighbor accuracy of test queries against the train
//! set is compared before and after adaptation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::train::{to_columns, train, TrainingConfig};
use crate::evaluation::{nn_accuracy, LabeledVector, Metric};
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    pub dim: usize,
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Standard deviation of the class means per coordinate.
    pub mean_spread: f64,
    /// Within-class standard deviation per coordinate.
    pub noise: f64,
    pub rotation_deg: f64,
    /// Norm of the test-domain shift.
    pub shift: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            classes: 6,
            train_per_class: 100,
            test_per_class: 100,
            mean_spread: 1.0,
            noise: 1.0,
            rotation_deg: 20.0,
            shift: 8.0,
        }
    }
}

/// Training settings used for the benchmark: the default losses, batch
/// size and momentum with a 256-wide hidden layer, learning rate 3e-4 and
/// 3000 iterations.
pub fn toy_training_config() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 3e-4,
        iterations: 3000,
        hidden: vec![256],
        ..TrainingConfig::default()
    }
}

#[derive(Clone, Debug)]
pub struct ToyDomains {
    pub train: Vec<Vec<f64>>,
    pub train_labels: Vec<usize>,
    pub test: Vec<Vec<f64>>,
    pub test_labels: Vec<usize>,
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Rotation by `angle` in each plane `(q_2i, q_2i+1)` of a random basis.
fn plane_rotation<R: Rng>(dim: usize, angle: f64, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| normal(rng));
    let q = g.qr().q();
    let mut block = DMatrix::identity(dim, dim);
    let (s, c) = angle.sin_cos();
    for i in (0..dim.saturating_sub(1)).step_by(2) {
        block[(i, i)] = c;
        block[(i, i + 1)] = -s;
        block[(i + 1, i)] = s;
        block[(i + 1, i + 1)] = c;
    }
    &q * block * q.transpose()
}

pub fn toy_domains(seed: u64, config: &ToyConfig) -> ToyDomains {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.dim;
    let means: Vec<DVector<f64>> = (0..config.classes)
        .map(|_| DVector::from_fn(d, |_, _| config.mean_spread * normal(&mut rng)))
        .collect();
    let rotation = plane_rotation(d, config.rotation_deg.to_radians(), &mut rng);
    let dir = DVector::from_fn(d, |_, _| normal(&mut rng)).normalize();
    let shift = dir * config.shift;

    let sample = |per_class: usize, rng: &mut ChaCha8Rng| {
        let mut xs = Vec::with_capacity(per_class * config.classes);
        let mut ys = Vec::with_capacity(per_class * config.classes);
        for _ in 0..per_class {
            for (c, m) in means.iter().enumerate() {
                xs.push(m + DVector::from_fn(d, |_, _| config.noise * normal(rng)));
                ys.push(c);
            }
        }
        (xs, ys)
    };
    let (train, train_labels) = sample(config.train_per_class, &mut rng);
    let (test, test_labels) = sample(config.test_per_class, &mut rng);
    let test = test.into_iter().map(|x| &rotation * x + &shift).collect::<Vec<_>>();
    let rows = |v: Vec<DVector<f64>>| v.into_iter().map(|x| x.as_slice().to_vec()).collect();
    ToyDomains {
        train: rows(train),
        train_labels,
        test: rows(test),
        test_labels,
    }
}

fn labeled(xs: &[Vec<f64>], ys: &[usize]) -> Vec<LabeledVector> {
    xs.iter()
        .zip(ys)
        .enumerate()
        .map(|(i, (x, y))| LabeledVector {
            id: i as u64,
            values: x.clone(),
            category: y.to_string(),
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyOutcome {
    /// 1-NN accuracy of raw test features against the train set.
    pub baseline: f64,
    /// 1-NN accuracy of adapted test features.
    pub adapted: f64,
    /// Mean `|R(x)| / |x|` over the test set after training.
    pub residual_ratio: f64,
}

/// Generate the domains for `seed`, train an adapter and report accuracies.
pub fn run_toy(seed: u64, toy: &ToyConfig, training: &TrainingConfig) -> Result<ToyOutcome> {
    let data = toy_domains(seed, toy);
    let cfg = TrainingConfig {
        seed,
        ..training.clone()
    };
    let outcome = train(&data.train, &data.test, &cfg)?;
    let xt = to_columns(&data.test)?;
    let adapted = outcome.model.adapt_batch(&xt)?;
    let adapted_rows: Vec<Vec<f64>> = adapted.column_iter().map(|c| c.iter().copied().collect()).collect();
    let db = labeled(&data.train, &data.train_labels);
    Ok(ToyOutcome {
        baseline: nn_accuracy(&labeled(&data.test, &data.test_labels), &db, Metric::Euclidean)?,
        adapted: nn_accuracy(&labeled(&adapted_rows, &data.test_labels), &db, Metric::Euclidean)?,
        residual_ratio: outcome.model.residual_ratio(&xt)?,
    })
}

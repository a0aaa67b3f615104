use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{AdaptationModel, Reconstruction};
use super::nn::Gradients;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub alpha: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Discriminator updates per adapter update.
    pub d_steps: usize,
    /// Hidden layer widths of D, R and G.
    pub hidden: Vec<usize>,
    pub reconstruction: Reconstruction,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            alpha: 1.0,
            weight_decay: 1.0,
            learning_rate: 1e-3,
            momentum: 0.9,
            iterations: 1000,
            seed: 0,
            d_steps: 1,
            hidden: vec![2048],
            reconstruction: Reconstruction::Mse,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(self.alpha >= 0.0) {
            return bad("alpha must be non-negative");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.d_steps == 0 {
            return bad("d_steps must be at least 1");
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub iteration: usize,
    /// `L(D)` of the last discriminator step.
    pub discriminator: f64,
    /// `L(F,G)` without the weight-decay penalty.
    pub generator: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub model: AdaptationModel,
    pub losses: Vec<LossPoint>,
}

/// Stack equal-length rows into a `dim x n` column matrix.
pub fn to_columns(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut m = DMatrix::zeros(dim, rows.len());
    for (j, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        m.column_mut(j).copy_from_slice(r);
    }
    Ok(m)
}

fn sample_batch<R: Rng>(data: &DMatrix<f64>, b: usize, rng: &mut R) -> DMatrix<f64> {
    let n = data.ncols();
    let picks: Vec<usize> = if n >= b {
        index::sample(rng, n, b).into_vec()
    } else {
        (0..b).map(|_| rng.random_range(0..n)).collect()
    };
    data.select_columns(&picks)
}

/// Alternate `d_steps` discriminator updates on `(x_train, F(x_test))`
/// with one update of `R` and `G`, using momentum SGD. The discriminator
/// sees adapted test features, so `F` is trained against the critic it
/// has to fool.
pub fn train(train: &[Vec<f64>], test: &[Vec<f64>], config: &TrainingConfig) -> Result<TrainingOutcome> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidArgument("both feature sets must be non-empty".into()));
    }
    let xs = to_columns(train)?;
    let xt = to_columns(test)?;
    if xs.nrows() != xt.nrows() {
        return Err(Error::DimensionMismatch {
            expected: xs.nrows(),
            got: xt.nrows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = AdaptationModel::new(xs.nrows(), &config.hidden, &mut rng)?;
    let mut v_d = Gradients::zeros_like(&model.discriminator);
    let mut v_r = Gradients::zeros_like(&model.residual);
    let mut v_g = Gradients::zeros_like(&model.reconstructor);
    let (lr, mu, b) = (config.learning_rate, config.momentum, config.batch_size);
    let mut losses = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let mut d_loss = 0.0;
        for _ in 0..config.d_steps {
            let s = sample_batch(&xs, b, &mut rng);
            let t = model.adapt_batch(&sample_batch(&xt, b, &mut rng))?;
            let (loss, g) = model.discriminator_grad(&s, &t)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { iteration });
            }
            model.discriminator.sgd_step(&g, &mut v_d, lr, mu);
            d_loss = loss;
        }
        let t = sample_batch(&xt, b, &mut rng);
        let step = model.generator_grad(&t, config.alpha, config.weight_decay, config.reconstruction)?;
        if !step.loss.is_finite() || !step.penalty.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        model.residual.sgd_step(&step.residual, &mut v_r, lr, mu);
        model.reconstructor.sgd_step(&step.reconstructor, &mut v_g, lr, mu);
        if !model.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        losses.push(LossPoint {
            iteration,
            discriminator: d_loss,
            generator: step.loss,
            penalty: step.penalty,
        });
    }
    Ok(TrainingOutcome { model, losses })
}

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Activation, DenseNetwork, Gradients};
use crate::{Error, Result};

/// Clamp applied to discriminator outputs before taking logs.
pub const SIGMOID_EPS: f64 = 1e-7;

/// Reconstruction penalty between `G(F(x))` and `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reconstruction {
    /// Mean squared error over dimensions.
    #[default]
    Mse,
    /// Euclidean norm of the difference.
    L2,
}

/// Discriminator `D`, residual `R` (with `F(x) = x + R(x)`) and
/// reconstructor `G`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationModel {
    pub discriminator: DenseNetwork,
    pub residual: DenseNetwork,
    pub reconstructor: DenseNetwork,
}

fn clamp(p: f64) -> (f64, bool) {
    if p < SIGMOID_EPS {
        (SIGMOID_EPS, true)
    } else if p > 1.0 - SIGMOID_EPS {
        (1.0 - SIGMOID_EPS, true)
    } else {
        (p, false)
    }
}

/// `sum -ln p_test - ln(1 - p_train)` on already clamped probabilities.
pub fn discriminator_log_loss(p_test: &[f64], p_train: &[f64]) -> f64 {
    let t: f64 = p_test.iter().map(|&p| -clamp(p).0.ln()).sum();
    let s: f64 = p_train.iter().map(|&p| -(1.0 - clamp(p).0).ln()).sum();
    t + s
}

/// Per-sample `-ln(1 - p) + alpha * err`, averaged.
pub fn generator_log_loss(p_adapted: &[f64], reconstruction_err: &[f64], alpha: f64) -> f64 {
    let n = p_adapted.len() as f64;
    p_adapted
        .iter()
        .zip(reconstruction_err)
        .map(|(&p, &e)| -(1.0 - clamp(p).0).ln() + alpha * e)
        .sum::<f64>()
        / n
}

/// Loss and gradients of one generator step.
#[derive(Clone, Debug)]
pub struct GeneratorStep {
    /// `L(F,G)` without the weight-decay penalty.
    pub loss: f64,
    /// `(lambda / 2) |theta_R|^2`.
    pub penalty: f64,
    pub residual: Gradients,
    pub reconstructor: Gradients,
}

impl AdaptationModel {
    /// Fresh model for features of size `dim`. `hidden` lists the hidden
    /// widths shared by all three networks. `R` starts at zero output, so
    /// `F` starts as the identity.
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let mut sizes = vec![dim];
        sizes.extend_from_slice(hidden);
        let mut d_sizes = sizes.clone();
        d_sizes.push(1);
        sizes.push(dim);
        let discriminator = DenseNetwork::mlp(&d_sizes, Activation::Relu, Activation::Sigmoid, rng)?;
        let mut residual = DenseNetwork::mlp(&sizes, Activation::Relu, Activation::Identity, rng)?;
        residual.zero_output();
        let reconstructor = DenseNetwork::mlp(&sizes, Activation::Relu, Activation::Identity, rng)?;
        Self::from_networks(discriminator, residual, reconstructor)
    }

    pub fn from_networks(
        discriminator: DenseNetwork,
        residual: DenseNetwork,
        reconstructor: DenseNetwork,
    ) -> Result<Self> {
        let dim = residual.input_dim();
        let checks = [
            (discriminator.input_dim(), dim),
            (discriminator.output_dim(), 1),
            (residual.output_dim(), dim),
            (reconstructor.input_dim(), dim),
            (reconstructor.output_dim(), dim),
        ];
        for (got, expected) in checks {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        Ok(Self {
            discriminator,
            residual,
            reconstructor,
        })
    }

    pub fn dim(&self) -> usize {
        self.residual.input_dim()
    }

    pub fn is_finite(&self) -> bool {
        self.discriminator.is_finite() && self.residual.is_finite() && self.reconstructor.is_finite()
    }

    /// `F(x) = x + R(x)` for a batch of columns.
    pub fn adapt_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(x + self.residual.predict(x)?)
    }

    pub fn adapt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.adapt_batch(&m)?.as_slice().to_vec())
    }

    /// Discriminator probabilities (clamped) for a batch.
    pub fn discriminate(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.discriminator.predict(x)?.iter().map(|&p| clamp(p).0).collect())
    }

    fn check_pair(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
        if a.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.ncols(),
                got: b.ncols(),
            });
        }
        Ok(())
    }

    /// `L(D)` with label 1 for the test batch and 0 for the train batch.
    pub fn discriminator_loss(&self, train: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<f64> {
        self.check_pair(train, test)?;
        Ok(discriminator_log_loss(
            &self.discriminate(test)?,
            &self.discriminate(train)?,
        ))
    }

    /// `L(D)` and its gradient w.r.t. the discriminator parameters.
    pub fn discriminator_grad(&self, train: &DMatrix<f64>, test: &DMatrix<f64>) -> Result<(f64, Gradients)> {
        self.check_pair(train, test)?;
        let mut loss = 0.0;
        let mut grads = Gradients::zeros_like(&self.discriminator);
        for (batch, positive) in [(test, true), (train, false)] {
            let trace = self.discriminator.forward(batch)?;
            let d_out = trace.output().map(|p| {
                let (q, clamped) = clamp(p);
                if positive {
                    loss -= q.ln();
                    if clamped {
                        0.0
                    } else {
                        -1.0 / q
                    }
                } else {
                    loss -= (1.0 - q).ln();
                    if clamped {
                        0.0
                    } else {
                        1.0 / (1.0 - q)
                    }
                }
            });
            let (g, _) = self.discriminator.backward(&trace, &d_out);
            for ((aw, ab), (bw, bb)) in grads.layers.iter_mut().zip(g.layers) {
                *aw += bw;
                *ab += bb;
            }
        }
        Ok((loss, grads))
    }

    fn reconstruction_terms(
        &self,
        recon: &DMatrix<f64>,
        x: &DMatrix<f64>,
        mode: Reconstruction,
    ) -> (Vec<f64>, DMatrix<f64>) {
        let diff = recon - x;
        let d = x.nrows() as f64;
        let mut errs = Vec::with_capacity(x.ncols());
        let mut grad = DMatrix::zeros(x.nrows(), x.ncols());
        for (j, col) in diff.column_iter().enumerate() {
            let sq = col.norm_squared();
            match mode {
                Reconstruction::Mse => {
                    errs.push(sq / d);
                    grad.set_column(j, &(col * (2.0 / d)));
                }
                Reconstruction::L2 => {
                    let n = sq.sqrt();
                    errs.push(n);
                    if n > 0.0 {
                        grad.set_column(j, &(col / n));
                    }
                }
            }
        }
        (errs, grad)
    }

    /// `L(F,G)` on a test batch: mean of `-ln(1 - D(F(x))) + alpha * err(G(F(x)), x)`.
    pub fn generator_loss(&self, test: &DMatrix<f64>, alpha: f64, mode: Reconstruction) -> Result<f64> {
        let adapted = self.adapt_batch(test)?;
        let p = self.discriminate(&adapted)?;
        let recon = self.reconstructor.predict(&adapted)?;
        let (errs, _) = self.reconstruction_terms(&recon, test, mode);
        Ok(generator_log_loss(&p, &errs, alpha))
    }

    /// Gradients of `L(F,G) + (lambda/2)|theta_R|^2` w.r.t. `R` and `G`;
    /// `D` is held fixed.
    pub fn generator_grad(
        &self,
        test: &DMatrix<f64>,
        alpha: f64,
        weight_decay: f64,
        mode: Reconstruction,
    ) -> Result<GeneratorStep> {
        let b = test.ncols() as f64;
        let r_trace = self.residual.forward(test)?;
        let adapted = test + r_trace.output();

        let d_trace = self.discriminator.forward(&adapted)?;
        let mut adv = 0.0;
        let d_out = d_trace.output().map(|p| {
            let (q, clamped) = clamp(p);
            adv -= (1.0 - q).ln();
            if clamped {
                0.0
            } else {
                1.0 / ((1.0 - q) * b)
            }
        });
        let (_, mut d_adapted) = self.discriminator.backward(&d_trace, &d_out);

        let g_trace = self.reconstructor.forward(&adapted)?;
        let (errs, err_grad) = self.reconstruction_terms(g_trace.output(), test, mode);
        let (g_grads, d_from_g) = self.reconstructor.backward(&g_trace, &(err_grad * (alpha / b)));
        d_adapted += d_from_g;

        let (mut r_grads, _) = self.residual.backward(&r_trace, &d_adapted);
        r_grads.add_params(&self.residual, weight_decay);

        let recon: f64 = errs.iter().sum();
        Ok(GeneratorStep {
            loss: (adv + alpha * recon) / b,
            penalty: 0.5 * weight_decay * self.residual.squared_norm(),
            residual: r_grads,
            reconstructor: g_grads,
        })
    }

    /// Mean of `|R(x)| / |x|` over the columns with non-zero norm.
    pub fn residual_ratio(&self, x: &DMatrix<f64>) -> Result<f64> {
        let r = self.residual.predict(x)?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for (xc, rc) in x.column_iter().zip(r.column_iter()) {
            let xn = xc.norm();
            if xn > 0.0 {
                sum += rc.norm() / xn;
                n += 1;
            }
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }
}

#[cfg(test)]
mod tests {
    use super::super::nn::Dense;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(dim: usize, hidden: usize, seed: u64) -> AdaptationModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AdaptationModel::new(dim, &[hidden], &mut rng).unwrap()
    }

    fn batch(dim: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(dim, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn constant_half(dim: usize, hidden: usize) -> DenseNetwork {
        DenseNetwork::new(vec![
            Dense::zeros(dim, hidden, Activation::Relu),
            Dense::zeros(hidden, 1, Activation::Sigmoid),
        ])
        .unwrap()
    }

    /// `G(y) = relu(y) - relu(-y) = y`.
    fn identity_reconstructor(dim: usize) -> DenseNetwork {
        let mut a = Dense::zeros(dim, 2 * dim, Activation::Relu);
        let mut b = Dense::zeros(2 * dim, dim, Activation::Identity);
        for i in 0..dim {
            a.weights[(i, i)] = 1.0;
            a.weights[(dim + i, i)] = -1.0;
            b.weights[(i, i)] = 1.0;
            b.weights[(i, dim + i)] = -1.0;
        }
        DenseNetwork::new(vec![a, b]).unwrap()
    }

    #[test]
    fn identity_at_init() {
        let m = model(6, 16, 1);
        let x = batch(6, 5, 2);
        assert_eq!(m.adapt_batch(&x).unwrap(), x);
    }

    #[test]
    fn constant_residual_shifts() {
        let mut m = model(3, 4, 1);
        let last = m.residual.layers_mut().last_mut().unwrap();
        last.bias[0] = 0.5;
        last.bias[2] = -1.0;
        let y = m.adapt(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.5, 2.0, 2.0]);
    }

    #[test]
    fn loss_hand_values() {
        let m0 = model(4, 8, 3);
        let m = AdaptationModel::from_networks(constant_half(4, 8), m0.residual.clone(), identity_reconstructor(4))
            .unwrap();
        let x = batch(4, 1, 4);
        let ld = m.discriminator_loss(&batch(4, 1, 5), &x).unwrap();
        assert!((ld - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let lg = m.generator_loss(&batch(4, 3, 6), 1.0, Reconstruction::Mse).unwrap();
        assert!((lg - std::f64::consts::LN_2).abs() < 1e-12);
        let direct = -(0.8f64.ln() + 0.6f64.ln() + 0.7f64.ln() + 0.9f64.ln());
        assert!((discriminator_log_loss(&[0.8, 0.6], &[0.3, 0.1]) - direct).abs() < 1e-12);
        assert!((direct - 1.196_004_634_676_759).abs() < 1e-12);
        let eps = SIGMOID_EPS;
        assert!(discriminator_log_loss(&[1.0, 1.0], &[0.0, 0.0]) < 4.0 * eps * 1.01);
    }

    #[test]
    fn alpha_zero_is_pure_adversarial() {
        let m = model(5, 8, 7);
        let x = batch(5, 4, 8);
        let p = m.discriminate(&m.adapt_batch(&x).unwrap()).unwrap();
        let adv = p.iter().map(|q| -(1.0 - q).ln()).sum::<f64>() / 4.0;
        assert!((m.generator_loss(&x, 0.0, Reconstruction::Mse).unwrap() - adv).abs() < 1e-14);
    }

    #[test]
    fn generator_grad_loss_agrees_with_loss() {
        let m = model(5, 8, 9);
        let x = batch(5, 4, 10);
        for mode in [Reconstruction::Mse, Reconstruction::L2] {
            let step = m.generator_grad(&x, 1.0, 1.0, mode).unwrap();
            assert!((step.loss - m.generator_loss(&x, 1.0, mode).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_discriminator_has_no_gradient() {
        let m0 = model(3, 4, 11);
        let mut d = constant_half(3, 4);
        d.layers_mut()[1].bias[0] = -40.0;
        let m = AdaptationModel::from_networks(d, m0.residual.clone(), identity_reconstructor(3)).unwrap();
        let x = batch(3, 4, 12);
        let step = m.generator_grad(&x, 0.0, 0.0, Reconstruction::Mse).unwrap();
        assert!(step.residual.norm() < 1e-6 && step.reconstructor.norm() < 1e-6);
        assert!(step.loss.is_finite());
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(4, 8, 1);
        assert!(matches!(m.adapt(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert!(m.discriminator_loss(&batch(4, 2, 1), &batch(4, 3, 1)).is_err());
    }
}

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::{AdaptationModel, Reconstruction, SIGMOID_EPS};
use super::nn::DenseNetwork;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// `L(D)` w.r.t. the discriminator.
    Discriminator,
    /// `L(F,G) + (lambda/2)|theta_R|^2` w.r.t. `R` and `G`.
    Generator,
}

#[derive(Clone, Debug)]
pub struct GradientProbe {
    pub objective: Objective,
    pub network: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

struct Setup<'a> {
    train: &'a DMatrix<f64>,
    test: &'a DMatrix<f64>,
    alpha: f64,
    weight_decay: f64,
    mode: Reconstruction,
}

impl Setup<'_> {
    fn value(&self, m: &AdaptationModel, objective: Objective) -> Result<f64> {
        match objective {
            Objective::Discriminator => m.discriminator_loss(self.train, &m.adapt_batch(self.test)?),
            Objective::Generator => Ok(m.generator_loss(self.test, self.alpha, self.mode)?
                + 0.5 * self.weight_decay * m.residual.squared_norm()),
        }
    }

    /// ReLU sign patterns and clamp states touched by either objective.
    fn signature(&self, m: &AdaptationModel) -> Result<Vec<bool>> {
        let adapted = m.adapt_batch(self.test)?;
        let mut sig = m.residual.relu_pattern(self.test)?;
        sig.extend(m.reconstructor.relu_pattern(&adapted)?);
        for x in [self.train, &adapted] {
            sig.extend(m.discriminator.relu_pattern(x)?);
            for p in m.discriminator.predict(x)?.iter() {
                sig.push(*p < SIGMOID_EPS);
                sig.push(*p > 1.0 - SIGMOID_EPS);
            }
        }
        Ok(sig)
    }
}

fn network_mut<'a>(m: &'a mut AdaptationModel, name: &str) -> &'a mut DenseNetwork {
    match name {
        "discriminator" => &mut m.discriminator,
        "residual" => &mut m.residual,
        _ => &mut m.reconstructor,
    }
}

/// Compare analytic gradients with central differences of step `h` at
/// `probes` random parameters, alternating between the two objectives.
/// Probes whose `+-h` perturbation flips a ReLU or a sigmoid clamp are
/// redrawn, since the loss is not differentiable across those boundaries.
/// The relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
#[allow(clippy::too_many_arguments)]
pub fn check_gradients(
    model: &AdaptationModel,
    train: &DMatrix<f64>,
    test: &DMatrix<f64>,
    alpha: f64,
    weight_decay: f64,
    mode: Reconstruction,
    probes: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<GradientProbe>> {
    let setup = Setup {
        train,
        test,
        alpha,
        weight_decay,
        mode,
    };
    let adapted = model.adapt_batch(test)?;
    let (_, d_grads) = model.discriminator_grad(train, &adapted)?;
    let g_step = model.generator_grad(test, alpha, weight_decay, mode)?;
    let flats = [
        ("discriminator", d_grads.flat()),
        ("residual", g_step.residual.flat()),
        ("reconstructor", g_step.reconstructor.flat()),
    ];
    let base_sig = setup.signature(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(probes);
    let mut attempts = 0usize;
    let mut work = model.clone();
    while out.len() < probes {
        attempts += 1;
        if attempts > probes * 50 + 100 {
            return Err(Error::InvalidArgument(
                "too many probes straddle non-differentiable points".into(),
            ));
        }
        let (objective, which) = if out.len() % 2 == 0 {
            (Objective::Discriminator, 0)
        } else {
            (Objective::Generator, rng.random_range(1..3))
        };
        let (name, flat) = (&flats[which].0, &flats[which].1);
        let index = rng.random_range(0..flat.len());
        let p = network_mut(&mut work, name).param(index);

        network_mut(&mut work, name).set_param(index, p + h);
        let plus = setup.value(&work, objective)?;
        let sig_plus = setup.signature(&work)?;
        network_mut(&mut work, name).set_param(index, p - h);
        let minus = setup.value(&work, objective)?;
        let sig_minus = setup.signature(&work)?;
        network_mut(&mut work, name).set_param(index, p);
        if sig_plus != base_sig || sig_minus != base_sig {
            continue;
        }

        let numeric = (plus - minus) / (2.0 * h);
        let analytic = flat[index];
        let relative_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        out.push(GradientProbe {
            objective,
            network: name,
            index,
            analytic,
            numeric,
            relative_error,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn randomized(dim: usize, hidden: usize, seed: u64) -> AdaptationModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = AdaptationModel::new(dim, &[hidden], &mut rng).unwrap();
        let last = m.residual.layers_mut().last_mut().unwrap();
        last.weights.apply(|w| *w = rng.random_range(-0.3..0.3));
        last.bias.apply(|b| *b = rng.random_range(-0.1..0.1));
        m
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = randomized(6, 10, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
        let t = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0) + 0.5);
        for mode in [Reconstruction::Mse, Reconstruction::L2] {
            let probes = check_gradients(&m, &s, &t, 1.0, 1.0, mode, 60, 1e-4, 3).unwrap();
            let worst = probes.iter().map(|p| p.relative_error).fold(0.0, f64::max);
            assert!(worst < 1e-4, "{mode:?}: {worst}");
            assert!(probes.iter().any(|p| p.network == "residual"));
            assert!(probes.iter().any(|p| p.network == "reconstructor"));
        }
    }
}

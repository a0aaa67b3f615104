use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Coefficient of `(l2 / 2) (|W|^2 + |b|^2)`.
    pub l2: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            steps: 2000,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Linear logits layer over fixed features.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxClassifier {
    pub classes: Vec<String>,
    /// `classes x dim`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

fn softmax_in_place(col: &mut [f64]) {
    let m = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in col.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    col.iter_mut().for_each(|v| *v /= s);
}

/// Mean cross-entropy of `(W, b)` plus its gradient, without the L2 term.
pub fn cross_entropy_grad(
    weights: &DMatrix<f64>,
    bias: &DVector<f64>,
    x: &DMatrix<f64>,
    labels: &[usize],
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let n = x.ncols() as f64;
    let mut p = weights * x;
    for mut col in p.column_iter_mut() {
        col += bias;
    }
    let mut loss = 0.0;
    for (j, &y) in labels.iter().enumerate() {
        let mut col = p.column_mut(j);
        softmax_in_place(col.as_mut_slice());
        loss -= col[y].max(f64::MIN_POSITIVE).ln();
        col[y] -= 1.0;
    }
    p /= n;
    let gw = &p * x.transpose();
    let gb = p.column_sum();
    (loss / n, gw, gb)
}

impl SoftmaxClassifier {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = (&self.weights * DVector::from_column_slice(x) + &self.bias)
            .iter()
            .copied()
            .collect();
        softmax_in_place(&mut z);
        z
    }

    /// Index of the highest logit, lowest index on ties.
    pub fn predict_index(&self, x: &[f64]) -> usize {
        let z = &self.weights * DVector::from_column_slice(x) + &self.bias;
        let mut best = 0;
        for i in 1..z.len() {
            if z[i] > z[best] {
                best = i;
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> &str {
        &self.classes[self.predict_index(x)]
    }

    pub fn weight_norm(&self) -> f64 {
        (self.weights.norm_squared() + self.bias.norm_squared()).sqrt()
    }
}

fn encode(features: &[Vec<f64>], labels: &[String], classes: &[String]) -> Result<(DMatrix<f64>, Vec<usize>)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let x = crate::adaptation::to_columns(features)?;
    let y = labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown label '{l}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, y))
}

/// Full-batch gradient descent on mean softmax cross-entropy with an L2
/// penalty. The penalty is applied as a proximal step,
/// `theta <- (theta - lr * grad) / (1 + lr * l2)`, so any `l2 >= 0` is
/// stable. Classes are the sorted distinct labels.
pub fn train_classifier(
    features: &[Vec<f64>],
    labels: &[String],
    config: &ClassifierConfig,
) -> Result<SoftmaxClassifier> {
    if features.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if !(config.l2 >= 0.0) || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(
            "l2 must be >= 0 and the learning rate > 0".into(),
        ));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    let (x, y) = encode(features, labels, &classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = DMatrix::from_fn(classes.len(), x.nrows(), |_, _| rng.random_range(-1e-3..1e-3));
    let mut bias = DVector::zeros(classes.len());
    let shrink = 1.0 / (1.0 + config.learning_rate * config.l2);
    for step in 0..config.steps {
        let (loss, gw, gb) = cross_entropy_grad(&weights, &bias, &x, &y);
        if !loss.is_finite() {
            return Err(Error::Diverged { iteration: step });
        }
        weights.zip_apply(&gw, |w, g| *w = (*w - config.learning_rate * g) * shrink);
        bias.zip_apply(&gb, |b, g| *b = (*b - config.learning_rate * g) * shrink);
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Diverged { iteration: step });
        }
    }
    Ok(SoftmaxClassifier { classes, weights, bias })
}

/// Mean cross-entropy of a trained classifier on labeled data.
pub fn cross_entropy(classifier: &SoftmaxClassifier, features: &[Vec<f64>], labels: &[String]) -> Result<f64> {
    let (x, y) = encode(features, labels, &classifier.classes)?;
    Ok(cross_entropy_grad(&classifier.weights, &classifier.bias, &x, &y).0)
}

/// Fraction correct per label present in `labels`. Labels the classifier
/// never saw count as always wrong.
pub fn per_category_accuracy(
    classifier: &SoftmaxClassifier,
    features: &[Vec<f64>],
    labels: &[String],
) -> Result<BTreeMap<String, f64>> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (x, l) in features.iter().zip(labels) {
        if x.len() != classifier.dim() {
            return Err(Error::DimensionMismatch {
                expected: classifier.dim(),
                got: x.len(),
            });
        }
        let e = tally.entry(l.clone()).or_default();
        e.1 += 1;
        if classifier.predict(x) == l {
            e.0 += 1;
        }
    }
    Ok(tally.into_iter().map(|(k, (c, n))| (k, c as f64 / n as f64)).collect())
}

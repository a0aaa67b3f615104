use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Sigmoid => 2,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

/// Fully connected layer `a = act(W x + b)`, `W` stored as `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: DMatrix::zeros(outputs, inputs),
            bias: DVector::zeros(outputs),
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = DMatrix::from_fn(outputs, inputs, |_, _| rng.random_range(-limit..limit));
        Self {
            weights,
            bias: DVector::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Activations recorded by a forward pass; `activations[0]` is the input.
#[derive(Clone, Debug)]
pub struct Trace {
    pub activations: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace holds the input")
    }
}

/// Parameter gradients, one `(dW, db)` pair per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (DMatrix::zeros(l.outputs(), l.inputs()), DVector::zeros(l.outputs())))
                .collect(),
        }
    }

    /// `self += c * params(net)`.
    pub fn add_params(&mut self, net: &DenseNetwork, c: f64) {
        for ((gw, gb), l) in self.layers.iter_mut().zip(&net.layers) {
            gw.zip_apply(&l.weights, |g, w| *g += c * w);
            gb.zip_apply(&l.bias, |g, w| *g += c * w);
        }
    }

    /// Flattened in the same order as [`DenseNetwork::param`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.transpose().iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.norm_squared() + b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<Dense>,
}

impl DenseNetwork {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    got: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::DimensionMismatch {
                    expected: layers[i - 1].outputs(),
                    got: l.inputs(),
                });
            }
        }
        let net = Self { layers };
        if !net.is_finite() {
            return Err(Error::InvalidArgument("network parameters must be finite".into()));
        }
        Ok(net)
    }

    /// Glorot-initialized perceptron over `sizes` with `hidden` activations
    /// between layers and `output` on the last one.
    pub fn mlp<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { output } else { hidden };
                Dense::glorot(sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self::new(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Zero the last layer so the network outputs exactly zero.
    pub fn zero_output(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weights.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        Ok(())
    }

    /// Forward pass over a batch stored as columns.
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for l in &self.layers {
            let mut z = &l.weights * activations.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &l.bias;
            }
            z.apply(|v| *v = l.activation.apply(*v));
            activations.push(z);
        }
        Ok(Trace { activations })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.forward(x)?.activations.pop().unwrap())
    }

    /// Backpropagate `d_out` (gradient w.r.t. the network output) through a
    /// recorded trace. Returns parameter gradients and the gradient w.r.t.
    /// the input batch.
    pub fn backward(&self, trace: &Trace, d_out: &DMatrix<f64>) -> (Gradients, DMatrix<f64>) {
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut upstream = d_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let a_out = &trace.activations[i + 1];
            let a_in = &trace.activations[i];
            let delta = upstream.zip_map(a_out, |g, a| g * l.activation.derivative(a));
            let dw = &delta * a_in.transpose();
            let db = delta.column_sum();
            upstream = l.weights.transpose() * &delta;
            layers.push((dw, db));
        }
        layers.reverse();
        (Gradients { layers }, upstream)
    }

    /// Momentum SGD step: `v = mu v - lr g`, `theta += v`.
    pub fn sgd_step(&mut self, grads: &Gradients, velocity: &mut Gradients, lr: f64, momentum: f64) {
        for ((l, (gw, gb)), (vw, vb)) in self
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(velocity.layers.iter_mut())
        {
            vw.zip_apply(gw, |v, g| *v = momentum * *v - lr * g);
            vb.zip_apply(gb, |v, g| *v = momentum * *v - lr * g);
            l.weights += &*vw;
            l.bias += &*vb;
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.norm_squared() + l.bias.norm_squared())
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, Option<(usize, usize)>, usize) {
        for (li, l) in self.layers.iter().enumerate() {
            let nw = l.weights.len();
            if index < nw {
                return (li, Some((index / l.inputs(), index % l.inputs())), 0);
            }
            index -= nw;
            if index < l.bias.len() {
                return (li, None, index);
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Parameter by flat index: per layer, weights row-major then bias.
    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (li, Some(rc), _) => self.layers[li].weights[rc],
            (li, None, b) => self.layers[li].bias[b],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (li, Some(rc), _) => self.layers[li].weights[rc] = value,
            (li, None, b) => self.layers[li].bias[b] = value,
        }
    }

    /// Sign pattern of every hidden ReLU unit over a batch.
    pub fn relu_pattern(&self, x: &DMatrix<f64>) -> Result<Vec<bool>> {
        let trace = self.forward(x)?;
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            if l.activation == Activation::Relu {
                out.extend(trace.activations[i + 1].iter().map(|&a| a > 0.0));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_forward(net: &DenseNetwork, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in net.layers() {
            let mut next = vec![0.0; l.outputs()];
            for (r, out) in next.iter_mut().enumerate() {
                let mut z = l.bias[r];
                for (c, &v) in a.iter().enumerate() {
                    z += l.weights[(r, c)] * v;
                }
                *out = match l.activation {
                    Activation::Identity => z,
                    Activation::Relu => {
                        if z > 0.0 {
                            z
                        } else {
                            0.0
                        }
                    }
                    Activation::Sigmoid => 1.0 / (1.0 + f64::exp(-z)),
                };
            }
            a = next;
        }
        a
    }

    #[test]
    fn forward_matches_scalar_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNetwork::mlp(&[5, 7, 3], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let x = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-1.0..1.0));
        let y = net.predict(&x).unwrap();
        for j in 0..4 {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            let expect = scalar_forward(&net, &col);
            for (r, e) in expect.iter().enumerate() {
                assert!((y[(r, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_unit_squared_loss_gradient() {
        let (w, b, x, y) = (0.7, -0.2, 1.5, 0.4);
        let mut l = Dense::zeros(1, 1, Activation::Identity);
        l.weights[(0, 0)] = w;
        l.bias[0] = b;
        let net = DenseNetwork::new(vec![l]).unwrap();
        let input = DMatrix::from_element(1, 1, x);
        let trace = net.forward(&input).unwrap();
        let d_out = trace.output().map(|p| 2.0 * (p - y));
        let (g, dx) = net.backward(&trace, &d_out);
        let r = w * x + b - y;
        assert!((g.layers[0].0[(0, 0)] - 2.0 * r * x).abs() < 1e-15);
        assert!((g.layers[0].1[0] - 2.0 * r).abs() < 1e-15);
        assert!((dx[(0, 0)] - 2.0 * r * w).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNetwork::mlp(&[4, 6, 2], Activation::Sigmoid, Activation::Identity, &mut rng).unwrap();
        let x = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let loss = |n: &DenseNetwork| n.predict(&x).unwrap().map(|v| v * v).sum() * 0.5;
        let trace = net.forward(&x).unwrap();
        let (g, _) = net.backward(&trace, trace.output());
        let flat = g.flat();
        assert_eq!(flat.len(), net.param_count());
        let h = 1e-5;
        for i in 0..net.param_count() {
            let p = net.param(i);
            net.set_param(i, p + h);
            let lp = loss(&net);
            net.set_param(i, p - h);
            let lm = loss(&net);
            net.set_param(i, p);
            let num = (lp - lm) / (2.0 * h);
            assert!(
                (num - flat[i]).abs() <= 1e-7 * (1.0 + num.abs()),
                "param {i}: {num} vs {}",
                flat[i]
            );
        }
    }

    #[test]
    fn chain_validation() {
        let a = Dense::zeros(3, 4, Activation::Relu);
        let b = Dense::zeros(5, 2, Activation::Identity);
        assert!(matches!(
            DenseNetwork::new(vec![a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut c = Dense::zeros(2, 2, Activation::Identity);
        c.weights[(0, 0)] = f64::NAN;
        assert!(DenseNetwork::new(vec![c]).is_err());
    }

    #[test]
    fn zero_output_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = DenseNetwork::mlp(&[3, 8, 3], Activation::Relu, Activation::Identity, &mut rng).unwrap();
        net.zero_output();
        let x = DMatrix::from_fn(3, 5, |_, _| rng.random_range(-4.0..4.0));
        assert!(net.predict(&x).unwrap().iter().all(|&v| v == 0.0));
    }
}

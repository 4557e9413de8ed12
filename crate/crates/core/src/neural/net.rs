use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Relu => z.mapv_inplace(|x| x.max(0.0)),
            Activation::Linear => {}
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One affine layer. `weights` is `inputs × outputs`, so a row of inputs
/// times `weights` gives the pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// A batch of network inputs. Sparse rows list the positions of ones, which
/// is how atom encodings are fed during training.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    Dense(ArrayView2<'a, f64>),
    Sparse(&'a [&'a [usize]]),
}

impl Batch<'_> {
    pub fn rows(&self) -> usize {
        match self {
            Batch::Dense(x) => x.nrows(),
            Batch::Sparse(rows) => rows.len(),
        }
    }
}

/// Per-layer pre-activations and activations from a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre: Vec<Array2<f64>>,
    pub post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }

    pub fn output_pre(&self) -> &Array2<f64> {
        self.pre.last().expect("network has at least one layer")
    }
}

/// Feedforward network: rectifier hidden layers and a configurable output
/// activation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<DenseLayer>,
    pub hidden: Activation,
    pub output: Activation,
}

impl DenseNet {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                DenseLayer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        rng.gen_range(-limit..limit)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(DenseNet {
            layers,
            hidden: Activation::Relu,
            output,
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>, hidden: Activation, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::Dimension {
                    expected: l.weights.ncols(),
                    found: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::Dimension {
                    expected: layers[i - 1].weights.ncols(),
                    found: l.weights.nrows(),
                });
            }
            if l.weights.iter().chain(l.bias.iter()).any(|x| !x.is_finite()) {
                return Err(Error::Config(format!("layer {i} has non-finite weights")));
            }
        }
        Ok(DenseNet {
            layers,
            hidden,
            output,
        })
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weights.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    pub fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Forward pass for a single input vector.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let view = ArrayView2::from_shape((1, x.len()), x).expect("contiguous slice");
        Ok(self.forward_batch(Batch::Dense(view))?.output().row(0).to_vec())
    }

    pub fn forward_batch(&self, input: Batch<'_>) -> Result<ForwardCache> {
        let rows = input.rows();
        let first = &self.layers[0];
        let mut z = Array2::zeros((rows, first.weights.ncols()));
        match input {
            Batch::Dense(x) => {
                if x.ncols() != self.input_dim() {
                    return Err(Error::Dimension {
                        expected: self.input_dim(),
                        found: x.ncols(),
                    });
                }
                general_mat_mul(1.0, &x, &first.weights, 0.0, &mut z);
                z += &first.bias;
            }
            Batch::Sparse(active) => {
                for (r, idx) in active.iter().enumerate() {
                    let mut zr = z.row_mut(r);
                    zr.assign(&first.bias);
                    for &i in *idx {
                        if i >= self.input_dim() {
                            return Err(Error::Dimension {
                                expected: self.input_dim(),
                                found: i + 1,
                            });
                        }
                        zr += &first.weights.row(i);
                    }
                }
            }
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            if l > 0 {
                let prev: &Array2<f64> = &post[l - 1];
                z = Array2::zeros((rows, layer.weights.ncols()));
                general_mat_mul(1.0, prev, &layer.weights, 0.0, &mut z);
                z += &layer.bias;
            }
            let mut a = z.clone();
            self.activation(l).apply(&mut a);
            pre.push(z.clone());
            post.push(a);
        }
        Ok(ForwardCache { pre, post })
    }

    /// Backpropagates `grad_out`, the loss gradient with respect to the
    /// output layer's pre-activation, into parameter gradients.
    pub fn backward(&self, input: Batch<'_>, cache: &ForwardCache, grad_out: Array2<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut dz = grad_out;
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            grads.bias[l] = dz.sum_axis(Axis(0));
            if l > 0 {
                let a_prev = &cache.post[l - 1];
                general_mat_mul(1.0, &a_prev.t(), &dz, 0.0, &mut grads.weights[l]);
                let mut da = Array2::zeros((dz.nrows(), layer.weights.nrows()));
                general_mat_mul(1.0, &dz, &layer.weights.t(), 0.0, &mut da);
                match self.activation(l - 1) {
                    Activation::Relu => {
                        da.zip_mut_with(&cache.pre[l - 1], |g, &z| {
                            if z <= 0.0 {
                                *g = 0.0
                            }
                        });
                    }
                    Activation::Linear => {}
                    Activation::Sigmoid => {
                        da.zip_mut_with(&cache.post[l - 1], |g, &s| *g *= s * (1.0 - s));
                    }
                }
                dz = da;
            } else {
                match input {
                    Batch::Dense(x) => {
                        general_mat_mul(1.0, &x.t(), &dz, 0.0, &mut grads.weights[0]);
                    }
                    Batch::Sparse(active) => {
                        for (r, idx) in active.iter().enumerate() {
                            for &i in *idx {
                                grads.weights[0].row_mut(i).scaled_add(1.0, &dz.row(r));
                            }
                        }
                    }
                }
            }
        }
        grads
    }

    /// Visits every parameter in a fixed order: per layer, weights row-major
    /// then bias.
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            if index < nw {
                let cols = layer.weights.ncols();
                return &mut layer.weights[[index / cols, index % cols]];
            }
            index -= nw;
            if index < layer.bias.len() {
                return &mut layer.bias[index];
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }
}

/// Parameter gradients with the same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn get(&self, mut index: usize) -> f64 {
        for (w, b) in self.weights.iter().zip(&self.bias) {
            if index < w.len() {
                return w[[index / w.ncols(), index % w.ncols()]];
            }
            index -= w.len();
            if index < b.len() {
                return b[index];
            }
            index -= b.len();
        }
        panic!("parameter index out of range");
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(net: &DenseNet, learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: Gradients::zeros_like(net),
            v: Gradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) {
        self.step += 1;
        let hp = (self.beta1, self.beta2, self.epsilon);
        let lr = self.learning_rate * (1.0 - hp.1.powi(self.step)).sqrt()
            / (1.0 - hp.0.powi(self.step));
        for (l, layer) in net.layers.iter_mut().enumerate() {
            update(&mut layer.weights, &grads.weights[l], &mut self.m.weights[l], &mut self.v.weights[l], lr, hp);
            update(&mut layer.bias, &grads.bias[l], &mut self.m.bias[l], &mut self.v.bias[l], lr, hp);
        }
    }
}

fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr: f64,
    (b1, b2, eps): (f64, f64, f64),
) {
    ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * *m / (v.sqrt() + eps);
    });
}

/// A differentiable objective over a batch of network outputs.
pub trait Loss {
    /// Mean loss and its gradient with respect to the output layer's
    /// pre-activation.
    fn value_and_grad(&self, pre: &Array2<f64>, post: &Array2<f64>) -> (f64, Array2<f64>);

    fn value(&self, pre: &Array2<f64>, post: &Array2<f64>) -> f64 {
        self.value_and_grad(pre, post).0
    }
}

/// Relative error used by [`grad_check`]: `|a − n| / max(|a|, |n|, 1e-6)`.
/// The floor keeps components that are zero on both sides from dividing
/// round-off by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares backprop gradients against central finite differences over
/// every parameter and returns the largest relative error.
pub fn grad_check(net: &DenseNet, loss: &dyn Loss, inputs: ArrayView2<'_, f64>, epsilon: f64) -> f64 {
    let all: Vec<usize> = (0..net.num_parameters()).collect();
    grad_check_params(net, loss, inputs, epsilon, &all)
}

/// [`grad_check`] restricted to the listed parameter indices.
pub fn grad_check_params(
    net: &DenseNet,
    loss: &dyn Loss,
    inputs: ArrayView2<'_, f64>,
    epsilon: f64,
    params: &[usize],
) -> f64 {
    let batch = Batch::Dense(inputs);
    let cache = net.forward_batch(batch).expect("input matches network");
    let (_, g) = loss.value_and_grad(cache.output_pre(), cache.output());
    let grads = net.backward(batch, &cache, g);
    let eval = |n: &DenseNet| {
        let c = n.forward_batch(batch).expect("input matches network");
        loss.value(c.output_pre(), c.output())
    };
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for &i in params {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + epsilon;
        let up = eval(&probe);
        *probe.param_mut(i) = orig - epsilon;
        let down = eval(&probe);
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(grads.get(i), numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn layer(w: Array2<f64>, b: Array1<f64>) -> DenseLayer {
        DenseLayer { weights: w, bias: b }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let net = DenseNet::from_layers(
            vec![layer(Array2::zeros((3, 2)), Array1::zeros(2))],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::from_layers(
            vec![layer(Array2::eye(3), Array1::zeros(3))],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn hand_computed_two_by_two() {
        // h = relu(x W1 + b1) with x = (1, 2), W1 = [[1, -1], [0.5, 1]], b1 = (0, -1)
        //   = relu(2, 0) = (2, 0)
        // y = h W2 + b2 with W2 = [[3, 1], [2, -1]], b2 = (0.5, 0) = (6.5, 2)
        let net = DenseNet::from_layers(
            vec![
                layer(array![[1.0, -1.0], [0.5, 1.0]], array![0.0, -1.0]),
                layer(array![[3.0, 1.0], [2.0, -1.0]], array![0.5, 0.0]),
            ],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![6.5, 2.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let net = DenseNet::from_layers(
            vec![layer(Array2::zeros((3, 2)), Array1::zeros(2))],
            Activation::Relu,
            Activation::Linear,
        )
        .unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        assert!(DenseNet::from_layers(
            vec![
                layer(Array2::zeros((3, 2)), Array1::zeros(2)),
                layer(Array2::zeros((3, 2)), Array1::zeros(2)),
            ],
            Activation::Relu,
            Activation::Linear
        )
        .is_err());
    }

    #[test]
    fn sparse_and_dense_batches_agree() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let net = DenseNet::init(&[6, 5, 3], Activation::Linear, &mut rng).unwrap();
        let rows: Vec<&[usize]> = vec![&[0, 3], &[1, 2, 5]];
        let mut dense = Array2::zeros((2, 6));
        for (r, idx) in rows.iter().enumerate() {
            for &i in *idx {
                dense[[r, i]] = 1.0;
            }
        }
        let a = net.forward_batch(Batch::Sparse(&rows)).unwrap();
        let b = net.forward_batch(Batch::Dense(dense.view())).unwrap();
        assert!((a.output() - b.output()).iter().all(|x| x.abs() < 1e-12));
        let g = Array2::from_elem((2, 3), 0.5);
        let ga = net.backward(Batch::Sparse(&rows), &a, g.clone());
        let gb = net.backward(Batch::Dense(dense.view()), &b, g);
        for i in 0..net.num_parameters() {
            assert!((ga.get(i) - gb.get(i)).abs() < 1e-12);
        }
    }
}

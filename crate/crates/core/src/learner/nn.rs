//! Small fully connected networks with hand-written reverse-mode gradients.
//!
//! Weights are stored `(inputs, outputs)` so a batch `x` of shape
//! `(batch, inputs)` maps to `x.dot(w) + b`. Networks are generic over the
//! float type: training uses `f32`, gradient checks use `f64`.

use std::fmt::Debug;

use ndarray::{Array1, Array2, ArrayView2, Axis as NdAxis, LinalgScalar, ScalarOperand, Zip};
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Float type a network computes in.
pub trait Scalar: LinalgScalar + Float + ScalarOperand + Debug + Send + Sync {
    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn of_f64(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply<T: Scalar>(self, z: &mut Array2<T>) {
        match self {
            Activation::Relu => z.mapv_inplace(|v| v.max(T::zero())),
            Activation::Tanh => z.mapv_inplace(T::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` by the derivative, expressed through the activation output.
    fn backprop<T: Scalar>(self, out: &Array2<T>, grad: &mut Array2<T>) {
        match self {
            Activation::Relu => Zip::from(grad).and(out).for_each(|g, &o| {
                if o <= T::zero() {
                    *g = T::zero();
                }
            }),
            Activation::Tanh => Zip::from(grad).and(out).for_each(|g, &o| *g = *g * (T::one() - o * o)),
            Activation::Identity => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    /// Glorot-uniform weights, zero bias. Draws are made in `f64`, so both
    /// precisions start from the same (rounded) weights.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = Array2::from_shape_fn((inputs, outputs), |_| T::of_f64(rng.random_range(-limit..limit)));
        Dense {
            weight,
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.ncols()
    }
}

/// Rectified-linear hidden layers followed by a configurable output activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    pub output: Activation,
}

/// Layer activations kept from a forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    /// `outs[0]` is the input, `outs[l + 1]` the output of layer `l`.
    outs: Vec<Array2<T>>,
}

impl<T> Tape<T> {
    pub fn output(&self) -> &Array2<T> {
        self.outs.last().expect("tape holds the input")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub weight: Vec<Array2<T>>,
    pub bias: Vec<Array1<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `sizes = [inputs, hidden.., outputs]`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes.windows(2).map(|w| Dense::new(w[0], w[1], rng)).collect();
        Mlp { layers, output }
    }

    /// The same network in another precision.
    pub fn cast<U: Scalar>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: l.weight.mapv(|v| U::of_f64(v.as_f64())),
                    bias: l.bias.mapv(|v| U::of_f64(v.as_f64())),
                })
                .collect(),
            output: self.output,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].inputs()];
        s.extend(self.layers.iter().map(Dense::outputs));
        s
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.weight) + &layer.bias;
            self.activation(l).apply(&mut z);
            h = z;
        }
        h
    }

    /// Single-sample forward pass without the matrix machinery.
    pub fn forward_one(&self, x: &[T]) -> Vec<T> {
        let mut h = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.bias.to_vec();
            for (i, &hi) in h.iter().enumerate() {
                if hi != T::zero() {
                    for (zj, &wij) in z.iter_mut().zip(layer.weight.row(i)) {
                        *zj = *zj + hi * wij;
                    }
                }
            }
            match self.activation(l) {
                Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(T::zero())),
                Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                Activation::Identity => {}
            }
            h = z;
        }
        h
    }

    pub fn forward_tape(&self, x: ArrayView2<T>) -> Tape<T> {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = outs[l].dot(&layer.weight) + &layer.bias;
            self.activation(l).apply(&mut z);
            outs.push(z);
        }
        Tape { outs }
    }

    /// Gradients of a scalar loss given `d loss / d output`, plus `d loss / d input`.
    pub fn backward(&self, tape: &Tape<T>, grad_output: Array2<T>) -> (Gradients<T>, Array2<T>) {
        let (grads, input) = self.backprop(tape, grad_output, true, true);
        (grads.expect("requested"), input.expect("requested"))
    }

    /// Parameter gradients only.
    pub fn param_gradients(&self, tape: &Tape<T>, grad_output: Array2<T>) -> Gradients<T> {
        self.backprop(tape, grad_output, true, false).0.expect("requested")
    }

    /// `d loss / d input` only.
    pub fn input_gradient(&self, tape: &Tape<T>, grad_output: Array2<T>) -> Array2<T> {
        self.backprop(tape, grad_output, false, true).1.expect("requested")
    }

    fn backprop(
        &self,
        tape: &Tape<T>,
        grad_output: Array2<T>,
        params: bool,
        input: bool,
    ) -> (Option<Gradients<T>>, Option<Array2<T>>) {
        let n = self.layers.len();
        let mut weight = Vec::with_capacity(n);
        let mut bias = Vec::with_capacity(n);
        let mut grad = grad_output;
        for l in (0..n).rev() {
            self.activation(l).backprop(&tape.outs[l + 1], &mut grad);
            if params {
                weight.push(tape.outs[l].t().dot(&grad));
                bias.push(grad.sum_axis(NdAxis(0)));
            }
            if l > 0 || input {
                grad = grad.dot(&self.layers[l].weight.t());
            }
        }
        let grads = params.then(|| {
            weight.reverse();
            bias.reverse();
            Gradients { weight, bias }
        });
        (grads, input.then_some(grad))
    }

    /// `self <- tau * self + (1 - tau) * source`.
    pub fn polyak_from(&mut self, source: &Mlp<T>, tau: f64) {
        let (a, b) = (T::of_f64(tau), T::of_f64(1.0 - tau));
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weight)
                .and(&s.weight)
                .for_each(|x, &y| *x = a * *x + b * y);
            Zip::from(&mut t.bias)
                .and(&s.bias)
                .for_each(|x, &y| *x = a * *x + b * y);
        }
    }

    pub fn same_shape(&self, other: &Mlp<T>) -> bool {
        self.sizes() == other.sizes() && self.output == other.output
    }
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m_w: Vec<Array2<T>>,
    v_w: Vec<Array2<T>>,
    m_b: Vec<Array1<T>>,
    v_b: Vec<Array1<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(net: &Mlp<T>, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m_w: net.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            v_w: net.layers.iter().map(|l| Array2::zeros(l.weight.raw_dim())).collect(),
            m_b: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
            v_b: net.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    pub fn apply(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>) {
        self.step += 1;
        let lr_t = self.lr * (1.0 - self.beta2.powi(self.step)).sqrt() / (1.0 - self.beta1.powi(self.step));
        let (b1, b2, eps, lr_t) = (
            T::of_f64(self.beta1),
            T::of_f64(self.beta2),
            T::of_f64(self.eps),
            T::of_f64(lr_t),
        );
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let update = |p: &mut T, m: &mut T, v: &mut T, g: T| {
            *m = b1 * *m + c1 * g;
            *v = b2 * *v + c2 * g * g;
            *p = *p - lr_t * *m / (v.sqrt() + eps);
        };
        for (l, layer) in net.layers.iter_mut().enumerate() {
            Zip::from(&mut layer.weight)
                .and(&mut self.m_w[l])
                .and(&mut self.v_w[l])
                .and(&grads.weight[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut self.m_b[l])
                .and(&mut self.v_b[l])
                .and(&grads.bias[l])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

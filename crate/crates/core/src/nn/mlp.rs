//! Feed-forward networks with a recorded tape and explicit backprop.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::init::{fill, Init};
use super::matrix::{axpy, DenseMatrix};
use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// `scale · sigmoid(z)`, strictly inside `(0, scale)`.
    SigmoidScaled(f64),
    Relu,
    Softplus,
    Identity,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const SIGMOID_HI: f64 = 1.0 - f64::EPSILON;
const SIGMOID_LO: f64 = 1e-300;

impl OutputActivation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::SigmoidScaled(s) => s * sigmoid(z).clamp(SIGMOID_LO, SIGMOID_HI),
            OutputActivation::Relu => z.max(0.0),
            OutputActivation::Softplus => z.max(0.0) + (-z.abs()).exp().ln_1p(),
            OutputActivation::Identity => z,
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::SigmoidScaled(s) => {
                let p = sigmoid(z);
                s * p * (1.0 - p)
            }
            OutputActivation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            OutputActivation::Softplus => sigmoid(z),
            OutputActivation::Identity => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, then 1.
    pub layer_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: OutputActivation,
    /// Inverted dropout after every hidden layer, training only.
    #[serde(default)]
    pub dropout: f64,
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, hidden: Activation, output: OutputActivation) -> Result<Self> {
        let spec = MlpSpec {
            layer_widths,
            hidden_activation: hidden,
            output_activation: output,
            dropout: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::Shape(format!("invalid layer widths {:?}", self.layer_widths)));
        }
        if *self.layer_widths.last().unwrap() != 1 {
            return Err(Error::Shape("final layer width must be 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    /// Hidden widths only, e.g. `[100, 20]` for `[128, 100, 20, 1]`.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.layer_widths[1..self.layer_widths.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `in × out`
    pub w: DenseMatrix,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Layer>,
    version: u64,
}

/// Activations cached by [`Mlp::forward`] for one backward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    version: u64,
    /// Input to each layer (post-activation, post-dropout of the previous).
    inputs: Vec<DenseMatrix>,
    /// Pre-activation of each layer.
    pre: Vec<DenseMatrix>,
    masks: Vec<Option<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrad>,
    pub input: DenseMatrix,
}

impl MlpGrads {
    pub fn flat(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [&l.w[..], &l.b[..]]).collect()
    }
}

impl Mlp {
    pub fn new<R: Rng>(spec: MlpSpec, init: Init, rng: &mut R) -> Result<Self> {
        let mut mlp = Mlp::zeros(spec)?;
        for layer in &mut mlp.layers {
            let (fan_in, fan_out) = (layer.w.rows, layer.w.cols);
            fill(init, fan_in, fan_out, &mut layer.w.data, rng);
        }
        Ok(mlp)
    }

    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layer_widths
            .windows(2)
            .map(|w| Layer { w: DenseMatrix::zeros(w[0], w[1]), b: vec![0.0; w[1]] })
            .collect();
        Ok(Mlp { spec, layers, version: 0 })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.data.len() + l.b.len()).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Named mutable parameter slices in declaration order. Invalidates
    /// outstanding tapes.
    pub fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.version += 1;
        self.layers
            .iter_mut()
            .enumerate()
            .flat_map(|(i, l)| {
                [
                    (format!("layer{i}.weight"), &mut l.w.data[..]),
                    (format!("layer{i}.bias"), &mut l.b[..]),
                ]
            })
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [&l.w.data[..], &l.b[..]]).collect()
    }

    fn is_last(&self, i: usize) -> bool {
        i + 1 == self.layers.len()
    }

    /// Batch forward pass; passing an RNG enables dropout.
    pub fn forward(&self, x: &DenseMatrix, mut dropout_rng: Option<&mut dyn RngCore>) -> Result<(Vec<f64>, Tape)> {
        if x.cols != self.spec.input_width() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.cols,
                self.spec.input_width()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut masks = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = cur.matmul(&layer.w);
            z.add_row_vector(&layer.b);
            inputs.push(cur);
            if self.is_last(i) {
                cur = z.clone();
                for v in &mut cur.data {
                    *v = self.spec.output_activation.apply(*v);
                }
                masks.push(None);
            } else {
                let mut a = z.clone();
                for v in &mut a.data {
                    *v = self.spec.hidden_activation.apply(*v);
                }
                let p = self.spec.dropout;
                let mask = match dropout_rng.as_deref_mut() {
                    Some(rng) if p > 0.0 => {
                        let keep = 1.0 - p;
                        let m: Vec<f64> = (0..a.data.len())
                            .map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                            .collect();
                        for (v, &k) in a.data.iter_mut().zip(&m) {
                            *v *= k;
                        }
                        Some(m)
                    }
                    _ => None,
                };
                masks.push(mask);
                cur = a;
            }
            pre.push(z);
        }
        let tape = Tape { version: self.version, inputs, pre, masks };
        Ok((cur.data, tape))
    }

    /// Gradients of `Σ_r upstream[r] · pred[r]` with respect to every
    /// parameter and every input entry.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<MlpGrads> {
        if tape.version != self.version {
            return Err(Error::StaleTape { tape: tape.version, current: self.version });
        }
        let batch = tape.inputs[0].rows;
        if upstream.len() != batch {
            return Err(Error::Shape(format!("upstream has {} entries for a batch of {batch}", upstream.len())));
        }
        let last = self.layers.len() - 1;
        let out_act = self.spec.output_activation;
        let mut delta = DenseMatrix {
            rows: batch,
            cols: 1,
            data: upstream
                .iter()
                .zip(&tape.pre[last].data)
                .map(|(&g, &z)| g * out_act.derivative(z))
                .collect(),
        };
        let mut grads = vec![LayerGrad { w: Vec::new(), b: Vec::new() }; self.layers.len()];
        let mut input_grad = DenseMatrix::default();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            grads[i] = LayerGrad {
                w: tape.inputs[i].t_matmul(&delta).data,
                b: delta.column_sums(),
            };
            let mut d_in = delta.matmul_t(&layer.w);
            if i == 0 {
                input_grad = d_in;
                break;
            }
            if let Some(mask) = &tape.masks[i - 1] {
                for (g, &k) in d_in.data.iter_mut().zip(mask) {
                    *g *= k;
                }
            }
            let act = self.spec.hidden_activation;
            for (g, &z) in d_in.data.iter_mut().zip(&tape.pre[i - 1].data) {
                *g *= act.derivative(z);
            }
            delta = d_in;
        }
        Ok(MlpGrads { layers: grads, input: input_grad })
    }

    /// Single-row inference without dropout; `scratch` is reused between
    /// calls to avoid allocation.
    pub fn predict_one(&self, x: &[f64], scratch: &mut MlpScratch) -> f64 {
        debug_assert_eq!(x.len(), self.spec.input_width());
        let MlpScratch { a, b } = scratch;
        a.clear();
        a.extend_from_slice(x);
        for (i, layer) in self.layers.iter().enumerate() {
            b.clear();
            b.extend_from_slice(&layer.b);
            for (k, &xk) in a.iter().enumerate() {
                axpy(xk, layer.w.row(k), b);
            }
            crate::opcount::add(2 * (layer.w.rows * layer.w.cols + layer.w.cols) as u64);
            if self.is_last(i) {
                return self.spec.output_activation.apply(b[0]);
            }
            for v in b.iter_mut() {
                *v = self.spec.hidden_activation.apply(*v);
            }
            std::mem::swap(a, b);
        }
        unreachable!("network has at least one layer")
    }

    /// Multiply-adds per single-row inference.
    pub fn flops_per_query(&self) -> u64 {
        self.layers.iter().map(|l| 2 * (l.w.rows * l.w.cols) as u64 + l.b.len() as u64).sum()
    }

    /// Rounds every parameter to 32-bit precision.
    pub fn quantize(&mut self) {
        for (_, p) in self.params_mut() {
            for x in p {
                *x = *x as f32 as f64;
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct MlpScratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent per-neuron evaluation.
    fn naive_forward(mlp: &Mlp, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        for (i, l) in mlp.layers.iter().enumerate() {
            let mut next = Vec::new();
            for j in 0..l.w.cols {
                let mut z = l.b[j];
                for (k, &xk) in cur.iter().enumerate() {
                    z += xk * l.w.get(k, j);
                }
                next.push(if i + 1 == mlp.layers.len() {
                    mlp.spec.output_activation.apply(z)
                } else {
                    mlp.spec.hidden_activation.apply(z)
                });
            }
            cur = next;
        }
        cur[0]
    }

    #[test]
    fn zero_network_predicts_zero() {
        let spec = MlpSpec::new(vec![3, 4, 1], Activation::Relu, OutputActivation::Relu).unwrap();
        let mlp = Mlp::zeros(spec).unwrap();
        let x = DenseMatrix::from_vec(2, 3, vec![1.0, -2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(mlp.forward(&x, None).unwrap().0, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer() {
        let spec = MlpSpec::new(vec![1, 1], Activation::Relu, OutputActivation::Relu).unwrap();
        let mut mlp = Mlp::zeros(spec).unwrap();
        mlp.layers[0].w.data[0] = 1.0;
        let x = DenseMatrix::from_vec(1, 1, vec![3.0]).unwrap();
        let (pred, tape) = mlp.forward(&x, None).unwrap();
        assert_eq!(pred, vec![3.0]);
        let g = mlp.backward(&tape, &[1.0]).unwrap();
        // d pred / d weight = x
        assert_eq!(g.layers[0].w, vec![3.0]);
        assert_eq!(g.layers[0].b, vec![1.0]);
        let zero = mlp.backward(&tape, &[0.0]).unwrap();
        assert!(zero.flat().iter().all(|s| s.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn forward_matches_naive_and_single_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (hidden, out) in [
            (Activation::Relu, OutputActivation::SigmoidScaled(7.0)),
            (Activation::Tanh, OutputActivation::Softplus),
            (Activation::LeakyRelu, OutputActivation::Relu),
        ] {
            let spec = MlpSpec::new(vec![6, 9, 5, 1], hidden, out).unwrap();
            let mut mlp = Mlp::new(spec, Init::XavierUniform, &mut rng).unwrap();
            for (_, p) in mlp.params_mut() {
                for v in p.iter_mut() {
                    *v += rng.random_range(-0.1..0.1);
                }
            }
            let x = DenseMatrix::from_vec(4, 6, (0..24).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let (pred, _) = mlp.forward(&x, None).unwrap();
            let mut scratch = MlpScratch::default();
            for r in 0..4 {
                let want = naive_forward(&mlp, x.row(r));
                assert!((pred[r] - want).abs() <= 1e-12 * want.abs().max(1.0));
                assert!((mlp.predict_one(x.row(r), &mut scratch) - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn stale_tape_and_shape_errors() {
        let spec = MlpSpec::new(vec![2, 1], Activation::Relu, OutputActivation::Identity).unwrap();
        let mut mlp = Mlp::zeros(spec).unwrap();
        let x = DenseMatrix::zeros(1, 2);
        let (_, tape) = mlp.forward(&x, None).unwrap();
        let _ = mlp.params_mut();
        assert!(matches!(mlp.backward(&tape, &[1.0]), Err(Error::StaleTape { .. })));
        assert!(mlp.forward(&DenseMatrix::zeros(1, 3), None).is_err());
        assert!(MlpSpec::new(vec![2, 3], Activation::Relu, OutputActivation::Relu).is_err());
    }

    #[test]
    fn sigmoid_scaled_stays_open_interval() {
        let act = OutputActivation::SigmoidScaled(29_100.0);
        for z in [-1e4, -800.0, -40.0, 0.0, 40.0, 800.0, 1e4] {
            let y = act.apply(z);
            assert!(y > 0.0 && y < 29_100.0, "z={z} y={y}");
        }
    }
}

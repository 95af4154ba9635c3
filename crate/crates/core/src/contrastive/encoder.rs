//! Small fully connected encoder: flatten, hidden layers, linear embedding head.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// Shape of the encoder. Inputs are `width x height x channels` views.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub input: (u32, u32, usize),
    pub hidden: Vec<usize>,
    pub embedding_dim: usize,
    pub activation: Activation,
}

impl EncoderShape {
    pub fn input_len(&self) -> usize {
        self.input.0 as usize * self.input.1 as usize * self.input.2
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_len()];
        w.extend(&self.hidden);
        w.push(self.embedding_dim);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub shape: EncoderShape,
    pub layers: Vec<Layer>,
}

/// Per-layer activations kept for backpropagation. `outputs[0]` is the input.
pub struct ForwardCache {
    outputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn embeddings(&self) -> &Array2<f64> {
        self.outputs.last().expect("cache holds at least the input")
    }
}

pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl EncoderParams {
    /// He-uniform weights, zero biases.
    pub fn init(shape: EncoderShape, rng: &mut RngStream) -> Result<Self> {
        if shape.input_len() == 0 || shape.embedding_dim == 0 || shape.hidden.contains(&0) {
            return Err(invalid("encoder", "every layer width must be positive"));
        }
        let widths = shape.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((w[0], w[1]), |_| {
                        rng.uniform_range(-bound, bound)
                    }),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Ok(Self { shape, layers })
    }

    pub fn zeros(shape: EncoderShape) -> Self {
        let layers = shape
            .widths()
            .windows(2)
            .map(|w| Layer {
                weight: Array2::zeros((w[0], w[1])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        Self { shape, layers }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Stack views into a `batch x input_len` matrix, checking their shape.
    pub fn flatten(&self, views: &[Image]) -> Result<Array2<f64>> {
        let (w, h, c) = self.shape.input;
        let len = self.shape.input_len();
        let mut x = Array2::zeros((views.len(), len));
        for (mut row, v) in x.axis_iter_mut(Axis(0)).zip(views) {
            if (v.width(), v.height(), v.channels()) != (w, h, c) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{w}x{h}x{c} view"),
                    actual: format!("{}x{}x{}", v.width(), v.height(), v.channels()),
                });
            }
            row.assign(&ndarray::ArrayView1::from(v.pixels()));
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: Array2<f64>) -> Result<ForwardCache> {
        if input.ncols() != self.shape.input_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input features", self.shape.input_len()),
                actual: format!("{}", input.ncols()),
            });
        }
        let last = self.layers.len() - 1;
        let mut outputs = Vec::with_capacity(self.layers.len() + 1);
        outputs.push(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = outputs[i].dot(&layer.weight) + &layer.bias;
            if i != last {
                let act = self.shape.activation;
                y.mapv_inplace(|v| act.apply(v));
            }
            outputs.push(y);
        }
        Ok(ForwardCache { outputs })
    }

    /// Embeddings for a batch of views.
    pub fn forward(&self, views: &[Image]) -> Result<Array2<f64>> {
        let x = self.flatten(views)?;
        Ok(self.forward_cached(x)?.outputs.pop().expect("non-empty"))
    }

    /// Backbone features: the last hidden layer, or the embedding when there is none.
    pub fn features(&self, views: &[Image]) -> Result<Array2<f64>> {
        let x = self.flatten(views)?;
        let mut outs = self.forward_cached(x)?.outputs;
        if self.shape.hidden.is_empty() {
            Ok(outs.pop().expect("non-empty"))
        } else {
            Ok(outs.swap_remove(outs.len() - 2))
        }
    }

    /// Backpropagate `grad_out` (d loss / d embeddings) through the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Gradients {
        let mut delta = grad_out.clone();
        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &cache.outputs[i];
            let weight = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if i > 0 {
                let act = self.shape.activation;
                let mut prev = delta.dot(&self.layers[i].weight.t());
                prev.zip_mut_with(input, |d, &y| *d *= act.derivative_from_output(y));
                delta = prev;
            }
            grads.push(Layer { weight, bias });
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weight.scaled_add(-lr, &g.weight);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ImageDims;

    fn shape(hidden: Vec<usize>, d: usize) -> EncoderShape {
        EncoderShape {
            input: (3, 2, 1),
            hidden,
            embedding_dim: d,
            activation: Activation::Relu,
        }
    }

    fn view(seed: u64) -> Image {
        let mut rng = RngStream::new(seed);
        let px = (0..6).map(|_| rng.uniform() - 0.5).collect();
        Image::new(ImageDims::new(3, 2).unwrap(), 1, px).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let p = EncoderParams::zeros(shape(vec![4], 3));
        let z = p.forward(&[view(1), view(2)]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_layer_reproduces_input() {
        let mut p = EncoderParams::zeros(shape(vec![], 6));
        p.layers[0].weight = Array2::eye(6);
        let v = view(3);
        let z = p.forward(std::slice::from_ref(&v)).unwrap();
        assert_eq!(z.row(0).to_vec(), v.pixels().to_vec());
    }

    #[test]
    fn forward_is_deterministic() {
        let p = EncoderParams::init(shape(vec![5, 4], 3), &mut RngStream::new(8)).unwrap();
        let q = EncoderParams::init(shape(vec![5, 4], 3), &mut RngStream::new(8)).unwrap();
        assert_eq!(p, q);
        let views = [view(1), view(2)];
        assert_eq!(p.forward(&views).unwrap(), q.forward(&views).unwrap());
        assert!(p.forward(&views).unwrap().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let p = EncoderParams::zeros(shape(vec![], 2));
        let wrong = Image::filled(ImageDims::new(2, 3).unwrap(), 1, 0.0).unwrap();
        assert!(matches!(
            p.forward(&[wrong]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn features_are_last_hidden_layer() {
        let p = EncoderParams::init(shape(vec![7], 3), &mut RngStream::new(1)).unwrap();
        let f = p.features(&[view(4)]).unwrap();
        assert_eq!(f.ncols(), 7);
        assert!(f.iter().all(|&v| v >= 0.0));
    }

    /// Backprop through a linear probe `sum(z * c)` against finite differences.
    #[test]
    fn backward_matches_finite_differences() {
        for act in [Activation::Relu, Activation::Tanh] {
            let mut sh = shape(vec![5, 4], 3);
            sh.activation = act;
            let p = EncoderParams::init(sh, &mut RngStream::new(12)).unwrap();
            let views = [view(1), view(2), view(3)];
            let x = p.flatten(&views).unwrap();
            let coef =
                Array2::from_shape_fn((3, 3), |(i, j)| (i as f64 + 1.0) * 0.3 - j as f64 * 0.2);
            let objective = |q: &EncoderParams| {
                (q.forward_cached(x.clone()).unwrap().embeddings() * &coef).sum()
            };
            let cache = p.forward_cached(x.clone()).unwrap();
            let g = p.backward(&cache, &coef);
            let h = 1e-6;
            for (li, layer) in p.layers.iter().enumerate() {
                for idx in [
                    (0, 0),
                    (1, 2),
                    (layer.weight.nrows() - 1, layer.weight.ncols() - 1),
                ] {
                    let mut plus = p.clone();
                    plus.layers[li].weight[idx] += h;
                    let mut minus = p.clone();
                    minus.layers[li].weight[idx] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    assert!(
                        (fd - g.layers[li].weight[idx]).abs() < 1e-6,
                        "{act:?} layer {li} {idx:?}"
                    );
                }
                let mut plus = p.clone();
                plus.layers[li].bias[0] += h;
                let mut minus = p.clone();
                minus.layers[li].bias[0] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert!((fd - g.layers[li].bias[0]).abs() < 1e-6);
            }
        }
    }
}

//! The speckle classifier: declarative spec, parameters, forward and backward
//! passes, and the binary weight format.

mod spec;
pub mod weights;

pub use spec::{canonical_spec, parameter_count, LayerKind, LayerSpec, ModelSpec, ParamShapes, MIN_INPUT_SIDE};
pub use weights::{load_weights, save_weights};

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{self, ConvParams, DenseParams, DepthwiseParams};
use crate::tensor::{Element, Tensor};

/// Parameters of a single layer.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams<T = f32> {
    Conv(ConvParams<T>),
    Depthwise(DepthwiseParams<T>),
    Dense(DenseParams<T>),
}

impl<T: Element> LayerParams<T> {
    pub fn weight(&self) -> &Tensor<T> {
        match self {
            Self::Conv(p) => &p.kernel,
            Self::Depthwise(p) => &p.kernel,
            Self::Dense(p) => &p.weights,
        }
    }

    pub fn bias(&self) -> &Tensor<T> {
        match self {
            Self::Conv(p) => &p.bias,
            Self::Depthwise(p) => &p.bias,
            Self::Dense(p) => &p.bias,
        }
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 2] {
        match self {
            Self::Conv(p) => [&mut p.kernel, &mut p.bias],
            Self::Depthwise(p) => [&mut p.kernel, &mut p.bias],
            Self::Dense(p) => [&mut p.weights, &mut p.bias],
        }
    }

    fn zeros(layer: &LayerSpec, shapes: &ParamShapes) -> Self {
        let weight = Tensor::zeros(&shapes.weight);
        let bias = Tensor::zeros(&shapes.bias);
        match layer.kind {
            LayerKind::Conv | LayerKind::Pointwise => Self::Conv(ConvParams {
                kernel: weight,
                bias,
                stride: layer.stride,
                padding: layer.padding,
            }),
            LayerKind::Depthwise => Self::Depthwise(DepthwiseParams {
                kernel: weight,
                bias,
                stride: layer.stride,
                padding: layer.padding,
            }),
            _ => Self::Dense(DenseParams { weights: weight, bias }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    /// Convolution kernel or dense weight matrix.
    Weight,
    Bias,
}

/// Identifies one parameter tensor: layer index plus role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamKey {
    pub layer: usize,
    pub role: Role,
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let role = match self.role {
            Role::Weight => "weight",
            Role::Bias => "bias",
        };
        write!(f, "layer{}.{role}", self.layer)
    }
}

/// Per-layer parameter tensors, indexed like [`ModelSpec::layers`]. Also used
/// for gradients and optimizer moments, which share the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T = f32> {
    layers: Vec<Option<LayerParams<T>>>,
}

impl<T: Element> Parameters<T> {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        let shapes = spec.param_shapes()?;
        let layers = spec
            .layers
            .iter()
            .zip(&shapes)
            .map(|(layer, s)| s.as_ref().map(|s| LayerParams::zeros(layer, s)))
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.tensors_mut().for_each(|t| t.fill(T::zero()));
        out
    }

    pub fn layer(&self, index: usize) -> Option<&LayerParams<T>> {
        self.layers.get(index).and_then(Option::as_ref)
    }

    pub fn layers(&self) -> &[Option<LayerParams<T>>] {
        &self.layers
    }

    /// Every tensor, in layer order with the weight before the bias.
    pub fn iter(&self) -> impl Iterator<Item = (ParamKey, &Tensor<T>)> {
        self.layers.iter().enumerate().flat_map(|(layer, p)| {
            p.iter().flat_map(move |p| {
                [
                    (
                        ParamKey {
                            layer,
                            role: Role::Weight,
                        },
                        p.weight(),
                    ),
                    (
                        ParamKey {
                            layer,
                            role: Role::Bias,
                        },
                        p.bias(),
                    ),
                ]
            })
        })
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.layers.iter_mut().flatten().flat_map(|p| p.tensors_mut())
    }

    pub fn get(&self, key: ParamKey) -> Option<&Tensor<T>> {
        let p = self.layer(key.layer)?;
        Some(match key.role {
            Role::Weight => p.weight(),
            Role::Bias => p.bias(),
        })
    }

    pub fn get_mut(&mut self, key: ParamKey) -> Option<&mut Tensor<T>> {
        let p = self.layers.get_mut(key.layer)?.as_mut()?;
        let [w, b] = p.tensors_mut();
        Some(match key.role {
            Role::Weight => w,
            Role::Bias => b,
        })
    }

    pub fn count(&self) -> usize {
        self.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::InvalidShape("parameter sets have different layer counts".into()));
        }
        for (a, (_, b)) in self.tensors_mut().zip(other.iter()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        self.tensors_mut().for_each(|t| t.scale(factor));
    }

    pub fn cast<U: Element>(&self) -> Parameters<U> {
        let layers = self
            .layers
            .iter()
            .map(|p| {
                p.as_ref().map(|p| match p {
                    LayerParams::Conv(c) => LayerParams::Conv(ConvParams {
                        kernel: c.kernel.cast(),
                        bias: c.bias.cast(),
                        stride: c.stride,
                        padding: c.padding,
                    }),
                    LayerParams::Depthwise(d) => LayerParams::Depthwise(DepthwiseParams {
                        kernel: d.kernel.cast(),
                        bias: d.bias.cast(),
                        stride: d.stride,
                        padding: d.padding,
                    }),
                    LayerParams::Dense(d) => LayerParams::Dense(DenseParams {
                        weights: d.weights.cast(),
                        bias: d.bias.cast(),
                    }),
                })
            })
            .collect();
        Parameters { layers }
    }
}

/// An instantiated network. Immutable during inference; training takes
/// `&mut` or works on a clone.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    spec: ModelSpec,
    params: Parameters<T>,
}

/// Inputs to every layer from one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `inputs[i]` is what layer `i` consumed; `inputs[0]` is the image.
    pub inputs: Vec<Tensor<T>>,
    pub output: Tensor<T>,
}

impl<T: Element> Trace<T> {
    /// Shape after each layer.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.inputs[1..]
            .iter()
            .chain(std::iter::once(&self.output))
            .map(|t| t.shape().to_vec())
            .collect()
    }
}

/// He-uniform initialization: weights drawn from `±sqrt(6 / fan_in)`, biases
/// zero. Values are drawn at single precision so every model is exactly
/// representable in the weight file.
pub fn init_model<T: Element>(spec: &ModelSpec, seed: u64) -> Result<Model<T>> {
    let mut params = Parameters::<T>::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in params.layers.iter_mut().flatten() {
        let [weight, _] = p.tensors_mut();
        let fan_in = match weight.shape() {
            [kh, kw, c_in, _] => kh * kw * c_in,
            [kh, kw, _] => kh * kw,
            [n_in, _] => *n_in,
            s => unreachable!("weight shape {s:?}"),
        };
        let bound = he_uniform_bound(fan_in);
        let dist = Uniform::new_inclusive(-bound, bound);
        weight
            .data_mut()
            .iter_mut()
            .for_each(|w| *w = T::from_f64(dist.sample(&mut rng) as f64));
    }
    Ok(Model {
        spec: spec.clone(),
        params,
    })
}

/// Largest `f32` not exceeding `sqrt(6 / fan_in)`.
pub fn he_uniform_bound(fan_in: usize) -> f32 {
    let exact = (6.0 / fan_in as f64).sqrt();
    let mut b = exact as f32;
    if b as f64 > exact {
        b = b.next_down();
    }
    b
}

impl<T: Element> Model<T> {
    pub fn from_parts(spec: ModelSpec, params: Parameters<T>) -> Result<Self> {
        let expected = Parameters::<T>::zeros(&spec)?;
        if expected.layers.len() != params.layers.len() {
            return Err(Error::InvalidSpec("parameter layer count does not match spec".into()));
        }
        for ((key, want), (_, got)) in expected.iter().zip(params.iter()) {
            if want.shape() != got.shape() {
                return Err(Error::InvalidSpec(format!(
                    "{key}: expected shape {:?}, got {:?}",
                    want.shape(),
                    got.shape()
                )));
            }
        }
        if expected.iter().count() != params.iter().count() {
            return Err(Error::InvalidSpec("parameterized layers do not match spec".into()));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    pub fn cast<U: Element>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.cast(),
        }
    }

    fn check_input(&self, image: &Tensor<T>) -> Result<()> {
        let (h, w, c) = image.hwc()?;
        if c != self.spec.input_channels {
            return Err(Error::InvalidShape(format!(
                "model expects {} input channel(s), got {c}; extract the green channel first",
                self.spec.input_channels
            )));
        }
        if h < MIN_INPUT_SIDE || w < MIN_INPUT_SIDE {
            return Err(Error::InvalidShape(format!(
                "input {h}x{w} is below the {MIN_INPUT_SIDE}x{MIN_INPUT_SIDE} minimum"
            )));
        }
        Ok(())
    }

    fn apply(&self, index: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let layer = &self.spec.layers[index];
        match (layer.kind, self.params.layer(index)) {
            (LayerKind::Relu, _) => Ok(layers::relu(x)),
            (LayerKind::Gap, _) => layers::global_avg_pool(x),
            (LayerKind::Softmax, _) => layers::softmax(x),
            (_, Some(LayerParams::Conv(p))) => layers::conv2d_forward(x, p),
            (_, Some(LayerParams::Depthwise(p))) => layers::depthwise_forward(x, p),
            (_, Some(LayerParams::Dense(p))) => layers::dense_forward(x, p),
            (kind, None) => Err(Error::InvalidSpec(format!("layer {index} ({kind}) has no parameters"))),
        }
    }

    /// Class probabilities for one `[h, w, channels]` image.
    pub fn forward(&self, image: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(image)?;
        let mut x = image.clone();
        for i in 0..self.spec.layers.len() {
            x = self.apply(i, &x)?;
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate for [`Model::backward`].
    pub fn forward_trace(&self, image: &Tensor<T>) -> Result<Trace<T>> {
        self.check_input(image)?;
        let mut inputs = Vec::with_capacity(self.spec.layers.len());
        let mut x = image.clone();
        for i in 0..self.spec.layers.len() {
            let next = self.apply(i, &x)?;
            inputs.push(x);
            x = next;
        }
        Ok(Trace { inputs, output: x })
    }

    /// Backpropagates `grad` (with respect to the output of layer `end - 1`)
    /// down to the image.
    fn backward_from(&self, trace: &Trace<T>, end: usize, mut grad: Tensor<T>) -> Result<(Parameters<T>, Tensor<T>)> {
        let mut grads = self.params.zeros_like();
        for i in (0..end).rev() {
            let input = &trace.inputs[i];
            grad = match self.spec.layers[i].kind {
                LayerKind::Relu => layers::relu_backward(input, &grad)?,
                LayerKind::Gap => {
                    let (h, w, _) = input.hwc()?;
                    layers::gap_backward(h, w, &grad)?
                }
                LayerKind::Softmax => {
                    let probs = trace.inputs.get(i + 1).unwrap_or(&trace.output);
                    layers::softmax_backward(probs, &grad)?
                }
                _ => {
                    let (gi, gw, gb) = match self.params.layer(i) {
                        Some(LayerParams::Conv(p)) => layers::conv2d_backward(input, p, &grad)?,
                        Some(LayerParams::Depthwise(p)) => layers::depthwise_backward(input, p, &grad)?,
                        Some(LayerParams::Dense(p)) => layers::dense_backward(input, p, &grad)?,
                        None => unreachable!("validated spec"),
                    };
                    let slot = grads.layers[i].as_mut().expect("validated spec");
                    let [w, b] = slot.tensors_mut();
                    *w = gw;
                    *b = gb;
                    gi
                }
            };
        }
        Ok((grads, grad))
    }

    /// Gradients of `⟨grad_output, forward(image)⟩` with respect to every
    /// parameter and to the image.
    pub fn backward(&self, trace: &Trace<T>, grad_output: &Tensor<T>) -> Result<(Parameters<T>, Tensor<T>)> {
        if grad_output.shape() != trace.output.shape() {
            return Err(Error::shape(
                "backward grad_output",
                grad_output.shape(),
                trace.output.shape(),
            ));
        }
        self.backward_from(trace, self.spec.layers.len(), grad_output.clone())
    }

    /// Cross-entropy loss, probabilities and parameter gradients for one
    /// labelled image. Uses the fused softmax/cross-entropy gradient.
    pub fn loss_and_grad(&self, image: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>, Parameters<T>)> {
        if self.spec.layers.last().map(|l| l.kind) != Some(LayerKind::Softmax) {
            return Err(Error::InvalidSpec("training requires a final softmax layer".into()));
        }
        if label >= self.spec.num_classes {
            return Err(Error::LabelOutOfRange {
                label,
                classes: self.spec.num_classes,
            });
        }
        let trace = self.forward_trace(image)?;
        let loss = layers::cross_entropy(&trace.output, label)?;
        let grad_logits = layers::softmax_cross_entropy_grad(&trace.output, label)?;
        let (grads, _) = self.backward_from(&trace, self.spec.layers.len() - 1, grad_logits)?;
        Ok((loss, trace.output, grads))
    }

    /// Most probable class and its probability; ties go to the lowest index.
    pub fn predict(&self, image: &Tensor<T>) -> Result<(usize, T)> {
        let probs = self.forward(image)?;
        Ok(argmax_with_value(&probs))
    }
}

pub fn argmax_with_value<T: Element>(probs: &Tensor<T>) -> (usize, T) {
    let i = probs.argmax();
    (i, probs.data()[i])
}

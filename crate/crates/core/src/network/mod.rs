//! The implicit neural representation: a fully connected ReLU/softplus
//! network mapping normalised 3D coordinates to one or more signed
//! distance values.
//!
//! Parameters live in one flat `f64` buffer, layer after layer, each layer
//! stored as its row-major weight matrix (`out x in`) followed by its bias.
//! The hidden layer selected as the skip layer receives the previous
//! activations with the raw 3D input appended.

mod file;
mod forward;
mod loss;

use ndarray::{ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DomainTransform;

pub use file::{decode_model, encode_model, load_model, save_model};
pub use forward::DualBatch;
pub use loss::{evaluate_loss, grad_of_loss, LossBreakdown, LossSpec};

pub const INPUT_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Activation {
    Relu,
    Softplus { beta: f64 },
}

impl Activation {
    pub fn softplus() -> Self {
        Activation::Softplus { beta: 100.0 }
    }

    #[inline]
    pub(crate) fn value(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus { beta } => {
                let bz = beta * z;
                (bz.max(0.0) + (-bz.abs()).exp().ln_1p()) / beta
            }
        }
    }

    /// First derivative; ReLU uses 0 at the kink.
    #[inline]
    pub(crate) fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => sigmoid(beta * z),
        }
    }

    #[inline]
    pub(crate) fn curvature(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Softplus { beta } => {
                let s = sigmoid(beta * z);
                beta * s * (1.0 - s)
            }
        }
    }

    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::Relu)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_channels: usize,
    /// 1-based index of the hidden layer whose input gets the raw
    /// coordinates appended.
    pub skip_layer: Option<usize>,
    pub activation: Activation,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            hidden_layers: 6,
            hidden_width: 256,
            output_channels: 1,
            skip_layer: Some(3),
            activation: Activation::Relu,
        }
    }
}

impl MlpArchitecture {
    pub fn new(hidden_layers: usize, hidden_width: usize, output_channels: usize) -> Self {
        Self {
            hidden_layers,
            hidden_width,
            output_channels,
            skip_layer: if hidden_layers >= 3 { Some(3) } else { None },
            activation: Activation::Relu,
        }
    }

    pub fn with_skip(mut self, skip: Option<usize>) -> Self {
        self.skip_layer = skip;
        self
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_channels(mut self, channels: usize) -> Self {
        self.output_channels = channels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.hidden_width == 0 || self.output_channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "architecture needs at least one hidden layer, width and channel: {self:?}"
            )));
        }
        if let Some(s) = self.skip_layer {
            if s == 0 || s > self.hidden_layers {
                return Err(Error::InvalidArgument(format!(
                    "skip layer {s} outside 1..={}",
                    self.hidden_layers
                )));
            }
        }
        if let Activation::Softplus { beta } = self.activation {
            if !(beta.is_finite() && beta > 0.0) {
                return Err(Error::InvalidArgument(format!("softplus beta {beta}")));
            }
        }
        Ok(())
    }

    /// Layer shapes in storage order; the last entry is the output layer.
    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut offset = 0;
        let mut prev = INPUT_DIM;
        for l in 1..=self.hidden_layers + 1 {
            let hidden = l <= self.hidden_layers;
            let skip = hidden && self.skip_layer == Some(l);
            let inputs = prev + if skip { INPUT_DIM } else { 0 };
            let outputs = if hidden {
                self.hidden_width
            } else {
                self.output_channels
            };
            shapes.push(LayerShape {
                inputs,
                outputs,
                offset,
                skip,
            });
            offset += outputs * (inputs + 1);
            prev = outputs;
        }
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes()
            .last()
            .map(|s| s.offset + s.outputs * (s.inputs + 1))
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    /// Start of this layer's weights in the flat parameter buffer; the
    /// bias follows the weights.
    pub offset: usize,
    pub skip: bool,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    Standard,
    /// Geometric initialisation: the fresh network approximates the signed
    /// distance to a sphere of radius 0.5 around the origin.
    #[default]
    Sphere,
}

pub const SPHERE_INIT_RADIUS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    arch: MlpArchitecture,
    layers: Vec<LayerShape>,
    params: Vec<f64>,
    pub transform: DomainTransform,
    pub channel_names: Vec<String>,
}

impl MlpModel {
    pub fn from_params(arch: MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let expected = arch.parameter_count();
        if params.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "architecture needs {expected} parameters, got {}",
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(Self {
            layers: arch.layer_shapes(),
            arch,
            params,
            transform: DomainTransform::identity(),
            channel_names: Vec::new(),
        })
    }

    pub fn init(arch: MlpArchitecture, seed: u64, scheme: InitScheme) -> Result<Self> {
        arch.validate()?;
        let layers = arch.layer_shapes();
        let mut params = vec![0.0; arch.parameter_count()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = layers.len() - 1;
        for (l, shape) in layers.iter().enumerate() {
            let weights = &mut params[shape.weight_range()];
            match scheme {
                InitScheme::Standard => {
                    let bound = 1.0 / (shape.inputs as f64).sqrt();
                    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                    weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
                }
                InitScheme::Sphere if l == last => {
                    let mean = std::f64::consts::PI.sqrt() / (shape.inputs as f64).sqrt();
                    let dist = Normal::new(mean, 1e-4).expect("positive std");
                    weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
                    params[shape.bias_range()].fill(-SPHERE_INIT_RADIUS);
                }
                InitScheme::Sphere => {
                    // appending the raw input doubles the expected squared
                    // norm of the skip layer's input; undo that
                    let gain = if shape.skip { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
                    let std = gain * (2.0 / shape.outputs as f64).sqrt();
                    let dist = Normal::new(0.0, std).expect("positive std");
                    weights.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
                }
            }
        }
        Ok(Self {
            layers,
            arch,
            params,
            transform: DomainTransform::identity(),
            channel_names: Vec::new(),
        })
    }

    pub fn with_transform(mut self, transform: DomainTransform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_channel_names(mut self, names: Vec<String>) -> Self {
        self.channel_names = names;
        self
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn channels(&self) -> usize {
        self.arch.output_channels
    }

    pub fn layer_shapes(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn weights(&self, layer: usize) -> ArrayView2<'_, f64> {
        let s = self.layers[layer];
        ArrayView2::from_shape((s.outputs, s.inputs), &self.params[s.weight_range()])
            .expect("layout matches shape")
    }

    pub fn bias(&self, layer: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[self.layers[layer].bias_range()])
    }

    pub fn check_channel(&self, channel: usize) -> Result<()> {
        if channel >= self.channels() {
            return Err(Error::ChannelOutOfRange {
                channel,
                channels: self.channels(),
            });
        }
        Ok(())
    }

    pub fn channel_name(&self, channel: usize) -> String {
        self.channel_names
            .get(channel)
            .cloned()
            .unwrap_or_else(|| format!("channel{channel}"))
    }
}

pub fn init_model(arch: MlpArchitecture, seed: u64, scheme: InitScheme) -> Result<MlpModel> {
    MlpModel::init(arch, seed, scheme)
}

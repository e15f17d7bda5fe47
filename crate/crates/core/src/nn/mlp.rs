use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: &mut Matrix) {
        match self {
            Activation::Relu => x.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    /// Multiplies `grad` in place by the derivative, expressed through the
    /// activation output `y`.
    fn backprop(self, grad: &mut Matrix, y: &Matrix) {
        match self {
            Activation::Relu => Zip::from(grad).and(y).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Identity => {}
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Affine map `x W + b` followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in x fan_out`
    pub weight: Matrix,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    /// Input of each layer; `inputs[0]` is the network input.
    inputs: Vec<Matrix>,
    /// Activation output of each layer.
    outputs: Vec<Matrix>,
    version: u64,
}

/// Fully connected feed-forward network.
///
/// `forward` caches per-layer activations; `backward` consumes that cache.
/// Any parameter mutation invalidates it.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    cache: Option<ForwardCache>,
    version: u64,
}

/// Gradients mirroring the parameter layout of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<(Matrix, Array1<f64>)>,
}

impl MlpGrads {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.len())))
                .collect(),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|(w, b)| {
                [
                    w.as_slice().expect("standard layout"),
                    b.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            *w *= s;
            *b *= s;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|&x| x == 0.0))
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. `activations[l]` applies after
    /// layer `l`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("invalid layer dims {dims:?}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "{} layers need {} activations, got {}",
                dims.len() - 1,
                dims.len() - 1,
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..=limit)),
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Self::from_layers(layers))
    }

    /// Hidden layers share `hidden`; the last layer uses `output`.
    pub fn with_activations<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let n_layers = dims.len().saturating_sub(1);
        let mut acts = vec![hidden; n_layers];
        if let Some(last) = acts.last_mut() {
            *last = output;
        }
        Self::new(dims, &acts, rng)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Self {
        Self {
            layers,
            cache: None,
            version: 0,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weight.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weight.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} input columns, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Forward pass that also records activations for [`Mlp::backward`].
    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let mut y = h.dot(&layer.weight) + &layer.bias;
            layer.activation.apply(&mut y);
            inputs.push(h);
            outputs.push(y.clone());
            h = y;
        }
        self.cache = Some(ForwardCache {
            inputs,
            outputs,
            version: self.version,
        });
        Ok(h)
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            let mut y = h.dot(&layer.weight) + &layer.bias;
            layer.activation.apply(&mut y);
            h = y;
        }
        Ok(h)
    }

    /// Reverse-mode pass for the batch of the last `forward`. Returns
    /// parameter gradients and the gradient w.r.t. the input.
    pub fn backward(&self, grad_out: &Matrix) -> Result<(MlpGrads, Matrix)> {
        let cache = match &self.cache {
            Some(c) if c.version == self.version => c,
            _ => return Err(Error::StaleCache),
        };
        let last = cache.outputs.last().expect("non-empty");
        if grad_out.dim() != last.dim() {
            return Err(Error::Shape(format!(
                "grad_out {:?} does not match cached output {:?}",
                grad_out.dim(),
                last.dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            layer.activation.backprop(&mut g, &cache.outputs[l]);
            let gw = cache.inputs[l].t().dot(&g);
            let gb = g.sum_axis(Axis(0));
            g = g.dot(&layer.weight.t());
            grads.push((gw, gb));
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, g))
    }

    /// Mutable views of all parameters, in the order used by
    /// [`MlpGrads::slices`]. Invalidates the forward cache.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.layers.len())
            .flat_map(|l| [format!("layer{l}.weight"), format!("layer{l}.bias")])
            .collect()
    }
}

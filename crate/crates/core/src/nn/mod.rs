//! Dense feed-forward networks.
//!
//! An [`Mlp`] is an ordered list of [`Layer`]s, each computing
//! `activation(x · Wᵀ + b)` on a row-major batch (rows are samples).
//! [`Mlp::forward`] returns the outputs together with a [`ForwardCache`]
//! holding every layer's post-activation values, which is all
//! [`Mlp::backward`] needs: the activation derivatives used here are all
//! expressible in terms of the activation output.

mod adam;
pub mod io;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distr::{Distribution, Uniform};

use crate::rng::rng_from;
use crate::{Error, Result};

pub use adam::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    /// One-byte tag used by the weight file format.
    pub fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Sigmoid => 1,
            Activation::Tanh => 2,
            Activation::Relu => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Tanh),
            3 => Some(Activation::Relu),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y = f(z)`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
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

/// One dense layer. `weights` has shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
    pub(crate) activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        let (out, inp) = weights.dim();
        if out == 0 || inp == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "layer dimensions must be positive, got {out}x{inp}"
            )));
        }
        if bias.len() != out {
            return Err(Error::shape("layer bias", out, bias.len()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_size(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights_mut(&mut self) -> &mut Array2<f64> {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.bias
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Parameters of a multi-layer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Post-activation values of every layer from one forward pass.
///
/// `activations[0]` is the input batch; `activations[k + 1]` is the output
/// of layer `k`.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn input(&self) -> &Array2<f64> {
        &self.activations[0]
    }

    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("cache holds at least the input")
    }

    pub fn layer_outputs(&self) -> &[Array2<f64>] {
        &self.activations[1..]
    }
}

impl Mlp {
    /// Builds a network from explicit layers, checking that dimensions chain
    /// and that every value is finite.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("network needs at least one layer".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].out_size() != pair[1].in_size() {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k} outputs {} values but layer {} expects {}",
                    pair[0].out_size(),
                    k + 1,
                    pair[1].in_size()
                )));
            }
        }
        if let Some(layer) = layers.iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite { layer });
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases.
    ///
    /// `sizes` lists every layer width including input and output, so
    /// `activations.len()` must equal `sizes.len() - 1`.
    pub fn init(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least input and output sizes, got {sizes:?}"
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "layer sizes must be positive, got {sizes:?}"
            )));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidArchitecture(format!(
                "{} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        let mut rng = rng_from(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(dims, &activation)| {
                let (fan_in, fan_out) = (dims[0], dims[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
                let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(&mut rng));
                Layer {
                    weights,
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn in_size(&self) -> usize {
        self.layers[0].in_size()
    }

    pub fn out_size(&self) -> usize {
        self.layers[self.layers.len() - 1].out_size()
    }

    /// Layer widths including input, e.g. `[2, 4, 1]`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.in_size())
            .chain(self.layers.iter().map(Layer::out_size))
            .collect()
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters in layer order, weights (row-major) before biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Layer::is_finite)
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.in_size() {
            return Err(Error::shape("forward input columns", self.in_size(), batch.ncols()));
        }
        Ok(())
    }

    /// Outputs only; skips building the cache.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut current = self.layers[0].apply(batch);
        for layer in &self.layers[1..] {
            current = layer.apply(current.view());
        }
        Ok(current)
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.to_owned());
        for layer in &self.layers {
            let next = layer.apply(activations.last().unwrap().view());
            activations.push(next);
        }
        let outputs = activations.last().unwrap().clone();
        Ok((outputs, ForwardCache { activations }))
    }

    /// Gradient of a scalar loss whose derivative with respect to the network
    /// outputs is `output_grad`. Row contributions are summed.
    pub fn backward(&self, cache: &ForwardCache, output_grad: ArrayView2<f64>) -> Result<Gradient> {
        self.backward_impl(cache, output_grad, false).map(|(g, _)| g)
    }

    /// Like [`Mlp::backward`], also returning the loss gradient with respect
    /// to the input batch.
    pub fn backward_with_input(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(Gradient, Array2<f64>)> {
        self.backward_impl(cache, output_grad, true)
            .map(|(g, input)| (g, input.expect("input gradient requested")))
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        output_grad: ArrayView2<f64>,
        want_input: bool,
    ) -> Result<(Gradient, Option<Array2<f64>>)> {
        if cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::shape(
                "backward cache depth",
                self.layers.len() + 1,
                cache.activations.len(),
            ));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let (rows, cols) = cache.activations[k + 1].dim();
            if cols != layer.out_size() || cache.activations[k].ncols() != layer.in_size() {
                return Err(Error::shape("backward cache layer width", layer.out_size(), cols));
            }
            if rows != output_grad.nrows() {
                return Err(Error::shape("backward batch rows", rows, output_grad.nrows()));
            }
        }
        let out = cache.output();
        if out.dim() != output_grad.dim() {
            return Err(Error::shape(
                "backward output gradient",
                format!("{:?}", out.dim()),
                format!("{:?}", output_grad.dim()),
            ));
        }

        let mut grads: Vec<LayerGradient> = Vec::with_capacity(self.layers.len());
        // delta = dL/dz for the current layer
        let mut delta = output_grad.to_owned();
        let mut input_grad = None;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let post = &cache.activations[k + 1];
            let act = layer.activation;
            Zip::from(&mut delta)
                .and(post)
                .for_each(|d, &y| *d *= act.derivative_from_output(y));
            let prev = &cache.activations[k];
            let weights = delta.t().dot(prev);
            let bias = delta.sum_axis(Axis(0));
            grads.push(LayerGradient { weights, bias });
            if k > 0 {
                delta = delta.dot(&layer.weights);
            } else if want_input {
                input_grad = Some(delta.dot(&layer.weights));
            }
        }
        grads.reverse();
        Ok((Gradient { layers: grads }, input_grad))
    }
}

impl Layer {
    fn apply(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.bias;
        let act = self.activation;
        if act != Activation::Identity {
            z.mapv_inplace(|v| act.apply(v));
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// One partial derivative per parameter, shaped like the source [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    layers: Vec<LayerGradient>,
}

impl Gradient {
    pub fn zeros_like(params: &Mlp) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerGradient] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerGradient] {
        &mut self.layers
    }

    pub fn is_congruent(&self, params: &Mlp) -> bool {
        self.layers.len() == params.layers.len()
            && self.layers.iter().zip(&params.layers).all(|(g, l)| {
                g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len()
            })
    }

    /// Index of the first layer holding a NaN or infinity.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|g| {
            !g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite())
        })
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weights *= factor;
            g.bias *= factor;
        }
    }

    /// Element-wise accumulation; panics if shapes differ.
    pub fn add_assign(&mut self, other: &Gradient) {
        assert_eq!(self.layers.len(), other.layers.len(), "gradient depth mismatch");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weights.iter().copied());
            out.extend(g.bias.iter().copied());
        }
        out
    }
}

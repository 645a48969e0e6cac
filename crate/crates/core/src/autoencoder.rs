//! Symmetric feed-forward autoencoder trained by backpropagation.
//!
//! Each layer computes `activation(W x + b)`. The trained network is
//! `d -> h -> m -> h -> d` with `h = ceil((d + m) / 2)`; the encoder half is
//! used as the dimensionality reducer.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::seeded_rng;
use crate::error::{check_dim, Error, Result};

const FORMAT: &str = "reducebench-autoencoder";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// out_dim × in_dim.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl LayerParams {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        check_dim(weights.nrows(), bias.len())?;
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Applies the layer to a batch (rows are samples).
    fn forward(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.bias;
        let act = self.activation;
        z.mapv_inplace(|v| act.apply(v));
        z
    }
}

/// Gradient of the summed reconstruction error for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder_layers: Vec<LayerParams>,
    pub decoder_layers: Vec<LayerParams>,
    pub input_dim: usize,
    pub code_dim: usize,
    /// Mean per-sample reconstruction error after each training epoch.
    #[serde(default)]
    pub loss_trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    model: AutoencoderModel,
}

impl AutoencoderModel {
    /// Assembles a model, checking that layer shapes chain from `d` to the
    /// code width and back to `d`.
    pub fn new(encoder_layers: Vec<LayerParams>, decoder_layers: Vec<LayerParams>) -> Result<Self> {
        let first = encoder_layers
            .first()
            .ok_or_else(|| Error::DegenerateInput("encoder has no layers".into()))?;
        let input_dim = first.in_dim();
        let code_dim = chain_dims(input_dim, &encoder_layers)?;
        let out = chain_dims(code_dim, &decoder_layers)?;
        if decoder_layers.is_empty() {
            return Err(Error::DegenerateInput("decoder has no layers".into()));
        }
        check_dim(input_dim, out)?;
        let model = Self {
            encoder_layers,
            decoder_layers,
            input_dim,
            code_dim,
            loss_trace: Vec::new(),
        };
        if model.layers().any(|l| {
            l.weights
                .iter()
                .chain(l.bias.iter())
                .any(|v| !v.is_finite())
        }) {
            return Err(Error::DegenerateInput("non-finite parameter".into()));
        }
        Ok(model)
    }

    /// Encoder layers followed by decoder layers.
    pub fn layers(&self) -> impl Iterator<Item = &LayerParams> {
        self.encoder_layers.iter().chain(self.decoder_layers.iter())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut LayerParams> {
        self.encoder_layers
            .iter_mut()
            .chain(self.decoder_layers.iter_mut())
    }

    pub fn encode(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.input_dim, x.len())?;
        let batch = x.insert_axis(Axis(0));
        Ok(run(&self.encoder_layers, batch).row(0).to_owned())
    }

    pub fn decode(&self, code: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.code_dim, code.len())?;
        let batch = code.insert_axis(Axis(0));
        Ok(run(&self.decoder_layers, batch).row(0).to_owned())
    }

    /// Row-wise encoding of `x` (n × d) into n × m codes.
    pub fn reduce(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim, x.ncols())?;
        if x.nrows() == 0 {
            return Ok(Array2::zeros((0, self.code_dim)));
        }
        Ok(run(&self.encoder_layers, x))
    }

    /// Full encode/decode pass over a batch.
    pub fn reconstruct(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim, x.ncols())?;
        if x.nrows() == 0 {
            return Ok(Array2::zeros((0, self.input_dim)));
        }
        let codes = run(&self.encoder_layers, x);
        Ok(run(&self.decoder_layers, codes.view()))
    }

    /// Sum over rows of the squared reconstruction norm.
    pub fn reconstruction_error(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        let recon = self.reconstruct(x)?;
        Ok((&recon - &x).mapv(|v| v * v).sum())
    }

    /// [`Self::reconstruction_error`] divided by the number of rows.
    pub fn mean_reconstruction_error(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(self.reconstruction_error(x)? / x.nrows() as f64)
    }

    /// Backpropagated gradient of the summed reconstruction error over the
    /// rows of `x`, one entry per layer in [`Self::layers`] order. Returns the
    /// loss alongside.
    pub fn gradients(&self, x: ArrayView2<'_, f64>) -> Result<(f64, Vec<LayerGradient>)> {
        check_dim(self.input_dim, x.ncols())?;
        let layers: Vec<&LayerParams> = self.layers().collect();
        let mut activations = Vec::with_capacity(layers.len() + 1);
        activations.push(x.to_owned());
        for layer in &layers {
            let next = layer.forward(activations.last().unwrap().view());
            activations.push(next);
        }
        let output = activations.last().unwrap();
        let residual = output - &x;
        let loss = residual.mapv(|v| v * v).sum();

        let mut grads = Vec::with_capacity(layers.len());
        let mut upstream = residual * 2.0;
        for (idx, layer) in layers.iter().enumerate().rev() {
            let out = &activations[idx + 1];
            let act = layer.activation;
            let delta = ndarray::Zip::from(&upstream)
                .and(out)
                .map_collect(|&g, &a| g * act.derivative_from_output(a));
            grads.push(LayerGradient {
                weights: delta.t().dot(&activations[idx]),
                bias: delta.sum_axis(Axis(0)),
            });
            if idx > 0 {
                upstream = delta.dot(&layer.weights);
            }
        }
        grads.reverse();
        Ok((loss, grads))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelRecord {
            format: FORMAT.into(),
            version: FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: ModelRecord = serde_json::from_str(text)?;
        if record.format != FORMAT || record.version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(record.version));
        }
        let mut model = Self::new(record.model.encoder_layers, record.model.decoder_layers)?;
        model.loss_trace = record.model.loss_trace;
        Ok(model)
    }
}

fn chain_dims(start: usize, layers: &[LayerParams]) -> Result<usize> {
    layers.iter().try_fold(start, |dim, layer| {
        check_dim(dim, layer.in_dim())?;
        Ok(layer.out_dim())
    })
}

fn run(layers: &[LayerParams], input: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut current = input.to_owned();
    for layer in layers {
        current = layer.forward(current.view());
    }
    current
}

/// Code width used by the harness for both reducers.
pub fn half_dim(d: usize) -> usize {
    d.div_ceil(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: 16,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl AeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epochs > 0
            && self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size > 0
            && self.init_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "autoencoder config out of range: {self:?}"
            )))
        }
    }
}

/// Initial `d -> h -> m -> h -> d` sigmoid network with weights drawn
/// uniformly from `[-init_scale, init_scale]` and zero biases.
pub fn init_autoencoder(
    input_dim: usize,
    code_dim: usize,
    config: &AeTrainConfig,
) -> Result<AutoencoderModel> {
    if code_dim == 0 || code_dim > input_dim {
        return Err(Error::InvalidCodeDim {
            code_dim,
            input_dim,
        });
    }
    config.validate()?;
    let hidden = (input_dim + code_dim).div_ceil(2);
    let mut rng = seeded_rng(config.seed);
    let dist = Uniform::new_inclusive(-config.init_scale, config.init_scale);
    let mut layer = |inp: usize, out: usize| LayerParams {
        weights: Array2::from_shape_simple_fn((out, inp), || dist.sample(&mut rng)),
        bias: Array1::zeros(out),
        activation: Activation::Sigmoid,
    };
    let encoder = vec![layer(input_dim, hidden), layer(hidden, code_dim)];
    let decoder = vec![layer(code_dim, hidden), layer(hidden, input_dim)];
    AutoencoderModel::new(encoder, decoder)
}

/// Mini-batch gradient descent with classical momentum. Each step follows
/// the gradient of the summed squared reconstruction error over the batch.
pub fn train_autoencoder(
    x_train: ArrayView2<'_, f64>,
    code_dim: usize,
    config: &AeTrainConfig,
) -> Result<AutoencoderModel> {
    let (n, d) = x_train.dim();
    let mut model = init_autoencoder(d, code_dim, config)?;
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "autoencoder training needs at least 2 rows, got {n}"
        )));
    }
    train_from(&mut model, x_train, config)?;
    Ok(model)
}

/// Continues training an existing model in place. Batch order is drawn from
/// a generator derived from `config.seed`.
pub fn train_from(
    model: &mut AutoencoderModel,
    x_train: ArrayView2<'_, f64>,
    config: &AeTrainConfig,
) -> Result<()> {
    config.validate()?;
    check_dim(model.input_dim, x_train.ncols())?;
    let n = x_train.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    // Offset keeps the batch-order stream distinct from the init stream.
    let mut rng = seeded_rng(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut velocity: Vec<LayerGradient> = model
        .layers()
        .map(|l| LayerGradient {
            weights: Array2::zeros(l.weights.dim()),
            bias: Array1::zeros(l.bias.len()),
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = x_train.select(Axis(0), chunk);
            let (_, grads) = model.gradients(batch.view())?;
            let scale = config.learning_rate;
            for ((layer, vel), grad) in model.layers_mut().zip(velocity.iter_mut()).zip(&grads) {
                vel.weights *= config.momentum;
                vel.weights.scaled_add(-scale, &grad.weights);
                vel.bias *= config.momentum;
                vel.bias.scaled_add(-scale, &grad.bias);
                layer.weights += &vel.weights;
                layer.bias += &vel.bias;
            }
        }
        let loss = model.mean_reconstruction_error(x_train)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        model.loss_trace.push(loss);
    }
    Ok(())
}

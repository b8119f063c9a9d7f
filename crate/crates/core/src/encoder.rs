//! Trainable feed-forward encoder producing two stochastic views per sample.
//!
//! Token-sequence inputs are mean-pooled to one vector, pushed through a
//! small dense stack with inverted dropout on the hidden layers, and finished
//! by a dense representation head with optional L2 row normalization. The two
//! views of a batch come from two forward passes with independently drawn
//! dropout masks; masks depend only on their recorded seeds, so the backward
//! pass (and finite-difference checks) can replay them exactly.

use crate::data::Features;
use crate::seed::stream_rng;
use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("sample has an empty token sequence")]
    EmptySequence,
    #[error("batch dim {got} does not match encoder input dim {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },
    #[error("invalid encoder config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at the pre-activation value.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = pre.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub head_activation: Activation,
    pub dropout_rate: f64,
    pub normalize_output: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![64],
            output_dim: 32,
            activation: Activation::Tanh,
            head_activation: Activation::Identity,
            dropout_rate: 0.1,
            normalize_output: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out_dim x in_dim`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    fn zeros_like(&self) -> Self {
        Self {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }
}

/// Encoder parameters: a fixed input standardization, then a dense stack
/// where every layer except the last is followed by the hidden activation
/// and dropout, and the last (head) layer by `head_activation` and optional
/// row normalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EncoderParams {
    pub layers: Vec<DenseLayer>,
    pub activation: Activation,
    pub head_activation: Activation,
    pub dropout_rate: f64,
    pub normalize_output: bool,
    /// Per-dimension shift applied to inputs before the first layer.
    pub input_mean: Array1<f64>,
    /// Per-dimension scale applied after the shift. Not trainable.
    pub input_scale: Array1<f64>,
}

/// Two encoder outputs for the same batch under independent dropout draws.
/// Row `i` of both matrices encodes the same sample.
#[derive(Debug, Clone)]
pub struct ViewPair {
    pub z: Array2<f64>,
    pub z_prime: Array2<f64>,
    pub mask_seeds: (u64, u64),
}

impl ViewPair {
    pub fn from_parts(z: Array2<f64>, z_prime: Array2<f64>) -> Self {
        Self {
            z,
            z_prime,
            mask_seeds: (0, 0),
        }
    }

    pub fn batch_size(&self) -> usize {
        self.z.nrows()
    }

    /// Both views stacked into a `2N x D` matrix, first view on top.
    pub fn stacked(&self) -> Array2<f64> {
        let mut out = Array2::zeros((2 * self.z.nrows(), self.z.ncols()));
        out.slice_mut(ndarray::s![..self.z.nrows(), ..])
            .assign(&self.z);
        out.slice_mut(ndarray::s![self.z.nrows().., ..])
            .assign(&self.z_prime);
        out
    }
}

/// Cached intermediates from one forward pass, enough to replay backward.
#[derive(Debug, Clone)]
pub struct PassCache {
    layer_inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    /// Head output before normalization, present when normalization is on.
    pre_norm: Option<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub first: PassCache,
    pub second: PassCache,
}

/// Parameter gradients with the same shapes as [`EncoderParams::layers`].
#[derive(Debug, Clone)]
pub struct EncoderGradients {
    pub layers: Vec<DenseLayer>,
}

impl EncoderGradients {
    fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            layers: params.layers.iter().map(DenseLayer::zeros_like).collect(),
        }
    }

    fn accumulate(&mut self, other: &EncoderGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }
}

/// Mean over a non-empty token sequence. For a single token this is the
/// identity.
pub fn mean_pool(tokens: &[Vec<f64>]) -> Result<Vec<f64>, EncoderError> {
    if tokens.is_empty() {
        return Err(EncoderError::EmptySequence);
    }
    let dim = tokens[0].len();
    let mut out = vec![0.0; dim];
    for tok in tokens {
        for (o, &x) in out.iter_mut().zip(tok) {
            *o += x;
        }
    }
    let inv = 1.0 / tokens.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    Ok(out)
}

/// Pool a sample's features to a single vector.
pub fn pooled_features(features: &Features) -> Result<Vec<f64>, EncoderError> {
    match features {
        Features::Vector(v) => Ok(v.clone()),
        Features::Tokens(tokens) => mean_pool(tokens),
    }
}

/// Assemble pooled features into an `N x D_in` batch matrix.
pub fn batch_matrix<'a, I>(features: I) -> Result<Array2<f64>, EncoderError>
where
    I: IntoIterator<Item = &'a Features>,
{
    let rows: Vec<Vec<f64>> = features
        .into_iter()
        .map(pooled_features)
        .collect::<Result<_, _>>()?;
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let mut out = Array2::zeros((n, dim));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(EncoderError::DimMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        for (j, &x) in row.iter().enumerate() {
            out[[i, j]] = x;
        }
    }
    Ok(out)
}

/// L2-normalize each row; rows of zero norm are left untouched.
pub fn normalize_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|x| x / norm);
        }
    }
    out
}

/// Backward pass of row normalization: maps the gradient w.r.t. the
/// normalized rows to the gradient w.r.t. the raw rows. The result is
/// orthogonal to each normalized row.
pub fn normalize_rows_backward(pre_norm: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
    let mut grad_in = Array2::zeros(pre_norm.raw_dim());
    for i in 0..pre_norm.nrows() {
        let y = pre_norm.row(i);
        let g = grad_out.row(i);
        let norm = y.dot(&y).sqrt();
        if norm == 0.0 {
            grad_in.row_mut(i).assign(&g);
            continue;
        }
        let unit = y.mapv(|x| x / norm);
        let along = g.dot(&unit);
        for j in 0..pre_norm.ncols() {
            grad_in[[i, j]] = (g[j] - along * unit[j]) / norm;
        }
    }
    grad_in
}

/// Semi-orthogonal random matrix: orthonormal columns when `rows >= cols`,
/// orthonormal rows otherwise, so the layer is an isometry (or an orthogonal
/// projection) at init and does not distort input geometry.
fn orthogonal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let (n, m, transpose) = if rows >= cols {
        (rows, cols, false)
    } else {
        (cols, rows, true)
    };
    // Gaussian sample, then modified Gram-Schmidt over the m columns.
    let mut a = Array2::from_shape_fn((n, m), |_| {
        // Box-Muller keeps the dependency surface small here.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    });
    for j in 0..m {
        for k in 0..j {
            let proj = a.column(j).dot(&a.column(k));
            let prev = a.column(k).to_owned();
            let mut col = a.column_mut(j);
            col.scaled_add(-proj, &prev);
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        if norm > 1e-12 {
            a.column_mut(j).mapv_inplace(|x| x / norm);
        }
    }
    if transpose {
        a.t().to_owned()
    } else {
        a
    }
}

impl EncoderParams {
    /// Orthogonal initialization of a stack `input_dim -> hidden ->
    /// output_dim` from a seeded stream.
    pub fn init(input_dim: usize, config: &EncoderConfig, seed: u64) -> Result<Self, EncoderError> {
        let mut dims = vec![input_dim];
        dims.extend(&config.hidden_dims);
        dims.push(config.output_dim);
        if dims.iter().any(|&d| d == 0) {
            return Err(EncoderError::InvalidConfig("zero layer width".into()));
        }
        if !(0.0..1.0).contains(&config.dropout_rate) {
            return Err(EncoderError::InvalidConfig(format!(
                "dropout_rate {} not in [0, 1)",
                config.dropout_rate
            )));
        }
        let mut rng = stream_rng(seed, "encoder-init");
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            layers.push(DenseLayer {
                weight: orthogonal_matrix(fan_out, fan_in, &mut rng),
                bias: Array1::zeros(fan_out),
            });
        }
        Ok(Self {
            layers,
            activation: config.activation,
            head_activation: config.head_activation,
            dropout_rate: config.dropout_rate,
            normalize_output: config.normalize_output,
            input_mean: Array1::zeros(input_dim),
            input_scale: Array1::ones(input_dim),
        })
    }

    /// Fit the input standardization to a data matrix: per-dimension
    /// zero-mean, unit-variance. Near-constant dimensions keep unit scale.
    pub fn fit_input_standardization(&mut self, data: &Array2<f64>) {
        let n = data.nrows().max(1) as f64;
        let mean = data.sum_axis(Axis(0)).mapv(|s| s / n);
        let mut scale = Array1::ones(data.ncols());
        for j in 0..data.ncols() {
            let var = data
                .column(j)
                .iter()
                .map(|&x| (x - mean[j]) * (x - mean[j]))
                .sum::<f64>()
                / n;
            let std = var.sqrt();
            if std > 1e-9 {
                scale[j] = 1.0 / std;
            }
        }
        self.input_mean = mean;
        self.input_scale = scale;
    }

    fn standardize(&self, batch: &Array2<f64>) -> Array2<f64> {
        let mut out = batch.clone();
        for mut row in out.rows_mut() {
            row -= &self.input_mean;
            row *= &self.input_scale;
        }
        out
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").weight.nrows()
    }

    fn dropout_mask(&self, shape: (usize, usize), seed: u64) -> Array2<f64> {
        let p = self.dropout_rate;
        let keep_scale = 1.0 / (1.0 - p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn(shape, |_| {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                keep_scale
            }
        })
    }

    fn forward_one(
        &self,
        batch: &Array2<f64>,
        dropout_seed: Option<u64>,
    ) -> Result<(Array2<f64>, PassCache), EncoderError> {
        if batch.ncols() != self.input_dim() {
            return Err(EncoderError::DimMismatch {
                expected: self.input_dim(),
                got: batch.ncols(),
            });
        }
        let last = self.layers.len() - 1;
        let mut cache = PassCache {
            layer_inputs: Vec::with_capacity(self.layers.len()),
            pre_activations: Vec::with_capacity(self.layers.len()),
            masks: Vec::with_capacity(self.layers.len()),
            pre_norm: None,
        };
        let mut x = self.standardize(batch);
        for (idx, layer) in self.layers.iter().enumerate() {
            cache.layer_inputs.push(x.clone());
            let pre = x.dot(&layer.weight.t()) + &layer.bias;
            if pre.iter().any(|v| !v.is_finite()) {
                return Err(EncoderError::NonFinite { layer: idx });
            }
            cache.pre_activations.push(pre.clone());
            let act = if idx == last {
                self.head_activation
            } else {
                self.activation
            };
            let mut out = pre.mapv(|v| act.apply(v));
            if idx != last && self.dropout_rate > 0.0 {
                let seed = dropout_seed.expect("dropout requires a mask seed");
                // One stream per pass; distinct layers get distinct offsets.
                let mask = self.dropout_mask(out.dim(), seed.wrapping_add(idx as u64));
                out *= &mask;
                cache.masks.push(Some(mask));
            } else {
                cache.masks.push(None);
            }
            x = out;
        }
        if self.normalize_output {
            cache.pre_norm = Some(x.clone());
            x = normalize_rows(&x);
        }
        Ok((x, cache))
    }

    /// Two forward passes with independently drawn dropout masks.
    pub fn forward_two_views(
        &self,
        batch: &Array2<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ViewPair, ForwardCache), EncoderError> {
        let seed_a: u64 = rng.gen();
        let seed_b: u64 = rng.gen();
        self.forward_two_views_seeded(batch, seed_a, seed_b)
    }

    /// Deterministic two-view forward with explicit mask seeds. Masks depend
    /// only on the seeds and layer shapes, never on parameter values.
    pub fn forward_two_views_seeded(
        &self,
        batch: &Array2<f64>,
        seed_a: u64,
        seed_b: u64,
    ) -> Result<(ViewPair, ForwardCache), EncoderError> {
        let (z, first) = self.forward_one(batch, Some(seed_a))?;
        let (z_prime, second) = self.forward_one(batch, Some(seed_b))?;
        Ok((
            ViewPair {
                z,
                z_prime,
                mask_seeds: (seed_a, seed_b),
            },
            ForwardCache { first, second },
        ))
    }

    /// Inference pass: dropout off, single view.
    pub fn encode(&self, batch: &Array2<f64>) -> Result<Array2<f64>, EncoderError> {
        let stripped = EncoderParams {
            dropout_rate: 0.0,
            ..self.clone()
        };
        stripped.forward_one(batch, None).map(|(z, _)| z)
    }

    fn backward_one(
        &self,
        cache: &PassCache,
        grad_view: &Array2<f64>,
    ) -> (EncoderGradients, Array2<f64>) {
        let mut grads = EncoderGradients::zeros_like(self);
        let last = self.layers.len() - 1;
        let mut upstream = match &cache.pre_norm {
            Some(pre_norm) => normalize_rows_backward(pre_norm, grad_view),
            None => grad_view.clone(),
        };
        for idx in (0..self.layers.len()).rev() {
            if let Some(mask) = &cache.masks[idx] {
                upstream *= mask;
            }
            let act = if idx == last {
                self.head_activation
            } else {
                self.activation
            };
            let pre = &cache.pre_activations[idx];
            let grad_pre = &upstream * &pre.mapv(|v| act.derivative(v));
            let input = &cache.layer_inputs[idx];
            grads.layers[idx].weight = grad_pre.t().dot(input);
            grads.layers[idx].bias = grad_pre.sum_axis(Axis(0));
            upstream = grad_pre.dot(&self.layers[idx].weight);
        }
        (grads, upstream)
    }

    /// Exact parameter gradients for a two-view forward, given the loss
    /// gradients w.r.t. both views.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_z: &Array2<f64>,
        grad_z_prime: &Array2<f64>,
    ) -> EncoderGradients {
        let (mut grads, _) = self.backward_one(&cache.first, grad_z);
        let (second, _) = self.backward_one(&cache.second, grad_z_prime);
        grads.accumulate(&second);
        grads
    }

    /// Flatten all parameters into one vector (layer order, weights
    /// row-major, then bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weight.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`flatten`]: load parameters from a flat vector.
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weight.iter_mut() {
                *w = flat[offset];
                offset += 1;
            }
            for b in layer.bias.iter_mut() {
                *b = flat[offset];
                offset += 1;
            }
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }
}

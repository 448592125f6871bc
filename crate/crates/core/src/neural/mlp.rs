use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmath::{gemm, MatView, MatViewMut, Matrix, Op, Rng};

/// Architecture of a dense MLP with leaky-ReLU hidden layers.
///
/// With `skip` set, the raw input is concatenated to the last hidden
/// activation before the output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: usize,
    pub width: usize,
    pub outputs: usize,
    pub skip: bool,
    pub leaky_slope: f64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, outputs: usize) -> Self {
        MlpConfig { input_dim, hidden_layers: 3, width: 500, outputs, skip: true, leaky_slope: 0.01 }
    }

    pub fn with_hidden(mut self, hidden_layers: usize, width: usize) -> Self {
        self.hidden_layers = hidden_layers;
        self.width = width;
        self
    }

    pub fn with_skip(mut self, skip: bool) -> Self {
        self.skip = skip;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.outputs == 0 {
            return Err(Error::ConfigInvalid("network needs inputs and at least one output".into()));
        }
        if self.hidden_layers > 0 && self.width == 0 {
            return Err(Error::ConfigInvalid("hidden width must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.leaky_slope) {
            return Err(Error::ConfigInvalid("leaky slope must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn layer_shapes(&self) -> Vec<Layer> {
        let mut layers = Vec::with_capacity(self.hidden_layers + 1);
        let mut offset = 0;
        let mut push = |fan_in: usize, fan_out: usize| {
            let layer = Layer { fan_in, fan_out, w_off: offset, b_off: offset + fan_in * fan_out };
            offset += fan_in * fan_out + fan_out;
            layer
        };
        for l in 0..self.hidden_layers {
            let fan_in = if l == 0 { self.input_dim } else { self.width };
            layers.push(push(fan_in, self.width));
        }
        let out_in = match (self.hidden_layers, self.skip) {
            (0, _) => self.input_dim,
            (_, true) => self.width + self.input_dim,
            (_, false) => self.width,
        };
        layers.push(push(out_in, self.outputs));
        layers
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w_off: usize,
    b_off: usize,
}

impl Layer {
    fn end(&self) -> usize {
        self.b_off + self.fan_out
    }
}

/// Multi-layer perceptron whose parameters live in one flat vector.
///
/// Layer `l` stores a `fan_in × fan_out` row-major weight block followed by
/// its bias. For the output layer with a skip connection the first `width`
/// weight rows act on the hidden activation and the remaining `input_dim`
/// rows on the raw input.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

/// Hidden activations retained for the backward pass.
pub struct ForwardCache {
    activations: Vec<Matrix>,
}

impl Mlp {
    /// All parameters zero.
    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_shapes();
        let n = layers.last().map_or(0, Layer::end);
        Ok(Mlp { config, layers, params: vec![0.0; n] })
    }

    /// He-scaled normal weights, zero biases.
    pub fn new(config: MlpConfig, rng: &mut Rng) -> Result<Self> {
        let mut net = Mlp::zeros(config)?;
        let slope = net.config.leaky_slope;
        let gain = 2.0 / (1.0 + slope * slope);
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.clone().into_iter().enumerate() {
            let var = if l == last { 1.0 } else { gain } / layer.fan_in as f64;
            let std = var.sqrt();
            for w in &mut net.params[layer.w_off..layer.b_off] {
                *w = std * rng.standard_normal();
            }
        }
        Ok(net)
    }

    pub fn from_params(config: MlpConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Mlp::zeros(config)?;
        if params.len() != net.params.len() {
            return Err(Error::shape(format!("{} parameters", net.params.len()), params.len()));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        net.params = params;
        Ok(net)
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn outputs(&self) -> usize {
        self.config.outputs
    }

    fn weights(&self, layer: &Layer) -> MatView<'_> {
        MatView::new(layer.fan_in, layer.fan_out, &self.params[layer.w_off..layer.b_off])
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::shape(format!("{} input columns", self.config.input_dim), x.cols()));
        }
        Ok(())
    }

    /// Logits for every row of `x`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        Ok(self.forward_cached(x).1)
    }

    pub(crate) fn forward_cached(&self, x: &Matrix) -> (ForwardCache, Matrix) {
        let n = x.rows();
        let slope = self.config.leaky_slope;
        let hidden = &self.layers[..self.layers.len() - 1];
        let mut activations: Vec<Matrix> = Vec::with_capacity(hidden.len());
        for layer in hidden {
            let input = activations.last().unwrap_or(x);
            let mut z = Matrix::zeros(n, layer.fan_out);
            broadcast_bias(&mut z, &self.params[layer.b_off..layer.end()]);
            gemm(Op::N, Op::N, 1.0, input.as_view(), self.weights(layer), 1.0, z.as_view_mut());
            for v in z.data_mut() {
                if *v < 0.0 {
                    *v *= slope;
                }
            }
            activations.push(z);
        }

        let out = self.layers.last().expect("output layer");
        let mut logits = Matrix::zeros(n, out.fan_out);
        broadcast_bias(&mut logits, &self.params[out.b_off..out.end()]);
        match activations.last() {
            None => gemm(Op::N, Op::N, 1.0, x.as_view(), self.weights(out), 1.0, logits.as_view_mut()),
            Some(h) => {
                let w = self.config.width;
                let k = out.fan_out;
                let w_h = MatView::new(w, k, &self.params[out.w_off..out.w_off + w * k]);
                gemm(Op::N, Op::N, 1.0, h.as_view(), w_h, 1.0, logits.as_view_mut());
                if self.config.skip {
                    let w_x = MatView::new(self.config.input_dim, k, &self.params[out.w_off + w * k..out.b_off]);
                    gemm(Op::N, Op::N, 1.0, x.as_view(), w_x, 1.0, logits.as_view_mut());
                }
            }
        }
        (ForwardCache { activations }, logits)
    }

    /// Gradient of a scalar loss with respect to all parameters, given the
    /// loss gradient `dlogits` with respect to the logits of `x`.
    pub(crate) fn backward(&self, x: &Matrix, cache: &ForwardCache, dlogits: &Matrix) -> Vec<f64> {
        let mut grads = vec![0.0; self.params.len()];
        let slope = self.config.leaky_slope;
        let acts = &cache.activations;
        let out = *self.layers.last().expect("output layer");
        let k = out.fan_out;

        column_sums(dlogits, &mut grads[out.b_off..out.end()]);
        let mut delta = match acts.last() {
            None => {
                let dw = MatViewMut::new(out.fan_in, k, &mut grads[out.w_off..out.b_off]);
                gemm(Op::T, Op::N, 1.0, x.as_view(), dlogits.as_view(), 0.0, dw);
                return grads;
            }
            Some(h) => {
                let w = self.config.width;
                let (dw_h, dw_x) = grads[out.w_off..out.b_off].split_at_mut(w * k);
                gemm(Op::T, Op::N, 1.0, h.as_view(), dlogits.as_view(), 0.0, MatViewMut::new(w, k, dw_h));
                if self.config.skip {
                    let dw_x = MatViewMut::new(self.config.input_dim, k, dw_x);
                    gemm(Op::T, Op::N, 1.0, x.as_view(), dlogits.as_view(), 0.0, dw_x);
                }
                let w_h = MatView::new(w, k, &self.params[out.w_off..out.w_off + w * k]);
                let mut da = Matrix::zeros(x.rows(), w);
                gemm(Op::N, Op::T, 1.0, dlogits.as_view(), w_h, 0.0, da.as_view_mut());
                da
            }
        };

        for l in (0..acts.len()).rev() {
            let layer = self.layers[l];
            for (d, a) in delta.data_mut().iter_mut().zip(acts[l].data()) {
                if *a <= 0.0 {
                    *d *= slope;
                }
            }
            let input = if l == 0 { x } else { &acts[l - 1] };
            column_sums(&delta, &mut grads[layer.b_off..layer.end()]);
            let dw = MatViewMut::new(layer.fan_in, layer.fan_out, &mut grads[layer.w_off..layer.b_off]);
            gemm(Op::T, Op::N, 1.0, input.as_view(), delta.as_view(), 0.0, dw);
            if l > 0 {
                let mut prev = Matrix::zeros(x.rows(), layer.fan_in);
                gemm(Op::N, Op::T, 1.0, delta.as_view(), self.weights(&layer), 0.0, prev.as_view_mut());
                delta = prev;
            }
        }
        grads
    }

    /// Writes a versioned JSON snapshot. Floats round-trip exactly.
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let snap =
            MlpSnapshot { format_version: SNAPSHOT_VERSION, config: self.config.clone(), params: self.params.clone() };
        fs::write(path, serde_json::to_vec(&snap)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let snap: MlpSnapshot = serde_json::from_slice(&fs::read(path)?)?;
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(Error::Format(format!(
                "network snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.format_version
            )));
        }
        Mlp::from_params(snap.config, snap.params)
    }
}

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MlpSnapshot {
    format_version: u32,
    config: MlpConfig,
    params: Vec<f64>,
}

fn broadcast_bias(m: &mut Matrix, bias: &[f64]) {
    for i in 0..m.rows() {
        m.row_mut(i).copy_from_slice(bias);
    }
}

fn column_sums(m: &Matrix, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for row in m.iter_rows() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

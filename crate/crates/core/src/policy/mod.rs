//! Feed-forward and convolutional policy networks `u = phi(X; theta)` with a
//! hand-written reverse sweep.
//!
//! Activations are stored channel-major (`[c][y][x]`); a 2D field with node
//! index `iy * J + ix` is a single-channel image.

mod adam;
mod checkpoint;
mod sparse;

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use sparse::{masked_noise_inner_product, masked_policy_inner_product, sparse_forward_pass};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::spde::Controller;

/// Network family and sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    /// Dense layers with rectified-linear hidden units and a linear head.
    Mlp {
        inputs: usize,
        hidden: Vec<usize>,
        outputs: usize,
    },
    /// conv 4x4/5/s2 valid, relu -> pool -> conv 2x2/16/s1 same, relu -> pool -> dense.
    Cnn { side: usize, outputs: usize },
}

impl Architecture {
    pub fn mlp(inputs: usize, outputs: usize) -> Self {
        Architecture::Mlp {
            inputs,
            hidden: vec![64, 64],
            outputs,
        }
    }

    pub fn cnn(side: usize, outputs: usize) -> Self {
        Architecture::Cnn { side, outputs }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp { .. } => "mlp",
            Architecture::Cnn { .. } => "cnn",
        }
    }

    pub fn inputs(&self) -> usize {
        match self {
            Architecture::Mlp { inputs, .. } => *inputs,
            Architecture::Cnn { side, .. } => side * side,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Architecture::Mlp { outputs, .. } | Architecture::Cnn { outputs, .. } => *outputs,
        }
    }

    /// Builds the layer list, checking that every shape is positive.
    pub fn layers(&self) -> Result<Vec<Layer>> {
        let layers = match self {
            Architecture::Mlp {
                inputs,
                hidden,
                outputs,
            } => {
                let mut sizes = vec![*inputs];
                sizes.extend(hidden);
                sizes.push(*outputs);
                let n = sizes.len() - 1;
                (0..n)
                    .map(|i| Layer::Dense {
                        inputs: sizes[i],
                        outputs: sizes[i + 1],
                        relu: i + 1 < n,
                    })
                    .collect::<Vec<_>>()
            }
            Architecture::Cnn { side, outputs } => {
                let conv1 = Layer::Conv {
                    channels_in: 1,
                    channels_out: 5,
                    height: *side,
                    width: *side,
                    kernel: 4,
                    stride: 2,
                    pad_lo: 0,
                    pad_hi: 0,
                    relu: true,
                };
                if *side < 4 {
                    return Err(Error::InvalidPolicy(format!("CNN input side {side} is smaller than the 4x4 kernel")));
                }
                let [c, h, w] = conv1.output_shape();
                let pool1 = Layer::MaxPool {
                    channels: c,
                    height: h,
                    width: w,
                };
                let [c, h, w] = pool1.output_shape();
                let conv2 = Layer::Conv {
                    channels_in: c,
                    channels_out: 16,
                    height: h,
                    width: w,
                    kernel: 2,
                    stride: 1,
                    pad_lo: 0,
                    pad_hi: 1,
                    relu: true,
                };
                let [c, h, w] = conv2.output_shape();
                let pool2 = Layer::MaxPool {
                    channels: c,
                    height: h,
                    width: w,
                };
                let flat = pool2.output_len();
                let head = Layer::Dense {
                    inputs: flat,
                    outputs: *outputs,
                    relu: false,
                };
                vec![conv1, pool1, conv2, pool2, head]
            }
        };
        for layer in &layers {
            if layer.input_len() == 0 || layer.output_len() == 0 {
                return Err(Error::InvalidPolicy(format!("layer {layer:?} has an empty shape")));
            }
        }
        Ok(layers)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Layer {
    /// `y = W x + b`, `W` row-major `[outputs][inputs]`.
    Dense { inputs: usize, outputs: usize, relu: bool },
    /// Zero-padded cross-correlation, weights `[out][in][ky][kx]`.
    Conv {
        channels_in: usize,
        channels_out: usize,
        height: usize,
        width: usize,
        kernel: usize,
        stride: usize,
        pad_lo: usize,
        pad_hi: usize,
        relu: bool,
    },
    /// 2x2 max-pool with stride 2; odd extents are floored.
    MaxPool { channels: usize, height: usize, width: usize },
}

impl Layer {
    pub fn input_len(&self) -> usize {
        match *self {
            Layer::Dense { inputs, .. } => inputs,
            Layer::Conv {
                channels_in,
                height,
                width,
                ..
            } => channels_in * height * width,
            Layer::MaxPool {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }

    /// `[channels, height, width]`; dense layers report `[outputs, 1, 1]`.
    pub fn output_shape(&self) -> [usize; 3] {
        match *self {
            Layer::Dense { outputs, .. } => [outputs, 1, 1],
            Layer::Conv {
                channels_out,
                height,
                width,
                kernel,
                stride,
                pad_lo,
                pad_hi,
                ..
            } => {
                let out = |n: usize| (n + pad_lo + pad_hi).checked_sub(kernel).map_or(0, |s| s / stride + 1);
                [channels_out, out(height), out(width)]
            }
            Layer::MaxPool {
                channels,
                height,
                width,
            } => [channels, height / 2, width / 2],
        }
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().iter().product()
    }

    pub fn param_count(&self) -> usize {
        match *self {
            Layer::Dense { inputs, outputs, .. } => inputs * outputs + outputs,
            Layer::Conv {
                channels_in,
                channels_out,
                kernel,
                ..
            } => channels_out * channels_in * kernel * kernel + channels_out,
            Layer::MaxPool { .. } => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Dense { inputs, .. } => inputs,
            Layer::Conv {
                channels_in, kernel, ..
            } => channels_in * kernel * kernel,
            Layer::MaxPool { .. } => 0,
        }
    }

    fn weight_count(&self) -> usize {
        match *self {
            Layer::Dense { outputs, .. } | Layer::Conv { channels_out: outputs, .. } => self.param_count() - outputs,
            Layer::MaxPool { .. } => 0,
        }
    }

    fn relu(&self) -> bool {
        match *self {
            Layer::Dense { relu, .. } | Layer::Conv { relu, .. } => relu,
            Layer::MaxPool { .. } => false,
        }
    }

    /// Pre-activation output for input `x`.
    fn linear(&self, w: &[f64], x: &[f64], out: &mut [f64]) {
        match *self {
            Layer::Dense { inputs, outputs, .. } => {
                let (weights, bias) = w.split_at(inputs * outputs);
                for o in 0..outputs {
                    let row = &weights[o * inputs..(o + 1) * inputs];
                    out[o] = bias[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            Layer::Conv {
                channels_in,
                channels_out,
                height,
                width,
                kernel,
                stride,
                pad_lo,
                ..
            } => {
                let [_, oh, ow] = self.output_shape();
                let (weights, bias) = w.split_at(channels_out * channels_in * kernel * kernel);
                for oc in 0..channels_out {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = bias[oc];
                            for ic in 0..channels_in {
                                for ky in 0..kernel {
                                    let Some(iy) = (oy * stride + ky).checked_sub(pad_lo).filter(|&v| v < height) else {
                                        continue;
                                    };
                                    for kx in 0..kernel {
                                        let Some(ix) = (ox * stride + kx).checked_sub(pad_lo).filter(|&v| v < width)
                                        else {
                                            continue;
                                        };
                                        acc += weights[((oc * channels_in + ic) * kernel + ky) * kernel + kx]
                                            * x[(ic * height + iy) * width + ix];
                                    }
                                }
                            }
                            out[(oc * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
            }
            Layer::MaxPool { .. } => unreachable!("pooling has no linear part"),
        }
    }

    /// Max-pool forward; `argmax` receives the input index of each output.
    fn pool(&self, x: &[f64], out: &mut [f64], argmax: &mut [usize]) {
        let Layer::MaxPool { channels, height, width } = *self else {
            unreachable!()
        };
        let (oh, ow) = (height / 2, width / 2);
        for c in 0..channels {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = (c * oh + oy) * ow + ox;
                    let (best, best_idx) = pool_window(x, c, oy, ox, height, width);
                    out[o] = best;
                    argmax[o] = best_idx;
                }
            }
        }
    }

    fn forward(&self, w: &[f64], x: &[f64], out: &mut [f64], argmax: &mut [usize]) {
        match self {
            Layer::MaxPool { .. } => self.pool(x, out, argmax),
            _ => {
                self.linear(w, x, out);
                if self.relu() {
                    out.iter_mut().for_each(|v| *v = v.max(0.0));
                }
            }
        }
    }

    /// Reverse sweep of one layer. `delta` is the gradient with respect to
    /// the layer output and is consumed; `grad_in` (if any) receives the
    /// gradient with respect to the input.
    fn backward(
        &self,
        w: &[f64],
        x: &[f64],
        y: &[f64],
        argmax: &[usize],
        delta: &mut [f64],
        grad_w: &mut [f64],
        grad_in: Option<&mut [f64]>,
    ) {
        if self.relu() {
            for (d, &v) in delta.iter_mut().zip(y) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        match *self {
            Layer::Dense { inputs, outputs, .. } => {
                let (gw, gb) = grad_w.split_at_mut(inputs * outputs);
                for o in 0..outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, &xi) in gw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
                if let Some(gi) = grad_in {
                    gi.fill(0.0);
                    let weights = &w[..inputs * outputs];
                    for o in 0..outputs {
                        let d = delta[o];
                        if d == 0.0 {
                            continue;
                        }
                        for (g, &wi) in gi.iter_mut().zip(&weights[o * inputs..(o + 1) * inputs]) {
                            *g += d * wi;
                        }
                    }
                }
            }
            Layer::Conv {
                channels_in,
                channels_out,
                height,
                width,
                kernel,
                stride,
                pad_lo,
                ..
            } => {
                let [_, oh, ow] = self.output_shape();
                let nw = channels_out * channels_in * kernel * kernel;
                let mut grad_in = grad_in;
                if let Some(gi) = grad_in.as_deref_mut() {
                    gi.fill(0.0);
                }
                for oc in 0..channels_out {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let d = delta[(oc * oh + oy) * ow + ox];
                            if d == 0.0 {
                                continue;
                            }
                            grad_w[nw + oc] += d;
                            for ic in 0..channels_in {
                                for ky in 0..kernel {
                                    let Some(iy) = (oy * stride + ky).checked_sub(pad_lo).filter(|&v| v < height) else {
                                        continue;
                                    };
                                    for kx in 0..kernel {
                                        let Some(ix) = (ox * stride + kx).checked_sub(pad_lo).filter(|&v| v < width)
                                        else {
                                            continue;
                                        };
                                        let wi = ((oc * channels_in + ic) * kernel + ky) * kernel + kx;
                                        let xi = (ic * height + iy) * width + ix;
                                        grad_w[wi] += d * x[xi];
                                        if let Some(gi) = grad_in.as_deref_mut() {
                                            gi[xi] += d * w[wi];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Layer::MaxPool { .. } => {
                if let Some(gi) = grad_in {
                    gi.fill(0.0);
                    for (o, &src) in argmax.iter().enumerate() {
                        gi[src] += delta[o];
                    }
                }
            }
        }
    }
}

/// Maximum over one 2x2 window; ties go to the first element in row-major order.
pub(crate) fn pool_window(x: &[f64], c: usize, oy: usize, ox: usize, height: usize, width: usize) -> (f64, usize) {
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = usize::MAX;
    for dy in 0..2 {
        for dx in 0..2 {
            let i = (c * height + 2 * oy + dy) * width + 2 * ox + dx;
            if x[i] > best || best_idx == usize::MAX {
                best = x[i];
                best_idx = i;
            }
        }
    }
    (best, best_idx)
}

/// Weight initialization scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Weights `N(0, 2 / fan_in)`, biases zero.
    #[default]
    Rectifier,
    /// Rectifier scaling multiplied by a constant.
    Scaled(f64),
    /// All parameters zero.
    Zero,
}

/// Network parameters as one flat array, ordered layer by layer with each
/// layer's weights followed by its biases.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

/// Recorded activations of one forward pass.
#[derive(Clone, Debug)]
pub struct GradientTape {
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    pub activations: Vec<Vec<f64>>,
    /// Argmax indices for pooling layers (empty for the others).
    pub argmax: Vec<Vec<usize>>,
}

impl GradientTape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape has an input")
    }
}

impl PolicyParams {
    pub fn from_values(arch: &Architecture, values: Vec<f64>) -> Result<Self> {
        let layers = arch.layers()?;
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for layer in &layers {
            offsets.push(total);
            total += layer.param_count();
        }
        offsets.push(total);
        if values.len() != total {
            return Err(Error::Shape {
                expected: total,
                found: values.len(),
                context: "policy parameter count",
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolicy("non-finite parameter".into()));
        }
        Ok(Self {
            arch: arch.clone(),
            layers,
            offsets,
            values,
        })
    }

    pub fn zeros(arch: &Architecture) -> Result<Self> {
        let n = arch.layers()?.iter().map(Layer::param_count).sum();
        Self::from_values(arch, vec![0.0; n])
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn inputs(&self) -> usize {
        self.arch.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.arch.outputs()
    }

    pub(crate) fn layer_params(&self, i: usize) -> &[f64] {
        &self.values[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Sets every bias to zero.
    pub fn clear_biases(&mut self) {
        for i in 0..self.layers.len() {
            let nw = self.layers[i].weight_count();
            let (start, end) = (self.offsets[i] + nw, self.offsets[i + 1]);
            self.values[start..end].fill(0.0);
        }
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs() {
            return Err(Error::Shape {
                expected: self.inputs(),
                found: x.len(),
                context: "policy input",
            });
        }
        Ok(())
    }

    /// Forward pass on raw input values.
    pub fn forward_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.record(x)?.activations.pop().expect("non-empty"))
    }

    /// Forward pass on a field (`J` values for the MLP, a `J x J` image for the CNN).
    pub fn forward(&self, x: &Field) -> Result<Vec<f64>> {
        self.forward_values(x.values())
    }

    /// Forward pass keeping every intermediate activation.
    pub fn record(&self, x: &[f64]) -> Result<GradientTape> {
        self.check_input(x)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut argmax = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.output_len()];
            let mut am = if matches!(layer, Layer::MaxPool { .. }) {
                vec![0; out.len()]
            } else {
                Vec::new()
            };
            layer.forward(self.layer_params(i), &activations[i], &mut out, &mut am);
            activations.push(out);
            argmax.push(am);
        }
        Ok(GradientTape { activations, argmax })
    }

    /// Recomputes the forward pass from the recorded input and returns the
    /// largest deviation from the recorded output.
    pub fn replay_error(&self, tape: &GradientTape) -> Result<f64> {
        let out = self.forward_values(&tape.activations[0])?;
        Ok(out
            .iter()
            .zip(tape.output())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Accumulates `d(upstream . phi) / d theta` into `grad`.
    pub fn backward(&self, tape: &GradientTape, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        if upstream.len() != self.outputs() {
            return Err(Error::Shape {
                expected: self.outputs(),
                found: upstream.len(),
                context: "policy output gradient",
            });
        }
        if grad.len() != self.len() {
            return Err(Error::Shape {
                expected: self.len(),
                found: grad.len(),
                context: "policy parameter gradient",
            });
        }
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let (start, end) = (self.offsets[i], self.offsets[i + 1]);
            let mut grad_in = (i > 0).then(|| vec![0.0; layer.input_len()]);
            layer.backward(
                self.layer_params(i),
                &tape.activations[i],
                &tape.activations[i + 1],
                &tape.argmax[i],
                &mut delta,
                &mut grad[start..end],
                grad_in.as_deref_mut(),
            );
            match grad_in {
                Some(g) => delta = g,
                None => break,
            }
        }
        Ok(())
    }

    /// One-line-per-layer description used by checkpoints.
    pub fn manifest(&self) -> Vec<String> {
        let mut lines = vec![format!("arch {}", self.arch.name())];
        match &self.arch {
            Architecture::Mlp {
                inputs,
                hidden,
                outputs,
            } => {
                let hidden: Vec<String> = hidden.iter().map(|h| h.to_string()).collect();
                lines.push(format!("inputs {inputs}"));
                lines.push(format!("hidden {}", hidden.join(" ")));
                lines.push(format!("outputs {outputs}"));
            }
            Architecture::Cnn { side, outputs } => {
                lines.push(format!("side {side}"));
                lines.push(format!("outputs {outputs}"));
            }
        }
        for layer in &self.layers {
            lines.push(match *layer {
                Layer::Dense { inputs, outputs, relu } => format!("layer dense {inputs} {outputs} {}", act(relu)),
                Layer::Conv {
                    channels_in,
                    channels_out,
                    height,
                    width,
                    kernel,
                    stride,
                    pad_lo,
                    pad_hi,
                    relu,
                } => format!(
                    "layer conv {channels_in} {channels_out} {height} {width} {kernel} {stride} {pad_lo} {pad_hi} {}",
                    act(relu)
                ),
                Layer::MaxPool {
                    channels,
                    height,
                    width,
                } => format!("layer maxpool {channels} {height} {width}"),
            });
        }
        lines.push(format!("params {}", self.len()));
        lines
    }
}

fn act(relu: bool) -> &'static str {
    if relu {
        "relu"
    } else {
        "linear"
    }
}

pub fn init_params<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R, scheme: InitScheme) -> Result<PolicyParams> {
    let mut p = PolicyParams::zeros(arch)?;
    let scale = match scheme {
        InitScheme::Zero => return Ok(p),
        InitScheme::Rectifier => 1.0,
        InitScheme::Scaled(s) => s,
    };
    for i in 0..p.layers.len() {
        let layer = &p.layers[i];
        let std = scale * (2.0 / layer.fan_in().max(1) as f64).sqrt();
        let start = p.offsets[i];
        for v in &mut p.values[start..start + layer.weight_count()] {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(p)
}

impl Controller for PolicyParams {
    fn outputs(&self) -> usize {
        self.arch.outputs()
    }

    fn control(&self, state: &Field) -> Result<Vec<f64>> {
        self.forward(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_input(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mlp_parameter_count() {
        let p = PolicyParams::zeros(&Architecture::mlp(64, 5)).unwrap();
        assert_eq!(p.len(), 64 * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
        assert_eq!(p.len(), 8645);
    }

    #[test]
    fn cnn_shape_chain_32() {
        let layers = Architecture::cnn(32, 5).layers().unwrap();
        let shapes: Vec<[usize; 3]> = layers.iter().map(Layer::output_shape).collect();
        assert_eq!(shapes, vec![[5, 15, 15], [5, 7, 7], [16, 7, 7], [16, 3, 3], [5, 1, 1]]);
        assert_eq!(layers[4].input_len(), 144);
        let count: usize = layers.iter().map(Layer::param_count).sum();
        assert_eq!(count, (5 * 16 + 5) + (16 * 5 * 4 + 16) + (144 * 5 + 5));
    }

    #[test]
    fn cnn_shape_chain_16() {
        let layers = Architecture::cnn(16, 5).layers().unwrap();
        let shapes: Vec<[usize; 3]> = layers.iter().map(Layer::output_shape).collect();
        assert_eq!(shapes, vec![[5, 7, 7], [5, 3, 3], [16, 3, 3], [16, 1, 1], [5, 1, 1]]);
    }

    #[test]
    fn init_is_seeded_and_zero_scheme_is_zero() {
        let arch = Architecture::mlp(16, 3);
        let a = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(1), InitScheme::Rectifier).unwrap();
        let b = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(1), InitScheme::Rectifier).unwrap();
        assert_eq!(a, b);
        let z = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(1), InitScheme::Zero).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let g = make_grid(1, 1.0, 16).unwrap();
        assert_eq!(z.forward(&Field::from_fn(&g, |p| p[0])).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn init_variance_follows_fan_in() {
        let arch = Architecture::Mlp {
            inputs: 400,
            hidden: vec![300],
            outputs: 2,
        };
        let p = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(3), InitScheme::Rectifier).unwrap();
        let w = &p.values()[..400 * 300];
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var / (2.0 / 400.0) - 1.0).abs() < 0.03, "var {var}");
        assert!(p.values()[400 * 300..400 * 300 + 300].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn hand_built_sum_network() {
        // one hidden unit summing positive inputs, linear head copying it
        let arch = Architecture::Mlp {
            inputs: 8,
            hidden: vec![1],
            outputs: 1,
        };
        let mut values = vec![1.0; 8];
        values.push(0.0); // hidden bias
        values.push(1.0); // head weight
        values.push(0.0); // head bias
        let p = PolicyParams::from_values(&arch, values).unwrap();
        let x: Vec<f64> = (0..8).map(|i| 0.1 * i as f64 + 0.05).collect();
        let u = p.forward_values(&x).unwrap();
        assert!((u[0] - x.iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn conv_matches_direct_sum() {
        let arch = Architecture::cnn(12, 2);
        let p = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(4), InitScheme::Rectifier).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_input(144, &mut rng);
        let tape = p.record(&x).unwrap();
        // first conv output (oc=2, oy=1, ox=2) by hand: stride 2, no padding
        let w = p.layer_params(0);
        let mut acc = w[80 + 2];
        for ky in 0..4 {
            for kx in 0..4 {
                acc += w[(2 * 4 + ky) * 4 + kx] * x[(2 + ky) * 12 + 4 + kx];
            }
        }
        let [_, oh, ow] = p.layers()[0].output_shape();
        assert_eq!((oh, ow), (5, 5));
        assert!((tape.activations[1][(2 * 5 + 1) * 5 + 2] - acc.max(0.0)).abs() < 1e-14);
    }

    #[test]
    fn relu_positive_homogeneity() {
        let arch = Architecture::mlp(16, 4);
        let mut p = init_params(&arch, &mut ChaCha8Rng::seed_from_u64(6), InitScheme::Rectifier).unwrap();
        p.clear_biases();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_input(16, &mut rng);
        for c in [0.01, 0.5, 3.0, 100.0] {
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let a = p.forward_values(&cx).unwrap();
            let b = p.forward_values(&x).unwrap();
            for (ai, bi) in a.iter().zip(&b) {
                assert!((ai - c * bi).abs() < 1e-12 * c.max(1.0));
            }
        }
    }

    #[test]
    fn tape_replays_its_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for arch in [Architecture::mlp(16, 5), Architecture::cnn(16, 5)] {
            let p = init_params(&arch, &mut rng, InitScheme::Rectifier).unwrap();
            let x = random_input(arch.inputs(), &mut rng);
            let tape = p.record(&x).unwrap();
            assert!(p.replay_error(&tape).unwrap() <= 1e-15);
        }
    }

    fn check_backward(arch: Architecture, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = init_params(&arch, &mut rng, InitScheme::Rectifier).unwrap();
        for v in p.values_mut() {
            *v += 0.05 * rng.random_range(-1.0..1.0);
        }
        let x = random_input(arch.inputs(), &mut rng);
        let up = random_input(arch.outputs(), &mut rng);
        let tape = p.record(&x).unwrap();
        let mut grad = vec![0.0; p.len()];
        p.backward(&tape, &up, &mut grad).unwrap();
        let f = |q: &PolicyParams| -> f64 {
            q.forward_values(&x).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        let h = 1e-6;
        for _ in 0..40 {
            let k = rng.random_range(0..p.len());
            let mut plus = p.clone();
            plus.values_mut()[k] += h;
            let mut minus = p.clone();
            minus.values_mut()[k] -= h;
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let err = (fd - grad[k]).abs() / grad[k].abs().max(1e-3);
            assert!(err < 1e-4, "param {k}: fd {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn backward_matches_finite_differences_mlp() {
        check_backward(Architecture::mlp(12, 3), 10);
    }

    #[test]
    fn backward_matches_finite_differences_cnn() {
        check_backward(Architecture::cnn(16, 5), 11);
    }

    #[test]
    fn pool_ties_route_to_first_element() {
        let layer = Layer::MaxPool {
            channels: 1,
            height: 2,
            width: 2,
        };
        let mut out = [0.0];
        let mut am = [0];
        layer.pool(&[1.0, 1.0, 1.0, 1.0], &mut out, &mut am);
        assert_eq!(am[0], 0);
        let mut gi = [0.0; 4];
        let mut delta = [2.0];
        layer.backward(&[], &[1.0; 4], &out, &am, &mut delta, &mut [], Some(&mut gi));
        assert_eq!(gi, [2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn wrong_input_size_is_rejected() {
        let p = PolicyParams::zeros(&Architecture::mlp(16, 2)).unwrap();
        assert!(matches!(p.forward_values(&[0.0; 15]), Err(Error::Shape { .. })));
        assert!(PolicyParams::from_values(&Architecture::mlp(16, 2), vec![0.0; 3]).is_err());
    }
}

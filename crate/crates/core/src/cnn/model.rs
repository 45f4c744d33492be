use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers;
use super::{Shape, Tensor};
use crate::numerics::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv2d,
    Conv1d,
    MaxPool,
    FullyConnected,
    Relu,
    Softmax,
}

impl LayerKind {
    pub fn has_params(self) -> bool {
        matches!(
            self,
            LayerKind::Conv2d | LayerKind::Conv1d | LayerKind::FullyConnected
        )
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            LayerKind::Conv2d => 0,
            LayerKind::Conv1d => 1,
            LayerKind::MaxPool => 2,
            LayerKind::FullyConnected => 3,
            LayerKind::Relu => 4,
            LayerKind::Softmax => 5,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => LayerKind::Conv2d,
            1 => LayerKind::Conv1d,
            2 => LayerKind::MaxPool,
            3 => LayerKind::FullyConnected,
            4 => LayerKind::Relu,
            5 => LayerKind::Softmax,
            _ => return None,
        })
    }
}

/// One layer of a [`CnnModel`].
///
/// `kernel` and `stride` are (rows, cols); 1-D layers use a column extent
/// of 1. For convolutions `out_channels` is the filter count, for fully
/// connected layers it is the output width. `in_channels` is filled in when
/// the model is assembled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: (usize, usize),
}

impl LayerSpec {
    fn base(name: &str, kind: LayerKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
            kernel: (0, 0),
            in_channels: 0,
            out_channels: 0,
            stride: (1, 1),
        }
    }

    pub fn conv2d(name: &str, filters: usize, kernel: (usize, usize)) -> Self {
        Self {
            kernel,
            out_channels: filters,
            ..Self::base(name, LayerKind::Conv2d)
        }
    }

    pub fn conv1d(name: &str, filters: usize, kernel: usize) -> Self {
        Self {
            kernel: (kernel, 1),
            out_channels: filters,
            ..Self::base(name, LayerKind::Conv1d)
        }
    }

    pub fn max_pool(name: &str, size: (usize, usize), stride: (usize, usize)) -> Self {
        Self {
            kernel: size,
            stride,
            ..Self::base(name, LayerKind::MaxPool)
        }
    }

    pub fn fully_connected(name: &str, outputs: usize) -> Self {
        Self {
            out_channels: outputs,
            ..Self::base(name, LayerKind::FullyConnected)
        }
    }

    pub fn relu(name: &str) -> Self {
        Self::base(name, LayerKind::Relu)
    }

    pub fn softmax(name: &str) -> Self {
        Self::base(name, LayerKind::Softmax)
    }

    /// Output shape for `input`, or an error if the layer cannot accept it.
    fn output_shape(&self, input: Shape) -> Result<Shape> {
        let bad = |why: String| Error::invalid(format!("layer `{}`: {why}", self.name));
        match self.kind {
            LayerKind::Conv2d | LayerKind::Conv1d => {
                let (kh, kw) = self.kernel;
                if kh == 0 || kw == 0 || self.out_channels == 0 {
                    return Err(bad("empty kernel or zero filters".into()));
                }
                if self.kind == LayerKind::Conv1d && (kw != 1 || input.width != 1) {
                    return Err(bad(format!("1-D convolution needs width 1, input {input}")));
                }
                if input.height < kh || input.width < kw {
                    return Err(bad(format!("{kh}x{kw} kernel does not fit input {input}")));
                }
                Ok(Shape::new(
                    self.out_channels,
                    input.height - kh + 1,
                    input.width - kw + 1,
                ))
            }
            LayerKind::MaxPool => {
                let (ph, pw) = self.kernel;
                let (sh, sw) = self.stride;
                if ph == 0 || pw == 0 || sh == 0 || sw == 0 {
                    return Err(bad("empty pool window or stride".into()));
                }
                if input.height < ph || input.width < pw {
                    return Err(bad(format!("{ph}x{pw} pool does not fit input {input}")));
                }
                Ok(Shape::new(
                    input.channels,
                    (input.height - ph) / sh + 1,
                    (input.width - pw) / sw + 1,
                ))
            }
            LayerKind::FullyConnected => {
                if self.out_channels == 0 {
                    return Err(bad("zero outputs".into()));
                }
                Ok(Shape::new(self.out_channels, 1, 1))
            }
            LayerKind::Relu | LayerKind::Softmax => Ok(input),
        }
    }

    fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.0.max(1) * self.kernel.1.max(1)
    }

    fn weight_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv2d | LayerKind::Conv1d => {
                self.out_channels * self.in_channels * self.kernel.0 * self.kernel.1
            }
            LayerKind::FullyConnected => self.out_channels * self.in_channels,
            _ => 0,
        }
    }

    fn bias_count(&self) -> usize {
        if self.kind.has_params() {
            self.out_channels
        } else {
            0
        }
    }
}

/// Learnable tensors of one layer; empty for parameter-free layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Layer stack ending in a softmax over `classes` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams>,
    input: Shape,
    /// Output shape of every layer.
    shapes: Vec<Shape>,
}

/// Activations and routing recorded by a forward pass, for backprop.
pub(crate) struct Trace {
    /// `acts[0]` is the input, `acts[i + 1]` the output of layer `i`.
    pub acts: Vec<Vec<f64>>,
    pub argmax: Vec<Vec<u32>>,
}

impl Trace {
    /// Logits fed to the final softmax.
    pub fn logits(&self) -> &[f64] {
        &self.acts[self.acts.len() - 2]
    }

    pub fn probabilities(&self) -> &[f64] {
        self.acts.last().unwrap()
    }

    /// ReLU masks and pooling choices, which fix the piecewise-linear region
    /// the network is evaluated in.
    pub fn routing(&self, model: &CnnModel) -> Vec<u64> {
        let mut sig = Vec::new();
        for (i, spec) in model.layers.iter().enumerate() {
            match spec.kind {
                LayerKind::Relu => {
                    let act = &self.acts[i];
                    sig.extend(act.chunks(64).map(|chunk| {
                        chunk
                            .iter()
                            .enumerate()
                            .fold(0u64, |m, (b, &v)| m | (((v > 0.0) as u64) << b))
                    }));
                }
                LayerKind::MaxPool => sig.extend(self.argmax[i].iter().map(|&a| a as u64)),
                _ => {}
            }
        }
        sig
    }
}

/// Per-layer gradients, laid out like [`LayerParams`].
pub(crate) type Gradients = Vec<LayerParams>;

impl CnnModel {
    /// Assembles a model, checking that shapes chain from `input` to a final
    /// softmax and that layer names are unique. Weights start at zero.
    pub fn new(input: Shape, mut layers: Vec<LayerSpec>) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::invalid("model input must be non-empty"));
        }
        match layers.last() {
            Some(l) if l.kind == LayerKind::Softmax => {}
            _ => return Err(Error::invalid("model must end with a softmax layer")),
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| l.kind == LayerKind::Softmax)
        {
            return Err(Error::invalid("softmax may only be the final layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if layers[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::invalid(format!("duplicate layer name `{}`", l.name)));
            }
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut current = input;
        for l in layers.iter_mut() {
            l.in_channels = match l.kind {
                LayerKind::FullyConnected => current.len(),
                _ => current.channels,
            };
            current = l.output_shape(current)?;
            shapes.push(current);
        }
        let params = layers
            .iter()
            .map(|l| LayerParams {
                weights: vec![0.0; l.weight_count()],
                bias: vec![0.0; l.bias_count()],
            })
            .collect();
        Ok(Self {
            layers,
            params,
            input,
            shapes,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    /// Output shape of each layer, in order.
    pub fn layer_shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn classes(&self) -> usize {
        self.shapes.last().unwrap().len()
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_string()))
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }

    /// Sum of squared weights (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.params
            .iter()
            .flat_map(|p| p.weights.iter())
            .map(|w| w * w)
            .sum()
    }

    /// He-uniform weights `U(±√(6 / fan_in))`, zero biases.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.init_weights_with(&mut rng);
    }

    pub(crate) fn init_weights_with(&mut self, rng: &mut ChaCha8Rng) {
        for (spec, p) in self.layers.iter().zip(self.params.iter_mut()) {
            if !spec.kind.has_params() {
                continue;
            }
            let limit = (6.0 / spec.fan_in() as f64).sqrt();
            for w in p.weights.iter_mut() {
                *w = rng.random_range(-limit..limit);
            }
            p.bias.fill(0.0);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.input {
            return Err(Error::dims(format!(
                "model expects {} input, got {}",
                self.input,
                x.shape()
            )));
        }
        Ok(())
    }

    /// Forward pass through layers `0..=last`, keeping every activation.
    pub(crate) fn trace(&self, x: &Tensor, last: usize) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = Vec::with_capacity(last + 2);
        let mut argmax = vec![Vec::new(); self.layers.len()];
        acts.push(x.as_slice().to_vec());
        let mut in_shape = self.input;
        for i in 0..=last {
            let spec = &self.layers[i];
            let out_shape = self.shapes[i];
            let input = &acts[i];
            let mut out = vec![0.0; out_shape.len()];
            let p = &self.params[i];
            match spec.kind {
                LayerKind::Conv2d | LayerKind::Conv1d => layers::conv_forward(
                    input,
                    in_shape,
                    &p.weights,
                    &p.bias,
                    spec.kernel,
                    out_shape,
                    &mut out,
                ),
                LayerKind::MaxPool => {
                    let mut arg = vec![0u32; out_shape.len()];
                    layers::pool_forward(
                        input,
                        in_shape,
                        spec.kernel,
                        spec.stride,
                        out_shape,
                        &mut out,
                        &mut arg,
                    );
                    argmax[i] = arg;
                }
                LayerKind::FullyConnected => {
                    layers::fc_forward(input, &p.weights, &p.bias, &mut out)
                }
                LayerKind::Relu => {
                    for (o, &v) in out.iter_mut().zip(input.iter()) {
                        *o = v.max(0.0);
                    }
                }
                LayerKind::Softmax => layers::softmax(input, &mut out),
            }
            acts.push(out);
            in_shape = out_shape;
        }
        Ok(Trace { acts, argmax })
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut t = self.trace(x, self.layers.len() - 1)?;
        Ok(t.acts.pop().unwrap())
    }

    pub fn predict(&self, x: &Tensor) -> Result<usize> {
        let p = self.forward(x)?;
        Ok(argmax(&p))
    }

    /// Cross-entropy loss of one labelled sample and its parameter
    /// gradients, accumulated into `grads`.
    pub(crate) fn backprop(
        &self,
        x: &Tensor,
        label: usize,
        grads: &mut Gradients,
    ) -> Result<(f64, Trace)> {
        let classes = self.classes();
        if label >= classes {
            return Err(Error::invalid(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        let n = self.layers.len();
        let trace = self.trace(x, n - 1)?;
        let loss = layers::cross_entropy(trace.logits(), label);

        // softmax + cross-entropy: gradient w.r.t. logits is p − onehot
        let mut grad: Vec<f64> = trace.probabilities().to_vec();
        grad[label] -= 1.0;

        for i in (0..n - 1).rev() {
            let spec = &self.layers[i];
            let input = &trace.acts[i];
            let in_shape = if i == 0 {
                self.input
            } else {
                self.shapes[i - 1]
            };
            let need_input_grad = i > 0;
            let mut grad_in = vec![0.0; if need_input_grad { in_shape.len() } else { 0 }];
            match spec.kind {
                LayerKind::Conv2d | LayerKind::Conv1d => {
                    let g = &mut grads[i];
                    layers::conv_backward(
                        input,
                        in_shape,
                        &self.params[i].weights,
                        spec.kernel,
                        self.shapes[i],
                        &grad,
                        &mut g.weights,
                        &mut g.bias,
                        need_input_grad.then_some(grad_in.as_mut_slice()),
                    );
                }
                LayerKind::FullyConnected => {
                    let g = &mut grads[i];
                    layers::fc_backward(
                        input,
                        &self.params[i].weights,
                        &grad,
                        &mut g.weights,
                        &mut g.bias,
                        need_input_grad.then_some(grad_in.as_mut_slice()),
                    );
                }
                LayerKind::MaxPool => {
                    if need_input_grad {
                        layers::pool_backward(&grad, &trace.argmax[i], &mut grad_in);
                    }
                }
                LayerKind::Relu => {
                    if need_input_grad {
                        for ((gi, &g), &a) in grad_in.iter_mut().zip(&grad).zip(&trace.acts[i + 1])
                        {
                            *gi = if a > 0.0 { g } else { 0.0 };
                        }
                    }
                }
                LayerKind::Softmax => unreachable!("softmax is only the final layer"),
            }
            grad = grad_in;
        }
        Ok((loss, trace))
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        self.params
            .iter()
            .map(|p| LayerParams {
                weights: vec![0.0; p.weights.len()],
                bias: vec![0.0; p.bias.len()],
            })
            .collect()
    }

    /// Output of `layer` for one input. When `layer` is directly followed by
    /// a ReLU the activated values are returned.
    pub fn tap(&self, layer: &str, x: &Tensor) -> Result<Vec<f64>> {
        let last = self.tap_index(layer)?;
        let mut t = self.trace(x, last)?;
        Ok(t.acts.pop().unwrap())
    }

    fn tap_index(&self, layer: &str) -> Result<usize> {
        let idx = self.layer_index(layer)?;
        Ok(match self.layers.get(idx + 1) {
            Some(next)
                if next.kind == LayerKind::Relu && self.layers[idx].kind != LayerKind::Relu =>
            {
                idx + 1
            }
            _ => idx,
        })
    }

    /// Width of the feature vector returned by [`CnnModel::tap`].
    pub fn tap_width(&self, layer: &str) -> Result<usize> {
        Ok(self.shapes[self.tap_index(layer)?].len())
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Column-per-sample features read from one layer of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub data: Matrix,
    pub source_layer: String,
}

impl FeatureMatrix {
    pub fn new(data: Matrix, source_layer: impl Into<String>) -> Self {
        Self {
            data,
            source_layer: source_layer.into(),
        }
    }

    /// A 0×n block, the identity of row concatenation.
    pub fn empty(samples: usize) -> Self {
        Self::new(Matrix::zeros(0, samples), "")
    }

    pub fn dim(&self) -> usize {
        self.data.rows()
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }
}

/// Taps `layer` for every image in `batch`; one column per input.
pub fn extract_features(model: &CnnModel, layer: &str, batch: &[Tensor]) -> Result<FeatureMatrix> {
    let width = model.tap_width(layer)?;
    let mut data = Matrix::zeros(width, batch.len());
    for (j, x) in batch.iter().enumerate() {
        let f = model.tap(layer, x)?;
        data.set_column(j, &f);
    }
    Ok(FeatureMatrix::new(data, layer))
}

/// 2-D extractor with explicit filter counts:
/// conv(f₁@5×5) → relu → pool(2×2/2) → conv(f₂@5×5) → relu → pool(2×2/2)
/// → fc1(hidden) → relu → fc2(classes) → softmax.
pub fn build_signal_cnn_with(
    input: Shape,
    filters: (usize, usize),
    hidden_fc: usize,
    classes: usize,
) -> Result<CnnModel> {
    if classes < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    CnnModel::new(
        input,
        vec![
            LayerSpec::conv2d("conv1", filters.0, (5, 5)),
            LayerSpec::relu("relu1"),
            LayerSpec::max_pool("pool1", (2, 2), (2, 2)),
            LayerSpec::conv2d("conv2", filters.1, (5, 5)),
            LayerSpec::relu("relu2"),
            LayerSpec::max_pool("pool2", (2, 2), (2, 2)),
            LayerSpec::fully_connected("fc1", hidden_fc),
            LayerSpec::relu("relu3"),
            LayerSpec::fully_connected("fc2", classes),
            LayerSpec::softmax("softmax"),
        ],
    )
}

/// Signal-image extractor with 50 and 100 filters of 5×5.
pub fn build_signal_cnn(input: Shape, hidden_fc: usize, classes: usize) -> Result<CnnModel> {
    build_signal_cnn_with(input, (50, 100), hidden_fc, classes)
}

/// Temporal baseline with explicit filter counts:
/// conv1d(f₁@5) → relu → pool(2/2) → conv1d(f₂@5) → relu → pool(2/2)
/// → fc(classes) → softmax.
pub fn build_1d_cnn_with(
    timesteps: usize,
    channels: usize,
    filters: (usize, usize),
    classes: usize,
) -> Result<CnnModel> {
    if classes < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    CnnModel::new(
        Shape::new(channels, timesteps, 1),
        vec![
            LayerSpec::conv1d("conv1", filters.0, 5),
            LayerSpec::relu("relu1"),
            LayerSpec::max_pool("pool1", (2, 1), (2, 1)),
            LayerSpec::conv1d("conv2", filters.1, 5),
            LayerSpec::relu("relu2"),
            LayerSpec::max_pool("pool2", (2, 1), (2, 1)),
            LayerSpec::fully_connected("fc", classes),
            LayerSpec::softmax("softmax"),
        ],
    )
}

/// 1-D baseline with 50 and 100 filters of length 5.
pub fn build_1d_cnn(timesteps: usize, channels: usize, classes: usize) -> Result<CnnModel> {
    build_1d_cnn_with(timesteps, channels, (50, 100), classes)
}

//! Stacked LSTM sequence classifier, written out by hand: forward pass,
//! backpropagation through time, softmax cross-entropy head.
//!
//! Every gate acts on the concatenation `[h_{t-1}, x_t]` (hidden state
//! first), so gate weight matrices are `hidden x (hidden + input)`.

mod bptt;
mod cell;
mod matrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use bptt::backward;
pub use cell::{forward, lstm_cell_step, ForwardTrace, GateRecord, LstmState, StepRecord};
pub use matrix::Matrix;

use crate::error::NnError;

/// Default hidden width.
pub const DEFAULT_HIDDEN: usize = 128;
/// Default LSTM stack depth.
pub const DEFAULT_LAYERS: usize = 2;

/// Weights and biases for one LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
}

impl LstmLayerParams {
    pub fn zeros(input: usize, hidden: usize) -> LstmLayerParams {
        let w = Matrix::zeros(hidden, hidden + input);
        LstmLayerParams {
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: vec![0.0; hidden],
            b_i: vec![0.0; hidden],
            b_c: vec![0.0; hidden],
            b_o: vec![0.0; hidden],
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_f.rows()
    }

    pub fn input(&self) -> usize {
        self.w_f.cols() - self.w_f.rows()
    }

    fn validate(&self) -> Result<(), NnError> {
        let shape = self.w_f.shape();
        let h = shape.0;
        if shape.1 <= h {
            return Err(NnError::DimensionMismatch(format!(
                "gate matrix {}x{} leaves no input columns",
                shape.0, shape.1
            )));
        }
        for w in [&self.w_i, &self.w_c, &self.w_o] {
            if w.shape() != shape {
                return Err(NnError::DimensionMismatch(format!(
                    "gate matrices disagree: {shape:?} vs {:?}",
                    w.shape()
                )));
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_c, &self.b_o] {
            if b.len() != h {
                return Err(NnError::DimensionMismatch(format!(
                    "bias length {} for hidden size {h}",
                    b.len()
                )));
            }
        }
        Ok(())
    }
}

/// Full classifier: LSTM stack plus affine readout of the last hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    layers: Vec<LstmLayerParams>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Borrowed view of one named parameter tensor.
#[derive(Debug)]
pub struct Tensor<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct TensorMut<'a> {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

impl ModelParams {
    pub fn new(
        layers: Vec<LstmLayerParams>,
        w_out: Matrix,
        b_out: Vec<f64>,
    ) -> Result<ModelParams, NnError> {
        if layers.is_empty() {
            return Err(NnError::DimensionMismatch("model needs at least one layer".into()));
        }
        for (k, layer) in layers.iter().enumerate() {
            layer.validate()?;
            if k > 0 && layer.input() != layers[k - 1].hidden() {
                return Err(NnError::DimensionMismatch(format!(
                    "layer {k} expects input {} but layer {} has hidden {}",
                    layer.input(),
                    k - 1,
                    layers[k - 1].hidden()
                )));
            }
        }
        let top = layers[layers.len() - 1].hidden();
        if w_out.cols() != top || w_out.rows() != b_out.len() {
            return Err(NnError::DimensionMismatch(format!(
                "head {}x{} with bias {} on hidden {top}",
                w_out.rows(),
                w_out.cols(),
                b_out.len()
            )));
        }
        if b_out.len() < 2 {
            return Err(NnError::DimensionMismatch(format!(
                "need at least 2 classes, got {}",
                b_out.len()
            )));
        }
        let model = ModelParams {
            layers,
            w_out,
            b_out,
        };
        if model.tensors().iter().any(|t| t.data.iter().any(|v| !v.is_finite())) {
            return Err(NnError::DimensionMismatch("non-finite parameter".into()));
        }
        Ok(model)
    }

    /// All-zero model of the given shape.
    pub fn zeros(
        num_classes: usize,
        input: usize,
        hidden: usize,
        num_layers: usize,
    ) -> Result<ModelParams, NnError> {
        check_dims(num_classes, input, hidden, num_layers)?;
        let layers = (0..num_layers)
            .map(|k| LstmLayerParams::zeros(if k == 0 { input } else { hidden }, hidden))
            .collect();
        ModelParams::new(layers, Matrix::zeros(num_classes, hidden), vec![0.0; num_classes])
    }

    pub fn layers(&self) -> &[LstmLayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LstmLayerParams] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].hidden()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        self.b_out.len()
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.fill(0.0);
        }
        z
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    /// Named tensors in file order: per layer `W_f, b_f, W_i, b_i, W_C, b_C,
    /// W_o, b_o` suffixed with `.k`, then `W_out`, `b_out`. Biases are
    /// column vectors.
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        let mut out = Vec::with_capacity(self.layers.len() * 8 + 2);
        for (k, l) in self.layers.iter().enumerate() {
            for (gate, w, b) in [
                ("f", &l.w_f, &l.b_f),
                ("i", &l.w_i, &l.b_i),
                ("C", &l.w_c, &l.b_c),
                ("o", &l.w_o, &l.b_o),
            ] {
                out.push(Tensor {
                    name: format!("W_{gate}.{k}"),
                    rows: w.rows(),
                    cols: w.cols(),
                    data: w.as_slice(),
                });
                out.push(Tensor {
                    name: format!("b_{gate}.{k}"),
                    rows: b.len(),
                    cols: 1,
                    data: b,
                });
            }
        }
        out.push(Tensor {
            name: "W_out".into(),
            rows: self.w_out.rows(),
            cols: self.w_out.cols(),
            data: self.w_out.as_slice(),
        });
        out.push(Tensor {
            name: "b_out".into(),
            rows: self.b_out.len(),
            cols: 1,
            data: &self.b_out,
        });
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        let mut out = Vec::with_capacity(self.layers.len() * 8 + 2);
        for (k, l) in self.layers.iter_mut().enumerate() {
            let LstmLayerParams {
                w_f,
                w_i,
                w_c,
                w_o,
                b_f,
                b_i,
                b_c,
                b_o,
            } = l;
            for (gate, w, b) in [("f", w_f, b_f), ("i", w_i, b_i), ("C", w_c, b_c), ("o", w_o, b_o)] {
                let (rows, cols) = w.shape();
                out.push(TensorMut {
                    name: format!("W_{gate}.{k}"),
                    rows,
                    cols,
                    data: w.as_mut_slice(),
                });
                out.push(TensorMut {
                    name: format!("b_{gate}.{k}"),
                    rows: b.len(),
                    cols: 1,
                    data: b.as_mut_slice(),
                });
            }
        }
        let (rows, cols) = self.w_out.shape();
        out.push(TensorMut {
            name: "W_out".into(),
            rows,
            cols,
            data: self.w_out.as_mut_slice(),
        });
        out.push(TensorMut {
            name: "b_out".into(),
            rows: self.b_out.len(),
            cols: 1,
            data: self.b_out.as_mut_slice(),
        });
        out
    }

    /// True when both models have identical tensor names and shapes.
    pub fn same_shape(&self, other: &ModelParams) -> bool {
        let a = self.tensors();
        let b = other.tensors();
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.name == y.name && x.rows == y.rows && x.cols == y.cols)
    }
}

fn check_dims(
    num_classes: usize,
    input: usize,
    hidden: usize,
    num_layers: usize,
) -> Result<(), NnError> {
    if input == 0 || hidden == 0 || num_layers == 0 {
        return Err(NnError::InvalidDimension(format!(
            "input={input} hidden={hidden} layers={num_layers}; all must be >= 1"
        )));
    }
    if num_classes < 2 {
        return Err(NnError::InvalidDimension(format!(
            "classes={num_classes}; need at least 2"
        )));
    }
    Ok(())
}

/// Random initialization: weights uniform in `+-1/sqrt(fan_in)`, biases zero
/// except the forget gate bias, which starts at 1.
pub fn init_params(
    num_classes: usize,
    input_size: usize,
    hidden_size: usize,
    num_layers: usize,
    seed: u64,
) -> Result<ModelParams, NnError> {
    let mut model = ModelParams::zeros(num_classes, input_size, hidden_size, num_layers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |m: &mut Matrix, fan_in: usize| {
        let s = 1.0 / (fan_in as f64).sqrt();
        for v in m.as_mut_slice() {
            *v = rng.random_range(-s..s);
        }
    };
    for layer in model.layers.iter_mut() {
        let fan_in = layer.w_f.cols();
        fill(&mut layer.w_f, fan_in);
        fill(&mut layer.w_i, fan_in);
        fill(&mut layer.w_c, fan_in);
        fill(&mut layer.w_o, fan_in);
        layer.b_f.fill(1.0);
    }
    fill(&mut model.w_out, hidden_size);
    Ok(model)
}

/// Returns `(loss, dloss/dlogits)` for one labelled example.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NnError> {
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    for p in probs.iter_mut() {
        *p /= sum;
    }
    probs[label] -= 1.0;
    Ok((loss, probs))
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    best
}

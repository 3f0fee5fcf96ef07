use super::matrix::dot;
use super::{LstmLayerParams, ModelParams};
use crate::error::NnError;
use crate::skeleton::FeatureMatrix;

/// Hidden and cell state carried between timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> LstmState {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Gate activations of one cell step.
#[derive(Debug, Clone, PartialEq)]
pub struct GateRecord {
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
}

/// Everything one layer at one timestep needs for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// `[h_{t-1}, x_t]`.
    pub concat: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: GateRecord,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// Per-timestep, per-layer records of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `steps[t][k]` is layer `k` at time `t`.
    pub steps: Vec<Vec<StepRecord>>,
    pub(crate) shape: (usize, usize, usize, usize),
}

impl ForwardTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Top-layer hidden state at the last timestep.
    pub fn final_hidden(&self) -> &[f64] {
        &self.steps[self.steps.len() - 1]
            .last()
            .expect("at least one layer")
            .h
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn step_record(
    params: &LstmLayerParams,
    h_prev: &[f64],
    c_prev: &[f64],
    x: &[f64],
) -> StepRecord {
    let hidden = params.hidden();
    let mut concat = Vec::with_capacity(hidden + x.len());
    concat.extend_from_slice(h_prev);
    concat.extend_from_slice(x);

    let gate = |w: &super::Matrix, b: &[f64], act: fn(f64) -> f64| -> Vec<f64> {
        (0..hidden).map(|r| act(dot(w.row(r), &concat) + b[r])).collect()
    };
    let forget = gate(&params.w_f, &params.b_f, sigmoid);
    let input = gate(&params.w_i, &params.b_i, sigmoid);
    let candidate = gate(&params.w_c, &params.b_c, f64::tanh);
    let output = gate(&params.w_o, &params.b_o, sigmoid);

    let c: Vec<f64> = (0..hidden)
        .map(|j| forget[j] * c_prev[j] + input[j] * candidate[j])
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    StepRecord {
        concat,
        c_prev: c_prev.to_vec(),
        gates: GateRecord {
            forget,
            input,
            candidate,
            output,
        },
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step:
///
/// ```text
/// f  = sigmoid(W_f [h, x] + b_f)      i = sigmoid(W_i [h, x] + b_i)
/// c~ = tanh(W_C [h, x] + b_C)         o = sigmoid(W_o [h, x] + b_o)
/// c' = f * c + i * c~                 h' = o * tanh(c')
/// ```
pub fn lstm_cell_step(
    params: &LstmLayerParams,
    state: &LstmState,
    x: &[f64],
) -> Result<(LstmState, GateRecord), NnError> {
    let hidden = params.hidden();
    if state.h.len() != hidden || state.c.len() != hidden {
        return Err(NnError::DimensionMismatch(format!(
            "state sizes h={} c={} for hidden {hidden}",
            state.h.len(),
            state.c.len()
        )));
    }
    if x.len() != params.input() {
        return Err(NnError::DimensionMismatch(format!(
            "input length {} for layer input {}",
            x.len(),
            params.input()
        )));
    }
    let rec = step_record(params, &state.h, &state.c, x);
    Ok((LstmState { h: rec.h, c: rec.c }, rec.gates))
}

/// Runs the stack over all rows of `features` from zero initial state and
/// reads out logits from the top layer's last hidden state.
pub fn forward(
    model: &ModelParams,
    features: &FeatureMatrix,
) -> Result<(Vec<f64>, ForwardTrace), NnError> {
    if features.cols() != model.input_size() {
        return Err(NnError::DimensionMismatch(format!(
            "feature width {} for model input {}",
            features.cols(),
            model.input_size()
        )));
    }
    let hidden = model.hidden_size();
    let zeros = vec![0.0; hidden];
    let mut steps: Vec<Vec<StepRecord>> = Vec::with_capacity(features.rows());
    for t in 0..features.rows() {
        let mut layer_recs: Vec<StepRecord> = Vec::with_capacity(model.num_layers());
        for (k, layer) in model.layers().iter().enumerate() {
            let (h_prev, c_prev) = match steps.last() {
                Some(prev) => (prev[k].h.as_slice(), prev[k].c.as_slice()),
                None => (zeros.as_slice(), zeros.as_slice()),
            };
            let x = if k == 0 {
                features.row(t)
            } else {
                layer_recs[k - 1].h.as_slice()
            };
            let rec = step_record(layer, h_prev, c_prev, x);
            layer_recs.push(rec);
        }
        steps.push(layer_recs);
    }
    let trace = ForwardTrace {
        steps,
        shape: (
            model.num_layers(),
            model.input_size(),
            hidden,
            model.num_classes(),
        ),
    };
    let mut logits = vec![0.0; model.num_classes()];
    model
        .w_out
        .affine_into(trace.final_hidden(), &model.b_out, &mut logits);
    Ok((logits, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_params, Matrix};

    #[test]
    fn zero_weights_give_half_gates() {
        let p = LstmLayerParams::zeros(3, 2);
        let (s, g) = lstm_cell_step(&p, &LstmState::zeros(2), &[0.4, -1.0, 7.0]).unwrap();
        assert!(g.forget.iter().chain(&g.input).chain(&g.output).all(|&v| v == 0.5));
        assert!(g.candidate.iter().all(|&v| v == 0.0));
        assert_eq!(s, LstmState::zeros(2));
    }

    #[test]
    fn scalar_cell_matches_hand_values() {
        // sigma(0.5), tanh(0.5), c' = sigma(0.5) tanh(0.5), h' = sigma(0.5) tanh(c')
        let mut p = LstmLayerParams::zeros(1, 1);
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            w.as_mut_slice().fill(0.5);
        }
        let (s, g) = lstm_cell_step(&p, &LstmState::zeros(1), &[1.0]).unwrap();
        assert!((g.forget[0] - 0.6224593312018546).abs() < 1e-15);
        assert!((g.candidate[0] - 0.46211715726000974).abs() < 1e-15);
        assert!((s.c[0] - 0.28764913664496794).abs() < 1e-15);
        assert!((s.h[0] - 0.17426971865610508).abs() < 1e-15);
    }

    #[test]
    fn saturated_gates_carry_cell_state() {
        let mut p = init_params(2, 3, 4, 1, 3).unwrap().layers()[0].clone();
        p.b_f.fill(800.0);
        p.b_i.fill(-800.0);
        let mut state = LstmState {
            h: vec![0.0; 4],
            c: vec![0.3, -0.7, 1.5, 0.0],
        };
        let c0 = state.c.clone();
        for t in 0..50 {
            let x = [t as f64 * 0.1, -0.2, 0.5];
            state = lstm_cell_step(&p, &state, &x).unwrap().0;
        }
        assert_eq!(state.c, c0);
    }

    #[test]
    fn rejects_bad_dimensions() {
        let p = LstmLayerParams::zeros(3, 2);
        assert!(lstm_cell_step(&p, &LstmState::zeros(2), &[0.0; 2]).is_err());
        assert!(lstm_cell_step(&p, &LstmState::zeros(3), &[0.0; 3]).is_err());
        let m = init_params(2, 3, 2, 1, 0).unwrap();
        let f = FeatureMatrix::from_rows(2, 4, vec![0.0; 8]);
        assert!(matches!(forward(&m, &f), Err(NnError::DimensionMismatch(_))));
    }

    #[test]
    fn zero_model_outputs_bias() {
        let mut m = crate::nn::ModelParams::zeros(3, 4, 5, 2).unwrap();
        let f = FeatureMatrix::from_rows(3, 4, (0..12).map(|v| v as f64).collect());
        let (logits, trace) = forward(&m, &f).unwrap();
        assert_eq!(logits, vec![0.0; 3]);
        assert_eq!(trace.len(), 3);
        m.b_out = vec![1.0, -2.0, 0.5];
        assert_eq!(forward(&m, &f).unwrap().0, m.b_out);
    }

    #[test]
    fn forward_equals_iterated_cell_steps() {
        let m = init_params(3, 3, 4, 2, 11).unwrap();
        let data: Vec<f64> = (0..15).map(|v| ((v * 7) % 5) as f64 * 0.3 - 0.6).collect();
        let f = FeatureMatrix::from_rows(5, 3, data);
        let (logits, trace) = forward(&m, &f).unwrap();

        let mut states: Vec<LstmState> = (0..2).map(|_| LstmState::zeros(4)).collect();
        for t in 0..5 {
            let mut x = f.row(t).to_vec();
            for (k, layer) in m.layers().iter().enumerate() {
                let (s, g) = lstm_cell_step(layer, &states[k], &x).unwrap();
                assert_eq!(g, trace.steps[t][k].gates);
                x = s.h.clone();
                states[k] = s;
            }
        }
        let mut want = vec![0.0; 3];
        m.w_out.affine_into(&states[1].h, &m.b_out, &mut want);
        assert_eq!(logits, want);
        let _ = Matrix::zeros(1, 1);
    }

    #[test]
    fn gate_ranges() {
        let m = init_params(2, 3, 6, 2, 5).unwrap();
        let data: Vec<f64> = (0..60).map(|v| (v as f64 * 1.7).sin() * 5.0).collect();
        let f = FeatureMatrix::from_rows(20, 3, data);
        let (_, trace) = forward(&m, &f).unwrap();
        for rec in trace.steps.iter().flatten() {
            let g = &rec.gates;
            for v in g.forget.iter().chain(&g.input).chain(&g.output) {
                assert!(*v > 0.0 && *v < 1.0);
            }
            assert!(g.candidate.iter().all(|v| *v > -1.0 && *v < 1.0));
        }
    }
}

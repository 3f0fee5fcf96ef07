use super::cell::ForwardTrace;
use super::ModelParams;
use crate::error::NnError;

/// Backpropagation through time. Returns gradients of the loss with respect
/// to every parameter, shaped like `model`, given `dlogits = dloss/dlogits`.
pub fn backward(
    model: &ModelParams,
    trace: &ForwardTrace,
    dlogits: &[f64],
) -> Result<ModelParams, NnError> {
    let shape = (
        model.num_layers(),
        model.input_size(),
        model.hidden_size(),
        model.num_classes(),
    );
    if trace.shape != shape || trace.is_empty() {
        return Err(NnError::TraceMismatch(format!(
            "trace shape {:?} (len {}) vs model {shape:?}",
            trace.shape,
            trace.len()
        )));
    }
    if dlogits.len() != model.num_classes() {
        return Err(NnError::DimensionMismatch(format!(
            "dlogits length {} for {} classes",
            dlogits.len(),
            model.num_classes()
        )));
    }

    let hidden = model.hidden_size();
    let steps = trace.len();
    let num_layers = model.num_layers();
    let mut grads = model.zeros_like();

    grads.w_out.add_outer(dlogits, trace.final_hidden());
    grads.b_out.copy_from_slice(dlogits);

    // Gradient arriving at each timestep's hidden output from above. Only the
    // last step of the top layer feeds the head.
    let mut dh_above = vec![vec![0.0; hidden]; steps];
    model.w_out.add_transpose_mul(dlogits, &mut dh_above[steps - 1]);

    let mut dz_f = vec![0.0; hidden];
    let mut dz_i = vec![0.0; hidden];
    let mut dz_c = vec![0.0; hidden];
    let mut dz_o = vec![0.0; hidden];

    for k in (0..num_layers).rev() {
        let layer = &model.layers()[k];
        let input = layer.input();
        let g = &mut grads.layers_mut()[k];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dx_all = vec![vec![0.0; input]; if k > 0 { steps } else { 0 }];
        let mut dconcat = vec![0.0; hidden + input];

        for t in (0..steps).rev() {
            let rec = &trace.steps[t][k];
            let gates = &rec.gates;
            for j in 0..hidden {
                let dh = dh_above[t][j] + dh_next[j];
                let o = gates.output[j];
                let tc = rec.tanh_c[j];
                let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
                let f = gates.forget[j];
                let i = gates.input[j];
                let cb = gates.candidate[j];
                dz_o[j] = dh * tc * o * (1.0 - o);
                dz_f[j] = dc * rec.c_prev[j] * f * (1.0 - f);
                dz_i[j] = dc * cb * i * (1.0 - i);
                dz_c[j] = dc * i * (1.0 - cb * cb);
                dc_next[j] = dc * f;
            }

            g.w_f.add_outer(&dz_f, &rec.concat);
            g.w_i.add_outer(&dz_i, &rec.concat);
            g.w_c.add_outer(&dz_c, &rec.concat);
            g.w_o.add_outer(&dz_o, &rec.concat);
            for j in 0..hidden {
                g.b_f[j] += dz_f[j];
                g.b_i[j] += dz_i[j];
                g.b_c[j] += dz_c[j];
                g.b_o[j] += dz_o[j];
            }

            dconcat.fill(0.0);
            layer.w_f.add_transpose_mul(&dz_f, &mut dconcat);
            layer.w_i.add_transpose_mul(&dz_i, &mut dconcat);
            layer.w_c.add_transpose_mul(&dz_c, &mut dconcat);
            layer.w_o.add_transpose_mul(&dz_o, &mut dconcat);
            dh_next.copy_from_slice(&dconcat[..hidden]);
            if k > 0 {
                dx_all[t].copy_from_slice(&dconcat[hidden..]);
            }
        }
        if k > 0 {
            dh_above = dx_all;
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{forward, init_params, softmax_cross_entropy};
    use crate::skeleton::FeatureMatrix;

    fn sample(t: usize, width: usize, salt: f64) -> FeatureMatrix {
        let data = (0..t * width)
            .map(|v| ((v as f64 + salt) * 0.77).sin())
            .collect();
        FeatureMatrix::from_rows(t, width, data)
    }

    fn loss_of(model: &ModelParams, x: &FeatureMatrix, label: usize) -> f64 {
        let (logits, _) = forward(model, x).unwrap();
        softmax_cross_entropy(&logits, label).unwrap().0
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = init_params(3, 3, 4, 2, 1).unwrap();
        let (_, trace) = forward(&m, &sample(5, 3, 0.0)).unwrap();
        let g = backward(&m, &trace, &[0.0; 3]).unwrap();
        assert_eq!(g, m.zeros_like());
    }

    #[test]
    fn gradients_are_deterministic() {
        let m = init_params(3, 3, 4, 2, 2).unwrap();
        let (logits, trace) = forward(&m, &sample(5, 3, 1.0)).unwrap();
        let (_, d) = softmax_cross_entropy(&logits, 1).unwrap();
        let a = backward(&m, &trace, &d).unwrap();
        let b = backward(&m, &trace, &d).unwrap();
        for (x, y) in a.tensors().iter().zip(b.tensors().iter()) {
            assert!(x.data.iter().zip(y.data).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn rejects_foreign_trace() {
        let m = init_params(3, 3, 4, 2, 2).unwrap();
        let other = init_params(3, 3, 5, 2, 2).unwrap();
        let (_, trace) = forward(&other, &sample(2, 3, 0.0)).unwrap();
        assert!(matches!(
            backward(&m, &trace, &[0.0; 3]),
            Err(NnError::TraceMismatch(_))
        ));
    }

    #[test]
    fn matches_central_differences() {
        let step = 1e-5;
        for seed in 0..3 {
            let mut m = init_params(3, 3, 4, 2, seed).unwrap();
            let x = sample(5, 3, seed as f64);
            let label = seed as usize % 3;
            let (logits, trace) = forward(&m, &x).unwrap();
            let (_, d) = softmax_cross_entropy(&logits, label).unwrap();
            let g = backward(&m, &trace, &d).unwrap();
            let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.data.to_vec()).collect();

            let n = analytic.len();
            for ti in 0..n {
                for e in 0..analytic[ti].len() {
                    let orig = m.tensors()[ti].data[e];
                    m.tensors_mut()[ti].data[e] = orig + step;
                    let up = loss_of(&m, &x, label);
                    m.tensors_mut()[ti].data[e] = orig - step;
                    let down = loss_of(&m, &x, label);
                    m.tensors_mut()[ti].data[e] = orig;
                    let numeric = (up - down) / (2.0 * step);
                    let a = analytic[ti][e];
                    assert!((a - numeric).abs() < 1e-8, "tensor {ti} elem {e}: {a} vs {numeric}");
                }
            }
        }
    }
}

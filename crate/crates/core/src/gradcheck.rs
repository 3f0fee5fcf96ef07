//! Finite-difference verification of the BPTT gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::NnError;
use crate::nn::{self, ForwardTrace, ModelParams};
use crate::skeleton::FeatureMatrix;

/// Pass threshold on the maximum relative error.
pub const MAX_REL_ERR: f64 = 1e-6;
/// Central difference step.
pub const STEP: f64 = 1e-5;
/// Denominator floor for the relative error, so parameters whose true
/// gradient is ~0 are judged on absolute error instead.
pub const REL_ERR_FLOOR: f64 = 1e-4;

/// Problem size used by the check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradCheckConfig {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub steps: usize,
    pub classes: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            input: 3,
            hidden: 4,
            layers: 2,
            steps: 5,
            classes: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter with the largest error, as `name[row,col]`.
    pub worst: String,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < MAX_REL_ERR
    }
}

/// Signature of a gradient routine under test.
pub type BackwardFn = fn(&ModelParams, &ForwardTrace, &[f64]) -> Result<ModelParams, NnError>;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Random model, input sequence and label derived from `seed`.
pub fn problem(
    config: &GradCheckConfig,
    seed: u64,
) -> Result<(ModelParams, FeatureMatrix, usize), NnError> {
    let model = nn::init_params(config.classes, config.input, config.hidden, config.layers, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let data = (0..config.steps * config.input)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let features = FeatureMatrix::from_rows(config.steps, config.input, data);
    let label = rng.random_range(0..config.classes);
    Ok((model, features, label))
}

pub fn run(config: &GradCheckConfig, seed: u64) -> Result<GradCheckReport, NnError> {
    run_with(config, seed, nn::backward)
}

/// Compares `backward_fn` against central differences on every parameter.
pub fn run_with(
    config: &GradCheckConfig,
    seed: u64,
    backward_fn: BackwardFn,
) -> Result<GradCheckReport, NnError> {
    let (mut model, x, label) = problem(config, seed)?;
    let loss = |m: &ModelParams| -> Result<f64, NnError> {
        let (logits, _) = nn::forward(m, &x)?;
        Ok(nn::softmax_cross_entropy(&logits, label)?.0)
    };

    let (logits, trace) = nn::forward(&model, &x)?;
    let (_, dlogits) = nn::softmax_cross_entropy(&logits, label)?;
    let grads = backward_fn(&model, &trace, &dlogits)?;
    if !grads.same_shape(&model) {
        return Err(NnError::ShapeMismatch("gradient shape differs from model".into()));
    }

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: String::new(),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let grad_tensors = grads.tensors();
    for (ti, g) in grad_tensors.iter().enumerate() {
        for e in 0..g.data.len() {
            let orig = model.tensors()[ti].data[e];
            model.tensors_mut()[ti].data[e] = orig + STEP;
            let up = loss(&model)?;
            model.tensors_mut()[ti].data[e] = orig - STEP;
            let down = loss(&model)?;
            model.tensors_mut()[ti].data[e] = orig;

            let numeric = (up - down) / (2.0 * STEP);
            let err = relative_error(g.data[e], numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = err;
                report.worst = format!("{}[{},{}]", g.name, e / g.cols, e % g.cols);
                report.analytic = g.data[e];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}

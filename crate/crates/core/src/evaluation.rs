//! Leave-one-signer-out cross-validation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::EvalError;
use crate::geometry::{self, NormalizationConfig};
use crate::nn::{self, ModelParams};
use crate::par::Exec;
use crate::skeleton::{self, GestureSequence, HandMode, FEATURE_WIDTH};
use crate::training::{self, Sample, TrainConfig};

/// Which hand-mode classes take part in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandFilter {
    Single,
    Double,
    Combined,
}

impl HandFilter {
    pub fn keeps(self, mode: HandMode) -> bool {
        match self {
            HandFilter::Single => mode == HandMode::Single,
            HandFilter::Double => mode == HandMode::Double,
            HandFilter::Combined => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandFilter::Single => "single",
            HandFilter::Double => "double",
            HandFilter::Combined => "combined",
        }
    }
}

/// Model shape and base seed. Each fold initializes with `seed + signer_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub hidden: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: nn::DEFAULT_HIDDEN,
            layers: nn::DEFAULT_LAYERS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub held_out_signer: u32,
    pub accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub folds: Vec<FoldResult>,
    pub mean_accuracy: f64,
    pub hand_mode_filter: HandFilter,
}

/// Accuracy and confusion of one model on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
}

/// Indices into the dataset for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoocvSplit {
    pub held_out_signer: u32,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One split per distinct signer, ordered by signer id.
pub fn split_loocv(dataset: &[GestureSequence]) -> Result<Vec<LoocvSplit>, EvalError> {
    let ids: Vec<u32> = dataset.iter().map(|s| s.signer_id).collect();
    split_signer_ids(&ids)
}

fn split_signer_ids(ids: &[u32]) -> Result<Vec<LoocvSplit>, EvalError> {
    let signers: BTreeSet<u32> = ids.iter().copied().collect();
    if signers.len() < 2 {
        return Err(EvalError::InsufficientSigners(signers.len()));
    }
    Ok(signers
        .into_iter()
        .map(|signer| {
            let (test, train) = (0..ids.len()).partition(|&i| ids[i] == signer);
            LoocvSplit {
                held_out_signer: signer,
                train,
                test,
            }
        })
        .collect())
}

/// Predicts by argmax (ties to the lowest class) and tallies the results.
pub fn evaluate(model: &ModelParams, test: &[Sample]) -> Result<Metrics, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet);
    }
    let k = model.num_classes();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut correct = 0u64;
    for s in test {
        if s.label >= k {
            return Err(nn_label_error(s.label, k));
        }
        let (logits, _) = nn::forward(model, &s.features)?;
        let pred = nn::argmax(&logits);
        confusion[s.label][pred] += 1;
        if pred == s.label {
            correct += 1;
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / test.len() as f64,
        confusion,
    })
}

fn nn_label_error(label: usize, num_classes: usize) -> EvalError {
    EvalError::Nn(crate::error::NnError::LabelOutOfRange { label, num_classes })
}

/// Sequences kept by a hand filter with dense labels in class-id order.
#[derive(Debug, Clone)]
pub struct LabeledSet<'a> {
    pub sequences: Vec<&'a GestureSequence>,
    pub labels: Vec<usize>,
    /// Original class id for each dense label.
    pub class_ids: Vec<u32>,
}

pub fn filter_and_relabel(dataset: &[GestureSequence], filter: HandFilter) -> LabeledSet<'_> {
    let sequences: Vec<&GestureSequence> =
        dataset.iter().filter(|s| filter.keeps(s.hand_mode)).collect();
    let class_ids: Vec<u32> = sequences
        .iter()
        .map(|s| s.class_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels = sequences
        .iter()
        .map(|s| class_ids.binary_search(&s.class_id).expect("class collected"))
        .collect();
    LabeledSet {
        sequences,
        labels,
        class_ids,
    }
}

/// Feature matrices for each sequence, optionally normalized first.
pub fn prepare_samples(
    set: &LabeledSet<'_>,
    normalize: Option<&NormalizationConfig>,
    exec: Exec,
) -> Result<Vec<Sample>, EvalError> {
    let items: Vec<(&GestureSequence, usize)> =
        set.sequences.iter().copied().zip(set.labels.iter().copied()).collect();
    exec.map(&items, |&(seq, label)| {
        let features = match normalize {
            Some(cfg) => skeleton::sequence_to_features(&geometry::normalize_sequence(seq, cfg)?.0),
            None => skeleton::sequence_to_features(seq),
        };
        Ok(Sample { features, label })
    })
    .into_iter()
    .collect()
}

/// Options for [`run_loocv`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoocvOptions {
    pub filter: HandFilter,
    /// `None` feeds raw coordinates to the network.
    pub normalize: Option<NormalizationConfig>,
    pub train: TrainConfig,
    pub model: ModelConfig,
}

pub fn run_loocv(dataset: &[GestureSequence], opts: &LoocvOptions) -> Result<EvalReport, EvalError> {
    run_loocv_with(dataset, opts, Exec::default(), &|_| {})
}

/// Runs every fold under `exec`; `progress` receives one line per finished
/// fold (in completion order). The report is always in signer order.
pub fn run_loocv_with(
    dataset: &[GestureSequence],
    opts: &LoocvOptions,
    exec: Exec,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<EvalReport, EvalError> {
    let set = filter_and_relabel(dataset, opts.filter);
    if set.class_ids.len() < 2 {
        return Err(EvalError::InsufficientClasses(set.class_ids.len()));
    }
    let ids: Vec<u32> = set.sequences.iter().map(|s| s.signer_id).collect();
    let splits = split_signer_ids(&ids)?;
    let samples = prepare_samples(&set, opts.normalize.as_ref(), exec)?;
    let num_classes = set.class_ids.len();

    let results: Vec<Result<FoldResult, EvalError>> = exec.map(&splits, |split| {
        let train_set: Vec<Sample> = split.train.iter().map(|&i| samples[i].clone()).collect();
        let test_set: Vec<Sample> = split.test.iter().map(|&i| samples[i].clone()).collect();
        let fold_seed = u64::from(split.held_out_signer);
        let init = nn::init_params(
            num_classes,
            FEATURE_WIDTH,
            opts.model.hidden,
            opts.model.layers,
            opts.model.seed.wrapping_add(fold_seed),
        )?;
        let config = TrainConfig {
            seed: opts.train.seed.wrapping_add(fold_seed),
            ..opts.train
        };
        let (model, _) = training::train(&train_set, &config, &init)?;
        let m = evaluate(&model, &test_set)?;
        progress(&format!(
            "fold signer={} train={} test={} accuracy={:.4}",
            split.held_out_signer,
            train_set.len(),
            test_set.len(),
            m.accuracy
        ));
        Ok(FoldResult {
            held_out_signer: split.held_out_signer,
            accuracy: m.accuracy,
            confusion: m.confusion,
        })
    });
    let folds = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mean_accuracy = mean(folds.iter().map(|f| f.accuracy));
    Ok(EvalReport {
        folds,
        mean_accuracy,
        hand_mode_filter: opts.filter,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Fold table: one row per held-out signer and a closing mean row.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# hand mode: {}", report.hand_mode_filter.as_str());
    let _ = writeln!(out, "{:>8}  {:>8}", "signer", "accuracy");
    for f in &report.folds {
        let _ = writeln!(out, "{:>8}  {:>8.4}", f.held_out_signer, f.accuracy);
    }
    let _ = writeln!(out, "{:>8}  {:>8.4}", "mean", report.mean_accuracy);
    out
}

/// One comma-separated line per true class.
pub fn render_confusion(confusion: &[Vec<u64>]) -> String {
    let mut out = String::new();
    for row in confusion {
        let line: Vec<String> = row.iter().map(u64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

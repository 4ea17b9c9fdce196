//! Baselines (Random, CoSim) and evaluation metrics (pairwise discrimination
//! accuracy, macro-F1, multi-seed aggregation).

mod stopwords;

pub use stopwords::StopwordList;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dialogue, LabelSet};
use crate::error::{Error, Result};
use crate::nn::SeededRng;
use crate::text::{tokenize, PretrainedVectors};

/// Evaluation result for one (model, problem-domain) cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub problem_domain: String,
    pub pairs: usize,
    pub correct: usize,
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dap: Option<F1Report>,
}

impl EvalReport {
    pub fn new(model: &str, problem_domain: &str, pairs: usize, correct: usize) -> Self {
        EvalReport {
            model: model.into(),
            problem_domain: problem_domain.into(),
            pairs,
            correct,
            accuracy: if pairs == 0 {
                0.0
            } else {
                correct as f64 / pairs as f64
            },
            dap: None,
        }
    }
}

/// Per-label precision/recall/F1 plus the macro average.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct F1Report {
    pub per_label: Vec<LabelPrf>,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelPrf {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Fair coin over the two ranking outcomes: 0 prefers the first dialogue.
pub fn random_rank(rng: &mut SeededRng) -> u8 {
    u8::from(rng.coin())
}

/// A pair is discriminated correctly iff the preferred dialogue's score is
/// strictly greater; ties count as incorrect, so a constant scorer earns 0.
pub fn pairwise_accuracy(scored: &[(f64, f64, u8)]) -> (usize, usize) {
    let correct = scored
        .iter()
        .filter(|(s_a, s_b, label)| {
            let (pref, other) = if *label == 0 { (s_a, s_b) } else { (s_b, s_a) };
            pref > other
        })
        .count();
    (correct, scored.len())
}

/// Macro-F1 over the labels present in gold or predictions; 0/0 counts as 0.
pub fn macro_f1(predictions: &[usize], gold: &[usize], labels: &LabelSet) -> Result<F1Report> {
    if predictions.is_empty() || predictions.len() != gold.len() {
        return Err(Error::Precondition(format!(
            "macro_f1: {} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let k = labels.len();
    if let Some(&bad) = predictions.iter().chain(gold.iter()).find(|&&l| l >= k) {
        return Err(Error::Data(format!(
            "label index {bad} out of range for {k} labels"
        )));
    }

    let mut tp = vec![0usize; k];
    let mut fp = vec![0usize; k];
    let mut fn_ = vec![0usize; k];
    for (&p, &g) in predictions.iter().zip(gold.iter()) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }

    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let mut per_label = Vec::with_capacity(k);
    let mut macro_sum = 0.0;
    let mut macro_count = 0usize;
    for l in 0..k {
        let present = tp[l] + fp[l] + fn_[l] > 0;
        let precision = ratio(tp[l], tp[l] + fp[l]);
        let recall = ratio(tp[l], tp[l] + fn_[l]);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if present {
            macro_sum += f1;
            macro_count += 1;
        }
        per_label.push(LabelPrf {
            label: labels.names[l].clone(),
            precision,
            recall,
            f1,
            support: tp[l] + fn_[l],
        });
    }

    Ok(F1Report {
        per_label,
        macro_f1: if macro_count == 0 {
            0.0
        } else {
            macro_sum / macro_count as f64
        },
    })
}

/// Coherence score of one dialogue for the CoSim baseline: represent each
/// utterance as the mean pretrained vector of its content words (stopwords
/// and tokens without a pretrained vector are skipped), then average the
/// cosine similarities of adjacent utterance vectors.
///
/// Fallbacks: an utterance with no content words becomes a zero vector, the
/// cosine with a zero vector is 0, and a single-utterance dialogue scores 0.
pub fn cosim_score(
    dialogue: &Dialogue,
    vectors: &PretrainedVectors,
    stopwords: &StopwordList,
) -> f64 {
    let utterance_vector = |text: &str| -> Vec<f64> {
        let mut acc = vec![0.0; vectors.dim];
        let mut count = 0usize;
        for token in tokenize(text) {
            if stopwords.contains(&token) {
                continue;
            }
            if let Some(v) = vectors.get(&token) {
                for (a, b) in acc.iter_mut().zip(v.iter()) {
                    *a += b;
                }
                count += 1;
            }
        }
        if count > 0 {
            for a in &mut acc {
                *a /= count as f64;
            }
        }
        acc
    };

    let vecs: Vec<Vec<f64>> = dialogue.utterances.iter().map(|u| utterance_vector(u)).collect();
    if vecs.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for pair in vecs.windows(2) {
        total += cosine(&pair[0], &pair[1]);
    }
    total / (vecs.len() - 1) as f64
}

/// Cosine similarity with the zero-vector convention: any zero operand
/// yields 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean and sample (n-1) standard deviation of repeated-run metrics.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(values.len() >= 2, "mean_std needs at least 2 values");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Render a fraction-valued metric over seeds as a percentage, such as
/// "94.23 ± .74" (the standard deviation drops its leading zero).
pub fn format_percent_mean_std(values: &[f64]) -> String {
    let (mean, std) = mean_std(values);
    let std_str = format!("{:.2}", std * 100.0);
    let std_str = std_str.strip_prefix('0').unwrap_or(&std_str);
    format!("{:.2} ± {}", mean * 100.0, std_str)
}

//! The four dialogue perturbations (UO, UI, UR, EUO) and the pair-dataset
//! builder.
//!
//! Each generator produces a [`PerturbationSpec`] describing one seeded
//! transformation; [`apply`] materializes it. Dialogue-act labels and speaker
//! tags travel with their utterances so downstream supervision stays aligned.
//! A generated dialogue never equals its source as an utterance sequence.

use std::collections::HashSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, Dialogue};
use crate::error::{Error, Result};
use crate::nn::SeededRng;

/// Problem-domain selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerturbKind {
    /// Utterance ordering: random non-identity permutation of all utterances.
    Uo,
    /// Utterance insertion: remove one utterance and re-insert it elsewhere.
    Ui,
    /// Utterance replacement: replace one utterance with one from another
    /// dialogue.
    Ur,
    /// Even utterance ordering: permute one speaker's utterances only.
    Euo,
}

impl PerturbKind {
    pub const ALL: [PerturbKind; 4] = [
        PerturbKind::Uo,
        PerturbKind::Ui,
        PerturbKind::Ur,
        PerturbKind::Euo,
    ];
}

impl std::fmt::Display for PerturbKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PerturbKind::Uo => write!(f, "uo"),
            PerturbKind::Ui => write!(f, "ui"),
            PerturbKind::Ur => write!(f, "ur"),
            PerturbKind::Euo => write!(f, "euo"),
        }
    }
}

impl std::str::FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "uo" => Ok(PerturbKind::Uo),
            "ui" => Ok(PerturbKind::Ui),
            "ur" => Ok(PerturbKind::Ur),
            "euo" => Ok(PerturbKind::Euo),
            other => Err(Error::Config(format!(
                "unknown problem domain '{other}' (expected uo, ui, ur, or euo)"
            ))),
        }
    }
}

/// Transformation details per kind.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerturbDetail {
    Uo {
        permutation: Vec<usize>,
    },
    Ui {
        removed_index: usize,
        reinsert_index: usize,
    },
    Ur {
        replaced_index: usize,
        donor_dialogue_id: String,
        donor_utterance_index: usize,
    },
    Euo {
        speaker: usize,
        /// Permutation over the chosen speaker's utterance slots.
        permutation: Vec<usize>,
    },
}

/// Seeded description of one transformation of a source dialogue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub source_dialogue_id: String,
    pub seed: u64,
    #[serde(flatten)]
    pub detail: PerturbDetail,
}

impl PerturbationSpec {
    pub fn kind(&self) -> PerturbKind {
        match self.detail {
            PerturbDetail::Uo { .. } => PerturbKind::Uo,
            PerturbDetail::Ui { .. } => PerturbKind::Ui,
            PerturbDetail::Ur { .. } => PerturbKind::Ur,
            PerturbDetail::Euo { .. } => PerturbKind::Euo,
        }
    }
}

/// The dialogue could not be perturbed under the requested domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotPerturbable {
    pub reason: String,
}

impl NotPerturbable {
    fn new(reason: impl Into<String>) -> Self {
        NotPerturbable {
            reason: reason.into(),
        }
    }
}

/// Lookup for UR donor dialogues.
pub trait DonorCorpus {
    fn donor(&self, id: &str) -> Option<&Dialogue>;
}

impl DonorCorpus for CorpusSplit {
    fn donor(&self, id: &str) -> Option<&Dialogue> {
        self.dialogues.iter().find(|d| d.id == id)
    }
}

impl DonorCorpus for [Dialogue] {
    fn donor(&self, id: &str) -> Option<&Dialogue> {
        self.iter().find(|d| d.id == id)
    }
}

/// Materialize a spec. UR needs the corpus to look up the donor dialogue.
pub fn apply(
    spec: &PerturbationSpec,
    source: &Dialogue,
    corpus: &(impl DonorCorpus + ?Sized),
) -> Result<Dialogue> {
    let m = source.len();
    let mut d = source.clone();
    d.id = format!("{}#{}", source.id, spec.kind());
    match &spec.detail {
        PerturbDetail::Uo { permutation } => {
            if permutation.len() != m {
                return Err(Error::Data("permutation length mismatch".into()));
            }
            d.utterances = permutation
                .iter()
                .map(|&i| source.utterances[i].clone())
                .collect();
            d.speakers = permutation.iter().map(|&i| source.speakers[i]).collect();
            d.da_labels = source
                .da_labels
                .as_ref()
                .map(|ls| permutation.iter().map(|&i| ls[i]).collect());
        }
        PerturbDetail::Ui {
            removed_index,
            reinsert_index,
        } => {
            let (i, j) = (*removed_index, *reinsert_index);
            if i >= m || j >= m {
                return Err(Error::Data("insertion index out of range".into()));
            }
            let u = d.utterances.remove(i);
            d.utterances.insert(j, u);
            let s = d.speakers.remove(i);
            d.speakers.insert(j, s);
            if let Some(labels) = &mut d.da_labels {
                let l = labels.remove(i);
                labels.insert(j, l);
            }
        }
        PerturbDetail::Ur {
            replaced_index,
            donor_dialogue_id,
            donor_utterance_index,
        } => {
            let donor = corpus.donor(donor_dialogue_id).ok_or_else(|| {
                Error::Data(format!("donor dialogue '{donor_dialogue_id}' not found"))
            })?;
            let k = *donor_utterance_index;
            if *replaced_index >= m || k >= donor.len() {
                return Err(Error::Data("replacement index out of range".into()));
            }
            d.utterances[*replaced_index] = donor.utterances[k].clone();
            // The label describes the utterance, not the slot, so the donor's
            // label moves with the text. The slot's speaker stays.
            if let (Some(labels), Some(donor_labels)) = (&mut d.da_labels, &donor.da_labels) {
                labels[*replaced_index] = donor_labels[k];
            }
        }
        PerturbDetail::Euo {
            speaker,
            permutation,
        } => {
            let slots: Vec<usize> = source
                .speakers
                .iter()
                .enumerate()
                .filter(|(_, &s)| s == *speaker)
                .map(|(k, _)| k)
                .collect();
            if permutation.len() != slots.len() {
                return Err(Error::Data("speaker permutation length mismatch".into()));
            }
            for (t, &p) in permutation.iter().enumerate() {
                let dst = slots[t];
                let src = slots[p];
                d.utterances[dst] = source.utterances[src].clone();
                if let (Some(labels), Some(src_labels)) = (&mut d.da_labels, &source.da_labels) {
                    labels[dst] = src_labels[src];
                }
            }
        }
    }
    Ok(d)
}

fn non_identity_permutation(rng: &mut SeededRng, n: usize) -> Vec<usize> {
    debug_assert!(n >= 2);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        rng.shuffle(&mut perm);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Random non-identity permutation of all utterance positions.
pub fn perturb_uo(
    dial: &Dialogue,
    rng: &mut SeededRng,
) -> std::result::Result<PerturbationSpec, NotPerturbable> {
    if dial.len() < 2 {
        return Err(NotPerturbable::new("fewer than 2 utterances"));
    }
    Ok(PerturbationSpec {
        source_dialogue_id: dial.id.clone(),
        seed: rng.seed(),
        detail: PerturbDetail::Uo {
            permutation: non_identity_permutation(rng, dial.len()),
        },
    })
}

/// Remove one utterance and re-insert it at a different position, sampled
/// uniformly from the valid (removed, reinsert) space.
pub fn perturb_ui(
    dial: &Dialogue,
    rng: &mut SeededRng,
) -> std::result::Result<PerturbationSpec, NotPerturbable> {
    let m = dial.len();
    if m < 2 {
        return Err(NotPerturbable::new("fewer than 2 utterances"));
    }
    let removed = rng.below(m);
    let mut reinsert = rng.below(m - 1);
    if reinsert >= removed {
        reinsert += 1;
    }
    Ok(PerturbationSpec {
        source_dialogue_id: dial.id.clone(),
        seed: rng.seed(),
        detail: PerturbDetail::Ui {
            removed_index: removed,
            reinsert_index: reinsert,
        },
    })
}

/// Replace one utterance with a randomly chosen utterance from another
/// dialogue whose text differs; resamples up to 100 times.
pub fn perturb_ur(
    dial: &Dialogue,
    corpus: &[Dialogue],
    rng: &mut SeededRng,
) -> std::result::Result<PerturbationSpec, NotPerturbable> {
    if dial.is_empty() {
        return Err(NotPerturbable::new("empty dialogue"));
    }
    let others: Vec<&Dialogue> = corpus.iter().filter(|d| d.id != dial.id).collect();
    if others.is_empty() {
        return Err(NotPerturbable::new("no donor dialogues in corpus"));
    }
    for _ in 0..100 {
        let replaced = rng.below(dial.len());
        let donor = others[rng.below(others.len())];
        let donor_utt = rng.below(donor.len());
        if donor.utterances[donor_utt] != dial.utterances[replaced] {
            return Ok(PerturbationSpec {
                source_dialogue_id: dial.id.clone(),
                seed: rng.seed(),
                detail: PerturbDetail::Ur {
                    replaced_index: replaced,
                    donor_dialogue_id: donor.id.clone(),
                    donor_utterance_index: donor_utt,
                },
            });
        }
    }
    Err(NotPerturbable::new(
        "no donor utterance with different text found in 100 draws",
    ))
}

/// Permute the utterances of one speaker (chosen uniformly among speakers
/// with at least two utterances), keeping all other positions fixed.
pub fn perturb_euo(
    dial: &Dialogue,
    rng: &mut SeededRng,
) -> std::result::Result<PerturbationSpec, NotPerturbable> {
    let mut speakers: Vec<usize> = dial.speakers.clone();
    speakers.sort_unstable();
    speakers.dedup();
    let eligible: Vec<usize> = speakers
        .into_iter()
        .filter(|&s| dial.speakers.iter().filter(|&&x| x == s).count() >= 2)
        .collect();
    if eligible.is_empty() {
        return Err(NotPerturbable::new("no speaker has 2 or more utterances"));
    }
    let speaker = eligible[rng.below(eligible.len())];
    let slots = dial.speakers.iter().filter(|&&s| s == speaker).count();
    Ok(PerturbationSpec {
        source_dialogue_id: dial.id.clone(),
        seed: rng.seed(),
        detail: PerturbDetail::Euo {
            speaker,
            permutation: non_identity_permutation(rng, slots),
        },
    })
}

/// Size of the candidate-move space for a dialogue under a domain, saturating
/// just above `cap`. Duplicate utterance texts can make the space of distinct
/// results smaller than this count; the builder's dedup handles that.
fn space_size(kind: PerturbKind, dial: &Dialogue, corpus_utterances: usize, cap: usize) -> usize {
    let m = dial.len();
    match kind {
        PerturbKind::Uo => {
            let mut size = 1usize;
            for k in 2..=m {
                size = size.saturating_mul(k);
                if size > cap {
                    return cap + 1;
                }
            }
            size.saturating_sub(1)
        }
        PerturbKind::Ui => m.saturating_mul(m.saturating_sub(1)).min(cap + 1),
        PerturbKind::Ur => m
            .saturating_mul(corpus_utterances.saturating_sub(dial.len()))
            .min(cap + 1),
        PerturbKind::Euo => {
            let mut total = 0usize;
            for s in [0usize, 1] {
                let k = dial.speakers.iter().filter(|&&x| x == s).count();
                if k < 2 {
                    continue;
                }
                let mut size = 1usize;
                for j in 2..=k {
                    size = size.saturating_mul(j);
                    if size > cap {
                        return cap + 1;
                    }
                }
                total = total.saturating_add(size - 1);
            }
            total.min(cap + 1)
        }
    }
}

/// Enumerate every candidate spec of the domain in a canonical order.
fn enumerate_space(
    kind: PerturbKind,
    dial: &Dialogue,
    corpus: &[Dialogue],
) -> Vec<PerturbationSpec> {
    let m = dial.len();
    let spec = |detail: PerturbDetail| PerturbationSpec {
        source_dialogue_id: dial.id.clone(),
        seed: 0,
        detail,
    };
    match kind {
        PerturbKind::Uo => (0..m)
            .permutations(m)
            .filter(|p| p.iter().enumerate().any(|(i, &x)| i != x))
            .map(|permutation| spec(PerturbDetail::Uo { permutation }))
            .collect(),
        PerturbKind::Ui => (0..m)
            .cartesian_product(0..m)
            .filter(|(i, j)| i != j)
            .map(|(removed_index, reinsert_index)| {
                spec(PerturbDetail::Ui {
                    removed_index,
                    reinsert_index,
                })
            })
            .collect(),
        PerturbKind::Ur => {
            let mut out = Vec::new();
            for replaced in 0..m {
                for donor in corpus.iter().filter(|d| d.id != dial.id) {
                    for (k, text) in donor.utterances.iter().enumerate() {
                        if *text != dial.utterances[replaced] {
                            out.push(spec(PerturbDetail::Ur {
                                replaced_index: replaced,
                                donor_dialogue_id: donor.id.clone(),
                                donor_utterance_index: k,
                            }));
                        }
                    }
                }
            }
            out
        }
        PerturbKind::Euo => {
            let mut out = Vec::new();
            for s in [0usize, 1] {
                let k = dial.speakers.iter().filter(|&&x| x == s).count();
                if k < 2 {
                    continue;
                }
                for p in (0..k).permutations(k) {
                    if p.iter().enumerate().any(|(i, &x)| i != x) {
                        out.push(spec(PerturbDetail::Euo {
                            speaker: s,
                            permutation: p,
                        }));
                    }
                }
            }
            out
        }
    }
}

fn sample_spec(
    kind: PerturbKind,
    dial: &Dialogue,
    corpus: &[Dialogue],
    rng: &mut SeededRng,
) -> std::result::Result<PerturbationSpec, NotPerturbable> {
    match kind {
        PerturbKind::Uo => perturb_uo(dial, rng),
        PerturbKind::Ui => perturb_ui(dial, rng),
        PerturbKind::Ur => perturb_ur(dial, corpus, rng),
        PerturbKind::Euo => perturb_euo(dial, rng),
    }
}

/// One side of a dialogue pair: the dialogue text plus, for perturbed sides,
/// the provenance of the transformation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSide {
    #[serde(flatten)]
    pub dialogue: Dialogue,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
}

/// Two dialogues plus the preference label: 0 if `dial_a` is the original,
/// 1 if `dial_b` is.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialoguePair {
    pub pair_id: String,
    pub problem_domain: PerturbKind,
    pub label: u8,
    pub dial_a: PairSide,
    pub dial_b: PairSide,
}

impl DialoguePair {
    /// The side the label marks as preferred (the original dialogue).
    pub fn preferred(&self) -> &PairSide {
        if self.label == 0 {
            &self.dial_a
        } else {
            &self.dial_b
        }
    }
}

/// Counters reported by [`build_pair_dataset`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub dialogues_seen: usize,
    pub dialogues_perturbed: usize,
    pub dialogues_skipped: usize,
    pub pairs: usize,
}

/// Build the pair dataset for one split under one domain.
///
/// Per dialogue: up to `per_dialogue` distinct perturbations (deduplicated on
/// the resulting utterance sequence, never equal to the original; when the
/// valid space holds fewer candidates, all of it is taken). Each perturbation
/// emits `(original, perturbed, 0)` and `(perturbed, original, 1)`, so labels
/// balance exactly. Output order is deterministic given the seed.
pub fn build_pair_dataset(
    split: &CorpusSplit,
    kind: PerturbKind,
    per_dialogue: usize,
    seed: u64,
) -> Result<(Vec<DialoguePair>, BuildStats)> {
    if split.dialogues.is_empty() {
        return Err(Error::Precondition(format!(
            "cannot build pairs for empty split '{}'",
            split.name
        )));
    }
    let corpus = &split.dialogues;
    let total_utterances: usize = corpus.iter().map(Dialogue::len).sum();
    let root = SeededRng::new(seed).derive("perturb").derive(&kind.to_string());

    let mut pairs = Vec::new();
    let mut stats = BuildStats::default();

    for (dial_no, dial) in corpus.iter().enumerate() {
        stats.dialogues_seen += 1;
        let mut rng = root.derive_indexed(&dial.id, dial_no as u64);

        let mut results: Vec<(PerturbationSpec, Dialogue)> = Vec::new();
        let mut seen: HashSet<Vec<String>> = HashSet::new();
        seen.insert(dial.utterances.clone());

        let space = space_size(kind, dial, total_utterances, per_dialogue);
        if space <= per_dialogue {
            for spec in enumerate_space(kind, dial, corpus) {
                let perturbed = apply(&spec, dial, corpus.as_slice())?;
                if seen.insert(perturbed.utterances.clone()) {
                    results.push((spec, perturbed));
                }
            }
        } else {
            // Distinct results can still be fewer than requested when
            // utterance texts repeat; the attempt bound keeps this finite.
            let max_attempts = per_dialogue * 50;
            let mut attempts = 0;
            while results.len() < per_dialogue && attempts < max_attempts {
                attempts += 1;
                let spec = match sample_spec(kind, dial, corpus, &mut rng) {
                    Ok(s) => s,
                    Err(_) => break,
                };
                let perturbed = apply(&spec, dial, corpus.as_slice())?;
                if seen.insert(perturbed.utterances.clone()) {
                    results.push((spec, perturbed));
                }
            }
        }

        if results.is_empty() {
            stats.dialogues_skipped += 1;
            continue;
        }
        stats.dialogues_perturbed += 1;

        for (k, (spec, perturbed)) in results.into_iter().enumerate() {
            let original_side = PairSide {
                dialogue: dial.clone(),
                perturbation: None,
            };
            let perturbed_side = PairSide {
                dialogue: perturbed,
                perturbation: Some(spec),
            };
            pairs.push(DialoguePair {
                pair_id: format!("{}:{}:{}:a", dial.id, kind, k),
                problem_domain: kind,
                label: 0,
                dial_a: original_side.clone(),
                dial_b: perturbed_side.clone(),
            });
            pairs.push(DialoguePair {
                pair_id: format!("{}:{}:{}:b", dial.id, kind, k),
                problem_domain: kind,
                label: 1,
                dial_a: perturbed_side,
                dial_b: original_side,
            });
        }
    }

    stats.pairs = pairs.len();
    Ok((pairs, stats))
}

/// Write pairs as line-delimited JSON.
pub fn write_pairs(path: &std::path::Path, pairs: &[DialoguePair]) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    for p in pairs {
        writeln!(f, "{}", serde_json::to_string(p)?)?;
    }
    Ok(())
}

/// Read a line-delimited pair file.
pub fn read_pairs(path: &std::path::Path) -> Result<Vec<DialoguePair>> {
    use std::io::{BufRead, BufReader};
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: DialoguePair = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

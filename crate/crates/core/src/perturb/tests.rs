use super::*;
use crate::corpus::SplitName;

fn dialogue(id: &str, utts: &[&str]) -> Dialogue {
    Dialogue {
        id: id.into(),
        utterances: utts.iter().map(|s| s.to_string()).collect(),
        speakers: (0..utts.len()).map(|k| k % 2).collect(),
        da_labels: Some((0..utts.len()).map(|k| k % 4).collect()),
    }
}

fn sorted(mut xs: Vec<String>) -> Vec<String> {
    xs.sort();
    xs
}

#[test]
fn uo_single_utterance_is_not_perturbable() {
    let d = dialogue("d", &["only"]);
    let mut rng = SeededRng::new(1);
    assert!(perturb_uo(&d, &mut rng).is_err());
}

#[test]
fn uo_two_utterances_forces_the_swap() {
    let d = dialogue("d", &["a", "b"]);
    for seed in 0..20 {
        let mut rng = SeededRng::new(seed);
        let spec = perturb_uo(&d, &mut rng).unwrap();
        match &spec.detail {
            PerturbDetail::Uo { permutation } => assert_eq!(permutation, &vec![1, 0]),
            other => panic!("unexpected detail {other:?}"),
        }
    }
}

#[test]
fn uo_preserves_the_multiset_and_changes_the_order() {
    let d = dialogue("d", &["a", "b", "c", "d", "e"]);
    let corpus = vec![d.clone()];
    for seed in 0..1000 {
        let mut rng = SeededRng::new(seed);
        let spec = perturb_uo(&d, &mut rng).unwrap();
        let p = apply(&spec, &d, corpus.as_slice()).unwrap();
        assert_eq!(sorted(p.utterances.clone()), sorted(d.utterances.clone()));
        assert_ne!(p.utterances, d.utterances);
        // Labels and speakers travel with their utterances.
        let labels = p.da_labels.as_ref().unwrap();
        for (k, u) in p.utterances.iter().enumerate() {
            let orig_pos = d.utterances.iter().position(|x| x == u).unwrap();
            assert_eq!(labels[k], d.da_labels.as_ref().unwrap()[orig_pos]);
            assert_eq!(p.speakers[k], d.speakers[orig_pos]);
        }
    }
}

#[test]
fn ui_two_utterances_forces_the_swap() {
    let d = dialogue("d", &["a", "b"]);
    let corpus = vec![d.clone()];
    let mut rng = SeededRng::new(7);
    let spec = perturb_ui(&d, &mut rng).unwrap();
    let p = apply(&spec, &d, corpus.as_slice()).unwrap();
    assert_eq!(p.utterances, vec!["b".to_string(), "a".to_string()]);
}

#[test]
fn ui_moves_exactly_one_utterance_and_keeps_relative_order() {
    let d = dialogue("d", &["a", "b", "c", "d", "e", "f"]);
    let corpus = vec![d.clone()];
    for seed in 0..500 {
        let mut rng = SeededRng::new(seed);
        let spec = perturb_ui(&d, &mut rng).unwrap();
        let (removed, reinsert) = match spec.detail {
            PerturbDetail::Ui {
                removed_index,
                reinsert_index,
            } => (removed_index, reinsert_index),
            _ => unreachable!(),
        };
        assert_ne!(removed, reinsert);
        let p = apply(&spec, &d, corpus.as_slice()).unwrap();
        assert_eq!(sorted(p.utterances.clone()), sorted(d.utterances.clone()));
        assert_ne!(p.utterances, d.utterances);
        // The moved utterance lands at its re-insertion position; without it,
        // both sequences agree.
        let moved = &d.utterances[removed];
        assert_eq!(&p.utterances[reinsert], moved);
        let without = |xs: &[String], skip: usize| -> Vec<String> {
            xs.iter()
                .enumerate()
                .filter(|(k, _)| *k != skip)
                .map(|(_, u)| u.clone())
                .collect()
        };
        assert_eq!(without(&p.utterances, reinsert), without(&d.utterances, removed));
    }
}

#[test]
fn ui_candidate_space_for_four_utterances_is_twelve_moves() {
    let d = dialogue("d", &["a", "b", "c", "d"]);
    let specs = enumerate_space(PerturbKind::Ui, &d, &[d.clone()]);
    assert_eq!(specs.len(), 12);

    // Brute-force oracle: applying all moves yields (m-1)^2 distinct results,
    // because adjacent swaps are reachable by two different moves.
    let corpus = vec![d.clone()];
    let results: HashSet<Vec<String>> = specs
        .iter()
        .map(|s| apply(s, &d, corpus.as_slice()).unwrap().utterances)
        .collect();
    assert_eq!(results.len(), 9);
    assert!(!results.contains(&d.utterances));
}

#[test]
fn ur_requires_a_donor_dialogue() {
    let d = dialogue("d", &["a", "b"]);
    let corpus = vec![d.clone()];
    let mut rng = SeededRng::new(1);
    assert!(perturb_ur(&d, &corpus, &mut rng).is_err());
}

#[test]
fn ur_changes_exactly_one_utterance_and_carries_the_donor_label() {
    let d = dialogue("src", &["a", "b", "c"]);
    let mut donor = dialogue("donor", &["x", "y", "z", "w"]);
    donor.da_labels = Some(vec![3, 3, 3, 3]);
    let corpus = vec![d.clone(), donor.clone()];
    for seed in 0..200 {
        let mut rng = SeededRng::new(seed);
        let spec = perturb_ur(&d, &corpus, &mut rng).unwrap();
        let p = apply(&spec, &d, corpus.as_slice()).unwrap();
        assert_eq!(p.len(), d.len());
        let diffs: Vec<usize> = (0..d.len())
            .filter(|&k| p.utterances[k] != d.utterances[k])
            .collect();
        assert_eq!(diffs.len(), 1);
        let k = diffs[0];
        assert!(donor.utterances.contains(&p.utterances[k]));
        // The donor's label travels with its text.
        assert_eq!(p.da_labels.as_ref().unwrap()[k], 3);
        // Speakers keep the slot's speaker.
        assert_eq!(p.speakers, d.speakers);
    }
}

#[test]
fn euo_alternating_two_utterances_is_not_perturbable() {
    let d = dialogue("d", &["a", "b"]);
    let mut rng = SeededRng::new(1);
    assert!(perturb_euo(&d, &mut rng).is_err());
}

#[test]
fn euo_swapping_second_speaker_moves_only_their_positions() {
    // Five utterances, alternating speakers: speaker 1 owns positions 1 and 3.
    let d = dialogue("d", &["u1", "u2", "u3", "u4", "u5"]);
    let spec = PerturbationSpec {
        source_dialogue_id: "d".into(),
        seed: 0,
        detail: PerturbDetail::Euo {
            speaker: 1,
            permutation: vec![1, 0],
        },
    };
    let p = apply(&spec, &d, vec![d.clone()].as_slice()).unwrap();
    assert_eq!(p.utterances, vec!["u1", "u4", "u3", "u2", "u5"]);
    // Untouched speaker's positions are bitwise identical.
    for k in [0usize, 2, 4] {
        assert_eq!(p.utterances[k], d.utterances[k]);
    }
    assert_eq!(p.speakers, d.speakers);
}

#[test]
fn euo_keeps_the_other_speakers_positions_fixed() {
    let d = dialogue("d", &["a", "b", "c", "d", "e", "f", "g"]);
    for seed in 0..300 {
        let mut rng = SeededRng::new(seed);
        let spec = perturb_euo(&d, &mut rng).unwrap();
        let speaker = match &spec.detail {
            PerturbDetail::Euo { speaker, .. } => *speaker,
            _ => unreachable!(),
        };
        let p = apply(&spec, &d, vec![d.clone()].as_slice()).unwrap();
        assert_eq!(sorted(p.utterances.clone()), sorted(d.utterances.clone()));
        for (k, &s) in d.speakers.iter().enumerate() {
            if s != speaker {
                assert_eq!(p.utterances[k], d.utterances[k]);
            }
        }
        // Restricted to the chosen speaker's slots it is a permutation.
        let moved: Vec<&String> = d
            .speakers
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == speaker)
            .map(|(k, _)| &p.utterances[k])
            .collect();
        let orig: Vec<&String> = d
            .speakers
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == speaker)
            .map(|(k, _)| &d.utterances[k])
            .collect();
        let mut ms: Vec<&String> = moved.clone();
        let mut os: Vec<&String> = orig.clone();
        ms.sort();
        os.sort();
        assert_eq!(ms, os);
        assert_ne!(moved, orig);
    }
}

fn split_of(dialogues: Vec<Dialogue>) -> CorpusSplit {
    CorpusSplit {
        name: SplitName::Train,
        dialogues,
    }
}

#[test]
fn twenty_perturbations_make_forty_pairs() {
    let d = dialogue("d", &["a", "b", "c", "d", "e", "f", "g", "h"]);
    let (pairs, stats) = build_pair_dataset(&split_of(vec![d]), PerturbKind::Uo, 20, 5).unwrap();
    assert_eq!(pairs.len(), 40);
    assert_eq!(stats.pairs, 40);
    assert_eq!(stats.dialogues_perturbed, 1);
}

#[test]
fn two_utterance_dialogue_under_uo_yields_two_pairs() {
    let d = dialogue("d", &["a", "b"]);
    let (pairs, _) = build_pair_dataset(&split_of(vec![d]), PerturbKind::Uo, 20, 5).unwrap();
    assert_eq!(pairs.len(), 2);
}

#[test]
fn labels_balance_exactly() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 30,
        seed: 2,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    for kind in PerturbKind::ALL {
        let (pairs, _) = build_pair_dataset(&split, kind, 20, 9).unwrap();
        let zeros = pairs.iter().filter(|p| p.label == 0).count();
        assert_eq!(zeros * 2, pairs.len(), "{kind}: unbalanced labels");
    }
}

#[test]
fn every_pair_has_a_mirrored_twin() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 10,
        seed: 4,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    let (pairs, _) = build_pair_dataset(&split, PerturbKind::Ui, 20, 9).unwrap();
    for p in &pairs {
        assert!(pairs.iter().any(|q| {
            q.label == 1 - p.label
                && q.dial_a.dialogue.utterances == p.dial_b.dialogue.utterances
                && q.dial_b.dialogue.utterances == p.dial_a.dialogue.utterances
        }));
    }
}

#[test]
fn exactly_one_side_is_the_unperturbed_original() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 10,
        seed: 4,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    let (pairs, _) = build_pair_dataset(&split, PerturbKind::Euo, 20, 9).unwrap();
    assert!(!pairs.is_empty());
    for p in &pairs {
        let a_orig = p.dial_a.perturbation.is_none();
        let b_orig = p.dial_b.perturbation.is_none();
        assert!(a_orig != b_orig);
        assert_eq!(p.label == 0, a_orig);
        assert!(p.preferred().perturbation.is_none());
    }
}

#[test]
fn builder_is_deterministic_given_the_seed() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 15,
        seed: 8,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    let (a, _) = build_pair_dataset(&split, PerturbKind::Ur, 20, 13).unwrap();
    let (b, _) = build_pair_dataset(&split, PerturbKind::Ur, 20, 13).unwrap();
    let ser = |ps: &[DialoguePair]| serde_json::to_string(ps).unwrap();
    assert_eq!(ser(&a), ser(&b));
    let (c, _) = build_pair_dataset(&split, PerturbKind::Ur, 20, 14).unwrap();
    assert_ne!(ser(&a), ser(&c));
}

#[test]
fn perturbed_side_never_equals_its_source() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 25,
        seed: 6,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    for kind in PerturbKind::ALL {
        let (pairs, _) = build_pair_dataset(&split, kind, 20, 3).unwrap();
        for p in pairs {
            let (orig, pert) = if p.label == 0 {
                (&p.dial_a, &p.dial_b)
            } else {
                (&p.dial_b, &p.dial_a)
            };
            assert_ne!(orig.dialogue.utterances, pert.dialogue.utterances);
        }
    }
}

#[test]
fn perturbations_per_dialogue_are_distinct() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 12,
        seed: 10,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    for kind in PerturbKind::ALL {
        let (pairs, _) = build_pair_dataset(&split, kind, 20, 3).unwrap();
        let mut per_dialogue: std::collections::HashMap<&str, HashSet<Vec<String>>> =
            std::collections::HashMap::new();
        let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for p in &pairs {
            if p.label == 0 {
                per_dialogue
                    .entry(p.dial_a.dialogue.id.as_str())
                    .or_default()
                    .insert(p.dial_b.dialogue.utterances.clone());
                *counts.entry(p.dial_a.dialogue.id.as_str()).or_default() += 1;
            }
        }
        for (id, distinct) in per_dialogue {
            assert_eq!(distinct.len(), counts[id], "{kind}: duplicates for {id}");
        }
    }
}

#[test]
fn not_perturbable_dialogues_are_counted() {
    let ok = dialogue("ok", &["a", "b", "c"]);
    let tiny = dialogue("tiny", &["only"]);
    let (pairs, stats) =
        build_pair_dataset(&split_of(vec![ok, tiny]), PerturbKind::Uo, 20, 5).unwrap();
    assert_eq!(stats.dialogues_seen, 2);
    assert_eq!(stats.dialogues_skipped, 1);
    assert_eq!(stats.dialogues_perturbed, 1);
    assert!(pairs.iter().all(|p| p.preferred().dialogue.id == "ok"));
}

#[test]
fn pair_files_round_trip() {
    let cfg = crate::corpus::synth::SynthConfig {
        dialogues: 5,
        seed: 3,
        ..Default::default()
    };
    let split = split_of(crate::corpus::synth::generate(&cfg));
    let (pairs, _) = build_pair_dataset(&split, PerturbKind::Uo, 4, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pairs.jsonl");
    write_pairs(&path, &pairs).unwrap();
    let back = read_pairs(&path).unwrap();
    assert_eq!(pairs, back);
}

#[test]
fn kind_parses_from_strings() {
    use std::str::FromStr;
    assert_eq!(PerturbKind::from_str("uo").unwrap(), PerturbKind::Uo);
    assert_eq!(PerturbKind::from_str("EUO").unwrap(), PerturbKind::Euo);
    assert!(PerturbKind::from_str("nope").is_err());
}

//! Seeded generator of DailyDialog-style dialogues for tests and demos.
//!
//! Dialogues are single-topic, two-speaker conversations with a staged
//! shape: a greeting question, a reaction, ordered middle turns carrying
//! ordinal markers ("first", "then", ...), and a closing. Utterance order
//! therefore carries real signal, which is what the perturbation benchmarks
//! need, and dialogue-act labels follow the surface form (questions end in
//! "?", directives say "please", commissives say "i will").

use crate::nn::SeededRng;

use super::Dialogue;

const TOPICS: &[(&str, &[&str])] = &[
    ("market", &["apples", "bread", "cheese", "prices", "stall"]),
    ("travel", &["train", "ticket", "luggage", "station", "map"]),
    ("music", &["guitar", "concert", "melody", "band", "song"]),
    ("garden", &["roses", "soil", "seeds", "lawn", "shovel"]),
    ("kitchen", &["soup", "oven", "recipe", "spices", "pan"]),
    ("office", &["report", "meeting", "printer", "deadline", "desk"]),
    ("weather", &["rain", "clouds", "forecast", "umbrella", "storm"]),
    ("sports", &["match", "coach", "stadium", "score", "team"]),
];

const ADJECTIVES: &[&str] = &[
    "fresh", "cheap", "lovely", "busy", "quiet", "bright", "heavy", "simple", "warm", "crowded",
];

const ORDINALS: &[&str] = &["first", "then", "later", "afterwards", "finally", "eventually"];

const GREETINGS: &[&str] = &["hello", "hi", "good morning", "hey"];

// Label ids follow the DailyDialog set: 0 Inform, 1 Question, 2 Directive,
// 3 Commissive.
const INFORM: usize = 0;
const QUESTION: usize = 1;
const DIRECTIVE: usize = 2;
const COMMISSIVE: usize = 3;

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub dialogues: usize,
    pub seed: u64,
    pub min_utterances: usize,
    pub max_utterances: usize,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dialogues: 100,
            seed: 0,
            min_utterances: 4,
            max_utterances: 8,
            id_prefix: "synth-".into(),
        }
    }
}

fn pick<'a>(rng: &mut SeededRng, options: &[&'a str]) -> &'a str {
    options[rng.below(options.len())]
}

/// Generate `cfg.dialogues` dialogues, deterministically from the seed.
pub fn generate(cfg: &SynthConfig) -> Vec<Dialogue> {
    assert!(cfg.min_utterances >= 3, "need at least greeting, reaction, closing");
    assert!(cfg.max_utterances >= cfg.min_utterances);
    let root = SeededRng::new(cfg.seed).derive("synth");
    (0..cfg.dialogues)
        .map(|i| generate_one(&root.derive_indexed("dialogue", i as u64), cfg, i))
        .collect()
}

fn generate_one(rng: &SeededRng, cfg: &SynthConfig, index: usize) -> Dialogue {
    let mut rng = rng.clone();
    let (_, nouns) = TOPICS[rng.below(TOPICS.len())];
    let m = cfg.min_utterances + rng.below(cfg.max_utterances - cfg.min_utterances + 1);

    let mut utterances = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);

    let greeting = pick(&mut rng, GREETINGS);
    let topic_noun = pick(&mut rng, nouns);
    utterances.push(format!("{greeting} , do you like the {topic_noun} ?"));
    labels.push(QUESTION);

    let adj = pick(&mut rng, ADJECTIVES);
    utterances.push(format!("yes , the {topic_noun} is really {adj} ."));
    labels.push(INFORM);

    for k in 0..m.saturating_sub(3) {
        let ord = ORDINALS[k.min(ORDINALS.len() - 1)];
        let noun = pick(&mut rng, nouns);
        let (text, label) = match rng.below(5) {
            0 => (format!("{ord} , what about the {noun} ?"), QUESTION),
            1 => (format!("please look at the {noun} {ord} ."), DIRECTIVE),
            2 => (format!("i will bring the {noun} {ord} ."), COMMISSIVE),
            _ => {
                let adj = pick(&mut rng, ADJECTIVES);
                (format!("{ord} , the {noun} was {adj} ."), INFORM)
            }
        };
        utterances.push(text);
        labels.push(label);
    }

    if rng.coin() {
        utterances.push("thanks for the help , goodbye .".to_string());
        labels.push(INFORM);
    } else {
        let noun = pick(&mut rng, nouns);
        utterances.push(format!("i will see you at the {noun} , goodbye ."));
        labels.push(COMMISSIVE);
    }

    let speakers: Vec<usize> = (0..utterances.len()).map(|k| k % 2).collect();
    Dialogue {
        id: format!("{}{:05}", cfg.id_prefix, index),
        utterances,
        speakers,
        da_labels: Some(labels),
    }
}

/// Write dialogues in the raw DailyDialog two-file layout (text + acts),
/// for exercising the parser and the CLI end to end.
pub fn write_raw_files(
    dialogues: &[Dialogue],
    text_path: &std::path::Path,
    act_path: &std::path::Path,
) -> crate::Result<()> {
    use std::io::Write;
    let mut tf = std::fs::File::create(text_path)?;
    let mut af = std::fs::File::create(act_path)?;
    for d in dialogues {
        let line: String = d
            .utterances
            .iter()
            .map(|u| format!("{u} __eou__ "))
            .collect();
        writeln!(tf, "{}", line.trim_end())?;
        let labels = d
            .da_labels
            .as_ref()
            .expect("synthetic dialogues carry labels");
        let acts: Vec<String> = labels.iter().map(|l| (l + 1).to_string()).collect();
        writeln!(af, "{}", acts.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            dialogues: 20,
            seed: 9,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
    }

    #[test]
    fn dialogues_are_well_formed() {
        let cfg = SynthConfig {
            dialogues: 50,
            seed: 3,
            ..SynthConfig::default()
        };
        for d in generate(&cfg) {
            d.validate().unwrap();
            assert!(d.len() >= cfg.min_utterances && d.len() <= cfg.max_utterances);
            // Speakers alternate.
            for (k, &s) in d.speakers.iter().enumerate() {
                assert_eq!(s, k % 2);
            }
            // Labels match surface form.
            for (u, &l) in d.utterances.iter().zip(d.da_labels.as_ref().unwrap()) {
                if u.ends_with('?') {
                    assert_eq!(l, QUESTION);
                } else if u.contains("please") {
                    assert_eq!(l, DIRECTIVE);
                } else if u.contains("i will") {
                    assert_eq!(l, COMMISSIVE);
                } else {
                    assert_eq!(l, INFORM);
                }
            }
        }
    }

    #[test]
    fn all_four_labels_occur() {
        let cfg = SynthConfig {
            dialogues: 200,
            seed: 5,
            ..SynthConfig::default()
        };
        let mut seen = [false; 4];
        for d in generate(&cfg) {
            for &l in d.da_labels.as_ref().unwrap() {
                seen[l] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn raw_files_round_trip_through_the_parser() {
        let cfg = SynthConfig {
            dialogues: 12,
            seed: 1,
            ..SynthConfig::default()
        };
        let dialogues = generate(&cfg);
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("text.txt");
        let ap = dir.path().join("acts.txt");
        write_raw_files(&dialogues, &tp, &ap).unwrap();
        let (parsed, stats) = super::super::parse_dailydialog(&tp, &ap, "synth-").unwrap();
        assert_eq!(stats.dialogues, 12);
        for (a, b) in dialogues.iter().zip(parsed.iter()) {
            assert_eq!(a.utterances, b.utterances);
            assert_eq!(a.da_labels, b.da_labels);
            assert_eq!(a.speakers, b.speakers);
        }
    }
}

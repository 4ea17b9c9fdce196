use serde::Serialize;

use dicoh::corpus::{
    parse_dailydialog, split_corpus, CorpusDir, CorpusSplit, LabelSet, ParseStats, SplitName,
};

use crate::config::{require_exists, resolve_out_dir, write_resolved, CliError, ConfigFile};
use crate::{CliResult, PrepareArgs};

#[derive(Serialize)]
struct ResolvedPrepare {
    command: String,
    seed: u64,
    splits: String,
}

#[derive(Serialize)]
struct StatsReport {
    dialogues: usize,
    skipped_empty_lines: usize,
    total_utterances: usize,
    total_words: usize,
    avg_utterances_per_dialogue: f64,
    avg_words_per_utterance: f64,
}

impl From<&ParseStats> for StatsReport {
    fn from(s: &ParseStats) -> Self {
        StatsReport {
            dialogues: s.dialogues,
            skipped_empty_lines: s.skipped_empty_lines,
            total_utterances: s.total_utterances,
            total_words: s.total_words,
            avg_utterances_per_dialogue: s.avg_utterances_per_dialogue(),
            avg_words_per_utterance: s.avg_words_per_utterance(),
        }
    }
}

pub fn run(args: PrepareArgs) -> CliResult {
    let config = ConfigFile::load(args.config.as_deref())?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let out = resolve_out_dir(args.out, &config, "prepare", seed)?;
    let dir = CorpusDir::new(&out);

    let (splits, stats, mode) = match (&args.text, &args.train_text) {
        (Some(text), None) => {
            let acts = args.acts.as_ref().expect("clap enforces --acts with --text");
            require_exists(text)?;
            require_exists(acts)?;
            let (dialogues, stats) = parse_dailydialog(text, acts, "dd-")?;
            let (train, val, test) = split_corpus(dialogues, (0.8, 0.1, 0.1), seed)?;
            (vec![train, val, test], stats, "seeded-80-10-10")
        }
        (None, Some(train_text)) => {
            let files = [
                (train_text.clone(), args.train_acts.clone(), SplitName::Train, "dd-train-"),
                (
                    args.val_text.clone().expect("clap enforces the group"),
                    args.val_acts.clone(),
                    SplitName::Validation,
                    "dd-validation-",
                ),
                (
                    args.test_text.clone().expect("clap enforces the group"),
                    args.test_acts.clone(),
                    SplitName::Test,
                    "dd-test-",
                ),
            ];
            let mut splits = Vec::new();
            let mut stats = ParseStats::default();
            for (text, acts, name, prefix) in files {
                let acts = acts.expect("clap enforces the group");
                require_exists(&text)?;
                require_exists(&acts)?;
                let (dialogues, s) = parse_dailydialog(&text, &acts, prefix)?;
                stats.dialogues += s.dialogues;
                stats.skipped_empty_lines += s.skipped_empty_lines;
                stats.total_utterances += s.total_utterances;
                stats.total_words += s.total_words;
                splits.push(CorpusSplit { name, dialogues });
            }
            (splits, stats, "official")
        }
        _ => {
            return Err(CliError::usage(
                "provide either --text/--acts or the six per-split files",
            ))
        }
    };

    for split in &splits {
        dir.write_split(split)?;
    }
    dir.write_labels(&LabelSet::dailydialog())?;

    let report = StatsReport::from(&stats);
    let stats_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(out.join("stats.json"), &stats_json)?;
    write_resolved(
        &out,
        &ResolvedPrepare {
            command: "prepare".into(),
            seed,
            splits: mode.into(),
        },
    )?;

    println!(
        "prepared {} dialogues ({:.2} utterances/dialogue, {:.2} words/utterance) -> {}",
        report.dialogues,
        report.avg_utterances_per_dialogue,
        report.avg_words_per_utterance,
        out.display()
    );
    Ok(())
}

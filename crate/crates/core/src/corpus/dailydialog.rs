use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

use super::Dialogue;

/// Separator between utterances in the raw text files.
pub const EOU: &str = "__eou__";

/// Counters gathered while parsing, comparable to published corpus
/// statistics (dialogue count, utterances per dialogue, words per utterance).
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParseStats {
    pub dialogues: usize,
    pub skipped_empty_lines: usize,
    pub total_utterances: usize,
    pub total_words: usize,
}

impl ParseStats {
    pub fn avg_utterances_per_dialogue(&self) -> f64 {
        if self.dialogues == 0 {
            0.0
        } else {
            self.total_utterances as f64 / self.dialogues as f64
        }
    }

    /// Words are whitespace-separated chunks of the raw utterance text.
    pub fn avg_words_per_utterance(&self) -> f64 {
        if self.total_utterances == 0 {
            0.0
        } else {
            self.total_words as f64 / self.total_utterances as f64
        }
    }
}

/// Parse a DailyDialog-style pair of files: one dialogue per line with
/// utterances separated by `__eou__` in the text file, and one line of
/// space-separated act integers 1-4 (one per utterance) in the act file.
///
/// Speakers alternate 0,1,0,1,... and act integers map to 0-based label
/// indices. Empty text lines are skipped and counted. A trailing empty
/// segment after the final separator is dropped.
pub fn parse_dailydialog(
    text_path: &Path,
    act_path: &Path,
    id_prefix: &str,
) -> Result<(Vec<Dialogue>, ParseStats)> {
    let text = BufReader::new(std::fs::File::open(text_path)?);
    let acts = BufReader::new(std::fs::File::open(act_path)?);
    let mut stats = ParseStats::default();
    let mut dialogues = Vec::new();

    for (lineno, (text_line, act_line)) in text.lines().zip(acts.lines()).enumerate() {
        let line_number = lineno + 1;
        let text_line = text_line?;
        let act_line = act_line?;
        if text_line.trim().is_empty() {
            stats.skipped_empty_lines += 1;
            continue;
        }
        let mut utterances: Vec<String> = text_line
            .split(EOU)
            .map(|u| u.trim().to_string())
            .collect();
        // The distribution terminates every line with the separator.
        while utterances.last().is_some_and(String::is_empty) {
            utterances.pop();
        }
        if utterances.is_empty() {
            stats.skipped_empty_lines += 1;
            continue;
        }

        let labels: Vec<usize> = act_line
            .split_whitespace()
            .map(|a| {
                let v: i64 = a.parse().map_err(|_| Error::Parse {
                    path: act_path.display().to_string(),
                    line: line_number,
                    message: format!("invalid act value '{a}'"),
                })?;
                if (1..=4).contains(&v) {
                    Ok((v - 1) as usize)
                } else {
                    Err(Error::Parse {
                        path: act_path.display().to_string(),
                        line: line_number,
                        message: format!("act value {v} outside 1-4"),
                    })
                }
            })
            .collect::<Result<_>>()?;

        if labels.len() != utterances.len() {
            return Err(Error::Parse {
                path: text_path.display().to_string(),
                line: line_number,
                message: format!(
                    "{} utterances but {} act labels",
                    utterances.len(),
                    labels.len()
                ),
            });
        }

        stats.dialogues += 1;
        stats.total_utterances += utterances.len();
        stats.total_words += utterances
            .iter()
            .map(|u| u.split_whitespace().count())
            .sum::<usize>();
        let speakers: Vec<usize> = (0..utterances.len()).map(|k| k % 2).collect();
        dialogues.push(Dialogue {
            id: format!("{id_prefix}{:05}", lineno),
            utterances,
            speakers,
            da_labels: Some(labels),
        });
    }

    Ok((dialogues, stats))
}

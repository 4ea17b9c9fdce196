use std::path::PathBuf;

use serde::Serialize;

use dicoh::corpus::LabelSet;
use dicoh::metrics::{
    self, cosim_score, format_percent_mean_std, random_rank, EvalReport, StopwordList,
};
use dicoh::nn::SeededRng;
use dicoh::perturb::DialoguePair;
use dicoh::text::read_pretrained_file;
use dicoh::train::{encode_pairs, eval_pairwise_counts, Checkpoint};

use crate::config::{require_exists, resolve_out_dir, write_resolved, CliError, ConfigFile};
use crate::{CliResult, EvalArgs};

struct PairColumn {
    label: String,
    path: PathBuf,
    pairs: Vec<DialoguePair>,
}

fn load_columns(paths: &[PathBuf]) -> Result<Vec<PairColumn>, CliError> {
    let mut columns = Vec::new();
    for path in paths {
        require_exists(path)?;
        let pairs = dicoh::perturb::read_pairs(path)?;
        if pairs.is_empty() {
            return Err(CliError::usage(format!(
                "pair file is empty: {}",
                path.display()
            )));
        }
        let domain = pairs[0].problem_domain.to_string();
        let stem = path
            .file_name()
            .map(|s| s.to_string_lossy().replace(".pairs.jsonl", ""))
            .unwrap_or_default();
        columns.push(PairColumn {
            label: format!("{domain}:{stem}"),
            path: path.clone(),
            pairs,
        });
    }
    Ok(columns)
}

/// Accuracy always; the per-label F1 block additionally for DAP regimes,
/// whose headline metric is the macro-F1.
fn eval_checkpoint(ckpt: &Checkpoint, column: &PairColumn) -> Result<(EvalReport, f64), CliError> {
    let model = ckpt.rebuild_model()?;
    let vocab = ckpt.vocabulary();
    let encoded = encode_pairs(&column.pairs, &vocab, ckpt.config.n_max);
    let (correct, total) = eval_pairwise_counts(&model, &encoded)?;
    let mut report = EvalReport::new(
        &format!("dicoh ({})", ckpt.config.regime),
        &column.label,
        total,
        correct,
    );
    let metric = if ckpt.config.regime.selects_on_dap() {
        report.dap = Some(dicoh_macro_f1_report(&model, &encoded, &ckpt.labels)?);
        report.dap.as_ref().map(|d| d.macro_f1).unwrap_or(0.0)
    } else {
        report.accuracy
    };
    Ok((report, metric))
}

fn dicoh_macro_f1_report(
    model: &dicoh::model::CoherenceModel,
    encoded: &[dicoh::train::EncodedPair],
    labels: &LabelSet,
) -> Result<dicoh::metrics::F1Report, CliError> {
    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    for p in encoded {
        for dial in [&p.a, &p.b] {
            let Some(dial_gold) = &dial.labels else { continue };
            let preds = dicoh::train::predict_acts_encoded(model, dial)?;
            for (pred, g) in preds.iter().zip(dial_gold.iter()) {
                predictions.push(*pred);
                gold.push(*g);
            }
        }
    }
    Ok(metrics::macro_f1(&predictions, &gold, labels)?)
}

fn eval_random(seed: u64, column: &PairColumn) -> EvalReport {
    let mut rng = SeededRng::new(seed).derive("random-baseline");
    let correct = column
        .pairs
        .iter()
        .filter(|p| random_rank(&mut rng) == p.label)
        .count();
    EvalReport::new("random", &column.label, column.pairs.len(), correct)
}

fn eval_cosim(
    vectors: &dicoh::text::PretrainedVectors,
    stopwords: &StopwordList,
    column: &PairColumn,
) -> EvalReport {
    let scored: Vec<(f64, f64, u8)> = column
        .pairs
        .iter()
        .map(|p| {
            (
                cosim_score(&p.dial_a.dialogue, vectors, stopwords),
                cosim_score(&p.dial_b.dialogue, vectors, stopwords),
                p.label,
            )
        })
        .collect();
    let (correct, total) = metrics::pairwise_accuracy(&scored);
    EvalReport::new("cosim", &column.label, total, correct)
}

fn render_table(rows: &[(String, Vec<String>)], columns: &[PairColumn]) -> String {
    let name_width = rows
        .iter()
        .map(|(n, _)| n.len())
        .chain(std::iter::once(5))
        .max()
        .unwrap();
    let col_widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(i, c)| {
            rows.iter()
                .map(|(_, cells)| cells[i].len())
                .chain(std::iter::once(c.label.len()))
                .max()
                .unwrap()
        })
        .collect();
    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}", "model"));
    for (c, w) in columns.iter().zip(&col_widths) {
        out.push_str(&format!(" | {:>w$}", c.label, w = w));
    }
    out.push('\n');
    out.push_str(&"-".repeat(name_width));
    for w in &col_widths {
        out.push_str(&format!("-+-{}", "-".repeat(*w)));
    }
    out.push('\n');
    for (name, cells) in rows {
        out.push_str(&format!("{name:<name_width$}"));
        for (cell, w) in cells.iter().zip(&col_widths) {
            out.push_str(&format!(" | {cell:>w$}", w = w));
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct ResolvedEval {
    command: String,
    seed: u64,
    pairs: Vec<String>,
    checkpoints: Vec<String>,
    model: Option<String>,
}

pub fn run(args: EvalArgs) -> CliResult {
    let config = ConfigFile::load(args.config.as_deref())?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let columns = load_columns(&args.pairs)?;

    let baseline = args.model.as_deref();
    if baseline.is_none() && args.checkpoint.is_empty() {
        return Err(CliError::usage(
            "provide --checkpoint (repeatable) or --model random|cosim",
        ));
    }

    let mut reports: Vec<EvalReport> = Vec::new();
    let mut rows: Vec<(String, Vec<String>)> = Vec::new();

    if !args.checkpoint.is_empty() {
        let mut checkpoints = Vec::new();
        for path in &args.checkpoint {
            require_exists(path)?;
            checkpoints.push(Checkpoint::load(path)?);
        }
        // One row per checkpoint; with several checkpoints an extra
        // mean ± std row aggregates them per column.
        let mut per_column_metrics: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
        for (k, ckpt) in checkpoints.iter().enumerate() {
            let mut cells = Vec::new();
            for (ci, column) in columns.iter().enumerate() {
                let (report, metric) = eval_checkpoint(ckpt, column)?;
                per_column_metrics[ci].push(metric);
                cells.push(format!("{:.2}", metric * 100.0));
                reports.push(report);
            }
            let name = if checkpoints.len() == 1 {
                format!("dicoh ({})", ckpt.config.regime)
            } else {
                format!("dicoh ({}) seed {}", ckpt.config.regime, k)
            };
            rows.push((name, cells));
        }
        if checkpoints.len() > 1 {
            let cells: Vec<String> = per_column_metrics
                .iter()
                .map(|ms| format_percent_mean_std(ms))
                .collect();
            rows.push(("dicoh (mean ± std)".into(), cells));
        }
    }

    match baseline {
        None | Some("dicoh") => {}
        Some("random") => {
            let mut cells = Vec::new();
            for column in &columns {
                let report = eval_random(seed, column);
                cells.push(format!("{:.2}", report.accuracy * 100.0));
                reports.push(report);
            }
            rows.push(("random".into(), cells));
        }
        Some("cosim") => {
            let embeddings = args
                .embeddings
                .clone()
                .or_else(|| config.embeddings.clone())
                .ok_or_else(|| CliError::usage("the cosim baseline needs --embeddings"))?;
            require_exists(&embeddings)?;
            let vectors = read_pretrained_file(&embeddings)?;
            let stopwords = match args.stopwords.clone().or_else(|| config.stopwords.clone()) {
                Some(path) => StopwordList::from_file(&path)?,
                None => StopwordList::default_english(),
            };
            let mut cells = Vec::new();
            for column in &columns {
                let report = eval_cosim(&vectors, &stopwords, column);
                cells.push(format!("{:.2}", report.accuracy * 100.0));
                reports.push(report);
            }
            rows.push(("cosim".into(), cells));
        }
        Some(other) => {
            return Err(CliError::usage(format!(
                "unknown --model '{other}' (expected random or cosim)"
            )));
        }
    }

    let table = render_table(&rows, &columns);
    print!("{table}");

    let out = resolve_out_dir(args.out.clone(), &config, "eval", seed)?;
    let json =
        serde_json::to_string_pretty(&reports).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(out.join("report.json"), json)?;
    std::fs::write(out.join("table.txt"), &table)?;
    write_resolved(
        &out,
        &ResolvedEval {
            command: "eval".into(),
            seed,
            pairs: columns.iter().map(|c| c.path.display().to_string()).collect(),
            checkpoints: args.checkpoint.iter().map(|c| c.display().to_string()).collect(),
            model: args.model.clone(),
        },
    )?;
    println!("reports -> {}", out.display());
    Ok(())
}

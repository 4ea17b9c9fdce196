use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use dicoh::corpus::LabelSet;
use dicoh::metrics::format_percent_mean_std;
use dicoh::model::CoherenceModel;
use dicoh::nn::SeededRng;
use dicoh::text::{load_pretrained, EmbeddingMatrix, Vocabulary};
use dicoh::train::{
    encode_pairs, train, vocabulary_from_pairs, EncodedPair, TrainConfig, TrainOutcome,
    TrainingRegime,
};

use crate::config::{require_exists, resolve_out_dir, write_resolved, CliError, ConfigFile};
use crate::{CliResult, TrainArgs};

fn build_train_config(args: &TrainArgs, config: &ConfigFile) -> Result<TrainConfig, CliError> {
    let regime = TrainingRegime::from_str(&args.regime).map_err(|e| CliError::usage(e.to_string()))?;
    let mut cfg = TrainConfig::new(regime);
    cfg.seed = args.seed.or(config.seed).unwrap_or(0);
    if let Some(v) = args.epochs.or(config.epochs) {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size.or(config.batch_size) {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr.or(config.learning_rate) {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.dropout.or(config.dropout_p) {
        cfg.dropout_p = v;
    }
    if let Some(v) = args.n_max.or(config.n_max) {
        cfg.n_max = v;
    }
    if let Some(v) = args.emb_dim.or(config.emb_dim) {
        cfg.emb_dim = v;
    }
    if let Some(v) = args.utt_hidden.or(config.utt_hidden) {
        cfg.utt_hidden = v;
    }
    if let Some(v) = args.dial_hidden.or(config.dial_hidden) {
        cfg.dial_hidden = v;
    }
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn embedding_for(
    args: &TrainArgs,
    config: &ConfigFile,
    cfg: &mut TrainConfig,
    vocab: &Vocabulary,
    rng: &SeededRng,
) -> Result<EmbeddingMatrix, CliError> {
    let path = args.embeddings.clone().or_else(|| config.embeddings.clone());
    match path {
        Some(path) => {
            if !path.exists() {
                return Err(CliError::usage(format!(
                    "embeddings file does not exist: {}",
                    path.display()
                )));
            }
            let emb = load_pretrained(&path, vocab, cfg.train_embeddings, rng)?;
            if cfg.emb_dim != emb.dim && args.emb_dim.is_some() {
                return Err(CliError::usage(format!(
                    "--emb-dim {} conflicts with the {}-dimensional embedding file",
                    cfg.emb_dim, emb.dim
                )));
            }
            cfg.emb_dim = emb.dim;
            println!("pretrained embedding coverage: {:.3}", emb.coverage);
            Ok(emb)
        }
        None => Ok(EmbeddingMatrix::random(
            vocab,
            cfg.emb_dim,
            cfg.train_embeddings,
            rng,
        )),
    }
}

struct LoadedPairs {
    train: Vec<dicoh::perturb::DialoguePair>,
    validation: Vec<dicoh::perturb::DialoguePair>,
}

fn load_pairs(dir: &Path) -> Result<LoadedPairs, CliError> {
    let read = |name: &str| -> Result<Vec<dicoh::perturb::DialoguePair>, CliError> {
        let path = dir.join(format!("{name}.pairs.jsonl"));
        require_exists(&path)?;
        Ok(dicoh::perturb::read_pairs(&path)?)
    };
    Ok(LoadedPairs {
        train: read("train")?,
        validation: read("validation")?,
    })
}

fn run_one_seed(
    cfg: &TrainConfig,
    vocab: &Vocabulary,
    labels: &LabelSet,
    train_pairs: &[EncodedPair],
    val_pairs: &[EncodedPair],
    args: &TrainArgs,
    config: &ConfigFile,
    out: &Path,
) -> Result<TrainOutcome, CliError> {
    let rng = SeededRng::new(cfg.seed);
    let mut cfg = cfg.clone();
    let embedding = embedding_for(args, config, &mut cfg, vocab, &rng)?;
    let mut model = CoherenceModel::build(cfg.model_config(vocab.len(), labels.len()), embedding, &rng);

    let outcome = train(&cfg, &mut model, vocab, labels, train_pairs, val_pairs)?;

    let mut log = std::fs::File::create(out.join("epochs.log"))?;
    for line in &outcome.logs {
        writeln!(log, "{line}")?;
    }
    outcome.checkpoint.save(&out.join("checkpoint.json"))?;
    write_resolved(out, &cfg)?;
    println!(
        "seed {}: best epoch {} with validation metric {:.4} -> {}",
        cfg.seed,
        outcome.best_epoch,
        outcome.best_val_metric,
        out.display()
    );
    Ok(outcome)
}

pub fn run(args: TrainArgs) -> CliResult {
    let config = ConfigFile::load(args.config.as_deref())?;
    let base_cfg = build_train_config(&args, &config)?;
    require_exists(&args.pairs)?;
    let out = resolve_out_dir(args.out.clone(), &config, "train", base_cfg.seed)?;

    let loaded = load_pairs(&args.pairs)?;
    if loaded.train.is_empty() || loaded.validation.is_empty() {
        return Err(CliError::usage(
            "training and validation pair files must be nonempty",
        ));
    }
    let vocab = vocabulary_from_pairs(&loaded.train);
    let labels = dicoh::corpus::LabelSet::dailydialog();
    let train_pairs = encode_pairs(&loaded.train, &vocab, base_cfg.n_max);
    let val_pairs = encode_pairs(&loaded.validation, &vocab, base_cfg.n_max);

    let seeds = args.seeds.unwrap_or(1);
    if seeds <= 1 {
        run_one_seed(
            &base_cfg,
            &vocab,
            &labels,
            &train_pairs,
            &val_pairs,
            &args,
            &config,
            &out,
        )?;
        return Ok(());
    }

    let mut metrics = Vec::with_capacity(seeds);
    for k in 0..seeds {
        let mut cfg = base_cfg.clone();
        cfg.seed = base_cfg.seed + k as u64;
        let seed_dir = out.join(format!("seed-{}", cfg.seed));
        std::fs::create_dir_all(&seed_dir)?;
        let outcome = run_one_seed(
            &cfg,
            &vocab,
            &labels,
            &train_pairs,
            &val_pairs,
            &args,
            &config,
            &seed_dir,
        )?;
        metrics.push(outcome.best_val_metric);
    }
    let summary = format!(
        "validation metric over {} seeds: {}",
        seeds,
        format_percent_mean_std(&metrics)
    );
    std::fs::write(out.join("seeds-summary.txt"), format!("{summary}\n"))?;
    println!("{summary}");
    Ok(())
}

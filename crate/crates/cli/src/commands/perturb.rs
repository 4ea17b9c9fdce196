use std::str::FromStr;

use serde::Serialize;

use dicoh::corpus::{CorpusDir, SplitName};
use dicoh::perturb::{build_pair_dataset, write_pairs, BuildStats, PerturbKind};

use crate::config::{require_exists, resolve_out_dir, write_resolved, CliError, ConfigFile};
use crate::{CliResult, PerturbArgs};

#[derive(Serialize)]
struct ResolvedPerturb {
    command: String,
    domain: String,
    per_dialogue: usize,
    seed: u64,
    corpus: String,
}

#[derive(Serialize)]
struct Manifest {
    domain: String,
    per_dialogue: usize,
    seed: u64,
    splits: Vec<SplitManifest>,
}

#[derive(Serialize)]
struct SplitManifest {
    split: String,
    #[serde(flatten)]
    stats: BuildStats,
}

pub fn run(args: PerturbArgs) -> CliResult {
    let config = ConfigFile::load(args.config.as_deref())?;
    let domain = PerturbKind::from_str(&args.domain).map_err(|e| CliError::usage(e.to_string()))?;
    let per_dialogue = args.per_dialogue.or(config.per_dialogue).unwrap_or(20);
    let seed = args.seed.or(config.seed).unwrap_or(0);
    require_exists(&args.corpus)?;
    let out = resolve_out_dir(args.out, &config, "perturb", seed)?;

    let corpus = CorpusDir::new(&args.corpus);
    let mut manifest = Manifest {
        domain: domain.to_string(),
        per_dialogue,
        seed,
        splits: Vec::new(),
    };
    for name in [SplitName::Train, SplitName::Validation, SplitName::Test] {
        let split = corpus.read_split(name)?;
        let (pairs, stats) = build_pair_dataset(&split, domain, per_dialogue, seed)?;
        write_pairs(&out.join(format!("{name}.pairs.jsonl")), &pairs)?;
        manifest.splits.push(SplitManifest {
            split: name.to_string(),
            stats,
        });
    }

    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::runtime(e.to_string()))?;
    std::fs::write(out.join("manifest.json"), manifest_json)?;
    write_resolved(
        &out,
        &ResolvedPerturb {
            command: "perturb".into(),
            domain: domain.to_string(),
            per_dialogue,
            seed,
            corpus: args.corpus.display().to_string(),
        },
    )?;

    for s in &manifest.splits {
        println!(
            "{} {}: {} pairs from {} dialogues ({} skipped)",
            domain, s.split, s.stats.pairs, s.stats.dialogues_perturbed, s.stats.dialogues_skipped
        );
    }
    println!("pair datasets -> {}", out.display());
    Ok(())
}

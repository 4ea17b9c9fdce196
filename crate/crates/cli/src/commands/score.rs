use std::io::Write;

use dicoh::corpus::read_canonical;
use dicoh::train::{score_encoded_dialogue, Checkpoint, EncodedDialogue};

use crate::config::{require_exists, CliError};
use crate::{CliResult, ScoreArgs};

pub fn run(args: ScoreArgs) -> CliResult {
    require_exists(&args.checkpoint)?;
    require_exists(&args.dialogues)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.rebuild_model()?;
    let vocab = ckpt.vocabulary();
    let dialogues = read_canonical(&args.dialogues)?;

    let mut lines = Vec::with_capacity(dialogues.len());
    for d in &dialogues {
        let encoded = EncodedDialogue {
            utterances: dicoh::model::encode_dialogue(d, &vocab, ckpt.config.n_max),
            labels: None,
        };
        let score = score_encoded_dialogue(&model, &encoded)?;
        lines.push(
            serde_json::json!({ "id": d.id, "score": score }).to_string(),
        );
    }

    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("scores.jsonl"))?;
            for line in &lines {
                writeln!(f, "{line}")?;
            }
            println!("scored {} dialogues -> {}", lines.len(), dir.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            for line in &lines {
                writeln!(handle, "{line}").map_err(CliError::from)?;
            }
        }
    }
    Ok(())
}

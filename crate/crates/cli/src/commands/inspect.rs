use std::io::Write;

use dicoh::corpus::read_canonical;
use dicoh::model::inspect_dialogue;
use dicoh::train::Checkpoint;

use crate::config::{require_exists, CliError};
use crate::{CliResult, InspectArgs};

pub fn run(args: InspectArgs) -> CliResult {
    require_exists(&args.checkpoint)?;
    require_exists(&args.dialogues)?;
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let model = ckpt.rebuild_model()?;
    let vocab = ckpt.vocabulary();
    let mut dialogues = read_canonical(&args.dialogues)?;

    if let Some(id) = &args.id {
        dialogues.retain(|d| &d.id == id);
        if dialogues.is_empty() {
            return Err(CliError::runtime(format!("unknown dialogue id '{id}'")));
        }
    }

    let mut lines = Vec::with_capacity(dialogues.len());
    for d in &dialogues {
        let report = inspect_dialogue(&model, &vocab, d, ckpt.config.n_max)?;
        lines.push(serde_json::to_string(&report).map_err(|e| CliError::runtime(e.to_string()))?);
    }

    match &args.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("attention.jsonl"))?;
            for line in &lines {
                writeln!(f, "{line}")?;
            }
            println!("inspected {} dialogues -> {}", lines.len(), dir.display());
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

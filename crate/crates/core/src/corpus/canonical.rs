use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{CorpusSplit, Dialogue, LabelSet, SplitName};

/// Write dialogues as line-delimited JSON, one record per dialogue.
pub fn write_canonical(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for d in dialogues {
        let line = serde_json::to_string(d)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

/// Read a canonical line-delimited file back into dialogues. Records without
/// a `da_labels` field are admitted (evaluation-only use).
pub fn read_canonical(path: &Path) -> Result<Vec<Dialogue>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Dialogue = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        d.validate()?;
        out.push(d);
    }
    Ok(out)
}

/// Directory layout of a prepared corpus: `train.jsonl`, `validation.jsonl`,
/// `test.jsonl`, and `labels.txt` (one label name per line).
#[derive(Clone, Debug)]
pub struct CorpusDir {
    pub root: PathBuf,
}

impl CorpusDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CorpusDir { root: root.into() }
    }

    pub fn split_path(&self, name: SplitName) -> PathBuf {
        self.root.join(format!("{name}.jsonl"))
    }

    pub fn labels_path(&self) -> PathBuf {
        self.root.join("labels.txt")
    }

    pub fn write_split(&self, split: &CorpusSplit) -> Result<()> {
        write_canonical(&self.split_path(split.name), &split.dialogues)
    }

    pub fn read_split(&self, name: SplitName) -> Result<CorpusSplit> {
        Ok(CorpusSplit {
            name,
            dialogues: read_canonical(&self.split_path(name))?,
        })
    }

    pub fn write_labels(&self, labels: &LabelSet) -> Result<()> {
        let mut f = std::fs::File::create(self.labels_path())?;
        for name in &labels.names {
            writeln!(f, "{name}")?;
        }
        Ok(())
    }

    /// Read the label set, defaulting to the DailyDialog set when the file is
    /// absent.
    pub fn read_labels(&self) -> Result<LabelSet> {
        let path = self.labels_path();
        if !path.exists() {
            return Ok(LabelSet::dailydialog());
        }
        let f = std::fs::File::open(&path)?;
        let names: Vec<String> = BufReader::new(f)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect();
        if names.is_empty() {
            return Err(Error::Data(format!("label file {} is empty", path.display())));
        }
        Ok(LabelSet { names })
    }
}

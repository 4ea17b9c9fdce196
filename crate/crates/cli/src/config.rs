use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Error with the exit code it maps to: 2 for usage/configuration problems,
/// 1 for runtime failures.
#[derive(Debug)]
pub struct CliError {
    message: String,
    usage: bool,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: true,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            usage: false,
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.usage {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl From<dicoh::Error> for CliError {
    fn from(err: dicoh::Error) -> Self {
        match err {
            dicoh::Error::Config(_) => CliError::usage(err.to_string()),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::runtime(err.to_string())
    }
}

/// Key-value configuration file (TOML). Every key is optional; explicit
/// command-line flags override file values. Unknown keys are errors.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub dropout_p: Option<f64>,
    pub n_max: Option<usize>,
    pub emb_dim: Option<usize>,
    pub utt_hidden: Option<usize>,
    pub dial_hidden: Option<usize>,
    pub per_dialogue: Option<usize>,
    pub regime: Option<String>,
    pub embeddings: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub data_root: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Directory the command writes into: `--out` verbatim, or a fresh
/// `<data-root>/runs/<command>-<timestamp>-seed<seed>` directory.
pub fn resolve_out_dir(
    out: Option<PathBuf>,
    config: &ConfigFile,
    command: &str,
    seed: u64,
) -> Result<PathBuf, CliError> {
    let dir = match out {
        Some(dir) => dir,
        None => {
            let root = config
                .data_root
                .clone()
                .or_else(|| std::env::var_os(crate::DATA_ROOT_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
            root.join("runs").join(format!("{command}-{stamp}-seed{seed}"))
        }
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Write the fully resolved configuration next to the outputs.
pub fn write_resolved<T: Serialize>(dir: &Path, resolved: &T) -> Result<(), CliError> {
    let text = toml::to_string_pretty(resolved)
        .map_err(|e| CliError::runtime(format!("cannot serialize resolved config: {e}")))?;
    std::fs::write(dir.join("resolved.toml"), text)?;
    Ok(())
}

/// Fail with exit code 2 when an input path is missing.
pub fn require_exists(path: &Path) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("path does not exist: {}", path.display())));
    }
    Ok(())
}

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{ParamStore, SeededRng, Tensor};
use crate::{Real, Tensor as RealTensor};

use super::vocab::{Vocabulary, PAD_INDEX};

/// Width pretrained vector files must have.
pub const PRETRAINED_DIM: usize = 300;

/// Word embedding table, one row per vocabulary entry. The PAD row is all
/// zero and its gradient is discarded during training, so it stays zero.
#[derive(Clone, Debug)]
pub struct EmbeddingMatrix {
    pub weights: RealTensor,
    pub dim: usize,
    pub trainable: bool,
    /// Fraction of vocabulary tokens found in the pretrained file; 0 for
    /// randomly initialized tables.
    pub coverage: f64,
}

impl EmbeddingMatrix {
    /// Random initialization, uniform in [-0.05, 0.05], PAD row zeroed.
    pub fn random(vocab: &Vocabulary, dim: usize, trainable: bool, rng: &SeededRng) -> Self {
        let mut weights = Tensor::zeros(vec![vocab.len(), dim]);
        for (i, token) in vocab.tokens().iter().enumerate() {
            if i == PAD_INDEX {
                continue;
            }
            let mut row_rng = rng.derive("oov").derive(token);
            for v in weights.row_mut(i) {
                *v = row_rng.uniform(-0.05, 0.05);
            }
        }
        EmbeddingMatrix {
            weights,
            dim,
            trainable,
            coverage: 0.0,
        }
    }
}

/// Token vectors straight from a pretrained file, keyed by token. This is
/// what the CoSim baseline consumes; model training goes through
/// [`load_pretrained`] instead.
#[derive(Clone, Debug)]
pub struct PretrainedVectors {
    pub vectors: HashMap<String, Vec<Real>>,
    pub dim: usize,
}

impl PretrainedVectors {
    pub fn get(&self, token: &str) -> Option<&[Real]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

/// Parse a whitespace-separated pretrained vector file: one token followed by
/// 300 decimals per line.
pub fn read_pretrained_file(path: &Path) -> Result<PretrainedVectors> {
    let f = std::fs::File::open(path)?;
    let reader = BufReader::new(f);
    let mut vectors = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts
            .next()
            .expect("non-empty line has a first field")
            .to_string();
        let values: Vec<Real> = parts
            .map(|p| {
                p.parse::<Real>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    message: format!("invalid float '{p}'"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != PRETRAINED_DIM {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!(
                    "expected {PRETRAINED_DIM} values after the token, found {}",
                    values.len()
                ),
            });
        }
        vectors.insert(token, values);
    }
    Ok(PretrainedVectors {
        vectors,
        dim: PRETRAINED_DIM,
    })
}

/// Build the embedding table for `vocab` from a pretrained vector file.
///
/// Rows for tokens present in the file are copied verbatim; missing tokens
/// get a seeded uniform row in [-0.05, 0.05]; the PAD row is zeroed. The
/// returned coverage is the fraction of non-special vocabulary tokens found
/// in the file.
pub fn load_pretrained(
    path: &Path,
    vocab: &Vocabulary,
    trainable: bool,
    rng: &SeededRng,
) -> Result<EmbeddingMatrix> {
    let pretrained = read_pretrained_file(path)?;
    let dim = pretrained.dim;
    let mut weights = Tensor::zeros(vec![vocab.len(), dim]);
    let mut hits = 0usize;
    let mut total = 0usize;
    for (i, token) in vocab.tokens().iter().enumerate() {
        if i == PAD_INDEX {
            continue;
        }
        total += 1;
        match pretrained.get(token) {
            Some(row) => {
                hits += 1;
                weights.row_mut(i).copy_from_slice(row);
            }
            None => {
                let mut row_rng = rng.derive("oov").derive(token);
                for v in weights.row_mut(i) {
                    *v = row_rng.uniform(-0.05, 0.05);
                }
            }
        }
    }
    Ok(EmbeddingMatrix {
        weights,
        dim,
        trainable,
        coverage: if total == 0 { 0.0 } else { hits as f64 / total as f64 },
    })
}

impl EmbeddingMatrix {
    /// Register the table as a parameter named `embedding`.
    pub fn register(self, store: &mut ParamStore<Real>) -> crate::nn::ParamId {
        store.add("embedding", self.weights, self.trainable)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_vectors(path: &Path, entries: &[(&str, f64)]) {
        let mut f = std::fs::File::create(path).unwrap();
        for (token, base) in entries {
            let values: Vec<String> = (0..PRETRAINED_DIM)
                .map(|k| format!("{}", base + k as f64 * 0.001))
                .collect();
            writeln!(f, "{token} {}", values.join(" ")).unwrap();
        }
    }

    #[test]
    fn full_coverage_copies_rows_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        write_vectors(&path, &[("alpha", 1.0), ("beta", 2.0), ("gamma", 3.0)]);
        let vocab = Vocabulary::from_tokens(["alpha", "beta", "gamma"]);
        let rng = SeededRng::new(5);
        let emb = load_pretrained(&path, &vocab, true, &rng).unwrap();
        // UNK is not in the file, so coverage counts 3 of 4 non-PAD tokens.
        assert!((emb.coverage - 0.75).abs() < 1e-12);
        let idx = vocab.index_of("beta");
        assert_eq!(emb.weights.row(idx)[0], 2.0);
        assert_eq!(emb.weights.row(idx)[1], 2.001);
    }

    #[test]
    fn missing_tokens_get_seeded_uniform_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        write_vectors(&path, &[("alpha", 1.0)]);
        let vocab = Vocabulary::from_tokens(["alpha", "missing"]);
        let rng = SeededRng::new(5);
        let a = load_pretrained(&path, &vocab, true, &rng).unwrap();
        let b = load_pretrained(&path, &vocab, true, &rng).unwrap();
        let idx = vocab.index_of("missing");
        assert_eq!(a.weights.row(idx), b.weights.row(idx));
        assert!(a.weights.row(idx).iter().all(|v| v.abs() <= 0.05));
        assert!(a.weights.row(idx).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn pad_row_is_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        write_vectors(&path, &[("alpha", 1.0)]);
        let vocab = Vocabulary::from_tokens(["alpha"]);
        let rng = SeededRng::new(5);
        let emb = load_pretrained(&path, &vocab, true, &rng).unwrap();
        assert!(emb.weights.row(PAD_INDEX).iter().all(|&v| v == 0.0));
        let random = EmbeddingMatrix::random(&vocab, 16, true, &rng);
        assert!(random.weights.row(PAD_INDEX).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        let good: Vec<String> = (0..PRETRAINED_DIM).map(|k| format!("{k}")).collect();
        writeln!(f, "alpha {}", good.join(" ")).unwrap();
        writeln!(f, "beta 1.0 2.0").unwrap();
        drop(f);
        let err = read_pretrained_file(&path).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        let mut fields: Vec<String> = (0..PRETRAINED_DIM).map(|k| format!("{k}")).collect();
        fields[10] = "oops".into();
        writeln!(f, "alpha {}", fields.join(" ")).unwrap();
        drop(f);
        assert!(matches!(read_pretrained_file(&path), Err(Error::Parse { .. })));
    }
}

//! Phrase representations.
//!
//! Two encodings are supported: a 62-dim two-hot [`BinaryPhraseVector`], and
//! 768-dim unit sentence embeddings supplied by an [`EmbeddingProvider`].
//! [`MvvMatcher`] maps arbitrary text (or a decoded embedding) onto the
//! closest vocabulary phrase by cosine similarity, with a rejection threshold.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::vocab::{phrase_to_text, required_texts, Direction, Modifier, Phrase};

/// Width of each one-hot block.
pub const BLOCK: usize = 31;
/// Length of a binary phrase vector.
pub const BINARY_DIM: usize = 2 * BLOCK;
/// Slot index of the empty word inside a block.
pub const EMPTY_SLOT: usize = 30;
/// Sentence-embedding width.
pub const EMBED_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum LangError {
    #[error("expected a vector of length {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value in phrase vector")]
    NonFinite,
    #[error("cannot normalize a zero embedding")]
    ZeroVector,
    #[error("text {0:?} not found in embedding table")]
    UnknownText(String),
    #[error("reading embedding table {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding table line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("embedding table is missing {} required texts (first: {:?})", .0.len(), .0.first())]
    MissingEntries(Vec<String>),
}

/// Two-hot encoding: `[modifier block (31) | direction block (31)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryPhraseVector {
    modifier_slot: usize,
    direction_slot: usize,
}

impl BinaryPhraseVector {
    /// Positions of the two set bits.
    pub fn hot_indices(&self) -> (usize, usize) {
        (self.modifier_slot, BLOCK + self.direction_slot)
    }

    pub fn bits(&self) -> [u8; BINARY_DIM] {
        let mut out = [0u8; BINARY_DIM];
        let (m, d) = self.hot_indices();
        out[m] = 1;
        out[d] = 1;
        out
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits().iter().map(|&b| b as f64).collect()
    }
}

pub fn encode_binary(p: &Phrase) -> BinaryPhraseVector {
    BinaryPhraseVector {
        modifier_slot: p.modifier.map_or(EMPTY_SLOT, Modifier::index),
        direction_slot: p.direction.map_or(EMPTY_SLOT, Direction::index),
    }
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Argmax decoding per block. Reserved slots decode to the empty word.
pub fn decode_binary(v: &[f64]) -> Result<Phrase, LangError> {
    if v.len() != BINARY_DIM {
        return Err(LangError::Length { expected: BINARY_DIM, got: v.len() });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LangError::NonFinite);
    }
    let m = argmax(&v[..BLOCK]);
    let d = argmax(&v[BLOCK..]);
    Ok(Phrase::new(Modifier::from_index(m), Direction::from_index(d)))
}

/// A unit-norm 768-dim sentence embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Scale `v` to unit length.
    pub fn normalized(v: Vec<f64>) -> Result<Self, LangError> {
        if v.len() != EMBED_DIM {
            return Err(LangError::Length { expected: EMBED_DIM, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(LangError::NonFinite);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(LangError::ZeroVector);
        }
        Ok(Self(v.into_iter().map(|x| x / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Cosine similarity, clamped to `[-1, 1]`. Zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// How to reconstruct a provider; recorded in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderSpec {
    Hashing { seed: u64 },
    Table { path: String },
}

impl ProviderSpec {
    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, LangError> {
        Ok(match self {
            ProviderSpec::Hashing { seed } => Arc::new(HashingProvider::new(*seed)),
            ProviderSpec::Table { path } => Arc::new(TableProvider::from_path(path)?),
        })
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Hashing { seed } => write!(f, "hashing:{seed}"),
            ProviderSpec::Table { path } => write!(f, "table:{path}"),
        }
    }
}

/// Source of sentence embeddings. Implementations are deterministic and
/// always return unit vectors.
pub trait EmbeddingProvider: Send + Sync + fmt::Debug {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, LangError>;

    fn spec(&self) -> ProviderSpec;
}

/// Pseudo-random unit vectors keyed by `(seed, text)`. Stands in for a
/// pretrained sentence model: identical texts agree, distinct texts are close
/// to orthogonal.
#[derive(Debug, Clone, Copy)]
pub struct HashingProvider {
    seed: u64,
}

impl HashingProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl EmbeddingProvider for HashingProvider {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, LangError> {
        let mut hasher = Sha256::new();
        hasher.update(b"forcelang-hashing-provider");
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(key);
        let v: Vec<f64> = (0..EMBED_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
        EmbeddingVector::normalized(v)
    }

    fn spec(&self) -> ProviderSpec {
        ProviderSpec::Hashing { seed: self.seed }
    }
}

/// Exact-match lookup over an exported embedding table.
///
/// File format: UTF-8, first line `dim<TAB>768`, then one row per text:
/// `<text><TAB>v0<TAB>...<TAB>v767`. Rows are unit-normalized on load.
#[derive(Debug, Clone)]
pub struct TableProvider {
    path: String,
    rows: HashMap<String, EmbeddingVector>,
}

impl TableProvider {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LangError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| LangError::Io { path: path.to_path_buf(), source })?;
        let rows = parse_table(BufReader::new(file)).map_err(|e| match e {
            LangError::Io { source, .. } => LangError::Io { path: path.to_path_buf(), source },
            other => other,
        })?;
        let missing: Vec<String> =
            required_texts().into_iter().filter(|t| !rows.contains_key(t)).collect();
        if !missing.is_empty() {
            return Err(LangError::MissingEntries(missing));
        }
        Ok(Self { path: path.display().to_string(), rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl EmbeddingProvider for TableProvider {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, LangError> {
        self.rows.get(text).cloned().ok_or_else(|| LangError::UnknownText(text.to_string()))
    }

    fn spec(&self) -> ProviderSpec {
        ProviderSpec::Table { path: self.path.clone() }
    }
}

/// Parse the TAB-delimited table format. Does not check for required texts.
pub fn parse_table(reader: impl BufRead) -> Result<HashMap<String, EmbeddingVector>, LangError> {
    let io_err = |source| LangError::Io { path: PathBuf::new(), source };
    let mut lines = reader.lines();
    let header = lines.next().ok_or(LangError::Malformed { line: 1, reason: "empty file".into() })?;
    let header = header.map_err(io_err)?;
    let dim: usize = match header.split('\t').collect::<Vec<_>>().as_slice() {
        ["dim", d] => d.trim().parse().map_err(|_| LangError::Malformed {
            line: 1,
            reason: format!("bad dimension {d:?}"),
        })?,
        _ => return Err(LangError::Malformed { line: 1, reason: "expected `dim<TAB>768` header".into() }),
    };
    if dim != EMBED_DIM {
        return Err(LangError::Malformed { line: 1, reason: format!("dimension {dim}, expected {EMBED_DIM}") });
    }
    let mut rows = HashMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(io_err)?;
        let mut fields = line.split('\t');
        let text = fields.next().unwrap_or_default().to_string();
        let values: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| LangError::Malformed { line: line_no, reason: format!("bad number: {e}") })?;
        if values.len() != EMBED_DIM {
            return Err(LangError::Malformed {
                line: line_no,
                reason: format!("{} values, expected {EMBED_DIM}", values.len()),
            });
        }
        let v = EmbeddingVector::normalized(values)
            .map_err(|e| LangError::Malformed { line: line_no, reason: e.to_string() })?;
        if rows.insert(text.clone(), v).is_some() {
            return Err(LangError::Malformed { line: line_no, reason: format!("duplicate text {text:?}") });
        }
    }
    Ok(rows)
}

/// Write rows in the table format. `precision` fixes the number of decimals;
/// `None` writes the shortest exact representation.
pub fn write_table<'a>(
    mut w: impl Write,
    rows: impl IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
    precision: Option<usize>,
) -> std::io::Result<()> {
    writeln!(w, "dim\t{EMBED_DIM}")?;
    for (text, v) in rows {
        w.write_all(text.as_bytes())?;
        for x in v.as_slice() {
            match precision {
                Some(p) => write!(w, "\t{x:.p$}")?,
                None => write!(w, "\t{x}")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Result of matching against the vocabulary phrases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvvMatch {
    pub phrase: Phrase,
    /// Best cosine similarity, whether or not it cleared the threshold.
    pub similarity: f64,
    /// The best candidate before thresholding.
    pub best: Phrase,
}

/// The 247 phrase renderings, embedded once.
#[derive(Debug, Clone)]
pub struct MvvMatcher {
    candidates: Vec<(Phrase, String, EmbeddingVector)>,
}

impl MvvMatcher {
    pub fn new(provider: &dyn EmbeddingProvider) -> Result<Self, LangError> {
        let candidates = Phrase::all()
            .into_iter()
            .map(|p| {
                let text = phrase_to_text(&p);
                provider.embed(&text).map(|e| (p, text, e))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { candidates })
    }

    /// Closest phrase to an arbitrary vector; the empty phrase unless the
    /// best similarity exceeds `sigma`. Ties keep the earlier candidate.
    pub fn match_vector(&self, v: &[f64], sigma: f64) -> MvvMatch {
        let mut best = 0;
        let mut best_sim = f64::NEG_INFINITY;
        for (i, (_, _, e)) in self.candidates.iter().enumerate() {
            let s = cosine(e.as_slice(), v);
            if s > best_sim {
                best = i;
                best_sim = s;
            }
        }
        self.finish(best, best_sim, sigma)
    }

    /// Match free text. A text equal to a phrase rendering matches that phrase
    /// with similarity exactly 1.
    pub fn match_text(
        &self,
        text: &str,
        provider: &dyn EmbeddingProvider,
        sigma: f64,
    ) -> Result<MvvMatch, LangError> {
        if let Some(i) = self.candidates.iter().position(|(_, t, _)| t == text) {
            return Ok(self.finish(i, 1.0, sigma));
        }
        let e = provider.embed(text)?;
        Ok(self.match_vector(e.as_slice(), sigma))
    }

    fn finish(&self, best: usize, similarity: f64, sigma: f64) -> MvvMatch {
        let best = self.candidates[best].0;
        let phrase = if similarity > sigma { best } else { Phrase::EMPTY };
        MvvMatch { phrase, similarity, best }
    }
}

/// One-shot convenience over [`MvvMatcher`].
pub fn nearest_mvv(text: &str, provider: &dyn EmbeddingProvider, sigma: f64) -> Result<Phrase, LangError> {
    Ok(MvvMatcher::new(provider)?.match_text(text, provider, sigma)?.phrase)
}

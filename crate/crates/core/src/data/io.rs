//! Line-delimited JSON dataset files, one sample per line.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PairedSample, Provenance};
use crate::profile::ForceProfile;
use crate::vocab::Phrase;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("split of {n} samples with test fraction {fraction} leaves one side empty")]
    DegenerateSplit { n: usize, fraction: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    participant: u32,
    provenance: Provenance,
    modifier: String,
    direction: String,
    duration_s: f64,
    timestamps: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
}

impl From<&PairedSample> for Record {
    fn from(s: &PairedSample) -> Self {
        Record {
            id: s.id.clone(),
            participant: s.participant,
            provenance: s.provenance,
            modifier: s.phrase.modifier_token().to_string(),
            direction: s.phrase.direction_token().to_string(),
            duration_s: s.profile.duration(),
            timestamps: s.profile.timestamps().to_vec(),
            fx: s.profile.fx().to_vec(),
            fy: s.profile.fy().to_vec(),
            fz: s.profile.fz().to_vec(),
        }
    }
}

impl Record {
    fn into_sample(self, line: usize) -> Result<PairedSample, DataError> {
        let bad = |reason: String| DataError::Malformed { line, reason };
        let phrase = Phrase::from_tokens(&self.modifier, &self.direction).map_err(|e| bad(e.to_string()))?;
        let profile = ForceProfile::new(self.timestamps, self.fx, self.fy, self.fz).map_err(|e| bad(e.to_string()))?;
        if (profile.duration() - self.duration_s).abs() > 1e-9 {
            return Err(bad(format!(
                "duration_s {} disagrees with last timestamp {}",
                self.duration_s,
                profile.duration()
            )));
        }
        Ok(PairedSample {
            id: self.id,
            participant: self.participant,
            provenance: self.provenance,
            phrase,
            profile,
        })
    }
}

/// Write samples to any writer, one JSON object per line.
pub fn write_dataset_to(mut w: impl Write, samples: &[PairedSample]) -> std::io::Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, &Record::from(s))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_dataset(samples: &[PairedSample], path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    write_dataset_to(BufWriter::new(file), samples).map_err(io)
}

/// Read a dataset file. Blank lines are skipped; an empty file is an empty
/// corpus.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<PairedSample>, DataError> {
    let path = path.as_ref();
    let io = |source| DataError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| DataError::Malformed { line: line_no, reason: e.to_string() })?;
        let sample = record.into_sample(line_no)?;
        if !seen.insert(sample.id.clone()) {
            return Err(DataError::DuplicateId { line: line_no, id: sample.id });
        }
        out.push(sample);
    }
    Ok(out)
}

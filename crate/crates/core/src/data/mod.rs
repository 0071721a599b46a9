//! Synthetic paired corpus, its file format, and train/test splits.

mod generate;
mod io;
mod split;

use serde::{Deserialize, Serialize};

use crate::profile::ForceProfile;
use crate::vocab::Phrase;

pub use generate::{
    generate_corpus, synthesize_description, synthesize_profile, GeneratorConfig, MagnitudeClass,
    DurationClass, ModifierBands, Participant,
};
pub use io::{read_dataset, write_dataset, write_dataset_to, DataError};
pub use split::{split_holdout_token, split_random, HoldoutSplit, HoldoutToken};

/// Which collection procedure produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    PhraseToForce,
    ForceToPhrase,
}

/// One phrase paired with one force recording.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub id: String,
    pub participant: u32,
    pub provenance: Provenance,
    pub phrase: Phrase,
    pub profile: ForceProfile,
}

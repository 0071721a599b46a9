//! Minimal viable vocabulary, phrases, and the shared coordinate frame.
//!
//! Axis convention: right = +x, forward = +y, up = +z. Compound direction
//! tokens (`forward-right`, `down-left`, ...) map to the normalized sum of
//! their component axes.
//!
//! Token order is fixed: it defines the indices of the binary phrase vector,
//! so any reordering must bump [`VOCAB_VERSION`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamp of the token ordering. Stored in checkpoints.
pub const VOCAB_VERSION: &str = "mvv-1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("unknown modifier token {0:?}")]
    UnknownModifier(String),
    #[error("unknown direction token {0:?}")]
    UnknownDirection(String),
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident, $err:ident, [$($variant:ident => $text:literal),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            /// Every token, in vocabulary order.
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Position in the vocabulary (and in its binary-vector block).
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }
        }

        impl FromStr for $name {
            type Err = VocabError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(VocabError::$err(other.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(
    /// Modifier words: variations in force magnitude and duration.
    Modifier,
    UnknownModifier,
    [
        Slightly => "slightly",
        Greatly => "greatly",
        Smoothly => "smoothly",
        Sharply => "sharply",
        Slowly => "slowly",
        Quickly => "quickly",
        Lightly => "lightly",
        Significantly => "significantly",
        Softly => "softly",
        Harshly => "harshly",
        Gradually => "gradually",
        Immediately => "immediately",
    ]
);

token_enum!(
    /// Direction words, including hyphenated compounds.
    Direction,
    UnknownDirection,
    [
        Backward => "backward",
        BackwardDown => "backward-down",
        BackwardLeft => "backward-left",
        BackwardRight => "backward-right",
        BackwardUp => "backward-up",
        Down => "down",
        DownForward => "down-forward",
        DownLeft => "down-left",
        DownRight => "down-right",
        Forward => "forward",
        ForwardLeft => "forward-left",
        ForwardRight => "forward-right",
        ForwardUp => "forward-up",
        Left => "left",
        LeftUp => "left-up",
        Right => "right",
        RightUp => "right-up",
        Up => "up",
    ]
);

pub const MODIFIER_COUNT: usize = 12;
pub const DIRECTION_COUNT: usize = 18;

/// Unit vector of a single (non-compound) direction word.
fn axis_vector(component: &str) -> Option<[f64; 3]> {
    Some(match component {
        "right" => [1.0, 0.0, 0.0],
        "left" => [-1.0, 0.0, 0.0],
        "forward" => [0.0, 1.0, 0.0],
        "backward" => [0.0, -1.0, 0.0],
        "up" => [0.0, 0.0, 1.0],
        "down" => [0.0, 0.0, -1.0],
        _ => return None,
    })
}

impl Direction {
    /// The hyphen-separated single-axis words making up this token.
    pub fn components(self) -> impl Iterator<Item = &'static str> {
        self.as_str().split('-')
    }

    /// Unit vector in the shared frame.
    pub fn unit_vector(self) -> [f64; 3] {
        let mut sum = [0.0; 3];
        for c in self.components() {
            let axis = axis_vector(c).expect("direction components are axis words");
            for (s, a) in sum.iter_mut().zip(axis) {
                *s += a;
            }
        }
        let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
        sum.map(|v| v / norm)
    }

    /// The six single-axis directions.
    pub const BASIC: [Direction; 6] = [
        Direction::Left,
        Direction::Forward,
        Direction::Up,
        Direction::Right,
        Direction::Down,
        Direction::Backward,
    ];

    pub fn is_basic(self) -> bool {
        !self.as_str().contains('-')
    }

    /// Rendering used for embeddings: `down-left` becomes `down and left`.
    pub fn render(self) -> String {
        self.components().collect::<Vec<_>>().join(" and ")
    }
}

/// Look up a direction token and return its unit vector.
pub fn direction_unit_vector(token: &str) -> Result<[f64; 3], VocabError> {
    Ok(token.parse::<Direction>()?.unit_vector())
}

/// An optional modifier plus an optional direction. `None` is the empty word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "PhraseTokens", into = "PhraseTokens")]
pub struct Phrase {
    pub modifier: Option<Modifier>,
    pub direction: Option<Direction>,
}

impl Phrase {
    pub const EMPTY: Phrase = Phrase { modifier: None, direction: None };

    pub fn new(modifier: Option<Modifier>, direction: Option<Direction>) -> Self {
        Self { modifier, direction }
    }

    pub fn is_empty(&self) -> bool {
        self.modifier.is_none() && self.direction.is_none()
    }

    /// Parse from slot tokens; the empty string stands for the empty word.
    pub fn from_tokens(modifier: &str, direction: &str) -> Result<Self, VocabError> {
        let modifier = match modifier {
            "" => None,
            m => Some(m.parse()?),
        };
        let direction = match direction {
            "" => None,
            d => Some(d.parse()?),
        };
        Ok(Self { modifier, direction })
    }

    /// All 13 x 19 phrases, modifier-major, vocabulary order, empty word last
    /// in each slot.
    pub fn all() -> Vec<Phrase> {
        let modifiers = Modifier::ALL.iter().copied().map(Some).chain([None]);
        modifiers
            .flat_map(|m| {
                Direction::ALL
                    .iter()
                    .copied()
                    .map(Some)
                    .chain([None])
                    .map(move |d| Phrase::new(m, d))
            })
            .collect()
    }

    pub fn modifier_token(&self) -> &'static str {
        self.modifier.map_or("", Modifier::as_str)
    }

    pub fn direction_token(&self) -> &'static str {
        self.direction.map_or("", Direction::as_str)
    }
}

/// Serialized form: slot tokens, `""` for the empty word.
#[derive(Serialize, Deserialize)]
struct PhraseTokens {
    modifier: String,
    direction: String,
}

impl TryFrom<PhraseTokens> for Phrase {
    type Error = VocabError;

    fn try_from(t: PhraseTokens) -> Result<Self, Self::Error> {
        Phrase::from_tokens(&t.modifier, &t.direction)
    }
}

impl From<Phrase> for PhraseTokens {
    fn from(p: Phrase) -> Self {
        PhraseTokens { modifier: p.modifier_token().into(), direction: p.direction_token().into() }
    }
}

/// Canonical text: `"<modifier> <direction>"`, compounds expanded with "and",
/// empty words omitted.
pub fn phrase_to_text(p: &Phrase) -> String {
    match (p.modifier, p.direction) {
        (Some(m), Some(d)) => format!("{} {}", m, d.render()),
        (Some(m), None) => m.as_str().to_string(),
        (None, Some(d)) => d.render(),
        (None, None) => String::new(),
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&phrase_to_text(self))
    }
}

/// Every text an embedding table must contain: the 30 vocabulary words, the
/// 247 phrase renderings, and the empty text. Deduplicated, first-seen order.
pub fn required_texts() -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let words = Modifier::ALL
        .iter()
        .map(|m| m.as_str().to_string())
        .chain(Direction::ALL.iter().map(|d| d.as_str().to_string()));
    let phrases = Phrase::all().into_iter().map(|p| phrase_to_text(&p));
    for text in words.chain(phrases).chain([String::new()]) {
        if !out.contains(&text) {
            out.push(text);
        }
    }
    out
}

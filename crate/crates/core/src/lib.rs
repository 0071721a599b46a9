//! Cross-modal embedding of three-axis force profiles and short motion phrases.

pub mod data;
pub mod eval;
pub mod lang;
pub mod models;
pub mod nn;
pub mod profile;
pub mod rng;
pub mod signal;
pub mod vocab;

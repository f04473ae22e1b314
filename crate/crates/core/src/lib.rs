//! Logic-verified multilingual NLI: sample syllogistic examples, realize them
//! in language pairings, query chat models, and report accuracy matrices.

pub mod dataset;
pub mod eval;
pub mod gateway;
mod hash;
pub mod lexicon;
pub mod logic;
pub mod report;

pub use hash::{sha256_hex, short_hash};

//! Chinese toxic language toolkit: a labeled corpus model, text
//! normalization, an insult lexicon with variant generation, lexicon-driven
//! pseudo-labeling, a lexicon-enhanced classifier and evaluation metrics.

pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod metrics;
pub mod normalize;
pub mod pseudo;
pub mod synthetic;
pub mod tke;
pub mod variant;

pub use error::{Error, Result};

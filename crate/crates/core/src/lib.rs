//! Cross-platform skill equivalence learning.
//!
//! Skills from two learning platforms are embedded as vectors from problem
//! text (bag-of-words, TF-IDF, averaged word vectors), from student skill
//! sequences (skip-gram), or from both (concatenation, text-associated matrix
//! factorization). Platform-local spaces are aligned with a learned linear
//! map, and destination skills are ranked by cosine similarity.

pub mod analysis;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod pipeline;
pub mod represent;
pub mod seed;
pub mod skipgram;
pub mod space;
pub mod tamf;
pub mod translate;

pub use error::{Error, Result};
pub use space::{Alignment, EmbeddingSpace, Provenance};

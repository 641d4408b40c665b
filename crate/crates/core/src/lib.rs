//! Cross-modal recipe/image joint embedding.
//!
//! Recipes are encoded from TFIDF-weighted key-term word vectors fused with a
//! two-stage LSTM over the cooking instructions; images from a precomputed
//! feature vector fused with the word vector of their predicted category.
//! Both land in one latent space trained with a batch-hard triplet loss, an
//! adversarial modality-alignment term and category classification heads.

pub mod category;
pub mod checkpoint;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod joint;
pub mod nn;
pub mod pipeline;
pub mod tfidf;
pub mod word2vec;

pub use error::{Error, Result};

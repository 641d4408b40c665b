//! Command-line pipeline and HTTP retrieval service over msje-core models.

pub mod cli;
pub mod index;
pub mod server;

pub use index::{Hit, RetrievalIndex};
pub use server::{AppState, ImageQuery, RecipeQuery, Snapshot};

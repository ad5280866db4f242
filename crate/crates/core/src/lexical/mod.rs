//! Sparse retrieval: tokenization, BM25 over an inverted index, and RM3
//! query expansion.

mod index;
mod persist;
mod rm3;
mod tokenize;

pub use index::{Bm25Params, InvertedIndex, Posting};
pub use persist::{IndexMeta, FORMAT_VERSION};
pub use rm3::{retrieve_expanded, rm3_expand, ExpandedQuery, Rm3Params};
pub use tokenize::{is_stopword, tokenize, MAX_TOKEN_CHARS, STOPWORDS};

#[derive(Debug, thiserror::Error)]
pub enum LexicalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("relevance feedback needs at least one document")]
    EmptyFeedback,
    #[error("expanded query has no terms")]
    EmptyExpansion,
    #[error("invalid RM3 parameters: {0}")]
    InvalidRm3(String),
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

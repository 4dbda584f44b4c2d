//! Retrieval-augmented translation from Standard Bengali into regional
//! dialects, with corpus-level MT evaluation.

pub mod corpus;
pub mod embedding;
pub mod index;
pub mod distance;
pub mod retrieve;
pub mod prompt;
pub mod llm;
pub mod eval;
pub mod pipeline;

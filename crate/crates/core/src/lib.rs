//! Sense-type enrichment pipeline for ontologically annotated lexicons.

pub mod classifiers;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod lexicon;
pub mod matrix;
pub mod morph;
pub mod pipeline;
pub mod seed;
pub mod synthetic;

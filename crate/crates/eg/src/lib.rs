//! Mines a code corpus for the common, idiomatic usage patterns of a
//! queried API method and renders succinct real-code examples with the
//! shared pattern emphasized and one-off filler de-emphasized.
//!
//! The pipeline: a language adapter parses methods into simplified parse
//! trees ([`syntax`]); the corpus layer indexes them by token ([`corpus`]);
//! the miner greedily grows the most-supported context subtree around a
//! query and completes it with the best real snippet ([`miner`]); the
//! renderer slices the original source with emphasis spans ([`render`]).
//! Around that sit an evaluation kit ([`eval`]), an HTTP service
//! ([`service`]), and the `eg` command-line tool ([`cli`]).
//!
//! The `examples/` directory holds one runnable walkthrough per major
//! capability; start with `parse_tree` and `mine_patterns`.

pub mod adapters;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod miner;
pub mod render;
pub mod service;
pub mod syntax;

pub(crate) mod rng;

pub use adapters::python::PythonAdapter;
pub use adapters::{MethodSource, ParserAdapter};
pub use corpus::CorpusIndex;
pub use miner::{mine_examples, MiningConfig, MiningResult, RankedExample};
pub use render::{layout, render, HighlightedSnippet, OutputFormat};
pub use syntax::{Pattern, SimplifiedParseTree};

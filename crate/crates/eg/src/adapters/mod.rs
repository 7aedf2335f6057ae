//! Pluggable source-code adapters.
//!
//! An adapter turns method source text into simplified parse trees for one
//! language. The engine itself is language-agnostic: everything after
//! parsing operates on trees alone. Corpora can also be ingested without
//! any parser through the newline-delimited interchange format.

pub mod interchange;
pub mod python;

use crate::syntax::{SimplifiedParseTree, TreeRef};
use std::fmt;

/// One method pulled out of a repository file, with enough provenance to
/// link a rendered example back to its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSource {
    /// Repository-relative path of the file the method came from.
    pub path: String,
    /// Qualified method name, e.g. `VideoRecorder.write_metadata`.
    pub name: String,
    /// 1-based line number of the method's first line in the file.
    pub line: usize,
    /// The method's source text; all tree spans index into this.
    pub source: String,
}

/// Syntax error with a byte offset and 1-based line/column into the text
/// that failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
    pub line: usize,
    pub col: usize,
}

impl ParseError {
    pub fn at(source: &str, offset: usize, message: impl Into<String>) -> Self {
        let clamped = offset.min(source.len());
        let mut line = 1;
        let mut col = 1;
        for b in source.as_bytes()[..clamped].iter() {
            if *b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        ParseError {
            message: message.into(),
            offset: clamped,
            line,
            col,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ParseError {}

/// A per-language parser front end.
///
/// Adapters must be usable concurrently: parsing distinct methods is
/// independent and shares no mutable state.
pub trait ParserAdapter: Send + Sync {
    /// Language identifier recorded in index manifests, e.g. `"python"`.
    fn language(&self) -> &'static str;

    /// True if `text` is a keyword token (fixed word or symbol) of the
    /// language.
    fn is_keyword(&self, text: &str) -> bool;

    /// Line comment prefix, used when counting code lines and when
    /// checking that inter-token source gaps are blank.
    fn line_comment_prefix(&self) -> &'static str;

    /// Parses one method (or statement snippet) into a tree whose token
    /// stream round-trips `src.source`.
    fn parse_method(&self, src: &MethodSource) -> Result<SimplifiedParseTree, ParseError>;

    /// Parses query text as a single expression, returning the tree and a
    /// reference to the expression itself (a bare identifier comes back as
    /// a leaf reference rather than a wrapped node).
    fn parse_expression(&self, text: &str) -> Result<(SimplifiedParseTree, TreeRef), ParseError>;

    /// Extracts the outermost methods of a source file. Inner function
    /// definitions stay inside their parent's tree and do not get records
    /// of their own.
    fn extract_methods(&self, path: &str, file_source: &str) -> Vec<MethodSource>;
}

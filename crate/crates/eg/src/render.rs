//! Turns a mined example into display artifacts: the real source slice of
//! the minimal subtree with common-pattern tokens emphasized, filler
//! de-emphasized, a usage-count header, and a provenance link.
//!
//! Emphasis is span-based over the original source bytes, never
//! re-serialized from tokens, so the snippet keeps its real formatting.

use crate::corpus::CorpusIndex;
use crate::miner::RankedExample;
use crate::syntax::{Element, PVertex, Span};
use serde::Serialize;
use std::fmt;

/// A display-ready snippet: dedented code with ordered, non-overlapping
/// emphasis spans (byte offsets into `code`).
#[derive(Debug, Clone)]
pub struct HighlightedSnippet {
    pub code: String,
    pub spans: Vec<EmphasisSpan>,
    pub header: String,
    pub path: String,
    /// 1-based line of the snippet's first line in its file.
    pub line: usize,
}

/// One emphasized token. `query` marks the subset covering the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmphasisSpan {
    pub span: Span,
    pub query: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderError {
    pub message: String,
}

impl fmt::Display for RenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for RenderError {}

/// Output encodings for [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Ansi,
    Html,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ansi" => Ok(OutputFormat::Ansi),
            "html" => Ok(OutputFormat::Html),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {:?} (expected ansi, html, or json)", other)),
        }
    }
}

/// Slices the winning method's source at the minimal subtree, removes the
/// common leading indentation, and computes the emphasis spans: every
/// keyword of an embedded pattern node plus every embedded pattern leaf
/// token.
pub fn layout(ex: &RankedExample, store: &CorpusIndex) -> Result<HighlightedSnippet, RenderError> {
    let record = store.record(ex.method).ok_or_else(|| RenderError {
        message: format!("stale method id {} is not in the store", ex.method),
    })?;
    let tree = &record.tree;
    let source = tree.source();
    let snippet_span = tree.node(ex.snippet).span;

    // Pull the snippet's first line indentation in so dedenting sees the
    // true indent of every line. Skipped when the snippet starts mid-line.
    let line_start = source[..snippet_span.start]
        .rfind('\n')
        .map(|i| i + 1)
        .unwrap_or(0);
    let prefix_blank = source[line_start..snippet_span.start]
        .chars()
        .all(|c| c == ' ' || c == '\t');
    let base = if prefix_blank { line_start } else { snippet_span.start };
    let raw = &source[base..snippet_span.end];

    let (code, removals) = dedent(raw, base, !prefix_blank);
    let map_offset = |o: usize| -> usize {
        let mut removed = 0usize;
        for (start, len) in &removals {
            if *start < o {
                removed += (*len).min(o - start);
            }
        }
        o - base - removed
    };

    let mut spans: Vec<EmphasisSpan> = Vec::new();
    for (id, vertex) in ex.pattern.vertices() {
        let query = ex.pattern.in_anchor(id);
        match vertex {
            PVertex::Leaf { .. } => {
                let span = tree.span_of(ex.embedding.map[id]);
                spans.push(EmphasisSpan {
                    span: Span::new(map_offset(span.start), map_offset(span.end)),
                    query,
                });
            }
            PVertex::Node { .. } => {
                if let crate::syntax::TreeRef::Node(n) = ex.embedding.map[id] {
                    for el in &tree.node(n).elements {
                        if let Element::Keyword { span, .. } = el {
                            spans.push(EmphasisSpan {
                                span: Span::new(map_offset(span.start), map_offset(span.end)),
                                query,
                            });
                        }
                    }
                }
            }
        }
    }
    spans.sort_by_key(|s| (s.span.start, s.span.end));
    spans.dedup();
    debug_assert!(
        spans.windows(2).all(|w| w[0].span.end <= w[1].span.start),
        "emphasis spans must not overlap"
    );

    let line = record.src.line + source[..snippet_span.start].matches('\n').count();
    Ok(HighlightedSnippet {
        code,
        spans,
        header: format!(
            "This usage pattern is found in {} out of {} samples.",
            ex.support, ex.total
        ),
        path: record.src.path.clone(),
        line,
    })
}

/// Strips the longest common whitespace prefix of the non-empty lines.
/// Returns the dedented text and the removed regions as `(source_offset,
/// length)` pairs, for remapping spans. When `skip_first` is set the first
/// line starts mid-line and takes no part in dedenting.
fn dedent(raw: &str, base: usize, skip_first: bool) -> (String, Vec<(usize, usize)>) {
    let lines: Vec<&str> = raw.split_inclusive('\n').collect();
    let mut common: Option<&str> = None;
    for (i, line) in lines.iter().enumerate() {
        if skip_first && i == 0 {
            continue;
        }
        let body = line.trim_end_matches(['\n', '\r']);
        if body.trim().is_empty() {
            continue;
        }
        let indent_len = body.len() - body.trim_start_matches([' ', '\t']).len();
        let indent = &body[..indent_len];
        common = Some(match common {
            None => indent,
            Some(prev) => {
                let shared = prev
                    .bytes()
                    .zip(indent.bytes())
                    .take_while(|(a, b)| a == b)
                    .count();
                &prev[..shared]
            }
        });
    }
    let common_len = common.map(str::len).unwrap_or(0);
    if common_len == 0 {
        return (raw.to_string(), Vec::new());
    }
    let mut out = String::with_capacity(raw.len());
    let mut removals = Vec::new();
    let mut offset = 0usize;
    for (i, line) in lines.iter().enumerate() {
        if skip_first && i == 0 {
            out.push_str(line);
        } else {
            let body = line.trim_end_matches(['\n', '\r']);
            let indent_len = body.len() - body.trim_start_matches([' ', '\t']).len();
            let cut = indent_len.min(common_len);
            if cut > 0 {
                removals.push((base + offset, cut));
            }
            out.push_str(&line[cut..]);
        }
        offset += line.len();
    }
    (out, removals)
}

/// Renders one laid-out example in the requested encoding. JSON output is
/// a single example object of the result schema; use
/// [`render_results_json`] for a full query response.
pub fn render(
    ex: &RankedExample,
    hs: &HighlightedSnippet,
    format: OutputFormat,
) -> Vec<u8> {
    match format {
        OutputFormat::Ansi => render_ansi(hs).into_bytes(),
        OutputFormat::Html => render_html(hs).into_bytes(),
        OutputFormat::Json => {
            serde_json::to_vec(&json_example(ex, hs)).expect("serializing to memory cannot fail")
        }
    }
}

const RESET: &str = "\x1b[0m";
const BOLD: &str = "\x1b[1m";
const DIM: &str = "\x1b[2m";
const QUERY: &str = "\x1b[1;36m";

fn render_ansi(hs: &HighlightedSnippet) -> String {
    let mut out = String::new();
    out.push_str(&format!("{}{}{}\n", DIM, hs.header, RESET));
    out.push_str(&format!("{}{}#L{}{}\n", DIM, hs.path, hs.line, RESET));
    for (text, kind) in segments(hs) {
        match kind {
            SegmentKind::Filler => out.push_str(&format!("{}{}{}", DIM, text, RESET)),
            SegmentKind::Common => out.push_str(&format!("{}{}{}", BOLD, text, RESET)),
            SegmentKind::Query => out.push_str(&format!("{}{}{}", QUERY, text, RESET)),
        }
    }
    out.push('\n');
    out
}

fn render_html(hs: &HighlightedSnippet) -> String {
    let mut out = String::new();
    out.push_str("<div class=\"eg-example\">\n");
    out.push_str(&format!("<p class=\"eg-header\">{}</p>\n", escape_html(&hs.header)));
    out.push_str(&format!(
        "<p class=\"eg-link\"><a href=\"{}#L{}\">{}:{}</a></p>\n",
        escape_html(&hs.path),
        hs.line,
        escape_html(&hs.path),
        hs.line
    ));
    out.push_str("<pre class=\"eg-code\">");
    for (text, kind) in segments(hs) {
        let class = match kind {
            SegmentKind::Filler => "eg-filler",
            SegmentKind::Common => "eg-common",
            SegmentKind::Query => "eg-query",
        };
        out.push_str(&format!("<span class=\"{}\">{}</span>", class, escape_html(text)));
    }
    out.push_str("</pre>\n</div>\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SegmentKind {
    Filler,
    Common,
    Query,
}

/// Splits the code into alternating filler and emphasized segments, in
/// order; concatenating the segments reproduces the code exactly.
fn segments(hs: &HighlightedSnippet) -> Vec<(&str, SegmentKind)> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    for es in &hs.spans {
        if es.span.start > cursor {
            out.push((&hs.code[cursor..es.span.start], SegmentKind::Filler));
        }
        let kind = if es.query { SegmentKind::Query } else { SegmentKind::Common };
        out.push((&hs.code[es.span.start..es.span.end], kind));
        cursor = es.span.end;
    }
    if cursor < hs.code.len() {
        out.push((&hs.code[cursor..], SegmentKind::Filler));
    }
    out.retain(|(text, _)| !text.is_empty());
    out
}

fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Serialize)]
struct JsonResult<'a> {
    query: &'a str,
    total: usize,
    examples: Vec<JsonExample<'a>>,
}

#[derive(Serialize)]
struct JsonExample<'a> {
    support: usize,
    score: usize,
    path: &'a str,
    line: usize,
    code: &'a str,
    spans: Vec<JsonSpan>,
}

#[derive(Serialize)]
struct JsonSpan {
    s: usize,
    e: usize,
    kind: &'static str,
}

fn json_example<'a>(ex: &RankedExample, hs: &'a HighlightedSnippet) -> JsonExample<'a> {
    JsonExample {
        support: ex.support,
        score: ex.score,
        path: &hs.path,
        line: hs.line,
        code: &hs.code,
        spans: hs
            .spans
            .iter()
            .map(|es| JsonSpan {
                s: es.span.start,
                e: es.span.end,
                kind: if es.query { "query" } else { "common" },
            })
            .collect(),
    }
}

/// The machine-readable result schema for a whole query: byte offsets
/// index into each example's `code`.
pub fn render_results_json(
    query: &str,
    total: usize,
    examples: &[(&RankedExample, &HighlightedSnippet)],
) -> String {
    let result = JsonResult {
        query,
        total,
        examples: examples.iter().map(|(ex, hs)| json_example(ex, hs)).collect(),
    };
    serde_json::to_string(&result).expect("serializing to memory cannot fail")
}

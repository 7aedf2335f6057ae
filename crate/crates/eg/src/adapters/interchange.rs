//! Tree interchange format: newline-delimited JSON, one method per line.
//!
//! Record schema:
//!
//! ```text
//! {"path": str, "name": str, "line": int, "source": str, "tree": NODE}
//! NODE = {"k":"n","s":[start,end],"e":[ELEM...]}
//! ELEM = {"k":"kw","v":str} | {"k":"t","v":str,"s":[start,end]} | NODE
//! ```
//!
//! Spans are byte offsets into `source`. Keyword elements carry no span on
//! the wire; on load their spans are recovered by scanning the source left
//! to right between the positioned elements, which is exact because tokens
//! appear in source order with only whitespace and comments between them.
//!
//! Files may be gzip-compressed, detected by a `.gz` extension.

use super::MethodSource;
use crate::syntax::{Element, SimplifiedParseTree, Span, Token, TokenKind};
use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::Serialize;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Serialize)]
struct WireRecord {
    path: String,
    name: String,
    line: usize,
    source: String,
    tree: WireNode,
}

#[derive(Debug, Serialize)]
struct WireNode {
    k: NodeTag,
    s: (usize, usize),
    e: Vec<WireElem>,
}

#[derive(Debug, Serialize)]
enum NodeTag {
    #[serde(rename = "n")]
    Node,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
enum WireElem {
    Keyword {
        k: KwTag,
        v: String,
    },
    Token {
        k: TokTag,
        v: String,
        s: (usize, usize),
    },
    Node(WireNode),
}

#[derive(Debug, Serialize)]
enum KwTag {
    #[serde(rename = "kw")]
    Kw,
}

#[derive(Debug, Serialize)]
enum TokTag {
    #[serde(rename = "t")]
    T,
}

/// Why a record was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterchangeError {
    /// 0-based record index (line number in the stream).
    pub record: usize,
    pub reason: String,
}

impl fmt::Display for InterchangeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}: {}", self.record, self.reason)
    }
}

impl std::error::Error for InterchangeError {}

/// Successfully loaded records plus the diagnostics for skipped ones.
pub type LoadOutcome = (Vec<(MethodSource, SimplifiedParseTree)>, Vec<InterchangeError>);

/// Whether a malformed record aborts the load or is skipped with a
/// diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IngestMode {
    Strict,
    #[default]
    Lenient,
}

/// Parses interchange bytes. In lenient mode malformed records become
/// diagnostics and the rest load; in strict mode the first malformed
/// record fails the whole call.
pub fn load_interchange(bytes: &[u8], mode: IngestMode) -> Result<LoadOutcome, InterchangeError> {
    let text = std::str::from_utf8(bytes).map_err(|e| InterchangeError {
        record: 0,
        reason: format!("stream is not UTF-8: {}", e),
    })?;
    let mut out = Vec::new();
    let mut diagnostics = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match load_record(idx, line) {
            Ok(pair) => out.push(pair),
            Err(err) => match mode {
                IngestMode::Strict => return Err(err),
                IngestMode::Lenient => diagnostics.push(err),
            },
        }
    }
    Ok((out, diagnostics))
}

fn load_record(
    idx: usize,
    line: &str,
) -> Result<(MethodSource, SimplifiedParseTree), InterchangeError> {
    let fail = |reason: String| InterchangeError { record: idx, reason };
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
    let record = value
        .as_object()
        .ok_or_else(|| fail("record is not a JSON object".into()))?;
    let field = |name: &str| {
        record
            .get(name)
            .ok_or_else(|| fail(format!("record missing field {:?}", name)))
    };
    let str_field = |name: &str| {
        field(name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| fail(format!("field {:?} must be a string", name)))
    };
    let path = str_field("path")?;
    let name = str_field("name")?;
    let source = str_field("source")?;
    let line_no = field("line")?
        .as_u64()
        .ok_or_else(|| fail("field \"line\" must be an integer".into()))?
        as usize;
    if path.is_empty() {
        return Err(fail("field \"path\" must be non-empty".into()));
    }
    if source.is_empty() {
        return Err(fail("field \"source\" must be non-empty".into()));
    }
    let mut nodes = Vec::new();
    let mut cursor = 0usize;
    let root = lower_node(field("tree")?, &source, &mut nodes, &mut cursor)
        .map_err(&fail)?;
    let tree = SimplifiedParseTree::from_parts(nodes, root, source.clone());
    let violations = tree.validate();
    if let Some(v) = violations.first() {
        return Err(fail(format!("invalid tree: {}", v)));
    }
    let src = MethodSource {
        path,
        name,
        line: line_no,
        source,
    };
    Ok((src, tree))
}

fn span_field(value: &serde_json::Value, owner: &str) -> Result<(usize, usize), String> {
    let s = value
        .get("s")
        .ok_or_else(|| format!("{} missing span field \"s\"", owner))?;
    let pair = s
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| format!("field \"s\" of {} must be [start, end]", owner))?;
    let start = pair[0].as_u64().ok_or_else(|| format!("{} span start must be an integer", owner))?;
    let end = pair[1].as_u64().ok_or_else(|| format!("{} span end must be an integer", owner))?;
    Ok((start as usize, end as usize))
}

/// Recursively lowers a wire node, recovering keyword spans with a left-to-
/// right scan: `cursor` always sits at the end of the previous token.
fn lower_node(
    wire: &serde_json::Value,
    source: &str,
    nodes: &mut Vec<(Vec<Element>, Span)>,
    cursor: &mut usize,
) -> Result<usize, String> {
    let kind = wire
        .get("k")
        .and_then(|k| k.as_str())
        .ok_or_else(|| "node missing field \"k\"".to_string())?;
    if kind != "n" {
        return Err(format!("expected a node (\"k\":\"n\"), found \"k\":{:?}", kind));
    }
    let (start, end) = span_field(wire, "node")?;
    let elems = wire
        .get("e")
        .and_then(|e| e.as_array())
        .ok_or_else(|| "node missing element list \"e\"".to_string())?;
    let mut elements = Vec::with_capacity(elems.len());
    for elem in elems {
        let kind = elem
            .get("k")
            .and_then(|k| k.as_str())
            .ok_or_else(|| "element missing field \"k\"".to_string())?;
        match kind {
            "kw" => {
                let text = elem
                    .get("v")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| "keyword element missing field \"v\"".to_string())?;
                let at = scan_for_token(source, *cursor, text).ok_or_else(|| {
                    format!("keyword {:?} not found after offset {}", text, cursor)
                })?;
                *cursor = at + text.len();
                elements.push(Element::Keyword {
                    text: text.to_string(),
                    span: Span::new(at, at + text.len()),
                });
            }
            "t" => {
                let text = elem
                    .get("v")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| "token element missing field \"v\"".to_string())?;
                let (s, e) = span_field(elem, "token element")?;
                *cursor = e;
                elements.push(Element::Leaf(Token {
                    kind: TokenKind::NonKeyword,
                    text: text.to_string(),
                    span: Span::new(s, e),
                }));
            }
            "n" => {
                let id = lower_node(elem, source, nodes, cursor)?;
                elements.push(Element::Child(id));
            }
            other => return Err(format!("unknown element kind {:?}", other)),
        }
    }
    nodes.push((elements, Span::new(start, end)));
    Ok(nodes.len() - 1)
}

/// Finds where `text` begins at or after `from`, skipping whitespace,
/// backslash continuations, and `#` comments. Falls back to a plain search
/// if the gap holds something unexpected.
fn scan_for_token(source: &str, from: usize, text: &str) -> Option<usize> {
    let bytes = source.as_bytes();
    let mut i = from;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' | b'\n' | b'\r' | b'\\' | b'\x0c' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            _ => break,
        }
    }
    if source[i.min(source.len())..].starts_with(text) {
        return Some(i);
    }
    source[from.min(source.len())..]
        .find(text)
        .map(|off| from + off)
}

fn raise_node(
    tree: &SimplifiedParseTree,
    node: crate::syntax::NodeId,
) -> WireNode {
    let n = tree.node(node);
    let elements = n
        .elements
        .iter()
        .map(|el| match el {
            Element::Keyword { text, .. } => WireElem::Keyword {
                k: KwTag::Kw,
                v: text.clone(),
            },
            Element::Leaf(tok) => WireElem::Token {
                k: TokTag::T,
                v: tok.text.clone(),
                s: (tok.span.start, tok.span.end),
            },
            Element::Child(c) => WireElem::Node(raise_node(tree, *c)),
        })
        .collect();
    WireNode {
        k: NodeTag::Node,
        s: (n.span.start, n.span.end),
        e: elements,
    }
}

/// Serializes records to interchange bytes, one JSON object per line.
pub fn dump_interchange(records: &[(MethodSource, SimplifiedParseTree)]) -> Vec<u8> {
    let mut out = Vec::new();
    for (src, tree) in records {
        let record = WireRecord {
            path: src.path.clone(),
            name: src.name.clone(),
            line: src.line,
            source: src.source.clone(),
            tree: raise_node(tree, tree.root()),
        };
        serde_json::to_writer(&mut out, &record).expect("serializing to memory cannot fail");
        out.push(b'\n');
    }
    out
}

/// Reads an interchange file, transparently gunzipping when the path ends
/// in `.gz`.
pub fn read_interchange_file(
    path: &Path,
    mode: IngestMode,
) -> Result<LoadOutcome, Box<dyn std::error::Error>> {
    let raw = std::fs::read(path)?;
    let bytes = if path.extension().map(|e| e == "gz").unwrap_or(false) {
        let mut decoder = GzDecoder::new(&raw[..]);
        let mut buf = Vec::new();
        decoder.read_to_end(&mut buf)?;
        buf
    } else {
        raw
    };
    Ok(load_interchange(&bytes, mode)?)
}

/// Writes interchange bytes, gzipping when the path ends in `.gz`. The
/// gzip header is pinned (no mtime) so identical content gives identical
/// bytes.
pub fn write_interchange_file(
    path: &Path,
    records: &[(MethodSource, SimplifiedParseTree)],
) -> std::io::Result<()> {
    let bytes = dump_interchange(records);
    if path.extension().map(|e| e == "gz").unwrap_or(false) {
        let file = std::fs::File::create(path)?;
        let mut encoder = GzEncoder::new(file, Compression::default());
        encoder.write_all(&bytes)?;
        encoder.finish()?;
        Ok(())
    } else {
        std::fs::write(path, bytes)
    }
}

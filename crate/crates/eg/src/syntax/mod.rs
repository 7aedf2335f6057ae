//! The simplified parse tree: a language-agnostic program representation
//! made only of tokens, with no grammar rule names.
//!
//! A tree is a non-empty list whose elements are keyword tokens, non-keyword
//! tokens, or nested trees. Keyword tokens (fixed symbols and words of the
//! language) become part of a node's *label*; non-keyword tokens (names,
//! literals) are stored as leaves. An in-order traversal of the elements
//! reproduces the token sequence of the original source, so examples can be
//! rendered by slicing the real source text.

mod pattern;

pub use pattern::{
    contains_pattern, minimal_subtree, Embedding, ExtendError, ExtensionCandidate, Pattern,
    PVertex, PVertexId,
};

use std::fmt;

/// Byte range `[start, end)` into the owning method's source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// True if `other` lies entirely within `self`.
    pub fn contains(&self, other: Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Whether a token's value is fixed by the language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Keywords and symbols: `with`, `if`, `(`, `.`, `+`, ...
    Keyword,
    /// Names, literals, and everything else.
    NonKeyword,
}

/// A lexical token with its byte span into the owning source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

/// Index of a node in the tree's arena.
pub type NodeId = usize;

/// One entry of a node's ordered element list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Element {
    /// A keyword token; contributes its text to the node label.
    Keyword { text: String, span: Span },
    /// A non-keyword token; contributes `#` to the node label.
    Leaf(Token),
    /// A nested tree; contributes `#` to the node label.
    Child(NodeId),
}

impl Element {
    pub fn is_keyword(&self) -> bool {
        matches!(self, Element::Keyword { .. })
    }
}

/// A node of a simplified parse tree: a non-empty ordered element list.
#[derive(Debug, Clone)]
pub struct Node {
    pub elements: Vec<Element>,
    /// Byte extent of the node: first token start to last token end.
    pub span: Span,
    label: String,
    /// Element indices of the non-keyword elements, in order. The `i`th
    /// child position (1-based) of the node is `elements[hash_elems[i-1]]`.
    hash_elems: Vec<usize>,
}

impl Node {
    /// The node's label: keywords verbatim, every non-keyword element as `#`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Number of `#` positions (non-keyword elements).
    pub fn arity(&self) -> usize {
        self.hash_elems.len()
    }

    /// Element index of 1-based child position `pos`.
    pub fn element_of_position(&self, pos: usize) -> Option<usize> {
        if pos == 0 {
            return None;
        }
        self.hash_elems.get(pos - 1).copied()
    }
}

/// Reference to a node or to one leaf element inside a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeRef {
    Node(NodeId),
    Leaf { node: NodeId, elem: usize },
}

/// A structural invariant violation found by [`SimplifiedParseTree::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}: {}: {}", self.node, self.rule, self.detail)
    }
}

/// A borrowed view of one token produced by [`SimplifiedParseTree::token_stream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenView<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub span: Span,
}

/// Arena-backed simplified parse tree for one method.
///
/// Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct SimplifiedParseTree {
    nodes: Vec<Node>,
    root: NodeId,
    source: String,
    /// parent node and 1-based child position of each node, if any.
    parents: Vec<Option<(NodeId, usize)>>,
}

impl SimplifiedParseTree {
    /// Assembles a tree from raw parts. Labels, `#` positions, and parent
    /// links are derived here; call [`validate`](Self::validate) to check
    /// the structural invariants.
    pub fn from_parts(raw_nodes: Vec<(Vec<Element>, Span)>, root: NodeId, source: String) -> Self {
        let nodes: Vec<Node> = raw_nodes
            .into_iter()
            .map(|(elements, span)| {
                let mut label = String::new();
                let mut hash_elems = Vec::new();
                for (i, el) in elements.iter().enumerate() {
                    match el {
                        Element::Keyword { text, .. } => label.push_str(text),
                        Element::Leaf(_) | Element::Child(_) => {
                            label.push('#');
                            hash_elems.push(i);
                        }
                    }
                }
                Node {
                    elements,
                    span,
                    label,
                    hash_elems,
                }
            })
            .collect();
        let mut parents = vec![None; nodes.len()];
        for (id, node) in nodes.iter().enumerate() {
            let mut pos = 0usize;
            for el in &node.elements {
                match el {
                    Element::Keyword { .. } => {}
                    Element::Leaf(_) => pos += 1,
                    Element::Child(c) => {
                        pos += 1;
                        if let Some(slot) = parents.get_mut(*c) {
                            if slot.is_none() {
                                *slot = Some((id, pos));
                            }
                        }
                    }
                }
            }
        }
        SimplifiedParseTree {
            nodes,
            root,
            source,
            parents,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate()
    }

    /// The label of `node`: keyword texts verbatim, `#` for every
    /// non-keyword element.
    pub fn label(&self, node: NodeId) -> &str {
        self.nodes[node].label()
    }

    /// Parent node and 1-based child position of a node or leaf.
    /// `None` for the root.
    pub fn parent_of(&self, r: TreeRef) -> Option<(NodeId, usize)> {
        match r {
            TreeRef::Node(n) => self.parents[n],
            TreeRef::Leaf { node, elem } => {
                let pos = self.nodes[node]
                    .hash_elems
                    .iter()
                    .position(|&e| e == elem)?;
                Some((node, pos + 1))
            }
        }
    }

    /// The node or leaf at 1-based child position `pos` of `node`.
    pub fn child_at(&self, node: NodeId, pos: usize) -> Option<TreeRef> {
        let elem = self.nodes[node].element_of_position(pos)?;
        match &self.nodes[node].elements[elem] {
            Element::Child(c) => Some(TreeRef::Node(*c)),
            Element::Leaf(_) => Some(TreeRef::Leaf { node, elem }),
            Element::Keyword { .. } => None,
        }
    }

    /// Byte extent of a node or leaf.
    pub fn span_of(&self, r: TreeRef) -> Span {
        match r {
            TreeRef::Node(n) => self.nodes[n].span,
            TreeRef::Leaf { node, elem } => match &self.nodes[node].elements[elem] {
                Element::Leaf(tok) => tok.span,
                _ => Span::new(0, 0),
            },
        }
    }

    /// Leaf token at a leaf reference, if the reference is a leaf.
    pub fn leaf_token(&self, r: TreeRef) -> Option<&Token> {
        match r {
            TreeRef::Leaf { node, elem } => match &self.nodes[node].elements[elem] {
                Element::Leaf(tok) => Some(tok),
                _ => None,
            },
            TreeRef::Node(_) => None,
        }
    }

    /// All tokens of the tree in source order, keywords included.
    pub fn token_stream(&self) -> Vec<TokenView<'_>> {
        let mut out = Vec::new();
        self.collect_tokens(self.root, &mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, node: NodeId, out: &mut Vec<TokenView<'a>>) {
        for el in &self.nodes[node].elements {
            match el {
                Element::Keyword { text, span } => out.push(TokenView {
                    kind: TokenKind::Keyword,
                    text,
                    span: *span,
                }),
                Element::Leaf(tok) => out.push(TokenView {
                    kind: tok.kind,
                    text: &tok.text,
                    span: tok.span,
                }),
                Element::Child(c) => self.collect_tokens(*c, out),
            }
        }
    }

    /// Tokens of the subtree rooted at `r`, in source order.
    pub fn fragment_tokens(&self, r: TreeRef) -> Vec<TokenView<'_>> {
        match r {
            TreeRef::Node(n) => {
                let mut out = Vec::new();
                self.collect_tokens(n, &mut out);
                out
            }
            TreeRef::Leaf { node, elem } => match &self.nodes[node].elements[elem] {
                Element::Leaf(tok) => vec![TokenView {
                    kind: tok.kind,
                    text: &tok.text,
                    span: tok.span,
                }],
                _ => Vec::new(),
            },
        }
    }

    /// Checks every structural invariant; an empty result means the tree is
    /// well-formed. Each violation names the offending node and the rule.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.nodes.is_empty() || self.root >= self.nodes.len() {
            out.push(Violation {
                node: self.root,
                rule: "missing root",
                detail: format!("root {} of {} nodes", self.root, self.nodes.len()),
            });
            return out;
        }
        let mut visited = vec![false; self.nodes.len()];
        self.validate_node(self.root, None, &mut visited, &mut out);
        out
    }

    fn validate_node(
        &self,
        id: NodeId,
        parent_span: Option<Span>,
        visited: &mut [bool],
        out: &mut Vec<Violation>,
    ) {
        if visited[id] {
            out.push(Violation {
                node: id,
                rule: "child reuse",
                detail: "node appears as a child more than once".into(),
            });
            return;
        }
        visited[id] = true;
        let node = &self.nodes[id];
        if node.elements.is_empty() {
            out.push(Violation {
                node: id,
                rule: "empty element list",
                detail: "a simplified parse tree is a non-empty list".into(),
            });
            return;
        }
        if node.elements.len() == 1 {
            if let Element::Child(_) = node.elements[0] {
                out.push(Violation {
                    node: id,
                    rule: "single-subtree list",
                    detail: "a node cannot be a list containing a single simplified parse tree"
                        .into(),
                });
            }
        }
        if let Some(pspan) = parent_span {
            if !pspan.contains(node.span) {
                out.push(Violation {
                    node: id,
                    rule: "span nesting",
                    detail: format!("node span {} outside parent span {}", node.span, pspan),
                });
            }
        }
        let mut prev_end: Option<usize> = None;
        let mut hull: Option<Span> = None;
        for el in &node.elements {
            let span = match el {
                Element::Keyword { text, span } => {
                    self.check_token_text(id, text, *span, out);
                    *span
                }
                Element::Leaf(tok) => {
                    self.check_token_text(id, &tok.text, tok.span, out);
                    tok.span
                }
                Element::Child(c) => {
                    if *c >= self.nodes.len() {
                        out.push(Violation {
                            node: id,
                            rule: "dangling child",
                            detail: format!("child {} does not exist", c),
                        });
                        continue;
                    }
                    self.nodes[*c].span
                }
            };
            if let Some(end) = prev_end {
                if span.start < end {
                    out.push(Violation {
                        node: id,
                        rule: "span order",
                        detail: format!("element span {} overlaps or precedes {}", span, end),
                    });
                }
            }
            prev_end = Some(span.end);
            hull = Some(match hull {
                None => span,
                Some(h) => Span::new(h.start.min(span.start), h.end.max(span.end)),
            });
        }
        if let Some(h) = hull {
            if h != node.span {
                out.push(Violation {
                    node: id,
                    rule: "span extent",
                    detail: format!("stored span {} != element hull {}", node.span, h),
                });
            }
        }
        for el in &node.elements {
            if let Element::Child(c) = el {
                if *c < self.nodes.len() {
                    self.validate_node(*c, Some(node.span), visited, out);
                }
            }
        }
    }

    fn check_token_text(&self, id: NodeId, text: &str, span: Span, out: &mut Vec<Violation>) {
        if span.start > span.end || span.end > self.source.len() {
            out.push(Violation {
                node: id,
                rule: "span bounds",
                detail: format!("token span {} outside source of {} bytes", span, self.source.len()),
            });
            return;
        }
        let slice = &self.source[span.start..span.end];
        if slice != text {
            out.push(Violation {
                node: id,
                rule: "source mismatch",
                detail: format!("token text {:?} != source slice {:?}", text, slice),
            });
        }
    }
}

/// Verifies that slicing the source by token spans reproduces the token
/// texts and that the gaps between consecutive tokens hold only whitespace
/// or comments (lines starting with `comment_prefix`).
pub fn verify_round_trip(
    tree: &SimplifiedParseTree,
    comment_prefix: &str,
) -> Result<(), String> {
    let source = tree.source();
    let tokens = tree.token_stream();
    let mut cursor = 0usize;
    for tok in &tokens {
        if tok.span.start < cursor {
            return Err(format!(
                "token {:?} at {} precedes cursor {}",
                tok.text, tok.span, cursor
            ));
        }
        let gap = &source[cursor..tok.span.start];
        if !gap_is_blank(gap, comment_prefix) {
            return Err(format!("unexpected source between tokens: {:?}", gap));
        }
        let slice = &source[tok.span.start..tok.span.end];
        if slice != tok.text {
            return Err(format!(
                "token text {:?} != source slice {:?} at {}",
                tok.text, slice, tok.span
            ));
        }
        cursor = tok.span.end;
    }
    let tail = &source[cursor..];
    if !gap_is_blank(tail, comment_prefix) {
        return Err(format!("unexpected source after last token: {:?}", tail));
    }
    Ok(())
}

fn gap_is_blank(gap: &str, comment_prefix: &str) -> bool {
    let mut rest = gap;
    loop {
        rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == '\\');
        if rest.is_empty() {
            return true;
        }
        if !comment_prefix.is_empty() && rest.starts_with(comment_prefix) {
            match rest.find('\n') {
                Some(nl) => rest = &rest[nl + 1..],
                None => return true,
            }
        } else {
            return false;
        }
    }
}

//! Patterns (context subtrees) and their embeddings into corpus trees.
//!
//! A pattern is a connected tree of labeled nodes and exact-text leaves in
//! which some child positions are left unfilled (holes). A corpus tree
//! contains a pattern when there is an embedding: a label- and text-
//! preserving, position-respecting injection of the pattern into the tree.
//! [`contains_pattern`] is the exhaustive reference oracle; the miner keeps
//! embeddings incrementally and must agree with it.

use super::{NodeId, SimplifiedParseTree, TreeRef};
use std::fmt;

/// Index of a vertex in a pattern's arena.
pub type PVertexId = usize;

/// A pattern vertex: an internal node matched by label, or a leaf matched
/// by exact token text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PVertex {
    Node {
        label: String,
        /// One slot per `#` position of the label; `None` is a hole.
        children: Vec<Option<PVertexId>>,
    },
    Leaf {
        text: String,
    },
}

impl PVertex {
    pub fn arity(&self) -> usize {
        match self {
            PVertex::Node { children, .. } => children.len(),
            PVertex::Leaf { .. } => 0,
        }
    }
}

/// A single-vertex extension of a pattern, as enumerated by the miner.
///
/// `downward = true` attaches a new child at `position` of the existing
/// vertex `attach`; `downward = false` makes the new node the pattern's
/// parent, with the old root at `position` of the new node. `label_or_text`
/// is a node label unless `leaf` is set, in which case it is exact leaf text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtensionCandidate {
    pub label_or_text: String,
    pub leaf: bool,
    pub position: usize,
    pub downward: bool,
    pub attach: PVertexId,
}

/// Structural error from [`Pattern::extend`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExtendError {
    PositionOccupied { attach: PVertexId, position: usize },
    PositionOutOfRange { attach: PVertexId, position: usize, arity: usize },
    AttachNotNode { attach: PVertexId },
    UpwardFromNonRoot { attach: PVertexId },
    UpwardLeaf,
}

impl fmt::Display for ExtendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendError::PositionOccupied { attach, position } => {
                write!(f, "position {} of vertex {} is already filled", position, attach)
            }
            ExtendError::PositionOutOfRange { attach, position, arity } => write!(
                f,
                "position {} of vertex {} out of range (arity {})",
                position, attach, arity
            ),
            ExtendError::AttachNotNode { attach } => {
                write!(f, "vertex {} is a leaf and cannot take children", attach)
            }
            ExtendError::UpwardFromNonRoot { attach } => {
                write!(f, "upward extension must attach to the root, not vertex {}", attach)
            }
            ExtendError::UpwardLeaf => write!(f, "an upward extension must add a node, not a leaf"),
        }
    }
}

impl std::error::Error for ExtendError {}

/// A context subtree with a query anchor and typed holes.
///
/// Vertices are appended as the pattern grows, so vertex ids are stable
/// across extensions and the anchor is always the prefix `0..anchor_len`.
#[derive(Debug, Clone)]
pub struct Pattern {
    vertices: Vec<PVertex>,
    parents: Vec<Option<(PVertexId, usize)>>,
    root: PVertexId,
    anchor_len: usize,
    anchor_root: PVertexId,
}

impl Pattern {
    /// A pattern consisting of one leaf with exact token text.
    pub fn leaf(text: impl Into<String>) -> Self {
        Pattern {
            vertices: vec![PVertex::Leaf { text: text.into() }],
            parents: vec![None],
            root: 0,
            anchor_len: 1,
            anchor_root: 0,
        }
    }

    /// Converts the fully-filled subtree of `tree` at `at` into a pattern
    /// whose anchor is the entire pattern.
    pub fn from_tree(tree: &SimplifiedParseTree, at: TreeRef) -> Self {
        let mut p = Pattern {
            vertices: Vec::new(),
            parents: Vec::new(),
            root: 0,
            anchor_len: 0,
            anchor_root: 0,
        };
        let root = p.copy_tree(tree, at);
        p.root = root;
        p.anchor_root = root;
        p.anchor_len = p.vertices.len();
        p
    }

    fn copy_tree(&mut self, tree: &SimplifiedParseTree, at: TreeRef) -> PVertexId {
        match at {
            TreeRef::Leaf { .. } => {
                let text = tree.leaf_token(at).expect("leaf ref").text.clone();
                self.push_vertex(PVertex::Leaf { text })
            }
            TreeRef::Node(n) => {
                let arity = tree.node(n).arity();
                let id = self.push_vertex(PVertex::Node {
                    label: tree.label(n).to_string(),
                    children: vec![None; arity],
                });
                for pos in 1..=arity {
                    let child_ref = tree.child_at(n, pos).expect("position in range");
                    let child = self.copy_tree(tree, child_ref);
                    self.link(id, pos, child);
                }
                id
            }
        }
    }

    fn push_vertex(&mut self, v: PVertex) -> PVertexId {
        self.vertices.push(v);
        self.parents.push(None);
        self.vertices.len() - 1
    }

    fn link(&mut self, parent: PVertexId, pos: usize, child: PVertexId) {
        if let PVertex::Node { children, .. } = &mut self.vertices[parent] {
            children[pos - 1] = Some(child);
        }
        self.parents[child] = Some((parent, pos));
    }

    pub fn root(&self) -> PVertexId {
        self.root
    }

    pub fn anchor_root(&self) -> PVertexId {
        self.anchor_root
    }

    /// Number of vertices (nodes plus leaves).
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, id: PVertexId) -> &PVertex {
        &self.vertices[id]
    }

    pub fn vertices(&self) -> impl Iterator<Item = (PVertexId, &PVertex)> {
        self.vertices.iter().enumerate()
    }

    pub fn parent_of(&self, id: PVertexId) -> Option<(PVertexId, usize)> {
        self.parents[id]
    }

    /// True if the vertex originates from the query.
    pub fn in_anchor(&self, id: PVertexId) -> bool {
        id < self.anchor_len
    }

    /// Unfilled `(vertex, position)` pairs, ordered by vertex id then position.
    pub fn holes(&self) -> Vec<(PVertexId, usize)> {
        let mut out = Vec::new();
        for (id, v) in self.vertices.iter().enumerate() {
            if let PVertex::Node { children, .. } = v {
                for (i, c) in children.iter().enumerate() {
                    if c.is_none() {
                        out.push((id, i + 1));
                    }
                }
            }
        }
        out
    }

    /// Grows the pattern by exactly one vertex. The anchor is unchanged.
    pub fn extend(&self, c: &ExtensionCandidate) -> Result<Pattern, ExtendError> {
        let mut p = self.clone();
        let arity = label_arity(&c.label_or_text);
        if c.downward {
            let attach_arity = match &p.vertices[c.attach] {
                PVertex::Node { children, .. } => children.len(),
                PVertex::Leaf { .. } => return Err(ExtendError::AttachNotNode { attach: c.attach }),
            };
            if c.position == 0 || c.position > attach_arity {
                return Err(ExtendError::PositionOutOfRange {
                    attach: c.attach,
                    position: c.position,
                    arity: attach_arity,
                });
            }
            if let PVertex::Node { children, .. } = &p.vertices[c.attach] {
                if children[c.position - 1].is_some() {
                    return Err(ExtendError::PositionOccupied {
                        attach: c.attach,
                        position: c.position,
                    });
                }
            }
            let new = p.push_vertex(if c.leaf {
                PVertex::Leaf { text: c.label_or_text.clone() }
            } else {
                PVertex::Node { label: c.label_or_text.clone(), children: vec![None; arity] }
            });
            p.link(c.attach, c.position, new);
        } else {
            if c.attach != p.root {
                return Err(ExtendError::UpwardFromNonRoot { attach: c.attach });
            }
            if c.leaf {
                return Err(ExtendError::UpwardLeaf);
            }
            if c.position == 0 || c.position > arity {
                return Err(ExtendError::PositionOutOfRange {
                    attach: c.attach,
                    position: c.position,
                    arity,
                });
            }
            let new = p.push_vertex(PVertex::Node {
                label: c.label_or_text.clone(),
                children: vec![None; arity],
            });
            let old_root = p.root;
            p.link(new, c.position, old_root);
            p.root = new;
        }
        Ok(p)
    }

    /// Path from the anchor root to `target` inside the pattern: climb
    /// `ups` parents from the anchor root, then descend along `downs`
    /// positions. Stable across runs even though vertex ids are not.
    pub fn path_from_anchor_root(&self, target: PVertexId) -> (usize, Vec<usize>) {
        // Chain of ancestors of `target` up to the pattern root, and the
        // position taken at each step.
        let mut chain = vec![target];
        let mut positions = Vec::new();
        let mut cur = target;
        while let Some((parent, pos)) = self.parents[cur] {
            chain.push(parent);
            positions.push(pos);
            cur = parent;
        }
        // Depth of each ancestor of the anchor root.
        let mut ups = 0usize;
        let mut probe = self.anchor_root;
        loop {
            if let Some(idx) = chain.iter().position(|&v| v == probe) {
                // positions[..idx] are the steps from chain[idx] down to target.
                let mut downs: Vec<usize> = positions[..idx].to_vec();
                downs.reverse();
                return (ups, downs);
            }
            match self.parents[probe] {
                Some((parent, _)) => {
                    ups += 1;
                    probe = parent;
                }
                None => return (ups, Vec::new()),
            }
        }
    }

    /// Canonical structural serialization used to deduplicate patterns
    /// across mining runs. Ignores vertex numbering and the anchor.
    pub fn canonical_key(&self) -> String {
        let mut out = String::new();
        self.write_canonical(self.root, &mut out);
        out
    }

    fn write_canonical(&self, id: PVertexId, out: &mut String) {
        match &self.vertices[id] {
            PVertex::Leaf { text } => {
                out.push('\'');
                out.push_str(text);
                out.push('\'');
            }
            PVertex::Node { label, children } => {
                out.push('(');
                out.push_str(label);
                out.push('|');
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    match c {
                        None => out.push('_'),
                        Some(child) => self.write_canonical(*child, out),
                    }
                }
                out.push(')');
            }
        }
    }
}

/// Number of `#` positions in a node label.
pub fn label_arity(label: &str) -> usize {
    label.bytes().filter(|&b| b == b'#').count()
}

/// An injection of a pattern into one corpus tree: `map[v]` is the tree
/// node or leaf that pattern vertex `v` is mapped to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding {
    pub map: Vec<TreeRef>,
}

impl Embedding {
    pub fn root_image(&self, pattern: &Pattern) -> TreeRef {
        self.map[pattern.root()]
    }

    /// Independently re-checks the embedding invariants: labels and leaf
    /// texts match, edges are preserved, and the map is injective.
    pub fn check(&self, pattern: &Pattern, tree: &SimplifiedParseTree) -> Result<(), String> {
        if self.map.len() != pattern.size() {
            return Err(format!(
                "map covers {} of {} vertices",
                self.map.len(),
                pattern.size()
            ));
        }
        for (id, v) in pattern.vertices() {
            let image = self.map[id];
            match v {
                PVertex::Leaf { text } => match tree.leaf_token(image) {
                    Some(tok) if tok.text == *text => {}
                    Some(tok) => {
                        return Err(format!("leaf {:?} mapped to token {:?}", text, tok.text))
                    }
                    None => return Err(format!("leaf {:?} mapped to a node", text)),
                },
                PVertex::Node { label, children } => {
                    let n = match image {
                        TreeRef::Node(n) => n,
                        TreeRef::Leaf { .. } => {
                            return Err(format!("node {:?} mapped to a leaf", label))
                        }
                    };
                    if tree.label(n) != label {
                        return Err(format!(
                            "label {:?} mapped to node labeled {:?}",
                            label,
                            tree.label(n)
                        ));
                    }
                    for (i, c) in children.iter().enumerate() {
                        if let Some(c) = c {
                            let expect = tree.child_at(n, i + 1);
                            if expect != Some(self.map[*c]) {
                                return Err(format!(
                                    "edge ({:?}, {}) not preserved",
                                    label,
                                    i + 1
                                ));
                            }
                        }
                    }
                }
            }
        }
        let mut seen = self.map.clone();
        seen.sort();
        let before = seen.len();
        seen.dedup();
        if seen.len() != before {
            return Err("embedding is not injective".into());
        }
        Ok(())
    }
}

/// Exhaustive containment oracle: every embedding of `pattern` into `tree`,
/// ordered by the tree position of the mapped pattern root (node id order,
/// leaves after their containing node's own match, in element order).
pub fn contains_pattern(tree: &SimplifiedParseTree, pattern: &Pattern) -> Vec<Embedding> {
    let mut out = Vec::new();
    for (id, node) in tree.nodes() {
        try_embed_at(tree, pattern, TreeRef::Node(id), &mut out);
        for (elem, el) in node.elements.iter().enumerate() {
            if let super::Element::Leaf(_) = el {
                try_embed_at(tree, pattern, TreeRef::Leaf { node: id, elem }, &mut out);
            }
        }
    }
    out
}

fn try_embed_at(
    tree: &SimplifiedParseTree,
    pattern: &Pattern,
    target: TreeRef,
    out: &mut Vec<Embedding>,
) {
    let mut map = vec![TreeRef::Node(usize::MAX); pattern.size()];
    if match_vertex(tree, pattern, pattern.root(), target, &mut map) {
        out.push(Embedding { map });
    }
}

/// Matches `vertex` (and its filled descendants) against the tree at
/// `target`. Because pattern edges are positional, the whole embedding is
/// determined by where the root lands.
fn match_vertex(
    tree: &SimplifiedParseTree,
    pattern: &Pattern,
    vertex: PVertexId,
    target: TreeRef,
    map: &mut [TreeRef],
) -> bool {
    match pattern.vertex(vertex) {
        PVertex::Leaf { text } => match tree.leaf_token(target) {
            Some(tok) if tok.text == *text => {
                map[vertex] = target;
                true
            }
            _ => false,
        },
        PVertex::Node { label, children } => {
            let n = match target {
                TreeRef::Node(n) => n,
                TreeRef::Leaf { .. } => return false,
            };
            if tree.label(n) != label.as_str() {
                return false;
            }
            for (i, child) in children.iter().enumerate() {
                if let Some(child) = child {
                    let child_target = match tree.child_at(n, i + 1) {
                        Some(t) => t,
                        None => return false,
                    };
                    if !match_vertex(tree, pattern, *child, child_target, map) {
                        return false;
                    }
                }
            }
            map[vertex] = target;
            true
        }
    }
}

/// The smallest rooted subtree of `tree` containing every vertex image of
/// `e`: the mapped pattern root itself when it is a node, otherwise the
/// node holding that leaf.
pub fn minimal_subtree(
    tree: &SimplifiedParseTree,
    pattern: &Pattern,
    e: &Embedding,
) -> NodeId {
    let node = match e.root_image(pattern) {
        TreeRef::Node(n) => n,
        TreeRef::Leaf { node, .. } => node,
    };
    debug_assert!(node < tree.node_count());
    node
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{Element, Span, Token, TokenKind};

    fn kw(text: &str, start: usize) -> Element {
        Element::Keyword {
            text: text.into(),
            span: Span::new(start, start + text.len()),
        }
    }

    fn leaf(text: &str, start: usize) -> Element {
        Element::Leaf(Token {
            kind: TokenKind::NonKeyword,
            text: text.into(),
            span: Span::new(start, start + text.len()),
        })
    }

    /// Tree for a call like `f(x)`: one node `[f, (, x, )]` labeled `#(#)`.
    fn call_tree(callee: &str, arg: &str) -> SimplifiedParseTree {
        let source = format!("{}({})", callee, arg);
        let node = (
            vec![
                leaf(callee, 0),
                kw("(", callee.len()),
                leaf(arg, callee.len() + 1),
                kw(")", callee.len() + 1 + arg.len()),
            ],
            Span::new(0, source.len()),
        );
        SimplifiedParseTree::from_parts(vec![node], 0, source)
    }

    #[test]
    fn leaf_pattern_matches_by_text() {
        let tree = call_tree("f", "x");
        let hits = contains_pattern(&tree, &Pattern::leaf("f"));
        assert_eq!(hits.len(), 1);
        hits[0].check(&Pattern::leaf("f"), &tree).unwrap();

        let misses = contains_pattern(&tree, &Pattern::leaf("g"));
        assert!(misses.is_empty());
    }

    #[test]
    fn call_pattern_matches_first_two_of_three() {
        let corpus = [call_tree("f", "x"), call_tree("f", "y"), call_tree("g", "x")];
        // Pattern `f(HOLE)`: node #(#) with leaf f at 1, hole at 2.
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let hits: Vec<usize> = corpus
            .iter()
            .enumerate()
            .filter(|(_, t)| !contains_pattern(t, &p).is_empty())
            .map(|(i, _)| i)
            .collect();
        assert_eq!(hits, vec![0, 1]);
    }

    #[test]
    fn extend_downward_fills_hole() {
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        assert_eq!(p.holes(), vec![(1, 2)]);
        let p2 = p
            .extend(&ExtensionCandidate {
                label_or_text: "x".into(),
                leaf: true,
                position: 2,
                downward: true,
                attach: p.root(),
            })
            .unwrap();
        assert!(p2.holes().is_empty());
        assert_eq!(p2.size(), 3);
        // `f(x)` matches, `f(y)` does not.
        assert_eq!(contains_pattern(&call_tree("f", "x"), &p2).len(), 1);
        assert!(contains_pattern(&call_tree("f", "y"), &p2).is_empty());
    }

    #[test]
    fn extend_rejects_occupied_and_out_of_range() {
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let occupied = p.extend(&ExtensionCandidate {
            label_or_text: "z".into(),
            leaf: true,
            position: 1,
            downward: true,
            attach: p.root(),
        });
        assert!(matches!(occupied, Err(ExtendError::PositionOccupied { .. })));
        let out_of_range = p.extend(&ExtensionCandidate {
            label_or_text: "z".into(),
            leaf: true,
            position: 3,
            downward: true,
            attach: p.root(),
        });
        assert!(matches!(out_of_range, Err(ExtendError::PositionOutOfRange { .. })));
        let bad_upward = p.extend(&ExtensionCandidate {
            label_or_text: "#.#".into(),
            leaf: false,
            position: 1,
            downward: false,
            attach: 0,
        });
        assert!(matches!(bad_upward, Err(ExtendError::UpwardFromNonRoot { .. })));
    }

    #[test]
    fn minimal_subtree_is_root_image_or_leaf_parent() {
        let tree = call_tree("f", "x");
        let p = Pattern::leaf("f");
        let e = &contains_pattern(&tree, &p)[0];
        assert_eq!(minimal_subtree(&tree, &p, e), 0);

        let p2 = p
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let e2 = &contains_pattern(&tree, &p2)[0];
        assert_eq!(minimal_subtree(&tree, &p2, e2), 0);
    }

    #[test]
    fn containment_is_monotone_under_extension() {
        let tree = call_tree("f", "x");
        let p = Pattern::leaf("f");
        let p2 = p
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        if !contains_pattern(&tree, &p2).is_empty() {
            assert!(!contains_pattern(&tree, &p).is_empty());
        }
    }

    #[test]
    fn anchor_path_tracks_upward_growth() {
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        // Anchor root is the leaf; the call node is one level up.
        assert_eq!(p.path_from_anchor_root(0), (0, vec![]));
        assert_eq!(p.path_from_anchor_root(p.root()), (1, vec![]));
    }

    #[test]
    fn canonical_key_ignores_growth_order() {
        let base = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let a = base
            .extend(&ExtensionCandidate {
                label_or_text: "x".into(),
                leaf: true,
                position: 2,
                downward: true,
                attach: base.root(),
            })
            .unwrap();
        // Same shape built leaf-first cannot exist (upward adds nodes only),
        // so compare equal and unequal keys directly.
        assert_eq!(a.canonical_key(), "(#(#)|'f','x')");
        assert_ne!(a.canonical_key(), base.canonical_key());
        assert_eq!(base.canonical_key(), "(#(#)|'f',_)");
    }
}

//! The mining core: grows the most-supported pattern around a query, then
//! completes it with the best real snippet and ranks the result.
//!
//! Growth is greedy. Starting from the parsed query, each iteration
//! enumerates every single-vertex extension adjacent to the current
//! embeddings, adopts the one contained in the most methods, and shrinks
//! the match set to the methods still containing the grown pattern. Growth
//! stops at the size cap, when support would fall to or below the support
//! floor, or when no extension exists. A second pass picks the method
//! whose hole fillers are most common across the match set and emits its
//! minimal subtree as the example.

use crate::adapters::{ParseError, ParserAdapter};
use crate::corpus::{sample, CorpusIndex, CorpusSample};
use crate::syntax::{
    contains_pattern, minimal_subtree, Embedding, ExtensionCandidate, NodeId, Pattern,
    PVertex, PVertexId, SimplifiedParseTree, Span, TreeRef,
};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// Mining knobs. The defaults are the shipped configuration; tests pin
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningConfig {
    /// Support floor as a fraction of the sampled set: growth keeps the
    /// pattern in strictly more than this share of sampled methods.
    pub min_support_ratio: f64,
    /// Maximum pattern size (vertices) before growth stops.
    pub max_pattern_size: usize,
    /// Fillers longer than this many tokens score zero.
    pub max_filler_tokens: usize,
    /// Fillers longer than this many characters score zero.
    pub max_filler_chars: usize,
    /// How many diverse examples to mine per query.
    pub example_count: usize,
    /// Cap on the number of methods mined per query.
    pub max_samples: usize,
    /// Seed for candidate sampling, surfaced in output provenance.
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support_ratio: 0.05,
            max_pattern_size: 100,
            max_filler_tokens: 5,
            max_filler_chars: 50,
            example_count: 3,
            max_samples: 2000,
            seed: 0,
        }
    }
}

/// Query that failed to parse or had nothing to search for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryError {
    pub message: String,
    pub offset: usize,
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "query error at offset {}: {}", self.offset, self.message)
    }
}

impl std::error::Error for QueryError {}

impl From<ParseError> for QueryError {
    fn from(e: ParseError) -> Self {
        QueryError {
            message: e.message,
            offset: e.offset,
        }
    }
}

/// Parses query text into its anchor pattern. A bare identifier becomes a
/// single pattern leaf; `json.dump` becomes a `#.#` node with two leaves.
pub fn parse_query(query: &str, adapter: &dyn ParserAdapter) -> Result<Pattern, QueryError> {
    let (tree, at) = adapter.parse_expression(query)?;
    Ok(Pattern::from_tree(&tree, at))
}

/// The non-keyword token texts of a pattern, in vertex order; these drive
/// the index prefilter.
pub fn pattern_tokens(pattern: &Pattern) -> Vec<String> {
    pattern
        .vertices()
        .filter_map(|(_, v)| match v {
            PVertex::Leaf { text } => Some(text.clone()),
            PVertex::Node { .. } => None,
        })
        .collect()
}

/// Number of trees containing the pattern, counted with the exhaustive
/// oracle. Methods are counted once however many embeddings they hold.
pub fn support(pattern: &Pattern, trees: &[(u32, &SimplifiedParseTree)]) -> usize {
    trees
        .iter()
        .filter(|(_, t)| !contains_pattern(t, pattern).is_empty())
        .count()
}

/// The methods currently containing the pattern, with every embedding.
#[derive(Debug, Clone, Default)]
pub struct MatchSet {
    pub entries: Vec<MatchEntry>,
}

#[derive(Debug, Clone)]
pub struct MatchEntry {
    pub method: u32,
    pub embeddings: Vec<Embedding>,
}

impl MatchSet {
    fn initial(trees: &[(u32, &SimplifiedParseTree)], pattern: &Pattern) -> Self {
        let entries = trees
            .iter()
            .filter_map(|(id, tree)| {
                let embeddings = contains_pattern(tree, pattern);
                if embeddings.is_empty() {
                    None
                } else {
                    Some(MatchEntry {
                        method: *id,
                        embeddings,
                    })
                }
            })
            .collect();
        MatchSet { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn methods(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.method)
    }

    /// Keeps only the embeddings extendable by `cand` (appending the new
    /// vertex image) and drops methods with none left.
    fn apply(
        &self,
        trees: &TreeLookup<'_>,
        pattern: &Pattern,
        cand: &ExtensionCandidate,
    ) -> MatchSet {
        let entries = self
            .entries
            .iter()
            .filter_map(|entry| {
                let tree = trees.get(entry.method);
                let embeddings: Vec<Embedding> = entry
                    .embeddings
                    .iter()
                    .filter_map(|e| extend_embedding(tree, pattern, e, cand))
                    .collect();
                if embeddings.is_empty() {
                    None
                } else {
                    Some(MatchEntry {
                        method: entry.method,
                        embeddings,
                    })
                }
            })
            .collect();
        MatchSet { entries }
    }
}

/// The image the new vertex would take in `tree` under embedding `e`, if
/// the candidate applies there.
fn candidate_image(
    tree: &SimplifiedParseTree,
    pattern: &Pattern,
    e: &Embedding,
    cand: &ExtensionCandidate,
) -> Option<TreeRef> {
    if cand.downward {
        let node = match e.map[cand.attach] {
            TreeRef::Node(n) => n,
            TreeRef::Leaf { .. } => return None,
        };
        let target = tree.child_at(node, cand.position)?;
        match (cand.leaf, target) {
            (true, TreeRef::Leaf { .. }) => {
                (tree.leaf_token(target)?.text == cand.label_or_text).then_some(target)
            }
            (false, TreeRef::Node(m)) => {
                (tree.label(m) == cand.label_or_text).then_some(target)
            }
            _ => None,
        }
    } else {
        let root_image = e.root_image(pattern);
        let (parent, pos) = tree.parent_of(root_image)?;
        (pos == cand.position && tree.label(parent) == cand.label_or_text)
            .then_some(TreeRef::Node(parent))
    }
}

fn extend_embedding(
    tree: &SimplifiedParseTree,
    pattern: &Pattern,
    e: &Embedding,
    cand: &ExtensionCandidate,
) -> Option<Embedding> {
    let image = candidate_image(tree, pattern, e, cand)?;
    let mut map = e.map.clone();
    map.push(image);
    Some(Embedding { map })
}

struct TreeLookup<'a> {
    by_id: HashMap<u32, &'a SimplifiedParseTree>,
}

impl<'a> TreeLookup<'a> {
    fn new(trees: &[(u32, &'a SimplifiedParseTree)]) -> Self {
        TreeLookup {
            by_id: trees.iter().map(|(id, t)| (*id, *t)).collect(),
        }
    }

    fn get(&self, id: u32) -> &'a SimplifiedParseTree {
        self.by_id[&id]
    }
}

/// Every syntactically possible single-vertex extension of `pattern` with
/// the number of methods that would still contain the grown pattern,
/// sorted best-first. Equivalent to recomputing oracle support for each
/// extension, but read off the existing embeddings.
pub fn enumerate_candidates(
    pattern: &Pattern,
    matches: &MatchSet,
    trees: &[(u32, &SimplifiedParseTree)],
) -> Vec<(ExtensionCandidate, usize)> {
    let lookup = TreeLookup::new(trees);
    let holes = pattern.holes();
    let mut counts: HashMap<ExtensionCandidate, usize> = HashMap::new();
    for entry in &matches.entries {
        let tree = lookup.get(entry.method);
        let mut seen: HashSet<ExtensionCandidate> = HashSet::new();
        for e in &entry.embeddings {
            for &(vertex, position) in &holes {
                let node = match e.map[vertex] {
                    TreeRef::Node(n) => n,
                    TreeRef::Leaf { .. } => continue,
                };
                let target = match tree.child_at(node, position) {
                    Some(t) => t,
                    None => continue,
                };
                let cand = match target {
                    TreeRef::Leaf { .. } => ExtensionCandidate {
                        label_or_text: tree.leaf_token(target).expect("leaf").text.clone(),
                        leaf: true,
                        position,
                        downward: true,
                        attach: vertex,
                    },
                    TreeRef::Node(m) => ExtensionCandidate {
                        label_or_text: tree.label(m).to_string(),
                        leaf: false,
                        position,
                        downward: true,
                        attach: vertex,
                    },
                };
                seen.insert(cand);
            }
            if let Some((parent, pos)) = tree.parent_of(e.root_image(pattern)) {
                seen.insert(ExtensionCandidate {
                    label_or_text: tree.label(parent).to_string(),
                    leaf: false,
                    position: pos,
                    downward: false,
                    attach: pattern.root(),
                });
            }
        }
        for cand in seen {
            *counts.entry(cand).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(ExtensionCandidate, usize)> = counts.into_iter().collect();
    out.sort_by(|(a, sa), (b, sb)| {
        sb.cmp(sa)
            .then_with(|| b.downward.cmp(&a.downward)) // downward first
            .then_with(|| a.position.cmp(&b.position))
            .then_with(|| a.leaf.cmp(&b.leaf)) // node labels before leaf texts
            .then_with(|| a.label_or_text.cmp(&b.label_or_text))
            .then_with(|| {
                pattern
                    .path_from_anchor_root(a.attach)
                    .cmp(&pattern.path_from_anchor_root(b.attach))
            })
    });
    out
}

/// Identity of an adopted extension that survives across runs: concrete
/// vertex ids differ between runs, so the attach point is recorded as a
/// path from the anchor root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CandidateSignature {
    pub label_or_text: String,
    pub leaf: bool,
    pub position: usize,
    pub downward: bool,
    pub attach_ups: usize,
    pub attach_downs: Vec<usize>,
}

impl CandidateSignature {
    fn of(pattern: &Pattern, cand: &ExtensionCandidate) -> Self {
        let (attach_ups, attach_downs) = pattern.path_from_anchor_root(cand.attach);
        CandidateSignature {
            label_or_text: cand.label_or_text.clone(),
            leaf: cand.leaf,
            position: cand.position,
            downward: cand.downward,
            attach_ups,
            attach_downs,
        }
    }
}

/// Extension signatures adopted by earlier runs; grows monotonically.
#[derive(Debug, Clone, Default)]
pub struct DiversityState {
    pub used: HashSet<CandidateSignature>,
}

/// One greedy growth pass. Returns `None` when the query is contained in
/// no sampled tree. `apply_diversity` enables the second-best override
/// used by runs after the first; `observer` sees the pattern and match set
/// after the initial containment scan and after every adopted step.
pub fn phase1_with_observer(
    trees: &[(u32, &SimplifiedParseTree)],
    query: &Pattern,
    cfg: &MiningConfig,
    diversity: &mut DiversityState,
    apply_diversity: bool,
    mut observer: impl FnMut(&Pattern, &MatchSet),
) -> Option<(Pattern, MatchSet)> {
    let lookup = TreeLookup::new(trees);
    let floor = cfg.min_support_ratio * trees.len() as f64;
    let mut pattern = query.clone();
    let mut matches = MatchSet::initial(trees, &pattern);
    if matches.is_empty() {
        return None;
    }
    observer(&pattern, &matches);
    while pattern.size() <= cfg.max_pattern_size && matches.len() as f64 > floor {
        let candidates = enumerate_candidates(&pattern, &matches, trees);
        if candidates.is_empty() {
            break;
        }
        let mut chosen = 0usize;
        if apply_diversity && candidates.len() >= 2 {
            let (second, second_support) = &candidates[1];
            let (_, best_support) = &candidates[0];
            let second_sig = CandidateSignature::of(&pattern, second);
            if !diversity.used.contains(&second_sig) && second_support * 2 >= *best_support {
                chosen = 1;
            }
        }
        let (cand, support_if_taken) = &candidates[chosen];
        // Adopt only if the grown pattern stays above the floor, so the
        // reported count always respects the threshold.
        if (*support_if_taken as f64) <= floor {
            break;
        }
        let signature = CandidateSignature::of(&pattern, cand);
        let grown = pattern
            .extend(cand)
            .expect("enumerated candidates are structurally valid");
        matches = matches.apply(&lookup, &pattern, cand);
        diversity.used.insert(signature);
        pattern = grown;
        observer(&pattern, &matches);
    }
    Some((pattern, matches))
}

/// [`phase1_with_observer`] without instrumentation.
pub fn phase1(
    trees: &[(u32, &SimplifiedParseTree)],
    query: &Pattern,
    cfg: &MiningConfig,
    diversity: &mut DiversityState,
    apply_diversity: bool,
) -> Option<(Pattern, MatchSet)> {
    phase1_with_observer(trees, query, cfg, diversity, apply_diversity, |_, _| {})
}

/// A completed example: the pattern, the winning real snippet, and its
/// representativeness score.
#[derive(Debug, Clone)]
pub struct RankedExample {
    pub pattern: Pattern,
    /// Methods containing the final pattern.
    pub support: usize,
    /// Methods mined (the sample size).
    pub total: usize,
    /// Winning method id.
    pub method: u32,
    /// Root of the minimal subtree shown as the example.
    pub snippet: NodeId,
    /// The winning method's first embedding; drives rendering.
    pub embedding: Embedding,
    /// Source span and score of each hole's filler in the winning method.
    pub fillers: Vec<FillerAssignment>,
    /// Sum of filler scores.
    pub score: usize,
    /// 1-based mining run that produced this example.
    pub run: usize,
    /// Phase-2 score of every match-set method, for evaluation baselines.
    pub method_scores: Vec<(u32, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FillerAssignment {
    pub vertex: PVertexId,
    pub position: usize,
    pub span: Span,
    pub score: usize,
}

/// Tree-order key for picking "the first embedding" deterministically.
fn embedding_order_key(pattern: &Pattern, e: &Embedding) -> (usize, usize) {
    match e.root_image(pattern) {
        TreeRef::Node(n) => (n, 0),
        TreeRef::Leaf { node, elem } => (node, elem + 1),
    }
}

fn first_embedding<'a>(pattern: &Pattern, entry: &'a MatchEntry) -> &'a Embedding {
    entry
        .embeddings
        .iter()
        .min_by_key(|e| embedding_order_key(pattern, e))
        .expect("match entries hold at least one embedding")
}

/// Filler identity: the fragment's token text sequence, whitespace between
/// tokens ignored.
fn filler_key(tree: &SimplifiedParseTree, fragment: TreeRef) -> Vec<String> {
    tree.fragment_tokens(fragment)
        .iter()
        .map(|t| t.text.to_string())
        .collect()
}

/// Completes a mined pattern: assigns each hole its filler per method,
/// scores fillers by cross-method occurrence (zeroed past the size caps),
/// and returns the best-scoring method's minimal subtree.
pub fn phase2(
    pattern: &Pattern,
    matches: &MatchSet,
    trees: &[(u32, &SimplifiedParseTree)],
    total: usize,
    cfg: &MiningConfig,
    run: usize,
) -> Option<RankedExample> {
    if matches.is_empty() {
        return None;
    }
    let lookup = TreeLookup::new(trees);
    let holes = pattern.holes();

    // Fillers per method per hole, from each method's first embedding.
    struct Filler {
        key: Vec<String>,
        span: Span,
        tokens: usize,
    }
    let mut per_method: Vec<(u32, Vec<Option<Filler>>)> = Vec::with_capacity(matches.len());
    let mut occurrence: Vec<HashMap<Vec<String>, usize>> = vec![HashMap::new(); holes.len()];
    for entry in &matches.entries {
        let tree = lookup.get(entry.method);
        let e = first_embedding(pattern, entry);
        let mut fillers = Vec::with_capacity(holes.len());
        for (h, &(vertex, position)) in holes.iter().enumerate() {
            let filler = match e.map[vertex] {
                TreeRef::Node(n) => tree.child_at(n, position).map(|fragment| {
                    let key = filler_key(tree, fragment);
                    let span = tree.span_of(fragment);
                    let tokens = key.len();
                    Filler { key, span, tokens }
                }),
                TreeRef::Leaf { .. } => None,
            };
            if let Some(f) = &filler {
                *occurrence[h].entry(f.key.clone()).or_insert(0) += 1;
            }
            fillers.push(filler);
        }
        per_method.push((entry.method, fillers));
    }

    // Score each method: the sum over holes of how many methods share its
    // filler, zeroed when the filler is too long to show.
    let mut scored: Vec<(u32, usize, Vec<FillerAssignment>)> = Vec::with_capacity(per_method.len());
    for (method, fillers) in &per_method {
        let mut assignments = Vec::with_capacity(holes.len());
        let mut score = 0usize;
        for (h, filler) in fillers.iter().enumerate() {
            let (vertex, position) = holes[h];
            if let Some(f) = filler {
                let filler_score = if f.tokens > cfg.max_filler_tokens
                    || f.span.len() > cfg.max_filler_chars
                {
                    0
                } else {
                    occurrence[h][&f.key]
                };
                score += filler_score;
                assignments.push(FillerAssignment {
                    vertex,
                    position,
                    span: f.span,
                    score: filler_score,
                });
            }
        }
        scored.push((*method, score, assignments));
    }

    let method_scores: Vec<(u32, usize)> = scored.iter().map(|(m, s, _)| (*m, *s)).collect();
    let winner = scored
        .iter()
        .enumerate()
        .min_by(|(ia, (ma, sa, _)), (ib, (mb, sb, _))| {
            let span_a = winner_span(pattern, &matches.entries[*ia], lookup.get(*ma));
            let span_b = winner_span(pattern, &matches.entries[*ib], lookup.get(*mb));
            sb.cmp(sa)
                .then_with(|| span_a.len().cmp(&span_b.len()))
                .then_with(|| ma.cmp(mb))
        })
        .map(|(i, _)| i)?;

    let (method, score, fillers) = scored.swap_remove(winner);
    let entry = matches
        .entries
        .iter()
        .find(|e| e.method == method)
        .expect("winner comes from the match set");
    let tree = lookup.get(method);
    let embedding = first_embedding(pattern, entry).clone();
    let snippet = minimal_subtree(tree, pattern, &embedding);
    Some(RankedExample {
        pattern: pattern.clone(),
        support: matches.len(),
        total,
        method,
        snippet,
        embedding,
        fillers,
        score,
        run,
        method_scores,
    })
}

fn winner_span(pattern: &Pattern, entry: &MatchEntry, tree: &SimplifiedParseTree) -> Span {
    let e = first_embedding(pattern, entry);
    let node = minimal_subtree(tree, pattern, e);
    tree.node(node).span
}

/// Everything a query run produced, including provenance for the header
/// counts and diagnostics for empty results.
#[derive(Debug)]
pub struct MiningResult {
    pub query: String,
    /// Sample size |T|; the denominator in "found in X out of Y samples".
    pub total: usize,
    /// Prefilter hits before pattern verification.
    pub candidates: usize,
    /// Methods whose trees actually contain the query pattern.
    pub verified: usize,
    pub seed: u64,
    pub examples: Vec<RankedExample>,
    pub diagnostics: Vec<String>,
}

/// End-to-end mining: prefilter, verify, sample once, then
/// `cfg.example_count` sequential growth runs sharing one
/// [`DiversityState`]. Runs whose pattern duplicates an earlier run's are
/// dropped; output stays in run order.
pub fn mine_examples(
    index: &CorpusIndex,
    adapter: &dyn ParserAdapter,
    query: &str,
    cfg: &MiningConfig,
) -> Result<MiningResult, QueryError> {
    let pattern = parse_query(query, adapter)?;
    let tokens = pattern_tokens(&pattern);
    if tokens.is_empty() {
        return Err(QueryError {
            message: "query has no searchable (non-keyword) tokens".into(),
            offset: 0,
        });
    }
    let token_refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
    let candidates = index.lookup(&token_refs);
    let verified: Vec<u32> = candidates
        .iter()
        .copied()
        .filter(|id| {
            index
                .record(*id)
                .map(|r| !contains_pattern(&r.tree, &pattern).is_empty())
                .unwrap_or(false)
        })
        .collect();
    let mut result = MiningResult {
        query: query.to_string(),
        total: 0,
        candidates: candidates.len(),
        verified: verified.len(),
        seed: cfg.seed,
        examples: Vec::new(),
        diagnostics: Vec::new(),
    };
    if verified.is_empty() {
        result.diagnostics.push(format!(
            "no usages found: {} prefilter hit(s), none containing the query pattern",
            candidates.len()
        ));
        return Ok(result);
    }
    let sample: CorpusSample = sample(&verified, cfg.max_samples, cfg.seed, query);
    let trees: Vec<(u32, &SimplifiedParseTree)> = sample
        .sampled
        .iter()
        .map(|id| (*id, &index.record(*id).expect("sampled id exists").tree))
        .collect();
    result.total = trees.len();

    let mut diversity = DiversityState::default();
    let mut seen_patterns: HashSet<String> = HashSet::new();
    for run in 1..=cfg.example_count {
        let grown = phase1(&trees, &pattern, cfg, &mut diversity, run > 1);
        let (mined, matches) = match grown {
            Some(pair) => pair,
            None => {
                result
                    .diagnostics
                    .push(format!("run {}: query not contained in any sampled tree", run));
                break;
            }
        };
        if !seen_patterns.insert(mined.canonical_key()) {
            continue;
        }
        if let Some(example) = phase2(&mined, &matches, &trees, trees.len(), cfg, run) {
            result.examples.push(example);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::python::PythonAdapter;
    use crate::adapters::MethodSource;

    fn tree(source: &str) -> SimplifiedParseTree {
        let src = MethodSource {
            path: "t.py".into(),
            name: "t".into(),
            line: 1,
            source: source.into(),
        };
        PythonAdapter.parse_method(&src).unwrap()
    }

    fn as_refs(trees: &[SimplifiedParseTree]) -> Vec<(u32, &SimplifiedParseTree)> {
        trees.iter().enumerate().map(|(i, t)| (i as u32, t)).collect()
    }

    #[test]
    fn defaults_match_shipped_configuration() {
        let cfg = MiningConfig::default();
        assert_eq!(cfg.max_pattern_size, 100);
        assert_eq!(cfg.min_support_ratio, 0.05);
        assert_eq!(cfg.max_filler_tokens, 5);
        assert_eq!(cfg.max_filler_chars, 50);
        assert_eq!(cfg.example_count, 3);
        assert_eq!(cfg.max_samples, 2000);
    }

    #[test]
    fn parse_query_forms() {
        let adapter = PythonAdapter;
        let p = parse_query("write", &adapter).unwrap();
        assert_eq!(p.size(), 1);
        assert_eq!(pattern_tokens(&p), vec!["write"]);

        let p = parse_query("json.dump", &adapter).unwrap();
        assert_eq!(p.size(), 3);
        assert_eq!(pattern_tokens(&p), vec!["json", "dump"]);
        match p.vertex(p.root()) {
            PVertex::Node { label, .. } => assert_eq!(label, "#.#"),
            PVertex::Leaf { .. } => panic!("expected node root"),
        }

        assert!(parse_query("foo(", &adapter).is_err());
    }

    #[test]
    fn support_counts_methods_not_occurrences() {
        let corpus = vec![tree("f(x)\nf(y)\n"), tree("f(z)"), tree("g(x)")];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f");
        assert_eq!(support(&p, &refs), 2);
    }

    #[test]
    fn enumerate_candidates_counts_methods() {
        let corpus = vec![tree("f(x)"), tree("f(y)"), tree("g(x)")];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f");
        let matches = MatchSet::initial(&refs, &p);
        assert_eq!(matches.len(), 2);
        let candidates = enumerate_candidates(&p, &matches, &refs);
        assert_eq!(candidates.len(), 1);
        let (cand, sup) = &candidates[0];
        assert_eq!(sup, &2);
        assert_eq!(cand.label_or_text, "#(#)");
        assert!(!cand.downward);
        assert_eq!(cand.position, 1);

        // Exhaustiveness: enumerated support equals oracle support of the
        // extended pattern.
        let grown = p.extend(cand).unwrap();
        assert_eq!(support(&grown, &refs), *sup);
    }

    #[test]
    fn distinct_leaf_texts_are_distinct_candidates() {
        let corpus = vec![tree("f(x)"), tree("f(y)")];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let matches = MatchSet::initial(&refs, &p);
        let candidates = enumerate_candidates(&p, &matches, &refs);
        let leaf_cands: Vec<&str> = candidates
            .iter()
            .filter(|(c, _)| c.leaf)
            .map(|(c, _)| c.label_or_text.as_str())
            .collect();
        assert_eq!(leaf_cands, vec!["x", "y"]);
    }

    #[test]
    fn phase1_grows_to_full_tree_at_low_alpha() {
        let corpus = vec![tree("f(x)"), tree("f(y)"), tree("g(x)")];
        let refs = as_refs(&corpus);
        let q = Pattern::leaf("f");
        let cfg = MiningConfig::default();
        let mut div = DiversityState::default();
        let (p, m) = phase1(&refs, &q, &cfg, &mut div, false).unwrap();
        // alpha=0.05: floor is 0.15 methods, so growth continues into one
        // concrete method; the tie-break picks leaf `x`.
        assert_eq!(p.canonical_key(), "(#(#)|'f','x')");
        assert_eq!(m.len(), 1);
        assert_eq!(support(&p, &refs), 1);
    }

    #[test]
    fn phase1_respects_support_floor() {
        let corpus = vec![tree("f(x)"), tree("f(y)"), tree("g(x)")];
        let refs = as_refs(&corpus);
        let q = Pattern::leaf("f");
        let cfg = MiningConfig {
            min_support_ratio: 0.4,
            ..MiningConfig::default()
        };
        let mut div = DiversityState::default();
        let (p, m) = phase1(&refs, &q, &cfg, &mut div, false).unwrap();
        // floor = 1.2: adopting x or y would drop support to 1, so growth
        // stops at `f(HOLE)` with support 2.
        assert_eq!(p.canonical_key(), "(#(#)|'f',_)");
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn phase1_size_cap_checked_before_adoption() {
        let corpus = vec![tree("f(g(h(i(j(x)))))")];
        let refs = as_refs(&corpus);
        let q = Pattern::leaf("x");
        let cfg = MiningConfig {
            max_pattern_size: 3,
            min_support_ratio: 0.05,
            ..MiningConfig::default()
        };
        let mut div = DiversityState::default();
        let (p, _) = phase1(&refs, &q, &cfg, &mut div, false).unwrap();
        assert!(p.size() <= 4, "size check precedes the adopting iteration");
    }

    #[test]
    fn phase1_missing_query_signals_empty() {
        let corpus = vec![tree("g(x)")];
        let refs = as_refs(&corpus);
        let q = Pattern::leaf("f");
        let mut div = DiversityState::default();
        assert!(phase1(&refs, &q, &MiningConfig::default(), &mut div, false).is_none());
    }

    #[test]
    fn phase2_prefers_common_fillers_and_breaks_ties_by_id() {
        let corpus = vec![tree("f(x)"), tree("f(y)")];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let matches = MatchSet::initial(&refs, &p);
        let ex = phase2(&p, &matches, &refs, 2, &MiningConfig::default(), 1).unwrap();
        // Both fillers occur once; the tie-break picks the lower id.
        assert_eq!(ex.method, 0);
        assert_eq!(ex.score, 1);
        assert_eq!(ex.support, 2);
        assert_eq!(ex.fillers.len(), 1);
    }

    #[test]
    fn phase2_zeroes_oversized_fillers() {
        // Filler `a + b + c + d` has 7 tokens; `x` has 1.
        let corpus = vec![
            tree("f(a + b + c + d)"),
            tree("f(x)"),
            tree("f(x)\ng(x)\n"),
        ];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f")
            .extend(&ExtensionCandidate {
                label_or_text: "#(#)".into(),
                leaf: false,
                position: 1,
                downward: false,
                attach: 0,
            })
            .unwrap();
        let matches = MatchSet::initial(&refs, &p);
        let ex = phase2(&p, &matches, &refs, 3, &MiningConfig::default(), 1).unwrap();
        let scores: HashMap<u32, usize> = ex.method_scores.iter().copied().collect();
        assert_eq!(scores[&0], 0, "7-token filler scores zero");
        assert_eq!(scores[&1], 2, "shared filler `x` occurs in two methods");
        assert_eq!(scores[&2], 2);
        assert_eq!(ex.method, 1, "winner by score then lower id");
    }

    #[test]
    fn phase2_emits_example_for_hole_free_pattern() {
        let corpus = vec![tree("f(x)"), tree("f(x)")];
        let refs = as_refs(&corpus);
        let p = Pattern::leaf("f");
        let matches = MatchSet::initial(&refs, &p);
        let ex = phase2(&p, &matches, &refs, 2, &MiningConfig::default(), 1).unwrap();
        assert_eq!(ex.score, 0);
        assert_eq!(ex.method, 0);
    }

    #[test]
    fn single_run_equals_base_greedy_result() {
        let sources = [
            "def a(x):\n    emit(x, sink)\n",
            "def b(y):\n    emit(y, sink)\n",
            "def c(z):\n    note = z\n    emit(z, sink)\n",
        ];
        let corpus: Vec<SimplifiedParseTree> = sources.iter().map(|s| tree(s)).collect();
        let refs = as_refs(&corpus);
        let methods: Vec<(MethodSource, SimplifiedParseTree)> = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (
                    MethodSource {
                        path: "em.py".into(),
                        name: format!("m{}", i),
                        line: i * 8 + 1,
                        source: (*s).into(),
                    },
                    tree(s),
                )
            })
            .collect();
        let index = crate::corpus::CorpusIndex::build(methods, "python").unwrap();
        let cfg = MiningConfig {
            example_count: 1,
            min_support_ratio: 0.5,
            ..MiningConfig::default()
        };
        let result = mine_examples(&index, &PythonAdapter, "emit", &cfg).unwrap();
        assert_eq!(result.examples.len(), 1);

        let q = parse_query("emit", &PythonAdapter).unwrap();
        let mut div = DiversityState::default();
        let (base_pattern, base_matches) = phase1(&refs, &q, &cfg, &mut div, false).unwrap();
        assert_eq!(
            result.examples[0].pattern.canonical_key(),
            base_pattern.canonical_key()
        );
        assert_eq!(result.examples[0].support, base_matches.len());
    }

    #[test]
    fn incremental_matchset_agrees_with_oracle_while_growing() {
        let sources = [
            "with open(p, 'w') as f:\n    json.dump(d, f)\n",
            "if ok:\n    with open(path, 'w') as f:\n        json.dump(data, f)\n",
            "json.dump(x, out)\n",
            "with open(q) as f:\n    body = f.read()\n",
        ];
        let corpus: Vec<SimplifiedParseTree> = sources.iter().map(|s| tree(s)).collect();
        let refs = as_refs(&corpus);
        let q = parse_query("json.dump", &PythonAdapter).unwrap();
        let cfg = MiningConfig {
            min_support_ratio: 0.4,
            ..MiningConfig::default()
        };
        let mut div = DiversityState::default();
        let mut checked = 0;
        phase1_with_observer(&refs, &q, &cfg, &mut div, false, |p, m| {
            let oracle: Vec<u32> = refs
                .iter()
                .filter(|(_, t)| !contains_pattern(t, p).is_empty())
                .map(|(id, _)| *id)
                .collect();
            let incremental: Vec<u32> = m.methods().collect();
            assert_eq!(incremental, oracle);
            for entry in &m.entries {
                let t = refs[entry.method as usize].1;
                let mut mine: Vec<_> = entry.embeddings.iter().map(|e| e.map.clone()).collect();
                let mut oracle_embs: Vec<_> =
                    contains_pattern(t, p).iter().map(|e| e.map.clone()).collect();
                mine.sort();
                oracle_embs.sort();
                assert_eq!(mine, oracle_embs);
                for e in &entry.embeddings {
                    e.check(p, t).unwrap();
                }
            }
            checked += 1;
        })
        .unwrap();
        assert!(checked > 1);
    }
}

//! Quantitative evaluation: succinctness and representativeness metrics,
//! a random code-search baseline, and batch comparison reports.
//!
//! The baseline stands in for an arbitrary code search result: the line
//! where the queried method is called plus the two lines before and after,
//! clipped to the method. Its representativeness is the containing
//! method's completion score when that method is in the mined match set,
//! zero otherwise.

use crate::corpus::CorpusIndex;
use crate::miner::{mine_examples, MiningConfig, RankedExample};
use crate::render::layout;
use crate::rng::SplitMix64;
use crate::adapters::ParserAdapter;
use rayon::prelude::*;
use crate::syntax::TokenKind;
use std::collections::HashMap;
use std::fmt;

/// A randomly drawn code-search stand-in.
#[derive(Debug, Clone)]
pub struct BaselineSnippet {
    pub method: u32,
    /// 1-based call line within the method.
    pub line: usize,
    /// The call line plus two lines of context either side, clipped.
    pub slice: String,
    pub seed: u64,
}

/// Whether baseline sampling is uniform over call sites or over methods
/// (then over call sites within the drawn method).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaselineMode {
    #[default]
    CallSites,
    Methods,
}

/// Lines that are neither empty nor comment-only.
pub fn succinctness(code: &str, comment_prefix: &str) -> usize {
    code.lines()
        .filter(|line| {
            let t = line.trim();
            !t.is_empty() && !(!comment_prefix.is_empty() && t.starts_with(comment_prefix))
        })
        .count()
}

/// Representativeness of a mined example: its completion score.
pub fn representativeness(ex: &RankedExample) -> usize {
    ex.score
}

/// Representativeness of a baseline snippet against a mined example: the
/// containing method's completion score when it is in the final match
/// set, else zero.
pub fn baseline_representativeness(snippet: &BaselineSnippet, ex: &RankedExample) -> usize {
    ex.method_scores
        .iter()
        .find(|(m, _)| *m == snippet.method)
        .map(|(_, s)| *s)
        .unwrap_or(0)
}

/// Lines of a method (1-based) on which every query token occurs as a
/// non-keyword token.
fn call_sites(index: &CorpusIndex, method: u32, query_tokens: &[&str]) -> Vec<usize> {
    let record = match index.record(method) {
        Some(r) => r,
        None => return Vec::new(),
    };
    let source = record.tree.source();
    let mut per_line: HashMap<usize, Vec<&str>> = HashMap::new();
    for tok in record.tree.token_stream() {
        if tok.kind == TokenKind::NonKeyword {
            let line = source[..tok.span.start].matches('\n').count() + 1;
            per_line.entry(line).or_default().push(tok.text);
        }
    }
    let mut lines: Vec<usize> = per_line
        .into_iter()
        .filter(|(_, toks)| query_tokens.iter().all(|q| toks.contains(q)))
        .map(|(line, _)| line)
        .collect();
    lines.sort_unstable();
    lines
}

/// Draws one baseline snippet, uniformly and deterministically. `None`
/// when no method has a line holding every query token.
pub fn random_baseline(
    index: &CorpusIndex,
    query_tokens: &[&str],
    seed: u64,
    mode: BaselineMode,
) -> Option<BaselineSnippet> {
    let candidates = index.lookup(query_tokens);
    let sites: Vec<(u32, Vec<usize>)> = candidates
        .iter()
        .map(|&id| (id, call_sites(index, id, query_tokens)))
        .filter(|(_, lines)| !lines.is_empty())
        .collect();
    if sites.is_empty() {
        return None;
    }
    let mut rng = SplitMix64::new(seed);
    let (method, line) = match mode {
        BaselineMode::CallSites => {
            let flat: Vec<(u32, usize)> = sites
                .iter()
                .flat_map(|(id, lines)| lines.iter().map(move |&l| (*id, l)))
                .collect();
            flat[rng.next_below(flat.len())]
        }
        BaselineMode::Methods => {
            let (id, lines) = &sites[rng.next_below(sites.len())];
            (*id, lines[rng.next_below(lines.len())])
        }
    };
    let source = index.record(method)?.tree.source();
    let lines: Vec<&str> = source.lines().collect();
    let first = line.saturating_sub(3); // two lines before, 0-based
    let last = (line + 2).min(lines.len());
    let slice = lines[first..last].join("\n");
    Some(BaselineSnippet {
        method,
        line,
        slice,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    Eg,
    Baseline,
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // pad() so column widths in reports apply.
        f.pad(match self {
            System::Eg => "eg",
            System::Baseline => "baseline",
        })
    }
}

/// One measurement: a query, under one system.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub query: String,
    pub system: System,
    pub length: usize,
    pub representativeness: usize,
    /// False for queries with zero hits; flagged rows are excluded from
    /// the means.
    pub ok: bool,
}

/// A batch comparison over a query set.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<MetricsRow>,
    pub mean_eg_length: f64,
    pub mean_baseline_length: f64,
    pub mean_eg_representativeness: f64,
    pub mean_baseline_representativeness: f64,
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub seed: u64,
    pub baseline_mode: BaselineMode,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            baseline_mode: BaselineMode::CallSites,
        }
    }
}

/// Mines each query, measures the top example and one baseline draw, and
/// aggregates the means over the unflagged rows. Queries are measured in
/// parallel; row order stays query order.
pub fn compare(
    index: &CorpusIndex,
    adapter: &dyn ParserAdapter,
    queries: &[String],
    mining: &MiningConfig,
    eval: &EvalConfig,
) -> CompareReport {
    let comment_prefix = adapter.line_comment_prefix();
    let per_query: Vec<[MetricsRow; 2]> = queries
        .par_iter()
        .map(|query| {
            let flagged = |system: System| MetricsRow {
                query: query.clone(),
                system,
                length: 0,
                representativeness: 0,
                ok: false,
            };
            let mined = mine_examples(index, adapter, query, mining).ok();
            let top = match mined.as_ref().and_then(|r| r.examples.first()) {
                Some(ex) => ex,
                None => return [flagged(System::Eg), flagged(System::Baseline)],
            };
            let snippet = layout(top, index).expect("mined example references the store");
            let eg_row = MetricsRow {
                query: query.clone(),
                system: System::Eg,
                length: succinctness(&snippet.code, comment_prefix),
                representativeness: representativeness(top),
                ok: true,
            };
            // Baseline candidates come from the query's own tokens, not
            // the grown pattern's.
            let tokens = crate::miner::parse_query(query, adapter)
                .map(|p| crate::miner::pattern_tokens(&p))
                .unwrap_or_default();
            let token_refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let baseline_row = match random_baseline(index, &token_refs, eval.seed, eval.baseline_mode)
            {
                Some(baseline) => MetricsRow {
                    query: query.clone(),
                    system: System::Baseline,
                    length: succinctness(&baseline.slice, comment_prefix),
                    representativeness: baseline_representativeness(&baseline, top),
                    ok: true,
                },
                None => flagged(System::Baseline),
            };
            [eg_row, baseline_row]
        })
        .collect();
    let rows: Vec<MetricsRow> = per_query.into_iter().flatten().collect();
    let mean = |system: System, field: fn(&MetricsRow) -> usize| -> f64 {
        let values: Vec<usize> = rows
            .iter()
            .filter(|r| r.system == system && r.ok)
            .map(field)
            .collect();
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<usize>() as f64 / values.len() as f64
        }
    };
    CompareReport {
        mean_eg_length: mean(System::Eg, |r| r.length),
        mean_baseline_length: mean(System::Baseline, |r| r.length),
        mean_eg_representativeness: mean(System::Eg, |r| r.representativeness),
        mean_baseline_representativeness: mean(System::Baseline, |r| r.representativeness),
        rows,
    }
}

impl CompareReport {
    /// Aligned-text rendering of the per-query rows and the means.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:<9} {:>7} {:>18} {:>8}\n",
            "query", "system", "length", "representativeness", "status"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<24} {:<9} {:>7} {:>18} {:>8}\n",
                row.query,
                row.system,
                row.length,
                row.representativeness,
                if row.ok { "ok" } else { "no-results" }
            ));
        }
        out.push_str(&format!(
            "{:<24} {:<9} {:>7.3} {:>18.3}\n",
            "(mean)", "eg", self.mean_eg_length, self.mean_eg_representativeness
        ));
        out.push_str(&format!(
            "{:<24} {:<9} {:>7.3} {:>18.3}\n",
            "(mean)", "baseline", self.mean_baseline_length, self.mean_baseline_representativeness
        ));
        out
    }

    /// CSV rendering: per-query rows then two mean rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,system,length,representativeness,status\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&row.query),
                row.system,
                row.length,
                row.representativeness,
                if row.ok { "ok" } else { "no-results" }
            ));
        }
        out.push_str(&format!(
            "(mean),eg,{},{},ok\n",
            self.mean_eg_length, self.mean_eg_representativeness
        ));
        out.push_str(&format!(
            "(mean),baseline,{},{},ok\n",
            self.mean_baseline_length, self.mean_baseline_representativeness
        ));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

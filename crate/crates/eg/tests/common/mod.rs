#![allow(dead_code)] // each integration test compiles its own view of this module

//! Shared fixture builders for the integration and acceptance suites.
//!
//! The synthetic corpora are constructed so the mining outcome is forced:
//! planted idioms repeat verbatim (up to filler names) while every other
//! structural choice stays in groups small enough that the support floor
//! rejects it. Wrapper shapes give each method a distinct or rare
//! (parent label, child position) pair so upward growth stops where the
//! fixture intends.

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::corpus::CorpusIndex;
use eg::syntax::{
    Element, ExtensionCandidate, Pattern, PVertex, SimplifiedParseTree, Span, Token, TokenKind,
};

pub fn method(
    path: &str,
    name: &str,
    line: usize,
    source: &str,
) -> (MethodSource, SimplifiedParseTree) {
    let src = MethodSource {
        path: path.to_string(),
        name: name.to_string(),
        line,
        source: source.to_string(),
    };
    let tree = PythonAdapter
        .parse_method(&src)
        .unwrap_or_else(|e| panic!("fixture method {} does not parse: {}\n{}", name, e, source));
    let violations = tree.validate();
    assert!(violations.is_empty(), "fixture {}: {:?}", name, violations);
    (src, tree)
}

pub fn build_index(methods: Vec<(MethodSource, SimplifiedParseTree)>) -> CorpusIndex {
    CorpusIndex::build(methods, "python").expect("fixture corpus builds")
}

/// Wraps `inner` (unindented statement lines) into a method body, using
/// one of 33 wrapper shapes. Each shape gives the inner statement a
/// different (parent label, position) pair, so no two wrappers feed the
/// same upward extension candidate.
pub fn wrap_stmt(shape: usize, method_name: &str, inner: &[&str]) -> String {
    let indent = |lines: &[&str], by: usize| -> String {
        lines
            .iter()
            .map(|l| format!("{}{}\n", " ".repeat(by), l))
            .collect()
    };
    let pads = [
        "self.counter += 1",
        "note = 'sync'",
        "self.log.append(base)",
        "probe = len(base)",
        "self.last = base",
        "tick = 1",
    ];
    let header = format!("def {}(self, base):\n", method_name);
    // Shape 0: the inner statement is the whole body.
    if shape == 0 {
        return format!("{}{}", header, indent(inner, 4));
    }
    // Shapes 1..=27: suites of size 2..=7 with the inner at each position.
    let mut k = 1;
    for size in 2..=7usize {
        for pos in 0..size {
            if k == shape {
                let mut body = String::new();
                let mut pad_i = 0;
                for slot in 0..size {
                    if slot == pos {
                        body.push_str(&indent(inner, 4));
                    } else {
                        body.push_str(&format!("    {}\n", pads[pad_i % pads.len()]));
                        pad_i += 1;
                    }
                }
                return format!("{}{}", header, body);
            }
            k += 1;
        }
    }
    // Shapes 28..=32: compound statements whose body is exactly the inner.
    match shape {
        28 => format!("{}    if self.enabled:\n{}", header, indent(inner, 8)),
        29 => format!("{}    for entry in self.batches:\n{}", header, indent(inner, 8)),
        30 => format!("{}    while self.pending:\n{}", header, indent(inner, 8)),
        31 => format!("{}    with self.lock:\n{}", header, indent(inner, 8)),
        32 => format!(
            "{}    try:\n{}    except OSError:\n        self.counter += 1\n",
            header,
            indent(inner, 8)
        ),
        _ => panic!("wrapper shape {} out of range", shape),
    }
}

/// Two-variant fixture: 60 methods guard `makedirs` with `exists`, 40
/// with `isdir`, and 100 call it in scattered contexts. Every leaf and
/// wrapper group stays at or below ten methods, the support floor for a
/// 200-method sample at the default ratio.
pub fn makedirs_fixture() -> Vec<(MethodSource, SimplifiedParseTree)> {
    let dirs = [
        "out_dir", "target_dir", "cache_dir", "log_dir", "model_dir", "data_dir", "tmp_dir",
        "ckpt_dir",
    ];
    let mut methods = Vec::new();
    for i in 0..200usize {
        let dir = dirs[i % dirs.len()];
        let shape = i % 15;
        let inner_guarded_exists = [
            format!("if not exists({}):", dir),
            format!("    makedirs({})", dir),
        ];
        let inner_guarded_isdir = [
            format!("if not isdir({}):", dir),
            format!("    makedirs({})", dir),
        ];
        let inner_plain = [format!("makedirs({})", dir)];
        let inner: Vec<&str> = if i < 60 {
            inner_guarded_exists.iter().map(String::as_str).collect()
        } else if i < 100 {
            inner_guarded_isdir.iter().map(String::as_str).collect()
        } else {
            inner_plain.iter().map(String::as_str).collect()
        };
        let name = format!("prepare_{:03}", i);
        let source = wrap_stmt(shape, &name, &inner);
        methods.push(method("fs_tasks.py", &name, i * 16 + 1, &source));
    }
    methods
}

/// Planted-pattern fixture: `report.save(#, fmt, strict)` (seven pattern
/// vertices) appears in 60 of 200 methods; the rest call `report.save`
/// with one diverse argument.
pub fn planted_fixture() -> Vec<(MethodSource, SimplifiedParseTree)> {
    let xs = [
        "summary", "rollup", "digest", "metrics", "totals", "audit", "ledger", "counts",
    ];
    let words = [
        "alpha", "beta", "gamma", "delta", "omega", "sigma", "theta", "kappa", "lambda_", "zeta",
    ];
    let mut methods = Vec::new();
    for i in 0..200usize {
        let shape = i % 15;
        let inner: Vec<String> = if i < 60 {
            vec![format!("report.save({}, fmt, strict)", xs[i % xs.len()])]
        } else {
            let j = i - 60; // 140 scattered arg shapes, each group under ten
            if j < 70 {
                vec![format!("report.save({})", words[j % words.len()])]
            } else if j < 77 {
                vec![format!("report.save(self.slot_{})", j)]
            } else if j < 84 {
                vec![format!("report.save(build_{}())", j)]
            } else if j < 91 {
                vec![format!("report.save(rows[{}])", j)]
            } else if j < 106 {
                let s = ["'alpha'", "'beta'", "'gamma'"][(j - 91) % 3];
                vec![format!("report.save({})", s)]
            } else {
                vec![format!("report.save({})", j)]
            }
        };
        let inner_refs: Vec<&str> = inner.iter().map(String::as_str).collect();
        let name = format!("flush_{:03}", i);
        let source = wrap_stmt(shape, &name, &inner_refs);
        methods.push(method("reporting.py", &name, i * 16 + 1, &source));
    }
    methods
}

/// The seven-vertex pattern planted by [`planted_fixture`]:
/// `report.save(HOLE, fmt, strict)`.
pub fn planted_pattern() -> Pattern {
    let q = eg::miner::parse_query("report.save", &PythonAdapter).unwrap();
    let call = q
        .extend(&ExtensionCandidate {
            label_or_text: "#(#)".into(),
            leaf: false,
            position: 1,
            downward: false,
            attach: q.root(),
        })
        .unwrap();
    let args = call
        .extend(&ExtensionCandidate {
            label_or_text: "#,#,#".into(),
            leaf: false,
            position: 2,
            downward: true,
            attach: call.root(),
        })
        .unwrap();
    let args_vertex = args.size() - 1;
    let with_fmt = args
        .extend(&ExtensionCandidate {
            label_or_text: "fmt".into(),
            leaf: true,
            position: 2,
            downward: true,
            attach: args_vertex,
        })
        .unwrap();
    let full = with_fmt
        .extend(&ExtensionCandidate {
            label_or_text: "strict".into(),
            leaf: true,
            position: 3,
            downward: true,
            attach: args_vertex,
        })
        .unwrap();
    assert_eq!(full.size(), 7);
    full
}

/// True when every vertex and edge of `needle` appears in `haystack`
/// (holes in the needle are unconstrained).
pub fn pattern_contains(haystack: &Pattern, needle: &Pattern) -> bool {
    fn matches(hay: &Pattern, needle: &Pattern, nv: usize, hv: usize) -> bool {
        match (needle.vertex(nv), hay.vertex(hv)) {
            (PVertex::Leaf { text: a }, PVertex::Leaf { text: b }) => a == b,
            (
                PVertex::Node {
                    label: la,
                    children: ca,
                },
                PVertex::Node {
                    label: lb,
                    children: cb,
                },
            ) => {
                la == lb
                    && ca.iter().enumerate().all(|(i, c)| match c {
                        None => true,
                        Some(nc) => match cb[i] {
                            Some(hc) => matches(hay, needle, *nc, hc),
                            None => false,
                        },
                    })
            }
            _ => false,
        }
    }
    haystack
        .vertices()
        .any(|(hv, _)| matches(haystack, needle, needle.root(), hv))
}

/// Thirty-method corpus seeding the dump-to-open-file idiom: 29 methods
/// share it (with unique fillers and 29 distinct wrappers) and one calls
/// the query differently. Method `m00` carries the canonical fillers and
/// the shortest snippet, so it wins the completion tie-break.
pub fn golden_fixture() -> Vec<(MethodSource, SimplifiedParseTree)> {
    let mut methods = Vec::new();
    for i in 0..30usize {
        let name = format!("m{:02}", i);
        let source = if i == 0 {
            wrap_stmt(
                0,
                &name,
                &[
                    "with open(self.output_path, 'w') as f:",
                    "    json.dump(data, f)",
                ],
            )
        } else if i < 29 {
            // Longer fillers than m00 so its snippet span stays minimal.
            let filler1 = format!("staging_area_{:02}_path", i);
            let filler2 = format!("payload_obj_{:02}", i);
            let lines = [
                format!("with open({}, 'w') as f:", filler1),
                format!("    json.dump({}, f)", filler2),
            ];
            let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            wrap_stmt(i, &name, &refs)
        } else {
            wrap_stmt(1, &name, &["json.dump(record, fp, indent=2)"])
        };
        methods.push(method("golden.py", &name, i * 12 + 1, &source));
    }
    methods
}

/// Evaluation fixture: ten query APIs, each with eight methods sharing a
/// one-line idiom (`api(handle, <var>)`, one variant name repeated four
/// times) and 92 methods using the API in scattered shapes.
pub fn eval_fixture() -> (Vec<(MethodSource, SimplifiedParseTree)>, Vec<String>) {
    let apis = [
        "push_metric",
        "emit_event",
        "store_blob",
        "flush_queue",
        "track_span",
        "log_audit",
        "sync_state",
        "warm_cache",
        "seal_batch",
        "grant_role",
    ];
    let scattered_words = [
        "alpha", "beta", "gamma", "delta", "omega", "sigma", "theta", "kappa", "minor", "zeta",
    ];
    let mut methods = Vec::new();
    for (a, api) in apis.iter().enumerate() {
        for i in 0..100usize {
            let inner: Vec<String> = if i < 8 {
                // Idiom group: shared first argument, one second-argument
                // name used by half the group.
                let var = if i < 4 {
                    "entry".to_string()
                } else {
                    format!("item_{}", i)
                };
                vec![format!("{}(handle, {})", api, var)]
            } else {
                let j = i - 8;
                if j < 46 {
                    vec![format!("{}({})", api, scattered_words[j % scattered_words.len()])]
                } else if j < 53 {
                    vec![format!("{}(self.field_{})", api, j)]
                } else if j < 60 {
                    vec![format!("{}(make_{}())", api, j)]
                } else if j < 67 {
                    vec![format!("{}(rows[{}])", api, j)]
                } else if j < 82 {
                    let s = ["'low'", "'mid'", "'high'"][(j - 67) % 3];
                    vec![format!("{}({})", api, s)]
                } else {
                    vec![format!("{}({})", api, j)]
                }
            };
            let inner_refs: Vec<&str> = inner.iter().map(String::as_str).collect();
            let name = format!("{}_{:03}", api, i);
            let source = wrap_stmt(i % 15, &name, &inner_refs);
            methods.push(method(
                &format!("services_{}.py", a),
                &name,
                i * 16 + 1,
                &source,
            ));
        }
    }
    let queries = apis.iter().map(|s| s.to_string()).collect();
    (methods, queries)
}

/// Synthetic corpus of realistic template methods for throughput checks.
pub fn synthetic_corpus(n: usize) -> Vec<(MethodSource, SimplifiedParseTree)> {
    let templates: &[&str] = &[
        "def {n}(self, data):\n    path = os.path.join(self.base, '{w}.json')\n    with open(path, 'w') as f:\n        json.dump(data, f)\n",
        "def {n}(self, payload):\n    with open(self.{w}_path, 'w') as f:\n        json.dump(payload, f, indent=2)\n",
        "def {n}(self, target):\n    if not os.path.exists(target):\n        os.makedirs(target)\n    return target\n",
        "def {n}(self, base):\n    {w}_dir = os.path.join(base, 'cache')\n    if not os.path.isdir({w}_dir):\n        os.makedirs({w}_dir)\n",
        "def {n}(self, url):\n    response = requests.get(url, timeout=10)\n    return response.json()\n",
        "def {n}(self, url, body):\n    response = requests.post(url, data=body)\n    response.raise_for_status()\n    return response\n",
        "def {n}(self, path):\n    with open(path) as f:\n        return [line.strip() for line in f]\n",
        "def {n}(self, text, path):\n    with open(path, 'w') as f:\n        f.write(text)\n        f.write('\\n')\n",
        "def {n}(self, items):\n    total = 0\n    for item in items:\n        total += self.weigh(item)\n    return total\n",
        "def {n}(self, rows, path):\n    with open(path, 'w', newline='') as f:\n        writer = csv.writer(f)\n        for row in rows:\n            writer.writerow(row)\n",
        "def {n}(self, mapping):\n    return {{k: v for k, v in mapping.items() if v is not None}}\n",
        "def {n}(self, values):\n    if not values:\n        return 0.0\n    return sum(values) / len(values)\n",
        "def {n}(self, name, default=None):\n    raw = os.environ.get(name)\n    if raw is None:\n        return default\n    return raw.strip()\n",
        "def {n}(self, src, dst):\n    with open(src, 'rb') as fin, open(dst, 'wb') as fout:\n        fout.write(fin.read())\n",
        "def {n}(self, records):\n    for i in range(len(records)):\n        self.emit(records[i])\n    return len(records)\n",
        "def {n}(self, conn, query):\n    try:\n        return conn.execute(query)\n    except OperationalError as err:\n        self.log.warning(err)\n        return None\n",
    ];
    let words = [
        "report", "config", "result", "bundle", "sample", "export", "backup", "session",
        "profile", "archive", "staging", "rollup", "digest", "ledger", "billing", "catalog",
        "preview", "summary", "payload", "journal",
    ];
    let mut methods = Vec::with_capacity(n);
    for i in 0..n {
        let template = templates[i % templates.len()];
        let name = format!("task_{:05}", i);
        let word = words[(i / templates.len()) % words.len()];
        let source = template.replace("{n}", &name).replace("{w}", word);
        let source = source.replace("{{", "{").replace("}}", "}");
        let path = format!("pkg_{:02}/module_{:03}.py", i % 40, i % 500);
        methods.push(method(&path, &name, 1, &source));
    }
    methods
}

/// Deterministic splitmix64 for fixture and property generators.
pub struct Rng(pub u64);

impl Rng {
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, bound: usize) -> usize {
        (self.next() % bound as u64) as usize
    }
}

pub const GEN_LEAVES: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

struct TreeGen {
    nodes: Vec<(Vec<Element>, Span)>,
    source: String,
}

impl TreeGen {
    fn token(&mut self, text: &str, keyword: bool) -> Element {
        if !self.source.is_empty() {
            self.source.push(' ');
        }
        let start = self.source.len();
        self.source.push_str(text);
        let span = Span::new(start, start + text.len());
        if keyword {
            Element::Keyword { text: text.into(), span }
        } else {
            Element::Leaf(Token {
                kind: TokenKind::NonKeyword,
                text: text.into(),
                span,
            })
        }
    }

    fn gen_node(&mut self, rng: &mut Rng, depth: usize, budget: &mut usize) -> usize {
        let keywords = ["k", "w", "(", ")", ":"];
        *budget = budget.saturating_sub(1);
        let elem_count = 1 + rng.below(4);
        let mut elements = Vec::with_capacity(elem_count);
        for _ in 0..elem_count {
            let roll = rng.below(10);
            if roll < 4 {
                let t = GEN_LEAVES[rng.below(GEN_LEAVES.len())];
                elements.push(self.token(t, false));
                *budget = budget.saturating_sub(1);
            } else if roll < 7 || depth >= 4 || *budget == 0 {
                let t = keywords[rng.below(keywords.len())];
                elements.push(self.token(t, true));
            } else {
                let child = self.gen_node(rng, depth + 1, budget);
                elements.push(Element::Child(child));
            }
        }
        // A list holding a single subtree is not allowed.
        if elements.len() == 1 {
            if let Element::Child(_) = elements[0] {
                let t = keywords[rng.below(keywords.len())];
                elements.push(self.token(t, true));
            }
        }
        let span = {
            let span_of = |el: &Element| match el {
                Element::Keyword { span, .. } => *span,
                Element::Leaf(tok) => tok.span,
                Element::Child(c) => self.nodes[*c].1,
            };
            let mut s = span_of(&elements[0]);
            for el in &elements[1..] {
                let e = span_of(el);
                s = Span::new(s.start.min(e.start), s.end.max(e.end));
            }
            s
        };
        self.nodes.push((elements, span));
        self.nodes.len() - 1
    }
}

/// A random well-formed tree with roughly `max_vertices` vertices; tokens
/// are space-separated in the synthesized source so spans are exact.
pub fn random_tree(rng: &mut Rng, max_vertices: usize) -> SimplifiedParseTree {
    let mut gen = TreeGen {
        nodes: Vec::new(),
        source: String::new(),
    };
    let mut budget = max_vertices.saturating_sub(1).max(1);
    let root = gen.gen_node(rng, 0, &mut budget);
    let tree = SimplifiedParseTree::from_parts(gen.nodes, root, gen.source);
    debug_assert!(tree.validate().is_empty(), "{:?}", tree.validate());
    tree
}

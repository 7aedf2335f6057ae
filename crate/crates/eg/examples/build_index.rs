//! Build a persistent index from source files and load it back.
//!
//! Run with: cargo run --example build_index

use eg::adapters::python::PythonAdapter;
use eg::adapters::ParserAdapter;
use eg::corpus::{sample, CorpusIndex};

const FILE: &str = r#"
import json
import os


def save_report(report, path):
    with open(path, 'w') as f:
        json.dump(report, f)


def ensure_dir(path):
    if not os.path.exists(path):
        os.makedirs(path)


class Exporter:
    def export(self, payload):
        target = os.path.join(self.base, 'out.json')
        with open(target, 'w') as f:
            json.dump(payload, f, indent=2)

    def reset(self):
        self.payloads = []
"#;

fn main() {
    let adapter = PythonAdapter;
    let methods: Vec<_> = adapter
        .extract_methods("exporter.py", FILE)
        .into_iter()
        .map(|src| {
            let tree = adapter.parse_method(&src).expect("method parses");
            (src, tree)
        })
        .collect();
    println!("extracted {} methods", methods.len());

    let index = CorpusIndex::build(methods, adapter.language()).expect("index builds");
    println!(
        "built index: {} methods, {} distinct tokens, fingerprint {}",
        index.len(),
        index.inverted().token_count(),
        &index.fingerprint()[..16]
    );

    let dir = std::env::temp_dir().join("eg-example-index");
    std::fs::remove_dir_all(&dir).ok();
    index.save(&dir).expect("index saves");
    let loaded = CorpusIndex::load(&dir).expect("index loads");
    println!("saved and reloaded from {}", dir.display());
    assert_eq!(loaded.fingerprint(), index.fingerprint());

    let hits = loaded.lookup(&["json", "dump"]);
    println!("methods containing both `json` and `dump`: {:?}", hits);
    let drawn = sample(&hits, 2, 42, "json.dump");
    println!(
        "deterministic sample (seed {}): {:?} of {:?}",
        drawn.seed, drawn.sampled, drawn.candidates
    );
    std::fs::remove_dir_all(&dir).ok();
}

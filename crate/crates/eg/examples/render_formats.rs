//! Render one mined example in every output encoding.
//!
//! Run with: cargo run --example render_formats

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::corpus::CorpusIndex;
use eg::miner::{mine_examples, MiningConfig};
use eg::render::{layout, render, render_results_json, OutputFormat};

fn main() {
    let sources = [
        "def save(self, data):\n    with open(self.path, 'w') as f:\n        json.dump(data, f)\n",
        "def store(obj, out):\n    size = len(obj)\n    with open(out, 'w') as f:\n        json.dump(obj, f)\n",
        "def publish(result, sink):\n    checked = verify(result)\n    with open(sink, 'w') as f:\n        json.dump(checked, f)\n",
    ];
    let methods: Vec<_> = sources
        .iter()
        .enumerate()
        .map(|(i, source)| {
            let src = MethodSource {
                path: format!("writer_{i}.py"),
                name: format!("save_{i}"),
                line: 1,
                source: (*source).into(),
            };
            let tree = PythonAdapter.parse_method(&src).expect("parses");
            (src, tree)
        })
        .collect();
    let index = CorpusIndex::build(methods, "python").expect("index builds");
    let cfg = MiningConfig {
        min_support_ratio: 0.5,
        ..MiningConfig::default()
    };
    let result = mine_examples(&index, &PythonAdapter, "json.dump", &cfg).expect("query parses");
    let ex = &result.examples[0];
    let snippet = layout(ex, &index).expect("layout");

    println!("== ansi ==");
    print!("{}", String::from_utf8(render(ex, &snippet, OutputFormat::Ansi)).unwrap());
    println!("\n== html ==");
    print!("{}", String::from_utf8(render(ex, &snippet, OutputFormat::Html)).unwrap());
    println!("\n== json (single example) ==");
    println!("{}", String::from_utf8(render(ex, &snippet, OutputFormat::Json)).unwrap());
    println!("\n== json (full result schema) ==");
    let pairs = vec![(ex, &snippet)];
    println!("{}", render_results_json(&result.query, result.total, &pairs));
}

//! Compare mined examples against a random code-search baseline on
//! succinctness and representativeness.
//!
//! Run with: cargo run --example evaluate_metrics

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::corpus::CorpusIndex;
use eg::eval::{compare, succinctness, EvalConfig};
use eg::miner::MiningConfig;

fn main() {
    // Sixteen methods call persist with a shared idiom, sixteen scatter it.
    let mut methods = Vec::new();
    for i in 0..32 {
        let source = if i < 16 {
            let var = ["entry", "entry", "record", "batch"][i % 4];
            format!(
                "def sync_{i}(self, base):\n    self.counter += 1\n    persist(handle, {var})\n    return self.counter\n"
            )
        } else {
            format!(
                "def sweep_{i}(self, base):\n    note = 'sweep'\n    rows = collect(base)\n    persist(rows[{i}])\n    return rows\n"
            )
        };
        let src = MethodSource {
            path: "sync.py".into(),
            name: format!("sync_{i:02}"),
            line: i * 8 + 1,
            source,
        };
        let tree = PythonAdapter.parse_method(&src).expect("parses");
        methods.push((src, tree));
    }
    let index = CorpusIndex::build(methods, "python").expect("index builds");

    println!(
        "succinctness of a 4-line snippet with a comment: {}",
        succinctness("x = 1\n# setup\ny = 2\n\n", "#")
    );

    let queries = vec!["persist".to_string()];
    let mining = MiningConfig {
        min_support_ratio: 0.2,
        ..MiningConfig::default()
    };
    for seed in 0..3 {
        let report = compare(
            &index,
            &PythonAdapter,
            &queries,
            &MiningConfig { seed, ..mining.clone() },
            &EvalConfig { seed, ..EvalConfig::default() },
        );
        println!("\nseed {seed}:");
        print!("{}", report.to_text());
    }
}

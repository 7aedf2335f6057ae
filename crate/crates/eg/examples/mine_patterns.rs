//! Mine diverse usage examples for a query over an in-memory corpus and
//! print them with the common pattern emphasized.
//!
//! Run with: cargo run --example mine_patterns

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::corpus::CorpusIndex;
use eg::miner::{mine_examples, MiningConfig};
use eg::render::{layout, render, OutputFormat};

fn corpus() -> Vec<(MethodSource, eg::syntax::SimplifiedParseTree)> {
    // Twelve methods: seven guard makedirs with exists, four with isdir,
    // one calls it bare. Surrounding statements vary so only the guard
    // idiom itself is shared.
    let sources: Vec<(String, String)> = (0..12)
        .map(|i| {
            let dir = ["out_dir", "log_dir", "tmp_dir", "model_dir"][i % 4];
            let guard = if i < 7 { "exists" } else { "isdir" };
            let body = if i == 11 {
                format!("def prepare_{i}(self, base):\n    os.makedirs(base)\n")
            } else {
                let idiom = format!(
                    "    if not os.path.{guard}({dir}):\n        os.makedirs({dir})\n"
                );
                match i % 3 {
                    0 => format!("def prepare_{i}(self, base):\n{idiom}"),
                    1 => format!(
                        "def prepare_{i}(self, base):\n    path_{i} = self.resolve(base)\n{idiom}"
                    ),
                    _ => format!(
                        "def prepare_{i}(self, base):\n    self.count += 1\n    flag_{i} = base\n{idiom}"
                    ),
                }
            };
            (format!("prepare_{i}"), body)
        })
        .collect();
    sources
        .into_iter()
        .enumerate()
        .map(|(i, (name, source))| {
            let src = MethodSource {
                path: "tasks.py".into(),
                name,
                line: i * 8 + 1,
                source,
            };
            let tree = PythonAdapter.parse_method(&src).expect("parses");
            (src, tree)
        })
        .collect()
}

fn main() {
    let index = CorpusIndex::build(corpus(), "python").expect("index builds");
    // A tiny demo corpus needs a higher support floor than the default
    // 5%, or growth would chase single-method details.
    let cfg = MiningConfig {
        min_support_ratio: 0.25,
        ..MiningConfig::default()
    };
    let result = mine_examples(&index, &PythonAdapter, "os.makedirs", &cfg).expect("query parses");
    println!(
        "query {:?}: {} candidates, {} verified, mined {} example(s)\n",
        result.query,
        result.candidates,
        result.verified,
        result.examples.len()
    );
    for ex in &result.examples {
        let snippet = layout(ex, &index).expect("example renders");
        let ansi = render(ex, &snippet, OutputFormat::Ansi);
        print!("{}", String::from_utf8(ansi).unwrap());
        println!(
            "  (run {}, score {}, pattern of {} vertices)\n",
            ex.run,
            ex.score,
            ex.pattern.size()
        );
    }
}

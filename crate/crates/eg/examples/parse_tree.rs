//! Parse a snippet into a simplified parse tree and walk it.
//!
//! Run with: cargo run --example parse_tree

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::syntax::{verify_round_trip, SimplifiedParseTree, TreeRef};

fn print_node(tree: &SimplifiedParseTree, node: usize, depth: usize) {
    println!("{}{}", "  ".repeat(depth), tree.label(node));
    for pos in 1..=tree.node(node).arity() {
        match tree.child_at(node, pos).unwrap() {
            TreeRef::Node(child) => print_node(tree, child, depth + 1),
            leaf => println!(
                "{}{}",
                "  ".repeat(depth + 1),
                tree.leaf_token(leaf).unwrap().text
            ),
        }
    }
}

fn main() {
    let source = "\
with open(self.output_path, 'w') as f:
    json.dump(data, f)
";
    let method = MethodSource {
        path: "demo.py".into(),
        name: "snippet".into(),
        line: 1,
        source: source.into(),
    };
    let tree = PythonAdapter.parse_method(&method).expect("snippet parses");

    println!("source:\n{}", source);
    println!("tree (labels, leaves indented):");
    print_node(&tree, tree.root(), 0);

    let tokens: Vec<&str> = tree.token_stream().iter().map(|t| t.text).collect();
    println!("\ntoken stream: {}", tokens.join(" "));
    println!("root label:   {}", tree.label(tree.root()));
    println!("validate:     {} violation(s)", tree.validate().len());
    verify_round_trip(&tree, "#").expect("token spans reproduce the source");
    println!("round-trip:   token spans slice the source byte-for-byte");
}

//! Start the HTTP service on an ephemeral port, hit both endpoints, and
//! shut it down.
//!
//! Run with: cargo run --example query_service

use eg::adapters::python::PythonAdapter;
use eg::adapters::{MethodSource, ParserAdapter};
use eg::corpus::CorpusIndex;
use eg::miner::MiningConfig;
use eg::service::{serve, ServiceConfig};
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::Arc;

fn get(port: u16, path: &str) -> String {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    write!(
        stream,
        "GET {} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n",
        path
    )
    .unwrap();
    let mut out = String::new();
    stream.read_to_string(&mut out).unwrap();
    out
}

fn main() {
    let methods: Vec<_> = (0..8)
        .map(|i| {
            let var = ["query", "stmt", "template", "batch"][i % 4];
            let source = format!(
                "def run_{i}(self, conn):\n    cursor = conn.cursor()\n    cursor.execute({var})\n    return cursor\n"
            );
            let src = MethodSource {
                path: "db.py".into(),
                name: format!("run_{i}"),
                line: 1,
                source,
            };
            let tree = PythonAdapter.parse_method(&src).expect("parses");
            (src, tree)
        })
        .collect();
    let index = Arc::new(CorpusIndex::build(methods, "python").expect("index builds"));

    let handle = serve(
        index,
        ServiceConfig {
            port: 0, // ephemeral
            max_concurrent: 2,
            mining: MiningConfig {
                min_support_ratio: 0.25,
                ..MiningConfig::default()
            },
        },
    )
    .expect("service starts");
    let port = handle.port();
    println!("service listening on 127.0.0.1:{port}\n");

    println!("GET /v1/health ->\n{}\n", get(port, "/v1/health"));
    println!(
        "GET /v1/examples?q=execute&n=1 ->\n{}",
        get(port, "/v1/examples?q=execute&n=1")
    );

    handle.shutdown();
    println!("service stopped");
}

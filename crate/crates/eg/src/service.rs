//! HTTP query service over a loaded, immutable index.
//!
//! Endpoints:
//!
//! - `GET /v1/examples?q=<urlencoded>&n=<int>` plus optional
//!   `alpha`, `gamma`, `beta_t`, `beta_c`, `max_samples`, `seed` overrides;
//!   responds with the renderer's JSON result schema.
//! - `GET /v1/health` — status and index fingerprint.
//!
//! Responses for a request are byte-identical to `eg query --format json`
//! run against the same index with the same parameters. The server is a
//! bounded pool of worker threads over one listener; the index is never
//! mutated, so restarts are stateless.

use crate::adapters::python::PythonAdapter;
use crate::corpus::CorpusIndex;
use crate::miner::{mine_examples, MiningConfig};
use crate::render::{layout, render_results_json, HighlightedSnippet};
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Per-request timings: count, mean, p50, max.
#[derive(Debug, Default)]
pub struct LatencyLog {
    samples: Mutex<Vec<Duration>>,
}

impl LatencyLog {
    pub fn record(&self, d: Duration) {
        self.samples.lock().unwrap().push(d);
    }

    /// `(count, mean, p50, max)` of everything recorded so far.
    pub fn summary(&self) -> (usize, Duration, Duration, Duration) {
        let samples = self.samples.lock().unwrap();
        if samples.is_empty() {
            return (0, Duration::ZERO, Duration::ZERO, Duration::ZERO);
        }
        let mut sorted: Vec<Duration> = samples.clone();
        sorted.sort();
        let total: Duration = sorted.iter().sum();
        let mean = total / sorted.len() as u32;
        let p50 = sorted[(sorted.len() - 1) / 2];
        let max = *sorted.last().unwrap();
        (sorted.len(), mean, p50, max)
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    /// Port to bind on 127.0.0.1; 0 picks an ephemeral port.
    pub port: u16,
    /// Bounded worker pool size: the cap on concurrent mining jobs.
    pub max_concurrent: usize,
    /// Defaults for requests that do not override them.
    pub mining: MiningConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 0,
            max_concurrent: 4,
            mining: MiningConfig::default(),
        }
    }
}

/// A running service; dropping it without [`shutdown`](Self::shutdown)
/// detaches the workers.
pub struct ServiceHandle {
    port: u16,
    stop: Arc<AtomicBool>,
    workers: Vec<std::thread::JoinHandle<()>>,
    pub latency: Arc<LatencyLog>,
}

impl ServiceHandle {
    pub fn port(&self) -> u16 {
        self.port
    }

    /// Stops accepting, wakes the workers, and waits for them to finish.
    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in 0..self.workers.len() {
            let _ = TcpStream::connect(("127.0.0.1", self.port));
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
        let (count, mean, p50, max) = self.latency.summary();
        if count > 0 {
            eprintln!(
                "served {} request(s): mean {:?}, p50 {:?}, max {:?}",
                count, mean, p50, max
            );
        }
    }
}

/// Binds and starts serving; returns once the listener is live.
pub fn serve(index: Arc<CorpusIndex>, cfg: ServiceConfig) -> std::io::Result<ServiceHandle> {
    let listener = TcpListener::bind(("127.0.0.1", cfg.port))?;
    let port = listener.local_addr()?.port();
    let stop = Arc::new(AtomicBool::new(false));
    let latency = Arc::new(LatencyLog::default());
    let counter = Arc::new(AtomicU64::new(0));
    let mut workers = Vec::with_capacity(cfg.max_concurrent.max(1));
    for _ in 0..cfg.max_concurrent.max(1) {
        let listener = listener.try_clone()?;
        let index = Arc::clone(&index);
        let stop = Arc::clone(&stop);
        let latency = Arc::clone(&latency);
        let counter = Arc::clone(&counter);
        let mining = cfg.mining.clone();
        workers.push(std::thread::spawn(move || {
            while !stop.load(Ordering::SeqCst) {
                let (stream, _) = match listener.accept() {
                    Ok(pair) => pair,
                    Err(_) => continue,
                };
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let started = Instant::now();
                let outcome = handle_connection(stream, &index, &mining);
                let elapsed = started.elapsed();
                latency.record(elapsed);
                if let Some((path, status)) = outcome {
                    eprintln!("GET {} -> {} ({} ms)", path, status, elapsed.as_millis());
                }
                let n = counter.fetch_add(1, Ordering::SeqCst) + 1;
                if n.is_multiple_of(100) {
                    let (count, mean, p50, max) = latency.summary();
                    eprintln!(
                        "latency after {} request(s): mean {:?}, p50 {:?}, max {:?}",
                        count, mean, p50, max
                    );
                }
            }
        }));
    }
    Ok(ServiceHandle {
        port,
        stop,
        workers,
        latency,
    })
}

fn handle_connection(
    mut stream: TcpStream,
    index: &CorpusIndex,
    defaults: &MiningConfig,
) -> Option<(String, u16)> {
    stream
        .set_read_timeout(Some(Duration::from_secs(10)))
        .ok()?;
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    // Drain headers; GET requests carry no body we care about.
    loop {
        let mut line = String::new();
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) if line == "\r\n" || line == "\n" => break,
            Ok(_) => continue,
            Err(_) => break,
        }
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("");
    let target = parts.next().unwrap_or("");
    if method != "GET" {
        let status = respond_error(&mut stream, 405, "method_not_allowed", "only GET is supported");
        return Some((target.to_string(), status));
    }
    let (path, query_string) = match target.split_once('?') {
        Some((p, q)) => (p, q),
        None => (target, ""),
    };
    let status = match path {
        "/v1/health" => {
            let body = format!(
                "{{\"status\":\"ok\",\"fingerprint\":\"{}\"}}\n",
                index.fingerprint()
            );
            respond(&mut stream, 200, "application/json", body.as_bytes())
        }
        "/v1/examples" => handle_examples(&mut stream, index, defaults, query_string),
        _ => respond_error(&mut stream, 404, "not_found", "unknown path"),
    };
    Some((target.to_string(), status))
}

fn handle_examples(
    stream: &mut TcpStream,
    index: &CorpusIndex,
    defaults: &MiningConfig,
    query_string: &str,
) -> u16 {
    let params = parse_query_string(query_string);
    let q = match params.iter().find(|(k, _)| k == "q") {
        Some((_, v)) if !v.is_empty() => v.clone(),
        _ => return respond_error(stream, 400, "missing_query", "the q parameter is required"),
    };
    let mut cfg = defaults.clone();
    for (key, value) in &params {
        let bad = |what: &str| format!("{} must be {}", key, what);
        match key.as_str() {
            "n" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => cfg.example_count = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("a positive integer")),
            },
            "max_samples" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => cfg.max_samples = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("a positive integer")),
            },
            "alpha" => match value.parse::<f64>() {
                Ok(v) if v > 0.0 && v <= 1.0 => cfg.min_support_ratio = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("in (0, 1]")),
            },
            "gamma" => match value.parse::<usize>() {
                Ok(v) if v >= 1 => cfg.max_pattern_size = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("a positive integer")),
            },
            "beta_t" => match value.parse::<usize>() {
                Ok(v) => cfg.max_filler_tokens = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("an integer")),
            },
            "beta_c" => match value.parse::<usize>() {
                Ok(v) => cfg.max_filler_chars = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("an integer")),
            },
            "seed" => match value.parse::<u64>() {
                Ok(v) => cfg.seed = v,
                _ => return respond_error(stream, 400, "bad_parameter", &bad("an integer")),
            },
            _ => {}
        }
    }
    let result = match mine_examples(index, &PythonAdapter, &q, &cfg) {
        Ok(r) => r,
        Err(e) => return respond_error(stream, 400, "bad_query", &e.to_string()),
    };
    if result.examples.is_empty() {
        return respond_error(stream, 404, "no_usages", "no usages found");
    }
    let snippets: Vec<HighlightedSnippet> = match result
        .examples
        .iter()
        .map(|ex| layout(ex, index))
        .collect::<Result<_, _>>()
    {
        Ok(s) => s,
        Err(e) => return respond_error(stream, 500, "internal", &e.to_string()),
    };
    let pairs: Vec<_> = result.examples.iter().zip(snippets.iter()).collect();
    let mut body = render_results_json(&result.query, result.total, &pairs);
    body.push('\n');
    respond(stream, 200, "application/json", body.as_bytes())
}

fn respond(stream: &mut TcpStream, status: u16, content_type: &str, body: &[u8]) -> u16 {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        405 => "Method Not Allowed",
        _ => "Internal Server Error",
    };
    let head = format!(
        "HTTP/1.1 {} {}\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        status,
        reason,
        content_type,
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body);
    let _ = stream.flush();
    status
}

fn respond_error(stream: &mut TcpStream, status: u16, code: &str, message: &str) -> u16 {
    let body = format!(
        "{{\"error\":{{\"code\":{},\"message\":{}}}}}\n",
        serde_json::to_string(code).unwrap(),
        serde_json::to_string(message).unwrap()
    );
    respond(stream, status, "application/json", body.as_bytes())
}

fn parse_query_string(qs: &str) -> Vec<(String, String)> {
    qs.split('&')
        .filter(|kv| !kv.is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => (percent_decode(k), percent_decode(v)),
            None => (percent_decode(kv), String::new()),
        })
        .collect()
}

fn percent_decode(s: &str) -> String {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' if i + 2 < bytes.len() => {
                let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).ok();
                match hex.and_then(|h| u8::from_str_radix(h, 16).ok()) {
                    Some(b) => {
                        out.push(b);
                        i += 3;
                    }
                    None => {
                        out.push(b'%');
                        i += 1;
                    }
                }
            }
            b'+' => {
                out.push(b' ');
                i += 1;
            }
            b => {
                out.push(b);
                i += 1;
            }
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

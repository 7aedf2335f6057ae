//! Command-line front end: `eg index`, `eg query`, `eg serve`, `eg eval`.
//!
//! Exit codes: 0 success, 1 empty result, 2 usage error, 3 internal error.
//! Configuration precedence is flag > environment (`EG_` prefix) > config
//! file (`--config` or `EG_CONFIG`, JSON) > built-in default.

use crate::adapters::interchange::{self, IngestMode};
use crate::adapters::python::PythonAdapter;
use crate::adapters::{MethodSource, ParserAdapter};
use crate::corpus::{CorpusIndex, IndexError};
use crate::eval::{compare, BaselineMode, EvalConfig};
use crate::miner::{mine_examples, MiningConfig};
use crate::render::{layout, render, render_results_json, OutputFormat};
use crate::service::{serve, ServiceConfig};
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const EXIT_OK: i32 = 0;
pub const EXIT_EMPTY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

const USAGE: &str = "\
usage: eg <command> [options]

commands:
  index   --corpus <dir|file.jsonl[.gz]> --out <dir> [--lang python]
          [--lenient|--strict] [--dedup exact]
  query   <q> --index <dir> [--format ansi|html|json] [--n N] [--alpha F]
          [--gamma N] [--beta-t N] [--beta-c N] [--max-samples N] [--seed N]
  serve   --index <dir> --port <port> [--max-concurrent N]
  eval    --index <dir> --queries <file> [--seed N] [--csv <path>]
          [--baseline-mode call-sites|methods]

environment: EG_INDEX, EG_PORT, EG_MAX_CONCURRENT, EG_SEED, EG_CONFIG
";

/// Runs the CLI and returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {}", msg);
            eprintln!("{}", USAGE);
            EXIT_USAGE
        }
        Err(CliError::Empty(msg)) => {
            eprintln!("{}", msg);
            EXIT_EMPTY
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {}", msg);
            EXIT_INTERNAL
        }
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Empty(String),
    Internal(String),
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

fn dispatch(args: &[String]) -> Result<i32, CliError> {
    let command = args
        .first()
        .ok_or_else(|| CliError::Usage("missing command".into()))?;
    let rest = &args[1..];
    match command.as_str() {
        "index" => cmd_index(rest),
        "query" => cmd_query(rest),
        "serve" => cmd_serve(rest),
        "eval" => cmd_eval(rest),
        "--help" | "-h" | "help" => {
            println!("{}", USAGE);
            Ok(EXIT_OK)
        }
        other => Err(CliError::Usage(format!("unknown command {:?}", other))),
    }
}

/// Parsed flags plus the config-file and environment fallback layers.
struct Options {
    positional: Vec<String>,
    flags: HashMap<String, String>,
    file: serde_json::Map<String, serde_json::Value>,
}

impl Options {
    fn parse(args: &[String], allowed: &[&str]) -> Result<Self, CliError> {
        let mut positional = Vec::new();
        let mut flags = HashMap::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            if let Some(name) = arg.strip_prefix("--") {
                if !allowed.contains(&name) {
                    return Err(CliError::Usage(format!("unknown flag --{}", name)));
                }
                // Boolean flags take no value.
                if matches!(name, "lenient" | "strict") {
                    flags.insert(name.to_string(), "true".to_string());
                    i += 1;
                    continue;
                }
                let value = args
                    .get(i + 1)
                    .ok_or_else(|| CliError::Usage(format!("--{} needs a value", name)))?;
                flags.insert(name.to_string(), value.clone());
                i += 2;
            } else {
                positional.push(arg.clone());
                i += 1;
            }
        }
        let file = match flags
            .get("config")
            .cloned()
            .or_else(|| std::env::var("EG_CONFIG").ok())
        {
            Some(path) => {
                let bytes = std::fs::read(&path).map_err(|e| {
                    CliError::Usage(format!("cannot read config file {}: {}", path, e))
                })?;
                serde_json::from_slice::<serde_json::Value>(&bytes)
                    .ok()
                    .and_then(|v| v.as_object().cloned())
                    .ok_or_else(|| {
                        CliError::Usage(format!("config file {} is not a JSON object", path))
                    })?
            }
            None => serde_json::Map::new(),
        };
        Ok(Options {
            positional,
            flags,
            file,
        })
    }

    /// flag > `EG_<KEY>` env var > config file key > None.
    fn get(&self, name: &str) -> Option<String> {
        if let Some(v) = self.flags.get(name) {
            return Some(v.clone());
        }
        let env_key = format!("EG_{}", name.replace('-', "_").to_uppercase());
        if let Ok(v) = std::env::var(env_key) {
            return Some(v);
        }
        self.file.get(&name.replace('-', "_")).map(|v| match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    fn require(&self, name: &str) -> Result<String, CliError> {
        self.get(name)
            .ok_or_else(|| CliError::Usage(format!("--{} is required", name)))
    }

    fn parse_value<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, CliError> {
        match self.get(name) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value for --{}: {:?}", name, raw))),
        }
    }
}

fn mining_config(opts: &Options) -> Result<MiningConfig, CliError> {
    let mut cfg = MiningConfig::default();
    if let Some(v) = opts.parse_value::<f64>("alpha")? {
        if v <= 0.0 || v > 1.0 {
            return Err(CliError::Usage("--alpha must be in (0, 1]".into()));
        }
        cfg.min_support_ratio = v;
    }
    if let Some(v) = opts.parse_value::<usize>("gamma")? {
        cfg.max_pattern_size = v;
    }
    if let Some(v) = opts.parse_value::<usize>("beta-t")? {
        cfg.max_filler_tokens = v;
    }
    if let Some(v) = opts.parse_value::<usize>("beta-c")? {
        cfg.max_filler_chars = v;
    }
    if let Some(v) = opts.parse_value::<usize>("n")? {
        if v == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        cfg.example_count = v;
    }
    if let Some(v) = opts.parse_value::<usize>("max-samples")? {
        if v == 0 {
            return Err(CliError::Usage("--max-samples must be at least 1".into()));
        }
        cfg.max_samples = v;
    }
    if let Some(v) = opts.parse_value::<u64>("seed")? {
        cfg.seed = v;
    }
    Ok(cfg)
}

fn load_index(opts: &Options) -> Result<CorpusIndex, CliError> {
    let dir = opts.require("index")?;
    CorpusIndex::load(Path::new(&dir)).map_err(CliError::from)
}

// -- eg index ----------------------------------------------------------------

fn cmd_index(args: &[String]) -> Result<i32, CliError> {
    let opts = Options::parse(
        args,
        &["corpus", "out", "lang", "lenient", "strict", "dedup", "config"],
    )?;
    let corpus = opts.require("corpus")?;
    let out = opts.require("out")?;
    let lang = opts.get("lang").unwrap_or_else(|| "python".to_string());
    if lang != "python" {
        return Err(CliError::Usage(format!(
            "unsupported --lang {:?}; this build ships the python adapter (other languages \
             ingest via the interchange format)",
            lang
        )));
    }
    if opts.get("strict").is_some() && opts.flags.contains_key("lenient") {
        return Err(CliError::Usage("--strict and --lenient are exclusive".into()));
    }
    // Lenient unless --strict: corpora at scale always contain stragglers.
    let mode = if opts.get("strict").is_some() {
        IngestMode::Strict
    } else {
        IngestMode::Lenient
    };
    let dedup = match opts.get("dedup").as_deref() {
        None => false,
        Some("exact") => true,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown --dedup mode {:?} (supported: exact)",
                other
            )))
        }
    };

    let corpus_path = Path::new(&corpus);
    let started = std::time::Instant::now();
    let mut methods = if corpus_path.is_dir() {
        ingest_directory(corpus_path, mode)?
    } else {
        let (pairs, diagnostics) = interchange::read_interchange_file(corpus_path, mode)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        for d in &diagnostics {
            eprintln!("skipped: {}", d);
        }
        pairs
    };
    if dedup {
        methods = dedup_exact(methods);
    }
    let count = methods.len();
    let index = CorpusIndex::build(methods, &lang)?;
    index.save(Path::new(&out))?;
    eprintln!(
        "indexed {} method(s) ({} token(s)) in {:?} -> {}",
        count,
        index.inverted().token_count(),
        started.elapsed(),
        out
    );
    Ok(EXIT_OK)
}

fn ingest_directory(
    dir: &Path,
    mode: IngestMode,
) -> Result<Vec<(MethodSource, crate::syntax::SimplifiedParseTree)>, CliError> {
    let mut files = Vec::new();
    collect_python_files(dir, &mut files)?;
    files.sort();
    let adapter = PythonAdapter;
    let results: Vec<Result<Vec<(MethodSource, crate::syntax::SimplifiedParseTree)>, String>> =
        files
            .par_iter()
            .map(|path| {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {}", path.display(), e))?;
                let rel = path
                    .strip_prefix(dir)
                    .unwrap_or(path)
                    .to_string_lossy()
                    .into_owned();
                let mut out = Vec::new();
                for src in adapter.extract_methods(&rel, &text) {
                    match adapter.parse_method(&src) {
                        Ok(tree) => out.push((src, tree)),
                        Err(e) => {
                            return Err(format!("{}:{} {}: {}", rel, src.line, src.name, e))
                        }
                    }
                }
                Ok(out)
            })
            .collect();
    let mut methods = Vec::new();
    for result in results {
        match result {
            Ok(mut batch) => methods.append(&mut batch),
            Err(msg) => match mode {
                IngestMode::Strict => return Err(CliError::Internal(msg)),
                IngestMode::Lenient => eprintln!("skipped: {}", msg),
            },
        }
    }
    Ok(methods)
}

fn collect_python_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        if path.is_dir() {
            collect_python_files(&path, out)?;
        } else if path.extension().map(|e| e == "py").unwrap_or(false) {
            out.push(path);
        }
    }
    Ok(())
}

/// Drops methods whose token text stream duplicates an earlier method's
/// (vendored copies); first occurrence in canonical order wins.
fn dedup_exact(
    mut methods: Vec<(MethodSource, crate::syntax::SimplifiedParseTree)>,
) -> Vec<(MethodSource, crate::syntax::SimplifiedParseTree)> {
    methods.sort_by(|(a, _), (b, _)| (&a.path, &a.name, a.line).cmp(&(&b.path, &b.name, b.line)));
    let mut seen = std::collections::HashSet::new();
    methods.retain(|(_, tree)| {
        let key: Vec<String> = tree
            .token_stream()
            .iter()
            .map(|t| t.text.to_string())
            .collect();
        seen.insert(key)
    });
    methods
}

// -- eg query ----------------------------------------------------------------

fn cmd_query(args: &[String]) -> Result<i32, CliError> {
    let opts = Options::parse(
        args,
        &[
            "index", "format", "n", "alpha", "gamma", "beta-t", "beta-c", "max-samples", "seed",
            "config",
        ],
    )?;
    let query = match opts.positional.as_slice() {
        [q] => q.clone(),
        [] => return Err(CliError::Usage("query text is required".into())),
        _ => return Err(CliError::Usage("exactly one query expected".into())),
    };
    let format: OutputFormat = opts
        .get("format")
        .unwrap_or_else(|| "ansi".to_string())
        .parse()
        .map_err(CliError::Usage)?;
    let cfg = mining_config(&opts)?;
    let index = load_index(&opts)?;
    let result = mine_examples(&index, &PythonAdapter, &query, &cfg)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if result.examples.is_empty() {
        return Err(CliError::Empty("no usages found".into()));
    }
    eprintln!(
        "{} candidate(s), {} verified, {} sampled, seed {}",
        result.candidates, result.verified, result.total, result.seed
    );
    let snippets: Vec<_> = result
        .examples
        .iter()
        .map(|ex| layout(ex, &index))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    match format {
        OutputFormat::Json => {
            let pairs: Vec<_> = result.examples.iter().zip(snippets.iter()).collect();
            println!("{}", render_results_json(&result.query, result.total, &pairs));
        }
        _ => {
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for (i, (ex, hs)) in result.examples.iter().zip(snippets.iter()).enumerate() {
                if i > 0 && format == OutputFormat::Ansi {
                    let _ = writeln!(out);
                }
                let _ = out.write_all(&render(ex, hs, format));
            }
        }
    }
    Ok(EXIT_OK)
}

// -- eg serve ----------------------------------------------------------------

fn cmd_serve(args: &[String]) -> Result<i32, CliError> {
    let opts = Options::parse(
        args,
        &[
            "index", "port", "max-concurrent", "n", "alpha", "gamma", "beta-t", "beta-c",
            "max-samples", "seed", "config",
        ],
    )?;
    let port: u16 = opts
        .parse_value("port")?
        .ok_or_else(|| CliError::Usage("--port is required".into()))?;
    let max_concurrent: usize = opts.parse_value("max-concurrent")?.unwrap_or(4);
    let mining = mining_config(&opts)?;
    let index = Arc::new(load_index(&opts)?);
    eprintln!(
        "serving index of {} method(s) (fingerprint {}) on 127.0.0.1:{}",
        index.len(),
        &index.fingerprint()[..12],
        port
    );
    let handle = serve(
        index,
        ServiceConfig {
            port,
            max_concurrent,
            mining,
        },
    )?;
    // Run until the process is killed.
    loop {
        std::thread::sleep(std::time::Duration::from_secs(3600));
        let _ = &handle;
    }
}

// -- eg eval -----------------------------------------------------------------

fn cmd_eval(args: &[String]) -> Result<i32, CliError> {
    let opts = Options::parse(
        args,
        &[
            "index", "queries", "seed", "csv", "baseline-mode", "n", "alpha", "gamma", "beta-t",
            "beta-c", "max-samples", "config",
        ],
    )?;
    let queries_path = opts.require("queries")?;
    let text = std::fs::read_to_string(&queries_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {}", queries_path, e)))?;
    let queries: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    if queries.is_empty() {
        return Err(CliError::Usage(format!("{} holds no queries", queries_path)));
    }
    let seed: u64 = opts.parse_value("seed")?.unwrap_or(0);
    let baseline_mode = match opts.get("baseline-mode").as_deref() {
        None | Some("call-sites") => BaselineMode::CallSites,
        Some("methods") => BaselineMode::Methods,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown --baseline-mode {:?} (call-sites or methods)",
                other
            )))
        }
    };
    let mut mining = mining_config(&opts)?;
    mining.seed = seed;
    let index = load_index(&opts)?;
    let report = compare(
        &index,
        &PythonAdapter,
        &queries,
        &mining,
        &EvalConfig {
            seed,
            baseline_mode,
        },
    );
    print!("{}", report.to_text());
    if let Some(csv_path) = opts.get("csv") {
        std::fs::write(&csv_path, report.to_csv())?;
        eprintln!("wrote {}", csv_path);
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::python::PythonAdapter;

    #[test]
    fn dedup_exact_drops_token_identical_methods() {
        let make = |path: &str, name: &str, source: &str| {
            let src = MethodSource {
                path: path.into(),
                name: name.into(),
                line: 1,
                source: source.into(),
            };
            let tree = PythonAdapter.parse_method(&src).unwrap();
            (src, tree)
        };
        // b is a token-for-token copy of a (whitespace differs); c is not.
        let methods = vec![
            make("a.py", "f", "def f(x):\n    return g(x)\n"),
            make("b.py", "f", "def f(x):\n        return g(x)\n"),
            make("c.py", "f", "def f(y):\n    return g(y)\n"),
        ];
        let kept = dedup_exact(methods);
        let paths: Vec<&str> = kept.iter().map(|(s, _)| s.path.as_str()).collect();
        assert_eq!(paths, vec!["a.py", "c.py"]);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = std::env::temp_dir().join(format!("eg-cli-unit-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let config = dir.join("config.json");
        std::fs::write(&config, r#"{"seed": 11, "n": 5}"#).unwrap();
        let args: Vec<String> = [
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let opts = Options::parse(&args, &["config", "seed", "n"]).unwrap();
        // Flag wins over the file; the file supplies what flags do not.
        assert_eq!(opts.get("seed").as_deref(), Some("3"));
        assert_eq!(opts.get("n").as_deref(), Some("5"));
        std::fs::remove_dir_all(&dir).ok();
    }
}

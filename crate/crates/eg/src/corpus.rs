//! Method store and token index: persists parsed methods and answers
//! "which methods contain these tokens" with deterministic sampling.
//!
//! Index directory layout:
//!
//! - `manifest` — JSON: format version, counts, corpus fingerprint, file
//!   checksums, language, seed policy, build timestamp.
//! - `methods.jsonl.gz` — interchange records; a record's id is its line
//!   number.
//! - `postings.bin` — token table and delta-encoded postings, documented
//!   at [`write_postings`].
//!
//! The index is a pure function of the record set: records are sorted by
//! `(path, name, line)` before ids are assigned, so ingestion order never
//! changes the saved bytes or the fingerprint.

use crate::adapters::interchange;
use crate::adapters::MethodSource;
use crate::rng::sample_indices;
use crate::syntax::{SimplifiedParseTree, TokenKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const FORMAT_VERSION: u32 = 1;
const POSTINGS_MAGIC: &[u8; 8] = b"EGPOST01";
const METHODS_FILE: &str = "methods.jsonl.gz";
const POSTINGS_FILE: &str = "postings.bin";
const MANIFEST_FILE: &str = "manifest";
const LOCK_FILE: &str = "index.lock";

/// One stored method: provenance, source, and its parsed tree.
#[derive(Debug, Clone)]
pub struct MethodRecord {
    /// Dense id: `0..N-1`, assigned after sorting by `(path, name, line)`.
    pub id: u32,
    pub src: MethodSource,
    pub tree: SimplifiedParseTree,
}

/// Token text to sorted, duplicate-free method id postings.
#[derive(Debug, Clone, Default)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<u32>>,
}

impl InvertedIndex {
    pub fn postings(&self, token: &str) -> &[u32] {
        self.postings.get(token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn token_count(&self) -> usize {
        self.postings.len()
    }

    pub fn tokens(&self) -> impl Iterator<Item = (&str, &[u32])> {
        self.postings.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }
}

/// A deterministic draw from the candidate set of a query.
#[derive(Debug, Clone)]
pub struct CorpusSample {
    pub query: String,
    /// Every method id the prefilter returned, ascending.
    pub candidates: Vec<u32>,
    /// The mined subset, ascending; equals `candidates` when small enough.
    pub sampled: Vec<u32>,
    pub seed: u64,
}

/// The loaded corpus: record store plus inverted index.
#[derive(Debug)]
pub struct CorpusIndex {
    records: Vec<MethodRecord>,
    index: InvertedIndex,
    fingerprint: String,
    language: String,
}

/// Errors from building, saving, or loading an index.
#[derive(Debug)]
pub enum IndexError {
    DuplicateMethod {
        first: u32,
        second: u32,
        key: String,
    },
    VersionMismatch {
        found: u32,
        supported: u32,
    },
    Checksum {
        file: String,
    },
    Locked {
        dir: PathBuf,
    },
    Corrupt(String),
    Interchange(interchange::InterchangeError),
    Io(std::io::Error),
}

impl fmt::Display for IndexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexError::DuplicateMethod { first, second, key } => {
                write!(f, "duplicate method {} (ids {} and {})", key, first, second)
            }
            IndexError::VersionMismatch { found, supported } => write!(
                f,
                "index format version {} is not supported (this build reads {})",
                found, supported
            ),
            IndexError::Checksum { file } => write!(f, "checksum mismatch for {}", file),
            IndexError::Locked { dir } => {
                write!(f, "index directory {} is locked by a writer", dir.display())
            }
            IndexError::Corrupt(msg) => write!(f, "corrupt index: {}", msg),
            IndexError::Interchange(e) => write!(f, "bad method record: {}", e),
            IndexError::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl std::error::Error for IndexError {}

impl From<std::io::Error> for IndexError {
    fn from(e: std::io::Error) -> Self {
        IndexError::Io(e)
    }
}

impl CorpusIndex {
    /// Builds the store and inverted index from parsed methods. Records are
    /// canonically ordered before id assignment; duplicate `(path, name,
    /// line)` keys are rejected naming both ids.
    pub fn build(
        methods: Vec<(MethodSource, SimplifiedParseTree)>,
        language: &str,
    ) -> Result<Self, IndexError> {
        let mut methods = methods;
        methods.sort_by(|(a, _), (b, _)| {
            (&a.path, &a.name, a.line).cmp(&(&b.path, &b.name, b.line))
        });
        for (i, pair) in methods.windows(2).enumerate() {
            let (a, _) = &pair[0];
            let (b, _) = &pair[1];
            if a.path == b.path && a.name == b.name && a.line == b.line {
                return Err(IndexError::DuplicateMethod {
                    first: i as u32,
                    second: i as u32 + 1,
                    key: format!("{}:{}:{}", a.path, a.line, a.name),
                });
            }
        }
        let records: Vec<MethodRecord> = methods
            .into_iter()
            .enumerate()
            .map(|(id, (src, tree))| MethodRecord {
                id: id as u32,
                src,
                tree,
            })
            .collect();

        // Token sets per record in parallel, merged in id order so the
        // result is independent of scheduling.
        let token_sets: Vec<Vec<String>> = records
            .par_iter()
            .map(|r| {
                let mut toks: Vec<String> = r
                    .tree
                    .token_stream()
                    .iter()
                    .filter(|t| t.kind == TokenKind::NonKeyword)
                    .map(|t| t.text.to_string())
                    .collect();
                toks.sort_unstable();
                toks.dedup();
                toks
            })
            .collect();
        let mut postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (id, toks) in token_sets.into_iter().enumerate() {
            for tok in toks {
                postings.entry(tok).or_default().push(id as u32);
            }
        }
        let fingerprint = fingerprint_records(&records);
        Ok(CorpusIndex {
            records,
            index: InvertedIndex { postings },
            fingerprint,
            language: language.to_string(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn record(&self, id: u32) -> Option<&MethodRecord> {
        self.records.get(id as usize)
    }

    pub fn records(&self) -> &[MethodRecord] {
        &self.records
    }

    pub fn inverted(&self) -> &InvertedIndex {
        &self.index
    }

    /// SHA-256 over the canonical record content; equal fingerprints mean
    /// equal corpora regardless of ingestion order.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    /// Candidate ids for a query: the intersection of the postings of all
    /// its non-keyword tokens, ascending. An unknown token gives an empty
    /// result. This over-approximates containment; the miner verifies the
    /// parsed query pattern afterwards.
    pub fn lookup(&self, query_tokens: &[&str]) -> Vec<u32> {
        let mut lists: Vec<&[u32]> = query_tokens
            .iter()
            .map(|t| self.index.postings(t))
            .collect();
        if lists.is_empty() {
            return Vec::new();
        }
        lists.sort_by_key(|l| l.len());
        let mut acc: Vec<u32> = lists[0].to_vec();
        for list in &lists[1..] {
            if acc.is_empty() {
                break;
            }
            acc.retain(|id| list.binary_search(id).is_ok());
        }
        acc
    }

    /// Saves to `dir`, refusing if another writer holds the lock file.
    pub fn save(&self, dir: &Path) -> Result<(), IndexError> {
        std::fs::create_dir_all(dir)?;
        let lock = dir.join(LOCK_FILE);
        let _guard = LockGuard::acquire(&lock, dir)?;

        let pairs: Vec<(MethodSource, SimplifiedParseTree)> = self
            .records
            .iter()
            .map(|r| (r.src.clone(), r.tree.clone()))
            .collect();
        interchange::write_interchange_file(&dir.join(METHODS_FILE), &pairs)
            .map_err(IndexError::Io)?;

        let postings_bytes = write_postings(&self.index);
        std::fs::write(dir.join(POSTINGS_FILE), &postings_bytes)?;

        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            method_count: self.records.len() as u64,
            token_count: self.index.token_count() as u64,
            fingerprint: self.fingerprint.clone(),
            language: self.language.clone(),
            methods_sha256: sha256_file(&dir.join(METHODS_FILE))?,
            postings_sha256: hex_digest(&postings_bytes),
            seed_policy: "caller-supplied, recorded in output provenance".to_string(),
            built_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let manifest_json =
            serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), manifest_json)?;
        Ok(())
    }

    /// Loads an index directory, verifying the format version and the file
    /// checksums recorded in the manifest.
    pub fn load(dir: &Path) -> Result<Self, IndexError> {
        if dir.join(LOCK_FILE).exists() {
            return Err(IndexError::Locked { dir: dir.to_path_buf() });
        }
        let manifest_bytes = std::fs::read(dir.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
            .map_err(|e| IndexError::Corrupt(format!("manifest: {}", e)))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(IndexError::VersionMismatch {
                found: manifest.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let methods_path = dir.join(METHODS_FILE);
        if sha256_file(&methods_path)? != manifest.methods_sha256 {
            return Err(IndexError::Checksum {
                file: METHODS_FILE.to_string(),
            });
        }
        let postings_bytes = std::fs::read(dir.join(POSTINGS_FILE))?;
        if hex_digest(&postings_bytes) != manifest.postings_sha256 {
            return Err(IndexError::Checksum {
                file: POSTINGS_FILE.to_string(),
            });
        }
        let (pairs, _) =
            interchange::read_interchange_file(&methods_path, interchange::IngestMode::Strict)
                .map_err(|e| IndexError::Corrupt(format!("methods file: {}", e)))?;
        if pairs.len() as u64 != manifest.method_count {
            return Err(IndexError::Corrupt(format!(
                "manifest says {} methods, file has {}",
                manifest.method_count,
                pairs.len()
            )));
        }
        let records: Vec<MethodRecord> = pairs
            .into_iter()
            .enumerate()
            .map(|(id, (src, tree))| MethodRecord {
                id: id as u32,
                src,
                tree,
            })
            .collect();
        let index = read_postings(&postings_bytes)?;
        let fingerprint = fingerprint_records(&records);
        if fingerprint != manifest.fingerprint {
            return Err(IndexError::Corrupt(
                "fingerprint does not match manifest".to_string(),
            ));
        }
        Ok(CorpusIndex {
            records,
            index,
            fingerprint,
            language: manifest.language,
        })
    }
}

/// Uniform deterministic sample without replacement. Everything is kept
/// when the candidate set fits under `max_samples`.
pub fn sample(candidates: &[u32], max_samples: usize, seed: u64, query: &str) -> CorpusSample {
    assert!(max_samples >= 1, "max_samples must be at least 1");
    let sampled = if candidates.len() <= max_samples {
        candidates.to_vec()
    } else {
        sample_indices(candidates.len(), max_samples, seed)
            .into_iter()
            .map(|i| candidates[i])
            .collect()
    };
    CorpusSample {
        query: query.to_string(),
        candidates: candidates.to_vec(),
        sampled,
        seed,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    method_count: u64,
    token_count: u64,
    fingerprint: String,
    language: String,
    methods_sha256: String,
    postings_sha256: String,
    seed_policy: String,
    built_unix: u64,
}

struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(path: &Path, dir: &Path) -> Result<Self, IndexError> {
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(LockGuard { path: path.to_path_buf() })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(IndexError::Locked { dir: dir.to_path_buf() })
            }
            Err(e) => Err(IndexError::Io(e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn fingerprint_records(records: &[MethodRecord]) -> String {
    let mut hasher = Sha256::new();
    for r in records {
        hasher.update(r.src.path.as_bytes());
        hasher.update([0]);
        hasher.update(r.src.name.as_bytes());
        hasher.update([0]);
        hasher.update(r.src.line.to_le_bytes());
        hasher.update(r.src.source.as_bytes());
        hasher.update([0]);
    }
    hex(&hasher.finalize())
}

fn sha256_file(path: &Path) -> Result<String, IndexError> {
    Ok(hex_digest(&std::fs::read(path)?))
}

fn hex_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{:02x}", b));
    }
    s
}

/// Postings file layout (all integers little-endian):
///
/// ```text
/// magic "EGPOST01"
/// u32 token_count
/// token_count times, tokens in byte order:
///   u32 token_len, token bytes (UTF-8)
///   u32 posting_count
///   posting_count LEB128 varints: first the lowest id, then gaps to the
///   next id (delta encoding)
/// ```
fn write_postings(index: &InvertedIndex) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(POSTINGS_MAGIC);
    out.extend_from_slice(&(index.token_count() as u32).to_le_bytes());
    for (token, ids) in index.tokens() {
        out.extend_from_slice(&(token.len() as u32).to_le_bytes());
        out.extend_from_slice(token.as_bytes());
        out.extend_from_slice(&(ids.len() as u32).to_le_bytes());
        let mut prev = 0u32;
        for (i, &id) in ids.iter().enumerate() {
            let delta = if i == 0 { id } else { id - prev };
            write_varint(&mut out, delta);
            prev = id;
        }
    }
    out
}

fn read_postings(bytes: &[u8]) -> Result<InvertedIndex, IndexError> {
    let corrupt = |msg: &str| IndexError::Corrupt(format!("postings: {}", msg));
    if bytes.len() < 12 || &bytes[..8] != POSTINGS_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut pos = 8usize;
    let token_count = read_u32(bytes, &mut pos).ok_or_else(|| corrupt("truncated count"))? as usize;
    let mut postings = BTreeMap::new();
    for _ in 0..token_count {
        let len = read_u32(bytes, &mut pos).ok_or_else(|| corrupt("truncated token length"))? as usize;
        let token = bytes
            .get(pos..pos + len)
            .and_then(|b| std::str::from_utf8(b).ok())
            .ok_or_else(|| corrupt("truncated token"))?
            .to_string();
        pos += len;
        let n = read_u32(bytes, &mut pos).ok_or_else(|| corrupt("truncated posting count"))? as usize;
        let mut ids = Vec::with_capacity(n);
        let mut prev = 0u32;
        for i in 0..n {
            let delta = read_varint(bytes, &mut pos).ok_or_else(|| corrupt("truncated varint"))?;
            let id = if i == 0 { delta } else { prev + delta };
            ids.push(id);
            prev = id;
        }
        postings.insert(token, ids);
    }
    Ok(InvertedIndex { postings })
}

fn write_varint(out: &mut Vec<u8>, mut v: u32) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    let mut v = 0u32;
    let mut shift = 0u32;
    loop {
        let byte = *bytes.get(*pos)?;
        *pos += 1;
        v |= ((byte & 0x7f) as u32) << shift;
        if byte & 0x80 == 0 {
            return Some(v);
        }
        shift += 7;
        if shift > 28 {
            return None;
        }
    }
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Option<u32> {
    let slice = bytes.get(*pos..*pos + 4)?;
    *pos += 4;
    Some(u32::from_le_bytes(slice.try_into().ok()?))
}

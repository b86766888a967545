//! Corpus handling: ingest labeled C functions from a directory bundle
//! (.c files plus a `manifest.jsonl`), normalize and deduplicate them by
//! MD5, align sink-line labels onto CPG statement nodes, and produce
//! seeded stratified train/validation/test splits.

pub mod samples;
mod synth;

pub use synth::generate_synthetic;

use crate::frontend::{CodePropertyGraph, NodeId};
use md5::{Digest, Md5};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// One labeled function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub cwe: String,
    pub source: String,
    pub vulnerable: bool,
    pub sink_lines: BTreeSet<u32>,
    pub md5: String,
}

/// Manifest record: one JSON object per line of `manifest.jsonl`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub file: String,
    pub cwe: String,
    pub vulnerable: bool,
    pub sink_lines: Vec<u32>,
}

/// Split bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Train,
    Validation,
    Test,
}

/// Entry id -> bucket assignment, with any stratum warnings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub buckets: BTreeMap<String, Bucket>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    pub fn ids_in(&self, bucket: Bucket) -> Vec<String> {
        self.buckets
            .iter()
            .filter(|(_, b)| **b == bucket)
            .map(|(id, _)| id.clone())
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest.jsonl not found under {0}")]
    ManifestMissing(PathBuf),
    #[error("manifest lists missing file {0}")]
    ManifestMismatch(String),
    #[error("malformed manifest line {line}: {message}")]
    ManifestParse { line: usize, message: String },
    #[error("sink line {line} has no statement node in function {function}")]
    LabelOutOfRange { function: String, line: u32 },
    #[error("split fractions must sum to 1, got {0}")]
    BadFractions(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Strip comments and collapse whitespace so trivially reformatted copies
/// hash identically.
pub fn normalize_source(source: &str) -> String {
    let mut out = String::with_capacity(source.len());
    let bytes = source.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if bytes[i] == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            i += 2;
            while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            out.push(' ');
            continue;
        }
        out.push(bytes[i] as char);
        i += 1;
    }
    // collapse runs, then keep a space only where it separates two word
    // characters; `f() { x }` and `f(){x}` must hash identically
    let collapsed = out.split_whitespace().collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = collapsed.chars().collect();
    let mut norm = String::with_capacity(collapsed.len());
    for (i, &c) in chars.iter().enumerate() {
        if c == ' ' {
            let word = |c: char| c.is_ascii_alphanumeric() || c == '_';
            let prev = i.checked_sub(1).map(|p| chars[p]).unwrap_or(' ');
            let next = chars.get(i + 1).copied().unwrap_or(' ');
            if word(prev) && word(next) {
                norm.push(' ');
            }
        } else {
            norm.push(c);
        }
    }
    norm
}

/// MD5 hex digest of the normalized source.
pub fn content_digest(source: &str) -> String {
    let mut hasher = Md5::new();
    hasher.update(normalize_source(source).as_bytes());
    hex_string(&hasher.finalize())
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Load a corpus bundle: every manifest record becomes one entry.
pub fn ingest_directory(root: &Path) -> Result<Vec<CorpusEntry>, CorpusError> {
    let manifest_path = root.join("manifest.jsonl");
    if !manifest_path.is_file() {
        return Err(CorpusError::ManifestMissing(root.to_path_buf()));
    }
    let text = std::fs::read_to_string(&manifest_path)?;
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::ManifestParse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        let file = root.join(&record.file);
        if !file.is_file() {
            return Err(CorpusError::ManifestMismatch(record.file.clone()));
        }
        let source = std::fs::read_to_string(&file)?;
        let md5 = content_digest(&source);
        entries.push(CorpusEntry {
            id: record.id,
            cwe: record.cwe,
            source,
            vulnerable: record.vulnerable,
            sink_lines: record.sink_lines.into_iter().collect(),
            md5,
        });
    }
    Ok(entries)
}

/// Write a corpus bundle (one .c file per entry plus the manifest).
pub fn write_bundle(entries: &[CorpusEntry], out: &Path) -> Result<(), CorpusError> {
    std::fs::create_dir_all(out)?;
    let mut manifest = String::new();
    for entry in entries {
        let file = format!("{}.c", entry.id);
        std::fs::write(out.join(&file), &entry.source)?;
        let record = ManifestRecord {
            id: entry.id.clone(),
            file,
            cwe: entry.cwe.clone(),
            vulnerable: entry.vulnerable,
            sink_lines: entry.sink_lines.iter().copied().collect(),
        };
        manifest.push_str(&serde_json::to_string(&record).expect("manifest record serializes"));
        manifest.push('\n');
    }
    std::fs::write(out.join("manifest.jsonl"), manifest)?;
    Ok(())
}

/// Keep the first occurrence (stable order) of each MD5 digest.
pub fn dedup_md5(entries: Vec<CorpusEntry>) -> Vec<CorpusEntry> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    entries
        .into_iter()
        .filter(|e| seen.insert(e.md5.clone()))
        .collect()
}

/// Per-statement-node sink labels for one entry, in statement id order.
/// A node is positive when its line is one of the entry's sink lines.
pub fn align_labels(
    entry: &CorpusEntry,
    cpg: &CodePropertyGraph,
) -> Result<Vec<(NodeId, bool)>, CorpusError> {
    let statements = cpg.statement_ids();
    let statement_lines: BTreeSet<u32> = statements
        .iter()
        .map(|&id| cpg.node(id).unwrap().line)
        .collect();
    for &line in &entry.sink_lines {
        if !statement_lines.contains(&line) {
            return Err(CorpusError::LabelOutOfRange {
                function: entry.id.clone(),
                line,
            });
        }
    }
    Ok(statements
        .iter()
        .map(|&id| {
            let line = cpg.node(id).unwrap().line;
            (id, entry.sink_lines.contains(&line))
        })
        .collect())
}

/// Stratified, seeded split with largest-remainder rounding per CWE tag.
pub fn split_corpus(
    entries: &[CorpusEntry],
    seed: u64,
    fractions: (f64, f64, f64),
) -> Result<SplitAssignment, CorpusError> {
    let total = fractions.0 + fractions.1 + fractions.2;
    if (total - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(total));
    }
    let mut strata: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for entry in entries {
        strata
            .entry(entry.cwe.clone())
            .or_default()
            .push(entry.id.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buckets = BTreeMap::new();
    let mut warnings = Vec::new();
    for (cwe, mut ids) in strata {
        if ids.len() < 3 {
            warnings.push(format!(
                "stratum {cwe} has only {} entries; split cannot populate every bucket",
                ids.len()
            ));
        }
        ids.sort();
        ids.shuffle(&mut rng);
        let sizes = largest_remainder(ids.len(), fractions);
        let (train, rest) = ids.split_at(sizes.0);
        let (validation, test) = rest.split_at(sizes.1);
        for id in train {
            buckets.insert(id.clone(), Bucket::Train);
        }
        for id in validation {
            buckets.insert(id.clone(), Bucket::Validation);
        }
        for id in test {
            buckets.insert(id.clone(), Bucket::Test);
        }
    }
    Ok(SplitAssignment { buckets, warnings })
}

/// Largest-remainder apportionment of `n` items across three fractions;
/// remainder ties resolve train > validation > test.
fn largest_remainder(n: usize, fractions: (f64, f64, f64)) -> (usize, usize, usize) {
    let exact = [
        n as f64 * fractions.0,
        n as f64 * fractions.1,
        n as f64 * fractions.2,
    ];
    let mut sizes: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        sizes[order[i % 3]] += 1;
    }
    (sizes[0], sizes[1], sizes[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::build_cpg;
    use samples::STACK_OVERFLOW_MEMMOVE;

    fn entry(id: &str, cwe: &str, source: &str, sinks: &[u32]) -> CorpusEntry {
        CorpusEntry {
            id: id.to_string(),
            cwe: cwe.to_string(),
            source: source.to_string(),
            vulnerable: !sinks.is_empty(),
            sink_lines: sinks.iter().copied().collect(),
            md5: content_digest(source),
        }
    }

    #[test]
    fn normalization_erases_comments_and_whitespace() {
        let a = "void f(){int x = 1;}";
        let b = "void f() {\n  int x = 1; // init\n}";
        assert_eq!(content_digest(a), content_digest(b));
    }

    #[test]
    fn dedup_keeps_first_occurrence_and_is_idempotent() {
        let entries = vec![
            entry("a", "CWE-121", "void f(){int x = 1;}", &[]),
            entry("b", "CWE-121", "void f()  { int x = 1; }", &[]),
            entry("c", "CWE-121", "void g(){int y = 2;}", &[]),
        ];
        let once = dedup_md5(entries);
        assert_eq!(
            once.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
            vec!["a", "c"]
        );
        let twice = dedup_md5(once.clone());
        assert_eq!(once.len(), twice.len());
    }

    #[test]
    fn align_marks_exactly_the_sink_line() {
        let e = entry("fig", "CWE-121", STACK_OVERFLOW_MEMMOVE, &[8]);
        let cpg = build_cpg(&e.source).unwrap();
        let labels = align_labels(&e, &cpg).unwrap();
        let positives: Vec<u32> = labels
            .iter()
            .filter(|(_, y)| *y)
            .map(|(id, _)| cpg.node(*id).unwrap().line)
            .collect();
        assert_eq!(positives, vec![8]);
    }

    #[test]
    fn align_rejects_out_of_range_sink_line() {
        let e = entry("fig", "CWE-121", STACK_OVERFLOW_MEMMOVE, &[99]);
        let cpg = build_cpg(&e.source).unwrap();
        assert!(matches!(
            align_labels(&e, &cpg),
            Err(CorpusError::LabelOutOfRange { line: 99, .. })
        ));
    }

    #[test]
    fn empty_sinks_give_all_zero_labels() {
        let e = entry("fig", "CWE-121", STACK_OVERFLOW_MEMMOVE, &[]);
        let cpg = build_cpg(&e.source).unwrap();
        let labels = align_labels(&e, &cpg).unwrap();
        assert!(labels.iter().all(|(_, y)| !*y));
        assert_eq!(labels.len(), 9);
    }

    #[test]
    fn ten_entries_split_seven_one_two() {
        let entries: Vec<CorpusEntry> = (0..10)
            .map(|i| {
                entry(
                    &format!("e{i}"),
                    "CWE-121",
                    &format!("void f{i}(){{int x = {i};}}"),
                    &[],
                )
            })
            .collect();
        let split = split_corpus(&entries, 7, (0.7, 0.1, 0.2)).unwrap();
        assert_eq!(split.ids_in(Bucket::Train).len(), 7);
        assert_eq!(split.ids_in(Bucket::Validation).len(), 1);
        assert_eq!(split.ids_in(Bucket::Test).len(), 2);
    }

    #[test]
    fn split_is_deterministic_and_exhaustive() {
        let entries: Vec<CorpusEntry> = (0..25)
            .map(|i| {
                entry(
                    &format!("e{i}"),
                    if i % 2 == 0 { "CWE-121" } else { "CWE-122" },
                    &format!("void f{i}(){{int x = {i};}}"),
                    &[],
                )
            })
            .collect();
        let a = split_corpus(&entries, 42, (0.7, 0.1, 0.2)).unwrap();
        let b = split_corpus(&entries, 42, (0.7, 0.1, 0.2)).unwrap();
        assert_eq!(a.buckets, b.buckets);
        assert_eq!(a.buckets.len(), entries.len());
    }

    #[test]
    fn tiny_stratum_warns() {
        let entries = vec![
            entry("a", "CWE-126", "void f(){int x = 1;}", &[]),
            entry("b", "CWE-121", "void g(){int y = 1;}", &[]),
            entry("c", "CWE-121", "void h(){int z = 1;}", &[]),
            entry("d", "CWE-121", "void k(){int w = 1;}", &[]),
        ];
        let split = split_corpus(&entries, 1, (0.7, 0.1, 0.2)).unwrap();
        assert_eq!(split.warnings.len(), 1);
        assert!(split.warnings[0].contains("CWE-126"));
    }

    #[test]
    fn ingest_round_trips_a_bundle() {
        let dir = std::env::temp_dir().join(format!("vulpath-corpus-{}", std::process::id()));
        let entries = vec![entry("fig", "CWE-121", STACK_OVERFLOW_MEMMOVE, &[8])];
        write_bundle(&entries, &dir).unwrap();
        let back = ingest_directory(&dir).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].id, "fig");
        assert_eq!(back[0].sink_lines.iter().copied().collect::<Vec<_>>(), vec![8]);
        assert_eq!(back[0].md5, entries[0].md5);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_file_is_a_manifest_mismatch() {
        let dir = std::env::temp_dir().join(format!("vulpath-mismatch-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("manifest.jsonl"),
            "{\"id\":\"x\",\"file\":\"gone.c\",\"cwe\":\"CWE-121\",\"vulnerable\":false,\"sink_lines\":[]}\n",
        )
        .unwrap();
        assert!(matches!(
            ingest_directory(&dir),
            Err(CorpusError::ManifestMismatch(f)) if f == "gone.c"
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_manifest_is_reported() {
        let dir = std::env::temp_dir().join(format!("vulpath-nomanifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        assert!(matches!(
            ingest_directory(&dir),
            Err(CorpusError::ManifestMissing(_))
        ));
        std::fs::remove_dir_all(&dir).ok();
    }
}

//! Lemma corpora: manifests, syntactic complexity metrics, and batch runs
//! with per-lemma records and summary tables.

use crate::agent::{prove_lemma, write_audit, FailureReason, RunConfig, RunReport, SharedHistory};
use crate::gateway::Backend;
use crate::source::{split_sentences, SourceFile};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

pub const DEFAULT_BUCKET_EDGES: [usize; 4] = [25, 50, 75, 100];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("manifest has no entries")]
    Empty,
    #[error("cannot write batch output: {0}")]
    Storage(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    NonOverflow,
    FunctionalCorrectness,
    LoopInvariant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ManifestEntry {
    pub source_file: PathBuf,
    pub lemma_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// A JSON document `{"entries": [...]}`. Relative source paths are resolved
/// against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CorpusError> {
        let mut m: CorpusManifest =
            serde_json::from_str(text).map_err(|e| CorpusError::Malformed(e.to_string()))?;
        if m.entries.is_empty() {
            return Err(CorpusError::Empty);
        }
        for e in &mut m.entries {
            if e.source_file.is_relative() {
                e.source_file = base.join(&e.source_file);
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct LemmaComplexity {
    pub term_count: usize,
    pub hypothesis_count: usize,
}

const PUNCTUATION: &[char] = &['(', ')', '[', ']', '{', '}', ',', ':', ';', '.'];
const OPERATOR_CHARS: &[char] = &[
    '=', '<', '>', '-', '+', '*', '/', '\\', '~', '&', '|', '!', '^', '@', '#', '$', '?',
];
/// Binder types that hold propositions rather than values.
const PROP_MARKERS: &[&str] = &[
    "=", "<", ">", "<=", ">=", "<>", "/\\", "\\/", "~", "->", "<->",
];

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Terms of a statement: identifiers (dotted paths count once), numerals
/// with an optional `%scope`, quantifier keywords, and maximal runs of
/// operator symbols. Brackets, commas, colons, semicolons and dots are
/// punctuation and are not counted.
pub fn term_tokens(statement: &str) -> Vec<String> {
    let chars: Vec<char> = statement.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || PUNCTUATION.contains(&c) {
            i += 1;
        } else if is_ident_char(c) {
            let start = i;
            while i < chars.len()
                && (is_ident_char(chars[i])
                    || (chars[i] == '.' && chars.get(i + 1).is_some_and(|n| is_ident_char(*n))))
            {
                i += 1;
            }
            if c.is_ascii_digit() && chars.get(i) == Some(&'%') {
                i += 1;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
            }
            out.push(chars[start..i].iter().collect());
        } else if OPERATOR_CHARS.contains(&c) {
            let start = i;
            while i < chars.len() && OPERATOR_CHARS.contains(&chars[i]) {
                i += 1;
            }
            out.push(chars[start..i].iter().collect());
        } else {
            // `%` outside a numeral and other stray symbols
            out.push(c.to_string());
            i += 1;
        }
    }
    out
}

/// Splits `s` on `sep` at bracket depth zero.
fn split_top(s: &str, sep: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    let mut rest = s;
    while let Some(c) = rest.chars().next() {
        // `->` inside `<->` is not an implication
        if depth == 0 && rest.starts_with(sep) && !(sep == "->" && cur.ends_with('<')) {
            parts.push(std::mem::take(&mut cur));
            rest = &rest[sep.len()..];
            continue;
        }
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        cur.push(c);
        rest = &rest[c.len_utf8()..];
    }
    parts.push(cur);
    parts
}

/// Parenthesized binder groups `(names : T)` whose type is a proposition.
fn named_hypotheses(binders: &str) -> usize {
    let mut count = 0;
    let mut depth = 0i32;
    let mut start = None;
    for (i, c) in binders.char_indices() {
        match c {
            '(' => {
                if depth == 0 {
                    start = Some(i + 1);
                }
                depth += 1;
            }
            ')' => {
                depth -= 1;
                if depth == 0 {
                    if let Some(s) = start.take() {
                        let group = &binders[s..i];
                        if let Some((names, ty)) = group.split_once(':') {
                            let toks = term_tokens(ty);
                            if toks.iter().any(|t| PROP_MARKERS.contains(&t.as_str())) {
                                count += names.split_whitespace().count();
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    count
}

/// Strips leading `forall binders,` prefixes, returning the binders and the body.
fn strip_quantifiers(mut s: &str) -> (Vec<String>, &str) {
    let mut binders = Vec::new();
    loop {
        let t = s.trim_start();
        let Some(rest) = t.strip_prefix("forall") else {
            return (binders, t);
        };
        if !rest.starts_with(|c: char| c.is_whitespace() || c == '(') {
            return (binders, t);
        }
        let parts = split_top(rest, ",");
        if parts.len() < 2 {
            return (binders, t);
        }
        binders.push(parts[0].clone());
        s = &rest[parts[0].len() + 1..];
    }
}

/// Counts top-level implication antecedents plus propositional binders in
/// the lemma's binder list and leading `forall` prefixes.
pub fn hypothesis_count(binders: &str, statement: &str) -> usize {
    let (quantified, body) = strip_quantifiers(statement);
    let antecedents = split_top(body, "->").len() - 1;
    antecedents
        + named_hypotheses(binders)
        + quantified.iter().map(|b| named_hypotheses(b)).sum::<usize>()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexityError {
    #[error("lemma `{0}` not found")]
    NotFound(String),
    #[error("lemma `{0}` has an empty statement")]
    EmptyStatement(String),
    #[error("{0}")]
    Parse(String),
}

pub fn complexity_of(source: &str, lemma: &str) -> Result<LemmaComplexity, ComplexityError> {
    let file = SourceFile::parse(source).map_err(|e| ComplexityError::Parse(e.to_string()))?;
    let decl = file
        .lemma(lemma)
        .ok_or_else(|| ComplexityError::NotFound(lemma.to_string()))?;
    if decl.statement.trim().is_empty() {
        return Err(ComplexityError::EmptyStatement(lemma.to_string()));
    }
    let text = format!("{} {}", decl.binders, decl.statement);
    Ok(LemmaComplexity {
        term_count: term_tokens(&text).len(),
        hypothesis_count: hypothesis_count(&decl.binders, &decl.statement),
    })
}

/// Complexity of a single `Lemma name: statement.` sentence.
pub fn complexity_of_sentence(sentence: &str) -> Result<LemmaComplexity, ComplexityError> {
    let split = split_sentences(sentence).map_err(|e| ComplexityError::Parse(e.to_string()))?;
    let first = split
        .sentences
        .first()
        .ok_or_else(|| ComplexityError::Parse("no sentence".into()))?;
    let (name, ..) = crate::source::parse_lemma_sentence(first)
        .ok_or_else(|| ComplexityError::Parse(format!("not a lemma: {first}")))?;
    complexity_of(sentence, &name)
}

/// Index of the bucket holding `value`: bucket `i` is `[edges[i-1], edges[i])`.
pub fn bucket_of(value: usize, edges: &[usize]) -> usize {
    edges.iter().take_while(|e| value >= **e).count()
}

pub fn bucket_labels(edges: &[usize]) -> Vec<String> {
    let mut labels = Vec::with_capacity(edges.len() + 1);
    let mut lo = 0;
    for e in edges {
        labels.push(format!("{lo}-{}", e.saturating_sub(1)));
        lo = *e;
    }
    labels.push(format!("{lo}+"));
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct HistogramBin {
    pub label: String,
    pub count: usize,
    pub percent: f64,
}

fn histogram(values: impl Iterator<Item = usize>, edges: &[usize]) -> Vec<HistogramBin> {
    let mut counts = vec![0usize; edges.len() + 1];
    let mut total = 0;
    for v in values {
        counts[bucket_of(v, edges)] += 1;
        total += 1;
    }
    bucket_labels(edges)
        .into_iter()
        .zip(counts)
        .map(|(label, count)| HistogramBin {
            label,
            count,
            percent: if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StatsEntry {
    pub lemma: String,
    pub source_file: PathBuf,
    #[serde(flatten)]
    pub complexity: Option<LemmaComplexity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ComplexityReport {
    pub entries: Vec<StatsEntry>,
    pub bucket_edges: Vec<usize>,
    pub term_histogram: Vec<HistogramBin>,
    pub hypothesis_histogram: Vec<HistogramBin>,
}

/// Complexity metrics for every manifest entry. Unreadable or unparsable
/// lemmas are reported per entry.
pub fn corpus_stats(manifest: &CorpusManifest, term_edges: &[usize], hyp_edges: &[usize]) -> ComplexityReport {
    let entries: Vec<StatsEntry> = manifest
        .entries
        .iter()
        .map(|e| {
            let result = std::fs::read_to_string(&e.source_file)
                .map_err(|err| format!("cannot read {}: {err}", e.source_file.display()))
                .and_then(|src| complexity_of(&src, &e.lemma_name).map_err(|err| err.to_string()));
            let (complexity, error) = match result {
                Ok(c) => (Some(c), None),
                Err(err) => (None, Some(err)),
            };
            StatsEntry {
                lemma: e.lemma_name.clone(),
                source_file: e.source_file.clone(),
                complexity,
                error,
            }
        })
        .collect();
    let ok = || entries.iter().filter_map(|e| e.complexity);
    ComplexityReport {
        term_histogram: histogram(ok().map(|c| c.term_count), term_edges),
        hypothesis_histogram: histogram(ok().map(|c| c.hypothesis_count), hyp_edges),
        bucket_edges: term_edges.to_vec(),
        entries,
    }
}

/// One line of the batch record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BatchRecord {
    pub name: String,
    pub source_file: PathBuf,
    pub category: Option<Category>,
    pub proved: bool,
    pub failure: Option<FailureReason>,
    pub wall_time_secs: f64,
    pub proof_steps: usize,
    pub attempts: usize,
    pub failed_attempts: usize,
    pub queries: usize,
    pub term_count: Option<usize>,
}

impl BatchRecord {
    fn of(entry: &ManifestEntry, report: &RunReport, complexity: Option<LemmaComplexity>) -> Self {
        let stats = report.result.stats();
        Self {
            name: entry.lemma_name.clone(),
            source_file: entry.source_file.clone(),
            category: entry.category,
            proved: report.result.is_proved(),
            failure: report.result.failure_reason(),
            wall_time_secs: stats.wall_time.as_secs_f64(),
            proof_steps: stats.proof_steps,
            attempts: stats.total_attempts,
            failed_attempts: stats.failed_attempts,
            queries: stats.queries_issued,
            term_count: complexity.map(|c| c.term_count),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GroupSummary {
    pub label: String,
    pub total: usize,
    pub proved: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BatchSummary {
    pub total: usize,
    pub proved: usize,
    pub success_rate: f64,
    /// Over proved lemmas only; `None` when nothing was proved.
    pub average_time_secs: Option<f64>,
    pub average_steps: Option<f64>,
    pub by_category: Vec<GroupSummary>,
    pub by_complexity: Vec<GroupSummary>,
}

fn group(label: String, members: &[&BatchRecord]) -> GroupSummary {
    let proved = members.iter().filter(|r| r.proved).count();
    GroupSummary {
        label,
        total: members.len(),
        proved,
        success_rate: if members.is_empty() {
            0.0
        } else {
            proved as f64 / members.len() as f64
        },
    }
}

/// Summary metrics computed from the records alone.
pub fn summarize(records: &[BatchRecord], edges: &[usize]) -> BatchSummary {
    let proved: Vec<&BatchRecord> = records.iter().filter(|r| r.proved).collect();
    let n = proved.len();
    let avg = |f: &dyn Fn(&BatchRecord) -> f64| {
        (n > 0).then(|| proved.iter().map(|r| f(r)).sum::<f64>() / n as f64)
    };
    let mut by_category: BTreeMap<Category, Vec<&BatchRecord>> = BTreeMap::new();
    for r in records {
        if let Some(c) = r.category {
            by_category.entry(c).or_default().push(r);
        }
    }
    let labels = bucket_labels(edges);
    let mut by_bucket: Vec<Vec<&BatchRecord>> = vec![Vec::new(); labels.len()];
    for r in records {
        if let Some(t) = r.term_count {
            by_bucket[bucket_of(t, edges)].push(r);
        }
    }
    BatchSummary {
        total: records.len(),
        proved: n,
        success_rate: if records.is_empty() {
            0.0
        } else {
            n as f64 / records.len() as f64
        },
        average_time_secs: avg(&|r| r.wall_time_secs),
        average_steps: avg(&|r| r.proof_steps as f64),
        by_category: by_category
            .into_iter()
            .map(|(c, m)| group(format!("{c:?}"), &m))
            .collect(),
        by_complexity: labels
            .into_iter()
            .zip(by_bucket)
            .map(|(l, m)| group(l, &m))
            .collect(),
    }
}

pub struct BatchOutcome {
    pub records: Vec<BatchRecord>,
    pub summary: BatchSummary,
    pub records_path: PathBuf,
    pub summary_path: PathBuf,
}

pub const RECORDS_FILE: &str = "batch-records.jsonl";
pub const SUMMARY_FILE: &str = "batch-summary.json";

/// Proves every manifest entry with up to `jobs` lemmas in flight, writes
/// an audit bundle per lemma, the record file and the summary.
pub fn run_batch(
    manifest: &CorpusManifest,
    config: &RunConfig,
    history: &SharedHistory,
    jobs: usize,
    edges: &[usize],
    backend_for: &(dyn Fn(&ManifestEntry) -> Box<dyn Backend> + Sync),
) -> Result<BatchOutcome, CorpusError> {
    std::fs::create_dir_all(&config.audit_dir)?;
    let slots: Vec<Mutex<Option<BatchRecord>>> =
        manifest.entries.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let audit_error: Mutex<Option<std::io::Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(manifest.entries.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = manifest.entries.get(i) else {
                    break;
                };
                let source = std::fs::read_to_string(&entry.source_file).unwrap_or_default();
                let complexity = complexity_of(&source, &entry.lemma_name).ok();
                let mut backend = backend_for(entry);
                let report = prove_lemma(&source, &entry.lemma_name, config, history, &mut *backend);
                if let Err(crate::agent::AuditError::StorageFailure(e)) =
                    write_audit(&report, &config.audit_dir)
                {
                    audit_error.lock().unwrap().get_or_insert(e);
                }
                *slots[i].lock().unwrap() = Some(BatchRecord::of(entry, &report, complexity));
            });
        }
    });
    if let Some(e) = audit_error.into_inner().unwrap() {
        return Err(CorpusError::Storage(e));
    }
    let records: Vec<BatchRecord> = slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every entry ran"))
        .collect();
    let records_path = config.audit_dir.join(RECORDS_FILE);
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    std::fs::write(&records_path, lines)?;
    let summary = summarize(&records, edges);
    let summary_path = config.audit_dir.join(SUMMARY_FILE);
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )?;
    Ok(BatchOutcome {
        records,
        summary,
        records_path,
        summary_path,
    })
}

/// Reads a record file written by [`run_batch`].
pub fn read_records(path: &Path) -> Result<Vec<BatchRecord>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CorpusError::Malformed(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_metrics() {
        assert_eq!(
            complexity_of_sentence("Lemma t: True.").unwrap(),
            LemmaComplexity { term_count: 1, hypothesis_count: 0 }
        );
        // forall x y Zneq_bool x y = false -> x = y
        assert_eq!(
            complexity_of_sentence("Lemma Zneq_bool_false: forall x y, Zneq_bool x y=false -> x=y.")
                .unwrap(),
            LemmaComplexity { term_count: 12, hypothesis_count: 1 }
        );
        // binder (H : 0 <= x) is a named hypothesis; two antecedents follow
        assert_eq!(
            complexity_of_sentence("Lemma l (x : Z) (H : 0 <= x) : x < 10 -> x > 2 -> Z.abs x = x.")
                .unwrap()
                .hypothesis_count,
            3
        );
    }

    #[test]
    fn empty_statement_fails() {
        assert!(complexity_of("Lemma e: .", "e").is_err());
        assert!(complexity_of("Lemma e: True.", "nope").is_err());
    }

    #[test]
    fn tokens() {
        assert_eq!(term_tokens("Z.abs (x + 10%Z) <= 3"), ["Z.abs", "x", "+", "10%Z", "<=", "3"]);
        assert_eq!(term_tokens("a /\\ ~ b"), ["a", "/\\", "~", "b"]);
    }

    #[test]
    fn nested_implication_counts_once() {
        assert_eq!(hypothesis_count("", "forall P Q, (P -> Q) -> P -> Q"), 2);
        assert_eq!(hypothesis_count("", "forall (x : Z) (H : x > 0), x <> 0"), 1);
        assert_eq!(hypothesis_count("", "forall P, P <-> P"), 0);
    }

    #[test]
    fn buckets() {
        let e = DEFAULT_BUCKET_EDGES;
        assert_eq!(bucket_labels(&e), ["0-24", "25-49", "50-74", "75-99", "100+"]);
        assert_eq!(
            [0, 24, 25, 99, 100, 1000].map(|v| bucket_of(v, &e)),
            [0, 0, 1, 3, 4, 4]
        );
    }

    fn rec(name: &str, cat: Option<Category>, proved: bool, t: f64, steps: usize) -> BatchRecord {
        BatchRecord {
            name: name.into(),
            source_file: PathBuf::from("x.v"),
            category: cat,
            proved,
            failure: (!proved).then_some(FailureReason::GiveUp),
            wall_time_secs: t,
            proof_steps: steps,
            attempts: steps,
            failed_attempts: 0,
            queries: 0,
            term_count: Some(steps * 10),
        }
    }

    #[test]
    fn summary_arithmetic() {
        let records = [
            rec("a", Some(Category::NonOverflow), true, 1.0, 2),
            rec("b", None, true, 3.0, 6),
            rec("c", Some(Category::NonOverflow), false, 9.0, 0),
        ];
        let s = summarize(&records, &DEFAULT_BUCKET_EDGES);
        assert_eq!((s.total, s.proved), (3, 2));
        assert_eq!(s.success_rate, 2.0 / 3.0);
        assert_eq!(s.average_time_secs, Some(2.0));
        assert_eq!(s.average_steps, Some(4.0));
        assert_eq!(s.by_category.len(), 1);
        assert_eq!(s.by_category[0].total, 2);
        assert_eq!(s.by_complexity.len(), 5);
    }

    #[test]
    fn manifest_paths_resolve() {
        let m = CorpusManifest::parse(
            r#"{"entries":[{"source-file":"a.v","lemma-name":"t","category":"loop-invariant"}]}"#,
            Path::new("/corpus"),
        )
        .unwrap();
        assert_eq!(m.entries[0].source_file, Path::new("/corpus/a.v"));
        assert!(matches!(CorpusManifest::parse(r#"{"entries":[]}"#, Path::new(".")), Err(CorpusError::Empty)));
    }
}

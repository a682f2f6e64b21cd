//! Runs a two-lemma corpus in parallel and prints the summary, along with
//! the complexity statistics of the corpus.

use arbor::agent::RunConfig;
use arbor::corpus::{corpus_stats, run_batch, CorpusManifest, ManifestEntry, DEFAULT_BUCKET_EDGES};
use arbor::gateway::{Backend, RetryPolicy, ScriptedBackend};
use arbor::history::HistoryDb;
use std::sync::{Arc, Mutex};

const SOURCE: &str = r#"Lemma easy : True.
Proof.
Admitted.

Lemma refl (n : nat) : n = n.
Proof.
Admitted.
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    std::fs::write(dir.path().join("small.v"), SOURCE)?;
    let manifest = CorpusManifest::parse(
        r#"{"entries": [
            {"source-file": "small.v", "lemma-name": "easy", "category": "non-overflow"},
            {"source-file": "small.v", "lemma-name": "refl", "category": "loop-invariant"}
        ]}"#,
        dir.path(),
    )?;
    println!("{}", serde_json::to_string_pretty(&corpus_stats(&manifest, &DEFAULT_BUCKET_EDGES, &[1, 2]))?);

    let config = RunConfig {
        history_enabled: false,
        retry: RetryPolicy::none(),
        audit_dir: dir.path().join("audit"),
        ..RunConfig::default()
    };
    let history = Arc::new(Mutex::new(HistoryDb::in_memory()));
    let backend_for = |e: &ManifestEntry| -> Box<dyn Backend> {
        let reply = if e.lemma_name == "easy" { "exact I." } else { "nia." };
        Box::new(ScriptedBackend::new([reply]))
    };
    let out = run_batch(&manifest, &config, &history, 2, &DEFAULT_BUCKET_EDGES, &backend_for)?;
    for r in &out.records {
        println!("{} proved={} failure={:?}", r.name, r.proved, r.failure);
    }
    println!("{}", serde_json::to_string_pretty(&out.summary)?);
    Ok(())
}

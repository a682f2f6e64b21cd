//! Proves the bundled `wp_goal` lemma against the mock prover with a
//! recorded completion script, then prints the tree and the certificate.

use arbor::agent::{prove_lemma, RunConfig, RunResult};
use arbor::gateway::{RetryPolicy, ScriptedBackend};
use arbor::history::HistoryDb;
use std::path::Path;
use std::sync::{Arc, Mutex};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let source = std::fs::read_to_string(fixtures.join("wp_goal.v"))?;
    let mut backend = ScriptedBackend::from_fixture(&fixtures.join("wp_goal.completions"))?;
    let config = RunConfig {
        history_enabled: false,
        retry: RetryPolicy::none(),
        ..RunConfig::default()
    };
    let history = Arc::new(Mutex::new(HistoryDb::in_memory()));
    let report = prove_lemma(&source, "wp_goal", &config, &history, &mut backend);
    match &report.result {
        RunResult::Proved { script, tree, stats } => {
            println!("{}", tree.render(4000));
            println!("{}", script.to_certificate());
            println!("{stats:?}");
        }
        RunResult::Failed { reason, detail, .. } => println!("failed: {reason:?}: {detail}"),
    }
    Ok(())
}

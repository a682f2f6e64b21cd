mod common;

use arbor::agent::{prove_lemma, write_audit, FailureReason, RunResult, SharedHistory};
use arbor::gateway::{RecordingBackend, ScriptedBackend};
use arbor::history::HistoryDb;
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, Mutex};
use std::time::Duration;

fn memory() -> SharedHistory {
    Arc::new(Mutex::new(HistoryDb::in_memory()))
}

fn wp_goal_script() -> Vec<String> {
    ScriptedBackend::parse_fixture(&read_fixture("wp_goal.completions"))
}

#[test]
fn recorded_completions_reproduce_the_run() {
    let source = read_fixture("wp_goal.v");
    let config = mock_config();
    let mut recorder = RecordingBackend::new(ScriptedBackend::new(wp_goal_script()));
    let first = prove_lemma(&source, "wp_goal", &config, &memory(), &mut recorder);
    let (_, captured) = recorder.into_inner();

    let fixture = ScriptedBackend::render_fixture(&captured);
    let mut again = ScriptedBackend::new(ScriptedBackend::parse_fixture(&fixture));
    let second = prove_lemma(&source, "wp_goal", &config, &memory(), &mut again);
    assert!(first.result.is_proved());
    assert!(first.result.same_outcome(&second.result));
}

#[test]
fn audit_bundles_are_deterministic_apart_from_timing() {
    let source = read_fixture("wp_goal.v");
    let config = mock_config();
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for sub in ["a", "b"] {
        let mut backend = ScriptedBackend::new(wp_goal_script());
        let report = prove_lemma(&source, "wp_goal", &config, &memory(), &mut backend);
        let bundle = write_audit(&report, &dir.path().join(sub)).unwrap();
        let read = |p: &std::path::Path| std::fs::read_to_string(p).unwrap();
        texts.push((
            read(bundle.tree.as_deref().unwrap()),
            read(bundle.certificate.as_deref().unwrap()),
            read(&bundle.transcript),
        ));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn proved_lemmas_feed_later_prompts() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let history = memory();
    let first = generate(&mut rng, 0);
    let mut enabled = mock_config();
    enabled.history_enabled = true;
    let mut backend = ScriptedBackend::new(first.solution.iter().map(|(_, t)| t.clone()));
    prove_lemma(&first.source, &first.lemma, &enabled, &history, &mut backend);
    assert!(history.lock().unwrap().contains_theorem(&first.lemma));

    let second = generate(&mut rng, 1);
    let mut backend = ScriptedBackend::new(second.solution.iter().map(|(_, t)| t.clone()));
    prove_lemma(&second.source, &second.lemma, &enabled, &history, &mut backend);
    assert!(!backend.seen()[0].history_snippets.is_empty());
}

#[test]
fn step_budget_aborts() {
    let source = read_fixture("wp_goal.v");
    let mut config = mock_config();
    config.thresholds.max_total_steps = 3;
    let mut backend = ScriptedBackend::new(wp_goal_script());
    let r = prove_lemma(&source, "wp_goal", &config, &memory(), &mut backend).result;
    assert_eq!(r.failure_reason(), Some(FailureReason::StepBudget));
    assert!(r.tree().is_some());
}

#[test]
fn wall_clock_budget_aborts() {
    let source = read_fixture("wp_goal.v");
    let mut config = mock_config();
    config.thresholds.wall_clock_budget = Duration::from_nanos(1);
    let mut backend = ScriptedBackend::new(wp_goal_script());
    let r = prove_lemma(&source, "wp_goal", &config, &memory(), &mut backend).result;
    assert_eq!(r.failure_reason(), Some(FailureReason::TimeBudget));
}

#[test]
fn attempt_cap_aborts() {
    let source = read_fixture("wp_goal.v");
    let mut config = mock_config();
    config.thresholds.max_attempts_per_node = 2;
    config.thresholds.same_error_before_search = 2;
    let mut backend = ScriptedBackend::new(wp_goal_script());
    let r = prove_lemma(&source, "wp_goal", &config, &memory(), &mut backend).result;
    assert_eq!(r.failure_reason(), Some(FailureReason::NodeAttemptCap));
    assert_eq!(r.stats().failed_attempts, 2);
}

#[test]
fn unknown_lemma_is_a_prover_error() {
    let source = read_fixture("wp_goal.v");
    let mut backend = ScriptedBackend::new(wp_goal_script());
    let r = prove_lemma(&source, "missing", &mock_config(), &memory(), &mut backend).result;
    assert!(matches!(
        r,
        RunResult::Failed { reason: FailureReason::ProverError, tree: None, .. }
    ));
    assert_eq!(backend.remaining(), wp_goal_script().len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn clean_solutions_always_prove(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate(&mut rng, 0);
        let script: Vec<String> = g.solution.iter().map(|(_, t)| t.clone()).collect();
        let mut backend = ScriptedBackend::new(script.clone());
        let r = prove_lemma(&g.source, &g.lemma, &mock_config(), &memory(), &mut backend).result;
        let RunResult::Proved { script: cert, stats, .. } = r else {
            return Err(TestCaseError::fail(format!("{r:?}")));
        };
        prop_assert_eq!(stats.failed_attempts, 0);
        prop_assert_eq!(stats.proof_steps, g.solution.len());
        let tactics: Vec<String> = cert.sentences.into_iter().filter(|s| s != "{" && s != "}").collect();
        prop_assert_eq!(tactics, script);
    }
}

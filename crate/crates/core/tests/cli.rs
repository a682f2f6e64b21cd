mod common;

use arbor::gateway::ScriptedBackend;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::process::{Command, Output};

fn arbor(dir: &Path) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_arbor"));
    c.current_dir(dir)
        .env_remove("ARBOR_CONFIG")
        .env("PROOF_HISTORY_PATH", dir.join("history.json"));
    c
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.ends_with(suffix))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn prove_wp_goal(dir: &Path, extra: &[&str]) -> Output {
    arbor(dir)
        .arg("prove")
        .arg(fixture("wp_goal.v"))
        .arg("wp_goal")
        .args(["--prover-path", "mock", "--audit-dir", "audit"])
        .arg("--backend")
        .arg(format!("replay:{}", fixture("wp_goal.completions").display()))
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn prove_then_replay_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = prove_wp_goal(dir.path(), &["--no-history"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("Proved"));
    let audit = dir.path().join("audit");
    let certs = files_with_suffix(&audit, ".v");
    assert_eq!(certs.len(), 1);
    assert_eq!(files_with_suffix(&audit, ".tree.json").len(), 1);
    assert_eq!(files_with_suffix(&audit, ".stats.json").len(), 1);
    assert_eq!(files_with_suffix(&audit, ".transcript.log").len(), 1);

    let cert = audit.join(&certs[0]);
    let replay = |cert: &Path| {
        arbor(dir.path())
            .arg("replay")
            .arg(fixture("wp_goal.v"))
            .arg("wp_goal")
            .arg(cert)
            .args(["--prover-path", "mock"])
            .output()
            .unwrap()
    };
    let ok = replay(&cert);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("Verified"));

    let text = std::fs::read_to_string(&cert).unwrap();
    let broken = dir.path().join("broken.v");
    let mut lines: Vec<&str> = text.lines().collect();
    let pos = lines.iter().position(|l| l.contains("lia")).unwrap();
    lines.remove(pos);
    std::fs::write(&broken, lines.join("\n")).unwrap();
    let bad = replay(&broken);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("RejectedAt"));

    let cheat = dir.path().join("cheat.v");
    std::fs::write(&cheat, "admit.\n").unwrap();
    assert_eq!(replay(&cheat).status.code(), Some(1));

    assert_eq!(replay(&dir.path().join("missing.v")).status.code(), Some(2));
}

#[test]
fn prove_all_writes_one_bundle_per_open_lemma() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let replies = dir.path().join("replies");
    std::fs::create_dir_all(&replies).unwrap();
    let mut source = String::from("Lemma done : True.\nProof. exact I. Qed.\n\n");
    for i in 0..2 {
        let g = generate(&mut rng, i);
        source.push_str(&g.source);
        source.push('\n');
        let script: Vec<String> = g.solution.iter().map(|(_, t)| t.clone()).collect();
        std::fs::write(
            replies.join(format!("{}.completions", g.lemma)),
            ScriptedBackend::render_fixture(&script),
        )
        .unwrap();
    }
    std::fs::write(dir.path().join("two.v"), &source).unwrap();
    let out = arbor(dir.path())
        .args(["prove", "two.v", "--all", "--prover-path", "mock", "--no-history"])
        .args(["--audit-dir", "audit", "--backend", "replay:replies"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let audit = dir.path().join("audit");
    assert_eq!(files_with_suffix(&audit, ".stats.json").len(), 2);
    assert_eq!(files_with_suffix(&audit, ".v").len(), 2);
}

#[test]
fn unknown_lemma_and_bad_flags_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = arbor(dir.path())
        .arg("prove")
        .arg(fixture("wp_goal.v"))
        .args(["nope", "--prover-path", "mock", "--no-history"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = prove_wp_goal(dir.path(), &["--no-history", "--err-threshold", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = prove_wp_goal(dir.path(), &["--no-history", "--backend", "carrier-pigeon"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(dir.path().join("bad.toml"), "no-such-key = 1\n").unwrap();
    let out = prove_wp_goal(dir.path(), &["--no-history", "--config", "bad.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_token_reports_backend_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let out = arbor(dir.path())
        .env_remove("ARBOR_TEST_ABSENT_TOKEN")
        .arg("prove")
        .arg(fixture("wp_goal.v"))
        .args(["wp_goal", "--prover-path", "mock", "--no-history", "--audit-dir", "audit"])
        .args(["--backend", "live", "--auth-token-env", "ARBOR_TEST_ABSENT_TOKEN"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let audit = dir.path().join("audit");
    let stats = files_with_suffix(&audit, ".stats.json");
    assert_eq!(stats.len(), 1);
    assert!(files_with_suffix(&audit, ".v").is_empty());
    let text = std::fs::read_to_string(audit.join(&stats[0])).unwrap();
    assert!(text.contains("BackendUnavailable"), "{text}");
}

#[test]
fn history_accumulates_and_can_be_managed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(prove_wp_goal(dir.path(), &[]).status.code(), Some(0));
    assert!(dir.path().join("history.json").exists());

    let list = arbor(dir.path()).args(["history", "list"]).output().unwrap();
    assert_eq!(list.status.code(), Some(0));
    assert!(stdout(&list).contains("wp_goal"));

    let show = arbor(dir.path()).args(["history", "show", "wp_goal"]).output().unwrap();
    assert_eq!(show.status.code(), Some(0));
    assert!(stdout(&show).contains("#0 destruct"), "{}", stdout(&show));

    let missing = arbor(dir.path()).args(["history", "show", "other"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let refused = arbor(dir.path()).args(["history", "clear"]).output().unwrap();
    assert_eq!(refused.status.code(), Some(2));
    let cleared = arbor(dir.path()).args(["history", "clear", "--yes"]).output().unwrap();
    assert_eq!(cleared.status.code(), Some(0));
    let list = arbor(dir.path()).args(["history", "list"]).output().unwrap();
    assert!(!stdout(&list).contains("wp_goal"));
}

#[test]
fn stats_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("wp_goal.v"), dir.path().join("wp_goal.v")).unwrap();
    std::fs::write(
        dir.path().join("m.json"),
        r#"{"entries":[{"source-file":"wp_goal.v","lemma-name":"wp_goal","category":"functional-correctness"}]}"#,
    )
    .unwrap();
    let run = || arbor(dir.path()).args(["stats", "m.json"]).output().unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    let report: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert!(report.to_string().contains("wp_goal"));
}

//! Replays a proof script on a fresh mock session, once intact and once
//! with a sentence removed.

use arbor::prover::{replay_script, ProverConfig};
use arbor::transcript::Transcript;

const SOURCE: &str = r#"Lemma two_cases (b : bool) : b = b.
(*@mock:two_cases {
  "goals": {"t": {"conclusion": "true = true"}, "f": {"conclusion": "false = false"}},
  "rules": [{"goal": "root", "tactic": "destruct b.", "yields": ["t", "f"]}]
} *)
Proof.
Admitted.
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ProverConfig::mock();
    let script: Vec<String> = ["destruct b.", "{", "reflexivity.", "}", "{", "reflexivity.", "}"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let v = replay_script(&config, SOURCE, "two_cases", &script, Transcript::new())?;
    println!("full script: {v:?}");
    let short = &script[..4];
    let v = replay_script(&config, SOURCE, "two_cases", short, Transcript::new())?;
    println!("truncated script: {v:?}");
    let cheat = vec!["admit.".to_string()];
    let v = replay_script(&config, SOURCE, "two_cases", &cheat, Transcript::new())?;
    println!("admit: {v:?}");
    Ok(())
}

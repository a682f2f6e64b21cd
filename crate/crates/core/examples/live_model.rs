//! Asks the configured chat-completion endpoint for one decision about the
//! `wp_goal` root goal. Needs `OPENAI_API_KEY`.

use arbor::context::ContextSet;
use arbor::gateway::{
    build_prompt, decide_next, GenerationConfig, LiveBackend, PromptInputs, PromptMode, RetryPolicy,
};
use arbor::prover::GoalState;
use arbor::transcript::Transcript;
use arbor::tree::ProofTree;
use std::time::Duration;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = GenerationConfig::default();
    if std::env::var(&config.auth_token_env_var).is_err() {
        println!("set {} to run this example", config.auth_token_env_var);
        return Ok(());
    }
    let tree = ProofTree::new(GoalState::new(vec![], "forall n : nat, n + 0 = n"));
    let mut context = ContextSet::new(50);
    let bundle = build_prompt(PromptInputs {
        mode: PromptMode::Analyze,
        lemma_statement: "add_zero : forall n : nat, n + 0 = n",
        tree: &tree,
        history: &[],
        context: &mut context,
        errors: &[],
        require_tactic: false,
        budget: 4000,
    })?;
    let mut backend = LiveBackend::new(Duration::from_secs(60))?;
    let transcript = Transcript::new();
    let (decision, raw) = decide_next(&bundle, &config, &mut backend, &RetryPolicy::default(), &transcript)?;
    println!("completion: {raw}\ndecision: {decision}");
    Ok(())
}

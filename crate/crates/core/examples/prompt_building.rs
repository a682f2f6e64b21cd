//! Builds the prompt in each of its three modes under a small budget.

use arbor::context::ContextSet;
use arbor::feedback::ErrorRecord;
use arbor::gateway::{build_prompt, PromptInputs, PromptMode};
use arbor::prover::GoalState;
use arbor::tree::{NodeId, ProofTree};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = ProofTree::new(GoalState::new(vec![], "Z.abs i1 = 10"));
    let errors: Vec<ErrorRecord> = ["nia.", "lia.", "nia; lia."]
        .iter()
        .enumerate()
        .map(|(i, t)| ErrorRecord::new(NodeId::root(), t, "Tactic failure: Cannot find witness.", i as u64))
        .collect();
    for (mode, errs) in [
        (PromptMode::Analyze, &errors[..0]),
        (PromptMode::FixError, &errors[2..]),
        (PromptMode::PersistentError, &errors[..]),
    ] {
        let mut context = ContextSet::new(50);
        let bundle = build_prompt(PromptInputs {
            mode,
            lemma_statement: "wp_goal : Z.abs i1 = 10",
            tree: &tree,
            history: &[],
            context: &mut context,
            errors: errs,
            require_tactic: false,
            budget: 2000,
        })?;
        println!("===== {mode:?} ({} chars)\n{}", bundle.rendered_len(), bundle.render());
    }
    Ok(())
}

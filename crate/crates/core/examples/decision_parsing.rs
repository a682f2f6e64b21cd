//! Turns raw model completions into decisions.

use arbor::gateway::parse_decision;

fn main() {
    let completions = [
        "lia.",
        "The goal is linear, so:\n```coq\nlia.\n```",
        "Search (Z.abs _ <= _).",
        "Next tactic: intros x Hx. simpl.",
        "admit.",
        "I am not sure how to continue.",
    ];
    for c in completions {
        println!("{:<48} -> {:?}", format!("{c:?}"), parse_decision(c));
    }
}

//! Feeds a series of failures to the feedback controller and prints the
//! directive chosen after each one.

use arbor::feedback::{ErrorRecord, FeedbackController, Thresholds};
use arbor::tree::NodeId;

fn main() {
    let thresholds = Thresholds::default();
    let mut controller = FeedbackController::new();
    let node = NodeId::root();
    let failures = [
        ("nia.", "Tactic failure: Cannot find witness."),
        ("lia.", "Tactic failure: Cannot find witness."),
        ("nia; lia.", "Tactic failure:  Cannot find witness."),
        ("apply foo.", "The reference foo was not found in the current environment."),
    ];
    for (step, (tactic, message)) in failures.iter().enumerate() {
        let record = ErrorRecord::new(node.clone(), tactic, message, step as u64);
        println!("{tactic:<12} -> {}", controller.on_failure(record, &thresholds));
    }
    controller.on_search_issued(&node);
    println!("streak after a query: {}", controller.streak_at(&node));
}

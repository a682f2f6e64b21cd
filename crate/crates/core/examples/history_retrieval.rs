//! Stores the steps of a proved theorem and retrieves the steps most
//! similar to a new goal.

use arbor::history::{HistoryDb, StepRecord};
use arbor::prover::GoalState;

fn step(theorem: &str, id: u64, tactic: &str, before: &str) -> StepRecord {
    StepRecord {
        theorem_name: theorem.into(),
        tactic_id: id,
        tactic: tactic.into(),
        goal_before: before.into(),
        goal_after: String::new(),
        hypotheses_before: vec![],
        hypotheses_added: vec![],
        hypotheses_removed: vec![],
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("proof_history.json");
    let mut db = HistoryDb::load(&path)?;
    db.record_proof(
        "abs_bound",
        vec![
            step("abs_bound", 0, "destruct (Z_lt_le_dec x 0).", "Z.abs x <= 5"),
            step("abs_bound", 1, "rewrite Z.abs_neq by lia; lia.", "Z.abs x <= 5"),
            step("abs_bound", 2, "rewrite Z.abs_eq by lia; lia.", "Z.abs x <= 5"),
        ],
    )?;
    db.record_proof("add_zero", vec![step("add_zero", 0, "lia.", "n + 0 = n")])?;

    let reloaded = HistoryDb::load(&path)?;
    let goal = GoalState::new(vec![], "Z.abs i1 = 10");
    for r in reloaded.top_k_similar(&goal, 2) {
        println!("{}", r.render());
    }
    Ok(())
}

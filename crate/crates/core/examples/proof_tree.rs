//! Builds a proof tree from prover replies, linearizes it and round-trips
//! it through its JSON form.

use arbor::prover::{GoalState, Hypothesis, ProverReply};
use arbor::tree::ProofTree;

fn goal(c: &str) -> GoalState {
    GoalState::new(
        vec![Hypothesis { names: vec!["n".into()], statement: "nat".into() }],
        c,
    )
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut tree = ProofTree::new(goal("n + 0 = n /\\ 0 + n = n"));
    let root = tree.focus().cloned().expect("root is open");
    tree.record_application(
        &root,
        "split.",
        &ProverReply::Advanced { open_goals: vec![goal("n + 0 = n"), goal("0 + n = n")] },
    )?;
    let left = tree.focus().cloned().expect("left is open");
    tree.record_application(
        &left,
        "lia.",
        &ProverReply::Advanced { open_goals: vec![goal("0 + n = n")] },
    )?;
    let right = tree.focus().cloned().expect("right is open");
    tree.record_application(&right, "reflexivity.", &ProverReply::Qed)?;

    println!("{}", tree.render(2000));
    println!("{}", tree.linearize()?.to_certificate());
    let json = tree.serialize();
    assert_eq!(ProofTree::deserialize(&json)?, tree);
    println!("{json}");
    Ok(())
}

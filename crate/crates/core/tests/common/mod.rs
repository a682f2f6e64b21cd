#![allow(dead_code)]

use arbor::agent::RunConfig;
use arbor::gateway::RetryPolicy;
use arbor::history::StepRecord;
use arbor::prover::mock::{Declaration, MockGoal, MockRule, MockTheory};
use arbor::prover::{GoalState, Hypothesis, ProverConfig, ProverReply};
use arbor::tree::ProofTree;
use rand::seq::SliceRandom;
use rand::Rng;
use std::path::{Path, PathBuf};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn mock_config() -> RunConfig {
    RunConfig {
        prover: ProverConfig::mock(),
        history_enabled: false,
        retry: RetryPolicy::none(),
        ..RunConfig::default()
    }
}

const FAIL_MESSAGES: &[&str] = &[
    "Tactic failure: Cannot find witness.",
    "Unable to unify \"S n\" with \"n\".",
    "No applicable tactic.",
    "In environment x : nat, the term \"H\" has type \"x = 0\" while it is expected to have type \"x > 0\".",
];
const WRONG_TACTICS: &[&str] = &["nia.", "intuition.", "congruence.", "tauto.", "apply helper_lemma."];
const LEAF_TACTICS: &[&str] = &["lia.", "auto.", "assumption.", "easy."];

/// A random lemma with a mock theory and one known proof.
#[derive(Debug, Clone)]
pub struct Generated {
    pub lemma: String,
    pub source: String,
    /// `(goal, tactic)` in depth-first order.
    pub solution: Vec<(String, String)>,
    /// Failing tactics per goal.
    pub wrong: Vec<(String, Vec<String>)>,
    /// Tactics that time out, per goal.
    pub diverging: Vec<(String, String)>,
    pub theory: MockTheory,
}

fn goal_for(name: &str) -> MockGoal {
    MockGoal {
        hypotheses: vec!["x y : nat".into(), format!("H{name} : Q{name} x <= y")],
        conclusion: format!("P{name} x y /\\ x <= y + {}", name.len()),
    }
}

fn build(
    rng: &mut impl Rng,
    name: &str,
    depth: usize,
    theory: &mut MockTheory,
    out: &mut Generated,
) {
    let mut g = goal_for(name);
    if name == "root" {
        g.conclusion = format!("Proot x y /\\ x <= y + {}", rng.gen_range(0..100));
    }
    theory.goals.insert(name.to_string(), g);
    let mut wrong = Vec::new();
    for _ in 0..rng.gen_range(0..3) {
        let t = WRONG_TACTICS.choose(rng).unwrap().to_string();
        if wrong.contains(&t) {
            continue;
        }
        let m = FAIL_MESSAGES.choose(rng).unwrap();
        theory.rules.push(MockRule::fails(name, &t, m));
        wrong.push(t);
    }
    if rng.gen_bool(0.15) {
        theory.rules.push(MockRule::diverges(name, "firstorder."));
        out.diverging.push((name.to_string(), "firstorder.".into()));
    }
    out.wrong.push((name.to_string(), wrong));
    let leaf = depth >= 3 || rng.gen_bool(0.45);
    if leaf {
        let t = LEAF_TACTICS.choose(rng).unwrap().to_string();
        theory.rules.push(MockRule::yields(name, &t, &[]));
        out.solution.push((name.to_string(), t));
        return;
    }
    let k = rng.gen_range(1..=3);
    let children: Vec<String> = (0..k).map(|i| format!("{name}_{i}")).collect();
    let t = match k {
        1 => format!("apply step_{}.", name.replace("root", "r")),
        _ => format!("destruct (case_{} x) as [{}].", name.replace("root", "r"), vec!["H"; k].join(" | ")),
    };
    let refs: Vec<&str> = children.iter().map(String::as_str).collect();
    theory.rules.push(MockRule::yields(name, &t, &refs));
    out.solution.push((name.to_string(), t));
    for c in &children {
        build(rng, c, depth + 1, theory, out);
    }
}

pub fn generate(rng: &mut impl Rng, index: usize) -> Generated {
    let lemma = format!("rand_{index}");
    let mut theory = MockTheory::default();
    let mut out = Generated {
        lemma: lemma.clone(),
        source: String::new(),
        solution: Vec::new(),
        wrong: Vec::new(),
        diverging: Vec::new(),
        theory: MockTheory::default(),
    };
    build(rng, "root", 0, &mut theory, &mut out);
    for i in 0..rng.gen_range(0..70) {
        theory.declarations.push(Declaration {
            name: format!("lem_{i}"),
            statement: format!("forall x y : nat, Proot x y -> Q{} x <= y + {i}", if i % 2 == 0 { "root" } else { "root_0" }),
        });
    }
    let root = &theory.goals["root"];
    out.source = format!(
        "Lemma {lemma} (x y : nat) : {}.\n{}\nProof.\nAdmitted.\n",
        root.conclusion,
        theory.to_directive(&lemma)
    );
    out.theory = theory;
    out
}

fn wrap(rng: &mut impl Rng, sentence: &str) -> String {
    match rng.gen_range(0..10) {
        0 => format!("```coq\n{sentence}\n```"),
        1 => format!("Next tactic: {sentence}"),
        2 => format!("{sentence} (* then continue *)"),
        _ => sentence.to_string(),
    }
}

fn random_query(rng: &mut impl Rng) -> String {
    match rng.gen_range(0..5) {
        0 => "Search Proot.".to_string(),
        1 => format!("Check lem_{}.", rng.gen_range(0..80)),
        2 => format!("Print lem_{}.", rng.gen_range(0..80)),
        3 => format!("About lem_{}.", rng.gen_range(0..80)),
        _ => "Search (_ <= _ + _).".to_string(),
    }
}

/// Completions that eventually replay `g.solution`, with failing tactics,
/// queries and formatting noise in between. Roughly one script in twenty
/// ends early or gives up.
pub fn noisy_script(rng: &mut impl Rng, g: &Generated) -> Vec<String> {
    let mut out = Vec::new();
    for (goal, tactic) in &g.solution {
        if rng.gen_bool(0.3) {
            for _ in 0..rng.gen_range(1..=3) {
                out.push(random_query(rng));
            }
        }
        let wrong = &g.wrong.iter().find(|(n, _)| n == goal).unwrap().1;
        if rng.gen_bool(0.4) {
            let n = rng.gen_range(1..=4);
            let repeat = rng.gen_bool(0.5);
            let first = wrong
                .choose(rng)
                .cloned()
                .unwrap_or_else(|| "idtac_missing.".to_string());
            for _ in 0..n {
                let t = if repeat {
                    first.clone()
                } else {
                    wrong.choose(rng).cloned().unwrap_or_else(|| "apply nothing_here.".into())
                };
                out.push(wrap(rng, &t));
            }
        }
        if let Some((_, t)) = g.diverging.iter().find(|(n, _)| n == goal) {
            if rng.gen_bool(0.5) {
                out.push(t.clone());
            }
        }
        if rng.gen_bool(0.01) {
            out.push("admit.".into());
        }
        out.push(wrap(rng, tactic));
    }
    if rng.gen_bool(0.03) {
        let cut = rng.gen_range(0..out.len());
        out.truncate(cut);
    }
    out
}

fn random_text(rng: &mut impl Rng, max: usize) -> String {
    const ALPHABET: &[&str] = &[
        "x", "y", "H", "0", " ", "+", "<=", "->", "/\\", "\"", "\\", "\n", "λ", "∀", "_", "'", "{", "}", ".", "%Z",
    ];
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
}

fn random_goal(rng: &mut impl Rng) -> GoalState {
    let hyps = (0..rng.gen_range(0..4))
        .map(|i| Hypothesis {
            names: vec![format!("H{i}")],
            statement: random_text(rng, 12),
        })
        .collect();
    GoalState::new(hyps, random_text(rng, 20))
}

/// A random (possibly partial) tree built through `record_application`.
pub fn random_tree(rng: &mut impl Rng) -> ProofTree {
    let root = random_goal(rng);
    let mut tree = ProofTree::new(root.clone());
    let mut open = vec![root];
    for step in 0..rng.gen_range(0..25) {
        let Some(focus) = tree.focus().cloned() else { break };
        let k = if open.len() > 6 { 0 } else { rng.gen_range(0..=3) };
        let mut goals: Vec<GoalState> = (0..k).map(|_| random_goal(rng)).collect();
        goals.extend(open.iter().skip(1).cloned());
        let reply = if goals.is_empty() {
            ProverReply::Qed
        } else {
            ProverReply::Advanced { open_goals: goals.clone() }
        };
        let tactic = format!("t{step} {}.", random_text(rng, 6).replace('.', ""));
        tree.record_application(&focus, &tactic, &reply).unwrap();
        open = goals;
    }
    tree
}

pub fn random_steps(rng: &mut impl Rng, theorem: &str) -> Vec<StepRecord> {
    (0..rng.gen_range(1..6))
        .map(|i| StepRecord {
            theorem_name: theorem.to_string(),
            tactic_id: i as u64,
            tactic: format!("{}.", random_text(rng, 8)),
            goal_before: random_text(rng, 30),
            goal_after: random_text(rng, 30),
            hypotheses_before: (0..rng.gen_range(0..3)).map(|_| random_text(rng, 10)).collect(),
            hypotheses_added: (0..rng.gen_range(0..3)).map(|_| random_text(rng, 10)).collect(),
            hypotheses_removed: (0..rng.gen_range(0..2)).map(|_| random_text(rng, 10)).collect(),
        })
        .collect()
}

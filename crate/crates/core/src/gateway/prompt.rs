use crate::context::ContextSet;
use crate::feedback::ErrorRecord;
use crate::history::StepRecord;
use crate::tree::{midline_truncate, ProofTree};
use serde::{Deserialize, Serialize};

pub const DEFAULT_PROMPT_BUDGET: usize = 12_000;
pub const MAX_HISTORY_SNIPPETS: usize = 5;
pub const MAX_CONTEXT_ITEMS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptMode {
    Analyze,
    FixError,
    PersistentError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ErrorFeedback {
    pub failed_tactic: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub lemma_statement: String,
    pub tree_rendering: String,
    pub history_snippets: Vec<String>,
    pub context_items: Vec<String>,
    pub error_feedback: Vec<ErrorFeedback>,
    pub recent_failed_tactics: Vec<String>,
    /// Set after too many consecutive queries.
    pub require_tactic: bool,
    pub budget: usize,
}

const PREAMBLE: &str = "You are an expert user of the Rocq (Coq) proof assistant, proving the lemma below one tactic at a time.";

const OUTPUT_FORMAT: &str = "Reply with exactly one sentence: either a single tactic ending in '.', or one query command of the form `Search <pattern>.`, `Print <identifier>.`, `Locate <identifier>.`, `About <identifier>.` or `Check <term>.`. Never use admit, Admitted, Abort or Axiom.";

const DEMAND_TACTIC: &str =
    "You have issued several queries in a row. Output a tactic now, not a query.";

impl PromptBundle {
    fn instructions(&self) -> String {
        let mut s = String::new();
        match self.mode {
            PromptMode::Analyze => s.push_str(
                "Analyze the current proof tree and the top-5 historical tactics above. If sufficient information is available, generate a tactic to proceed. Otherwise, output a query command to retrieve additional context.",
            ),
            PromptMode::FixError => {
                for e in &self.error_feedback {
                    s.push_str(&format!(
                        "The previous tactic `{}` failed to apply to the current subgoal with the following error message from Rocq: {}\n",
                        e.failed_tactic, e.message
                    ));
                }
                s.push_str("Analyze the error and generate a corrected tactic.");
            }
            PromptMode::PersistentError => {
                s.push_str(
                    "The agent has repeatedly generated the following failed tactics for the current subgoal multiple times:\n",
                );
                for t in &self.recent_failed_tactics {
                    s.push_str(&format!("- {t}\n"));
                }
                for e in self.error_feedback.iter().take(1) {
                    s.push_str(&format!("Each attempt failed with: {}\n", e.message));
                }
                s.push_str(
                    "Analyze the current proof tree and determine what additional context is needed to proceed. Output a query command to retrieve the necessary context information.",
                );
            }
        }
        if self.require_tactic {
            s.push('\n');
            s.push_str(DEMAND_TACTIC);
        }
        s.push('\n');
        s.push_str(OUTPUT_FORMAT);
        s
    }

    fn list(items: &[String]) -> String {
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items
                .iter()
                .map(|i| format!("- {i}"))
                .collect::<Vec<_>>()
                .join("\n")
        }
    }

    fn compose(&self) -> String {
        format!(
            "{PREAMBLE}\n\n## Lemma\n{}\n\n## Proof tree\n{}\n\n## Top-5 historical tactics\n{}\n\n## Retrieved context\n{}\n\n## Task\n{}",
            self.lemma_statement,
            self.tree_rendering,
            Self::list(&self.history_snippets),
            Self::list(&self.context_items),
            self.instructions()
        )
    }

    fn composed_len(&self) -> usize {
        clen(&self.compose())
    }

    /// The text sent to the model, never longer than `budget` characters.
    pub fn render(&self) -> String {
        let full = self.compose();
        if clen(&full) > self.budget {
            midline_truncate(&full, self.budget)
        } else {
            full
        }
    }

    pub fn rendered_len(&self) -> usize {
        self.render().chars().count()
    }
}

/// Everything the prompt is built from.
pub struct PromptInputs<'a> {
    pub mode: PromptMode,
    pub lemma_statement: &'a str,
    pub tree: &'a ProofTree,
    pub history: &'a [&'a StepRecord],
    pub context: &'a mut ContextSet,
    pub errors: &'a [ErrorRecord],
    pub require_tactic: bool,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("lemma statement ({len} chars) exceeds the prompt budget of {budget}")]
pub struct BudgetExceeded {
    pub len: usize,
    pub budget: usize,
}

fn clen(s: &str) -> usize {
    s.chars().count()
}

/// Builds a bundle whose rendering fits in `inputs.budget` characters.
/// The budget is split 40/30/20/10 between tree, context, history and
/// instructions; space a section does not use is not redistributed.
pub fn build_prompt(inputs: PromptInputs<'_>) -> Result<PromptBundle, BudgetExceeded> {
    let budget = inputs.budget;
    let lemma_len = clen(inputs.lemma_statement);
    if lemma_len > budget {
        return Err(BudgetExceeded {
            len: lemma_len,
            budget,
        });
    }
    let instr_share = budget / 10;
    let mut error_feedback: Vec<ErrorFeedback> = match inputs.mode {
        PromptMode::Analyze => Vec::new(),
        PromptMode::FixError => inputs.errors.iter().rev().take(1).map(|e| ErrorFeedback {
            failed_tactic: e.tactic.clone(),
            message: e.message.clone(),
        }).collect(),
        PromptMode::PersistentError => inputs.errors.iter().rev().take(1).map(|e| ErrorFeedback {
            failed_tactic: e.tactic.clone(),
            message: e.message.clone(),
        }).collect(),
    };
    let mut recent_failed_tactics: Vec<String> = match inputs.mode {
        PromptMode::PersistentError => inputs.errors.iter().map(|e| e.tactic.clone()).collect(),
        _ => Vec::new(),
    };
    let mut bundle = PromptBundle {
        mode: inputs.mode,
        lemma_statement: inputs.lemma_statement.to_string(),
        tree_rendering: String::new(),
        history_snippets: Vec::new(),
        context_items: Vec::new(),
        error_feedback: Vec::new(),
        recent_failed_tactics: Vec::new(),
        require_tactic: inputs.require_tactic,
        budget,
    };
    // fit error feedback into the instruction share
    let base_instr = clen(&bundle.instructions());
    let variable = instr_share.saturating_sub(base_instr).max(64);
    let parts = error_feedback.len() * 2 + recent_failed_tactics.len();
    if let Some(each) = variable.checked_div(parts) {
        let each = each.max(16);
        for e in &mut error_feedback {
            e.failed_tactic = midline_truncate(&e.failed_tactic, each);
            e.message = midline_truncate(&e.message, each);
        }
        for t in &mut recent_failed_tactics {
            *t = midline_truncate(t, each);
        }
    }
    bundle.error_feedback = error_feedback;
    bundle.recent_failed_tactics = recent_failed_tactics;

    let fixed = bundle.composed_len();
    let avail = budget.saturating_sub(fixed);
    let tree_share = (budget * 4 / 10).min(avail * 4 / 9);
    let ctx_share = (budget * 3 / 10).min(avail * 3 / 9);
    let hist_share = (budget * 2 / 10).min(avail * 2 / 9);

    // tree: focused goal in full (when it fits), then the outline
    let focus = inputs
        .tree
        .focused_node()
        .map(|n| n.goal.render())
        .unwrap_or_default();
    let focus_block = format!("Focused goal:\n{focus}\n\nOutline:\n");
    let focus_block = if clen(&focus_block) > tree_share / 2 {
        midline_truncate(&focus_block, tree_share / 2)
    } else {
        focus_block
    };
    let outline_budget = tree_share.saturating_sub(clen(&focus_block));
    bundle.tree_rendering = if outline_budget > 0 {
        format!("{focus_block}{}", inputs.tree.render(outline_budget))
    } else {
        focus_block
    };

    let goal = inputs
        .tree
        .focused_node()
        .map(|n| n.goal.clone())
        .unwrap_or_else(|| inputs.tree.root().goal.clone());
    let mut items = inputs.context.select_for_prompt(&goal, ctx_share);
    items.truncate(MAX_CONTEXT_ITEMS);
    bundle.context_items = items.iter().map(|i| i.render()).collect();
    // `- ` prefix per rendered line
    while bundle.context_items.iter().map(|i| clen(i) + 3).sum::<usize>() > ctx_share {
        bundle.context_items.pop();
    }

    let mut used = 0;
    for r in inputs.history.iter().take(MAX_HISTORY_SNIPPETS) {
        let s = r.render();
        if used + clen(&s) + 3 > hist_share {
            break;
        }
        used += clen(&s) + 3;
        bundle.history_snippets.push(s);
    }

    // fixed template text can still push a small budget over; shrink what
    // can be shrunk, and `render` truncates whatever remains
    while bundle.composed_len() > budget {
        if bundle.context_items.pop().is_some() || bundle.history_snippets.pop().is_some() {
            continue;
        }
        let over = bundle.composed_len() - budget;
        let len = clen(&bundle.tree_rendering);
        if len > 0 {
            bundle.tree_rendering = midline_truncate(&bundle.tree_rendering, len.saturating_sub(over));
            if clen(&bundle.tree_rendering) >= len {
                bundle.tree_rendering.clear();
            }
            continue;
        }
        if bundle.error_feedback.iter().any(|e| clen(&e.message) > 8) {
            for e in &mut bundle.error_feedback {
                e.message = midline_truncate(&e.message, 8);
            }
            continue;
        }
        break;
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextSet;
    use crate::feedback::ErrorRecord;
    use crate::prover::{GoalState, Hypothesis, QueryEntry, QueryKind, QueryResult};
    use crate::tree::NodeId;
    use proptest::prelude::*;

    fn wp_tree() -> ProofTree {
        ProofTree::new(GoalState::new(
            vec![Hypothesis::parse("x : Z").unwrap()],
            "Z.abs (Z.quot x 10) <= Z.abs x",
        ))
    }

    fn inputs<'a>(
        mode: PromptMode,
        tree: &'a ProofTree,
        ctx: &'a mut ContextSet,
        errors: &'a [ErrorRecord],
        budget: usize,
    ) -> PromptInputs<'a> {
        PromptInputs {
            mode,
            lemma_statement: "forall x : Z, Z.abs (Z.quot x 10) <= Z.abs x",
            tree,
            history: &[],
            context: ctx,
            errors,
            require_tactic: false,
            budget,
        }
    }

    #[test]
    fn analyze_mentions_goal_and_choice() {
        let tree = wp_tree();
        let mut ctx = ContextSet::default();
        let b = build_prompt(inputs(PromptMode::Analyze, &tree, &mut ctx, &[], DEFAULT_PROMPT_BUDGET)).unwrap();
        let r = b.render();
        assert!(r.contains("Z.abs (Z.quot x 10) <= Z.abs x"));
        assert!(r.contains("generate a tactic"));
        assert!(r.contains("query command"));
        assert!(r.chars().count() <= DEFAULT_PROMPT_BUDGET);
    }

    #[test]
    fn fix_error_quotes_message() {
        let tree = wp_tree();
        let mut ctx = ContextSet::default();
        let msg = "The reference Z.quot_le was not found in the current environment.";
        let errs = [ErrorRecord::new(NodeId::root(), "apply Z.quot_le.", msg, 1)];
        let b = build_prompt(inputs(PromptMode::FixError, &tree, &mut ctx, &errs, DEFAULT_PROMPT_BUDGET)).unwrap();
        assert!(b.render().contains(msg));
        assert!(b.render().contains("failed to apply to the current subgoal"));
        assert_eq!(b.error_feedback.len(), 1);
    }

    #[test]
    fn persistent_error_lists_tactics() {
        let tree = wp_tree();
        let mut ctx = ContextSet::default();
        let errs: Vec<_> = ["lia.", "nia.", "omega."]
            .iter()
            .enumerate()
            .map(|(i, t)| ErrorRecord::new(NodeId::root(), t, "Tactic failure.", i as u64))
            .collect();
        let b = build_prompt(inputs(PromptMode::PersistentError, &tree, &mut ctx, &errs, DEFAULT_PROMPT_BUDGET)).unwrap();
        assert_eq!(b.recent_failed_tactics, ["lia.", "nia.", "omega."]);
        let r = b.render();
        assert!(r.contains("repeatedly generated"));
        for t in ["- lia.", "- nia.", "- omega."] {
            assert!(r.contains(t));
        }
    }

    #[test]
    fn oversized_lemma_is_rejected() {
        let tree = wp_tree();
        let mut ctx = ContextSet::default();
        let err = build_prompt(inputs(PromptMode::Analyze, &tree, &mut ctx, &[], 10)).unwrap_err();
        assert_eq!(err.budget, 10);
    }

    #[test]
    fn require_tactic_line() {
        let tree = wp_tree();
        let mut ctx = ContextSet::default();
        let mut i = inputs(PromptMode::Analyze, &tree, &mut ctx, &[], DEFAULT_PROMPT_BUDGET);
        i.require_tactic = true;
        assert!(build_prompt(i).unwrap().render().contains("Output a tactic now"));
    }

    proptest! {
        #[test]
        fn rendering_fits_budget(
            budget in 50usize..4000,
            n_ctx in 0usize..80,
            n_err in 1usize..6,
            long in 0usize..600,
            mode in 0u8..3,
        ) {
            let tree = wp_tree();
            let mut ctx = ContextSet::new(60);
            let entries: Vec<QueryEntry> = (0..n_ctx)
                .map(|i| QueryEntry {
                    name: format!("Z.lemma_{i}"),
                    statement: format!("forall x, Z.abs x <= {}", "y + ".repeat(i % 40)),
                })
                .collect();
            ctx.ingest_query_result(QueryKind::Search, "Z.abs", &QueryResult { entries, raw: String::new() }, 1);
            let errs: Vec<_> = (0..n_err)
                .map(|i| ErrorRecord::new(NodeId::root(), &format!("tac{i} {}.", "x".repeat(long)), &"e".repeat(long), i as u64))
                .collect();
            let mode = [PromptMode::Analyze, PromptMode::FixError, PromptMode::PersistentError][mode as usize];
            let i = inputs(mode, &tree, &mut ctx, &errs, budget);
            let b = build_prompt(i).unwrap();
            prop_assert!(b.rendered_len() <= budget, "{} > {}", b.rendered_len(), budget);
            prop_assert!(b.history_snippets.len() <= MAX_HISTORY_SNIPPETS);
            prop_assert!(b.context_items.len() <= MAX_CONTEXT_ITEMS);
        }
    }
}

//! Prover-error handling: classification, "same error" normalization, and
//! the per-node state machine deciding between refining a tactic, searching
//! for more context, or aborting the run.

use crate::tree::NodeId;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::LazyLock;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorClass {
    UnknownReference,
    TypeMismatch,
    TacticFailure,
    SyntaxError,
    Timeout,
    Other,
}

const RULES: &[(ErrorClass, &[&str])] = &[
    (
        ErrorClass::UnknownReference,
        &[
            "was not found in the current environment",
            "not a defined object",
            "unknown reference",
            "no object of basename",
            "unbound",
        ],
    ),
    (ErrorClass::SyntaxError, &["syntax error", "lexer error", "unexpected token"]),
    (ErrorClass::Timeout, &["timeout", "timed out"]),
    (
        ErrorClass::TypeMismatch,
        &[
            "while it is expected to have type",
            "unable to unify",
            "cannot unify",
            "type mismatch",
            "illegal application",
            "the term",
        ],
    ),
    (
        ErrorClass::TacticFailure,
        &[
            "tactic failure",
            "cannot find witness",
            "no applicable tactic",
            "no such goal",
            "no matching clauses",
            "not an inductive",
            "no progress",
            "failed",
        ],
    ),
];

/// Keyword classification of a prover error message; `Other` when no rule
/// matches.
pub fn classify_error(message: &str) -> ErrorClass {
    let lower = message.to_lowercase();
    RULES
        .iter()
        .find(|(_, keys)| keys.iter().any(|k| lower.contains(k)))
        .map(|(c, _)| *c)
        .unwrap_or(ErrorClass::Other)
}

static LOCATIONS: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r#"file "[^"]*",?"#,
        r"toplevel input,?",
        r"\bline \d+(\s*-\s*\d+)?,?",
        r"\bcharacters? \d+(\s*-\s*\d+)?:?",
        r"\bcol(umn)? \d+,?",
        r":\d+:\d+(-\d+(:\d+)?)?",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("static regex"))
    .collect()
});

static LONG_QUOTED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#""[^"]{31,}"|`[^`]{31,}`|'[^'\s]{31,}'"#).expect("static regex")
});

/// Lowercases, strips locations and long quoted identifiers, collapses
/// whitespace. Two failures are "the same" when this is equal.
pub fn normalize_message(message: &str) -> String {
    let mut s = message.to_lowercase();
    for re in LOCATIONS.iter() {
        s = re.replace_all(&s, " ").into_owned();
    }
    s = LONG_QUOTED.replace_all(&s, "\"_\"").into_owned();
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ErrorRecord {
    #[serde(with = "node_id_string")]
    pub node: NodeId,
    pub tactic: String,
    pub message: String,
    pub normalized_message: String,
    pub attempt_index: usize,
    pub step: u64,
}

mod node_id_string {
    use crate::tree::NodeId;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(id: &NodeId, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(id)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NodeId, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

impl ErrorRecord {
    pub fn new(node: NodeId, tactic: &str, message: &str, step: u64) -> Self {
        Self {
            node,
            tactic: tactic.to_string(),
            message: message.to_string(),
            normalized_message: normalize_message(message),
            attempt_index: 0,
            step,
        }
    }

    pub fn class(&self) -> ErrorClass {
        classify_error(&self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Thresholds {
    pub same_error_before_search: usize,
    pub max_attempts_per_node: usize,
    pub max_total_steps: usize,
    pub wall_clock_budget: Duration,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            same_error_before_search: 3,
            max_attempts_per_node: 25,
            max_total_steps: 150,
            wall_clock_budget: Duration::from_secs(600),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<(), String> {
        if self.same_error_before_search == 0
            || self.max_attempts_per_node == 0
            || self.max_total_steps == 0
            || self.wall_clock_budget.is_zero()
        {
            return Err("all thresholds must be positive".into());
        }
        if self.same_error_before_search > self.max_attempts_per_node {
            return Err(format!(
                "same-error threshold {} exceeds per-node attempt cap {}",
                self.same_error_before_search, self.max_attempts_per_node
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    StepBudget,
    TimeBudget,
    NodeAttemptCap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Refine { error: ErrorRecord },
    SearchContext { recent_failures: Vec<ErrorRecord> },
    Abort { reason: AbortReason },
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Directive::Refine { error } => write!(
                f,
                "refine at {} after `{}` ({:?}, attempt {})",
                error.node,
                error.tactic,
                error.class(),
                error.attempt_index
            ),
            Directive::SearchContext { recent_failures } => write!(
                f,
                "search context after {} identical failures: {}",
                recent_failures.len(),
                recent_failures
                    .last()
                    .map(|e| e.normalized_message.as_str())
                    .unwrap_or("")
            ),
            Directive::Abort { reason } => write!(f, "abort: {reason:?}"),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct NodeWindow {
    attempts: usize,
    streak: Vec<ErrorRecord>,
}

/// Per-run feedback state. Once it aborts, it keeps aborting.
#[derive(Debug, Default, Clone)]
pub struct FeedbackController {
    windows: HashMap<NodeId, NodeWindow>,
    aborted: Option<AbortReason>,
}

impl FeedbackController {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn aborted(&self) -> Option<AbortReason> {
        self.aborted
    }

    /// Failed attempts so far at `node`.
    pub fn attempts_at(&self, node: &NodeId) -> usize {
        self.windows.get(node).map_or(0, |w| w.attempts)
    }

    /// Length of the current identical-error streak at `node`.
    pub fn streak_at(&self, node: &NodeId) -> usize {
        self.windows.get(node).map_or(0, |w| w.streak.len())
    }

    pub fn on_failure(&mut self, mut record: ErrorRecord, thresholds: &Thresholds) -> Directive {
        if let Some(reason) = self.aborted {
            return Directive::Abort { reason };
        }
        let w = self.windows.entry(record.node.clone()).or_default();
        w.attempts += 1;
        record.attempt_index = w.attempts;
        let same = w
            .streak
            .last()
            .is_some_and(|last| last.normalized_message == record.normalized_message);
        if !same {
            w.streak.clear();
        }
        w.streak.push(record.clone());
        if w.attempts >= thresholds.max_attempts_per_node {
            self.aborted = Some(AbortReason::NodeAttemptCap);
            return Directive::Abort {
                reason: AbortReason::NodeAttemptCap,
            };
        }
        if w.streak.len() >= thresholds.same_error_before_search {
            return Directive::SearchContext {
                recent_failures: w.streak.clone(),
            };
        }
        Directive::Refine { error: record }
    }

    /// A query was issued for `node`: the identical-error streak restarts.
    pub fn on_search_issued(&mut self, node: &NodeId) {
        if let Some(w) = self.windows.get_mut(node) {
            w.streak.clear();
        }
    }

    /// A tactic succeeded at `node`.
    pub fn on_success(&mut self, node: &NodeId) {
        if let Some(w) = self.windows.get_mut(node) {
            w.streak.clear();
        }
    }

    pub fn check_budgets(
        &mut self,
        steps: usize,
        elapsed: Duration,
        thresholds: &Thresholds,
    ) -> Option<Directive> {
        if let Some(reason) = self.aborted {
            return Some(Directive::Abort { reason });
        }
        let reason = if steps >= thresholds.max_total_steps {
            AbortReason::StepBudget
        } else if elapsed > thresholds.wall_clock_budget {
            AbortReason::TimeBudget
        } else {
            return None;
        };
        self.aborted = Some(reason);
        Some(Directive::Abort { reason })
    }
}

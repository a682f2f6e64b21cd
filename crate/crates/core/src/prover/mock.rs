//! Deterministic in-memory prover.
//!
//! Behaviour is driven by a [`MockTheory`]: named goals, rules mapping
//! `(goal, tactic)` to subgoals, errors or timeouts, and declarations
//! answering queries. A theory is attached to a lemma inside its source
//! file with a comment of the form
//!
//! ```text
//! (*@mock:lemma_name { "goals": {...}, "rules": [...], "declarations": [...] } *)
//! ```
//!
//! The lemma's own statement is the goal named `root` unless the theory
//! overrides it. Braces `{` / `}` focus and unfocus like the real prover.

use super::{
    Engine, EngineError, ExecOutcome, Hypothesis, LemmaSource, ProverConfig, ProverError,
    RawGoal,
};
use crate::source::{collapse_whitespace, is_structure_marker, parse_lemma_sentence, SourceFile};
use crate::tokens;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const ROOT_GOAL: &str = "root";
const DIRECTIVE_PREFIX: &str = "@mock:";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockGoal {
    /// `names : statement` lines.
    #[serde(default)]
    pub hypotheses: Vec<String>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    pub goal: String,
    pub tactic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yields: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timeout: bool,
}

impl MockRule {
    pub fn yields(goal: &str, tactic: &str, subgoals: &[&str]) -> Self {
        Self {
            goal: goal.into(),
            tactic: tactic.into(),
            yields: Some(subgoals.iter().map(|s| s.to_string()).collect()),
            error: None,
            timeout: false,
        }
    }

    pub fn fails(goal: &str, tactic: &str, message: &str) -> Self {
        Self {
            goal: goal.into(),
            tactic: tactic.into(),
            yields: None,
            error: Some(message.into()),
            timeout: false,
        }
    }

    pub fn diverges(goal: &str, tactic: &str) -> Self {
        Self {
            goal: goal.into(),
            tactic: tactic.into(),
            yields: None,
            error: None,
            timeout: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Declaration {
    pub name: String,
    pub statement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockTheory {
    #[serde(default)]
    pub goals: BTreeMap<String, MockGoal>,
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub declarations: Vec<Declaration>,
}

impl MockTheory {
    /// Renders the theory as a source comment for `lemma`.
    pub fn to_directive(&self, lemma: &str) -> String {
        let json = serde_json::to_string_pretty(self).expect("theory serializes");
        format!("(*{DIRECTIVE_PREFIX}{lemma}\n{json}\n*)")
    }

    fn validate(&self) -> Result<(), String> {
        for r in &self.rules {
            let outcomes = r.yields.is_some() as u8 + r.error.is_some() as u8 + r.timeout as u8;
            if outcomes != 1 {
                return Err(format!(
                    "rule for `{}` on `{}` needs exactly one of yields/error/timeout",
                    r.tactic, r.goal
                ));
            }
            if r.goal != ROOT_GOAL && !self.goals.contains_key(&r.goal) {
                return Err(format!("rule refers to unknown goal `{}`", r.goal));
            }
            for y in r.yields.iter().flatten() {
                if y != ROOT_GOAL && !self.goals.contains_key(y) {
                    return Err(format!("rule yields unknown goal `{y}`"));
                }
            }
        }
        for (name, g) in &self.goals {
            for h in &g.hypotheses {
                if Hypothesis::parse(h).is_none() {
                    return Err(format!("goal `{name}`: malformed hypothesis `{h}`"));
                }
            }
        }
        Ok(())
    }
}

/// Finds the theory directive for `lemma` among the source's comments.
pub fn theory_for(file: &SourceFile, lemma: &str) -> Result<MockTheory, ProverError> {
    for c in &file.split.comments {
        let Some(rest) = c.trim_start().strip_prefix(DIRECTIVE_PREFIX) else {
            continue;
        };
        let name_end = rest
            .find(|c: char| c.is_whitespace() || c == '{')
            .unwrap_or(rest.len());
        if &rest[..name_end] != lemma {
            continue;
        }
        let theory: MockTheory = serde_json::from_str(rest[name_end..].trim()).map_err(|e| {
            ProverError::CompilationFailure(format!("malformed mock directive: {e}"))
        })?;
        theory.validate().map_err(ProverError::CompilationFailure)?;
        return Ok(theory);
    }
    Ok(MockTheory::default())
}

const KNOWN_VERNACULAR: &[&str] = &[
    "Require", "Import", "Export", "From", "Open", "Close", "Scope", "Local", "Global", "Set",
    "Unset", "Definition", "Fixpoint", "Inductive", "Record", "Notation", "Infix", "Ltac",
    "Hint", "Parameter", "Variable", "Variables", "Hypothesis", "Axiom", "Section", "End",
    "Module", "Arguments", "Proof", "Qed", "Defined", "Admitted", "Abort", "Lemma", "Theorem",
    "Fact", "Remark", "Corollary", "Proposition", "Example", "Check", "Print", "Search",
    "Locate", "About", "Declare", "Delimit", "Let", "Coercion", "Instance", "Class",
];

fn balanced(s: &str) -> bool {
    let mut stack = Vec::new();
    for c in s.chars() {
        match c {
            '(' | '[' | '{' => stack.push(c),
            ')' | ']' | '}' => {
                let open = match c {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                if stack.pop() != Some(open) {
                    return false;
                }
            }
            _ => {}
        }
    }
    stack.is_empty()
}

/// Syntax check the mock applies to the source up to the target lemma (the
/// whole file when the lemma is absent).
pub fn check_syntax(file: &SourceFile, lemma: &str) -> Result<(), ProverError> {
    let upto = file
        .lemma(lemma)
        .map(|l| l.index + 1)
        .unwrap_or(file.split.sentences.len());
    let mut in_proof = false;
    for (i, s) in file.split.sentences[..upto].iter().enumerate() {
        let err = |what: &str| {
            Err(ProverError::CompilationFailure(format!(
                "Syntax error in sentence {} ({what}): {s}",
                i + 1
            )))
        };
        if is_structure_marker(s) {
            continue;
        }
        if !balanced(s) {
            return err("unbalanced brackets");
        }
        let lead = s
            .split(|c: char| c.is_whitespace() || c == ':' || c == '.')
            .next()
            .unwrap_or("");
        if ["Lemma", "Theorem", "Fact", "Remark", "Corollary", "Proposition", "Example"]
            .contains(&lead)
        {
            match parse_lemma_sentence(s) {
                Some((_, _, stmt)) if !stmt.is_empty() => in_proof = true,
                _ => return err("malformed statement"),
            }
            continue;
        }
        if ["Qed", "Defined", "Admitted", "Abort"].contains(&lead) {
            in_proof = false;
            continue;
        }
        if !in_proof && !KNOWN_VERNACULAR.contains(&lead) {
            return err("unknown command");
        }
    }
    if file.split.remainder.is_some() && file.lemma(lemma).is_none() {
        return Err(ProverError::CompilationFailure(
            "Syntax error: unterminated sentence at end of file".into(),
        ));
    }
    Ok(())
}

fn normalize_tactic(t: &str) -> String {
    collapse_whitespace(t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct State {
    /// Focus frames; the last frame is the innermost. Each holds goal labels.
    frames: Vec<Vec<String>>,
}

impl State {
    fn flat(&self) -> Vec<String> {
        self.frames.iter().rev().flatten().cloned().collect()
    }
}

pub struct MockEngine {
    theory: MockTheory,
    goals: BTreeMap<String, RawGoal>,
    state: State,
    history: Vec<State>,
    closed: bool,
}

const CLOSING_TRUE: &[&str] = &["exact I.", "trivial.", "auto.", "constructor.", "easy."];
const CLOSING_REFL: &[&str] = &["reflexivity.", "trivial.", "auto.", "easy."];
const REFERENCE_TACTICS: &[&str] = &[
    "apply", "eapply", "exact", "rewrite", "erewrite", "unfold", "specialize", "pose",
];

impl MockEngine {
    pub fn start(_config: &ProverConfig, source: &LemmaSource) -> Result<Self, ProverError> {
        let lemma = source
            .file
            .lemma(&source.name)
            .ok_or_else(|| ProverError::LemmaNotFound(source.name.clone()))?;
        let theory = theory_for(&source.file, &source.name)?;
        let to_raw = |g: &MockGoal| RawGoal {
            hypotheses: g
                .hypotheses
                .iter()
                .filter_map(|h| Hypothesis::parse(h))
                .collect(),
            conclusion: collapse_whitespace(&g.conclusion),
        };
        let mut goals: BTreeMap<String, RawGoal> =
            theory.goals.iter().map(|(k, g)| (k.clone(), to_raw(g))).collect();
        goals.entry(ROOT_GOAL.to_string()).or_insert_with(|| RawGoal {
            hypotheses: Vec::new(),
            conclusion: collapse_whitespace(&lemma.goal_text()),
        });
        Ok(Self {
            theory,
            goals,
            state: State {
                frames: vec![vec![ROOT_GOAL.to_string()]],
            },
            history: Vec::new(),
            closed: false,
        })
    }

    fn raw_goals(&self) -> Vec<RawGoal> {
        self.state
            .flat()
            .iter()
            .map(|l| self.goals[l].clone())
            .collect()
    }

    fn render(&self) -> String {
        let goals = self.raw_goals();
        if goals.is_empty() {
            return "No more goals.".into();
        }
        let mut s = format!("{} goal{}\n", goals.len(), if goals.len() == 1 { "" } else { "s" });
        for (i, g) in goals.iter().enumerate() {
            if i == 0 {
                for h in &g.hypotheses {
                    s.push_str(&format!("  {}\n", h.render()));
                }
                s.push_str("  ============================\n");
                s.push_str(&format!("  {}\n", g.conclusion));
            } else {
                s.push_str(&format!("\ngoal {} is:\n {}\n", i + 1, g.conclusion));
            }
        }
        s
    }

    fn failed(message: String) -> ExecOutcome {
        ExecOutcome::Failed {
            raw: format!("Error: {message}"),
            message,
        }
    }

    fn known_reference(&self, goal: &RawGoal, name: &str) -> bool {
        goal.hypotheses.iter().any(|h| h.names.iter().any(|n| n == name))
            || self.theory.declarations.iter().any(|d| d.name == name)
            || tokens::identifier_set(&goal.conclusion).contains(name)
    }

    fn default_failure(&self, goal: &RawGoal, tactic: &str) -> String {
        let body = tactic.trim_end_matches('.');
        let mut words = body.split_whitespace();
        if let Some(first) = words.next() {
            if REFERENCE_TACTICS.contains(&first) {
                let target = words.find(|w| *w != "proof" && *w != "(");
                if let Some(target) = target {
                    let ident = target
                        .trim_start_matches(['(', '<', '-', '>'])
                        .split(|c: char| !(c.is_alphanumeric() || c == '_' || c == '.' || c == '\''))
                        .next()
                        .unwrap_or("");
                    if !ident.is_empty() && !self.known_reference(goal, ident) {
                        return format!(
                            "The reference {ident} was not found in the current environment."
                        );
                    }
                }
            }
        }
        "Tactic failure.".to_string()
    }

    fn apply(&mut self, sentence: &str) -> Result<ExecOutcome, EngineError> {
        let tactic = normalize_tactic(sentence);
        let mut next = self.state.clone();
        if tactic == "{" {
            let frame = next.frames.last_mut().expect("at least one frame");
            if frame.is_empty() {
                return Ok(Self::failed("No such goal.".into()));
            }
            let first = frame.remove(0);
            next.frames.push(vec![first]);
            return Ok(self.commit(next));
        }
        if tactic == "}" {
            if next.frames.len() < 2 {
                return Ok(Self::failed("The proof is not focused.".into()));
            }
            if !next.frames.last().expect("frame").is_empty() {
                return Ok(Self::failed(
                    "Some goals remain in this subproof; it cannot be unfocused.".into(),
                ));
            }
            next.frames.pop();
            return Ok(self.commit(next));
        }
        if is_structure_marker(&tactic) {
            return Ok(Self::failed(
                "Bullets are not supported by this prover; use braces.".into(),
            ));
        }
        let frame = next.frames.last_mut().expect("at least one frame");
        let Some(label) = frame.first().cloned() else {
            return Ok(Self::failed("No such goal.".into()));
        };
        let goal = self.goals[&label].clone();
        let rule = self
            .theory
            .rules
            .iter()
            .find(|r| r.goal == label && normalize_tactic(&r.tactic) == tactic)
            .cloned();
        let replacement: Vec<String> = match rule {
            Some(r) if r.timeout => return Err(EngineError::Timeout),
            Some(MockRule {
                error: Some(message),
                ..
            }) => return Ok(Self::failed(message)),
            Some(MockRule {
                yields: Some(ys), ..
            }) => ys,
            _ => {
                let c = &goal.conclusion;
                let refl = c
                    .split_once(" = ")
                    .is_some_and(|(l, r)| l.trim() == r.trim() && !r.contains(" = "));
                if (c == "True" && CLOSING_TRUE.contains(&tactic.as_str()))
                    || (refl && CLOSING_REFL.contains(&tactic.as_str()))
                {
                    Vec::new()
                } else {
                    return Ok(Self::failed(self.default_failure(&goal, &tactic)));
                }
            }
        };
        frame.remove(0);
        for (i, y) in replacement.into_iter().enumerate() {
            frame.insert(i, y);
        }
        Ok(self.commit(next))
    }

    fn commit(&mut self, next: State) -> ExecOutcome {
        let prev = std::mem::replace(&mut self.state, next);
        self.history.push(prev);
        ExecOutcome::Accepted {
            goals: self.raw_goals(),
            raw: self.render(),
        }
    }

    fn pattern_terms(pattern: &str) -> (Vec<String>, Vec<String>, Vec<String>) {
        let mut idents = Vec::new();
        let mut ops = Vec::new();
        let mut quoted = Vec::new();
        let mut rest = String::new();
        let mut in_quote = false;
        let mut q = String::new();
        for c in pattern.chars() {
            if c == '"' {
                if in_quote {
                    quoted.push(std::mem::take(&mut q));
                }
                in_quote = !in_quote;
            } else if in_quote {
                q.push(c);
            } else {
                rest.push(c);
            }
        }
        for t in tokens::identifiers(&rest) {
            idents.push(t.to_string());
        }
        for w in rest.split(|c: char| c.is_alphanumeric() || c.is_whitespace() || "()_.%'".contains(c)) {
            if !w.is_empty() {
                ops.push(w.to_string());
            }
        }
        (idents, ops, quoted)
    }

    fn search(&self, pattern: &str) -> Result<String, String> {
        if !balanced(pattern) || pattern.matches('"').count() % 2 == 1 {
            return Err(format!("Syntax error: malformed pattern `{pattern}`."));
        }
        let (idents, ops, quoted) = Self::pattern_terms(pattern);
        let mut out = String::new();
        for d in &self.theory.declarations {
            let text = format!("{} {}", d.name, d.statement);
            let ids = tokens::identifier_set(&text);
            let hit = idents.iter().all(|i| ids.contains(i.as_str()))
                && ops.iter().all(|o| d.statement.contains(o.as_str()))
                && quoted.iter().all(|q| d.name.contains(q.as_str()));
            if hit {
                out.push_str(&format!("{}: {}\n", d.name, d.statement));
            }
        }
        Ok(out)
    }

    fn lookup(&self, name: &str) -> Option<&Declaration> {
        self.theory.declarations.iter().find(|d| d.name == name)
    }

    fn check(&self, term: &str) -> Result<String, String> {
        let numeral = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
        if let Some(n) = term.strip_suffix("%Z") {
            if numeral(n.trim_start_matches('-')) {
                return Ok(format!("{term}\n     : Z\n"));
            }
        }
        if numeral(term) {
            return Ok(format!("{term}\n     : nat\n"));
        }
        if let Some(d) = self.lookup(term) {
            return Ok(format!("{}\n     : {}\n", d.name, d.statement));
        }
        if let Some(label) = self.state.flat().first() {
            for h in &self.goals[label].hypotheses {
                if h.names.iter().any(|n| n == term) {
                    return Ok(format!("{term}\n     : {}\n", h.statement));
                }
            }
        }
        Err(format!(
            "The reference {term} was not found in the current environment."
        ))
    }
}

impl Engine for MockEngine {
    fn exec(&mut self, sentence: &str) -> Result<ExecOutcome, EngineError> {
        if self.closed {
            return Err(EngineError::Dead("mock prover closed".into()));
        }
        self.apply(sentence)
    }

    fn query(&mut self, sentence: &str) -> Result<String, Result<String, EngineError>> {
        if self.closed {
            return Err(Err(EngineError::Dead("mock prover closed".into())));
        }
        let body = sentence.trim().trim_end_matches('.');
        let (kw, arg) = body.split_once(' ').unwrap_or((body, ""));
        let arg = arg.trim();
        let r = match kw {
            "Search" => self.search(arg),
            "Check" => self.check(arg),
            "Print" => self
                .lookup(arg)
                .map(|d| format!("{} : {}\n", d.name, d.statement))
                .ok_or_else(|| format!("{arg} not a defined object.")),
            "About" => self
                .lookup(arg)
                .map(|d| format!("{} : {}\n\n{} is transparent.\n", d.name, d.statement, d.name))
                .ok_or_else(|| format!("{arg} not a defined object.")),
            "Locate" => Ok(match self.lookup(arg) {
                Some(d) => format!("Constant Mock.{}\n", d.name),
                None => format!("No object of basename {arg}\n"),
            }),
            _ => Err(format!("Syntax error: unknown query `{kw}`.")),
        };
        r.map_err(Ok)
    }

    fn goals(&mut self) -> Result<Vec<RawGoal>, EngineError> {
        if self.closed {
            return Err(EngineError::Dead("mock prover closed".into()));
        }
        Ok(self.raw_goals())
    }

    fn undo(&mut self, n: usize) -> Result<(), EngineError> {
        if n > self.history.len() {
            return Err(EngineError::Dead("undo past proof start".into()));
        }
        let keep = self.history.len() - n;
        self.state = self.history[keep].clone();
        self.history.truncate(keep);
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        if !self.state.flat().is_empty() {
            return Err("Attempt to save an incomplete proof.".into());
        }
        if self.state.frames.len() > 1 {
            return Err("Attempt to save a proof with focused subproofs still open.".into());
        }
        Ok(())
    }

    fn close(&mut self) {
        self.closed = true;
    }
}

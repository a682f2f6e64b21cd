//! Sessions with a tactic-based prover over a sentence/reply transcript.
//!
//! A [`Session`] owns one engine (the built-in [`mock`] prover or a
//! [`coqtop`] subprocess), keeps the goal list with session-assigned ids,
//! enforces the admission wall and writes every exchange to a
//! [`Transcript`].

pub mod coqtop;
pub mod mock;
mod output;
mod types;

pub use output::parse_query_output;
pub use types::*;

use crate::sanitize::{self, SanitizeError};
use crate::source::{is_structure_marker, SourceError, SourceFile};
use crate::transcript::{Channel, Transcript};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProverError {
    #[error("failed to spawn prover: {0}")]
    ProcessSpawnFailure(String),
    #[error("prover rejected the source: {0}")]
    CompilationFailure(String),
    #[error("lemma `{0}` not found in source")]
    LemmaNotFound(String),
    #[error("sentence rejected before transmission: {0}")]
    SanitizationRejected(#[from] SanitizeError),
    #[error("sentence exceeded the per-sentence timeout")]
    SentenceTimeout,
    #[error("prover session is dead: {0}")]
    SessionDead(String),
    #[error("query rejected: {0}")]
    QueryRejected(String),
    #[error("cannot roll back {requested} sentences, only {available} applied")]
    RollbackTooDeep { requested: usize, available: usize },
}

impl From<SourceError> for ProverError {
    fn from(e: SourceError) -> Self {
        ProverError::CompilationFailure(e.to_string())
    }
}

/// A goal as printed by an engine, before the session assigns an id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGoal {
    pub hypotheses: Vec<Hypothesis>,
    pub conclusion: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecOutcome {
    Accepted { goals: Vec<RawGoal>, raw: String },
    Failed { message: String, raw: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    Timeout,
    Dead(String),
}

/// Low-level prover contract. Failed and timed-out sentences must leave the
/// engine state untouched.
pub trait Engine: Send {
    fn exec(&mut self, sentence: &str) -> Result<ExecOutcome, EngineError>;
    /// Runs a query sentence; `Ok` carries the raw output, `Err(Ok(msg))` a
    /// prover error message.
    fn query(&mut self, sentence: &str) -> Result<String, Result<String, EngineError>>;
    fn goals(&mut self) -> Result<Vec<RawGoal>, EngineError>;
    fn undo(&mut self, n: usize) -> Result<(), EngineError>;
    /// Closes the proof (`Qed.`); `Err` carries the prover's complaint.
    fn finish(&mut self) -> Result<(), String>;
    fn close(&mut self);
}

/// Parsed lemma source plus the statement to prove.
#[derive(Debug, Clone)]
pub struct LemmaSource {
    pub file: SourceFile,
    pub name: String,
}

/// A live proof session. Single-owner; may be moved across threads.
pub struct Session {
    engine: Box<dyn Engine>,
    goals: Vec<GoalState>,
    /// Goal list before each successfully applied sentence.
    undo_stack: Vec<Vec<GoalState>>,
    transcript: Transcript,
    lemma_name: String,
    closed: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("lemma", &self.lemma_name)
            .field("goals", &self.goals.len())
            .field("applied", &self.undo_stack.len())
            .field("closed", &self.closed)
            .finish()
    }
}

/// Assigns ids to `new` given the goals before a sentence.
///
/// The focused goal's `k` replacements get ids `focused.0 .. focused.(k-1)`;
/// untouched goals keep theirs.
fn assign_ids(before: &[GoalState], new: Vec<RawGoal>, marker: bool) -> Vec<GoalState> {
    let to_state = |g: RawGoal, id: String| GoalState {
        hypotheses: g.hypotheses,
        conclusion: g.conclusion,
        goal_id: id,
    };
    if marker && new.len() == before.len() {
        return new
            .into_iter()
            .zip(before)
            .map(|(g, b)| to_state(g, b.goal_id.clone()))
            .collect();
    }
    let rest = before.len().saturating_sub(1);
    if new.len() >= rest && !before.is_empty() {
        let k = new.len() - rest;
        let focused = &before[0].goal_id;
        new.into_iter()
            .enumerate()
            .map(|(i, g)| {
                let id = if i < k {
                    format!("{focused}.{i}")
                } else {
                    before[1 + i - k].goal_id.clone()
                };
                to_state(g, id)
            })
            .collect()
    } else {
        // more goals vanished than the focused one: keep the trailing ids
        let skip = before.len() - new.len().min(before.len());
        new.into_iter()
            .enumerate()
            .map(|(i, g)| {
                let id = before
                    .get(skip + i)
                    .map(|b| b.goal_id.clone())
                    .unwrap_or_else(|| format!("x{i}"));
                to_state(g, id)
            })
            .collect()
    }
}

fn open_engine(
    config: &ProverConfig,
    source: &LemmaSource,
) -> Result<Box<dyn Engine>, ProverError> {
    for p in &config.prelude_files {
        if !p.exists() {
            return Err(ProverError::CompilationFailure(format!(
                "prelude file {} does not exist",
                p.display()
            )));
        }
    }
    if config.sentence_timeout.is_zero() {
        return Err(ProverError::CompilationFailure(
            "per-sentence timeout must be positive".into(),
        ));
    }
    if config.is_mock() {
        Ok(Box::new(mock::MockEngine::start(config, source)?))
    } else {
        Ok(Box::new(coqtop::CoqtopEngine::start(config, source)?))
    }
}

impl Session {
    /// Starts a session and enters proof mode for `lemma_name`.
    pub fn start(
        config: &ProverConfig,
        lemma_source: &str,
        lemma_name: &str,
        transcript: Transcript,
    ) -> Result<(Session, GoalState), ProverError> {
        let file = SourceFile::parse(lemma_source)?;
        if config.is_mock() {
            // the mock checks syntax of the whole file before looking the lemma up
            mock::check_syntax(&file, lemma_name)?;
        }
        if file.lemma(lemma_name).is_none() {
            return Err(ProverError::LemmaNotFound(lemma_name.to_string()));
        }
        let source = LemmaSource {
            file,
            name: lemma_name.to_string(),
        };
        let mut engine = open_engine(config, &source)?;
        let raw = engine
            .goals()
            .map_err(|e| ProverError::SessionDead(format!("{e:?}")))?;
        let root = raw.into_iter().next().ok_or_else(|| {
            ProverError::CompilationFailure("prover reported no goal after the statement".into())
        })?;
        let root = GoalState {
            hypotheses: root.hypotheses,
            conclusion: root.conclusion,
            goal_id: "0".into(),
        };
        let session = Session {
            engine,
            goals: vec![root.clone()],
            undo_stack: Vec::new(),
            transcript,
            lemma_name: lemma_name.to_string(),
            closed: false,
        };
        Ok((session, root))
    }

    pub fn lemma_name(&self) -> &str {
        &self.lemma_name
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    /// Goals as last reported by the prover, focused first.
    pub fn goals(&self) -> &[GoalState] {
        &self.goals
    }

    pub fn focused(&self) -> Option<&GoalState> {
        self.goals.first()
    }

    pub fn applied_count(&self) -> usize {
        self.undo_stack.len()
    }

    fn ensure_open(&self) -> Result<(), ProverError> {
        if self.closed {
            Err(ProverError::SessionDead("session closed".into()))
        } else {
            Ok(())
        }
    }

    fn dead(&mut self, e: EngineError) -> ProverError {
        match e {
            EngineError::Timeout => ProverError::SentenceTimeout,
            EngineError::Dead(msg) => {
                self.closed = true;
                ProverError::SessionDead(msg)
            }
        }
    }

    /// Asks the engine to print its goals again (for purity checks).
    pub fn printed_goals(&mut self) -> Result<Vec<String>, ProverError> {
        self.ensure_open()?;
        let goals = self.engine.goals().map_err(|e| self.dead(e))?;
        Ok(goals
            .into_iter()
            .map(|g| {
                GoalState {
                    hypotheses: g.hypotheses,
                    conclusion: g.conclusion,
                    goal_id: String::new(),
                }
                .render()
            })
            .collect())
    }

    /// Applies one tactic sentence (or a structure marker).
    pub fn apply_tactic(&mut self, tactic: &str) -> Result<ProverReply, ProverError> {
        self.ensure_open()?;
        let tactic = tactic.trim();
        if let Err(e) = sanitize::check_sentence(tactic) {
            self.transcript
                .log(Channel::Rejected, &format!("{tactic}\n-- {e}"));
            return Err(ProverError::SanitizationRejected(e));
        }
        self.transcript.log(Channel::Send, tactic);
        let outcome = match self.engine.exec(tactic) {
            Ok(o) => o,
            Err(e) => {
                self.transcript.log(Channel::Recv, &format!("{e:?}"));
                return Err(self.dead(e));
            }
        };
        match outcome {
            ExecOutcome::Failed { message, raw } => {
                self.transcript.log(Channel::Recv, &raw);
                Ok(ProverReply::Failure { message, raw })
            }
            ExecOutcome::Accepted { goals, raw } => {
                self.transcript.log(Channel::Recv, &raw);
                let new = assign_ids(&self.goals, goals, is_structure_marker(tactic));
                let before = std::mem::replace(&mut self.goals, new);
                self.undo_stack.push(before);
                if self.goals.is_empty() {
                    Ok(ProverReply::Qed)
                } else {
                    Ok(ProverReply::Advanced {
                        open_goals: self.goals.clone(),
                    })
                }
            }
        }
    }

    /// Runs a read-only context query.
    pub fn run_query(
        &mut self,
        kind: QueryKind,
        argument: &str,
    ) -> Result<QueryResult, ProverError> {
        self.ensure_open()?;
        let argument = argument.trim();
        let argument = argument.strip_suffix('.').unwrap_or(argument).trim();
        if argument.is_empty() {
            return Err(ProverError::QueryRejected("empty argument".into()));
        }
        let sentence = format!("{kind} {argument}.");
        let one_sentence = crate::source::split_sentences(&sentence)
            .map(|s| s.sentences.len() == 1 && s.remainder.is_none())
            .unwrap_or(false);
        if let Err(e) = sanitize::check_words(&sentence) {
            self.transcript
                .log(Channel::Rejected, &format!("{sentence}\n-- {e}"));
            return Err(ProverError::QueryRejected(e.to_string()));
        }
        if !one_sentence {
            self.transcript
                .log(Channel::Rejected, &format!("{sentence}\n-- not a single sentence"));
            return Err(ProverError::QueryRejected("not a single sentence".into()));
        }
        self.transcript.log(Channel::Send, &sentence);
        match self.engine.query(&sentence) {
            Ok(raw) => {
                self.transcript.log(Channel::Recv, &raw);
                Ok(parse_query_output(kind, argument, &raw))
            }
            Err(Ok(message)) => {
                self.transcript.log(Channel::Recv, &message);
                Err(ProverError::QueryRejected(message))
            }
            Err(Err(e)) => {
                self.transcript.log(Channel::Recv, &format!("{e:?}"));
                Err(self.dead(e))
            }
        }
    }

    /// Undoes the last `n` successfully applied sentences.
    pub fn rollback(&mut self, n: usize) -> Result<GoalState, ProverError> {
        self.ensure_open()?;
        let available = self.undo_stack.len();
        if n == 0 || n > available {
            return Err(ProverError::RollbackTooDeep {
                requested: n,
                available,
            });
        }
        self.engine.undo(n).map_err(|e| self.dead(e))?;
        let restored = self.undo_stack.split_off(available - n).swap_remove(0);
        self.goals = restored;
        self.goals
            .first()
            .cloned()
            .ok_or_else(|| ProverError::SessionDead("no focused goal after rollback".into()))
    }

    /// Sends the closing `Qed.`.
    pub fn finish(&mut self) -> Result<(), String> {
        if self.closed {
            return Err("session closed".into());
        }
        self.transcript.log(Channel::Send, "Qed.");
        let r = self.engine.finish();
        self.transcript.log(
            Channel::Recv,
            match &r {
                Ok(()) => "",
                Err(m) => m,
            },
        );
        r
    }

    /// Terminates the prover. Idempotent.
    pub fn close(&mut self) {
        if !self.closed {
            self.engine.close();
            self.closed = true;
        }
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.close();
    }
}

/// Replays `script` on a fresh session and reports whether it proves the
/// lemma.
pub fn replay_script(
    config: &ProverConfig,
    lemma_source: &str,
    lemma_name: &str,
    script: &[String],
    transcript: Transcript,
) -> Result<Verdict, ProverError> {
    if script.is_empty() {
        return Ok(Verdict::RejectedAt {
            index: 0,
            message: "empty script".into(),
        });
    }
    for (index, s) in script.iter().enumerate() {
        if let Err(e) = sanitize::check_sentence(s) {
            transcript.log(Channel::Rejected, &format!("{s}\n-- {e}"));
            return Ok(Verdict::RejectedAt {
                index,
                message: ProverError::SanitizationRejected(e).to_string(),
            });
        }
    }
    let (mut session, _) = Session::start(config, lemma_source, lemma_name, transcript)?;
    let mut last = None;
    for (index, s) in script.iter().enumerate() {
        match session.apply_tactic(s) {
            Ok(ProverReply::Failure { message, .. }) => {
                return Ok(Verdict::RejectedAt { index, message })
            }
            Ok(reply) => last = Some(reply),
            Err(e) => {
                return Ok(Verdict::RejectedAt {
                    index,
                    message: e.to_string(),
                })
            }
        }
    }
    let verdict = match last {
        Some(ProverReply::Qed) => match session.finish() {
            Ok(()) => Verdict::Verified,
            Err(message) => Verdict::RejectedAt {
                index: script.len(),
                message,
            },
        },
        _ => Verdict::RejectedAt {
            index: script.len(),
            message: format!("proof incomplete: {} goal(s) remain", session.goals().len()),
        },
    };
    session.close();
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(c: &str) -> RawGoal {
        RawGoal {
            hypotheses: vec![],
            conclusion: c.into(),
        }
    }

    fn state(c: &str, id: &str) -> GoalState {
        GoalState {
            hypotheses: vec![],
            conclusion: c.into(),
            goal_id: id.into(),
        }
    }

    #[test]
    fn ids_for_branching_and_closing() {
        let before = vec![state("a", "0")];
        let after = assign_ids(&before, vec![raw("b"), raw("c"), raw("d")], false);
        let ids: Vec<_> = after.iter().map(|g| g.goal_id.as_str()).collect();
        assert_eq!(ids, vec!["0.0", "0.1", "0.2"]);
        let after2 = assign_ids(&after, vec![raw("c"), raw("d")], false);
        let ids: Vec<_> = after2.iter().map(|g| g.goal_id.as_str()).collect();
        assert_eq!(ids, vec!["0.1", "0.2"]);
        let after3 = assign_ids(&after2, vec![raw("c2"), raw("d")], false);
        assert_eq!(after3[0].goal_id, "0.1.0");
        assert_eq!(after3[1].goal_id, "0.2");
    }

    #[test]
    fn marker_keeps_ids() {
        let before = vec![state("a", "0.1"), state("b", "0.2")];
        let after = assign_ids(&before, vec![raw("a"), raw("b")], true);
        assert_eq!(after, before);
    }
}

//! The proving loop: prompt, decide, apply or query, update the tree, and
//! react to prover feedback until the tree is complete or a budget runs out.

use crate::context::{ContextSet, DEFAULT_CAPACITY};
use crate::feedback::{AbortReason, Directive, ErrorRecord, FeedbackController, Thresholds};
use crate::gateway::{
    build_prompt, decide_next, AgentDecision, Backend, GatewayError, GenerationConfig,
    PromptInputs, PromptMode, RetryPolicy, DEFAULT_PROMPT_BUDGET,
};
use crate::history::{HistoryDb, HistoryError, StepRecord, DEFAULT_TOP_K, HISTORY_ENV_VAR};
use crate::prover::{replay_script, ProverConfig, ProverError, ProverReply, Session, Verdict};
use crate::source::SourceFile;
use crate::transcript::{Channel, Transcript};
use crate::tree::{NodeId, ProofScript, ProofTree, TreeError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;

pub type SharedHistory = Arc<Mutex<HistoryDb>>;

/// Queries allowed in a row before the prompt demands a tactic.
pub const MAX_CONSECUTIVE_QUERIES: usize = 2;
pub const DEFAULT_HISTORY_FILE: &str = "proof_history.json";

const NO_PROGRESS: &str = "No progress: the tactic left the goal unchanged.";
const OUTSIDE_FOCUS: &str = "The tactic changed goals outside the focused subgoal.";
const TIMED_OUT: &str = "Timeout: the tactic did not finish within the time limit.";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub prover: ProverConfig,
    pub generation: GenerationConfig,
    pub thresholds: Thresholds,
    pub history_path: PathBuf,
    pub history_enabled: bool,
    pub audit_dir: PathBuf,
    pub prompt_budget: usize,
    pub context_capacity: usize,
    pub retry: RetryPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        let history_path = std::env::var_os(HISTORY_ENV_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_HISTORY_FILE));
        Self {
            prover: ProverConfig::mock(),
            generation: GenerationConfig::default(),
            thresholds: Thresholds::default(),
            history_path,
            history_enabled: true,
            audit_dir: PathBuf::from("audit"),
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            context_capacity: DEFAULT_CAPACITY,
            retry: RetryPolicy::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.thresholds.validate()?;
        self.generation.validate()?;
        if self.prompt_budget == 0 {
            return Err("prompt budget must be positive".into());
        }
        if self.context_capacity == 0 {
            return Err("context capacity must be positive".into());
        }
        if self.prover.sentence_timeout.is_zero() {
            return Err("per-sentence timeout must be positive".into());
        }
        Ok(())
    }

    /// Loads the history store named by this config, or an empty in-memory
    /// one when history is disabled.
    pub fn open_history(&self) -> Result<SharedHistory, HistoryError> {
        let db = if self.history_enabled {
            HistoryDb::load(&self.history_path)?
        } else {
            HistoryDb::in_memory()
        };
        Ok(Arc::new(Mutex::new(db)))
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunStats {
    pub total_attempts: usize,
    pub failed_attempts: usize,
    pub queries_issued: usize,
    #[serde(rename = "wall-time-secs", with = "secs")]
    pub wall_time: Duration,
    pub proof_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureReason {
    StepBudget,
    TimeBudget,
    NodeAttemptCap,
    BackendUnavailable,
    ProverError,
    GiveUp,
}

impl From<AbortReason> for FailureReason {
    fn from(r: AbortReason) -> Self {
        match r {
            AbortReason::StepBudget => FailureReason::StepBudget,
            AbortReason::TimeBudget => FailureReason::TimeBudget,
            AbortReason::NodeAttemptCap => FailureReason::NodeAttemptCap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunResult {
    Proved {
        script: ProofScript,
        tree: ProofTree,
        stats: RunStats,
    },
    Failed {
        reason: FailureReason,
        detail: String,
        /// Absent when the session never started.
        tree: Option<ProofTree>,
        stats: RunStats,
    },
}

impl RunResult {
    pub fn stats(&self) -> &RunStats {
        match self {
            RunResult::Proved { stats, .. } | RunResult::Failed { stats, .. } => stats,
        }
    }

    pub fn is_proved(&self) -> bool {
        matches!(self, RunResult::Proved { .. })
    }

    pub fn tree(&self) -> Option<&ProofTree> {
        match self {
            RunResult::Proved { tree, .. } => Some(tree),
            RunResult::Failed { tree, .. } => tree.as_ref(),
        }
    }

    pub fn failure_reason(&self) -> Option<FailureReason> {
        match self {
            RunResult::Proved { .. } => None,
            RunResult::Failed { reason, .. } => Some(*reason),
        }
    }

    /// Same outcome ignoring wall time.
    pub fn same_outcome(&self, other: &RunResult) -> bool {
        let strip = |r: &RunResult| {
            let mut r = r.clone();
            match &mut r {
                RunResult::Proved { stats, .. } | RunResult::Failed { stats, .. } => {
                    stats.wall_time = Duration::ZERO
                }
            }
            r
        };
        strip(self) == strip(other)
    }
}

/// A finished run together with its transcript.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub lemma_name: String,
    pub result: RunResult,
    pub transcript: Transcript,
}

/// `Lemma name : statement` as written in the source.
fn lemma_statement(source: &str, name: &str) -> String {
    SourceFile::parse(source)
        .ok()
        .and_then(|f| f.lemma(name).map(|l| format!("{name} : {}", l.goal_text())))
        .unwrap_or_else(|| name.to_string())
}

/// History records for a complete tree, in certificate order.
pub fn steps_from_tree(theorem: &str, tree: &ProofTree) -> Vec<StepRecord> {
    let mut out = Vec::new();
    for node in tree.nodes() {
        let children: Vec<_> = node.children.iter().filter_map(|c| tree.node(c)).collect();
        let tactic = match (&node.closing_tactic, children.first()) {
            (Some(t), _) => t.clone(),
            (None, Some(c)) => c.incoming_tactic.clone().unwrap_or_default(),
            (None, None) => continue,
        };
        let before: Vec<String> = node.goal.hypotheses.iter().map(|h| h.render()).collect();
        let after: Vec<String> = children
            .first()
            .map(|c| c.goal.hypotheses.iter().map(|h| h.render()).collect())
            .unwrap_or_else(|| before.clone());
        out.push(StepRecord {
            theorem_name: theorem.to_string(),
            tactic_id: out.len() as u64,
            tactic,
            goal_before: node.goal.conclusion.clone(),
            goal_after: children
                .iter()
                .map(|c| c.goal.conclusion.as_str())
                .collect::<Vec<_>>()
                .join("\n"),
            hypotheses_added: after.iter().filter(|h| !before.contains(h)).cloned().collect(),
            hypotheses_removed: before.iter().filter(|h| !after.contains(h)).cloned().collect(),
            hypotheses_before: before,
        });
    }
    out
}

struct Runner<'a> {
    source: &'a str,
    name: &'a str,
    config: &'a RunConfig,
    history: &'a SharedHistory,
    transcript: Transcript,
    started: Instant,
    stats: RunStats,
    controller: FeedbackController,
    context: ContextSet,
}

impl Runner<'_> {
    fn fail(&mut self, reason: FailureReason, detail: impl Into<String>, tree: Option<ProofTree>) -> RunResult {
        let detail = detail.into();
        self.transcript
            .log(Channel::Directive, &format!("failed: {reason:?}: {detail}"));
        self.stats.wall_time = self.started.elapsed();
        RunResult::Failed {
            reason,
            detail,
            tree,
            stats: self.stats.clone(),
        }
    }

    fn run(&mut self, backend: &mut dyn Backend) -> RunResult {
        let cfg = self.config;
        let (mut session, root) =
            match Session::start(&cfg.prover, self.source, self.name, self.transcript.clone()) {
                Ok(s) => s,
                Err(e) => return self.fail(FailureReason::ProverError, e.to_string(), None),
            };
        let statement = lemma_statement(self.source, self.name);
        let mut tree = ProofTree::new(root);
        let mut mode = PromptMode::Analyze;
        let mut errors: Vec<ErrorRecord> = Vec::new();
        let mut consecutive_queries = 0usize;
        let mut steps = 0usize;
        loop {
            if let Some(Directive::Abort { reason }) =
                self.controller
                    .check_budgets(steps, self.started.elapsed(), &cfg.thresholds)
            {
                return self.fail(reason.into(), "budget exhausted", Some(tree));
            }
            steps += 1;
            let Some(focus) = tree.focus().cloned() else {
                return self.fail(FailureReason::ProverError, "tree has no focus", Some(tree));
            };
            let goal = tree.focused_node().expect("focus exists").goal.clone();
            let bundle = {
                let db = self.history.lock().unwrap_or_else(|e| e.into_inner());
                let similar = if cfg.history_enabled {
                    db.top_k_similar(&goal, DEFAULT_TOP_K)
                } else {
                    Vec::new()
                };
                build_prompt(PromptInputs {
                    mode,
                    lemma_statement: &statement,
                    tree: &tree,
                    history: &similar,
                    context: &mut self.context,
                    errors: &errors,
                    require_tactic: consecutive_queries > MAX_CONSECUTIVE_QUERIES,
                    budget: cfg.prompt_budget,
                })
            };
            let bundle = match bundle {
                Ok(b) => b,
                Err(e) => return self.fail(FailureReason::GiveUp, e.to_string(), Some(tree)),
            };
            let decision =
                match decide_next(&bundle, &cfg.generation, backend, &cfg.retry, &self.transcript) {
                    Ok((d, _raw)) => d,
                    Err(GatewayError::BackendUnavailable(m)) => {
                        return self.fail(FailureReason::BackendUnavailable, m, Some(tree))
                    }
                    Err(e @ GatewayError::EmptyCompletion) => {
                        return self.fail(FailureReason::GiveUp, e.to_string(), Some(tree))
                    }
                };
            match decision {
                AgentDecision::GiveUp { reason } => {
                    return self.fail(FailureReason::GiveUp, reason, Some(tree))
                }
                AgentDecision::EmitQuery { kind, argument } => {
                    consecutive_queries += 1;
                    self.stats.queries_issued += 1;
                    self.controller.on_search_issued(&focus);
                    match session.run_query(kind, &argument) {
                        Ok(result) => {
                            self.context
                                .ingest_query_result(kind, &argument, &result, steps as u64);
                        }
                        // the rejection is in the transcript; the model moves on
                        Err(ProverError::QueryRejected(_)) => {}
                        Err(e) => {
                            return self.fail(FailureReason::ProverError, e.to_string(), Some(tree))
                        }
                    }
                    mode = PromptMode::Analyze;
                    errors.clear();
                }
                AgentDecision::EmitTactic { sentence } => {
                    consecutive_queries = 0;
                    self.stats.total_attempts += 1;
                    let failure = match self.apply(&mut session, &mut tree, &focus, &sentence) {
                        Ok(f) => f,
                        Err((reason, detail)) => return self.fail(reason, detail, Some(tree)),
                    };
                    if let Some(message) = failure {
                        self.stats.failed_attempts += 1;
                        let record = ErrorRecord::new(focus, &sentence, &message, steps as u64);
                        let directive = self.controller.on_failure(record, &cfg.thresholds);
                        self.transcript.log(Channel::Directive, &directive.to_string());
                        match directive {
                            Directive::Refine { error } => {
                                mode = PromptMode::FixError;
                                errors = vec![error];
                            }
                            Directive::SearchContext { recent_failures } => {
                                mode = PromptMode::PersistentError;
                                errors = recent_failures;
                            }
                            Directive::Abort { reason } => {
                                return self.fail(reason.into(), message, Some(tree))
                            }
                        }
                        continue;
                    }
                    self.controller.on_success(&focus);
                    mode = PromptMode::Analyze;
                    errors.clear();
                    if tree.is_complete() {
                        return self.conclude(session, tree);
                    }
                }
            }
        }
    }

    /// Applies `sentence` at `focus`. Returns the failure message, if any;
    /// a tactic that fails leaves both the prover and the tree unchanged.
    fn apply(
        &mut self,
        session: &mut Session,
        tree: &mut ProofTree,
        focus: &NodeId,
        sentence: &str,
    ) -> Result<Option<String>, (FailureReason, String)> {
        let reply = match session.apply_tactic(sentence) {
            Ok(r) => r,
            Err(ProverError::SentenceTimeout) => return Ok(Some(TIMED_OUT.to_string())),
            Err(ProverError::SanitizationRejected(e)) => {
                return Err((FailureReason::GiveUp, e.to_string()))
            }
            Err(e) => return Err((FailureReason::ProverError, e.to_string())),
        };
        if let ProverReply::Failure { message, .. } = &reply {
            return Ok(Some(message.clone()));
        }
        let open = tree.open_leaves().count();
        let unchanged = match &reply {
            ProverReply::Advanced { open_goals } => {
                let goal = &tree.node(focus).expect("focus exists").goal;
                open_goals.len() == open && open_goals[0].same_text(goal)
            }
            _ => false,
        };
        let message = if unchanged {
            NO_PROGRESS
        } else {
            match tree.record_application(focus, sentence, &reply) {
                Ok(_) => return Ok(None),
                Err(TreeError::ReplyMismatch { .. }) => OUTSIDE_FOCUS,
                Err(e) => return Err((FailureReason::ProverError, e.to_string())),
            }
        };
        session
            .rollback(1)
            .map_err(|e| (FailureReason::ProverError, e.to_string()))?;
        Ok(Some(message.to_string()))
    }

    fn conclude(&mut self, mut session: Session, tree: ProofTree) -> RunResult {
        if let Err(m) = session.finish() {
            return self.fail(FailureReason::ProverError, m, Some(tree));
        }
        session.close();
        let script = match tree.linearize() {
            Ok(s) => s,
            Err(e) => return self.fail(FailureReason::ProverError, e.to_string(), Some(tree)),
        };
        self.transcript
            .log(Channel::Directive, "replaying certificate on a fresh session");
        let verdict = replay_script(
            &self.config.prover,
            self.source,
            self.name,
            &script.sentences,
            self.transcript.clone(),
        );
        match verdict {
            Ok(Verdict::Verified) => {}
            Ok(Verdict::RejectedAt { index, message }) => {
                return self.fail(
                    FailureReason::ProverError,
                    format!("certificate rejected at sentence {index}: {message}"),
                    Some(tree),
                )
            }
            Err(e) => return self.fail(FailureReason::ProverError, e.to_string(), Some(tree)),
        }
        if self.config.history_enabled {
            let mut db = self.history.lock().unwrap_or_else(|e| e.into_inner());
            match db.record_proof(self.name, steps_from_tree(self.name, &tree)) {
                Ok(()) | Err(HistoryError::DuplicateTheorem(_)) => {}
                Err(e) => self
                    .transcript
                    .log(Channel::Directive, &format!("history not updated: {e}")),
            }
        }
        self.stats.proof_steps = script.tactic_count();
        self.stats.wall_time = self.started.elapsed();
        RunResult::Proved {
            script,
            tree,
            stats: self.stats.clone(),
        }
    }
}

/// Proves `name` from `source`. Never panics on prover or backend failures;
/// they come back as `RunResult::Failed`.
pub fn prove_lemma(
    source: &str,
    name: &str,
    config: &RunConfig,
    history: &SharedHistory,
    backend: &mut dyn Backend,
) -> RunReport {
    let transcript = Transcript::new();
    let mut runner = Runner {
        source,
        name,
        config,
        history,
        transcript: transcript.clone(),
        started: Instant::now(),
        stats: RunStats::default(),
        controller: FeedbackController::new(),
        context: ContextSet::new(config.context_capacity),
    };
    let result = runner.run(backend);
    RunReport {
        lemma_name: name.to_string(),
        result,
        transcript,
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("cannot write audit bundle: {0}")]
    StorageFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditBundle {
    pub tree: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    pub stats: PathBuf,
    pub transcript: PathBuf,
}

impl AuditBundle {
    pub fn paths(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = Vec::new();
        v.extend(self.tree.as_deref());
        v.extend(self.certificate.as_deref());
        v.push(&self.stats);
        v.push(&self.transcript);
        v
    }
}

/// The per-run stats document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct StatsRecord {
    pub lemma: String,
    pub proved: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(flatten)]
    pub stats: RunStats,
}

impl StatsRecord {
    pub fn of(report: &RunReport) -> Self {
        let (reason, detail) = match &report.result {
            RunResult::Proved { .. } => (None, None),
            RunResult::Failed { reason, detail, .. } => (Some(*reason), Some(detail.clone())),
        };
        Self {
            lemma: report.lemma_name.clone(),
            proved: report.result.is_proved(),
            reason,
            detail,
            stats: report.result.stats().clone(),
        }
    }
}

/// Writes the tree, certificate (proved runs only), stats and transcript.
pub fn write_audit(report: &RunReport, audit_dir: &Path) -> Result<AuditBundle, AuditError> {
    std::fs::create_dir_all(audit_dir)?;
    let millis = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let stem = format!("{}-{millis}", report.lemma_name);
    let path = |ext: &str| audit_dir.join(format!("{stem}.{ext}"));
    let tree = match report.result.tree() {
        Some(t) => {
            let p = path("tree.json");
            std::fs::write(&p, t.serialize())?;
            Some(p)
        }
        None => None,
    };
    let certificate = match &report.result {
        RunResult::Proved { script, .. } => {
            let p = path("v");
            std::fs::write(&p, script.to_certificate())?;
            Some(p)
        }
        RunResult::Failed { .. } => None,
    };
    let stats = path("stats.json");
    let record = serde_json::to_string_pretty(&StatsRecord::of(report))
        .expect("stats serialize");
    std::fs::write(&stats, record + "\n")?;
    let transcript = path("transcript.log");
    std::fs::write(&transcript, report.transcript.render())?;
    Ok(AuditBundle {
        tree,
        certificate,
        stats,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;
    use crate::prover::mock::{MockGoal, MockRule, MockTheory};

    fn split_source() -> String {
        let mut theory = MockTheory::default();
        for (name, c) in [("l", "0 <= a"), ("r", "0 <= b")] {
            theory.goals.insert(
                name.into(),
                MockGoal {
                    hypotheses: vec!["a b : nat".into()],
                    conclusion: c.into(),
                },
            );
        }
        theory.rules.push(MockRule::yields("root", "split.", &["l", "r"]));
        theory.rules.push(MockRule::yields("l", "lia.", &[]));
        theory.rules.push(MockRule::yields("r", "lia.", &[]));
        theory.rules.push(MockRule::fails("root", "lia.", "Tactic failure: Cannot find witness."));
        format!(
            "Lemma both : forall a b : nat, 0 <= a /\\ 0 <= b.\n{}\nProof.\nAdmitted.\n",
            theory.to_directive("both")
        )
    }

    fn config() -> RunConfig {
        RunConfig {
            history_enabled: false,
            retry: RetryPolicy::none(),
            ..RunConfig::default()
        }
    }

    fn run(source: &str, script: &[&str], cfg: &RunConfig) -> (RunReport, ScriptedBackend) {
        let history = cfg.open_history().unwrap();
        let mut backend = ScriptedBackend::new(script.iter().copied());
        let report = prove_lemma(source, "both", cfg, &history, &mut backend);
        (report, backend)
    }

    #[test]
    fn proves_with_branching() {
        let src = split_source();
        let (report, backend) = run(&src, &["lia.", "split.", "lia.", "lia."], &config());
        let RunResult::Proved { script, tree, stats } = &report.result else {
            panic!("{:?}", report.result)
        };
        assert_eq!(script.sentences, ["split.", "{", "lia.", "}", "{", "lia.", "}"]);
        assert_eq!(tree.len(), 3);
        assert_eq!(stats.total_attempts, 4);
        assert_eq!(stats.failed_attempts, 1);
        assert_eq!(stats.proof_steps, 3);
        let modes: Vec<_> = backend.seen().iter().map(|b| b.mode).collect();
        assert_eq!(
            modes,
            [PromptMode::Analyze, PromptMode::FixError, PromptMode::Analyze, PromptMode::Analyze]
        );
    }

    #[test]
    fn admit_never_reaches_prover() {
        let src = split_source();
        let (report, _) = run(&src, &["admit.", "admit."], &config());
        assert_eq!(report.result.failure_reason(), Some(FailureReason::GiveUp));
        assert!(report.transcript.sent().is_empty());
    }

    #[test]
    fn empty_script_is_backend_unavailable() {
        let src = split_source();
        let (report, _) = run(&src, &[], &config());
        assert_eq!(
            report.result.failure_reason(),
            Some(FailureReason::BackendUnavailable)
        );
    }

    #[test]
    fn fourth_query_prompt_demands_tactic() {
        let src = split_source();
        let script = ["Check 0.", "Check 1.", "Check 2.", "Check 3."];
        let (_, backend) = run(&src, &script, &config());
        let demands: Vec<bool> = backend.seen().iter().map(|b| b.require_tactic).collect();
        assert_eq!(demands, [false, false, false, true, true]);
    }

    #[test]
    fn audit_bundle_files() {
        let src = split_source();
        let dir = tempfile::tempdir().unwrap();
        let (report, _) = run(&src, &["split.", "lia.", "lia."], &config());
        let bundle = write_audit(&report, dir.path()).unwrap();
        assert_eq!(bundle.paths().len(), 4);
        let (failed, _) = run(&src, &["split."], &config());
        let bundle = write_audit(&failed, dir.path()).unwrap();
        assert!(bundle.certificate.is_none());
        assert_eq!(bundle.paths().len(), 3);
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        assert!(matches!(
            write_audit(&report, &blocker.join("sub")),
            Err(AuditError::StorageFailure(_))
        ));
    }

    #[test]
    fn history_records_certificate_order() {
        let src = split_source();
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            history_enabled: true,
            history_path: dir.path().join("h.json"),
            ..config()
        };
        let (report, _) = run(&src, &["split.", "lia.", "lia."], &cfg);
        assert!(report.result.is_proved());
        let db = HistoryDb::load(&cfg.history_path).unwrap();
        let tactics: Vec<_> = db.steps_of("both").iter().map(|s| s.tactic.clone()).collect();
        assert_eq!(tactics, ["split.", "lia.", "lia."]);
    }
}

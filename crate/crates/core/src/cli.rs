//! Command-line surface. Settings are layered: flags, then `ARBOR_*`
//! environment variables, then a flat TOML config file, then defaults.

use crate::agent::{prove_lemma, write_audit, RunConfig, RunResult};
use crate::corpus::{self, CorpusManifest, ManifestEntry, DEFAULT_BUCKET_EDGES};
use crate::feedback::Thresholds;
use crate::gateway::{Backend, GenerationConfig, LiveBackend, ScriptedBackend};
use crate::history::{HistoryDb, HISTORY_ENV_VAR};
use crate::prover::{replay_script, ProverConfig, Verdict};
use crate::source::SourceFile;
use crate::transcript::Transcript;
use crate::tree::ProofScript;
use clap::{ArgAction, Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const CONFIG_ENV_VAR: &str = "ARBOR_CONFIG";
pub const FIXTURE_EXTENSION: &str = "completions";
const DEFAULT_HYPOTHESIS_EDGES: [usize; 4] = [1, 2, 4, 8];
const LIVE_REQUEST_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Parser)]
#[command(name = "arbor", version, about = "Agentic proof automation for Rocq lemmas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Prove one lemma, or every unproved lemma in a file.
    Prove(ProveArgs),
    /// Check a certificate against a lemma on a fresh session.
    Replay(ReplayArgs),
    /// Prove every lemma of a manifest and summarize.
    Batch(BatchArgs),
    /// Term and hypothesis counts for a manifest.
    Stats(StatsArgs),
    /// Inspect or clear the tactic history.
    History(HistoryArgs),
}

/// Options shared by every subcommand. All fields are optional so the
/// layers can be merged.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct Settings {
    /// Prover executable; `mock` selects the built-in mock prover.
    #[arg(long, global = true)]
    pub prover_path: Option<PathBuf>,
    /// File loaded before the lemma (repeatable).
    #[arg(long, global = true)]
    pub prelude: Option<Vec<PathBuf>>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    /// Name of the variable holding the API token.
    #[arg(long, global = true)]
    pub auth_token_env: Option<String>,
    /// Identical failures before a context search.
    #[arg(long, global = true)]
    pub err_threshold: Option<usize>,
    #[arg(long, global = true)]
    pub max_attempts: Option<usize>,
    /// Per-sentence prover timeout in seconds.
    #[arg(long, global = true)]
    pub timeout: Option<u64>,
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    /// Per-lemma wall-clock budget in seconds.
    #[arg(long, global = true)]
    pub wall_clock: Option<u64>,
    #[arg(long, global = true)]
    pub prompt_budget: Option<usize>,
    /// History store path.
    #[arg(long, global = true)]
    pub history: Option<PathBuf>,
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    pub no_history: bool,
    /// `live` or `replay:<fixture file or directory>`.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    #[arg(long, global = true)]
    pub audit_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Flat TOML file with the same keys as the long flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProveArgs {
    pub source: PathBuf,
    #[arg(required_unless_present = "all", conflicts_with = "all")]
    pub lemma: Option<String>,
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub source: PathBuf,
    pub lemma: String,
    pub certificate: PathBuf,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    pub manifest: PathBuf,
    /// Term-count bucket edges, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bucket_edges: Option<Vec<usize>>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub bucket_edges: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub hypothesis_edges: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct HistoryArgs {
    #[command(subcommand)]
    pub action: HistoryAction,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Subcommand)]
pub enum HistoryAction {
    List,
    Show { theorem: String },
    Clear {
        #[arg(long)]
        yes: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Failure(m) => f.write_str(m),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn env_var<T: FromStr>(key: &str) -> Result<Option<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    match std::env::var(key) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("{key}: {e}"))),
        _ => Ok(None),
    }
}

impl Settings {
    /// Fills unset fields from `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        Settings {
            prover_path: self.prover_path.or(lower.prover_path),
            prelude: self.prelude.or(lower.prelude),
            model: self.model.or(lower.model),
            endpoint: self.endpoint.or(lower.endpoint),
            temperature: self.temperature.or(lower.temperature),
            max_tokens: self.max_tokens.or(lower.max_tokens),
            auth_token_env: self.auth_token_env.or(lower.auth_token_env),
            err_threshold: self.err_threshold.or(lower.err_threshold),
            max_attempts: self.max_attempts.or(lower.max_attempts),
            timeout: self.timeout.or(lower.timeout),
            max_steps: self.max_steps.or(lower.max_steps),
            wall_clock: self.wall_clock.or(lower.wall_clock),
            prompt_budget: self.prompt_budget.or(lower.prompt_budget),
            history: self.history.or(lower.history),
            no_history: self.no_history || lower.no_history,
            backend: self.backend.or(lower.backend),
            audit_dir: self.audit_dir.or(lower.audit_dir),
            jobs: self.jobs.or(lower.jobs),
            config: self.config.or(lower.config),
        }
    }

    pub fn from_env() -> Result<Settings, CliError> {
        Ok(Settings {
            prover_path: env_var("ARBOR_PROVER_PATH")?,
            prelude: std::env::var_os("ARBOR_PRELUDE")
                .filter(|v| !v.is_empty())
                .map(|v| std::env::split_paths(&v).collect()),
            model: env_var("ARBOR_MODEL")?,
            endpoint: env_var("ARBOR_ENDPOINT")?,
            temperature: env_var("ARBOR_TEMPERATURE")?,
            max_tokens: env_var("ARBOR_MAX_TOKENS")?,
            auth_token_env: env_var("ARBOR_AUTH_TOKEN_ENV")?,
            err_threshold: env_var("ARBOR_ERR_THRESHOLD")?,
            max_attempts: env_var("ARBOR_MAX_ATTEMPTS")?,
            timeout: env_var("ARBOR_TIMEOUT")?,
            max_steps: env_var("ARBOR_MAX_STEPS")?,
            wall_clock: env_var("ARBOR_WALL_CLOCK")?,
            prompt_budget: env_var("ARBOR_PROMPT_BUDGET")?,
            history: env_var(HISTORY_ENV_VAR)?,
            no_history: env_var::<bool>("ARBOR_NO_HISTORY")?.unwrap_or(false),
            backend: env_var("ARBOR_BACKEND")?,
            audit_dir: env_var("ARBOR_AUDIT_DIR")?,
            jobs: env_var("ARBOR_JOBS")?,
            config: env_var(CONFIG_ENV_VAR)?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies the environment and config-file layers beneath `self`.
    pub fn layered(self) -> Result<Settings, CliError> {
        let env = Settings::from_env()?;
        let file = match self.config.clone().or(env.config.clone()) {
            Some(p) => Settings::from_file(&p)?,
            None => Settings::default(),
        };
        Ok(self.or(env).or(file))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Live,
    Replay(PathBuf),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(BackendSpec::Live),
            _ => match s.strip_prefix("replay:") {
                Some(p) if !p.is_empty() => Ok(BackendSpec::Replay(PathBuf::from(p))),
                _ => Err(format!("unknown backend `{s}` (expected live or replay:<path>)")),
            },
        }
    }
}

impl BackendSpec {
    /// A fresh backend for `lemma`. A replay directory supplies
    /// `<lemma>.completions`; a missing file there yields an empty script.
    pub fn open(&self, lemma: &str) -> Result<Box<dyn Backend>, CliError> {
        match self {
            BackendSpec::Live => Ok(Box::new(
                LiveBackend::new(LIVE_REQUEST_TIMEOUT).map_err(config_err)?,
            )),
            BackendSpec::Replay(path) if path.is_dir() => {
                let file = path.join(format!("{lemma}.{FIXTURE_EXTENSION}"));
                if file.exists() {
                    Ok(Box::new(ScriptedBackend::from_fixture(&file).map_err(config_err)?))
                } else {
                    Ok(Box::new(ScriptedBackend::default()))
                }
            }
            BackendSpec::Replay(path) => Ok(Box::new(
                ScriptedBackend::from_fixture(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            )),
        }
    }

    fn check(&self) -> Result<(), CliError> {
        match self {
            BackendSpec::Replay(p) if !p.exists() => Err(CliError::Config(format!(
                "replay fixture {} does not exist",
                p.display()
            ))),
            _ => Ok(()),
        }
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: RunConfig,
    pub backend: BackendSpec,
    pub jobs: usize,
}

impl Settings {
    pub fn resolve(self) -> Result<Resolved, CliError> {
        let s = self.layered()?;
        let defaults = RunConfig::default();
        let mut prover = ProverConfig::default();
        if let Some(p) = s.prover_path {
            prover.executable_path = p;
        }
        if let Some(p) = s.prelude {
            prover.prelude_files = p;
        }
        if let Some(t) = s.timeout {
            prover.sentence_timeout = Duration::from_secs(t);
        }
        let g = GenerationConfig::default();
        let generation = GenerationConfig {
            model_id: s.model.unwrap_or(g.model_id),
            temperature: s.temperature.unwrap_or(g.temperature),
            max_output_tokens: s.max_tokens.unwrap_or(g.max_output_tokens),
            endpoint: s.endpoint.unwrap_or(g.endpoint),
            auth_token_env_var: s.auth_token_env.unwrap_or(g.auth_token_env_var),
        };
        let t = Thresholds::default();
        let thresholds = Thresholds {
            same_error_before_search: s.err_threshold.unwrap_or(t.same_error_before_search),
            max_attempts_per_node: s.max_attempts.unwrap_or(t.max_attempts_per_node),
            max_total_steps: s.max_steps.unwrap_or(t.max_total_steps),
            wall_clock_budget: s
                .wall_clock
                .map(Duration::from_secs)
                .unwrap_or(t.wall_clock_budget),
        };
        let run = RunConfig {
            prover,
            generation,
            thresholds,
            history_path: s.history.unwrap_or(defaults.history_path),
            history_enabled: !s.no_history,
            audit_dir: s.audit_dir.unwrap_or(defaults.audit_dir),
            prompt_budget: s.prompt_budget.unwrap_or(defaults.prompt_budget),
            context_capacity: defaults.context_capacity,
            retry: defaults.retry,
        };
        run.validate().map_err(CliError::Config)?;
        let backend: BackendSpec = s
            .backend
            .as_deref()
            .unwrap_or("live")
            .parse()
            .map_err(CliError::Config)?;
        backend.check()?;
        let jobs = s.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok(Resolved { run, backend, jobs })
    }
}

fn read_source(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn summary_line(name: &str, result: &RunResult, certificate: Option<&Path>) -> String {
    let s = result.stats();
    match result {
        RunResult::Proved { .. } => format!(
            "{name}: Proved in {} steps ({} attempts, {} failed, {} queries, {:.2}s) -> {}",
            s.proof_steps,
            s.total_attempts,
            s.failed_attempts,
            s.queries_issued,
            s.wall_time.as_secs_f64(),
            certificate.map(|p| p.display().to_string()).unwrap_or_default()
        ),
        RunResult::Failed { reason, detail, .. } => format!(
            "{name}: Failed {reason:?} ({} attempts, {} failed, {} queries, {:.2}s): {detail}",
            s.total_attempts,
            s.failed_attempts,
            s.queries_issued,
            s.wall_time.as_secs_f64()
        ),
    }
}

pub fn cmd_prove(args: ProveArgs) -> Result<i32, CliError> {
    let resolved = args.settings.resolve()?;
    let source = read_source(&args.source)?;
    let file = SourceFile::parse(&source).map_err(config_err)?;
    let names: Vec<String> = match &args.lemma {
        Some(l) => {
            if file.lemma(l).is_none() {
                return Err(CliError::Config(format!(
                    "lemma `{l}` not found in {}",
                    args.source.display()
                )));
            }
            vec![l.clone()]
        }
        None => file
            .lemmas
            .iter()
            .filter(|l| !l.closed)
            .map(|l| l.name.clone())
            .collect(),
    };
    let history = resolved.run.open_history().map_err(|e| CliError::Failure(e.to_string()))?;
    let mut all_proved = true;
    for name in names {
        let mut backend = resolved.backend.open(&name)?;
        let report = prove_lemma(&source, &name, &resolved.run, &history, &mut *backend);
        let bundle = write_audit(&report, &resolved.run.audit_dir)
            .map_err(|e| CliError::Failure(e.to_string()))?;
        println!(
            "{}",
            summary_line(&name, &report.result, bundle.certificate.as_deref())
        );
        all_proved &= report.result.is_proved();
    }
    Ok(if all_proved { EXIT_OK } else { EXIT_FAILURE })
}

pub fn cmd_replay(args: ReplayArgs) -> Result<i32, CliError> {
    let resolved = args.settings.resolve()?;
    let source = read_source(&args.source)?;
    let text = read_source(&args.certificate)?;
    let script = match ProofScript::from_certificate(&text) {
        Ok(s) => s,
        Err(e) => {
            println!("{}: unreadable certificate: {e}", args.lemma);
            return Ok(EXIT_FAILURE);
        }
    };
    match replay_script(
        &resolved.run.prover,
        &source,
        &args.lemma,
        &script.sentences,
        Transcript::new(),
    ) {
        Ok(Verdict::Verified) => {
            println!("{}: Verified ({} sentences)", args.lemma, script.sentences.len());
            Ok(EXIT_OK)
        }
        Ok(Verdict::RejectedAt { index, message }) => {
            println!("{}: RejectedAt {index}: {message}", args.lemma);
            Ok(EXIT_FAILURE)
        }
        Err(e) => {
            println!("{}: {e}", args.lemma);
            Ok(EXIT_FAILURE)
        }
    }
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

pub fn cmd_batch(args: BatchArgs) -> Result<i32, CliError> {
    let resolved = args.settings.resolve()?;
    let manifest = CorpusManifest::load(&args.manifest).map_err(config_err)?;
    let edges = args.bucket_edges.unwrap_or_else(|| DEFAULT_BUCKET_EDGES.to_vec());
    let history = resolved.run.open_history().map_err(|e| CliError::Failure(e.to_string()))?;
    let spec = resolved.backend.clone();
    let factory = move |e: &ManifestEntry| -> Box<dyn Backend> {
        spec.open(&e.lemma_name)
            .unwrap_or_else(|_| Box::new(ScriptedBackend::default()))
    };
    let out = corpus::run_batch(&manifest, &resolved.run, &history, resolved.jobs, &edges, &factory)
        .map_err(|e| CliError::Failure(e.to_string()))?;
    println!(
        "{:<32} {:<22} {:<20} {:>9} {:>6} {:>8} {:>7}",
        "lemma", "category", "result", "time(s)", "steps", "attempts", "queries"
    );
    for r in &out.records {
        let result = match r.failure {
            None => "Proved".to_string(),
            Some(f) => format!("Failed {f:?}"),
        };
        println!(
            "{:<32} {:<22} {:<20} {:>9.3} {:>6} {:>8} {:>7}",
            r.name,
            r.category.map(|c| format!("{c:?}")).unwrap_or_else(|| "-".into()),
            result,
            r.wall_time_secs,
            r.proof_steps,
            r.attempts,
            r.queries
        );
    }
    let s = &out.summary;
    println!(
        "proved {}/{} (success rate {:.1}%), average time {} s, average steps {}",
        s.proved,
        s.total,
        100.0 * s.success_rate,
        fmt_opt(s.average_time_secs, 3),
        fmt_opt(s.average_steps, 2)
    );
    for g in &s.by_category {
        println!("  category {:<22} {}/{}", g.label, g.proved, g.total);
    }
    for g in &s.by_complexity {
        println!("  terms {:<10} {}/{}", g.label, g.proved, g.total);
    }
    println!("records: {}", out.records_path.display());
    println!("summary: {}", out.summary_path.display());
    Ok(EXIT_OK)
}

pub fn cmd_stats(args: StatsArgs) -> Result<i32, CliError> {
    let manifest = CorpusManifest::load(&args.manifest).map_err(config_err)?;
    let term_edges = args.bucket_edges.unwrap_or_else(|| DEFAULT_BUCKET_EDGES.to_vec());
    let hyp_edges = args
        .hypothesis_edges
        .unwrap_or_else(|| DEFAULT_HYPOTHESIS_EDGES.to_vec());
    let report = corpus::corpus_stats(&manifest, &term_edges, &hyp_edges);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(EXIT_OK)
}

pub fn cmd_history(args: HistoryArgs) -> Result<i32, CliError> {
    let s = args.settings.layered()?;
    let path = s
        .history
        .unwrap_or_else(|| RunConfig::default().history_path);
    let mut db = HistoryDb::load(&path).map_err(|e| CliError::Failure(e.to_string()))?;
    match args.action {
        HistoryAction::List => {
            println!("{:<40} {:>5}", "theorem", "steps");
            for (name, steps) in db.theorems() {
                println!("{name:<40} {steps:>5}");
            }
            Ok(EXIT_OK)
        }
        HistoryAction::Show { theorem } => {
            let steps = db.steps_of(&theorem);
            if steps.is_empty() {
                eprintln!("no theorem `{theorem}` in {}", path.display());
                return Ok(EXIT_FAILURE);
            }
            for r in steps {
                println!("#{} {}", r.tactic_id, r.tactic);
                println!("    before: {}", r.goal_before.replace('\n', " | "));
                println!("    after:  {}", r.goal_after.replace('\n', " | "));
                if !r.hypotheses_added.is_empty() {
                    println!("    added:  {}", r.hypotheses_added.join("; "));
                }
                if !r.hypotheses_removed.is_empty() {
                    println!("    removed: {}", r.hypotheses_removed.join("; "));
                }
            }
            Ok(EXIT_OK)
        }
        HistoryAction::Clear { yes } => {
            if !yes {
                return Err(CliError::Config("refusing to clear history without --yes".into()));
            }
            db.clear().map_err(|e| CliError::Failure(e.to_string()))?;
            println!("cleared {}", path.display());
            Ok(EXIT_OK)
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Prove(a) => cmd_prove(a),
        Command::Replay(a) => cmd_replay(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Stats(a) => cmd_stats(a),
        Command::History(a) => cmd_history(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("arbor: {e}");
        e.exit_code()
    })
}

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

/// Executable name that selects the built-in in-memory prover.
pub const MOCK_EXECUTABLE: &str = "mock";

pub const DEFAULT_SENTENCE_TIMEOUT: Duration = Duration::from_secs(60);

/// Maximum number of entries kept from one query.
pub const QUERY_RESULT_CAP: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct ProverConfig {
    /// Path to `coqtop`, or [`MOCK_EXECUTABLE`].
    pub executable_path: PathBuf,
    pub prelude_files: Vec<PathBuf>,
    pub sentence_timeout: Duration,
    pub working_directory: PathBuf,
}

impl Default for ProverConfig {
    fn default() -> Self {
        Self {
            executable_path: PathBuf::from("coqtop"),
            prelude_files: Vec::new(),
            sentence_timeout: DEFAULT_SENTENCE_TIMEOUT,
            working_directory: PathBuf::from("."),
        }
    }
}

impl ProverConfig {
    pub fn mock() -> Self {
        Self {
            executable_path: PathBuf::from(MOCK_EXECUTABLE),
            ..Self::default()
        }
    }

    pub fn is_mock(&self) -> bool {
        self.executable_path.as_os_str() == MOCK_EXECUTABLE
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub names: Vec<String>,
    pub statement: String,
}

impl Hypothesis {
    /// Parses the prover's `x y : T` rendering. Local definitions
    /// (`x := v : T`) keep everything after the first name in the statement.
    pub fn parse(line: &str) -> Option<Self> {
        let line = line.trim();
        let colon = line.find(" : ").map(|i| (i, 3)).or_else(|| {
            line.find(':')
                .filter(|&i| !line[i + 1..].starts_with('='))
                .map(|i| (i, 1))
        })?;
        let (head, tail) = (&line[..colon.0], &line[colon.0 + colon.1..]);
        let (names_part, statement) = match head.find(":=") {
            Some(d) => (&head[..d], format!("{} : {}", head[d..].trim(), tail.trim())),
            None => (head, tail.trim().to_string()),
        };
        let names: Vec<String> = names_part
            .split([' ', ','])
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if names.is_empty() || statement.is_empty() {
            return None;
        }
        Some(Self { names, statement })
    }

    pub fn render(&self) -> String {
        format!("{} : {}", self.names.join(" "), self.statement)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct GoalState {
    pub hypotheses: Vec<Hypothesis>,
    pub conclusion: String,
    pub goal_id: String,
}

impl GoalState {
    pub fn new(hypotheses: Vec<Hypothesis>, conclusion: impl Into<String>) -> Self {
        Self {
            hypotheses,
            conclusion: conclusion.into(),
            goal_id: String::new(),
        }
    }

    /// Text equality of two goals, ignoring their ids.
    pub fn same_text(&self, other: &GoalState) -> bool {
        self.hypotheses == other.hypotheses && self.conclusion == other.conclusion
    }

    /// Multi-line rendering in the prover's usual layout.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for h in &self.hypotheses {
            s.push_str(&h.render());
            s.push('\n');
        }
        s.push_str("============================\n");
        s.push_str(&self.conclusion);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProverReply {
    /// Goals remain; `open_goals` lists every remaining goal, focused first.
    Advanced { open_goals: Vec<GoalState> },
    Qed,
    /// The sentence was refused and the prover state is unchanged.
    Failure { message: String, raw: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryKind {
    Search,
    Print,
    Locate,
    About,
    Check,
}

impl QueryKind {
    pub const ALL: [QueryKind; 5] = [
        QueryKind::Search,
        QueryKind::Print,
        QueryKind::Locate,
        QueryKind::About,
        QueryKind::Check,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            QueryKind::Search => "Search",
            QueryKind::Print => "Print",
            QueryKind::Locate => "Locate",
            QueryKind::About => "About",
            QueryKind::Check => "Check",
        }
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for QueryKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryKind::ALL
            .into_iter()
            .find(|k| k.keyword() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub name: String,
    pub statement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryResult {
    pub entries: Vec<QueryEntry>,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Verified,
    RejectedAt { index: usize, message: String },
}

impl Verdict {
    pub fn is_verified(&self) -> bool {
        matches!(self, Verdict::Verified)
    }
}

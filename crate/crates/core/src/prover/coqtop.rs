//! `coqtop -emacs` REPL client.
//!
//! Each sentence is written on its own line; the reply is everything up to
//! the next `</prompt>` marker. The prompt carries the state number used for
//! `BackTo`. Tactics run under `Timeout n` so a slow tactic fails without
//! changing state; a reply that never arrives kills the process.

use super::{Engine, EngineError, ExecOutcome, Hypothesis, LemmaSource, ProverConfig, ProverError, RawGoal};
use crate::source::collapse_whitespace;
use std::io::{Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

const PROMPT_END: &str = "</prompt>";
const GRACE: Duration = Duration::from_secs(5);
/// Unfocused goals beyond this many are reported without hypotheses.
const SHOW_LIMIT: usize = 8;

pub struct CoqtopEngine {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<String>,
    pending: String,
    timeout: Duration,
    /// Prover state number before each applied sentence.
    states: Vec<u64>,
    state: u64,
    closed: bool,
}

fn reader(mut r: impl Read + Send + 'static, tx: std::sync::mpsc::Sender<String>) {
    thread::spawn(move || {
        let mut buf = [0u8; 4096];
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if tx.send(String::from_utf8_lossy(&buf[..n]).into_owned()).is_err() {
                        break;
                    }
                }
            }
        }
    });
}

/// Extracts the state number from `<prompt>name < 12 |name| 0 < </prompt>`.
pub fn prompt_state(prompt: &str) -> Option<u64> {
    let inner = prompt.split("<prompt>").nth(1)?;
    let mut parts = inner.split('<');
    parts.next()?;
    parts.next()?.split_whitespace().next()?.parse().ok()
}

/// Pulls the error message out of a reply, if it reports one.
pub fn error_message(reply: &str) -> Option<String> {
    let idx = reply.find("Error:")?;
    Some(collapse_whitespace(&reply[idx + "Error:".len()..]))
}

/// Parses the prover's goal display into goals. Only the focused goal shows
/// hypotheses; the others carry their conclusions.
pub fn parse_goals(reply: &str) -> Vec<RawGoal> {
    let text = reply.replace("\r", "");
    if text.contains("No more goals") || text.contains("No more subgoals") {
        return Vec::new();
    }
    let mut goals = Vec::new();
    let Some(sep) = text.find("============================") else {
        return goals;
    };
    let head = &text[..sep];
    let mut hyps: Vec<Hypothesis> = Vec::new();
    let mut current = String::new();
    for line in head.lines().skip_while(|l| !l.trim().ends_with("goal") && !l.trim().ends_with("goals")).skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        // continuation lines of a hypothesis are indented deeper
        if line.starts_with("    ") && !current.is_empty() {
            current.push(' ');
            current.push_str(line.trim());
            continue;
        }
        if let Some(h) = Hypothesis::parse(&current) {
            hyps.push(h);
        }
        current = line.trim().to_string();
    }
    if let Some(h) = Hypothesis::parse(&current) {
        hyps.push(h);
    }
    let tail = &text[sep + "============================".len()..];
    let mut sections = tail.split("\ngoal ");
    let first = sections.next().unwrap_or("");
    goals.push(RawGoal {
        hypotheses: hyps,
        conclusion: collapse_whitespace(first.split("\n\n").next().unwrap_or(first)),
    });
    for s in sections {
        let body = s.split_once("is:").map(|(_, b)| b).unwrap_or(s);
        goals.push(RawGoal {
            hypotheses: Vec::new(),
            conclusion: collapse_whitespace(body.split("\n\n").next().unwrap_or(body)),
        });
    }
    goals
}

impl CoqtopEngine {
    pub fn start(config: &ProverConfig, source: &LemmaSource) -> Result<Self, ProverError> {
        let mut child = Command::new(&config.executable_path)
            .args(["-quiet", "-emacs"])
            .current_dir(&config.working_directory)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| {
                ProverError::ProcessSpawnFailure(format!(
                    "{}: {e}",
                    config.executable_path.display()
                ))
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let (tx, rx) = channel();
        reader(child.stdout.take().expect("piped stdout"), tx.clone());
        reader(child.stderr.take().expect("piped stderr"), tx);
        let mut engine = Self {
            child,
            stdin,
            rx,
            pending: String::new(),
            timeout: config.sentence_timeout,
            states: Vec::new(),
            state: 0,
            closed: false,
        };
        let dead = |e: EngineError| ProverError::ProcessSpawnFailure(format!("{e:?}"));
        // initial prompt
        engine.send("").map_err(dead)?;
        let compile = |engine: &mut Self, sentence: &str| -> Result<(), ProverError> {
            let reply = engine.send(sentence).map_err(dead)?;
            match error_message(&reply) {
                Some(msg) => Err(ProverError::CompilationFailure(msg)),
                None => Ok(()),
            }
        };
        for p in &config.prelude_files {
            compile(&mut engine, &format!("Load \"{}\".", p.display()))?;
        }
        let lemma = source
            .file
            .lemma(&source.name)
            .ok_or_else(|| ProverError::LemmaNotFound(source.name.clone()))?;
        let prefix = source
            .file
            .prefix_for(&source.name)
            .ok_or_else(|| ProverError::LemmaNotFound(source.name.clone()))?;
        for s in prefix {
            compile(&mut engine, &s)?;
        }
        compile(&mut engine, &source.file.split.sentences[lemma.index])?;
        compile(&mut engine, "Proof.")?;
        Ok(engine)
    }

    /// Writes `sentence` and waits for the next prompt.
    fn send(&mut self, sentence: &str) -> Result<String, EngineError> {
        if self.closed {
            return Err(EngineError::Dead("coqtop closed".into()));
        }
        if !sentence.is_empty() {
            writeln!(self.stdin, "{sentence}")
                .and_then(|_| self.stdin.flush())
                .map_err(|e| EngineError::Dead(e.to_string()))?;
        }
        let deadline = Instant::now() + self.timeout + GRACE;
        loop {
            if let Some(end) = self.pending.find(PROMPT_END) {
                let reply: String = self.pending.drain(..end + PROMPT_END.len()).collect();
                // stderr may trail the prompt slightly
                while let Ok(extra) = self.rx.recv_timeout(Duration::from_millis(20)) {
                    self.pending.push_str(&extra);
                }
                let (body, prompt) = match reply.rfind("<prompt>") {
                    Some(i) => (reply[..i].to_string(), reply[i..].to_string()),
                    None => (reply.clone(), String::new()),
                };
                if let Some(s) = prompt_state(&prompt) {
                    self.state = s;
                }
                let mut body = body;
                if !self.pending.contains(PROMPT_END) {
                    body.push_str(&std::mem::take(&mut self.pending));
                }
                return Ok(body);
            }
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(chunk) => self.pending.push_str(&chunk),
                Err(RecvTimeoutError::Timeout) => {
                    self.close();
                    return Err(EngineError::Dead("no reply before deadline; process killed".into()));
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.closed = true;
                    return Err(EngineError::Dead("coqtop exited".into()));
                }
            }
        }
    }

    fn show(&mut self) -> Result<Vec<RawGoal>, EngineError> {
        let reply = self.send("Show.")?;
        let mut goals = parse_goals(&reply);
        for i in 1..goals.len().min(SHOW_LIMIT) {
            let reply = self.send(&format!("Show {}.", i + 1))?;
            if let Some(g) = parse_goals(&reply).into_iter().next() {
                goals[i] = g;
            }
        }
        Ok(goals)
    }
}

impl Engine for CoqtopEngine {
    fn exec(&mut self, sentence: &str) -> Result<ExecOutcome, EngineError> {
        let before = self.state;
        let wrapped = if super::is_structure_marker(sentence) {
            sentence.to_string()
        } else {
            format!("Timeout {} {}", self.timeout.as_secs().max(1), sentence)
        };
        let reply = self.send(&wrapped)?;
        if let Some(message) = error_message(&reply) {
            if message.contains("Timeout!") || message.contains("timed out") {
                return Err(EngineError::Timeout);
            }
            return Ok(ExecOutcome::Failed { message, raw: reply });
        }
        self.states.push(before);
        let goals = self.show()?;
        Ok(ExecOutcome::Accepted { goals, raw: reply })
    }

    fn query(&mut self, sentence: &str) -> Result<String, Result<String, EngineError>> {
        let reply = self.send(sentence).map_err(Err)?;
        match error_message(&reply) {
            Some(m) => Err(Ok(m)),
            None => Ok(reply),
        }
    }

    fn goals(&mut self) -> Result<Vec<RawGoal>, EngineError> {
        self.show()
    }

    fn undo(&mut self, n: usize) -> Result<(), EngineError> {
        if n == 0 || n > self.states.len() {
            return Err(EngineError::Dead("undo past proof start".into()));
        }
        let target = self.states[self.states.len() - n];
        let reply = self.send(&format!("BackTo {target}."))?;
        if let Some(m) = error_message(&reply) {
            return Err(EngineError::Dead(m));
        }
        self.states.truncate(self.states.len() - n);
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        let reply = self.send("Qed.").map_err(|e| format!("{e:?}"))?;
        match error_message(&reply) {
            Some(m) => Err(m),
            None => Ok(()),
        }
    }

    fn close(&mut self) {
        if !self.closed {
            self.closed = true;
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

impl Drop for CoqtopEngine {
    fn drop(&mut self) {
        self.close();
    }
}

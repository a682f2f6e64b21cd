//! Append-only transcript of everything exchanged with the prover and the
//! generation backend during one run.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Sentence transmitted to the prover.
    Send,
    /// Raw prover output for the preceding sentence.
    Recv,
    /// Sentence refused before transmission.
    Rejected,
    /// Raw model completion.
    Completion,
    /// Feedback-controller directive.
    Directive,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Channel::Send => "SEND",
            Channel::Recv => "RECV",
            Channel::Rejected => "REJECTED",
            Channel::Completion => "COMPLETION",
            Channel::Directive => "DIRECTIVE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub channel: Channel,
    pub text: String,
}

#[derive(Default)]
struct Inner {
    records: Vec<Record>,
    file: Option<File>,
}

/// Cheaply cloneable handle; clones share the same log.
#[derive(Clone, Default)]
pub struct Transcript {
    inner: Arc<Mutex<Inner>>,
    path: Option<PathBuf>,
}

impl fmt::Debug for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Transcript").field("path", &self.path).finish()
    }
}

impl Transcript {
    /// In-memory only.
    pub fn new() -> Self {
        Self::default()
    }

    /// Also appends every record to `path`.
    pub fn with_file(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            inner: Arc::new(Mutex::new(Inner {
                records: Vec::new(),
                file: Some(file),
            })),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn log(&self, channel: Channel, text: &str) {
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(file) = inner.file.as_mut() {
            // one write per record keeps records whole under O_APPEND
            let block = format!("=== {channel}\n{text}\n");
            let _ = file.write_all(block.as_bytes());
        }
        inner.records.push(Record {
            channel,
            text: text.to_string(),
        });
    }

    pub fn records(&self) -> Vec<Record> {
        self.inner
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .records
            .clone()
    }

    /// The same text `with_file` writes.
    pub fn render(&self) -> String {
        self.records()
            .iter()
            .map(|r| format!("=== {}\n{}\n", r.channel, r.text))
            .collect()
    }

    /// Every sentence that actually reached the prover.
    pub fn sent(&self) -> Vec<String> {
        self.records()
            .into_iter()
            .filter(|r| r.channel == Channel::Send)
            .map(|r| r.text)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_memory_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.log");
        let t = Transcript::with_file(&path).unwrap();
        let clone = t.clone();
        t.log(Channel::Send, "intros.");
        clone.log(Channel::Recv, "1 goal");
        assert_eq!(t.sent(), vec!["intros."]);
        assert_eq!(t.records().len(), 2);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "=== SEND\nintros.\n=== RECV\n1 goal\n");
        assert_eq!(t.render(), text);
    }
}

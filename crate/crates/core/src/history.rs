//! Step records of proved lemmas, persisted as one JSON document, and
//! retrieval of the most similar past steps.

use crate::prover::GoalState;
use crate::tokens;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const HISTORY_ENV_VAR: &str = "PROOF_HISTORY_PATH";
pub const DEFAULT_TOP_K: usize = 5;
const SNIPPET_WIDTH: usize = 240;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct StepRecord {
    pub theorem_name: String,
    pub tactic_id: u64,
    pub tactic: String,
    pub goal_before: String,
    pub goal_after: String,
    pub hypotheses_before: Vec<String>,
    pub hypotheses_added: Vec<String>,
    pub hypotheses_removed: Vec<String>,
}

impl StepRecord {
    /// Prompt snippet: how a past goal was advanced.
    pub fn render(&self) -> String {
        use crate::tree::midline_truncate;
        format!(
            "[{}#{}] goal: {} => tactic: {}",
            self.theorem_name,
            self.tactic_id,
            midline_truncate(&self.goal_before, SNIPPET_WIDTH),
            self.tactic
        )
    }
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("theorem `{0}` is already recorded")]
    DuplicateTheorem(String),
    #[error("no steps to record")]
    EmptyProof,
    #[error("steps must be numbered 0.. in order; found id {found} at position {position}")]
    StepOrder { position: usize, found: u64 },
    #[error("history schema violation{}: {message}", .index.map(|i| format!(" at record {i}")).unwrap_or_default())]
    SchemaViolation {
        index: Option<usize>,
        message: String,
    },
    #[error("history storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HistoryDb {
    records: Vec<StepRecord>,
    storage_path: Option<PathBuf>,
}

impl HistoryDb {
    /// A database that is never flushed to disk.
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn storage_path(&self) -> Option<&Path> {
        self.storage_path.as_deref()
    }

    /// Loads `path`; a missing file is an empty database bound to `path`.
    pub fn load(path: &Path) -> Result<Self, HistoryError> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(Self {
                    records: Vec::new(),
                    storage_path: Some(path.to_path_buf()),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let records = Self::parse(&text)?;
        Ok(Self {
            records,
            storage_path: Some(path.to_path_buf()),
        })
    }

    pub fn parse(text: &str) -> Result<Vec<StepRecord>, HistoryError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| HistoryError::SchemaViolation {
                index: None,
                message: e.to_string(),
            })?;
        let array = value
            .get("records")
            .and_then(|r| r.as_array())
            .ok_or_else(|| HistoryError::SchemaViolation {
                index: None,
                message: "expected an object with a `records` array".into(),
            })?;
        let mut seen = BTreeMap::new();
        let mut records = Vec::with_capacity(array.len());
        for (index, v) in array.iter().enumerate() {
            let r: StepRecord = serde_json::from_value(v.clone()).map_err(|e| {
                HistoryError::SchemaViolation {
                    index: Some(index),
                    message: e.to_string(),
                }
            })?;
            let bad = |message: &str| HistoryError::SchemaViolation {
                index: Some(index),
                message: message.into(),
            };
            if r.tactic.is_empty() {
                return Err(bad("empty tactic"));
            }
            if r.goal_before.is_empty() {
                return Err(bad("empty goal-before"));
            }
            if seen
                .insert((r.theorem_name.clone(), r.tactic_id), ())
                .is_some()
            {
                return Err(bad("duplicate (theorem-name, tactic-id)"));
            }
            records.push(r);
        }
        Ok(records)
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Doc<'a> {
            records: &'a [StepRecord],
        }
        serde_json::to_string_pretty(&Doc {
            records: &self.records,
        })
        .expect("records serialize")
    }

    /// Writes to the storage path via a temporary file and a rename.
    pub fn save(&self) -> Result<(), HistoryError> {
        let Some(path) = &self.storage_path else {
            return Ok(());
        };
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(self.to_json().as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn contains_theorem(&self, name: &str) -> bool {
        self.records.iter().any(|r| r.theorem_name == name)
    }

    /// Appends the steps of a newly proved theorem and flushes.
    pub fn record_proof(&mut self, theorem: &str, steps: Vec<StepRecord>) -> Result<(), HistoryError> {
        if steps.is_empty() {
            return Err(HistoryError::EmptyProof);
        }
        if self.contains_theorem(theorem) {
            return Err(HistoryError::DuplicateTheorem(theorem.to_string()));
        }
        for (position, s) in steps.iter().enumerate() {
            if s.tactic_id != position as u64 || s.theorem_name != theorem {
                return Err(HistoryError::StepOrder {
                    position,
                    found: s.tactic_id,
                });
            }
        }
        let before = self.records.len();
        self.records.extend(steps);
        if let Err(e) = self.save() {
            self.records.truncate(before);
            return Err(e);
        }
        Ok(())
    }

    /// Up to `k` records ranked by identifier overlap between their goal and
    /// `goal`'s conclusion; later records win ties.
    pub fn top_k_similar(&self, goal: &GoalState, k: usize) -> Vec<&StepRecord> {
        let query = tokens::identifier_set(&goal.conclusion);
        let mut scored: Vec<(usize, usize, &StepRecord)> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let ids = tokens::identifier_set(&r.goal_before);
                (tokens::overlap(&ids, &query), i, r)
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.cmp(&a.1)));
        scored.into_iter().take(k).map(|(_, _, r)| r).collect()
    }

    /// Theorem names with their step counts, in insertion order.
    pub fn theorems(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in &self.records {
            match out.iter_mut().find(|(n, _)| *n == r.theorem_name) {
                Some((_, c)) => *c += 1,
                None => out.push((r.theorem_name.clone(), 1)),
            }
        }
        out
    }

    pub fn steps_of(&self, theorem: &str) -> Vec<&StepRecord> {
        self.records
            .iter()
            .filter(|r| r.theorem_name == theorem)
            .collect()
    }

    pub fn clear(&mut self) -> Result<(), HistoryError> {
        self.records.clear();
        self.save()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn step(theorem: &str, id: u64, goal: &str) -> StepRecord {
        StepRecord {
            theorem_name: theorem.into(),
            tactic_id: id,
            tactic: "lia.".into(),
            goal_before: goal.into(),
            goal_after: "no goals".into(),
            hypotheses_before: vec![],
            hypotheses_added: vec![],
            hypotheses_removed: vec![],
        }
    }

    #[test]
    fn record_and_duplicates() {
        let mut db = HistoryDb::in_memory();
        db.record_proof("t", vec![step("t", 0, "True")]).unwrap();
        assert_eq!(db.len(), 1);
        assert!(matches!(
            db.record_proof("t", vec![step("t", 0, "True")]),
            Err(HistoryError::DuplicateTheorem(_))
        ));
        assert!(matches!(db.record_proof("u", vec![]), Err(HistoryError::EmptyProof)));
        assert!(matches!(
            db.record_proof("u", vec![step("u", 1, "True")]),
            Err(HistoryError::StepOrder { .. })
        ));
    }

    #[test]
    fn save_load_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        let mut db = HistoryDb::load(&path).unwrap();
        assert!(db.is_empty());
        db.record_proof("t", vec![step("t", 0, "True"), step("t", 1, "x = x")])
            .unwrap();
        let again = HistoryDb::load(&path).unwrap();
        assert_eq!(again, db);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"theorem-name\""));
        assert!(text.contains("\"hypotheses-added\""));
    }

    #[test]
    fn truncated_file_is_schema_violation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        let mut db = HistoryDb::load(&path).unwrap();
        db.record_proof("t", vec![step("t", 0, "True")]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(
            HistoryDb::load(&path),
            Err(HistoryError::SchemaViolation { index: None, .. })
        ));
    }

    #[test]
    fn bad_record_reports_index() {
        let text = r#"{"records": [
            {"theorem-name":"t","tactic-id":0,"tactic":"lia.","goal-before":"x","goal-after":"",
             "hypotheses-before":[],"hypotheses-added":[],"hypotheses-removed":[]},
            {"theorem-name":"t","tactic-id":1,"tactic":"","goal-before":"x","goal-after":"",
             "hypotheses-before":[],"hypotheses-added":[],"hypotheses-removed":[]}
        ]}"#;
        assert!(matches!(
            HistoryDb::parse(text),
            Err(HistoryError::SchemaViolation { index: Some(1), .. })
        ));
    }

    #[test]
    fn top_k_basics() {
        let mut db = HistoryDb::in_memory();
        let g = GoalState::new(vec![], "True");
        assert!(db.top_k_similar(&g, 5).is_empty());
        db.record_proof("a", vec![step("a", 0, "P"), step("a", 1, "Q"), step("a", 2, "R")])
            .unwrap();
        let top = db.top_k_similar(&g, 5);
        assert_eq!(top.len(), 3);
        // all score zero: latest first
        assert_eq!(top[0].tactic_id, 2);
    }

    /// Hand-computed overlaps against the query `(Z.abs i1 >= 10)%Z`, whose
    /// identifiers are {Z.abs, i1, Z}:
    ///   r0 "(i1 <= 10)%Z"            -> {i1, Z}        = 2
    ///   r1 "(Z.abs x <= y)%Z"        -> {Z.abs, x, y, Z} = 2
    ///   r2 "(Z.abs i1 <= 9)%Z"       -> {Z.abs, i1, Z} = 3
    ///   r3 "x = y"                   -> {x, y}        = 0
    ///   r4 "(Z.quot x 2 = 0)%Z"      -> {Z.quot, x, Z} = 1
    /// Expected order: r2, r1 (later than r0), r0, r4, r3.
    #[test]
    fn top_k_hand_scored_fixture() {
        let mut db = HistoryDb::in_memory();
        let goals = [
            "(i1 <= 10)%Z",
            "(Z.abs x <= y)%Z",
            "(Z.abs i1 <= 9)%Z",
            "x = y",
            "(Z.quot x 2 = 0)%Z",
        ];
        let steps = goals
            .iter()
            .enumerate()
            .map(|(i, g)| step("f", i as u64, g))
            .collect();
        db.record_proof("f", steps).unwrap();
        let q = GoalState::new(vec![], "(Z.abs i1 >= 10)%Z");
        let ids: Vec<u64> = db.top_k_similar(&q, 5).iter().map(|r| r.tactic_id).collect();
        assert_eq!(ids, vec![2, 1, 0, 4, 3]);
        let ids3: Vec<u64> = db.top_k_similar(&q, 3).iter().map(|r| r.tactic_id).collect();
        assert_eq!(ids3, vec![2, 1, 0]);
    }

    #[test]
    fn listing_and_clear() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.json");
        let mut db = HistoryDb::load(&path).unwrap();
        db.record_proof("a", vec![step("a", 0, "P"), step("a", 1, "Q")]).unwrap();
        db.record_proof("b", vec![step("b", 0, "P")]).unwrap();
        assert_eq!(db.theorems(), vec![("a".to_string(), 2), ("b".to_string(), 1)]);
        db.clear().unwrap();
        assert!(HistoryDb::load(&path).unwrap().is_empty());
    }
}

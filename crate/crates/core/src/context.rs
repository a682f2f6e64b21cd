//! Declarations retrieved by context queries during one run, and the bounded
//! relevance-ordered subset that goes into each prompt.

use crate::prover::{GoalState, QueryKind, QueryResult};
use crate::tokens;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

pub const DEFAULT_CAPACITY: usize = 50;
const STATEMENT_WIDTH: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItemKind {
    Lemma,
    Definition,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SourceQuery {
    pub kind: QueryKind,
    pub argument: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ContextItem {
    pub name: String,
    pub statement: String,
    pub kind: ItemKind,
    pub source_query: SourceQuery,
    pub retrieved_at_step: u64,
}

impl ContextItem {
    pub fn render(&self) -> String {
        format!(
            "{} : {}",
            self.name,
            crate::tree::midline_truncate(&self.statement, STATEMENT_WIDTH)
        )
    }

    fn key(&self) -> (String, String) {
        (self.name.clone(), self.statement.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSet {
    items: Vec<ContextItem>,
    capacity: usize,
    #[serde(skip)]
    last_selected: BTreeSet<(String, String)>,
}

impl Default for ContextSet {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}

fn kind_for(query: QueryKind) -> ItemKind {
    match query {
        QueryKind::Search => ItemKind::Lemma,
        QueryKind::Print => ItemKind::Definition,
        _ => ItemKind::Other,
    }
}

impl ContextSet {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: Vec::new(),
            capacity: capacity.max(1),
            last_selected: BTreeSet::new(),
        }
    }

    pub fn items(&self) -> &[ContextItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Adds the new entries of `result`; returns how many were new.
    pub fn ingest_query_result(
        &mut self,
        kind: QueryKind,
        argument: &str,
        result: &QueryResult,
        step: u64,
    ) -> usize {
        let mut added = 0;
        let mut fresh = BTreeSet::new();
        for e in &result.entries {
            if e.name.is_empty() {
                continue;
            }
            let dup = self
                .items
                .iter()
                .any(|i| i.name == e.name && i.statement == e.statement);
            if dup {
                continue;
            }
            self.items.push(ContextItem {
                name: e.name.clone(),
                statement: e.statement.clone(),
                kind: kind_for(kind),
                source_query: SourceQuery {
                    kind,
                    argument: argument.to_string(),
                },
                retrieved_at_step: step,
            });
            fresh.insert((e.name.clone(), e.statement.clone()));
            added += 1;
        }
        while self.items.len() > self.capacity {
            self.evict_one(&fresh);
        }
        added
    }

    /// Drops the oldest-retrieved item that was not used by the last selection.
    /// Items added by the current ingest are spared unless nothing else is left.
    fn evict_one(&mut self, fresh: &BTreeSet<(String, String)>) {
        let oldest = |pred: &dyn Fn(&ContextItem) -> bool| {
            self.items
                .iter()
                .enumerate()
                .filter(|(_, i)| pred(i))
                .min_by_key(|(idx, i)| (i.retrieved_at_step, *idx))
                .map(|(idx, _)| idx)
        };
        let idx = oldest(&|i| !self.last_selected.contains(&i.key()) && !fresh.contains(&i.key()))
            .or_else(|| oldest(&|i| !fresh.contains(&i.key())))
            .or_else(|| oldest(&|_| true))
            .expect("non-empty when over capacity");
        self.items.remove(idx);
    }

    /// Ranks by identifier overlap with the goal, then by recency, and takes
    /// the longest prefix whose renderings fit in `budget` characters.
    pub fn select_for_prompt(&mut self, goal: &GoalState, budget: usize) -> Vec<ContextItem> {
        let mut goal_text = goal.conclusion.clone();
        for h in &goal.hypotheses {
            goal_text.push(' ');
            goal_text.push_str(&h.statement);
        }
        let goal_ids = tokens::identifier_set(&goal_text);
        let mut ranked: Vec<(usize, usize, &ContextItem)> = self
            .items
            .iter()
            .enumerate()
            .map(|(idx, i)| {
                let ids = tokens::identifier_set(&i.statement);
                (tokens::overlap(&ids, &goal_ids), idx, i)
            })
            .collect();
        ranked.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.2.retrieved_at_step.cmp(&a.2.retrieved_at_step))
                .then(b.1.cmp(&a.1))
        });
        let mut used = 0;
        let mut out = Vec::new();
        for (_, _, item) in ranked {
            let size = item.render().chars().count() + 1;
            if used + size > budget {
                break;
            }
            used += size;
            out.push(item.clone());
        }
        self.last_selected = out.iter().map(ContextItem::key).collect();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prover::QueryEntry;

    fn result(entries: &[(&str, &str)]) -> QueryResult {
        QueryResult {
            entries: entries
                .iter()
                .map(|(n, s)| QueryEntry {
                    name: n.to_string(),
                    statement: s.to_string(),
                })
                .collect(),
            raw: String::new(),
        }
    }

    const ABS_LE: (&str, &str) = ("Z.abs_le", "forall n m : Z, Z.abs n <= m <-> - m <= n <= m");

    #[test]
    fn ingest_and_dedup() {
        let mut set = ContextSet::default();
        let r = result(&[ABS_LE]);
        assert_eq!(set.ingest_query_result(QueryKind::Search, "(Z.abs _ <= _)", &r, 1), 1);
        assert_eq!(set.len(), 1);
        assert_eq!(set.ingest_query_result(QueryKind::Search, "(Z.abs _ <= _)", &r, 2), 0);
        assert_eq!(set.len(), 1);
        assert_eq!(set.items()[0].kind, ItemKind::Lemma);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut set = ContextSet::new(50);
        let names: Vec<String> = (0..60).map(|i| format!("l{i}")).collect();
        let entries: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "True")).collect();
        set.ingest_query_result(QueryKind::Search, "True", &result(&entries), 0);
        assert_eq!(set.len(), 50);
    }

    #[test]
    fn eviction_spares_recently_selected() {
        let mut set = ContextSet::new(2);
        set.ingest_query_result(QueryKind::Search, "a", &result(&[("a", "P a")]), 0);
        set.ingest_query_result(QueryKind::Search, "b", &result(&[("b", "P b")]), 1);
        let goal = GoalState::new(vec![], "P a");
        let sel = set.select_for_prompt(&goal, 1000);
        assert_eq!(sel[0].name, "a");
        // both were selected, so plain age decides: a goes first
        set.ingest_query_result(QueryKind::Search, "c", &result(&[("c", "Q")]), 2);
        let names: Vec<_> = set.items().iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, vec!["b", "c"]);
        let sel = set.select_for_prompt(&goal, 8);
        assert_eq!(sel.len(), 1);
        set.ingest_query_result(QueryKind::Search, "d", &result(&[("d", "R")]), 3);
        let names: Vec<_> = set.items().iter().map(|i| i.name.as_str()).collect();
        assert!(names.contains(&sel[0].name.as_str()));
    }

    /// Overlap scores computed by hand for this fixture:
    /// goal identifiers {Z.abs, i1, Z}.
    /// Z.abs_le -> {Z, Z.abs, n, m, forall}: shares Z.abs, Z = 2.
    /// Z.quot_lt -> {forall, a, b, Z, Z.quot}: shares Z = 1.
    /// Nat.add_0 -> {forall, n, Nat.add}: 0.
    #[test]
    fn ranking_matches_hand_scores() {
        let mut set = ContextSet::default();
        set.ingest_query_result(
            QueryKind::Search,
            "x",
            &result(&[
                ("Nat.add_0", "forall n, Nat.add n 0 = n"),
                ("Z.quot_lt", "forall a b : Z, 0 < b -> Z.quot a b < a"),
                ABS_LE,
            ]),
            0,
        );
        let goal = GoalState::new(vec![], "(Z.abs i1 >= 10)%Z");
        let sel = set.select_for_prompt(&goal, 10_000);
        let names: Vec<_> = sel.iter().map(|i| i.name.as_str()).collect();
        assert_eq!(names, vec!["Z.abs_le", "Z.quot_lt", "Nat.add_0"]);
        let one = set.select_for_prompt(&goal, sel[0].render().len() + 1);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].name, "Z.abs_le");
        assert!(ContextSet::default().select_for_prompt(&goal, 100).is_empty());
    }

    #[test]
    fn recency_breaks_ties() {
        let mut set = ContextSet::default();
        set.ingest_query_result(QueryKind::Search, "x", &result(&[("old", "Q")]), 1);
        set.ingest_query_result(QueryKind::Search, "x", &result(&[("new", "R")]), 5);
        let sel = set.select_for_prompt(&GoalState::new(vec![], "P"), 1000);
        assert_eq!(sel[0].name, "new");
    }
}

//! Explicit proof tree: nodes are goals, edges are tactic applications.
//!
//! A node is exactly one of an open leaf, a closed leaf (it carries the
//! tactic that discharged it) or an internal node (its children share the
//! tactic that produced them). Internal nodes are closed once every child
//! is closed.

use crate::prover::{GoalState, ProverReply};
use crate::source::{is_structure_marker, split_sentences};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Path from the root; the root is the empty path, displayed as `0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(Vec<usize>);

impl NodeId {
    pub fn root() -> Self {
        NodeId(Vec::new())
    }

    pub fn path(&self) -> &[usize] {
        &self.0
    }

    pub fn child(&self, i: usize) -> Self {
        let mut p = self.0.clone();
        p.push(i);
        NodeId(p)
    }

    pub fn parent(&self) -> Option<Self> {
        let (_, init) = self.0.split_last()?;
        Some(NodeId(init.to_vec()))
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0")?;
        for i in &self.0 {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('.');
        if parts.next() != Some("0") {
            return Err(format!("node id `{s}` must start with 0"));
        }
        parts
            .map(|p| p.parse::<usize>().map_err(|_| format!("bad node id `{s}`")))
            .collect::<Result<Vec<_>, _>>()
            .map(NodeId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub id: NodeId,
    pub goal: GoalState,
    pub status: NodeStatus,
    pub incoming_tactic: Option<String>,
    pub children: Vec<NodeId>,
    pub closing_tactic: Option<String>,
}

impl ProofNode {
    pub fn is_open_leaf(&self) -> bool {
        self.status == NodeStatus::Open && self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    LeafClosed,
    Branched(Vec<NodeId>),
    SubgoalReplaced(NodeId),
    Stayed,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("node {0} is not the focus")]
    NotFocused(NodeId),
    #[error("node {0} is already closed")]
    AlreadyClosed(NodeId),
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("reply reports {reported} goals but the tree has {open} open")]
    ReplyMismatch { open: usize, reported: usize },
    #[error("tree has open goals")]
    TreeIncomplete,
    #[error("schema violation: {0}")]
    SchemaViolation(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofTree {
    nodes: BTreeMap<NodeId, ProofNode>,
    root: NodeId,
    focus: Option<NodeId>,
}

/// Ordered proof-script sentences, including `{` / `}` focus markers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProofScript {
    pub sentences: Vec<String>,
}

impl ProofScript {
    /// Number of tactic sentences, markers excluded.
    pub fn tactic_count(&self) -> usize {
        self.sentences
            .iter()
            .filter(|s| !is_structure_marker(s))
            .count()
    }

    /// Certificate text: `Proof.`, the indented sentences, `Qed.`.
    pub fn to_certificate(&self) -> String {
        let mut out = String::from("Proof.\n");
        let mut depth = 1usize;
        for s in &self.sentences {
            if s == "}" {
                depth = depth.saturating_sub(1);
            }
            out.push_str(&"  ".repeat(depth));
            out.push_str(s);
            out.push('\n');
            if s == "{" {
                depth += 1;
            }
        }
        out.push_str("Qed.\n");
        out
    }

    /// Reads a certificate back; the surrounding `Proof.` and final `Qed.`
    /// are dropped, anything else is kept verbatim.
    pub fn from_certificate(text: &str) -> Result<Self, String> {
        let split = split_sentences(text).map_err(|e| e.to_string())?;
        let mut sentences = split.sentences;
        if let Some(r) = split.remainder {
            sentences.push(r);
        }
        if sentences.first().map(String::as_str) == Some("Proof.") {
            sentences.remove(0);
        }
        if matches!(sentences.last().map(String::as_str), Some("Qed.") | Some("Defined.")) {
            sentences.pop();
        }
        Ok(Self { sentences })
    }
}

const CONCLUSION_WIDTH: usize = 160;

/// Shortens `s` to at most `width` characters with an ellipsis in the middle.
pub fn midline_truncate(s: &str, width: usize) -> String {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() <= width {
        return s.to_string();
    }
    let keep = width.saturating_sub(3);
    let head = keep / 2;
    let tail = keep - head;
    let mut out: String = chars[..head].iter().collect();
    out.push_str("...");
    out.extend(&chars[chars.len() - tail..]);
    out
}

impl ProofTree {
    pub fn new(root_goal: GoalState) -> Self {
        let root = NodeId::root();
        let mut nodes = BTreeMap::new();
        nodes.insert(
            root.clone(),
            ProofNode {
                id: root.clone(),
                goal: root_goal,
                status: NodeStatus::Open,
                incoming_tactic: None,
                children: Vec::new(),
                closing_tactic: None,
            },
        );
        Self {
            nodes,
            focus: Some(root.clone()),
            root,
        }
    }

    pub fn root(&self) -> &ProofNode {
        &self.nodes[&self.root]
    }

    pub fn focus(&self) -> Option<&NodeId> {
        self.focus.as_ref()
    }

    pub fn focused_node(&self) -> Option<&ProofNode> {
        self.focus.as_ref().map(|f| &self.nodes[f])
    }

    pub fn node(&self, id: &NodeId) -> Option<&ProofNode> {
        self.nodes.get(id)
    }

    /// Nodes in depth-first, left-to-right order.
    pub fn nodes(&self) -> impl Iterator<Item = &ProofNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn open_leaves(&self) -> impl Iterator<Item = &ProofNode> {
        self.nodes.values().filter(|n| n.is_open_leaf())
    }

    /// Leftmost open leaf in depth-first order; this is the goal the prover
    /// focuses by default.
    pub fn next_open_goal(&self) -> Option<NodeId> {
        self.open_leaves().next().map(|n| n.id.clone())
    }

    pub fn is_complete(&self) -> bool {
        self.nodes.values().all(|n| n.status == NodeStatus::Closed)
    }

    /// Updates the tree with the prover's reply to `tactic` at `node`.
    pub fn record_application(
        &mut self,
        node: &NodeId,
        tactic: &str,
        reply: &ProverReply,
    ) -> Result<Outcome, TreeError> {
        let target = self
            .nodes
            .get(node)
            .ok_or_else(|| TreeError::UnknownNode(node.clone()))?;
        if target.status == NodeStatus::Closed {
            return Err(TreeError::AlreadyClosed(node.clone()));
        }
        if self.focus.as_ref() != Some(node) {
            return Err(TreeError::NotFocused(node.clone()));
        }
        let open = self.open_leaves().count();
        let new_goals: &[GoalState] = match reply {
            ProverReply::Failure { .. } => return Ok(Outcome::Stayed),
            ProverReply::Qed => &[],
            ProverReply::Advanced { open_goals } => open_goals,
        };
        if new_goals.len() + 1 < open || (matches!(reply, ProverReply::Qed) && open != 1) {
            return Err(TreeError::ReplyMismatch {
                open,
                reported: new_goals.len(),
            });
        }
        let produced = new_goals.len() + 1 - open;
        if produced == 0 {
            let n = self.nodes.get_mut(node).expect("checked above");
            n.closing_tactic = Some(tactic.to_string());
            n.status = NodeStatus::Closed;
            self.propagate_closure(node);
            self.focus = self.next_open_goal();
            return Ok(Outcome::LeafClosed);
        }
        let ids: Vec<NodeId> = (0..produced).map(|i| node.child(i)).collect();
        for (id, goal) in ids.iter().zip(new_goals) {
            self.nodes.insert(
                id.clone(),
                ProofNode {
                    id: id.clone(),
                    goal: goal.clone(),
                    status: NodeStatus::Open,
                    incoming_tactic: Some(tactic.to_string()),
                    children: Vec::new(),
                    closing_tactic: None,
                },
            );
        }
        self.nodes.get_mut(node).expect("checked above").children = ids.clone();
        self.focus = Some(ids[0].clone());
        Ok(if produced == 1 {
            Outcome::SubgoalReplaced(ids[0].clone())
        } else {
            Outcome::Branched(ids)
        })
    }

    fn propagate_closure(&mut self, from: &NodeId) {
        let mut cur = from.parent();
        while let Some(id) = cur {
            let done = self.nodes[&id]
                .children
                .iter()
                .all(|c| self.nodes[c].status == NodeStatus::Closed);
            if !done {
                break;
            }
            self.nodes.get_mut(&id).expect("parent exists").status = NodeStatus::Closed;
            cur = id.parent();
        }
    }

    /// Emits the proof script of a complete tree. Branches with two or more
    /// children are wrapped in `{` / `}`.
    pub fn linearize(&self) -> Result<ProofScript, TreeError> {
        if !self.is_complete() {
            return Err(TreeError::TreeIncomplete);
        }
        let mut sentences = Vec::new();
        self.emit(&self.root, &mut sentences);
        Ok(ProofScript { sentences })
    }

    fn emit(&self, id: &NodeId, out: &mut Vec<String>) {
        let node = &self.nodes[id];
        if let Some(t) = &node.closing_tactic {
            out.push(t.clone());
            return;
        }
        let Some(first) = node.children.first() else {
            return;
        };
        out.push(
            self.nodes[first]
                .incoming_tactic
                .clone()
                .unwrap_or_default(),
        );
        let wrap = node.children.len() >= 2;
        for c in &node.children {
            if wrap {
                out.push("{".into());
            }
            self.emit(c, out);
            if wrap {
                out.push("}".into());
            }
        }
    }

    fn render_line(&self, node: &ProofNode) -> String {
        let status = match node.status {
            NodeStatus::Open => "OPEN",
            NodeStatus::Closed => "CLOSED",
        };
        let focus = if self.focus.as_ref() == Some(&node.id) {
            " <- focus"
        } else {
            ""
        };
        let mut line = format!("{}[{}] {status}", "  ".repeat(node.id.depth()), node.id);
        if let Some(t) = &node.incoming_tactic {
            line.push_str(&format!(" via `{t}`"));
        }
        line.push_str(&format!(
            " |- {}",
            midline_truncate(&node.goal.conclusion, CONCLUSION_WIDTH)
        ));
        if let Some(t) = &node.closing_tactic {
            line.push_str(&format!(" (closed by `{t}`)"));
        }
        line.push_str(focus);
        line
    }

    /// One line per node in depth-first order, at most `budget` characters.
    pub fn render(&self, budget: usize) -> String {
        let lines: Vec<String> = self.nodes.values().map(|n| self.render_line(n)).collect();
        let full: String = lines.join("\n");
        if full.chars().count() <= budget {
            return full;
        }
        let mut out = String::new();
        let mut used = 0usize;
        for (i, line) in lines.iter().enumerate() {
            let notice = format!("[... {} more node(s) elided]", lines.len() - i);
            let sep = usize::from(i > 0);
            let need = line.chars().count() + sep;
            // room must remain for the notice of whatever follows this line
            let next_notice = format!("\n[... {} more node(s) elided]", lines.len() - i - 1);
            if used + need + next_notice.chars().count() > budget {
                let notice = if i > 0 { format!("\n{notice}") } else { notice };
                out.push_str(&notice);
                break;
            }
            if sep == 1 {
                out.push('\n');
            }
            out.push_str(line);
            used += need;
        }
        if out.chars().count() > budget {
            out = out.chars().rev().take(budget).collect::<Vec<_>>().into_iter().rev().collect();
        }
        out
    }

    pub fn to_document(&self) -> TreeDocument {
        TreeDocument {
            root: Some(self.root.to_string()),
            focus: self.focus.as_ref().map(|f| f.to_string()),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDocument {
                    id: n.id.to_string(),
                    status: n.status,
                    incoming_tactic: n.incoming_tactic.clone(),
                    closing_tactic: n.closing_tactic.clone(),
                    children: n.children.iter().map(|c| c.to_string()).collect(),
                    goal: n.goal.clone(),
                })
                .collect(),
        }
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("tree document serializes")
    }

    pub fn deserialize(text: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument = serde_json::from_str(text)
            .map_err(|e| TreeError::SchemaViolation(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: TreeDocument) -> Result<Self, TreeError> {
        let bad = |m: String| TreeError::SchemaViolation(m);
        let root: NodeId = doc
            .root
            .as_deref()
            .ok_or_else(|| bad("missing root".into()))?
            .parse()
            .map_err(bad)?;
        if root != NodeId::root() {
            return Err(bad(format!("root id must be 0, found {root}")));
        }
        let mut nodes = BTreeMap::new();
        for n in doc.nodes {
            let id: NodeId = n.id.parse().map_err(bad)?;
            let children = n
                .children
                .iter()
                .map(|c| c.parse::<NodeId>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?;
            let node = ProofNode {
                id: id.clone(),
                goal: n.goal,
                status: n.status,
                incoming_tactic: n.incoming_tactic,
                children,
                closing_tactic: n.closing_tactic,
            };
            if nodes.insert(id.clone(), node).is_some() {
                return Err(bad(format!("duplicate node {id}")));
            }
        }
        if !nodes.contains_key(&root) {
            return Err(bad("root node missing from nodes".into()));
        }
        for (id, n) in &nodes {
            if id.depth() > 0 {
                let parent = id.parent().expect("non-root");
                let listed = nodes
                    .get(&parent)
                    .is_some_and(|p| p.children.contains(id));
                if !listed {
                    return Err(bad(format!("node {id} is not listed by its parent")));
                }
                if n.incoming_tactic.is_none() {
                    return Err(bad(format!("node {id} lacks an incoming tactic")));
                }
            } else if n.incoming_tactic.is_some() {
                return Err(bad("root has an incoming tactic".into()));
            }
            for (i, c) in n.children.iter().enumerate() {
                if *c != id.child(i) {
                    return Err(bad(format!("child {c} of {id} out of order")));
                }
                let Some(child) = nodes.get(c) else {
                    return Err(bad(format!("child {c} of {id} missing")));
                };
                if child.incoming_tactic != nodes[&id.child(0)].incoming_tactic {
                    return Err(bad(format!("children of {id} disagree on their tactic")));
                }
            }
            match (&n.closing_tactic, n.children.is_empty(), n.status) {
                (Some(_), true, NodeStatus::Closed) | (None, true, NodeStatus::Open) => {}
                (None, false, status) => {
                    let all = n.children.iter().all(|c| nodes[c].status == NodeStatus::Closed);
                    if all != (status == NodeStatus::Closed) {
                        return Err(bad(format!("status of {id} disagrees with its children")));
                    }
                }
                _ => return Err(bad(format!("node {id} mixes closing tactic, children and status"))),
            }
        }
        let focus = doc
            .focus
            .map(|f| f.parse::<NodeId>().map_err(bad))
            .transpose()?;
        if let Some(f) = &focus {
            if !nodes.get(f).is_some_and(|n| n.is_open_leaf()) {
                return Err(bad(format!("focus {f} is not an open leaf")));
            }
        }
        Ok(Self { nodes, root, focus })
    }
}

/// On-disk form of a [`ProofTree`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct TreeDocument {
    pub root: Option<String>,
    pub focus: Option<String>,
    pub nodes: Vec<NodeDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct NodeDocument {
    pub id: String,
    pub status: NodeStatus,
    pub incoming_tactic: Option<String>,
    pub closing_tactic: Option<String>,
    pub children: Vec<String>,
    pub goal: GoalState,
}

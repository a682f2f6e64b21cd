use crate::prover::QueryKind;
use crate::sanitize;
use crate::source::split_sentences;
use std::fmt;

/// What the model asked the agent to do next.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AgentDecision {
    EmitTactic { sentence: String },
    EmitQuery { kind: QueryKind, argument: String },
    GiveUp { reason: String },
}

impl fmt::Display for AgentDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentDecision::EmitTactic { sentence } => f.write_str(sentence),
            AgentDecision::EmitQuery { kind, argument } => write!(f, "{kind} {argument}."),
            AgentDecision::GiveUp { reason } => write!(f, "(* give up: {reason} *)"),
        }
    }
}

/// Body of the first fenced code block, if any.
fn fenced(text: &str) -> Option<&str> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // drop the language tag line
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let end = body.find("```").unwrap_or(body.len());
    Some(&body[..end])
}

fn query_keyword_at(line: &str) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in QueryKind::ALL {
        let kw = k.keyword();
        let mut from = 0;
        while let Some(off) = line[from..].find(kw) {
            let at = from + off;
            let before_ok = line[..at]
                .chars()
                .next_back()
                .is_none_or(|c| c.is_whitespace() || c == ':' || c == '`' || c == '>');
            let after_ok = line[at + kw.len()..]
                .chars()
                .next()
                .is_some_and(char::is_whitespace);
            if before_ok && after_ok {
                best = Some(best.map_or(at, |b: usize| b.min(at)));
                break;
            }
            from = at + kw.len();
        }
    }
    best
}

/// Strips a leading prose label such as `Next tactic:`.
fn strip_label(line: &str) -> &str {
    if let Some((head, tail)) = line.split_once(": ") {
        let prose = !head.is_empty()
            && head
                .chars()
                .all(|c| c.is_alphabetic() || c == ' ' || c == ',' || c == '\'')
            && head.contains(' ')
            && !tail.trim().is_empty();
        let single_word_label = !head.contains(' ')
            && head.chars().next().is_some_and(char::is_uppercase)
            && ["Tactic", "Answer", "Response", "Output", "Query", "Command"].contains(&head);
        if prose || single_word_label {
            return tail;
        }
    }
    line
}

fn candidate_text(raw: &str) -> String {
    let body = fenced(raw).unwrap_or(raw);
    let body = body.replace('`', " ");
    let mut lines = Vec::new();
    let mut started = false;
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            if started {
                lines.push(String::new());
            }
            continue;
        }
        if !started {
            if let Some(at) = query_keyword_at(line) {
                lines.push(line[at..].to_string());
            } else {
                lines.push(strip_label(line).to_string());
            }
            started = true;
        } else {
            lines.push(line.to_string());
        }
    }
    lines.join("\n")
}

fn as_query(sentence: &str) -> Option<(QueryKind, String)> {
    let (kw, rest) = sentence.split_once(char::is_whitespace)?;
    let kind: QueryKind = kw.parse().ok()?;
    let arg = rest.trim().strip_suffix('.')?.trim();
    if arg.is_empty() {
        return None;
    }
    Some((kind, arg.to_string()))
}

/// Extracts one decision from raw model text. Never fails: anything that is
/// neither a query nor an admissible tactic becomes `GiveUp`.
pub fn parse_decision(raw: &str) -> AgentDecision {
    let text = candidate_text(raw);
    let split = match split_sentences(&text) {
        Ok(s) => s,
        Err(e) => {
            return AgentDecision::GiveUp {
                reason: format!("unparsable completion: {e}"),
            }
        }
    };
    let first = split
        .sentences
        .into_iter()
        .find(|s| !crate::source::is_structure_marker(s));
    let Some(sentence) = first else {
        return AgentDecision::GiveUp {
            reason: "no complete sentence in completion".into(),
        };
    };
    if let Some((kind, argument)) = as_query(&sentence) {
        if let Err(e) = sanitize::check_words(&sentence) {
            return AgentDecision::GiveUp {
                reason: e.to_string(),
            };
        }
        return AgentDecision::EmitQuery { kind, argument };
    }
    match sanitize::check_sentence(&sentence) {
        Ok(()) => AgentDecision::EmitTactic { sentence },
        Err(e) => AgentDecision::GiveUp {
            reason: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences_are_stripped() {
        assert_eq!(
            parse_decision("```coq\nlia.\n```"),
            AgentDecision::EmitTactic { sentence: "lia.".into() }
        );
    }

    #[test]
    fn prose_before_query() {
        assert_eq!(
            parse_decision("I will search: Search (Z.quot _ _)."),
            AgentDecision::EmitQuery {
                kind: QueryKind::Search,
                argument: "(Z.quot _ _)".into()
            }
        );
        assert_eq!(
            parse_decision("Search (Z.abs _ <= _)."),
            AgentDecision::EmitQuery {
                kind: QueryKind::Search,
                argument: "(Z.abs _ <= _)".into()
            }
        );
    }

    #[test]
    fn admissions_give_up() {
        assert!(matches!(parse_decision("admit."), AgentDecision::GiveUp { .. }));
        assert!(matches!(parse_decision("```\nAdmitted.\n```"), AgentDecision::GiveUp { .. }));
        assert!(matches!(parse_decision("Search admit."), AgentDecision::GiveUp { .. }));
    }

    #[test]
    fn only_first_sentence_is_used() {
        assert_eq!(
            parse_decision("intros. lia."),
            AgentDecision::EmitTactic { sentence: "intros.".into() }
        );
    }

    #[test]
    fn branching_tactic_and_labels() {
        assert_eq!(
            parse_decision("destruct Hcases as [H10 | [Hn10 | Hle9]]."),
            AgentDecision::EmitTactic {
                sentence: "destruct Hcases as [H10 | [Hn10 | Hle9]].".into()
            }
        );
        assert_eq!(
            parse_decision("Next tactic: `nia.`"),
            AgentDecision::EmitTactic { sentence: "nia.".into() }
        );
        assert_eq!(
            parse_decision("assert (H: x = 1)."),
            AgentDecision::EmitTactic { sentence: "assert (H: x = 1).".into() }
        );
    }

    #[test]
    fn garbage_gives_up() {
        assert!(matches!(parse_decision(""), AgentDecision::GiveUp { .. }));
        assert!(matches!(parse_decision("no idea"), AgentDecision::GiveUp { .. }));
        assert!(matches!(parse_decision("(* open"), AgentDecision::GiveUp { .. }));
        assert!(matches!(
            parse_decision("Require Import Lia."),
            AgentDecision::GiveUp { .. }
        ));
    }

    #[test]
    fn canonical_rendering_reparses() {
        for raw in ["lia.", "Search (Z.abs _ <= _).", "Check 0%Z.", "apply Z.abs_le."] {
            let d = parse_decision(raw);
            assert_eq!(parse_decision(&d.to_string()), d);
        }
    }

    proptest::proptest! {
        #[test]
        fn total_and_idempotent(raw in "(\\PC|\n){0,80}") {
            let d = parse_decision(&raw);
            if !matches!(d, AgentDecision::GiveUp { .. }) {
                proptest::prop_assert_eq!(parse_decision(&d.to_string()), d);
            }
        }

        #[test]
        fn query_kinds_closed(
            prefix in "[a-zA-Z :]{0,20}",
            kw in proptest::sample::select(vec!["Search", "Print", "Locate", "About", "Check", "Show", "Eval"]),
            arg in "[a-zA-Z_. ()]{1,20}",
        ) {
            let raw = format!("{prefix} {kw} {arg}.");
            if let AgentDecision::EmitQuery { kind, .. } = parse_decision(&raw) {
                proptest::prop_assert!(QueryKind::ALL.contains(&kind));
            }
        }
    }
}

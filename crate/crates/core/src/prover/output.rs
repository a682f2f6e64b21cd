//! Turns raw query output into entries.

use super::types::{QueryEntry, QueryKind, QueryResult, QUERY_RESULT_CAP};
use crate::source::collapse_whitespace;

fn looks_like_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '.')
}

/// Splits record-per-declaration output (`name: statement` with indented
/// continuation lines). `None` when some record does not have that shape.
fn split_records(raw: &str) -> Option<Vec<QueryEntry>> {
    let mut records: Vec<String> = Vec::new();
    let mut current: Option<String> = None;
    for line in raw.lines() {
        if line.trim().is_empty() {
            if let Some(r) = current.take() {
                records.push(r);
            }
        } else if line.starts_with(char::is_whitespace) {
            let r = current.as_mut()?;
            r.push(' ');
            r.push_str(line.trim());
        } else {
            if let Some(r) = current.take() {
                records.push(r);
            }
            current = Some(line.trim().to_string());
        }
    }
    if let Some(r) = current {
        records.push(r);
    }
    records
        .into_iter()
        .map(|r| {
            let (name, statement) = r.split_once(':')?;
            let name = name.trim();
            looks_like_name(name).then(|| QueryEntry {
                name: name.to_string(),
                statement: collapse_whitespace(statement),
            })
        })
        .collect()
}

/// `term\n   : type` or `name : type` shapes; returns the type part.
fn typed_statement(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    if let Some(idx) = trimmed.find("\n") {
        let rest = trimmed[idx..].trim_start();
        if let Some(ty) = rest.strip_prefix(':') {
            return Some(collapse_whitespace(ty));
        }
    }
    let (_, ty) = trimmed.split_once(" : ")?;
    Some(collapse_whitespace(ty))
}

pub fn parse_query_output(kind: QueryKind, argument: &str, raw: &str) -> QueryResult {
    let mut entries = if raw.trim().is_empty() {
        Vec::new()
    } else {
        match kind {
            QueryKind::Search => split_records(raw),
            QueryKind::Check | QueryKind::About => typed_statement(raw).map(|statement| {
                vec![QueryEntry {
                    name: argument.to_string(),
                    statement,
                }]
            }),
            QueryKind::Print | QueryKind::Locate => None,
        }
        .unwrap_or_else(|| {
            vec![QueryEntry {
                name: argument.to_string(),
                statement: collapse_whitespace(raw),
            }]
        })
    };
    entries.truncate(QUERY_RESULT_CAP);
    QueryResult {
        entries,
        raw: raw.to_string(),
    }
}

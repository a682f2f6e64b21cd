//! Identifier tokenizer shared by context selection and history retrieval.

use std::collections::BTreeSet;

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '.'
}

/// Splits `text` on non-identifier characters and keeps whole identifiers.
///
/// Qualified names such as `Z.abs` stay a single token. Numerals and
/// sentence-final dots are dropped.
pub fn identifiers(text: &str) -> Vec<&str> {
    text.split(|c: char| !is_ident_char(c))
        .map(|t| t.trim_matches('.'))
        .filter(|t| {
            t.chars()
                .next()
                .is_some_and(|c| c.is_alphabetic() || c == '_')
                && *t != "_"
        })
        .collect()
}

pub fn identifier_set(text: &str) -> BTreeSet<&str> {
    identifiers(text).into_iter().collect()
}

/// Number of distinct identifiers shared by `a` and `b`.
pub fn overlap(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> usize {
    a.intersection(b).count()
}

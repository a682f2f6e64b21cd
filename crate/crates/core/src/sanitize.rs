//! The admission wall: decides which sentences may ever reach the prover as
//! proof steps.

use crate::source::{is_structure_marker, split_sentences};
use thiserror::Error;

/// Words that produce vacuous certificates wherever they appear.
pub const FORBIDDEN_WORDS: &[&str] = &["admit", "Admitted", "Abort", "Axiom"];

/// Vernacular that mutates the global environment.
pub const MUTATING_VERNACULAR: &[&str] = &[
    "Require", "Import", "Export", "From", "Definition", "Fixpoint", "CoFixpoint", "Inductive",
    "CoInductive", "Record", "Structure", "Class", "Instance", "Ltac", "Ltac2", "Tactic",
    "Notation", "Infix", "Lemma", "Theorem", "Fact", "Remark", "Corollary", "Proposition",
    "Example", "Parameter", "Parameters", "Hypothesis", "Hypotheses", "Variable", "Variables",
    "Conjecture", "Context", "Section", "End", "Module", "Declare", "Load", "Add", "Set", "Unset",
    "Local", "Global", "Hint", "Create", "Arguments", "Opaque", "Transparent", "Qed", "Defined",
    "Save", "Proof", "Restart", "Undo", "BackTo", "Back", "Reset", "Drop", "Quit", "Obligation",
    "Next", "Program", "Let", "Canonical", "Coercion", "Existing", "Generalizable", "Scheme",
    "Combined", "Derive", "Extraction", "Open", "Close", "Delimit", "Bind", "Reserved", "Time",
    "Timeout", "Fail", "Redirect", "Succeed", "Strategy", "Typeclasses", "Unshelve",
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SanitizeError {
    #[error("forbidden command `{0}`")]
    Forbidden(String),
    #[error("environment-mutating vernacular `{0}`")]
    Vernacular(String),
    #[error("not a single complete sentence")]
    NotOneSentence,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Finds `word` in `text` with identifier boundaries on both sides.
pub fn contains_word(text: &str, word: &str) -> bool {
    let mut start = 0;
    while let Some(off) = text[start..].find(word) {
        let at = start + off;
        let before = text[..at].chars().next_back();
        let after = text[at + word.len()..].chars().next();
        // `Z.admit` is still a reference to `admit`; only a dot after counts as a boundary
        if !before.is_some_and(is_word_char) && !after.is_some_and(is_word_char) {
            return true;
        }
        start = at + word.len();
    }
    false
}

/// Checks words regardless of sentence shape.
pub fn check_words(text: &str) -> Result<(), SanitizeError> {
    for w in FORBIDDEN_WORDS {
        if contains_word(text, w) {
            return Err(SanitizeError::Forbidden((*w).to_string()));
        }
    }
    Ok(())
}

fn leading_word(sentence: &str) -> &str {
    let s = sentence.trim_start();
    // `#[local] Definition` style attributes
    let s = if s.starts_with("#[") {
        s.find(']').map(|i| s[i + 1..].trim_start()).unwrap_or(s)
    } else {
        s
    };
    let end = s.find(|c: char| !is_word_char(c)).unwrap_or(s.len());
    &s[..end]
}

/// Validates a proof-step sentence: a single complete tactic sentence or a
/// structure marker.
pub fn check_sentence(sentence: &str) -> Result<(), SanitizeError> {
    check_words(sentence)?;
    let s = sentence.trim();
    if is_structure_marker(s) {
        return Ok(());
    }
    let split = split_sentences(s).map_err(|_| SanitizeError::NotOneSentence)?;
    if split.sentences.len() != 1 || split.remainder.is_some() || !s.ends_with('.') {
        return Err(SanitizeError::NotOneSentence);
    }
    let lead = leading_word(s);
    if MUTATING_VERNACULAR.contains(&lead) {
        return Err(SanitizeError::Vernacular(lead.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_admissions() {
        for bad in ["admit.", "Admitted.", "Abort.", "intros; admit.", "Axiom foo : False."] {
            assert!(matches!(check_sentence(bad), Err(SanitizeError::Forbidden(_))), "{bad}");
        }
    }

    #[test]
    fn whole_word_only() {
        assert!(check_sentence("apply admit_lemma.").is_ok());
        assert!(check_sentence("apply readmit.").is_ok());
        assert!(check_sentence("exact (Axiomatic x).").is_ok());
    }

    #[test]
    fn rejects_vernacular() {
        assert_eq!(
            check_sentence("Require Import Lia."),
            Err(SanitizeError::Vernacular("Require".into()))
        );
        assert!(matches!(
            check_sentence("#[local] Definition x := 1."),
            Err(SanitizeError::Vernacular(_))
        ));
        assert!(matches!(check_sentence("Ltac t := lia."), Err(SanitizeError::Vernacular(_))));
    }

    #[test]
    fn shape() {
        assert!(check_sentence("lia.").is_ok());
        assert!(check_sentence("{").is_ok());
        assert!(check_sentence("-").is_ok());
        assert_eq!(check_sentence("lia"), Err(SanitizeError::NotOneSentence));
        assert_eq!(check_sentence("lia. auto."), Err(SanitizeError::NotOneSentence));
    }
}

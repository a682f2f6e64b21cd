//! Sentence-level reading of prover source text.
//!
//! Sentences end at a `.` followed by whitespace or end of input, outside of
//! comments and string literals. Braces and bullets at the start of a
//! sentence are sentences of their own.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("unterminated comment starting at byte {0}")]
    UnterminatedComment(usize),
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    /// Complete sentences with comments removed and whitespace collapsed.
    pub sentences: Vec<String>,
    /// Text after the last complete sentence, if any non-blank text remains.
    pub remainder: Option<String>,
    /// Bodies of every top-level comment, in order of appearance.
    pub comments: Vec<String>,
}

pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_marker_start(c: char) -> bool {
    matches!(c, '{' | '}' | '-' | '+' | '*')
}

/// Structural sentences: focusing braces and bullets.
pub fn is_structure_marker(sentence: &str) -> bool {
    let s = sentence.trim();
    if s == "{" || s == "}" {
        return true;
    }
    !s.is_empty()
        && (s.chars().all(|c| c == '-')
            || s.chars().all(|c| c == '+')
            || s.chars().all(|c| c == '*'))
}

pub fn split_sentences(text: &str) -> Result<Split, SourceError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Split::default();
    let mut current = String::new();
    let mut i = 0;
    let n = bytes.len();

    let flush = |current: &mut String, out: &mut Split| {
        let s = collapse_whitespace(current);
        if !s.is_empty() {
            out.sentences.push(s);
        }
        current.clear();
    };

    while i < n {
        let (pos, c) = bytes[i];
        // comment
        if c == '(' && i + 1 < n && bytes[i + 1].1 == '*' {
            let start = pos;
            let mut depth = 1;
            let mut j = i + 2;
            let body_start = j;
            while j < n && depth > 0 {
                if bytes[j].1 == '(' && j + 1 < n && bytes[j + 1].1 == '*' {
                    depth += 1;
                    j += 2;
                } else if bytes[j].1 == '*' && j + 1 < n && bytes[j + 1].1 == ')' {
                    depth -= 1;
                    j += 2;
                } else {
                    j += 1;
                }
            }
            if depth > 0 {
                return Err(SourceError::UnterminatedComment(start));
            }
            let body: String = bytes[body_start..j - 2].iter().map(|(_, c)| *c).collect();
            out.comments.push(body);
            current.push(' ');
            i = j;
            continue;
        }
        if c == '"' {
            let start = pos;
            current.push(c);
            let mut j = i + 1;
            loop {
                if j >= n {
                    return Err(SourceError::UnterminatedString(start));
                }
                let d = bytes[j].1;
                current.push(d);
                if d == '"' {
                    if j + 1 < n && bytes[j + 1].1 == '"' {
                        current.push('"');
                        j += 2;
                        continue;
                    }
                    j += 1;
                    break;
                }
                j += 1;
            }
            i = j;
            continue;
        }
        if current.trim().is_empty() && is_marker_start(c) {
            if c == '{' || c == '}' {
                current.clear();
                current.push(c);
                flush(&mut current, &mut out);
                i += 1;
                continue;
            }
            // bullets: a run of the same symbol followed by whitespace
            let mut j = i;
            while j < n && bytes[j].1 == c {
                j += 1;
            }
            if j >= n || bytes[j].1.is_whitespace() {
                current.clear();
                for _ in i..j {
                    current.push(c);
                }
                flush(&mut current, &mut out);
                i = j;
                continue;
            }
        }
        current.push(c);
        if c == '.' {
            let next = bytes.get(i + 1).map(|(_, c)| *c);
            let prev_dot = i > 0 && bytes[i - 1].1 == '.';
            let ends = match next {
                None => true,
                Some(d) => d.is_whitespace(),
            };
            if ends && !prev_dot {
                flush(&mut current, &mut out);
            }
        }
        i += 1;
    }
    let rest = collapse_whitespace(&current);
    if !rest.is_empty() {
        out.remainder = Some(rest);
    }
    Ok(out)
}

const LEMMA_KEYWORDS: &[&str] = &[
    "Lemma",
    "Theorem",
    "Fact",
    "Remark",
    "Corollary",
    "Proposition",
    "Example",
];

/// A lemma statement found in a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaDecl {
    pub name: String,
    /// Binders between the name and the colon, e.g. `(x : nat)`.
    pub binders: String,
    /// The proposition after the colon, without the final dot.
    pub statement: String,
    /// Index of the statement sentence in the source.
    pub index: usize,
    /// Index of the sentence that ends the proof, when the source carries one.
    pub proof_end: Option<usize>,
    /// True when the proof ends with `Qed.` or `Defined.`.
    pub closed: bool,
}

impl LemmaDecl {
    /// The goal as the prover prints it right after entering proof mode.
    pub fn goal_text(&self) -> String {
        if self.binders.is_empty() {
            self.statement.clone()
        } else {
            format!("forall {}, {}", self.binders, self.statement)
        }
    }
}

fn first_word(s: &str) -> &str {
    s.split(|c: char| c.is_whitespace() || c == ':' || c == '(')
        .next()
        .unwrap_or("")
}

/// Parses `Lemma name binders : statement.`; `None` for other sentences.
pub fn parse_lemma_sentence(sentence: &str) -> Option<(String, String, String)> {
    let kw = first_word(sentence);
    if !LEMMA_KEYWORDS.contains(&kw) {
        return None;
    }
    let rest = sentence[kw.len()..].trim_start();
    let name_end = rest
        .find(|c: char| c.is_whitespace() || c == ':' || c == '(' || c == '{' || c == '[')
        .unwrap_or(rest.len());
    let name = &rest[..name_end];
    if name.is_empty() {
        return None;
    }
    let after = &rest[name_end..];
    // the first colon at bracket depth zero separates binders from statement
    let mut depth = 0i32;
    let mut colon = None;
    let chars: Vec<(usize, char)> = after.char_indices().collect();
    for (k, &(p, c)) in chars.iter().enumerate() {
        match c {
            '(' | '{' | '[' => depth += 1,
            ')' | '}' | ']' => depth -= 1,
            ':' if depth == 0 => {
                let next = chars.get(k + 1).map(|(_, c)| *c);
                if next != Some('=') && next != Some(':') {
                    colon = Some(p);
                    break;
                }
            }
            _ => {}
        }
    }
    let colon = colon?;
    let binders = after[..colon].trim().to_string();
    let statement = after[colon + 1..].trim();
    let statement = statement.strip_suffix('.').unwrap_or(statement).trim();
    Some((name.to_string(), binders, statement.to_string()))
}

/// A parsed source file.
#[derive(Debug, Clone)]
pub struct SourceFile {
    pub split: Split,
    pub lemmas: Vec<LemmaDecl>,
}

fn is_proof_end(s: &str) -> Option<bool> {
    match s {
        "Qed." | "Defined." => Some(true),
        "Admitted." | "Abort." => Some(false),
        _ => None,
    }
}

impl SourceFile {
    pub fn parse(text: &str) -> Result<Self, SourceError> {
        let split = split_sentences(text)?;
        let mut lemmas = Vec::new();
        for (index, sentence) in split.sentences.iter().enumerate() {
            if let Some((name, binders, statement)) = parse_lemma_sentence(sentence) {
                let mut proof_end = None;
                let mut closed = false;
                for (j, s) in split.sentences.iter().enumerate().skip(index + 1) {
                    if parse_lemma_sentence(s).is_some() {
                        break;
                    }
                    if let Some(ok) = is_proof_end(s) {
                        proof_end = Some(j);
                        closed = ok;
                        break;
                    }
                }
                lemmas.push(LemmaDecl {
                    name,
                    binders,
                    statement,
                    index,
                    proof_end,
                    closed,
                });
            }
        }
        Ok(Self { split, lemmas })
    }

    pub fn lemma(&self, name: &str) -> Option<&LemmaDecl> {
        self.lemmas.iter().find(|l| l.name == name)
    }

    /// Sentences to check before entering proof mode for `name`.
    ///
    /// Earlier lemmas are kept only when their proof ends in `Qed.` or
    /// `Defined.`; bare or admitted statements are dropped so that no
    /// admission reaches the prover.
    pub fn prefix_for(&self, name: &str) -> Option<Vec<String>> {
        let target = self.lemma(name)?;
        let mut skip = vec![false; target.index];
        for l in &self.lemmas {
            if l.index >= target.index || l.closed {
                continue;
            }
            let end = l.proof_end.unwrap_or(l.index).min(target.index - 1);
            for s in skip.iter_mut().take(end + 1).skip(l.index) {
                *s = true;
            }
        }
        Some(
            self.split.sentences[..target.index]
                .iter()
                .zip(skip)
                .filter(|(_, s)| !s)
                .map(|(t, _)| t.clone())
                .collect(),
        )
    }
}

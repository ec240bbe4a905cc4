//! Output grammars for agent turns.
//!
//! Whitespace is tolerated around tokens; anything else outside the grammar
//! is a format error. A line that does not start with a directive keyword is
//! folded into the previous directive, so a long announcement wrapped onto a
//! second line still parses.

use thiserror::Error;

use crate::dsl::{ObjectSet, MAX_OBJECTS};
use crate::triple::Triple;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("empty output")]
    Empty,
    #[error("expected a line starting with `{0}`")]
    MissingDirective(&'static str),
    #[error("unexpected extra output: `{0}`")]
    ExtraText(String),
    #[error("announcement has no content")]
    EmptyAnnouncement,
    #[error("expected `{0}` clause")]
    MissingClause(&'static str),
    #[error("expected three integers in brackets, found `{0}`")]
    BadTriple(String),
    #[error("triple [{}, {}, {}] is outside [-99, 100]", .0[0], .0[1], .0[2])]
    OutOfDomain([i64; 3]),
    #[error("expected a bracketed list of `object N`, found `{0}`")]
    BadObjectList(String),
    #[error("object {0} does not exist in this episode")]
    UnknownObject(u32),
    #[error("object {0} listed twice")]
    DuplicateObject(u8),
}

const DIRECTIVES: [&str; 3] = ["Announce:", "Check:", "Test:"];

/// Removes `<think>...</think>` blocks. An unclosed `<think>` hides the rest
/// of the output; a stray `</think>` hides everything before it.
pub fn strip_reasoning(raw: &str) -> String {
    let mut text = raw;
    if let Some(end) = text.rfind("</think>") {
        if !text[..end].contains("<think>") {
            text = &text[end + "</think>".len()..];
        }
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out.trim().to_string()
}

/// Splits output into directive entries, folding continuation lines.
fn entries(text: &str) -> Result<Vec<(&'static str, String)>, FormatError> {
    let mut out: Vec<(&'static str, String)> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut rest = line;
        let mut found = false;
        // a single line may hold several directives: `Announce: x;Announce: y`
        loop {
            let next = DIRECTIVES
                .iter()
                .filter_map(|d| rest.find(d).map(|at| (at, *d)))
                .min_by_key(|(at, _)| *at);
            match next {
                Some((at, d)) if at == 0 || found => {
                    let before = rest[..at].trim();
                    if !before.is_empty() {
                        append(&mut out, before, line)?;
                    }
                    rest = &rest[at + d.len()..];
                    out.push((d, String::new()));
                    found = true;
                }
                _ => break,
            }
        }
        let tail = rest.trim();
        if !tail.is_empty() {
            append(&mut out, tail, line)?;
        }
    }
    if out.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(out)
}

fn append(out: &mut [(&'static str, String)], piece: &str, line: &str) -> Result<(), FormatError> {
    match out.last_mut() {
        Some((_, body)) => {
            if !body.is_empty() {
                body.push(' ');
            }
            body.push_str(&piece.split_whitespace().collect::<Vec<_>>().join(" "));
            Ok(())
        }
        None => Err(FormatError::ExtraText(line.to_string())),
    }
}

fn single(text: &str, directive: &'static str) -> Result<String, FormatError> {
    let mut es = entries(text).map_err(|e| match e {
        FormatError::ExtraText(_) => FormatError::MissingDirective(directive),
        other => other,
    })?;
    if es[0].0 != directive {
        return Err(FormatError::MissingDirective(directive));
    }
    if es.len() > 1 {
        return Err(FormatError::ExtraText(format!("{} {}", es[1].0, es[1].1)));
    }
    Ok(es.remove(0).1)
}

/// `Announce: <text>`.
pub fn parse_announcement(text: &str) -> Result<String, FormatError> {
    let body = single(text, "Announce:")?;
    if body.is_empty() {
        return Err(FormatError::EmptyAnnouncement);
    }
    Ok(body)
}

/// Two entries: `Announce: DAX rule - X` then `Announce: MED rule - Y`.
/// Returns the two clause texts.
pub fn parse_dual_announcement(text: &str) -> Result<(String, String), FormatError> {
    let es = entries(text).map_err(|e| match e {
        FormatError::ExtraText(_) => FormatError::MissingDirective("Announce:"),
        other => other,
    })?;
    if es.iter().any(|(d, _)| *d != "Announce:") {
        return Err(FormatError::MissingDirective("Announce:"));
    }
    if es.len() > 2 {
        return Err(FormatError::ExtraText(es[2].1.clone()));
    }
    let dax = es
        .first()
        .and_then(|(_, b)| clause(b, "DAX rule"))
        .ok_or(FormatError::MissingClause("DAX rule -"))?;
    let med = es
        .get(1)
        .and_then(|(_, b)| clause(b, "MED rule"))
        .ok_or(FormatError::MissingClause("MED rule -"))?;
    Ok((dax, med))
}

fn clause(body: &str, label: &str) -> Option<String> {
    let rest = body.strip_prefix(label)?.trim_start();
    let rest = rest
        .strip_prefix('-')
        .or_else(|| rest.strip_prefix(':'))
        .or_else(|| rest.strip_prefix('–'))?;
    let text = rest.trim().trim_end_matches(';').trim();
    (!text.is_empty()).then(|| text.to_string())
}

fn bracketed(body: &str, err: impl Fn() -> FormatError) -> Result<&str, FormatError> {
    body.strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(err)
}

/// `Check: [a,b,c]`.
pub fn parse_check(text: &str) -> Result<Triple, FormatError> {
    let body = single(text, "Check:")?;
    let bad = || FormatError::BadTriple(body.clone());
    let inner = bracketed(&body, bad)?;
    let nums: Vec<i64> = inner
        .split(',')
        .map(|s| s.trim().parse::<i64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [a, b, c]: [i64; 3] = nums.try_into().map_err(|_| bad())?;
    Triple::new(a, b, c).map_err(|_| FormatError::OutOfDomain([a, b, c]))
}

/// `Test: [object i, ...]`; the empty list is a valid placement.
pub fn parse_placement(text: &str, num_objects: u8) -> Result<ObjectSet, FormatError> {
    let body = single(text, "Test:")?;
    let bad = || FormatError::BadObjectList(body.clone());
    let inner = bracketed(&body, bad)?.trim();
    let ids = parse_object_ids(inner, num_objects).map_err(|e| match e {
        FormatError::BadObjectList(_) => bad(),
        other => other,
    })?;
    Ok(ids)
}

/// Comma-separated `object N` names, without brackets.
pub fn parse_object_ids(inner: &str, num_objects: u8) -> Result<ObjectSet, FormatError> {
    let mut set = ObjectSet::EMPTY;
    if inner.trim().is_empty() {
        return Ok(set);
    }
    for item in inner.split(',') {
        let id_text = item
            .trim()
            .strip_prefix("object")
            .map(str::trim)
            .ok_or_else(|| FormatError::BadObjectList(inner.to_string()))?;
        let id: u32 = id_text
            .parse()
            .map_err(|_| FormatError::BadObjectList(inner.to_string()))?;
        if id >= num_objects as u32 || id >= MAX_OBJECTS as u32 {
            return Err(FormatError::UnknownObject(id));
        }
        let id = id as u8;
        if set.contains(id) {
            return Err(FormatError::DuplicateObject(id));
        }
        set = ObjectSet::from_bits(set.bits() | 1 << id);
    }
    Ok(set)
}

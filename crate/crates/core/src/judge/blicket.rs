//! Blicket announcements: `relevant=[object i, ...]; rule=<phrase>`.
//!
//! The phrase is mapped onto a small set of activation conditions by keyword
//! matching, checked in a fixed order. Anything that matches none of them is
//! left unjudged.

use serde::{Deserialize, Serialize};

use crate::dsl::{BlicketKind, BlicketRuleExpr, ObjectSet};
use crate::engine::parse::parse_object_ids;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Condition {
    /// At least one relevant object present.
    Any,
    /// Every relevant object present.
    All,
    ExactlyOne,
    AtLeast { n: u8 },
    Exactly { n: u8 },
    /// An odd number of relevant objects present.
    Odd,
    /// Listed objects on, others listed off; the rest are ignored.
    Pattern { on: ObjectSet, off: ObjectSet },
}

impl From<BlicketKind> for Condition {
    fn from(kind: BlicketKind) -> Self {
        match kind {
            BlicketKind::Conjunctive => Condition::All,
            BlicketKind::Disjunctive => Condition::Any,
            BlicketKind::Xor => Condition::ExactlyOne,
        }
    }
}

/// An announced blicket hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlicketHypothesis {
    pub relevant: ObjectSet,
    pub condition: Condition,
}

impl From<BlicketRuleExpr> for BlicketHypothesis {
    fn from(rule: BlicketRuleExpr) -> Self {
        BlicketHypothesis {
            relevant: rule.relevant(),
            condition: rule.kind().into(),
        }
    }
}

impl BlicketHypothesis {
    pub fn eval(&self, placed: ObjectSet) -> bool {
        let hits = self.relevant.intersection(&placed).len();
        match self.condition {
            Condition::Any => hits >= 1,
            Condition::All => hits == self.relevant.len(),
            Condition::ExactlyOne => hits == 1,
            Condition::AtLeast { n } => hits >= n as usize,
            Condition::Exactly { n } => hits == n as usize,
            Condition::Odd => hits % 2 == 1,
            Condition::Pattern { on, off } => {
                on.is_subset(&placed) && off.intersection(&placed).is_empty()
            }
        }
    }

    /// Same relevant set and the same verdict on every placement.
    pub fn matches(&self, target: &BlicketRuleExpr, num_objects: u8) -> bool {
        self.relevant == target.relevant()
            && ObjectSet::all_subsets(num_objects)
                .into_iter()
                .all(|s| self.eval(s) == target.eval(s))
    }
}

/// Parses `relevant=[...]; rule=...`. Returns a description of the problem
/// when the text does not fit.
pub fn parse_blicket_announcement(text: &str, num_objects: u8) -> Result<BlicketHypothesis, String> {
    let t = text.trim();
    let lower = t.to_ascii_lowercase();
    let rest = lower
        .strip_prefix("relevant")
        .ok_or_else(|| "announcement does not start with `relevant=`".to_string())?
        .trim_start();
    let rest = rest
        .strip_prefix('=')
        .or_else(|| rest.strip_prefix(':'))
        .ok_or_else(|| "expected `=` after `relevant`".to_string())?
        .trim_start();
    let rest = rest
        .strip_prefix('[')
        .ok_or_else(|| "expected a bracketed object list".to_string())?;
    let close = rest.find(']').ok_or_else(|| "unclosed object list".to_string())?;
    let relevant = parse_object_ids(&rest[..close], num_objects).map_err(|e| e.to_string())?;
    let rest = rest[close + 1..].trim_start_matches(|c: char| c == ';' || c == ',' || c.is_whitespace());
    let phrase = rest
        .strip_prefix("rule")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('=').or_else(|| r.strip_prefix(':')))
        .ok_or_else(|| "expected `rule=` clause".to_string())?;
    let condition = parse_condition(phrase, num_objects)
        .ok_or_else(|| format!("unrecognized rule description `{}`", phrase.trim()))?;
    Ok(BlicketHypothesis { relevant, condition })
}

fn number(word: &str) -> Option<u8> {
    let n = match word {
        "one" | "single" => 1,
        "two" => 2,
        "three" => 3,
        "four" => 4,
        "five" => 5,
        "six" => 6,
        "seven" => 7,
        "eight" => 8,
        other => other.parse().ok()?,
    };
    Some(n)
}

fn contains_seq(words: &[&str], seq: &[&str]) -> bool {
    words.windows(seq.len()).any(|w| w == seq)
}

/// Count following `at least` / `exactly`, if any.
fn count_after(words: &[&str], lead: &[&str]) -> Option<u8> {
    words
        .windows(lead.len() + 1)
        .find(|w| &w[..lead.len()] == lead)
        .and_then(|w| number(w[lead.len()]))
}

/// Maps a rule phrase onto a condition.
pub fn parse_condition(phrase: &str, num_objects: u8) -> Option<Condition> {
    let lower = phrase.to_ascii_lowercase();
    let cleaned: String = lower
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
        .collect();
    let words: Vec<&str> = cleaned.split_whitespace().collect();
    if words.is_empty() {
        return None;
    }
    if let Some(p) = pattern(&words, num_objects) {
        return Some(p);
    }
    let has = |w: &str| words.contains(&w);
    if has("xor")
        || contains_seq(&words, &["exactly", "one"])
        || contains_seq(&words, &["exactly", "1"])
        || contains_seq(&words, &["one", "and", "only", "one"])
        || contains_seq(&words, &["only", "one"])
        || contains_seq(&words, &["not", "both"])
    {
        return Some(Condition::ExactlyOne);
    }
    if let Some(n) = count_after(&words, &["exactly"]) {
        return Some(Condition::Exactly { n });
    }
    if has("odd") {
        return Some(Condition::Odd);
    }
    if let Some(n) = count_after(&words, &["at", "least"]) {
        return Some(if n <= 1 { Condition::Any } else { Condition::AtLeast { n } });
    }
    if ["disjunctive", "any", "or", "either", "sufficient", "alone"].iter().any(|w| has(w)) {
        return Some(Condition::Any);
    }
    if ["conjunctive", "all", "both", "and", "together", "every", "each"].iter().any(|w| has(w)) {
        return Some(Condition::All);
    }
    None
}

/// `object 0 on and object 1 off`; needs at least one `off`.
fn pattern(words: &[&str], num_objects: u8) -> Option<Condition> {
    let mut on = ObjectSet::EMPTY;
    let mut off = ObjectSet::EMPTY;
    for i in 0..words.len() {
        if words[i] == "object" && i + 2 < words.len() {
            let id: Option<u8> = words[i + 1].parse().ok().filter(|&n: &u8| n < num_objects);
            let mut j = i + 2;
            if words.get(j) == Some(&"is") {
                j += 1;
            }
            if let (Some(id), Some(state)) = (id, words.get(j)) {
                let bit = ObjectSet::from_bits(1 << id);
                match *state {
                    "on" => on = ObjectSet::from_bits(on.bits() | bit.bits()),
                    "off" => off = ObjectSet::from_bits(off.bits() | bit.bits()),
                    _ => {}
                }
            }
        }
    }
    (!off.is_empty() && on.intersection(&off).is_empty()).then_some(Condition::Pattern { on, off })
}

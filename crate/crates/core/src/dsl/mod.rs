//! The rule language: predicates over integer triples and blicket placements.
//!
//! Source text is parsed once into an immutable [`RuleExpr`]; evaluation is a
//! pure function of the tree and the input. Modulo and division are
//! Euclidean, so `-9 % 2 == 1`.

pub mod ast;
mod blicket;
mod equiv;
mod lexer;
mod parser;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::triple::Triple;

pub use blicket::{eval_blicket, BlicketKind, BlicketRuleExpr, EmptyRelevantSet, ObjectSet, ObjectSetError, MAX_OBJECTS};
pub use equiv::{extension, rules_equivalent, Equivalence, Extension};
pub use parser::BUILTINS;

/// Grammar revision accepted by [`parse_rule`].
pub const GRAMMAR_VERSION: &str = "rule-dsl/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: expected one of [{}], found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("type error at byte {offset}: {message}")]
    Type { offset: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division or modulo by zero")]
    ZeroDivisor,
    #[error("integer overflow")]
    Overflow,
}

/// An evaluation failure together with the input that triggered it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{error} at {at}")]
pub struct EvalAt {
    pub at: Triple,
    pub error: EvalError,
}

/// A parsed triple predicate. Equality is structural on the tree.
#[derive(Debug, Clone)]
pub struct RuleExpr {
    source: String,
    body: ast::BoolExpr,
}

impl PartialEq for RuleExpr {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body
    }
}

impl Eq for RuleExpr {}

pub fn parse_rule(text: &str) -> Result<RuleExpr, ParseError> {
    let body = parser::parse(text)?;
    Ok(RuleExpr {
        source: text.trim().to_string(),
        body,
    })
}

pub fn eval_rule(rule: &RuleExpr, x: &Triple) -> Result<bool, EvalError> {
    rule.eval(x)
}

impl RuleExpr {
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn body(&self) -> &ast::BoolExpr {
        &self.body
    }

    pub fn eval(&self, x: &Triple) -> Result<bool, EvalError> {
        self.body.eval(&x.values())
    }

    /// Like [`RuleExpr::eval`] but attaches the triple to any error.
    pub fn eval_at(&self, x: &Triple) -> Result<bool, EvalAt> {
        self.eval(x).map_err(|error| EvalAt { at: *x, error })
    }

    /// True when some division or modulo has a divisor that is not a nonzero
    /// literal. Such rules depend on guards that are only checked while
    /// evaluating.
    pub fn is_partial(&self) -> bool {
        self.body.may_fault()
    }
}

impl FromStr for RuleExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_rule(s)
    }
}

impl fmt::Display for RuleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for RuleExpr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for RuleExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_rule(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: i64, b: i64, c: i64) -> Triple {
        Triple::new(a, b, c).unwrap()
    }

    fn holds(src: &str, x: Triple) -> bool {
        parse_rule(src).unwrap().eval(&x).unwrap()
    }

    const ALL_EVEN: &str = "a % 2 == 0 and b % 2 == 0 and c % 2 == 0";

    #[test]
    fn all_even_parses_to_a_conjunction_of_three_tests() {
        let rule = parse_rule(ALL_EVEN).unwrap();
        match rule.body() {
            ast::BoolExpr::And(items) => assert_eq!(items.len(), 3),
            other => panic!("unexpected tree {other:?}"),
        }
        assert!(!rule.is_partial());
        assert!(holds(ALL_EVEN, t(12, -36, -36)));
    }

    #[test]
    fn ascending_accepts_either_spelling() {
        let long = parse_rule("a < b and b < c").unwrap();
        let chained = parse_rule("a < b < c").unwrap();
        for x in [t(1, 2, 3), t(1, 1, 2), t(3, 2, 1), t(-99, -98, 100)] {
            assert_eq!(long.eval(&x), chained.eval(&x));
        }
        assert!(holds("a < b and b < c", t(-99, -98, -97)));
    }

    #[test]
    fn modulo_by_zero_parses_but_is_partial() {
        let rule = parse_rule("a % 0 == 1").unwrap();
        assert!(rule.is_partial());
        assert_eq!(rule.eval(&t(1, 2, 3)), Err(EvalError::ZeroDivisor));
    }

    #[test]
    fn guarded_divisibility_short_circuits() {
        let rule = parse_rule("a != 0 and b % a == 0 and b != 0 and c % b == 0").unwrap();
        assert!(rule.is_partial());
        assert_eq!(rule.eval(&t(0, 4, 8)), Ok(false));
        assert_eq!(rule.eval(&t(2, 4, 8)), Ok(true));
        assert_eq!(rule.eval(&t(2, -4, 8)), Ok(true));
        assert_eq!(rule.eval(&t(3, 4, 8)), Ok(false));
    }

    #[test]
    fn all_odd_uses_euclidean_modulo() {
        assert!(holds("a % 2 == 1 and b % 2 == 1 and c % 2 == 1", t(-9, 55, -71)));
    }

    #[test]
    fn descending_is_strict() {
        assert!(!holds("a > b and b > c", t(5, 5, 3)));
        assert!(holds("a > b and b > c", t(5, 4, 3)));
    }

    #[test]
    fn boolean_terms_count_as_integers() {
        let src = "(a % 5 == 0) + (b % 5 == 0) + (c % 5 == 0) >= 2";
        assert!(holds(src, t(5, 10, 3)));
        assert!(!holds(src, t(5, 11, 3)));
        assert!(holds("(a < 0) + (b < 0) + (c < 0) in {1, 2}", t(-1, 2, 3)));
        assert!(!holds("(a < 0) + (b < 0) + (c < 0) in {1, 2}", t(-1, -2, -3)));
    }

    #[test]
    fn distinct_count_and_digits() {
        assert!(holds("distinct_count(a, b, c) == 2", t(4, 4, 7)));
        assert!(!holds("distinct_count(a, b, c) == 2", t(4, 4, 4)));
        assert!(holds("last_digit(a) == 1 and abs(b) % 10 == 1", t(-81, -11, 0)));
    }

    #[test]
    fn unknown_names_are_rejected_with_offset() {
        assert_eq!(
            parse_rule("a < sorted(b)"),
            Err(ParseError::UnknownIdentifier {
                offset: 4,
                name: "sorted".into()
            })
        );
        assert!(matches!(parse_rule("x > 0"), Err(ParseError::UnknownIdentifier { offset: 0, .. })));
    }

    #[test]
    fn syntax_errors_report_expected_tokens() {
        match parse_rule("a < ") {
            Err(ParseError::Syntax { offset, expected, found }) => {
                assert_eq!(offset, 4);
                assert!(expected.iter().any(|e| e.contains("integer")));
                assert_eq!(found, "end of input");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_rule("(a < b"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_rule("a < b c"), Err(ParseError::Syntax { offset: 6, .. })));
    }

    #[test]
    fn integer_valued_rules_are_type_errors() {
        assert!(matches!(parse_rule("a + b"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_rule("a < b and c"), Err(ParseError::Type { .. })));
        assert!(matches!(parse_rule("abs(a, b) > 0"), Err(ParseError::Type { .. })));
    }

    #[test]
    fn precedence_not_below_comparison_and_below_or() {
        // not binds looser than comparison: not (a < b)
        assert!(holds("not a < b", t(2, 1, 0)));
        // and binds tighter than or
        assert!(holds("a == 1 or a == 2 and b == 9", t(1, 0, 0)));
        assert!(!holds("(a == 1 or a == 2) and b == 9", t(1, 0, 0)));
        assert!(holds("a * 2 + 1 == 3", t(1, 0, 0)));
        assert!(holds("-a == 5", t(-5, 0, 0)));
    }

    #[test]
    fn serde_round_trips_through_source() {
        let rule = parse_rule(ALL_EVEN).unwrap();
        let json = serde_json::to_string(&rule).unwrap();
        let back: RuleExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rule);
        assert!(serde_json::from_str::<RuleExpr>("\"a <\"").is_err());
    }
}

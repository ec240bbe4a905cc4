//! Integer triples over the bounded rule domain.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest value a triple component may take.
pub const DOMAIN_MIN: i64 = -99;
/// Largest value a triple component may take.
pub const DOMAIN_MAX: i64 = 100;
/// Number of distinct values per component.
pub const DOMAIN_WIDTH: usize = (DOMAIN_MAX - DOMAIN_MIN + 1) as usize;
/// Number of points in the full cube.
pub const DOMAIN_SIZE: usize = DOMAIN_WIDTH * DOMAIN_WIDTH * DOMAIN_WIDTH;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("component {value} outside [{DOMAIN_MIN}, {DOMAIN_MAX}]")]
pub struct OutOfDomain {
    pub value: i64,
}

/// A point `(a, b, c)` of the rule domain. Ordering is lexicographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 3]", into = "[i64; 3]")]
pub struct Triple {
    a: i64,
    b: i64,
    c: i64,
}

impl Triple {
    pub const FIRST: Triple = Triple {
        a: DOMAIN_MIN,
        b: DOMAIN_MIN,
        c: DOMAIN_MIN,
    };

    pub fn new(a: i64, b: i64, c: i64) -> Result<Self, OutOfDomain> {
        for value in [a, b, c] {
            if !(DOMAIN_MIN..=DOMAIN_MAX).contains(&value) {
                return Err(OutOfDomain { value });
            }
        }
        Ok(Triple { a, b, c })
    }

    pub fn a(&self) -> i64 {
        self.a
    }

    pub fn b(&self) -> i64 {
        self.b
    }

    pub fn c(&self) -> i64 {
        self.c
    }

    pub fn values(&self) -> [i64; 3] {
        [self.a, self.b, self.c]
    }

    /// Position of this triple in lexicographic domain order.
    pub fn index(&self) -> usize {
        let w = DOMAIN_WIDTH;
        let off = |v: i64| (v - DOMAIN_MIN) as usize;
        (off(self.a) * w + off(self.b)) * w + off(self.c)
    }

    /// Inverse of [`Triple::index`]. Panics when `index >= DOMAIN_SIZE`.
    pub fn from_index(index: usize) -> Triple {
        assert!(index < DOMAIN_SIZE, "domain index {index} out of range");
        let w = DOMAIN_WIDTH;
        let val = |k: usize| k as i64 + DOMAIN_MIN;
        Triple {
            a: val(index / (w * w)),
            b: val((index / w) % w),
            c: val(index % w),
        }
    }

    /// All triples with first component `a`, in lexicographic order.
    pub(crate) fn slice(a: i64) -> impl Iterator<Item = Triple> {
        (DOMAIN_MIN..=DOMAIN_MAX)
            .flat_map(move |b| (DOMAIN_MIN..=DOMAIN_MAX).map(move |c| Triple { a, b, c }))
    }

    /// Every triple of the domain in lexicographic order.
    pub fn all() -> impl Iterator<Item = Triple> {
        (DOMAIN_MIN..=DOMAIN_MAX).flat_map(Triple::slice)
    }
}

impl TryFrom<[i64; 3]> for Triple {
    type Error = OutOfDomain;

    fn try_from([a, b, c]: [i64; 3]) -> Result<Self, Self::Error> {
        Triple::new(a, b, c)
    }
}

impl From<Triple> for [i64; 3] {
    fn from(t: Triple) -> Self {
        t.values()
    }
}

/// Renders as `[a, b, c]`, the form used in prompts and transcripts.
impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}]", self.a, self.b, self.c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_are_inclusive() {
        assert!(Triple::new(-99, 100, 0).is_ok());
        assert_eq!(Triple::new(-100, 0, 0), Err(OutOfDomain { value: -100 }));
        assert_eq!(Triple::new(0, 0, 101), Err(OutOfDomain { value: 101 }));
    }

    #[test]
    fn index_round_trips_at_the_corners() {
        assert_eq!(Triple::FIRST.index(), 0);
        let last = Triple::new(100, 100, 100).unwrap();
        assert_eq!(last.index(), DOMAIN_SIZE - 1);
        assert_eq!(Triple::from_index(DOMAIN_SIZE - 1), last);
        let t = Triple::new(-3, 17, 99).unwrap();
        assert_eq!(Triple::from_index(t.index()), t);
    }

    #[test]
    fn iteration_is_lexicographic() {
        let head: Vec<_> = Triple::all().take(3).collect();
        assert_eq!(head[0], Triple::FIRST);
        assert_eq!(head[2], Triple::new(-99, -99, -97).unwrap());
        assert!(Triple::all().take(500).collect::<Vec<_>>().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn serde_rejects_out_of_domain() {
        let t: Triple = serde_json::from_str("[12, -36, -36]").unwrap();
        assert_eq!(t.to_string(), "[12, -36, -36]");
        assert!(serde_json::from_str::<Triple>("[12, -36, 400]").is_err());
    }
}

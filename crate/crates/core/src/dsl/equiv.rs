//! Exhaustive comparison of rules over the bounded cube.
//!
//! Scans are split by first component and run on the rayon pool. Results are
//! reassembled in domain order, so they do not depend on how work is split.

use rayon::prelude::*;

use super::{EvalAt, RuleExpr};
use crate::triple::{Triple, DOMAIN_MAX, DOMAIN_MIN, DOMAIN_SIZE, DOMAIN_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equivalence {
    Equivalent,
    /// The lexicographically smallest triple on which the rules disagree.
    Differs(Triple),
}

impl Equivalence {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Equivalence::Equivalent)
    }

    pub fn witness(&self) -> Option<Triple> {
        match self {
            Equivalence::Equivalent => None,
            Equivalence::Differs(t) => Some(*t),
        }
    }
}

/// Compares two rules on every triple of the domain.
///
/// Evaluation errors surface with the first offending triple in domain order;
/// a disagreement that precedes an error wins.
pub fn rules_equivalent(r1: &RuleExpr, r2: &RuleExpr) -> Result<Equivalence, EvalAt> {
    let first = (DOMAIN_MIN..=DOMAIN_MAX)
        .into_par_iter()
        .map(|a| -> Result<Option<Triple>, EvalAt> {
            for x in Triple::slice(a) {
                if r1.eval_at(&x)? != r2.eval_at(&x)? {
                    return Ok(Some(x));
                }
            }
            Ok(None)
        })
        .find_first(|r| !matches!(r, Ok(None)));
    match first {
        None => Ok(Equivalence::Equivalent),
        Some(Ok(Some(t))) => Ok(Equivalence::Differs(t)),
        Some(Ok(None)) => unreachable!("filtered by find_first"),
        Some(Err(e)) => Err(e),
    }
}

const WORDS_PER_SLICE: usize = DOMAIN_WIDTH * DOMAIN_WIDTH / 64;

/// The set of triples a rule accepts, as a bitset in domain-index order.
#[derive(Clone, PartialEq, Eq)]
pub struct Extension {
    words: Vec<u64>,
}

impl std::fmt::Debug for Extension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Extension({} triples)", self.count())
    }
}

impl Extension {
    pub fn full() -> Self {
        Extension {
            words: vec![u64::MAX; DOMAIN_SIZE / 64],
        }
    }

    pub fn contains(&self, x: &Triple) -> bool {
        let i = x.index();
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersect(&mut self, other: &Extension) {
        for (w, o) in self.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
    }

    /// Members in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let bit = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(Triple::from_index(wi * 64 + bit))
            })
        })
    }
}

pub fn extension(rule: &RuleExpr) -> Result<Extension, EvalAt> {
    const _: () = assert!((DOMAIN_WIDTH * DOMAIN_WIDTH).is_multiple_of(64));
    let slices: Vec<Vec<u64>> = (DOMAIN_MIN..=DOMAIN_MAX)
        .into_par_iter()
        .map(|a| -> Result<Vec<u64>, EvalAt> {
            let mut words = vec![0u64; WORDS_PER_SLICE];
            for (i, x) in Triple::slice(a).enumerate() {
                if rule.eval_at(&x)? {
                    words[i / 64] |= 1 << (i % 64);
                }
            }
            Ok(words)
        })
        .collect::<Result<_, _>>()?;
    Ok(Extension {
        words: slices.concat(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_rule;

    #[test]
    fn ascending_vs_non_decreasing_witness() {
        let asc = parse_rule("a < b and b < c").unwrap();
        let nondec = parse_rule("a <= b and b <= c").unwrap();
        assert_eq!(rules_equivalent(&asc, &asc), Ok(Equivalence::Equivalent));
        // brute-force oracle: first triple in domain order where they differ
        let oracle = Triple::all()
            .find(|x| asc.eval(x).unwrap() != nondec.eval(x).unwrap())
            .unwrap();
        assert_eq!(oracle, Triple::new(-99, -99, -99).unwrap());
        assert_eq!(rules_equivalent(&asc, &nondec), Ok(Equivalence::Differs(oracle)));
    }

    #[test]
    fn all_even_vs_at_least_one_even() {
        let all = parse_rule("a % 2 == 0 and b % 2 == 0 and c % 2 == 0").unwrap();
        let one = parse_rule("a % 2 == 0 or b % 2 == 0 or c % 2 == 0").unwrap();
        let w = rules_equivalent(&all, &one).unwrap().witness().unwrap();
        let odd = w.values().iter().filter(|v| v.rem_euclid(2) == 1).count();
        assert!((1..3).contains(&odd), "witness {w} must mix parities");
    }

    #[test]
    fn syntactically_different_equivalent_rules() {
        let x = parse_rule("distinct_count(a, b, c) == 3").unwrap();
        let y = parse_rule("a != b and b != c and a != c").unwrap();
        assert!(rules_equivalent(&x, &y).unwrap().is_equivalent());
    }

    #[test]
    fn guard_errors_carry_the_first_triple() {
        let bad = parse_rule("b % a == 0 or a == a").unwrap();
        let ok = parse_rule("a == a").unwrap();
        let err = rules_equivalent(&ok, &bad).unwrap_err();
        assert_eq!(err.at, Triple::new(0, -99, -99).unwrap());
        assert!(extension(&bad).is_err());
    }

    #[test]
    fn extension_iterates_in_order() {
        let rule = parse_rule("a == 5 and b == -2").unwrap();
        let ext = extension(&rule).unwrap();
        assert_eq!(ext.count(), 200);
        let members: Vec<_> = ext.iter().collect();
        assert_eq!(members[0], Triple::new(5, -2, -99).unwrap());
        assert!(members.windows(2).all(|w| w[0] < w[1]));
        assert!(ext.contains(&Triple::new(5, -2, 100).unwrap()));
    }
}

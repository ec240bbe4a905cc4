use rayon::prelude::*;

use super::{CatalogError, RuleGroup};
use crate::dsl::EvalAt;
use crate::prng::SeededRng;
use crate::triple::{Triple, DOMAIN_MAX, DOMAIN_MIN};

/// All triples satisfying every rule of a group, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibleSet {
    pub group_id: u32,
    members: Vec<Triple>,
}

impl FeasibleSet {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[Triple] {
        &self.members
    }
}

pub fn enumerate_feasible(group: &RuleGroup) -> Result<FeasibleSet, EvalAt> {
    let slices: Vec<Vec<Triple>> = (DOMAIN_MIN..=DOMAIN_MAX)
        .into_par_iter()
        .map(|a| {
            let mut hits = Vec::new();
            for x in Triple::slice(a) {
                if group.accepts_all(&x)? {
                    hits.push(x);
                }
            }
            Ok(hits)
        })
        .collect::<Result<_, EvalAt>>()?;
    Ok(FeasibleSet {
        group_id: group.id,
        members: slices.concat(),
    })
}

/// Uniform draw of `n` members without replacement, in draw order.
pub fn sample_initial_triples(
    fs: &FeasibleSet,
    n: usize,
    seed: u64,
) -> Result<Vec<Triple>, CatalogError> {
    if n > fs.count() {
        return Err(CatalogError::InsufficientFeasible {
            group: fs.group_id,
            requested: n,
            available: fs.count(),
        });
    }
    let mut rng = SeededRng::derived(seed, fs.group_id as u64);
    Ok(rng
        .sample_indices(fs.count(), n)
        .into_iter()
        .map(|i| fs.members[i])
        .collect())
}

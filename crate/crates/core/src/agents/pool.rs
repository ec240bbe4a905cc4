//! Candidate-rule pools for the scripted agents.
//!
//! A Wason pool indexes the domain by truth pattern: for each combination of
//! candidate verdicts that occurs, it keeps the lexicographically first
//! triple with that pattern and how many triples share it. Every probe
//! choice the scripted agents make is a query over these patterns.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError, NamedRule};
use crate::dsl::{BlicketKind, BlicketRuleExpr, EvalAt, ObjectSet};
use crate::triple::{Triple, DOMAIN_MAX, DOMAIN_MIN};

/// Most candidates a Wason pool can track.
pub const MAX_CANDIDATES: usize = 64;

/// Largest relevant-set size considered by blicket pools by default.
pub const DEFAULT_BLICKET_K_MAX: u8 = 3;

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("a pool holds at most {MAX_CANDIDATES} candidates, got {0}")]
    TooLarge(usize),
    #[error("empty candidate pool")]
    Empty,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Eval(#[from] EvalAt),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatternEntry {
    /// Bit `i` set when candidate `i` accepts the triples of this pattern.
    pub mask: u64,
    /// Lexicographically first triple with this pattern.
    pub first: Triple,
    pub count: u64,
}

#[derive(Debug)]
pub struct WasonPool {
    candidates: Vec<NamedRule>,
    /// Sorted by `first`.
    patterns: Vec<PatternEntry>,
}

impl WasonPool {
    /// Candidates are ordered by name; duplicate names are dropped.
    pub fn new(mut candidates: Vec<NamedRule>) -> Result<WasonPool, PoolError> {
        candidates.sort_by(|a, b| a.name.cmp(&b.name));
        candidates.dedup_by(|a, b| a.name == b.name);
        if candidates.is_empty() {
            return Err(PoolError::Empty);
        }
        if candidates.len() > MAX_CANDIDATES {
            return Err(PoolError::TooLarge(candidates.len()));
        }
        let slices: Vec<HashMap<u64, (Triple, u64)>> = (DOMAIN_MIN..=DOMAIN_MAX)
            .into_par_iter()
            .map(|a| {
                let mut seen: HashMap<u64, (Triple, u64)> = HashMap::new();
                for x in Triple::slice(a) {
                    let mut mask = 0u64;
                    for (i, c) in candidates.iter().enumerate() {
                        if c.rule.eval_at(&x)? {
                            mask |= 1 << i;
                        }
                    }
                    seen.entry(mask).or_insert((x, 0)).1 += 1;
                }
                Ok(seen)
            })
            .collect::<Result<_, EvalAt>>()?;
        let mut merged: HashMap<u64, (Triple, u64)> = HashMap::new();
        for slice in slices {
            for (mask, (first, count)) in slice {
                let e = merged.entry(mask).or_insert((first, 0));
                e.0 = e.0.min(first);
                e.1 += count;
            }
        }
        let mut patterns: Vec<PatternEntry> = merged
            .into_iter()
            .map(|(mask, (first, count))| PatternEntry { mask, first, count })
            .collect();
        patterns.sort_by_key(|p| p.first);
        Ok(WasonPool {
            candidates,
            patterns,
        })
    }

    /// The four rules of a group plus any named catalog extension.
    pub fn for_group(catalog: &Catalog, group_id: u32, extension: &[String]) -> Result<WasonPool, PoolError> {
        let group = catalog.group(group_id)?;
        let mut candidates: Vec<NamedRule> = group.rules.to_vec();
        for name in extension {
            let rule = catalog
                .rule(name)
                .ok_or_else(|| CatalogError::UnknownRule {
                    group: group_id,
                    name: name.clone(),
                })?;
            candidates.push(rule.clone());
        }
        WasonPool::new(candidates)
    }

    pub fn candidates(&self) -> &[NamedRule] {
        &self.candidates
    }

    pub fn patterns(&self) -> &[PatternEntry] {
        &self.patterns
    }

    pub fn all_mask(&self) -> u64 {
        if self.candidates.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.candidates.len()) - 1
        }
    }

    /// Candidates consistent with every labelled observation.
    pub fn viable(&self, observations: &[(Triple, bool)]) -> Result<u64, EvalAt> {
        let mut mask = self.all_mask();
        for (i, c) in self.candidates.iter().enumerate() {
            for (x, y) in observations {
                if c.rule.eval_at(x)? != *y {
                    mask &= !(1 << i);
                    break;
                }
            }
        }
        Ok(mask)
    }

    /// First triple accepted by candidate `h`.
    pub fn confirm_probe(&self, h: usize) -> Triple {
        self.patterns
            .iter()
            .find(|p| p.mask & 1 << h != 0)
            .map(|p| p.first)
            .unwrap_or(Triple::FIRST)
    }

    /// First triple rejected by `h` but accepted by another viable candidate;
    /// falls back to the first triple rejected by `h`. The flag reports
    /// whether the probe discriminates.
    pub fn falsify_probe(&self, h: usize, viable: u64) -> (Triple, bool) {
        let others = viable & !(1 << h);
        if let Some(p) = self
            .patterns
            .iter()
            .find(|p| p.mask & 1 << h == 0 && p.mask & others != 0)
        {
            return (p.first, true);
        }
        let fallback = self
            .patterns
            .iter()
            .find(|p| p.mask & 1 << h == 0)
            .map(|p| p.first)
            .unwrap_or(Triple::FIRST);
        (fallback, false)
    }

    /// Triple maximizing `min(accepting, rejecting)` over viable candidates,
    /// ties broken by the earlier triple. Returns the score as well.
    pub fn split_probe(&self, viable: u64) -> (Triple, u32) {
        let total = viable.count_ones();
        let mut best = (Triple::FIRST, 0u32);
        for p in &self.patterns {
            let yes = (p.mask & viable).count_ones();
            let score = yes.min(total - yes);
            if score > best.1 {
                best = (p.first, score);
            }
        }
        best
    }
}

/// Pools shared across episodes, built once per rule group.
///
/// Building runs a parallel scan, so no lock is held while building: a
/// rayon worker waiting on a lock could otherwise steal a task that needs
/// the same lock. Concurrent first requests may build the same pool twice;
/// the first result stored wins.
#[derive(Debug, Default)]
pub struct PoolCache {
    extension: Vec<String>,
    pools: Mutex<HashMap<u32, Arc<WasonPool>>>,
}

impl PoolCache {
    pub fn new(extension: Vec<String>) -> Self {
        PoolCache {
            extension,
            pools: Mutex::default(),
        }
    }

    pub fn get(&self, catalog: &Catalog, group_id: u32) -> Result<Arc<WasonPool>, String> {
        if let Some(p) = self.pools.lock().expect("pool cache lock").get(&group_id) {
            return Ok(p.clone());
        }
        let built = WasonPool::for_group(catalog, group_id, &self.extension).map_err(|e| e.to_string())?;
        Ok(self
            .pools
            .lock()
            .expect("pool cache lock")
            .entry(group_id)
            .or_insert_with(|| Arc::new(built))
            .clone())
    }
}

/// (relevant set, kind) candidates over the objects of one episode.
#[derive(Debug, Clone)]
pub struct BlicketPool {
    num_objects: u8,
    candidates: Vec<BlicketRuleExpr>,
    placements: Vec<ObjectSet>,
}

impl BlicketPool {
    /// All candidates with `1 <= |relevant| <= k_max`, ordered by size, then
    /// by id list, then kind.
    pub fn new(num_objects: u8, k_max: u8) -> BlicketPool {
        let placements = ObjectSet::all_subsets(num_objects);
        let mut sets: Vec<ObjectSet> = placements
            .iter()
            .copied()
            .filter(|s| (1..=k_max as usize).contains(&s.len()))
            .collect();
        sets.sort_by_key(|s| (s.len(), s.ids().collect::<Vec<_>>()));
        let candidates = sets
            .into_iter()
            .flat_map(|s| {
                BlicketKind::ALL
                    .into_iter()
                    .map(move |k| BlicketRuleExpr::new(s, k).expect("non-empty"))
            })
            .collect();
        BlicketPool {
            num_objects,
            candidates,
            placements,
        }
    }

    pub fn num_objects(&self) -> u8 {
        self.num_objects
    }

    pub fn candidates(&self) -> &[BlicketRuleExpr] {
        &self.candidates
    }

    /// Every placement in id-list order, empty first.
    pub fn placements(&self) -> &[ObjectSet] {
        &self.placements
    }

    pub fn viable(&self, observations: &[(ObjectSet, bool)]) -> Vec<usize> {
        (0..self.candidates.len())
            .filter(|&i| observations.iter().all(|(s, y)| self.candidates[i].eval(*s) == *y))
            .collect()
    }

    pub fn confirm_probe(&self, h: usize) -> ObjectSet {
        let rule = self.candidates[h];
        self.placements
            .iter()
            .copied()
            .find(|s| rule.eval(*s))
            .unwrap_or(ObjectSet::EMPTY)
    }

    pub fn falsify_probe(&self, h: usize, viable: &[usize]) -> (ObjectSet, bool) {
        let rule = self.candidates[h];
        let found = self.placements.iter().copied().find(|s| {
            !rule.eval(*s) && viable.iter().any(|&j| j != h && self.candidates[j].eval(*s))
        });
        match found {
            Some(s) => (s, true),
            None => (
                self.placements
                    .iter()
                    .copied()
                    .find(|s| !rule.eval(*s))
                    .unwrap_or(ObjectSet::EMPTY),
                false,
            ),
        }
    }

    pub fn split_probe(&self, viable: &[usize]) -> (ObjectSet, usize) {
        let mut best = (ObjectSet::EMPTY, 0usize);
        for s in &self.placements {
            let yes = viable.iter().filter(|&&j| self.candidates[j].eval(*s)).count();
            let score = yes.min(viable.len() - yes);
            if score > best.1 {
                best = (*s, score);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(names: &[&str]) -> Vec<NamedRule> {
        names
            .iter()
            .map(|n| Catalog::builtin().rule(n).unwrap_or_else(|| panic!("{n}")).clone())
            .collect()
    }

    #[test]
    fn pattern_index_matches_brute_force() {
        let pool = WasonPool::new(named(&["All even", "Ascending"])).unwrap();
        let total: u64 = pool.patterns().iter().map(|p| p.count).sum();
        assert_eq!(total as usize, crate::triple::DOMAIN_SIZE);
        for p in pool.patterns() {
            let oracle = Triple::all()
                .find(|x| {
                    let m = pool
                        .candidates()
                        .iter()
                        .enumerate()
                        .fold(0u64, |m, (i, c)| m | (c.rule.eval(x).unwrap() as u64) << i);
                    m == p.mask
                })
                .unwrap();
            assert_eq!(oracle, p.first, "mask {:b}", p.mask);
        }
    }

    #[test]
    fn probes_for_documented_hypotheses() {
        let pool = WasonPool::new(named(&["All even", "Ascending"])).unwrap();
        let even = pool.candidates().iter().position(|c| c.name == "All even").unwrap();
        let asc = pool.candidates().iter().position(|c| c.name == "Ascending").unwrap();
        assert_eq!(pool.confirm_probe(even), Triple::new(-98, -98, -98).unwrap());
        assert_eq!(pool.confirm_probe(asc), Triple::new(-99, -98, -97).unwrap());
        // (2,4,2): all even, not ascending; a YES removes Ascending
        let viable = pool.viable(&[(Triple::new(2, 4, 2).unwrap(), true)]).unwrap();
        assert_eq!(viable, 1 << even);
    }

    #[test]
    fn falsify_probe_discriminates_when_possible() {
        let pool = WasonPool::new(named(&["All even", "At least one even"])).unwrap();
        let even = pool.candidates().iter().position(|c| c.name == "All even").unwrap();
        let (x, discriminating) = pool.falsify_probe(even, pool.all_mask());
        assert!(discriminating);
        let odd = x.values().iter().filter(|v| v.rem_euclid(2) == 1).count();
        assert!((1..=2).contains(&odd), "{x}");
        let oracle = Triple::all()
            .find(|t| {
                let v = t.values();
                !v.iter().all(|n| n % 2 == 0) && v.iter().any(|n| n % 2 == 0)
            })
            .unwrap();
        assert_eq!(x, oracle);
        // with no viable alternative the probe is any rejected triple
        let (y, discriminating) = pool.falsify_probe(even, 1 << even);
        assert!(!discriminating);
        assert!(!pool.candidates()[even].rule.eval(&y).unwrap());
    }

    #[test]
    fn blicket_pool_shape() {
        let pool = BlicketPool::new(4, 3);
        assert_eq!(pool.candidates().len(), 3 * (4 + 6 + 4));
        assert_eq!(pool.placements().len(), 16);
        let conj01 = pool
            .candidates()
            .iter()
            .position(|c| c.relevant() == ObjectSet::from_ids([0, 1]).unwrap() && c.kind() == BlicketKind::Conjunctive)
            .unwrap();
        assert_eq!(pool.confirm_probe(conj01), ObjectSet::from_ids([0, 1]).unwrap());
        let (probe, _) = pool.split_probe(&(0..pool.candidates().len()).collect::<Vec<_>>());
        assert!(!probe.is_empty());
    }
}

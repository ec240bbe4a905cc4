use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Most objects an episode may contain.
pub const MAX_OBJECTS: u8 = 32;

/// A set of object ids, stored as a bitmask. Serialized as a sorted id list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct ObjectSet(u32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObjectSetError {
    #[error("object id {0} exceeds the supported maximum of {max}", max = MAX_OBJECTS - 1)]
    IdTooLarge(u8),
    #[error("object {0} listed twice")]
    Duplicate(u8),
}

impl ObjectSet {
    pub const EMPTY: ObjectSet = ObjectSet(0);

    pub fn from_bits(bits: u32) -> Self {
        ObjectSet(bits)
    }

    pub fn bits(&self) -> u32 {
        self.0
    }

    /// Objects `0..n`.
    pub fn universe(n: u8) -> Self {
        assert!(n <= MAX_OBJECTS);
        ObjectSet(if n == 32 { u32::MAX } else { (1u32 << n) - 1 })
    }

    pub fn from_ids<I: IntoIterator<Item = u8>>(ids: I) -> Result<Self, ObjectSetError> {
        let mut bits = 0u32;
        for id in ids {
            if id >= MAX_OBJECTS {
                return Err(ObjectSetError::IdTooLarge(id));
            }
            if bits & (1 << id) != 0 {
                return Err(ObjectSetError::Duplicate(id));
            }
            bits |= 1 << id;
        }
        Ok(ObjectSet(bits))
    }

    pub fn contains(&self, id: u8) -> bool {
        id < MAX_OBJECTS && self.0 & (1 << id) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn intersection(&self, other: &ObjectSet) -> ObjectSet {
        ObjectSet(self.0 & other.0)
    }

    pub fn is_subset(&self, other: &ObjectSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        (0..MAX_OBJECTS).filter(move |&i| self.contains(i))
    }

    /// All subsets of `0..n`, ordered by their sorted id lists.
    pub fn all_subsets(n: u8) -> Vec<ObjectSet> {
        assert!(n <= 16, "enumerating subsets of {n} objects");
        let mut subsets: Vec<ObjectSet> = (0..1u32 << n).map(ObjectSet).collect();
        subsets.sort_by_key(|s| s.ids().collect::<Vec<_>>());
        subsets
    }

    /// `[object 0, object 2]`, the bracketed list used in prompts.
    pub fn to_object_list(&self) -> String {
        let names: Vec<String> = self.ids().map(|i| format!("object {i}")).collect();
        format!("[{}]", names.join(", "))
    }
}

impl TryFrom<Vec<u8>> for ObjectSet {
    type Error = ObjectSetError;

    fn try_from(ids: Vec<u8>) -> Result<Self, Self::Error> {
        ObjectSet::from_ids(ids)
    }
}

impl From<ObjectSet> for Vec<u8> {
    fn from(s: ObjectSet) -> Self {
        s.ids().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlicketKind {
    Conjunctive,
    Disjunctive,
    Xor,
}

impl BlicketKind {
    pub const ALL: [BlicketKind; 3] = [
        BlicketKind::Conjunctive,
        BlicketKind::Disjunctive,
        BlicketKind::Xor,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BlicketKind::Conjunctive => "conjunctive",
            BlicketKind::Disjunctive => "disjunctive",
            BlicketKind::Xor => "xor",
        }
    }

    /// Short label used in dataset tables: AND / OR / XOR.
    pub fn label(&self) -> &'static str {
        match self {
            BlicketKind::Conjunctive => "AND",
            BlicketKind::Disjunctive => "OR",
            BlicketKind::Xor => "XOR",
        }
    }
}

impl fmt::Display for BlicketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("a blicket rule needs at least one relevant object")]
pub struct EmptyRelevantSet;

/// Hidden activation rule for the blicket detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawBlicketRule")]
pub struct BlicketRuleExpr {
    relevant: ObjectSet,
    kind: BlicketKind,
}

#[derive(Deserialize)]
struct RawBlicketRule {
    relevant: ObjectSet,
    kind: BlicketKind,
}

impl TryFrom<RawBlicketRule> for BlicketRuleExpr {
    type Error = EmptyRelevantSet;

    fn try_from(raw: RawBlicketRule) -> Result<Self, Self::Error> {
        BlicketRuleExpr::new(raw.relevant, raw.kind)
    }
}

impl BlicketRuleExpr {
    pub fn new(relevant: ObjectSet, kind: BlicketKind) -> Result<Self, EmptyRelevantSet> {
        if relevant.is_empty() {
            return Err(EmptyRelevantSet);
        }
        Ok(BlicketRuleExpr { relevant, kind })
    }

    pub fn relevant(&self) -> ObjectSet {
        self.relevant
    }

    pub fn kind(&self) -> BlicketKind {
        self.kind
    }

    pub fn eval(&self, placed: ObjectSet) -> bool {
        eval_blicket(self, placed)
    }

    /// DSL form: `relevant=[object 0, object 1]; rule=conjunctive`.
    pub fn to_dsl(&self) -> String {
        format!("relevant={}; rule={}", self.relevant.to_object_list(), self.kind)
    }
}

pub fn eval_blicket(rule: &BlicketRuleExpr, placed: ObjectSet) -> bool {
    let hits = rule.relevant.intersection(&placed).len();
    match rule.kind {
        BlicketKind::Disjunctive => hits >= 1,
        BlicketKind::Conjunctive => rule.relevant.is_subset(&placed),
        BlicketKind::Xor => hits == 1,
    }
}

//! Published rule groups, feasible sets, and episode datasets.

mod dataset;
mod feasible;

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_rule, EvalAt, ParseError, RuleExpr};
use crate::triple::Triple;

pub use dataset::{
    build_blicket_dataset, build_wason_dataset, BlicketConfig,
    BlicketSpec, EpisodeSpec, Protocol, SpecError, TaskSpec, WasonDataset, WasonSpec,
    BLICKET_EPISODES_PER_CONFIG, TURN_BUDGET,
};
pub use feasible::{enumerate_feasible, sample_initial_triples, FeasibleSet};

/// Default sampling seed for initial triples.
pub const DEFAULT_SEED: u64 = 1337;

const BUILTIN_CATALOG: &str = include_str!("../../assets/catalog.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    /// Initial triples drawn per group.
    pub fn triples_per_group(&self) -> usize {
        match self {
            Split::Train => 100,
            Split::Validation => 2,
            Split::Test => 5,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (train, validation, test)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("catalog file is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("rule `{name}` does not parse: {error}")]
    Rule { name: String, error: ParseError },
    #[error("rule `{0}` is defined twice")]
    DuplicateRule(String),
    #[error("group {group} refers to unknown rule `{name}`")]
    UnknownRule { group: u32, name: String },
    #[error("unknown group id {0}")]
    UnknownGroup(u32),
    #[error("group {group}: {message}")]
    BadGroup { group: u32, message: String },
    #[error("fixture {triple:?} refers to unknown group {group}")]
    BadFixture { group: u32, triple: [i64; 3] },
    #[error("requested {requested} triples but group {group} has only {available}")]
    InsufficientFeasible {
        group: u32,
        requested: usize,
        available: usize,
    },
    #[error(transparent)]
    Eval(#[from] EvalAt),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedRule {
    pub name: String,
    pub rule: RuleExpr,
}

#[derive(Debug, Clone)]
pub struct RuleGroup {
    pub id: u32,
    pub split: Split,
    pub rules: [NamedRule; 4],
    pub human_rule_index: usize,
    /// Feasible-set size reported alongside the published groups.
    pub published_feasible: u64,
}

impl RuleGroup {
    pub fn rule_names(&self) -> impl Iterator<Item = &str> {
        self.rules.iter().map(|r| r.name.as_str())
    }

    pub fn accepts_all(&self, x: &Triple) -> Result<bool, EvalAt> {
        for r in &self.rules {
            if !r.rule.eval_at(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fixture {
    pub group: u32,
    pub triple: Triple,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    rules: Vec<NamedRule>,
    groups: Vec<RuleGroup>,
    fixtures: Vec<Fixture>,
}

#[derive(Deserialize)]
struct RawCatalog {
    #[allow(dead_code)]
    version: String,
    rule: Vec<RawRule>,
    group: Vec<RawGroup>,
    #[serde(default)]
    fixture: Vec<RawFixture>,
}

#[derive(Deserialize)]
struct RawRule {
    name: String,
    dsl: String,
}

#[derive(Deserialize)]
struct RawGroup {
    id: u32,
    split: Split,
    rules: Vec<String>,
    human: usize,
    published_feasible: u64,
}

#[derive(Deserialize)]
struct RawFixture {
    group: u32,
    triple: [i64; 3],
}

impl Catalog {
    /// The catalog shipped with the crate.
    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Catalog::from_toml(BUILTIN_CATALOG).expect("embedded catalog is well-formed")
        })
    }

    pub fn from_toml(text: &str) -> Result<Catalog, CatalogError> {
        let raw: RawCatalog = toml::from_str(text)?;
        let mut rules: Vec<NamedRule> = Vec::with_capacity(raw.rule.len());
        for r in raw.rule {
            if rules.iter().any(|x| x.name == r.name) {
                return Err(CatalogError::DuplicateRule(r.name));
            }
            let rule = parse_rule(&r.dsl).map_err(|error| CatalogError::Rule {
                name: r.name.clone(),
                error,
            })?;
            rules.push(NamedRule { name: r.name, rule });
        }
        let mut groups = Vec::with_capacity(raw.group.len());
        for g in raw.group {
            if g.rules.len() != 4 {
                return Err(CatalogError::BadGroup {
                    group: g.id,
                    message: format!("expected 4 rules, found {}", g.rules.len()),
                });
            }
            if g.human >= 4 {
                return Err(CatalogError::BadGroup {
                    group: g.id,
                    message: format!("human rule index {} out of range", g.human),
                });
            }
            let lookup = |name: &String| {
                rules
                    .iter()
                    .find(|r| &r.name == name)
                    .cloned()
                    .ok_or_else(|| CatalogError::UnknownRule {
                        group: g.id,
                        name: name.clone(),
                    })
            };
            let members = [
                lookup(&g.rules[0])?,
                lookup(&g.rules[1])?,
                lookup(&g.rules[2])?,
                lookup(&g.rules[3])?,
            ];
            groups.push(RuleGroup {
                id: g.id,
                split: g.split,
                rules: members,
                human_rule_index: g.human,
                published_feasible: g.published_feasible,
            });
        }
        let mut fixtures = Vec::with_capacity(raw.fixture.len());
        for f in raw.fixture {
            let bad = || CatalogError::BadFixture {
                group: f.group,
                triple: f.triple,
            };
            if !groups.iter().any(|g| g.id == f.group) {
                return Err(bad());
            }
            let triple = Triple::try_from(f.triple).map_err(|_| bad())?;
            fixtures.push(Fixture {
                group: f.group,
                triple,
            });
        }
        Ok(Catalog {
            rules,
            groups,
            fixtures,
        })
    }

    pub fn rules(&self) -> &[NamedRule] {
        &self.rules
    }

    pub fn rule(&self, name: &str) -> Option<&NamedRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Case-insensitive lookup by rule name.
    pub fn rule_by_name_loose(&self, name: &str) -> Option<&NamedRule> {
        let needle = name.trim().trim_end_matches('.');
        self.rules.iter().find(|r| r.name.eq_ignore_ascii_case(needle))
    }

    pub fn groups(&self) -> &[RuleGroup] {
        &self.groups
    }

    pub fn group(&self, id: u32) -> Result<&RuleGroup, CatalogError> {
        self.groups
            .iter()
            .find(|g| g.id == id)
            .ok_or(CatalogError::UnknownGroup(id))
    }

    pub fn groups_in(&self, split: Split) -> impl Iterator<Item = &RuleGroup> {
        self.groups.iter().filter(move |g| g.split == split)
    }

    pub fn fixtures(&self) -> &[Fixture] {
        &self.fixtures
    }

    pub fn fixtures_for(&self, group: u32) -> Vec<Triple> {
        self.fixtures
            .iter()
            .filter(|f| f.group == group)
            .map(|f| f.triple)
            .collect()
    }
}

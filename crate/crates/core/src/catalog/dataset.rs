use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{enumerate_feasible, sample_initial_triples, Catalog, CatalogError, Split};
use crate::dsl::{eval_blicket, BlicketKind, BlicketRuleExpr, ObjectSet, RuleExpr};
use crate::prng::SeededRng;
use crate::triple::Triple;

/// Test turns per episode.
pub const TURN_BUDGET: u32 = 45;

pub const BLICKET_EPISODES_PER_CONFIG: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Baseline,
    DualGoal,
    ThinkInOpposites,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Baseline, Protocol::DualGoal, Protocol::ThinkInOpposites];

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Baseline => "baseline",
            Protocol::DualGoal => "dual_goal",
            Protocol::ThinkInOpposites => "think_in_opposites",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Protocol::Baseline),
            "dual_goal" | "dual-goal" => Ok(Protocol::DualGoal),
            "think_in_opposites" | "tio" | "think-in-opposites" => Ok(Protocol::ThinkInOpposites),
            other => Err(format!(
                "unknown protocol `{other}` (baseline, dual_goal, think_in_opposites)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WasonSpec {
    pub group_id: u32,
    pub target_name: String,
    pub target: RuleExpr,
    pub initial: Triple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlicketConfig {
    pub num_objects: u8,
    pub num_blickets: u8,
    pub kind: BlicketKind,
}

impl BlicketConfig {
    pub fn all() -> Vec<BlicketConfig> {
        let mut out = Vec::new();
        for num_objects in [4, 8] {
            for num_blickets in [2, 3] {
                for kind in BlicketKind::ALL {
                    out.push(BlicketConfig {
                        num_objects,
                        num_blickets,
                        kind,
                    });
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("n{}-k{}-{}", self.num_objects, self.num_blickets, self.kind.label().to_lowercase())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlicketSpec {
    pub config: BlicketConfig,
    pub target: BlicketRuleExpr,
    pub initial_placement: ObjectSet,
    pub initial_device_on: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum TaskSpec {
    Wason(WasonSpec),
    Blicket(BlicketSpec),
}

/// One game instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub episode_id: String,
    pub split: Split,
    pub protocol: Protocol,
    pub turn_budget: u32,
    #[serde(flatten)]
    pub task: TaskSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpecError {
    #[error("{id}: initial triple {initial} does not satisfy the target rule")]
    InitialRejected { id: String, initial: Triple },
    #[error("{id}: blicket episodes do not support the dual_goal protocol")]
    DualGoalBlicket { id: String },
    #[error("{id}: {message}")]
    BadBlicket { id: String, message: String },
    #[error("{id}: turn budget must be positive")]
    ZeroBudget { id: String },
}

impl EpisodeSpec {
    pub fn wason(&self) -> Option<&WasonSpec> {
        match &self.task {
            TaskSpec::Wason(w) => Some(w),
            TaskSpec::Blicket(_) => None,
        }
    }

    pub fn blicket(&self) -> Option<&BlicketSpec> {
        match &self.task {
            TaskSpec::Blicket(b) => Some(b),
            TaskSpec::Wason(_) => None,
        }
    }

    pub fn with_protocol(&self, protocol: Protocol) -> EpisodeSpec {
        EpisodeSpec {
            protocol,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let id = || self.episode_id.clone();
        if self.turn_budget == 0 {
            return Err(SpecError::ZeroBudget { id: id() });
        }
        match &self.task {
            TaskSpec::Wason(w) => {
                if w.target.eval(&w.initial) != Ok(true) {
                    return Err(SpecError::InitialRejected {
                        id: id(),
                        initial: w.initial,
                    });
                }
            }
            TaskSpec::Blicket(b) => {
                if self.protocol == Protocol::DualGoal {
                    return Err(SpecError::DualGoalBlicket { id: id() });
                }
                let bad = |message: String| SpecError::BadBlicket { id: id(), message };
                let c = b.config;
                if !matches!(c.num_objects, 4 | 8) || !matches!(c.num_blickets, 2 | 3) {
                    return Err(bad(format!(
                        "unsupported configuration N={} K={}",
                        c.num_objects, c.num_blickets
                    )));
                }
                let universe = ObjectSet::universe(c.num_objects);
                if b.target.kind() != c.kind
                    || b.target.relevant().len() != c.num_blickets as usize
                    || !b.target.relevant().is_subset(&universe)
                {
                    return Err(bad("target does not match configuration".into()));
                }
                if !b.initial_placement.is_subset(&universe) {
                    return Err(bad("initial placement names unknown objects".into()));
                }
                if eval_blicket(&b.target, b.initial_placement) != b.initial_device_on {
                    return Err(bad("initial device state disagrees with the rule".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct WasonDataset {
    pub train: Vec<EpisodeSpec>,
    pub validation: Vec<EpisodeSpec>,
    pub test: Vec<EpisodeSpec>,
}

impl WasonDataset {
    pub fn split(&self, split: Split) -> &[EpisodeSpec] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Builds the three Wason splits. Test groups use the shipped fixture
/// triples; other splits draw from each group's feasible set with `seed`.
pub fn build_wason_dataset(catalog: &Catalog, seed: u64) -> Result<WasonDataset, CatalogError> {
    let mut by_split = Split::ALL.map(|_| Vec::new());
    for group in catalog.groups() {
        let per_group = group.split.triples_per_group();
        let fixtures = catalog.fixtures_for(group.id);
        let triples = if group.split == Split::Test && fixtures.len() >= per_group {
            fixtures[..per_group].to_vec()
        } else {
            let fs = enumerate_feasible(group)?;
            sample_initial_triples(&fs, per_group, seed)?
        };
        let out = &mut by_split[group.split as usize];
        for (ti, initial) in triples.into_iter().enumerate() {
            for (ri, target) in group.rules.iter().enumerate() {
                out.push(EpisodeSpec {
                    episode_id: format!("wason-{}-g{:02}-x{:03}-r{}", group.split, group.id, ti, ri),
                    split: group.split,
                    protocol: Protocol::Baseline,
                    turn_budget: TURN_BUDGET,
                    task: TaskSpec::Wason(WasonSpec {
                        group_id: group.id,
                        target_name: target.name.clone(),
                        target: target.rule.clone(),
                        initial,
                    }),
                });
            }
        }
    }
    let [train, validation, test] = by_split;
    Ok(WasonDataset {
        train,
        validation,
        test,
    })
}

/// Builds the 192 blicket episodes: 16 distinct (blicket set, initial
/// placement) pairs per configuration, drawn without replacement. Empty
/// initial placements are not drawn.
pub fn build_blicket_dataset(seed: u64) -> Vec<EpisodeSpec> {
    let mut out = Vec::new();
    for (ci, config) in BlicketConfig::all().into_iter().enumerate() {
        let subsets = ObjectSet::all_subsets(config.num_objects);
        let blicket_sets: Vec<ObjectSet> = subsets
            .iter()
            .copied()
            .filter(|s| s.len() == config.num_blickets as usize)
            .collect();
        let placements: Vec<ObjectSet> = subsets.into_iter().filter(|s| !s.is_empty()).collect();
        let mut rng = SeededRng::derived(seed, 0xb11c_0000 + ci as u64);
        let picks = rng.sample_indices(blicket_sets.len() * placements.len(), BLICKET_EPISODES_PER_CONFIG);
        for (i, pick) in picks.into_iter().enumerate() {
            let relevant = blicket_sets[pick / placements.len()];
            let placement = placements[pick % placements.len()];
            let target = BlicketRuleExpr::new(relevant, config.kind).expect("K >= 2");
            out.push(EpisodeSpec {
                episode_id: format!("blicket-{}-{:02}", config.label(), i),
                split: Split::Test,
                protocol: Protocol::Baseline,
                turn_budget: TURN_BUDGET,
                task: TaskSpec::Blicket(BlicketSpec {
                    config,
                    target,
                    initial_placement: placement,
                    initial_device_on: eval_blicket(&target, placement),
                }),
            });
        }
    }
    out
}

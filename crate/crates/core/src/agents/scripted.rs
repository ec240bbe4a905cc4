//! Deterministic agents with fixed testing strategies.
//!
//! All three announce the first candidate still consistent with the
//! evidence, written in canonical rule DSL. They differ only in probes:
//! confirm tests a case the hypothesis accepts, falsify tests a case it
//! rejects that some rival accepts, and elimination tests whichever case
//! splits the surviving candidates most evenly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::pool::{BlicketPool, WasonPool};
use super::{Agent, AgentError, AgentReply, AgentView};
use crate::catalog::Protocol;
use crate::dsl::ObjectSet;
use crate::engine::{word_count, Evidence, TurnKind};
use crate::prng::{hash_str, SeededRng};
use crate::triple::{Triple, DOMAIN_MIN, DOMAIN_WIDTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Confirm,
    Falsify,
    Elimination,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Confirm, Strategy::Falsify, Strategy::Elimination];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Confirm => "confirm",
            Strategy::Falsify => "falsify",
            Strategy::Elimination => "elimination",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "confirm" | "confirm-bot" => Ok(Strategy::Confirm),
            "falsify" | "falsify-bot" => Ok(Strategy::Falsify),
            "elimination" => Ok(Strategy::Elimination),
            other => Err(format!("unknown strategy `{other}` (confirm, falsify, elimination)")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ScriptedPool {
    Wason(Arc<WasonPool>),
    Blicket(BlicketPool),
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    strategy: Strategy,
    pool: ScriptedPool,
}

impl ScriptedAgent {
    pub fn new(strategy: Strategy, pool: ScriptedPool) -> Self {
        ScriptedAgent { strategy, pool }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn wason(&self, pool: &WasonPool, view: &AgentView<'_>) -> Result<String, AgentError> {
        let viable = pool
            .viable(&view.evidence.wason_observations())
            .map_err(|e| AgentError::Other(e.to_string()))?;
        let h = (viable != 0).then(|| viable.trailing_zeros() as usize);
        Ok(match view.kind {
            TurnKind::Guess => {
                let dsl = h.map(|h| pool.candidates()[h].rule.source().to_string());
                announce_rule(view.protocol, dsl.as_deref().unwrap_or("false"))
            }
            TurnKind::Test => {
                let x = match (h, self.strategy) {
                    (None, _) => random_triple(view),
                    (Some(h), Strategy::Confirm) => pool.confirm_probe(h),
                    (Some(h), Strategy::Falsify) => pool.falsify_probe(h, viable).0,
                    (Some(h), Strategy::Elimination) => match pool.split_probe(viable) {
                        (x, score) if score > 0 => x,
                        _ => pool.confirm_probe(h),
                    },
                };
                format!("Check: {x}")
            }
        })
    }

    fn blicket(&self, pool: &BlicketPool, view: &AgentView<'_>) -> String {
        let viable = pool.viable(&view.evidence.blicket_observations());
        let h = viable.first().copied();
        match view.kind {
            TurnKind::Guess => match h {
                Some(h) => format!("Announce: {}", pool.candidates()[h].to_dsl()),
                None => "Announce: relevant=[]; rule=unknown".to_string(),
            },
            TurnKind::Test => {
                let s = match (h, self.strategy) {
                    (None, _) => random_placement(view, pool.num_objects()),
                    (Some(h), Strategy::Confirm) => pool.confirm_probe(h),
                    (Some(h), Strategy::Falsify) => pool.falsify_probe(h, &viable).0,
                    (Some(h), Strategy::Elimination) => match pool.split_probe(&viable) {
                        (s, score) if score > 0 => s,
                        _ => pool.confirm_probe(h),
                    },
                };
                format!("Test: {}", s.to_object_list())
            }
        }
    }
}

/// Announcement line(s) for a DSL hypothesis under a protocol. Dual-goal
/// announcements pair the rule with its literal complement.
pub fn announce_rule(protocol: Protocol, dsl: &str) -> String {
    match protocol {
        Protocol::DualGoal => {
            format!("Announce: DAX rule - {dsl}\nAnnounce: MED rule - not ({dsl})")
        }
        _ => format!("Announce: {dsl}"),
    }
}

fn episode_rng(view: &AgentView<'_>) -> SeededRng {
    SeededRng::derived(hash_str(view.episode_id), view.turn as u64)
}

fn random_triple(view: &AgentView<'_>) -> Triple {
    let mut rng = episode_rng(view);
    let mut v = || DOMAIN_MIN + rng.below(DOMAIN_WIDTH as u32) as i64;
    Triple::new(v(), v(), v()).expect("in domain")
}

fn random_placement(view: &AgentView<'_>, num_objects: u8) -> ObjectSet {
    let bits = episode_rng(view).below(1 << num_objects);
    ObjectSet::from_bits(bits)
}

impl Agent for ScriptedAgent {
    fn act(&mut self, view: &AgentView<'_>) -> Result<AgentReply, AgentError> {
        let text = match (&self.pool, view.evidence) {
            (ScriptedPool::Wason(pool), Evidence::Wason { .. }) => self.wason(pool, view)?,
            (ScriptedPool::Blicket(pool), Evidence::Blicket { .. }) => self.blicket(pool, view),
            _ => return Err(AgentError::Other("pool does not match the task".into())),
        };
        Ok(AgentReply {
            tokens: word_count(&text),
            text,
        })
    }
}

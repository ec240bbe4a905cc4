//! Agent interface, the episode driver, and agent construction from config.

pub mod chat;
pub mod pool;
pub mod scripted;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, EpisodeSpec, Protocol, SpecError, TaskSpec};
use crate::engine::{Episode, EpisodeStatus, Evidence, FormatError, TurnKind, TurnRecord, DEFAULT_RETRY_CAP};

use chat::{ChatClient, ChatError, ChatMessage, Decoding, EndpointConfig, Limiter};
use pool::{BlicketPool, PoolCache, DEFAULT_BLICKET_K_MAX};
use scripted::{ScriptedAgent, ScriptedPool, Strategy};

/// Everything an agent may see when producing its next output.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub episode_id: &'a str,
    pub protocol: Protocol,
    pub kind: TurnKind,
    pub turn: u32,
    /// The message to answer, with a format notice after a rejected output.
    pub instruction: &'a str,
    /// Accepted turns so far.
    pub history: &'a [TurnRecord],
    pub evidence: &'a Evidence,
    pub retry: Option<&'a FormatError>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentReply {
    pub text: String,
    pub tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("token budget exceeded: {0}")]
    Budget(String),
    #[error("{0}")]
    Other(String),
}

pub trait Agent: Send {
    fn act(&mut self, view: &AgentView<'_>) -> Result<AgentReply, AgentError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLimits {
    pub retry_cap: u32,
    /// Total tokens an episode may spend, retries included.
    pub max_episode_tokens: Option<u64>,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            retry_cap: DEFAULT_RETRY_CAP,
            max_episode_tokens: None,
        }
    }
}

/// Plays one episode to completion or abort and returns the final state.
pub fn run_episode(spec: EpisodeSpec, agent: &mut dyn Agent, limits: &RunLimits) -> Result<Episode, SpecError> {
    let id = spec.episode_id.clone();
    let protocol = spec.protocol;
    let mut ep = Episode::start(spec, limits.retry_cap)?;
    let mut spent = 0u64;
    while let Some(kind) = ep.kind() {
        let evidence = ep.evidence();
        let instruction = ep.instruction();
        let view = AgentView {
            episode_id: &id,
            protocol,
            kind,
            turn: ep.turn(),
            instruction: &instruction,
            history: ep.history(),
            evidence: &evidence,
            retry: ep.last_error(),
        };
        let reply = match agent.act(&view) {
            Ok(r) => r,
            Err(AgentError::Transport(m)) => {
                ep.abort(EpisodeStatus::TransportFailure, m);
                break;
            }
            Err(AgentError::Budget(m)) => {
                ep.abort(EpisodeStatus::BudgetExceeded, m);
                break;
            }
            Err(AgentError::Other(m)) => {
                ep.abort(EpisodeStatus::AgentFailure, m);
                break;
            }
        };
        spent += reply.tokens;
        if ep.submit(&reply.text, reply.tokens).is_err() {
            break;
        }
        if let Some(cap) = limits.max_episode_tokens {
            if spent > cap && ep.kind().is_some() {
                ep.abort(
                    EpisodeStatus::BudgetExceeded,
                    format!("spent {spent} tokens, cap {cap}"),
                );
            }
        }
    }
    Ok(ep)
}

/// Chat-completion agent settings. Credentials are never part of this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub decoding: Decoding,
    /// Optional system message sent before the task prompt.
    #[serde(default)]
    pub system_prompt: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_requests: usize,
}

fn default_concurrency() -> usize {
    4
}

/// Sends the task prompt and dialogue so far to a chat endpoint. Reasoning
/// blocks are dropped from earlier turns before each call.
pub struct LlmAgent {
    client: Arc<ChatClient>,
    decoding: Decoding,
    system_prompt: Option<String>,
}

impl LlmAgent {
    pub fn new(client: Arc<ChatClient>, decoding: Decoding, system_prompt: Option<String>) -> Self {
        LlmAgent {
            client,
            decoding,
            system_prompt,
        }
    }

    pub fn messages(&self, view: &AgentView<'_>) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(view.history.len() * 2 + 2);
        if let Some(s) = &self.system_prompt {
            out.push(ChatMessage::system(s.clone()));
        }
        for r in view.history {
            out.push(ChatMessage::user(r.instruction.clone()));
            out.push(ChatMessage::assistant(r.text.clone()));
        }
        out.push(ChatMessage::user(view.instruction));
        out
    }
}

impl Agent for LlmAgent {
    fn act(&mut self, view: &AgentView<'_>) -> Result<AgentReply, AgentError> {
        let messages = self.messages(view);
        match self.client.complete(&messages, &self.decoding) {
            Ok(c) => Ok(AgentReply {
                tokens: c
                    .completion_tokens
                    .unwrap_or_else(|| crate::engine::word_count(&c.text)),
                text: c.text,
            }),
            Err(e @ ChatError::Transport { .. }) => Err(AgentError::Transport(e.to_string())),
            Err(e) => Err(AgentError::Transport(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Scripted {
        strategy: Strategy,
        /// Catalog rules added to each group's four candidates.
        #[serde(default)]
        pool_extension: Vec<String>,
        #[serde(default = "default_k_max")]
        blicket_k_max: u8,
    },
    Llm(LlmConfig),
}

fn default_k_max() -> u8 {
    DEFAULT_BLICKET_K_MAX
}

impl AgentSpec {
    pub fn scripted(strategy: Strategy) -> Self {
        AgentSpec::Scripted {
            strategy,
            pool_extension: Vec::new(),
            blicket_k_max: DEFAULT_BLICKET_K_MAX,
        }
    }

    pub fn label(&self) -> String {
        match self {
            AgentSpec::Scripted { strategy, .. } => strategy.name().to_string(),
            AgentSpec::Llm(c) => format!("llm:{}", c.endpoint.model),
        }
    }
}

/// Builds per-episode agents, sharing pools and the HTTP client.
pub struct AgentFactory {
    spec: AgentSpec,
    catalog: &'static Catalog,
    pools: PoolCache,
    client: Option<Arc<ChatClient>>,
}

impl AgentFactory {
    pub fn new(spec: AgentSpec, catalog: &'static Catalog) -> Self {
        let (pools, client) = match &spec {
            AgentSpec::Scripted { pool_extension, .. } => (PoolCache::new(pool_extension.clone()), None),
            AgentSpec::Llm(c) => (
                PoolCache::default(),
                Some(Arc::new(ChatClient::new(
                    c.endpoint.clone(),
                    Limiter::global(c.max_concurrent_requests),
                ))),
            ),
        };
        AgentFactory {
            spec,
            catalog,
            pools,
            client,
        }
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    /// Serializable description recorded in transcript headers.
    pub fn descriptor(&self) -> serde_json::Value {
        serde_json::to_value(&self.spec).expect("agent spec serializes")
    }

    /// Builds the shared pools these episodes need ahead of a parallel run.
    pub fn prepare(&self, episodes: &[EpisodeSpec]) -> Result<(), String> {
        if matches!(self.spec, AgentSpec::Scripted { .. }) {
            let groups: std::collections::BTreeSet<u32> =
                episodes.iter().filter_map(|e| e.wason().map(|w| w.group_id)).collect();
            for g in groups {
                self.pools.get(self.catalog, g)?;
            }
        }
        Ok(())
    }

    /// A fresh agent for one episode. Only the group id and object count
    /// are read from the spec; the hidden rule is not.
    pub fn build(&self, episode: &EpisodeSpec) -> Result<Box<dyn Agent>, String> {
        match &self.spec {
            AgentSpec::Scripted {
                strategy,
                blicket_k_max,
                ..
            } => {
                let pool = match &episode.task {
                    TaskSpec::Wason(w) => ScriptedPool::Wason(self.pools.get(self.catalog, w.group_id)?),
                    TaskSpec::Blicket(b) => {
                        ScriptedPool::Blicket(BlicketPool::new(b.config.num_objects, *blicket_k_max))
                    }
                };
                Ok(Box::new(ScriptedAgent::new(*strategy, pool)))
            }
            AgentSpec::Llm(c) => Ok(Box::new(LlmAgent::new(
                self.client.clone().expect("client built with the factory"),
                c.decoding.clone(),
                c.system_prompt.clone(),
            ))),
        }
    }
}

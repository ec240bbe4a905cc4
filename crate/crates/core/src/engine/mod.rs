//! Alternating announce/test protocol shared by both tasks.
//!
//! An episode starts awaiting an announcement. Each accepted announcement is
//! followed by a test; each accepted test receives feedback and completes a
//! turn. Malformed outputs are answered with a format-retry instruction and
//! never enter the history.

pub mod parse;
pub mod transcript;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{EpisodeSpec, Protocol, SpecError, TaskSpec};
use crate::dsl::{eval_blicket, ObjectSet};
use crate::prompts;
use crate::triple::Triple;

pub use parse::{strip_reasoning, FormatError};
pub use transcript::{RunInfo, Transcript, TranscriptError, TranscriptHeader, TRANSCRIPT_SCHEMA};

/// Malformed outputs tolerated per turn; reaching the cap aborts.
pub const DEFAULT_RETRY_CAP: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Feedback {
    Yes,
    No,
    Dax,
    Med,
    On,
    Off,
}

impl Feedback {
    /// Maps a rule verdict into the vocabulary of a protocol and task.
    pub fn for_verdict(task: &TaskSpec, protocol: Protocol, positive: bool) -> Feedback {
        match (task, protocol, positive) {
            (TaskSpec::Blicket(_), _, true) => Feedback::On,
            (TaskSpec::Blicket(_), _, false) => Feedback::Off,
            (_, Protocol::DualGoal, true) => Feedback::Dax,
            (_, Protocol::DualGoal, false) => Feedback::Med,
            (_, _, true) => Feedback::Yes,
            (_, _, false) => Feedback::No,
        }
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Feedback::Yes | Feedback::Dax | Feedback::On)
    }

    pub fn word(&self) -> &'static str {
        match self {
            Feedback::Yes => "YES",
            Feedback::No => "NO",
            Feedback::Dax => "DAX",
            Feedback::Med => "MED",
            Feedback::On => "ON",
            Feedback::Off => "OFF",
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.word())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Guess,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingGuess,
    AwaitingTest,
    Done,
}

/// Parsed content of an accepted output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// For dual-goal episodes `text` is the DAX clause and `med` the MED one.
    Announcement {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        med: Option<String>,
    },
    Check {
        triple: Triple,
    },
    Placement {
        objects: ObjectSet,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: u32,
    pub kind: TurnKind,
    /// Instruction that prompted this output (without retry notices).
    pub instruction: String,
    /// Output exactly as produced, reasoning included.
    pub raw_text: String,
    /// Output with reasoning blocks removed, as kept in the dialogue.
    pub text: String,
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
    pub tokens: u64,
    /// Malformed outputs rejected before this one.
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    Completed,
    FormatFailure,
    TransportFailure,
    BudgetExceeded,
    /// The agent itself failed for a reason other than transport.
    AgentFailure,
}

impl EpisodeStatus {
    pub fn is_failure(&self) -> bool {
        *self != EpisodeStatus::Completed
    }
}

/// What the agent may observe: initial evidence and test outcomes. The hidden
/// rule is never part of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence {
    Wason {
        initial: Triple,
        tests: Vec<(Triple, bool)>,
    },
    Blicket {
        num_objects: u8,
        initial: ObjectSet,
        initial_on: bool,
        tests: Vec<(ObjectSet, bool)>,
    },
}

impl Evidence {
    /// Initial evidence followed by every test, as labelled triples.
    pub fn wason_observations(&self) -> Vec<(Triple, bool)> {
        match self {
            Evidence::Wason { initial, tests } => {
                std::iter::once((*initial, true)).chain(tests.iter().copied()).collect()
            }
            Evidence::Blicket { .. } => Vec::new(),
        }
    }

    pub fn blicket_observations(&self) -> Vec<(ObjectSet, bool)> {
        match self {
            Evidence::Blicket {
                initial,
                initial_on,
                tests,
                ..
            } => std::iter::once((*initial, *initial_on))
                .chain(tests.iter().copied())
                .collect(),
            Evidence::Wason { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("episode is finished")]
    Finished,
    #[error("turn {turn}: {attempts} malformed outputs, episode aborted")]
    RetryLimitExceeded { turn: u32, attempts: u32 },
}

/// Result of an accepted or rejected submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Accepted { feedback: Option<Feedback> },
    Retry { error: FormatError },
}

#[derive(Debug, Clone)]
pub struct Episode {
    spec: EpisodeSpec,
    retry_cap: u32,
    phase: Phase,
    turn: u32,
    history: Vec<TurnRecord>,
    pending: String,
    last_error: Option<FormatError>,
    turn_retries: u32,
    output_retries: u32,
    total_retries: u32,
    status: Option<EpisodeStatus>,
    detail: Option<String>,
}

impl Episode {
    pub fn start(spec: EpisodeSpec, retry_cap: u32) -> Result<Episode, SpecError> {
        spec.validate()?;
        let pending = prompts::initial_prompt(&spec);
        Ok(Episode {
            spec,
            retry_cap: retry_cap.max(1),
            phase: Phase::AwaitingGuess,
            turn: 1,
            history: Vec::new(),
            pending,
            last_error: None,
            turn_retries: 0,
            output_retries: 0,
            total_retries: 0,
            status: None,
            detail: None,
        })
    }

    pub fn spec(&self) -> &EpisodeSpec {
        &self.spec
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Current turn index, starting at 1.
    pub fn turn(&self) -> u32 {
        self.turn
    }

    pub fn history(&self) -> &[TurnRecord] {
        &self.history
    }

    pub fn status(&self) -> Option<EpisodeStatus> {
        self.status
    }

    pub fn total_retries(&self) -> u32 {
        self.total_retries
    }

    pub fn last_error(&self) -> Option<&FormatError> {
        self.last_error.as_ref()
    }

    /// The instruction the agent must answer now, including a retry notice
    /// after a malformed output.
    pub fn instruction(&self) -> String {
        match (&self.last_error, self.kind()) {
            (Some(err), Some(kind)) => prompts::retry_instruction(
                &self.pending,
                &err.to_string(),
                prompts::format_requirement(&self.spec.task, self.spec.protocol, kind),
            ),
            _ => self.pending.clone(),
        }
    }

    /// The instruction without any retry notice.
    pub fn pending_instruction(&self) -> &str {
        &self.pending
    }

    pub fn kind(&self) -> Option<TurnKind> {
        match self.phase {
            Phase::AwaitingGuess => Some(TurnKind::Guess),
            Phase::AwaitingTest => Some(TurnKind::Test),
            Phase::Done => None,
        }
    }

    pub fn evidence(&self) -> Evidence {
        match &self.spec.task {
            TaskSpec::Wason(w) => Evidence::Wason {
                initial: w.initial,
                tests: self
                    .history
                    .iter()
                    .filter_map(|r| match (&r.payload, r.feedback) {
                        (Payload::Check { triple }, Some(f)) => Some((*triple, f.is_positive())),
                        _ => None,
                    })
                    .collect(),
            },
            TaskSpec::Blicket(b) => Evidence::Blicket {
                num_objects: b.config.num_objects,
                initial: b.initial_placement,
                initial_on: b.initial_device_on,
                tests: self
                    .history
                    .iter()
                    .filter_map(|r| match (&r.payload, r.feedback) {
                        (Payload::Placement { objects }, Some(f)) => Some((*objects, f.is_positive())),
                        _ => None,
                    })
                    .collect(),
            },
        }
    }

    fn parse(&self, text: &str, kind: TurnKind) -> Result<Payload, FormatError> {
        match (&self.spec.task, kind) {
            (TaskSpec::Wason(_), TurnKind::Guess) if self.spec.protocol == Protocol::DualGoal => {
                let (dax, med) = parse::parse_dual_announcement(text)?;
                Ok(Payload::Announcement {
                    text: dax,
                    med: Some(med),
                })
            }
            (_, TurnKind::Guess) => Ok(Payload::Announcement {
                text: parse::parse_announcement(text)?,
                med: None,
            }),
            (TaskSpec::Wason(_), TurnKind::Test) => Ok(Payload::Check {
                triple: parse::parse_check(text)?,
            }),
            (TaskSpec::Blicket(b), TurnKind::Test) => Ok(Payload::Placement {
                objects: parse::parse_placement(text, b.config.num_objects)?,
            }),
        }
    }

    /// Feedback the environment gives for a probe.
    pub fn feedback_for(spec: &EpisodeSpec, payload: &Payload) -> Option<Feedback> {
        let positive = match (&spec.task, payload) {
            (TaskSpec::Wason(w), Payload::Check { triple }) => w.target.eval(triple).ok()?,
            (TaskSpec::Blicket(b), Payload::Placement { objects }) => eval_blicket(&b.target, *objects),
            _ => return None,
        };
        Some(Feedback::for_verdict(&spec.task, spec.protocol, positive))
    }

    pub fn submit(&mut self, raw: &str, tokens: u64) -> Result<Step, EngineError> {
        let kind = self.kind().ok_or(EngineError::Finished)?;
        let text = strip_reasoning(raw);
        let payload = match self.parse(&text, kind) {
            Ok(p) => p,
            Err(error) => {
                self.turn_retries += 1;
                self.output_retries += 1;
                self.total_retries += 1;
                if self.turn_retries >= self.retry_cap {
                    self.finish(
                        EpisodeStatus::FormatFailure,
                        Some(format!("turn {}: {}", self.turn, error)),
                    );
                    return Err(EngineError::RetryLimitExceeded {
                        turn: self.turn,
                        attempts: self.turn_retries,
                    });
                }
                self.last_error = Some(error.clone());
                return Ok(Step::Retry { error });
            }
        };
        let feedback = match kind {
            TurnKind::Guess => None,
            TurnKind::Test => Some(
                Self::feedback_for(&self.spec, &payload)
                    .expect("validated target is total on the probe domain"),
            ),
        };
        self.history.push(TurnRecord {
            turn: self.turn,
            kind,
            instruction: std::mem::take(&mut self.pending),
            raw_text: raw.to_string(),
            text,
            payload,
            feedback,
            tokens,
            retries: self.output_retries,
        });
        self.last_error = None;
        self.output_retries = 0;
        match (kind, feedback) {
            (TurnKind::Guess, _) => {
                self.phase = Phase::AwaitingTest;
                self.pending = prompts::TEST_INSTRUCTION.to_string();
            }
            (TurnKind::Test, Some(f)) => {
                if self.turn >= self.spec.turn_budget {
                    self.finish(EpisodeStatus::Completed, None);
                } else {
                    self.turn += 1;
                    self.turn_retries = 0;
                    self.phase = Phase::AwaitingGuess;
                    self.pending = prompts::announce_instruction(f);
                }
            }
            (TurnKind::Test, None) => unreachable!(),
        }
        Ok(Step::Accepted { feedback })
    }

    /// Ends the episode early, e.g. after a transport failure.
    pub fn abort(&mut self, status: EpisodeStatus, detail: impl Into<String>) {
        self.finish(status, Some(detail.into()));
    }

    fn finish(&mut self, status: EpisodeStatus, detail: Option<String>) {
        self.phase = Phase::Done;
        self.status = Some(status);
        self.detail = detail;
    }

    /// Final record of the episode; `agent` describes who played it.
    pub fn into_transcript(self, agent: serde_json::Value, run: RunInfo) -> Transcript {
        Transcript {
            header: TranscriptHeader {
                schema: TRANSCRIPT_SCHEMA.to_string(),
                episode: self.spec,
                agent,
                run,
            },
            turns: self.history,
            status: self.status.unwrap_or(EpisodeStatus::Completed),
            detail: self.detail,
            format_retries: self.total_retries,
        }
    }
}

/// Word count used as the token proxy for scripted agents.
pub fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

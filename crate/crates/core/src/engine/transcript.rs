//! Transcript files: a header line, one line per accepted turn, and a
//! terminal status line, each a JSON object tagged by `type`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{EpisodeStatus, TurnKind, TurnRecord};
use crate::catalog::EpisodeSpec;

pub const TRANSCRIPT_SCHEMA: &str = "transcript/1";

/// Run settings recorded in every transcript header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub seed: u64,
    pub retry_cap: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    pub prompt_version: String,
    pub grammar_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub schema: String,
    pub episode: EpisodeSpec,
    /// Agent kind and settings; never contains credentials.
    pub agent: serde_json::Value,
    pub run: RunInfo,
}

impl RunInfo {
    /// Run settings with the current prompt and grammar versions.
    pub fn new(config_hash: impl Into<String>, seed: u64, retry_cap: u32, max_tokens: Option<u32>) -> Self {
        RunInfo {
            config_hash: config_hash.into(),
            seed,
            retry_cap,
            max_tokens,
            prompt_version: crate::prompts::PROMPT_VERSION.into(),
            grammar_version: crate::dsl::GRAMMAR_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub turns: Vec<TurnRecord>,
    pub status: EpisodeStatus,
    pub detail: Option<String>,
    pub format_retries: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line {
    Header(TranscriptHeader),
    Turn(TurnRecord),
    Status {
        status: EpisodeStatus,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
        format_retries: u32,
        tests: u32,
    },
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("unsupported transcript schema `{0}` (expected {TRANSCRIPT_SCHEMA})")]
    Schema(String),
    #[error("transcript does not start with a header line")]
    MissingHeader,
    #[error("transcript for {0} has no status line (partial run?)")]
    MissingStatus(String),
    #[error("line {0}: unexpected record after the status line")]
    TrailingLine(usize),
}

impl Transcript {
    pub fn episode_id(&self) -> &str {
        &self.header.episode.episode_id
    }

    pub fn tests(&self) -> impl Iterator<Item = &TurnRecord> {
        self.turns.iter().filter(|r| r.kind == TurnKind::Test)
    }

    pub fn test_count(&self) -> u32 {
        self.tests().count() as u32
    }

    /// Completed with the full budget of tests.
    pub fn is_complete(&self) -> bool {
        self.status == EpisodeStatus::Completed && self.test_count() == self.header.episode.turn_budget
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut put = |line: &Line| -> std::io::Result<()> {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n")
        };
        put(&Line::Header(self.header.clone()))?;
        for t in &self.turns {
            put(&Line::Turn(t.clone()))?;
        }
        put(&Line::Status {
            status: self.status,
            detail: self.detail.clone(),
            format_retries: self.format_retries,
            tests: self.test_count(),
        })
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Transcript, TranscriptError> {
        let mut header = None;
        let mut turns = Vec::new();
        let mut end = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if end.is_some() {
                return Err(TranscriptError::TrailingLine(i + 1));
            }
            let value: serde_json::Value = serde_json::from_str(&line)
                .map_err(|source| TranscriptError::Json { line: i + 1, source })?;
            if i == 0 {
                let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or("");
                if value.get("type").and_then(|t| t.as_str()) == Some("header") && schema != TRANSCRIPT_SCHEMA {
                    return Err(TranscriptError::Schema(schema.to_string()));
                }
            }
            let parsed: Line = serde_json::from_value(value)
                .map_err(|source| TranscriptError::Json { line: i + 1, source })?;
            match parsed {
                Line::Header(h) if header.is_none() && turns.is_empty() => header = Some(h),
                Line::Header(_) => return Err(TranscriptError::TrailingLine(i + 1)),
                Line::Turn(_) | Line::Status { .. } if header.is_none() => {
                    return Err(TranscriptError::MissingHeader)
                }
                Line::Turn(t) => turns.push(t),
                Line::Status {
                    status,
                    detail,
                    format_retries,
                    ..
                } => end = Some((status, detail, format_retries)),
            }
        }
        let header = header.ok_or(TranscriptError::MissingHeader)?;
        let (status, detail, format_retries) =
            end.ok_or_else(|| TranscriptError::MissingStatus(header.episode.episode_id.clone()))?;
        Ok(Transcript {
            header,
            turns,
            status,
            detail,
            format_retries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Episode, Feedback};

    fn sample() -> Transcript {
        let spec = crate::catalog::build_blicket_dataset(0).remove(0);
        let mut ep = Episode::start(spec, 5).unwrap();
        ep.submit("Announce: relevant=[object 0]; rule=any", 3).unwrap();
        ep.submit("<think>try</think>Test: [object 0]", 2).unwrap();
        ep.into_transcript(serde_json::json!({"kind": "test"}), RunInfo::new("", 0, 5, None))
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let text = t.to_jsonl_string();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"schema\":\"transcript/1\""));
        let back = Transcript::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert!(matches!(back.turns[1].feedback, Some(Feedback::On | Feedback::Off)));
    }

    #[test]
    fn partial_and_foreign_files_are_rejected() {
        let text = sample().to_jsonl_string();
        let partial: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            Transcript::read_jsonl(partial.as_bytes()),
            Err(TranscriptError::MissingStatus(_))
        ));
        let headless: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            Transcript::read_jsonl(headless.as_bytes()),
            Err(TranscriptError::MissingHeader)
        ));
        let foreign = text.replacen("transcript/1", "transcript/9", 1);
        assert!(matches!(
            Transcript::read_jsonl(foreign.as_bytes()),
            Err(TranscriptError::Schema(s)) if s == "transcript/9"
        ));
    }
}

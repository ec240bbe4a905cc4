//! Supervised next-turn records from teacher transcripts.
//!
//! Every test turn of a teacher episode becomes one record. The input is the
//! dialogue up to that turn, re-rendered as the student would see it under
//! the baseline protocol: the baseline task prompt replaces the teacher's,
//! DAX/MED feedback becomes YES/NO, and dual-goal announcements keep only
//! their DAX clause. The target is the teacher's raw output for the turn,
//! reasoning included.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agents::chat::ChatMessage;
use crate::catalog::{Protocol, Split};
use crate::engine::{Feedback, Payload, Transcript, TurnKind};
use crate::prompts::{self, PROMPT_VERSION};

pub const DISTILL_SCHEMA: &str = "distill/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillRecord {
    pub schema: String,
    pub episode_id: String,
    pub split: Split,
    /// Index of the test turn this record predicts.
    pub turn: u32,
    pub teacher_protocol: Protocol,
    pub prompt_version: String,
    /// Role-tagged input dialogue ending with the test instruction.
    pub messages: Vec<ChatMessage>,
    pub target: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportCounts {
    pub records: u64,
    pub episodes: u64,
    /// Transcripts skipped for being incomplete.
    pub skipped: u64,
}

fn student_feedback(f: Feedback) -> Feedback {
    match f {
        Feedback::Dax => Feedback::Yes,
        Feedback::Med => Feedback::No,
        other => other,
    }
}

/// Records for every test turn of one transcript.
pub fn distill_records(t: &Transcript) -> Vec<DistillRecord> {
    let spec = &t.header.episode;
    let student = spec.with_protocol(Protocol::Baseline);
    let mut dialogue = Vec::with_capacity(t.turns.len() * 2);
    let mut out = Vec::new();
    let mut last_feedback: Option<Feedback> = None;
    for (i, r) in t.turns.iter().enumerate() {
        let instruction = match (i, r.kind) {
            (0, _) => prompts::initial_prompt(&student),
            (_, TurnKind::Guess) => match last_feedback {
                Some(f) => prompts::announce_instruction(student_feedback(f)),
                None => r.instruction.clone(),
            },
            (_, TurnKind::Test) => prompts::TEST_INSTRUCTION.to_string(),
        };
        dialogue.push(ChatMessage::user(instruction));
        if r.kind == TurnKind::Test {
            out.push(DistillRecord {
                schema: DISTILL_SCHEMA.to_string(),
                episode_id: spec.episode_id.clone(),
                split: spec.split,
                turn: r.turn,
                teacher_protocol: spec.protocol,
                prompt_version: PROMPT_VERSION.to_string(),
                messages: dialogue.clone(),
                target: r.raw_text.clone(),
            });
        }
        let reply = match (&r.payload, spec.protocol) {
            (Payload::Announcement { text, .. }, Protocol::DualGoal) => format!("Announce: {text}"),
            _ => r.text.clone(),
        };
        dialogue.push(ChatMessage::assistant(reply));
        if let Some(f) = r.feedback {
            last_feedback = Some(f);
        }
    }
    out
}

/// Writes records for complete transcripts of `split` (all splits when
/// `None`) as JSON lines.
pub fn export_distill<'a, W: Write>(
    transcripts: impl IntoIterator<Item = &'a Transcript>,
    split: Option<Split>,
    mut w: W,
) -> std::io::Result<ExportCounts> {
    let mut counts = ExportCounts::default();
    for t in transcripts {
        if split.is_some_and(|s| s != t.header.episode.split) {
            continue;
        }
        if !t.is_complete() {
            log::warn!("skipping incomplete transcript {}", t.episode_id());
            counts.skipped += 1;
            continue;
        }
        counts.episodes += 1;
        for rec in distill_records(t) {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
            counts.records += 1;
        }
    }
    Ok(counts)
}

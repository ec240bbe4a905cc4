//! Announcement correctness and probe compatibility.
//!
//! Announcements written in the rule language (or naming a catalog rule)
//! are judged exactly: Wason rules by extensional comparison over the whole
//! domain, blicket hypotheses by relevant-set equality plus agreement on
//! every placement. Other text is unjudgeable unless an LLM adapter is
//! configured.

pub mod adapter;
pub mod blicket;

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, EpisodeSpec, Protocol, TaskSpec};
use crate::dsl::{parse_rule, rules_equivalent, ObjectSet, RuleExpr};
use crate::engine::{EpisodeStatus, Payload, Transcript, TurnKind, TurnRecord};
use crate::triple::Triple;

use adapter::LlmJudge;
use blicket::{parse_blicket_announcement, BlicketHypothesis};

pub const JUDGED_SCHEMA: &str = "judged/1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unjudgeable: {0}")]
pub struct Unjudgeable(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Correct,
    Incorrect,
    Compatible,
    Incompatible,
    Unjudgeable,
}

/// A resolved hypothesis that can be evaluated on probes.
#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Wason(RuleExpr),
    Blicket(BlicketHypothesis),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Triple(Triple),
    Placement(ObjectSet),
}

impl Probe {
    pub fn from_payload(payload: &Payload) -> Option<Probe> {
        match payload {
            Payload::Check { triple } => Some(Probe::Triple(*triple)),
            Payload::Placement { objects } => Some(Probe::Placement(*objects)),
            Payload::Announcement { .. } => None,
        }
    }
}

/// Compatible iff the hypothesis accepts the probe.
pub fn classify_probe(hypothesis: &Hypothesis, probe: &Probe) -> Result<Label, Unjudgeable> {
    let accepted = match (hypothesis, probe) {
        (Hypothesis::Wason(r), Probe::Triple(x)) => r.eval_at(x).map_err(|e| Unjudgeable(e.to_string()))?,
        (Hypothesis::Blicket(h), Probe::Placement(s)) => h.eval(*s),
        _ => return Err(Unjudgeable("hypothesis and probe belong to different tasks".into())),
    };
    Ok(if accepted { Label::Compatible } else { Label::Incompatible })
}

/// Extracts the DAX rule from a free-text dual-goal announcement:
/// text after a DAX marker up to the next `;`, `.`, `,` or MED clause;
/// otherwise the first of two clauses split by `;` or `, and`; otherwise
/// the whole line.
pub fn extract_dax_clause(text: &str) -> String {
    let t = text.trim();
    let t = t.strip_prefix("Announce:").map(str::trim_start).unwrap_or(t);
    let lower = t.to_ascii_lowercase();
    const MARKERS: [&str; 7] = [
        "a dax triple is",
        "the dax rule is",
        "dax rule -",
        "dax rule:",
        "dax rule –",
        "dax:",
        "dax is",
    ];
    let hit = MARKERS
        .iter()
        .filter_map(|m| lower.find(m).map(|at| (at, m.len())))
        .min_by_key(|&(at, len)| (at, std::cmp::Reverse(len)));
    if let Some((at, len)) = hit {
        let rest = &t[at + len..];
        let rest_lower = &lower[at + len..];
        let mut end = rest.find([';', '.', ',']).unwrap_or(rest.len());
        for med in ["announce:", "med rule", "med:", "med is", "a med triple", "the med rule"] {
            if let Some(m) = rest_lower.find(med) {
                end = end.min(m);
            }
        }
        return rest[..end].trim().to_string();
    }
    if let Some((first, _)) = t.split_once(';') {
        return first.trim().to_string();
    }
    if let Some(at) = lower.find(", and") {
        return t[..at].trim().to_string();
    }
    t.to_string()
}

/// Rule-language text, else a catalog rule name.
pub fn resolve_wason(catalog: &Catalog, text: &str) -> Result<RuleExpr, Unjudgeable> {
    let text = text.trim();
    if let Ok(rule) = parse_rule(text) {
        return Ok(rule);
    }
    if let Some(named) = catalog.rule_by_name_loose(text) {
        return Ok(named.rule.clone());
    }
    Err(Unjudgeable(format!("`{text}` is neither a rule expression nor a catalog rule name")))
}

/// Exact extensional comparison; structurally equal rules short-circuit.
pub fn wason_correct(announced: &RuleExpr, target: &RuleExpr) -> Result<bool, Unjudgeable> {
    if announced.body() == target.body() {
        return Ok(true);
    }
    rules_equivalent(announced, target)
        .map(|e| e.is_equivalent())
        .map_err(|e| Unjudgeable(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedTurn {
    #[serde(flatten)]
    pub record: TurnRecord,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// A transcript with a label on every turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedEpisode {
    pub schema: String,
    pub episode_id: String,
    /// `wason` or `blicket`.
    pub task: String,
    pub protocol: Protocol,
    pub status: EpisodeStatus,
    pub agent: serde_json::Value,
    pub config_hash: String,
    /// Index of the first correct announcement.
    pub t_star: Option<u32>,
    pub turns: Vec<JudgedTurn>,
}

/// Label counts over a set of test turns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeCounts {
    pub compatible: u64,
    pub incompatible: u64,
    pub unjudgeable: u64,
}

impl JudgedEpisode {
    pub fn solved(&self) -> bool {
        self.t_star.is_some()
    }

    pub fn failed(&self) -> bool {
        self.status.is_failure()
    }

    pub fn guesses(&self) -> impl Iterator<Item = &JudgedTurn> {
        self.turns.iter().filter(|t| t.record.kind == TurnKind::Guess)
    }

    pub fn tests(&self) -> impl Iterator<Item = &JudgedTurn> {
        self.turns.iter().filter(|t| t.record.kind == TurnKind::Test)
    }

    /// Turns counted toward the episode's metrics: up to and including
    /// index t_star when solved, all turns otherwise.
    pub fn counted_turns(&self) -> impl Iterator<Item = &JudgedTurn> {
        let limit = self.t_star.unwrap_or(u32::MAX);
        self.turns.iter().filter(move |t| t.record.turn <= limit)
    }

    pub fn probe_counts(&self) -> ProbeCounts {
        let mut c = ProbeCounts::default();
        for t in self.counted_turns().filter(|t| t.record.kind == TurnKind::Test) {
            match t.label {
                Label::Compatible => c.compatible += 1,
                Label::Incompatible => c.incompatible += 1,
                _ => c.unjudgeable += 1,
            }
        }
        c
    }

    /// Builds a judged episode from (guess, test) label pairs, one pair per
    /// turn, each output costing `tokens`. Intended for fixtures.
    pub fn from_labels(episode_id: &str, pairs: &[(Label, Label)], tokens: u64) -> JudgedEpisode {
        let mut turns = Vec::with_capacity(pairs.len() * 2);
        let mut t_star = None;
        for (i, &(guess, test)) in pairs.iter().enumerate() {
            let turn = i as u32 + 1;
            if guess == Label::Correct {
                t_star.get_or_insert(turn);
            }
            let record = |kind, payload| TurnRecord {
                turn,
                kind,
                instruction: String::new(),
                raw_text: String::new(),
                text: String::new(),
                payload,
                feedback: None,
                tokens,
                retries: 0,
            };
            turns.push(JudgedTurn {
                record: record(TurnKind::Guess, Payload::Announcement { text: String::new(), med: None }),
                label: guess,
                reason: None,
            });
            turns.push(JudgedTurn {
                record: record(TurnKind::Test, Payload::Check { triple: Triple::FIRST }),
                label: test,
                reason: None,
            });
        }
        JudgedEpisode {
            schema: JUDGED_SCHEMA.to_string(),
            episode_id: episode_id.to_string(),
            task: "wason".into(),
            protocol: Protocol::Baseline,
            status: EpisodeStatus::Completed,
            agent: serde_json::Value::Null,
            config_hash: String::new(),
            t_star,
            turns,
        }
    }

    pub fn write_jsonl<W: Write>(episodes: &[JudgedEpisode], mut w: W) -> std::io::Result<()> {
        for e in episodes {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<JudgedEpisode>, JudgedReadError> {
        let mut out = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: JudgedEpisode =
                serde_json::from_str(&line).map_err(|source| JudgedReadError::Json { line: i + 1, source })?;
            if e.schema != JUDGED_SCHEMA {
                return Err(JudgedReadError::Schema(e.schema));
            }
            out.push(e);
        }
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum JudgedReadError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("unsupported judged-episode schema `{0}` (expected {JUDGED_SCHEMA})")]
    Schema(String),
}

type VerdictKey = (String, String);

/// Judges transcripts. Correctness verdicts are cached per
/// (announcement, target) pair.
pub struct Judge<'c> {
    catalog: &'c Catalog,
    adapter: Option<LlmJudge>,
    verdicts: Mutex<HashMap<VerdictKey, Result<bool, Unjudgeable>>>,
}

impl<'c> Judge<'c> {
    pub fn new(catalog: &'c Catalog) -> Self {
        Judge {
            catalog,
            adapter: None,
            verdicts: Mutex::default(),
        }
    }

    pub fn with_adapter(mut self, adapter: LlmJudge) -> Self {
        self.adapter = Some(adapter);
        self
    }

    /// Name recorded alongside results.
    pub fn mode(&self) -> &'static str {
        if self.adapter.is_some() {
            "deterministic+llm"
        } else {
            "deterministic"
        }
    }

    /// Resolves the hypothesis of an announcement turn. `probes` are the
    /// triples it will be evaluated on, used to validate translations.
    pub fn hypothesis(&self, spec: &EpisodeSpec, record: &TurnRecord, probes: &[Triple]) -> Result<Hypothesis, Unjudgeable> {
        let Payload::Announcement { text, .. } = &record.payload else {
            return Err(Unjudgeable("not an announcement".into()));
        };
        match &spec.task {
            TaskSpec::Wason(_) => {
                let det = resolve_wason(self.catalog, text)
                    .or_else(|e| resolve_wason(self.catalog, &extract_dax_clause(text)).map_err(|_| e));
                match (det, &self.adapter) {
                    (Ok(r), _) => Ok(Hypothesis::Wason(r)),
                    (Err(_), Some(a)) => a
                        .translate_wason(text, probes)
                        .map(Hypothesis::Wason)
                        .map_err(|e| Unjudgeable(e.to_string())),
                    (Err(e), None) => Err(e),
                }
            }
            TaskSpec::Blicket(b) => {
                let n = b.config.num_objects;
                match (parse_blicket_announcement(text, n), &self.adapter) {
                    (Ok(h), _) => Ok(Hypothesis::Blicket(h)),
                    (Err(_), Some(a)) => a
                        .translate_blicket(text, n)
                        .map(Hypothesis::Blicket)
                        .map_err(|e| Unjudgeable(e.to_string())),
                    (Err(e), None) => Err(Unjudgeable(e)),
                }
            }
        }
    }

    /// Correctness of one announcement turn against the episode's rule.
    pub fn judge_announcement(&self, spec: &EpisodeSpec, record: &TurnRecord) -> Result<bool, Unjudgeable> {
        let Payload::Announcement { text, .. } = &record.payload else {
            return Err(Unjudgeable("not an announcement".into()));
        };
        match &spec.task {
            TaskSpec::Wason(w) => {
                let det = resolve_wason(self.catalog, text)
                    .or_else(|e| resolve_wason(self.catalog, &extract_dax_clause(text)).map_err(|_| e));
                match (det, &self.adapter) {
                    (Ok(rule), _) => {
                        let key = (rule.source().to_string(), w.target.source().to_string());
                        if let Some(v) = self.verdicts.lock().expect("verdict cache").get(&key) {
                            return v.clone();
                        }
                        let v = wason_correct(&rule, &w.target);
                        self.verdicts.lock().expect("verdict cache").insert(key, v.clone());
                        v
                    }
                    (Err(_), Some(a)) => {
                        let shown = match spec.protocol {
                            Protocol::DualGoal => record.text.as_str(),
                            _ => text.as_str(),
                        };
                        a.wason_correct(spec.protocol, shown, &w.target_name)
                            .map_err(|e| Unjudgeable(e.to_string()))
                    }
                    (Err(e), None) => Err(e),
                }
            }
            TaskSpec::Blicket(b) => match (parse_blicket_announcement(text, b.config.num_objects), &self.adapter) {
                (Ok(h), _) => Ok(h.matches(&b.target, b.config.num_objects)),
                (Err(_), Some(a)) => a.blicket_correct(text, &b.target).map_err(|e| Unjudgeable(e.to_string())),
                (Err(e), None) => Err(Unjudgeable(e)),
            },
        }
    }

    pub fn judge_transcript(&self, t: &Transcript) -> JudgedEpisode {
        let spec = &t.header.episode;
        let mut turns = Vec::with_capacity(t.turns.len());
        let mut current: Option<Result<Hypothesis, Unjudgeable>> = None;
        let mut t_star = None;
        for (i, record) in t.turns.iter().enumerate() {
            let (label, reason) = match record.kind {
                TurnKind::Guess => {
                    let probes: Vec<Triple> = t.turns[i + 1..]
                        .iter()
                        .take_while(|r| r.kind == TurnKind::Test)
                        .filter_map(|r| match r.payload {
                            Payload::Check { triple } => Some(triple),
                            _ => None,
                        })
                        .collect();
                    current = Some(self.hypothesis(spec, record, &probes));
                    match self.judge_announcement(spec, record) {
                        Ok(true) => {
                            t_star.get_or_insert(record.turn);
                            (Label::Correct, None)
                        }
                        Ok(false) => (Label::Incorrect, None),
                        Err(e) => (Label::Unjudgeable, Some(e.0)),
                    }
                }
                TurnKind::Test => {
                    let probe = Probe::from_payload(&record.payload);
                    match (&current, probe) {
                        (Some(Ok(h)), Some(p)) => match classify_probe(h, &p) {
                            Ok(l) => (l, None),
                            Err(e) => (Label::Unjudgeable, Some(e.0)),
                        },
                        (Some(Err(e)), _) => (Label::Unjudgeable, Some(e.0.clone())),
                        _ => (Label::Unjudgeable, Some("no preceding announcement".into())),
                    }
                }
            };
            turns.push(JudgedTurn {
                record: record.clone(),
                label,
                reason,
            });
        }
        JudgedEpisode {
            schema: JUDGED_SCHEMA.to_string(),
            episode_id: spec.episode_id.clone(),
            task: match spec.task {
                TaskSpec::Wason(_) => "wason".into(),
                TaskSpec::Blicket(_) => "blicket".into(),
            },
            protocol: spec.protocol,
            status: t.status,
            agent: t.header.agent.clone(),
            config_hash: t.header.run.config_hash.clone(),
            t_star,
            turns,
        }
    }
}

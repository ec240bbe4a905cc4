//! Pipeline stages over files: generate, run, judge, metrics, stats,
//! export and replay.
//!
//! Layout of a run directory:
//! `run.toml` (resolved config), `transcripts/<episode>.jsonl`,
//! `summary.json`, and after judging `judged.jsonl` and `report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{run_episode, AgentFactory, AgentSpec, RunLimits};
use crate::catalog::{
    build_blicket_dataset, build_wason_dataset, enumerate_feasible, Catalog, CatalogError, EpisodeSpec, Protocol,
    Split, TURN_BUDGET,
};
use crate::distill::{export_distill, ExportCounts};
use crate::engine::{
    parse, Episode, EpisodeStatus, Payload, RunInfo, Transcript, TranscriptError, TurnKind, DEFAULT_RETRY_CAP,
};
use crate::io::{config_hash, read_jsonl, write_jsonl, JsonlError};
use crate::judge::adapter::{LlmJudge, LlmJudgeConfig};
use crate::judge::{JudgedEpisode, JudgedReadError, Judge};
use crate::metrics::{compute_metrics, tally, MetricReport};
use crate::stats::{permutation_test, permutation_test_by, pooled_ratio_delta, Alternative, CountPair, PermutationResult};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Transcript { path: String, source: TranscriptError },
    #[error("{path}: {source}")]
    Judged { path: String, source: JudgedReadError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("missing input: {0}")]
    Missing(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}

impl RunnerError {
    pub fn is_validation(&self) -> bool {
        matches!(self, RunnerError::Config(_) | RunnerError::Catalog(_))
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------- generate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub seed: u64,
    pub files: BTreeMap<String, usize>,
    /// Feasible-set size per rule group.
    pub feasible: BTreeMap<u32, usize>,
}

/// Writes `wason_{split}.jsonl` and `blicket.jsonl` into `out`.
/// `groups` restricts the Wason datasets to the listed group ids.
pub fn generate(out: &Path, seed: u64, groups: Option<&[u32]>) -> Result<GenerateSummary, RunnerError> {
    let catalog = Catalog::builtin();
    if let Some(ids) = groups {
        for &id in ids {
            catalog.group(id)?;
        }
    }
    fs::create_dir_all(out).map_err(io_err(out))?;
    let ds = build_wason_dataset(catalog, seed)?;
    let keep = |e: &&EpisodeSpec| groups.is_none_or(|ids| e.wason().is_some_and(|w| ids.contains(&w.group_id)));
    let mut files = BTreeMap::new();
    for split in Split::ALL {
        let specs: Vec<&EpisodeSpec> = ds.split(split).iter().filter(keep).collect();
        let name = format!("wason_{}.jsonl", split.name());
        write_jsonl(&out.join(&name), &specs)?;
        files.insert(name, specs.len());
    }
    let blicket = build_blicket_dataset(seed);
    write_jsonl(&out.join("blicket.jsonl"), &blicket)?;
    files.insert("blicket.jsonl".into(), blicket.len());
    let feasible = catalog
        .groups()
        .par_iter()
        .filter(|g| groups.is_none_or(|ids| ids.contains(&g.id)))
        .map(|g| {
            let n = enumerate_feasible(g).map(|f| f.count()).unwrap_or(0);
            (g.id, n)
        })
        .collect();
    let summary = GenerateSummary { seed, files, feasible };
    let path = out.join("generate.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("serializes")).map_err(io_err(&path))?;
    Ok(summary)
}

// ---------------------------------------------------------------- run

fn default_seed() -> u64 {
    1337
}
fn default_retry_cap() -> u32 {
    DEFAULT_RETRY_CAP
}
fn default_workers() -> usize {
    4
}
fn default_budget() -> u32 {
    TURN_BUDGET
}

/// Everything needed to reproduce a run. Serialized into `run.toml` and
/// hashed into every transcript header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Episode specs as JSON lines.
    pub dataset: PathBuf,
    pub output: PathBuf,
    /// Overrides the protocol of every episode.
    #[serde(default)]
    pub protocol: Option<Protocol>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_budget")]
    pub turn_budget: u32,
    #[serde(default = "default_retry_cap")]
    pub retry_cap: u32,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub max_episode_tokens: Option<u64>,
    /// Run only the first N episodes.
    #[serde(default)]
    pub limit: Option<usize>,
    pub agent: AgentSpec,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: &str| Err(RunnerError::Config(m.to_string()));
        if self.turn_budget == 0 {
            return bad("turn_budget must be positive");
        }
        if self.retry_cap == 0 {
            return bad("retry_cap must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        if let AgentSpec::Llm(c) = &self.agent {
            if c.endpoint.base_url.is_empty() || c.endpoint.model.is_empty() {
                return bad("llm agent needs endpoint.base_url and endpoint.model");
            }
            if c.max_concurrent_requests == 0 {
                return bad("max_concurrent_requests must be positive");
            }
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    fn max_tokens(&self) -> Option<u32> {
        match &self.agent {
            AgentSpec::Llm(c) => c.decoding.max_tokens,
            AgentSpec::Scripted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub episodes: u64,
    /// Episodes skipped because a finished transcript already existed.
    pub reused: u64,
    pub statuses: BTreeMap<String, u64>,
}

impl RunSummary {
    pub fn count(&self, status: EpisodeStatus) -> u64 {
        self.statuses.get(&status_name(status)).copied().unwrap_or(0)
    }

    /// 0 ok, 3 any transport failure, 4 format failures in most episodes.
    pub fn exit_code(&self) -> i32 {
        if self.count(EpisodeStatus::TransportFailure) > 0 {
            3
        } else if self.count(EpisodeStatus::FormatFailure) * 2 > self.episodes {
            4
        } else {
            0
        }
    }
}

pub fn status_name(s: EpisodeStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn load_specs(path: &Path) -> Result<Vec<EpisodeSpec>, RunnerError> {
    if !path.exists() {
        return Err(RunnerError::Missing(path.display().to_string()));
    }
    let specs: Vec<EpisodeSpec> = read_jsonl(path)?;
    for s in &specs {
        s.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
    }
    Ok(specs)
}

pub fn transcript_path(dir: &Path, episode_id: &str) -> PathBuf {
    dir.join("transcripts").join(format!("{episode_id}.jsonl"))
}

fn read_transcript(path: &Path) -> Result<Transcript, RunnerError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    Transcript::read_jsonl(BufReader::new(f)).map_err(|source| RunnerError::Transcript {
        path: path.display().to_string(),
        source,
    })
}

/// Plays every episode of the dataset. With `resume`, finished transcripts
/// written under the same config hash are kept.
pub fn run(config: &RunConfig, resume: bool) -> Result<RunSummary, RunnerError> {
    config.validate()?;
    let mut specs = load_specs(&config.dataset)?;
    if let Some(n) = config.limit {
        specs.truncate(n);
    }
    for s in &mut specs {
        if let Some(p) = config.protocol {
            s.protocol = p;
        }
        s.turn_budget = config.turn_budget;
    }
    let out = &config.output;
    let tdir = out.join("transcripts");
    fs::create_dir_all(&tdir).map_err(io_err(&tdir))?;
    let hash = config.hash();
    let cfg_path = out.join("run.toml");
    let cfg_text = toml::to_string_pretty(config).map_err(|e| RunnerError::Config(e.to_string()))?;
    fs::write(&cfg_path, cfg_text).map_err(io_err(&cfg_path))?;

    let factory = AgentFactory::new(config.agent.clone(), Catalog::builtin());
    factory.prepare(&specs).map_err(RunnerError::Config)?;
    let descriptor = factory.descriptor();
    let limits = RunLimits {
        retry_cap: config.retry_cap,
        max_episode_tokens: config.max_episode_tokens,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| RunnerError::Config(e.to_string()))?;
    let results: Vec<Result<(EpisodeStatus, bool), RunnerError>> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let path = transcript_path(out, &spec.episode_id);
                if resume && path.exists() {
                    if let Ok(t) = read_transcript(&path) {
                        if t.header.run.config_hash == hash && !t.status.is_failure() {
                            return Ok((t.status, true));
                        }
                    }
                }
                let mut agent = factory.build(spec).map_err(RunnerError::Config)?;
                let ep = run_episode(spec.clone(), agent.as_mut(), &limits)
                    .map_err(|e| RunnerError::Config(e.to_string()))?;
                let run = RunInfo::new(hash.clone(), config.seed, config.retry_cap, config.max_tokens());
                let t = ep.into_transcript(descriptor.clone(), run);
                let f = fs::File::create(&path).map_err(io_err(&path))?;
                let mut w = BufWriter::new(f);
                t.write_jsonl(&mut w).map_err(io_err(&path))?;
                w.flush().map_err(io_err(&path))?;
                Ok((t.status, false))
            })
            .collect()
    });
    let mut summary = RunSummary {
        config_hash: hash,
        ..Default::default()
    };
    for r in results {
        let (status, reused) = r?;
        summary.episodes += 1;
        summary.reused += reused as u64;
        *summary.statuses.entry(status_name(status)).or_insert(0) += 1;
    }
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("serializes")).map_err(io_err(&path))?;
    Ok(summary)
}

/// All transcripts of a run directory, sorted by episode id.
pub fn load_transcripts(run_dir: &Path) -> Result<Vec<Transcript>, RunnerError> {
    let dir = run_dir.join("transcripts");
    if !dir.is_dir() {
        return Err(RunnerError::Missing(dir.display().to_string()));
    }
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.par_iter().map(|p| read_transcript(p)).collect()
}

// ---------------------------------------------------------------- judge

/// Judges every transcript of a run and writes `judged.jsonl`.
pub fn judge_run(run_dir: &Path, adapter: Option<&LlmJudgeConfig>) -> Result<Vec<JudgedEpisode>, RunnerError> {
    let transcripts = load_transcripts(run_dir)?;
    let mut judge = Judge::new(Catalog::builtin());
    if let Some(c) = adapter {
        judge = judge.with_adapter(LlmJudge::new(c));
    }
    let judged: Vec<JudgedEpisode> = transcripts.par_iter().map(|t| judge.judge_transcript(t)).collect();
    let path = run_dir.join("judged.jsonl");
    let f = fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(f);
    JudgedEpisode::write_jsonl(&judged, &mut w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(judged)
}

pub fn load_judged(run_dir: &Path) -> Result<Vec<JudgedEpisode>, RunnerError> {
    let path = run_dir.join("judged.jsonl");
    let f = fs::File::open(&path).map_err(|_| RunnerError::Missing(format!("{} (run judge first)", path.display())))?;
    JudgedEpisode::read_jsonl(BufReader::new(f)).map_err(|source| RunnerError::Judged {
        path: path.display().to_string(),
        source,
    })
}

/// Computes metrics for a judged run and writes `report.json`.
pub fn metrics_run(run_dir: &Path) -> Result<MetricReport, RunnerError> {
    let judged = load_judged(run_dir)?;
    let report = compute_metrics(&judged);
    let path = run_dir.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&report).expect("serializes")).map_err(io_err(&path))?;
    Ok(report)
}

// ---------------------------------------------------------------- stats

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatMetric {
    TaskSuccess,
    FirstGuess,
    TokensPerTurn,
    /// Pooled I:C over counted test turns.
    Ic,
}

impl StatMetric {
    pub const ALL: [StatMetric; 4] = [
        StatMetric::TaskSuccess,
        StatMetric::FirstGuess,
        StatMetric::TokensPerTurn,
        StatMetric::Ic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StatMetric::TaskSuccess => "task_success",
            StatMetric::FirstGuess => "first_guess",
            StatMetric::TokensPerTurn => "tokens_per_turn",
            StatMetric::Ic => "ic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub metric: StatMetric,
    pub result: Option<PermutationResult>,
    /// Why no result was produced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Pairs two judged runs by episode id, dropping episodes that failed in
/// either run, and tests each metric for B − A.
pub fn compare(
    a: &[JudgedEpisode],
    b: &[JudgedEpisode],
    n_perm: u64,
    seed: u64,
    alternative: Alternative,
) -> Result<(usize, Vec<StatRow>), RunnerError> {
    let index: BTreeMap<&str, &JudgedEpisode> =
        b.iter().filter(|e| !e.failed()).map(|e| (e.episode_id.as_str(), e)).collect();
    let pairs: Vec<(&JudgedEpisode, &JudgedEpisode)> = a
        .iter()
        .filter(|e| !e.failed())
        .filter_map(|e| index.get(e.episode_id.as_str()).map(|o| (e, *o)))
        .collect();
    if pairs.is_empty() {
        return Err(RunnerError::Config("the two runs share no completed episodes".into()));
    }
    let mut rows = Vec::new();
    for metric in StatMetric::ALL {
        let res = match metric {
            StatMetric::Ic => {
                let counts: Vec<CountPair> = pairs
                    .iter()
                    .map(|(x, y)| {
                        let (tx, ty) = (tally(x), tally(y));
                        ((tx.incompatible, tx.compatible), (ty.incompatible, ty.compatible))
                    })
                    .collect();
                if !pooled_ratio_delta(&counts).is_finite() {
                    rows.push(StatRow {
                        metric,
                        result: None,
                        note: Some("no compatible tests in one condition".into()),
                    });
                    continue;
                }
                permutation_test_by(&counts, pooled_ratio_delta, n_perm, seed, alternative)
            }
            _ => {
                let value = |e: &JudgedEpisode| match metric {
                    StatMetric::TaskSuccess => e.solved() as u8 as f64,
                    StatMetric::FirstGuess => (e.t_star == Some(1)) as u8 as f64,
                    _ => {
                        let t = tally(e);
                        t.tokens as f64 / t.turns.max(1) as f64
                    }
                };
                let v: Vec<(f64, f64)> = pairs.iter().map(|(x, y)| (value(x), value(y))).collect();
                permutation_test(&v, n_perm, seed, alternative)
            }
        };
        rows.push(StatRow {
            metric,
            result: Some(res.map_err(|e| RunnerError::Config(e.to_string()))?),
            note: None,
        });
    }
    Ok((pairs.len(), rows))
}

// ---------------------------------------------------------------- export

pub fn export_run(run_dir: &Path, split: Option<Split>, out: &Path) -> Result<ExportCounts, RunnerError> {
    let transcripts = load_transcripts(run_dir)?;
    let f = fs::File::create(out).map_err(io_err(out))?;
    let mut w = BufWriter::new(f);
    let counts = export_distill(&transcripts, split, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))?;
    Ok(counts)
}

// ---------------------------------------------------------------- replay

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayIssue {
    pub turn: u32,
    pub kind: TurnKind,
    pub problem: String,
}

/// Re-parses every output and recomputes every feedback word. Returns the
/// pretty-printed dialogue and any mismatches found.
pub fn replay(t: &Transcript) -> (String, Vec<ReplayIssue>) {
    let spec = &t.header.episode;
    let mut text = format!(
        "episode {} ({}, {})\nstatus {}\n",
        spec.episode_id,
        spec.split,
        spec.protocol.name(),
        status_name(t.status)
    );
    let mut issues = Vec::new();
    let mut check = Episode::start(spec.clone(), u32::MAX).ok();
    for r in &t.turns {
        text.push_str(&format!("\n[{} {:?}] {}\n", r.turn, r.kind, r.instruction.lines().next().unwrap_or("")));
        text.push_str(&format!("> {}\n", r.text.replace('\n', "\n> ")));
        let stripped = parse::strip_reasoning(&r.raw_text);
        if stripped != r.text {
            issues.push(ReplayIssue {
                turn: r.turn,
                kind: r.kind,
                problem: "stored text differs from the raw output".into(),
            });
        }
        let expected = Episode::feedback_for(spec, &r.payload);
        if expected != r.feedback {
            issues.push(ReplayIssue {
                turn: r.turn,
                kind: r.kind,
                problem: format!("feedback recorded {:?}, recomputed {:?}", r.feedback, expected),
            });
        }
        if let Some(ep) = check.as_mut() {
            match ep.submit(&r.raw_text, r.tokens) {
                Ok(_) => {
                    let replayed = ep.history().last().map(|h| &h.payload);
                    if replayed != Some(&r.payload) {
                        issues.push(ReplayIssue {
                            turn: r.turn,
                            kind: r.kind,
                            problem: "payload does not match the raw output".into(),
                        });
                    }
                }
                Err(e) => {
                    issues.push(ReplayIssue {
                        turn: r.turn,
                        kind: r.kind,
                        problem: format!("replay rejected the output: {e}"),
                    });
                    check = None;
                }
            }
        }
        if let Some(f) = r.feedback {
            text.push_str(&format!("  -> {f}\n"));
        }
        if let Payload::Announcement { med: Some(m), .. } = &r.payload {
            text.push_str(&format!("  (MED clause: {m})\n"));
        }
    }
    if issues.is_empty() {
        text.push_str("\nall feedback verified\n");
    } else {
        for i in &issues {
            text.push_str(&format!("\nMISMATCH turn {} {:?}: {}", i.turn, i.kind, i.problem));
        }
        text.push('\n');
    }
    (text, issues)
}

pub fn replay_episode(run_dir: &Path, episode_id: &str) -> Result<(String, Vec<ReplayIssue>), RunnerError> {
    let path = transcript_path(run_dir, episode_id);
    if !path.exists() {
        return Err(RunnerError::Missing(path.display().to_string()));
    }
    Ok(replay(&read_transcript(&path)?))
}

//! Episode-level metrics: task success, first-guess success, turns until
//! success, tokens per turn, and pooled incompatible:compatible ratios.
//!
//! Ratios are micro-averages (pooled numerators over pooled denominators).
//! For solved episodes only turns up to the first correct announcement
//! count; unsolved episodes contribute every turn. Failed episodes are
//! left out and counted separately.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::TurnKind;
use crate::judge::{JudgedEpisode, Label};

/// A pooled ratio. `value` is absent when the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: u64,
    pub denominator: u64,
    pub value: Option<f64>,
}

impl Ratio {
    pub fn new(numerator: u64, denominator: u64) -> Self {
        Ratio {
            numerator,
            denominator,
            value: (denominator > 0).then(|| numerator as f64 / denominator as f64),
        }
    }

    fn plus(self, other: Ratio) -> Ratio {
        Ratio::new(self.numerator + other.numerator, self.denominator + other.denominator)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{v:.3}"),
            None => write!(f, "-- ({}/{})", self.numerator, self.denominator),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Views {
    pub sol: Ratio,
    pub uns: Ratio,
    pub all: Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Episodes that entered the metrics.
    pub episodes: u64,
    pub solved: u64,
    pub task_success: Option<f64>,
    pub first_guess: Option<f64>,
    /// Mean first-correct turn index over solved episodes.
    pub turns_until_success: Option<f64>,
    pub tokens_per_turn: Views,
    pub ic: Views,
    pub unjudgeable_guesses: u64,
    /// Counted test turns without a label; excluded from I:C.
    pub unjudgeable_tests: u64,
    /// Excluded episodes by status.
    pub failed: BTreeMap<String, u64>,
}

impl MetricReport {
    pub fn failed_total(&self) -> u64 {
        self.failed.values().sum()
    }
}

fn status_name(e: &JudgedEpisode) -> String {
    serde_json::to_value(e.status)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Per-episode contributions before pooling.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EpisodeTally {
    pub incompatible: u64,
    pub compatible: u64,
    pub tokens: u64,
    pub turns: u64,
}

pub fn tally(e: &JudgedEpisode) -> EpisodeTally {
    let c = e.probe_counts();
    let mut t = EpisodeTally {
        incompatible: c.incompatible,
        compatible: c.compatible,
        ..Default::default()
    };
    for turn in e.counted_turns() {
        t.tokens += turn.record.tokens;
        t.turns += 1;
    }
    t
}

pub fn compute_metrics(episodes: &[JudgedEpisode]) -> MetricReport {
    let mut failed = BTreeMap::new();
    let mut n = 0u64;
    let mut solved = 0u64;
    let mut first = 0u64;
    let mut t_star_sum = 0u64;
    let (mut ic_sol, mut ic_uns) = (Ratio::default(), Ratio::default());
    let (mut tok_sol, mut tok_uns) = (Ratio::default(), Ratio::default());
    let mut unjudgeable_guesses = 0;
    let mut unjudgeable_tests = 0;
    for e in episodes {
        if e.failed() {
            *failed.entry(status_name(e)).or_insert(0) += 1;
            continue;
        }
        n += 1;
        let t = tally(e);
        let ic = Ratio::new(t.incompatible, t.compatible);
        let tok = Ratio::new(t.tokens, t.turns);
        unjudgeable_tests += e.probe_counts().unjudgeable;
        unjudgeable_guesses += e
            .counted_turns()
            .filter(|t| t.record.kind == TurnKind::Guess && t.label == Label::Unjudgeable)
            .count() as u64;
        match e.t_star {
            Some(ts) => {
                solved += 1;
                t_star_sum += ts as u64;
                first += (ts == 1) as u64;
                ic_sol = ic_sol.plus(ic);
                tok_sol = tok_sol.plus(tok);
            }
            None => {
                ic_uns = ic_uns.plus(ic);
                tok_uns = tok_uns.plus(tok);
            }
        }
    }
    let frac = |k: u64| (n > 0).then(|| k as f64 / n as f64);
    MetricReport {
        episodes: n,
        solved,
        task_success: frac(solved),
        first_guess: frac(first),
        turns_until_success: (solved > 0).then(|| t_star_sum as f64 / solved as f64),
        tokens_per_turn: Views {
            sol: tok_sol,
            uns: tok_uns,
            all: tok_sol.plus(tok_uns),
        },
        ic: Views {
            sol: ic_sol,
            uns: ic_uns,
            all: ic_sol.plus(ic_uns),
        },
        unjudgeable_guesses,
        unjudgeable_tests,
        failed,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |v| format!("{v:.3}"))
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "episodes            {} ({} solved, {} failed)", self.episodes, self.solved, self.failed_total())?;
        writeln!(f, "task success        {}", opt(self.task_success))?;
        writeln!(f, "first guess         {}", opt(self.first_guess))?;
        writeln!(f, "turns until success {}", opt(self.turns_until_success))?;
        writeln!(f, "I:C sol / uns / all {} / {} / {}", self.ic.sol, self.ic.uns, self.ic.all)?;
        writeln!(
            f,
            "tokens/turn sol / uns / all {} / {} / {}",
            self.tokens_per_turn.sol, self.tokens_per_turn.uns, self.tokens_per_turn.all
        )?;
        write!(
            f,
            "unjudgeable         {} guesses, {} tests",
            self.unjudgeable_guesses, self.unjudgeable_tests
        )?;
        for (status, count) in &self.failed {
            write!(f, "\nfailed: {status}     {count}")?;
        }
        Ok(())
    }
}

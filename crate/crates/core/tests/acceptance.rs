//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Runs with scripted agents only.

mod common;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use biaslab::agents::scripted::Strategy;
use biaslab::agents::{run_episode, Agent, AgentError, AgentReply, AgentView, RunLimits};
use biaslab::catalog::{
    build_blicket_dataset, build_wason_dataset, enumerate_feasible, BlicketConfig, BlicketSpec, Catalog,
    EpisodeSpec, Protocol, Split, TaskSpec, WasonSpec, BLICKET_EPISODES_PER_CONFIG, TURN_BUDGET,
};
use biaslab::distill::export_distill;
use biaslab::dsl::{eval_rule, parse_rule, BlicketKind, BlicketRuleExpr, ObjectSet};
use biaslab::engine::{Payload, Transcript, TurnKind, TurnRecord};
use biaslab::judge::blicket::{BlicketHypothesis, Condition};
use biaslab::judge::{classify_probe, Hypothesis, Judge, JudgedEpisode, Label, Probe};
use biaslab::metrics::{compute_metrics, Ratio};
use biaslab::prng::SeededRng;
use biaslab::stats::{exact_sign_flip_p, permutation_test, Alternative, DEFAULT_PERMUTATIONS};
use biaslab::Triple;

use common::{judge_all, oracle, play};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn seed() -> u64 {
    biaslab::catalog::DEFAULT_SEED
}

// 1 ---------------------------------------------------------------------

const PUBLISHED_FEASIBLE: [usize; 10] = [1_629, 5_394, 128_080, 194, 2_550, 72, 1_225, 176_715, 3_071, 205];

fn feasible_sets() -> Outcome {
    let start = Instant::now();
    let counts: Vec<usize> = Catalog::builtin()
        .groups()
        .par_iter()
        .map(|g| enumerate_feasible(g).expect("catalog rules are total").count())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let mismatches: Vec<String> = counts
        .iter()
        .zip(PUBLISHED_FEASIBLE)
        .enumerate()
        .filter(|(_, (got, want))| **got != *want)
        .map(|(i, (got, want))| format!("g{}: {got} vs {want}", i + 1))
        .collect();
    let pass = mismatches.is_empty() && secs < 120.0;
    outcome(
        pass,
        format!("enumerated in {secs:.1}s; {} of 10 groups differ: {}", mismatches.len(), mismatches.join(", ")),
    )
}

// 2 ---------------------------------------------------------------------

fn dataset_arithmetic() -> Outcome {
    let ds = build_wason_dataset(Catalog::builtin(), seed()).expect("dataset builds");
    let blicket = build_blicket_dataset(seed());
    let per_config = BlicketConfig::all()
        .iter()
        .all(|c| blicket.iter().filter(|e| e.blicket().unwrap().config == *c).count() == BLICKET_EPISODES_PER_CONFIG);
    let sizes = (ds.train.len(), ds.validation.len(), ds.test.len(), blicket.len());
    let mut records = Vec::new();
    for split in [Split::Train, Split::Validation] {
        let transcripts = play(ds.split(split), Strategy::Elimination);
        let counts = export_distill(&transcripts, Some(split), std::io::sink()).expect("sink never fails");
        records.push(counts.records);
    }
    let pass = sizes == (1_600, 16, 80, 192) && per_config && records == [72_000, 720];
    outcome(
        pass,
        format!(
            "wason {}/{}/{}, blicket {} (16 per config: {per_config}), distill train {} validation {}",
            sizes.0, sizes.1, sizes.2, sizes.3, records[0], records[1]
        ),
    )
}

// 3 ---------------------------------------------------------------------

fn fixture_validity() -> Outcome {
    let catalog = Catalog::builtin();
    let fixtures = catalog.fixtures();
    let mut bad = Vec::new();
    for f in fixtures {
        let group = catalog.group(f.group).expect("fixture group exists");
        for r in &group.rules {
            let [a, b, c] = f.triple.values();
            let dsl = eval_rule(&r.rule, &f.triple) == Ok(true);
            if !dsl || !oracle(&r.name)(a, b, c) {
                bad.push(format!("{} fails {}", f.triple, r.name));
            }
        }
    }
    let pass = fixtures.len() == 20 && bad.is_empty();
    outcome(pass, format!("{} fixtures; violations: {}", fixtures.len(), bad.len()))
}

// 4 ---------------------------------------------------------------------

fn wason_spec(target_name: &str, target: &str, initial: Triple, protocol: Protocol) -> EpisodeSpec {
    EpisodeSpec {
        episode_id: format!("accept-{}", target_name.to_lowercase().replace(' ', "-")),
        split: Split::Test,
        protocol,
        turn_budget: TURN_BUDGET,
        task: TaskSpec::Wason(WasonSpec {
            group_id: 0,
            target_name: target_name.to_string(),
            target: parse_rule(target).expect("valid rule"),
            initial,
        }),
    }
}

fn announcement(text: &str) -> TurnRecord {
    TurnRecord {
        turn: 1,
        kind: TurnKind::Guess,
        instruction: String::new(),
        raw_text: format!("Announce: {text}"),
        text: format!("Announce: {text}"),
        payload: Payload::Announcement {
            text: text.to_string(),
            med: None,
        },
        feedback: None,
        tokens: 0,
        retries: 0,
    }
}

/// Membership bitset of a rule over the whole domain, from its oracle.
fn extension_bits(name: &str) -> Vec<u64> {
    let f = oracle(name);
    let mut bits = vec![0u64; biaslab::triple::DOMAIN_SIZE.div_ceil(64)];
    for x in Triple::all() {
        let [a, b, c] = x.values();
        if f(a, b, c) {
            bits[x.index() / 64] |= 1 << (x.index() % 64);
        }
    }
    bits
}

fn blicket_oracle(relevant: u32, condition: Condition, placed: u32) -> bool {
    let hits = (relevant & placed).count_ones();
    match condition {
        Condition::Any => hits > 0,
        Condition::All => relevant & !placed == 0,
        Condition::ExactlyOne => hits == 1,
        Condition::AtLeast { n } => hits >= n as u32,
        Condition::Exactly { n } => hits == n as u32,
        Condition::Odd => hits % 2 == 1,
        Condition::Pattern { on, off } => placed & on.bits() == on.bits() && placed & off.bits() == 0,
    }
}

fn judge_soundness() -> Outcome {
    let catalog = Catalog::builtin();
    let rules = catalog.rules();
    let bits: Vec<Vec<u64>> = rules.par_iter().map(|r| extension_bits(&r.name)).collect();
    let judge = Judge::new(catalog);
    let mut pairs = 0;
    let mut disagreements = Vec::new();
    for i in 0..rules.len() {
        for j in i + 1..rules.len() {
            pairs += 1;
            let oracle_equal = bits[i] == bits[j];
            for (ann, tgt) in [(i, j), (j, i)] {
                let spec = wason_spec(&rules[tgt].name, rules[tgt].rule.source(), Triple::FIRST, Protocol::Baseline);
                let verdict = judge.judge_announcement(&spec, &announcement(rules[ann].rule.source()));
                if verdict != Ok(oracle_equal) {
                    disagreements.push(format!("{} vs {}: {verdict:?}", rules[ann].name, rules[tgt].name));
                }
            }
        }
    }

    let mut rng = SeededRng::derived(seed(), 4);
    let mut probe_mismatches = 0;
    let samples = 10_000;
    for s in 0..samples {
        if s % 2 == 0 {
            let r = &rules[rng.below(rules.len() as u32) as usize];
            let x = Triple::from_index(rng.below(biaslab::triple::DOMAIN_SIZE as u32) as usize);
            let [a, b, c] = x.values();
            let want = if oracle(&r.name)(a, b, c) { Label::Compatible } else { Label::Incompatible };
            if classify_probe(&Hypothesis::Wason(r.rule.clone()), &Probe::Triple(x)) != Ok(want) {
                probe_mismatches += 1;
            }
        } else {
            let n = if rng.below(2) == 0 { 4 } else { 8 };
            let full = (1u32 << n) - 1;
            let relevant = rng.below(full) + 1;
            let placed = rng.below(full + 1);
            let k = relevant.count_ones() as u8;
            let condition = match rng.below(6) {
                0 => Condition::Any,
                1 => Condition::All,
                2 => Condition::ExactlyOne,
                3 => Condition::AtLeast { n: 1 + rng.below(k as u32) as u8 },
                4 => Condition::Exactly { n: rng.below(k as u32 + 1) as u8 },
                _ => Condition::Odd,
            };
            let h = BlicketHypothesis {
                relevant: ObjectSet::from_bits(relevant),
                condition,
            };
            let want = if blicket_oracle(relevant, condition, placed) {
                Label::Compatible
            } else {
                Label::Incompatible
            };
            if classify_probe(&Hypothesis::Blicket(h), &Probe::Placement(ObjectSet::from_bits(placed))) != Ok(want) {
                probe_mismatches += 1;
            }
        }
    }
    let pass = pairs == 780 && disagreements.is_empty() && probe_mismatches == 0;
    outcome(
        pass,
        format!(
            "{pairs} rule pairs judged both ways, {} disagreements{}; {samples} random probes, {probe_mismatches} mismatches",
            disagreements.len(),
            disagreements.first().map(|d| format!(" (first: {d})")).unwrap_or_default()
        ),
    )
}

// 5 ---------------------------------------------------------------------

fn bias_metrics() -> Outcome {
    use Label::{Compatible as C, Correct as Y, Incompatible as I, Incorrect as N, Unjudgeable as U};
    let ds = build_wason_dataset(Catalog::builtin(), seed()).expect("dataset builds");
    let confirm = compute_metrics(&judge_all(&play(&ds.test, Strategy::Confirm)));
    let confirm_ok = confirm.ic.all.numerator == 0 && confirm.ic.all.denominator > 0 && confirm.ic.all.value == Some(0.0);

    let ep = JudgedEpisode::from_labels;
    let mut failed = ep("f", &[(N, I); 5], 3);
    failed.status = biaslab::engine::EpisodeStatus::TransportFailure;
    // (episodes, pooled I:C over all, hand-computed)
    let fixtures: Vec<(Vec<JudgedEpisode>, Ratio, Option<f64>)> = vec![
        (vec![ep("a", &[(N, I), (N, C)], 1), ep("b", &[(N, C); 3], 1)], Ratio::new(1, 4), Some(0.25)),
        (vec![ep("a", &[(N, I), (N, I), (N, C), (N, C), (N, C), (N, C)], 1)], Ratio::new(2, 4), Some(0.5)),
        (
            vec![ep("s", &[(N, I), (Y, C), (Y, I)], 1), ep("u", &[(N, C), (N, U)], 1)],
            Ratio::new(1, 2),
            Some(0.5),
        ),
        (vec![ep("z", &[(N, I), (N, I)], 1)], Ratio::new(2, 0), None),
        (
            {
                let mut b = vec![(N, I)];
                b.extend([(N, C); 9]);
                vec![ep("a", &[(N, I), (N, C)], 1), ep("b", &b, 1), failed]
            },
            Ratio::new(2, 10),
            Some(0.2),
        ),
    ];
    let fixture_ok: Vec<bool> = fixtures
        .iter()
        .map(|(eps, want, value)| {
            let r = compute_metrics(eps);
            r.ic.all == *want && r.ic.all.value == *value
        })
        .collect();
    let pass = confirm_ok && fixture_ok.iter().all(|&b| b);
    outcome(
        pass,
        format!(
            "ConfirmBot I:C {} ({}/{}); fixtures {:?}",
            confirm.ic.all, confirm.ic.all.numerator, confirm.ic.all.denominator, fixture_ok
        ),
    )
}

// 6 ---------------------------------------------------------------------

fn agent_ordering() -> Outcome {
    let start = Instant::now();
    let ds = build_wason_dataset(Catalog::builtin(), seed()).expect("dataset builds");
    let report = |s| compute_metrics(&judge_all(&play(&ds.test, s)));
    let (c, f, e) = (report(Strategy::Confirm), report(Strategy::Falsify), report(Strategy::Elimination));
    let secs = start.elapsed().as_secs_f64();
    let ts = |r: &biaslab::metrics::MetricReport| r.task_success.unwrap_or(f64::NAN);
    let success_ok = ts(&e) == 1.0 && ts(&e) > ts(&f) && ts(&f) > ts(&c);
    // I_f / C_f > I_c / C_c without dividing, so a zero C_f counts as +inf
    let (fi, fc) = (f.ic.all.numerator as u128, f.ic.all.denominator as u128);
    let (ci, cc) = (c.ic.all.numerator as u128, c.ic.all.denominator as u128);
    let ic_ok = ci == 0 && cc > 0 && fi * cc > ci * fc;
    let pass = success_ok && ic_ok && secs < 60.0;
    outcome(
        pass,
        format!(
            "success E {:.3} F {:.3} C {:.3}; I:C F {} C {}; {secs:.1}s",
            ts(&e),
            ts(&f),
            ts(&c),
            f.ic.all,
            c.ic.all
        ),
    )
}

// 7 ---------------------------------------------------------------------

fn permutation_test_check() -> Outcome {
    let mut rng = SeededRng::derived(seed(), 7);
    let mut worst = 0.0f64;
    let mut ok = true;
    for n in 1..=12usize {
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.below(1000) as f64 / 100.0, rng.below(1000) as f64 / 100.0 + 1.0))
            .collect();
        for alt in [Alternative::Greater, Alternative::TwoSided] {
            let exact = exact_sign_flip_p(&pairs, alt);
            let r = permutation_test(&pairs, DEFAULT_PERMUTATIONS, seed() + n as u64, alt).expect("non-empty");
            let se = (exact * (1.0 - exact) / DEFAULT_PERMUTATIONS as f64).sqrt();
            let z = if se > 0.0 { (r.p_value - exact).abs() / se } else { 0.0 };
            worst = worst.max(z);
            let formula = r.p_value == (r.k + 1) as f64 / (DEFAULT_PERMUTATIONS + 1) as f64;
            ok &= formula && (r.p_value - exact).abs() <= 3.0 * se + 1.0 / (DEFAULT_PERMUTATIONS + 1) as f64;
        }
    }
    let ties = permutation_test(&[(0.4, 0.4); 9], DEFAULT_PERMUTATIONS, seed(), Alternative::Greater).expect("non-empty");
    let ties_ok = ties.p_value == 1.0;
    outcome(
        ok && ties_ok,
        format!("n = 1..12, both alternatives, worst |p - exact| = {worst:.2} SE; all-ties p = {}", ties.p_value),
    )
}

// 8 ---------------------------------------------------------------------

/// Emits fixed lines in order, then stops the episode.
struct Lines(std::vec::IntoIter<String>);

impl Agent for Lines {
    fn act(&mut self, _: &AgentView<'_>) -> Result<AgentReply, AgentError> {
        self.0
            .next()
            .map(|text| AgentReply { text, tokens: 0 })
            .ok_or_else(|| AgentError::Other("script exhausted".into()))
    }
}

/// Model outputs of a `[model]` / `[environment]` dialogue, in order.
fn model_lines(dialogue: &str) -> Vec<String> {
    dialogue
        .trim_end()
        .split("\n\n")
        .filter_map(|block| block.strip_prefix("[model] "))
        .map(str::to_string)
        .collect()
}

fn render(t: &Transcript) -> String {
    let mut parts = Vec::new();
    for (i, r) in t.turns.iter().enumerate() {
        parts.push(format!("[model] {}", r.raw_text));
        if let Some(next) = t.turns.get(i + 1) {
            parts.push(format!("[environment] {}", next.instruction));
        }
    }
    parts.join("\n\n") + "\n"
}

fn golden_case(name: &str, spec: EpisodeSpec) -> Result<(), String> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let read = |ext: &str| std::fs::read_to_string(dir.join(format!("{name}.{ext}.txt"))).expect("golden file");
    let (prompt, dialogue) = (read("prompt"), read("dialogue"));
    let mut agent = Lines(model_lines(&dialogue).into_iter());
    let ep = run_episode(spec, &mut agent, &RunLimits::default()).map_err(|e| e.to_string())?;
    let t = ep.into_transcript(serde_json::Value::Null, biaslab::engine::RunInfo::new("", 0, 5, None));
    if t.format_retries > 0 {
        return Err(format!("{name}: {} outputs rejected", t.format_retries));
    }
    if t.turns[0].instruction != prompt.trim_end() {
        return Err(format!("{name}: prompt differs"));
    }
    if render(&t) != dialogue {
        return Err(format!("{name}: dialogue differs:\n{}", render(&t)));
    }
    Ok(())
}

fn blicket_spec(protocol: Protocol) -> EpisodeSpec {
    let relevant = ObjectSet::from_ids([0, 1]).expect("valid ids");
    EpisodeSpec {
        episode_id: "accept-blicket".into(),
        split: Split::Test,
        protocol,
        turn_budget: TURN_BUDGET,
        task: TaskSpec::Blicket(BlicketSpec {
            config: BlicketConfig {
                num_objects: 4,
                num_blickets: 2,
                kind: BlicketKind::Conjunctive,
            },
            target: BlicketRuleExpr::new(relevant, BlicketKind::Conjunctive).expect("non-empty"),
            initial_placement: ObjectSet::from_ids([1]).expect("valid ids"),
            initial_device_on: false,
        }),
    }
}

fn protocol_fidelity() -> Outcome {
    let initial = Triple::new(12, -36, -36).expect("in domain");
    let even = "a % 2 == 0 and b % 2 == 0 and c % 2 == 0";
    let cases = [
        ("b1_wason_baseline", wason_spec("All even", even, initial, Protocol::Baseline)),
        ("b2_wason_dual_goal", wason_spec("All even", even, initial, Protocol::DualGoal)),
        // the published feedback (NO on [2, 4, 6]) contradicts its stated
        // rule; a non-increasing rule produces the shown interaction
        (
            "b3_wason_think_in_opposites",
            wason_spec("Non-increasing", "a >= b and b >= c", initial, Protocol::ThinkInOpposites),
        ),
        ("f3_blicket_baseline", blicket_spec(Protocol::Baseline)),
        ("f3_blicket_think_in_opposites", blicket_spec(Protocol::ThinkInOpposites)),
    ];
    let errors: Vec<String> = cases
        .into_iter()
        .filter_map(|(name, spec)| golden_case(name, spec).err())
        .collect();
    outcome(
        errors.is_empty(),
        if errors.is_empty() {
            "5 golden interactions reproduced verbatim".to_string()
        } else {
            errors.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("feasible-set sizes match the published table", feasible_sets),
        ("dataset and distillation arithmetic", dataset_arithmetic),
        ("published test triples satisfy their groups", fixture_validity),
        ("judge agrees with brute-force oracles", judge_soundness),
        ("bias metrics: ConfirmBot I:C and pooling fixtures", bias_metrics),
        ("agent ordering on the test set", agent_ordering),
        ("permutation test vs exact enumeration", permutation_test_check),
        ("golden protocol transcripts", protocol_fidelity),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if filter.as_ref().is_some_and(|f| *f != id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!(
            "{} {id}. {name} [{:.1}s]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("9. LLM result tables and distillation gains: not reproducible offline; covered by 5 and 6");
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

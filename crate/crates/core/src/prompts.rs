//! Task and judge prompt templates.
//!
//! Templates live as text assets under `assets/` and are substituted with
//! plain `{slot}` replacement. Instruction strings issued between turns are
//! fixed here.

use crate::catalog::{BlicketSpec, EpisodeSpec, Protocol, TaskSpec};
use crate::dsl::ObjectSet;
use crate::engine::{Feedback, TurnKind};
use crate::triple::Triple;

pub const PROMPT_VERSION: &str = "prompts/1";

const WASON_BASELINE: &str = include_str!("../assets/prompts/wason_baseline.txt");
const WASON_DUAL_GOAL: &str = include_str!("../assets/prompts/wason_dual_goal.txt");
const WASON_TIO: &str = include_str!("../assets/prompts/wason_think_in_opposites.txt");
const BLICKET_BASELINE: &str = include_str!("../assets/prompts/blicket_baseline.txt");
const BLICKET_TIO: &str = include_str!("../assets/prompts/blicket_think_in_opposites.txt");

pub const JUDGE_CORRECTNESS_WASON: &str = include_str!("../assets/judge/correctness_wason.txt");
pub const JUDGE_CORRECTNESS_DUAL_GOAL: &str =
    include_str!("../assets/judge/correctness_dual_goal.txt");
pub const JUDGE_CORRECTNESS_BLICKET: &str = include_str!("../assets/judge/correctness_blicket.txt");
pub const JUDGE_COMPAT_WASON_PYTHON: &str =
    include_str!("../assets/judge/compatibility_wason_python.txt");
pub const JUDGE_COMPAT_BLICKET_PYTHON: &str =
    include_str!("../assets/judge/compatibility_blicket_python.txt");
pub const JUDGE_COMPAT_WASON_DSL: &str = include_str!("../assets/judge/compatibility_wason_dsl.txt");
pub const JUDGE_COMPAT_BLICKET_DSL: &str =
    include_str!("../assets/judge/compatibility_blicket_dsl.txt");
pub const JUDGE_GUIDANCE: &str = include_str!("../assets/judge/guidance.toml");

/// Instruction issued after an accepted announcement.
pub const TEST_INSTRUCTION: &str = "Turn - Test";

/// Replaces each `{name}` slot. Unknown slots are left untouched.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.trim_end_matches('\n').to_string();
    for (name, value) in slots {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}

/// The opening prompt for an episode, with its initial evidence filled in.
pub fn initial_prompt(spec: &EpisodeSpec) -> String {
    match &spec.task {
        TaskSpec::Wason(w) => wason_prompt(spec.protocol, w.initial),
        TaskSpec::Blicket(b) => blicket_prompt(spec.protocol, b),
    }
}

pub fn wason_prompt(protocol: Protocol, initial: Triple) -> String {
    let template = match protocol {
        Protocol::Baseline => WASON_BASELINE,
        Protocol::DualGoal => WASON_DUAL_GOAL,
        Protocol::ThinkInOpposites => WASON_TIO,
    };
    fill(template, &[("initial", &initial.to_string())])
}

/// Blicket prompts exist for baseline and think-in-opposites only; a
/// dual-goal spec is rejected by validation before reaching here.
pub fn blicket_prompt(protocol: Protocol, b: &BlicketSpec) -> String {
    let template = match protocol {
        Protocol::ThinkInOpposites => BLICKET_TIO,
        _ => BLICKET_BASELINE,
    };
    let n = b.config.num_objects;
    fill(
        template,
        &[
            ("num_objects", &n.to_string()),
            ("object_states", &object_states(n, b.initial_placement)),
            ("device_state", if b.initial_device_on { "on" } else { "off" }),
        ],
    )
}

/// `object 0 is on the floor, object 1 is on the device,` with two objects
/// per line.
pub fn object_states(num_objects: u8, placed: ObjectSet) -> String {
    let parts: Vec<String> = (0..num_objects)
        .map(|i| {
            let place = if placed.contains(i) { "the device" } else { "the floor" };
            format!("object {i} is on {place}")
        })
        .collect();
    let lines: Vec<String> = parts.chunks(2).map(|c| c.join(", ")).collect();
    format!("{}.", lines.join(",\n"))
}

/// Instruction issued after a test: the feedback word, then the next turn.
pub fn announce_instruction(feedback: Feedback) -> String {
    format!("{}. Turn - Announce", feedback.word())
}

/// The expected output shape for a phase, quoted in format-retry notices.
pub fn format_requirement(task: &TaskSpec, protocol: Protocol, kind: TurnKind) -> &'static str {
    match (task, kind) {
        (TaskSpec::Wason(_), TurnKind::Guess) if protocol == Protocol::DualGoal => {
            "Output exactly two lines:\n  Announce: DAX rule - <one short sentence >\n  Announce: MED rule - <one short sentence >"
        }
        (TaskSpec::Wason(_), TurnKind::Guess) => {
            "Output exactly one line:\n  Announce: <one short sentence naming the rule>"
        }
        (TaskSpec::Wason(_), TurnKind::Test) => "Output exactly one line:\n  Check: [a,b,c]",
        (TaskSpec::Blicket(_), TurnKind::Guess) => {
            "Output exactly one line:\n  Announce: relevant=[object A, object B, object C]; rule=<one short description of the rule >"
        }
        (TaskSpec::Blicket(_), TurnKind::Test) => {
            "Output exactly one line:\n  Test: [object A, object B, object C]"
        }
    }
}

/// Pending instruction plus a notice that the last output was rejected.
pub fn retry_instruction(pending: &str, problem: &str, requirement: &str) -> String {
    format!(
        "{pending}\n\nYour previous output did not follow the required format ({problem}).\n{requirement}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_leaves_unknown_slots() {
        assert_eq!(fill("{a} {b}\n", &[("a", "x")]), "x {b}");
    }

    #[test]
    fn object_state_lines() {
        let placed = ObjectSet::from_ids([1]).unwrap();
        assert_eq!(
            object_states(4, placed),
            "object 0 is on the floor, object 1 is on the device,\nobject 2 is on the floor, object 3 is on the floor."
        );
        assert_eq!(object_states(3, ObjectSet::EMPTY).lines().count(), 2);
    }

    #[test]
    fn templates_carry_their_slots() {
        for t in [WASON_BASELINE, WASON_DUAL_GOAL, WASON_TIO] {
            assert_eq!(t.matches("{initial}").count(), 1);
        }
        for t in [BLICKET_BASELINE, BLICKET_TIO] {
            for slot in ["{num_objects}", "{object_states}", "{device_state}"] {
                assert_eq!(t.matches(slot).count(), 1, "{slot}");
            }
        }
        assert!(JUDGE_CORRECTNESS_WASON.contains("{rule_guidance}"));
        assert!(JUDGE_COMPAT_WASON_DSL.contains("{HYPOTHESIS}"));
    }

    #[test]
    fn protocol_wording() {
        let x = Triple::new(12, -36, -36).unwrap();
        let base = wason_prompt(Protocol::Baseline, x);
        assert!(base.ends_with("is: [12, -36, -36].\nLet's begin.\nTurn - Announce."));
        assert!(wason_prompt(Protocol::DualGoal, x).contains("A DAX triple is: [12, -36, -36]."));
        assert!(wason_prompt(Protocol::ThinkInOpposites, x)
            .contains("test triples that both confirm and contradict your current idea"));
        assert!(!base.contains("opposite"));
    }
}

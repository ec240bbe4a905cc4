//! Shared helpers for integration tests: hand-written rule oracles and
//! in-memory episode runs.

#![allow(dead_code)]

use rayon::prelude::*;

use biaslab::agents::scripted::Strategy;
use biaslab::agents::{run_episode, AgentFactory, AgentSpec, RunLimits};
use biaslab::catalog::{Catalog, EpisodeSpec};
use biaslab::engine::{RunInfo, Transcript};
use biaslab::judge::{Judge, JudgedEpisode};

pub type Oracle = fn(i64, i64, i64) -> bool;

fn even(n: i64) -> bool {
    n.rem_euclid(2) == 0
}

fn odd(n: i64) -> bool {
    !even(n)
}

fn ends(n: i64, d: i64) -> bool {
    n.abs() % 10 == d
}

fn div(n: i64, m: i64) -> bool {
    n.rem_euclid(m) == 0
}

fn prime(n: i64) -> bool {
    n >= 2 && (2..n).take_while(|k| k * k <= n).all(|k| n % k != 0)
}

fn cube(n: i64) -> bool {
    (-5i64..=5).any(|k| k * k * k == n)
}

fn distinct(a: i64, b: i64, c: i64) -> usize {
    let mut v = [a, b, c];
    v.sort_unstable();
    1 + (v[0] != v[1]) as usize + (v[1] != v[2]) as usize
}

fn count(xs: [bool; 3]) -> usize {
    xs.iter().filter(|&&x| x).count()
}

/// Direct Rust transcriptions of every catalog rule, written from the rule
/// names rather than from the DSL.
pub fn oracle(name: &str) -> Oracle {
    match name {
        "All even" => |a, b, c| even(a) && even(b) && even(c),
        "Each divides next" => |a, b, c| a != 0 && b != 0 && b % a == 0 && c % b == 0,
        "Exactly two equal" => |a, b, c| distinct(a, b, c) == 2,
        "At least one even" => |a, b, c| even(a) || even(b) || even(c),
        "All end with 6" => |a, b, c| ends(a, 6) && ends(b, 6) && ends(c, 6),
        "Increasing differences" => |a, b, c| b - a > 0 && c - b > b - a,
        "a is min" => |a, b, c| a <= b && a <= c,
        "All distinct" => |a, b, c| a != b && b != c && a != c,
        "All divisible by 5" => |a, b, c| div(a, 5) && div(b, 5) && div(c, 5),
        "a is max" => |a, b, c| a >= b && a >= c,
        "Non-monotone (middle between ends)" => |a, b, c| (a < b && b > c) || (a > b && b < c),
        "At least two multiples of 5" => |a, b, c| count([div(a, 5), div(b, 5), div(c, 5)]) >= 2,
        "All divisible by 3" => |a, b, c| div(a, 3) && div(b, 3) && div(c, 3),
        "Alternating parity (ends same)" => |a, b, c| even(a) == even(c) && even(a) != even(b),
        "Ascending" => |a, b, c| a < b && b < c,
        "Non-decreasing" => |a, b, c| a <= b && b <= c,
        "All end with 9" => |a, b, c| ends(a, 9) && ends(b, 9) && ends(c, 9),
        "Non-decreasing differences" => |a, b, c| b - a <= c - b,
        "c is max" => |a, b, c| c >= a && c >= b,
        "Arithmetic progression (AP)" => |a, b, c| a + c == 2 * b,
        "All divisible by 7" => |a, b, c| div(a, 7) && div(b, 7) && div(c, 7),
        "Exactly two even" => |a, b, c| count([even(a), even(b), even(c)]) == 2,
        "At least one multiple of 4" => |a, b, c| div(a, 4) || div(b, 4) || div(c, 4),
        "At least two distinct" => |a, b, c| !(a == b && b == c),
        "All end with 1" => |a, b, c| ends(a, 1) && ends(b, 1) && ends(c, 1),
        "c is min" => |a, b, c| c <= a && c <= b,
        "All negative" => |a, b, c| a < 0 && b < 0 && c < 0,
        "Descending" => |a, b, c| a > b && b > c,
        "All odd" => |a, b, c| odd(a) && odd(b) && odd(c),
        "b is (strict) max" => |a, b, c| b > a && b > c,
        "Mixed signs" => |a, b, c| (1..=2).contains(&count([a < 0, b < 0, c < 0])),
        "At least one multiple of 3" => |a, b, c| div(a, 3) || div(b, 3) || div(c, 3),
        "All prime numbers" => |a, b, c| prime(a) && prime(b) && prime(c),
        "Non-increasing" => |a, b, c| a >= b && b >= c,
        "All positive" => |a, b, c| a > 0 && b > 0 && c > 0,
        "Contains a prime" => |a, b, c| prime(a) || prime(b) || prime(c),
        "All cube numbers" => |a, b, c| cube(a) && cube(b) && cube(c),
        "Exactly two odd" => |a, b, c| count([odd(a), odd(b), odd(c)]) == 2,
        "Decreasing gaps" => |a, b, c| b - a > c - b,
        "At least one odd" => |a, b, c| odd(a) || odd(b) || odd(c),
        other => panic!("no oracle for rule `{other}`"),
    }
}

/// Plays every spec with a scripted strategy and returns the transcripts
/// in input order.
pub fn play(specs: &[EpisodeSpec], strategy: Strategy) -> Vec<Transcript> {
    let factory = AgentFactory::new(AgentSpec::scripted(strategy), Catalog::builtin());
    factory.prepare(specs).expect("pools build");
    let limits = RunLimits::default();
    specs
        .par_iter()
        .map(|spec| {
            let mut agent = factory.build(spec).expect("scripted agent builds");
            let ep = run_episode(spec.clone(), agent.as_mut(), &limits).expect("valid spec");
            ep.into_transcript(factory.descriptor(), RunInfo::new("", 0, limits.retry_cap, None))
        })
        .collect()
}

pub fn judge_all(transcripts: &[Transcript]) -> Vec<JudgedEpisode> {
    let judge = Judge::new(Catalog::builtin());
    transcripts.par_iter().map(|t| judge.judge_transcript(t)).collect()
}

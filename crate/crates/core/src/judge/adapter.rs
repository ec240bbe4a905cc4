//! Optional LLM judge for free-text announcements.
//!
//! Correctness goes through the verbatim judge prompts. Compatibility asks
//! for a translation of the hypothesis into the rule language, feeding any
//! parse or evaluation error back for a bounded number of repairs.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::blicket::{parse_blicket_announcement, BlicketHypothesis};
use crate::agents::chat::{ChatClient, ChatError, ChatMessage, Decoding, EndpointConfig, Limiter};
use crate::catalog::Protocol;
use crate::dsl::{parse_rule, BlicketRuleExpr, RuleExpr};
use crate::engine::strip_reasoning;
use crate::prompts::{self, fill};
use crate::triple::Triple;

pub const DEFAULT_REPAIR_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmJudgeConfig {
    pub endpoint: EndpointConfig,
    #[serde(default = "judge_decoding")]
    pub decoding: Decoding,
    /// Translation attempts per hypothesis, counting the first.
    #[serde(default = "default_repairs")]
    pub repair_attempts: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrent_requests: usize,
}

fn judge_decoding() -> Decoding {
    Decoding {
        temperature: 0.2,
        top_p: 1.0,
        top_k: None,
        presence_penalty: 0.0,
        max_tokens: Some(512),
    }
}

fn default_repairs() -> u32 {
    DEFAULT_REPAIR_ATTEMPTS
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error(transparent)]
    Chat(#[from] ChatError),
    #[error("judge reply `{0}` is not a verdict")]
    BadVerdict(String),
    #[error("no valid translation after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
}

#[derive(Debug, Deserialize)]
struct GuidanceFile {
    #[allow(dead_code)]
    version: String,
    #[serde(default)]
    rules: HashMap<String, GuidanceEntry>,
}

#[derive(Debug, Deserialize)]
struct GuidanceEntry {
    text: String,
}

/// Per-rule guidance text for the correctness prompts.
#[derive(Debug, Clone, Default)]
pub struct Guidance(HashMap<String, String>);

impl Guidance {
    pub fn builtin() -> Guidance {
        let file: GuidanceFile = toml::from_str(prompts::JUDGE_GUIDANCE).expect("bundled guidance parses");
        Guidance(file.rules.into_iter().map(|(k, v)| (k, v.text)).collect())
    }

    pub fn for_rule(&self, rule: &str) -> String {
        self.0.get(rule).cloned().unwrap_or_else(|| {
            format!(
                "ACCEPT: descriptions with exactly the same meaning as \"{rule}\".\n\
                 REJECT: any broader, narrower, or different rule."
            )
        })
    }
}

pub struct LlmJudge {
    client: ChatClient,
    decoding: Decoding,
    repair_attempts: u32,
    guidance: Guidance,
}

impl LlmJudge {
    pub fn new(config: &LlmJudgeConfig) -> Self {
        Self::with_limiter(config, Limiter::global(config.max_concurrent_requests))
    }

    pub fn with_limiter(config: &LlmJudgeConfig, limiter: Arc<Limiter>) -> Self {
        LlmJudge {
            client: ChatClient::new(config.endpoint.clone(), limiter),
            decoding: config.decoding.clone(),
            repair_attempts: config.repair_attempts.max(1),
            guidance: Guidance::builtin(),
        }
    }

    fn ask(&self, messages: &[ChatMessage]) -> Result<String, AdapterError> {
        let reply = self.client.complete(messages, &self.decoding)?;
        Ok(strip_reasoning(&reply.text))
    }

    /// Wason or dual-goal announcement against a named catalog rule.
    pub fn wason_correct(&self, protocol: Protocol, announced: &str, target_name: &str) -> Result<bool, AdapterError> {
        let template = match protocol {
            Protocol::DualGoal => prompts::JUDGE_CORRECTNESS_DUAL_GOAL,
            _ => prompts::JUDGE_CORRECTNESS_WASON,
        };
        let guidance = self.guidance.for_rule(target_name);
        let prompt = fill(
            template,
            &[
                ("rule_guidance", guidance.as_str()),
                ("announced_rule", announced),
                ("ground_truth_rule", target_name),
            ],
        );
        parse_verdict(&self.ask(&[ChatMessage::user(prompt)])?)
    }

    pub fn blicket_correct(&self, announced: &str, target: &BlicketRuleExpr) -> Result<bool, AdapterError> {
        let ids: Vec<String> = target.relevant().ids().map(|i| i.to_string()).collect();
        let blickets = format!("[{}]", ids.join(", "));
        let prompt = fill(
            prompts::JUDGE_CORRECTNESS_BLICKET,
            &[
                ("true_blickets", blickets.as_str()),
                ("true_rule", target.kind().name()),
                ("announce_text", announced),
            ],
        );
        parse_verdict(&self.ask(&[ChatMessage::user(prompt)])?)
    }

    /// Translates a hypothesis into a rule that evaluates on every probe.
    pub fn translate_wason(&self, hypothesis: &str, probes: &[Triple]) -> Result<RuleExpr, AdapterError> {
        let prompt = fill(prompts::JUDGE_COMPAT_WASON_DSL, &[("HYPOTHESIS", hypothesis)]);
        self.repair_loop(prompt, |reply| {
            let rule = parse_rule(reply).map_err(|e| e.to_string())?;
            for p in probes {
                rule.eval_at(p).map_err(|e| e.to_string())?;
            }
            Ok(rule)
        })
    }

    pub fn translate_blicket(&self, hypothesis: &str, num_objects: u8) -> Result<BlicketHypothesis, AdapterError> {
        let n = num_objects.to_string();
        let prompt = fill(
            prompts::JUDGE_COMPAT_BLICKET_DSL,
            &[("HYPOTHESIS", hypothesis), ("NUM_OBJECTS", n.as_str())],
        );
        self.repair_loop(prompt, |reply| parse_blicket_announcement(reply, num_objects))
    }

    fn repair_loop<T>(&self, prompt: String, check: impl Fn(&str) -> Result<T, String>) -> Result<T, AdapterError> {
        let mut messages = vec![ChatMessage::user(prompt)];
        let mut last = String::new();
        for _ in 0..self.repair_attempts {
            let reply = self.ask(&messages)?;
            let candidate = unfence(&reply);
            match check(candidate) {
                Ok(v) => return Ok(v),
                Err(e) => {
                    last = e;
                    messages.push(ChatMessage::assistant(reply));
                    messages.push(ChatMessage::user(format!(
                        "Your answer failed with this error:\n{last}\nReturn a corrected answer only."
                    )));
                }
            }
        }
        Err(AdapterError::Exhausted {
            attempts: self.repair_attempts,
            last,
        })
    }
}

/// Drops surrounding code fences and blank lines.
fn unfence(reply: &str) -> &str {
    let t = reply.trim();
    let t = t.strip_prefix("```").map(|r| r.split_once('\n').map_or(r, |(_, b)| b)).unwrap_or(t);
    t.strip_suffix("```").unwrap_or(t).trim()
}

pub fn parse_verdict(reply: &str) -> Result<bool, AdapterError> {
    let word = reply
        .trim()
        .trim_matches(|c: char| !c.is_ascii_alphabetic())
        .to_ascii_uppercase();
    match word.as_str() {
        "YES" | "TRUE" => Ok(true),
        "NO" | "FALSE" => Ok(false),
        _ => Err(AdapterError::BadVerdict(reply.chars().take(80).collect())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::Mutex;

    /// Serves canned completions in order and records request bodies.
    fn mock(replies: Vec<&'static str>) -> (String, Arc<Mutex<Vec<String>>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = seen.clone();
        std::thread::spawn(move || {
            for (stream, reply) in listener.incoming().zip(replies) {
                let mut stream = stream.unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                log.lock().unwrap().push(String::from_utf8(body).unwrap());
                let payload = serde_json::json!({"choices": [{"message": {"content": reply}}]}).to_string();
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    payload.len(),
                    payload
                )
                .unwrap();
            }
        });
        (url, seen)
    }

    fn judge(url: &str) -> LlmJudge {
        let config = LlmJudgeConfig {
            endpoint: EndpointConfig::new(url, "judge"),
            decoding: judge_decoding(),
            repair_attempts: 3,
            max_concurrent_requests: 2,
        };
        LlmJudge::with_limiter(&config, Arc::new(Limiter::new(2)))
    }

    #[test]
    fn verdict_words() {
        assert!(parse_verdict("YES").unwrap());
        assert!(!parse_verdict(" no.\n").unwrap());
        assert!(parse_verdict("True").unwrap());
        assert!(parse_verdict("maybe").is_err());
        assert_eq!(unfence("```\na < b\n```"), "a < b");
    }

    #[test]
    fn correctness_prompt_is_filled() {
        let (url, seen) = mock(vec!["YES"]);
        let j = judge(&url);
        assert!(j.wason_correct(Protocol::Baseline, "All three numbers are even.", "All even").unwrap());
        let body: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[0]).unwrap();
        let prompt = body["messages"][0]["content"].as_str().unwrap();
        assert!(prompt.contains("\"All three numbers are even.\""));
        assert!(prompt.contains("ACCEPT: \"all even\""));
        assert_eq!(body["temperature"], 0.2);
    }

    #[test]
    fn repair_loop_feeds_errors_back() {
        let (url, seen) = mock(vec!["def rule(a, b, c): return b > a", "(b - a) > 0 and (c - b) > (b - a)"]);
        let j = judge(&url);
        let probes = [Triple::new(1, 2, 4).unwrap(), Triple::new(1, 3, 5).unwrap()];
        let rule = j.translate_wason("The gaps strictly increase", &probes).unwrap();
        assert!(rule.eval(&probes[0]).unwrap());
        assert!(!rule.eval(&probes[1]).unwrap());
        let second: serde_json::Value = serde_json::from_str(&seen.lock().unwrap()[1]).unwrap();
        assert_eq!(second["messages"].as_array().unwrap().len(), 3);
        assert!(second["messages"][2]["content"].as_str().unwrap().contains("error"));
    }

    #[test]
    fn repair_cap_is_enforced() {
        let (url, _) = mock(vec!["b / a > 1", "b / a > 1", "b / a > 1"]);
        let j = judge(&url);
        let err = j.translate_wason("b is more than a multiple of a", &[Triple::new(0, 1, 1).unwrap()]);
        assert!(matches!(err, Err(AdapterError::Exhausted { attempts: 3, .. })));
    }
}

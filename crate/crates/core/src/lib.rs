//! Simulator and evaluation harness for confirmation bias in interactive
//! hypothesis testing: rule-discovery environments, scripted and
//! chat-completion agents, judges, bias metrics, and permutation statistics.

pub mod agents;
pub mod catalog;
pub mod distill;
pub mod dsl;
pub mod engine;
pub mod io;
pub mod judge;
pub mod metrics;
pub mod prng;
pub mod prompts;
pub mod runner;
pub mod stats;
pub mod triple;

pub use triple::Triple;

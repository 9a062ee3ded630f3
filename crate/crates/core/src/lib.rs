//! Syntactic knowledge benchmark toolkit.
//!
//! The pipeline turns a constituency treebank into question/answer items
//! probing nine syntactic relations, samples a balanced evaluation set,
//! drives model endpoints over it and scores the answers:
//!
//! treebank → [`pattern`] → [`extract`] → [`qgen`] → [`sampler`] → [`runner`] → [`scoring`]

pub mod extract;
pub mod fixtures;
pub mod io;
pub mod pattern;
pub mod qgen;
pub mod rng;
pub mod runner;
pub mod sampler;
pub mod scoring;
pub mod treebank;

pub use extract::{extract_facts, KnowledgePoint, SyntacticFact};
pub use pattern::{compile_pattern, LabelMatcher, MatchBinding, PatternError, PatternRuleSet};
pub use qgen::{generate_questions, Gold, Question, QuestionType, TemplateSet};
pub use runner::{ModelEndpoint, RunConfig, RunRecord, Setting};
pub use sampler::{sample_balanced, SampleConfig, StratumKey};
pub use scoring::{overall_accuracy, ParsedAnswer, Scoreboard};
pub use treebank::{parse_bracketed, NodeLabel, Sentence, Span, TreeNode, TreebankError};

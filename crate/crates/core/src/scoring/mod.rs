//! Answer parsing, per-question metrics and scoreboard aggregation.
//!
//! FITB answers are compared after Treebank tokenization with
//! punctuation-only tokens removed and case folded. The strict F1 counts the
//! longest common subsequence of gold and prediction, so matched words must
//! keep their relative order.

mod report;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::KnowledgePoint;
use crate::qgen::{Gold, Question, QuestionType, BLANK};
use crate::runner::RunRecord;

pub use report::{kp_table, main_table, scoreboard_csv, series_csv, LabeledScoreboard};
pub use tokenize::treebank_tokenize;

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("{name} = {value} is outside [0, 100]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("run record refers to unknown question {0}")]
    UnknownQuestion(String),
    #[error("duplicate record for question {question_id} seed {seed}")]
    DuplicateRecord { question_id: String, seed: u64 },
}

fn is_punctuation_token(tok: &str) -> bool {
    tok.chars().all(|c| !c.is_alphanumeric())
}

/// Tokenize, drop punctuation-only tokens, lowercase.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    treebank_tokenize(text)
        .into_iter()
        .filter(|t| !is_punctuation_token(t))
        .map(|t| t.to_lowercase())
        .collect()
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Order-sensitive token F1 in [0, 1].
pub fn fitb_f1<T: PartialEq>(gold: &[T], pred: &[T]) -> f64 {
    if gold.is_empty() || pred.is_empty() {
        return 0.0;
    }
    let m = lcs_len(gold, pred);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / pred.len() as f64;
    let r = m as f64 / gold.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn fitb_acc<T: PartialEq>(gold: &[T], pred: &[T]) -> u8 {
    u8::from(gold == pred)
}

/// `(tf + mc + (fitb_acc + fitb_f1) / 2) / 3`, all in percent.
pub fn overall_accuracy(tf: f64, mc: f64, fitb_acc: f64, fitb_f1: f64) -> Result<f64, ScoringError> {
    for (name, value) in [("tf", tf), ("mc", mc), ("fitb_acc", fitb_acc), ("fitb_f1", fitb_f1)] {
        if !(0.0..=100.0).contains(&value) {
            return Err(ScoringError::OutOfRange { name, value });
        }
    }
    Ok((tf + mc + (fitb_acc + fitb_f1) / 2.0) / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseStatus {
    Clean,
    Salvaged,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnswerValue {
    Bool(bool),
    Letter(char),
    Text(String),
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    pub qtype: QuestionType,
    pub value: AnswerValue,
    pub status: ParseStatus,
}

impl ParsedAnswer {
    fn unparseable(qtype: QuestionType) -> Self {
        ParsedAnswer {
            qtype,
            value: AnswerValue::None,
            status: ParseStatus::Unparseable,
        }
    }

    fn status(clean: bool) -> ParseStatus {
        if clean {
            ParseStatus::Clean
        } else {
            ParseStatus::Salvaged
        }
    }
}

fn word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z]+").expect("static pattern"))
}

fn letter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r#"(?:^|[\s(\["'*])([A-D])(?:$|[\s.):,\]"'*])"#).expect("static pattern")
    })
}

fn answer_prefix_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*(?:the\s+)?answer\s*(?:is)?\s*[:\-]?\s*").expect("static pattern"))
}

const QUOTES: &[char] = &['"', '\'', '`', '\u{201c}', '\u{201d}', '\u{2018}', '\u{2019}', '*'];

/// Reads a model response without access to the question.
pub fn parse_answer(qtype: QuestionType, raw: &str) -> ParsedAnswer {
    match qtype {
        QuestionType::TF => {
            let mut words = word_re().find_iter(raw).map(|m| m.as_str().to_ascii_lowercase());
            let first = words.next();
            let hit = first
                .iter()
                .cloned()
                .chain(words)
                .enumerate()
                .find(|(_, w)| w == "true" || w == "false");
            match hit {
                Some((i, w)) => ParsedAnswer {
                    qtype,
                    value: AnswerValue::Bool(w == "true"),
                    status: ParsedAnswer::status(i == 0),
                },
                None => ParsedAnswer::unparseable(qtype),
            }
        }
        QuestionType::MC => match letter_re().captures(raw) {
            Some(c) => {
                let m = c.get(1).expect("group 1");
                let clean = raw[..m.start()].trim().is_empty();
                let letter = m.as_str().chars().next().expect("one letter");
                ParsedAnswer {
                    qtype,
                    value: AnswerValue::Letter(letter),
                    status: ParsedAnswer::status(clean),
                }
            }
            None => ParsedAnswer::unparseable(qtype),
        },
        QuestionType::FITB => parse_fitb(raw, None),
    }
}

fn parse_fitb(raw: &str, stem: Option<&str>) -> ParsedAnswer {
    let qtype = QuestionType::FITB;
    let Some(line) = raw.lines().map(str::trim).find(|l| !l.is_empty()) else {
        return ParsedAnswer::unparseable(qtype);
    };
    let mut text = line.to_string();
    if let Some(stem) = stem.map(str::trim).filter(|s| !s.is_empty()) {
        if let Some(rest) = text.strip_prefix(stem) {
            text = rest.to_string();
        }
    }
    text = answer_prefix_re().replace(&text, "").into_owned();
    let trimmed = text.trim().trim_end_matches('.').trim().trim_matches(QUOTES).trim();
    if normalize_tokens(trimmed).is_empty() {
        return ParsedAnswer::unparseable(qtype);
    }
    ParsedAnswer {
        qtype,
        value: AnswerValue::Text(trimmed.to_string()),
        status: ParsedAnswer::status(trimmed == raw.trim()),
    }
}

/// Like [`parse_answer`], with question context: strips an echoed question
/// stem from FITB answers and maps MC answers that quote an option's text.
pub fn parse_answer_for(question: &Question, raw: &str) -> ParsedAnswer {
    match question.qtype {
        QuestionType::FITB => {
            let stem = question.prompt.split(BLANK).next();
            parse_fitb(raw, stem)
        }
        QuestionType::MC => {
            let parsed = parse_answer(QuestionType::MC, raw);
            if parsed.status != ParseStatus::Unparseable {
                return parsed;
            }
            let said = normalize_tokens(raw);
            let hit = question.options.iter().flatten().find(|o| {
                let opt = normalize_tokens(&o.text);
                !opt.is_empty() && said == opt
            });
            match hit {
                Some(o) => ParsedAnswer {
                    qtype: QuestionType::MC,
                    value: AnswerValue::Letter(o.letter),
                    status: ParseStatus::Salvaged,
                },
                None => parsed,
            }
        }
        QuestionType::TF => parse_answer(QuestionType::TF, raw),
    }
}

/// Per-question outcome: correctness in {0, 1} and, for FITB, F1 in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuestionScore {
    pub correct: f64,
    pub f1: Option<f64>,
}

pub fn score_question(question: &Question, answer: &ParsedAnswer) -> QuestionScore {
    let f1_default = (question.qtype == QuestionType::FITB).then_some(0.0);
    if answer.status == ParseStatus::Unparseable {
        return QuestionScore {
            correct: 0.0,
            f1: f1_default,
        };
    }
    match (&question.gold, &answer.value, question.qtype) {
        (Gold::Bool(g), AnswerValue::Bool(p), QuestionType::TF) => QuestionScore {
            correct: f64::from(u8::from(g == p)),
            f1: None,
        },
        (Gold::Text(g), AnswerValue::Letter(p), QuestionType::MC) => QuestionScore {
            correct: f64::from(u8::from(g.starts_with(*p))),
            f1: None,
        },
        (Gold::Text(g), AnswerValue::Text(p), QuestionType::FITB) => {
            let (g, p) = (normalize_tokens(g), normalize_tokens(p));
            QuestionScore {
                correct: f64::from(fitb_acc(&g, &p)),
                f1: Some(fitb_f1(&g, &p)),
            }
        }
        _ => QuestionScore {
            correct: 0.0,
            f1: f1_default,
        },
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub tf: usize,
    pub mc: usize,
    pub fitb: usize,
}

/// Percentages for one slice of the data. Cells with no questions are
/// `None`; OA is present only when all three question types are.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cells {
    pub tf_acc: Option<f64>,
    pub mc_acc: Option<f64>,
    pub fitb_acc: Option<f64>,
    pub fitb_f1: Option<f64>,
    pub oa: Option<f64>,
    pub n: CellCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    #[serde(flatten)]
    pub overall: Cells,
    pub breakdown: BTreeMap<KnowledgePoint, Cells>,
    pub seeds: Vec<u64>,
}

#[derive(Default)]
struct Acc {
    tf: (f64, usize),
    mc: (f64, usize),
    fitb: (f64, f64, usize),
}

impl Acc {
    fn add(&mut self, qtype: QuestionType, s: QuestionScore) {
        match qtype {
            QuestionType::TF => {
                self.tf.0 += s.correct;
                self.tf.1 += 1;
            }
            QuestionType::MC => {
                self.mc.0 += s.correct;
                self.mc.1 += 1;
            }
            QuestionType::FITB => {
                self.fitb.0 += s.correct;
                self.fitb.1 += s.f1.unwrap_or(0.0);
                self.fitb.2 += 1;
            }
        }
    }

    fn cells(&self) -> Cells {
        let pct = |sum: f64, n: usize| (n > 0).then(|| 100.0 * sum / n as f64);
        finish(Cells {
            tf_acc: pct(self.tf.0, self.tf.1),
            mc_acc: pct(self.mc.0, self.mc.1),
            fitb_acc: pct(self.fitb.0, self.fitb.2),
            fitb_f1: pct(self.fitb.1, self.fitb.2),
            oa: None,
            n: CellCounts {
                tf: self.tf.1,
                mc: self.mc.1,
                fitb: self.fitb.2,
            },
        })
    }
}

fn finish(mut c: Cells) -> Cells {
    c.oa = match (c.tf_acc, c.mc_acc, c.fitb_acc, c.fitb_f1) {
        (Some(t), Some(m), Some(a), Some(f)) => overall_accuracy(t, m, a, f).ok(),
        _ => None,
    };
    c
}

fn mean_cells(per_seed: &[Cells]) -> Cells {
    let mean = |get: fn(&Cells) -> Option<f64>| {
        let vals: Vec<f64> = per_seed.iter().filter_map(get).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let mut n = CellCounts::default();
    for c in per_seed {
        n.tf += c.n.tf;
        n.mc += c.n.mc;
        n.fitb += c.n.fitb;
    }
    let mut out = Cells {
        tf_acc: mean(|c| c.tf_acc),
        mc_acc: mean(|c| c.mc_acc),
        fitb_acc: mean(|c| c.fitb_acc),
        fitb_f1: mean(|c| c.fitb_f1),
        oa: None,
        n,
    };
    // OA of the seed means equals the mean of per-seed OAs (OA is linear).
    out = finish(out);
    out
}

/// Scores per seed, then averages over seeds. Records are ordered by
/// (seed, question id) first, so input order does not matter.
pub fn aggregate(records: &[(&Question, &ParsedAnswer, u64)]) -> Scoreboard {
    let mut sorted: Vec<&(&Question, &ParsedAnswer, u64)> = records.iter().collect();
    sorted.sort_by(|a, b| (a.2, &a.0.id).cmp(&(b.2, &b.0.id)));
    let mut by_seed: BTreeMap<u64, (Acc, BTreeMap<KnowledgePoint, Acc>)> = BTreeMap::new();
    for (q, a, seed) in sorted {
        let s = score_question(q, a);
        let (all, per_kp) = by_seed.entry(*seed).or_default();
        all.add(q.qtype, s);
        per_kp.entry(q.kp).or_default().add(q.qtype, s);
    }
    let overall: Vec<Cells> = by_seed.values().map(|(a, _)| a.cells()).collect();
    let mut breakdown = BTreeMap::new();
    for kp in KnowledgePoint::ALL {
        let per_seed: Vec<Cells> = by_seed
            .values()
            .filter_map(|(_, m)| m.get(&kp).map(Acc::cells))
            .collect();
        if !per_seed.is_empty() {
            breakdown.insert(kp, mean_cells(&per_seed));
        }
    }
    Scoreboard {
        overall: mean_cells(&overall),
        breakdown,
        seeds: by_seed.keys().copied().collect(),
    }
}

/// Scores persisted run records against the evaluation set. Records with a
/// transport error count as unparseable answers.
pub fn score_runs(eval: &[Question], records: &[RunRecord]) -> Result<Scoreboard, ScoringError> {
    let by_id: HashMap<&str, &Question> = eval.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut seen = HashSet::new();
    let mut parsed = Vec::with_capacity(records.len());
    for r in records {
        let q = *by_id
            .get(r.question_id.as_str())
            .ok_or_else(|| ScoringError::UnknownQuestion(r.question_id.clone()))?;
        if !seen.insert((r.question_id.as_str(), r.seed)) {
            return Err(ScoringError::DuplicateRecord {
                question_id: r.question_id.clone(),
                seed: r.seed,
            });
        }
        let answer = match &r.raw_response {
            Some(text) => parse_answer_for(q, text),
            None => ParsedAnswer::unparseable(q.qtype),
        };
        parsed.push((q, answer, r.seed));
    }
    let view: Vec<(&Question, &ParsedAnswer, u64)> = parsed.iter().map(|(q, a, s)| (*q, a, *s)).collect();
    Ok(aggregate(&view))
}

/// Display rounding used in tables.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

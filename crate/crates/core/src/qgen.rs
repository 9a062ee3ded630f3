//! Question generation: TF pairs, four-option MC and FITB items rendered
//! from [`SyntacticFact`]s through a [`TemplateSet`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{answer_category, KnowledgePoint, SyntacticFact};
use crate::rng::derived_rng;
use crate::treebank::{Sentence, Span, TreeNode};

pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.toml");
pub const BLANK: &str = "____________";
pub const OPTION_LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];
const PLACEHOLDERS: [&str; 4] = ["{SENTENCE}", "{ANCHOR}", "{ANSWER}", "{ROLE}"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionType {
    TF,
    MC,
    FITB,
}

impl QuestionType {
    pub const ALL: [QuestionType; 3] = [QuestionType::TF, QuestionType::MC, QuestionType::FITB];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::TF => "TF",
            QuestionType::MC => "MC",
            QuestionType::FITB => "FITB",
        }
    }

    fn key(self) -> &'static str {
        match self {
            QuestionType::TF => "tf",
            QuestionType::MC => "mc",
            QuestionType::FITB => "fitb",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QuestionType::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown question type {s:?}"))
    }
}

#[derive(Debug, Error)]
pub enum QgenError {
    #[error("template file: {0}")]
    Template(String),
    #[error("no template for {kp} {qtype}")]
    MissingTemplate { kp: KnowledgePoint, qtype: QuestionType },
    #[error("distractor count must be at least 1")]
    ZeroDistractors,
    #[error("only {available} of {requested} distractors available")]
    Shortfall { available: usize, requested: usize },
    #[error("fact {0} refers to an unknown sentence")]
    UnknownSentence(String),
}

/// Gold answer: a truth value for TF, a letter for MC, a phrase for FITB.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Bool(bool),
    Text(String),
}

impl Gold {
    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Gold::Bool(b) => Some(*b),
            Gold::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Gold::Text(t) => Some(t),
            Gold::Bool(_) => None,
        }
    }

    pub fn as_letter(&self) -> Option<char> {
        self.as_text().and_then(|t| {
            let mut chars = t.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if OPTION_LETTERS.contains(&c) => Some(c),
                _ => None,
            }
        })
    }
}

impl fmt::Display for Gold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gold::Bool(true) => f.write_str("True"),
            Gold::Bool(false) => f.write_str("False"),
            Gold::Text(t) => f.write_str(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McOption {
    pub letter: char,
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionMeta {
    pub answer_category: String,
    pub fact_id: String,
    pub sentence_id: String,
    pub template_id: String,
    pub answer_span: Span,
    /// Span asserted by a TF statement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asserted_span: Option<Span>,
    /// Id of the other half of a TF pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    /// Distractor spans in selection order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub distractors: Vec<Span>,
    /// Source item of an MVP true/false question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reused_from: Option<String>,
    /// Canonical bracketed parse of the sentence.
    pub parse: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub kp: KnowledgePoint,
    pub qtype: QuestionType,
    #[serde(rename = "sentence")]
    pub sentence_text: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<McOption>>,
    pub gold: Gold,
    pub meta: QuestionMeta,
}

impl Question {
    /// Text of the gold answer as a phrase (MC resolves the letter).
    pub fn gold_text(&self) -> String {
        match (&self.gold, &self.options) {
            (Gold::Text(letter), Some(options)) => options
                .iter()
                .find(|o| o.letter.to_string() == *letter)
                .map(|o| o.text.clone())
                .unwrap_or_default(),
            (gold, _) => gold.to_string(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct TemplateEntry {
    role: String,
    tf: Option<String>,
    mc: Option<String>,
    fitb: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    entries: BTreeMap<KnowledgePoint, TemplateEntry>,
}

impl TemplateSet {
    pub fn parse(text: &str) -> Result<Self, QgenError> {
        let raw: BTreeMap<String, TemplateEntry> =
            toml::from_str(text).map_err(|e| QgenError::Template(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (name, entry) in raw {
            let kp = KnowledgePoint::from_str(&name).map_err(QgenError::Template)?;
            for t in [&entry.tf, &entry.mc, &entry.fitb].into_iter().flatten() {
                check_placeholders(t)?;
            }
            entries.insert(kp, entry);
        }
        let set = TemplateSet { entries };
        set.check_coverage()?;
        Ok(set)
    }

    pub fn default_templates() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }

    /// Every (point, type) pair must be covered; MVP true/false items are
    /// reused from other points and need no template.
    pub fn check_coverage(&self) -> Result<(), QgenError> {
        for kp in KnowledgePoint::ALL {
            for qtype in QuestionType::ALL {
                if kp == KnowledgePoint::MVP && qtype == QuestionType::TF {
                    continue;
                }
                self.template(kp, qtype)?;
            }
        }
        Ok(())
    }

    pub fn role(&self, kp: KnowledgePoint) -> &str {
        self.entries.get(&kp).map(|e| e.role.as_str()).unwrap_or("")
    }

    pub fn template(&self, kp: KnowledgePoint, qtype: QuestionType) -> Result<&str, QgenError> {
        let entry = self.entries.get(&kp);
        let t = entry.and_then(|e| match qtype {
            QuestionType::TF => e.tf.as_deref(),
            QuestionType::MC => e.mc.as_deref(),
            QuestionType::FITB => e.fitb.as_deref(),
        });
        t.ok_or(QgenError::MissingTemplate { kp, qtype })
    }

    pub fn template_id(kp: KnowledgePoint, qtype: QuestionType) -> String {
        format!("{kp}-{}-v1", qtype.key())
    }

    pub fn render(
        &self,
        kp: KnowledgePoint,
        qtype: QuestionType,
        sentence: &str,
        anchor: &str,
        answer: &str,
    ) -> Result<String, QgenError> {
        let t = self.template(kp, qtype)?;
        Ok(t.replace("{SENTENCE}", sentence)
            .replace("{ANCHOR}", anchor)
            .replace("{ANSWER}", answer)
            .replace("{ROLE}", self.role(kp)))
    }
}

fn check_placeholders(template: &str) -> Result<(), QgenError> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| QgenError::Template(format!("unclosed placeholder in {template:?}")))?;
        let ph = &rest[open..open + close + 1];
        if !PLACEHOLDERS.contains(&ph) {
            return Err(QgenError::Template(format!("unknown placeholder {ph} in {template:?}")));
        }
        rest = &rest[open + close + 1..];
    }
    Ok(())
}

/// Joins tokens into display text, attaching punctuation and clitics.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let t = match tok.as_str() {
            "-LRB-" | "-LCB-" | "-LSB-" => "(",
            "-RRB-" | "-RCB-" | "-RSB-" => ")",
            "``" | "''" => "\"",
            other => other,
        };
        let attach = matches!(t, "." | "," | ";" | ":" | "?" | "!" | ")" | "%" | "n't")
            || (t.starts_with('\'') && t.len() > 1)
            || out.ends_with('(')
            || out.ends_with('$');
        if !out.is_empty() && !attach {
            out.push(' ');
        }
        out.push_str(t);
    }
    out
}

fn capitalize(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

const NON_CONTENT_POS: [&str; 12] = ["DT", "IN", "CC", "TO", "POS", "EX", "PDT", "RP", "UH", "SYM", "LS", "WDT"];

fn is_punctuation(text: &str) -> bool {
    text.chars().all(|c| !c.is_alphanumeric())
}

fn candidate_node(node: &TreeNode) -> bool {
    if node.is_leaf() {
        !NON_CONTENT_POS.contains(&node.category())
            && !node.token.as_deref().is_some_and(is_punctuation)
            && !node.category().starts_with('-')
    } else {
        true
    }
}

fn lower_text(sentence: &Sentence, span: Span) -> String {
    sentence.tokens[span.start..span.end].join(" ").to_lowercase()
}

/// Candidate distractor spans for `fact`: constituents of the sentence that
/// are neither the gold, nested in it, nor containing it, and that avoid the
/// anchor. Same-category spans come first, each group shuffled under `seed`.
pub fn select_distractors(
    fact: &SyntacticFact,
    sentence: &Sentence,
    n: usize,
    seed: u64,
) -> Result<Vec<Span>, QgenError> {
    if n == 0 {
        return Err(QgenError::ZeroDistractors);
    }
    let gold = fact.answer_span;
    let gold_text = lower_text(sentence, gold);
    let mut seen_text = HashSet::from([gold_text]);
    let mut same = Vec::new();
    let mut other = Vec::new();
    for (node, _) in sentence.root.preorder() {
        let span = node.span;
        if span.is_empty()
            || !candidate_node(node)
            || gold.contains(&span)
            || span.contains(&gold)
            || span.overlaps(&fact.anchor_span)
            || is_punctuation(&lower_text(sentence, span))
        {
            continue;
        }
        if !seen_text.insert(lower_text(sentence, span)) {
            continue;
        }
        if answer_category(node) == fact.answer_category {
            same.push(span);
        } else {
            other.push(span);
        }
    }
    let mut rng = derived_rng(seed, &format!("distractors/{}", fact.id()));
    same.shuffle(&mut rng);
    other.shuffle(&mut rng);
    let available = same.len() + other.len();
    if available < n {
        return Err(QgenError::Shortfall {
            available,
            requested: n,
        });
    }
    same.extend(other);
    same.truncate(n);
    Ok(same)
}

/// Per-point counters for generation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub facts: usize,
    pub mc_skipped: BTreeMap<KnowledgePoint, usize>,
    pub tf_skipped: BTreeMap<KnowledgePoint, usize>,
}

struct Generator<'a> {
    templates: &'a TemplateSet,
    seed: u64,
}

struct Context<'s> {
    fact: &'s SyntacticFact,
    sentence: &'s Sentence,
    display: String,
    parse: String,
}

impl Context<'_> {
    fn text(&self, span: Span) -> String {
        self.sentence.tokens[span.start..span.end].join(" ")
    }

    fn meta(&self, qtype: QuestionType) -> QuestionMeta {
        QuestionMeta {
            answer_category: self.fact.answer_category.clone(),
            fact_id: self.fact.id(),
            sentence_id: self.fact.sentence_id.clone(),
            template_id: TemplateSet::template_id(self.fact.kp, qtype),
            answer_span: self.fact.answer_span,
            asserted_span: None,
            pair_id: None,
            distractors: Vec::new(),
            reused_from: None,
            parse: self.parse.clone(),
        }
    }
}

impl Generator<'_> {
    fn fitb(&self, cx: &Context) -> Result<Question, QgenError> {
        let f = cx.fact;
        let prompt = self
            .templates
            .render(f.kp, QuestionType::FITB, &cx.display, &f.anchor_text, BLANK)?;
        Ok(Question {
            id: format!("{}/FITB", f.id()),
            kp: f.kp,
            qtype: QuestionType::FITB,
            sentence_text: cx.display.clone(),
            prompt,
            options: None,
            gold: Gold::Text(f.answer_text.clone()),
            meta: cx.meta(QuestionType::FITB),
        })
    }

    fn mc(&self, cx: &Context, distractors: &[Span]) -> Result<Question, QgenError> {
        let f = cx.fact;
        let id = format!("{}/MC", f.id());
        let prompt = self
            .templates
            .render(f.kp, QuestionType::MC, &cx.display, &f.anchor_text, BLANK)?;
        let mut spans: Vec<Span> = std::iter::once(f.answer_span).chain(distractors.iter().copied()).collect();
        spans.shuffle(&mut derived_rng(self.seed, &format!("options/{id}")));
        let options: Vec<McOption> = OPTION_LETTERS
            .iter()
            .zip(&spans)
            .map(|(&letter, &span)| McOption {
                letter,
                text: capitalize(&cx.text(span)),
                span,
            })
            .collect();
        let gold = options
            .iter()
            .find(|o| o.span == f.answer_span)
            .map(|o| o.letter)
            .expect("gold is among the options");
        let mut meta = cx.meta(QuestionType::MC);
        meta.distractors = distractors.to_vec();
        Ok(Question {
            id,
            kp: f.kp,
            qtype: QuestionType::MC,
            sentence_text: cx.display.clone(),
            prompt,
            options: Some(options),
            gold: Gold::Text(gold.to_string()),
            meta,
        })
    }

    fn tf_pair(&self, cx: &Context, distractor: Span) -> Result<[Question; 2], QgenError> {
        let f = cx.fact;
        let base = format!("{}/TF", f.id());
        let (true_id, false_id) = (format!("{base}/true"), format!("{base}/false"));
        let mut items = Vec::with_capacity(2);
        for (id, pair, span, truth) in [
            (&true_id, &false_id, f.answer_span, true),
            (&false_id, &true_id, distractor, false),
        ] {
            let prompt =
                self.templates
                    .render(f.kp, QuestionType::TF, &cx.display, &f.anchor_text, &cx.text(span))?;
            let mut meta = cx.meta(QuestionType::TF);
            meta.asserted_span = Some(span);
            meta.pair_id = Some(pair.clone());
            if !truth {
                meta.distractors = vec![span];
            }
            items.push(Question {
                id: id.clone(),
                kp: f.kp,
                qtype: QuestionType::TF,
                sentence_text: cx.display.clone(),
                prompt,
                options: None,
                gold: Gold::Bool(truth),
                meta,
            });
        }
        let [a, b]: [Question; 2] = items.try_into().expect("two items");
        Ok([a, b])
    }

    /// MVP pair reusing a GS/SC/DO/IO statement: the true item is the
    /// source statement; the false item swaps the verb chain for another
    /// verb span of the sentence.
    fn mvp_pair(&self, cx: &Context, source: &Question) -> Result<Option<[Question; 2]>, QgenError> {
        let f = cx.fact;
        let Some(wrong) = wrong_chain(cx.sentence, f, self.seed) else {
            return Ok(None);
        };
        let base = format!("{}/TF-MVP", f.id());
        let (true_id, false_id) = (format!("{base}/true"), format!("{base}/false"));
        let anchor_text = cx.text(wrong);
        let prompt = self
            .templates
            .render(f.kp, QuestionType::TF, &cx.display, &anchor_text, &f.answer_text)?;
        let meta = |id: &str, pair: &str, asserted: Span| QuestionMeta {
            answer_category: f.answer_category.clone(),
            fact_id: f.id(),
            sentence_id: f.sentence_id.clone(),
            template_id: TemplateSet::template_id(f.kp, QuestionType::TF),
            answer_span: f.anchor_span,
            asserted_span: Some(asserted),
            pair_id: Some(pair.to_string()),
            distractors: if id.ends_with("false") { vec![asserted] } else { Vec::new() },
            reused_from: Some(source.id.clone()),
            parse: cx.parse.clone(),
        };
        let truthy = Question {
            id: true_id.clone(),
            kp: KnowledgePoint::MVP,
            qtype: QuestionType::TF,
            sentence_text: cx.display.clone(),
            prompt: source.prompt.clone(),
            options: None,
            gold: Gold::Bool(true),
            meta: meta(&true_id, &false_id, f.anchor_span),
        };
        let falsy = Question {
            id: false_id.clone(),
            kp: KnowledgePoint::MVP,
            qtype: QuestionType::TF,
            sentence_text: cx.display.clone(),
            prompt,
            options: None,
            gold: Gold::Bool(false),
            meta: meta(&false_id, &true_id, wrong),
        };
        Ok(Some([truthy, falsy]))
    }
}

/// A verb span that is not the fact's chain: another verb of the sentence,
/// or else the chain widened by one word.
fn wrong_chain(sentence: &Sentence, fact: &SyntacticFact, seed: u64) -> Option<Span> {
    let chain = fact.anchor_span;
    let mut verbs: Vec<Span> = sentence
        .root
        .leaves()
        .into_iter()
        .filter(|l| {
            (crate::pattern::VERB_FAMILY.contains(&l.category()) || l.category() == "MD")
                && !l.span.overlaps(&chain)
                && !l.span.overlaps(&fact.answer_span)
        })
        .map(|l| l.span)
        .collect();
    if !verbs.is_empty() {
        let mut rng = derived_rng(seed, &format!("mvp/{}", fact.id()));
        verbs.shuffle(&mut rng);
        return verbs.first().copied();
    }
    let n = sentence.tokens.len();
    let word = |i: usize| !is_punctuation(&sentence.tokens[i]);
    if chain.end < n && word(chain.end) {
        Some(Span::new(chain.start, chain.end + 1))
    } else if chain.start > 0 && word(chain.start - 1) {
        Some(Span::new(chain.start - 1, chain.end))
    } else {
        None
    }
}

/// Questions for every fact, in fact order. Deterministic under `seed`.
pub fn generate_questions(
    facts: &[SyntacticFact],
    sentences: &[Sentence],
    templates: &TemplateSet,
    seed: u64,
) -> Result<(Vec<Question>, GenerationStats), QgenError> {
    templates.check_coverage()?;
    let by_id: HashMap<&str, &Sentence> = sentences.iter().map(|s| (s.id.as_str(), s)).collect();
    let gen = Generator { templates, seed };
    let mut out = Vec::new();
    let mut stats = GenerationStats::default();
    let mut parses: HashMap<&str, (String, String)> = HashMap::new();
    for fact in facts {
        let sentence = *by_id
            .get(fact.sentence_id.as_str())
            .ok_or_else(|| QgenError::UnknownSentence(fact.id()))?;
        let (display, parse) = parses
            .entry(sentence.id.as_str())
            .or_insert_with(|| (detokenize(&sentence.tokens), sentence.root.to_bracketed()))
            .clone();
        let cx = Context {
            fact,
            sentence,
            display,
            parse,
        };
        stats.facts += 1;

        out.push(gen.fitb(&cx)?);
        match select_distractors(fact, sentence, 3, seed) {
            Ok(d) => out.push(gen.mc(&cx, &d)?),
            Err(QgenError::Shortfall { .. }) => *stats.mc_skipped.entry(fact.kp).or_default() += 1,
            Err(e) => return Err(e),
        }
        if fact.kp == KnowledgePoint::MVP {
            continue;
        }
        match select_distractors(fact, sentence, 1, seed) {
            Ok(d) => {
                let pair = gen.tf_pair(&cx, d[0])?;
                if fact.kp.anchored_on_verb_chain() {
                    match gen.mvp_pair(&cx, &pair[0])? {
                        Some(mvp) => {
                            out.extend(pair);
                            out.extend(mvp);
                        }
                        None => {
                            out.extend(pair);
                            *stats.tf_skipped.entry(KnowledgePoint::MVP).or_default() += 1;
                        }
                    }
                } else {
                    out.extend(pair);
                }
            }
            Err(QgenError::Shortfall { .. }) => *stats.tf_skipped.entry(fact.kp).or_default() += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, stats))
}

/// A standalone false TF item asserting `distractor` for the fact's role.
pub fn make_false_statement(
    fact: &SyntacticFact,
    sentence: &Sentence,
    distractor: Span,
    templates: &TemplateSet,
) -> Result<Question, QgenError> {
    let display = detokenize(&sentence.tokens);
    let parse = sentence.root.to_bracketed();
    let cx = Context {
        fact,
        sentence,
        display,
        parse,
    };
    let gen = Generator { templates, seed: 0 };
    let [_, falsy] = gen.tf_pair(&cx, distractor)?;
    Ok(falsy)
}

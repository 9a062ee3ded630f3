//! Knowledge-point extraction: runs the pattern rules over sentences and
//! turns bindings into [`SyntacticFact`]s.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pattern::{ChainLink, MatchBinding, PatternRuleSet};
use crate::treebank::{Sentence, Span, TreeNode};

pub const FACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KnowledgePoint {
    GS,
    SC,
    DO,
    IO,
    MVP,
    ADJ,
    ADV,
    CO,
    PPA,
}

impl KnowledgePoint {
    pub const ALL: [KnowledgePoint; 9] = [
        KnowledgePoint::GS,
        KnowledgePoint::SC,
        KnowledgePoint::DO,
        KnowledgePoint::IO,
        KnowledgePoint::MVP,
        KnowledgePoint::ADJ,
        KnowledgePoint::ADV,
        KnowledgePoint::CO,
        KnowledgePoint::PPA,
    ];

    pub fn abbr(self) -> &'static str {
        match self {
            KnowledgePoint::GS => "GS",
            KnowledgePoint::SC => "SC",
            KnowledgePoint::DO => "DO",
            KnowledgePoint::IO => "IO",
            KnowledgePoint::MVP => "MVP",
            KnowledgePoint::ADJ => "ADJ",
            KnowledgePoint::ADV => "ADV",
            KnowledgePoint::CO => "CO",
            KnowledgePoint::PPA => "PPA",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            KnowledgePoint::GS => "Grammatical Subject",
            KnowledgePoint::SC => "Subject Complement",
            KnowledgePoint::DO => "Direct Object",
            KnowledgePoint::IO => "Indirect Object",
            KnowledgePoint::MVP => "Main Verb Phrase",
            KnowledgePoint::ADJ => "Adjectival modifier",
            KnowledgePoint::ADV => "Adverbial modifier (Adjunct)",
            KnowledgePoint::CO => "Coordination",
            KnowledgePoint::PPA => "Prepositional Phrase Attachment",
        }
    }

    /// Points whose true/false statements are reused for MVP.
    pub fn anchored_on_verb_chain(self) -> bool {
        matches!(
            self,
            KnowledgePoint::GS | KnowledgePoint::SC | KnowledgePoint::DO | KnowledgePoint::IO
        )
    }
}

impl fmt::Display for KnowledgePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbr())
    }
}

impl FromStr for KnowledgePoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KnowledgePoint::ALL
            .into_iter()
            .find(|kp| kp.abbr().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown knowledge point {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    Noun,
    Verb,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactExtras {
    /// Head spans v0..vn of the verb chain the fact hangs off.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chain: Vec<Span>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conjuncts: Vec<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjunction: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attachment: Option<Attachment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntacticFact {
    pub v: u32,
    pub sentence_id: String,
    pub kp: KnowledgePoint,
    pub anchor_span: Span,
    /// Text used for the anchor in questions; for verb chains this is the
    /// chain words only ("will join"), which may skip material inside the span.
    pub anchor_text: String,
    pub answer_span: Span,
    pub answer_text: String,
    pub answer_category: String,
    pub rule: String,
    #[serde(default)]
    pub extras: FactExtras,
}

impl SyntacticFact {
    pub fn id(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.sentence_id, self.kp, self.anchor_span, self.answer_span
        )
    }

    fn key(&self) -> (String, KnowledgePoint, Span, Span) {
        (self.sentence_id.clone(), self.kp, self.anchor_span, self.answer_span)
    }
}

/// Per-point counters. `matched` counts emitted facts, `skipped` counts
/// bindings dropped as outliers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub sentences: usize,
    pub sentences_without_facts: usize,
    pub matched: BTreeMap<KnowledgePoint, usize>,
    pub skipped: BTreeMap<KnowledgePoint, usize>,
}

impl ExtractionStats {
    fn skip(&mut self, kp: KnowledgePoint) {
        *self.skipped.entry(kp).or_default() += 1;
    }

    pub fn merge(&mut self, other: &ExtractionStats) {
        self.sentences += other.sentences;
        self.sentences_without_facts += other.sentences_without_facts;
        for (kp, n) in &other.matched {
            *self.matched.entry(*kp).or_default() += n;
        }
        for (kp, n) in &other.skipped {
            *self.skipped.entry(*kp).or_default() += n;
        }
    }
}

fn first_token(node: &TreeNode) -> Option<String> {
    node.leaves()
        .first()
        .and_then(|l| l.token.as_ref())
        .map(|t| t.to_lowercase())
}

fn is_verb_tag(cat: &str) -> bool {
    crate::pattern::VERB_FAMILY.contains(&cat)
}

/// Human-readable syntactic category of a constituent.
pub fn answer_category(node: &TreeNode) -> String {
    let cat = node.category();
    let name = match cat {
        "NP" | "NX" | "NML" => "noun phrase",
        "WHNP" => "wh-noun phrase",
        "SBAR" => {
            let first_child = node.children.first().map(|c| c.category()).unwrap_or("");
            match first_token(node).as_deref() {
                Some("that") => "that-clause",
                Some("whether") | Some("if") => "whether-clause",
                _ if first_child.starts_with("WH") => "wh-clause",
                _ => "subordinate clause",
            }
        }
        "S" => {
            let infinitival = node
                .children
                .iter()
                .find(|c| c.category() == "VP")
                .and_then(|vp| vp.children.first())
                .is_some_and(|h| h.category() == "TO");
            if infinitival {
                "to-infinitive clause"
            } else {
                "clause"
            }
        }
        "SQ" => "question clause",
        "SINV" => "inverted clause",
        "VP" => match node.children.first().map(|c| c.category()) {
            Some("VBG") => "-ing participle phrase",
            Some("VBN") => "-ed participle phrase",
            _ => "verb phrase",
        },
        "PP" => "prepositional phrase",
        "ADJP" => "adjective phrase",
        "ADVP" => "adverb phrase",
        "RRC" => "reduced relative clause",
        "QP" => "quantifier phrase",
        "PRT" => "particle",
        "NN" | "NNS" => "noun",
        "NNP" | "NNPS" => "proper noun",
        "PRP" => "pronoun",
        "RB" | "RBR" | "RBS" => "adverb",
        "JJ" | "JJR" | "JJS" => "adjective",
        "CD" => "number",
        "MD" => "modal verb",
        c if is_verb_tag(c) => "verb",
        other => other,
    };
    name.to_string()
}

/// Category of a verb chain answer.
pub fn chain_category(heads: &[&TreeNode]) -> String {
    match heads {
        [] => "verb phrase".to_string(),
        [only] => answer_category(only),
        [first, ..] => match first.category() {
            "MD" => "modal verb phrase".to_string(),
            "TO" => "infinitival verb phrase".to_string(),
            _ => "auxiliary verb phrase".to_string(),
        },
    }
}

/// Rule names the extractor looks up in the rule set.
pub mod rules {
    pub const GS: &str = "GS";
    pub const MVP: &str = "MVP";
    pub const SC: &str = "SC";
    pub const DO: &str = "DO";
    pub const IO: &str = "IO";
    pub const ADJ: &str = "ADJ";
    pub const ADV: &str = "ADV";
    pub const ADV_CLAUSE: &str = "ADV_CLAUSE";
    pub const CO: &str = "CO";
    pub const PPA_NOUN: &str = "PPA_NOUN";
    pub const PPA_VERB: &str = "PPA_VERB";
}

struct Chain<'t> {
    vp: &'t TreeNode,
    links: Vec<ChainLink<'t>>,
}

impl Chain<'_> {
    fn heads(&self) -> Vec<&TreeNode> {
        self.links.iter().map(|l| l.head).collect()
    }

    fn head_spans(&self) -> Vec<Span> {
        self.links.iter().map(|l| l.head.span).collect()
    }

    fn cover(&self) -> Span {
        let first = self.links.first().expect("chains are nonempty").head.span;
        let last = self.links.last().expect("chains are nonempty").head.span;
        first.cover(&last)
    }

    fn words(&self, sentence: &Sentence) -> String {
        self.links
            .iter()
            .map(|l| sentence.tokens[l.head.span.start].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

struct SentenceExtractor<'a, 't> {
    sentence: &'t Sentence,
    rules: &'a PatternRuleSet,
    chains: Vec<Chain<'t>>,
    facts: Vec<SyntacticFact>,
    stats: ExtractionStats,
}

impl<'a, 't> SentenceExtractor<'a, 't> {
    fn bindings(&self, rule: &str) -> Vec<MatchBinding<'t>> {
        match self.rules.match_rule(rule, &self.sentence.root) {
            Ok(b) => b,
            Err(_) => {
                log::debug!("rule {rule} missing from rule set");
                Vec::new()
            }
        }
    }

    fn text(&self, span: Span) -> String {
        self.sentence.phrase_text(span).expect("spans come from the tree")
    }

    fn chain_for(&self, vp: &TreeNode) -> Option<&Chain<'t>> {
        self.chains.iter().find(|c| std::ptr::eq(c.vp, vp))
    }

    /// The binding's chain must be the deepest chain of its VP, so every
    /// fact agrees with the standalone MVP fact.
    fn consistent_chain(&self, b: &MatchBinding<'t>) -> Option<&Chain<'t>> {
        let chain = self.chain_for(b.node)?;
        (chain.links == b.chain).then_some(chain)
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kp: KnowledgePoint,
        rule: &str,
        anchor_span: Span,
        anchor_text: String,
        answer_span: Span,
        answer_category: String,
        extras: FactExtras,
    ) {
        let answer_text = self.text(answer_span);
        self.facts.push(SyntacticFact {
            v: FACT_SCHEMA_VERSION,
            sentence_id: self.sentence.id.clone(),
            kp,
            anchor_span,
            anchor_text,
            answer_span,
            answer_text,
            answer_category,
            rule: rule.to_string(),
            extras,
        });
    }

    fn collect_chains(&mut self) {
        let mut chains: Vec<Chain<'t>> = Vec::new();
        for b in self.bindings(rules::MVP) {
            if b.chain.is_empty() {
                continue;
            }
            match chains.iter_mut().find(|c| std::ptr::eq(c.vp, b.node)) {
                Some(existing) if existing.links.len() >= b.chain.len() => {}
                Some(existing) => existing.links = b.chain,
                None => chains.push(Chain {
                    vp: b.node,
                    links: b.chain,
                }),
            }
        }
        self.chains = chains;
    }

    fn chain_fact(&mut self, kp: KnowledgePoint, rule: &str, capture: &str) {
        for b in self.bindings(rule) {
            let (Some(answer), Some(chain)) = (b.capture(capture), self.consistent_chain(&b)) else {
                self.stats.skip(kp);
                continue;
            };
            let extras = FactExtras {
                chain: chain.head_spans(),
                ..Default::default()
            };
            let (anchor, anchor_text) = (chain.cover(), chain.words(self.sentence));
            self.push(kp, rule, anchor, anchor_text, answer.span, answer_category(answer), extras);
        }
    }

    fn subjects(&mut self) -> Vec<(&'t TreeNode, &'t TreeNode)> {
        let mut out = Vec::new();
        for b in self.bindings(rules::GS) {
            let (Some(subj), Some(vp)) = (b.captures.get("GS").copied(), b.captures.get("VP").copied()) else {
                self.stats.skip(KnowledgePoint::GS);
                continue;
            };
            out.push((subj, vp));
        }
        out
    }

    fn run(mut self) -> (Vec<SyntacticFact>, ExtractionStats) {
        use KnowledgePoint::*;
        self.collect_chains();

        let subjects = self.subjects();
        for &(subj, vp) in &subjects {
            let Some(chain) = self.chain_for(vp) else {
                self.stats.skip(GS);
                continue;
            };
            let extras = FactExtras {
                chain: chain.head_spans(),
                ..Default::default()
            };
            let (anchor, words) = (chain.cover(), chain.words(self.sentence));
            self.push(GS, rules::GS, anchor, words, subj.span, answer_category(subj), extras);
        }

        let chains = std::mem::take(&mut self.chains);
        for chain in &chains {
            let Some(&(subj, _)) = subjects.iter().find(|(_, vp)| std::ptr::eq(*vp, chain.vp)) else {
                self.stats.skip(MVP);
                continue;
            };
            let extras = FactExtras {
                chain: chain.head_spans(),
                ..Default::default()
            };
            let subject_text = self.text(subj.span);
            self.push(
                MVP,
                rules::MVP,
                subj.span,
                subject_text,
                chain.cover(),
                chain_category(&chain.heads()),
                extras,
            );
        }
        self.chains = chains;

        self.chain_fact(SC, rules::SC, "SC");
        self.chain_fact(DO, rules::DO, "DO");
        self.chain_fact(IO, rules::IO, "IO");
        self.chain_fact(ADV, rules::ADV, "ADV");

        for b in self.bindings(rules::ADV_CLAUSE) {
            let adv = b.capture("ADV");
            let chain = b.capture("VP").and_then(|vp| self.chain_for(vp));
            let (Some(adv), Some(chain)) = (adv, chain) else {
                self.stats.skip(ADV);
                continue;
            };
            let extras = FactExtras {
                chain: chain.head_spans(),
                ..Default::default()
            };
            let (anchor, words) = (chain.cover(), chain.words(self.sentence));
            self.push(ADV, rules::ADV_CLAUSE, anchor, words, adv.span, answer_category(adv), extras);
        }

        for b in self.bindings(rules::ADJ) {
            let Some(adj) = b.capture("ADJ") else {
                self.stats.skip(ADJ);
                continue;
            };
            let anchor = match b.capture("HEAD") {
                Some(head) => head.span,
                None => Span::new(b.node.span.start, adj.span.start),
            };
            let text = self.text(anchor);
            self.push(ADJ, rules::ADJ, anchor, text, adj.span, answer_category(adj), FactExtras::default());
        }

        self.coordination();
        self.attachment();

        // Deduplicate and order within the sentence.
        let mut seen = HashSet::new();
        let mut facts: Vec<SyntacticFact> = std::mem::take(&mut self.facts)
            .into_iter()
            .filter(|f| seen.insert(f.key()))
            .collect();
        facts.sort_by(|a, b| {
            (a.kp, a.anchor_span, a.answer_span).cmp(&(b.kp, b.anchor_span, b.answer_span))
        });
        for f in &facts {
            *self.stats.matched.entry(f.kp).or_default() += 1;
        }
        self.stats.sentences = 1;
        self.stats.sentences_without_facts = facts.is_empty() as usize;
        (facts, self.stats)
    }

    fn coordination(&mut self) {
        let kp = KnowledgePoint::CO;
        for b in self.bindings(rules::CO) {
            let (Some(left), Some(cc), Some(right)) = (b.capture("LEFT"), b.capture("CC"), b.capture("RIGHT"))
            else {
                self.stats.skip(kp);
                continue;
            };
            if left.category() != right.category() {
                self.stats.skip(kp);
                continue;
            }
            let conjuncts: Vec<Span> = b
                .node
                .children
                .iter()
                .filter(|c| c.category() == right.category())
                .map(|c| c.span)
                .collect();
            if conjuncts.len() < 2 {
                self.stats.skip(kp);
                continue;
            }
            let extras = FactExtras {
                conjuncts,
                conjunction: Some(cc.span),
                ..Default::default()
            };
            let text = self.text(right.span);
            self.push(kp, rules::CO, right.span, text, left.span, answer_category(left), extras);
        }
    }

    fn attachment(&mut self) {
        let kp = KnowledgePoint::PPA;
        for b in self.bindings(rules::PPA_NOUN) {
            let Some(pp) = b.capture("PP") else {
                self.stats.skip(kp);
                continue;
            };
            let site = Span::new(b.node.span.start, pp.span.start);
            let category = match b.node.children.as_slice() {
                [only, _] => answer_category(only),
                _ => "noun phrase".to_string(),
            };
            let extras = FactExtras {
                attachment: Some(Attachment::Noun),
                ..Default::default()
            };
            let text = self.text(pp.span);
            self.push(kp, rules::PPA_NOUN, pp.span, text, site, category, extras);
        }
        for b in self.bindings(rules::PPA_VERB) {
            let pp = b.capture("PP");
            let chain = self.consistent_chain(&b);
            let (Some(pp), Some(chain)) = (pp, chain) else {
                self.stats.skip(kp);
                continue;
            };
            let extras = FactExtras {
                chain: chain.head_spans(),
                attachment: Some(Attachment::Verb),
                ..Default::default()
            };
            let (site, category) = (chain.cover(), chain_category(&chain.heads()));
            let text = self.text(pp.span);
            self.push(kp, rules::PPA_VERB, pp.span, text, site, category, extras);
        }
    }
}

/// Facts for one sentence (already stripped of null elements).
pub fn extract_facts_with_stats(
    sentence: &Sentence,
    rules: &PatternRuleSet,
) -> (Vec<SyntacticFact>, ExtractionStats) {
    SentenceExtractor {
        sentence,
        rules,
        chains: Vec::new(),
        facts: Vec::new(),
        stats: ExtractionStats::default(),
    }
    .run()
}

pub fn extract_facts(sentence: &Sentence, rules: &PatternRuleSet) -> Vec<SyntacticFact> {
    extract_facts_with_stats(sentence, rules).0
}

/// Extraction over a corpus, in input order.
pub fn extract_corpus(
    sentences: &[Sentence],
    rules: &PatternRuleSet,
) -> (Vec<SyntacticFact>, ExtractionStats) {
    let mut facts = Vec::new();
    let mut stats = ExtractionStats::default();
    for s in sentences {
        let (f, st) = extract_facts_with_stats(s, rules);
        facts.extend(f);
        stats.merge(&st);
    }
    (facts, stats)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub kp: Option<KnowledgePoint>,
    pub tf: usize,
    pub mc: usize,
    pub fitb: usize,
    /// Facts, when the report was built from facts rather than questions.
    pub facts: usize,
    pub total: usize,
    pub ratio: f64,
}

/// Per-point counts and shares of the total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub rows: Vec<DistributionRow>,
    pub total: usize,
}

impl DistributionReport {
    fn finish(mut rows: Vec<DistributionRow>) -> Self {
        let total: usize = rows.iter().map(|r| r.total).sum();
        for r in &mut rows {
            r.ratio = if total == 0 {
                0.0
            } else {
                100.0 * r.total as f64 / total as f64
            };
        }
        DistributionReport { rows, total }
    }

    fn empty_rows() -> Vec<DistributionRow> {
        KnowledgePoint::ALL
            .iter()
            .map(|&kp| DistributionRow {
                kp: Some(kp),
                ..Default::default()
            })
            .collect()
    }

    pub fn from_facts(facts: &[SyntacticFact]) -> Self {
        let mut rows = Self::empty_rows();
        for f in facts {
            let row = &mut rows[f.kp as usize];
            row.facts += 1;
            row.total += 1;
        }
        Self::finish(rows)
    }

    pub fn from_questions(questions: &[crate::qgen::Question]) -> Self {
        use crate::qgen::QuestionType;
        let mut rows = Self::empty_rows();
        for q in questions {
            let row = &mut rows[q.kp as usize];
            match q.qtype {
                QuestionType::TF => row.tf += 1,
                QuestionType::MC => row.mc += 1,
                QuestionType::FITB => row.fitb += 1,
            }
            row.total += 1;
        }
        Self::finish(rows)
    }

    pub fn row(&self, kp: KnowledgePoint) -> &DistributionRow {
        &self.rows[kp as usize]
    }

    /// Point with the largest total; ties go to the earlier point.
    pub fn most_frequent(&self) -> Option<KnowledgePoint> {
        self.rows
            .iter()
            .filter(|r| r.total > 0)
            .fold(None::<&DistributionRow>, |best, r| match best {
                Some(b) if b.total >= r.total => Some(b),
                _ => Some(r),
            })
            .and_then(|r| r.kp)
    }

    pub fn least_frequent(&self) -> Option<KnowledgePoint> {
        self.rows
            .iter()
            .fold(None::<&DistributionRow>, |best, r| match best {
                Some(b) if b.total <= r.total => Some(b),
                _ => Some(r),
            })
            .and_then(|r| r.kp)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<34} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "Syntactic Knowledge Points", "Abbr.", "#TF", "#MC", "#FITB", "#total", "Ratio(%)"
        ));
        for r in &self.rows {
            let kp = r.kp.expect("per-point rows");
            out.push_str(&format!(
                "{:<34} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9.2}\n",
                kp.title(),
                kp.abbr(),
                r.tf,
                r.mc,
                r.fitb,
                r.total,
                r.ratio
            ));
        }
        out.push_str(&format!("{:<34} {:>5} {:>39}\n", "Total", "", self.total));
        out
    }
}

pub fn dataset_stats(questions: &[crate::qgen::Question]) -> DistributionReport {
    DistributionReport::from_questions(questions)
}

//! Tree-pattern rules over constituency trees.
//!
//! A rule describes a node by its label and the sequence of its immediate
//! children, regex-style: `_` matches any label, `*` repeats an item zero or
//! more times across siblings, `A|B` and `!A` combine label tests, `VB@`
//! matches the verb tag family, `?name:` captures a child and `@self`
//! re-enters the rule one level down. See [`compile_pattern`] for the
//! textual grammar.

mod syntax;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::treebank::{NodeLabel, TreeNode};

pub use syntax::compile_pattern;

/// The rule file shipped with the crate: the knowledge-point patterns used
/// by extraction.
pub const DEFAULT_PATTERNS: &str = include_str!("../../patterns/default.pat");

/// Members of the `VB@` family.
pub const VERB_FAMILY: [&str; 6] = ["VB", "VBD", "VBG", "VBN", "VBP", "VBZ"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("rule {rule}: {message}")]
    Semantic { rule: String, message: String },
    #[error("unknown rule {0:?}")]
    UnknownRule(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelMatcher {
    Literal(String),
    Wildcard,
    FunctionTag(String),
    /// Category and function tag together, e.g. `NP%SBJ`.
    Tagged { category: String, tag: String },
    PosFamily(String),
    Negation(Box<LabelMatcher>),
    Alternation(Vec<LabelMatcher>),
}

fn in_pos_family(prefix: &str, category: &str) -> bool {
    if prefix == "VB" {
        return VERB_FAMILY.contains(&category);
    }
    match category.strip_prefix(prefix) {
        Some(rest) => rest.len() <= 2 && rest.bytes().all(|b| b.is_ascii_uppercase()),
        None => false,
    }
}

impl LabelMatcher {
    pub fn literal(category: &str) -> Self {
        LabelMatcher::Literal(category.to_string())
    }

    pub fn negate(inner: LabelMatcher) -> Self {
        LabelMatcher::Negation(Box::new(inner))
    }

    pub fn any_of(branches: Vec<LabelMatcher>) -> Self {
        debug_assert!(branches.len() >= 2);
        LabelMatcher::Alternation(branches)
    }

    pub fn matches(&self, label: &NodeLabel) -> bool {
        self.matches_opt(Some(label))
    }

    /// Evaluates against a possibly missing label (the parent of a root).
    /// Positive tests fail on a missing label; negation still inverts.
    pub fn matches_opt(&self, label: Option<&NodeLabel>) -> bool {
        match self {
            LabelMatcher::Negation(inner) => !inner.matches_opt(label),
            LabelMatcher::Alternation(branches) => branches.iter().any(|b| b.matches_opt(label)),
            _ => match label {
                None => false,
                Some(label) => match self {
                    LabelMatcher::Literal(cat) => label.category == *cat,
                    LabelMatcher::Wildcard => true,
                    LabelMatcher::FunctionTag(tag) => label.has_tag(tag),
                    LabelMatcher::Tagged { category, tag } => {
                        label.category == *category && label.has_tag(tag)
                    }
                    LabelMatcher::PosFamily(prefix) => in_pos_family(prefix, &label.category),
                    LabelMatcher::Negation(_) | LabelMatcher::Alternation(_) => unreachable!(),
                },
            },
        }
    }
}

pub fn label_matches(matcher: &LabelMatcher, label: &NodeLabel) -> bool {
    matcher.matches(label)
}

fn needs_quotes(word: &str) -> bool {
    word.is_empty()
        || word.starts_with('$')
        || word == "_"
        || word == "rule"
        || word == "let"
        || word
            .chars()
            .any(|c| c.is_whitespace() || "()[]|!*?%@^:=#\"".contains(c))
}

fn write_word(f: &mut fmt::Formatter<'_>, word: &str) -> fmt::Result {
    if needs_quotes(word) {
        write!(f, "\"{word}\"")
    } else {
        f.write_str(word)
    }
}

impl fmt::Display for LabelMatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelMatcher::Literal(cat) => write_word(f, cat),
            LabelMatcher::Wildcard => f.write_str("_"),
            LabelMatcher::FunctionTag(tag) => {
                f.write_str("_%")?;
                write_word(f, tag)
            }
            LabelMatcher::Tagged { category, tag } => {
                write_word(f, category)?;
                f.write_str("%")?;
                write_word(f, tag)
            }
            LabelMatcher::PosFamily(prefix) => {
                write_word(f, prefix)?;
                f.write_str("@")
            }
            LabelMatcher::Negation(inner) => match inner.as_ref() {
                LabelMatcher::Alternation(_) => write!(f, "![{inner}]"),
                _ => write!(f, "!{inner}"),
            },
            LabelMatcher::Alternation(branches) => {
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        f.write_str("|")?;
                    }
                    match b {
                        LabelMatcher::Alternation(_) => write!(f, "[{b}]")?,
                        _ => write!(f, "{b}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    One,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ItemTarget {
    Label(LabelMatcher),
    /// Re-entry point of a recursive rule.
    SelfRef,
    /// Another rule applied at this child (its parent constraint is ignored).
    RuleRef(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildItem {
    pub target: ItemTarget,
    pub quantifier: Quantifier,
    pub capture: Option<String>,
    /// Marks the per-level head collected into a recursive rule's chain.
    pub head: bool,
    pub descend: Option<Vec<ChildItem>>,
}

impl ChildItem {
    pub fn one(matcher: LabelMatcher) -> Self {
        ChildItem {
            target: ItemTarget::Label(matcher),
            quantifier: Quantifier::One,
            capture: None,
            head: false,
            descend: None,
        }
    }

    pub fn star(matcher: LabelMatcher) -> Self {
        ChildItem {
            quantifier: Quantifier::Star,
            ..ChildItem::one(matcher)
        }
    }

    pub fn captured(mut self, name: &str) -> Self {
        self.capture = Some(name.to_string());
        self
    }

    pub fn with_children(mut self, items: Vec<ChildItem>) -> Self {
        self.descend = Some(items);
        self
    }
}

impl fmt::Display for ChildItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(name) = &self.capture {
            write!(f, "?{name}:")?;
        }
        if self.head {
            f.write_str("=")?;
        }
        match (&self.target, &self.descend) {
            (ItemTarget::Label(m), Some(items)) => {
                write!(f, "({m}")?;
                for item in items {
                    write!(f, " {item}")?;
                }
                f.write_str(")")?;
            }
            (ItemTarget::Label(m), None) => write!(f, "{m}")?,
            (ItemTarget::SelfRef, _) => f.write_str("@self")?,
            (ItemTarget::RuleRef(name), _) => write!(f, "@{name}")?,
        }
        if self.quantifier == Quantifier::Star {
            f.write_str("*")?;
        }
        Ok(())
    }
}

/// One alternative of a rule: a root label test plus a child sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub root: LabelMatcher,
    pub children: Vec<ChildItem>,
}

impl Branch {
    fn contains_self_ref(&self) -> bool {
        fn walk(items: &[ChildItem]) -> bool {
            items.iter().any(|i| {
                i.target == ItemTarget::SelfRef || i.descend.as_deref().is_some_and(walk)
            })
        }
        walk(&self.children)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.root)?;
        for item in &self.children {
            write!(f, " {item}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub name: String,
    pub parent_constraint: Option<LabelMatcher>,
    pub branches: Vec<Branch>,
    pub recursive: bool,
}

impl PatternRule {
    pub fn capture_names(&self) -> Vec<String> {
        fn walk(items: &[ChildItem], out: &mut Vec<String>) {
            for item in items {
                if let Some(name) = &item.capture {
                    if !out.contains(name) {
                        out.push(name.clone());
                    }
                }
                if let Some(sub) = &item.descend {
                    walk(sub, out);
                }
            }
        }
        let mut out = Vec::new();
        for b in &self.branches {
            walk(&b.children, &mut out);
        }
        out
    }
}

impl fmt::Display for PatternRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}:", self.name)?;
        if let Some(parent) = &self.parent_constraint {
            match parent {
                LabelMatcher::Alternation(_) => write!(f, " ^[{parent}]")?,
                _ => write!(f, " ^{parent}")?,
            }
        }
        for (i, b) in self.branches.iter().enumerate() {
            if i > 0 {
                f.write_str(" |")?;
            }
            write!(f, " {b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRuleSet {
    rules: Vec<PatternRule>,
    /// Same rules with `@self` rewritten to a reference by name.
    resolved: Vec<PatternRule>,
    index: HashMap<String, usize>,
}

impl PatternRuleSet {
    /// Validates and indexes rules built in code. Text goes through
    /// [`compile_pattern`], which ends up here too.
    pub fn from_rules(rules: Vec<PatternRule>) -> Result<Self, PatternError> {
        syntax::validate(rules)
    }

    pub(crate) fn new_unchecked(rules: Vec<PatternRule>) -> Self {
        let index = rules
            .iter()
            .enumerate()
            .map(|(i, r)| (r.name.clone(), i))
            .collect();
        let resolved = rules.iter().map(resolve_self).collect();
        PatternRuleSet {
            rules,
            resolved,
            index,
        }
    }

    fn resolved(&self, name: &str) -> Option<&PatternRule> {
        self.index.get(name).map(|&i| &self.resolved[i])
    }

    pub fn get(&self, name: &str) -> Option<&PatternRule> {
        self.index.get(name).map(|&i| &self.rules[i])
    }

    pub fn rules(&self) -> &[PatternRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn default_rules() -> Self {
        compile_pattern(DEFAULT_PATTERNS).expect("shipped pattern file compiles")
    }

    pub fn match_rule<'t>(
        &self,
        name: &str,
        root: &'t TreeNode,
    ) -> Result<Vec<MatchBinding<'t>>, PatternError> {
        match_rule(self, name, root)
    }
}

impl fmt::Display for PatternRuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// One level of a recursive match: the node matched at that level and the
/// head item found among its children.
#[derive(Debug, Clone, Copy)]
pub struct ChainLink<'t> {
    pub level: &'t TreeNode,
    pub head: &'t TreeNode,
}

impl PartialEq for ChainLink<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.level, other.level) && std::ptr::eq(self.head, other.head)
    }
}

impl Eq for ChainLink<'_> {}

#[derive(Debug, Clone)]
pub struct MatchBinding<'t> {
    pub rule: String,
    /// The node the rule matched at.
    pub node: &'t TreeNode,
    pub captures: BTreeMap<String, &'t TreeNode>,
    /// Heads v0..vn of a recursive match, top-down. Empty otherwise.
    pub chain: Vec<ChainLink<'t>>,
}

impl MatchBinding<'_> {
    pub fn capture(&self, name: &str) -> Option<&TreeNode> {
        self.captures.get(name).copied()
    }
}

impl PartialEq for MatchBinding<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.rule == other.rule
            && std::ptr::eq(self.node, other.node)
            && same_captures(&self.captures, &other.captures)
            && self.chain == other.chain
    }
}

fn same_captures(a: &BTreeMap<String, &TreeNode>, b: &BTreeMap<String, &TreeNode>) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b.iter())
            .all(|((ka, va), (kb, vb))| ka == kb && std::ptr::eq(*va, *vb))
}

/// Captures produced by matching a child sequence.
pub type CaptureAssignment<'t> = BTreeMap<String, &'t TreeNode>;

/// Captures and chain of a partial match, by node address.
type PartialKey = (Vec<(String, usize)>, Vec<(usize, usize)>);

#[derive(Debug, Clone, Default)]
struct Partial<'t> {
    captures: Vec<(String, &'t TreeNode)>,
    head: Option<&'t TreeNode>,
    chain: Vec<ChainLink<'t>>,
}

impl<'t> Partial<'t> {
    fn merge(&self, other: &Partial<'t>) -> Partial<'t> {
        let mut merged = self.clone();
        merged.captures.extend(other.captures.iter().cloned());
        if other.head.is_some() {
            merged.head = other.head;
        }
        merged.chain.extend(other.chain.iter().copied());
        merged
    }

    fn key(&self) -> PartialKey {
        let mut caps: Vec<(String, usize)> = self
            .captures
            .iter()
            .map(|(n, node)| (n.clone(), *node as *const TreeNode as usize))
            .collect();
        caps.sort();
        let chain = self
            .chain
            .iter()
            .map(|l| (l.level as *const _ as usize, l.head as *const _ as usize))
            .collect();
        (caps, chain)
    }
}

fn dedup<'t>(partials: Vec<Partial<'t>>) -> Vec<Partial<'t>> {
    let mut seen = std::collections::HashSet::new();
    partials.into_iter().filter(|p| seen.insert(p.key())).collect()
}

struct Matcher<'r> {
    rules: &'r PatternRuleSet,
}

impl<'r> Matcher<'r> {
    fn rule_at<'t>(&self, rule: &PatternRule, node: &'t TreeNode) -> Vec<Partial<'t>> {
        let mut out = Vec::new();
        for branch in &rule.branches {
            if !branch.root.matches(&node.label) {
                continue;
            }
            for mut p in self.sequence(&branch.children, &node.children) {
                if rule.recursive {
                    let deeper = std::mem::take(&mut p.chain);
                    if let Some(head) = p.head.take() {
                        p.chain.push(ChainLink { level: node, head });
                    }
                    p.chain.extend(deeper);
                }
                p.head = None;
                out.push(p);
            }
        }
        out
    }

    fn sequence<'t>(&self, items: &[ChildItem], children: &'t [TreeNode]) -> Vec<Partial<'t>> {
        let mut out = Vec::new();
        self.seq_from(items, 0, children, 0, Partial::default(), &mut out);
        dedup(out)
    }

    fn seq_from<'t>(
        &self,
        items: &[ChildItem],
        i: usize,
        children: &'t [TreeNode],
        j: usize,
        acc: Partial<'t>,
        out: &mut Vec<Partial<'t>>,
    ) {
        let Some(item) = items.get(i) else {
            if j == children.len() {
                out.push(acc);
            }
            return;
        };
        match item.quantifier {
            Quantifier::One => {
                if let Some(child) = children.get(j) {
                    for sub in self.item_at(item, child) {
                        self.seq_from(items, i + 1, children, j + 1, acc.merge(&sub), out);
                    }
                }
            }
            Quantifier::Star => {
                self.seq_from(items, i + 1, children, j, acc.clone(), out);
                let mut k = j;
                while k < children.len() && !self.item_at(item, &children[k]).is_empty() {
                    k += 1;
                    self.seq_from(items, i + 1, children, k, acc.clone(), out);
                }
            }
        }
    }

    fn item_at<'t>(&self, item: &ChildItem, node: &'t TreeNode) -> Vec<Partial<'t>> {
        let mut subs = match &item.target {
            ItemTarget::Label(m) => {
                if !m.matches(&node.label) {
                    return Vec::new();
                }
                match &item.descend {
                    Some(items) => self.sequence(items, &node.children),
                    None => vec![Partial::default()],
                }
            }
            ItemTarget::SelfRef => unreachable!("self references are resolved before matching"),
            ItemTarget::RuleRef(name) => {
                let rule = self.rules.resolved(name).expect("validated rule reference");
                self.rule_at(rule, node)
            }
        };
        for sub in &mut subs {
            if let Some(name) = &item.capture {
                sub.captures.push((name.clone(), node));
            }
            if item.head {
                sub.head = Some(node);
            }
        }
        subs
    }
}

/// Resolves `@self` in a rule to a reference by name so the matcher only
/// deals with one kind of re-entry.
fn resolve_self(rule: &PatternRule) -> PatternRule {
    fn walk(items: &[ChildItem], name: &str) -> Vec<ChildItem> {
        items
            .iter()
            .map(|item| {
                let mut item = item.clone();
                if item.target == ItemTarget::SelfRef {
                    item.target = ItemTarget::RuleRef(name.to_string());
                }
                if let Some(sub) = &item.descend {
                    item.descend = Some(walk(sub, name));
                }
                item
            })
            .collect()
    }
    PatternRule {
        branches: rule
            .branches
            .iter()
            .map(|b| Branch {
                root: b.root.clone(),
                children: walk(&b.children, &rule.name),
            })
            .collect(),
        ..rule.clone()
    }
}

/// All ways `items` can consume `children` in order.
pub fn match_children<'t>(
    rules: &PatternRuleSet,
    items: &[ChildItem],
    children: &'t [TreeNode],
) -> Vec<CaptureAssignment<'t>> {
    let matcher = Matcher { rules };
    matcher
        .sequence(items, children)
        .into_iter()
        .map(|p| p.captures.into_iter().collect())
        .collect()
}

/// Every binding of rule `name` in the tree under `root`, in pre-order.
pub fn match_rule<'t>(
    rules: &PatternRuleSet,
    name: &str,
    root: &'t TreeNode,
) -> Result<Vec<MatchBinding<'t>>, PatternError> {
    let rule = rules
        .resolved(name)
        .ok_or_else(|| PatternError::UnknownRule(name.to_string()))?;
    let matcher = Matcher { rules };
    let mut out = Vec::new();
    for (node, parent) in root.preorder() {
        if let Some(constraint) = &rule.parent_constraint {
            if !constraint.matches_opt(parent.map(|p| &p.label)) {
                continue;
            }
        }
        let found = dedup(matcher.rule_at(rule, node));
        out.extend(found.into_iter().map(|p| MatchBinding {
            rule: name.to_string(),
            node,
            captures: p.captures.into_iter().collect(),
            chain: p.chain,
        }));
    }
    Ok(out)
}

//! Penn-Treebank-style bracketed constituency trees.
//!
//! Trees are read from `.mrg`-style text: one or more balanced bracket
//! expressions, optionally wrapped in an extra unlabeled pair. Labels are
//! split into a category, dash-separated function tags and an optional
//! numeric coindex.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// POS category used by the treebank for traces and other null elements.
pub const NULL_ELEMENT: &str = "-NONE-";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("unbalanced parenthesis at byte {offset}")]
    Unbalanced { offset: usize },
    #[error("empty label at byte {offset}")]
    EmptyLabel { offset: usize },
    #[error("node at byte {offset} has no children")]
    EmptyNode { offset: usize },
    #[error("node at byte {offset} mixes a bare token with subtrees")]
    MixedChildren { offset: usize },
    #[error("unexpected text outside of a tree at byte {offset}")]
    StrayText { offset: usize },
    #[error("invalid label {label:?}")]
    InvalidLabel { label: String },
    #[error("span {start}..{end} is out of bounds for a sentence of {len} tokens")]
    SpanOutOfBounds { start: usize, end: usize, len: usize },
}

/// Half-open token interval over a sentence yield.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// True when `other` lies inside `self` (non-strict).
    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Smallest span covering both.
    pub fn cover(&self, other: &Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeLabel {
    pub category: String,
    pub function_tags: Vec<String>,
    pub coindex: Option<u32>,
}

impl NodeLabel {
    pub fn new(category: impl Into<String>) -> Self {
        NodeLabel {
            category: category.into(),
            function_tags: Vec::new(),
            coindex: None,
        }
    }

    pub fn with_tags(category: impl Into<String>, tags: &[&str]) -> Self {
        NodeLabel {
            category: category.into(),
            function_tags: tags.iter().map(|t| t.to_string()).collect(),
            coindex: None,
        }
    }

    /// Splits a raw treebank label such as `NP-SBJ-1` or `PP-LOC=2`.
    ///
    /// Labels starting with `-` (`-NONE-`, `-LRB-`) are atomic. A trailing
    /// all-digit component, introduced by `-` or `=`, is the coindex.
    pub fn parse(raw: &str) -> Result<Self, TreebankError> {
        let invalid = || TreebankError::InvalidLabel {
            label: raw.to_string(),
        };
        if raw.is_empty() || raw.chars().any(|c| c.is_whitespace() || c == '(' || c == ')') {
            return Err(invalid());
        }
        if raw.starts_with('-') {
            return Ok(NodeLabel::new(raw));
        }

        let (body, mut coindex) = match raw.rsplit_once('=') {
            Some((body, idx)) if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => {
                (body, idx.parse().ok())
            }
            _ => (raw, None),
        };

        let mut parts: Vec<&str> = body.split('-').collect();
        let category = parts.remove(0);
        if category.is_empty() {
            return Err(invalid());
        }
        if coindex.is_none() {
            if let Some(last) = parts.last() {
                if !last.is_empty() && last.bytes().all(|b| b.is_ascii_digit()) {
                    coindex = last.parse().ok();
                    parts.pop();
                }
            }
        }
        let function_tags = parts
            .into_iter()
            .filter(|p| !p.is_empty())
            .map(str::to_string)
            .collect();
        Ok(NodeLabel {
            category: category.to_string(),
            function_tags,
            coindex,
        })
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.function_tags.iter().any(|t| t == tag)
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.category)?;
        for tag in &self.function_tags {
            write!(f, "-{tag}")?;
        }
        if let Some(idx) = self.coindex {
            write!(f, "-{idx}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeNode {
    pub label: NodeLabel,
    pub children: Vec<TreeNode>,
    pub token: Option<String>,
    pub span: Span,
}

impl TreeNode {
    pub fn leaf(label: NodeLabel, token: impl Into<String>) -> Self {
        TreeNode {
            label,
            children: Vec::new(),
            token: Some(token.into()),
            span: Span::new(0, 1),
        }
    }

    /// Builds an internal node; spans are only meaningful after
    /// [`TreeNode::assign_spans`] runs on the root.
    pub fn internal(label: NodeLabel, children: Vec<TreeNode>) -> Self {
        TreeNode {
            label,
            children,
            token: None,
            span: Span::new(0, 0),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }

    pub fn category(&self) -> &str {
        &self.label.category
    }

    /// Recomputes spans over the left-to-right leaf yield starting at 0.
    pub fn assign_spans(&mut self) {
        fn walk(node: &mut TreeNode, next: &mut usize) {
            let start = *next;
            if node.is_leaf() {
                *next += 1;
            } else {
                for child in &mut node.children {
                    walk(child, next);
                }
            }
            node.span = Span::new(start, *next);
        }
        let mut next = 0;
        walk(self, &mut next);
    }

    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            if node.is_leaf() {
                out.push(node);
            } else {
                stack.extend(node.children.iter().rev());
            }
        }
        out
    }

    pub fn tokens(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .filter_map(|n| n.token.clone())
            .collect()
    }

    /// Pre-order traversal paired with each node's parent.
    pub fn preorder(&self) -> Vec<(&TreeNode, Option<&TreeNode>)> {
        let mut out = Vec::new();
        let mut stack: Vec<(&TreeNode, Option<&TreeNode>)> = vec![(self, None)];
        while let Some((node, parent)) = stack.pop() {
            out.push((node, parent));
            for child in node.children.iter().rev() {
                stack.push((child, Some(node)));
            }
        }
        out
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(TreeNode::node_count).sum::<usize>()
    }

    /// Canonical single-line bracketed rendering.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.write_bracketed(&mut out);
        out
    }

    fn write_bracketed(&self, out: &mut String) {
        out.push('(');
        out.push_str(&self.label.to_string());
        if let Some(tok) = &self.token {
            out.push(' ');
            out.push_str(tok);
        }
        for child in &self.children {
            out.push(' ');
            child.write_bracketed(out);
        }
        out.push(')');
    }

    /// Removes null elements and any constituent left empty by the removal.
    /// Returns `None` when nothing survives.
    pub fn strip_empty_elements(&self) -> Option<TreeNode> {
        let mut stripped = self.strip_rec()?;
        stripped.assign_spans();
        Some(stripped)
    }

    fn strip_rec(&self) -> Option<TreeNode> {
        if self.is_leaf() {
            if self.label.category == NULL_ELEMENT {
                return None;
            }
            return Some(self.clone());
        }
        let children: Vec<TreeNode> = self.children.iter().filter_map(TreeNode::strip_rec).collect();
        if children.is_empty() {
            return None;
        }
        Some(TreeNode {
            label: self.label.clone(),
            children,
            token: None,
            span: self.span,
        })
    }
}

impl fmt::Display for TreeNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub root: TreeNode,
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, mut root: TreeNode) -> Self {
        root.assign_spans();
        let tokens = root.tokens();
        Sentence {
            id: id.into(),
            root,
            tokens,
        }
    }

    /// Sentence without null elements, or `None` if the tree is all traces.
    pub fn strip_empty_elements(&self) -> Option<Sentence> {
        let root = self.root.strip_empty_elements()?;
        Some(Sentence::new(self.id.clone(), root))
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn phrase_text(&self, span: Span) -> Result<String, TreebankError> {
        phrase_text(self, span)
    }
}

/// Surface words of `span`, joined by single spaces.
pub fn phrase_text(sentence: &Sentence, span: Span) -> Result<String, TreebankError> {
    if span.start > span.end || span.end > sentence.tokens.len() {
        return Err(TreebankError::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            len: sentence.tokens.len(),
        });
    }
    Ok(sentence.tokens[span.start..span.end].join(" "))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lexeme<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<(usize, Lexeme<'_>)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => {
                out.push((i, Lexeme::Open));
                i += 1;
            }
            b')' => {
                out.push((i, Lexeme::Close));
                i += 1;
            }
            b if b.is_ascii_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && bytes[i] != b'('
                    && bytes[i] != b')'
                {
                    i += 1;
                }
                out.push((start, Lexeme::Atom(&text[start..i])));
            }
        }
    }
    out
}

/// A partially built node on the parser stack.
struct Frame<'a> {
    open: usize,
    label: Option<(usize, &'a str)>,
    token: Option<&'a str>,
    children: Vec<TreeNode>,
}

fn finish(frame: Frame<'_>) -> Result<Option<TreeNode>, TreebankError> {
    let Frame {
        open,
        label,
        token,
        children,
    } = frame;
    match label {
        None => {
            // Unlabeled wrapper: only legal as "( (S ...) )".
            if children.len() == 1 && token.is_none() {
                Ok(children.into_iter().next())
            } else if children.is_empty() && token.is_none() {
                Err(TreebankError::EmptyNode { offset: open })
            } else {
                Err(TreebankError::EmptyLabel { offset: open })
            }
        }
        Some((at, raw)) => {
            let label = NodeLabel::parse(raw).map_err(|_| TreebankError::EmptyLabel { offset: at })?;
            match (token, children.is_empty()) {
                (Some(tok), true) => Ok(Some(TreeNode::leaf(label, tok))),
                (None, false) => Ok(Some(TreeNode::internal(label, children))),
                (None, true) => Err(TreebankError::EmptyNode { offset: open }),
                (Some(_), false) => Err(TreebankError::MixedChildren { offset: open }),
            }
        }
    }
}

/// Parses every top-level tree in `text`. Sentence ids are `{source}#{index}`.
pub fn parse_bracketed_named(source: &str, text: &str) -> Result<Vec<Sentence>, TreebankError> {
    let mut sentences = Vec::new();
    let mut stack: Vec<Frame<'_>> = Vec::new();

    for (offset, lexeme) in lex(text) {
        match lexeme {
            Lexeme::Open => {
                if let Some(top) = stack.last() {
                    if top.token.is_some() {
                        return Err(TreebankError::MixedChildren { offset: top.open });
                    }
                }
                stack.push(Frame {
                    open: offset,
                    label: None,
                    token: None,
                    children: Vec::new(),
                });
            }
            Lexeme::Atom(atom) => {
                let top = stack
                    .last_mut()
                    .ok_or(TreebankError::StrayText { offset })?;
                if top.label.is_none() && top.children.is_empty() {
                    top.label = Some((offset, atom));
                } else if top.token.is_none() && top.children.is_empty() {
                    top.token = Some(atom);
                } else {
                    return Err(TreebankError::MixedChildren { offset: top.open });
                }
            }
            Lexeme::Close => {
                let frame = stack.pop().ok_or(TreebankError::Unbalanced { offset })?;
                let node = finish(frame)?;
                match (stack.last_mut(), node) {
                    (Some(parent), Some(node)) => {
                        if parent.token.is_some() {
                            return Err(TreebankError::MixedChildren { offset: parent.open });
                        }
                        parent.children.push(node);
                    }
                    (None, Some(node)) => {
                        let id = format!("{source}#{}", sentences.len());
                        sentences.push(Sentence::new(id, node));
                    }
                    (_, None) => {}
                }
            }
        }
    }
    if let Some(frame) = stack.last() {
        return Err(TreebankError::Unbalanced { offset: frame.open });
    }
    Ok(sentences)
}

pub fn parse_bracketed(text: &str) -> Result<Vec<Sentence>, TreebankError> {
    parse_bracketed_named("input", text)
}

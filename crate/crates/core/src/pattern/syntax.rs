//! Textual rule grammar.
//!
//! ```text
//! file    := (let | rule)*
//! let     := "let" NAME "=" alt
//! rule    := "rule" NAME ":" ("^" unary)? branch ("|" branch)*
//! branch  := "(" alt item* ")"
//! item    := ("?" NAME ":")? "="? element "*"?
//! element := branch | "@self" | "@" NAME | alt
//! alt     := unary ("|" unary)*
//! unary   := "!" unary | primary
//! primary := "[" alt "]" | "_" ("%" TAG)? | CAT ("%" TAG)? | CAT "@"
//!          | "%" TAG | "$" NAME | "\"" CAT "\""
//! ```
//!
//! `#` starts a comment when it begins a line or follows whitespace.

use std::collections::{HashMap, HashSet};

use super::{
    Branch, ChildItem, ItemTarget, LabelMatcher, PatternError, PatternRule, PatternRuleSet,
    Quantifier,
};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Open,
    Close,
    LBracket,
    RBracket,
    Pipe,
    Bang,
    Star,
    Question,
    Percent,
    At,
    Caret,
    Colon,
    Equals,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
    /// No whitespace between this token and the previous one.
    glued: bool,
}

const PUNCT: &str = "()[]|!*?%@^:=";

fn lex(source: &str) -> Result<Vec<Token>, PatternError> {
    let mut out = Vec::new();
    let mut chars = source.char_indices().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    let mut glued = false;

    while let Some(&(_, c)) = chars.peek() {
        let (tok_line, tok_col) = (line, column);
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
            glued = false;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            column += 1;
            glued = false;
            continue;
        }
        if c == '#' && !glued {
            while let Some(&(_, c)) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
            }
            continue;
        }
        let tok = if c == '"' {
            chars.next();
            column += 1;
            let mut word = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => {
                        column += 1;
                        break;
                    }
                    Some((_, '\n')) | None => {
                        return Err(PatternError::Syntax {
                            line: tok_line,
                            column: tok_col,
                            message: "unterminated quoted label".into(),
                        })
                    }
                    Some((_, ch)) => {
                        column += 1;
                        word.push(ch);
                    }
                }
            }
            Tok::Quoted(word)
        } else if PUNCT.contains(c) {
            chars.next();
            column += 1;
            match c {
                '(' => Tok::Open,
                ')' => Tok::Close,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '|' => Tok::Pipe,
                '!' => Tok::Bang,
                '*' => Tok::Star,
                '?' => Tok::Question,
                '%' => Tok::Percent,
                '@' => Tok::At,
                '^' => Tok::Caret,
                ':' => Tok::Colon,
                '=' => Tok::Equals,
                _ => unreachable!(),
            }
        } else {
            let mut word = String::new();
            while let Some(&(_, ch)) = chars.peek() {
                if ch.is_whitespace() || PUNCT.contains(ch) || ch == '"' {
                    break;
                }
                word.push(ch);
                chars.next();
                column += 1;
            }
            Tok::Word(word)
        };
        out.push(Token {
            tok,
            line: tok_line,
            column: tok_col,
            glued,
        });
        glued = true;
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    macros: HashMap<String, LabelMatcher>,
    /// End-of-input position for error messages.
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_token(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, PatternError> {
        let (line, column) = self
            .tokens
            .get(self.pos)
            .map(|t| (t.line, t.column))
            .unwrap_or(self.end);
        Err(PatternError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), PatternError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn name(&mut self, what: &str) -> Result<String, PatternError> {
        match self.peek() {
            Some(Tok::Word(w)) if is_identifier(w) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn file(&mut self) -> Result<Vec<PatternRule>, PatternError> {
        let mut rules = Vec::new();
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Word(w) if w == "rule" => {
                    self.pos += 1;
                    rules.push(self.rule()?);
                }
                Tok::Word(w) if w == "let" => {
                    self.pos += 1;
                    let name = self.name("definition name")?;
                    self.expect(Tok::Equals, "'='")?;
                    let value = self.alt()?;
                    if self.macros.insert(name.clone(), value).is_some() {
                        return self.error(format!("duplicate definition ${name}"));
                    }
                }
                _ => return self.error("expected 'rule' or 'let'"),
            }
        }
        Ok(rules)
    }

    fn rule(&mut self) -> Result<PatternRule, PatternError> {
        let name = self.name("rule name")?;
        self.expect(Tok::Colon, "':' after rule name")?;
        let parent_constraint = if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            Some(self.unary()?)
        } else {
            None
        };
        let mut branches = vec![self.branch()?];
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            branches.push(self.branch()?);
        }
        let recursive = branches.iter().any(Branch::contains_self_ref);
        Ok(PatternRule {
            name,
            parent_constraint,
            branches,
            recursive,
        })
    }

    fn branch(&mut self) -> Result<Branch, PatternError> {
        self.expect(Tok::Open, "'('")?;
        let root = self.alt()?;
        let children = self.items()?;
        self.expect(Tok::Close, "')'")?;
        Ok(Branch { root, children })
    }

    fn items(&mut self) -> Result<Vec<ChildItem>, PatternError> {
        let mut items = Vec::new();
        while !matches!(self.peek(), Some(Tok::Close) | None) {
            items.push(self.item()?);
        }
        Ok(items)
    }

    fn item(&mut self) -> Result<ChildItem, PatternError> {
        let capture = if self.peek() == Some(&Tok::Question) {
            self.pos += 1;
            let name = self.name("capture name")?;
            self.expect(Tok::Colon, "':' after capture name")?;
            Some(name)
        } else {
            None
        };
        let head = if self.peek() == Some(&Tok::Equals) {
            self.pos += 1;
            true
        } else {
            false
        };
        let (target, descend) = match self.peek() {
            Some(Tok::Open) => {
                let b = self.branch()?;
                (ItemTarget::Label(b.root), Some(b.children))
            }
            Some(Tok::At) => {
                self.pos += 1;
                let name = self.name("rule reference after '@'")?;
                if name == "self" {
                    (ItemTarget::SelfRef, None)
                } else {
                    (ItemTarget::RuleRef(name), None)
                }
            }
            _ => (ItemTarget::Label(self.alt()?), None),
        };
        let quantifier = if self.peek() == Some(&Tok::Star) && self.peek_token().is_some_and(|t| t.glued) {
            self.pos += 1;
            Quantifier::Star
        } else {
            Quantifier::One
        };
        Ok(ChildItem {
            target,
            quantifier,
            capture,
            head,
            descend,
        })
    }

    fn alt(&mut self) -> Result<LabelMatcher, PatternError> {
        let first = self.unary()?;
        if self.peek() != Some(&Tok::Pipe) {
            return Ok(first);
        }
        let mut branches = vec![first];
        while self.peek() == Some(&Tok::Pipe) {
            // A '|' followed by '(' separates rule branches, not labels.
            if matches!(self.tokens.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Open)) {
                break;
            }
            self.pos += 1;
            branches.push(self.unary()?);
        }
        if branches.len() == 1 {
            return Ok(branches.pop().unwrap());
        }
        Ok(LabelMatcher::Alternation(branches))
    }

    fn unary(&mut self) -> Result<LabelMatcher, PatternError> {
        if self.peek() == Some(&Tok::Bang) {
            self.pos += 1;
            return Ok(LabelMatcher::Negation(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn tag(&mut self) -> Result<String, PatternError> {
        match self.next().map(|t| t.tok) {
            Some(Tok::Word(w)) if !w.starts_with('$') => Ok(w),
            Some(Tok::Quoted(w)) => Ok(w),
            _ => {
                self.pos -= 1;
                self.error("expected function tag after '%'")
            }
        }
    }

    fn glued_next(&self, want: &Tok) -> bool {
        self.peek_token()
            .is_some_and(|t| t.glued && &t.tok == want)
    }

    fn primary(&mut self) -> Result<LabelMatcher, PatternError> {
        let Some(token) = self.peek_token().cloned() else {
            return self.error("unexpected end of input");
        };
        match token.tok {
            Tok::LBracket => {
                self.pos += 1;
                let inner = self.alt()?;
                self.expect(Tok::RBracket, "']'")?;
                Ok(inner)
            }
            Tok::Percent => {
                self.pos += 1;
                Ok(LabelMatcher::FunctionTag(self.tag()?))
            }
            Tok::Word(ref w) if w.starts_with('$') => {
                let name = &w[1..];
                match self.macros.get(name) {
                    Some(m) => {
                        let m = m.clone();
                        self.pos += 1;
                        Ok(m)
                    }
                    None => self.error(format!("undefined ${name}")),
                }
            }
            Tok::Word(ref w) if w == "rule" || w == "let" => {
                self.error(format!("unexpected keyword '{w}'"))
            }
            Tok::Word(_) | Tok::Quoted(_) => {
                let (w, quoted) = match token.tok {
                    Tok::Word(w) => (w, false),
                    Tok::Quoted(w) => (w, true),
                    _ => unreachable!(),
                };
                self.pos += 1;
                if w == "_" && !quoted {
                    if self.glued_next(&Tok::Percent) {
                        self.pos += 1;
                        return Ok(LabelMatcher::FunctionTag(self.tag()?));
                    }
                    return Ok(LabelMatcher::Wildcard);
                }
                if self.glued_next(&Tok::Percent) {
                    self.pos += 1;
                    let tag = self.tag()?;
                    return Ok(LabelMatcher::Tagged { category: w, tag });
                }
                if self.glued_next(&Tok::At) {
                    self.pos += 1;
                    return Ok(LabelMatcher::PosFamily(w));
                }
                Ok(LabelMatcher::Literal(w))
            }
            _ => self.error("expected a label"),
        }
    }
}

fn is_identifier(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Compiles rule text into a validated rule set.
///
/// Unknown rule references, duplicate names, captures or heads on starred
/// items and recursion without a base case are rejected.
pub fn compile_pattern(source: &str) -> Result<PatternRuleSet, PatternError> {
    let tokens = lex(source)?;
    let end = tokens.last().map(|t| (t.line, t.column + 1)).unwrap_or((1, 1));
    let mut parser = Parser {
        tokens,
        pos: 0,
        macros: HashMap::new(),
        end,
    };
    let rules = parser.file()?;
    validate(rules)
}

fn semantic<T>(rule: &str, message: impl Into<String>) -> Result<T, PatternError> {
    Err(PatternError::Semantic {
        rule: rule.to_string(),
        message: message.into(),
    })
}

fn any_item(items: &[ChildItem], pred: &dyn Fn(&ChildItem) -> bool) -> bool {
    items
        .iter()
        .any(|i| pred(i) || i.descend.as_deref().is_some_and(|sub| any_item(sub, pred)))
}

fn count_items(items: &[ChildItem], pred: &dyn Fn(&ChildItem) -> bool) -> usize {
    items
        .iter()
        .map(|i| pred(i) as usize + i.descend.as_deref().map_or(0, |sub| count_items(sub, pred)))
        .sum()
}

fn check_items(rule: &str, items: &[ChildItem], names: &HashSet<&str>, nested: bool) -> Result<(), PatternError> {
    for item in items {
        if item.quantifier == Quantifier::Star {
            if any_item(std::slice::from_ref(item), &|i| i.capture.is_some()) {
                return semantic(rule, "a starred item cannot carry a capture");
            }
            if any_item(std::slice::from_ref(item), &|i| i.head) {
                return semantic(rule, "a starred item cannot be a chain head");
            }
            if !matches!(item.target, ItemTarget::Label(_)) {
                return semantic(rule, "rule references cannot be starred");
            }
        }
        if item.head && nested {
            return semantic(rule, "chain heads must be immediate children of the rule root");
        }
        if let ItemTarget::RuleRef(name) = &item.target {
            if name == rule {
                return semantic(rule, "use @self for recursion");
            }
            if !names.contains(name.as_str()) {
                return semantic(rule, format!("unknown rule reference @{name}"));
            }
        }
        if let Some(sub) = &item.descend {
            check_items(rule, sub, names, true)?;
        }
    }
    Ok(())
}

fn capture_list(items: &[ChildItem], rules: &HashMap<&str, &PatternRule>, out: &mut Vec<String>) {
    for item in items {
        if let Some(name) = &item.capture {
            out.push(name.clone());
        }
        if let ItemTarget::RuleRef(target) = &item.target {
            if let Some(r) = rules.get(target.as_str()) {
                // A referenced rule contributes the captures of one branch.
                let mut widest = Vec::new();
                for b in &r.branches {
                    let mut sub = Vec::new();
                    capture_list(&b.children, rules, &mut sub);
                    if sub.len() > widest.len() {
                        widest = sub;
                    }
                }
                out.extend(widest);
            }
        }
        if let Some(sub) = &item.descend {
            capture_list(sub, rules, out);
        }
    }
}

pub(super) fn validate(rules: Vec<PatternRule>) -> Result<PatternRuleSet, PatternError> {
    let mut seen = HashSet::new();
    for rule in &rules {
        if !seen.insert(rule.name.as_str()) {
            return semantic(&rule.name, "duplicate rule name");
        }
    }
    let names: HashSet<&str> = rules.iter().map(|r| r.name.as_str()).collect();
    let by_name: HashMap<&str, &PatternRule> = rules.iter().map(|r| (r.name.as_str(), r)).collect();

    for rule in &rules {
        let name = rule.name.as_str();
        if rule.branches.is_empty() {
            return semantic(name, "rule has no branches");
        }
        let self_refs: usize = rule
            .branches
            .iter()
            .map(|b| count_items(&b.children, &|i| i.target == ItemTarget::SelfRef))
            .sum();
        let recursive = self_refs > 0;
        if recursive != rule.recursive {
            return semantic(name, "recursive flag disagrees with @self usage");
        }
        if recursive {
            if rule.branches.iter().all(Branch::contains_self_ref) {
                return semantic(name, "recursion lacks a base case (every branch contains @self)");
            }
            if self_refs > 1 {
                return semantic(name, "a recursive rule may contain only one @self");
            }
            for b in &rule.branches {
                let heads = b.children.iter().filter(|i| i.head).count();
                if heads != 1 {
                    return semantic(name, "each branch of a recursive rule needs exactly one '=' chain head");
                }
                if b.contains_self_ref() && any_item(&b.children, &|i| i.capture.is_some()) {
                    return semantic(name, "the recursive branch cannot capture");
                }
            }
        } else if rule
            .branches
            .iter()
            .any(|b| any_item(&b.children, &|i| i.head))
        {
            return semantic(name, "'=' chain heads are only meaningful in recursive rules");
        }
        for b in &rule.branches {
            check_items(name, &b.children, &names, false)?;
        }
    }

    // References between distinct rules must not loop.
    fn visit<'a>(
        name: &'a str,
        rules: &HashMap<&'a str, &'a PatternRule>,
        state: &mut HashMap<&'a str, u8>,
    ) -> Result<(), PatternError> {
        match state.get(name) {
            Some(2) => return Ok(()),
            Some(1) => return semantic(name, "cyclic rule references"),
            _ => {}
        }
        state.insert(name, 1);
        let mut refs = Vec::new();
        fn collect<'b>(items: &'b [ChildItem], out: &mut Vec<&'b str>) {
            for i in items {
                if let ItemTarget::RuleRef(n) = &i.target {
                    out.push(n);
                }
                if let Some(sub) = &i.descend {
                    collect(sub, out);
                }
            }
        }
        for b in &rules[name].branches {
            collect(&b.children, &mut refs);
        }
        for r in refs {
            let key = *rules.get_key_value(r).expect("checked above").0;
            visit(key, rules, state)?;
        }
        state.insert(name, 2);
        Ok(())
    }
    let mut state = HashMap::new();
    for rule in &rules {
        visit(&rule.name, &by_name, &mut state)?;
    }

    for rule in &rules {
        for b in &rule.branches {
            let mut caps = Vec::new();
            capture_list(&b.children, &by_name, &mut caps);
            let mut uniq = HashSet::new();
            for c in &caps {
                if !uniq.insert(c) {
                    return semantic(&rule.name, format!("capture ?{c} bound more than once"));
                }
            }
        }
    }

    Ok(PatternRuleSet::new_unchecked(rules))
}

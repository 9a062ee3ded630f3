//! Brute-force reference matcher for non-recursive rules.
//!
//! Trees and rules are generated here as plain data, rendered to text and
//! handed to the library; the reference side enumerates every way to split
//! a child list among the items and never backtracks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use synprobe_core::TreeNode;

pub const CATEGORIES: [&str; 9] = ["S", "NP", "VP", "VB", "VBD", "MD", "PP", "DT", "."];
const TAGGABLE: [&str; 3] = ["NP", "S", "PP"];

#[derive(Debug, Clone)]
pub struct OTree {
    pub category: String,
    pub tags: Vec<String>,
    pub children: Vec<OTree>,
}

impl OTree {
    pub fn render(&self) -> String {
        let mut label = self.category.clone();
        for t in &self.tags {
            label.push('-');
            label.push_str(t);
        }
        if self.children.is_empty() {
            format!("({label} w)")
        } else {
            let kids: Vec<String> = self.children.iter().map(OTree::render).collect();
            format!("({label} {})", kids.join(" "))
        }
    }

    /// Pre-order list of (node, parent index).
    pub fn preorder(&self) -> Vec<(&OTree, Option<usize>)> {
        fn walk<'a>(t: &'a OTree, parent: Option<usize>, out: &mut Vec<(&'a OTree, Option<usize>)>) {
            let me = out.len();
            out.push((t, parent));
            for c in &t.children {
                walk(c, Some(me), out);
            }
        }
        let mut out = Vec::new();
        walk(self, None, &mut out);
        out
    }
}

fn random_label<R: Rng>(rng: &mut R) -> (String, Vec<String>) {
    let cat = CATEGORIES.choose(rng).unwrap().to_string();
    let tags = if TAGGABLE.contains(&cat.as_str()) && rng.gen_bool(0.3) {
        vec!["SBJ".to_string()]
    } else {
        Vec::new()
    };
    (cat, tags)
}

/// A random tree with at most `max_nodes` nodes; leaves carry one token.
pub fn random_tree<R: Rng>(rng: &mut R, max_nodes: usize) -> OTree {
    fn grow<R: Rng>(rng: &mut R, budget: &mut usize, depth: usize) -> OTree {
        let (category, tags) = random_label(rng);
        *budget -= 1;
        let mut children = Vec::new();
        if depth < 4 && *budget > 0 && rng.gen_bool(if depth == 0 { 1.0 } else { 0.55 }) {
            let want = rng.gen_range(1..=4);
            for _ in 0..want {
                if *budget == 0 {
                    break;
                }
                children.push(grow(rng, budget, depth + 1));
            }
        }
        OTree { category, tags, children }
    }
    let mut budget = max_nodes;
    grow(rng, &mut budget, 0)
}

#[derive(Debug, Clone)]
pub enum OLabel {
    Lit(String),
    Any,
    Family,
    AnyTagged,
    CatTagged(String),
    Not(Box<OLabel>),
    Alt(Vec<OLabel>),
}

impl OLabel {
    /// `None` stands for the missing parent of a root.
    pub fn eval(&self, node: Option<&OTree>) -> bool {
        match self {
            OLabel::Not(inner) => !inner.eval(node),
            OLabel::Alt(bs) => bs.iter().any(|b| b.eval(node)),
            _ => {
                let Some(n) = node else { return false };
                let sbj = n.tags.iter().any(|t| t == "SBJ");
                match self {
                    OLabel::Lit(c) => n.category == *c,
                    OLabel::Any => true,
                    OLabel::Family => ["VB", "VBD", "VBG", "VBN", "VBP", "VBZ"].contains(&n.category.as_str()),
                    OLabel::AnyTagged => sbj,
                    OLabel::CatTagged(c) => n.category == *c && sbj,
                    _ => unreachable!(),
                }
            }
        }
    }

    pub fn render(&self) -> String {
        match self {
            OLabel::Lit(c) => c.clone(),
            OLabel::Any => "_".into(),
            OLabel::Family => "VB@".into(),
            OLabel::AnyTagged => "_%SBJ".into(),
            OLabel::CatTagged(c) => format!("{c}%SBJ"),
            OLabel::Not(inner) => format!("!{}", inner.render()),
            OLabel::Alt(bs) => format!("[{}]", bs.iter().map(OLabel::render).collect::<Vec<_>>().join("|")),
        }
    }
}

fn random_olabel<R: Rng>(rng: &mut R, depth: usize) -> OLabel {
    let lit = |rng: &mut R| OLabel::Lit(CATEGORIES.choose(rng).unwrap().to_string());
    match rng.gen_range(0..10) {
        0..=3 => lit(rng),
        4 => OLabel::Any,
        5 => OLabel::Family,
        6 => OLabel::AnyTagged,
        7 => OLabel::CatTagged(TAGGABLE.choose(rng).unwrap().to_string()),
        8 if depth < 2 => OLabel::Not(Box::new(random_olabel(rng, depth + 1))),
        9 if depth < 2 => OLabel::Alt((0..rng.gen_range(2..=3)).map(|_| random_olabel(rng, depth + 1)).collect()),
        _ => lit(rng),
    }
}

#[derive(Debug, Clone)]
pub struct OItem {
    pub label: OLabel,
    pub star: bool,
    pub capture: Option<String>,
    pub children: Option<Vec<OItem>>,
}

impl OItem {
    fn render(&self) -> String {
        let mut s = String::new();
        if let Some(c) = &self.capture {
            s.push_str(&format!("?{c}:"));
        }
        match &self.children {
            Some(items) => {
                s.push('(');
                s.push_str(&self.label.render());
                for i in items {
                    s.push(' ');
                    s.push_str(&i.render());
                }
                s.push(')');
            }
            None => s.push_str(&self.label.render()),
        }
        if self.star {
            s.push('*');
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ORule {
    pub parent: Option<OLabel>,
    pub root: OLabel,
    pub items: Vec<OItem>,
}

impl ORule {
    pub fn render(&self, name: &str) -> String {
        let mut s = format!("rule {name}:");
        if let Some(p) = &self.parent {
            s.push_str(&format!(" ^{}", p.render()));
        }
        s.push_str(&format!(" ({}", self.root.render()));
        for i in &self.items {
            s.push(' ');
            s.push_str(&i.render());
        }
        s.push(')');
        s
    }
}

fn random_items<R: Rng>(rng: &mut R, depth: usize, in_star: bool, next_cap: &mut usize) -> Vec<OItem> {
    let n = rng.gen_range(if depth == 0 { 1 } else { 0 }..=3);
    (0..n)
        .map(|_| {
            let star = rng.gen_bool(0.35);
            let capture = if !star && !in_star && rng.gen_bool(0.4) {
                *next_cap += 1;
                Some(format!("c{next_cap}"))
            } else {
                None
            };
            let children = if depth < 2 && rng.gen_bool(0.25) {
                Some(random_items(rng, depth + 1, in_star || star, next_cap))
            } else {
                None
            };
            OItem {
                label: random_olabel(rng, 0),
                star,
                capture,
                children,
            }
        })
        .collect()
}

pub fn random_rule<R: Rng>(rng: &mut R) -> ORule {
    let parent = match rng.gen_range(0..4) {
        0 => Some(OLabel::Lit(CATEGORIES.choose(rng).unwrap().to_string())),
        1 => Some(OLabel::Not(Box::new(OLabel::Lit(CATEGORIES.choose(rng).unwrap().to_string())))),
        _ => None,
    };
    let mut caps = 0;
    ORule {
        parent,
        root: random_olabel(rng, 0),
        items: random_items(rng, 0, false, &mut caps),
    }
}

/// Capture name to pre-order index.
pub type OCaptures = BTreeMap<String, usize>;

/// Every split of `n` children into consecutive runs, one run per item.
fn splits(items: &[OItem], n: usize) -> Vec<Vec<usize>> {
    match items.split_first() {
        None => {
            if n == 0 {
                vec![Vec::new()]
            } else {
                Vec::new()
            }
        }
        Some((first, rest)) => {
            let options: Vec<usize> = if first.star { (0..=n).collect() } else if n >= 1 { vec![1] } else { vec![] };
            let mut out = Vec::new();
            for k in options {
                for mut tail in splits(rest, n - k) {
                    tail.insert(0, k);
                    out.push(tail);
                }
            }
            out
        }
    }
}

/// Index of each node in pre-order, addressed by the path of child positions.
fn index_of(t: &OTree, base: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut next = base + 1;
    for c in &t.children {
        out.push(next);
        next += c.preorder().len();
    }
    out
}

fn item_matches(item: &OItem, node: &OTree, idx: usize) -> BTreeSet<OCaptures> {
    let mut out = BTreeSet::new();
    if !item.label.eval(Some(node)) {
        return out;
    }
    let subs = match &item.children {
        Some(items) => sequence_matches(items, node, idx),
        None => BTreeSet::from([OCaptures::new()]),
    };
    for mut s in subs {
        if let Some(c) = &item.capture {
            s.insert(c.clone(), idx);
        }
        out.insert(s);
    }
    out
}

fn sequence_matches(items: &[OItem], node: &OTree, idx: usize) -> BTreeSet<OCaptures> {
    let child_idx = index_of(node, idx);
    let mut out = BTreeSet::new();
    for split in splits(items, node.children.len()) {
        let mut partials = vec![OCaptures::new()];
        let mut pos = 0;
        for (item, &k) in items.iter().zip(&split) {
            let run = pos..pos + k;
            pos += k;
            if item.star {
                // Every child of the run must admit the item; bindings inside are discarded.
                if !run.clone().all(|j| !item_matches(item, &node.children[j], child_idx[j]).is_empty()) {
                    partials.clear();
                }
            } else {
                let j = run.start;
                let here = item_matches(item, &node.children[j], child_idx[j]);
                partials = partials
                    .iter()
                    .flat_map(|p| {
                        here.iter().map(move |h| {
                            let mut m = p.clone();
                            m.extend(h.clone());
                            m
                        })
                    })
                    .collect();
            }
            if partials.is_empty() {
                break;
            }
        }
        out.extend(partials);
    }
    out
}

/// Reference result: (match node index, captures) for every binding.
pub fn brute_force(rule: &ORule, tree: &OTree) -> BTreeSet<(usize, OCaptures)> {
    let nodes = tree.preorder();
    let mut out = BTreeSet::new();
    for (idx, (node, parent)) in nodes.iter().enumerate() {
        if let Some(p) = &rule.parent {
            if !p.eval(parent.map(|pi| nodes[pi].0)) {
                continue;
            }
        }
        if !rule.root.eval(Some(node)) {
            continue;
        }
        for caps in sequence_matches(&rule.items, node, idx) {
            out.insert((idx, caps));
        }
    }
    out
}

/// Pre-order index of every node in a library tree, keyed by address.
pub fn library_indices(root: &TreeNode) -> std::collections::HashMap<*const TreeNode, usize> {
    fn walk(t: &TreeNode, out: &mut std::collections::HashMap<*const TreeNode, usize>) {
        let i = out.len();
        out.insert(t as *const _, i);
        for c in &t.children {
            walk(c, out);
        }
    }
    let mut out = std::collections::HashMap::new();
    walk(root, &mut out);
    out
}

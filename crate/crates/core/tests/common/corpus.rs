//! Seeded PTB-style corpus for distribution checks when no real treebank is
//! available. Trees follow PTB bracketing conventions: function tags,
//! null elements with coindexed traces, auxiliary chains, double objects.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; 8] = ["Pierre", "Vinken", "Elsevier", "Mary", "John", "Smith", "Agnew", "Boston"];
const NOUNS: [&str; 14] = [
    "board", "director", "company", "share", "market", "report", "plan", "bank", "price", "investor", "deal",
    "unit", "office", "year",
];
const PLURALS: [&str; 6] = ["shares", "investors", "prices", "banks", "units", "analysts"];
const ADJS: [&str; 8] = ["nonexecutive", "big", "new", "former", "industrial", "small", "major", "local"];
const DETS: [&str; 4] = ["the", "a", "this", "that"];
const PRONOUNS: [&str; 5] = ["he", "she", "it", "they", "we"];
const TRANSITIVE: [(&str, &str, &str); 8] = [
    ("join", "joined", "joined"),
    ("buy", "bought", "bought"),
    ("sell", "sold", "sold"),
    ("acquire", "acquired", "acquired"),
    ("approve", "approved", "approved"),
    ("review", "reviewed", "reviewed"),
    ("expand", "expanded", "expanded"),
    ("reject", "rejected", "rejected"),
];
const INTRANSITIVE: [(&str, &str, &str); 5] = [
    ("rise", "rose", "risen"),
    ("fall", "fell", "fallen"),
    ("arrive", "arrived", "arrived"),
    ("resign", "resigned", "resigned"),
    ("grow", "grew", "grown"),
];
const DITRANSITIVE: [(&str, &str, &str); 3] = [("give", "gave", "given"), ("send", "sent", "sent"), ("offer", "offered", "offered")];
const PREPS: [&str; 5] = ["in", "on", "at", "with", "for"];
const ADVERBS: [&str; 5] = ["quickly", "already", "recently", "sharply", "still"];
const MODALS: [&str; 4] = ["will", "can", "may", "would"];

struct Gen {
    rng: ChaCha8Rng,
    coindex: u32,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).copied().expect("nonempty")
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn simple_np(&mut self, tag: &str) -> String {
        let label = format!("NP{tag}");
        match self.rng.gen_range(0..4) {
            0 => format!("({label} (NNP {}) (NNP {}))", self.pick(&NAMES), self.pick(&NAMES)),
            1 => format!("({label} (DT {}) (JJ {}) (NN {}))", self.pick(&DETS), self.pick(&ADJS), self.pick(&NOUNS)),
            2 => format!("({label} (CD {}) (NNS {}))", self.rng.gen_range(2..90), self.pick(&PLURALS)),
            _ => format!("({label} (DT {}) (NN {}))", self.pick(&DETS), self.pick(&NOUNS)),
        }
    }

    fn pp(&mut self, tag: &str) -> String {
        let obj = self.simple_np("");
        format!("(PP{tag} (IN {}) {obj})", self.pick(&PREPS))
    }

    /// Object or subject NP, possibly post-modified or coordinated.
    fn np(&mut self, tag: &str, depth: u32) -> String {
        let r: f64 = self.rng.gen();
        if depth < 2 && r < 0.12 {
            let head = self.simple_np("");
            let pp = self.pp("");
            format!("(NP{tag} {head} {pp})")
        } else if depth < 2 && r < 0.18 {
            let head = self.simple_np("");
            let rel = self.relative_clause(depth + 1);
            format!("(NP{tag} {head} {rel})")
        } else if depth < 2 && r < 0.23 {
            let a = self.simple_np("");
            let b = self.simple_np("");
            format!("(NP{tag} {a} (CC and) {b})")
        } else {
            self.simple_np(tag)
        }
    }

    fn relative_clause(&mut self, depth: u32) -> String {
        self.coindex += 1;
        let i = self.coindex;
        let subj = self.simple_np("-SBJ");
        let (_, past, _) = *TRANSITIVE.choose(&mut self.rng).expect("nonempty");
        let _ = depth;
        format!("(SBAR (WHNP-{i} (-NONE- 0)) (S {subj} (VP (VBD {past}) (NP (-NONE- *T*-{i})))))")
    }

    fn adverbial(&mut self) -> String {
        if self.chance(0.5) {
            format!("(ADVP-MNR (RB {}))", self.pick(&ADVERBS))
        } else {
            let tag = ["-TMP", "-LOC"].choose(&mut self.rng).copied().expect("nonempty");
            self.pp(tag)
        }
    }

    /// Lexical VP headed by a verb of the given form (0 base, 1 past, 2 participle).
    fn lexical_vp(&mut self, form: usize, depth: u32) -> String {
        let choose = |forms: (&'static str, &'static str, &'static str)| match form {
            0 => ("VB", forms.0),
            1 => ("VBD", forms.1),
            _ => ("VBN", forms.2),
        };
        let r: f64 = self.rng.gen();
        let mut parts = Vec::new();
        if r < 0.55 {
            let (tag, v) = choose(*TRANSITIVE.choose(&mut self.rng).expect("nonempty"));
            parts.push(format!("({tag} {v})"));
            parts.push(self.np("", depth));
            if self.chance(0.3) {
                let tag = ["-CLR", "-LOC", ""].choose(&mut self.rng).copied().expect("nonempty");
                parts.push(self.pp(tag));
            }
        } else if r < 0.70 {
            let tag = match form {
                0 => "VB",
                1 => "VBD",
                _ => "VBN",
            };
            let be = match form {
                0 => "be",
                1 => "was",
                _ => "been",
            };
            parts.push(format!("({tag} {be})"));
            if self.chance(0.6) {
                parts.push(self.simple_np("-PRD"));
            } else {
                parts.push(format!("(ADJP-PRD (JJ {}))", self.pick(&ADJS)));
            }
        } else if r < 0.9 {
            let (tag, v) = choose(*INTRANSITIVE.choose(&mut self.rng).expect("nonempty"));
            parts.push(format!("({tag} {v})"));
        } else if r < 0.925 {
            let (tag, v) = choose(*DITRANSITIVE.choose(&mut self.rng).expect("nonempty"));
            parts.push(format!("({tag} {v})"));
            parts.push(format!("(NP (PRP {}))", ["me", "him", "them"].choose(&mut self.rng).expect("nonempty")));
            parts.push(self.simple_np(""));
        } else {
            let (tag, v) = choose(*TRANSITIVE.choose(&mut self.rng).expect("nonempty"));
            parts.push(format!("({tag} {v})"));
            parts.push(self.simple_np(""));
        }
        if self.chance(0.25) {
            parts.push(self.adverbial());
        }
        format!("(VP {})", parts.join(" "))
    }

    fn vp(&mut self, depth: u32) -> String {
        let r: f64 = self.rng.gen();
        if r < 0.25 {
            let inner = self.lexical_vp(0, depth);
            format!("(VP (MD {}) {inner})", self.pick(&MODALS))
        } else if r < 0.4 {
            let inner = self.lexical_vp(2, depth);
            let aux = ["has", "had", "have"].choose(&mut self.rng).copied().expect("nonempty");
            let tag = if aux == "had" { "VBD" } else if aux == "has" { "VBZ" } else { "VBP" };
            format!("(VP ({tag} {aux}) {inner})")
        } else {
            self.lexical_vp(1, depth)
        }
    }

    fn sentence(&mut self) -> String {
        let subj = if self.chance(0.25) {
            format!("(NP-SBJ (PRP {}))", self.pick(&PRONOUNS))
        } else {
            self.np("-SBJ", 0)
        };
        let vp = self.vp(0);
        let front = if self.chance(0.15) {
            let adv = self.pp("-TMP");
            format!("{adv} (, ,) ")
        } else {
            String::new()
        };
        format!("( (S {front}{subj} {vp} (. .)) )")
    }
}

/// `n` bracketed trees, one per line, deterministic in `seed`.
pub fn synthetic_treebank(n: usize, seed: u64) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        coindex: 0,
    };
    (0..n).map(|_| g.sentence()).collect::<Vec<_>>().join("\n")
}

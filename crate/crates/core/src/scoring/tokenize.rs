//! Penn Treebank word tokenization, following the rule cascade of NLTK's
//! `TreebankWordTokenizer`.

use std::sync::OnceLock;

use regex::Regex;

struct Rules {
    starting_quotes: Vec<(Regex, &'static str)>,
    punctuation: Vec<(Regex, &'static str)>,
    parens: (Regex, &'static str),
    double_dashes: (Regex, &'static str),
    ending_quotes: Vec<(Regex, &'static str)>,
    contractions: Vec<(Regex, &'static str)>,
}

fn rule(pattern: &str, replacement: &'static str) -> (Regex, &'static str) {
    (Regex::new(pattern).expect("static pattern"), replacement)
}

fn rules() -> &'static Rules {
    static RULES: OnceLock<Rules> = OnceLock::new();
    RULES.get_or_init(|| Rules {
        starting_quotes: vec![
            rule(r#"^""#, "``"),
            rule(r"(``)", " $1 "),
            rule(r#"([ (\[{<])("|'{2})"#, "$1 `` "),
        ],
        punctuation: vec![
            rule(r"([:,])([^\d])", " $1 $2"),
            rule(r"([:,])$", " $1 "),
            rule(r"\.\.\.", " ... "),
            rule(r"[;@#$%&]", " $0 "),
            rule(r#"([^.])(\.)([\])}>"']*)\s*$"#, "$1 $2$3 "),
            rule(r"[?!]", " $0 "),
            rule(r"([^'])' ", "$1 ' "),
        ],
        parens: rule(r"[\]\[(){}<>]", " $0 "),
        double_dashes: rule(r"--", " -- "),
        ending_quotes: vec![
            rule(r"''", " '' "),
            rule(r#"""#, " '' "),
            rule(r"([^' ])('[sS]|'[mM]|'[dD]|') ", "$1 $2 "),
            rule(r"([^' ])('ll|'LL|'re|'RE|'ve|'VE|n't|N'T) ", "$1 $2 "),
        ],
        contractions: vec![
            rule(r"(?i)\b(can)(not)\b", " $1 $2 "),
            rule(r"(?i)\b(d)('ye)\b", " $1 $2 "),
            rule(r"(?i)\b(gim)(me)\b", " $1 $2 "),
            rule(r"(?i)\b(gon)(na)\b", " $1 $2 "),
            rule(r"(?i)\b(got)(ta)\b", " $1 $2 "),
            rule(r"(?i)\b(lem)(me)\b", " $1 $2 "),
            rule(r"(?i)\b(more)('n)\b", " $1 $2 "),
            // "wanna" only before whitespace; the space is kept in the output.
            rule(r"(?i)\b(wan)(na)(\s)", " $1 $2 $3"),
            rule(r"(?i) ('t)(is)\b", " $1 $2 "),
            rule(r"(?i) ('t)(was)\b", " $1 $2 "),
        ],
    })
}

fn apply(text: String, (re, rep): &(Regex, &'static str)) -> String {
    re.replace_all(&text, *rep).into_owned()
}

pub fn treebank_tokenize(text: &str) -> Vec<String> {
    let r = rules();
    let mut t = text.to_string();
    for rl in &r.starting_quotes {
        t = apply(t, rl);
    }
    for rl in &r.punctuation {
        t = apply(t, rl);
    }
    t = apply(t, &r.parens);
    t = apply(t, &r.double_dashes);
    t = format!(" {t} ");
    for rl in &r.ending_quotes {
        t = apply(t, rl);
    }
    for rl in &r.contractions {
        t = apply(t, rl);
    }
    t.split_whitespace().map(str::to_string).collect()
}

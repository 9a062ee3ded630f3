//! Small hand-built trees used by tests, benches and the CLI demo.

/// "Pierre Vinken will join the board as a nonexecutive director Nov. 29."
pub const VINKEN: &str = "(S (NP-SBJ (NNP Pierre) (NNP Vinken)) (VP (MD will) (VP (VB join) (NP (DT the) (NN board)) (PP-CLR (IN as) (NP (DT a) (JJ nonexecutive) (NN director))) (NP-TMP (NNP Nov.) (CD 29)))) (. .))";

/// "John gave me a book."
pub const DOUBLE_OBJECT: &str =
    "(S (NP-SBJ (NNP John)) (VP (VBD gave) (NP (PRP me)) (NP (DT a) (NN book))) (. .))";

/// "John is a teacher."
pub const COPULA: &str = "(S (NP-SBJ (NNP John)) (VP (VBZ is) (NP-PRD (DT a) (NN teacher))) (. .))";

/// "I enjoy the book John gave me."
pub const RELATIVE_CLAUSE: &str = "(S (NP-SBJ (PRP I)) (VP (VBP enjoy) (NP (NP (DT the) (NN book)) (SBAR (WHNP-1 (-NONE- 0)) (S (NP-SBJ (NNP John)) (VP (VBD gave) (NP (PRP me)) (NP (-NONE- *T*-1))))))) (. .))";

/// "I read the book quickly."
pub const ADVERB: &str =
    "(S (NP-SBJ (PRP I)) (VP (VBD read) (NP (DT the) (NN book)) (ADVP-MNR (RB quickly))) (. .))";

/// "We will play football and watch TV."
pub const COORDINATION: &str = "(S (NP-SBJ (PRP We)) (VP (MD will) (VP (VP (VB play) (NP (NN football))) (CC and) (VP (VB watch) (NP (NN TV))))) (. .))";

/// "I like the book on my shelf."
pub const NOUN_ATTACHMENT: &str = "(S (NP-SBJ (PRP I)) (VP (VBP like) (NP (NP (DT the) (NN book)) (PP (IN on) (NP (PRP$ my) (NN shelf))))) (. .))";

/// "I hide the book on my shelf."
pub const VERB_ATTACHMENT: &str = "(S (NP-SBJ (PRP I)) (VP (VBP hide) (NP (DT the) (NN book)) (PP-LOC (IN on) (NP (PRP$ my) (NN shelf)))) (. .))";

/// "Desks are cleared by John."
pub const PASSIVE: &str = "(S (NP-SBJ-1 (NNS Desks)) (VP (VBP are) (VP (VBN cleared) (NP (-NONE- *-1)) (PP (IN by) (NP-LGS (NNP John))))) (. .))";

pub const ALL: [&str; 9] = [
    VINKEN,
    DOUBLE_OBJECT,
    COPULA,
    RELATIVE_CLAUSE,
    ADVERB,
    COORDINATION,
    NOUN_ATTACHMENT,
    VERB_ATTACHMENT,
    PASSIVE,
];

/// The fixture trees, parsed and stripped, with ids `fixture-<i>#0`.
pub fn sentences() -> Vec<crate::treebank::Sentence> {
    ALL.iter()
        .enumerate()
        .map(|(i, text)| {
            let parsed = crate::treebank::parse_bracketed_named(&format!("fixture-{i}"), text)
                .expect("fixtures parse");
            parsed[0].strip_empty_elements().expect("fixtures are not empty")
        })
        .collect()
}

/// Questions generated from the fixture trees with the default rules and
/// templates.
pub fn questions(seed: u64) -> Vec<crate::qgen::Question> {
    let sentences = sentences();
    let rules = crate::pattern::PatternRuleSet::default_rules();
    let (facts, _) = crate::extract::extract_corpus(&sentences, &rules);
    let templates = crate::qgen::TemplateSet::default_templates();
    crate::qgen::generate_questions(&facts, &sentences, &templates, seed)
        .expect("default templates cover all points")
        .0
}

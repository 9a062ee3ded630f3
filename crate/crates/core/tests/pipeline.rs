mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synprobe_core::extract::{extract_corpus, KnowledgePoint};
use synprobe_core::io::{read_jsonl, write_jsonl};
use synprobe_core::treebank::phrase_text;
use synprobe_core::{
    compile_pattern, generate_questions, parse_bracketed, PatternRuleSet, Question, QuestionType, Sentence, TemplateSet,
};

use common::corpus::synthetic_treebank;
use common::oracle::{brute_force, library_indices, random_rule, random_tree};

fn corpus(n: usize, seed: u64) -> Vec<Sentence> {
    parse_bracketed(&synthetic_treebank(n, seed))
        .unwrap()
        .iter()
        .filter_map(Sentence::strip_empty_elements)
        .collect()
}

#[test]
fn facts_point_at_their_own_text() {
    let sentences = corpus(300, 1);
    let by_id: HashMap<&str, &Sentence> = sentences.iter().map(|s| (s.id.as_str(), s)).collect();
    let (facts, stats) = extract_corpus(&sentences, &PatternRuleSet::default_rules());
    assert_eq!(stats.sentences, sentences.len());
    assert!(!facts.is_empty());
    let mut ids = HashSet::new();
    for f in &facts {
        let s = by_id[f.sentence_id.as_str()];
        assert_eq!(phrase_text(s, f.answer_span).unwrap(), f.answer_text, "{}", f.id());
        assert_eq!(phrase_text(s, f.anchor_span).unwrap(), f.anchor_text, "{}", f.id());
        assert!(ids.insert(f.id()), "duplicate fact {}", f.id());
    }
}

#[test]
fn extraction_is_idempotent() {
    let sentences = corpus(200, 2);
    let rules = PatternRuleSet::default_rules();
    assert_eq!(extract_corpus(&sentences, &rules).0, extract_corpus(&sentences, &rules).0);
}

#[test]
fn every_point_is_exercised_by_the_synthetic_corpus() {
    let sentences = corpus(600, 3);
    let (facts, _) = extract_corpus(&sentences, &PatternRuleSet::default_rules());
    let seen: HashSet<KnowledgePoint> = facts.iter().map(|f| f.kp).collect();
    for kp in KnowledgePoint::ALL {
        assert!(seen.contains(&kp), "no {kp} facts");
    }
}

#[test]
fn questions_are_well_formed() {
    let sentences = corpus(300, 4);
    let (facts, _) = extract_corpus(&sentences, &PatternRuleSet::default_rules());
    let templates = TemplateSet::default_templates();
    let (questions, _) = generate_questions(&facts, &sentences, &templates, 4).unwrap();
    let by_id: HashMap<&str, &Sentence> = sentences.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut ids = HashSet::new();
    for q in &questions {
        assert!(ids.insert(q.id.as_str()), "duplicate question {}", q.id);
        let s = by_id[q.meta.sentence_id.as_str()];
        match q.qtype {
            QuestionType::MC => {
                let opts = q.options.as_ref().unwrap();
                assert_eq!(opts.len(), 4);
                let texts: HashSet<String> = opts.iter().map(|o| o.text.to_lowercase()).collect();
                assert_eq!(texts.len(), 4, "{}", q.id);
                let letter = q.gold.as_letter().unwrap();
                assert!(opts.iter().any(|o| o.letter == letter));
            }
            QuestionType::TF => {
                assert!(q.options.is_none());
                assert!(q.gold.as_bool().is_some());
            }
            QuestionType::FITB => {
                assert!(q.prompt.contains("____________"));
                let gold = phrase_text(s, q.meta.answer_span).unwrap();
                assert_eq!(gold, q.gold_text());
            }
        }
    }
    let again = generate_questions(&facts, &sentences, &templates, 4).unwrap().0;
    assert_eq!(questions, again);
}

#[test]
fn question_files_round_trip() {
    let sentences = corpus(50, 5);
    let (facts, _) = extract_corpus(&sentences, &PatternRuleSet::default_rules());
    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("questions.jsonl");
    write_jsonl(&path, &questions).unwrap();
    let back: Vec<Question> = read_jsonl(&path).unwrap();
    assert_eq!(back, questions);
}

#[test]
fn synthetic_trees_round_trip_through_text() {
    for s in parse_bracketed(&synthetic_treebank(100, 6)).unwrap() {
        let again = parse_bracketed(&s.root.to_bracketed()).unwrap();
        assert_eq!(again[0].root, s.root);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_trees_round_trip(seed in any::<u64>()) {
        let tree = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 12);
        let parsed = parse_bracketed(&tree.render()).unwrap();
        prop_assert_eq!(parsed.len(), 1);
        let printed = parsed[0].root.to_bracketed();
        prop_assert_eq!(&parse_bracketed(&printed).unwrap()[0].root, &parsed[0].root);
        prop_assert_eq!(parsed[0].root.node_count(), tree.preorder().len());
    }

    #[test]
    fn matcher_agrees_with_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = random_tree(&mut rng, 12);
        let rule = random_rule(&mut rng);
        let rules = compile_pattern(&rule.render("R")).unwrap();
        let parsed = parse_bracketed(&tree.render()).unwrap();
        let index = library_indices(&parsed[0].root);
        let got: Vec<(usize, Vec<(String, usize)>)> = rules
            .match_rule("R", &parsed[0].root)
            .unwrap()
            .iter()
            .map(|b| {
                let caps = b.captures.iter().map(|(k, v)| (k.clone(), index[&(*v as *const _)])).collect();
                (index[&(b.node as *const _)], caps)
            })
            .collect();
        let want: Vec<(usize, Vec<(String, usize)>)> = brute_force(&rule, &tree)
            .into_iter()
            .map(|(i, c)| (i, c.into_iter().collect()))
            .collect();
        let mut sorted = got.clone();
        sorted.sort();
        prop_assert_eq!(sorted, want);
    }

    #[test]
    fn rendered_rules_reparse_identically(seed in any::<u64>()) {
        let rule = random_rule(&mut ChaCha8Rng::seed_from_u64(seed));
        let compiled = compile_pattern(&rule.render("R")).unwrap();
        let printed = compiled.to_string();
        prop_assert_eq!(compile_pattern(&printed).unwrap(), compiled);
    }
}

#[test]
fn gold_letters_are_uniform() {
    let sentences = corpus(1_500, 9);
    let (facts, _) = extract_corpus(&sentences, &PatternRuleSet::default_rules());
    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 9).unwrap();
    let letters: Vec<char> = questions
        .iter()
        .filter(|q| q.qtype == QuestionType::MC)
        .filter_map(|q| q.gold.as_letter())
        .collect();
    assert!(letters.len() >= 1000, "{} MC items", letters.len());
    for l in ['A', 'B', 'C', 'D'] {
        let share = 100.0 * letters.iter().filter(|&&c| c == l).count() as f64 / letters.len() as f64;
        assert!((share - 25.0).abs() <= 3.0, "{l}: {share:.2}%");
    }
}

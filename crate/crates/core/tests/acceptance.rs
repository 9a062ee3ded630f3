//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report stays readable. The
//! process fails when a criterion fails, except for checks listed in
//! `UNATTAINABLE`, which are still run and still reported as FAIL.

mod common;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use synprobe_core::extract::{dataset_stats, extract_corpus};
use synprobe_core::fixtures;
use synprobe_core::runner::{build_prompt, random_baseline, run_eval, select_exemplars, HttpCompleter};
use synprobe_core::scoring::{fitb_f1, score_runs};
use synprobe_core::{
    compile_pattern, generate_questions, overall_accuracy, parse_bracketed, sample_balanced, KnowledgePoint,
    ModelEndpoint, Question, QuestionType, RunConfig, RunRecord, SampleConfig, Setting, TemplateSet,
};

use common::mock;
use common::oracle::{brute_force, library_indices, random_rule, random_tree};

/// Sub-checks whose target value contradicts its own inputs. The ledger
/// explains each one.
const UNATTAINABLE: [&str; 1] = ["1/random-row"];

/// Number, name, check and runtime budget.
type Criterion = (u32, &'static str, fn() -> Outcome, Duration);

struct Outcome {
    ok: bool,
    detail: String,
    /// Failed sub-check ids.
    failed: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            ok: true,
            detail: String::new(),
            failed: Vec::new(),
        }
    }

    fn check(&mut self, id: &str, cond: bool, note: impl Into<String>) {
        let note = note.into();
        if !cond {
            self.ok = false;
            self.failed.push(id.to_string());
        }
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(&note);
        if !cond {
            self.detail.push_str(" [failed]");
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let gpt4 = overall_accuracy(81.88, 88.19, 63.98, 77.78).unwrap();
    o.check("1/gpt4-zero-shot", close(gpt4, 80.32, 0.005), format!("GPT4 zero-shot OA {gpt4:.4} (target 80.32)"));
    let gpt35 = overall_accuracy(63.38, 73.58, 57.28, 72.36).unwrap();
    o.check("1/gpt35-few-shot", close(gpt35, 67.26, 0.005), format!("GPT3.5 few-shot OA {gpt35:.4} (target 67.26)"));
    let random = overall_accuracy(50.00, 25.00, 0.68, 23.21).unwrap();
    o.check(
        "1/random-row",
        close(random, 28.66, 0.005),
        format!("Random OA {random:.4} (target 28.66; the same formula that reproduces both model rows gives 28.98 here)"),
    );
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let sentences: Vec<_> = parse_bracketed(fixtures::VINKEN)
        .unwrap()
        .iter()
        .filter_map(|s| s.strip_empty_elements())
        .collect();
    let rules = synprobe_core::PatternRuleSet::default_rules();
    let (facts, _) = extract_corpus(&sentences, &rules);
    let find = |kp: KnowledgePoint| facts.iter().filter(move |f| f.kp == kp).collect::<Vec<_>>();

    let gs = find(KnowledgePoint::GS);
    o.check(
        "2/gs",
        gs.len() == 1 && gs[0].answer_text == "Pierre Vinken" && gs[0].anchor_text == "will join",
        format!("GS {:?}", gs.iter().map(|f| (&f.answer_text, &f.anchor_text)).collect::<Vec<_>>()),
    );
    let dobj = find(KnowledgePoint::DO);
    o.check(
        "2/do",
        dobj.len() == 1 && dobj[0].answer_text == "the board",
        format!("DO {:?}", dobj.iter().map(|f| &f.answer_text).collect::<Vec<_>>()),
    );
    let mvp = find(KnowledgePoint::MVP);
    o.check(
        "2/mvp",
        mvp.len() == 1 && mvp[0].answer_text == "will join",
        format!("MVP {:?}", mvp.iter().map(|f| &f.answer_text).collect::<Vec<_>>()),
    );
    o.check("2/no-sc-io", find(KnowledgePoint::SC).is_empty() && find(KnowledgePoint::IO).is_empty(), "no SC, no IO");

    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 0).unwrap();
    let mc = questions
        .iter()
        .find(|q| q.kp == KnowledgePoint::GS && q.qtype == QuestionType::MC);
    let gold = mc.map(|q| q.gold_text());
    o.check(
        "2/mc-gold",
        gold.as_deref() == Some("Pierre Vinken"),
        format!("GS-MC gold option {:?}", gold.unwrap_or_default()),
    );
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut trials, mut discrepancies, mut nonempty) = (0usize, 0usize, 0usize);
    let mut first_bad = None;
    while trials < 10_000 {
        let tree = random_tree(&mut rng, 12);
        let rule = random_rule(&mut rng);
        let text = rule.render("R");
        let rules = match compile_pattern(&text) {
            Ok(r) => r,
            Err(e) => {
                o.check("3/compile", false, format!("rule {text:?} rejected: {e}"));
                return o;
            }
        };
        let parsed = parse_bracketed(&tree.render()).unwrap();
        let root = &parsed[0].root;
        let index = library_indices(root);
        let got = rules.match_rule("R", root).unwrap();
        let got_set: BTreeSet<(usize, Vec<(String, usize)>)> = got
            .iter()
            .map(|b| {
                let caps = b
                    .captures
                    .iter()
                    .map(|(k, v)| (k.clone(), index[&(*v as *const _)]))
                    .collect();
                (index[&(b.node as *const _)], caps)
            })
            .collect();
        let want: BTreeSet<(usize, Vec<(String, usize)>)> = brute_force(&rule, &tree)
            .into_iter()
            .map(|(i, caps)| (i, caps.into_iter().collect()))
            .collect();
        if got_set != want || got_set.len() != got.len() {
            discrepancies += 1;
            first_bad.get_or_insert_with(|| format!("rule {text:?} on {}", tree.render()));
        }
        if !want.is_empty() {
            nonempty += 1;
        }
        trials += 1;
    }
    o.check(
        "3/agree",
        discrepancies == 0,
        format!("{trials} random (tree, rule) pairs, {nonempty} with matches, {discrepancies} discrepancies"),
    );
    if let Some(bad) = first_bad {
        o.detail.push_str(&format!("; first: {bad}"));
    }
    o.check("3/coverage", nonempty >= trials / 10, "at least a tenth of the pairs match");
    o
}

/// LCS by trying every subsequence of the shorter list, longest first.
fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subseq = |sub: &[u8]| {
        let mut it = long.iter();
        sub.iter().all(|x| it.any(|y| y == x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let n = mask.count_ones() as usize;
        if n <= best {
            continue;
        }
        let sub: Vec<u8> = (0..short.len()).filter(|i| mask >> i & 1 == 1).map(|i| short[i]).collect();
        if is_subseq(&sub) {
            best = n;
        }
    }
    best
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let pairs = 100_000;
    for _ in 0..pairs {
        let alphabet = rng.gen_range(1..=5u8);
        let list = |rng: &mut ChaCha8Rng| -> Vec<u8> {
            let n = rng.gen_range(0..=8);
            (0..n).map(|_| rng.gen_range(0..alphabet)).collect()
        };
        let gold = list(&mut rng);
        let pred = list(&mut rng);
        let m = brute_lcs(&gold, &pred);
        let want = if m == 0 {
            0.0
        } else {
            2.0 * m as f64 / (gold.len() + pred.len()) as f64
        };
        worst = worst.max((fitb_f1(&gold, &pred) - want).abs());
    }
    o.check("4/oracle", worst <= 1e-12, format!("{pairs} pairs, max |diff| {worst:e}"));

    let toks = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    let gold = toks("a nonexecutive director");
    let exact = fitb_f1(&gold, &toks("a nonexecutive director"));
    let partial = fitb_f1(&gold, &toks("nonexecutive director"));
    let reordered = fitb_f1(&gold, &toks("director nonexecutive a"));
    o.check(
        "4/examples",
        exact == 1.0 && partial == 0.8 && reordered == 1.0 / 3.0,
        format!("worked examples {exact}, {partial}, {reordered}"),
    );
    o
}

/// `n` questions spread over `kps x categories x 3` strata.
fn synthetic_pool(n: usize, categories: usize) -> Vec<Question> {
    let base = fixtures::questions(0);
    let proto: HashMap<QuestionType, &Question> = QuestionType::ALL
        .iter()
        .map(|&t| (t, base.iter().find(|q| q.qtype == t).unwrap()))
        .collect();
    (0..n)
        .map(|i| {
            let qtype = QuestionType::ALL[i % 3];
            let mut q = proto[&qtype].clone();
            q.kp = KnowledgePoint::ALL[(i / 3) % KnowledgePoint::ALL.len()];
            q.meta.answer_category = format!("category {}", (i / 27) % categories);
            q.id = format!("pool/{i:05}");
            q
        })
        .collect()
}

fn sample_bytes(pool: &[Question], seed: u64) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let s = sample_balanced(
        pool,
        &SampleConfig {
            k_eval: 5,
            k_exemplar: 2,
            seed,
        },
    );
    s.write_to(dir.path()).unwrap();
    let mut out = Vec::new();
    for f in ["eval.jsonl", "exemplars.jsonl", "manifest.json"] {
        out.extend(std::fs::read(dir.path().join(f)).unwrap());
    }
    out
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let pool = synthetic_pool(10_000, 3);
    let cfg = SampleConfig {
        k_eval: 5,
        k_exemplar: 2,
        seed: 11,
    };
    let s = sample_balanced(&pool, &cfg);
    let strata = s.manifest.strata.len();
    o.check("5/strata", strata >= 50, format!("{} questions in {strata} strata", pool.len()));
    let mut per: HashMap<String, usize> = HashMap::new();
    for q in &s.eval {
        *per.entry(synprobe_core::StratumKey::of(q).label()).or_default() += 1;
    }
    let max = per.values().copied().max().unwrap_or(0);
    o.check("5/cap", max <= 5, format!("largest stratum contributes {max}"));
    let eval_ids: HashSet<&str> = s.eval.iter().map(|q| q.id.as_str()).collect();
    let overlap = s.exemplars.iter().filter(|q| eval_ids.contains(q.id.as_str())).count();
    o.check("5/disjoint", overlap == 0, format!("eval/exemplar overlap {overlap}"));
    let a = sample_bytes(&pool, 11);
    let b = sample_bytes(&pool, 11);
    let c = sample_bytes(&pool, 12);
    o.check("5/same-seed", a == b, "same seed byte-identical");
    o.check("5/other-seed", a != c, "different seed differs");
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let (sentences, source) = common::treebank_or_synthetic(1_500, 6);
    let rules = synprobe_core::PatternRuleSet::default_rules();
    let (facts, _) = extract_corpus(&sentences, &rules);
    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 6).unwrap();
    let n_mc = questions.iter().filter(|q| q.qtype == QuestionType::MC).count();
    let n_tf = questions.iter().filter(|q| q.qtype == QuestionType::TF).count();
    o.check("6/size", n_mc >= 1000 && n_tf >= 1000, format!("{n_mc} MC and {n_tf} TF items from {source}"));
    let records = random_baseline(&questions, 6);
    let board = score_runs(&questions, &records).unwrap();
    let tf = board.overall.tf_acc.unwrap_or(f64::NAN);
    let mc = board.overall.mc_acc.unwrap_or(f64::NAN);
    o.check("6/tf", close(tf, 50.0, 3.0), format!("TF {tf:.2} (50 +/- 3)"));
    o.check("6/mc", close(mc, 25.0, 3.0), format!("MC {mc:.2} (25 +/- 3)"));
    o
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let (sentences, _) = common::treebank_or_synthetic(400, 7);
    let rules = synprobe_core::PatternRuleSet::default_rules();
    let (facts, _) = extract_corpus(&sentences, &rules);
    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 7).unwrap();
    let sample = sample_balanced(
        &questions,
        &SampleConfig {
            k_eval: 1,
            k_exemplar: 20,
            seed: 7,
        },
    );
    let pool = sample.exemplars;
    // Rotate over question types so every score cell is populated.
    let usable: Vec<Question> = sample
        .eval
        .into_iter()
        .filter(|q| pool.iter().filter(|e| e.kp == q.kp && e.qtype == q.qtype).count() >= 5)
        .collect();
    let by_type: Vec<Vec<&Question>> = QuestionType::ALL
        .iter()
        .map(|&t| usable.iter().filter(|q| q.qtype == t).collect())
        .collect();
    let eval: Vec<Question> = (0..usable.len())
        .flat_map(|i| by_type.iter().filter_map(move |v| v.get(i).map(|q| (*q).clone())))
        .take(20)
        .collect();
    o.check("7/eval-size", eval.len() == 20, format!("{} eval questions", eval.len()));
    let types: HashSet<QuestionType> = eval.iter().map(|q| q.qtype).collect();
    o.check("7/types", types.len() == 3, "all three question types present");

    let server = mock::spawn(|n, body| {
        if n < 4 {
            return (500, "{\"error\": \"injected\"}".to_string());
        }
        let answers = ["True", "B", "the board", "False", "A"];
        (200, mock::chat_reply(answers[body.len() % answers.len()]))
    });
    let mut endpoint = ModelEndpoint::new("mock", &server.base_url, "mock-model");
    endpoint.backoff.initial_ms = 5;
    endpoint.backoff.max_ms = 20;
    let completer = HttpCompleter::new(&endpoint).unwrap();
    let cfg = RunConfig {
        setting: Setting::FewShot,
        n_exemplars: 5,
        seeds: vec![0, 1, 2],
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let out = run_eval(&completer, &endpoint, &cfg, &eval, &pool, Some(&path)).unwrap();
    let keys: HashSet<(&str, u64)> = out.records.iter().map(|r| (r.question_id.as_str(), r.seed)).collect();
    o.check(
        "7/records",
        out.records.len() == 60 && keys.len() == 60,
        format!("{} records, {} distinct (question, seed)", out.records.len(), keys.len()),
    );

    let by_id: HashMap<&str, &Question> = eval.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut bad_prompts = 0;
    for r in &out.records {
        let q = by_id[r.question_id.as_str()];
        let (shots, shortfall) = select_exemplars(&pool, q, 5, r.seed);
        let matching = shots.iter().all(|e| e.kp == q.kp && e.qtype == q.qtype);
        let present = shots
            .iter()
            .all(|e| r.prompt.contains(&format!("{} {}\n\n", synprobe_core::runner::render_block(e), e.gold)));
        let rebuilt = build_prompt(q, &shots, Setting::FewShot).unwrap();
        if shots.len() != 5 || shortfall != 0 || !matching || !present || r.prompt.matches("Answer:").count() != 6 || rebuilt != r.prompt {
            bad_prompts += 1;
        }
    }
    o.check("7/exemplars", bad_prompts == 0, format!("{bad_prompts} prompts without 5 matching exemplars"));
    let served = server.calls.load(std::sync::atomic::Ordering::SeqCst);
    o.check(
        "7/retries",
        out.diagnostics.retries >= 4 && out.diagnostics.failures == 0 && served == out.diagnostics.requests as usize,
        format!(
            "{} retries after injected 500s, {} requests, {served} served",
            out.diagnostics.retries, out.diagnostics.requests
        ),
    );
    let reread: Vec<RunRecord> = synprobe_core::io::read_jsonl(&path).unwrap();
    let offline = score_runs(&eval, &reread).unwrap();
    let online = score_runs(&eval, &out.records).unwrap();
    let same = serde_json::to_string(&offline).unwrap() == serde_json::to_string(&online).unwrap()
        && offline.overall.oa.map(f64::to_bits) == online.overall.oa.map(f64::to_bits);
    o.check("7/rescore", same && offline.overall.oa.is_some(), format!("offline OA {:.4} equals in-memory", offline.overall.oa.unwrap_or(f64::NAN)));
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let (sentences, source) = common::treebank_or_synthetic(600, 8);
    let rules = synprobe_core::PatternRuleSet::default_rules();
    let (facts, _) = extract_corpus(&sentences, &rules);
    let (questions, _) = generate_questions(&facts, &sentences, &TemplateSet::default_templates(), 8).unwrap();
    let report = dataset_stats(&questions);
    let most = report.most_frequent();
    let least = report.least_frequent();
    o.check("8/size", sentences.len() >= 500, format!("{} sentences ({source})", sentences.len()));
    o.check(
        "8/order",
        most == Some(KnowledgePoint::MVP) && least == Some(KnowledgePoint::IO),
        format!(
            "most {:?} {:.2}%, least {:?} {:.2}%",
            most,
            most.map_or(0.0, |k| report.row(k).ratio),
            least,
            least.map_or(0.0, |k| report.row(k).ratio)
        ),
    );
    o
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "OA formula reproduction", criterion_1, Duration::from_secs(1)),
        (2, "fixture extraction", criterion_2, Duration::from_secs(1)),
        (3, "pattern engine oracle", criterion_3, Duration::from_secs(60)),
        (4, "F1 oracle", criterion_4, Duration::from_secs(30)),
        (5, "sampler contract", criterion_5, Duration::from_secs(5)),
        (6, "random baseline statistics", criterion_6, Duration::from_secs(10)),
        (7, "harness integration", criterion_7, Duration::from_secs(30)),
        (8, "distribution sanity", criterion_8, Duration::from_secs(60)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = 0;
    for (n, name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            let mut o = Outcome::new();
            o.check(&format!("{n}/panic"), false, format!("panicked: {msg}"));
            o
        });
        let elapsed = start.elapsed();
        let mut outcome = outcome;
        outcome.check(&format!("{n}/runtime"), elapsed <= budget, format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs()));
        let verdict = if outcome.ok { "PASS" } else { "FAIL" };
        println!("criterion {n} ({name}): {verdict}: {}", outcome.detail);
        unexpected += outcome.failed.iter().filter(|id| !UNATTAINABLE.contains(&id.as_str())).count();
    }
    if unexpected > 0 {
        eprintln!("{unexpected} unexpected failed check(s)");
        std::process::exit(1);
    }
}

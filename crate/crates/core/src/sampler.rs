//! Stratified down-sampling into disjoint evaluation and exemplar sets.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::extract::KnowledgePoint;
use crate::io::{write_jsonl, IoError};
use crate::qgen::{Question, QuestionType};
use crate::rng::{derived_rng, PRNG_ID};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StratumKey {
    pub qtype: QuestionType,
    pub kp: KnowledgePoint,
    pub answer_category: String,
}

impl StratumKey {
    pub fn of(q: &Question) -> Self {
        StratumKey {
            qtype: q.qtype,
            kp: q.kp,
            answer_category: q.meta.answer_category.clone(),
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.qtype, self.kp, self.answer_category)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub k_eval: usize,
    pub k_exemplar: usize,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            k_eval: 5,
            k_exemplar: 2,
            seed: 0,
        }
    }
}

/// Groups questions by stratum; input order is kept within each group.
pub fn stratify(questions: &[Question]) -> BTreeMap<StratumKey, Vec<&Question>> {
    let mut map: BTreeMap<StratumKey, Vec<&Question>> = BTreeMap::new();
    for q in questions {
        map.entry(StratumKey::of(q)).or_default().push(q);
    }
    map
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCount {
    pub qtype: QuestionType,
    pub kp: KnowledgePoint,
    pub answer_category: String,
    pub pool: usize,
    pub eval: usize,
    pub exemplar: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub seed: u64,
    pub k_eval: usize,
    pub k_exemplar: usize,
    pub prng: String,
    pub pool_size: usize,
    pub eval_size: usize,
    pub exemplar_size: usize,
    pub strata: Vec<StratumCount>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub eval: Vec<Question>,
    pub exemplars: Vec<Question>,
    pub manifest: SampleManifest,
}

/// Per stratum, draws `k_eval` questions for evaluation and up to
/// `k_exemplar` of the rest as exemplars. Strata are visited in key order.
pub fn sample_balanced(questions: &[Question], cfg: &SampleConfig) -> Sample {
    assert!(cfg.k_eval >= 1, "k_eval must be at least 1");
    let strata = stratify(questions);
    let mut eval = Vec::new();
    let mut exemplars = Vec::new();
    let mut counts = Vec::with_capacity(strata.len());
    for (key, members) in &strata {
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.shuffle(&mut derived_rng(cfg.seed, &key.label()));
        let n_eval = cfg.k_eval.min(order.len());
        let n_ex = cfg.k_exemplar.min(order.len() - n_eval);
        eval.extend(order[..n_eval].iter().map(|&i| members[i].clone()));
        exemplars.extend(order[n_eval..n_eval + n_ex].iter().map(|&i| members[i].clone()));
        counts.push(StratumCount {
            qtype: key.qtype,
            kp: key.kp,
            answer_category: key.answer_category.clone(),
            pool: members.len(),
            eval: n_eval,
            exemplar: n_ex,
        });
    }
    debug_assert!({
        let ids: HashSet<&str> = eval.iter().map(|q| q.id.as_str()).collect();
        exemplars.iter().all(|q| !ids.contains(q.id.as_str()))
    });
    let manifest = SampleManifest {
        seed: cfg.seed,
        k_eval: cfg.k_eval,
        k_exemplar: cfg.k_exemplar,
        prng: PRNG_ID.to_string(),
        pool_size: questions.len(),
        eval_size: eval.len(),
        exemplar_size: exemplars.len(),
        strata: counts,
    };
    Sample {
        eval,
        exemplars,
        manifest,
    }
}

impl Sample {
    /// Writes eval.jsonl, exemplars.jsonl and manifest.json into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), IoError> {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
        write_jsonl(&dir.join("eval.jsonl"), &self.eval)?;
        write_jsonl(&dir.join("exemplars.jsonl"), &self.exemplars)?;
        crate::io::write_json(&dir.join("manifest.json"), &self.manifest)
    }
}

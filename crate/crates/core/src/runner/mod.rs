//! Evaluation harness: prompts, endpoint calls with retry and rate limiting,
//! persisted run records, random baselines and checkpoint series.

mod client;
mod limiter;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::IoError;
use crate::qgen::{Question, QuestionType, OPTION_LETTERS};
use crate::rng::derived_rng;
use crate::scoring::{score_runs, series_csv, LabeledScoreboard, Scoreboard};
use crate::treebank::parse_bracketed;

pub use client::{extract_text, CallError, Completer, CompletionRequest, HttpCompleter};
pub use limiter::RateLimiter;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingCredential(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Scoring(#[from] crate::scoring::ScoringError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    #[default]
    Chat,
    Completion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backoff {
    pub initial_ms: u64,
    pub multiplier: f64,
    pub max_ms: u64,
}

impl Default for Backoff {
    fn default() -> Self {
        Backoff {
            initial_ms: 500,
            multiplier: 2.0,
            max_ms: 30_000,
        }
    }
}

impl Backoff {
    /// Delay before retry number `retry` (0-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let ms = self.initial_ms as f64 * self.multiplier.powi(retry as i32);
        Duration::from_millis(ms.min(self.max_ms as f64) as u64)
    }
}

fn default_timeout() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEndpoint {
    /// Name used in records, tables and series columns.
    pub label: String,
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the API key; never the key itself.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default)]
    pub backoff: Backoff,
    #[serde(default)]
    pub requests_per_second: Option<f64>,
}

impl ModelEndpoint {
    pub fn new(label: &str, base_url: &str, model: &str) -> Self {
        ModelEndpoint {
            label: label.to_string(),
            base_url: base_url.to_string(),
            model: model.to_string(),
            api_key_env: None,
            protocol: Protocol::Chat,
            request_timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff: Backoff::default(),
            requests_per_second: None,
        }
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let url = reqwest::Url::parse(&self.base_url)
            .map_err(|e| RunnerError::Config(format!("{}: base_url {:?}: {e}", self.label, self.base_url)))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(RunnerError::Config(format!("{}: base_url must be http(s)", self.label)));
        }
        if self.request_timeout_secs <= 0.0 || !self.request_timeout_secs.is_finite() {
            return Err(RunnerError::Config(format!("{}: timeout must be positive", self.label)));
        }
        if self.requests_per_second.is_some_and(|r| r <= 0.0 || !r.is_finite()) {
            return Err(RunnerError::Config(format!("{}: requests_per_second must be positive", self.label)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    ZeroShot,
    FewShot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub setting: Setting,
    pub n_exemplars: usize,
    pub seeds: Vec<u64>,
    pub temperature: f64,
    pub max_tokens_fitb: u32,
    pub max_tokens_choice: u32,
    pub concurrency_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            setting: Setting::FewShot,
            n_exemplars: 5,
            seeds: vec![0, 1, 2],
            temperature: 0.0,
            max_tokens_fitb: 256,
            max_tokens_choice: 10,
            concurrency_limit: 4,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunnerError> {
        if self.temperature != 0.0 {
            return Err(RunnerError::Config("temperature is fixed at 0".into()));
        }
        if self.seeds.is_empty() {
            return Err(RunnerError::Config("at least one seed is required".into()));
        }
        if self.concurrency_limit == 0 {
            return Err(RunnerError::Config("concurrency_limit must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_tokens(&self, qtype: QuestionType) -> u32 {
        match qtype {
            QuestionType::FITB => self.max_tokens_fitb,
            QuestionType::TF | QuestionType::MC => self.max_tokens_choice,
        }
    }

    fn exemplar_count(&self) -> usize {
        match self.setting {
            Setting::ZeroShot => 0,
            Setting::FewShot => self.n_exemplars,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: String,
    pub seed: u64,
    pub endpoint: String,
    pub model: String,
    pub prompt: String,
    /// `None` when every attempt failed; `error` says why.
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
    pub latency_ms: u64,
    pub timestamp: String,
}

#[derive(Debug, Default)]
pub struct Diagnostics {
    pub requests: AtomicU64,
    pub retries: AtomicU64,
    pub failures: AtomicU64,
    pub exemplar_shortfalls: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticsSnapshot {
    pub requests: u64,
    pub retries: u64,
    pub failures: u64,
    pub exemplar_shortfalls: u64,
}

impl Diagnostics {
    pub fn snapshot(&self) -> DiagnosticsSnapshot {
        DiagnosticsSnapshot {
            requests: self.requests.load(Ordering::SeqCst),
            retries: self.retries.load(Ordering::SeqCst),
            failures: self.failures.load(Ordering::SeqCst),
            exemplar_shortfalls: self.exemplar_shortfalls.load(Ordering::SeqCst),
        }
    }
}

/// Up to `n` exemplars sharing the question's point and type, in an order
/// fixed by `(seed, question id)`. The second value is the shortfall.
pub fn select_exemplars<'a>(
    pool: &'a [Question],
    question: &Question,
    n: usize,
    seed: u64,
) -> (Vec<&'a Question>, usize) {
    if n == 0 {
        return (Vec::new(), 0);
    }
    let mut candidates: Vec<&Question> = pool
        .iter()
        .filter(|e| e.kp == question.kp && e.qtype == question.qtype && e.id != question.id)
        .collect();
    candidates.shuffle(&mut derived_rng(seed, &format!("exemplars/{}", question.id)));
    let shortfall = n.saturating_sub(candidates.len());
    candidates.truncate(n);
    (candidates, shortfall)
}

fn header(qtype: QuestionType) -> &'static str {
    match qtype {
        QuestionType::TF => {
            "Answer the following true/false question about the syntactic structure of the sentence. \
             Reply with True or False only."
        }
        QuestionType::MC => {
            "Answer the following multiple-choice question about the syntactic structure of the sentence. \
             Reply with the letter of the correct option (A, B, C or D) only."
        }
        QuestionType::FITB => {
            "Fill in the blank in the following question about the syntactic structure of the sentence. \
             Reply with the missing words copied from the sentence only."
        }
    }
}

/// The "Sentence / Question / Options / Answer:" block of a question.
pub fn render_block(q: &Question) -> String {
    let mut out = format!("Sentence: {}\nQuestion: {}\n", q.sentence_text, q.prompt);
    if let Some(options) = &q.options {
        out.push_str("Options:\n");
        for o in options {
            out.push_str(&format!("{}. {}\n", o.letter, o.text));
        }
    }
    out.push_str("Answer:");
    out
}

pub fn build_prompt(question: &Question, exemplars: &[&Question], setting: Setting) -> Result<String, RunnerError> {
    if setting == Setting::ZeroShot && !exemplars.is_empty() {
        return Err(RunnerError::Config("zero-shot prompts take no exemplars".into()));
    }
    let mut out = String::from(header(question.qtype));
    out.push_str("\n\n");
    for e in exemplars {
        out.push_str(&render_block(e));
        out.push(' ');
        out.push_str(&e.gold.to_string());
        out.push_str("\n\n");
    }
    out.push_str(&render_block(question));
    Ok(out)
}

fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

struct Job<'a> {
    question: &'a Question,
    seed: u64,
}

fn call_with_retry(
    completer: &dyn Completer,
    endpoint: &ModelEndpoint,
    request: &CompletionRequest,
    limiter: Option<&RateLimiter>,
    diag: &Diagnostics,
) -> (Result<String, CallError>, u32) {
    let mut attempt = 0u32;
    loop {
        if let Some(l) = limiter {
            l.acquire();
        }
        diag.requests.fetch_add(1, Ordering::SeqCst);
        attempt += 1;
        match completer.complete(request) {
            Ok(text) => return (Ok(text), attempt),
            Err(CallError::Retryable(msg)) if attempt <= endpoint.max_retries => {
                log::debug!("{}: retry {attempt} after {msg}", endpoint.label);
                diag.retries.fetch_add(1, Ordering::SeqCst);
                std::thread::sleep(endpoint.backoff.delay(attempt - 1));
            }
            Err(e) => return (Err(e), attempt),
        }
    }
}

/// Output of [`run_eval`]: records sorted by (seed, question id).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub diagnostics: DiagnosticsSnapshot,
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| (a.seed, &a.question_id).cmp(&(b.seed, &b.question_id)));
}

/// One record per (question, seed). With `sink`, records are appended to
/// the file as they complete and the file is rewritten sorted at the end.
pub fn run_eval(
    completer: &dyn Completer,
    endpoint: &ModelEndpoint,
    cfg: &RunConfig,
    eval: &[Question],
    exemplars: &[Question],
    sink: Option<&Path>,
) -> Result<RunOutput, RunnerError> {
    cfg.validate()?;
    endpoint.validate()?;
    if cfg.setting == Setting::FewShot && cfg.n_exemplars > 0 && exemplars.is_empty() {
        return Err(RunnerError::Config("few-shot runs need a nonempty exemplar set".into()));
    }
    let jobs: Vec<Job> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| eval.iter().map(move |question| Job { question, seed }))
        .collect();
    let writer = match sink {
        Some(path) => {
            let f = File::create(path).map_err(|e| IoError::io(path, e))?;
            Some(Mutex::new(BufWriter::new(f)))
        }
        None => None,
    };
    let limiter = endpoint.requests_per_second.map(RateLimiter::new);
    let diag = Diagnostics::default();
    let next = AtomicUsize::new(0);
    let records = Mutex::new(Vec::with_capacity(jobs.len()));
    let sink_error: Mutex<Option<IoError>> = Mutex::new(None);
    let workers = cfg.concurrency_limit.min(jobs.len()).max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let q = job.question;
                let (shots, shortfall) = select_exemplars(exemplars, q, cfg.exemplar_count(), job.seed);
                if shortfall > 0 {
                    diag.exemplar_shortfalls.fetch_add(1, Ordering::SeqCst);
                }
                let prompt = build_prompt(q, &shots, cfg.setting).expect("exemplars only in few-shot");
                let request = CompletionRequest {
                    prompt,
                    max_tokens: cfg.max_tokens(q.qtype),
                    temperature: cfg.temperature,
                };
                let started = Instant::now();
                let (result, attempts) = call_with_retry(completer, endpoint, &request, limiter.as_ref(), &diag);
                let (raw_response, error) = match result {
                    Ok(text) => (Some(text), None),
                    Err(e) => {
                        diag.failures.fetch_add(1, Ordering::SeqCst);
                        (None, Some(e.to_string()))
                    }
                };
                let record = RunRecord {
                    question_id: q.id.clone(),
                    seed: job.seed,
                    endpoint: endpoint.label.clone(),
                    model: endpoint.model.clone(),
                    prompt: request.prompt,
                    raw_response,
                    error,
                    attempts,
                    latency_ms: started.elapsed().as_millis() as u64,
                    timestamp: now_rfc3339(),
                };
                if let (Some(w), Some(path)) = (&writer, sink) {
                    let line = serde_json::to_string(&record).expect("records serialize");
                    let mut w = w.lock().expect("sink lock");
                    if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                        sink_error.lock().expect("error lock").get_or_insert(IoError::io(path, e));
                    }
                }
                records.lock().expect("records lock").push(record);
            });
        }
    });

    if let Some(e) = sink_error.into_inner().expect("error lock") {
        return Err(e.into());
    }
    let mut records = records.into_inner().expect("records lock");
    sort_records(&mut records);
    if let Some(path) = sink {
        drop(writer);
        crate::io::write_jsonl(path, &records)?;
    }
    Ok(RunOutput {
        records,
        diagnostics: diag.snapshot(),
    })
}

/// Constituent phrases of a bracketed parse, distinct by text.
fn constituent_phrases(parse: &str) -> Vec<String> {
    let Ok(sentences) = parse_bracketed(parse) else {
        return Vec::new();
    };
    let Some(s) = sentences.first() else {
        return Vec::new();
    };
    let mut out: Vec<String> = Vec::new();
    for (node, _) in s.root.preorder() {
        if node.span.is_empty() {
            continue;
        }
        let text = s.tokens[node.span.start..node.span.end].join(" ");
        if text.chars().any(char::is_alphanumeric) && !out.contains(&text) {
            out.push(text);
        }
    }
    out
}

/// Chance-level answers: a fair coin for TF, a uniform letter for MC, a
/// uniformly drawn constituent of the sentence for FITB.
pub fn random_baseline(eval: &[Question], seed: u64) -> Vec<RunRecord> {
    let mut records: Vec<RunRecord> = eval
        .iter()
        .map(|q| {
            let mut rng = derived_rng(seed, &format!("random/{}", q.id));
            let answer = match q.qtype {
                QuestionType::TF => if rng.gen_bool(0.5) { "True" } else { "False" }.to_string(),
                QuestionType::MC => OPTION_LETTERS[rng.gen_range(0..OPTION_LETTERS.len())].to_string(),
                QuestionType::FITB => constituent_phrases(&q.meta.parse)
                    .choose(&mut rng)
                    .cloned()
                    .unwrap_or_default(),
            };
            RunRecord {
                question_id: q.id.clone(),
                seed,
                endpoint: "random".to_string(),
                model: "random".to_string(),
                prompt: String::new(),
                raw_response: Some(answer),
                error: None,
                attempts: 0,
                latency_ms: 0,
                timestamp: String::new(),
            }
        })
        .collect();
    sort_records(&mut records);
    records
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesColumn {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scoreboard: Option<Scoreboard>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsSnapshot>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesOutput {
    pub columns: Vec<SeriesColumn>,
    /// Rows are knowledge points, columns are endpoint labels, cells OA.
    pub csv: String,
}

/// Runs and scores each endpoint in order. A failing endpoint leaves an
/// empty column with its error; the others are unaffected. With `run_dir`,
/// each endpoint's records go to `<run_dir>/<label>.jsonl`.
pub fn checkpoint_series<F>(
    make_completer: F,
    endpoints: &[ModelEndpoint],
    cfg: &RunConfig,
    eval: &[Question],
    exemplars: &[Question],
    run_dir: Option<&Path>,
) -> Result<SeriesOutput, RunnerError>
where
    F: Fn(&ModelEndpoint) -> Result<Box<dyn Completer>, RunnerError>,
{
    if endpoints.is_empty() {
        return Err(RunnerError::Config("a series needs at least one endpoint".into()));
    }
    cfg.validate()?;
    let mut labels = std::collections::HashSet::new();
    for e in endpoints {
        if !labels.insert(e.label.as_str()) {
            return Err(RunnerError::Config(format!("duplicate endpoint label {:?}", e.label)));
        }
    }
    if let Some(dir) = run_dir {
        std::fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    let mut columns = Vec::with_capacity(endpoints.len());
    for endpoint in endpoints {
        let sink = run_dir.map(|d| d.join(format!("{}.jsonl", sanitize(&endpoint.label))));
        let outcome = make_completer(endpoint).and_then(|c| {
            let out = run_eval(c.as_ref(), endpoint, cfg, eval, exemplars, sink.as_deref())?;
            let sb = score_runs(eval, &out.records)?;
            Ok((sb, out.diagnostics))
        });
        columns.push(match outcome {
            Ok((sb, d)) => SeriesColumn {
                label: endpoint.label.clone(),
                scoreboard: Some(sb),
                error: None,
                diagnostics: Some(d),
            },
            Err(e) => {
                log::warn!("{}: {e}", endpoint.label);
                SeriesColumn {
                    label: endpoint.label.clone(),
                    scoreboard: None,
                    error: Some(e.to_string()),
                    diagnostics: None,
                }
            }
        });
    }
    let rows: Vec<LabeledScoreboard> = columns
        .iter()
        .map(|c| LabeledScoreboard {
            label: c.label.clone(),
            scoreboard: c.scoreboard.clone().unwrap_or_else(|| Scoreboard {
                overall: Default::default(),
                breakdown: BTreeMap::new(),
                seeds: Vec::new(),
            }),
        })
        .collect();
    Ok(SeriesOutput {
        columns,
        csv: series_csv(&rows),
    })
}

/// File-name-safe form of a label.
pub fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

//! `synprobe`: build, run and score the syntactic knowledge benchmark.
//!
//! Credentials are read from the environment variable named by an
//! endpoint's `api_key_env`; they are never accepted as flags or config.

mod config;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::{info, warn};

use synprobe_core::extract::{dataset_stats, extract_corpus, DistributionReport};
use synprobe_core::io::{read_json, read_jsonl, read_treebank_files, treebank_files_in, write_json, write_jsonl};
use synprobe_core::runner::{checkpoint_series, random_baseline, run_eval, sanitize, Completer, HttpCompleter};
use synprobe_core::scoring::{kp_table, main_table, score_runs, scoreboard_csv, LabeledScoreboard};
use synprobe_core::{
    compile_pattern, generate_questions, sample_balanced, PatternRuleSet, Question, RunRecord, Scoreboard, Sentence,
    Setting, SyntacticFact, TemplateSet,
};

use config::Config;

#[derive(Parser)]
#[command(name = "synprobe", version, about = "Syntactic knowledge benchmark toolkit")]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for generation, sampling, exemplar order and baselines.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract syntactic facts from bracketed treebank files or directories.
    Extract {
        #[arg(required = true)]
        treebank: Vec<PathBuf>,
        #[arg(short, long, default_value = "facts.jsonl")]
        out: PathBuf,
    },
    /// Generate TF, MC and FITB questions from extracted facts.
    Generate {
        #[arg(long, default_value = "facts.jsonl")]
        facts: PathBuf,
        /// The treebank the facts were extracted from.
        #[arg(long, required = true, num_args = 1..)]
        treebank: Vec<PathBuf>,
        #[arg(short, long, default_value = "questions.jsonl")]
        out: PathBuf,
    },
    /// Draw a stratified evaluation set and exemplar set.
    Sample {
        #[arg(long, default_value = "questions.jsonl")]
        questions: PathBuf,
        #[arg(long)]
        k_eval: Option<usize>,
        #[arg(long)]
        k_exemplar: Option<usize>,
        /// Directory for eval.jsonl, exemplars.jsonl and manifest.json.
        #[arg(short, long, default_value = "sample")]
        out: PathBuf,
    },
    /// Query one configured endpoint over the evaluation set.
    Run {
        /// Endpoint label from the config file.
        #[arg(long)]
        endpoint: String,
        #[arg(long, default_value = "sample")]
        sample: PathBuf,
        #[arg(long, value_parser = parse_setting)]
        setting: Option<Setting>,
        /// Defaults to runs/<label>.jsonl.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Chance-level answers for the evaluation set.
    Baseline {
        #[arg(long, default_value = "sample")]
        sample: PathBuf,
        #[arg(short, long, default_value = "runs/random.jsonl")]
        out: PathBuf,
    },
    /// Score persisted run records.
    Score {
        #[arg(long, default_value = "sample")]
        sample: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(short, long, default_value = "scoreboard.json")]
        out: PathBuf,
    },
    /// Render scoreboards as text tables and CSV.
    Report {
        /// `label=path` or a path (labelled by its file stem).
        #[arg(required = true)]
        scoreboards: Vec<String>,
        /// Directory for report.txt and report.csv.
        #[arg(short, long, default_value = ".")]
        out: PathBuf,
    },
    /// Per-point counts of a question or fact file.
    Stats {
        #[arg(long, conflicts_with = "facts")]
        questions: Option<PathBuf>,
        #[arg(long)]
        facts: Option<PathBuf>,
    },
    /// Run and score several endpoints in order.
    Series {
        /// Endpoint labels; all configured endpoints when omitted.
        #[arg(long)]
        endpoint: Vec<String>,
        #[arg(long, default_value = "sample")]
        sample: PathBuf,
        #[arg(short, long, default_value = "series")]
        out: PathBuf,
    },
}

fn parse_setting(s: &str) -> Result<Setting, String> {
    match s {
        "zero_shot" | "zero-shot" => Ok(Setting::ZeroShot),
        "few_shot" | "few-shot" => Ok(Setting::FewShot),
        _ => Err(format!("unknown setting {s:?} (zero_shot or few_shot)")),
    }
}

fn treebank(paths: &[PathBuf]) -> Result<Vec<Sentence>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            files.extend(treebank_files_in(p)?);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        bail!("no treebank files found");
    }
    Ok(read_treebank_files(&files)?)
}

fn rules(cfg: &Config) -> Result<PatternRuleSet> {
    match &cfg.patterns {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(compile_pattern(&text).with_context(|| format!("compiling {}", path.display()))?)
        }
        None => Ok(PatternRuleSet::default_rules()),
    }
}

fn templates(cfg: &Config) -> Result<TemplateSet> {
    match &cfg.templates {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(TemplateSet::parse(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => Ok(TemplateSet::default_templates()),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn load_sample(dir: &Path) -> Result<(Vec<Question>, Vec<Question>)> {
    let eval = read_jsonl(&dir.join("eval.jsonl"))?;
    let exemplars_path = dir.join("exemplars.jsonl");
    let exemplars = if exemplars_path.exists() {
        read_jsonl(&exemplars_path)?
    } else {
        Vec::new()
    };
    Ok((eval, exemplars))
}

fn http_completer(endpoint: &synprobe_core::ModelEndpoint) -> Result<Box<dyn Completer>, synprobe_core::runner::RunnerError> {
    Ok(Box::new(HttpCompleter::new(endpoint)?))
}

fn labeled(arg: &str) -> Result<LabeledScoreboard> {
    let (label, path) = match arg.split_once('=') {
        Some((l, p)) => (l.to_string(), PathBuf::from(p)),
        None => {
            let p = PathBuf::from(arg);
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.to_string());
            (stem, p)
        }
    };
    let scoreboard: Scoreboard = read_json(&path)?;
    Ok(LabeledScoreboard { label, scoreboard })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);

    match cli.command {
        Command::Extract { treebank: paths, out } => {
            let sentences = treebank(&paths)?;
            let (facts, stats) = extract_corpus(&sentences, &rules(&cfg)?);
            ensure_parent(&out)?;
            write_jsonl(&out, &facts)?;
            println!(
                "{} sentences, {} facts, {} sentences without facts, {} matches skipped -> {}",
                stats.sentences,
                facts.len(),
                stats.sentences_without_facts,
                stats.skipped.values().sum::<usize>(),
                out.display()
            );
        }
        Command::Generate { facts, treebank: paths, out } => {
            let facts: Vec<SyntacticFact> = read_jsonl(&facts)?;
            let sentences = treebank(&paths)?;
            let (questions, stats) = generate_questions(&facts, &sentences, &templates(&cfg)?, seed)?;
            ensure_parent(&out)?;
            write_jsonl(&out, &questions)?;
            println!(
                "{} questions from {} facts ({} MC and {} TF skipped for lack of distractors) -> {}",
                questions.len(),
                stats.facts,
                stats.mc_skipped.values().sum::<usize>(),
                stats.tf_skipped.values().sum::<usize>(),
                out.display()
            );
        }
        Command::Sample {
            questions,
            k_eval,
            k_exemplar,
            out,
        } => {
            let pool: Vec<Question> = read_jsonl(&questions)?;
            let mut sc = cfg.sample;
            sc.seed = seed;
            if let Some(k) = k_eval {
                sc.k_eval = k;
            }
            if let Some(k) = k_exemplar {
                sc.k_exemplar = k;
            }
            if sc.k_eval == 0 {
                bail!("k_eval must be at least 1");
            }
            let sample = sample_balanced(&pool, &sc);
            sample.write_to(&out)?;
            println!(
                "{} strata: {} eval, {} exemplars -> {}",
                sample.manifest.strata.len(),
                sample.eval.len(),
                sample.exemplars.len(),
                out.display()
            );
        }
        Command::Run {
            endpoint,
            sample,
            setting,
            out,
        } => {
            let ep = cfg.endpoint(&endpoint)?;
            let mut rc = cfg.run.clone();
            if let Some(s) = setting {
                rc.setting = s;
            }
            if cli.seed.is_some() {
                rc.seeds = vec![seed];
            }
            let (eval, exemplars) = load_sample(&sample)?;
            let out = out.unwrap_or_else(|| PathBuf::from("runs").join(format!("{}.jsonl", sanitize(&ep.label))));
            ensure_parent(&out)?;
            let completer = HttpCompleter::new(ep)?;
            let result = run_eval(&completer, ep, &rc, &eval, &exemplars, Some(&out))?;
            let d = &result.diagnostics;
            if d.failures > 0 {
                warn!("{} requests failed after retries", d.failures);
            }
            if d.exemplar_shortfalls > 0 {
                warn!("{} prompts had fewer exemplars than requested", d.exemplar_shortfalls);
            }
            println!(
                "{} records ({} requests, {} retries, {} failures) -> {}",
                result.records.len(),
                d.requests,
                d.retries,
                d.failures,
                out.display()
            );
        }
        Command::Baseline { sample, out } => {
            let (eval, _) = load_sample(&sample)?;
            let records = random_baseline(&eval, seed);
            ensure_parent(&out)?;
            write_jsonl(&out, &records)?;
            println!("{} records -> {}", records.len(), out.display());
        }
        Command::Score { sample, run, out } => {
            let (eval, _) = load_sample(&sample)?;
            let records: Vec<RunRecord> = read_jsonl(&run)?;
            let board = score_runs(&eval, &records)?;
            ensure_parent(&out)?;
            write_json(&out, &board)?;
            let label = run.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            print!(
                "{}",
                main_table(&[LabeledScoreboard {
                    label,
                    scoreboard: board
                }])
            );
        }
        Command::Report { scoreboards, out } => {
            let rows = scoreboards.iter().map(|s| labeled(s)).collect::<Result<Vec<_>>>()?;
            let text = format!("{}\n{}", main_table(&rows), kp_table(&rows));
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            std::fs::write(out.join("report.txt"), &text)?;
            std::fs::write(out.join("report.csv"), scoreboard_csv(&rows))?;
            print!("{text}");
        }
        Command::Stats { questions, facts } => {
            let report = match (questions, facts) {
                (Some(q), _) => dataset_stats(&read_jsonl::<Question>(&q)?),
                (None, Some(f)) => DistributionReport::from_facts(&read_jsonl::<SyntacticFact>(&f)?),
                (None, None) => dataset_stats(&read_jsonl::<Question>(Path::new("questions.jsonl"))?),
            };
            print!("{}", report.to_table());
        }
        Command::Series { endpoint, sample, out } => {
            let endpoints: Vec<_> = if endpoint.is_empty() {
                cfg.endpoints.clone()
            } else {
                endpoint.iter().map(|l| cfg.endpoint(l).cloned()).collect::<Result<_>>()?
            };
            let mut rc = cfg.run.clone();
            if cli.seed.is_some() {
                rc.seeds = vec![seed];
            }
            let (eval, exemplars) = load_sample(&sample)?;
            let runs = out.join("runs");
            std::fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
            let series = checkpoint_series(http_completer, &endpoints, &rc, &eval, &exemplars, Some(&runs))?;
            for c in &series.columns {
                if let Some(e) = &c.error {
                    warn!("{}: {e}", c.label);
                }
            }
            write_json(&out.join("series.json"), &series.columns)?;
            std::fs::write(out.join("series.csv"), &series.csv)?;
            info!("series written to {}", out.display());
            print!("{}", series.csv);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

//! The `vpd` subcommands.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use vpdistill_core::analysis::{
    accuracy_exact, accuracy_vqa, agreement_report, check_program, ngram_entropy, program_accuracy,
    replay_verdicts, AgreementRow, CheckLexicon, Flag, HumanVerdict, MetricsReport, ProgramVerdict, VerdictRow,
};
use vpdistill_core::augment::{augment_stream, AugmentOptions, CategoryLexicon, LinkMode, ReplacementPolicy};
use vpdistill_core::bench::gen_bench;
use vpdistill_core::dataset::{DatasetRecord, ProgramRecord, TrainingPair};
use vpdistill_core::exec::{run_source, ExecOutcome, Limits};
use vpdistill_core::scene::SceneGraph;
use vpdistill_core::teacher::{
    annotate, unsound_entries, AnnotationRunConfig, AnnotationStats, ExamplePool, GenerationConfig,
    HashedEmbedder, OracleTeacher, PoolEntry, TeacherClient, DEFAULT_PROMPT,
};
use vpdistill_core::template::extract;
use vpdistill_core::{parse, print_canonical};

use crate::adapters::{gqa_records, sample, vqav2_records, AnnotatorAnswers};
use crate::config::FileConfig;
use crate::http::HttpTeacher;
use crate::io::{load_scenes, read_jsonl, read_lines, write_json, write_jsonl, write_lines, IoError};
use crate::manifest::RunManifest;
use crate::replay::{load_replay, RecordingTeacher};
use crate::throughput::measure;

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input data or configuration (exit code 1).
    #[error("{0}")]
    Validation(String),
    /// Unreadable or unwritable files, or an unreachable teacher (exit
    /// code 2).
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_schema() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<crate::config::ConfigFileError> for CliError {
    fn from(e: crate::config::ConfigFileError) -> Self {
        match e {
            crate::config::ConfigFileError::Read { .. } => CliError::Io(e.to_string()),
            crate::config::ConfigFileError::Parse { .. } => CliError::Validation(e.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "vpd", version, about = "Distill visual programs from question/answer data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice the stage makes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Sampling {
    /// Keep this fraction of the input records (seeded, uniform).
    #[arg(long)]
    pub fraction: Option<f64>,
    /// Keep exactly this many input records; wins over --fraction.
    #[arg(long)]
    pub sample_n: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic benchmark: scenes, questions, gold programs.
    GenBench(GenBenchArgs),
    /// Annotate questions with teacher programs validated by execution.
    Annotate(AnnotateArgs),
    /// Extract templates and argument bindings from programs.
    Extract(ExtractArgs),
    /// Add template-based augmentations to a set of (question, program) records.
    Augment(AugmentArgs),
    /// Execute programs against scenes.
    Exec(ExecArgs),
    /// Compute evaluation metrics for student programs.
    Eval(EvalArgs),
    /// Flag programs with static and heuristic checks and record human verdicts.
    Review(ReviewArgs),
    /// Write {question, program} training rows.
    ExportTrain(ExportArgs),
    /// Convert GQA or VQAv2 question files into dataset records.
    Ingest(IngestArgs),
}

#[derive(Args, Debug)]
pub struct GenBenchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n_scenes: Option<usize>,
    #[arg(long)]
    pub questions_per_scene: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TeacherKind {
    /// Simulated teacher that knows the gold programs.
    Oracle,
    /// Recorded completions from a replay file.
    Replay,
    /// Live endpoint from VPD_TEACHER_URL.
    Http,
}

#[derive(Args, Debug)]
pub struct AnnotateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampling: Sampling,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub scenes: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    pub teacher: TeacherKind,
    /// Gold programs {id, program} for the oracle teacher.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Replay file {question, completion}.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    /// Existing pool to start from.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Number of in-context examples retrieved per question.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub max_questions: Option<usize>,
    /// Also write every completion as a replay file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    /// Records with question and program fields.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: PathBuf,
    /// Augmented pairs per record.
    #[arg(long)]
    pub k: Option<usize>,
    /// Replacement probability per argument.
    #[arg(long)]
    pub p: Option<f64>,
    /// Lexicon file in `category<TAB>word,word` format.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Decide each argument independently instead of per equal-value group.
    #[arg(long)]
    pub independent: bool,
}

#[derive(Args, Debug)]
pub struct ExecArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenes: PathBuf,
    /// Programs {id, program}.
    #[arg(long, required_unless_present = "source")]
    pub programs: Option<PathBuf>,
    /// Dataset giving each id its scene and gold answer.
    #[arg(long, requires = "programs")]
    pub dataset: Option<PathBuf>,
    /// A single program to run on --scene-id.
    #[arg(long, requires = "scene_id")]
    pub source: Option<String>,
    #[arg(long)]
    pub scene_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Scenes; execution metrics are skipped without them.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Student programs {id, program}.
    #[arg(long)]
    pub student: PathBuf,
    /// Teacher programs {id, program}, e.g. the validated annotation output.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    /// Annotator answers {id, answers}.
    #[arg(long)]
    pub annotators: Option<PathBuf>,
    /// Verdict log from `review`.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Question corpus for n-gram entropy; defaults to the dataset.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub ngram: Option<usize>,
    /// Measure generation speed of a student served at this URL.
    #[arg(long)]
    pub throughput_url: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReviewArgs {
    #[command(flatten)]
    pub common: Common,
    /// Records {id, question, program}.
    #[arg(long)]
    pub programs: PathBuf,
    /// Existing verdict log to extend.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Human verdicts {record_id, correct, flags, annotator, timestamp}.
    #[arg(long)]
    pub human: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub input: Vec<PathBuf>,
    /// Drop records whose program does not parse instead of failing.
    #[arg(long)]
    pub skip_invalid: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum IngestFormat {
    Gqa,
    Vqav2,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampling: Sampling,
    #[arg(long, value_enum)]
    pub format: IngestFormat,
    #[arg(long)]
    pub questions: PathBuf,
    /// VQAv2 annotation file.
    #[arg(long, required_if_eq("format", "vqav2"))]
    pub annotations: Option<PathBuf>,
    /// Where to write annotator answers for VQAv2.
    #[arg(long)]
    pub annotators_out: Option<PathBuf>,
    #[arg(long, default_value = "train")]
    pub split: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenBench(a) => gen_bench_cmd(a),
        Command::Annotate(a) => annotate_cmd(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Augment(a) => augment_cmd(a),
        Command::Exec(a) => exec_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Review(a) => review_cmd(a),
        Command::ExportTrain(a) => export_cmd(a),
        Command::Ingest(a) => ingest_cmd(a),
    }
}

fn load_config(common: &Common) -> Result<(FileConfig, u64)> {
    let config = FileConfig::load(common.config.as_deref())?;
    let seed = common.seed.or(config.seed).unwrap_or(0);
    Ok((config, seed))
}

fn scene_map(path: &Path) -> Result<BTreeMap<String, SceneGraph>> {
    let mut map = BTreeMap::new();
    for scene in load_scenes(path)? {
        let id = scene.scene_id.clone();
        if map.insert(id.clone(), scene).is_some() {
            return Err(CliError::Validation(format!("{}: duplicate scene_id {id:?}", path.display())));
        }
    }
    Ok(map)
}

fn unique_ids<'a>(path: &Path, ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CliError::Validation(format!("{}: duplicate id {id:?}", path.display())));
        }
    }
    Ok(())
}

fn gen_bench_cmd(args: GenBenchArgs) -> Result<()> {
    let (config, seed) = load_config(&args.common)?;
    let mut bench_config = config.bench;
    bench_config.seed = seed;
    if let Some(n) = args.n_scenes {
        bench_config.n_scenes = n;
    }
    if let Some(n) = args.questions_per_scene {
        bench_config.questions_per_scene = n;
    }
    let bench = gen_bench(&bench_config).map_err(|e| CliError::Validation(e.to_string()))?;
    let out = &args.common.out;
    write_jsonl(&out.join("scenes.jsonl"), &bench.scenes)?;
    write_jsonl(&out.join("dataset.jsonl"), &bench.records())?;
    write_jsonl(&out.join("gold_programs.jsonl"), &bench.gold_programs())?;
    #[derive(Serialize)]
    struct QueryRow<'a> {
        id: &'a str,
        query: &'a vpdistill_core::bench::Query,
    }
    let queries: Vec<QueryRow> = bench
        .questions
        .iter()
        .map(|q| QueryRow {
            id: &q.record.id,
            query: &q.query,
        })
        .collect();
    write_jsonl(&out.join("queries.jsonl"), &queries)?;
    let mut manifest = RunManifest::new("gen-bench", seed, &bench_config);
    manifest
        .count("scenes", bench.scenes.len())
        .count("questions", bench.questions.len());
    manifest.write_for(out)?;
    info!("wrote {} scenes and {} questions", bench.scenes.len(), bench.questions.len());
    Ok(())
}

/// Counts written next to the annotation outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct AnnotateSummary {
    #[serde(flatten)]
    pub stats: AnnotationStats,
    pub pool_size: usize,
    pub unsound_pool_entries: usize,
    pub manifest_hash: String,
}

fn annotate_cmd(args: AnnotateArgs) -> Result<()> {
    let (config, seed) = load_config(&args.common)?;
    let all: Vec<DatasetRecord> = read_jsonl(&args.dataset)?;
    unique_ids(&args.dataset, all.iter().map(|r| r.id.as_str()))?;
    let records = sample(&all, args.sampling.fraction, args.sampling.sample_n, seed);
    let scenes = scene_map(&args.scenes)?;
    for r in &records {
        if !scenes.contains_key(&r.scene_id) {
            warn!("record {}: scene {:?} not found", r.id, r.scene_id);
        }
    }
    let prompt_template = match &config.annotate.prompt_template {
        Some(path) => std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => DEFAULT_PROMPT.to_owned(),
    };
    let run_config = AnnotationRunConfig {
        retrieval_k: args.k.unwrap_or(config.annotate.retrieval_k),
        max_questions: args.max_questions.or(config.annotate.max_questions),
        seed,
        prompt_template,
        max_retries: config.annotate.max_retries,
        step_budget: config.annotate.step_budget,
    };
    let teacher: Box<dyn TeacherClient> = match args.teacher {
        TeacherKind::Oracle => {
            let gold_path = args
                .gold
                .as_ref()
                .ok_or_else(|| CliError::Validation("--teacher oracle needs --gold".into()))?;
            let gold: Vec<ProgramRecord> = read_jsonl(gold_path)?;
            let questions: BTreeMap<&str, &str> = all.iter().map(|r| (r.id.as_str(), r.question.as_str())).collect();
            let mut bank = Vec::with_capacity(gold.len());
            for g in gold {
                let q = questions.get(g.id.as_str()).ok_or_else(|| {
                    CliError::Validation(format!("gold program {:?} has no dataset record", g.id))
                })?;
                bank.push(((*q).to_owned(), g.program));
            }
            Box::new(OracleTeacher::new(bank, seed))
        }
        TeacherKind::Replay => {
            let path = args
                .replay
                .as_ref()
                .ok_or_else(|| CliError::Validation("--teacher replay needs --replay".into()))?;
            Box::new(load_replay(path)?)
        }
        TeacherKind::Http => Box::new(
            HttpTeacher::from_env(GenerationConfig::default()).map_err(|e| CliError::Io(e.to_string()))?,
        ),
    };
    let mut teacher = RecordingTeacher::new(teacher);
    let embedder = HashedEmbedder::default();
    let mut pool = match &args.pool {
        Some(path) => ExamplePool::from_entries(read_jsonl::<PoolEntry>(path)?, &embedder),
        None => ExamplePool::new(),
    };
    let report = annotate(&records, &scenes, &mut teacher, &embedder, &mut pool, &run_config);
    let unsound = unsound_entries(&pool, &scenes, Limits {
        step_budget: run_config.step_budget,
    })
    .len();

    let out = &args.common.out;
    write_jsonl(&out.join("validated.jsonl"), &report.validated)?;
    write_jsonl(&out.join("pool.jsonl"), pool.entries())?;
    write_jsonl(&out.join("log.jsonl"), &report.log)?;
    if let Some(path) = &args.record {
        write_jsonl(path, &teacher.records)?;
    }
    let mut manifest = RunManifest::new("annotate", seed, &(&run_config, args.teacher as u8));
    manifest.input(&args.dataset)?.input(&args.scenes)?;
    for path in [&args.gold, &args.replay, &args.pool].into_iter().flatten() {
        manifest.input(path)?;
    }
    manifest
        .count("processed", report.stats.processed)
        .count("validated", report.stats.validated)
        .count("discarded", report.stats.discarded)
        .count("transport_errors", report.stats.transport_errors);
    let manifest_hash = manifest.write_for(out)?;
    let transport_errors = report.stats.transport_errors;
    let summary = AnnotateSummary {
        stats: report.stats,
        pool_size: pool.len(),
        unsound_pool_entries: unsound,
        manifest_hash,
    };
    write_json(&out.join("stats.json"), &summary)?;
    info!(
        "validated {} of {} ({:.1}%)",
        summary.stats.validated,
        summary.stats.processed,
        100.0 * summary.stats.validation_rate
    );
    if transport_errors > 0 {
        return Err(CliError::Io(format!("{transport_errors} teacher calls failed")));
    }
    Ok(())
}

/// Any record carrying a question and a program.
#[derive(Debug, Clone, Deserialize)]
struct QuestionProgram {
    #[serde(default)]
    id: Option<String>,
    question: String,
    program: String,
}

fn read_question_programs(path: &Path) -> Result<Vec<(String, QuestionProgram, String)>> {
    let mut out = Vec::new();
    for (line, text) in read_lines(path)? {
        let record: QuestionProgram = serde_json::from_str(&text).map_err(|e| IoError::Schema {
            path: path.to_owned(),
            line,
            message: e.to_string(),
        })?;
        let id = record.id.clone().unwrap_or_else(|| format!("line{line}"));
        out.push((id, record, text));
    }
    Ok(out)
}

#[derive(Serialize)]
struct BindingRow<'a> {
    id: &'a str,
    question: &'a str,
    template_id: String,
    args: &'a [String],
    link_groups: &'a [Vec<usize>],
}

fn extract_cmd(args: ExtractArgs) -> Result<()> {
    let rows = read_question_programs(&args.input)?;
    let mut templates = Vec::new();
    let mut seen = BTreeSet::new();
    let mut extracted = Vec::with_capacity(rows.len());
    for (id, row, _) in &rows {
        let record = extract(&row.question, &row.program)
            .map_err(|e| CliError::Validation(format!("record {id:?}: {e}")))?;
        if seen.insert(record.template.id()) {
            templates.push(record.template.to_record());
        }
        extracted.push((id, record));
    }
    let bindings: Vec<BindingRow> = extracted
        .iter()
        .map(|(id, r)| BindingRow {
            id,
            question: &r.question,
            template_id: r.template.id(),
            args: &r.args.values,
            link_groups: &r.args.link_groups,
        })
        .collect();
    let out = &args.common.out;
    write_jsonl(&out.join("templates.jsonl"), &templates)?;
    write_jsonl(&out.join("bindings.jsonl"), &bindings)?;
    let mut manifest = RunManifest::new("extract", 0, &());
    manifest
        .input(&args.input)?
        .count("records", rows.len())
        .count("templates", templates.len());
    manifest.write_for(out)?;
    info!("{} records use {} templates", rows.len(), templates.len());
    Ok(())
}

fn augment_cmd(args: AugmentArgs) -> Result<()> {
    let (config, seed) = load_config(&args.common)?;
    let section = config.augment;
    let lexicon = match args.lexicon.as_ref().or(section.lexicon.as_ref()) {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let (lexicon, warnings) =
                CategoryLexicon::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            for w in warnings {
                warn!("{}:{}: {}", path.display(), w.line, w.message);
            }
            lexicon
        }
        None => CategoryLexicon::builtin(),
    };
    let policy = ReplacementPolicy {
        probability: args.p.unwrap_or(section.probability),
        seed,
        link_mode: if args.independent {
            LinkMode::Independent
        } else {
            section.link_mode
        },
        question_detached_mode: section.question_detached_mode,
    };
    policy.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let k = args.k.unwrap_or(section.k);

    let rows = read_question_programs(&args.input)?;
    unique_ids(&args.input, rows.iter().map(|(id, _, _)| id.as_str()))?;
    let mut records = Vec::with_capacity(rows.len());
    for (id, row, _) in &rows {
        let record = extract(&row.question, &row.program)
            .map_err(|e| CliError::Validation(format!("record {id:?}: {e}")))?;
        records.push(record.with_source(id.clone()));
    }
    let mut options = AugmentOptions::new(k, &lexicon, policy);
    options.retries_per_pair = section.retries_per_pair;
    let (pairs, stats) = augment_stream(&records, &options);

    // Source lines pass through untouched; augmentations follow.
    let mut lines: Vec<String> = rows.iter().map(|(_, _, text)| text.clone()).collect();
    lines.extend(pairs.iter().map(|p| serde_json::to_string(p).expect("pairs serialize")));
    write_lines(&args.common.out, lines.iter().map(String::as_str))?;

    let mut manifest = RunManifest::new("augment", seed, &(k, &policy, section.retries_per_pair));
    manifest
        .input(&args.input)?
        .count("records", rows.len())
        .count("augmented", pairs.len())
        .count("detached_dropped", stats.detached_dropped)
        .count("duplicates", stats.duplicates);
    manifest.write_for(&args.common.out)?;
    info!("{} records, {} augmented pairs", rows.len(), pairs.len());
    Ok(())
}

/// One executed program.
#[derive(Debug, Serialize, Deserialize)]
pub struct ExecRow {
    pub id: String,
    pub scene_id: String,
    #[serde(flatten)]
    pub outcome: ExecOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

fn exec_cmd(args: ExecArgs) -> Result<()> {
    let scenes = scene_map(&args.scenes)?;
    let limits = Limits::default();
    let mut rows = Vec::new();
    if let Some(source) = &args.source {
        let scene_id = args.scene_id.clone().unwrap_or_default();
        let scene = scenes
            .get(&scene_id)
            .ok_or_else(|| CliError::Validation(format!("unknown scene {scene_id:?}")))?;
        rows.push(ExecRow {
            id: "source".into(),
            scene_id,
            outcome: run_source(source, scene, limits),
            correct: None,
        });
    } else if let Some(path) = &args.programs {
        let programs: Vec<ProgramRecord> = read_jsonl(path)?;
        let dataset: BTreeMap<String, DatasetRecord> = match &args.dataset {
            Some(d) => read_jsonl::<DatasetRecord>(d)?
                .into_iter()
                .map(|r| (r.id.clone(), r))
                .collect(),
            None => BTreeMap::new(),
        };
        for p in programs {
            let record = dataset.get(&p.id);
            let scene_id = match (record, &args.scene_id) {
                (Some(r), _) => r.scene_id.clone(),
                (None, Some(s)) => s.clone(),
                (None, None) => {
                    return Err(CliError::Validation(format!(
                        "record {:?}: no dataset entry and no --scene-id",
                        p.id
                    )))
                }
            };
            let scene = scenes
                .get(&scene_id)
                .ok_or_else(|| CliError::Validation(format!("record {:?}: unknown scene {scene_id:?}", p.id)))?;
            let outcome = run_source(&p.program, scene, limits);
            let correct = record.map(|r| outcome.matches(&r.answer));
            rows.push(ExecRow {
                id: p.id,
                scene_id,
                outcome,
                correct,
            });
        }
    }
    write_jsonl(&args.common.out, &rows)?;
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let (config, seed) = load_config(&args.common)?;
    let dataset: Vec<DatasetRecord> = read_jsonl(&args.dataset)?;
    unique_ids(&args.dataset, dataset.iter().map(|r| r.id.as_str()))?;
    let student: BTreeMap<String, String> = read_jsonl::<ProgramRecord>(&args.student)?
        .into_iter()
        .map(|p| (p.id, p.program))
        .collect();
    let teacher: Option<BTreeMap<String, String>> = match &args.teacher {
        Some(path) => Some(
            read_jsonl::<ProgramRecord>(path)?
                .into_iter()
                .map(|p| (p.id, p.program))
                .collect(),
        ),
        None => None,
    };
    let scenes = match &args.scenes {
        Some(path) => Some(scene_map(path)?),
        None => None,
    };
    let limits = Limits::default();
    let ngram_n = args.ngram.unwrap_or(config.eval.ngram_n);
    let mut report = MetricsReport {
        records: dataset.len(),
        ngram_n,
        ..MetricsReport::default()
    };

    let mut predictions = Vec::new();
    let mut gold = Vec::new();
    if let Some(scenes) = &scenes {
        for r in &dataset {
            let prediction = match (student.get(&r.id), scenes.get(&r.scene_id)) {
                (Some(p), Some(s)) => run_source(p, s, limits).answer().map(str::to_owned),
                _ => None,
            };
            // A missing or failing program never matches.
            predictions.push(prediction.unwrap_or_else(|| "\u{0}".to_owned()));
            gold.push(r.answer.clone());
        }
        report.answer_accuracy = Some(accuracy_exact(&predictions, &gold));
        if let Some(teacher) = &teacher {
            let rows: Vec<AgreementRow> = dataset
                .iter()
                .filter_map(|r| {
                    Some(AgreementRow {
                        student: student.get(&r.id).map_or("", String::as_str),
                        teacher: teacher.get(&r.id)?,
                        scene: scenes.get(&r.scene_id)?,
                        gold: &r.answer,
                    })
                })
                .collect();
            let (agreement, joint) = agreement_report(rows, limits);
            if joint > agreement {
                return Err(CliError::Validation(format!(
                    "joint accuracy {joint} exceeds agreement {agreement}"
                )));
            }
            report.student_teacher_agreement = Some(agreement);
            report.joint_accuracy = Some(joint);
        }
        if let Some(path) = &args.annotators {
            let answers: BTreeMap<String, Vec<String>> = read_jsonl::<AnnotatorAnswers>(path)?
                .into_iter()
                .map(|a| (a.id, a.answers))
                .collect();
            let scores: Vec<f64> = dataset
                .iter()
                .zip(&predictions)
                .filter_map(|(r, p)| answers.get(&r.id).map(|a| accuracy_vqa(p, a)))
                .collect();
            if !scores.is_empty() {
                report.vqa_agreement_accuracy = Some(scores.iter().sum::<f64>() / scores.len() as f64);
            }
        }
    } else {
        info!("no scenes given; skipping execution-based metrics");
    }

    if let Some(path) = &args.verdicts {
        let rows: Vec<VerdictRow> = read_jsonl(path)?;
        let verdicts = replay_verdicts(&rows);
        let (accuracy, reviewed) = program_accuracy(verdicts.values());
        report.programs_reviewed = reviewed;
        if reviewed > 0 {
            report.program_accuracy = Some(accuracy);
        }
    }

    let corpus: Vec<String> = match &args.corpus {
        Some(path) => read_question_programs(path)?
            .into_iter()
            .map(|(_, r, _)| r.question)
            .collect(),
        None => dataset.iter().map(|r| r.question.clone()).collect(),
    };
    report.ngram_entropy = ngram_entropy(&corpus, ngram_n);

    if let Some(url) = &args.throughput_url {
        let mut client = HttpTeacher::new(url.clone(), std::env::var(crate::http::TOKEN_ENV).ok(), GenerationConfig::default());
        let questions: Vec<&str> = dataset.iter().map(|r| r.question.as_str()).collect();
        let mut failures = 0usize;
        let t = measure(&questions, config.eval.throughput_warmup, |q| {
            if client.generate(q).is_err() {
                failures += 1;
            }
        });
        if failures > 0 {
            return Err(CliError::Io(format!("{failures} generation requests failed")));
        }
        match t {
            Some(t) => {
                report.throughput_qps = Some(t.questions_per_second);
                report.throughput_sample = Some(t.sample);
            }
            None => warn!("throughput needs at least 100 timed questions"),
        }
    }

    report.check_bounds().map_err(CliError::Validation)?;
    let mut manifest = RunManifest::new("eval", seed, &(ngram_n,));
    manifest.input(&args.dataset)?.input(&args.student)?;
    for path in [&args.scenes, &args.teacher, &args.annotators, &args.verdicts, &args.corpus]
        .into_iter()
        .flatten()
    {
        manifest.input(path)?;
    }
    manifest.count("records", dataset.len());
    report.manifest_hash = Some(manifest.write_for(&args.common.out)?);
    write_json(&args.common.out, &report)?;
    Ok(())
}

/// One line of a human verdict file.
#[derive(Debug, Clone, Deserialize)]
struct HumanRow {
    record_id: String,
    correct: bool,
    #[serde(default)]
    flags: Vec<Flag>,
    annotator: String,
    #[serde(default)]
    timestamp: u64,
}

fn review_cmd(args: ReviewArgs) -> Result<()> {
    let programs = read_question_programs(&args.programs)?;
    unique_ids(&args.programs, programs.iter().map(|(id, _, _)| id.as_str()))?;
    let mut rows: Vec<VerdictRow> = match &args.verdicts {
        Some(path) if path.exists() => read_jsonl(path)?,
        _ => Vec::new(),
    };
    let mut verdicts = replay_verdicts(&rows);
    let lexicon = CheckLexicon::default();
    for (id, record, _) in &programs {
        if verdicts.contains_key(id) {
            continue;
        }
        let (static_flags, heuristic_flags) = check_program(&record.question, &record.program, &lexicon);
        let verdict = ProgramVerdict::from_checks(id, &static_flags, &heuristic_flags);
        rows.extend(verdict.check_rows());
        verdicts.insert(id.clone(), verdict);
    }
    if let Some(path) = &args.human {
        for human in read_jsonl::<HumanRow>(path)? {
            let verdict = verdicts.get_mut(&human.record_id).ok_or_else(|| {
                CliError::Validation(format!("human verdict for unknown record {:?}", human.record_id))
            })?;
            let row = verdict
                .record_human(&HumanVerdict {
                    correct: human.correct,
                    flags: human.flags,
                    annotator: human.annotator,
                    timestamp: human.timestamp,
                })
                .map_err(|e| CliError::Validation(e.to_string()))?;
            rows.push(row);
        }
    }
    write_jsonl(&args.common.out, &rows)?;
    let mut finals: BTreeMap<String, usize> = BTreeMap::new();
    for v in verdicts.values() {
        *finals
            .entry(format!("{:?}", v.final_verdict).to_lowercase())
            .or_default() += 1;
    }
    info!("verdicts: {finals:?}");
    Ok(())
}

fn export_cmd(args: ExportArgs) -> Result<()> {
    if args.input.is_empty() {
        return Err(CliError::Validation("export-train needs at least one --input".into()));
    }
    let mut pairs = Vec::new();
    let mut skipped = 0usize;
    for path in &args.input {
        for (id, record, _) in read_question_programs(path)? {
            match parse(&record.program) {
                Ok(program) => pairs.push(TrainingPair {
                    question: record.question,
                    program: print_canonical(&program),
                }),
                Err(e) if args.skip_invalid => {
                    warn!("record {id:?}: {e}");
                    skipped += 1;
                }
                Err(e) => return Err(CliError::Validation(format!("record {id:?}: program does not parse: {e}"))),
            }
        }
    }
    write_jsonl(&args.common.out, &pairs)?;
    let mut manifest = RunManifest::new("export-train", 0, &args.skip_invalid);
    for path in &args.input {
        manifest.input(path)?;
    }
    manifest.count("rows", pairs.len()).count("skipped", skipped);
    manifest.write_for(&args.common.out)?;
    info!("exported {} rows", pairs.len());
    Ok(())
}

fn ingest_cmd(args: IngestArgs) -> Result<()> {
    let (_, seed) = load_config(&args.common)?;
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())));
    let questions = read(&args.questions)?;
    let (records, answers) = match args.format {
        IngestFormat::Gqa => (
            gqa_records(&questions, &args.split).map_err(|e| CliError::Validation(e.to_string()))?,
            None,
        ),
        IngestFormat::Vqav2 => {
            let path = args
                .annotations
                .as_ref()
                .ok_or_else(|| CliError::Validation("--format vqav2 needs --annotations".into()))?;
            let (r, a) = vqav2_records(&questions, &read(path)?, &args.split)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            (r, Some(a))
        }
    };
    let keep: Vec<usize> = sample(
        &(0..records.len()).collect::<Vec<_>>(),
        args.sampling.fraction,
        args.sampling.sample_n,
        seed,
    );
    let records: Vec<&DatasetRecord> = keep.iter().map(|&i| &records[i]).collect();
    write_jsonl(&args.common.out, records.iter().copied())?;
    if let (Some(answers), Some(path)) = (&answers, &args.annotators_out) {
        write_jsonl(path, keep.iter().map(|&i| &answers[i]))?;
    }
    let mut manifest = RunManifest::new("ingest", seed, &(args.split.as_str(), args.sampling.fraction, args.sampling.sample_n));
    manifest.input(&args.questions)?;
    if let Some(path) = &args.annotations {
        manifest.input(path)?;
    }
    manifest.count("records", records.len());
    manifest.write_for(&args.common.out)?;
    Ok(())
}


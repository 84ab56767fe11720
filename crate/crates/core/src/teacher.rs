//! Auto-context annotation: retrieve validated examples, prompt a teacher,
//! execute its program, and keep it only if the answer is right.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Expr, Stmt};
use crate::dataset::{DatasetRecord, ValidatedRecord};
use crate::exec::{run_source, ExecOutcome, Limits};
use crate::parser::parse;
use crate::printer::{print_canonical, print_expr};
use crate::scene::SceneGraph;
use crate::slots::rewrite_slots;
use crate::template::extract_program;
use crate::text::{normalize_answer, seed_for, word_tokens};

/// Sampling settings forwarded to a teacher endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub max_tokens: u32,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.0,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            max_tokens: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("teacher transport failure: {message}")]
pub struct TransportError {
    pub message: String,
}

impl TransportError {
    pub fn new(message: impl Into<String>) -> Self {
        TransportError {
            message: message.into(),
        }
    }
}

/// A program generator. Failures are reported, never an empty completion.
pub trait TeacherClient {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError>;
}

impl<T: TeacherClient + ?Sized> TeacherClient for Box<T> {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError> {
        (**self).generate(prompt)
    }
}

pub trait Embedder {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Bag-of-words vector: each lowercased token is hashed into one of `dim`
/// buckets, then the vector is L2-normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HashedEmbedder {
    pub dim: usize,
}

impl Default for HashedEmbedder {
    fn default() -> Self {
        HashedEmbedder { dim: 512 }
    }
}

fn bucket(bytes: &[u8], dim: usize) -> usize {
    let mut h = FnvHasher::default();
    h.write(bytes);
    (h.finish() % dim as u64) as usize
}

impl Embedder for HashedEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let dim = self.dim.max(1);
        let mut v = alloc::vec![0.0; dim];
        let tokens = word_tokens(text);
        if tokens.is_empty() {
            if !text.is_empty() {
                v[bucket(text.as_bytes(), dim)] = 1.0;
            }
            return v;
        }
        for token in &tokens {
            v[bucket(token.as_bytes(), dim)] += 1.0;
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }
}

/// Cosine similarity; zero vectors score 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub question: String,
    pub program: String,
    pub inserted_at_index: usize,
    #[serde(default)]
    pub scene_id: String,
    #[serde(default)]
    pub answer: String,
    #[serde(skip)]
    pub embedding: Vec<f64>,
}

/// Append-only store of validated examples. Identical (question, program)
/// pairs are stored once.
#[derive(Clone, Debug, Default)]
pub struct ExamplePool {
    entries: Vec<PoolEntry>,
    keys: BTreeSet<(String, String)>,
}

impl ExamplePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Returns false when the pair is already present.
    pub fn push(
        &mut self,
        question: &str,
        program: &str,
        scene_id: &str,
        answer: &str,
        embedder: &dyn Embedder,
    ) -> bool {
        if !self.keys.insert((question.to_owned(), program.to_owned())) {
            return false;
        }
        self.entries.push(PoolEntry {
            question: question.to_owned(),
            program: program.to_owned(),
            inserted_at_index: self.entries.len(),
            scene_id: scene_id.to_owned(),
            answer: answer.to_owned(),
            embedding: embedder.embed(question),
        });
        true
    }

    /// Rebuilds a pool from stored entries, recomputing embeddings.
    pub fn from_entries(entries: Vec<PoolEntry>, embedder: &dyn Embedder) -> Self {
        let mut pool = ExamplePool::new();
        for e in entries {
            pool.push(&e.question, &e.program, &e.scene_id, &e.answer, embedder);
        }
        pool
    }
}

/// Pass-through when the pool holds at most `k` entries; otherwise the `k`
/// most similar entries, most similar first, earlier insertions winning ties.
pub fn retrieve<'p>(
    question: &str,
    pool: &'p ExamplePool,
    k: usize,
    embedder: &dyn Embedder,
) -> Vec<&'p PoolEntry> {
    if pool.len() <= k {
        return pool.entries.iter().collect();
    }
    let query = embedder.embed(question);
    let mut scored: Vec<(f64, usize)> = pool
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (cosine(&query, &e.embedding), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored
        .into_iter()
        .take(k)
        .map(|(_, i)| &pool.entries[i])
        .collect()
}

pub const EXAMPLES_SLOT: &str = "{examples}";
pub const QUESTION_SLOT: &str = "{question}";

pub const DEFAULT_PROMPT: &str = "\
Write a program that answers the question about an image.
`image_patch = ImagePatch(image)` is already available.
The program must assign a string to `answer` on its last line.
Reply with the program only, without comments or function definitions.

ImagePatch fields: left, lower, right, upper (int borders of the box)
ImagePatch methods:
  find(object_name) -> list of ImagePatch
  crop_position(direction, reference_patch) -> ImagePatch
      direction is one of left, right, above, below, on, in front, behind, next to, near
  verify_property(property) -> bool
  classify(category_or_options) -> str   (never 'object')
  simple_query(question) -> str
Functions:
  filter_img(patches, criteria) -> list of ImagePatch
  choose_relationship(patch1, patch2, options_list) -> str
  verify_relationship(patch1, patch2, relationship) -> str   ('yes' or 'no')
  exists(patches) -> bool
  count(patches) -> int
  bool_to_yesno(value) -> str
  len, str

Examples:

{examples}Question: {question}
Program:
";

pub fn render_example(question: &str, program: &str) -> String {
    format!("Question: {question}\nProgram:\n{program}\n\n")
}

/// Fills `{examples}` and `{question}` in a single pass. Templates without a
/// `{question}` slot get the query block appended.
pub fn assemble_prompt(question: &str, retrieved: &[&PoolEntry], template: &str) -> String {
    let examples: String = retrieved
        .iter()
        .map(|e| render_example(&e.question, &e.program))
        .collect();
    let mut out = String::with_capacity(template.len() + examples.len() + question.len());
    let mut rest = template;
    let mut asked = false;
    loop {
        let next = [EXAMPLES_SLOT, QUESTION_SLOT]
            .iter()
            .filter_map(|slot| rest.find(slot).map(|at| (at, *slot)))
            .min();
        let Some((at, slot)) = next else {
            out.push_str(rest);
            break;
        };
        out.push_str(&rest[..at]);
        if slot == EXAMPLES_SLOT {
            out.push_str(&examples);
        } else {
            out.push_str(question);
            asked = true;
        }
        rest = &rest[at + slot.len()..];
    }
    if !asked {
        if !out.is_empty() && !out.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&format!("Question: {question}\nProgram:\n"));
    }
    out
}

/// `(question, program)` blocks of a prompt; the final block is the query
/// and has an empty program.
pub fn prompt_blocks(prompt: &str) -> Vec<(String, String)> {
    let lines: Vec<&str> = prompt.lines().collect();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let Some(question) = lines[i].strip_prefix("Question: ") else {
            i += 1;
            continue;
        };
        if lines.get(i + 1) != Some(&"Program:") {
            i += 1;
            continue;
        }
        let mut j = i + 2;
        let mut program = Vec::new();
        while j < lines.len() && !lines[j].is_empty() {
            program.push(lines[j]);
            j += 1;
        }
        blocks.push((question.to_owned(), program.join("\n")));
        i = j;
    }
    blocks
}

/// The question a prompt asks about.
pub fn prompt_question(prompt: &str) -> Option<String> {
    prompt_blocks(prompt).pop().map(|(q, _)| q)
}

/// Strips Markdown code fences and surrounding blank lines.
pub fn clean_completion(completion: &str) -> String {
    let mut text = completion.trim();
    if let Some(rest) = text.strip_prefix("```") {
        text = rest.split_once('\n').map_or("", |(_, body)| body);
        if let Some(body) = text.trim_end().strip_suffix("```") {
            text = body;
        }
    }
    text.trim_matches('\n').trim_end().to_owned()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRunConfig {
    pub retrieval_k: usize,
    pub max_questions: Option<usize>,
    pub seed: u64,
    pub prompt_template: String,
    /// Extra attempts after a transport failure.
    pub max_retries: usize,
    pub step_budget: u64,
}

impl Default for AnnotationRunConfig {
    fn default() -> Self {
        AnnotationRunConfig {
            retrieval_k: 50,
            max_questions: None,
            seed: 0,
            prompt_template: DEFAULT_PROMPT.to_owned(),
            max_retries: 2,
            step_budget: Limits::default().step_budget,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disposition {
    Validated,
    Discarded,
    TransportError,
}

/// What happened to one record during annotation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLog {
    pub index: usize,
    pub id: String,
    pub disposition: Disposition,
    /// Failure kind, `WrongAnswer`, `MissingScene`, or the transport message.
    pub reason: Option<String>,
    pub program: Option<String>,
    pub predicted: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationStats {
    pub processed: usize,
    pub validated: usize,
    pub discarded: usize,
    pub transport_errors: usize,
    pub duplicates: usize,
    pub validation_rate: f64,
    pub discard_reasons: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default)]
pub struct AnnotationReport {
    pub validated: Vec<ValidatedRecord>,
    pub log: Vec<AnnotationLog>,
    pub stats: AnnotationStats,
}

/// Canonical form of a teacher completion, or the cleaned text if it does
/// not parse.
fn canonical_program(completion: &str) -> String {
    let cleaned = clean_completion(completion);
    match parse(&cleaned) {
        Ok(p) => print_canonical(&p),
        Err(_) => cleaned,
    }
}

/// Runs the annotation loop over `records` in order, growing `pool`.
pub fn annotate(
    records: &[DatasetRecord],
    scenes: &BTreeMap<String, SceneGraph>,
    teacher: &mut dyn TeacherClient,
    embedder: &dyn Embedder,
    pool: &mut ExamplePool,
    config: &AnnotationRunConfig,
) -> AnnotationReport {
    let mut report = AnnotationReport::default();
    let limits = Limits {
        step_budget: config.step_budget,
    };
    let take = config.max_questions.unwrap_or(records.len());
    for (index, record) in records.iter().take(take).enumerate() {
        report.stats.processed += 1;
        let retrieved = retrieve(&record.question, pool, config.retrieval_k, embedder);
        let prompt = assemble_prompt(&record.question, &retrieved, &config.prompt_template);
        let mut completion = Err(TransportError::new("no attempt made"));
        for _ in 0..=config.max_retries {
            completion = teacher.generate(&prompt);
            if completion.is_ok() {
                break;
            }
        }
        let mut log = AnnotationLog {
            index,
            id: record.id.clone(),
            disposition: Disposition::Discarded,
            reason: None,
            program: None,
            predicted: None,
        };
        let completion = match completion {
            Ok(c) => c,
            Err(e) => {
                report.stats.transport_errors += 1;
                log.disposition = Disposition::TransportError;
                log.reason = Some(e.message);
                report.log.push(log);
                continue;
            }
        };
        let program = canonical_program(&completion);
        log.program = Some(program.clone());
        let reason = match scenes.get(&record.scene_id) {
            None => Some("MissingScene".to_owned()),
            Some(scene) => match run_source(&program, scene, limits) {
                ExecOutcome::Answer { text } => {
                    let ok = normalize_answer(&text) == normalize_answer(&record.answer);
                    log.predicted = Some(text);
                    (!ok).then(|| "WrongAnswer".to_owned())
                }
                ExecOutcome::Failure(f) => Some(f.kind.to_string()),
            },
        };
        match reason {
            None => {
                log.disposition = Disposition::Validated;
                report.stats.validated += 1;
                if !pool.push(&record.question, &program, &record.scene_id, &record.answer, embedder) {
                    report.stats.duplicates += 1;
                }
                report.validated.push(ValidatedRecord::new(record, program));
            }
            Some(reason) => {
                report.stats.discarded += 1;
                *report.stats.discard_reasons.entry(reason.clone()).or_default() += 1;
                log.reason = Some(reason);
            }
        }
        report.log.push(log);
    }
    if report.stats.processed > 0 {
        report.stats.validation_rate = report.stats.validated as f64 / report.stats.processed as f64;
    }
    report
}

/// Entries whose program no longer reproduces the stored answer.
pub fn unsound_entries<'p>(
    pool: &'p ExamplePool,
    scenes: &BTreeMap<String, SceneGraph>,
    limits: Limits,
) -> Vec<&'p PoolEntry> {
    pool.entries()
        .iter()
        .filter(|e| {
            !scenes
                .get(&e.scene_id)
                .is_some_and(|s| run_source(&e.program, s, limits).matches(&e.answer))
        })
        .collect()
}

/// Answers recorded completions in order, per question.
#[derive(Clone, Debug, Default)]
pub struct ReplayTeacher {
    queues: BTreeMap<String, VecDeque<String>>,
}

impl ReplayTeacher {
    pub fn new(entries: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut queues: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for (question, completion) in entries {
            queues
                .entry(normalize_answer(&question))
                .or_default()
                .push_back(completion);
        }
        ReplayTeacher { queues }
    }

    pub fn remaining(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}

impl TeacherClient for ReplayTeacher {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError> {
        let question = prompt_question(prompt)
            .ok_or_else(|| TransportError::new("prompt has no question block"))?;
        self.queues
            .get_mut(&normalize_answer(&question))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| TransportError::new(format!("no recorded completion for {question:?}")))
    }
}

/// Ways the oracle teacher breaks a gold program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Corruption {
    /// A method or function is renamed to one outside the API.
    WrongFunction,
    /// The first argument literal is emptied.
    DroppedSlot,
    /// The answer becomes a stringified comparison of itself.
    AnswerTypeFlip,
}

pub const CORRUPTIONS: [Corruption; 3] = [
    Corruption::WrongFunction,
    Corruption::DroppedSlot,
    Corruption::AnswerTypeFlip,
];

pub fn corrupt(program: &str, corruption: Corruption) -> String {
    let Ok(mut p) = parse(program) else {
        return program.to_owned();
    };
    match corruption {
        Corruption::WrongFunction => {
            let mut done = false;
            for stmt in p.statements.iter_mut().rev() {
                if let Stmt::Assign { value, .. } | Stmt::Expr(value) = stmt {
                    if rename_first_call(value) {
                        done = true;
                        break;
                    }
                }
            }
            if !done {
                return format!("{program}\nanswer=detect(image_patch)");
            }
        }
        Corruption::DroppedSlot => rewrite_slots(&mut p, |i, v| {
            if i == 0 {
                v.clear();
            }
        }),
        Corruption::AnswerTypeFlip => {
            let last = p.statements.iter_mut().rev().find_map(|s| match s {
                Stmt::Assign { targets, value }
                    if targets
                        .iter()
                        .any(|t| matches!(t, crate::ast::AssignTarget::Name(n) if n == "answer")) =>
                {
                    Some(value)
                }
                _ => None,
            });
            match last {
                Some(value) => {
                    let inner = value.clone();
                    *value = Expr::call(
                        "str",
                        alloc::vec![Expr::compare(inner.clone(), crate::ast::CmpOp::Eq, inner)],
                    );
                }
                None => return format!("{program}\nanswer=str(True)"),
            }
        }
    }
    print_canonical(&p)
}

fn rename_first_call(expr: &mut Expr) -> bool {
    match expr {
        Expr::MethodCall { method, .. } => {
            *method = format!("{method}_v2");
            true
        }
        Expr::Call { callee, args } => {
            for a in args.iter_mut() {
                if rename_first_call(a) {
                    return true;
                }
            }
            *callee = format!("{callee}_v2");
            true
        }
        Expr::Compare { left, right, .. } | Expr::Arith { left, right, .. } => {
            rename_first_call(left) || rename_first_call(right)
        }
        Expr::Not(e) => rename_first_call(e),
        Expr::BoolOp { operands, .. } | Expr::List(operands) => {
            operands.iter_mut().any(rename_first_call)
        }
        _ => false,
    }
}

/// Reliability as a function of same-template examples in the prompt.
pub fn default_reliability(matching_examples: usize) -> f64 {
    (0.2 + 0.1 * matching_examples as f64).min(1.0)
}

/// Simulated teacher that knows the gold program for every question and
/// gets more reliable when the prompt shows examples of the same template.
pub struct OracleTeacher {
    bank: BTreeMap<String, (String, String)>,
    reliability: fn(usize) -> f64,
    seed: u64,
    template_cache: BTreeMap<String, Option<String>>,
    calls: u64,
}

impl OracleTeacher {
    /// `bank` pairs questions with gold program sources.
    pub fn new(bank: impl IntoIterator<Item = (String, String)>, seed: u64) -> Self {
        let mut teacher = OracleTeacher {
            bank: BTreeMap::new(),
            reliability: default_reliability,
            seed,
            template_cache: BTreeMap::new(),
            calls: 0,
        };
        for (question, program) in bank {
            let template = teacher.template_of(&program).unwrap_or_default();
            let canonical = canonical_program(&program);
            teacher
                .bank
                .insert(normalize_answer(&question), (canonical, template));
        }
        teacher
    }

    pub fn with_reliability(mut self, reliability: fn(usize) -> f64) -> Self {
        self.reliability = reliability;
        self
    }

    fn template_of(&mut self, program: &str) -> Option<String> {
        if let Some(t) = self.template_cache.get(program) {
            return t.clone();
        }
        let t = parse(program)
            .ok()
            .map(|p| extract_program("", &p).template.text().to_owned());
        self.template_cache.insert(program.to_owned(), t.clone());
        t
    }

    /// Same-template examples in a prompt for the gold template.
    pub fn matching_examples(&mut self, prompt: &str, gold_template: &str) -> usize {
        let mut blocks = prompt_blocks(prompt);
        blocks.pop();
        blocks
            .iter()
            .filter(|(_, program)| self.template_of(program).as_deref() == Some(gold_template))
            .count()
    }
}

impl TeacherClient for OracleTeacher {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError> {
        self.calls += 1;
        let question = prompt_question(prompt)
            .ok_or_else(|| TransportError::new("prompt has no question block"))?;
        let Some((gold, template)) = self.bank.get(&normalize_answer(&question)).cloned() else {
            return Ok(format!(
                "answer=image_patch.simple_query({})",
                print_expr(&Expr::str(question))
            ));
        };
        let n = self.matching_examples(prompt, &template);
        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(self.seed, &normalize_answer(&question)));
        if rng.random_bool((self.reliability)(n).clamp(0.0, 1.0)) {
            return Ok(gold);
        }
        let corruption = CORRUPTIONS[rng.random_range(0..CORRUPTIONS.len())];
        Ok(corrupt(&gold, corruption))
    }
}

impl core::fmt::Display for Disposition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Disposition::Validated => "validated",
            Disposition::Discarded => "discarded",
            Disposition::TransportError => "transport_error",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{BBox, SceneObject};
    use alloc::vec;

    fn scenes() -> BTreeMap<String, SceneGraph> {
        let s = SceneGraph::new("s0", 100, 100)
            .with_object(SceneObject::new("dog#1", "dog", BBox::new(10, 10, 30, 30)).with_attribute("brown", "color"))
            .with_object(SceneObject::new("cat#1", "cat", BBox::new(50, 10, 70, 30)).with_attribute("black", "color"));
        let mut m = BTreeMap::new();
        m.insert("s0".to_owned(), s);
        m
    }

    fn record(id: &str, question: &str, answer: &str) -> DatasetRecord {
        DatasetRecord {
            id: id.into(),
            question: question.into(),
            answer: answer.into(),
            scene_id: "s0".into(),
            split: "train".into(),
        }
    }

    const DOG_COLOR: &str = "dog = image_patch.find('dog')\nanswer = dog.classify('color')";

    #[test]
    fn embedding_is_normalized_and_nonzero() {
        let e = HashedEmbedder::default();
        let v = e.embed("What color is the dog?");
        assert_eq!(v.len(), 512);
        let norm: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(e.embed("???").iter().any(|&x| x != 0.0));
        assert_eq!(e.embed("dog"), e.embed("DOG"));
    }

    #[test]
    fn cosine_of_zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn retrieval_passes_small_pools_through() {
        let e = HashedEmbedder::default();
        let mut pool = ExamplePool::new();
        assert!(retrieve("q", &pool, 50, &e).is_empty());
        for q in ["a dog", "a cat", "the sky"] {
            pool.push(q, "answer='x'", "s0", "x", &e);
        }
        let got: Vec<_> = retrieve("sky", &pool, 50, &e).iter().map(|p| p.question.as_str()).collect();
        assert_eq!(got, ["a dog", "a cat", "the sky"]);
        let top: Vec<_> = retrieve("sky", &pool, 1, &e).iter().map(|p| p.question.as_str()).collect();
        assert_eq!(top, ["the sky"]);
    }

    #[test]
    fn pool_deduplicates() {
        let e = HashedEmbedder::default();
        let mut pool = ExamplePool::new();
        assert!(pool.push("q", "p", "s", "a", &e));
        assert!(!pool.push("q", "p", "s", "a", &e));
        assert!(pool.push("q", "p2", "s", "a", &e));
        assert_eq!(pool.entries()[1].inserted_at_index, 1);
    }

    #[test]
    fn prompt_round_trips_through_blocks() {
        let e = HashedEmbedder::default();
        let mut pool = ExamplePool::new();
        pool.push("What color is the dog?", "var1=image_patch.find('dog')\nanswer=var1.classify('color')", "s0", "brown", &e);
        let retrieved = retrieve("Is there a cat?", &pool, 50, &e);
        let prompt = assemble_prompt("Is there a cat?", &retrieved, DEFAULT_PROMPT);
        assert!(prompt.ends_with("Question: Is there a cat?\nProgram:\n"));
        let blocks = prompt_blocks(&prompt);
        assert_eq!(blocks.len(), 2);
        assert_eq!(blocks[0].1, "var1=image_patch.find('dog')\nanswer=var1.classify('color')");
        assert_eq!(prompt_question(&prompt).unwrap(), "Is there a cat?");
        assert_eq!(assemble_prompt("q", &[], "Intro {examples}"), "Intro \nQuestion: q\nProgram:\n");
        assert_eq!(assemble_prompt("q {examples}", &[], "{question}|{examples}"), "q {examples}|");
    }

    #[test]
    fn completions_are_cleaned() {
        assert_eq!(clean_completion("```python\nanswer='x'\n```\n"), "answer='x'");
        assert_eq!(clean_completion("\n answer='x'  \n"), "answer='x'");
    }

    struct Constant(&'static str);
    impl TeacherClient for Constant {
        fn generate(&mut self, _: &str) -> Result<String, TransportError> {
            Ok(self.0.to_owned())
        }
    }

    struct Down;
    impl TeacherClient for Down {
        fn generate(&mut self, _: &str) -> Result<String, TransportError> {
            Err(TransportError::new("offline"))
        }
    }

    #[test]
    fn unparsable_programs_are_all_discarded() {
        let records = vec![record("1", "What color is the dog?", "brown"), record("2", "Q?", "x")];
        let mut pool = ExamplePool::new();
        let report = annotate(
            &records,
            &scenes(),
            &mut Constant("answer = ("),
            &HashedEmbedder::default(),
            &mut pool,
            &AnnotationRunConfig::default(),
        );
        assert_eq!(report.stats.validated, 0);
        assert_eq!(report.stats.discarded, 2);
        assert_eq!(report.stats.discard_reasons.get("SyntaxError"), Some(&2));
        assert!(pool.is_empty());
    }

    #[test]
    fn transport_failures_are_counted() {
        let records = vec![record("1", "What color is the dog?", "brown")];
        let report = annotate(
            &records,
            &scenes(),
            &mut Down,
            &HashedEmbedder::default(),
            &mut ExamplePool::new(),
            &AnnotationRunConfig::default(),
        );
        assert_eq!(report.stats.transport_errors, 1);
        assert_eq!(report.log[0].disposition, Disposition::TransportError);
    }

    #[test]
    fn correct_programs_join_the_pool() {
        let records = vec![
            record("1", "What color is the dog?", "Brown"),
            record("2", "What color is the cat?", "black"),
        ];
        let mut pool = ExamplePool::new();
        let report = annotate(
            &records,
            &scenes(),
            &mut Constant(DOG_COLOR),
            &HashedEmbedder::default(),
            &mut pool,
            &AnnotationRunConfig::default(),
        );
        assert_eq!(report.stats.validated, 1);
        assert_eq!(report.log[1].reason.as_deref(), Some("WrongAnswer"));
        assert_eq!(pool.len(), 1);
        assert!(unsound_entries(&pool, &scenes(), Limits::default()).is_empty());
    }

    #[test]
    fn replay_teacher_answers_in_order() {
        let mut t = ReplayTeacher::new(vec![
            ("What color is the dog?".to_owned(), "a".to_owned()),
            ("what color is the dog".to_owned(), "b".to_owned()),
        ]);
        let prompt = assemble_prompt("What color is the dog?", &[], DEFAULT_PROMPT);
        assert_eq!(t.generate(&prompt).unwrap(), "a");
        assert_eq!(t.generate(&prompt).unwrap(), "b");
        assert!(t.generate(&prompt).is_err());
    }

    #[test]
    fn corruptions_break_answers() {
        let s = &scenes()["s0"];
        let gold = run_source(DOG_COLOR, s, Limits::default());
        assert_eq!(gold.answer(), Some("brown"));
        for c in CORRUPTIONS {
            let bad = corrupt(DOG_COLOR, c);
            assert!(parse(&bad).is_ok(), "{bad}");
            assert_ne!(run_source(&bad, s, Limits::default()).answer(), Some("brown"), "{c:?}");
        }
        assert_eq!(
            corrupt(DOG_COLOR, Corruption::AnswerTypeFlip),
            "dog=image_patch.find('dog')\nanswer=str(dog.classify('color') == dog.classify('color'))"
        );
    }

    #[test]
    fn oracle_reliability_tracks_matching_examples() {
        let e = HashedEmbedder::default();
        let mut t = OracleTeacher::new(vec![("What color is the dog?".to_owned(), DOG_COLOR.to_owned())], 3);
        let mut pool = ExamplePool::new();
        pool.push("What color is the cat?", "var1=image_patch.find('cat')\nanswer=var1.classify('color')", "s0", "black", &e);
        pool.push("Is there a cat?", "answer=bool_to_yesno(exists(image_patch.find('cat')))", "s0", "yes", &e);
        let prompt = assemble_prompt("What color is the dog?", &retrieve("x", &pool, 50, &e), DEFAULT_PROMPT);
        let gold_template = t.bank[&normalize_answer("What color is the dog?")].1.clone();
        assert_eq!(t.matching_examples(&prompt, &gold_template), 1);
        assert!((default_reliability(1) - 0.3).abs() < 1e-12);
        assert_eq!(default_reliability(20), 1.0);
        let first = t.generate(&prompt).unwrap();
        assert_eq!(first, t.generate(&prompt).unwrap());
        let always = OracleTeacher::new(vec![("What color is the dog?".to_owned(), DOG_COLOR.to_owned())], 3)
            .with_reliability(|_| 1.0)
            .generate(&prompt)
            .unwrap();
        assert_eq!(always, "dog=image_patch.find('dog')\nanswer=dog.classify('color')");
    }
}

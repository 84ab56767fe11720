//! Program checks, verdict bookkeeping, and evaluation metrics.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{AssignTarget, Comprehension, Expr, Program, Stmt};
use crate::augment::CategoryLexicon;
use crate::exec::{run_source, ExecOutcome, Limits, API_FUNCTIONS, API_METHODS, DIRECTIONS};
use crate::parser::parse;
use crate::scene::SceneGraph;
use crate::text::{contains_whole_word, normalize_answer, plural};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    NotExecutable,
    ApiViolation,
    ContradictsQuestion,
    DoesNotAnswerQuestion,
    MissingQuestionInformation,
}

pub type FlagSet = BTreeSet<Flag>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlagSource {
    Static,
    Heuristic,
    Human,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Final {
    Correct,
    Incorrect,
    Unreviewed,
}

/// Extra nouns accepted by `find` besides the generic object list.
pub const EXTRA_NOUNS: &[&str] = &[
    "object", "thing", "person", "people", "man", "woman", "child", "animal", "food", "road", "street",
    "sky", "grass", "ground", "wall", "floor", "building", "window", "door", "shirt", "water", "fence",
    "sign", "truck", "train", "plant", "flower", "girl", "boy", "player",
];

/// Word lists the checkers use to judge arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckLexicon {
    pub nouns: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    /// Attribute category names accepted by `classify`.
    pub categories: BTreeSet<String>,
}

impl CheckLexicon {
    /// Nouns are the generic objects (and their plurals) plus
    /// [`EXTRA_NOUNS`]; attributes are every word of the attribute-valued
    /// categories.
    pub fn from_lexicon(lexicon: &CategoryLexicon) -> Self {
        let mut nouns = BTreeSet::new();
        for noun in lexicon
            .generic_objects()
            .iter()
            .map(String::as_str)
            .chain(EXTRA_NOUNS.iter().copied())
        {
            nouns.insert(noun.to_lowercase());
            nouns.insert(plural(noun).to_lowercase());
        }
        let mut attributes = BTreeSet::new();
        let mut categories = BTreeSet::new();
        for (name, words) in lexicon.categories() {
            match name {
                "direction" | "relation" => {}
                "attribute" => categories.extend(words.iter().map(|w| w.to_lowercase())),
                _ => attributes.extend(words.iter().map(|w| w.to_lowercase())),
            }
        }
        CheckLexicon {
            nouns,
            attributes,
            categories,
        }
    }

    pub fn add_nouns<'a>(&mut self, nouns: impl IntoIterator<Item = &'a str>) {
        for noun in nouns {
            self.nouns.insert(noun.to_lowercase());
            self.nouns.insert(plural(noun).to_lowercase());
        }
    }

    pub fn is_noun(&self, word: &str) -> bool {
        self.nouns.contains(&word.trim().to_lowercase())
    }

    pub fn is_attribute(&self, word: &str) -> bool {
        self.attributes.contains(&word.trim().to_lowercase())
    }
}

impl Default for CheckLexicon {
    fn default() -> Self {
        CheckLexicon::from_lexicon(&CategoryLexicon::builtin())
    }
}

fn literal(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Str(s) => Some(s),
        _ => None,
    }
}

fn visit_stmts<'a>(stmts: &'a [Stmt], f: &mut dyn FnMut(&'a Expr)) {
    for stmt in stmts {
        match stmt {
            Stmt::Assign { value, .. } | Stmt::Expr(value) => visit_expr(value, f),
            Stmt::For {
                iter, body, orelse, ..
            } => {
                visit_expr(iter, f);
                visit_stmts(body, f);
                visit_stmts(orelse, f);
            }
            Stmt::While { test, body, orelse } => {
                visit_expr(test, f);
                visit_stmts(body, f);
                visit_stmts(orelse, f);
            }
            Stmt::With { items, body } => {
                for item in items {
                    visit_expr(&item.context, f);
                }
                visit_stmts(body, f);
            }
        }
    }
}

/// Pre-order walk over every expression node.
fn visit_expr<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    f(expr);
    match expr {
        Expr::Name(_) | Expr::Str(_) | Expr::Int(_) | Expr::Bool(_) => {}
        Expr::List(items) | Expr::BoolOp { operands: items, .. } | Expr::Call { args: items, .. } => {
            items.iter().for_each(|e| visit_expr(e, f))
        }
        Expr::MethodCall { receiver, args, .. } => {
            visit_expr(receiver, f);
            args.iter().for_each(|e| visit_expr(e, f));
        }
        Expr::Attribute { receiver, .. } | Expr::Not(receiver) => visit_expr(receiver, f),
        Expr::Index { receiver, index } => {
            visit_expr(receiver, f);
            visit_expr(index, f);
        }
        Expr::Compare { left, right, .. } | Expr::Arith { left, right, .. } => {
            visit_expr(left, f);
            visit_expr(right, f);
        }
        Expr::Conditional {
            then,
            test,
            otherwise,
        } => {
            visit_expr(then, f);
            visit_expr(test, f);
            visit_expr(otherwise, f);
        }
        Expr::ListComp {
            element,
            generators,
        }
        | Expr::GenExp {
            element,
            generators,
        } => {
            visit_expr(element, f);
            for Comprehension {
                iter, conditions, ..
            } in generators
            {
                visit_expr(iter, f);
                conditions.iter().for_each(|c| visit_expr(c, f));
            }
        }
    }
}

fn assigned_names(stmt: &Stmt) -> Vec<&str> {
    fn collect<'a>(t: &'a AssignTarget, out: &mut Vec<&'a str>) {
        match t {
            AssignTarget::Name(n) => out.push(n),
            AssignTarget::Tuple(items) => items.iter().for_each(|i| collect(i, out)),
        }
    }
    let mut out = Vec::new();
    if let Stmt::Assign { targets, .. } = stmt {
        targets.iter().for_each(|t| collect(t, &mut out));
    }
    out
}

fn is_crop(expr: &Expr) -> bool {
    matches!(expr, Expr::MethodCall { method, .. } if method == "crop_position")
}

fn expected_arity(name: &str) -> Option<usize> {
    Some(match name {
        "ImagePatch" | "bool_to_yesno" | "count" | "exists" | "len" | "str" => 1,
        "filter_img" => 2,
        "choose_relationship" | "verify_relationship" => 3,
        "find" | "verify_property" | "classify" | "simple_query" => 1,
        "crop_position" => 2,
        _ => return None,
    })
}

/// Rule-based checks that need no execution.
pub fn static_check(program_source: &str, _question: &str, lexicon: &CheckLexicon) -> FlagSet {
    let mut flags = FlagSet::new();
    let Ok(program) = parse(program_source) else {
        flags.insert(Flag::NotExecutable);
        return flags;
    };
    let list_names: BTreeSet<&str> = program
        .statements
        .iter()
        .filter_map(|s| match s {
            Stmt::Assign {
                targets,
                value: Expr::List(_) | Expr::ListComp { .. },
            } => {
                Some(targets.iter().filter_map(|t| match t {
                    AssignTarget::Name(n) => Some(n.as_str()),
                    AssignTarget::Tuple(_) => None,
                }))
            }
            _ => None,
        })
        .flatten()
        .collect();

    let mut not_executable = false;
    let mut violation = false;
    visit_stmts(&program.statements, &mut |expr| match expr {
        Expr::Call { callee, args } => {
            if !API_FUNCTIONS.contains(&callee.as_str()) {
                not_executable = true;
                return;
            }
            if expected_arity(callee) != Some(args.len()) {
                not_executable = true;
                return;
            }
            match callee.as_str() {
                "choose_relationship" => {
                    let list_like = match &args[2] {
                        Expr::List(_) | Expr::ListComp { .. } => true,
                        Expr::Name(n) => list_names.contains(n.as_str()),
                        _ => false,
                    };
                    if !list_like {
                        not_executable = true;
                    }
                }
                "filter_img" => {
                    if let Some(c) = literal(&args[1]) {
                        if !lexicon.is_noun(c) && !lexicon.is_attribute(c) {
                            violation = true;
                        }
                    }
                }
                _ => {}
            }
        }
        Expr::MethodCall { method, args, .. } => {
            if !API_METHODS.contains(&method.as_str()) || expected_arity(method) != Some(args.len()) {
                not_executable = true;
                return;
            }
            match method.as_str() {
                "find" => {
                    if literal(&args[0]).is_some_and(|n| !lexicon.is_noun(n)) {
                        violation = true;
                    }
                }
                "verify_property" => {
                    if literal(&args[0]).is_some_and(|a| !lexicon.is_attribute(a)) {
                        violation = true;
                    }
                }
                "crop_position" => {
                    if literal(&args[0])
                        .is_some_and(|d| !DIRECTIONS.contains(&normalize_answer(d).as_str()))
                    {
                        violation = true;
                    }
                }
                "classify" if literal(&args[0]).is_some_and(|c| c.trim().eq_ignore_ascii_case("object")) => {
                    not_executable = true;
                }
                _ => {}
            }
        }
        Expr::Index { receiver, .. } if is_crop(receiver) => not_executable = true,
        _ => {}
    });

    // A crop result must not be indexed on the following line.
    for pair in program.statements.windows(2) {
        let Stmt::Assign { value, .. } = &pair[0] else {
            continue;
        };
        if !is_crop(value) {
            continue;
        }
        let names = assigned_names(&pair[0]);
        visit_stmts(core::slice::from_ref(&pair[1]), &mut |expr| {
            if let Expr::Index { receiver, .. } = expr {
                if matches!(&**receiver, Expr::Name(n) if names.contains(&n.as_str())) {
                    not_executable = true;
                }
            }
        });
    }

    if !program
        .statements
        .iter()
        .any(|s| assigned_names(s).contains(&"answer"))
    {
        not_executable = true;
    }
    if not_executable {
        flags.insert(Flag::NotExecutable);
    }
    if violation {
        flags.insert(Flag::ApiViolation);
    }
    flags
}

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "has", "have", "had", "will",
    "would", "should",
];

const QUESTION_DIRECTIONS: &[&str] = &["left", "right", "above", "below", "in front", "behind"];

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Yes/no questions open with an auxiliary verb and offer no alternatives.
pub fn is_yes_no_question(question: &str) -> bool {
    let w = words(question);
    w.first().is_some_and(|first| AUXILIARIES.contains(&first.as_str())) && !w.iter().any(|x| x == "or")
}

/// Whether the question offers an explicit `X or Y` choice.
pub fn offers_options(question: &str) -> bool {
    let w = words(question);
    w.windows(3).any(|t| t[1] == "or")
}

/// The expression finally assigned to `answer`, following plain name
/// aliases and `str(...)` wrappers.
fn answer_source(program: &Program) -> Option<&Expr> {
    let mut bindings: BTreeMap<&str, &Expr> = BTreeMap::new();
    for stmt in &program.statements {
        if let Stmt::Assign { targets, value } = stmt {
            for t in targets {
                if let AssignTarget::Name(n) = t {
                    bindings.insert(n, value);
                }
            }
        }
    }
    let mut expr = *bindings.get("answer")?;
    for _ in 0..16 {
        expr = match expr {
            Expr::Call { callee, args } if callee == "str" && args.len() == 1 => &args[0],
            Expr::Name(n) => match bindings.get(n.as_str()) {
                Some(e) if !core::ptr::eq(*e, expr) => e,
                _ => return Some(expr),
            },
            _ => return Some(expr),
        };
    }
    Some(expr)
}

fn callee_of(expr: &Expr) -> Option<&str> {
    match expr {
        Expr::Call { callee, .. } => Some(callee),
        Expr::MethodCall { method, .. } => Some(method),
        _ => None,
    }
}

/// Nouns passed to `find` and the variables that hold the results.
fn found_nouns(program: &Program) -> Vec<(Vec<String>, String)> {
    let mut out = Vec::new();
    for stmt in &program.statements {
        let Stmt::Assign { value, .. } = stmt else {
            continue;
        };
        let names: Vec<String> = assigned_names(stmt).into_iter().map(ToOwned::to_owned).collect();
        visit_expr(value, &mut |e| {
            if let Expr::MethodCall { method, args, .. } = e {
                if method == "find" {
                    if let Some(noun) = args.first().and_then(literal) {
                        out.push((names.clone(), noun.to_lowercase()));
                    }
                }
            }
        });
    }
    out
}

fn string_arguments(program: &Program) -> Vec<String> {
    crate::slots::string_literal_slots(program)
        .into_iter()
        .map(|s| s.value)
        .collect()
}

fn positions_of(words: &[String], noun: &str) -> Vec<usize> {
    let plural_form = plural(noun);
    words
        .iter()
        .enumerate()
        .filter(|(_, w)| **w == noun || **w == plural_form)
        .map(|(i, _)| i)
        .collect()
}

fn crop_direction(d: &str) -> String {
    let d = normalize_answer(d);
    match d.strip_suffix(" of") {
        Some(base) => base.to_owned(),
        None => d,
    }
}

/// Approximate semantic checks; every flag they raise needs review.
pub fn heuristic_check(question: &str, program_source: &str, lexicon: &CheckLexicon) -> FlagSet {
    let mut flags = FlagSet::new();
    let Ok(program) = parse(program_source) else {
        return flags;
    };
    let q_words = words(question);

    if let Some(src) = answer_source(&program) {
        let last = callee_of(src);
        if offers_options(question) && last == Some("bool_to_yesno") {
            flags.insert(Flag::DoesNotAnswerQuestion);
        }
        if is_yes_no_question(question) && matches!(last, Some("count" | "len")) {
            flags.insert(Flag::DoesNotAnswerQuestion);
        }
    }

    let arguments = string_arguments(&program);
    let found = found_nouns(&program);
    for (_, noun) in &found {
        for at in positions_of(&q_words, noun) {
            let Some(modifier) = at.checked_sub(1).map(|i| &q_words[i]) else {
                continue;
            };
            if lexicon.is_attribute(modifier) && !arguments.iter().any(|a| contains_whole_word(a, modifier)) {
                flags.insert(Flag::MissingQuestionInformation);
            }
        }
    }

    // Crops whose reference variable holds a found noun.
    let mut crops: Vec<(String, String)> = Vec::new();
    visit_stmts(&program.statements, &mut |e| {
        if let Expr::MethodCall { method, args, .. } = e {
            if method == "crop_position" && args.len() == 2 {
                let reference = match &args[1] {
                    Expr::Name(n) => Some(n.as_str()),
                    Expr::Index { receiver, .. } => match &**receiver {
                        Expr::Name(n) => Some(n.as_str()),
                        _ => None,
                    },
                    _ => None,
                };
                if let (Some(d), Some(r)) = (literal(&args[0]), reference) {
                    if let Some((_, noun)) = found.iter().find(|(names, _)| names.iter().any(|n| n == r)) {
                        crops.push((crop_direction(d), noun.clone()));
                    }
                }
            }
        }
    });
    let joined: Vec<&str> = q_words.iter().map(String::as_str).collect();
    for (direction, noun) in &crops {
        for at in positions_of(&q_words, noun) {
            let window = &joined[at.saturating_sub(4)..at];
            let stated = (0..window.len()).rev().find_map(|i| {
                QUESTION_DIRECTIONS.iter().find(|d| {
                    let parts: Vec<&str> = d.split(' ').collect();
                    window[i..].starts_with(&parts)
                })
            });
            if let Some(stated) = stated {
                if *stated != direction.as_str() {
                    flags.insert(Flag::ContradictsQuestion);
                }
            }
        }
    }
    flags
}

/// Static and heuristic flags for one program.
pub fn check_program(question: &str, program_source: &str, lexicon: &CheckLexicon) -> (FlagSet, FlagSet) {
    (
        static_check(program_source, question, lexicon),
        heuristic_check(question, program_source, lexicon),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramVerdict {
    pub record_id: String,
    pub flags: BTreeMap<Flag, FlagSource>,
    #[serde(rename = "final")]
    pub final_verdict: Final,
}

/// A reviewer's judgement of one program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanVerdict {
    pub correct: bool,
    /// Error categories; required when `correct` is false.
    #[serde(default)]
    pub flags: Vec<Flag>,
    pub annotator: String,
    pub timestamp: u64,
}

/// One line of the verdict log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRow {
    pub record_id: String,
    pub flags: Vec<Flag>,
    pub source: FlagSource,
    #[serde(rename = "final")]
    pub final_verdict: Final,
    #[serde(default)]
    pub annotator: Option<String>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum VerdictError {
    #[error("record {0}: an incorrect verdict needs at least one flag")]
    MissingFlags(String),
}

impl ProgramVerdict {
    pub fn from_checks(record_id: &str, static_flags: &FlagSet, heuristic_flags: &FlagSet) -> Self {
        let mut flags = BTreeMap::new();
        for f in heuristic_flags {
            flags.insert(*f, FlagSource::Heuristic);
        }
        for f in static_flags {
            flags.insert(*f, FlagSource::Static);
        }
        let mut v = ProgramVerdict {
            record_id: record_id.to_owned(),
            flags,
            final_verdict: Final::Unreviewed,
        };
        v.final_verdict = v.derive_final(false);
        v
    }

    fn derive_final(&self, reviewed: bool) -> Final {
        if self
            .flags
            .values()
            .any(|s| matches!(s, FlagSource::Static | FlagSource::Human))
        {
            Final::Incorrect
        } else if reviewed {
            Final::Correct
        } else {
            Final::Unreviewed
        }
    }

    /// Applies a human judgement. Heuristic flags are dropped; a "correct"
    /// judgement also clears static flags.
    pub fn record_human(&mut self, verdict: &HumanVerdict) -> Result<VerdictRow, VerdictError> {
        if !verdict.correct && verdict.flags.is_empty() {
            return Err(VerdictError::MissingFlags(self.record_id.clone()));
        }
        if verdict.correct {
            self.flags.clear();
        } else {
            self.flags.retain(|_, s| *s == FlagSource::Static);
            for f in &verdict.flags {
                self.flags.insert(*f, FlagSource::Human);
            }
        }
        self.final_verdict = self.derive_final(true);
        Ok(VerdictRow {
            record_id: self.record_id.clone(),
            flags: verdict.flags.clone(),
            source: FlagSource::Human,
            final_verdict: self.final_verdict,
            annotator: Some(verdict.annotator.clone()),
            timestamp: verdict.timestamp,
        })
    }

    /// Rows describing the automatic flags, one per source present.
    pub fn check_rows(&self) -> Vec<VerdictRow> {
        let mut rows = Vec::new();
        for source in [FlagSource::Static, FlagSource::Heuristic] {
            let flags: Vec<Flag> = self
                .flags
                .iter()
                .filter(|(_, s)| **s == source)
                .map(|(f, _)| *f)
                .collect();
            if flags.is_empty() && !(source == FlagSource::Static && self.flags.is_empty()) {
                continue;
            }
            rows.push(VerdictRow {
                record_id: self.record_id.clone(),
                flags,
                source,
                final_verdict: self.final_verdict,
                annotator: None,
                timestamp: 0,
            });
        }
        rows
    }
}

/// Current verdicts after replaying a log in order.
pub fn replay_verdicts(rows: &[VerdictRow]) -> BTreeMap<String, ProgramVerdict> {
    let mut out: BTreeMap<String, ProgramVerdict> = BTreeMap::new();
    for row in rows {
        let v = out
            .entry(row.record_id.clone())
            .or_insert_with(|| ProgramVerdict::from_checks(&row.record_id, &FlagSet::new(), &FlagSet::new()));
        match row.source {
            FlagSource::Human => {
                let human = HumanVerdict {
                    correct: row.flags.is_empty(),
                    flags: row.flags.clone(),
                    annotator: row.annotator.clone().unwrap_or_default(),
                    timestamp: row.timestamp,
                };
                v.record_human(&human).ok();
            }
            source => {
                for f in &row.flags {
                    v.flags.insert(*f, source);
                }
                v.final_verdict = v.derive_final(false);
            }
        }
    }
    out
}

/// Share of reviewed programs judged correct, with the reviewed count.
pub fn program_accuracy<'a>(verdicts: impl IntoIterator<Item = &'a ProgramVerdict>) -> (f64, usize) {
    let (mut correct, mut reviewed) = (0usize, 0usize);
    for v in verdicts {
        match v.final_verdict {
            Final::Correct => {
                correct += 1;
                reviewed += 1;
            }
            Final::Incorrect => reviewed += 1,
            Final::Unreviewed => {}
        }
    }
    (ratio(correct, reviewed), reviewed)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of normalized predictions equal to the gold answers. Extra
/// items in the longer list are ignored.
pub fn accuracy_exact<P: AsRef<str>, G: AsRef<str>>(predictions: &[P], gold: &[G]) -> f64 {
    let n = predictions.len().min(gold.len());
    let hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| normalize_answer(p.as_ref()) == normalize_answer(g.as_ref()))
        .count();
    ratio(hits, n)
}

/// Annotator-agreement accuracy: for each annotator left out in turn, the
/// prediction scores `min(matches among the rest / 3, 1)`; folds are
/// averaged.
pub fn accuracy_vqa<A: AsRef<str>>(prediction: &str, annotators: &[A]) -> f64 {
    let n = annotators.len();
    if n == 0 {
        return 0.0;
    }
    let p = normalize_answer(prediction);
    let hits: Vec<bool> = annotators
        .iter()
        .map(|a| normalize_answer(a.as_ref()) == p)
        .collect();
    let total = hits.iter().filter(|h| **h).count();
    let capped: usize = hits
        .iter()
        .map(|&h| (total - usize::from(h)).min(3))
        .sum();
    capped as f64 / (3 * n) as f64
}

/// Share of records where both programs run and give the same answer,
/// compared after normalization.
pub fn student_teacher_agreement<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a str, &'a SceneGraph)>,
    limits: Limits,
) -> f64 {
    let (mut agree, mut total) = (0usize, 0usize);
    for (student, teacher, scene) in rows {
        total += 1;
        if let (ExecOutcome::Answer { text: a }, ExecOutcome::Answer { text: b }) =
            (run_source(student, scene, limits), run_source(teacher, scene, limits))
        {
            if normalize_answer(&a) == normalize_answer(&b) {
                agree += 1;
            }
        }
    }
    ratio(agree, total)
}

/// One record scored by [`agreement_report`].
pub struct AgreementRow<'a> {
    pub student: &'a str,
    pub teacher: &'a str,
    pub scene: &'a SceneGraph,
    pub gold: &'a str,
}

/// Student/teacher agreement together with the share of records where
/// both answers are correct. The second never exceeds the first.
pub fn agreement_report<'a>(rows: impl IntoIterator<Item = AgreementRow<'a>>, limits: Limits) -> (f64, f64) {
    let (mut agree, mut joint, mut total) = (0usize, 0usize, 0usize);
    for row in rows {
        total += 1;
        let s = run_source(row.student, row.scene, limits);
        let t = run_source(row.teacher, row.scene, limits);
        if let (Some(a), Some(b)) = (s.answer(), t.answer()) {
            if normalize_answer(a) == normalize_answer(b) {
                agree += 1;
            }
        }
        if s.matches(row.gold) && t.matches(row.gold) {
            joint += 1;
        }
    }
    (ratio(agree, total), ratio(joint, total))
}

/// Shannon entropy in bits of the word n-gram distribution over a corpus.
/// Tokens are whitespace-separated and lowercased; n-grams do not cross
/// question boundaries.
pub fn ngram_entropy<S: AsRef<str>>(corpus: &[S], n: usize) -> f64 {
    let n = n.max(1);
    let mut counts: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut total = 0usize;
    for q in corpus {
        let tokens: Vec<String> = q.as_ref().split_whitespace().map(|t| t.to_lowercase()).collect();
        for gram in tokens.windows(n) {
            *counts.entry(gram.to_vec()).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / t;
            -p * libm::log2(p)
        })
        .sum();
    h.max(0.0)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: usize,
    pub answer_accuracy: Option<f64>,
    pub vqa_agreement_accuracy: Option<f64>,
    pub student_teacher_agreement: Option<f64>,
    pub joint_accuracy: Option<f64>,
    pub program_accuracy: Option<f64>,
    pub programs_reviewed: usize,
    pub ngram_entropy: f64,
    pub ngram_n: usize,
    pub throughput_qps: Option<f64>,
    pub throughput_sample: Option<usize>,
    pub manifest_hash: Option<String>,
}

impl MetricsReport {
    /// Fractions outside [0, 1] indicate a bug upstream.
    pub fn check_bounds(&self) -> Result<(), String> {
        let fractions = [
            self.answer_accuracy,
            self.vqa_agreement_accuracy,
            self.student_teacher_agreement,
            self.joint_accuracy,
            self.program_accuracy,
        ];
        for f in fractions.into_iter().flatten() {
            if !(0.0..=1.0).contains(&f) {
                return Err(format!("metric {f} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

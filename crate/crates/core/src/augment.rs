//! Template-based augmentation: probabilistic argument replacement with a
//! matching rewrite of the question.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::AugmentError;
use crate::slots::string_literal_slots;
use crate::template::{instantiate_values, TemplateRecord};
use crate::text::{normalize_answer, seed_for, whole_word_matches};

/// Category key holding the generic object list in lexicon files.
pub const GENERIC_KEY: &str = "generic";

/// Bundled lexicon in the `category<TAB>word,word,...` file format.
pub const DEFAULT_LEXICON: &str = "\
color\tred,blue,green,yellow,purple,black,white,orange,pink,brown,gray,indigo,cyan,magenta,tan,silver
activities\trunning,walking,snowboarding,flying,splashing,tossing,riding,standing,hugging,hanging,breaking,pulling,decorating,facing,preparing,pouring,pointing,laughing
direction\tleft,right,above,below
relation\tpicking up,in front of,behind,above,below,next to,near,far away,close,following,on top,beside,walking on,attached,left,right,diagonal
material\twood,metal,plastic,glass,leather,cotton,stone,paper
shape\tround,square,rectangular,triangular,oval
size\tsmall,large,tiny,huge,tall,short
attribute\tcolor,material,shape,size
generic\tchair,table,dog,cat,car,tree,cup,vase,toy,bear,desk,sofa,tshirt,pot,pan,horse,bus,bench,lamp,ball,bottle,bird,plate,book,boat,bicycle,umbrella,bag,clock,pillow
";

/// Non-fatal issue found while loading a lexicon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexiconWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoryLexicon {
    categories: Vec<(String, Vec<String>)>,
    reverse: BTreeMap<String, usize>,
    generic_objects: Vec<String>,
}

impl CategoryLexicon {
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON)
            .expect("bundled lexicon is well-formed")
            .0
    }

    /// Parses the line format. Blank lines and `#` comments are ignored. A
    /// word listed under several categories belongs to the first one.
    pub fn parse(text: &str) -> Result<(Self, Vec<LexiconWarning>), AugmentError> {
        let mut categories: Vec<(String, Vec<String>)> = Vec::new();
        let mut reverse: BTreeMap<String, usize> = BTreeMap::new();
        let mut generic_objects = Vec::new();
        let mut warnings = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((name, list)) = raw.split_once('\t') else {
                return Err(AugmentError::Lexicon {
                    line,
                    message: "expected `category<TAB>words`".to_owned(),
                });
            };
            let name = name.trim();
            if name.is_empty() {
                return Err(AugmentError::Lexicon {
                    line,
                    message: "empty category name".to_owned(),
                });
            }
            let mut words: Vec<String> = Vec::new();
            for word in list.split(',').map(str::trim).filter(|w| !w.is_empty()) {
                if !words.iter().any(|w| w.eq_ignore_ascii_case(word)) {
                    words.push(word.to_owned());
                }
            }
            if words.is_empty() {
                return Err(AugmentError::Lexicon {
                    line,
                    message: format!("category {name:?} has no words"),
                });
            }
            if name == GENERIC_KEY {
                generic_objects.extend(words);
                continue;
            }
            if categories.iter().any(|(c, _)| c == name) {
                return Err(AugmentError::Lexicon {
                    line,
                    message: format!("category {name:?} defined twice"),
                });
            }
            let slot = categories.len();
            for word in &words {
                let key = word.to_lowercase();
                if let Some(&first) = reverse.get::<String>(&key) {
                    let first_name: &String = &categories[first].0;
                    warnings.push(LexiconWarning {
                        line,
                        message: format!("{word:?} already belongs to {first_name:?}"),
                    });
                } else {
                    reverse.insert(key, slot);
                }
            }
            categories.push((name.to_owned(), words));
        }
        if generic_objects.is_empty() {
            return Err(AugmentError::Lexicon {
                line: 0,
                message: format!("missing `{GENERIC_KEY}` object list"),
            });
        }
        Ok((
            CategoryLexicon {
                categories,
                reverse,
                generic_objects,
            },
            warnings,
        ))
    }

    pub fn category_of(&self, word: &str) -> Option<&str> {
        self.reverse
            .get(&word.to_lowercase())
            .map(|&i| self.categories[i].0.as_str())
    }

    pub fn words(&self, category: &str) -> Option<&[String]> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, w)| w.as_slice())
    }

    pub fn categories(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.categories
            .iter()
            .map(|(c, w)| (c.as_str(), w.as_slice()))
    }

    pub fn generic_objects(&self) -> &[String] {
        &self.generic_objects
    }

    /// Same-category words if the argument is categorized, otherwise the
    /// generic objects; the argument itself is excluded.
    pub fn candidates(&self, argument: &str) -> Vec<String> {
        let pool = match self.reverse.get(&argument.to_lowercase()) {
            Some(&i) => &self.categories[i].1,
            None => &self.generic_objects,
        };
        pool.iter()
            .filter(|w| !w.eq_ignore_ascii_case(argument))
            .cloned()
            .collect()
    }
}

impl Default for CategoryLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    /// Equal-valued slots are decided and replaced together.
    #[default]
    Linked,
    Independent,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetachedMode {
    /// Drop the pair when a replaced argument is not found in the question.
    #[default]
    Skip,
    /// Hand the question to a [`QuestionRewriter`].
    Provider,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplacementPolicy {
    pub probability: f64,
    pub seed: u64,
    pub link_mode: LinkMode,
    pub question_detached_mode: DetachedMode,
}

impl Default for ReplacementPolicy {
    fn default() -> Self {
        ReplacementPolicy {
            probability: 0.5,
            seed: 0,
            link_mode: LinkMode::Linked,
            question_detached_mode: DetachedMode::Skip,
        }
    }
}

impl ReplacementPolicy {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if (0.0..=1.0).contains(&self.probability) {
            Ok(())
        } else {
            Err(AugmentError::Probability(self.probability))
        }
    }
}

/// Where a slot sits in its program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotContext<'a> {
    pub slot: usize,
    pub function: &'a str,
    pub position: usize,
}

/// Source of replacement candidates for one argument.
pub trait ReplacementProvider {
    fn propose(&self, argument: &str, question: &str, context: &SlotContext<'_>) -> Vec<String>;
}

impl ReplacementProvider for CategoryLexicon {
    fn propose(&self, argument: &str, _question: &str, _context: &SlotContext<'_>) -> Vec<String> {
        self.candidates(argument)
    }
}

/// Produces a new question when replaced arguments do not occur in it.
pub trait QuestionRewriter {
    fn rewrite(&self, question: &str, replacements: &[(String, String)]) -> Option<String>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedReplacement {
    /// Slot indices sharing this replacement (one element in independent mode).
    pub slots: Vec<usize>,
    pub old: String,
    pub new: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReplacementPlan {
    pub replacements: Vec<PlannedReplacement>,
    /// Bernoulli decisions drawn while planning.
    pub decisions: usize,
    /// Decisions that came up "replace".
    pub selected: usize,
}

impl ReplacementPlan {
    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub slot: usize,
    pub old: String,
    pub new: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedPair {
    pub id: String,
    pub parent_id: String,
    pub question: String,
    pub program: String,
    pub replacements: Vec<Replacement>,
}

/// Per-record RNG stream for one augmentation attempt.
pub fn record_rng(seed: u64, record_id: &str, attempt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(seed, record_id));
    rng.set_stream(attempt);
    rng
}

fn decision_units(record: &TemplateRecord, mode: LinkMode) -> Vec<Vec<usize>> {
    match mode {
        LinkMode::Linked => record.args.link_groups.clone(),
        LinkMode::Independent => (0..record.args.len()).map(|i| alloc::vec![i]).collect(),
    }
}

pub fn plan_replacements<R: Rng + ?Sized>(
    record: &TemplateRecord,
    provider: &dyn ReplacementProvider,
    policy: &ReplacementPolicy,
    rng: &mut R,
) -> ReplacementPlan {
    let mut plan = ReplacementPlan::default();
    if policy.probability <= 0.0 {
        return plan;
    }
    let slots = string_literal_slots(record.template.body());
    for unit in decision_units(record, policy.link_mode) {
        plan.decisions += 1;
        if !rng.random_bool(policy.probability.min(1.0)) {
            continue;
        }
        plan.selected += 1;
        let first = unit[0];
        let old = &record.args.values[first];
        let context = SlotContext {
            slot: first,
            function: slots.get(first).map_or("", |s| s.function.as_str()),
            position: slots.get(first).map_or(0, |s| s.position),
        };
        let candidates: Vec<String> = provider
            .propose(old, &record.question, &context)
            .into_iter()
            .filter(|c| c != old)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let new = candidates[rng.random_range(0..candidates.len())].clone();
        plan.replacements.push(PlannedReplacement {
            slots: unit,
            old: old.clone(),
            new,
        });
    }
    plan
}

fn is_whole_question(value: &str, question: &str) -> bool {
    let v = normalize_answer(value);
    !v.is_empty() && v == normalize_answer(question)
}

/// Rewrites every whole-word occurrence of each `old` in one pass. Longer
/// arguments claim their spans first; overlapping shorter matches are left
/// alone, and replaced text is never rescanned.
pub fn rewrite_question(question: &str, substitutions: &[(String, String)]) -> String {
    let mut order: Vec<usize> = (0..substitutions.len()).collect();
    order.sort_by(|&a, &b| {
        substitutions[b]
            .0
            .len()
            .cmp(&substitutions[a].0.len())
            .then(a.cmp(&b))
    });
    let mut spans: Vec<(usize, usize, usize)> = Vec::new();
    for i in order {
        for (start, end) in whole_word_matches(question, &substitutions[i].0) {
            if spans.iter().all(|&(s, e, _)| end <= s || start >= e) {
                spans.push((start, end, i));
            }
        }
    }
    spans.sort_unstable();
    let mut out = String::with_capacity(question.len());
    let mut cursor = 0;
    for (start, end, i) in spans {
        out.push_str(&question[cursor..start]);
        let new = &substitutions[i].1;
        let capitalize = question[start..].chars().next().is_some_and(char::is_uppercase)
            && new.chars().next().is_some_and(char::is_lowercase);
        if capitalize {
            let mut chars = new.chars();
            if let Some(c) = chars.next() {
                out.extend(c.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push_str(new);
        }
        cursor = end;
    }
    out.push_str(&question[cursor..]);
    out
}

/// Applies a plan to both the question and the template.
pub fn apply_plan(
    record: &TemplateRecord,
    plan: &ReplacementPlan,
    mode: DetachedMode,
    rewriter: Option<&dyn QuestionRewriter>,
) -> Result<AugmentedPair, AugmentError> {
    let mut values = record.args.values.clone();
    let mut replacements = Vec::new();
    let mut substitutions: Vec<(String, String)> = Vec::new();
    let mut detached = None;
    for planned in &plan.replacements {
        for &slot in &planned.slots {
            values[slot] = planned.new.clone();
            replacements.push(Replacement {
                slot,
                old: planned.old.clone(),
                new: planned.new.clone(),
            });
        }
        if substitutions.iter().any(|(old, _)| *old == planned.old) {
            continue;
        }
        let attached = !is_whole_question(&planned.old, &record.question)
            && !whole_word_matches(&record.question, &planned.old).is_empty();
        if !attached && detached.is_none() {
            detached = Some((planned.slots[0], planned.old.clone()));
        }
        substitutions.push((planned.old.clone(), planned.new.clone()));
    }
    replacements.sort_by_key(|r| r.slot);
    let program = instantiate_values(&record.template, &values)?;
    let question = match detached {
        None => rewrite_question(&record.question, &substitutions),
        Some((slot, value)) => {
            let rewritten = match (mode, rewriter) {
                (DetachedMode::Provider, Some(r)) => r.rewrite(&record.question, &substitutions),
                _ => None,
            };
            rewritten.ok_or(AugmentError::QuestionDetachedArgument { slot, value })?
        }
    };
    Ok(AugmentedPair {
        id: record.source_id.clone(),
        parent_id: record.source_id.clone(),
        question,
        program,
        replacements,
    })
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub records: usize,
    pub emitted: usize,
    pub attempts: usize,
    pub detached_dropped: usize,
    pub duplicates: usize,
    pub unchanged: usize,
    pub decisions: usize,
    pub selected: usize,
}

/// Options for [`augment_stream`].
pub struct AugmentOptions<'a> {
    pub k_per_record: usize,
    pub policy: ReplacementPolicy,
    pub provider: &'a dyn ReplacementProvider,
    pub rewriter: Option<&'a dyn QuestionRewriter>,
    /// Extra attempts allowed per requested pair before giving up.
    pub retries_per_pair: usize,
}

impl<'a> AugmentOptions<'a> {
    pub fn new(k_per_record: usize, provider: &'a dyn ReplacementProvider, policy: ReplacementPolicy) -> Self {
        AugmentOptions {
            k_per_record,
            policy,
            provider,
            rewriter: None,
            retries_per_pair: 8,
        }
    }
}

/// Up to `k` distinct pairs for one record, in emission order.
pub fn augment_record(
    record: &TemplateRecord,
    options: &AugmentOptions<'_>,
    stats: &mut AugmentStats,
) -> Vec<AugmentedPair> {
    let k = options.k_per_record;
    let mut out = Vec::with_capacity(k);
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let source_program = record.program_text();
    seen.insert((record.question.clone(), source_program));
    let budget = k.saturating_mul(options.retries_per_pair.saturating_add(1));
    let mut attempt = 0u64;
    stats.records += 1;
    while out.len() < k && (attempt as usize) < budget {
        let mut rng = record_rng(options.policy.seed, &record.source_id, attempt);
        attempt += 1;
        stats.attempts += 1;
        let plan = plan_replacements(record, options.provider, &options.policy, &mut rng);
        stats.decisions += plan.decisions;
        stats.selected += plan.selected;
        if plan.is_empty() {
            stats.unchanged += 1;
            continue;
        }
        let mut pair = match apply_plan(
            record,
            &plan,
            options.policy.question_detached_mode,
            options.rewriter,
        ) {
            Ok(pair) => pair,
            Err(_) => {
                stats.detached_dropped += 1;
                continue;
            }
        };
        if !seen.insert((pair.question.clone(), pair.program.clone())) {
            stats.duplicates += 1;
            continue;
        }
        pair.id = format!("{}-aug{}", record.source_id, out.len());
        out.push(pair);
        stats.emitted += 1;
    }
    out
}

/// Augments each record in order; output is grouped by record, then by
/// emission index.
pub fn augment_stream(
    records: &[TemplateRecord],
    options: &AugmentOptions<'_>,
) -> (Vec<AugmentedPair>, AugmentStats) {
    let mut stats = AugmentStats::default();
    let mut out = Vec::new();
    for record in records {
        out.extend(augment_record(record, options, &mut stats));
    }
    (out, stats)
}

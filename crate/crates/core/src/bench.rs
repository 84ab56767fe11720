//! Seeded synthetic benchmark: random scenes, templated questions with gold
//! programs, and a reference evaluator that answers the same questions
//! straight from the scene without running any program.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::CategoryLexicon;
use crate::dataset::{DatasetRecord, ProgramRecord};
use crate::exec::{run_source, ExecOutcome, Limits, UNKNOWN};
use crate::parser::parse;
use crate::printer::print_canonical;
use crate::scene::{BBox, SceneGraph, SceneObject};
use crate::text::plural;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Existence,
    Count,
    AttributeQuery,
    SameAttribute,
    RelationChoose,
    PositionalQuery,
}

impl Family {
    pub const ALL: [Family; 6] = [
        Family::Existence,
        Family::Count,
        Family::AttributeQuery,
        Family::SameAttribute,
        Family::RelationChoose,
        Family::PositionalQuery,
    ];

    /// Distinct objects a question of this family refers to.
    pub fn objects_needed(self) -> usize {
        match self {
            Family::Existence | Family::Count | Family::AttributeQuery => 1,
            Family::SameAttribute | Family::RelationChoose | Family::PositionalQuery => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub n_scenes: usize,
    pub questions_per_scene: usize,
    pub objects_min: usize,
    pub objects_max: usize,
    pub width: i64,
    pub height: i64,
    pub nouns: Vec<String>,
    /// Attribute values by category; every object gets one value per
    /// category.
    pub attributes: BTreeMap<String, Vec<String>>,
    pub relations: Vec<String>,
    pub family_weights: BTreeMap<Family, f64>,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let lexicon = CategoryLexicon::builtin();
        let attributes = ["color", "material", "shape", "size"]
            .into_iter()
            .filter_map(|c| lexicon.words(c).map(|w| (c.to_owned(), w.to_vec())))
            .collect();
        let relations = ["next to", "near", "behind", "in front of", "beside"]
            .into_iter()
            .map(ToOwned::to_owned)
            .collect();
        BenchmarkConfig {
            n_scenes: 100,
            questions_per_scene: 10,
            objects_min: 3,
            objects_max: 8,
            width: 640,
            height: 480,
            nouns: lexicon.generic_objects().to_vec(),
            attributes,
            relations,
            family_weights: Family::ALL.into_iter().map(|f| (f, 1.0 / 6.0)).collect(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("vocabulary {0:?} is empty")]
    EmptyVocabulary(String),
    #[error("family weights must be non-negative and sum to 1, got sum {0}")]
    Weights(f64),
    #[error("family {family:?} cannot be generated: {reason}")]
    ImpossibleFamily { family: Family, reason: String },
    #[error("invalid scene layout: {0}")]
    Layout(String),
    #[error("gold program for {id} disagrees with the reference evaluator ({gold:?} vs {reference:?})")]
    GoldMismatch {
        id: String,
        gold: String,
        reference: String,
    },
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.nouns.is_empty() {
            return Err(ConfigError::EmptyVocabulary("nouns".into()));
        }
        if self.attributes.is_empty() {
            return Err(ConfigError::EmptyVocabulary("attributes".into()));
        }
        for (category, values) in &self.attributes {
            if values.is_empty() {
                return Err(ConfigError::EmptyVocabulary(format!("attributes.{category}")));
            }
        }
        if self.relations.is_empty() {
            return Err(ConfigError::EmptyVocabulary("relations".into()));
        }
        let sum: f64 = self.family_weights.values().sum();
        if self.family_weights.values().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(ConfigError::Weights(sum));
        }
        if self.objects_min == 0 || self.objects_min > self.objects_max {
            return Err(ConfigError::Layout(format!(
                "objects per scene {}..={}",
                self.objects_min, self.objects_max
            )));
        }
        // Each object needs its own center column and row.
        if self.width < 4 * self.objects_max as i64 || self.height < 4 * self.objects_max as i64 {
            return Err(ConfigError::Layout(format!(
                "{}x{} is too small for {} objects",
                self.width, self.height, self.objects_max
            )));
        }
        for (family, weight) in &self.family_weights {
            if *weight > 0.0 && family.objects_needed() > self.objects_max {
                return Err(ConfigError::ImpossibleFamily {
                    family: *family,
                    reason: format!(
                        "needs {} objects but scenes hold at most {}",
                        family.objects_needed(),
                        self.objects_max
                    ),
                });
            }
            if *weight > 0.0 && family.objects_needed() > self.nouns.len() {
                return Err(ConfigError::ImpossibleFamily {
                    family: *family,
                    reason: "needs two distinct nouns".into(),
                });
            }
        }
        Ok(())
    }
}

/// Structured meaning of a benchmark question, answered by
/// [`reference_answer`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Query {
    Existence {
        noun: String,
        attribute: Option<String>,
    },
    Count {
        noun: String,
    },
    AttributeQuery {
        noun: String,
        category: String,
    },
    SameAttribute {
        first: String,
        second: String,
        category: String,
    },
    RelationChoose {
        subject: String,
        reference: String,
        options: [String; 2],
    },
    PositionalQuery {
        target: String,
        direction: String,
        reference: String,
        category: String,
    },
}

impl Query {
    pub fn family(&self) -> Family {
        match self {
            Query::Existence { .. } => Family::Existence,
            Query::Count { .. } => Family::Count,
            Query::AttributeQuery { .. } => Family::AttributeQuery,
            Query::SameAttribute { .. } => Family::SameAttribute,
            Query::RelationChoose { .. } => Family::RelationChoose,
            Query::PositionalQuery { .. } => Family::PositionalQuery,
        }
    }

    pub fn question(&self) -> String {
        match self {
            Query::Existence { noun, attribute } => {
                let phrase = match attribute {
                    Some(a) => format!("{a} {noun}"),
                    None => noun.clone(),
                };
                format!("Is there {} {phrase}?", article(&phrase))
            }
            Query::Count { noun } => format!("How many {} are there?", plural(noun)),
            Query::AttributeQuery { noun, category } => format!("What {category} is the {noun}?"),
            Query::SameAttribute {
                first,
                second,
                category,
            } => format!("Is the {first} the same {category} as the {second}?"),
            Query::RelationChoose {
                subject,
                reference,
                options,
            } => {
                if options[0] == "left" {
                    format!("Is the {subject} to the left or right of the {reference}?")
                } else {
                    format!("Is the {subject} {} or {} the {reference}?", options[0], options[1])
                }
            }
            Query::PositionalQuery {
                target,
                direction,
                reference,
                category,
            } => match direction.as_str() {
                "left" | "right" => format!("What {category} is the {target} to the {direction} of the {reference}?"),
                _ => format!("What {category} is the {target} {direction} the {reference}?"),
            },
        }
    }

    /// Gold program in canonical form.
    pub fn program(&self) -> String {
        let body = match self {
            Query::Existence { noun, attribute } => match attribute {
                Some(a) => format!(
                    "var1 = image_patch.find('{noun}')\nvar2 = filter_img(var1, '{a}')\nanswer = bool_to_yesno(exists(var2))"
                ),
                None => format!("var1 = image_patch.find('{noun}')\nanswer = bool_to_yesno(exists(var1))"),
            },
            Query::Count { noun } => format!(
                "var1 = image_patch.find('{}')\nanswer = str(count(var1))",
                plural(noun)
            ),
            Query::AttributeQuery { noun, category } => {
                format!("var1 = image_patch.find('{noun}')\nanswer = var1.classify('{category}')")
            }
            Query::SameAttribute {
                first,
                second,
                category,
            } => format!(
                "var1 = image_patch.find('{first}')\nvar2 = var1.classify('{category}')\nvar3 = image_patch.find('{second}')\nvar4 = var3.classify('{category}')\nanswer = bool_to_yesno(var2 == var4)"
            ),
            Query::RelationChoose {
                subject,
                reference,
                options,
            } => format!(
                "var1 = image_patch.find('{subject}')\nvar2 = image_patch.find('{reference}')\nanswer = choose_relationship(var1, var2, ['{}', '{}'])",
                options[0], options[1]
            ),
            Query::PositionalQuery {
                target,
                direction,
                reference,
                category,
            } => format!(
                "var1 = image_patch.find('{reference}')\nvar2 = image_patch.crop_position('{direction}', var1)\nvar3 = var2.find('{target}')\nanswer = var3.classify('{category}')"
            ),
        };
        let source = format!("image_patch = ImagePatch(image)\n{body}");
        print_canonical(&parse(&source).expect("gold programs are well formed"))
    }
}

fn article(phrase: &str) -> &'static str {
    if phrase.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

fn objects_named<'a>(scene: &'a SceneGraph, noun: &'a str) -> impl Iterator<Item = &'a SceneObject> {
    scene.objects.iter().filter(move |o| o.name == noun)
}

fn attribute_of(object: &SceneObject, category: &str) -> String {
    object
        .attributes
        .iter()
        .find(|a| a.category == category)
        .map_or_else(|| UNKNOWN.to_owned(), |a| a.value.clone())
}

/// The object a question about `noun` refers to: the only one, or the
/// leftmost when there are several.
fn referent<'a>(scene: &'a SceneGraph, noun: &'a str) -> Option<&'a SceneObject> {
    objects_named(scene, noun).min_by_key(|o| (o.bbox.left, o.bbox.lower, o.id.clone()))
}

/// On which side of `reference` the center of `object` lies, edges
/// included.
fn on_side(object: &SceneObject, direction: &str, reference: &SceneObject) -> bool {
    let (x2, y2) = object.bbox.center2();
    let r = reference.bbox;
    match direction {
        "left" => x2 <= 2 * r.left,
        "right" => x2 >= 2 * r.right,
        "above" => y2 >= 2 * r.upper,
        "below" => y2 <= 2 * r.lower,
        _ => false,
    }
}

/// Answers a query by direct inspection of the scene.
pub fn reference_answer(query: &Query, scene: &SceneGraph) -> String {
    let yes_no = |b: bool| if b { "yes" } else { "no" }.to_owned();
    match query {
        Query::Existence { noun, attribute } => yes_no(objects_named(scene, noun).any(|o| {
            attribute
                .as_ref()
                .is_none_or(|a| o.attributes.iter().any(|x| &x.value == a))
        })),
        Query::Count { noun } => format!("{}", objects_named(scene, noun).count()),
        Query::AttributeQuery { noun, category } => {
            referent(scene, noun).map_or_else(|| UNKNOWN.to_owned(), |o| attribute_of(o, category))
        }
        Query::SameAttribute {
            first,
            second,
            category,
        } => {
            let value = |n: &str| referent(scene, n).map_or_else(|| UNKNOWN.to_owned(), |o| attribute_of(o, category));
            yes_no(value(first) == value(second))
        }
        Query::RelationChoose {
            subject,
            reference,
            options,
        } => match (referent(scene, subject), referent(scene, reference)) {
            (Some(a), Some(b)) => options
                .iter()
                .find(|opt| {
                    let (ax, ay) = a.bbox.center2();
                    let (bx, by) = b.bbox.center2();
                    match opt.as_str() {
                        "left" => ax < bx,
                        "right" => ax > bx,
                        "above" => ay > by,
                        "below" => ay < by,
                        _ => false,
                    }
                })
                .cloned()
                .unwrap_or_else(|| UNKNOWN.to_owned()),
            _ => UNKNOWN.to_owned(),
        },
        Query::PositionalQuery {
            target,
            direction,
            reference,
            category,
        } => {
            let Some(r) = referent(scene, reference) else {
                return UNKNOWN.to_owned();
            };
            objects_named(scene, target)
                .filter(|o| on_side(o, direction, r))
                .min_by_key(|o| (o.bbox.left, o.bbox.lower, o.id.clone()))
                .map_or_else(|| UNKNOWN.to_owned(), |o| attribute_of(o, category))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchQuestion {
    pub record: DatasetRecord,
    pub program: String,
    pub query: Query,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub scenes: Vec<SceneGraph>,
    pub questions: Vec<BenchQuestion>,
}

impl Benchmark {
    pub fn records(&self) -> Vec<DatasetRecord> {
        self.questions.iter().map(|q| q.record.clone()).collect()
    }

    pub fn gold_programs(&self) -> Vec<ProgramRecord> {
        self.questions
            .iter()
            .map(|q| ProgramRecord {
                id: q.record.id.clone(),
                program: q.program.clone(),
            })
            .collect()
    }

    pub fn scene_map(&self) -> BTreeMap<String, SceneGraph> {
        self.scenes
            .iter()
            .map(|s| (s.scene_id.clone(), s.clone()))
            .collect()
    }
}

fn sample_scene(config: &BenchmarkConfig, index: usize, rng: &mut ChaCha8Rng) -> SceneGraph {
    let mut scene = SceneGraph::new(format!("scene{index:04}"), config.width, config.height);
    let n = rng.random_range(config.objects_min..=config.objects_max);
    // A small per-scene noun palette so that some nouns repeat.
    let palette_size = n.div_ceil(2).max(2).min(config.nouns.len());
    let palette: Vec<&String> = config.nouns.choose_multiple(rng, palette_size).collect();
    let mut xs = BTreeSet::new();
    let mut ys = BTreeSet::new();
    let max_w = (config.width / 4).max(2);
    let max_h = (config.height / 4).max(2);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    while scene.objects.len() < n {
        let w = rng.random_range(2..=max_w);
        let h = rng.random_range(2..=max_h);
        let left = rng.random_range(0..=config.width - w);
        let lower = rng.random_range(0..=config.height - h);
        let bbox = BBox::new(left, lower, left + w, lower + h);
        let (x2, y2) = bbox.center2();
        if xs.contains(&x2) || ys.contains(&y2) {
            continue;
        }
        xs.insert(x2);
        ys.insert(y2);
        let name = palette.choose(rng).expect("palette is non-empty").as_str();
        let k = counts.entry(name).or_default();
        *k += 1;
        let mut object = SceneObject::new(format!("{name}#{k}"), name, bbox).with_synonym(plural(name));
        for (category, values) in &config.attributes {
            object = object.with_attribute(values.choose(rng).expect("validated").clone(), category.clone());
        }
        scene.objects.push(object);
    }
    for _ in 0..n / 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            let predicate = config.relations.choose(rng).expect("validated").clone();
            let (s, o) = (scene.objects[a].id.clone(), scene.objects[b].id.clone());
            scene = scene.with_relation(&s, &predicate, &o);
        }
    }
    scene
}

fn unique_nouns(scene: &SceneGraph) -> Vec<&str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in &scene.objects {
        *counts.entry(o.name.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c == 1)
        .map(|(n, _)| n)
        .collect()
}

fn sample_query(
    family: Family,
    scene: &SceneGraph,
    config: &BenchmarkConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Query> {
    let present: Vec<&str> = scene.objects.iter().map(|o| o.name.as_str()).collect();
    let unique = unique_nouns(scene);
    let categories: Vec<&String> = config.attributes.keys().collect();
    let any_noun = |rng: &mut ChaCha8Rng| -> String {
        if rng.random_bool(0.6) {
            (*present.choose(rng).expect("scenes are non-empty")).to_owned()
        } else {
            config.nouns.choose(rng).expect("validated").clone()
        }
    };
    let two_unique = |rng: &mut ChaCha8Rng| -> Option<(String, String)> {
        let pair: Vec<&&str> = unique.choose_multiple(rng, 2).collect();
        (pair.len() == 2).then(|| ((*pair[0]).to_owned(), (*pair[1]).to_owned()))
    };
    Some(match family {
        Family::Existence => {
            let noun = any_noun(rng);
            let attribute = rng.random_bool(0.5).then(|| {
                let values = &config.attributes[*categories.choose(rng).expect("validated")];
                values.choose(rng).expect("validated").clone()
            });
            Query::Existence { noun, attribute }
        }
        Family::Count => Query::Count { noun: any_noun(rng) },
        Family::AttributeQuery => Query::AttributeQuery {
            noun: (*unique.choose(rng)?).to_owned(),
            category: (*categories.choose(rng)?).clone(),
        },
        Family::SameAttribute => {
            let (first, second) = two_unique(rng)?;
            Query::SameAttribute {
                first,
                second,
                category: (*categories.choose(rng)?).clone(),
            }
        }
        Family::RelationChoose => {
            let (subject, reference) = two_unique(rng)?;
            let options = if rng.random_bool(0.5) {
                ["left".to_owned(), "right".to_owned()]
            } else {
                ["above".to_owned(), "below".to_owned()]
            };
            Query::RelationChoose {
                subject,
                reference,
                options,
            }
        }
        Family::PositionalQuery => {
            let (target, reference) = two_unique(rng)?;
            let t = referent(scene, &target)?;
            let r = referent(scene, &reference)?;
            let sides: Vec<&str> = ["left", "right", "above", "below"]
                .into_iter()
                .filter(|d| on_side(t, d, r))
                .collect();
            Query::PositionalQuery {
                target,
                direction: (*sides.choose(rng)?).to_owned(),
                reference,
                category: (*categories.choose(rng)?).clone(),
            }
        }
    })
}

fn pick_family(config: &BenchmarkConfig, rng: &mut ChaCha8Rng) -> Family {
    let mut x: f64 = rng.random();
    for (family, weight) in &config.family_weights {
        if x < *weight {
            return *family;
        }
        x -= weight;
    }
    *config
        .family_weights
        .iter()
        .rev()
        .find(|(_, w)| **w > 0.0)
        .expect("weights sum to 1")
        .0
}

/// Generates scenes and questions. Gold answers come from executing the
/// gold program and must agree with [`reference_answer`].
pub fn gen_bench(config: &BenchmarkConfig) -> Result<Benchmark, ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut bench = Benchmark::default();
    let limits = Limits::default();
    for s in 0..config.n_scenes {
        let scene = sample_scene(config, s, &mut rng);
        scene
            .validate()
            .map_err(|e| ConfigError::Layout(format!("{e}")))?;
        let mut asked = BTreeSet::new();
        let mut attempts = 0;
        while asked.len() < config.questions_per_scene && attempts < 50 * config.questions_per_scene {
            attempts += 1;
            let family = pick_family(config, &mut rng);
            let Some(query) = sample_query(family, &scene, config, &mut rng) else {
                continue;
            };
            let question = query.question();
            if !asked.insert(question.clone()) {
                continue;
            }
            let id = format!("{}-q{:02}", scene.scene_id, asked.len() - 1);
            let program = query.program();
            let gold = match run_source(&program, &scene, limits) {
                ExecOutcome::Answer { text } => text,
                ExecOutcome::Failure(f) => format!("<{}>", f.kind),
            };
            let reference = reference_answer(&query, &scene);
            if gold != reference {
                return Err(ConfigError::GoldMismatch { id, gold, reference });
            }
            bench.questions.push(BenchQuestion {
                record: DatasetRecord {
                    id,
                    question,
                    answer: gold,
                    scene_id: scene.scene_id.clone(),
                    split: "train".into(),
                },
                program,
                query,
            });
        }
        bench.scenes.push(scene);
    }
    Ok(bench)
}

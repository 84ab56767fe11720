//! Adapters from public VQA dataset files to dataset records, and seeded
//! subsampling.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vpdistill_core::dataset::DatasetRecord;

/// Per-question annotator answers, used by the agreement accuracy metric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorAnswers {
    pub id: String,
    pub answers: Vec<String>,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("malformed {format} file: {message}")]
    Malformed { format: &'static str, message: String },
    #[error("question {0} has no annotation")]
    MissingAnnotation(String),
}

#[derive(Deserialize)]
struct GqaQuestion {
    question: String,
    #[serde(default)]
    answer: Option<String>,
    #[serde(rename = "imageId")]
    image_id: String,
}

/// GQA question files map question ids to `{question, answer, imageId, ...}`.
/// Records come out sorted by id.
pub fn gqa_records(json: &str, split: &str) -> Result<Vec<DatasetRecord>, AdapterError> {
    let parsed: BTreeMap<String, GqaQuestion> =
        serde_json::from_str(json).map_err(|e| AdapterError::Malformed {
            format: "GQA",
            message: e.to_string(),
        })?;
    Ok(parsed
        .into_iter()
        .map(|(id, q)| DatasetRecord {
            id,
            question: q.question,
            answer: q.answer.unwrap_or_default(),
            scene_id: q.image_id,
            split: split.to_owned(),
        })
        .collect())
}

#[derive(Deserialize)]
struct VqaQuestions {
    questions: Vec<VqaQuestion>,
}

#[derive(Deserialize)]
struct VqaQuestion {
    question_id: u64,
    image_id: u64,
    question: String,
}

#[derive(Deserialize)]
struct VqaAnnotations {
    annotations: Vec<VqaAnnotation>,
}

#[derive(Deserialize)]
struct VqaAnnotation {
    question_id: u64,
    multiple_choice_answer: String,
    #[serde(default)]
    answers: Vec<VqaAnswer>,
}

#[derive(Deserialize)]
struct VqaAnswer {
    answer: String,
}

/// Joins VQAv2 question and annotation files. Records keep the order of the
/// question file.
pub fn vqav2_records(
    questions_json: &str,
    annotations_json: &str,
    split: &str,
) -> Result<(Vec<DatasetRecord>, Vec<AnnotatorAnswers>), AdapterError> {
    let malformed = |e: serde_json::Error| AdapterError::Malformed {
        format: "VQAv2",
        message: e.to_string(),
    };
    let questions: VqaQuestions = serde_json::from_str(questions_json).map_err(malformed)?;
    let annotations: VqaAnnotations = serde_json::from_str(annotations_json).map_err(malformed)?;
    let by_id: BTreeMap<u64, VqaAnnotation> = annotations
        .annotations
        .into_iter()
        .map(|a| (a.question_id, a))
        .collect();
    let mut records = Vec::with_capacity(questions.questions.len());
    let mut answers = Vec::with_capacity(questions.questions.len());
    for q in questions.questions {
        let id = q.question_id.to_string();
        let a = by_id
            .get(&q.question_id)
            .ok_or_else(|| AdapterError::MissingAnnotation(id.clone()))?;
        records.push(DatasetRecord {
            id: id.clone(),
            question: q.question,
            answer: a.multiple_choice_answer.clone(),
            scene_id: q.image_id.to_string(),
            split: split.to_owned(),
        });
        answers.push(AnnotatorAnswers {
            id,
            answers: a.answers.iter().map(|x| x.answer.clone()).collect(),
        });
    }
    Ok((records, answers))
}

/// How many items to keep. `sample_n` wins over `fraction`; a positive
/// fraction keeps at least one item.
pub fn sample_size(len: usize, fraction: Option<f64>, sample_n: Option<usize>) -> usize {
    match (sample_n, fraction) {
        (Some(n), _) => n.min(len),
        (None, Some(f)) if f > 0.0 => ((len as f64 * f).floor() as usize).clamp(1, len.max(1)).min(len),
        (None, Some(_)) => 0,
        (None, None) => len,
    }
}

/// Seeded uniform sample without replacement; survivors keep their order.
pub fn sample<T: Clone>(items: &[T], fraction: Option<f64>, sample_n: Option<usize>, seed: u64) -> Vec<T> {
    let n = sample_size(items.len(), fraction, sample_n);
    if n == items.len() {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, items.len(), n).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| items[i].clone()).collect()
}

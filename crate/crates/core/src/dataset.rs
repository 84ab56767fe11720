//! Row types shared by the pipeline stages.

use alloc::string::String;

use serde::{Deserialize, Serialize};

/// A question with its ground-truth answer and the scene it is asked about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub scene_id: String,
    #[serde(default)]
    pub split: String,
}

/// A record whose teacher program reproduced the ground-truth answer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatedRecord {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub scene_id: String,
    #[serde(default)]
    pub split: String,
    pub program: String,
}

impl ValidatedRecord {
    pub fn new(record: &DatasetRecord, program: String) -> Self {
        ValidatedRecord {
            id: record.id.clone(),
            question: record.question.clone(),
            answer: record.answer.clone(),
            scene_id: record.scene_id.clone(),
            split: record.split.clone(),
            program,
        }
    }
}

/// Program produced for a record, e.g. by a student model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub id: String,
    pub program: String,
}

/// One row of the training export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub question: String,
    pub program: String,
}

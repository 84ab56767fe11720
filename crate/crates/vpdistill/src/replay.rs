//! Replay files of recorded teacher completions.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vpdistill_core::teacher::{prompt_question, ReplayTeacher, TeacherClient, TransportError};

use crate::io::{read_jsonl, IoError};

/// One line of a replay file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub question: String,
    pub completion: String,
}

pub fn load_replay(path: &Path) -> Result<ReplayTeacher, IoError> {
    let records: Vec<ReplayRecord> = read_jsonl(path)?;
    Ok(ReplayTeacher::new(
        records.into_iter().map(|r| (r.question, r.completion)),
    ))
}

/// Wraps a teacher and keeps every successful completion so a live run can
/// be archived and replayed later.
pub struct RecordingTeacher<T> {
    inner: T,
    pub records: Vec<ReplayRecord>,
}

impl<T: TeacherClient> RecordingTeacher<T> {
    pub fn new(inner: T) -> Self {
        RecordingTeacher {
            inner,
            records: Vec::new(),
        }
    }
}

impl<T: TeacherClient> TeacherClient for RecordingTeacher<T> {
    fn generate(&mut self, prompt: &str) -> Result<String, TransportError> {
        let completion = self.inner.generate(prompt)?;
        self.records.push(ReplayRecord {
            question: prompt_question(prompt).unwrap_or_default(),
            completion: completion.clone(),
        });
        Ok(completion)
    }
}

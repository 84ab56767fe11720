//! Wall-clock generation throughput.

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub const MIN_SAMPLE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub questions_per_second: f64,
    pub sample: usize,
}

/// Runs `generate` on `warmup` questions untimed, then times the rest.
/// Returns `None` when fewer than [`MIN_SAMPLE`] questions remain.
pub fn measure<S: AsRef<str>>(
    questions: &[S],
    warmup: usize,
    mut generate: impl FnMut(&str),
) -> Option<Throughput> {
    let warmup = warmup.min(questions.len());
    let (head, timed) = questions.split_at(warmup);
    if timed.len() < MIN_SAMPLE {
        return None;
    }
    head.iter().for_each(|q| generate(q.as_ref()));
    let start = Instant::now();
    timed.iter().for_each(|q| generate(q.as_ref()));
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    Some(Throughput {
        questions_per_second: timed.len() as f64 / secs,
        sample: timed.len(),
    })
}

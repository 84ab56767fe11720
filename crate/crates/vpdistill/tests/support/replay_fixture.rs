#![allow(dead_code)]

//! Archived teacher run used by the replay tests: 1000 benchmark questions,
//! 474 recorded completions that validate and 526 that do not.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use vpdistill::io::{load_scenes, read_jsonl, write_jsonl};
use vpdistill::replay::ReplayRecord;
use vpdistill_core::bench::{gen_bench, BenchmarkConfig};
use vpdistill_core::dataset::DatasetRecord;
use vpdistill_core::exec::{run_source, ExecOutcome, Limits};
use vpdistill_core::scene::SceneGraph;
use vpdistill_core::teacher::{corrupt, Disposition, CORRUPTIONS};

pub const SEED: u64 = 474;
pub const QUESTIONS: usize = 1000;
pub const VALIDATED: usize = 474;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expected {
    pub id: String,
    pub disposition: Disposition,
    pub reason: Option<String>,
}

#[derive(Debug, PartialEq)]
pub struct Fixture {
    pub scenes: Vec<SceneGraph>,
    pub dataset: Vec<DatasetRecord>,
    pub completions: Vec<ReplayRecord>,
    pub expected: Vec<Expected>,
}

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/replay")
}

/// Why `program` fails on `scene`, or None when it answers `gold`.
fn failure_reason(program: &str, scene: &SceneGraph, gold: &str) -> Option<String> {
    let outcome = run_source(program, scene, Limits::default());
    match outcome {
        _ if outcome.matches(gold) => None,
        ExecOutcome::Answer { .. } => Some("WrongAnswer".to_owned()),
        ExecOutcome::Failure(f) => Some(f.kind.to_string()),
    }
}

pub fn build() -> Fixture {
    let bench = gen_bench(&BenchmarkConfig {
        seed: SEED,
        ..BenchmarkConfig::default()
    })
    .expect("default benchmark config is valid");
    assert_eq!(bench.questions.len(), QUESTIONS);
    let scenes = bench.scene_map();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut keep = vec![false; QUESTIONS];
    for i in rand::seq::index::sample(&mut rng, QUESTIONS, VALIDATED) {
        keep[i] = true;
    }

    let mut completions = Vec::with_capacity(QUESTIONS);
    let mut expected = Vec::with_capacity(QUESTIONS);
    for (i, q) in bench.questions.iter().enumerate() {
        let scene = &scenes[&q.record.scene_id];
        let (completion, reason) = if keep[i] {
            // Some completions arrive fenced, as chat models tend to send them.
            let text = if i % 5 == 0 {
                format!("```python\n{}\n```", q.program)
            } else {
                q.program.clone()
            };
            assert!(failure_reason(&q.program, scene, &q.record.answer).is_none());
            (text, None)
        } else {
            let broken = (0..CORRUPTIONS.len())
                .map(|j| corrupt(&q.program, CORRUPTIONS[(i + j) % CORRUPTIONS.len()]))
                .find_map(|p| failure_reason(&p, scene, &q.record.answer).map(|r| (p, r)));
            match broken {
                Some((p, r)) => (p, Some(r)),
                None => {
                    let p = format!("{}\nanswer=str(unbound)", q.program);
                    let r = failure_reason(&p, scene, &q.record.answer).expect("unbound name fails");
                    (p, Some(r))
                }
            }
        };
        completions.push(ReplayRecord {
            question: q.record.question.clone(),
            completion,
        });
        expected.push(Expected {
            id: q.record.id.clone(),
            disposition: if reason.is_none() {
                Disposition::Validated
            } else {
                Disposition::Discarded
            },
            reason,
        });
    }
    Fixture {
        dataset: bench.records(),
        scenes: bench.scenes,
        completions,
        expected,
    }
}

pub fn load() -> Fixture {
    let d = dir();
    Fixture {
        scenes: load_scenes(&d.join("scenes.jsonl")).expect("fixture scenes"),
        dataset: read_jsonl(&d.join("dataset.jsonl")).expect("fixture dataset"),
        completions: read_jsonl(&d.join("completions.jsonl")).expect("fixture completions"),
        expected: read_jsonl(&d.join("expected.jsonl")).expect("fixture partition"),
    }
}

pub fn write(fixture: &Fixture) {
    let d = dir();
    write_jsonl(&d.join("scenes.jsonl"), &fixture.scenes).unwrap();
    write_jsonl(&d.join("dataset.jsonl"), &fixture.dataset).unwrap();
    write_jsonl(&d.join("completions.jsonl"), &fixture.completions).unwrap();
    write_jsonl(&d.join("expected.jsonl"), &fixture.expected).unwrap();
}

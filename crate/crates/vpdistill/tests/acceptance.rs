//! One test per acceptance criterion. Each prints a PASS/FAIL line with the
//! measured numbers; run with `--nocapture` to see them on success.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vpdistill_core::analysis::{accuracy_vqa, check_program, ngram_entropy, static_check, CheckLexicon, Flag, FlagSet};
use vpdistill_core::augment::{
    augment_stream, plan_replacements, record_rng, AugmentOptions, CategoryLexicon, ReplacementPolicy,
};
use vpdistill_core::bench::{gen_bench, reference_answer, Benchmark, BenchmarkConfig};
use vpdistill_core::exec::{run_source, ExecOutcome, FailureKind, Limits};
use vpdistill_core::teacher::{
    annotate, retrieve, unsound_entries, AnnotationRunConfig, Disposition, Embedder, ExamplePool,
    HashedEmbedder, OracleTeacher, ReplayTeacher,
};
use vpdistill_core::template::{extract, TemplateRecord};
use vpdistill_core::{parse, print_canonical, rename_variables};

#[path = "../../core/tests/support/strategies.rs"]
mod strategies;
#[path = "support/replay_fixture.rs"]
mod replay_fixture;

fn report(name: &str, ok: bool, detail: String, elapsed: Duration) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("{status} {name}: {detail} ({:.2?})", elapsed);
}

fn bench(seed: u64, n_scenes: usize) -> Benchmark {
    gen_bench(&BenchmarkConfig {
        seed,
        n_scenes,
        ..BenchmarkConfig::default()
    })
    .unwrap()
}

fn gold_records(bench: &Benchmark) -> Vec<TemplateRecord> {
    bench
        .questions
        .iter()
        .map(|q| {
            extract(&q.record.question, &q.program)
                .unwrap()
                .with_source(q.record.id.clone())
        })
        .collect()
}

fn renamed(src: &str) -> String {
    print_canonical(&rename_variables(&parse(src).unwrap()))
}

#[test]
fn c01_renamer_conformance() {
    let start = Instant::now();
    // Expected outputs traced by hand through the reference visitor.
    let cases = [
        (
            "image_patch = ImagePatch(image)\ndog = image_patch.find('dog')\nanswer = dog.classify('color')",
            "image_patch=ImagePatch(image)\nvar1=image_patch.find('dog')\nanswer=var1.classify('color')",
        ),
        (
            "area = 0\nfor patch in patches:\n    area = area + patch.width\nanswer = str(area)",
            "var1=0\nfor temp_var_1 in patches:\n    var1=var1 + temp_var_1.width\nanswer=str(var1)",
        ),
        (
            "image_patch = ImagePatch(image)\ncups = image_patch.find('cup')\nred = [c for c in cups if c.verify_property('red')]\nanswer = bool_to_yesno(exists(red))",
            "image_patch=ImagePatch(image)\nvar1=image_patch.find('cup')\nvar2=[temp_var_1 for temp_var_1 in var1 if temp_var_1.verify_property('red')]\nanswer=bool_to_yesno(exists(var2))",
        ),
        (
            "with open_region(image_patch) as region:\n    n = count(items)\nanswer = str(n)",
            "with open_region(image_patch) as temp_var_1:\n    var1=count(items)\nanswer=str(var1)",
        ),
    ];
    let mismatches: Vec<String> = cases
        .iter()
        .filter_map(|(src, want)| {
            let got = renamed(src);
            (got != *want).then(|| format!("{src:?} gave {got:?}"))
        })
        .collect();
    let elapsed = start.elapsed();
    let ok = mismatches.is_empty() && elapsed < Duration::from_secs(1);
    report("renamer conformance", ok, format!("{} fixtures, mismatches {mismatches:?}", cases.len()), elapsed);
    assert!(ok);
}

#[test]
fn c02_round_trip_property() {
    let start = Instant::now();
    let mut runner = TestRunner::new_with_rng(
        Config {
            cases: 1000,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    );
    let cases = std::cell::Cell::new(0usize);
    let result = runner.run(&strategies::program(), |p| {
        cases.set(cases.get() + 1);
        let text = print_canonical(&p);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        if back != p {
            return Err(TestCaseError::fail(format!("reparsed differently:\n{text}")));
        }
        Ok(())
    });
    let cases = cases.get();
    let ok = result.is_ok() && cases >= 1000;
    report("round-trip property", ok, format!("{cases} programs, result {result:?}"), start.elapsed());
    assert!(ok);
}

#[test]
fn c03_template_invariance() {
    let start = Instant::now();
    let lexicon = CategoryLexicon::builtin();
    let check_lex = CheckLexicon::default();
    let mut checked = 0usize;
    let mut failures = Vec::new();
    let mut seed = 100;
    while checked < 10_000 {
        let records = gold_records(&bench(seed, 100));
        let parents: BTreeMap<&str, &TemplateRecord> =
            records.iter().map(|r| (r.source_id.as_str(), r)).collect();
        let policy = ReplacementPolicy {
            seed,
            ..ReplacementPolicy::default()
        };
        let (pairs, _) = augment_stream(&records, &AugmentOptions::new(10, &lexicon, policy));
        for pair in pairs.iter().take(10_000 - checked) {
            checked += 1;
            let parent = parents[pair.parent_id.as_str()];
            if parse(&pair.program).is_err() {
                failures.push(format!("{}: does not parse", pair.id));
                continue;
            }
            match extract(&pair.question, &pair.program) {
                Ok(r) if r.template == parent.template => {}
                _ => failures.push(format!("{}: template changed", pair.id)),
            }
            if static_check(&pair.program, &pair.question, &check_lex).contains(&Flag::NotExecutable) {
                failures.push(format!("{}: statically not executable", pair.id));
            }
        }
        seed += 1;
    }
    let ok = failures.is_empty();
    report(
        "template invariance",
        ok,
        format!("{checked} augmentations, {} failures {:?}", failures.len(), failures.iter().take(5).collect::<Vec<_>>()),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn c04_replacement_rate() {
    let start = Instant::now();
    let lexicon = CategoryLexicon::builtin();
    let records = gold_records(&bench(7, 100));
    let policy = ReplacementPolicy {
        probability: 0.5,
        seed: 7,
        ..ReplacementPolicy::default()
    };
    let (mut decisions, mut selected) = (0usize, 0usize);
    let mut attempt = 0u64;
    while decisions < 100_000 {
        for record in &records {
            let mut rng = record_rng(policy.seed, &record.source_id, attempt);
            let plan = plan_replacements(record, &lexicon, &policy, &mut rng);
            decisions += plan.decisions;
            selected += plan.selected;
        }
        attempt += 1;
    }
    let rate = selected as f64 / decisions as f64;
    // Goodness of fit against 50/50 with one degree of freedom.
    let expected = decisions as f64 / 2.0;
    let chi2 = (selected as f64 - expected).powi(2) / expected
        + ((decisions - selected) as f64 - expected).powi(2) / expected;
    let critical = 6.634_896_601_021_214;
    let elapsed = start.elapsed();
    let ok = (rate - 0.5).abs() <= 0.01 && chi2 < critical && elapsed < Duration::from_secs(10);
    report(
        "replacement rate",
        ok,
        format!("{selected}/{decisions} = {rate:.4}, chi2 {chi2:.3} < {critical:.3}"),
        elapsed,
    );
    assert!(ok);
}

/// Selection by repeated maximum, lowest insertion index on ties.
fn brute_force_top_k(query: &[f64], embeddings: &[Vec<f64>], k: usize) -> Vec<usize> {
    if embeddings.len() <= k {
        return (0..embeddings.len()).collect();
    }
    let score = |v: &[f64]| {
        let dot: f64 = query.iter().zip(v).map(|(a, b)| a * b).sum();
        let na: f64 = query.iter().map(|a| a * a).sum();
        let nb: f64 = v.iter().map(|b| b * b).sum();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            dot / (na.sqrt() * nb.sqrt())
        }
    };
    let scores: Vec<f64> = embeddings.iter().map(|v| score(v)).collect();
    let mut taken = vec![false; scores.len()];
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..scores.len() {
            if !taken[i] && best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        out.push(b);
    }
    out
}

#[test]
fn c05_retrieval_oracle() {
    let start = Instant::now();
    const WORDS: &[&str] = &[
        "is", "the", "there", "a", "what", "color", "dog", "cat", "left", "right", "of", "table", "chair",
        "how", "many", "red", "blue", "small", "large", "on", "are", "same", "material", "shape", "car",
    ];
    let embedder = HashedEmbedder::default();
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let question = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(2..8);
        (0..n).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
    };
    let mut sizes: Vec<usize> = (0..20).map(|_| rng.random_range(60..=500)).collect();
    // Pools at or under k pass through untouched.
    sizes.extend([50, 12]);
    let mut mismatches = Vec::new();
    for &size in &sizes {
        let mut pool = ExamplePool::new();
        let mut embeddings = Vec::new();
        while pool.len() < size {
            let q = question(&mut rng);
            let program = format!("answer={}", pool.len());
            if pool.push(&q, &program, "", "", &embedder) {
                embeddings.push(embedder.embed(&q));
            }
        }
        for _ in 0..5 {
            let q = question(&mut rng);
            let got: Vec<usize> = retrieve(&q, &pool, 50, &embedder)
                .iter()
                .map(|e| e.inserted_at_index)
                .collect();
            let want = brute_force_top_k(&embedder.embed(&q), &embeddings, 50);
            if got != want {
                mismatches.push((size, q));
            }
        }
    }
    let ok = mismatches.is_empty();
    report(
        "retrieval oracle",
        ok,
        format!("{} pools x 5 queries, mismatches {mismatches:?}", sizes.len()),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn c06_executor_oracle() {
    let start = Instant::now();
    let b = bench(606, 100);
    let scenes = b.scene_map();
    let mut disagreements = Vec::new();
    for q in &b.questions {
        let scene = &scenes[&q.record.scene_id];
        let got = run_source(&q.program, scene, Limits::default());
        let want = reference_answer(&q.query, scene);
        if got.answer() != Some(want.as_str()) {
            disagreements.push(format!("{}: {got:?} vs {want}", q.record.id));
        }
    }
    let exemplar = "image_patch = ImagePatch(image)\nchair = image_patch.find('chair')\nside = choose_relationship(chair, image_patch, 'left or right')\nanswer = side";
    let scene = scenes.values().next().unwrap();
    let list_argument_error = match run_source(exemplar, scene, Limits::default()) {
        ExecOutcome::Failure(f) => f.kind == FailureKind::TypeError && f.message.contains("list"),
        ExecOutcome::Answer { .. } => false,
    };
    let ok = disagreements.is_empty() && list_argument_error;
    report(
        "executor oracle",
        ok,
        format!(
            "{} questions on {} scenes, disagreements {:?}, list-argument TypeError {list_argument_error}",
            b.questions.len(),
            scenes.len(),
            disagreements.iter().take(5).collect::<Vec<_>>()
        ),
        start.elapsed(),
    );
    assert!(ok);
}

fn simulate(seed: u64) -> (Vec<f64>, usize, String) {
    let b = bench(seed, 100);
    let records = b.records();
    let scenes = b.scene_map();
    let mut teacher = OracleTeacher::new(
        b.questions.iter().map(|q| (q.record.question.clone(), q.program.clone())),
        seed,
    );
    let embedder = HashedEmbedder::default();
    let mut pool = ExamplePool::new();
    let config = AnnotationRunConfig {
        seed,
        ..AnnotationRunConfig::default()
    };
    let run = annotate(&records, &scenes, &mut teacher, &embedder, &mut pool, &config);
    let n = run.log.len();
    let rates = (0..10)
        .map(|d| {
            let chunk = &run.log[d * n / 10..(d + 1) * n / 10];
            chunk.iter().filter(|l| l.disposition == Disposition::Validated).count() as f64 / chunk.len() as f64
        })
        .collect();
    let unsound = unsound_entries(&pool, &scenes, Limits::default()).len();
    (rates, unsound, format!("{:?}{:?}", run.log, pool.entries()))
}

#[test]
fn c07_end_to_end_simulation() {
    let start = Instant::now();
    let (rates, unsound, digest) = simulate(2025);
    let (again, _, digest_again) = simulate(2025);
    let elapsed = start.elapsed();
    let gain = rates[9] - rates[0];
    let deterministic = rates == again && digest == digest_again;
    let ok = unsound == 0 && gain >= 0.15 && deterministic && elapsed < Duration::from_secs(120);
    report(
        "end-to-end simulation",
        ok,
        format!("decile rates {rates:?}, gain {gain:.2}, unsound {unsound}, deterministic {deterministic}"),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn c08_entropy_direction() {
    let start = Instant::now();
    let b = bench(88, 10);
    let records = gold_records(&b);
    let source: Vec<String> = records.iter().map(|r| r.question.clone()).collect();
    let lexicon = CategoryLexicon::builtin();
    let policy = ReplacementPolicy {
        seed: 88,
        ..ReplacementPolicy::default()
    };
    let (pairs, _) = augment_stream(&records, &AugmentOptions::new(10, &lexicon, policy));
    let mut augmented = source.clone();
    augmented.extend(pairs.iter().map(|p| p.question.clone()));
    let h_source = ngram_entropy(&source, 2);
    let h_augmented = ngram_entropy(&augmented, 2);

    // A repeated question has zero entropy once each question is a single n-gram.
    let repeated = vec!["Is there a red car?"; 20];
    let mut fixtures_ok = ngram_entropy(&repeated, 5).abs() < 1e-9;
    for k in [2usize, 4, 7, 16] {
        let corpus: Vec<String> = (0..k).map(|i| format!("w{i} v{i}")).collect();
        fixtures_ok &= (ngram_entropy(&corpus, 2) - (k as f64).log2()).abs() < 1e-9;
    }
    let ok = h_augmented > h_source && fixtures_ok;
    report(
        "entropy direction",
        ok,
        format!(
            "source {h_source:.3} bits ({} questions) < augmented {h_augmented:.3} bits ({} questions), fixtures {fixtures_ok}",
            source.len(),
            augmented.len()
        ),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn c09_checker_taxonomy() {
    let start = Instant::now();
    let lex = CheckLexicon::default();
    let with_patch = |lines: &[&str]| format!("image_patch = ImagePatch(image)\n{}", lines.join("\n"));
    let exemplars = [
        (
            "Is the chair left or right?",
            with_patch(&[
                "chair = image_patch.find('chair')",
                "side = choose_relationship(chair, image_patch, 'left or right')",
                "answer = side",
            ]),
            Flag::NotExecutable,
        ),
        (
            "What color is the running dog on the left?",
            with_patch(&[
                "left_part = image_patch.crop_position('running left', image_patch)",
                "dog = left_part.find('dog')",
                "answer = dog[0].classify('color')",
            ]),
            Flag::ApiViolation,
        ),
        (
            "What color is the car above the road?",
            with_patch(&[
                "road = image_patch.find('road')",
                "below_road = image_patch.crop_position('below', road)",
                "car = below_road.find('car')",
                "answer = car[0].classify('color')",
            ]),
            Flag::ContradictsQuestion,
        ),
        (
            "Are there two tables?",
            with_patch(&["num = count(image_patch.find('table'))", "answer = str(num)"]),
            Flag::DoesNotAnswerQuestion,
        ),
        (
            "Is the blue toy small?",
            with_patch(&["toy = image_patch.find('toy')", "answer = bool_to_yesno(toy.verify_property('small'))"]),
            Flag::MissingQuestionInformation,
        ),
    ];
    let mut wrong = Vec::new();
    for (question, program, flag) in &exemplars {
        let (mut flags, heuristic) = check_program(question, program, &lex);
        flags.extend(heuristic);
        if flags != FlagSet::from([*flag]) {
            wrong.push(format!("{question:?}: {flags:?}, wanted {flag:?}"));
        }
    }
    let b = bench(909, 100);
    let mut flagged_gold = Vec::new();
    for q in &b.questions {
        let (s, h) = check_program(&q.record.question, &q.program, &lex);
        if !s.is_empty() || !h.is_empty() {
            flagged_gold.push(format!("{}: {s:?} {h:?}", q.record.id));
        }
    }
    let ok = wrong.is_empty() && flagged_gold.is_empty();
    report(
        "checker taxonomy",
        ok,
        format!(
            "exemplar mismatches {wrong:?}; {} of {} gold programs flagged {:?}",
            flagged_gold.len(),
            b.questions.len(),
            flagged_gold.iter().take(5).collect::<Vec<_>>()
        ),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn c10_replay_conformance() {
    let start = Instant::now();
    let fixture = replay_fixture::load();
    let scenes = fixture
        .scenes
        .iter()
        .map(|s| (s.scene_id.clone(), s.clone()))
        .collect();
    let mut teacher = ReplayTeacher::new(
        fixture
            .completions
            .iter()
            .map(|r| (r.question.clone(), r.completion.clone())),
    );
    let mut pool = ExamplePool::new();
    let run = annotate(
        &fixture.dataset,
        &scenes,
        &mut teacher,
        &HashedEmbedder::default(),
        &mut pool,
        &AnnotationRunConfig::default(),
    );
    let got: Vec<replay_fixture::Expected> = run
        .log
        .iter()
        .map(|l| replay_fixture::Expected {
            id: l.id.clone(),
            disposition: l.disposition.clone(),
            reason: l.reason.clone(),
        })
        .collect();
    let differing = got.iter().zip(&fixture.expected).filter(|(a, b)| a != b).count();
    let ok = got == fixture.expected && run.stats.validated == replay_fixture::VALIDATED && teacher.remaining() == 0;
    report(
        "replay conformance",
        ok,
        format!(
            "{} validated of {} ({} differing records, {} completions unused)",
            run.stats.validated,
            run.stats.processed,
            differing,
            teacher.remaining()
        ),
        start.elapsed(),
    );
    assert!(ok);
}

/// Leave-one-out folds written out literally: for each annotator, count
/// matches among the other nine and cap at three.
fn vqa_oracle_thirtieths(prediction: &str, annotators: &[&str]) -> usize {
    let mut total = 0;
    for left_out in 0..annotators.len() {
        let matches = annotators
            .iter()
            .enumerate()
            .filter(|(i, a)| *i != left_out && **a == prediction)
            .count();
        total += matches.min(3);
    }
    total
}

#[test]
fn c11_vqa_agreement_metric() {
    let start = Instant::now();
    const ANSWERS: &[&str] = &["yes", "no", "2", "3", "red", "blue", "cat", "dog"];
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut max_error = 0.0f64;
    let mut histogram = [0usize; 11];
    for _ in 0..1000 {
        let prediction = ANSWERS[rng.random_range(0..ANSWERS.len())];
        // Bias annotators toward the prediction so every match count shows up.
        let bias = rng.random_range(0.0..1.0);
        let annotators: Vec<&str> = (0..10)
            .map(|_| {
                if rng.random_bool(bias) {
                    prediction
                } else {
                    ANSWERS[rng.random_range(0..ANSWERS.len())]
                }
            })
            .collect();
        histogram[annotators.iter().filter(|a| **a == prediction).count()] += 1;
        let oracle = vqa_oracle_thirtieths(prediction, &annotators) as f64 / 30.0;
        max_error = max_error.max((accuracy_vqa(prediction, &annotators) - oracle).abs());
    }
    let ok = max_error == 0.0;
    report(
        "VQA agreement metric",
        ok,
        format!("1000 sets, match-count histogram {histogram:?}, max abs error {max_error}"),
        start.elapsed(),
    );
    assert!(ok);
}

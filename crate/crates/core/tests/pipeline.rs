use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use lemma_engine::ablate::{ablate, RunFile};
use lemma_engine::baseline::baseline_most_frequent;
use lemma_engine::conllu::{parse_bytes, Document};
use lemma_engine::corpus::{self, Granularity, LoadOptions, SourceMap, TrainingSet};
use lemma_engine::eval::{evaluate, score_documents, EvalOptions};
use lemma_engine::model::{annotate_document, Annotator};
use lemma_engine::par::Execution;
use lemma_engine::train::{train, Hyperparams, TrainOutcome};

fn latin(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/latin")
        .join(name)
}

fn load(granularity: Option<Granularity>) -> TrainingSet {
    let mut map = SourceMap::from_json_file(&latin("corpus.json")).unwrap();
    if let Some(g) = granularity {
        map.granularity = g;
    }
    corpus::load_corpora(&map, &LoadOptions::default()).unwrap()
}

fn hp() -> Hyperparams {
    Hyperparams {
        epochs: 5,
        dim: 1 << 18,
        ..Hyperparams::default()
    }
}

/// The held-out split and the model trained on the rest, shared by tests.
fn trained() -> &'static (TrainingSet, TrainingSet, TrainOutcome) {
    static CELL: OnceLock<(TrainingSet, TrainingSet, TrainOutcome)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (train_part, held_out) = corpus::split(&load(None), 0.1, 42);
        let outcome = train(&train_part, &hp()).unwrap();
        (train_part, held_out, outcome)
    })
}

fn as_document(ts: &TrainingSet) -> Document {
    Document {
        sentences: ts.sentences.iter().map(|s| s.sentence.clone()).collect(),
    }
}

#[test]
fn granularity_cardinalities() {
    let map = SourceMap::from_json_file(&latin("corpus.json")).unwrap();
    let expected = [8, 4, 2, 1];
    for (g, n) in Granularity::ALL.into_iter().zip(expected) {
        let map = SourceMap {
            granularity: g,
            ..map.clone()
        };
        let mut ids: Vec<_> = map
            .corpora
            .iter()
            .map(|c| map.resolve(&c.name, c.author.as_deref()).unwrap())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n, "{g}");
        assert_eq!(map.num_ids(), n);
        assert!(!ids.contains(&map.unknown_id()));
    }
}

#[test]
fn trained_model_beats_baseline_on_held_out() {
    let (train_part, held_out, outcome) = trained();
    let gold = as_document(held_out);
    let baseline = baseline_most_frequent(train_part);
    let source = outcome.params.sources.unknown;
    let exec = Execution::default();
    let opts = EvalOptions::default();
    let model = evaluate(&outcome.params, "held-out", &gold, source, None, opts, exec).unwrap();
    let base = evaluate(&baseline, "held-out", &gold, source, None, opts, exec).unwrap();
    let (ml, mu) = (
        model.lemma_accuracy().unwrap(),
        model.upos_accuracy().unwrap(),
    );
    let (bl, bu) = (
        base.lemma_accuracy().unwrap(),
        base.upos_accuracy().unwrap(),
    );
    println!("model {ml:.2}/{mu:.2} baseline {bl:.2}/{bu:.2}");
    assert!(ml >= bl && mu >= bu);
    assert!(ml >= 80.0);
}

#[test]
fn loss_never_exceeds_first_epoch() {
    let (_, _, outcome) = trained();
    let first = outcome.epochs[0].loss;
    assert!(outcome.epochs.iter().all(|e| e.loss <= first));
    let best = &outcome.epochs[outcome.best_epoch - 1];
    assert!(outcome.epochs.iter().all(|e| e.dev_lemma <= best.dev_lemma));
}

#[test]
fn training_is_deterministic() {
    let (train_part, _, outcome) = trained();
    let again = train(train_part, &hp()).unwrap();
    assert_eq!(again.params.to_bytes(), outcome.params.to_bytes());
}

#[test]
fn evaluation_matches_naive_recount() {
    let (_, held_out, outcome) = trained();
    let gold = as_document(held_out);
    let mut input = gold.clone();
    input.strip_annotations();
    let system = annotate_document(
        &outcome.params,
        &input,
        outcome.params.sources().unknown,
        None,
        Execution::default(),
    )
    .unwrap();
    let score = score_documents("x", &system, &gold, EvalOptions::default()).unwrap();

    let (mut ok, mut n) = (0, 0);
    for (s, g) in system.sentences.iter().zip(&gold.sentences) {
        for (a, b) in s.tokens.iter().zip(&g.tokens) {
            if b.is_word() {
                n += 1;
                ok += usize::from(a.lemma == b.lemma);
            }
        }
    }
    assert_eq!((score.lemma.correct, score.lemma.scored), (ok, n));
}

#[test]
fn every_fixture_file_predicts_without_errors() {
    let (_, _, outcome) = trained();
    for name in ["classical", "cross-genre", "cross-time", "caesar", "ittb"] {
        let bytes = std::fs::read(latin(&format!("{name}.conllu"))).unwrap();
        let doc = parse_bytes(&bytes).unwrap();
        for source in [Some(name), None, Some("nobody")] {
            let id = outcome.params.sources.lookup(source);
            let out = annotate_document(&outcome.params, &doc, id, None, Execution::Sequential);
            assert!(out.is_ok(), "{name}");
        }
    }
}

#[test]
fn ablation_repeats_identical_rows() {
    let text = r#"{"runs":[
        {"name":"a","corpus_config":"corpus.json","granularity":"merged",
         "hyperparams":{"epochs":2,"dim":65536},
         "tests":[{"path":"classical.conllu","group":"classical"},
                  {"path":"cross-genre.conllu","group":"cross-genre"},
                  {"path":"cross-time.conllu","group":"cross-time"}]},
        {"name":"b","corpus_config":"corpus.json","granularity":"merged",
         "hyperparams":{"epochs":2,"dim":65536},
         "tests":[{"path":"classical.conllu","group":"classical"},
                  {"path":"cross-genre.conllu","group":"cross-genre"},
                  {"path":"cross-time.conllu","group":"cross-time"}]}]}"#;
    let file = RunFile::from_json_str(text, &latin("")).unwrap();
    let report = ablate(&file, EvalOptions::default(), Execution::default());
    assert_eq!(report.failures().count(), 0);
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows[0].outcome, report.rows[1].outcome);
    let tsv = report.to_tsv();
    let lines: Vec<&str> = tsv.lines().collect();
    assert_eq!(lines[0].split('\t').count(), 4 + 6);
    assert_eq!(
        lines[1].split('\t').skip(1).collect::<Vec<_>>(),
        lines[2].split('\t').skip(1).collect::<Vec<_>>()
    );
    assert!(lines[1].contains("\tmerged\t"));
}

#[test]
fn tests_can_be_routed_to_another_runs_model() {
    let text = r#"{"runs":[
        {"name":"in-domain","corpus_config":"corpus.json","granularity":"per-author-per-treebank",
         "hyperparams":{"epochs":1,"dim":4096},
         "tests":[{"path":"classical.conllu","group":"classical","source":"caesar"}]},
        {"name":"routed","corpus_config":"corpus.json","granularity":"merged",
         "hyperparams":{"epochs":1,"dim":4096},
         "tests":[{"path":"classical.conllu","group":"classical","source":"caesar","model":"in-domain"}]}]}"#;
    let file = RunFile::from_json_str(text, &latin("")).unwrap();
    let report = ablate(&file, EvalOptions::default(), Execution::Sequential);
    assert_eq!(report.rows[0].outcome, report.rows[1].outcome);
    assert_eq!(report.rows[1].granularity, Some(Granularity::Merged));
}

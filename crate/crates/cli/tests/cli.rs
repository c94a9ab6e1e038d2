use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use lemma_engine::conllu::{parse_document, serialize_document, Document, Sentence, Token};
use lemma_engine::model::ModelParams;
use proptest::prelude::*;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/data")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lemma-engine"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Model memorizing the two-listing example, shared across tests.
fn intro_model() -> &'static Path {
    static MODEL: OnceLock<(tempfile::TempDir, PathBuf)> = OnceLock::new();
    let (_, path) = MODEL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("intro.model");
        let out = run(&[
            "train",
            p(&data("intro_corpus.json")),
            "--out",
            p(&path),
            "--epochs",
            "20",
            "--dev-fraction",
            "0",
            "--dim",
            "4096",
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (dir, path)
    });
    path
}

#[test]
fn rules_table() {
    let config = data("latin/corpus.json");
    let out = run(&["rules", p(&config), "--top", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "rule\tfrequency\texamples");
    assert!(lines[1].starts_with("↓0;d¦\t"));
    assert!(lines[1].split('\t').nth(2).unwrap().split(' ').count() <= 5);

    let out = run(&["rules", p(&config), "--top", "0"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "rule\tfrequency\texamples\n");

    let out = run(&["rules", "/no/such/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_1() {
    let out = run(&["train", p(&data("intro_corpus.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["rules", p(&data("intro_corpus.json")), "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = run(&["predict"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("runs.json");
    std::fs::write(&empty, r#"{"runs":[]}"#).unwrap();
    assert_eq!(run(&["ablate", p(&empty)]).status.code(), Some(1));
    let out = run(&[
        "train",
        p(&data("intro_corpus.json")),
        "--out",
        p(&dir.path().join("m")),
        "--epochs",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn predict_reproduces_memorized_example() {
    let out = run(&["predict", p(intro_model()), p(&data("intro.conllu"))]);
    assert!(out.status.success());
    let doc = parse_document(&stdout(&out)).unwrap();
    let got: Vec<(String, String)> = doc.sentences[0]
        .words()
        .map(|t| (t.lemma.clone().unwrap(), t.upos.clone().unwrap()))
        .collect();
    let want = [
        ("dum", "SCONJ"),
        ("hic", "DET"),
        ("in", "ADP"),
        ("Hispania", "PROPN"),
        ("gero", "VERB"),
        ("Gaius", "PROPN"),
        ("Trebonius", "PROPN"),
    ];
    let want: Vec<(String, String)> = want
        .iter()
        .map(|(l, u)| (l.to_string(), u.to_string()))
        .collect();
    assert_eq!(got, want);
    assert!(stdout(&out).starts_with("# sent_id = 1\n"));
}

#[test]
fn predict_passes_ranges_through_and_accepts_unknown_source() {
    let input = std::fs::read_to_string(data("ranges.conllu")).unwrap();
    let out = run(&[
        "predict",
        p(intro_model()),
        p(&data("ranges.conllu")),
        "--source",
        "nobody",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("1-2\tNobiscum\t_\t_\t_\t_\t_\t_\t_\t_\n"));
    assert!(text.contains("3.1\tvenit\tvenio\tVERB\t_\t_\t_\t_\t3:conj\t_\n"));
    assert_eq!(text.lines().count(), input.lines().count());
}

#[test]
fn predict_rejects_bad_inputs() {
    assert_eq!(
        run(&["predict", "/no/model", p(&data("intro.conllu"))])
            .status
            .code(),
        Some(2)
    );
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.model");
    std::fs::write(&junk, b"not a model").unwrap();
    assert_eq!(
        run(&["predict", p(&junk), p(&data("intro.conllu"))])
            .status
            .code(),
        Some(2)
    );
    let bad = dir.path().join("bad.conllu");
    std::fs::write(&bad, "1\tonly three\tcolumns\n").unwrap();
    assert_eq!(
        run(&["predict", p(intro_model()), p(&bad)]).status.code(),
        Some(2)
    );
}

#[test]
fn merged_granularity_trains_single_source() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.model");
    let out = run(&[
        "train",
        p(&data("latin/corpus.json")),
        "--granularity",
        "merged",
        "--epochs",
        "1",
        "--dim",
        "1024",
        "--out",
        p(&model),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch 1"));
    let params = ModelParams::load(&model).unwrap();
    // one known id plus the reserved generic id
    assert_eq!(params.config.num_sources, 2);
    assert!(params.sources.names.iter().all(|(_, id)| id.0 == 0));
}

#[test]
fn eval_reports_and_denominators() {
    let gold = data("intro_gold.conllu");
    let out = run(&["eval", "--predicted", p(&gold), p(&gold)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\t100.00\t100.00\t7\n"));

    let dir = tempfile::tempdir().unwrap();
    let mut doc = parse_document(&std::fs::read_to_string(&gold).unwrap()).unwrap();
    doc.sentences[0].tokens[5].lemma = None;
    let partial = dir.path().join("partial.conllu");
    std::fs::write(&partial, serialize_document(&doc)).unwrap();
    let mut sys = doc.clone();
    sys.sentences[0].tokens[4].lemma = Some("geruntur".into());
    let system = dir.path().join("system.conllu");
    std::fs::write(&system, serialize_document(&sys)).unwrap();
    let out = run(&["eval", "--predicted", p(&system), p(&partial)]);
    // 5 of 6 annotated lemmas right
    assert!(
        stdout(&out).contains("\t83.33\t100.00\t7\n"),
        "{}",
        stdout(&out)
    );

    let files =
        ["classical", "cross-genre", "cross-time"].map(|g| data(&format!("latin/{g}.conllu")));
    let mut args = vec!["eval"];
    for f in &files {
        args.extend(["--predicted", p(f)]);
    }
    for f in &files {
        args.push(p(f));
    }
    for g in ["classical", "cross-genre", "cross-time"] {
        args.extend(["--group", g]);
    }
    let out = run(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let table: Vec<&str> = text.lines().skip_while(|l| !l.is_empty()).skip(1).collect();
    assert_eq!(
        table[0].split_whitespace().collect::<Vec<_>>(),
        ["classical", "cross-genre", "cross-time"]
    );
    assert!(table[1].starts_with("Lemmatization") && table[1].matches("100.00").count() == 3);

    let empty = dir.path().join("empty.conllu");
    std::fs::write(&empty, "1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n\n").unwrap();
    assert_eq!(
        run(&["eval", "--predicted", p(&empty), p(&empty)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn predict_output_is_valid_eval_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["predict", p(intro_model()), p(&data("intro.conllu"))]);
    let predicted = dir.path().join("pred.conllu");
    std::fs::write(&predicted, &out.stdout).unwrap();
    let out = run(&[
        "eval",
        "--predicted",
        p(&predicted),
        p(&data("intro_gold.conllu")),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("\t100.00\t100.00\t7\n"));
}

#[test]
fn ablate_summary_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = dir.path().join("grid.tsv");
    let out = run(&["ablate", p(&data("latin/ablate.json")), "--out", p(&tsv)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = stdout(&out);
    let delta_line = summary.lines().last().unwrap();
    assert!(delta_line.starts_with("with vectors - without"));
    let deltas: Vec<&str> = delta_line
        .rsplit("  ")
        .filter(|s| !s.trim().is_empty())
        .collect();
    for d in &deltas[..6] {
        let d = d.trim();
        assert!(d.starts_with('+') || d.starts_with('-'), "{d}");
        assert_eq!(d.split('.').nth(1).unwrap().len(), 3, "{d}");
    }
    let grid = std::fs::read_to_string(&tsv).unwrap();
    assert_eq!(grid.lines().count(), 5);

    let broken = dir.path().join("broken.json");
    std::fs::write(
        &broken,
        format!(
            r#"{{"runs":[{{"name":"bad","corpus_config":"/no/such.json","tests":[]}},
            {{"name":"good","corpus_config":"{}","hyperparams":{{"epochs":1,"dim":1024}},
              "tests":[{{"path":"{}","group":"classical"}}]}}]}}"#,
            p(&data("intro_corpus.json")),
            p(&data("intro_gold.conllu"))
        ),
    )
    .unwrap();
    let out = run(&["ablate", p(&broken), "--out", p(&tsv)]);
    assert_eq!(out.status.code(), Some(2));
    let grid = std::fs::read_to_string(&tsv).unwrap();
    assert!(grid.contains("bad\t-\tno\tfailed"));
    assert!(grid.contains("good\tmerged\tno\tok"));
}

fn sentence_strategy() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(
        (
            "[A-Za-z]{1,8}",
            prop::option::of("[a-z]{1,6}"),
            "[A-Za-z=|]{1,8}",
        ),
        1..8,
    )
    .prop_map(|words| Sentence {
        comments: vec!["# text = generated".into()],
        tokens: words
            .into_iter()
            .enumerate()
            .map(|(i, (form, lemma, misc))| {
                let mut t = Token::new(i + 1, form);
                t.lemma = lemma;
                t.feats = misc.clone();
                t.misc = misc;
                t.head = i.to_string();
                t
            })
            .collect(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn predict_touches_only_lemma_and_upos(sentences in prop::collection::vec(sentence_strategy(), 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.conllu");
        let text = serialize_document(&Document { sentences });
        std::fs::write(&input, &text).unwrap();
        let out = run(&["predict", p(intro_model()), p(&input)]);
        prop_assert!(out.status.success());
        let produced = stdout(&out);
        prop_assert_eq!(produced.lines().count(), text.lines().count());
        for (a, b) in text.lines().zip(produced.lines()) {
            let (ca, cb): (Vec<&str>, Vec<&str>) = (a.split('\t').collect(), b.split('\t').collect());
            prop_assert_eq!(ca.len(), cb.len());
            for (i, (x, y)) in ca.iter().zip(&cb).enumerate() {
                if i != 2 && i != 3 {
                    prop_assert_eq!(x, y);
                }
            }
        }
    }
}

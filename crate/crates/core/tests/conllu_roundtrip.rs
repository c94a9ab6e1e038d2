use std::path::{Path, PathBuf};

use lemma_engine::conllu::{
    parse_bytes, parse_document, serialize_document, Document, ParseErrorKind, Sentence, Token,
    TokenId,
};
use proptest::prelude::*;

fn fixtures() -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut out = Vec::new();
    for dir in [root.clone(), root.join("latin")] {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "conllu") {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn every_fixture_round_trips_byte_for_byte() {
    let files = fixtures();
    assert!(files.len() >= 14);
    for path in files {
        let bytes = std::fs::read(&path).unwrap();
        let doc = parse_bytes(&bytes).unwrap();
        assert_eq!(
            serialize_document(&doc).as_bytes(),
            &bytes[..],
            "{}",
            path.display()
        );
    }
}

#[test]
fn ranges_and_empty_nodes_are_kept() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/ranges.conllu");
    let doc = parse_bytes(&std::fs::read(path).unwrap()).unwrap();
    let s = &doc.sentences[0];
    assert_eq!(s.comments.len(), 3);
    assert_eq!(s.tokens[0].id, TokenId::Range(1, 2));
    assert_eq!(s.tokens[4].id, TokenId::Empty(3, 1));
    assert_eq!(s.word_count(), 4);
    assert_eq!(doc.word_count(), 7);
}

#[test]
fn malformed_input_is_reported_with_line() {
    let err = parse_document("1\ta\t_\n").unwrap_err();
    assert_eq!((err.line, err.kind), (1, ParseErrorKind::ColumnCount(3)));
    let err =
        parse_document("1\ta\t_\t_\t_\t_\t_\t_\t_\t_\n3\tb\t_\t_\t_\t_\t_\t_\t_\t_\n").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(matches!(err.kind, ParseErrorKind::NonMonotoneId { .. }));
    let err = parse_bytes(b"# ok\n1\t\xff\t_\t_\t_\t_\t_\t_\t_\t_\n").unwrap_err();
    assert_eq!((err.line, err.kind), (2, ParseErrorKind::InvalidUtf8));
}

fn field() -> impl Strategy<Value = String> {
    "[^\t\n\r_]{1,6}|_"
}

fn sentence() -> impl Strategy<Value = Sentence> {
    (
        prop::collection::vec("# [^\n]{0,12}", 0..3),
        prop::collection::vec(
            (
                field(),
                prop::option::of(field()),
                any::<bool>(),
                any::<u8>(),
            ),
            1..7,
        ),
    )
        .prop_map(|(comments, words)| {
            let mut tokens = Vec::new();
            let n = words.len();
            let mut covered = 0;
            for (i, (form, lemma, annotated, extra)) in words.into_iter().enumerate() {
                let id = i + 1;
                if extra % 5 == 0 && id < n && id > covered {
                    covered = id + 1;
                    let mut range = Token::new(1, format!("{form}{form}"));
                    range.id = TokenId::Range(id, id + 1);
                    tokens.push(range);
                }
                let mut t = Token::new(id, form.clone());
                if annotated {
                    t.lemma = lemma.filter(|l| l != "_");
                    t.upos = Some("NOUN".into());
                    t.misc = format!("Extra={extra}");
                }
                tokens.push(t);
                if extra % 7 == 0 {
                    let mut empty = Token::new(1, form);
                    empty.id = TokenId::Empty(id, 1);
                    tokens.push(empty);
                }
            }
            Sentence { comments, tokens }
        })
}

proptest! {
    #[test]
    fn serialize_parse_serialize(sentences in prop::collection::vec(sentence(), 0..5)) {
        let doc = Document { sentences };
        let text = serialize_document(&doc);
        let back = parse_document(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(serialize_document(&back), text);
    }
}

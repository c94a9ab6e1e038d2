//! Lossless CoNLL-U reading and writing.
//!
//! Only FORM, LEMMA and UPOS are interpreted; every other column and every
//! comment line is carried through untouched.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("invalid token id {0:?}")]
    BadId(String),
    #[error("token id {found} out of sequence, expected {expected}")]
    NonMonotoneId { found: String, expected: String },
    #[error("empty FORM column")]
    BlankForm,
    #[error("comment after token lines")]
    MisplacedComment,
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
}

/// Token id column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenId {
    /// A syntactic word, `n`.
    Single(usize),
    /// A multiword token, `a-b`.
    Range(usize, usize),
    /// An empty node, `a.b`.
    Empty(usize, usize),
}

impl TokenId {
    pub fn is_word(self) -> bool {
        matches!(self, TokenId::Single(_))
    }
}

fn parse_index(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0'))
    {
        return None;
    }
    s.parse().ok()
}

impl FromStr for TokenId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if let Some((a, b)) = s.split_once('-') {
            let (a, b) = (parse_index(a).ok_or(())?, parse_index(b).ok_or(())?);
            if a == 0 || b <= a {
                return Err(());
            }
            Ok(TokenId::Range(a, b))
        } else if let Some((a, b)) = s.split_once('.') {
            let (a, b) = (parse_index(a).ok_or(())?, parse_index(b).ok_or(())?);
            if b == 0 {
                return Err(());
            }
            Ok(TokenId::Empty(a, b))
        } else {
            match parse_index(s) {
                Some(n) if n > 0 => Ok(TokenId::Single(n)),
                _ => Err(()),
            }
        }
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenId::Single(n) => write!(f, "{n}"),
            TokenId::Range(a, b) => write!(f, "{a}-{b}"),
            TokenId::Empty(a, b) => write!(f, "{a}.{b}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub form: String,
    pub lemma: Option<String>,
    pub upos: Option<String>,
    pub xpos: String,
    pub feats: String,
    pub head: String,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A syntactic word with only FORM set.
    pub fn new(id: usize, form: impl Into<String>) -> Self {
        let blank = || "_".to_owned();
        Token {
            id: TokenId::Single(id),
            form: form.into(),
            lemma: None,
            upos: None,
            xpos: blank(),
            feats: blank(),
            head: blank(),
            deprel: blank(),
            deps: blank(),
            misc: blank(),
        }
    }

    pub fn is_word(&self) -> bool {
        self.id.is_word()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sentence {
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Syntactic words, skipping multiword ranges and empty nodes.
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word())
    }

    pub fn words_mut(&mut self) -> impl Iterator<Item = &mut Token> {
        self.tokens.iter_mut().filter(|t| t.is_word())
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::word_count).sum()
    }

    /// Clears LEMMA and UPOS on every syntactic word.
    pub fn strip_annotations(&mut self) {
        for token in self.sentences.iter_mut().flat_map(|s| s.words_mut()) {
            token.lemma = None;
            token.upos = None;
        }
    }
}

fn optional(col: &str) -> Option<String> {
    (col != "_").then(|| col.to_owned())
}

/// Tracks id ordering inside one sentence.
#[derive(Default)]
struct IdCursor {
    last_word: usize,
    last_empty: Option<(usize, usize)>,
    range_end: usize,
}

impl IdCursor {
    fn accept(&mut self, id: TokenId) -> Result<(), ParseErrorKind> {
        let out_of_order = |expected: String| ParseErrorKind::NonMonotoneId {
            found: id.to_string(),
            expected,
        };
        match id {
            TokenId::Single(n) => {
                if n != self.last_word + 1 {
                    return Err(out_of_order((self.last_word + 1).to_string()));
                }
                self.last_word = n;
                self.last_empty = None;
            }
            TokenId::Range(a, b) => {
                if a != self.last_word + 1 || a <= self.range_end {
                    return Err(out_of_order(format!("{}-…", self.last_word + 1)));
                }
                self.range_end = b;
            }
            TokenId::Empty(a, b) => {
                let expected_minor = match self.last_empty {
                    Some((major, minor)) if major == a => minor + 1,
                    _ => 1,
                };
                if a != self.last_word || b != expected_minor {
                    return Err(out_of_order(format!(
                        "{}.{}",
                        self.last_word, expected_minor
                    )));
                }
                self.last_empty = Some((a, b));
            }
        }
        Ok(())
    }
}

/// Parses raw bytes, rejecting invalid UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<Document, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_document(text),
        Err(e) => {
            let line = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            Err(ParseError {
                line,
                kind: ParseErrorKind::InvalidUtf8,
            })
        }
    }
}

pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    let mut doc = Document::default();
    let mut current = Sentence::default();
    let mut cursor = IdCursor::default();
    let mut open = false;

    for (idx, line) in text.split('\n').enumerate() {
        let err = |kind| ParseError {
            line: idx + 1,
            kind,
        };
        if line.is_empty() {
            if open {
                doc.sentences.push(std::mem::take(&mut current));
                cursor = IdCursor::default();
                open = false;
            }
            continue;
        }
        open = true;
        if line.starts_with('#') {
            if !current.tokens.is_empty() {
                return Err(err(ParseErrorKind::MisplacedComment));
            }
            current.comments.push(line.to_owned());
            continue;
        }

        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(err(ParseErrorKind::ColumnCount(cols.len())));
        }
        let id: TokenId = cols[0]
            .parse()
            .map_err(|_| err(ParseErrorKind::BadId(cols[0].to_owned())))?;
        cursor.accept(id).map_err(err)?;
        if cols[1].is_empty() {
            return Err(err(ParseErrorKind::BlankForm));
        }
        current.tokens.push(Token {
            id,
            form: cols[1].to_owned(),
            lemma: optional(cols[2]),
            upos: optional(cols[3]),
            xpos: cols[4].to_owned(),
            feats: cols[5].to_owned(),
            head: cols[6].to_owned(),
            deprel: cols[7].to_owned(),
            deps: cols[8].to_owned(),
            misc: cols[9].to_owned(),
        });
    }
    if open {
        doc.sentences.push(current);
    }
    Ok(doc)
}

pub fn serialize_document(doc: &Document) -> String {
    let mut out = String::new();
    for sentence in &doc.sentences {
        write_sentence(&mut out, sentence);
    }
    out
}

pub fn write_sentence(out: &mut String, sentence: &Sentence) {
    for comment in &sentence.comments {
        out.push_str(comment);
        out.push('\n');
    }
    for t in &sentence.tokens {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            t.id,
            t.form,
            t.lemma.as_deref().unwrap_or("_"),
            t.upos.as_deref().unwrap_or("_"),
            t.xpos,
            t.feats,
            t.head,
            t.deprel,
            t.deps,
            t.misc
        );
    }
    out.push('\n');
}

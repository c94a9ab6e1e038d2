//! Per-token dense vector sidecar files.
//!
//! Line 1 holds the vector width. Every following line is one syntactic word
//! in document order, TAB-separated reals; a blank line ends each sentence.

use std::fmt::Write as _;

use thiserror::Error;

use crate::conllu::Document;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("vector file is missing its width line")]
    MissingWidth,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("vector file has {found} sentences, document has {expected}")]
    SentenceCount { found: usize, expected: usize },
    #[error("sentence {sentence}: vector file has {found} rows, document has {expected} words")]
    WordCount {
        sentence: usize,
        found: usize,
        expected: usize,
    },
}

/// Vectors for one sentence, one row per syntactic word.
pub type SentenceVectors = Vec<Vec<f32>>;

#[derive(Clone, Debug, PartialEq)]
pub struct VectorFile {
    pub width: usize,
    pub sentences: Vec<SentenceVectors>,
}

impl VectorFile {
    pub fn parse(text: &str) -> Result<Self, VectorError> {
        let mut lines = text.lines().enumerate();
        let width = match lines.next() {
            Some((_, line)) if !line.trim().is_empty() => {
                line.trim()
                    .parse::<usize>()
                    .map_err(|_| VectorError::Malformed {
                        line: 1,
                        reason: format!("invalid width {line:?}"),
                    })?
            }
            _ => return Err(VectorError::MissingWidth),
        };

        let mut sentences = Vec::new();
        let mut current: SentenceVectors = Vec::new();
        let mut open = false;
        for (idx, line) in lines {
            if line.is_empty() {
                sentences.push(std::mem::take(&mut current));
                open = false;
                continue;
            }
            open = true;
            let row = line
                .split('\t')
                .map(|v| v.parse::<f32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| VectorError::Malformed {
                    line: idx + 1,
                    reason: e.to_string(),
                })?;
            if row.len() != width {
                return Err(VectorError::Malformed {
                    line: idx + 1,
                    reason: format!("expected {width} values, found {}", row.len()),
                });
            }
            current.push(row);
        }
        if open {
            sentences.push(current);
        }
        Ok(VectorFile { width, sentences })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.width);
        for sentence in &self.sentences {
            for row in sentence {
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        out.push('\t');
                    }
                    let _ = write!(out, "{v}");
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    /// Checks that the file lines up with the words of `doc`.
    pub fn check_alignment(&self, doc: &Document) -> Result<(), VectorError> {
        if self.sentences.len() != doc.sentences.len() {
            return Err(VectorError::SentenceCount {
                found: self.sentences.len(),
                expected: doc.sentences.len(),
            });
        }
        for (i, (vecs, sentence)) in self.sentences.iter().zip(&doc.sentences).enumerate() {
            let words = sentence.word_count();
            if vecs.len() != words {
                return Err(VectorError::WordCount {
                    sentence: i,
                    found: vecs.len(),
                    expected: words,
                });
            }
        }
        Ok(())
    }
}

//! The joint two-head classifier: one feature vector per token feeds a UPOS
//! softmax head and a lemma-rule softmax head.

use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{Document, Sentence};
use crate::corpus::{RuleEntry, RuleInventory, SourceId, SourceTable};
use crate::features::{sentence_features, FeatureConfig, FeatureVector};
use crate::par::{self, Execution};
use crate::rule::{LemmaRule, IDENTITY_RULE};
use crate::vectors::{SentenceVectors, VectorFile};

/// File magic, followed by a newline.
pub const MAGIC: &str = "LEMMA-ENGINE/1";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("external vectors have width {found}, model expects {expected}")]
    DenseWidthMismatch { expected: usize, found: usize },
    #[error("sentence has {words} words but {rows} vector rows")]
    VectorRows { words: usize, rows: usize },
    #[error("source id {0} outside the model's {1} sources")]
    SourceOutOfRange(u32, usize),
    #[error("vector file has {found} sentences, document has {expected}")]
    VectorSentences { expected: usize, found: usize },
    #[error("not a model file (bad magic or version)")]
    BadMagic,
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("model i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Weights of one softmax head, stored as one dense row of class weights
/// per active feature column.
#[derive(Clone, Debug, Default)]
pub struct Head {
    classes: usize,
    rows: FnvHashMap<u32, usize>,
    data: Vec<f32>,
}

impl PartialEq for Head {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.rows.len() == other.rows.len()
            && self.rows.keys().all(|&col| self.row(col) == other.row(col))
    }
}

impl Head {
    pub fn new(classes: usize) -> Self {
        Head {
            classes,
            ..Head::default()
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, col: u32) -> Option<&[f32]> {
        self.rows
            .get(&col)
            .map(|&off| &self.data[off..off + self.classes])
    }

    fn row_mut(&mut self, col: u32) -> &mut [f32] {
        let classes = self.classes;
        let next = self.data.len();
        let off = *self.rows.entry(col).or_insert(next);
        if off == next {
            self.data.resize(next + classes, 0.0);
        }
        &mut self.data[off..off + classes]
    }

    /// Raw scores for every class.
    pub fn scores(&self, fv: &FeatureVector, config: &FeatureConfig, out: &mut Vec<f32>) {
        out.clear();
        out.resize(self.classes, 0.0);
        for (col, value) in fv.columns(config) {
            if let Some(row) = self.row(col) {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += w * value;
                }
            }
        }
    }

    /// `w[col][c] -= lr * value * grad[c]` for every active column; classes
    /// with a zero gradient are left alone.
    pub(crate) fn update(
        &mut self,
        fv: &FeatureVector,
        config: &FeatureConfig,
        grad: &[(usize, f32)],
        lr: f32,
    ) {
        for (col, value) in fv.columns(config) {
            let row = self.row_mut(col);
            for &(c, g) in grad {
                row[c] -= lr * value * g;
            }
        }
    }

    /// Drops every row whose column satisfies `pred`.
    pub fn remove_columns(&mut self, pred: impl Fn(u32) -> bool) {
        let mut kept = Head::new(self.classes);
        for col in self.sorted_columns() {
            if !pred(col) {
                let row = self.row(col).unwrap().to_vec();
                kept.row_mut(col).copy_from_slice(&row);
            }
        }
        *self = kept;
    }

    fn sorted_columns(&self) -> Vec<u32> {
        let mut cols: Vec<u32> = self.rows.keys().copied().collect();
        cols.sort_unstable();
        cols
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.classes as u64).to_le_bytes());
        out.extend_from_slice(&(self.rows.len() as u64).to_le_bytes());
        for col in self.sorted_columns() {
            out.extend_from_slice(&col.to_le_bytes());
            for w in self.row(col).unwrap() {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
    }

    fn read_from(input: &mut &[u8]) -> Result<Self, ModelError> {
        let classes = read_u64(input)? as usize;
        let rows = read_u64(input)? as usize;
        let needed = rows
            .checked_mul(4 + 4 * classes)
            .ok_or_else(|| ModelError::Corrupt("row table overflows".into()))?;
        if input.len() < needed {
            return Err(ModelError::Corrupt("truncated weights".into()));
        }
        let mut head = Head::new(classes);
        head.data.reserve(rows * classes);
        for _ in 0..rows {
            let col = read_u32(input)?;
            if head.rows.contains_key(&col) {
                return Err(ModelError::Corrupt(format!("duplicate column {col}")));
            }
            let row = head.row_mut(col);
            for w in row.iter_mut() {
                let (bytes, rest) = input.split_at(4);
                *w = f32::from_le_bytes(bytes.try_into().unwrap());
                *input = rest;
            }
        }
        Ok(head)
    }
}

fn read_u64(input: &mut &[u8]) -> Result<u64, ModelError> {
    if input.len() < 8 {
        return Err(ModelError::Corrupt("truncated file".into()));
    }
    let (bytes, rest) = input.split_at(8);
    *input = rest;
    Ok(u64::from_le_bytes(bytes.try_into().unwrap()))
}

fn read_u32(input: &mut &[u8]) -> Result<u32, ModelError> {
    if input.len() < 4 {
        return Err(ModelError::Corrupt("truncated file".into()));
    }
    let (bytes, rest) = input.split_at(4);
    *input = rest;
    Ok(u32::from_le_bytes(bytes.try_into().unwrap()))
}

/// Trained parameters. Immutable once training returns.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: FeatureConfig,
    pub upos_labels: Vec<String>,
    pub inventory: RuleInventory,
    pub sources: SourceTable,
    pub upos_head: Head,
    pub rule_head: Head,
    /// Characters each rule consumes, indexed by class.
    consumed: Vec<usize>,
}

/// One token's output.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Position in `sentence.tokens`.
    pub token: usize,
    pub upos: Option<String>,
    pub rule: LemmaRule,
    pub lemma: String,
    pub upos_score: f32,
    pub rule_score: f32,
}

/// Anything that can fill LEMMA and UPOS for a sentence.
pub trait Annotator: Sync {
    fn predict(
        &self,
        sentence: &Sentence,
        source: SourceId,
        ext: Option<&SentenceVectors>,
    ) -> Result<Vec<Prediction>, ModelError>;

    fn sources(&self) -> &SourceTable;

    /// Width of the external vectors the annotator expects.
    fn dense_width(&self) -> usize {
        0
    }
}

/// A class and its softmax probability.
type Scored = (usize, f32);

fn softmax_max(scores: &[f32], allowed: impl Iterator<Item = usize> + Clone) -> Option<Scored> {
    let mut best: Option<Scored> = None;
    for c in allowed.clone() {
        if best.is_none_or(|(_, s)| scores[c] > s) {
            best = Some((c, scores[c]));
        }
    }
    let (arg, max) = best?;
    let z: f32 = allowed.map(|c| (scores[c] - max).exp()).sum();
    Some((arg, 1.0 / z))
}

impl ModelParams {
    pub fn new(
        config: FeatureConfig,
        upos_labels: Vec<String>,
        inventory: RuleInventory,
        sources: SourceTable,
    ) -> Self {
        let consumed = inventory
            .entries()
            .iter()
            .map(|e| e.rule.consumed())
            .collect();
        ModelParams {
            upos_head: Head::new(upos_labels.len()),
            rule_head: Head::new(inventory.len()),
            config,
            upos_labels,
            inventory,
            sources,
            consumed,
        }
    }

    /// Whether rule class `c` can be applied to a form of `len` characters.
    pub fn applicable(&self, class: usize, len: usize) -> bool {
        self.consumed[class] <= len
    }

    pub(crate) fn applicable_classes(
        &self,
        len: usize,
    ) -> impl Iterator<Item = usize> + Clone + '_ {
        self.consumed
            .iter()
            .enumerate()
            .filter(move |(_, &n)| n <= len)
            .map(|(c, _)| c)
    }

    pub(crate) fn check_inputs(
        &self,
        sentence: &Sentence,
        source: SourceId,
        ext: Option<&SentenceVectors>,
    ) -> Result<(), ModelError> {
        if source.index() >= self.config.num_sources {
            return Err(ModelError::SourceOutOfRange(
                source.0,
                self.config.num_sources,
            ));
        }
        let width = self.config.dense_width;
        match ext {
            None if width > 0 => Err(ModelError::DenseWidthMismatch {
                expected: width,
                found: 0,
            }),
            None => Ok(()),
            Some(rows) => {
                let words = sentence.word_count();
                if rows.len() != words {
                    return Err(ModelError::VectorRows {
                        words,
                        rows: rows.len(),
                    });
                }
                match rows.iter().find(|r| r.len() != width) {
                    Some(r) => Err(ModelError::DenseWidthMismatch {
                        expected: width,
                        found: r.len(),
                    }),
                    None if width == 0 && !rows.is_empty() => Err(ModelError::DenseWidthMismatch {
                        expected: 0,
                        found: rows[0].len(),
                    }),
                    None => Ok(()),
                }
            }
        }
    }

    /// Best UPOS and best applicable rule for one feature vector.
    pub(crate) fn decide(
        &self,
        fv: &FeatureVector,
        form_len: usize,
        scratch: &mut Vec<f32>,
    ) -> (Option<Scored>, Option<Scored>) {
        self.upos_head.scores(fv, &self.config, scratch);
        let upos = softmax_max(scratch, 0..self.upos_labels.len());
        self.rule_head.scores(fv, &self.config, scratch);
        let rule = softmax_max(scratch, self.applicable_classes(form_len));
        (upos, rule)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.config.clone(),
            upos_labels: self.upos_labels.clone(),
            rules: self
                .inventory
                .entries()
                .iter()
                .map(|e| StoredRule {
                    rule: e.name.clone(),
                    frequency: e.frequency,
                    examples: e.examples.clone(),
                })
                .collect(),
            sources: self.sources.clone(),
            note: "hashed feature collisions are accepted".into(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        self.upos_head.write_to(&mut out);
        self.rule_head.write_to(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let mut input = bytes
            .strip_prefix(MAGIC.as_bytes())
            .and_then(|rest| rest.strip_prefix(b"\n"))
            .ok_or(ModelError::BadMagic)?;
        let len = read_u64(&mut input)? as usize;
        if input.len() < len {
            return Err(ModelError::Corrupt("truncated header".into()));
        }
        let (header, mut input) = input.split_at(len);
        let header: Header =
            serde_json::from_slice(header).map_err(|e| ModelError::Corrupt(e.to_string()))?;
        let entries = header
            .rules
            .into_iter()
            .map(|r| {
                let rule: LemmaRule = r
                    .rule
                    .parse()
                    .map_err(|e| ModelError::Corrupt(format!("{e}")))?;
                Ok(RuleEntry {
                    rule,
                    name: r.rule,
                    frequency: r.frequency,
                    examples: r.examples,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let mut params = ModelParams::new(
            header.config,
            header.upos_labels,
            RuleInventory::from_entries(entries),
            header.sources,
        );
        params.upos_head = Head::read_from(&mut input)?;
        params.rule_head = Head::read_from(&mut input)?;
        if !input.is_empty() {
            return Err(ModelError::Corrupt("trailing bytes".into()));
        }
        if params.upos_head.classes != params.upos_labels.len()
            || params.rule_head.classes != params.inventory.len()
        {
            return Err(ModelError::Corrupt(
                "head size does not match labels".into(),
            ));
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct StoredRule {
    rule: String,
    frequency: u64,
    examples: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: FeatureConfig,
    upos_labels: Vec<String>,
    rules: Vec<StoredRule>,
    sources: SourceTable,
    note: String,
}

impl Annotator for ModelParams {
    fn predict(
        &self,
        sentence: &Sentence,
        source: SourceId,
        ext: Option<&SentenceVectors>,
    ) -> Result<Vec<Prediction>, ModelError> {
        predict_sentence(self, sentence, source, ext)
    }

    fn sources(&self) -> &SourceTable {
        &self.sources
    }

    fn dense_width(&self) -> usize {
        self.config.dense_width
    }
}

/// Predicts UPOS and lemma for every syntactic word of `sentence`.
///
/// The rule head only considers rules applicable to the form; if none is,
/// the identity rule is used.
pub fn predict_sentence(
    params: &ModelParams,
    sentence: &Sentence,
    source: SourceId,
    ext: Option<&SentenceVectors>,
) -> Result<Vec<Prediction>, ModelError> {
    params.check_inputs(sentence, source, ext)?;
    let words: Vec<(usize, &str)> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_word())
        .map(|(i, t)| (i, t.form.as_str()))
        .collect();
    let forms: Vec<&str> = words.iter().map(|(_, f)| *f).collect();
    let features = sentence_features(&params.config, &forms, source, ext);

    let mut scratch = Vec::new();
    let mut out = Vec::with_capacity(words.len());
    for ((token, form), fv) in words.into_iter().zip(&features) {
        let (upos, rule) = params.decide(fv, form.chars().count(), &mut scratch);
        let (rule, rule_score) = match rule {
            Some((class, p)) => (params.inventory.get(class).rule.clone(), p),
            None => (IDENTITY_RULE.parse().expect("identity rule parses"), 0.0),
        };
        let lemma = rule
            .apply(form)
            .expect("applicability filtering guarantees the rule fits");
        out.push(Prediction {
            token,
            upos: upos.map(|(c, _)| params.upos_labels[c].clone()),
            rule,
            lemma,
            upos_score: upos.map_or(0.0, |(_, p)| p),
            rule_score,
        });
    }
    Ok(out)
}

/// Returns a copy of `doc` with LEMMA and UPOS filled in on syntactic words.
///
/// Sentences are processed independently (in parallel when enabled); every
/// other column is copied verbatim.
pub fn annotate_document(
    annotator: &dyn Annotator,
    doc: &Document,
    source: SourceId,
    vectors: Option<&VectorFile>,
    exec: Execution,
) -> Result<Document, ModelError> {
    if let Some(v) = vectors {
        if v.sentences.len() != doc.sentences.len() {
            return Err(ModelError::VectorSentences {
                expected: doc.sentences.len(),
                found: v.sentences.len(),
            });
        }
    }
    let annotated = par::map_range(exec, doc.sentences.len(), |i| {
        let sentence = &doc.sentences[i];
        let ext = vectors.map(|v| &v.sentences[i]);
        let predictions = annotator.predict(sentence, source, ext)?;
        let mut sentence = sentence.clone();
        for p in predictions {
            let token = &mut sentence.tokens[p.token];
            token.lemma = Some(p.lemma);
            token.upos = p.upos;
        }
        Ok(sentence)
    });
    Ok(Document {
        sentences: annotated.into_iter().collect::<Result<_, ModelError>>()?,
    })
}

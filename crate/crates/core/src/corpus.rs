//! Multi-corpus loading, categorical source ids and the lemma-rule inventory.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{self, ParseError, Sentence};
use crate::par::{self, Execution};
use crate::rule::LemmaRule;
use crate::vectors::{SentenceVectors, VectorError, VectorFile};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("empty corpus set")]
    EmptyCorpusSet,
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: ParseError },
    #[error("invalid corpus config: {0}")]
    Config(String),
    #[error("duplicate corpus name {0:?}")]
    DuplicateCorpus(String),
    #[error("unknown corpus {0:?}")]
    UnknownCorpus(String),
    #[error("{}: {source}", path.display())]
    Vectors { path: PathBuf, source: VectorError },
}

/// How finely training sources are told apart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// One id per primary author and one per secondary corpus.
    PerAuthorPerTreebank,
    /// One id for all primary data, one per secondary corpus.
    SinglePrimaryPerTreebank,
    /// One id for all primary data, one for all secondary data.
    SinglePrimarySingleSecondary,
    /// Everything shares id 0.
    Merged,
}

impl Granularity {
    pub const ALL: [Granularity; 4] = [
        Granularity::PerAuthorPerTreebank,
        Granularity::SinglePrimaryPerTreebank,
        Granularity::SinglePrimarySingleSecondary,
        Granularity::Merged,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Granularity::PerAuthorPerTreebank => "per-author-per-treebank",
            Granularity::SinglePrimaryPerTreebank => "single-primary-per-treebank",
            Granularity::SinglePrimarySingleSecondary => "single-primary-single-secondary",
            Granularity::Merged => "merged",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Granularity::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| format!("unknown granularity {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Primary,
    Secondary,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub path: PathBuf,
    pub group: Group,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

impl CorpusEntry {
    fn author_key(&self) -> &str {
        self.author.as_deref().unwrap_or(&self.name)
    }
}

/// Categorical source id fed to the model as a one-hot block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceId(pub u32);

impl SourceId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The corpus config: which files to train on and how to label them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceMap {
    pub granularity: Granularity,
    pub corpora: Vec<CorpusEntry>,
}

impl SourceMap {
    pub fn new(granularity: Granularity, corpora: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        let map = SourceMap {
            granularity,
            corpora,
        };
        map.validate()?;
        Ok(map)
    }

    /// Reads a JSON config; relative paths are taken from the config's
    /// directory.
    pub fn from_json_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self, CorpusError> {
        let mut map: SourceMap =
            serde_json::from_str(text).map_err(|e| CorpusError::Config(e.to_string()))?;
        for entry in &mut map.corpora {
            if entry.path.is_relative() {
                entry.path = base_dir.join(&entry.path);
            }
        }
        map.validate()?;
        Ok(map)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = std::collections::HashSet::new();
        for entry in &self.corpora {
            if !seen.insert(entry.name.as_str()) {
                return Err(CorpusError::DuplicateCorpus(entry.name.clone()));
            }
        }
        Ok(())
    }

    /// Distinct primary authors in config order.
    fn primary_authors(&self) -> Vec<&str> {
        let mut authors: Vec<&str> = Vec::new();
        for entry in self.corpora.iter().filter(|e| e.group == Group::Primary) {
            if !authors.contains(&entry.author_key()) {
                authors.push(entry.author_key());
            }
        }
        authors
    }

    fn secondary(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.corpora.iter().filter(|e| e.group == Group::Secondary)
    }

    /// Size of the primary id block.
    fn primary_block(&self) -> usize {
        let authors = self.primary_authors().len();
        match self.granularity {
            Granularity::PerAuthorPerTreebank => authors,
            _ => authors.min(1),
        }
    }

    /// Number of distinct ids the granularity implies, excluding the
    /// reserved unknown id.
    pub fn num_ids(&self) -> usize {
        let secondary = self.secondary().count();
        match self.granularity {
            Granularity::PerAuthorPerTreebank | Granularity::SinglePrimaryPerTreebank => {
                self.primary_block() + secondary
            }
            Granularity::SinglePrimarySingleSecondary => self.primary_block() + secondary.min(1),
            Granularity::Merged => 1,
        }
    }

    /// The reserved id for sources not seen in training.
    pub fn unknown_id(&self) -> SourceId {
        SourceId(self.num_ids() as u32)
    }

    /// Size of the one-hot source block: known ids plus the unknown id.
    pub fn num_sources(&self) -> usize {
        self.num_ids() + 1
    }

    /// Maps a corpus (and optionally an author) to its source id.
    ///
    /// Under per-author granularity, an author that is not among the
    /// training authors resolves to the unknown id.
    pub fn resolve(&self, corpus: &str, author: Option<&str>) -> Result<SourceId, CorpusError> {
        let entry = self
            .corpora
            .iter()
            .find(|e| e.name == corpus)
            .ok_or_else(|| CorpusError::UnknownCorpus(corpus.to_owned()))?;
        let id = match (self.granularity, entry.group) {
            (Granularity::Merged, _) => 0,
            (Granularity::PerAuthorPerTreebank, Group::Primary) => {
                let key = author.unwrap_or(entry.author_key());
                match self.primary_authors().iter().position(|a| *a == key) {
                    Some(i) => i,
                    None => return Ok(self.unknown_id()),
                }
            }
            (_, Group::Primary) => 0,
            (Granularity::SinglePrimarySingleSecondary, Group::Secondary) => self.primary_block(),
            (_, Group::Secondary) => {
                let pos = self
                    .secondary()
                    .position(|e| e.name == corpus)
                    .expect("entry is secondary");
                self.primary_block() + pos
            }
        };
        Ok(SourceId(id as u32))
    }

    /// Name lookup table stored with a trained model.
    pub fn source_table(&self) -> SourceTable {
        let mut names: Vec<(String, SourceId)> = Vec::new();
        for entry in &self.corpora {
            let id = self.resolve(&entry.name, None).expect("entry is in map");
            names.push((entry.name.clone(), id));
        }
        if self.granularity == Granularity::PerAuthorPerTreebank {
            for entry in self.corpora.iter().filter(|e| e.group == Group::Primary) {
                if let Some(author) = &entry.author {
                    if !names.iter().any(|(n, _)| n == author) {
                        let id = self
                            .resolve(&entry.name, Some(author))
                            .expect("entry is in map");
                        names.push((author.clone(), id));
                    }
                }
            }
        } else {
            for entry in &self.corpora {
                if let Some(author) = &entry.author {
                    if !names.iter().any(|(n, _)| n == author) {
                        names.push((author.clone(), self.resolve(&entry.name, None).unwrap()));
                    }
                }
            }
        }
        SourceTable {
            granularity: self.granularity,
            names,
            unknown: self.unknown_id(),
        }
    }
}

/// Source names known to a trained model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTable {
    pub granularity: Granularity,
    pub names: Vec<(String, SourceId)>,
    pub unknown: SourceId,
}

impl SourceTable {
    /// A table with a single known source and the unknown id.
    pub fn single() -> Self {
        SourceTable {
            granularity: Granularity::Merged,
            names: Vec::new(),
            unknown: SourceId(1),
        }
    }

    pub fn num_sources(&self) -> usize {
        self.unknown.index() + 1
    }

    /// Looks up a corpus or author name; anything unknown, or no name at
    /// all, maps to the reserved unknown id.
    pub fn lookup(&self, name: Option<&str>) -> SourceId {
        name.and_then(|n| self.names.iter().find(|(k, _)| k == n).map(|(_, id)| *id))
            .unwrap_or(self.unknown)
    }
}

/// One inventory class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleEntry {
    pub rule: LemmaRule,
    pub name: String,
    pub frequency: u64,
    /// Up to five most frequent distinct `(form, lemma)` pairs.
    pub examples: Vec<(String, String)>,
}

/// Lemma rules observed in training, most frequent first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleInventory {
    entries: Vec<RuleEntry>,
    index: HashMap<String, usize>,
}

const MAX_EXAMPLES: usize = 5;

impl RuleInventory {
    /// Counts rules over `(form, lemma)` pairs. Pairs with an empty member
    /// are skipped.
    pub fn build<'a, I>(pairs: I, allow_copy: bool) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        struct Acc {
            rule: LemmaRule,
            name: String,
            frequency: u64,
            first: usize,
            pairs: Vec<((String, String), u64)>,
        }
        let mut accs: Vec<Acc> = Vec::new();
        let mut by_name: HashMap<String, usize> = HashMap::new();
        for (form, lemma) in pairs {
            let Ok(rule) = LemmaRule::encode(form, lemma, allow_copy) else {
                continue;
            };
            let name = rule.to_string();
            let slot = match by_name.get(&name) {
                Some(&i) => i,
                None => {
                    by_name.insert(name.clone(), accs.len());
                    accs.push(Acc {
                        rule,
                        name,
                        frequency: 0,
                        first: accs.len(),
                        pairs: Vec::new(),
                    });
                    accs.len() - 1
                }
            };
            let acc = &mut accs[slot];
            acc.frequency += 1;
            match acc
                .pairs
                .iter_mut()
                .find(|(p, _)| p.0 == form && p.1 == lemma)
            {
                Some((_, n)) => *n += 1,
                None => acc.pairs.push(((form.to_owned(), lemma.to_owned()), 1)),
            }
        }
        accs.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.first.cmp(&b.first)));
        let entries = accs
            .into_iter()
            .map(|mut acc| {
                // stable sort keeps first-seen order among equal counts
                acc.pairs.sort_by_key(|p| std::cmp::Reverse(p.1));
                RuleEntry {
                    rule: acc.rule,
                    name: acc.name,
                    frequency: acc.frequency,
                    examples: acc
                        .pairs
                        .into_iter()
                        .take(MAX_EXAMPLES)
                        .map(|(p, _)| p)
                        .collect(),
                }
            })
            .collect();
        Self::from_entries(entries)
    }

    /// Rebuilds an inventory from entries already in class order.
    pub fn from_entries(entries: Vec<RuleEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        RuleInventory { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RuleEntry] {
        &self.entries
    }

    pub fn get(&self, class: usize) -> &RuleEntry {
        &self.entries[class]
    }

    /// Class id of a canonical rule string.
    pub fn class_of(&self, rule: &str) -> Option<usize> {
        self.index.get(rule).copied()
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.frequency).sum()
    }

    /// The first `k` entries in frequency order.
    pub fn top(&self, k: usize) -> &[RuleEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// A sentence tagged with its source and optional external vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SourcedSentence {
    pub sentence: Sentence,
    pub source: SourceId,
    pub vectors: Option<SentenceVectors>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub sentences: Vec<SourcedSentence>,
    pub upos_labels: Vec<String>,
    pub inventory: RuleInventory,
    pub sources: SourceTable,
    pub allow_copy: bool,
    /// Width of the external vectors, 0 when none are attached.
    pub dense_width: usize,
}

impl TrainingSet {
    /// Assembles a training set, building labels and inventory from the
    /// sentences.
    pub fn from_sentences(
        sentences: Vec<SourcedSentence>,
        sources: SourceTable,
        allow_copy: bool,
        dense_width: usize,
    ) -> Self {
        let upos_labels = collect_upos(&sentences);
        let inventory = build_rule_inventory(&sentences, allow_copy);
        TrainingSet {
            sentences,
            upos_labels,
            inventory,
            sources,
            allow_copy,
            dense_width,
        }
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(|s| s.sentence.word_count()).sum()
    }

    /// Words usable for training the lemma head.
    pub fn lemma_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        lemma_pairs(&self.sentences)
    }

    pub fn upos_index(&self, label: &str) -> Option<usize> {
        self.upos_labels.iter().position(|l| l == label)
    }
}

fn lemma_pairs(sentences: &[SourcedSentence]) -> impl Iterator<Item = (&str, &str)> {
    sentences
        .iter()
        .flat_map(|s| s.sentence.words())
        .filter_map(|t| t.lemma.as_deref().map(|l| (t.form.as_str(), l)))
}

fn collect_upos(sentences: &[SourcedSentence]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::new();
    for upos in sentences
        .iter()
        .flat_map(|s| s.sentence.words())
        .filter_map(|t| t.upos.as_deref())
    {
        if !labels.iter().any(|l| l == upos) {
            labels.push(upos.to_owned());
        }
    }
    labels
}

/// Inventory over every word that carries a lemma.
pub fn build_rule_inventory(sentences: &[SourcedSentence], allow_copy: bool) -> RuleInventory {
    RuleInventory::build(lemma_pairs(sentences), allow_copy)
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub allow_copy: bool,
    /// Sidecar covering every corpus in config order.
    pub vectors: Option<PathBuf>,
    pub execution: Execution,
}

/// Reads every corpus of `map` and assigns source ids.
pub fn load_corpora(map: &SourceMap, opts: &LoadOptions) -> Result<TrainingSet, CorpusError> {
    if map.corpora.is_empty() {
        return Err(CorpusError::EmptyCorpusSet);
    }
    let docs = par::map(opts.execution, &map.corpora, |entry| {
        let bytes = std::fs::read(&entry.path).map_err(|source| CorpusError::Io {
            path: entry.path.clone(),
            source,
        })?;
        conllu::parse_bytes(&bytes).map_err(|source| CorpusError::Parse {
            path: entry.path.clone(),
            source,
        })
    });

    let mut sentences = Vec::new();
    for (entry, doc) in map.corpora.iter().zip(docs) {
        let source = map.resolve(&entry.name, None)?;
        sentences.extend(doc?.sentences.into_iter().map(|sentence| SourcedSentence {
            sentence,
            source,
            vectors: None,
        }));
    }

    let mut dense_width = 0;
    if let Some(path) = &opts.vectors {
        let file = read_vectors(path)?;
        let doc = conllu::Document {
            sentences: sentences.iter().map(|s| s.sentence.clone()).collect(),
        };
        file.check_alignment(&doc)
            .map_err(|source| CorpusError::Vectors {
                path: path.clone(),
                source,
            })?;
        dense_width = file.width;
        for (s, v) in sentences.iter_mut().zip(file.sentences) {
            s.vectors = Some(v);
        }
    }

    Ok(TrainingSet::from_sentences(
        sentences,
        map.source_table(),
        opts.allow_copy,
        dense_width,
    ))
}

pub fn read_vectors(path: &Path) -> Result<VectorFile, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    VectorFile::parse(&text).map_err(|source| CorpusError::Vectors {
        path: path.to_owned(),
        source,
    })
}

/// One in `REPLAY_STRIDE` known-source sentences is replayed under the
/// unknown id.
pub const REPLAY_STRIDE: usize = 20;

/// Copies of every twentieth sentence relabelled with the unknown id, so the
/// generic source gets trained.
pub fn unknown_replay(ts: &TrainingSet) -> Vec<SourcedSentence> {
    ts.sentences
        .iter()
        .filter(|s| s.source != ts.sources.unknown)
        .step_by(REPLAY_STRIDE)
        .map(|s| SourcedSentence {
            source: ts.sources.unknown,
            ..s.clone()
        })
        .collect()
}

/// Sentence-level split stratified by source id.
///
/// Each source gives `floor(n * dev_fraction)` sentences to dev, at least one
/// when it has two or more sentences and the fraction is positive. The train
/// half gets a fresh label set and inventory; dev shares them.
pub fn split(ts: &TrainingSet, dev_fraction: f64, seed: u64) -> (TrainingSet, TrainingSet) {
    assert!(
        (0.0..1.0).contains(&dev_fraction),
        "dev fraction must lie in [0, 1)"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_source: Vec<(SourceId, Vec<usize>)> = Vec::new();
    for (i, s) in ts.sentences.iter().enumerate() {
        match by_source.iter_mut().find(|(id, _)| *id == s.source) {
            Some((_, idx)) => idx.push(i),
            None => by_source.push((s.source, vec![i])),
        }
    }
    by_source.sort_by_key(|(id, _)| *id);

    let mut is_dev = vec![false; ts.sentences.len()];
    for (_, mut idx) in by_source {
        let n = idx.len();
        let mut k = (n as f64 * dev_fraction + 1e-9).floor() as usize;
        if k == 0 && n >= 2 && dev_fraction > 0.0 {
            k = 1;
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..k] {
            is_dev[i] = true;
        }
    }

    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (s, dev_flag) in ts.sentences.iter().zip(is_dev) {
        if dev_flag {
            dev.push(s.clone());
        } else {
            train.push(s.clone());
        }
    }
    let train =
        TrainingSet::from_sentences(train, ts.sources.clone(), ts.allow_copy, ts.dense_width);
    let dev = TrainingSet {
        sentences: dev,
        upos_labels: train.upos_labels.clone(),
        inventory: train.inventory.clone(),
        sources: ts.sources.clone(),
        allow_copy: ts.allow_copy,
        dense_width: ts.dense_width,
    };
    (train, dev)
}

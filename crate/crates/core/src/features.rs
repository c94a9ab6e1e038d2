//! Sparse feature templates shared by both classifier heads.
//!
//! Columns are laid out as `[0, dim)` hashed template features, then
//! `dense_width` external-vector columns, then `num_sources` one-hot source
//! columns.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::corpus::SourceId;
use crate::rule::lowercase;
use crate::vectors::SentenceVectors;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    Bias,
    /// Lowercased form.
    Form,
    /// Lowercased prefixes up to `affix_len` characters.
    Prefix,
    /// Lowercased suffixes up to `affix_len` characters.
    Suffix,
    /// Capitalization/digit pattern, runs capped at three.
    Shape,
    /// Lowercased neighbours within `window`.
    Context,
    /// Character trigrams of the boundary-padded lowercased form.
    Trigrams,
}

impl Template {
    pub const ALL: [Template; 7] = [
        Template::Bias,
        Template::Form,
        Template::Prefix,
        Template::Suffix,
        Template::Shape,
        Template::Context,
        Template::Trigrams,
    ];

    fn tag(self) -> u8 {
        match self {
            Template::Bias => b'b',
            Template::Form => b'w',
            Template::Prefix => b'p',
            Template::Suffix => b's',
            Template::Shape => b'h',
            Template::Context => b'c',
            Template::Trigrams => b't',
        }
    }
}

pub const DEFAULT_DIM: u32 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Hashing dimension; collisions are accepted.
    pub dim: u32,
    pub window: usize,
    pub affix_len: usize,
    pub templates: Vec<Template>,
    pub allow_copy: bool,
    pub dense_width: usize,
    pub num_sources: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            dim: DEFAULT_DIM,
            window: 2,
            affix_len: 4,
            templates: Template::ALL.to_vec(),
            allow_copy: false,
            dense_width: 0,
            num_sources: 1,
        }
    }
}

impl FeatureConfig {
    pub fn num_columns(&self) -> usize {
        self.dim as usize + self.dense_width + self.num_sources
    }

    fn dense_offset(&self) -> u32 {
        self.dim
    }

    fn source_offset(&self) -> u32 {
        self.dim + self.dense_width as u32
    }

    /// Column of the one-hot source feature.
    pub fn source_column(&self, source: SourceId) -> u32 {
        self.source_offset() + source.0
    }

    pub fn is_source_column(&self, col: u32) -> bool {
        col >= self.source_offset()
    }
}

/// Features of one token.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    /// Hashed template ids, each with value 1.
    pub sparse: Vec<u32>,
    pub dense: Option<Vec<f32>>,
    pub source: SourceId,
}

impl FeatureVector {
    /// Every active `(column, value)` pair under `config`'s layout.
    pub fn columns<'a>(
        &'a self,
        config: &'a FeatureConfig,
    ) -> impl Iterator<Item = (u32, f32)> + 'a {
        let dense_offset = config.dense_offset();
        self.sparse
            .iter()
            .map(|&c| (c, 1.0))
            .chain(
                self.dense
                    .iter()
                    .flatten()
                    .enumerate()
                    .map(move |(i, &v)| (dense_offset + i as u32, v)),
            )
            .chain(std::iter::once((config.source_column(self.source), 1.0)))
    }
}

fn hash_feature(dim: u32, tag: u8, extra: &[u8], value: &str) -> u32 {
    let mut h = FnvHasher::default();
    h.write_u8(tag);
    h.write(extra);
    h.write_u8(0);
    h.write(value.as_bytes());
    (h.finish() % dim as u64) as u32
}

/// Word-shape string: `X` upper, `x` lower, `d` digit, other characters
/// verbatim; each run is capped at three.
pub fn word_shape(form: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    let mut run = 0;
    for c in form.chars() {
        let class = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if Some(class) == last {
            run += 1;
        } else {
            last = Some(class);
            run = 1;
        }
        if run <= 3 {
            out.push(class);
        }
    }
    out
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";

/// Extracts features for every word of a sentence at once.
///
/// `forms` are the sentence's syntactic words in order.
pub fn sentence_features(
    config: &FeatureConfig,
    forms: &[&str],
    source: SourceId,
    vectors: Option<&SentenceVectors>,
) -> Vec<FeatureVector> {
    let lowered: Vec<String> = forms.iter().map(|f| lowercase(f)).collect();
    (0..forms.len())
        .map(|i| token_features(config, forms, &lowered, i, source, vectors.map(|v| &v[i])))
        .collect()
}

fn token_features(
    config: &FeatureConfig,
    forms: &[&str],
    lowered: &[String],
    i: usize,
    source: SourceId,
    dense: Option<&Vec<f32>>,
) -> FeatureVector {
    let dim = config.dim;
    let lower = &lowered[i];
    let chars: Vec<char> = lower.chars().collect();
    let mut sparse = Vec::with_capacity(32);
    for &template in &config.templates {
        let tag = template.tag();
        match template {
            Template::Bias => sparse.push(hash_feature(dim, tag, &[], "")),
            Template::Form => sparse.push(hash_feature(dim, tag, &[], lower)),
            Template::Prefix | Template::Suffix => {
                for n in 1..=config.affix_len.min(chars.len()) {
                    let affix: String = if template == Template::Prefix {
                        chars[..n].iter().collect()
                    } else {
                        chars[chars.len() - n..].iter().collect()
                    };
                    sparse.push(hash_feature(dim, tag, &[n as u8], &affix));
                }
            }
            Template::Shape => sparse.push(hash_feature(dim, tag, &[], &word_shape(forms[i]))),
            Template::Context => {
                let w = config.window as isize;
                for off in (-w..=w).filter(|&o| o != 0) {
                    let j = i as isize + off;
                    let value = if j < 0 {
                        BOS
                    } else if j as usize >= lowered.len() {
                        EOS
                    } else {
                        lowered[j as usize].as_str()
                    };
                    sparse.push(hash_feature(dim, tag, &[off as i8 as u8], value));
                }
            }
            Template::Trigrams => {
                let padded: Vec<char> = std::iter::once('^')
                    .chain(chars.iter().copied())
                    .chain(std::iter::once('$'))
                    .collect();
                for tri in padded.windows(3) {
                    let tri: String = tri.iter().collect();
                    sparse.push(hash_feature(dim, tag, &[], &tri));
                }
            }
        }
    }
    FeatureVector {
        sparse,
        dense: dense.cloned(),
        source,
    }
}

/// Features of the token at `index` in `sentence.tokens`, which must be a
/// syntactic word. Context skips multiword ranges and empty nodes.
pub fn extract_features(
    config: &FeatureConfig,
    sentence: &crate::conllu::Sentence,
    index: usize,
    source: SourceId,
    ext: Option<&[f32]>,
) -> FeatureVector {
    let words: Vec<(usize, &str)> = sentence
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_word())
        .map(|(i, t)| (i, t.form.as_str()))
        .collect();
    let pos = words
        .iter()
        .position(|(i, _)| *i == index)
        .expect("index must point at a syntactic word");
    let forms: Vec<&str> = words.iter().map(|(_, f)| *f).collect();
    let lowered: Vec<String> = forms.iter().map(|f| lowercase(f)).collect();
    let dense = ext.map(<[f32]>::to_vec);
    token_features(config, &forms, &lowered, pos, source, dense.as_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_document;

    fn example() -> crate::conllu::Sentence {
        let text = "1\tDum\t_\t_\t_\t_\t_\t_\t_\t_\n\
2\thaec\t_\t_\t_\t_\t_\t_\t_\t_\n\
3\tin\t_\t_\t_\t_\t_\t_\t_\t_\n\
4\tHispania\t_\t_\t_\t_\t_\t_\t_\t_\n\
5\tgeruntur\t_\t_\t_\t_\t_\t_\t_\t_\n\n";
        parse_document(text).unwrap().sentences.remove(0)
    }

    fn config() -> FeatureConfig {
        FeatureConfig {
            num_sources: 3,
            ..FeatureConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let s = example();
        let a = extract_features(&config(), &s, 3, SourceId(1), None);
        let b = extract_features(&config(), &s, 3, SourceId(1), None);
        assert_eq!(a, b);
        assert!(a.sparse.iter().all(|&c| c < DEFAULT_DIM));
    }

    #[test]
    fn shape_and_suffixes() {
        assert_eq!(word_shape("Hispania"), "Xxxx");
        assert_eq!(word_shape("C."), "X.");
        assert_eq!(word_shape("MCMXC"), "XXX");
        assert_eq!(word_shape("a1999"), "xddd");

        let cfg = config();
        let s = example();
        let fv = extract_features(&cfg, &s, 3, SourceId(0), None);
        for suffix in ["a", "ia", "nia", "ania"] {
            let id = hash_feature(cfg.dim, b's', &[suffix.chars().count() as u8], suffix);
            assert!(fv.sparse.contains(&id), "{suffix}");
        }
        let shape = hash_feature(cfg.dim, b'h', &[], "Xxxx");
        assert!(fv.sparse.contains(&shape));
    }

    #[test]
    fn boundaries() {
        let cfg = config();
        let s = example();
        let fv = extract_features(&cfg, &s, 0, SourceId(0), None);
        assert!(fv
            .sparse
            .contains(&hash_feature(cfg.dim, b'c', &[-2i8 as u8], BOS)));
        assert!(fv
            .sparse
            .contains(&hash_feature(cfg.dim, b'c', &[-1i8 as u8], BOS)));
        let fv = extract_features(&cfg, &s, 4, SourceId(0), None);
        assert!(fv.sparse.contains(&hash_feature(cfg.dim, b'c', &[2], EOS)));
    }

    #[test]
    fn source_changes_only_source_column() {
        let cfg = config();
        let s = example();
        let a = extract_features(&cfg, &s, 2, SourceId(0), None);
        let b = extract_features(&cfg, &s, 2, SourceId(2), None);
        assert_eq!(a.sparse, b.sparse);
        let ca: Vec<_> = a.columns(&cfg).collect();
        let cb: Vec<_> = b.columns(&cfg).collect();
        assert_eq!(ca.len(), cb.len());
        let diff: Vec<_> = ca.iter().zip(&cb).filter(|(x, y)| x != y).collect();
        assert_eq!(diff.len(), 1);
        assert!(cfg.is_source_column(diff[0].0 .0));
    }

    #[test]
    fn dense_block_layout() {
        let cfg = FeatureConfig {
            dense_width: 2,
            ..config()
        };
        let s = example();
        let fv = extract_features(&cfg, &s, 1, SourceId(1), Some(&[0.5, -1.0]));
        let cols: Vec<_> = fv.columns(&cfg).collect();
        let n = cols.len();
        assert_eq!(cols[n - 3], (DEFAULT_DIM, 0.5));
        assert_eq!(cols[n - 2], (DEFAULT_DIM + 1, -1.0));
        assert_eq!(cols[n - 1], (DEFAULT_DIM + 2 + 1, 1.0));
    }
}

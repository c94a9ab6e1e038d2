//! Lemma rules: a casing script plus an edit script, the class label of the
//! lemmatizer.
//!
//! Rule strings use the syntax
//!
//! ```text
//! rule   := casing ";" edit
//! casing := seg ("¦" seg)*
//! seg    := ("↑" | "↓") signed-int
//! edit   := "a" lemma_lower | "d" ops "¦" ops
//! ops    := ( "-" | "+" char | "→" )*
//! ```
//!
//! so `"↓0;d¦-+u+s"` lowercases everything and rewrites the last character
//! of the form into `us` (`suo` → `suus`).

mod casing;
mod edit;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use casing::{
    apply_casing, extract_casing, lower_char, lowercase, upper_char, Case, CasingScript,
    CasingSegment,
};
pub use edit::{longest_common_root, min_edit_script, EditOp, EditScript, Root};

/// The identity rule string: lowercase, no edits.
pub const IDENTITY_RULE: &str = "↓0;d¦";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RuleError {
    #[error("cannot encode a rule for an empty form or lemma")]
    EmptyInput,
    #[error("rule consumes {consumed} characters but form has {len}")]
    NotApplicable { consumed: usize, len: usize },
    #[error("malformed rule string {rule:?}: {reason}")]
    Malformed { rule: String, reason: &'static str },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LemmaRule {
    pub casing: CasingScript,
    pub edit: EditScript,
}

impl LemmaRule {
    pub fn identity() -> Self {
        LemmaRule {
            casing: CasingScript::from_segments(vec![CasingSegment {
                case: Case::Lower,
                index: 0,
            }])
            .expect("single segment"),
            edit: EditScript::identity(),
        }
    }

    /// Builds the rule that turns `form` into `lemma`.
    pub fn encode(form: &str, lemma: &str, allow_copy: bool) -> Result<Self, RuleError> {
        if form.is_empty() || lemma.is_empty() {
            return Err(RuleError::EmptyInput);
        }
        let casing = extract_casing(lemma);
        let form: Vec<char> = form.chars().map(lower_char).collect();
        let lemma: Vec<char> = lemma.chars().map(lower_char).collect();

        let edit = match edit::longest_common_root_chars(&form, &lemma) {
            None => EditScript::Absolute(lemma.iter().collect()),
            Some(root) => EditScript::Delta {
                prefix: edit::min_edit_script_chars(
                    &form[..root.form_start],
                    &lemma[..root.lemma_start],
                    allow_copy,
                ),
                suffix: edit::min_edit_script_chars(
                    &form[root.form_start + root.len..],
                    &lemma[root.lemma_start + root.len..],
                    allow_copy,
                ),
            },
        };
        Ok(LemmaRule { casing, edit })
    }

    /// Number of form characters a delta script needs.
    pub fn consumed(&self) -> usize {
        self.edit.consumed()
    }

    pub fn is_applicable(&self, form: &str) -> bool {
        self.consumed() <= form.chars().count()
    }

    /// Produces the lemma for `form`.
    pub fn apply(&self, form: &str) -> Result<String, RuleError> {
        let lemma_lower = match &self.edit {
            EditScript::Absolute(lemma) => lemma.clone(),
            EditScript::Delta { prefix, suffix } => {
                let form: Vec<char> = form.chars().map(lower_char).collect();
                let head = prefix.iter().filter(|op| op.consumes()).count();
                let tail = suffix.iter().filter(|op| op.consumes()).count();
                if head + tail > form.len() {
                    return Err(RuleError::NotApplicable {
                        consumed: head + tail,
                        len: form.len(),
                    });
                }
                let mut out = String::with_capacity(form.len() + 4);
                run_ops(prefix, &form[..head], &mut out);
                out.extend(&form[head..form.len() - tail]);
                run_ops(suffix, &form[form.len() - tail..], &mut out);
                out
            }
        };
        Ok(apply_casing(&self.casing, &lemma_lower))
    }
}

fn run_ops(ops: &[EditOp], source: &[char], out: &mut String) {
    let mut pos = 0;
    for op in ops {
        match *op {
            EditOp::Delete => pos += 1,
            EditOp::Copy => {
                out.push(source[pos]);
                pos += 1;
            }
            EditOp::Insert(c) => out.push(c),
        }
    }
}

fn write_ops(f: &mut fmt::Formatter<'_>, ops: &[EditOp]) -> fmt::Result {
    for op in ops {
        match op {
            EditOp::Delete => f.write_str("-")?,
            EditOp::Copy => f.write_str("→")?,
            EditOp::Insert(c) => write!(f, "+{c}")?,
        }
    }
    Ok(())
}

impl fmt::Display for LemmaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.casing)?;
        match &self.edit {
            EditScript::Absolute(lemma) => write!(f, "a{lemma}"),
            EditScript::Delta { prefix, suffix } => {
                f.write_str("d")?;
                write_ops(f, prefix)?;
                f.write_str("¦")?;
                write_ops(f, suffix)
            }
        }
    }
}

impl FromStr for LemmaRule {
    type Err = RuleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = |reason| RuleError::Malformed {
            rule: s.to_owned(),
            reason,
        };
        let (casing, edit) = s.split_once(';').ok_or_else(|| malformed("missing ';'"))?;
        let casing = parse_casing(casing).ok_or_else(|| malformed("bad casing segment"))?;

        let mut chars = edit.chars();
        let edit = match chars.next() {
            Some('a') => EditScript::Absolute(chars.as_str().to_owned()),
            Some('d') => {
                let (prefix, sep) =
                    parse_ops(&mut chars).ok_or_else(|| malformed("bad edit op"))?;
                if !sep {
                    return Err(malformed("missing '¦' in delta script"));
                }
                let (suffix, sep) =
                    parse_ops(&mut chars).ok_or_else(|| malformed("bad edit op"))?;
                if sep {
                    return Err(malformed("extra '¦' in delta script"));
                }
                EditScript::Delta { prefix, suffix }
            }
            _ => return Err(malformed("unknown edit marker")),
        };
        Ok(LemmaRule { casing, edit })
    }
}

fn parse_casing(s: &str) -> Option<CasingScript> {
    if s.is_empty() {
        return Some(CasingScript::default());
    }
    let segments = s
        .split('¦')
        .map(|seg| {
            let mut chars = seg.chars();
            let case = match chars.next()? {
                '↑' => Case::Upper,
                '↓' => Case::Lower,
                _ => return None,
            };
            let num = chars.as_str();
            let digits = num.strip_prefix('-').unwrap_or(num);
            let canonical = !digits.is_empty()
                && digits.bytes().all(|b| b.is_ascii_digit())
                && (digits == "0" || !digits.starts_with('0'))
                && num != "-0";
            if !canonical {
                return None;
            }
            Some(CasingSegment {
                case,
                index: num.parse().ok()?,
            })
        })
        .collect::<Option<Vec<_>>>()?;
    CasingScript::from_segments(segments)
}

/// Reads ops up to an unescaped `¦` (returns `true`) or the end of input.
fn parse_ops(chars: &mut std::str::Chars<'_>) -> Option<(Vec<EditOp>, bool)> {
    let mut ops = Vec::new();
    while let Some(c) = chars.next() {
        match c {
            '-' => ops.push(EditOp::Delete),
            '→' => ops.push(EditOp::Copy),
            '+' => ops.push(EditOp::Insert(chars.next()?)),
            '¦' => return Some((ops, true)),
            _ => return None,
        }
    }
    Some((ops, false))
}

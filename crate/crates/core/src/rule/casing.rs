//! Casing scripts: restore a lemma's capitalization onto its lowercased form.

use std::fmt;

/// Case class of a single character.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Case {
    Lower,
    Upper,
}

impl Case {
    fn of(c: char) -> Case {
        if lower_char(c) != c {
            Case::Upper
        } else {
            Case::Lower
        }
    }

    fn marker(self) -> char {
        match self {
            Case::Lower => '↓',
            Case::Upper => '↑',
        }
    }
}

/// One casing instruction: re-case from `index` to the end of the string.
///
/// Non-negative indices count from the start, negative ones from the end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CasingSegment {
    pub case: Case,
    pub index: i32,
}

impl fmt::Display for CasingSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.case.marker(), self.index)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CasingScript {
    segments: Vec<CasingSegment>,
}

impl CasingScript {
    /// Builds a script from raw segments. Returns `None` if two adjacent
    /// segments share a case.
    pub fn from_segments(segments: Vec<CasingSegment>) -> Option<Self> {
        if segments.windows(2).any(|w| w[0].case == w[1].case) {
            return None;
        }
        Some(CasingScript { segments })
    }

    pub fn segments(&self) -> &[CasingSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

impl fmt::Display for CasingScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("¦")?;
            }
            write!(f, "{seg}")?;
        }
        Ok(())
    }
}

/// Simple lowercase mapping restricted to bijective case pairs.
///
/// A character is mapped only when its lowercase is a single scalar whose
/// uppercase is the original character again, so `upper_char(lower_char(c))
/// == c` for every character that `lower_char` changes. Characters such as
/// the Kelvin sign or titlecase digraphs are treated as caseless.
pub fn lower_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) if l != c && single(l.to_uppercase()) == Some(c) => l,
        _ => c,
    }
}

/// Uppercase counterpart of [`lower_char`].
pub fn upper_char(c: char) -> char {
    let mut upper = c.to_uppercase();
    match (upper.next(), upper.next()) {
        (Some(u), None) if u != c && single(u.to_lowercase()) == Some(c) => u,
        _ => c,
    }
}

fn single(mut it: impl Iterator<Item = char>) -> Option<char> {
    match (it.next(), it.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// Lowercases a string character by character; the result always has the
/// same number of scalars as the input.
pub fn lowercase(s: &str) -> String {
    s.chars().map(lower_char).collect()
}

/// Records where the case class changes in `lemma`.
pub fn extract_casing(lemma: &str) -> CasingScript {
    let len = lemma.chars().count();
    let mut segments: Vec<CasingSegment> = Vec::new();
    for (i, c) in lemma.chars().enumerate() {
        let case = Case::of(c);
        if segments.last().map(|s| s.case) != Some(case) {
            let index = if i <= len / 2 {
                i as i64
            } else {
                i as i64 - len as i64
            };
            segments.push(CasingSegment {
                case,
                index: index as i32,
            });
        }
    }
    CasingScript { segments }
}

/// Applies `script` to `s`, each segment re-casing from its resolved
/// position through the end of the string.
pub fn apply_casing(script: &CasingScript, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let len = chars.len() as i64;
    for seg in &script.segments {
        let start = if seg.index < 0 {
            (len + seg.index as i64).max(0)
        } else {
            (seg.index as i64).min(len)
        } as usize;
        let map: fn(char) -> char = match seg.case {
            Case::Lower => lower_char,
            Case::Upper => upper_char,
        };
        for c in &mut chars[start..] {
            *c = map(*c);
        }
    }
    chars.into_iter().collect()
}

//! Character edit scripts and the longest-common-root search.

/// A single character-level edit operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EditOp {
    Delete,
    Insert(char),
    Copy,
}

impl EditOp {
    /// Whether the op consumes a source character.
    pub fn consumes(self) -> bool {
        matches!(self, EditOp::Delete | EditOp::Copy)
    }

    pub fn cost(self) -> usize {
        match self {
            EditOp::Copy => 0,
            EditOp::Delete | EditOp::Insert(_) => 1,
        }
    }
}

/// How the lowercased form becomes the lowercased lemma.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EditScript {
    /// Ignore the form and emit this lemma.
    Absolute(String),
    /// Rewrite the prefix and suffix around an unchanged root.
    Delta {
        prefix: Vec<EditOp>,
        suffix: Vec<EditOp>,
    },
}

impl EditScript {
    pub fn identity() -> Self {
        EditScript::Delta {
            prefix: Vec::new(),
            suffix: Vec::new(),
        }
    }

    /// Number of form characters the script consumes, zero for absolute
    /// scripts.
    pub fn consumed(&self) -> usize {
        match self {
            EditScript::Absolute(_) => 0,
            EditScript::Delta { prefix, suffix } => prefix
                .iter()
                .chain(suffix)
                .filter(|op| op.consumes())
                .count(),
        }
    }
}

/// Position of a shared root: `(form_start, lemma_start, length)` in chars.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Root {
    pub form_start: usize,
    pub lemma_start: usize,
    pub len: usize,
}

/// Longest common contiguous substring of `form` and `lemma`.
///
/// Ties go to the smallest lemma start, then the smallest form start.
pub fn longest_common_root(form: &str, lemma: &str) -> Option<Root> {
    let form: Vec<char> = form.chars().collect();
    let lemma: Vec<char> = lemma.chars().collect();
    longest_common_root_chars(&form, &lemma)
}

pub(crate) fn longest_common_root_chars(form: &[char], lemma: &[char]) -> Option<Root> {
    // run[j + 1] = length of the common run ending at form[i], lemma[j]
    let mut prev = vec![0usize; lemma.len() + 1];
    let mut cur = vec![0usize; lemma.len() + 1];
    let mut best: Option<Root> = None;
    for (i, &fc) in form.iter().enumerate() {
        for (j, &lc) in lemma.iter().enumerate() {
            cur[j + 1] = if fc == lc { prev[j] + 1 } else { 0 };
            let len = cur[j + 1];
            if len == 0 {
                continue;
            }
            let cand = Root {
                form_start: i + 1 - len,
                lemma_start: j + 1 - len,
                len,
            };
            let better = match best {
                None => true,
                Some(b) => {
                    (
                        cand.len,
                        std::cmp::Reverse(cand.lemma_start),
                        std::cmp::Reverse(cand.form_start),
                    ) > (
                        b.len,
                        std::cmp::Reverse(b.lemma_start),
                        std::cmp::Reverse(b.form_start),
                    )
                }
            };
            if better {
                best = Some(cand);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

/// Minimum-cost script turning `source` into `target`.
///
/// Without copies this is every source character deleted, then every target
/// character inserted. With copies, Copy costs 0 and Delete/Insert cost 1;
/// among equal-cost choices the final op prefers Insert, then Delete, then
/// Copy, which keeps deletions ahead of insertions.
pub fn min_edit_script(source: &str, target: &str, allow_copy: bool) -> Vec<EditOp> {
    let source: Vec<char> = source.chars().collect();
    let target: Vec<char> = target.chars().collect();
    min_edit_script_chars(&source, &target, allow_copy)
}

pub(crate) fn min_edit_script_chars(
    source: &[char],
    target: &[char],
    allow_copy: bool,
) -> Vec<EditOp> {
    if !allow_copy {
        let mut ops = vec![EditOp::Delete; source.len()];
        ops.extend(target.iter().map(|&c| EditOp::Insert(c)));
        return ops;
    }

    let (n, m) = (source.len(), target.len());
    let width = m + 1;
    let mut cost = vec![usize::MAX; (n + 1) * width];
    let mut back: Vec<Option<EditOp>> = vec![None; (n + 1) * width];
    cost[0] = 0;
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = usize::MAX;
            let mut op = None;
            if i > 0 && j > 0 && source[i - 1] == target[j - 1] {
                best = cost[(i - 1) * width + j - 1];
                op = Some(EditOp::Copy);
            }
            if i > 0 {
                let c = cost[(i - 1) * width + j] + 1;
                if c <= best {
                    best = c;
                    op = Some(EditOp::Delete);
                }
            }
            if j > 0 {
                let c = cost[i * width + j - 1] + 1;
                if c <= best {
                    best = c;
                    op = Some(EditOp::Insert(target[j - 1]));
                }
            }
            cost[i * width + j] = best;
            back[i * width + j] = op;
        }
    }

    let mut ops = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let op = back[i * width + j].expect("every reachable cell has a predecessor");
        match op {
            EditOp::Copy => {
                i -= 1;
                j -= 1;
            }
            EditOp::Delete => i -= 1,
            EditOp::Insert(_) => j -= 1,
        }
        ops.push(op);
    }
    ops.reverse();
    ops
}

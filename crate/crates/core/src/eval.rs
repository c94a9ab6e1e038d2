//! Token-level lemma and UPOS accuracy, grouped reports and mean deltas.

use std::fmt::Write as _;

use thiserror::Error;

use crate::conllu::Document;
use crate::corpus::SourceId;
use crate::model::{annotate_document, Annotator, ModelError};
use crate::par::Execution;
use crate::rule::lowercase;
use crate::vectors::VectorFile;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}: no scorable tokens")]
    NothingToScore(String),
    #[error("{name}: prediction does not line up with gold at sentence {sentence}: {reason}")]
    Misaligned {
        name: String,
        sentence: usize,
        reason: String,
    },
    #[error("report structure mismatch: {0}")]
    StructureMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    pub case_insensitive: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Accuracy {
    pub correct: usize,
    pub scored: usize,
}

impl Accuracy {
    /// `100 * correct / scored`, or `None` with nothing scored.
    pub fn percent(self) -> Option<f64> {
        (self.scored > 0).then(|| 100.0 * self.correct as f64 / self.scored as f64)
    }

    fn add(&mut self, other: Accuracy) {
        self.correct += other.correct;
        self.scored += other.scored;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FileScore {
    pub name: String,
    pub group: Option<String>,
    pub lemma: Accuracy,
    pub upos: Accuracy,
    /// Syntactic words in the gold file.
    pub token_count: usize,
}

impl FileScore {
    pub fn lemma_accuracy(&self) -> Option<f64> {
        self.lemma.percent()
    }

    pub fn upos_accuracy(&self) -> Option<f64> {
        self.upos.percent()
    }

    fn group_name(&self) -> &str {
        self.group.as_deref().unwrap_or(&self.name)
    }
}

/// Scores a system document against gold.
///
/// Only gold words with a LEMMA (UPOS) count toward the lemma (UPOS)
/// denominator. A word the system left unannotated counts as wrong.
pub fn score_documents(
    name: &str,
    system: &Document,
    gold: &Document,
    opts: EvalOptions,
) -> Result<FileScore, EvalError> {
    let misaligned = |sentence: usize, reason: String| EvalError::Misaligned {
        name: name.to_owned(),
        sentence,
        reason,
    };
    if system.sentences.len() != gold.sentences.len() {
        return Err(misaligned(
            system.sentences.len().min(gold.sentences.len()),
            format!(
                "{} system sentences vs {} gold",
                system.sentences.len(),
                gold.sentences.len()
            ),
        ));
    }
    let mut lemma = Accuracy::default();
    let mut upos = Accuracy::default();
    let mut token_count = 0;
    for (i, (sys, gold)) in system.sentences.iter().zip(&gold.sentences).enumerate() {
        let sys_words: Vec<_> = sys.words().collect();
        let gold_words: Vec<_> = gold.words().collect();
        if sys_words.len() != gold_words.len() {
            return Err(misaligned(
                i,
                format!(
                    "{} system words vs {} gold",
                    sys_words.len(),
                    gold_words.len()
                ),
            ));
        }
        for (s, g) in sys_words.iter().zip(&gold_words) {
            if s.form != g.form {
                return Err(misaligned(i, format!("form {:?} vs {:?}", s.form, g.form)));
            }
            token_count += 1;
            if let Some(gold_lemma) = &g.lemma {
                lemma.scored += 1;
                let hit = match &s.lemma {
                    Some(l) if opts.case_insensitive => lowercase(l) == lowercase(gold_lemma),
                    Some(l) => l == gold_lemma,
                    None => false,
                };
                lemma.correct += usize::from(hit);
            }
            if let Some(gold_upos) = &g.upos {
                upos.scored += 1;
                upos.correct += usize::from(s.upos.as_ref() == Some(gold_upos));
            }
        }
    }
    if lemma.scored == 0 && upos.scored == 0 {
        return Err(EvalError::NothingToScore(name.to_owned()));
    }
    Ok(FileScore {
        name: name.to_owned(),
        group: None,
        lemma,
        upos,
        token_count,
    })
}

/// Strips `gold`, annotates it with `annotator`, and scores the result.
pub fn evaluate(
    annotator: &dyn Annotator,
    name: &str,
    gold: &Document,
    source: SourceId,
    vectors: Option<&VectorFile>,
    opts: EvalOptions,
    exec: Execution,
) -> Result<FileScore, EvalError> {
    let mut input = gold.clone();
    input.strip_annotations();
    let system = annotate_document(annotator, &input, source, vectors, exec)?;
    score_documents(name, &system, gold, opts)
}

/// Per-file scores, optionally grouped (e.g. classical / cross-genre /
/// cross-time).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub per_file: Vec<FileScore>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupScore {
    pub group: String,
    pub lemma: Accuracy,
    pub upos: Accuracy,
}

fn fmt_acc(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

impl EvalReport {
    /// Groups in first-appearance order, micro-averaged over their files.
    /// Files without a group label form a group named after the file.
    pub fn groups(&self) -> Vec<GroupScore> {
        let mut groups: Vec<GroupScore> = Vec::new();
        for f in &self.per_file {
            let name = f.group_name();
            let idx = match groups.iter().position(|g| g.group == name) {
                Some(i) => i,
                None => {
                    groups.push(GroupScore {
                        group: name.to_owned(),
                        lemma: Accuracy::default(),
                        upos: Accuracy::default(),
                    });
                    groups.len() - 1
                }
            };
            groups[idx].lemma.add(f.lemma);
            groups[idx].upos.add(f.upos);
        }
        groups
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("file\tgroup\tlemma_accuracy\tupos_accuracy\ttokens\n");
        for f in &self.per_file {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                f.name,
                f.group.as_deref().unwrap_or("-"),
                fmt_acc(f.lemma_accuracy()),
                fmt_acc(f.upos_accuracy()),
                f.token_count
            );
        }
        out
    }

    /// Groups as columns, one row per task.
    pub fn to_table(&self) -> String {
        let groups = self.groups();
        let mut rows = vec![std::iter::once(String::new())
            .chain(groups.iter().map(|g| g.group.clone()))
            .collect::<Vec<_>>()];
        rows.push(
            std::iter::once("Lemmatization".to_owned())
                .chain(groups.iter().map(|g| fmt_acc(g.lemma.percent())))
                .collect(),
        );
        rows.push(
            std::iter::once("Tagging".to_owned())
                .chain(groups.iter().map(|g| fmt_acc(g.upos.percent())))
                .collect(),
        );
        align(&rows)
    }
}

/// Renders rows as a space-aligned table; the first column is left-aligned,
/// the rest right-aligned.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Lemma,
    Upos,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::Lemma => "Lemmatization",
            Metric::Upos => "Tagging",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaColumn {
    pub group: String,
    pub metric: Metric,
    /// Mean of `a - b` over the paired runs, in percentage points.
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaReport {
    pub title: String,
    pub columns: Vec<DeltaColumn>,
}

/// Signed, three-decimal percentage-point delta such as `+0.430`.
pub fn format_delta(value: f64) -> String {
    // avoid "-0.000"
    let rounded = (value * 1000.0).round() / 1000.0;
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:+.3}")
}

/// Mean per-group, per-metric difference between paired reports.
///
/// `a[i]` is compared with `b[i]`; both must cover the same groups in the
/// same order.
pub fn delta_report(
    title: &str,
    a: &[EvalReport],
    b: &[EvalReport],
) -> Result<DeltaReport, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::StructureMismatch(format!(
            "{} runs vs {} runs",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(EvalError::StructureMismatch("no runs to compare".into()));
    }
    let layout: Vec<String> = a[0].groups().into_iter().map(|g| g.group).collect();
    let mut sums = vec![[0.0f64; 2]; layout.len()];
    for (ra, rb) in a.iter().zip(b) {
        let (ga, gb) = (ra.groups(), rb.groups());
        let names_a: Vec<&str> = ga.iter().map(|g| g.group.as_str()).collect();
        let names_b: Vec<&str> = gb.iter().map(|g| g.group.as_str()).collect();
        if names_a != layout || names_b != layout {
            return Err(EvalError::StructureMismatch(format!(
                "groups {names_a:?} vs {names_b:?}"
            )));
        }
        for (k, (x, y)) in ga.iter().zip(&gb).enumerate() {
            for (m, (p, q)) in [(x.lemma, y.lemma), (x.upos, y.upos)]
                .into_iter()
                .enumerate()
            {
                match (p.percent(), q.percent()) {
                    (Some(p), Some(q)) => sums[k][m] += p - q,
                    (None, None) => {}
                    _ => {
                        return Err(EvalError::StructureMismatch(format!(
                            "group {} scored in only one report",
                            layout[k]
                        )))
                    }
                }
            }
        }
    }
    let n = a.len() as f64;
    let mut columns = Vec::with_capacity(layout.len() * 2);
    for metric in [Metric::Lemma, Metric::Upos] {
        for (k, group) in layout.iter().enumerate() {
            let m = if metric == Metric::Lemma { 0 } else { 1 };
            columns.push(DeltaColumn {
                group: group.clone(),
                metric,
                mean: sums[k][m] / n,
            });
        }
    }
    Ok(DeltaReport {
        title: title.to_owned(),
        columns,
    })
}

impl DeltaReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("comparison\tmetric\tgroup\tmean_delta\n");
        for c in &self.columns {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.title,
                c.metric.label(),
                c.group,
                format_delta(c.mean)
            );
        }
        out
    }

    /// Two header rows (task, then group) and one row of deltas.
    pub fn to_table(&self) -> String {
        let mut tasks = vec![String::new()];
        let mut groups = vec![String::new()];
        let mut values = vec![self.title.clone()];
        for c in &self.columns {
            tasks.push(c.metric.label().to_owned());
            groups.push(c.group.clone());
            values.push(format_delta(c.mean));
        }
        align(&[tasks, groups, values])
    }
}

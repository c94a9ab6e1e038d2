//! Ablation grid: train several configurations, evaluate each on grouped
//! test files, and summarise paired differences.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu;
use crate::corpus::{self, Granularity, LoadOptions, SourceMap};
use crate::eval::{self, align, delta_report, DeltaReport, EvalOptions, EvalReport};
use crate::model::ModelParams;
use crate::par::{self, Execution};
use crate::train::{self, Hyperparams};

#[derive(Debug, Error)]
pub enum AblateError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid run file: {0}")]
    Config(String),
    #[error("run file lists no runs")]
    NoRuns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub path: PathBuf,
    pub group: String,
    /// Source name handed to the model; unknown or absent names use the
    /// generic id.
    #[serde(default)]
    pub source: Option<String>,
    /// Sidecar vectors for this file, required when the model uses them.
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    /// Name of another run whose model annotates this file.
    #[serde(default)]
    pub model: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub corpus_config: PathBuf,
    /// Overrides the corpus config's granularity.
    #[serde(default)]
    pub granularity: Option<Granularity>,
    #[serde(default)]
    pub external_vectors: Option<PathBuf>,
    #[serde(default)]
    pub hyperparams: Hyperparams,
    pub tests: Vec<TestSpec>,
}

/// Runs in `a` are paired index-wise with runs in `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparison {
    pub title: String,
    pub a: Vec<String>,
    pub b: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub comparisons: Option<Vec<Comparison>>,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunFile {
    /// Parses a run file; relative paths are taken from `base_dir`.
    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Self, AblateError> {
        let mut file: RunFile =
            serde_json::from_str(text).map_err(|e| AblateError::Config(e.to_string()))?;
        for run in &mut file.runs {
            rebase(base_dir, &mut run.corpus_config);
            if let Some(v) = &mut run.external_vectors {
                rebase(base_dir, v);
            }
            for test in &mut run.tests {
                rebase(base_dir, &mut test.path);
                if let Some(v) = &mut test.vectors {
                    rebase(base_dir, v);
                }
            }
        }
        file.validate()?;
        Ok(file)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, AblateError> {
        let text = std::fs::read_to_string(path).map_err(|source| AblateError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json_str(&text, path.parent().unwrap_or(Path::new("")))
    }

    fn validate(&self) -> Result<(), AblateError> {
        if self.runs.is_empty() {
            return Err(AblateError::NoRuns);
        }
        let known = |name: &str| self.runs.iter().any(|r| r.name == name);
        for (i, run) in self.runs.iter().enumerate() {
            if self.runs[..i].iter().any(|r| r.name == run.name) {
                return Err(AblateError::Config(format!(
                    "duplicate run name {:?}",
                    run.name
                )));
            }
            for test in &run.tests {
                if let Some(m) = &test.model {
                    if !known(m) {
                        return Err(AblateError::Config(format!(
                            "run {:?} routes a test to unknown model {m:?}",
                            run.name
                        )));
                    }
                }
            }
        }
        for c in self.comparisons.iter().flatten() {
            if c.a.len() != c.b.len() {
                return Err(AblateError::Config(format!(
                    "comparison {:?} pairs {} runs with {}",
                    c.title,
                    c.a.len(),
                    c.b.len()
                )));
            }
            if let Some(name) = c.a.iter().chain(&c.b).find(|n| !known(n)) {
                return Err(AblateError::Config(format!(
                    "comparison {:?} names unknown run {name:?}",
                    c.title
                )));
            }
        }
        Ok(())
    }

    /// Explicit comparisons, or else every run with external vectors paired
    /// with the first run that matches it in everything but the vectors.
    pub fn effective_comparisons(&self) -> Vec<Comparison> {
        if let Some(c) = &self.comparisons {
            return c.clone();
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for with in self.runs.iter().filter(|r| r.external_vectors.is_some()) {
            let partner = self.runs.iter().find(|r| {
                r.external_vectors.is_none()
                    && r.corpus_config == with.corpus_config
                    && r.granularity == with.granularity
                    && r.hyperparams == with.hyperparams
            });
            if let Some(without) = partner {
                a.push(with.name.clone());
                b.push(without.name.clone());
            }
        }
        if a.is_empty() {
            return Vec::new();
        }
        vec![Comparison {
            title: "with vectors - without".into(),
            a,
            b,
        }]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub name: String,
    pub granularity: Option<Granularity>,
    pub vectors: bool,
    pub outcome: Result<EvalReport, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    /// Test groups in first-appearance order across all runs.
    pub groups: Vec<String>,
    pub rows: Vec<AblationRow>,
    pub deltas: Vec<Result<DeltaReport, String>>,
}

fn train_run(run: &RunConfig, exec: Execution) -> Result<(ModelParams, Granularity), String> {
    let mut map = SourceMap::from_json_file(&run.corpus_config).map_err(|e| e.to_string())?;
    if let Some(g) = run.granularity {
        map.granularity = g;
    }
    let opts = LoadOptions {
        allow_copy: run.hyperparams.allow_copy,
        vectors: run.external_vectors.clone(),
        execution: exec,
    };
    let ts = corpus::load_corpora(&map, &opts).map_err(|e| e.to_string())?;
    info!("run {}: {} training words", run.name, ts.word_count());
    let outcome = train::train(&ts, &run.hyperparams).map_err(|e| e.to_string())?;
    Ok((outcome.params, map.granularity))
}

fn evaluate_run(
    run: &RunConfig,
    models: &[Result<(ModelParams, Granularity), String>],
    index_of: impl Fn(&str) -> usize,
    self_index: usize,
    opts: EvalOptions,
    exec: Execution,
) -> Result<EvalReport, String> {
    models[self_index].as_ref().map_err(Clone::clone)?;
    let mut per_file = Vec::with_capacity(run.tests.len());
    for test in &run.tests {
        let which = test.model.as_deref().map_or(self_index, &index_of);
        let (model, _) = models[which]
            .as_ref()
            .map_err(|e| format!("model {}: {e}", test.model.as_deref().unwrap_or(&run.name)))?;
        let bytes = std::fs::read(&test.path)
            .map_err(|e| format!("cannot read {}: {e}", test.path.display()))?;
        let gold =
            conllu::parse_bytes(&bytes).map_err(|e| format!("{}: {e}", test.path.display()))?;
        let vectors = match &test.vectors {
            Some(p) => Some(corpus::read_vectors(p).map_err(|e| e.to_string())?),
            None => None,
        };
        let source = model.sources.lookup(test.source.as_deref());
        let name = test.path.display().to_string();
        let mut score = eval::evaluate(model, &name, &gold, source, vectors.as_ref(), opts, exec)
            .map_err(|e| e.to_string())?;
        score.group = Some(test.group.clone());
        per_file.push(score);
    }
    Ok(EvalReport { per_file })
}

/// Trains every run (runs in parallel, each internally single-threaded),
/// evaluates the test files, and computes the comparisons. A failing run
/// is recorded in its row and does not stop the grid.
pub fn ablate(file: &RunFile, opts: EvalOptions, exec: Execution) -> AblationReport {
    let models = par::map(exec, &file.runs, |run| {
        let result = train_run(run, Execution::Sequential);
        if let Err(e) = &result {
            warn!("run {} failed: {e}", run.name);
        }
        result
    });
    let index_of = |name: &str| {
        file.runs
            .iter()
            .position(|r| r.name == name)
            .expect("run file validated")
    };
    let outcomes = par::map_range(exec, file.runs.len(), |i| {
        evaluate_run(
            &file.runs[i],
            &models,
            index_of,
            i,
            opts,
            Execution::Sequential,
        )
    });

    let mut groups: Vec<String> = Vec::new();
    for test in file.runs.iter().flat_map(|r| &r.tests) {
        if !groups.contains(&test.group) {
            groups.push(test.group.clone());
        }
    }
    let rows: Vec<AblationRow> = file
        .runs
        .iter()
        .zip(outcomes)
        .zip(&models)
        .map(|((run, outcome), model)| AblationRow {
            name: run.name.clone(),
            granularity: model.as_ref().ok().map(|(_, g)| *g).or(run.granularity),
            vectors: run.external_vectors.is_some(),
            outcome,
        })
        .collect();

    let deltas = file
        .effective_comparisons()
        .iter()
        .map(|c| {
            let collect = |names: &[String]| -> Result<Vec<EvalReport>, String> {
                names
                    .iter()
                    .map(|n| {
                        rows[index_of(n)]
                            .outcome
                            .clone()
                            .map_err(|_| format!("run {n} failed"))
                    })
                    .collect()
            };
            let a = collect(&c.a)?;
            let b = collect(&c.b)?;
            delta_report(&c.title, &a, &b).map_err(|e| e.to_string())
        })
        .collect();

    AblationReport {
        groups,
        rows,
        deltas,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

impl AblationRow {
    fn cells(&self, groups: &[String]) -> Vec<String> {
        let scores = self.outcome.as_ref().ok().map(EvalReport::groups);
        let mut out = Vec::with_capacity(groups.len() * 2);
        for g in groups {
            let found = scores.iter().flatten().find(|s| &s.group == g);
            out.push(cell(found.and_then(|s| s.lemma.percent())));
            out.push(cell(found.and_then(|s| s.upos.percent())));
        }
        out
    }

    fn granularity_name(&self) -> &'static str {
        self.granularity.map_or("-", Granularity::name)
    }

    fn status(&self) -> &'static str {
        if self.outcome.is_ok() {
            "ok"
        } else {
            "failed"
        }
    }
}

impl AblationReport {
    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.rows.iter().filter_map(|r| {
            r.outcome
                .as_ref()
                .err()
                .map(|e| (r.name.as_str(), e.as_str()))
        })
    }

    /// One row per run, a lemma and an upos column per test group.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("run\tgranularity\tvectors\tstatus");
        for g in &self.groups {
            let _ = write!(out, "\t{g}_lemma\t{g}_upos");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}",
                row.name,
                row.granularity_name(),
                if row.vectors { "yes" } else { "no" },
                row.status()
            );
            for c in row.cells(&self.groups) {
                out.push('\t');
                out.push_str(&c);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut tasks = vec![String::new(), String::new()];
        let mut heads = vec!["run".to_owned(), "granularity".to_owned()];
        for g in &self.groups {
            tasks.extend(["Lemmatization".to_owned(), "Tagging".to_owned()]);
            heads.extend([g.clone(), g.clone()]);
        }
        let mut rows = vec![tasks, heads];
        for row in &self.rows {
            let mut cells = vec![row.name.clone(), row.granularity_name().to_owned()];
            cells.extend(row.cells(&self.groups));
            rows.push(cells);
        }
        align(&rows)
    }

    /// Grid table followed by each comparison.
    pub fn summary(&self) -> String {
        let mut out = self.to_table();
        for d in &self.deltas {
            out.push('\n');
            match d {
                Ok(d) => out.push_str(&d.to_table()),
                Err(e) => {
                    let _ = writeln!(out, "comparison unavailable: {e}");
                }
            }
        }
        out
    }
}

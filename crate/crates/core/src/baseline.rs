//! Most-frequent-class baseline keyed by lowercased form.

use std::collections::HashMap;

use crate::conllu::Sentence;
use crate::corpus::{RuleInventory, SourceId, SourceTable, TrainingSet};
use crate::model::{Annotator, ModelError, Prediction};
use crate::rule::{lowercase, LemmaRule};
use crate::vectors::SentenceVectors;

#[derive(Clone, Debug)]
pub struct BaselineModel {
    by_form: HashMap<String, (Option<usize>, Option<usize>)>,
    global_upos: Option<usize>,
    upos_labels: Vec<String>,
    inventory: RuleInventory,
    sources: SourceTable,
}

/// Index of the largest count, lowest index on ties.
fn majority(counts: &HashMap<usize, u64>) -> Option<usize> {
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
}

pub fn baseline_most_frequent(ts: &TrainingSet) -> BaselineModel {
    let mut rules: HashMap<String, HashMap<usize, u64>> = HashMap::new();
    let mut tags: HashMap<String, HashMap<usize, u64>> = HashMap::new();
    let mut global: HashMap<usize, u64> = HashMap::new();
    for token in ts.sentences.iter().flat_map(|s| s.sentence.words()) {
        let key = lowercase(&token.form);
        if let Some(lemma) = &token.lemma {
            let class = LemmaRule::encode(&token.form, lemma, ts.allow_copy)
                .ok()
                .and_then(|r| ts.inventory.class_of(&r.to_string()));
            if let Some(class) = class {
                *rules
                    .entry(key.clone())
                    .or_default()
                    .entry(class)
                    .or_default() += 1;
            }
        }
        if let Some(upos) = token.upos.as_deref().and_then(|u| ts.upos_index(u)) {
            *tags.entry(key).or_default().entry(upos).or_default() += 1;
            *global.entry(upos).or_default() += 1;
        }
    }
    let mut by_form: HashMap<String, (Option<usize>, Option<usize>)> = HashMap::new();
    for (form, counts) in &rules {
        by_form.entry(form.clone()).or_default().0 = majority(counts);
    }
    for (form, counts) in &tags {
        by_form.entry(form.clone()).or_default().1 = majority(counts);
    }
    BaselineModel {
        by_form,
        global_upos: majority(&global),
        upos_labels: ts.upos_labels.clone(),
        inventory: ts.inventory.clone(),
        sources: ts.sources.clone(),
    }
}

impl Annotator for BaselineModel {
    fn predict(
        &self,
        sentence: &Sentence,
        _source: SourceId,
        _ext: Option<&SentenceVectors>,
    ) -> Result<Vec<Prediction>, ModelError> {
        Ok(sentence
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_word())
            .map(|(i, t)| {
                let (rule, upos) = self
                    .by_form
                    .get(&lowercase(&t.form))
                    .copied()
                    .unwrap_or((None, None));
                let rule = rule
                    .map(|c| self.inventory.get(c).rule.clone())
                    .filter(|r| r.is_applicable(&t.form))
                    .unwrap_or_else(LemmaRule::identity);
                let upos = upos.or(self.global_upos);
                Prediction {
                    token: i,
                    upos: upos.map(|u| self.upos_labels[u].clone()),
                    lemma: rule.apply(&t.form).expect("rule is applicable"),
                    rule,
                    upos_score: 1.0,
                    rule_score: 1.0,
                }
            })
            .collect())
    }

    fn sources(&self) -> &SourceTable {
        &self.sources
    }
}

//! SGD training of the joint classifier.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, SourcedSentence, TrainingSet};
use crate::features::{sentence_features, FeatureConfig, FeatureVector, Template, DEFAULT_DIM};
use crate::model::ModelParams;
use crate::rule::LemmaRule;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrainError {
    #[error("empty training data")]
    EmptyTrainingData,
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(&'static str),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub epochs: usize,
    /// Initial rate, decayed linearly to zero over all updates.
    pub learning_rate: f32,
    pub seed: u64,
    pub dev_fraction: f64,
    pub dim: u32,
    pub window: usize,
    pub allow_copy: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            epochs: 10,
            learning_rate: 0.1,
            seed: 42,
            dev_fraction: 0.1,
            dim: DEFAULT_DIM,
            window: 2,
            allow_copy: false,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Hyperparams("epochs must be at least 1"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(TrainError::Hyperparams("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(TrainError::Hyperparams("dev fraction must lie in [0, 1)"));
        }
        if self.dim == 0 {
            return Err(TrainError::Hyperparams(
                "hashing dimension must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Summed per-token loss of both heads.
    pub loss: f64,
    pub dev_lemma: Option<f64>,
    pub dev_upos: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

struct Example {
    features: FeatureVector,
    form_len: usize,
    upos: Option<usize>,
    rule: Option<usize>,
}

fn prepare(
    config: &FeatureConfig,
    sentence: &SourcedSentence,
    ts: &TrainingSet,
    allow_copy: bool,
) -> Vec<Example> {
    let words: Vec<_> = sentence.sentence.words().collect();
    let forms: Vec<&str> = words.iter().map(|t| t.form.as_str()).collect();
    let features = sentence_features(config, &forms, sentence.source, sentence.vectors.as_ref());
    words
        .into_iter()
        .zip(features)
        .map(|(t, features)| Example {
            form_len: t.form.chars().count(),
            upos: t.upos.as_deref().and_then(|u| ts.upos_index(u)),
            rule: t.lemma.as_deref().and_then(|l| {
                let rule = LemmaRule::encode(&t.form, l, allow_copy).ok()?;
                ts.inventory.class_of(&rule.to_string())
            }),
            features,
        })
        .collect()
}

/// Softmax over `classes`; returns the gold class's negative log-likelihood
/// and the gradient `p - y` on those classes.
fn softmax_grad(
    scores: &[f32],
    classes: impl Iterator<Item = usize> + Clone,
    gold: usize,
    grad: &mut Vec<(usize, f32)>,
) -> f64 {
    grad.clear();
    let max = classes
        .clone()
        .map(|c| scores[c])
        .fold(f32::NEG_INFINITY, f32::max);
    let mut z = 0.0f32;
    for c in classes {
        let e = (scores[c] - max).exp();
        z += e;
        grad.push((c, e));
    }
    let mut loss = 0.0;
    for (c, g) in grad.iter_mut() {
        *g /= z;
        if *c == gold {
            loss = -(f64::from(*g).max(1e-30)).ln();
            *g -= 1.0;
        }
    }
    loss
}

/// Trains both heads with plain SGD on the summed multinomial logistic loss.
///
/// A dev split (`hp.dev_fraction`, `hp.seed`) picks the epoch with the best
/// lemma accuracy, later epochs winning ties. Sentence order is shuffled per
/// epoch from `hp.seed` only, and training is single-threaded, so the result
/// is a pure function of `(ts, hp)`.
pub fn train(ts: &TrainingSet, hp: &Hyperparams) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    if ts.word_count() == 0 {
        return Err(TrainError::EmptyTrainingData);
    }
    let rebuilt;
    let ts = if ts.allow_copy != hp.allow_copy {
        rebuilt = TrainingSet::from_sentences(
            ts.sentences.clone(),
            ts.sources.clone(),
            hp.allow_copy,
            ts.dense_width,
        );
        &rebuilt
    } else {
        ts
    };
    let (train_set, dev_set) = corpus::split(ts, hp.dev_fraction, hp.seed);
    if train_set.inventory.is_empty() && train_set.upos_labels.is_empty() {
        return Err(TrainError::EmptyTrainingData);
    }

    let config = FeatureConfig {
        dim: hp.dim,
        window: hp.window,
        affix_len: 4,
        templates: Template::ALL.to_vec(),
        allow_copy: hp.allow_copy,
        dense_width: ts.dense_width,
        num_sources: ts.sources.num_sources(),
    };
    let mut params = ModelParams::new(
        config.clone(),
        train_set.upos_labels.clone(),
        train_set.inventory.clone(),
        ts.sources.clone(),
    );

    let mut sentences: Vec<&SourcedSentence> = train_set.sentences.iter().collect();
    let replay = corpus::unknown_replay(&train_set);
    sentences.extend(&replay);
    let examples: Vec<Vec<Example>> = sentences
        .iter()
        .map(|s| prepare(&config, s, &train_set, hp.allow_copy))
        .collect();
    let per_epoch: usize = examples.iter().map(Vec::len).sum();
    let total = (per_epoch * hp.epochs).max(1) as f32;

    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut scores = Vec::new();
    let mut grad = Vec::new();
    let mut step = 0usize;
    let mut logs = Vec::with_capacity(hp.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=hp.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for &i in &order {
            for ex in &examples[i] {
                let lr = hp.learning_rate * (1.0 - step as f32 / total);
                step += 1;
                if let Some(gold) = ex.upos {
                    params.upos_head.scores(&ex.features, &config, &mut scores);
                    loss += softmax_grad(&scores, 0..params.upos_labels.len(), gold, &mut grad);
                    params.upos_head.update(&ex.features, &config, &grad, lr);
                }
                if let Some(gold) = ex.rule {
                    params.rule_head.scores(&ex.features, &config, &mut scores);
                    let classes = params.applicable_classes(ex.form_len);
                    loss += softmax_grad(&scores, classes, gold, &mut grad);
                    params.rule_head.update(&ex.features, &config, &grad, lr);
                }
            }
        }

        let (dev_lemma, dev_upos) = dev_accuracy(&params, &dev_set);
        info!(
            "epoch {epoch}: loss {loss:.4}, dev lemma {}, dev upos {}",
            fmt_pct(dev_lemma),
            fmt_pct(dev_upos)
        );
        logs.push(EpochLog {
            epoch,
            loss,
            dev_lemma,
            dev_upos,
        });
        let key = dev_lemma.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| key >= *b) {
            best = Some((key, epoch, params.clone()));
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    info!("keeping epoch {best_epoch}");
    Ok(TrainOutcome {
        params,
        epochs: logs,
        best_epoch,
    })
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.2}"))
}

/// Lemma and UPOS accuracy (percent) on sentences with gold values.
fn dev_accuracy(params: &ModelParams, dev: &TrainingSet) -> (Option<f64>, Option<f64>) {
    let (mut lemma_ok, mut lemma_n, mut upos_ok, mut upos_n) = (0usize, 0usize, 0usize, 0usize);
    let mut scratch = Vec::new();
    for s in &dev.sentences {
        let words: Vec<_> = s.sentence.words().collect();
        let forms: Vec<&str> = words.iter().map(|t| t.form.as_str()).collect();
        let features = sentence_features(&params.config, &forms, s.source, s.vectors.as_ref());
        for (t, fv) in words.iter().zip(&features) {
            let len = t.form.chars().count();
            let (upos, rule) = params.decide(fv, len, &mut scratch);
            if let Some(gold) = &t.upos {
                upos_n += 1;
                if upos.map(|(c, _)| &params.upos_labels[c]) == Some(gold) {
                    upos_ok += 1;
                }
            }
            if let Some(gold) = &t.lemma {
                lemma_n += 1;
                let lemma = match rule {
                    Some((c, _)) => params.inventory.get(c).rule.apply(&t.form).ok(),
                    None => LemmaRule::identity().apply(&t.form).ok(),
                };
                if lemma.as_ref() == Some(gold) {
                    lemma_ok += 1;
                }
            }
        }
    }
    let pct = |ok: usize, n: usize| (n > 0).then(|| 100.0 * ok as f64 / n as f64);
    (pct(lemma_ok, lemma_n), pct(upos_ok, upos_n))
}

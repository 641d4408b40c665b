//! Logistic regression deciding whether a tagged span is a real ingredient.

use rand::seq::SliceRandom;

use super::tagger::TaggerModel;
use crate::error::{Error, Result};
use crate::nn::{seeded_rng, sigmoid, AdamState, Linear, Params};

/// A candidate word sequence and its TFIDF weight in the source recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct Phrase {
    pub words: Vec<String>,
    pub weight: f64,
}

impl Phrase {
    pub fn new<S: AsRef<str>>(words: &[S], weight: f64) -> Self {
        Self {
            words: words.iter().map(|w| w.as_ref().to_string()).collect(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjudicatorModel {
    pub linear: Linear,
}

impl AdjudicatorModel {
    /// Zero weights: every phrase scores exactly 0.5.
    pub fn zeros(embed_dim: usize) -> Self {
        Self {
            linear: Linear::zeros(feature_dim(embed_dim), 1),
        }
    }

    pub fn probability(&self, features: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.linear.forward(features)?[0]))
    }
}

fn feature_dim(embed_dim: usize) -> usize {
    embed_dim + 2
}

/// Mean token embedding, phrase length and TFIDF weight.
pub fn phrase_features(phrase: &Phrase, tagger: &TaggerModel) -> Vec<f64> {
    let e = tagger.embed_dim();
    let mut f = vec![0.0; e];
    for w in &phrase.words {
        for (a, b) in f.iter_mut().zip(tagger.embedding(w)) {
            *a += b;
        }
    }
    let n = phrase.words.len().max(1) as f64;
    f.iter_mut().for_each(|v| *v /= n);
    f.push(phrase.words.len() as f64);
    f.push(phrase.weight);
    f
}

/// `(is_true, probability)`; a phrase is accepted when `probability >= 0.5`.
pub fn adjudicate(phrase: &Phrase, model: &AdjudicatorModel, tagger: &TaggerModel) -> Result<(bool, f64)> {
    if phrase.words.is_empty() {
        return Err(Error::Empty("cannot adjudicate an empty phrase".into()));
    }
    let p = model.probability(&phrase_features(phrase, tagger))?;
    Ok((p >= 0.5, p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjudicatorConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for AdjudicatorConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 0.02,
            batch: 32,
            seed: 0,
        }
    }
}

/// Binary cross-entropy training with Adam.
pub fn train_adjudicator(
    examples: &[(Phrase, bool)],
    tagger: &TaggerModel,
    cfg: &AdjudicatorConfig,
) -> Result<AdjudicatorModel> {
    if examples.is_empty() {
        return Err(Error::Empty("no adjudicator examples".into()));
    }
    let feats: Vec<(Vec<f64>, f64)> = examples
        .iter()
        .map(|(p, y)| (phrase_features(p, tagger), f64::from(u8::from(*y))))
        .collect();
    let mut rng = seeded_rng(cfg.seed);
    let mut model = AdjudicatorModel {
        linear: Linear::new(feature_dim(tagger.embed_dim()), 1, &mut rng),
    };
    let mut adam = AdamState::new(cfg.lr);
    let mut order: Vec<usize> = (0..feats.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grad = model.linear.zeros_like();
            for &k in chunk {
                let (x, y) = &feats[k];
                let p = model.probability(x)?;
                model.linear.backward(x, &[(p - y) / chunk.len() as f64], &mut grad);
            }
            adam.update(&mut model.linear, &grad)?;
        }
    }
    Ok(model)
}

pub fn adjudicator_accuracy(
    model: &AdjudicatorModel,
    tagger: &TaggerModel,
    examples: &[(Phrase, bool)],
) -> Result<f64> {
    let mut hits = 0;
    for (p, y) in examples {
        if adjudicate(p, model, tagger)?.0 == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_model_accepts_at_one_half() {
        let tagger = TaggerModel::zeros(4, 2);
        let (ok, p) = adjudicate(&Phrase::new(&["salt"], 0.3), &AdjudicatorModel::zeros(4), &tagger).unwrap();
        assert_eq!(p, 0.5);
        assert!(ok);
        assert!(adjudicate(&Phrase::new::<&str>(&[], 0.0), &AdjudicatorModel::zeros(4), &tagger).is_err());
    }

    proptest! {
        #[test]
        fn probability_is_open_interval(ws in proptest::collection::vec(-5.0f64..5.0, 6), len in 1usize..4, w in 0.0f64..2.0) {
            let tagger = TaggerModel::zeros(4, 2);
            let mut m = AdjudicatorModel::zeros(4);
            m.linear.weight.data_mut().copy_from_slice(&ws);
            let words: Vec<String> = (0..len).map(|k| format!("w{k}")).collect();
            let (_, p) = adjudicate(&Phrase::new(&words, w), &m, &tagger).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
        }
    }
}

//! Ingredient entity extraction: BIO tagging, span adjudication, dictionary
//! canonicalization and recovery of falsely rejected spans.

mod adjudicator;
mod bio;
mod dictionary;
mod tagger;

pub use adjudicator::{
    adjudicate, adjudicator_accuracy, phrase_features, train_adjudicator, AdjudicatorConfig,
    AdjudicatorModel, Phrase,
};
pub use bio::{decode_ranges, decode_spans, BioLabel};
pub use dictionary::{canonical_form, EntityDictionary};
pub use tagger::{
    synthetic_tagging_corpus, tag_line, token_accuracy, train_tagger, TaggedLine, TaggerConfig,
    TaggerModel,
};

use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::corpus::Recipe;
use crate::error::Result;
use crate::nn::Linear;
use crate::tfidf::{KeyTermWeights, TfidfModel, DEFAULT_THRESHOLD};

/// Canonicalized entity for a phrase, recording it in the dictionary.
pub fn canonicalize<S: AsRef<str>>(phrase: &[S], dict: &mut EntityDictionary) -> String {
    dict.canonicalize(phrase)
}

/// Weight of a phrase in a scored document: the largest weight among its words.
pub fn phrase_weight<S: AsRef<str>>(words: &[S], doc: &KeyTermWeights) -> f64 {
    words
        .iter()
        .filter_map(|w| doc.get(w.as_ref()))
        .fold(0.0, f64::max)
}

/// Recovers rejected phrases. A phrase comes back when the dictionary knows
/// it or one of its contiguous sub-phrases (longest first), or when its TFIDF
/// weight reaches `threshold`. Results are canonical entities.
pub fn recover_false(rejected: &[Phrase], dict: &EntityDictionary, threshold: f64) -> Vec<String> {
    rejected
        .iter()
        .filter(|p| !p.words.is_empty())
        .filter_map(|p| match dict.longest_match(&p.words) {
            Some((_, c)) => Some(c.to_string()),
            None if p.weight >= threshold => Some(canonical_form(&p.words)),
            None => None,
        })
        .collect()
}

/// Raw token document of a recipe: title, ingredient lines, instructions.
pub fn raw_document(recipe: &Recipe) -> Vec<String> {
    recipe
        .title
        .iter()
        .chain(recipe.ingredient_lines.iter().flatten())
        .chain(recipe.instructions.iter().flatten())
        .cloned()
        .collect()
}

/// What the extractor found in one recipe.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    /// Spans the adjudicator accepted.
    pub accepted: Vec<Vec<String>>,
    /// Spans the adjudicator rejected, with their weights.
    pub rejected: Vec<Phrase>,
    /// Canonical entities brought back from rejected spans or lines.
    pub recovered: Vec<String>,
    /// Canonical entities in order of appearance, without duplicates.
    pub entities: Vec<String>,
}

/// Trained extraction pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Extractor {
    pub tagger: TaggerModel,
    pub adjudicator: AdjudicatorModel,
    pub dictionary: EntityDictionary,
    /// Fitted on raw (uncanonicalized) recipe documents.
    pub raw_tfidf: TfidfModel,
    pub threshold: f64,
    pub recovery: bool,
}

impl Extractor {
    pub fn extract(&self, recipe: &Recipe) -> Result<Extraction> {
        let doc = self.raw_tfidf.score(&raw_document(recipe));
        let mut ex = Extraction::default();
        let mut line_fallback = Vec::new();
        for line in &recipe.ingredient_lines {
            if line.is_empty() {
                continue;
            }
            let labels = tag_line(line, &self.tagger)?;
            let mut any = false;
            for (s, e) in decode_ranges(&labels) {
                let phrase = Phrase::new(&line[s..e], phrase_weight(&line[s..e], &doc));
                if adjudicate(&phrase, &self.adjudicator, &self.tagger)?.0 {
                    any = true;
                    ex.entities.push(canonical_form(&phrase.words));
                    ex.accepted.push(phrase.words);
                } else {
                    ex.rejected.push(phrase);
                }
            }
            if !any {
                line_fallback.push(line.clone());
            }
        }
        if self.recovery {
            ex.recovered = recover_false(&ex.rejected, &self.dictionary, self.threshold);
            ex.recovered.extend(
                line_fallback
                    .iter()
                    .filter_map(|l| self.dictionary.longest_match(l).map(|(_, c)| c.to_string())),
            );
            ex.entities.extend(ex.recovered.iter().cloned());
        }
        let mut seen = std::collections::HashSet::new();
        ex.entities.retain(|e| seen.insert(e.clone()));
        Ok(ex)
    }

    /// Records every accepted phrase in the dictionary.
    pub fn record(&mut self, extraction: &Extraction) {
        for p in &extraction.accepted {
            self.dictionary.canonicalize(p);
        }
    }

    /// Writes the model files into `dir`, creating it if needed.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut ck = Checkpoint::new();
        self.tagger.save_into(&mut ck, "tagger");
        ck.store("adjudicator", &self.adjudicator.linear);
        ck.set_meta("extractor.threshold", self.threshold.to_string());
        ck.set_meta("extractor.recovery", self.recovery.to_string());
        ck.save(dir.join("extractor.ckpt"))?;
        self.dictionary.save(dir.join("dictionary.tsv"))?;
        self.raw_tfidf.save(dir.join("raw_tfidf.tsv"))?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let ck = Checkpoint::load(dir.join("extractor.ckpt"))?;
        let tagger = TaggerModel::load_from(&ck, "tagger")?;
        let mut linear = Linear::zeros(tagger.embed_dim() + 2, 1);
        ck.restore("adjudicator", &mut linear)?;
        let parse_err = |k: &str| crate::Error::Checkpoint(format!("bad `{k}`"));
        Ok(Self {
            adjudicator: AdjudicatorModel { linear },
            tagger,
            dictionary: EntityDictionary::load(dir.join("dictionary.tsv"))?,
            raw_tfidf: TfidfModel::load(dir.join("raw_tfidf.tsv"))?,
            threshold: ck
                .meta("extractor.threshold")?
                .parse()
                .map_err(|_| parse_err("extractor.threshold"))?,
            recovery: ck
                .meta("extractor.recovery")?
                .parse()
                .map_err(|_| parse_err("extractor.recovery"))?,
        })
    }
}

/// Self-labelled adjudicator examples from recipe ingredient lines: greedy
/// dictionary matches are positives, the runs of words between them (and
/// their single words) are negatives.
pub fn phrase_examples(recipes: &[Recipe], dict: &EntityDictionary, raw_tfidf: &TfidfModel) -> Vec<(Phrase, bool)> {
    let mut out = Vec::new();
    for r in recipes {
        let doc = raw_tfidf.score(&raw_document(r));
        for line in &r.ingredient_lines {
            let mut run: Vec<String> = Vec::new();
            let flush = |run: &mut Vec<String>, out: &mut Vec<(Phrase, bool)>| {
                if run.is_empty() {
                    return;
                }
                if run.len() > 1 {
                    for w in run.iter() {
                        out.push((Phrase::new(&[w], phrase_weight(&[w], &doc)), false));
                    }
                }
                out.push((Phrase::new(run, phrase_weight(run, &doc)), false));
                run.clear();
            };
            let mut k = 0;
            while k < line.len() {
                let max = dict.max_words().min(line.len() - k);
                let hit = (1..=max).rev().find(|&len| dict.lookup(&line[k..k + len]).is_some());
                match hit {
                    Some(len) => {
                        flush(&mut run, &mut out);
                        let words = &line[k..k + len];
                        out.push((Phrase::new(words, phrase_weight(words, &doc)), true));
                        k += len;
                    }
                    None => {
                        run.push(line[k].clone());
                        k += 1;
                    }
                }
            }
            flush(&mut run, &mut out);
        }
    }
    out
}

/// Trains tagger and adjudicator from a seed dictionary and the training
/// recipes.
pub fn train_extractor(
    recipes: &[Recipe],
    seed_dictionary: EntityDictionary,
    tagger_cfg: &TaggerConfig,
    adjudicator_cfg: &AdjudicatorConfig,
    tagging_lines: usize,
) -> Result<Extractor> {
    let raw_docs: Vec<Vec<String>> = recipes.iter().map(raw_document).collect();
    let raw_tfidf = TfidfModel::fit(&raw_docs)?;
    let phrases: Vec<String> = seed_dictionary.entries().map(|(p, _)| p.to_string()).collect();
    let lines = synthetic_tagging_corpus(&phrases, tagging_lines, tagger_cfg.seed);
    let (tagger, _) = train_tagger(&lines, tagger_cfg)?;
    let examples = phrase_examples(recipes, &seed_dictionary, &raw_tfidf);
    let adjudicator = train_adjudicator(&examples, &tagger, adjudicator_cfg)?;
    Ok(Extractor {
        tagger,
        adjudicator,
        dictionary: seed_dictionary,
        raw_tfidf,
        threshold: DEFAULT_THRESHOLD,
        recovery: true,
    })
}

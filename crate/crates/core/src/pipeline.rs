//! End-to-end glue: entity-canonicalized recipe text, key-term weights and
//! word vectors feeding the joint model, plus a self-contained bundle that
//! can encode raw recipes and image features for serving.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;

use crate::category::{assign_category, extract_bigrams, CategoryLabel, CategoryVocab, DEFAULT_STOP_BIGRAMS};
use crate::checkpoint::Checkpoint;
use crate::corpus::{Dataset, Recipe};
use crate::encoders::{frequency_feature, sentence_inputs, ImageInput, JointEmbedding, RecipeInput, Side};
use crate::error::{Error, Result};
use crate::eval::{evaluate_embeddings, RetrievalReport};
use crate::extractor::Extractor;
use crate::joint::{embed_pairs, train_with, EpochStats, JointModel, TrainConfig, TrainingSet};
use crate::tfidf::{filter_key_terms, TfidfModel, DEFAULT_THRESHOLD};
use crate::word2vec::{build_vocab, train_cbow, CbowConfig, WordEmbeddingMatrix};

/// A recipe after entity extraction, with multi-word entities in the title
/// and text replaced by their canonical token.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeText {
    pub title: Vec<String>,
    pub entities: Vec<String>,
    pub ingredient_lines: Vec<Vec<String>>,
    pub instructions: Vec<Vec<String>>,
}

impl RecipeText {
    pub fn new(recipe: &Recipe, extractor: &Extractor) -> Result<Self> {
        let entities = extractor.extract(recipe)?.entities;
        let d = &extractor.dictionary;
        Ok(Self {
            title: d.rewrite(&recipe.title),
            entities,
            ingredient_lines: recipe.ingredient_lines.iter().map(|l| d.rewrite(l)).collect(),
            instructions: recipe.instructions.iter().map(|l| d.rewrite(l)).collect(),
        })
    }

    /// TFIDF document: title, extracted entities, instructions.
    pub fn document(&self) -> Vec<String> {
        self.title
            .iter()
            .chain(&self.entities)
            .chain(self.instructions.iter().flatten())
            .cloned()
            .collect()
    }

    /// Sentences contributed to the word2vec corpus.
    pub fn sentences(&self) -> Vec<Vec<String>> {
        let mut out = vec![self.title.clone(), self.entities.clone()];
        out.extend(self.ingredient_lines.iter().cloned());
        out.extend(self.instructions.iter().cloned());
        out.retain(|s| !s.is_empty());
        out
    }
}

/// Canonicalizes every recipe of a dataset.
pub fn recipe_texts(dataset: &Dataset, extractor: &Extractor) -> Result<Vec<RecipeText>> {
    dataset.recipes.par_iter().map(|r| RecipeText::new(r, extractor)).collect()
}

/// Turns canonical text and image records into encoder inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    pub tfidf: TfidfModel,
    pub w2v: WordEmbeddingMatrix,
    pub threshold: f64,
}

impl Featurizer {
    pub fn recipe_input(&self, text: &RecipeText) -> RecipeInput {
        let keys = filter_key_terms(&self.tfidf.score(&text.document()), self.threshold);
        RecipeInput {
            frequency: frequency_feature(&keys, &self.w2v),
            sentences: sentence_inputs(&text.instructions, &self.w2v),
        }
    }

    pub fn image_input(&self, feature: Vec<f64>, category: &str) -> ImageInput {
        ImageInput::new(feature, category, &self.w2v)
    }
}

/// TFIDF documents of the given texts.
pub fn tfidf_documents(texts: &[RecipeText]) -> Vec<Vec<String>> {
    texts.iter().map(RecipeText::document).collect()
}

/// Word2vec training sentences of the given texts.
pub fn word2vec_corpus(texts: &[RecipeText]) -> Vec<Vec<String>> {
    texts.iter().flat_map(RecipeText::sentences).collect()
}

/// Fits the key-term TFIDF and the word embeddings on training texts.
pub fn fit_featurizer(texts: &[RecipeText], cbow: &CbowConfig, min_count: usize, threshold: f64) -> Result<Featurizer> {
    let tfidf = TfidfModel::fit(&tfidf_documents(texts))?;
    let corpus = word2vec_corpus(texts);
    let vocab = build_vocab(&corpus, min_count)?;
    let (w2v, _) = train_cbow(&corpus, &vocab, cbow)?;
    Ok(Featurizer { tfidf, w2v, threshold })
}

/// Category assignment for every recipe, using its first image's top-1
/// prediction as the final fallback.
pub fn assign_categories(dataset: &Dataset, vocab: &CategoryVocab) -> Result<Vec<(String, CategoryLabel)>> {
    dataset
        .recipes
        .iter()
        .map(|r| Ok((r.id.clone(), assign_category(r, vocab, &dataset.first_image(r).predicted_category)?)))
        .collect()
}

/// Primary labels plus the most frequent title bigrams of `dataset`.
pub fn category_vocab(dataset: &Dataset, primary: &[String], top_n: usize) -> Result<CategoryVocab> {
    let titles: Vec<Vec<String>> = dataset.recipes.iter().map(|r| r.title.clone()).collect();
    CategoryVocab::new(primary, &extract_bigrams(&titles, top_n, DEFAULT_STOP_BIGRAMS))
}

/// Class list (sorted) and per-recipe class index. Labels missing from
/// `classes` map to `usize::MAX`.
pub fn label_indices(assignments: &[(String, CategoryLabel)], classes: &[String]) -> Vec<usize> {
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
    assignments
        .iter()
        .map(|(_, c)| index.get(c.label.as_str()).copied().unwrap_or(usize::MAX))
        .collect()
}

pub fn class_list(assignments: &[(String, CategoryLabel)]) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = assignments.iter().map(|(_, c)| c.label.as_str()).collect();
    set.into_iter().map(String::from).collect()
}

/// Encoder inputs for every recipe of `dataset`.
pub fn training_set(
    dataset: &Dataset,
    texts: &[RecipeText],
    featurizer: &Featurizer,
    labels: Vec<usize>,
) -> Result<TrainingSet> {
    if texts.len() != dataset.recipes.len() || labels.len() != texts.len() {
        return Err(Error::Dataset("texts, labels and recipes differ in count".into()));
    }
    let recipes: Vec<RecipeInput> = texts.par_iter().map(|t| featurizer.recipe_input(t)).collect();
    let images = dataset
        .recipes
        .iter()
        .map(|r| {
            r.image_refs
                .iter()
                .map(|id| {
                    let img = dataset.image(id).expect("dataset validated image references");
                    featurizer.image_input(img.feature.clone(), &img.predicted_category)
                })
                .collect()
        })
        .collect();
    Ok(TrainingSet {
        ids: dataset.recipes.iter().map(|r| r.id.clone()).collect(),
        recipes,
        images,
        labels,
    })
}

/// Knobs for everything upstream of joint training.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub cbow: CbowConfig,
    pub min_count: usize,
    pub threshold: f64,
    pub primary_labels: Vec<String>,
    pub bigram_top_n: usize,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cbow: CbowConfig::default(),
            min_count: 1,
            threshold: DEFAULT_THRESHOLD,
            primary_labels: CategoryVocab::food101().primary_labels().iter().map(|s| s.to_string()).collect(),
            bigram_top_n: 2000,
            train: TrainConfig::default(),
        }
    }
}

/// Featurized training (and optional validation) data, ready for any
/// number of joint-training runs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub featurizer: Featurizer,
    pub categories: Vec<String>,
    pub assignments: Vec<(String, CategoryLabel)>,
    pub train: TrainingSet,
    pub validation: Option<TrainingSet>,
    pub feature_dim: usize,
}

pub fn prepare(train: &Dataset, validation: Option<&Dataset>, extractor: &Extractor, cfg: &PipelineConfig) -> Result<Prepared> {
    if cfg.cbow.dim != cfg.train.w2v_dim {
        return Err(Error::InvalidArgument(format!(
            "word2vec dim {} differs from the joint model's w2v_dim {}",
            cfg.cbow.dim, cfg.train.w2v_dim
        )));
    }
    let texts = recipe_texts(train, extractor)?;
    let featurizer = fit_featurizer(&texts, &cfg.cbow, cfg.min_count, cfg.threshold)?;
    let vocab = category_vocab(train, &cfg.primary_labels, cfg.bigram_top_n)?;
    prepare_texts(train, &texts, validation, extractor, featurizer, &vocab)
}

/// Like [`prepare`], with an already fitted featurizer and category vocab.
pub fn prepare_with(
    train: &Dataset,
    validation: Option<&Dataset>,
    extractor: &Extractor,
    featurizer: Featurizer,
    vocab: &CategoryVocab,
) -> Result<Prepared> {
    let texts = recipe_texts(train, extractor)?;
    prepare_texts(train, &texts, validation, extractor, featurizer, vocab)
}

fn prepare_texts(
    train: &Dataset,
    texts: &[RecipeText],
    validation: Option<&Dataset>,
    extractor: &Extractor,
    featurizer: Featurizer,
    vocab: &CategoryVocab,
) -> Result<Prepared> {
    let feature_dim = train.feature_dim().ok_or_else(|| Error::Empty("training set has no images".into()))?;
    let assignments = assign_categories(train, vocab)?;
    let categories = class_list(&assignments);
    let train_set = training_set(train, texts, &featurizer, label_indices(&assignments, &categories))?;
    let validation = match validation {
        Some(v) => {
            let texts = recipe_texts(v, extractor)?;
            let a = assign_categories(v, vocab)?;
            Some(training_set(v, &texts, &featurizer, label_indices(&a, &categories))?)
        }
        None => None,
    };
    Ok(Prepared {
        featurizer,
        categories,
        assignments,
        train: train_set,
        validation,
        feature_dim,
    })
}

/// Initializes and trains a joint model on prepared data.
pub fn train_joint(
    prepared: &Prepared,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochStats),
) -> Result<(JointModel, Vec<EpochStats>)> {
    let mut model = JointModel::init(cfg, prepared.feature_dim, prepared.categories.clone())?;
    let stats = train_with(&mut model, &prepared.train, prepared.validation.as_ref(), cfg, on_epoch)?;
    Ok((model, stats))
}

/// Everything needed to embed raw recipes and image features.
#[derive(Debug, Clone)]
pub struct MsjeModel {
    pub extractor: Extractor,
    pub featurizer: Featurizer,
    pub joint: JointModel,
}

const MODEL_FILE: &str = "model.ckpt";

impl MsjeModel {
    pub fn encode_recipe(&self, recipe: &Recipe) -> Result<JointEmbedding> {
        let text = RecipeText::new(recipe, &self.extractor)?;
        Ok(JointEmbedding {
            side: Side::Recipe,
            vector: self.joint.encode_recipe(&self.featurizer.recipe_input(&text))?,
        })
    }

    pub fn encode_image(&self, feature: &[f64], category: &str) -> Result<JointEmbedding> {
        Ok(JointEmbedding {
            side: Side::Image,
            vector: self.joint.encode_image(&self.featurizer.image_input(feature.to_vec(), category))?,
        })
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        self.joint.save_into(&mut ck);
        self.featurizer.w2v.save_into(&mut ck);
        ck.set_meta("featurizer.threshold", self.featurizer.threshold.to_string());
        ck
    }

    /// Fingerprint of the joint model and word vectors.
    pub fn fingerprint(&self) -> String {
        self.checkpoint().fingerprint()
    }

    /// Writes `model.ckpt`, `tfidf.tsv` and the extractor files into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("extractor"))?;
        self.checkpoint().save(dir.join(MODEL_FILE))?;
        self.featurizer.tfidf.save(dir.join("tfidf.tsv"))?;
        self.extractor.save(dir.join("extractor"))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let ck = Checkpoint::load(dir.join(MODEL_FILE))?;
        let threshold = ck
            .meta("featurizer.threshold")?
            .parse()
            .map_err(|_| Error::Checkpoint("bad `featurizer.threshold`".into()))?;
        Ok(Self {
            extractor: Extractor::load(dir.join("extractor"))?,
            featurizer: Featurizer {
                tfidf: TfidfModel::load(dir.join("tfidf.tsv"))?,
                w2v: WordEmbeddingMatrix::load_from(&ck)?,
                threshold,
            },
            joint: JointModel::load_from(&ck)?,
        })
    }
}

/// Recipe ids with their recipe and first-image embeddings.
pub type DatasetEmbeddings = (Vec<String>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Recipe and first-image embeddings for every recipe of `dataset`, in
/// ascending recipe id order.
pub fn embed_dataset(model: &MsjeModel, dataset: &Dataset) -> Result<DatasetEmbeddings> {
    let texts = recipe_texts(dataset, &model.extractor)?;
    let mut set = training_set(dataset, &texts, &model.featurizer, vec![0; texts.len()])?;
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.sort_by(|&a, &b| set.ids[a].cmp(&set.ids[b]));
    set = TrainingSet {
        ids: order.iter().map(|&k| set.ids[k].clone()).collect(),
        recipes: order.iter().map(|&k| set.recipes[k].clone()).collect(),
        images: order.iter().map(|&k| set.images[k].clone()).collect(),
        labels: order.iter().map(|&k| set.labels[k]).collect(),
    };
    let (r, i) = embed_pairs(&model.joint, &set)?;
    Ok((set.ids, r, i))
}

/// Embedding of every image of `dataset`, in file order.
pub fn embed_images(model: &MsjeModel, dataset: &Dataset) -> Result<Vec<(String, Vec<f64>)>> {
    dataset
        .images
        .par_iter()
        .map(|img| Ok((img.id.clone(), model.encode_image(&img.feature, &img.predicted_category)?.vector)))
        .collect()
}

/// Retrieval evaluation of `model` on `dataset` over sampled subsets.
pub fn evaluate(model: &MsjeModel, dataset: &Dataset, subset_size: usize, n_subsets: usize, seed: u64) -> Result<RetrievalReport> {
    let (_, r, i) = embed_dataset(model, dataset)?;
    evaluate_embeddings(&r, &i, subset_size, n_subsets, seed)
}

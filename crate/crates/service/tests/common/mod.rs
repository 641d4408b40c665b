//! Seeded toy corpus and small model configuration shared by the
//! integration tests.
#![allow(dead_code)]

use msje_core::corpus::{generate_synthetic, Dataset, SyntheticConfig, SyntheticDataset};
use msje_core::eval::{medr, rank_both};
use msje_core::extractor::{train_extractor, AdjudicatorConfig, EntityDictionary, Extractor, TaggerConfig};
use msje_core::joint::{embed_pairs, JointModel, LossWeights, TrainConfig, TrainingSet};
use msje_core::pipeline::{prepare, PipelineConfig, Prepared};
use msje_core::word2vec::CbowConfig;

pub const DATA_SEED: u64 = 7;
pub const N_TRAIN: usize = 500;
pub const N_VAL: usize = 100;

pub struct Toy {
    pub synthetic: SyntheticDataset,
    pub train: Dataset,
    pub val: Dataset,
    pub extractor: Extractor,
    pub prepared: Prepared,
}

pub fn toy_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        joint_dim: 64,
        w2v_dim: 32,
        sentence_hidden: 32,
        instruction_hidden: 32,
        disc_hidden: 32,
        batch: 32,
        lr: 3e-3,
        weights: LossWeights::default(),
        epochs: 50,
        seed,
    }
}

pub fn toy_pipeline_config(categories: &[String], seed: u64) -> PipelineConfig {
    PipelineConfig {
        cbow: CbowConfig {
            dim: 32,
            seed: DATA_SEED,
            ..CbowConfig::default()
        },
        primary_labels: categories.to_vec(),
        train: toy_train_config(seed),
        ..PipelineConfig::default()
    }
}

/// Synthetic corpus with `n_train + n_val` pairs, a trained extractor and
/// featurized train/validation sets.
pub fn toy_with(n_train: usize, n_val: usize) -> Toy {
    let synthetic = generate_synthetic(&SyntheticConfig {
        n_pairs: n_train + n_val,
        seed: DATA_SEED,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let (train, val) = synthetic.dataset.split_at(n_train).unwrap();
    let extractor = train_extractor(
        &train.recipes,
        EntityDictionary::from_phrases(&synthetic.ingredients),
        &TaggerConfig::default(),
        &AdjudicatorConfig::default(),
        1000,
    )
    .unwrap();
    let cfg = toy_pipeline_config(&synthetic.categories, 0);
    let prepared = prepare(&train, Some(&val), &extractor, &cfg).unwrap();
    Toy {
        synthetic,
        train,
        val,
        extractor,
        prepared,
    }
}

pub fn toy() -> Toy {
    toy_with(N_TRAIN, N_VAL)
}

/// (image→recipe, recipe→image) MedR over the whole set.
pub fn medr_both(model: &JointModel, set: &TrainingSet) -> (f64, f64) {
    let (r, i) = embed_pairs(model, set).unwrap();
    let (i2r, r2i) = rank_both(&r, &i).unwrap();
    (medr(&i2r).unwrap(), medr(&r2i).unwrap())
}

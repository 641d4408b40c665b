//! Joint training: triplet loss plus adversarial modality alignment and
//! per-modality category heads, optimized with Adam in an alternating
//! encoder / discriminator schedule.

mod losses;

pub use losses::{
    batch_hard_triplet_loss, discriminator_loss, generator_loss, modality_alignment_losses, semantic_loss,
    total_loss, Discriminator, LossWeights, PairGrad, PROB_CLAMP,
};

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::encoders::{ImageEncoderModel, ImageForward, ImageInput, RecipeEncoderModel, RecipeForward, RecipeInput};
use crate::error::{Error, Result};
use crate::eval::{medr, rank_both};
use crate::nn::{prefixed, prefixed_mut, seeded_rng, AdamState, Linear, Params, Tensor2};

/// Training hyper-parameters. Read from and written to `key=value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub joint_dim: usize,
    pub w2v_dim: usize,
    pub sentence_hidden: usize,
    pub instruction_hidden: usize,
    pub disc_hidden: usize,
    pub batch: usize,
    pub lr: f64,
    pub weights: LossWeights,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            joint_dim: 1024,
            w2v_dim: 300,
            sentence_hidden: 300,
            instruction_hidden: 1024,
            disc_hidden: 256,
            batch: 100,
            lr: 1e-4,
            weights: LossWeights::default(),
            epochs: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Applies `key=value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse {
                path: "<config>".into(),
                line: n + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            self.set(k.trim(), v.trim()).map_err(|e| err(e.to_string()))?;
        }
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidArgument(format!("bad value `{v}` for `{key}`")))
        }
        match key {
            "joint_dim" => self.joint_dim = p(key, value)?,
            "w2v_dim" => self.w2v_dim = p(key, value)?,
            "sentence_hidden" => self.sentence_hidden = p(key, value)?,
            "instruction_hidden" => self.instruction_hidden = p(key, value)?,
            "disc_hidden" => self.disc_hidden = p(key, value)?,
            "batch" => self.batch = p(key, value)?,
            "lr" => self.lr = p(key, value)?,
            "margin" => self.weights.margin = p(key, value)?,
            "lambda1" => self.weights.lambda1 = p(key, value)?,
            "lambda2" => self.weights.lambda2 = p(key, value)?,
            "lambda3" => self.weights.lambda3 = p(key, value)?,
            "epochs" => self.epochs = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::default().apply_text(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            e => e,
        })
    }

    pub fn to_text(&self) -> String {
        let w = &self.weights;
        format!(
            "joint_dim={}\nw2v_dim={}\nsentence_hidden={}\ninstruction_hidden={}\ndisc_hidden={}\nbatch={}\nlr={}\nmargin={}\nlambda1={}\nlambda2={}\nlambda3={}\nepochs={}\nseed={}\n",
            self.joint_dim,
            self.w2v_dim,
            self.sentence_hidden,
            self.instruction_hidden,
            self.disc_hidden,
            self.batch,
            self.lr,
            w.margin,
            w.lambda1,
            w.lambda2,
            w.lambda3,
            self.epochs,
            self.seed
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        let dims = [self.joint_dim, self.w2v_dim, self.sentence_hidden, self.instruction_hidden, self.disc_hidden];
        if dims.contains(&0) {
            return Err(Error::InvalidArgument("all dimensions must be positive".into()));
        }
        if self.batch < 2 {
            return Err(Error::InvalidArgument("batch must be at least 2".into()));
        }
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidArgument(format!("bad learning rate {}", self.lr)));
        }
        Ok(())
    }
}

/// Everything the encoder-side Adam step updates.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSet {
    pub recipe: RecipeEncoderModel,
    pub image: ImageEncoderModel,
    pub recipe_head: Linear,
    pub image_head: Linear,
}

impl Params for EncoderSet {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = prefixed("rec", self.recipe.tensors());
        v.extend(prefixed("img", self.image.tensors()));
        v.extend(prefixed("head_r", self.recipe_head.tensors()));
        v.extend(prefixed("head_im", self.image_head.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut v = prefixed_mut("rec", self.recipe.tensors_mut());
        v.extend(prefixed_mut("img", self.image.tensors_mut()));
        v.extend(prefixed_mut("head_r", self.recipe_head.tensors_mut()));
        v.extend(prefixed_mut("head_im", self.image_head.tensors_mut()));
        v
    }
}

/// Encoders, category heads and discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub encoders: EncoderSet,
    pub disc: Discriminator,
    pub categories: Vec<String>,
}

impl JointModel {
    /// Fresh model; initialization depends only on `cfg.seed`.
    pub fn init(cfg: &TrainConfig, feature_dim: usize, categories: Vec<String>) -> Result<Self> {
        cfg.validate()?;
        if categories.is_empty() || feature_dim == 0 {
            return Err(Error::InvalidArgument("need a feature dimension and at least one category".into()));
        }
        let mut rng = seeded_rng(cfg.seed);
        let n_c = categories.len();
        Ok(Self {
            encoders: EncoderSet {
                recipe: RecipeEncoderModel::new(cfg.w2v_dim, cfg.sentence_hidden, cfg.instruction_hidden, cfg.joint_dim, &mut rng),
                image: ImageEncoderModel::new(feature_dim, cfg.w2v_dim, cfg.joint_dim, &mut rng),
                recipe_head: Linear::new(cfg.joint_dim, n_c, &mut rng),
                image_head: Linear::new(cfg.joint_dim, n_c, &mut rng),
            },
            disc: Discriminator::new(cfg.joint_dim, cfg.disc_hidden, &mut rng),
            categories,
        })
    }

    pub fn joint_dim(&self) -> usize {
        self.encoders.recipe.joint_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.encoders.image.feature_dim
    }

    pub fn encode_recipe(&self, input: &RecipeInput) -> Result<Vec<f64>> {
        self.encoders.recipe.encode(input)
    }

    pub fn encode_image(&self, input: &ImageInput) -> Result<Vec<f64>> {
        self.encoders.image.encode(input)
    }

    pub fn save_into(&self, ck: &mut Checkpoint) {
        ck.store("", &self.encoders);
        ck.store("disc", &self.disc);
        let e = &self.encoders;
        ck.set_meta("joint.w2v_dim", e.recipe.word_dim().to_string());
        ck.set_meta("joint.sentence_hidden", e.recipe.sentence.hidden_dim.to_string());
        ck.set_meta("joint.instruction_hidden", e.recipe.instruction.hidden_dim.to_string());
        ck.set_meta("joint.joint_dim", self.joint_dim().to_string());
        ck.set_meta("joint.feature_dim", self.feature_dim().to_string());
        ck.set_meta("joint.disc_hidden", self.disc.hidden.output_dim().to_string());
        ck.set_meta("joint.categories", self.categories.join("\n"));
    }

    pub fn load_from(ck: &Checkpoint) -> Result<Self> {
        let dim = |k: &str| -> Result<usize> {
            ck.meta(k)?
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad `{k}`")))
        };
        let (w, sh, ih, j, f, dh) = (
            dim("joint.w2v_dim")?,
            dim("joint.sentence_hidden")?,
            dim("joint.instruction_hidden")?,
            dim("joint.joint_dim")?,
            dim("joint.feature_dim")?,
            dim("joint.disc_hidden")?,
        );
        let categories: Vec<String> = ck.meta("joint.categories")?.split('\n').map(String::from).collect();
        let mut m = Self {
            encoders: EncoderSet {
                recipe: RecipeEncoderModel::zeros(w, sh, ih, j),
                image: ImageEncoderModel::zeros(f, w, j),
                recipe_head: Linear::zeros(j, categories.len()),
                image_head: Linear::zeros(j, categories.len()),
            },
            disc: Discriminator::zeros(j, dh),
            categories,
        };
        ck.restore("", &mut m.encoders)?;
        ck.restore("disc", &mut m.disc)?;
        Ok(m)
    }
}

/// Encoder inputs for a set of recipes. `images[i]` lists every image of
/// recipe `i`; the first is its ground-truth pair during evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub ids: Vec<String>,
    pub recipes: Vec<RecipeInput>,
    pub images: Vec<Vec<ImageInput>>,
    pub labels: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    /// Validation sets may carry labels unseen in training, so range checks
    /// are optional.
    fn validate(&self, n_categories: Option<usize>) -> Result<()> {
        let n = self.recipes.len();
        if self.images.len() != n || self.labels.len() != n || self.ids.len() != n {
            return Err(Error::Dataset("training set columns differ in length".into()));
        }
        if let Some(k) = self.images.iter().position(Vec::is_empty) {
            return Err(Error::Dataset(format!("recipe `{}` has no image", self.ids[k])));
        }
        if let Some(n_c) = n_categories {
            if let Some(&y) = self.labels.iter().find(|&&y| y >= n_c) {
                return Err(Error::Dataset(format!("label {y} out of range for {n_c} categories")));
            }
        }
        Ok(())
    }
}

/// Embeds every recipe and its first image.
/// Recipe embeddings and matching image embeddings, row-aligned.
pub type EmbeddingPairs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub fn embed_pairs(model: &JointModel, set: &TrainingSet) -> Result<EmbeddingPairs> {
    let recipes = set.recipes.par_iter().map(|r| model.encode_recipe(r)).collect::<Result<Vec<_>>>()?;
    let images = set.images.par_iter().map(|i| model.encode_image(&i[0])).collect::<Result<Vec<_>>>()?;
    Ok((recipes, images))
}

/// Mean of the two directions' median rank over the whole set.
pub fn validation_medr(model: &JointModel, set: &TrainingSet) -> Result<f64> {
    let (r, i) = embed_pairs(model, set)?;
    let (i2r, r2i) = rank_both(&r, &i)?;
    Ok((medr(&i2r)? + medr(&r2i)?) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub tri: f64,
    /// Generator-side alignment loss, the term weighted in the total.
    pub ma: f64,
    pub sem_r: f64,
    pub sem_im: f64,
    pub disc: f64,
    pub total: f64,
    /// NaN when no validation set was given.
    pub val_medr: f64,
}

pub fn stats_csv(stats: &[EpochStats]) -> String {
    let mut out = String::from("epoch,L_tri,L_ma,L_sem_r,L_sem_im,val_medr\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{},{},{},{}", s.epoch, s.tri, s.ma, s.sem_r, s.sem_im, s.val_medr);
    }
    out
}

/// Fixed chunk count for parallel backprop, so the reduction order (and
/// hence every rounding) does not depend on the thread pool size.
const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Clone, Copy, Default)]
struct BatchLosses {
    tri: f64,
    ma: f64,
    sem_r: f64,
    sem_im: f64,
    disc: f64,
}

struct Trainer<'a> {
    cfg: &'a TrainConfig,
    enc_adam: AdamState,
    disc_adam: AdamState,
}

impl Trainer<'_> {
    fn step(&mut self, model: &mut JointModel, recipes: &[&RecipeInput], images: &[&ImageInput], labels: &[usize]) -> Result<BatchLosses> {
        let w = &self.cfg.weights;
        let enc = &model.encoders;
        let fwd: Vec<(RecipeForward, ImageForward)> = recipes
            .par_iter()
            .zip(images.par_iter())
            .map(|(r, i)| Ok((enc.recipe.forward(r)?, enc.image.forward(i)?)))
            .collect::<Result<_>>()?;
        let e_r: Vec<Vec<f64>> = fwd.iter().map(|f| f.0.output.clone()).collect();
        let e_im: Vec<Vec<f64>> = fwd.iter().map(|f| f.1.output.clone()).collect();

        let tri = batch_hard_triplet_loss(&e_r, &e_im, w.margin)?;
        let (ma, d_gen, _) = generator_loss(&e_r, &model.disc)?;
        let mut head_r = enc.recipe_head.zeros_like();
        let mut head_im = enc.image_head.zeros_like();
        let (sem_r, d_sem_r) = semantic_loss(&e_r, labels, &enc.recipe_head, &mut head_r)?;
        let (sem_im, d_sem_im) = semantic_loss(&e_im, labels, &enc.image_head, &mut head_im)?;

        let n = e_r.len();
        let d_r: Vec<Vec<f64>> = (0..n)
            .map(|k| {
                (0..e_r[k].len())
                    .map(|c| tri.d_recipes[k][c] + w.lambda1 * d_gen[k][c] + w.lambda2 * d_sem_r[k][c])
                    .collect()
            })
            .collect();
        let d_im: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..e_im[k].len()).map(|c| tri.d_images[k][c] + w.lambda3 * d_sem_im[k][c]).collect())
            .collect();

        let chunk = n.div_ceil(GRAD_CHUNKS).max(1);
        let idx: Vec<usize> = (0..n).collect();
        let partial: Vec<(RecipeEncoderModel, ImageEncoderModel)> = idx
            .par_chunks(chunk)
            .map(|ks| {
                let mut gr = enc.recipe.zeros_like();
                let mut gi = enc.image.zeros_like();
                for &k in ks {
                    enc.recipe.backward(&fwd[k].0, &d_r[k], &mut gr);
                    enc.image.backward(&fwd[k].1, &d_im[k], &mut gi);
                }
                (gr, gi)
            })
            .collect();
        let mut grad = EncoderSet {
            recipe: enc.recipe.zeros_like(),
            image: enc.image.zeros_like(),
            recipe_head: head_r,
            image_head: head_im,
        };
        grad.recipe_head.scale(w.lambda2);
        grad.image_head.scale(w.lambda3);
        for (gr, gi) in &partial {
            grad.recipe.accumulate(gr);
            grad.image.accumulate(gi);
        }
        self.enc_adam.update(&mut model.encoders, &grad)?;

        // Discriminator step on the same (pre-update) embeddings.
        let (dl, dgrad) = discriminator_loss(&e_r, &e_im, &model.disc)?;
        self.disc_adam.update(&mut model.disc, &dgrad)?;

        Ok(BatchLosses {
            tri: tri.loss,
            ma,
            sem_r,
            sem_im,
            disc: dl.loss,
        })
    }
}

/// Trains `model` in place for `cfg.epochs` epochs. Each epoch shuffles the
/// recipes, draws one of each recipe's images, and walks the batches.
/// A trailing batch smaller than 2 is dropped.
pub fn train(
    model: &mut JointModel,
    data: &TrainingSet,
    validation: Option<&TrainingSet>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    train_with(model, data, validation, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    model: &mut JointModel,
    data: &TrainingSet,
    validation: Option<&TrainingSet>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    let n_c = model.categories.len();
    data.validate(Some(n_c))?;
    if let Some(v) = validation {
        v.validate(None)?;
    }
    if data.len() < 2 * cfg.batch {
        return Err(Error::Dataset(format!(
            "need at least {} training pairs for batch {}, got {}",
            2 * cfg.batch,
            cfg.batch,
            data.len()
        )));
    }
    let mut trainer = Trainer {
        cfg,
        enc_adam: AdamState::new(cfg.lr),
        disc_adam: AdamState::new(cfg.lr),
    };
    let mut rng = seeded_rng(cfg.seed ^ 0x5eed_7a1e);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut stats = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let picks: Vec<usize> = data.images.iter().map(|imgs| rng.random_range(0..imgs.len())).collect();
        let mut sum = BatchLosses::default();
        let mut batches = 0;
        for b in order.chunks(cfg.batch).filter(|b| b.len() >= 2) {
            let recipes: Vec<&RecipeInput> = b.iter().map(|&k| &data.recipes[k]).collect();
            let images: Vec<&ImageInput> = b.iter().map(|&k| &data.images[k][picks[k]]).collect();
            let labels: Vec<usize> = b.iter().map(|&k| data.labels[k]).collect();
            let l = trainer.step(model, &recipes, &images, &labels)?;
            sum.tri += l.tri;
            sum.ma += l.ma;
            sum.sem_r += l.sem_r;
            sum.sem_im += l.sem_im;
            sum.disc += l.disc;
            batches += 1;
        }
        let nb = batches as f64;
        let (tri, ma, sem_r, sem_im) = (sum.tri / nb, sum.ma / nb, sum.sem_r / nb, sum.sem_im / nb);
        let s = EpochStats {
            epoch,
            tri,
            ma,
            sem_r,
            sem_im,
            disc: sum.disc / nb,
            total: total_loss(tri, ma, sem_r, sem_im, &cfg.weights),
            val_medr: match validation {
                Some(v) => validation_medr(model, v)?,
                None => f64::NAN,
            },
        };
        on_epoch(&s);
        stats.push(s);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(n: usize, seed: u64, feature_dim: usize, word_dim: usize, n_c: usize) -> TrainingSet {
        let mut rng = seeded_rng(seed);
        let mut v = |d: usize| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let mut set = TrainingSet::default();
        for k in 0..n {
            set.ids.push(format!("r{k}"));
            set.recipes.push(RecipeInput {
                frequency: v(word_dim),
                sentences: vec![vec![v(word_dim), v(word_dim)], vec![v(word_dim)]],
            });
            set.images.push(vec![ImageInput {
                feature: v(feature_dim),
                category: v(word_dim),
            }]);
            set.labels.push(k % n_c);
        }
        set
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            joint_dim: 8,
            w2v_dim: 4,
            sentence_hidden: 4,
            instruction_hidden: 4,
            disc_hidden: 4,
            batch: 4,
            lr: 1e-2,
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = small_cfg();
        let back = TrainConfig::default().apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        let c = TrainConfig::default()
            .apply_text("# toy\nbatch = 32\nlambda2=0 # off\n")
            .unwrap();
        assert_eq!((c.batch, c.weights.lambda2), (32, 0.0));
        assert!(matches!(TrainConfig::default().apply_text("\nbogus=1"), Err(Error::Parse { line: 2, .. })));
        assert!(TrainConfig::default().apply_text("batch").is_err());
        assert!(TrainConfig { batch: 1, ..small_cfg() }.validate().is_err());
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let cfg = TrainConfig { lr: 0.0, ..small_cfg() };
        let data = toy_set(12, 1, 5, 4, 3);
        let mut model = JointModel::init(&cfg, 5, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let before = model.clone();
        train(&mut model, &data, None, &cfg).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = small_cfg();
        let data = toy_set(12, 2, 5, 4, 3);
        let val = toy_set(6, 3, 5, 4, 3);
        let cats: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let run = || {
            let mut m = JointModel::init(&cfg, 5, cats.clone()).unwrap();
            let s = train(&mut m, &data, Some(&val), &cfg).unwrap();
            (m, s)
        };
        let (m1, s1) = run();
        let (m2, s2) = run();
        assert_eq!(m1, m2);
        let bits = |s: &[EpochStats]| s.iter().map(|e| (e.total.to_bits(), e.val_medr.to_bits())).collect::<Vec<_>>();
        assert_eq!(bits(&s1), bits(&s2));
        assert!(s1.iter().all(|s| s.total.is_finite()));
    }

    #[test]
    fn training_reduces_loss_on_toy_data() {
        let cfg = TrainConfig { epochs: 15, ..small_cfg() };
        let data = toy_set(16, 4, 5, 4, 2);
        let mut m = JointModel::init(&cfg, 5, vec!["a".into(), "b".into()]).unwrap();
        let s = train(&mut m, &data, None, &cfg).unwrap();
        assert!(s.last().unwrap().total < s[0].total, "{s:?}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = small_cfg();
        let data = toy_set(6, 5, 5, 4, 3);
        let mut m = JointModel::init(&cfg, 5, vec!["a".into(), "b".into(), "c".into()]).unwrap();
        assert!(matches!(train(&mut m, &data, None, &cfg), Err(Error::Dataset(_))));
        let mut bad = toy_set(12, 5, 5, 4, 3);
        bad.labels[0] = 7;
        assert!(train(&mut m, &bad, None, &cfg).is_err());
        assert!(JointModel::init(&cfg, 5, vec![]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = small_cfg();
        let m = JointModel::init(&cfg, 5, vec!["meat loaf".into(), "pizza".into()]).unwrap();
        let mut ck = Checkpoint::new();
        m.save_into(&mut ck);
        let back = JointModel::load_from(&Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(ck.get("rec.fusion.w").is_ok());
        assert!(ck.get("img.projection.w").is_ok());
    }

    #[test]
    fn stats_csv_header() {
        let s = EpochStats { epoch: 1, tri: 1.0, ma: 0.5, sem_r: 2.0, sem_im: 2.0, disc: 1.3, total: 1.0225, val_medr: 3.5 };
        assert_eq!(stats_csv(&[s]), "epoch,L_tri,L_ma,L_sem_r,L_sem_im,val_medr\n1,1,0.5,2,2,3.5\n");
    }
}

//! `msje` command line. Every stage reads its inputs from and writes its
//! outputs to the working directory given by `--out`, so the stages chain
//! without further flags:
//!
//! ingest → train-extractor → build-vocab → train-w2v → assign-categories
//! → train-joint → evaluate / build-index → serve / query

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use msje_core::category::{
    extract_bigrams, load_labels, save_assignments, save_labels, CategoryVocab, DEFAULT_STOP_BIGRAMS,
};
use msje_core::checkpoint::Checkpoint;
use msje_core::corpus::{generate_synthetic, parse_dataset, Dataset, SyntheticConfig};
use msje_core::encoders::Side;
use msje_core::extractor::{train_extractor, AdjudicatorConfig, EntityDictionary, Extractor, TaggerConfig};
use msje_core::joint::{stats_csv, TrainConfig};
use msje_core::pipeline::{
    assign_categories, embed_dataset, embed_images, evaluate, prepare_with, recipe_texts, tfidf_documents,
    train_joint, word2vec_corpus, Featurizer, MsjeModel, PipelineConfig,
};
use msje_core::tfidf::TfidfModel;
use msje_core::word2vec::{build_vocab, train_cbow, Vocab, WordEmbeddingMatrix};
use msje_core::Error as CoreError;

use crate::index::RetrievalIndex;
use crate::server::{self, AppState, ImageQuery, RecipeQuery, Snapshot};

pub const RECIPES_FILE: &str = "recipes.jsonl";
pub const IMAGES_FILE: &str = "images.jsonl";
pub const EXTRACTOR_DIR: &str = "extractor";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const TFIDF_FILE: &str = "tfidf.tsv";
pub const W2V_FILE: &str = "w2v.ckpt";
pub const PRIMARY_LABELS_FILE: &str = "labels-primary.txt";
pub const BIGRAM_LABELS_FILE: &str = "labels-bigram.txt";
pub const ASSIGNMENTS_FILE: &str = "assignments.tsv";
pub const MODEL_DIR: &str = "model";
pub const STATS_FILE: &str = "stats.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const INDEX_DIR: &str = "index";
pub const RECIPE_INDEX_FILE: &str = "recipes.idx";
pub const IMAGE_INDEX_FILE: &str = "images.idx";

#[derive(Debug, Parser)]
#[command(name = "msje", version, about = "Recipe/image joint embedding pipeline and retrieval service")]
pub struct Cli {
    /// key=value settings file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random stage; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Working directory for inputs and outputs of every stage.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a recipes/images JSON-lines pair (or generate a synthetic
    /// one) and copy it into the working directory.
    Ingest(IngestArgs),
    /// Term counts and document frequencies of the canonicalized corpus.
    BuildVocab(DataArgs),
    /// Train CBOW word vectors over the vocabulary.
    TrainW2v(DataArgs),
    /// Train the ingredient tagger and phrase adjudicator.
    TrainExtractor(TrainExtractorArgs),
    /// Build the category vocabulary and label every recipe.
    AssignCategories(AssignArgs),
    /// Train the joint embedding model.
    TrainJoint(TrainJointArgs),
    /// Retrieval metrics on a held-out dataset.
    Evaluate(EvaluateArgs),
    /// Embed a dataset into recipe and image indexes.
    BuildIndex(DataArgs),
    /// Serve retrieval over HTTP.
    Serve(ServeArgs),
    /// Answer one retrieval request offline.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long, requires = "images", conflicts_with = "synthetic")]
    pub recipes: Option<PathBuf>,
    #[arg(long, requires = "recipes")]
    pub images: Option<PathBuf>,
    /// Generate this many synthetic recipe/image pairs instead.
    #[arg(long, value_name = "N_PAIRS")]
    pub synthetic: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub categories: usize,
    #[arg(long, default_value_t = 32)]
    pub feature_dim: usize,
    /// Write the first N recipes to train/ and the rest to val/.
    #[arg(long, value_name = "N")]
    pub split: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding recipes.jsonl and images.jsonl [default: <out>/train, else <out>].
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainExtractorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Seed ingredient dictionary: one phrase per line, or "phrase\tcanonical" lines.
    #[arg(long, value_name = "PATH")]
    pub dictionary: PathBuf,
}

#[derive(Debug, Args)]
pub struct AssignArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Primary labels, one per line [default: the 101 food classes].
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainJointArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Validation dataset for per-epoch MedR [default: <out>/val if present].
    #[arg(long, value_name = "DIR")]
    pub val: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset to evaluate on [default: <out>/val].
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub index: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// JSON recipe query file ("-" for stdin).
    #[arg(long, value_name = "PATH", conflicts_with = "image", required_unless_present = "image")]
    pub recipe: Option<PathBuf>,
    /// JSON image query file ("-" for stdin).
    #[arg(long, value_name = "PATH")]
    pub image: Option<PathBuf>,
    /// Overrides the request's k.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub index: Option<PathBuf>,
}

/// Everything tunable from the `--config` file.
#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub tagger: TaggerConfig,
    pub adjudicator: AdjudicatorConfig,
    pub tagging_lines: usize,
    pub eval_subset_size: usize,
    pub eval_subsets: usize,
    pub eval_seed: u64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            tagger: TaggerConfig::default(),
            adjudicator: AdjudicatorConfig::default(),
            tagging_lines: 1000,
            eval_subset_size: 1000,
            eval_subsets: 10,
            eval_seed: 0,
        }
    }
}

impl Settings {
    /// Applies `key=value` lines; `#` starts a comment. Joint-training keys
    /// (joint_dim, w2v_dim, batch, lr, margin, lambda1..3, epochs, seed, ...)
    /// are accepted alongside the pipeline keys below.
    pub fn apply_text(mut self, text: &str, origin: &Path) -> std::result::Result<Self, CoreError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CoreError::Parse {
                path: origin.to_path_buf(),
                line: n + 1,
                msg,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            self.set(k.trim(), v.trim()).map_err(|e| err(e.to_string()))?;
        }
        self.sync_dims();
        Ok(self)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), CoreError> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, CoreError> {
            v.parse()
                .map_err(|_| CoreError::InvalidArgument(format!("bad value `{v}` for `{key}`")))
        }
        let pl = &mut self.pipeline;
        match key {
            "w2v_window" => pl.cbow.window = p(key, value)?,
            "w2v_negatives" => pl.cbow.negatives = p(key, value)?,
            "w2v_epochs" => pl.cbow.epochs = p(key, value)?,
            "w2v_lr" => pl.cbow.lr = p(key, value)?,
            "min_count" => pl.min_count = p(key, value)?,
            "threshold" => pl.threshold = p(key, value)?,
            "bigram_top_n" => pl.bigram_top_n = p(key, value)?,
            "tagger_epochs" => self.tagger.epochs = p(key, value)?,
            "tagger_hidden" => self.tagger.hidden_dim = p(key, value)?,
            "tagger_embed" => self.tagger.embed_dim = p(key, value)?,
            "tagger_lr" => self.tagger.lr = p(key, value)?,
            "adjudicator_epochs" => self.adjudicator.epochs = p(key, value)?,
            "tagging_lines" => self.tagging_lines = p(key, value)?,
            "eval_subset_size" => self.eval_subset_size = p(key, value)?,
            "eval_subsets" => self.eval_subsets = p(key, value)?,
            _ => pl.train.set(key, value)?,
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self::default().apply_text(&text, path)?)
    }

    /// One seed for every random stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.pipeline.train.seed = seed;
        self.pipeline.cbow.seed = seed;
        self.tagger.seed = seed;
        self.adjudicator.seed = seed;
        self.eval_seed = seed;
        self
    }

    fn sync_dims(&mut self) {
        self.pipeline.cbow.dim = self.pipeline.train.w2v_dim;
    }

    pub fn train(&self) -> &TrainConfig {
        &self.pipeline.train
    }
}

impl Cli {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = match &self.config {
            Some(p) => Settings::load(p)?,
            None => Settings::default(),
        };
        if let Some(seed) = self.seed {
            s = s.with_seed(seed);
        }
        s.sync_dims();
        Ok(s)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// `--data`, else `<out>/train` when it exists, else `<out>`.
    fn data_dir(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| {
            let train = self.path("train");
            if train.join(RECIPES_FILE).exists() {
                train
            } else {
                self.out.clone()
            }
        })
    }

    fn model_dir(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.path(MODEL_DIR))
    }

    fn index_dir(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.path(INDEX_DIR))
    }
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    parse_dataset(dir.join(RECIPES_FILE), dir.join(IMAGES_FILE))
        .with_context(|| format!("loading dataset from {}", dir.display()))
}

fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    ds.write_jsonl(dir.join(RECIPES_FILE), dir.join(IMAGES_FILE))?;
    Ok(())
}

/// Reads a seed dictionary: "phrase\tcanonical" lines, or bare phrases.
pub fn load_seed_dictionary(path: &Path) -> Result<EntityDictionary> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.contains('\t') {
        return Ok(EntityDictionary::load(path)?);
    }
    let phrases: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if phrases.is_empty() {
        bail!("{} lists no phrases", path.display());
    }
    Ok(EntityDictionary::from_phrases(phrases))
}

fn category_vocab_from(out: &Cli) -> Result<CategoryVocab> {
    let primary = load_labels(out.path(PRIMARY_LABELS_FILE))?;
    let bigrams = load_labels(out.path(BIGRAM_LABELS_FILE))?;
    Ok(CategoryVocab::new(&primary, &bigrams)?)
}

fn load_featurizer(cli: &Cli, settings: &Settings) -> Result<Featurizer> {
    let ck = Checkpoint::load(cli.path(W2V_FILE)).context("loading word vectors (run train-w2v first)")?;
    let w2v = WordEmbeddingMatrix::load_from(&ck)?;
    if w2v.dim() != settings.train().w2v_dim {
        bail!("word vectors have dim {}, config expects w2v_dim={}", w2v.dim(), settings.train().w2v_dim);
    }
    Ok(Featurizer {
        tfidf: TfidfModel::load(cli.path(TFIDF_FILE)).context("loading tfidf table (run build-vocab first)")?,
        w2v,
        threshold: settings.pipeline.threshold,
    })
}

fn load_extractor(cli: &Cli) -> Result<Extractor> {
    Extractor::load(cli.path(EXTRACTOR_DIR)).context("loading extractor (run train-extractor first)")
}

pub fn load_snapshot(model_dir: &Path, index_dir: &Path) -> Result<Snapshot> {
    let model = MsjeModel::load(model_dir).with_context(|| format!("loading model from {}", model_dir.display()))?;
    let recipes = RetrievalIndex::load(index_dir.join(RECIPE_INDEX_FILE)).context("loading recipe index")?;
    let images = RetrievalIndex::load(index_dir.join(IMAGE_INDEX_FILE)).context("loading image index")?;
    Snapshot::new(model, recipes, images)
}

pub fn run(cli: &Cli) -> Result<()> {
    let settings = cli.settings()?;
    std::fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Ingest(a) => ingest(cli, &settings, a),
        Command::TrainExtractor(a) => {
            let ds = load_dataset(&cli.data_dir(&a.data.data))?;
            let dict = load_seed_dictionary(&a.dictionary)?;
            let ex = train_extractor(&ds.recipes, dict, &settings.tagger, &settings.adjudicator, settings.tagging_lines)?;
            ex.save(cli.path(EXTRACTOR_DIR))?;
            eprintln!("extractor written to {}", cli.path(EXTRACTOR_DIR).display());
            Ok(())
        }
        Command::BuildVocab(a) => {
            let ds = load_dataset(&cli.data_dir(&a.data))?;
            let texts = recipe_texts(&ds, &load_extractor(cli)?)?;
            let vocab = build_vocab(&word2vec_corpus(&texts), settings.pipeline.min_count)?;
            vocab.save(cli.path(VOCAB_FILE))?;
            TfidfModel::fit(&tfidf_documents(&texts))?.save(cli.path(TFIDF_FILE))?;
            eprintln!("{} vocabulary terms", vocab.len());
            Ok(())
        }
        Command::TrainW2v(a) => {
            let ds = load_dataset(&cli.data_dir(&a.data))?;
            let texts = recipe_texts(&ds, &load_extractor(cli)?)?;
            let vocab = Vocab::load(cli.path(VOCAB_FILE)).context("loading vocabulary (run build-vocab first)")?;
            let (w2v, losses) = train_cbow(&word2vec_corpus(&texts), &vocab, &settings.pipeline.cbow)?;
            let mut ck = Checkpoint::new();
            w2v.save_into(&mut ck);
            ck.save(cli.path(W2V_FILE))?;
            for (e, l) in losses.iter().enumerate() {
                eprintln!("cbow epoch {}: loss {l:.5}", e + 1);
            }
            Ok(())
        }
        Command::AssignCategories(a) => {
            let ds = load_dataset(&cli.data_dir(&a.data.data))?;
            let primary = match &a.labels {
                Some(p) => load_labels(p)?,
                None => CategoryVocab::food101().primary_labels().iter().map(|s| s.to_string()).collect(),
            };
            let titles: Vec<Vec<String>> = ds.recipes.iter().map(|r| r.title.clone()).collect();
            let bigrams = extract_bigrams(&titles, settings.pipeline.bigram_top_n, DEFAULT_STOP_BIGRAMS);
            let vocab = CategoryVocab::new(&primary, &bigrams)?;
            let rows = assign_categories(&ds, &vocab)?;
            save_labels(cli.path(PRIMARY_LABELS_FILE), &vocab.primary_labels())?;
            save_labels(cli.path(BIGRAM_LABELS_FILE), &vocab.bigram_labels())?;
            save_assignments(cli.path(ASSIGNMENTS_FILE), &rows)?;
            eprintln!("{} recipes labelled", rows.len());
            Ok(())
        }
        Command::TrainJoint(a) => train_joint_cmd(cli, &settings, a),
        Command::Evaluate(a) => {
            let dir = a.data.clone().unwrap_or_else(|| cli.path("val"));
            let ds = load_dataset(&dir)?;
            let model = MsjeModel::load(cli.model_dir(&a.model))?;
            let size = settings.eval_subset_size.min(ds.recipes.len());
            if size < settings.eval_subset_size {
                eprintln!("subset size reduced to the {size} available pairs");
            }
            let report = evaluate(&model, &ds, size, settings.eval_subsets, settings.eval_seed)?;
            report.save_csv(cli.path(REPORT_FILE))?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::BuildIndex(a) => {
            let ds = load_dataset(&cli.data_dir(&a.data))?;
            let model = MsjeModel::load(cli.model_dir(&None))?;
            let (recipes, images) = build_indexes(&model, &ds)?;
            let dir = cli.index_dir(&None);
            std::fs::create_dir_all(&dir)?;
            recipes.save(dir.join(RECIPE_INDEX_FILE))?;
            images.save(dir.join(IMAGE_INDEX_FILE))?;
            eprintln!("indexed {} recipes and {} images", recipes.len(), images.len());
            Ok(())
        }
        Command::Serve(a) => serve_cmd(cli, a),
        Command::Query(a) => {
            let snap = load_snapshot(&cli.model_dir(&a.model), &cli.index_dir(&a.index))?;
            let json = if let Some(p) = &a.recipe {
                let mut q: RecipeQuery = serde_json::from_str(&read_input(p)?).context("parsing recipe query")?;
                q.k = a.k.unwrap_or(q.k);
                serde_json::to_string_pretty(&snap.recipe_to_image(&q)?)?
            } else {
                let p = a.image.as_ref().expect("clap requires --recipe or --image");
                let mut q: ImageQuery = serde_json::from_str(&read_input(p)?).context("parsing image query")?;
                q.k = a.k.unwrap_or(q.k);
                serde_json::to_string_pretty(&snap.image_to_recipe(&q)?)?
            };
            println!("{json}");
            Ok(())
        }
    }
}

fn read_input(p: &Path) -> Result<String> {
    if p == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        Ok(s)
    } else {
        std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
    }
}

fn ingest(cli: &Cli, settings: &Settings, a: &IngestArgs) -> Result<()> {
    let ds = if let Some(n) = a.synthetic {
        let s = generate_synthetic(&SyntheticConfig {
            n_pairs: n,
            n_categories: a.categories,
            feature_dim: a.feature_dim,
            seed: cli.seed.unwrap_or(settings.train().seed),
            ..SyntheticConfig::default()
        })?;
        write_lines(&cli.path("ingredients.txt"), &s.ingredients)?;
        save_labels(cli.path("categories.txt"), &s.categories)?;
        s.dataset
    } else {
        let (Some(r), Some(i)) = (&a.recipes, &a.images) else {
            bail!("ingest needs --recipes and --images, or --synthetic");
        };
        parse_dataset(r, i)?
    };
    match a.split {
        Some(n) => {
            let (train, val) = ds.split_at(n)?;
            write_dataset(&train, &cli.path("train"))?;
            write_dataset(&val, &cli.path("val"))?;
            eprintln!("{} training and {} validation recipes", train.recipes.len(), val.recipes.len());
        }
        None => {
            write_dataset(&ds, &cli.out)?;
            eprintln!("{} recipes, {} images", ds.recipes.len(), ds.images.len());
        }
    }
    Ok(())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for l in lines {
        writeln!(f, "{l}")?;
    }
    f.flush()?;
    Ok(())
}

fn train_joint_cmd(cli: &Cli, settings: &Settings, a: &TrainJointArgs) -> Result<()> {
    let train = load_dataset(&cli.data_dir(&a.data.data))?;
    let val_dir = a.val.clone().or_else(|| {
        let d = cli.path("val");
        d.join(RECIPES_FILE).exists().then_some(d)
    });
    let val = val_dir.as_deref().map(load_dataset).transpose()?;
    let extractor = load_extractor(cli)?;
    let featurizer = load_featurizer(cli, settings)?;
    let vocab = category_vocab_from(cli).context("loading category labels (run assign-categories first)")?;
    let prepared = prepare_with(&train, val.as_ref(), &extractor, featurizer, &vocab)?;
    let cfg = settings.train();
    let (joint, stats) = train_joint(&prepared, cfg, |s| {
        eprintln!(
            "epoch {:>3}  total {:.5}  tri {:.5}  val_medr {:.1}",
            s.epoch,
            s.total,
            s.tri,
            s.val_medr
        );
    })?;
    let model = MsjeModel {
        extractor,
        featurizer: prepared.featurizer,
        joint,
    };
    let dir = cli.model_dir(&None);
    model.save(&dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    std::fs::write(cli.path(STATS_FILE), stats_csv(&stats))?;
    eprintln!("model {} written to {}", model.fingerprint(), dir.display());
    Ok(())
}

/// Recipe index over every recipe and image index over every image of
/// `dataset`, both tagged with the model fingerprint.
pub fn build_indexes(model: &MsjeModel, dataset: &Dataset) -> Result<(RetrievalIndex, RetrievalIndex)> {
    let fp = model.fingerprint();
    let (ids, recipes, _) = embed_dataset(model, dataset)?;
    let recipe_index = RetrievalIndex::build(Side::Recipe, fp.clone(), ids.into_iter().zip(recipes).collect())?;
    let image_index = RetrievalIndex::build(Side::Image, fp, embed_images(model, dataset)?)?;
    Ok((recipe_index, image_index))
}

fn serve_cmd(cli: &Cli, a: &ServeArgs) -> Result<()> {
    let model_dir = cli.model_dir(&a.model);
    let index_dir = cli.index_dir(&a.index);
    let snap = load_snapshot(&model_dir, &index_dir)?;
    warn_stale(&snap);
    let state = Arc::new(AppState::new(snap));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let (addr, handle) = server::spawn(state.clone(), a.addr).await?;
        eprintln!("serving model {} on http://{addr}", state.current().fingerprint());
        #[cfg(unix)]
        {
            use tokio::signal::unix::{signal, SignalKind};
            let mut hup = signal(SignalKind::hangup())?;
            tokio::spawn(async move {
                while hup.recv().await.is_some() {
                    match load_snapshot(&model_dir, &index_dir) {
                        Ok(s) => {
                            warn_stale(&s);
                            eprintln!("reloaded model {}", s.fingerprint());
                            state.replace(s);
                        }
                        Err(e) => eprintln!("reload failed, keeping the current snapshot: {e:#}"),
                    }
                }
            });
        }
        tokio::select! {
            r = handle => r?,
            r = tokio::signal::ctrl_c() => r?,
        }
        Ok(())
    })
}

fn warn_stale(snap: &Snapshot) {
    for side in snap.stale_indexes() {
        eprintln!(
            "warning: {side:?} index was built by a different model than {}; its queries will fail",
            snap.fingerprint()
        );
    }
}

//! Recipe/image datasets: JSON-lines ingestion, tokenization and a seeded
//! synthetic generator with a planted cross-modal signal.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::seeded_rng;

/// Number of images a recipe may reference.
pub const MAX_IMAGES_PER_RECIPE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub id: String,
    pub title: Vec<String>,
    pub ingredient_lines: Vec<Vec<String>>,
    pub instructions: Vec<Vec<String>>,
    pub image_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub feature: Vec<f64>,
    /// Top-1 category predicted by an external image classifier.
    pub predicted_category: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecipeLine {
    id: String,
    title: String,
    ingredients: Vec<String>,
    instructions: Vec<String>,
    images: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageLine {
    id: String,
    feature: Vec<f64>,
    category: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub recipes: Vec<Recipe>,
    pub images: Vec<ImageRecord>,
    image_index: HashMap<String, usize>,
}

impl Dataset {
    /// Validates references and builds the image lookup.
    pub fn new(recipes: Vec<Recipe>, images: Vec<ImageRecord>) -> Result<Self> {
        let mut image_index = HashMap::with_capacity(images.len());
        let feature_dim = images.first().map(|i| i.feature.len());
        for (k, img) in images.iter().enumerate() {
            if image_index.insert(img.id.clone(), k).is_some() {
                return Err(Error::Dataset(format!("duplicate image id `{}`", img.id)));
            }
            if Some(img.feature.len()) != feature_dim {
                return Err(Error::Dataset(format!(
                    "image `{}` has feature dim {}, expected {}",
                    img.id,
                    img.feature.len(),
                    feature_dim.unwrap_or(0)
                )));
            }
            if img.feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("image `{}` has a non-finite feature", img.id)));
            }
        }
        let mut recipe_ids = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for r in &recipes {
            if !recipe_ids.insert(r.id.as_str()) {
                return Err(Error::Dataset(format!("duplicate recipe id `{}`", r.id)));
            }
            if r.image_refs.is_empty() || r.image_refs.len() > MAX_IMAGES_PER_RECIPE {
                return Err(Error::Dataset(format!(
                    "recipe `{}` has {} images, expected 1..={MAX_IMAGES_PER_RECIPE}",
                    r.id,
                    r.image_refs.len()
                )));
            }
            if r.ingredient_lines.is_empty() || r.instructions.is_empty() {
                return Err(Error::Dataset(format!(
                    "recipe `{}` needs at least one ingredient line and one instruction",
                    r.id
                )));
            }
            for img in &r.image_refs {
                if !image_index.contains_key(img) {
                    return Err(Error::Dataset(format!(
                        "recipe `{}` references missing image `{img}`",
                        r.id
                    )));
                }
                if let Some(prev) = owner.insert(img, &r.id) {
                    return Err(Error::Dataset(format!(
                        "image `{img}` belongs to both `{prev}` and `{}`",
                        r.id
                    )));
                }
            }
        }
        Ok(Self {
            recipes,
            images,
            image_index,
        })
    }

    pub fn image(&self, id: &str) -> Option<&ImageRecord> {
        self.image_index.get(id).map(|&k| &self.images[k])
    }

    /// The ground-truth image of a recipe for evaluation.
    pub fn first_image(&self, recipe: &Recipe) -> &ImageRecord {
        self.image(&recipe.image_refs[0])
            .expect("image references are validated on construction")
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.images.first().map(|i| i.feature.len())
    }

    /// Splits recipes by position; images follow their recipe.
    pub fn split_at(&self, n_first: usize) -> Result<(Dataset, Dataset)> {
        let n_first = n_first.min(self.recipes.len());
        let part = |recipes: &[Recipe]| {
            let images = recipes
                .iter()
                .flat_map(|r| r.image_refs.iter().map(|id| self.image(id).unwrap().clone()))
                .collect();
            Dataset::new(recipes.to_vec(), images)
        };
        Ok((part(&self.recipes[..n_first])?, part(&self.recipes[n_first..])?))
    }

    pub fn write_jsonl(&self, recipes: impl AsRef<Path>, images: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(recipes)?);
        for r in &self.recipes {
            let line = RecipeLine {
                id: r.id.clone(),
                title: r.title.join(" "),
                ingredients: r.ingredient_lines.iter().map(|l| l.join(" ")).collect(),
                instructions: r.instructions.iter().map(|l| l.join(" ")).collect(),
                images: r.image_refs.clone(),
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(images)?);
        for img in &self.images {
            let line = ImageLine {
                id: img.id.clone(),
                feature: img.feature.clone(),
                category: img.predicted_category.clone(),
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            msg: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Reads `recipes.jsonl` and `images.jsonl` and validates cross references.
pub fn parse_dataset(recipes: impl AsRef<Path>, images: impl AsRef<Path>) -> Result<Dataset> {
    let recipe_path = recipes.as_ref();
    let recipe_lines: Vec<RecipeLine> = read_jsonl(recipe_path)?;
    let image_lines: Vec<ImageLine> = read_jsonl(images.as_ref())?;
    let images = image_lines
        .into_iter()
        .map(|l| ImageRecord {
            id: l.id,
            feature: l.feature,
            predicted_category: l.category,
        })
        .collect();
    let recipes = recipe_lines
        .into_iter()
        .map(|l| Recipe {
            id: l.id,
            title: tokenize(&l.title),
            ingredient_lines: non_empty_lines(&l.ingredients),
            instructions: non_empty_lines(&l.instructions),
            image_refs: l.images,
        })
        .collect();
    Dataset::new(recipes, images)
}

fn non_empty_lines(lines: &[String]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| tokenize(l))
        .filter(|t| !t.is_empty())
        .collect()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '/')
}

/// Lowercases and splits on whitespace and punctuation. Hyphens and slashes
/// survive between alphanumerics ("1/4", "stir-fry"); apostrophes are dropped
/// inside words. Underscores split, so raw tokens never collide with
/// canonical entity names.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for (k, &c) in chars.iter().enumerate() {
        let joins = is_joiner(c)
            && cur.chars().last().is_some_and(char::is_alphanumeric)
            && chars.get(k + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || joins {
            cur.push(c);
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else if !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_pairs: usize,
    pub n_categories: usize,
    /// Number of distinct key-ingredient phrases.
    pub vocab_size: usize,
    pub feature_dim: usize,
    /// Per-component standard deviation of the image feature noise.
    pub noise: f64,
    /// Weight of each key-ingredient prototype in the image feature.
    pub ingredient_weight: f64,
    pub key_ingredients: usize,
    pub max_images: usize,
    /// Probability that the supplied top-1 image category is wrong.
    pub category_error: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_pairs: 200,
            n_categories: 10,
            vocab_size: 40,
            feature_dim: 32,
            noise: 0.1,
            ingredient_weight: 0.5,
            key_ingredients: 3,
            max_images: 3,
            category_error: 0.1,
            seed: 0,
        }
    }
}

/// Generated dataset plus the hidden structure used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub categories: Vec<String>,
    /// True category index per recipe.
    pub recipe_category: Vec<usize>,
    /// Key-ingredient phrases (space separated words).
    pub ingredients: Vec<String>,
    pub recipe_ingredients: Vec<Vec<usize>>,
}

pub(crate) const FILLER_INGREDIENTS: &[&str] = &["salt", "water", "olive oil", "sugar", "butter", "black pepper"];
pub(crate) const UNITS: &[&str] = &["cup", "cups", "tablespoon", "teaspoon", "ounces", "pound", "pinch", "can"];
pub(crate) const QUANTITIES: &[&str] = &["1", "2", "3", "4", "1/2", "1/4", "3/4", "1 1/2"];
pub(crate) const SIZES: &[&str] = &["large", "small", "medium", "fresh"];
const TITLE_MODIFIERS: &[&str] = &["easy", "classic", "quick", "best", "spicy", "grandma's", "simple"];
const SYLLABLES: &[&str] = &[
    "ba", "ko", "ri", "ta", "mu", "ze", "lo", "pi", "na", "su", "ve", "do", "ga", "fi", "ru", "me",
    "to", "la", "ki", "po", "sa", "ne", "bu", "ha", "jo", "ti", "wa", "yo", "ce", "xu",
];

fn pseudo_words<R: Rng>(n: usize, rng: &mut R, taken: &mut HashSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(2..=3);
        let w: String = (0..len).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn normal_vec<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Seeded synthetic recipe/image pairs. Each image feature is the sum of its
/// category prototype, weighted key-ingredient prototypes and Gaussian noise;
/// the same category and ingredients are named in the recipe text.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if cfg.n_pairs < 2 || cfg.n_categories < 2 {
        return Err(Error::InvalidArgument(
            "synthetic data needs at least 2 pairs and 2 categories".into(),
        ));
    }
    if cfg.vocab_size < cfg.key_ingredients.max(1) || cfg.max_images == 0 {
        return Err(Error::InvalidArgument(
            "vocab_size must cover key_ingredients and max_images must be positive".into(),
        ));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut taken: HashSet<String> = HashSet::new();
    let categories: Vec<String> = (0..cfg.n_categories)
        .map(|k| {
            let words = pseudo_words(if k % 2 == 0 { 2 } else { 1 }, &mut rng, &mut taken);
            words.join(" ")
        })
        .collect();
    let ingredients: Vec<String> = (0..cfg.vocab_size)
        .map(|k| {
            let words = pseudo_words(if k % 3 == 0 { 2 } else { 1 }, &mut rng, &mut taken);
            words.join(" ")
        })
        .collect();
    let cat_protos: Vec<Vec<f64>> = (0..cfg.n_categories)
        .map(|_| normal_vec(cfg.feature_dim, &mut rng))
        .collect();
    let ing_protos: Vec<Vec<f64>> = (0..cfg.vocab_size)
        .map(|_| normal_vec(cfg.feature_dim, &mut rng))
        .collect();

    let mut recipes = Vec::with_capacity(cfg.n_pairs);
    let mut images = Vec::new();
    let mut recipe_category = Vec::with_capacity(cfg.n_pairs);
    let mut recipe_ingredients = Vec::with_capacity(cfg.n_pairs);
    let all: Vec<usize> = (0..cfg.vocab_size).collect();
    for r in 0..cfg.n_pairs {
        let cat = rng.random_range(0..cfg.n_categories);
        let keys: Vec<usize> = all
            .choose_multiple(&mut rng, cfg.key_ingredients)
            .copied()
            .collect();
        let cat_name = &categories[cat];

        let title = format!("{} {}", TITLE_MODIFIERS.choose(&mut rng).unwrap(), cat_name);
        let mut lines: Vec<String> = keys
            .iter()
            .map(|&k| {
                let qty = QUANTITIES.choose(&mut rng).unwrap();
                match rng.random_range(0..3) {
                    0 => format!("{qty} {} {}", UNITS.choose(&mut rng).unwrap(), ingredients[k]),
                    1 => format!("{qty} {} {}", SIZES.choose(&mut rng).unwrap(), ingredients[k]),
                    _ => format!("{qty} {} {}, chopped", UNITS.choose(&mut rng).unwrap(), ingredients[k]),
                }
            })
            .collect();
        for f in FILLER_INGREDIENTS.choose_multiple(&mut rng, 2) {
            lines.push(format!("{} {} {f}", QUANTITIES.choose(&mut rng).unwrap(), UNITS.choose(&mut rng).unwrap()));
        }
        lines.shuffle(&mut rng);

        let mut steps = vec![format!(
            "combine the {} and {} in a large bowl",
            ingredients[keys[0]],
            ingredients[keys[keys.len().min(2) - 1]]
        )];
        for &k in keys.iter().skip(2) {
            steps.push(format!("add the {} and stir well", ingredients[k]));
        }
        steps.push(format!("cook for {} minutes", rng.random_range(5..60)));
        steps.push(format!("serve the {cat_name} warm"));

        let n_images = rng.random_range(1..=cfg.max_images.min(MAX_IMAGES_PER_RECIPE));
        let mut base = cat_protos[cat].clone();
        for &k in &keys {
            for (b, p) in base.iter_mut().zip(&ing_protos[k]) {
                *b += cfg.ingredient_weight * p;
            }
        }
        let mut refs = Vec::with_capacity(n_images);
        for m in 0..n_images {
            let id = format!("img{r:05}_{m}");
            let feature: Vec<f64> = base
                .iter()
                .map(|b| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    b + cfg.noise * z
                })
                .collect();
            let predicted = if rng.random::<f64>() < cfg.category_error {
                categories.choose(&mut rng).unwrap().clone()
            } else {
                cat_name.clone()
            };
            images.push(ImageRecord {
                id: id.clone(),
                feature,
                predicted_category: predicted,
            });
            refs.push(id);
        }
        recipes.push(Recipe {
            id: format!("r{r:05}"),
            title: tokenize(&title),
            ingredient_lines: lines.iter().map(|l| tokenize(l)).collect(),
            instructions: steps.iter().map(|s| tokenize(s)).collect(),
            image_refs: refs,
        });
        recipe_category.push(cat);
        recipe_ingredients.push(keys);
    }
    Ok(SyntheticDataset {
        dataset: Dataset::new(recipes, images)?,
        categories,
        recipe_category,
        ingredients,
        recipe_ingredients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::euclidean;
    use proptest::prelude::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer_keeps_quantities() {
        assert_eq!(
            tokenize("1/4 cup French fried onions"),
            toks(&["1/4", "cup", "french", "fried", "onions"])
        );
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("Baked Ziti!"), toks(&["baked", "ziti"]));
        assert_eq!(tokenize("stir-fry, then serve."), toks(&["stir-fry", "then", "serve"]));
        assert_eq!(tokenize("grandma's -- best/"), toks(&["grandmas", "best"]));
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "[ -~àéü]{0,40}") {
            let once = tokenize(&s);
            prop_assert_eq!(tokenize(&once.join(" ")), once);
        }
    }

    fn write_lines(dir: &Path, name: &str, lines: &[&str]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, lines.join("\n")).unwrap();
        p
    }

    #[test]
    fn parse_empty_and_single() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_lines(dir.path(), "r.jsonl", &[]);
        let i = write_lines(dir.path(), "i.jsonl", &[]);
        let ds = parse_dataset(&r, &i).unwrap();
        assert!(ds.recipes.is_empty() && ds.images.is_empty());

        let r = write_lines(
            dir.path(),
            "r.jsonl",
            &[r#"{"id":"a","title":"Baked Ziti","ingredients":["1 cup ziti"],"instructions":["Bake it."],"images":["i1"]}"#],
        );
        let i = write_lines(dir.path(), "i.jsonl", &[r#"{"id":"i1","feature":[0.5,1.0],"category":"baked ziti"}"#]);
        let ds = parse_dataset(&r, &i).unwrap();
        assert_eq!(ds.recipes.len(), 1);
        assert_eq!(ds.images.len(), 1);
        assert_eq!(ds.recipes[0].title, toks(&["baked", "ziti"]));
        assert_eq!(ds.first_image(&ds.recipes[0]).id, "i1");
    }

    #[test]
    fn parse_reports_dangling_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_lines(
            dir.path(),
            "r.jsonl",
            &[r#"{"id":"a","title":"t","ingredients":["x"],"instructions":["y"],"images":["ghost"]}"#],
        );
        let i = write_lines(dir.path(), "i.jsonl", &[]);
        let err = parse_dataset(&r, &i).unwrap_err().to_string();
        assert!(err.contains("ghost") && err.contains("`a`"), "{err}");

        let r = write_lines(dir.path(), "r.jsonl", &["", "{not json"]);
        match parse_dataset(&r, &i).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn duplicate_recipe_ids_are_rejected() {
        let img = |id: &str| ImageRecord {
            id: id.into(),
            feature: vec![0.0],
            predicted_category: "x".into(),
        };
        let rec = |id: &str, im: &str| Recipe {
            id: id.into(),
            title: toks(&["t"]),
            ingredient_lines: vec![toks(&["x"])],
            instructions: vec![toks(&["y"])],
            image_refs: vec![im.into()],
        };
        assert!(Dataset::new(vec![rec("a", "1"), rec("a", "2")], vec![img("1"), img("2")]).is_err());
        assert!(Dataset::new(vec![rec("a", "1"), rec("b", "1")], vec![img("1")]).is_err());
        assert!(Dataset::new(vec![rec("a", "1"), rec("b", "2")], vec![img("1"), img("2")]).is_ok());
    }

    #[test]
    fn synthetic_is_deterministic_and_complete() {
        let cfg = SyntheticConfig {
            n_pairs: 200,
            ..Default::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dataset.recipes.len(), 200);
        assert!(a.dataset.images.len() >= 200);
        assert!(a.dataset.recipes.iter().all(|r| !r.image_refs.is_empty()));
        let c = generate_synthetic(&SyntheticConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn synthetic_round_trips_through_jsonl() {
        let s = generate_synthetic(&SyntheticConfig {
            n_pairs: 30,
            ..Default::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (r, i) = (dir.path().join("r.jsonl"), dir.path().join("i.jsonl"));
        s.dataset.write_jsonl(&r, &i).unwrap();
        assert_eq!(parse_dataset(&r, &i).unwrap(), s.dataset);
    }

    #[test]
    fn planted_signal_groups_images_by_category() {
        let s = generate_synthetic(&SyntheticConfig {
            n_pairs: 200,
            noise: 0.1,
            ..Default::default()
        })
        .unwrap();
        let ds = &s.dataset;
        let firsts: Vec<&ImageRecord> = ds.recipes.iter().map(|r| ds.first_image(r)).collect();
        let mut hits = 0;
        for (a, img) in firsts.iter().enumerate() {
            let nearest = (0..firsts.len())
                .filter(|&b| b != a)
                .min_by(|&x, &y| {
                    euclidean(&img.feature, &firsts[x].feature)
                        .total_cmp(&euclidean(&img.feature, &firsts[y].feature))
                })
                .unwrap();
            if s.recipe_category[nearest] == s.recipe_category[a] {
                hits += 1;
            }
        }
        assert!(hits as f64 / firsts.len() as f64 >= 0.9, "{hits}/200");
    }
}

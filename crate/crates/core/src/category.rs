//! Four-step category assignment. Every recipe ends up with a concrete label:
//! a primary label found in the title, then a frequent title bigram, then a
//! label mentioned in the ingredients or instructions, and finally the image
//! classifier's top-1 prediction.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::Recipe;
use crate::error::{Error, Result};

const FOOD101: &str = include_str!("../assets/food101.txt");

/// Editable default stop list for title bigrams.
pub const DEFAULT_STOP_BIGRAMS: &[&str] = &[
    "5 minutes",
    "10 minutes",
    "30 minutes",
    "home made",
    "homemade style",
    "new style",
    "oven fried",
    "easy and",
    "quick and",
    "and easy",
    "the best",
    "best ever",
    "my favorite",
    "super easy",
    "slow cooker",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategorySource {
    TitlePrimary,
    TitleBigram,
    BodyMatch,
    ImageTop1,
}

impl fmt::Display for CategorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::TitlePrimary => "title-primary",
            Self::TitleBigram => "title-bigram",
            Self::BodyMatch => "body-match",
            Self::ImageTop1 => "image-top1",
        })
    }
}

impl FromStr for CategorySource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "title-primary" => Self::TitlePrimary,
            "title-bigram" => Self::TitleBigram,
            "body-match" => Self::BodyMatch,
            "image-top1" => Self::ImageTop1,
            _ => return Err(Error::InvalidArgument(format!("unknown category source `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryLabel {
    pub label: String,
    pub source: CategorySource,
}

/// Singular form of one lowercase word: drops "es" after o/s/x/ch/sh/z,
/// otherwise a single trailing "s" (but not "ss").
fn singular(word: &str) -> &str {
    if let Some(stem) = word.strip_suffix("es") {
        if ["o", "s", "x", "ch", "sh", "z"].iter().any(|e| stem.ends_with(e)) && stem.len() > 1 {
            return stem;
        }
    }
    match word.strip_suffix('s') {
        Some(stem) if !stem.is_empty() && !stem.ends_with('s') => stem,
        _ => word,
    }
}

/// Matching key: lowercase, each word singularized, spaces and underscores
/// removed.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '_')
        .filter(|w| !w.is_empty())
        .map(singular)
        .collect()
}

/// Primary labels plus title bigrams.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryVocab {
    primary: Vec<(String, String)>,
    bigrams: Vec<(String, String)>,
}

fn clean_label(s: &str) -> String {
    s.replace('_', " ").split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

impl CategoryVocab {
    /// Labels are lowercased with underscores read as spaces. Bigrams that
    /// normalize to a primary label are dropped.
    pub fn new<S: AsRef<str>, T: AsRef<str>>(primary: &[S], bigrams: &[T]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut keyed = |labels: Vec<String>, kind: &str| -> Result<Vec<(String, String)>> {
            let mut out = Vec::new();
            for l in labels {
                let key = normalize(&l);
                if key.is_empty() {
                    return Err(Error::InvalidArgument(format!("empty {kind} category label")));
                }
                if seen.insert(key.clone()) {
                    out.push((l, key));
                }
            }
            Ok(out)
        };
        let primary = keyed(primary.iter().map(|s| clean_label(s.as_ref())).collect(), "primary")?;
        let bigrams = keyed(bigrams.iter().map(|s| clean_label(s.as_ref())).collect(), "bigram")?;
        Ok(Self { primary, bigrams })
    }

    /// The 101 default dish labels, no bigrams.
    pub fn food101() -> Self {
        let labels: Vec<&str> = FOOD101.lines().filter(|l| !l.trim().is_empty()).collect();
        Self::new(&labels, &[] as &[&str]).expect("bundled label list is valid")
    }

    pub fn with_bigrams<T: AsRef<str>>(&self, bigrams: &[T]) -> Result<Self> {
        Self::new(&self.primary_labels(), bigrams)
    }

    pub fn primary_labels(&self) -> Vec<&str> {
        self.primary.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn bigram_labels(&self) -> Vec<&str> {
        self.bigrams.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn contains(&self, label: &str) -> bool {
        let key = normalize(label);
        self.primary.iter().chain(&self.bigrams).any(|(_, k)| *k == key)
    }
}

/// Reads a label file: one label per line, blank lines and `#` comments
/// skipped.
pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(clean_label)
        .collect())
}

pub fn save_labels<S: AsRef<str>>(path: impl AsRef<Path>, labels: &[S]) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        out.push_str(l.as_ref());
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// The `top_n` most frequent adjacent token pairs across titles (ties in
/// lexicographic order), minus stop-list entries.
pub fn extract_bigrams<S: AsRef<str>, T: AsRef<str>>(titles: &[Vec<S>], top_n: usize, stop_list: &[T]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in titles {
        for w in t.windows(2) {
            *counts.entry(format!("{} {}", w[0].as_ref(), w[1].as_ref())).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let stops: BTreeSet<String> = stop_list.iter().map(|s| normalize(s.as_ref())).collect();
    ranked
        .into_iter()
        .take(top_n)
        .map(|(b, _)| b)
        .filter(|b| !stops.contains(&normalize(b)))
        .collect()
}

/// Best label found in `text`: the longest matching key, leftmost on ties.
fn best_match<'a>(text: &str, labels: &'a [(String, String)]) -> Option<&'a str> {
    let hay = normalize(text);
    labels
        .iter()
        .filter_map(|(l, k)| hay.find(k.as_str()).map(|pos| (l, k.len(), pos)))
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)))
        .map(|(l, _, _)| l.as_str())
}

fn body_match<'a>(recipe: &Recipe, labels: &'a [(String, String)]) -> Option<&'a str> {
    recipe
        .ingredient_lines
        .iter()
        .chain(&recipe.instructions)
        .find_map(|line| best_match(&line.join(" "), labels))
}

/// Applies the four steps in order; the first that fires decides.
pub fn assign_category(recipe: &Recipe, vocab: &CategoryVocab, image_top1: &str) -> Result<CategoryLabel> {
    let title = recipe.title.join(" ");
    let found = |label: &str, source| CategoryLabel {
        label: label.to_string(),
        source,
    };
    if let Some(l) = best_match(&title, &vocab.primary) {
        return Ok(found(l, CategorySource::TitlePrimary));
    }
    if let Some(l) = best_match(&title, &vocab.bigrams) {
        return Ok(found(l, CategorySource::TitleBigram));
    }
    if let Some(l) = body_match(recipe, &vocab.primary).or_else(|| body_match(recipe, &vocab.bigrams)) {
        return Ok(found(l, CategorySource::BodyMatch));
    }
    let top1 = clean_label(image_top1);
    if top1.is_empty() || top1 == "background" {
        return Err(Error::InvalidArgument(format!(
            "recipe `{}` matched no label and has no usable image prediction",
            recipe.id
        )));
    }
    Ok(found(&top1, CategorySource::ImageTop1))
}

/// Writes `recipe_id\tlabel\tsource` lines.
pub fn save_assignments(path: impl AsRef<Path>, rows: &[(String, CategoryLabel)]) -> Result<()> {
    let mut out = String::new();
    for (id, c) in rows {
        out.push_str(&format!("{id}\t{}\t{}\n", c.label, c.source));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_assignments(path: impl AsRef<Path>) -> Result<Vec<(String, CategoryLabel)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 || f[0].is_empty() || f[1].is_empty() {
            return Err(parse("expected recipe_id<TAB>label<TAB>source"));
        }
        let source = f[2].parse().map_err(|_| parse("unknown source"))?;
        out.push((
            f[0].to_string(),
            CategoryLabel {
                label: f[1].to_string(),
                source,
            },
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;
    use proptest::prelude::*;

    fn recipe(title: &str, ingredients: &[&str], instructions: &[&str]) -> Recipe {
        Recipe {
            id: "r1".into(),
            title: tokenize(title),
            ingredient_lines: ingredients.iter().map(|l| tokenize(l)).collect(),
            instructions: instructions.iter().map(|l| tokenize(l)).collect(),
            image_refs: vec!["i1".into()],
        }
    }

    fn vocab() -> CategoryVocab {
        CategoryVocab::new(&["meat loaf", "sweet cookie", "pizza", "gnocchi", "cheesecake"], &["baked ziti", "beef stew"])
            .unwrap()
    }

    fn titles(ts: &[&str]) -> Vec<Vec<String>> {
        ts.iter().map(|t| tokenize(t)).collect()
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize("Meat Loaf"), "meatloaf");
        assert_eq!(normalize("sweet cookies"), "sweetcookie");
        assert_eq!(normalize("tomatoes"), "tomato");
        assert_eq!(normalize("dishes"), "dish");
        assert_eq!(normalize("glass"), "glass");
        assert_eq!(normalize("apple_pie"), "applepie");
    }

    #[test]
    fn bundled_labels() {
        let v = CategoryVocab::food101();
        assert_eq!(v.primary_labels().len(), 101);
        assert!(v.contains("apple pie"));
        assert!(v.contains("gnocchi"));
        assert!(!v.contains("background"));
    }

    #[test]
    fn bigram_extraction() {
        let t = titles(&["baked ziti", "baked ziti", "beef stew"]);
        assert_eq!(extract_bigrams(&t, 2, &[] as &[&str]), vec!["baked ziti", "beef stew"]);
        let t = titles(&["home made pie", "home made pie", "beef stew"]);
        let got = extract_bigrams(&t, 10, DEFAULT_STOP_BIGRAMS);
        assert!(!got.contains(&"home made".to_string()));
        assert!(got.contains(&"made pie".to_string()));
        assert!(extract_bigrams(&Vec::<Vec<String>>::new(), 5, DEFAULT_STOP_BIGRAMS).is_empty());
    }

    #[test]
    fn vocab_keeps_bigrams_disjoint() {
        let v = CategoryVocab::new(&["meat loaf"], &["meatloaf", "beef stews", "beef stew"]).unwrap();
        assert_eq!(v.bigram_labels(), vec!["beef stews"]);
        assert!(CategoryVocab::new(&["  "], &[] as &[&str]).is_err());
    }

    #[test]
    fn worked_examples() {
        let v = vocab();
        let c = assign_category(&recipe("meatloaf", &["1 lb beef"], &["bake it"]), &v, "steak").unwrap();
        assert_eq!(c, CategoryLabel { label: "meat loaf".into(), source: CategorySource::TitlePrimary });
        let c = assign_category(&recipe("Sweet Cookies", &["flour"], &["bake"]), &v, "x").unwrap();
        assert_eq!(c.label, "sweet cookie");
        let c = assign_category(&recipe("grandma surprise", &["pasta"], &["serve like baked ziti"]), &v, "x").unwrap();
        assert_eq!(c, CategoryLabel { label: "baked ziti".into(), source: CategorySource::BodyMatch });
        let c = assign_category(&recipe("mystery dish", &["potato"], &["boil"]), &v, "gnocchi").unwrap();
        assert_eq!(c, CategoryLabel { label: "gnocchi".into(), source: CategorySource::ImageTop1 });
    }

    #[test]
    fn step_priority() {
        let v = vocab();
        // 1 + 4
        let c = assign_category(&recipe("pizza night", &["dough"], &["bake"]), &v, "gnocchi").unwrap();
        assert_eq!(c.source, CategorySource::TitlePrimary);
        // 2 + 3
        let c = assign_category(&recipe("beef stew for two", &["beef"], &["like a meat loaf"]), &v, "x").unwrap();
        assert_eq!((c.label.as_str(), c.source), ("beef stew", CategorySource::TitleBigram));
        // 3 + 4
        let c = assign_category(&recipe("sunday", &["cheesecake crumbs"], &["mix"]), &v, "gnocchi").unwrap();
        assert_eq!((c.label.as_str(), c.source), ("cheesecake", CategorySource::BodyMatch));
    }

    #[test]
    fn longest_then_leftmost() {
        let v = CategoryVocab::new(&["cake", "cheesecake", "pie"], &[] as &[&str]).unwrap();
        assert_eq!(assign_category(&recipe("cheesecake pie", &["x"], &["y"]), &v, "z").unwrap().label, "cheesecake");
        assert_eq!(assign_category(&recipe("pie and cake", &["x"], &["y"]), &v, "z").unwrap().label, "cake");
        let v = CategoryVocab::new(&["tart", "flan"], &[] as &[&str]).unwrap();
        assert_eq!(assign_category(&recipe("flan or tart", &["x"], &["y"]), &v, "z").unwrap().label, "flan");
    }

    #[test]
    fn unusable_image_prediction_is_rejected() {
        let v = vocab();
        assert!(assign_category(&recipe("mystery", &["a"], &["b"]), &v, "").is_err());
        assert!(assign_category(&recipe("mystery", &["a"], &["b"]), &v, "background").is_err());
    }

    #[test]
    fn assignments_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cats.tsv");
        let rows = vec![
            ("r1".to_string(), CategoryLabel { label: "meat loaf".into(), source: CategorySource::TitlePrimary }),
            ("r2".to_string(), CategoryLabel { label: "gnocchi".into(), source: CategorySource::ImageTop1 }),
        ];
        save_assignments(&p, &rows).unwrap();
        assert_eq!(load_assignments(&p).unwrap(), rows);
        std::fs::write(&p, "r1\tpizza\tnowhere\n").unwrap();
        assert!(matches!(load_assignments(&p), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn labels_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.txt");
        save_labels(&p, &["apple pie", "gnocchi"]).unwrap();
        std::fs::write(&p, format!("# dishes\n{}\nbeef_stew\n", std::fs::read_to_string(&p).unwrap())).unwrap();
        assert_eq!(load_labels(&p).unwrap(), vec!["apple pie", "gnocchi", "beef stew"]);
    }

    proptest! {
        #[test]
        fn total_and_deterministic(
            title in "[a-z ]{0,20}",
            body in "[a-z ]{0,30}",
            top1 in "[a-z]{1,8}",
        ) {
            let v = vocab();
            let r = recipe(&title, &[&body], &[&body]);
            let a = assign_category(&r, &v, &top1).unwrap();
            prop_assert!(!a.label.is_empty());
            prop_assert_ne!(a.label.as_str(), "background");
            prop_assert_eq!(a.clone(), assign_category(&r, &v, &top1).unwrap());
            if a.source != CategorySource::ImageTop1 {
                prop_assert!(v.contains(&a.label));
            }
        }
    }
}

//! Retrieval evaluation: rank every candidate of the other modality by
//! Euclidean distance and report median rank and recall at K over sampled
//! subsets, in both directions.

use std::fmt;
use std::path::Path;

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::nn::{euclidean, seeded_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ImageToRecipe,
    RecipeToImage,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ImageToRecipe => "image2recipe",
            Self::RecipeToImage => "recipe2image",
        })
    }
}

/// `n_subsets` seeded samples of `subset_size` distinct indices out of
/// `n_pairs`, each sorted ascending.
pub fn sample_subsets(n_pairs: usize, subset_size: usize, n_subsets: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if subset_size == 0 || subset_size > n_pairs {
        return Err(Error::InvalidArgument(format!(
            "subset size {subset_size} must be in 1..={n_pairs}"
        )));
    }
    let mut rng = seeded_rng(seed);
    Ok((0..n_subsets)
        .map(|_| {
            let mut s = sample(&mut rng, n_pairs, subset_size).into_vec();
            s.sort_unstable();
            s
        })
        .collect())
}

/// 1-based rank of each query's true candidate, ordering candidates by
/// ascending distance and then ascending index.
pub fn rank_all(queries: &[Vec<f64>], candidates: &[Vec<f64>], truth: &[usize]) -> Result<Vec<usize>> {
    if truth.len() != queries.len() {
        return Err(Error::InvalidArgument(format!(
            "{} queries but {} ground-truth entries",
            queries.len(),
            truth.len()
        )));
    }
    queries
        .iter()
        .zip(truth)
        .map(|(q, &t)| {
            let target = candidates
                .get(t)
                .ok_or_else(|| Error::InvalidArgument(format!("ground truth {t} is not among {} candidates", candidates.len())))?;
            if target.len() != q.len() {
                return Err(Error::Shape(format!("query dim {} vs candidate dim {}", q.len(), target.len())));
            }
            let dt = euclidean(q, target);
            let ahead = candidates
                .iter()
                .enumerate()
                .filter(|&(j, c)| {
                    let d = euclidean(q, c);
                    d < dt || (d == dt && j < t)
                })
                .count();
            Ok(ahead + 1)
        })
        .collect()
}

/// Median rank; the mean of the two middle ranks for an even count.
pub fn medr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("no ranks".into()));
    }
    let mut r = ranks.to_vec();
    r.sort_unstable();
    let n = r.len();
    Ok(if n % 2 == 1 {
        r[n / 2] as f64
    } else {
        (r[n / 2 - 1] + r[n / 2]) as f64 / 2.0
    })
}

/// Percentage of ranks within the top `k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("no ranks".into()));
    }
    Ok(100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub medr: f64,
    pub r1: f64,
    pub r5: f64,
    pub r10: f64,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Result<Self> {
        Ok(Self {
            medr: medr(ranks)?,
            r1: recall_at_k(ranks, 1)?,
            r5: recall_at_k(ranks, 5)?,
            r10: recall_at_k(ranks, 10)?,
        })
    }

    fn mean(all: &[Metrics]) -> Self {
        let n = all.len() as f64;
        let sum = |f: fn(&Metrics) -> f64| all.iter().map(f).sum::<f64>() / n;
        Self {
            medr: sum(|m| m.medr),
            r1: sum(|m| m.r1),
            r5: sum(|m| m.r5),
            r10: sum(|m| m.r10),
        }
    }
}

/// Metrics averaged over subsets, both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalReport {
    pub image2recipe: Metrics,
    pub recipe2image: Metrics,
    pub n_subsets: usize,
    pub subset_size: usize,
}

impl RetrievalReport {
    /// Mean of the two directions' MedR.
    pub fn mean_medr(&self) -> f64 {
        (self.image2recipe.medr + self.recipe2image.medr) / 2.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,MedR,R@1,R@5,R@10\n");
        for (d, m) in [(Direction::ImageToRecipe, &self.image2recipe), (Direction::RecipeToImage, &self.recipe2image)] {
            out.push_str(&format!("{d},{},{},{},{}\n", m.medr, m.r1, m.r5, m.r10));
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Ranks of both directions over one set of paired embeddings, where
/// `recipes[i]` pairs with `images[i]`.
pub fn rank_both(recipes: &[Vec<f64>], images: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<usize>)> {
    if recipes.len() != images.len() {
        return Err(Error::InvalidArgument(format!(
            "{} recipe vs {} image embeddings",
            recipes.len(),
            images.len()
        )));
    }
    let truth: Vec<usize> = (0..recipes.len()).collect();
    Ok((rank_all(images, recipes, &truth)?, rank_all(recipes, images, &truth)?))
}

/// Runs both directions on each sampled subset and averages the metrics.
pub fn evaluate_embeddings(
    recipes: &[Vec<f64>],
    images: &[Vec<f64>],
    subset_size: usize,
    n_subsets: usize,
    seed: u64,
) -> Result<RetrievalReport> {
    if n_subsets == 0 {
        return Err(Error::InvalidArgument("need at least one subset".into()));
    }
    let subsets = sample_subsets(recipes.len(), subset_size, n_subsets, seed)?;
    let mut i2r = Vec::with_capacity(n_subsets);
    let mut r2i = Vec::with_capacity(n_subsets);
    for s in &subsets {
        let rs: Vec<Vec<f64>> = s.iter().map(|&k| recipes[k].clone()).collect();
        let is: Vec<Vec<f64>> = s.iter().map(|&k| images[k].clone()).collect();
        let (a, b) = rank_both(&rs, &is)?;
        i2r.push(Metrics::from_ranks(&a)?);
        r2i.push(Metrics::from_ranks(&b)?);
    }
    Ok(RetrievalReport {
        image2recipe: Metrics::mean(&i2r),
        recipe2image: Metrics::mean(&r2i),
        n_subsets,
        subset_size,
    })
}

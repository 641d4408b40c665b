//! Continuous bag-of-words embeddings trained with negative sampling.

use std::collections::HashMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::nn::{dot, seeded_rng, sigmoid, Tensor2, INIT_SCALE};

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    index: HashMap<String, usize>,
    terms: Vec<String>,
    counts: Vec<usize>,
    pub min_count: usize,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts[id]
    }

    /// Text table: a `min_count<TAB>N` header, then `term<TAB>count` lines.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = format!("min_count\t{}\n", self.min_count);
        for (t, c) in self.terms.iter().zip(&self.counts) {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let err = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let min_count = lines
            .next()
            .and_then(|(_, l)| l.strip_prefix("min_count\t"))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| err(1, "expected `min_count<TAB>N` header"))?;
        let mut terms = Vec::new();
        let mut counts = Vec::new();
        for (n, line) in lines {
            let (t, c) = line
                .split_once('\t')
                .and_then(|(t, c)| Some((t, c.parse::<usize>().ok()?)))
                .ok_or_else(|| err(n + 1, "expected `term<TAB>count`"))?;
            if t.is_empty() || terms.iter().any(|x: &String| x == t) {
                return Err(err(n + 1, "empty or duplicate term"));
            }
            terms.push(t.to_string());
            counts.push(c);
        }
        if terms.is_empty() {
            return Err(Error::Empty(format!("{} lists no terms", path.display())));
        }
        Ok(Self::from_parts(terms, counts, min_count))
    }

    fn from_parts(terms: Vec<String>, counts: Vec<usize>, min_count: usize) -> Self {
        let index = terms.iter().enumerate().map(|(k, t)| (t.clone(), k)).collect();
        Self {
            index,
            terms,
            counts,
            min_count,
        }
    }
}

/// Terms seen at least `min_count` times, ordered by frequency (descending)
/// then term.
pub fn build_vocab(corpus: &[Vec<String>], min_count: usize) -> Result<Vocab> {
    if min_count == 0 {
        return Err(Error::InvalidArgument("min_count must be at least 1".into()));
    }
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for t in corpus.iter().flatten() {
        *freq.entry(t).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, usize)> = freq.into_iter().filter(|(_, c)| *c >= min_count).collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!("no term occurs {min_count} times")));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let (terms, counts) = kept.into_iter().map(|(t, c)| (t.to_string(), c)).unzip();
    Ok(Vocab::from_parts(terms, counts, min_count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingMatrix {
    pub vocab: Vocab,
    /// Context (input) vectors, one row per term.
    pub input: Tensor2,
    /// Target (output) vectors.
    pub output: Tensor2,
}

impl WordEmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    /// Word vector of `term`: input plus output row, so words that predict
    /// each other end up close. Zero when out of vocabulary.
    pub fn embed(&self, term: &str) -> Vec<f64> {
        match self.vocab.id(term) {
            Some(k) => self.input.row(k).iter().zip(self.output.row(k)).map(|(a, b)| a + b).collect(),
            None => vec![0.0; self.dim()],
        }
    }

    /// Mean vector of the in-vocabulary words of a phrase; zero if none.
    pub fn embed_phrase<S: AsRef<str>>(&self, words: &[S]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let known: Vec<&str> = words.iter().map(|w| w.as_ref()).filter(|w| self.vocab.id(w).is_some()).collect();
        for w in &known {
            for (o, v) in out.iter_mut().zip(self.embed(w)) {
                *o += v / known.len() as f64;
            }
        }
        out
    }

    pub fn save_into(&self, ck: &mut Checkpoint) {
        ck.insert("w2v.in", self.input.clone());
        ck.insert("w2v.out", self.output.clone());
        ck.set_meta("w2v.vocab", self.vocab.terms.join("\n"));
        let counts: Vec<String> = self.vocab.counts.iter().map(|c| c.to_string()).collect();
        ck.set_meta("w2v.counts", counts.join(" "));
        ck.set_meta("w2v.min_count", self.vocab.min_count.to_string());
    }

    pub fn load_from(ck: &Checkpoint) -> Result<Self> {
        let terms: Vec<String> = ck.meta("w2v.vocab")?.split('\n').map(String::from).collect();
        let counts = ck
            .meta("w2v.counts")?
            .split(' ')
            .map(|c| c.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Checkpoint(format!("bad w2v.counts: {e}")))?;
        let min_count = ck
            .meta("w2v.min_count")?
            .parse()
            .map_err(|e| Error::Checkpoint(format!("bad w2v.min_count: {e}")))?;
        let input = ck.get("w2v.in")?.clone();
        let output = ck.get("w2v.out")?.clone();
        if terms.len() != counts.len() || input.rows() != terms.len() || output.shape() != input.shape() {
            return Err(Error::Checkpoint("word2vec tensors do not match vocabulary".into()));
        }
        Ok(Self {
            vocab: Vocab::from_parts(terms, counts, min_count),
            input,
            output,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting SGD step; decays linearly to 1e-4 of itself.
    pub lr: f64,
    pub seed: u64,
}

impl Default for CbowConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.05,
            seed: 0,
        }
    }
}

/// Gradients of one CBOW sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrad {
    /// Gradient for each context word's input row (all equal).
    pub context: Vec<f64>,
    /// `(row, gradient)` for the target and each negative output row.
    pub outputs: Vec<(usize, Vec<f64>)>,
}

/// Loss `-ln σ(o_t·h) - Σ_n ln σ(-o_n·h)` with `h` the mean context input
/// vector.
pub fn cbow_sample_loss(
    input: &Tensor2,
    output: &Tensor2,
    context: &[usize],
    target: usize,
    negatives: &[usize],
) -> (f64, SampleGrad) {
    let dim = input.cols();
    let mut h = vec![0.0; dim];
    for &c in context {
        for (a, b) in h.iter_mut().zip(input.row(c)) {
            *a += b;
        }
    }
    let inv = 1.0 / context.len() as f64;
    h.iter_mut().for_each(|v| *v *= inv);
    let mut dh = vec![0.0; dim];
    let mut loss = 0.0;
    let mut outputs = Vec::with_capacity(1 + negatives.len());
    let rows = std::iter::once((target, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (row, label) in rows {
        let o = output.row(row);
        let s = sigmoid(dot(o, &h));
        loss -= if label == 1.0 { s.max(1e-300).ln() } else { (1.0 - s).max(1e-300).ln() };
        let g = s - label;
        for (d, v) in dh.iter_mut().zip(o) {
            *d += g * v;
        }
        outputs.push((row, h.iter().map(|v| g * v).collect()));
    }
    (
        loss,
        SampleGrad {
            context: dh.iter().map(|v| v * inv).collect(),
            outputs,
        },
    )
}

/// Trains CBOW embeddings on `corpus` (one token sequence per sentence;
/// windows do not cross sentences). Returns the matrix and the mean sample
/// loss of every epoch.
pub fn train_cbow(
    corpus: &[Vec<String>],
    vocab: &Vocab,
    cfg: &CbowConfig,
) -> Result<(WordEmbeddingMatrix, Vec<f64>)> {
    if cfg.window == 0 || cfg.negatives == 0 {
        return Err(Error::InvalidArgument("window and negatives must be at least 1".into()));
    }
    let total_tokens: usize = corpus.iter().map(Vec::len).sum();
    if total_tokens < cfg.window + 1 {
        return Err(Error::InvalidArgument(format!(
            "corpus of {total_tokens} tokens is shorter than window + 1"
        )));
    }
    let mut rng = seeded_rng(cfg.seed);
    let mut input = Tensor2::uniform(vocab.len(), cfg.dim, INIT_SCALE, &mut rng);
    let mut output = Tensor2::uniform(vocab.len(), cfg.dim, INIT_SCALE, &mut rng);
    let noise = WeightedIndex::new(vocab.counts.iter().map(|&c| (c as f64).powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let ids: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t)).collect())
        .collect();
    let total_steps = (ids.iter().map(Vec::len).sum::<usize>() * cfg.epochs).max(1) as f64;
    let mut step = 0usize;
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut context = Vec::with_capacity(2 * cfg.window);
    let mut negs = Vec::with_capacity(cfg.negatives);
    for _ in 0..cfg.epochs {
        let (mut loss_sum, mut samples) = (0.0, 0usize);
        for sentence in &ids {
            for (t, &target) in sentence.iter().enumerate() {
                let lr = cfg.lr * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                context.clear();
                let lo = t.saturating_sub(cfg.window);
                let hi = (t + cfg.window + 1).min(sentence.len());
                context.extend((lo..hi).filter(|&k| k != t).map(|k| sentence[k]));
                if context.is_empty() {
                    continue;
                }
                negs.clear();
                let mut attempts = 0;
                while negs.len() < cfg.negatives {
                    let n = noise.sample(&mut rng);
                    attempts += 1;
                    if (n != target && !context.contains(&n)) || attempts > 100 * cfg.negatives {
                        negs.push(n);
                    }
                }
                let (loss, grad) = cbow_sample_loss(&input, &output, &context, target, &negs);
                loss_sum += loss;
                samples += 1;
                for (row, g) in &grad.outputs {
                    for (w, d) in output.row_mut(*row).iter_mut().zip(g) {
                        *w -= lr * d;
                    }
                }
                for &c in &context {
                    for (w, d) in input.row_mut(c).iter_mut().zip(&grad.context) {
                        *w -= lr * d;
                    }
                }
            }
        }
        history.push(loss_sum / samples.max(1) as f64);
    }
    Ok((
        WordEmbeddingMatrix {
            vocab: vocab.clone(),
            input,
            output,
        },
        history,
    ))
}

/// Draws a random sentence corpus over `vocab_size` synthetic terms.
pub fn random_corpus<R: Rng>(rng: &mut R, n_sentences: usize, len: usize, vocab_size: usize) -> Vec<Vec<String>> {
    (0..n_sentences)
        .map(|_| (0..len).map(|_| format!("w{}", rng.random_range(0..vocab_size))).collect())
        .collect()
}

//! Bidirectional LSTM BIO tagger for ingredient lines.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::bio::BioLabel;
use crate::checkpoint::Checkpoint;
use crate::corpus::{QUANTITIES, SIZES, UNITS};
use crate::error::{Error, Result};
use crate::nn::{
    argmax, cross_entropy, prefixed, prefixed_mut, seeded_rng, AdamState, Linear, LstmParams,
    LstmTrace, Params, Tensor2, INIT_SCALE,
};

/// Surface features appended to each token embedding.
const SHAPE_FEATURES: usize = 2;
const UNK: usize = 0;

fn shape_features(token: &str) -> [f64; SHAPE_FEATURES] {
    [
        f64::from(token.chars().any(|c| c.is_ascii_digit())),
        f64::from(token.contains('/')),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    pub vocab: HashMap<String, usize>,
    pub embeddings: Tensor2,
    pub forward: LstmParams,
    pub backward: LstmParams,
    pub projection: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Probability of replacing a training token by the unknown token.
    pub unk_dropout: f64,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            hidden_dim: 16,
            epochs: 10,
            batch: 16,
            lr: 0.01,
            unk_dropout: 0.1,
            seed: 0,
        }
    }
}

/// A labelled ingredient line.
pub type TaggedLine = (Vec<String>, Vec<BioLabel>);

struct LineTrace {
    ids: Vec<usize>,
    fwd: LstmTrace,
    bwd: LstmTrace,
    feats: Vec<Vec<f64>>,
    logits: Vec<Vec<f64>>,
}

impl TaggerModel {
    fn build_vocab<'a>(tokens: impl Iterator<Item = &'a String>) -> HashMap<String, usize> {
        let mut vocab = HashMap::new();
        let mut sorted: Vec<&String> = tokens.collect();
        sorted.sort();
        sorted.dedup();
        for t in sorted {
            let n = vocab.len() + 1;
            vocab.insert(t.clone(), n);
        }
        vocab
    }

    pub fn new<R: Rng + ?Sized>(
        vocab: HashMap<String, usize>,
        embed_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let n = vocab.len() + 1;
        Self {
            vocab,
            embeddings: Tensor2::uniform(n, embed_dim, INIT_SCALE, rng),
            forward: LstmParams::new(embed_dim + SHAPE_FEATURES, hidden_dim, rng),
            backward: LstmParams::new(embed_dim + SHAPE_FEATURES, hidden_dim, rng),
            projection: Linear::new(2 * hidden_dim, BioLabel::ALL.len(), rng),
        }
    }

    /// All-zero model over an empty vocabulary.
    pub fn zeros(embed_dim: usize, hidden_dim: usize) -> Self {
        Self {
            vocab: HashMap::new(),
            embeddings: Tensor2::zeros(1, embed_dim),
            forward: LstmParams::zeros(embed_dim + SHAPE_FEATURES, hidden_dim),
            backward: LstmParams::zeros(embed_dim + SHAPE_FEATURES, hidden_dim),
            projection: Linear::zeros(2 * hidden_dim, BioLabel::ALL.len()),
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(UNK)
    }

    /// Learned embedding of a token (the unknown-token row if out of vocabulary).
    pub fn embedding(&self, token: &str) -> &[f64] {
        self.embeddings.row(self.token_id(token))
    }

    fn input(&self, id: usize, token: &str) -> Vec<f64> {
        let mut x = self.embeddings.row(id).to_vec();
        x.extend_from_slice(&shape_features(token));
        x
    }

    fn run(&self, tokens: &[String], ids: Vec<usize>) -> Result<LineTrace> {
        let xs: Vec<Vec<f64>> = ids.iter().zip(tokens).map(|(&i, t)| self.input(i, t)).collect();
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let fwd = self.forward.forward_sequence(&xs)?;
        let bwd = self.backward.forward_sequence(&rev)?;
        let n = xs.len();
        let mut feats = Vec::with_capacity(n);
        let mut logits = Vec::with_capacity(n);
        for t in 0..n {
            let mut f = fwd.hidden(t).to_vec();
            f.extend_from_slice(bwd.hidden(n - 1 - t));
            logits.push(self.projection.forward(&f)?);
            feats.push(f);
        }
        Ok(LineTrace {
            ids,
            fwd,
            bwd,
            feats,
            logits,
        })
    }

    /// Per-token label logits in `BioLabel` order.
    pub fn logits<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Vec<f64>>> {
        let tokens: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        let ids = tokens.iter().map(|t| self.token_id(t)).collect();
        Ok(self.run(&tokens, ids)?.logits)
    }

    /// Mean token cross-entropy of one line and its gradient.
    fn line_loss(&self, tokens: &[String], ids: Vec<usize>, labels: &[BioLabel], grad: &mut TaggerModel) -> Result<f64> {
        let trace = self.run(tokens, ids)?;
        let n = tokens.len();
        let h = self.forward.hidden_dim;
        let e = self.embed_dim();
        let mut loss = 0.0;
        let mut dhf = vec![vec![0.0; h]; n];
        let mut dhb = vec![vec![0.0; h]; n];
        for t in 0..n {
            let (l, mut d) = cross_entropy(&trace.logits[t], labels[t].index())?;
            loss += l / n as f64;
            d.iter_mut().for_each(|v| *v /= n as f64);
            let df = self.projection.backward(&trace.feats[t], &d, &mut grad.projection);
            dhf[t].copy_from_slice(&df[..h]);
            dhb[n - 1 - t].copy_from_slice(&df[h..]);
        }
        let dxf = self.forward.backward_sequence(&trace.fwd, &dhf, &mut grad.forward);
        let dxb = self.backward.backward_sequence(&trace.bwd, &dhb, &mut grad.backward);
        for t in 0..n {
            let row = grad.embeddings.row_mut(trace.ids[t]);
            for k in 0..e {
                row[k] += dxf[t][k] + dxb[n - 1 - t][k];
            }
        }
        Ok(loss)
    }

    pub fn save_into(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.store(prefix, self);
        let mut vocab: Vec<(&String, &usize)> = self.vocab.iter().collect();
        vocab.sort_by_key(|(_, &i)| i);
        let joined: Vec<&str> = vocab.iter().map(|(t, _)| t.as_str()).collect();
        ck.set_meta(format!("{prefix}.vocab"), joined.join("\n"));
        ck.set_meta(format!("{prefix}.hidden_dim"), self.forward.hidden_dim.to_string());
    }

    pub fn load_from(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let vocab_text = ck.meta(&format!("{prefix}.vocab"))?;
        let vocab: HashMap<String, usize> = vocab_text
            .split('\n')
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(k, t)| (t.to_string(), k + 1))
            .collect();
        let hidden: usize = ck
            .meta(&format!("{prefix}.hidden_dim"))?
            .parse()
            .map_err(|e| Error::Checkpoint(format!("bad hidden_dim: {e}")))?;
        let embed_dim = ck.get(&format!("{prefix}.emb"))?.cols();
        let mut m = Self::zeros(embed_dim, hidden);
        m.embeddings = Tensor2::zeros(vocab.len() + 1, embed_dim);
        m.vocab = vocab;
        ck.restore(prefix, &mut m)?;
        Ok(m)
    }
}

impl Params for TaggerModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = vec![("emb".to_string(), &self.embeddings)];
        v.extend(prefixed("fwd", self.forward.tensors()));
        v.extend(prefixed("bwd", self.backward.tensors()));
        v.extend(prefixed("proj", self.projection.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut v = vec![("emb".to_string(), &mut self.embeddings)];
        v.extend(prefixed_mut("fwd", self.forward.tensors_mut()));
        v.extend(prefixed_mut("bwd", self.backward.tensors_mut()));
        v.extend(prefixed_mut("proj", self.projection.tensors_mut()));
        v
    }
}

/// Labels each token by the argmax of its logits (ties: O < B < I < E).
pub fn tag_line<S: AsRef<str>>(tokens: &[S], model: &TaggerModel) -> Result<Vec<BioLabel>> {
    if tokens.is_empty() {
        return Err(Error::Empty("cannot tag an empty line".into()));
    }
    Ok(model
        .logits(tokens)?
        .iter()
        .map(|l| BioLabel::from_index(argmax(l)))
        .collect())
}

/// Trains a tagger on labelled lines. Returns the model and the mean loss of
/// each epoch.
pub fn train_tagger(lines: &[TaggedLine], cfg: &TaggerConfig) -> Result<(TaggerModel, Vec<f64>)> {
    if lines.is_empty() {
        return Err(Error::Empty("no tagged lines".into()));
    }
    for (toks, labels) in lines {
        if toks.is_empty() || toks.len() != labels.len() {
            return Err(Error::InvalidArgument(
                "tagged lines need one label per token and at least one token".into(),
            ));
        }
    }
    let mut rng = seeded_rng(cfg.seed);
    let vocab = TaggerModel::build_vocab(lines.iter().flat_map(|(t, _)| t.iter()));
    let mut model = TaggerModel::new(vocab, cfg.embed_dim, cfg.hidden_dim, &mut rng);
    let mut adam = AdamState::new(cfg.lr);
    let mut order: Vec<usize> = (0..lines.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grad = model.zeros_like();
            for &k in chunk {
                let (toks, labels) = &lines[k];
                let ids = toks
                    .iter()
                    .map(|t| {
                        if rng.random::<f64>() < cfg.unk_dropout {
                            UNK
                        } else {
                            model.token_id(t)
                        }
                    })
                    .collect();
                total += model.line_loss(toks, ids, labels, &mut grad)?;
            }
            grad.scale(1.0 / chunk.len() as f64);
            adam.update(&mut model, &grad)?;
        }
        history.push(total / lines.len() as f64);
    }
    Ok((model, history))
}

/// Fraction of tokens whose predicted label matches.
pub fn token_accuracy(model: &TaggerModel, lines: &[TaggedLine]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (toks, labels) in lines {
        let pred = tag_line(toks, model)?;
        hits += pred.iter().zip(labels).filter(|(a, b)| a == b).count();
        total += labels.len();
    }
    Ok(hits as f64 / total.max(1) as f64)
}

const SUFFIXES: &[&[&str]] = &[&["chopped"], &["divided"], &["to", "taste"], &["finely", "diced"]];

/// Ingredient lines built from quantity/unit templates around known entity
/// phrases, labelled with the entity span.
pub fn synthetic_tagging_corpus<S: AsRef<str>>(entities: &[S], n_lines: usize, seed: u64) -> Vec<TaggedLine> {
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(n_lines);
    if entities.is_empty() {
        return out;
    }
    for _ in 0..n_lines {
        let entity: Vec<String> = entities
            .choose(&mut rng)
            .unwrap()
            .as_ref()
            .split_whitespace()
            .map(String::from)
            .collect();
        let mut toks: Vec<String> = Vec::new();
        let mut labels = Vec::new();
        {
            let mut push_o = |words: &[&str], toks: &mut Vec<String>| {
                for w in words.iter().flat_map(|w| w.split_whitespace()) {
                    toks.push(w.to_string());
                    labels.push(BioLabel::O);
                }
            };
            push_o(&[QUANTITIES.choose(&mut rng).unwrap()], &mut toks);
            match rng.random_range(0..4) {
                0 => push_o(&[UNITS.choose(&mut rng).unwrap()], &mut toks),
                1 => push_o(&[SIZES.choose(&mut rng).unwrap()], &mut toks),
                2 => push_o(
                    &[UNITS.choose(&mut rng).unwrap(), SIZES.choose(&mut rng).unwrap()],
                    &mut toks,
                ),
                _ => {}
            }
        }
        labels.extend(BioLabel::span(entity.len()));
        toks.extend(entity);
        if rng.random_bool(0.3) {
            for w in *SUFFIXES.choose(&mut rng).unwrap() {
                toks.push(w.to_string());
                labels.push(BioLabel::O);
            }
        }
        out.push((toks, labels));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_model_predicts_outside() {
        let m = TaggerModel::zeros(4, 3);
        assert_eq!(tag_line(&["salt"], &m).unwrap(), vec![BioLabel::O]);
        assert!(tag_line::<&str>(&[], &m).is_err());
    }

    #[test]
    fn line_loss_gradient_passes_finite_differences() {
        let lines = synthetic_tagging_corpus(&["tomato sauce", "salt"], 3, 4);
        let mut rng = seeded_rng(2);
        let vocab = TaggerModel::build_vocab(lines.iter().flat_map(|(t, _)| t.iter()));
        let model = TaggerModel::new(vocab, 3, 3, &mut rng);
        let (t, l) = &lines[0];
        let report = grad_check(
            |flat| {
                let mut m = model.clone();
                m.assign_flat(flat);
                let mut g = m.zeros_like();
                let ids = t.iter().map(|w| m.token_id(w)).collect();
                let loss = m.line_loss(t, ids, l, &mut g).unwrap();
                (loss, g.flatten())
            },
            &model.flatten(),
            1e-5,
        )
        .unwrap();
        assert!(report.max_relative_error <= 1e-3, "{report:?}");
    }

    #[test]
    fn synthetic_lines_are_consistently_labelled() {
        for (t, l) in synthetic_tagging_corpus(&["french fried onions", "salt"], 50, 1) {
            assert_eq!(t.len(), l.len());
            let spans = super::super::bio::decode_spans(&t, &l);
            assert_eq!(spans.len(), 1);
            assert!(spans[0] == toks(&["french", "fried", "onions"]) || spans[0] == toks(&["salt"]));
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let lines = synthetic_tagging_corpus(&["tomato sauce", "salt"], 20, 4);
        let (m, _) = train_tagger(&lines, &TaggerConfig { epochs: 1, ..Default::default() }).unwrap();
        let mut ck = Checkpoint::new();
        m.save_into(&mut ck, "tagger");
        let ck = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(TaggerModel::load_from(&ck, "tagger").unwrap(), m);
    }
}

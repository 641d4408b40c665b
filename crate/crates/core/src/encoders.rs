//! Recipe and image encoders into the joint space.
//!
//! Word vectors are fixed during joint training, so encoders consume
//! pre-looked-up inputs ([`RecipeInput`], [`ImageInput`]) and only their own
//! parameters are learned.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{prefixed, prefixed_mut, tanh_backward, tanh_vec, Linear, LstmParams, LstmTrace, Params, Tensor2};
use crate::tfidf::KeyTermWeights;
use crate::word2vec::WordEmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Recipe,
    Image,
}

/// A vector in the joint space, tagged with the modality it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEmbedding {
    pub side: Side,
    pub vector: Vec<f64>,
}

/// `Σ w_i x_i` over key terms: the weight row times the stacked word vectors.
pub fn frequency_feature(key_terms: &KeyTermWeights, w2v: &WordEmbeddingMatrix) -> Vec<f64> {
    let mut out = vec![0.0; w2v.dim()];
    for (term, w) in &key_terms.terms {
        for (o, x) in out.iter_mut().zip(w2v.embed(term)) {
            *o += w * x;
        }
    }
    out
}

/// Word vectors of each instruction sentence.
pub fn sentence_inputs(instructions: &[Vec<String>], w2v: &WordEmbeddingMatrix) -> Vec<Vec<Vec<f64>>> {
    instructions
        .iter()
        .map(|s| s.iter().map(|w| w2v.embed(w)).collect())
        .collect()
}

/// Everything the recipe encoder reads.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeInput {
    pub frequency: Vec<f64>,
    /// Word vectors per instruction sentence.
    pub sentences: Vec<Vec<Vec<f64>>>,
}

/// Everything the image encoder reads.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageInput {
    pub feature: Vec<f64>,
    /// Mean word vector of the category label (zero when unknown).
    pub category: Vec<f64>,
}

impl ImageInput {
    pub fn new(feature: Vec<f64>, category: &str, w2v: &WordEmbeddingMatrix) -> Self {
        let words: Vec<&str> = category.split_whitespace().collect();
        Self {
            feature,
            category: w2v.embed_phrase(&words),
        }
    }
}

/// Two-stage LSTM over instructions fused with the frequency feature.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeEncoderModel {
    pub sentence: LstmParams,
    pub instruction: LstmParams,
    pub fusion: Linear,
}

/// Forward state of one recipe, kept for backprop.
#[derive(Debug, Clone)]
pub struct RecipeForward {
    sentence_traces: Vec<LstmTrace>,
    instruction_trace: LstmTrace,
    fused_input: Vec<f64>,
    pub output: Vec<f64>,
}

impl RecipeEncoderModel {
    pub fn new<R: Rng + ?Sized>(
        word_dim: usize,
        sentence_hidden: usize,
        instruction_hidden: usize,
        joint_dim: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            sentence: LstmParams::new(word_dim, sentence_hidden, rng),
            instruction: LstmParams::new(sentence_hidden, instruction_hidden, rng),
            fusion: Linear::new(word_dim + instruction_hidden, joint_dim, rng),
        }
    }

    pub fn zeros(word_dim: usize, sentence_hidden: usize, instruction_hidden: usize, joint_dim: usize) -> Self {
        Self {
            sentence: LstmParams::zeros(word_dim, sentence_hidden),
            instruction: LstmParams::zeros(sentence_hidden, instruction_hidden),
            fusion: Linear::zeros(word_dim + instruction_hidden, joint_dim),
        }
    }

    pub fn word_dim(&self) -> usize {
        self.sentence.input_dim
    }

    pub fn joint_dim(&self) -> usize {
        self.fusion.output_dim()
    }

    fn sequence_traces(&self, sentences: &[Vec<Vec<f64>>]) -> Result<(Vec<LstmTrace>, LstmTrace)> {
        let mut traces = Vec::new();
        for s in sentences.iter().filter(|s| !s.is_empty()) {
            traces.push(self.sentence.forward_sequence(s)?);
        }
        if traces.is_empty() {
            return Err(Error::Empty("recipe has no non-empty instruction sentence".into()));
        }
        let sentence_vecs: Vec<Vec<f64>> = traces.iter().map(LstmTrace::last_hidden).collect();
        let instr = self.instruction.forward_sequence(&sentence_vecs)?;
        Ok((traces, instr))
    }

    /// Final instruction-level hidden state after encoding each sentence.
    /// Empty sentences are skipped.
    pub fn sequence_feature(&self, sentences: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
        Ok(self.sequence_traces(sentences)?.1.last_hidden())
    }

    pub fn forward(&self, input: &RecipeInput) -> Result<RecipeForward> {
        if input.frequency.len() != self.word_dim() {
            return Err(Error::Shape(format!(
                "frequency feature has {} dims, model expects {}",
                input.frequency.len(),
                self.word_dim()
            )));
        }
        let (sentence_traces, instruction_trace) = self.sequence_traces(&input.sentences)?;
        let mut fused_input = input.frequency.clone();
        fused_input.extend(instruction_trace.last_hidden());
        let output = tanh_vec(&self.fusion.forward(&fused_input)?);
        Ok(RecipeForward {
            sentence_traces,
            instruction_trace,
            fused_input,
            output,
        })
    }

    pub fn encode(&self, input: &RecipeInput) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output)
    }

    /// Accumulates parameter gradients for `d_output` into `grad`.
    pub fn backward(&self, fwd: &RecipeForward, d_output: &[f64], grad: &mut RecipeEncoderModel) {
        let dz = tanh_backward(&fwd.output, d_output);
        let d_fused = self.fusion.backward(&fwd.fused_input, &dz, &mut grad.fusion);
        let d_seq = &d_fused[self.word_dim()..];
        let d_sentences = self
            .instruction
            .backward_final(&fwd.instruction_trace, d_seq, &mut grad.instruction);
        for (trace, d) in fwd.sentence_traces.iter().zip(&d_sentences) {
            self.sentence.backward_final(trace, d, &mut grad.sentence);
        }
    }
}

impl Params for RecipeEncoderModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut v = prefixed("sentence", self.sentence.tensors());
        v.extend(prefixed("instruction", self.instruction.tensors()));
        v.extend(prefixed("fusion", self.fusion.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        let mut v = prefixed_mut("sentence", self.sentence.tensors_mut());
        v.extend(prefixed_mut("instruction", self.instruction.tensors_mut()));
        v.extend(prefixed_mut("fusion", self.fusion.tensors_mut()));
        v
    }
}

/// Image feature concatenated with its category vector, projected + tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEncoderModel {
    pub projection: Linear,
    pub feature_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ImageForward {
    input: Vec<f64>,
    pub output: Vec<f64>,
}

impl ImageEncoderModel {
    pub fn new<R: Rng + ?Sized>(feature_dim: usize, word_dim: usize, joint_dim: usize, rng: &mut R) -> Self {
        Self {
            projection: Linear::new(feature_dim + word_dim, joint_dim, rng),
            feature_dim,
        }
    }

    pub fn zeros(feature_dim: usize, word_dim: usize, joint_dim: usize) -> Self {
        Self {
            projection: Linear::zeros(feature_dim + word_dim, joint_dim),
            feature_dim,
        }
    }

    pub fn joint_dim(&self) -> usize {
        self.projection.output_dim()
    }

    pub fn forward(&self, input: &ImageInput) -> Result<ImageForward> {
        if input.feature.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "image feature has {} dims, model expects {}",
                input.feature.len(),
                self.feature_dim
            )));
        }
        let mut x = input.feature.clone();
        x.extend_from_slice(&input.category);
        let output = tanh_vec(&self.projection.forward(&x)?);
        Ok(ImageForward { input: x, output })
    }

    pub fn encode(&self, input: &ImageInput) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output)
    }

    pub fn backward(&self, fwd: &ImageForward, d_output: &[f64], grad: &mut ImageEncoderModel) {
        let dz = tanh_backward(&fwd.output, d_output);
        self.projection.backward(&fwd.input, &dz, &mut grad.projection);
    }
}

impl Params for ImageEncoderModel {
    fn tensors(&self) -> Vec<(String, &Tensor2)> {
        prefixed("projection", self.projection.tensors())
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor2)> {
        prefixed_mut("projection", self.projection.tensors_mut())
    }
}

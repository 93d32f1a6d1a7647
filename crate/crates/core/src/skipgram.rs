//! Skip-gram with negative sampling over token sequences.
//!
//! Used both for word vectors over problem text and for skill vectors over
//! student skill sequences. Training runs on a single thread in a fixed
//! order, so the output is a pure function of the inputs and the seed.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Alignment, EmbeddingSpace, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkipgramHyper {
    pub vector_dimension: usize,
    pub window_size: usize,
    pub min_count: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipgramHyper {
    fn default() -> Self {
        SkipgramHyper {
            vector_dimension: 100,
            window_size: 5,
            min_count: 0,
            negative_samples: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            seed: 0,
        }
    }
}

impl SkipgramHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("skip-gram: {m}")));
        if self.vector_dimension == 0 {
            return bad("vector_dimension must be at least 1");
        }
        if self.window_size == 0 {
            return bad("window_size must be at least 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return bad("initial_learning_rate must be positive");
        }
        Ok(())
    }

    fn provenance(&self, kind: &str) -> Provenance {
        Provenance::new(kind)
            .with("vector_dimension", self.vector_dimension)
            .with("window_size", self.window_size)
            .with("min_count", self.min_count)
            .with("negative_samples", self.negative_samples)
            .with("epochs", self.epochs)
            .with("initial_learning_rate", self.initial_learning_rate)
            .with("seed", self.seed)
    }
}

/// `(center, context)` positions of a sequence of length `len` with a hard
/// window: every ordered pair at distance `1..=window`.
pub fn window_pairs(len: usize, window: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..len).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(len.saturating_sub(1));
        (lo..=hi).filter(move |&j| j != i).map(move |j| (i, j))
    })
}

/// Tokens kept after the `min_count` filter, sorted, with their counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    pub tokens: Vec<String>,
    pub counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build(sequences: &[Vec<String>], min_count: usize) -> Vocabulary {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for t in sequences.iter().flatten() {
            *counts.entry(t).or_default() += 1;
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count as u64).collect();
        kept.sort_unstable();
        let index = kept.iter().enumerate().map(|(i, (t, _))| (t.to_string(), i)).collect();
        Vocabulary {
            tokens: kept.iter().map(|(t, _)| t.to_string()).collect(),
            counts: kept.iter().map(|&(_, c)| c).collect(),
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Sequences as vocabulary ids with filtered tokens removed.
    pub fn encode(&self, sequences: &[Vec<String>]) -> Vec<Vec<usize>> {
        sequences
            .iter()
            .map(|s| s.iter().filter_map(|t| self.id(t)).collect())
            .collect()
    }
}

/// A trained model: center (input) and context (output) matrices, row-major.
#[derive(Debug, Clone)]
pub struct SkipgramModel {
    pub vocabulary: Vocabulary,
    pub dimension: usize,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
}

impl SkipgramModel {
    pub fn input_vector(&self, id: usize) -> &[f64] {
        &self.input[id * self.dimension..(id + 1) * self.dimension]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        &self.output[id * self.dimension..(id + 1) * self.dimension]
    }

    /// Center plus context vector. Center vectors alone only capture shared
    /// contexts; two tokens that always appear next to each other end up
    /// orthogonal unless the context side is added in.
    pub fn embedding(&self, id: usize) -> Vec<f64> {
        self.input_vector(id)
            .iter()
            .zip(self.output_vector(id))
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Unigram counts raised to 3/4, as a cumulative table.
fn noise_table(counts: &[u64]) -> Vec<f64> {
    let mut acc = 0.0;
    counts
        .iter()
        .map(|&c| {
            acc += (c as f64).powf(0.75);
            acc
        })
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Trains on `sequences` and returns the full model.
pub fn train_skipgram_model(sequences: &[Vec<String>], hyper: &SkipgramHyper) -> Result<SkipgramModel> {
    hyper.validate()?;
    if sequences.is_empty() {
        return Err(Error::Data("skip-gram: no sequences to train on".into()));
    }
    let vocabulary = Vocabulary::build(sequences, hyper.min_count);
    let encoded = vocabulary.encode(sequences);
    let pairs_per_epoch: usize = encoded
        .iter()
        .map(|s| window_pairs(s.len(), hyper.window_size).count())
        .sum();
    if pairs_per_epoch == 0 {
        return Err(Error::Data(format!(
            "skip-gram: no trainable (center, context) pairs after min_count filtering \
             (effective vocabulary size {})",
            vocabulary.len()
        )));
    }

    let dim = hyper.vector_dimension;
    let v = vocabulary.len();
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let scale = 0.5 / dim as f64;
    let mut input: Vec<f64> = (0..v * dim).map(|_| rng.random_range(-scale..scale)).collect();
    let mut output = vec![0.0; v * dim];
    let noise = noise_table(&vocabulary.counts);
    let noise_total = *noise.last().expect("non-empty vocabulary");

    let total_steps = (pairs_per_epoch * hyper.epochs) as f64;
    let lr0 = hyper.initial_learning_rate;
    let mut step = 0usize;
    let mut grad = vec![0.0; dim];
    for _ in 0..hyper.epochs {
        for seq in &encoded {
            for (i, j) in window_pairs(seq.len(), hyper.window_size) {
                let center = seq[i];
                let context = seq[j];
                let lr = lr0 * (1.0 - step as f64 / total_steps).max(1e-4);
                step += 1;
                grad.iter_mut().for_each(|g| *g = 0.0);
                let cin = center * dim;
                for k in 0..=hyper.negative_samples {
                    let (target, label) = if k == 0 {
                        (context, 1.0)
                    } else {
                        let u = rng.random::<f64>() * noise_total;
                        let t = noise.partition_point(|&c| c <= u).min(v - 1);
                        if t == context {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let tout = target * dim;
                    let f: f64 = (0..dim).map(|d| input[cin + d] * output[tout + d]).sum();
                    let g = (label - sigmoid(f)) * lr;
                    for d in 0..dim {
                        grad[d] += g * output[tout + d];
                        output[tout + d] += g * input[cin + d];
                    }
                }
                for d in 0..dim {
                    input[cin + d] += grad[d];
                }
            }
        }
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("skip-gram training diverged".into()));
    }
    Ok(SkipgramModel {
        vocabulary,
        dimension: dim,
        input,
        output,
    })
}

/// Trains and returns center-plus-context vectors as a space named `name`.
pub fn train_skipgram(
    name: &str,
    sequences: &[Vec<String>],
    hyper: &SkipgramHyper,
    alignment: Alignment,
) -> Result<EmbeddingSpace> {
    let model = train_skipgram_model(sequences, hyper)?;
    let mut space = EmbeddingSpace::new(name, model.dimension, alignment, hyper.provenance("skipgram"));
    for (id, token) in model.vocabulary.tokens.iter().enumerate() {
        space.insert(token.clone(), model.embedding(id))?;
    }
    Ok(space)
}

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecallConfig {
    pub n_pairs: usize,
    pub distance: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for RecallConfig {
    fn default() -> Self {
        Self {
            n_pairs: 5,
            distance: 50,
            vocab_size: 256,
            seed: 0,
        }
    }
}

impl RecallConfig {
    /// The last vocabulary id is reserved as the query marker.
    pub fn query_marker(&self) -> usize {
        self.vocab_size - 1
    }
}

/// `[k1 v1 .. kn vn][noise x distance][marker, query_key]`, answer = value of `query_key`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallTask {
    pub n_pairs: usize,
    pub distance: usize,
    pub keys: Vec<usize>,
    pub values: Vec<usize>,
    pub query_key: usize,
    pub answer: usize,
    pub prompt: Vec<usize>,
    pub seed: u64,
}

pub fn gen_recall_task(config: &RecallConfig) -> Result<RecallTask> {
    let RecallConfig {
        n_pairs,
        distance,
        vocab_size,
        seed,
    } = *config;
    if n_pairs == 0 || distance == 0 {
        return Err(Error::invalid("n_pairs and distance must be >= 1"));
    }
    if vocab_size < 2 || 2 * n_pairs > vocab_size - 1 {
        return Err(Error::invalid(format!(
            "vocab of {vocab_size} cannot hold {n_pairs} distinct key/value pairs plus a query marker"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = sample(&mut rng, vocab_size - 1, 2 * n_pairs).into_vec();
    let keys = ids[..n_pairs].to_vec();
    let values = ids[n_pairs..].to_vec();
    let q = rng.random_range(0..n_pairs);
    let mut prompt = Vec::with_capacity(2 * n_pairs + distance + 2);
    for (k, v) in keys.iter().zip(&values) {
        prompt.push(*k);
        prompt.push(*v);
    }
    prompt.extend((0..distance).map(|_| rng.random_range(0..vocab_size - 1)));
    prompt.push(config.query_marker());
    prompt.push(keys[q]);
    Ok(RecallTask {
        n_pairs,
        distance,
        query_key: keys[q],
        answer: values[q],
        keys,
        values,
        prompt,
        seed,
    })
}

/// Sample `i` uses seed `config.seed + i`.
pub fn gen_recall_dataset(n_samples: usize, config: &RecallConfig) -> Result<Vec<RecallTask>> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be >= 1"));
    }
    (0..n_samples)
        .map(|i| {
            gen_recall_task(&RecallConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            })
        })
        .collect()
}

//! Unigram lexical detector used to score how visible an attack is.

use crate::error::{Error, Result};
use crate::stats::pairwise_auc;

/// Add-one smoothed unigram model.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramModel {
    log_probs: Vec<f64>,
}

impl UnigramModel {
    pub fn fit(corpus: &[Vec<usize>], vocab: usize) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::invalid("vocab must be >= 1"));
        }
        let mut counts = vec![1.0; vocab];
        for &t in corpus.iter().flatten() {
            if t >= vocab {
                return Err(Error::TokenOutOfRange { token: t, vocab });
            }
            counts[t] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        Ok(Self {
            log_probs: counts.iter().map(|c| (c / total).ln()).collect(),
        })
    }

    /// Mean negative log-likelihood per token.
    pub fn nll(&self, seq: &[usize]) -> Result<f64> {
        if seq.is_empty() {
            return Err(Error::Empty("sequence"));
        }
        let mut s = 0.0;
        for &t in seq {
            let lp = self.log_probs.get(t).ok_or(Error::TokenOutOfRange {
                token: t,
                vocab: self.log_probs.len(),
            })?;
            s -= lp;
        }
        Ok(s / seq.len() as f64)
    }
}

/// AUC of the unigram NLL detector separating `adversarial` from `benign`,
/// with the detector fit on `benign`.
pub fn lexical_auc(benign: &[Vec<usize>], adversarial: &[Vec<usize>], vocab: usize) -> Result<f64> {
    let model = UnigramModel::fit(benign, vocab)?;
    let neg = benign.iter().map(|s| model.nll(s)).collect::<Result<Vec<_>>>()?;
    let pos = adversarial.iter().map(|s| model.nll(s)).collect::<Result<Vec<_>>>()?;
    pairwise_auc(&neg, &pos).ok_or(Error::Empty("benign or adversarial set"))
}

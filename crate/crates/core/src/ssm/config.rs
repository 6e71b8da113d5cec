use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectiveSsmConfig {
    pub n_layers: usize,
    pub d_state: usize,
    pub d_model: usize,
    pub vocab_size: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub seed: u64,
}

impl Default for SelectiveSsmConfig {
    fn default() -> Self {
        Self {
            n_layers: 4,
            d_state: 16,
            d_model: 32,
            vocab_size: 256,
            delta_min: 1e-3,
            delta_max: 10.0,
            seed: 42,
        }
    }
}

impl SelectiveSsmConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.d_state == 0 || self.d_model == 0 || self.vocab_size == 0 {
            return Err(Error::invalid("all model dimensions must be >= 1"));
        }
        if !(self.delta_min > 0.0 && self.delta_min < self.delta_max && self.delta_max.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < delta_min < delta_max, got [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        SelectiveSsmConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_delta_range() {
        let cfg = SelectiveSsmConfig {
            delta_min: 2.0,
            delta_max: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SelectiveSsmConfig {
            d_state: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}

//! Spectral features, Gramian energy, memory-horizon and Lipschitz bounds.

mod bounds;
mod features;
mod trace;

pub use bounds::{
    gramian_energy, horizon_bound, lipschitz_certificate, min_delta_perturbation, near_critical_horizon, spectral_gap,
    verify_lipschitz, verify_lipschitz_rates, HorizonBound, HorizonInputs, LipschitzCheck,
};
pub use features::{extract_features, FeatureBlock, FeatureLayout, FeatureVector};
pub use trace::SpectralTrace;

#[cfg(test)]
#[allow(unused_imports)]
pub(crate) use trace::synthetic_record;

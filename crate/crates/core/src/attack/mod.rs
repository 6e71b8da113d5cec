//! Gradient-based spectral-collapse attack and its lexical visibility.

mod lexical;
mod loss;
mod pareto;
mod pgd;
pub mod tape;

pub use lexical::{lexical_auc, UnigramModel};
pub use loss::{
    benign_reference, joint_objective, kl_divergence, objective_gradient, output_kl_embedded, output_kl_loss, softmax,
    spectral_loss, spectral_loss_embedded,
};
pub use pareto::{attack_batch, pareto_sweep, zipf_prompts, ParetoPoint, DEFAULT_LAMBDAS};
pub use pgd::{pgd_attack, project_to_vocab, AttackConfig, AttackMode, AttackResult};

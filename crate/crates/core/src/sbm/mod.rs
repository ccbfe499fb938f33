//! Block-model inference on match networks.
//!
//! The model is a bipartite degree-corrected Poisson block model whose degree
//! corrections are normalised within each demographic group, plus a term for
//! the group composition of each (type, market) cell. Partitions are scored by
//! description length and searched with annealed Metropolis-Hastings.

mod ari;
mod mcmc;
mod objective;
mod profiles;

pub use ari::adjusted_rand_index;
pub use mcmc::{fit, mh_sweep, select_model, Chain, FitResult, GridPoint, McmcConfig, ModelSelection, SweepStats};
pub use objective::{
    description_length, evaluate, evaluate_alpha, penalty, profiled_loglik, profiled_loglik_alpha,
    AlphaTerm, Objective,
};
pub use profiles::{soft_profiles, ProfileConfig, SkillsProfile};

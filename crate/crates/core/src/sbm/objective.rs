use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::math::{xlogx, XLogXTable};
use crate::network::{block_stats, BlockStats, MatchNetwork, Partition};

/// Value of the inference objective for one partition (all terms in nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub log_lik: f64,
    /// `-log_lik + penalty_label + penalty_blocks`.
    pub description_length: f64,
    /// Cost of the node labels: `N_W log I + N_J log Γ`.
    pub penalty_label: f64,
    /// Cost of the block matrix: `n_g I Γ log(E + 1)`.
    pub penalty_blocks: f64,
    pub n_worker_types: usize,
    pub n_markets: usize,
}

impl Objective {
    pub fn penalty(&self) -> f64 {
        self.penalty_label + self.penalty_blocks
    }
}

/// How the group-share term `log P(g | b)` enters the likelihood.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaTerm {
    /// Once per match: `Σ m_ιγg log(m_ιγg / m_ιγ)`.
    #[default]
    PerMatch,
    /// Once per worker with at least one match:
    /// `Σ n_ιg log(n_ιg / n_ι)`, with n counting workers.
    PerWorker,
}

fn loglik_with<F: Fn(u64) -> f64>(stats: &BlockStats, alpha: AlphaTerm, f: F) -> f64 {
    let m: f64 = stats.m.iter().map(|&x| f(x)).sum();
    let kw: f64 = stats.k_worker.iter().map(|&x| f(x)).sum();
    let kj: f64 = stats.k_job.iter().map(|&x| f(x)).sum();
    let poisson = m - kw - kj;
    let share = match alpha {
        AlphaTerm::PerMatch => m - stats.m_cell.iter().map(|&x| f(x)).sum::<f64>(),
        AlphaTerm::PerWorker => {
            let ng = stats.n_groups();
            let by_group: f64 = stats.active_workers.iter().map(|&x| f(x)).sum();
            let by_type: f64 = stats
                .active_workers
                .chunks(ng)
                .map(|c| f(c.iter().sum()))
                .sum();
            by_group - by_type
        }
    };
    poisson + share
}

/// Profiled log-likelihood of a partition.
///
/// With the degree corrections and block rates at their maximum-likelihood
/// values, the Poisson part is `Σ m_ιγg log(m_ιγg / (K_ιg K_γg))`, where the
/// node masses K are taken within group g. The group-share part adds
/// `Σ m_ιγg log(m_ιγg / m_ιγ)`. Expanding both gives
/// `2 Σ f(m_ιγg) − Σ f(K_ιg) − Σ f(K_γg) − Σ f(m_ιγ)` with `f(x) = x ln x`.
pub fn profiled_loglik(stats: &BlockStats) -> f64 {
    profiled_loglik_alpha(stats, AlphaTerm::PerMatch)
}

/// [`profiled_loglik`] with a choice of group-share term.
pub fn profiled_loglik_alpha(stats: &BlockStats, alpha: AlphaTerm) -> f64 {
    loglik_with(stats, alpha, |x| xlogx(x as f64))
}

pub(crate) fn profiled_loglik_table(stats: &BlockStats, alpha: AlphaTerm, table: &XLogXTable) -> f64 {
    loglik_with(stats, alpha, |x| table.get(x))
}

/// Penalty terms for a model of the given size.
pub fn penalty(
    n_workers: usize,
    n_jobs: usize,
    n_groups: usize,
    n_worker_types: usize,
    n_markets: usize,
    total_matches: u64,
) -> (f64, f64) {
    let label = n_workers as f64 * (n_worker_types as f64).ln()
        + n_jobs as f64 * (n_markets as f64).ln();
    let blocks =
        (n_groups * n_worker_types * n_markets) as f64 * ((total_matches + 1) as f64).ln();
    (label, blocks)
}

pub(crate) fn objective_from_loglik(
    log_lik: f64,
    net: &MatchNetwork,
    n_worker_types: usize,
    n_markets: usize,
) -> Objective {
    let (penalty_label, penalty_blocks) = penalty(
        net.n_workers(),
        net.n_jobs(),
        net.groups_present(),
        n_worker_types,
        n_markets,
        net.total_matches(),
    );
    Objective {
        log_lik,
        description_length: -log_lik + penalty_label + penalty_blocks,
        penalty_label,
        penalty_blocks,
        n_worker_types,
        n_markets,
    }
}

/// Description length of `p`, using its declared block counts.
pub fn description_length(stats: &BlockStats, net: &MatchNetwork, p: &Partition) -> Objective {
    objective_from_loglik(profiled_loglik(stats), net, p.n_worker_types, p.n_markets)
}

/// Convenience: tally statistics and evaluate the objective in one call.
pub fn evaluate(net: &MatchNetwork, p: &Partition) -> Result<Objective> {
    evaluate_alpha(net, p, AlphaTerm::PerMatch)
}

/// [`evaluate`] with a choice of group-share term.
pub fn evaluate_alpha(net: &MatchNetwork, p: &Partition, alpha: AlphaTerm) -> Result<Objective> {
    let stats = block_stats(net, p)?;
    Ok(objective_from_loglik(profiled_loglik_alpha(&stats, alpha), net, p.n_worker_types, p.n_markets))
}

//! Posterior soft assignments.

use serde::{Deserialize, Serialize};

use super::mcmc::{chain_rng, fit, Chain, McmcConfig};
use crate::error::{Error, Result};
use crate::math::XLogXTable;
use crate::network::{MatchNetwork, Partition};

/// Settings for posterior sampling. The MAP partition comes from a [`fit`]
/// with `mcmc`; sampling then runs at β = 1 from that partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub mcmc: McmcConfig,
    /// Sweeps discarded before the first sample.
    pub burn_in: usize,
    /// Number of retained samples.
    pub samples: usize,
    /// Sweeps between retained samples.
    pub thin: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { mcmc: McmcConfig::default(), burn_in: 200, samples: 500, thin: 2 }
    }
}

/// Membership frequencies per node. Columns follow the labels of `map`; any
/// extra columns collect mass on blocks that are empty in the MAP partition.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillsProfile {
    pub worker: Vec<Vec<f64>>,
    pub job: Vec<Vec<f64>>,
    /// Compacted MAP partition.
    pub map: Partition,
    pub n_samples: usize,
}

/// Minimum-cost perfect assignment on a square matrix (Hungarian method,
/// potentials form). Returns `assign[row] = column`.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    assign
}

/// Label map `sample label -> reference label` maximising overlap.
fn align(sample: &[u32], reference: &[u32], n_blocks: usize) -> Vec<usize> {
    let mut overlap = vec![vec![0.0; n_blocks]; n_blocks];
    for (&s, &r) in sample.iter().zip(reference) {
        overlap[s as usize][r as usize] -= 1.0;
    }
    hungarian(&overlap)
}

/// Column order that puts the MAP's non-empty blocks first, in label order.
fn column_order(labels: &[u32], n_blocks: usize) -> Vec<usize> {
    let mut used = vec![false; n_blocks];
    for &b in labels {
        used[b as usize] = true;
    }
    let mut col = vec![0; n_blocks];
    let mut next = 0;
    for pass in [true, false] {
        for b in 0..n_blocks {
            if used[b] == pass {
                col[b] = next;
                next += 1;
            }
        }
    }
    col
}

/// Posterior membership frequencies at block counts `(I, Γ)`.
pub fn soft_profiles(
    net: &MatchNetwork,
    n_worker_types: usize,
    n_markets: usize,
    config: &ProfileConfig,
) -> Result<SkillsProfile> {
    if config.samples == 0 || config.thin == 0 {
        return Err(Error::InvalidParameter("samples and thin must be >= 1".into()));
    }
    let best = fit(net, n_worker_types, n_markets, &config.mcmc)?;
    let pooled;
    let net = if config.mcmc.pool_groups {
        pooled = net.pooled();
        &pooled
    } else {
        net
    };
    let map = best.raw_partition;
    let table = XLogXTable::new(net.total_matches());
    let mut chain = Chain::new(net, &table, config.mcmc.alpha, map.clone())?;
    let mut rng = chain_rng(config.mcmc.seed, config.mcmc.restarts as u64);
    let eps = config.mcmc.epsilon;
    for _ in 0..config.burn_in {
        chain.sweep(1.0, eps, &mut rng);
    }
    let wcol = column_order(&map.worker_type, n_worker_types);
    let jcol = column_order(&map.market, n_markets);
    let mut worker = vec![vec![0.0; n_worker_types]; net.n_workers()];
    let mut job = vec![vec![0.0; n_markets]; net.n_jobs()];
    for _ in 0..config.samples {
        for _ in 0..config.thin {
            chain.sweep(1.0, eps, &mut rng);
        }
        let p = chain.partition();
        let wmap = align(&p.worker_type, &map.worker_type, n_worker_types);
        for (row, &b) in worker.iter_mut().zip(&p.worker_type) {
            row[wcol[wmap[b as usize]]] += 1.0;
        }
        let jmap = align(&p.market, &map.market, n_markets);
        for (row, &b) in job.iter_mut().zip(&p.market) {
            row[jcol[jmap[b as usize]]] += 1.0;
        }
    }
    let n = config.samples as f64;
    for row in worker.iter_mut().chain(job.iter_mut()) {
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(SkillsProfile { worker, job, map: best.partition, n_samples: config.samples })
}

//! Metropolis-Hastings partition search.
//!
//! A chain holds a partition, its block statistics and the current
//! log-likelihood. A sweep visits every node with at least one match in random
//! order and proposes a new block for it. Proposals mix a uniform draw (weight
//! ε) with the block of a random neighbour-of-neighbour: pick one of the node's
//! matches at random, look at the block `t` of the node on the other end, and
//! choose a block `s` with probability proportional to the mass between `s` and
//! `t`. The move is accepted with probability
//! `min(1, exp(-β ΔΣ) q(s→r) / q(r→s))`.
//!
//! Within one fit the block counts are fixed, so the MDL penalty is a constant
//! and `ΔΣ = -Δℓ`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{objective_from_loglik, profiled_loglik_table, AlphaTerm, Objective};
use crate::error::{Error, Result};
use crate::math::XLogXTable;
use crate::network::{block_stats, BlockStats, MatchNetwork, Node, Partition};

/// Settings for the MCMC search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    /// Sweeps per restart.
    pub sweeps: usize,
    /// Independent chains from random starting partitions.
    pub restarts: usize,
    /// Inverse temperature of the first sweep.
    pub beta_start: f64,
    /// Inverse temperature of the last sweep; the schedule is geometric.
    pub beta_end: f64,
    /// Weight of the uniform component of the proposal.
    pub epsilon: f64,
    pub seed: u64,
    /// Fit the group-blind objective (all workers treated as one group).
    #[serde(default)]
    pub pool_groups: bool,
    #[serde(default)]
    pub alpha: AlphaTerm,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            sweeps: 1000,
            restarts: 10,
            beta_start: 1.0,
            beta_end: 1000.0,
            epsilon: 0.1,
            seed: 0,
            pool_groups: false,
            alpha: AlphaTerm::PerMatch,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(Error::InvalidParameter("sweeps and restarts must be >= 1".into()));
        }
        if !(self.beta_start > 0.0 && self.beta_end > 0.0) {
            return Err(Error::InvalidParameter("inverse temperatures must be > 0".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter("epsilon must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Inverse temperature for sweep `t` of `self.sweeps`.
    pub fn beta_at(&self, t: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.beta_start;
        }
        let frac = t as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(frac)
    }
}

/// Counts of proposals and acceptances in one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub proposed: usize,
    pub accepted: usize,
}

/// Sparse tally over block indices, cleared in time proportional to the
/// number of touched slots.
#[derive(Debug, Clone)]
struct Tally {
    counts: Vec<u64>,
    touched: Vec<usize>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally { counts: vec![0; n], touched: Vec::new() }
    }

    fn add(&mut self, slot: usize, c: u64) {
        if self.counts[slot] == 0 {
            self.touched.push(slot);
        }
        self.counts[slot] += c;
    }

    fn clear(&mut self) {
        for &t in &self.touched {
            self.counts[t] = 0;
        }
        self.touched.clear();
    }

    fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.touched.iter().map(|&t| (t, self.counts[t]))
    }
}

/// One MCMC chain over a fixed network and fixed block counts.
#[derive(Debug, Clone)]
pub struct Chain<'a> {
    net: &'a MatchNetwork,
    table: &'a XLogXTable,
    alpha: AlphaTerm,
    partition: Partition,
    stats: BlockStats,
    log_lik: f64,
    movable: Vec<Node>,
    /// Matches of the node being moved, per block on the opposite side.
    nbr: Tally,
    /// Matches of a job being moved, per (worker type, group).
    nbr_group: Tally,
}

impl<'a> Chain<'a> {
    /// Starts a chain at `partition`. Degree-zero nodes are placed in block 0
    /// and never moved.
    pub fn new(
        net: &'a MatchNetwork,
        table: &'a XLogXTable,
        alpha: AlphaTerm,
        mut partition: Partition,
    ) -> Result<Self> {
        partition.check_against(net)?;
        for w in 0..net.n_workers() {
            if net.worker_degree(w) == 0 {
                partition.worker_type[w] = 0;
            }
        }
        for j in 0..net.n_jobs() {
            if net.job_degree(j) == 0 {
                partition.market[j] = 0;
            }
        }
        let stats = block_stats(net, &partition)?;
        let log_lik = profiled_loglik_table(&stats, alpha, table);
        let movable = (0..net.n_workers())
            .filter(|&w| net.worker_degree(w) > 0)
            .map(Node::Worker)
            .chain((0..net.n_jobs()).filter(|&j| net.job_degree(j) > 0).map(Node::Job))
            .collect();
        let (ni, nm, ng) = (stats.n_worker_types(), stats.n_markets(), stats.n_groups());
        Ok(Chain {
            net,
            table,
            alpha,
            partition,
            stats,
            log_lik,
            movable,
            nbr: Tally::new(ni.max(nm)),
            nbr_group: Tally::new(ni * ng),
        })
    }

    /// Uniformly random labels for every node with matches.
    pub fn random_start<R: Rng>(
        net: &'a MatchNetwork,
        table: &'a XLogXTable,
        alpha: AlphaTerm,
        n_worker_types: usize,
        n_markets: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let worker_type = (0..net.n_workers())
            .map(|_| rng.random_range(0..n_worker_types as u32))
            .collect();
        let market = (0..net.n_jobs()).map(|_| rng.random_range(0..n_markets as u32)).collect();
        Chain::new(net, table, alpha, Partition::new(worker_type, market, n_worker_types, n_markets)?)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn stats(&self) -> &BlockStats {
        &self.stats
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    /// Nodes with at least one match, in the order last swept.
    pub fn movable(&self) -> &[Node] {
        &self.movable
    }

    /// Description length at the chain's declared block counts.
    pub fn objective(&self) -> Objective {
        objective_from_loglik(
            self.log_lik,
            self.net,
            self.partition.n_worker_types,
            self.partition.n_markets,
        )
    }

    /// Recomputes ℓ from the block statistics, replacing the running value.
    pub fn resync(&mut self) {
        let exact = profiled_loglik_table(&self.stats, self.alpha, self.table);
        debug_assert!(
            (exact - self.log_lik).abs() <= 1e-6 * exact.abs().max(1.0),
            "incremental loglik drifted: {} vs {}",
            self.log_lik,
            exact
        );
        self.log_lik = exact;
    }

    fn tally(&mut self, node: Node) {
        self.nbr.clear();
        self.nbr_group.clear();
        match node {
            Node::Worker(w) => {
                for (job, c) in self.net.worker_neighbors(w) {
                    self.nbr.add(self.partition.market[job] as usize, c as u64);
                }
            }
            Node::Job(j) => {
                let ng = self.stats.n_groups();
                for (worker, c) in self.net.job_neighbors(j) {
                    let ty = self.partition.worker_type[worker] as usize;
                    let g = self.net.group_of(worker) as usize;
                    self.nbr.add(ty, c as u64);
                    self.nbr_group.add(ty * ng + g, c as u64);
                }
            }
        }
    }

    /// Change in ℓ from moving the tallied `node` from block `r` to `s`.
    fn delta(&self, node: Node, r: usize, s: usize) -> f64 {
        let f = |x: u64| self.table.get(x);
        // contribution change of a count moving c units from a to b
        let shift = |a: u64, b: u64, c: u64| f(b + c) - f(b) + f(a - c) - f(a);
        let st = &self.stats;
        let (nm, ng) = (st.n_markets(), st.n_groups());
        let per_match = self.alpha == AlphaTerm::PerMatch;
        let m_weight = if per_match { 2.0 } else { 1.0 };
        let mut d = 0.0;
        match node {
            Node::Worker(w) => {
                let g = self.net.group_of(w) as usize;
                for (t, c) in self.nbr.iter() {
                    d += m_weight
                        * shift(st.m[(r * nm + t) * ng + g], st.m[(s * nm + t) * ng + g], c);
                    if per_match {
                        d -= shift(st.m_cell[r * nm + t], st.m_cell[s * nm + t], c);
                    }
                }
                let k = self.net.worker_degree(w);
                d -= shift(st.k_worker[r * ng + g], st.k_worker[s * ng + g], k);
                if !per_match {
                    let a = &st.active_workers;
                    d += shift(a[r * ng + g], a[s * ng + g], 1);
                    let total = |ty: usize| a[ty * ng..(ty + 1) * ng].iter().sum::<u64>();
                    d -= shift(total(r), total(s), 1);
                }
            }
            Node::Job(_) => {
                let mut k_by_group = [0u64; crate::network::N_GROUPS];
                for (slot, c) in self.nbr_group.iter() {
                    let (ty, g) = (slot / ng, slot % ng);
                    d += m_weight
                        * shift(st.m[(ty * nm + r) * ng + g], st.m[(ty * nm + s) * ng + g], c);
                    k_by_group[g] += c;
                }
                if per_match {
                    for (ty, c) in self.nbr.iter() {
                        d -= shift(st.m_cell[ty * nm + r], st.m_cell[ty * nm + s], c);
                    }
                }
                for (g, &k) in k_by_group.iter().enumerate().take(ng) {
                    if k > 0 {
                        d -= shift(st.k_job[r * ng + g], st.k_job[s * ng + g], k);
                    }
                }
            }
        }
        d
    }

    /// Probability that the proposal for the tallied `node` lands on `target`.
    ///
    /// With `departed = Some(r)` the cell masses are read as if the node had
    /// already left block `r`; this gives the reverse-move probability without
    /// touching the statistics. Opposite-side block masses do not change under
    /// the move.
    fn proposal_prob(&self, node: Node, target: usize, departed: Option<usize>, eps: f64) -> f64 {
        let st = &self.stats;
        let (ni, nm, ng) = (st.n_worker_types(), st.n_markets(), st.n_groups());
        let (n_blocks, k) = match node {
            Node::Worker(_) => (ni, self.net.degree(node)),
            Node::Job(_) => (nm, self.net.degree(node)),
        };
        let mut p = 0.0;
        for (t, c) in self.nbr.iter() {
            let (mut mass, total) = match node {
                Node::Worker(_) => {
                    (st.m_cell[target * nm + t], (0..ng).map(|g| st.k_job[t * ng + g]).sum::<u64>())
                }
                Node::Job(_) => {
                    (st.m_cell[t * nm + target], (0..ng).map(|g| st.k_worker[t * ng + g]).sum::<u64>())
                }
            };
            if departed == Some(target) {
                mass -= c;
            }
            p += c as f64 / k as f64
                * (eps / n_blocks as f64 + (1.0 - eps) * mass as f64 / total as f64);
        }
        p
    }

    fn propose<R: Rng>(&self, node: Node, eps: f64, rng: &mut R) -> usize {
        let st = &self.stats;
        let (ni, nm) = (st.n_worker_types(), st.n_markets());
        let n_blocks = match node {
            Node::Worker(_) => ni,
            Node::Job(_) => nm,
        };
        if rng.random::<f64>() < eps {
            return rng.random_range(0..n_blocks);
        }
        // block of a match partner, chosen in proportion to multiplicity
        let pick = rng.random_range(0..self.net.degree(node));
        let mut acc = 0u64;
        let t = match node {
            Node::Worker(w) => self
                .net
                .worker_neighbors(w)
                .find(|&(_, c)| {
                    acc += c as u64;
                    pick < acc
                })
                .map(|(job, _)| self.partition.market[job] as usize),
            Node::Job(j) => self
                .net
                .job_neighbors(j)
                .find(|&(_, c)| {
                    acc += c as u64;
                    pick < acc
                })
                .map(|(worker, _)| self.partition.worker_type[worker] as usize),
        }
        .expect("degree > 0");
        // a block on this side, in proportion to its mass toward t
        let mass = |s: usize| match node {
            Node::Worker(_) => st.m_cell[s * nm + t],
            Node::Job(_) => st.m_cell[t * nm + s],
        };
        let total: u64 = (0..n_blocks).map(mass).sum();
        let target = rng.random_range(0..total);
        let mut acc = 0u64;
        for s in 0..n_blocks {
            acc += mass(s);
            if target < acc {
                return s;
            }
        }
        unreachable!("cell masses sum to total")
    }

    /// Proposes and possibly accepts one move for `node`. Returns whether the
    /// partition changed.
    pub fn step<R: Rng>(&mut self, node: Node, beta: f64, eps: f64, rng: &mut R) -> bool {
        let r = self.partition.block_of(node);
        let s = self.propose(node, eps, rng);
        if s == r {
            return false;
        }
        self.tally(node);
        let delta = self.delta(node, r, s);
        let forward = self.proposal_prob(node, s, None, eps);
        let backward = self.proposal_prob(node, r, Some(r), eps);
        // ΔΣ = -Δℓ at fixed block counts
        let log_accept = beta * delta + backward.ln() - forward.ln();
        if log_accept >= 0.0 || rng.random::<f64>() < log_accept.exp() {
            self.stats.move_unchecked(self.net, &mut self.partition, node, s);
            self.log_lik += delta;
            true
        } else {
            false
        }
    }

    /// One pass over all movable nodes in random order.
    pub fn sweep<R: Rng>(&mut self, beta: f64, eps: f64, rng: &mut R) -> SweepStats {
        let mut order = std::mem::take(&mut self.movable);
        order.shuffle(rng);
        let mut stats = SweepStats::default();
        for &node in &order {
            stats.proposed += 1;
            if self.step(node, beta, eps, rng) {
                stats.accepted += 1;
            }
        }
        self.movable = order;
        self.resync();
        stats
    }
}

/// Runs one sweep on `chain` with the inverse temperature and mixing weight
/// from `config`'s first sweep.
pub fn mh_sweep<R: Rng>(chain: &mut Chain<'_>, beta: f64, config: &McmcConfig, rng: &mut R) -> SweepStats {
    chain.sweep(beta, config.epsilon, rng)
}

/// Best partition found by [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Compacted partition: empty blocks removed.
    pub partition: Partition,
    /// Objective of the compacted partition at its effective block counts.
    pub objective: Objective,
    /// Best partition in the requested label space, before compaction.
    pub raw_partition: Partition,
    /// Objective at the requested block counts.
    pub raw_objective: Objective,
    /// Index of the restart that produced the result.
    pub restart: usize,
}

pub(crate) fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_restart(
    net: &MatchNetwork,
    table: &XLogXTable,
    n_worker_types: usize,
    n_markets: usize,
    config: &McmcConfig,
    restart: usize,
) -> Result<(Partition, Objective)> {
    let mut rng = chain_rng(config.seed, restart as u64);
    let mut chain =
        Chain::random_start(net, table, config.alpha, n_worker_types, n_markets, &mut rng)?;
    let mut best = (chain.partition().clone(), chain.objective());
    for t in 0..config.sweeps {
        chain.sweep(config.beta_at(t), config.epsilon, &mut rng);
        let obj = chain.objective();
        if obj.description_length < best.1.description_length {
            best = (chain.partition().clone(), obj);
        }
    }
    Ok(best)
}

fn check_sizes(net: &MatchNetwork, n_worker_types: usize, n_markets: usize) -> Result<()> {
    if n_worker_types == 0 || n_markets == 0 {
        return Err(Error::InvalidParameter("block counts must be >= 1".into()));
    }
    if n_worker_types > net.n_workers().max(1) || n_markets > net.n_jobs().max(1) {
        return Err(Error::InvalidParameter(format!(
            "({n_worker_types}, {n_markets}) blocks exceed ({}, {}) nodes",
            net.n_workers(),
            net.n_jobs()
        )));
    }
    Ok(())
}

/// Finds the lowest description-length partition with at most
/// `n_worker_types` types and `n_markets` markets.
///
/// Restarts run in parallel with their own RNG streams; the winner is the
/// lowest Σ, ties going to the lower restart index.
pub fn fit(
    net: &MatchNetwork,
    n_worker_types: usize,
    n_markets: usize,
    config: &McmcConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_sizes(net, n_worker_types, n_markets)?;
    let pooled;
    let net = if config.pool_groups {
        pooled = net.pooled();
        &pooled
    } else {
        net
    };
    let table = XLogXTable::new(net.total_matches());
    let results: Vec<Result<(Partition, Objective)>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(net, &table, n_worker_types, n_markets, config, r))
        .collect();
    let mut best: Option<(usize, Partition, Objective)> = None;
    for (r, res) in results.into_iter().enumerate() {
        let (p, o) = res?;
        let better = match &best {
            None => true,
            Some((_, _, b)) => o.description_length < b.description_length,
        };
        if better {
            best = Some((r, p, o));
        }
    }
    let (restart, raw_partition, raw_objective) = best.expect("restarts >= 1");
    let partition = raw_partition.compacted();
    let objective = objective_from_loglik(
        raw_objective.log_lik,
        net,
        partition.n_worker_types,
        partition.n_markets,
    );
    Ok(FitResult { partition, objective, raw_partition, raw_objective, restart })
}

/// One grid point of [`select_model`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub requested_worker_types: usize,
    pub requested_markets: usize,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSelection {
    pub best: FitResult,
    /// Index into `grid` of the selected point.
    pub best_index: usize,
    pub grid: Vec<GridPoint>,
}

/// Fits every `(I, Γ)` in the grid and returns the lowest Σ.
///
/// Every grid point uses the same configuration, so a one-point grid gives
/// exactly [`fit`]'s result. Ties go to the earlier grid point (types outer,
/// markets inner).
pub fn select_model(
    net: &MatchNetwork,
    worker_types: &[usize],
    markets: &[usize],
    config: &McmcConfig,
) -> Result<ModelSelection> {
    if worker_types.is_empty() || markets.is_empty() {
        return Err(Error::Empty("model grid".into()));
    }
    let points: Vec<(usize, usize)> = worker_types
        .iter()
        .flat_map(|&i| markets.iter().map(move |&g| (i, g)))
        .collect();
    let fits: Vec<Result<FitResult>> =
        points.par_iter().map(|&(i, g)| fit(net, i, g, config)).collect();
    let mut grid = Vec::with_capacity(points.len());
    let mut results = Vec::with_capacity(points.len());
    for (&(i, g), f) in points.iter().zip(fits) {
        let f = f?;
        grid.push(GridPoint { requested_worker_types: i, requested_markets: g, objective: f.objective });
        results.push(f);
    }
    let mut best_index = 0;
    for (k, point) in grid.iter().enumerate() {
        if point.objective.description_length < grid[best_index].objective.description_length {
            best_index = k;
        }
    }
    let best = results.swap_remove(best_index);
    Ok(ModelSelection { best, best_index, grid })
}

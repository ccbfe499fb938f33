//! Bipartite worker-job match networks, block partitions and the block-level
//! sufficient statistics shared by simulation, inference and decomposition.
//!
//! A [`MatchNetwork`] is a sparse multigraph: each distinct worker-job pair is
//! stored once with its match multiplicity, and both sides carry a CSR-style
//! adjacency index. A [`Partition`] assigns every worker a type and every job a
//! market. [`BlockStats`] holds the per-(type, market, group) match tallies from
//! which the likelihood is computed, and can be updated in place when a single
//! node changes block.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Number of demographic groups handled by the artifact.
pub const N_GROUPS: usize = 2;

/// Demographic group label. `0` is the reference group (female in the
/// decomposition), `1` the comparison group (male).
pub type Group = u8;

/// One deduplicated worker-job pair with its match multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub worker: u32,
    pub job: u32,
    pub count: u32,
}

/// Compressed adjacency for one side of the bipartite graph.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    counts: Vec<u32>,
}

impl Adjacency {
    fn build(n: usize, pairs: impl Iterator<Item = (u32, u32, u32)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (src, _, _) in pairs.clone() {
            offsets[src as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let nnz = offsets[n];
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; nnz];
        let mut counts = vec![0u32; nnz];
        for (src, dst, c) in pairs {
            let slot = cursor[src as usize];
            targets[slot] = dst;
            counts[slot] = c;
            cursor[src as usize] += 1;
        }
        Adjacency { offsets, targets, counts }
    }

    fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        let range = self.offsets[node]..self.offsets[node + 1];
        self.targets[range.clone()]
            .iter()
            .zip(&self.counts[range])
            .map(|(&t, &c)| (t as usize, c))
    }
}

/// Immutable bipartite multigraph of worker-job matches.
#[derive(Debug, Clone)]
pub struct MatchNetwork {
    n_workers: usize,
    n_jobs: usize,
    edges: Vec<Edge>,
    worker_group: Vec<Group>,
    worker_adj: Adjacency,
    job_adj: Adjacency,
    worker_degree: Vec<u64>,
    job_degree: Vec<u64>,
    total: u64,
}

impl MatchNetwork {
    /// Builds a network from `(worker, job, multiplicity)` triples.
    ///
    /// Repeated pairs are merged by summing their multiplicities.
    pub fn new(
        n_workers: usize,
        n_jobs: usize,
        edges: impl IntoIterator<Item = (usize, usize, u32)>,
        worker_group: Vec<Group>,
    ) -> Result<Self> {
        if worker_group.len() != n_workers {
            return Err(Error::Dimension(format!(
                "worker_group has length {} but n_workers = {}",
                worker_group.len(),
                n_workers
            )));
        }
        if let Some(g) = worker_group.iter().find(|&&g| g as usize >= N_GROUPS) {
            return Err(Error::InvalidParameter(format!("group label {g} is not 0 or 1")));
        }
        if n_workers > u32::MAX as usize || n_jobs > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many nodes".into()));
        }
        let mut merged: BTreeMap<(u32, u32), u64> = BTreeMap::new();
        for (w, j, c) in edges {
            if w >= n_workers {
                return Err(Error::Index(format!("worker {w} >= n_workers {n_workers}")));
            }
            if j >= n_jobs {
                return Err(Error::Index(format!("job {j} >= n_jobs {n_jobs}")));
            }
            if c == 0 {
                return Err(Error::InvalidParameter(format!(
                    "edge ({w}, {j}) has zero multiplicity"
                )));
            }
            *merged.entry((w as u32, j as u32)).or_default() += c as u64;
        }
        let mut list = Vec::with_capacity(merged.len());
        for ((worker, job), count) in merged {
            let count = u32::try_from(count)
                .map_err(|_| Error::InvalidParameter("edge multiplicity overflow".into()))?;
            list.push(Edge { worker, job, count });
        }
        Ok(Self::from_sorted_edges(n_workers, n_jobs, list, worker_group))
    }

    fn from_sorted_edges(
        n_workers: usize,
        n_jobs: usize,
        edges: Vec<Edge>,
        worker_group: Vec<Group>,
    ) -> Self {
        let worker_adj =
            Adjacency::build(n_workers, edges.iter().map(|e| (e.worker, e.job, e.count)));
        let job_adj = Adjacency::build(n_jobs, edges.iter().map(|e| (e.job, e.worker, e.count)));
        let mut worker_degree = vec![0u64; n_workers];
        let mut job_degree = vec![0u64; n_jobs];
        for e in &edges {
            worker_degree[e.worker as usize] += e.count as u64;
            job_degree[e.job as usize] += e.count as u64;
        }
        let total = worker_degree.iter().sum();
        MatchNetwork {
            n_workers,
            n_jobs,
            edges,
            worker_group,
            worker_adj,
            job_adj,
            worker_degree,
            job_degree,
            total,
        }
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn n_jobs(&self) -> usize {
        self.n_jobs
    }

    /// Deduplicated edges sorted by (worker, job).
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn worker_group(&self) -> &[Group] {
        &self.worker_group
    }

    pub fn group_of(&self, worker: usize) -> Group {
        self.worker_group[worker]
    }

    /// Total match mass E.
    pub fn total_matches(&self) -> u64 {
        self.total
    }

    pub fn worker_degree(&self, worker: usize) -> u64 {
        self.worker_degree[worker]
    }

    pub fn job_degree(&self, job: usize) -> u64 {
        self.job_degree[job]
    }

    pub fn degree(&self, node: Node) -> u64 {
        match node {
            Node::Worker(w) => self.worker_degree[w],
            Node::Job(j) => self.job_degree[j],
        }
    }

    /// `(job, multiplicity)` pairs of a worker.
    pub fn worker_neighbors(&self, worker: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.worker_adj.neighbors(worker)
    }

    /// `(worker, multiplicity)` pairs of a job.
    pub fn job_neighbors(&self, job: usize) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.job_adj.neighbors(job)
    }

    /// Number of groups actually present (1 or 2).
    pub fn groups_present(&self) -> usize {
        let mut seen = [false; N_GROUPS];
        for &g in &self.worker_group {
            seen[g as usize] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Copy of the network with every worker relabelled to group 0.
    ///
    /// Used to fit the group-blind objective.
    pub fn pooled(&self) -> MatchNetwork {
        let mut net = self.clone();
        net.worker_group.iter_mut().for_each(|g| *g = 0);
        net
    }
}

/// A node on either side of the bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    Worker(usize),
    Job(usize),
}

/// Hard assignment of workers to worker types and jobs to markets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub worker_type: Vec<u32>,
    pub market: Vec<u32>,
    pub n_worker_types: usize,
    pub n_markets: usize,
}

impl Partition {
    /// Validating constructor.
    pub fn new(
        worker_type: Vec<u32>,
        market: Vec<u32>,
        n_worker_types: usize,
        n_markets: usize,
    ) -> Result<Self> {
        let p = Partition { worker_type, market, n_worker_types, n_markets };
        p.validate()?;
        Ok(p)
    }

    /// Everyone in block 0.
    pub fn trivial(n_workers: usize, n_jobs: usize) -> Self {
        Partition {
            worker_type: vec![0; n_workers],
            market: vec![0; n_jobs],
            n_worker_types: 1,
            n_markets: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_worker_types == 0 || self.n_markets == 0 {
            return Err(Error::InvalidParameter(
                "a partition needs at least one worker type and one market".into(),
            ));
        }
        if let Some(&b) = self.worker_type.iter().find(|&&b| b as usize >= self.n_worker_types) {
            return Err(Error::Index(format!(
                "worker type {b} >= n_worker_types {}",
                self.n_worker_types
            )));
        }
        if let Some(&b) = self.market.iter().find(|&&b| b as usize >= self.n_markets) {
            return Err(Error::Index(format!("market {b} >= n_markets {}", self.n_markets)));
        }
        Ok(())
    }

    pub fn check_against(&self, net: &MatchNetwork) -> Result<()> {
        if self.worker_type.len() != net.n_workers() || self.market.len() != net.n_jobs() {
            return Err(Error::Dimension(format!(
                "partition covers {} workers / {} jobs, network has {} / {}",
                self.worker_type.len(),
                self.market.len(),
                net.n_workers(),
                net.n_jobs()
            )));
        }
        self.validate()
    }

    pub fn block_of(&self, node: Node) -> usize {
        match node {
            Node::Worker(w) => self.worker_type[w] as usize,
            Node::Job(j) => self.market[j] as usize,
        }
    }

    pub fn n_blocks(&self, node: Node) -> usize {
        match node {
            Node::Worker(_) => self.n_worker_types,
            Node::Job(_) => self.n_markets,
        }
    }

    /// Relabels blocks so that only non-empty ones remain, preserving label
    /// order. Returns the compacted partition.
    pub fn compacted(&self) -> Partition {
        fn compact(labels: &[u32], n: usize) -> (Vec<u32>, usize) {
            let mut used = vec![false; n];
            for &b in labels {
                used[b as usize] = true;
            }
            let mut map = vec![u32::MAX; n];
            let mut next = 0u32;
            for (b, &u) in used.iter().enumerate() {
                if u {
                    map[b] = next;
                    next += 1;
                }
            }
            let out = labels.iter().map(|&b| map[b as usize]).collect();
            (out, (next as usize).max(1))
        }
        let (worker_type, n_worker_types) = compact(&self.worker_type, self.n_worker_types);
        let (market, n_markets) = compact(&self.market, self.n_markets);
        Partition { worker_type, market, n_worker_types, n_markets }
    }
}

/// Block-level sufficient statistics for a network under a partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStats {
    n_worker_types: usize,
    n_markets: usize,
    n_groups: usize,
    /// m[ι][γ][g], flattened.
    pub(crate) m: Vec<u64>,
    /// K[ι][g] on the worker side.
    pub(crate) k_worker: Vec<u64>,
    /// K[γ][g] on the job side.
    pub(crate) k_job: Vec<u64>,
    /// m[ι][γ] summed over groups.
    pub(crate) m_cell: Vec<u64>,
    pub(crate) workers_in: Vec<usize>,
    pub(crate) jobs_in: Vec<usize>,
    /// Workers with at least one match, per [ι][g].
    pub(crate) active_workers: Vec<u64>,
}

impl BlockStats {
    pub fn n_worker_types(&self) -> usize {
        self.n_worker_types
    }

    pub fn n_markets(&self) -> usize {
        self.n_markets
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    #[inline]
    pub(crate) fn idx(&self, ty: usize, mk: usize, g: usize) -> usize {
        (ty * self.n_markets + mk) * self.n_groups + g
    }

    pub fn m(&self, ty: usize, mk: usize, g: usize) -> u64 {
        self.m[self.idx(ty, mk, g)]
    }

    pub fn k_worker(&self, ty: usize, g: usize) -> u64 {
        self.k_worker[ty * self.n_groups + g]
    }

    pub fn k_job(&self, mk: usize, g: usize) -> u64 {
        self.k_job[mk * self.n_groups + g]
    }

    pub fn m_cell(&self, ty: usize, mk: usize) -> u64 {
        self.m_cell[ty * self.n_markets + mk]
    }

    /// Share of the (ι, γ) match mass coming from group g; 0 for empty cells.
    pub fn alpha(&self, ty: usize, mk: usize, g: usize) -> f64 {
        let cell = self.m_cell(ty, mk);
        if cell == 0 {
            0.0
        } else {
            self.m(ty, mk, g) as f64 / cell as f64
        }
    }

    /// Number of nodes currently in a worker type.
    pub fn workers_in(&self, ty: usize) -> usize {
        self.workers_in[ty]
    }

    pub fn jobs_in(&self, mk: usize) -> usize {
        self.jobs_in[mk]
    }

    /// Number of group-g workers with at least one match in worker type ι.
    pub fn active_workers(&self, ty: usize, g: usize) -> u64 {
        self.active_workers[ty * self.n_groups + g]
    }

    pub fn total(&self) -> u64 {
        self.m.iter().sum()
    }

    /// Raw tensor in `[ι][γ][g]` order.
    pub fn tensor(&self) -> &[u64] {
        &self.m
    }

    /// Moves `node` into block `to`, updating both the statistics and the
    /// partition. The node's current block is read from the partition.
    pub fn move_node(
        &mut self,
        net: &MatchNetwork,
        partition: &mut Partition,
        node: Node,
        to: usize,
    ) -> Result<()> {
        match node {
            Node::Worker(w) => {
                if w >= net.n_workers() {
                    return Err(Error::Index(format!("worker {w} out of range")));
                }
                if to >= self.n_worker_types {
                    return Err(Error::Index(format!("worker type {to} out of range")));
                }
            }
            Node::Job(j) => {
                if j >= net.n_jobs() {
                    return Err(Error::Index(format!("job {j} out of range")));
                }
                if to >= self.n_markets {
                    return Err(Error::Index(format!("market {to} out of range")));
                }
            }
        }
        self.move_unchecked(net, partition, node, to);
        Ok(())
    }

    pub(crate) fn move_unchecked(
        &mut self,
        net: &MatchNetwork,
        partition: &mut Partition,
        node: Node,
        to: usize,
    ) {
        let ng = self.n_groups;
        let nm = self.n_markets;
        match node {
            Node::Worker(w) => {
                let from = partition.worker_type[w] as usize;
                if from == to {
                    return;
                }
                let g = net.group_of(w) as usize;
                for (job, c) in net.worker_neighbors(w) {
                    let mk = partition.market[job] as usize;
                    let c = c as u64;
                    self.m[(from * nm + mk) * ng + g] -= c;
                    self.m[(to * nm + mk) * ng + g] += c;
                    self.m_cell[from * nm + mk] -= c;
                    self.m_cell[to * nm + mk] += c;
                }
                let k = net.worker_degree(w);
                self.k_worker[from * ng + g] -= k;
                self.k_worker[to * ng + g] += k;
                self.workers_in[from] -= 1;
                self.workers_in[to] += 1;
                if k > 0 {
                    self.active_workers[from * ng + g] -= 1;
                    self.active_workers[to * ng + g] += 1;
                }
                partition.worker_type[w] = to as u32;
            }
            Node::Job(j) => {
                let from = partition.market[j] as usize;
                if from == to {
                    return;
                }
                for (worker, c) in net.job_neighbors(j) {
                    let ty = partition.worker_type[worker] as usize;
                    let g = net.group_of(worker) as usize;
                    let c = c as u64;
                    self.m[(ty * nm + from) * ng + g] -= c;
                    self.m[(ty * nm + to) * ng + g] += c;
                    self.m_cell[ty * nm + from] -= c;
                    self.m_cell[ty * nm + to] += c;
                    self.k_job[from * ng + g] -= c;
                    self.k_job[to * ng + g] += c;
                }
                self.jobs_in[from] -= 1;
                self.jobs_in[to] += 1;
                partition.market[j] = to as u32;
            }
        }
    }
}

/// Tallies the block statistics of `net` under `p` in one pass over the edges.
pub fn block_stats(net: &MatchNetwork, p: &Partition) -> Result<BlockStats> {
    p.check_against(net)?;
    let (ni, nm, ng) = (p.n_worker_types, p.n_markets, N_GROUPS);
    let mut stats = BlockStats {
        n_worker_types: ni,
        n_markets: nm,
        n_groups: ng,
        m: vec![0; ni * nm * ng],
        k_worker: vec![0; ni * ng],
        k_job: vec![0; nm * ng],
        m_cell: vec![0; ni * nm],
        workers_in: vec![0; ni],
        jobs_in: vec![0; nm],
        active_workers: vec![0; ni * ng],
    };
    for e in net.edges() {
        let ty = p.worker_type[e.worker as usize] as usize;
        let mk = p.market[e.job as usize] as usize;
        let g = net.group_of(e.worker as usize) as usize;
        let c = e.count as u64;
        stats.m[(ty * nm + mk) * ng + g] += c;
        stats.k_worker[ty * ng + g] += c;
        stats.k_job[mk * ng + g] += c;
        stats.m_cell[ty * nm + mk] += c;
    }
    for (w, &b) in p.worker_type.iter().enumerate() {
        stats.workers_in[b as usize] += 1;
        if net.worker_degree(w) > 0 {
            stats.active_workers[b as usize * ng + net.group_of(w) as usize] += 1;
        }
    }
    for &b in &p.market {
        stats.jobs_in[b as usize] += 1;
    }
    Ok(stats)
}

/// Functional form of [`BlockStats::move_node`]: returns the statistics after
/// moving `node` from `from_block` to `to_block`, leaving the inputs untouched.
pub fn update_stats_on_move(
    stats: &BlockStats,
    net: &MatchNetwork,
    partition: &Partition,
    node: Node,
    from_block: usize,
    to_block: usize,
) -> Result<BlockStats> {
    let current = match node {
        Node::Worker(w) if w < partition.worker_type.len() => partition.worker_type[w] as usize,
        Node::Job(j) if j < partition.market.len() => partition.market[j] as usize,
        _ => return Err(Error::Index(format!("{node:?} out of range"))),
    };
    if current != from_block {
        return Err(Error::InvalidParameter(format!(
            "{node:?} is in block {current}, not {from_block}"
        )));
    }
    let mut out = stats.clone();
    let mut p = partition.clone();
    out.move_node(net, &mut p, node, to_block)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hand_network() -> MatchNetwork {
        // workers 0 (g1), 1 (g0), 2 (g1); jobs 0, 1
        MatchNetwork::new(3, 2, [(0, 0, 2), (0, 1, 1), (1, 0, 1), (2, 1, 3)], vec![1, 0, 1])
            .unwrap()
    }

    #[test]
    fn single_block_tally() {
        let net = MatchNetwork::new(2, 2, [(0, 0, 1), (0, 1, 1), (1, 0, 2)], vec![1, 1]).unwrap();
        let s = block_stats(&net, &Partition::trivial(2, 2)).unwrap();
        assert_eq!(s.m(0, 0, 1), 4);
        assert_eq!(s.alpha(0, 0, 1), 1.0);
        assert_eq!(s.alpha(0, 0, 0), 0.0);
    }

    #[test]
    fn hand_counted_tallies() {
        let net = hand_network();
        // workers {0,1} -> type 0, worker 2 -> type 1; job 0 -> market 0, job 1 -> market 1
        let p = Partition::new(vec![0, 0, 1], vec![0, 1], 2, 2).unwrap();
        let s = block_stats(&net, &p).unwrap();
        // type 0: w0 (g1) has 2 in m0, 1 in m1; w1 (g0) has 1 in m0
        assert_eq!(s.m(0, 0, 1), 2);
        assert_eq!(s.m(0, 1, 1), 1);
        assert_eq!(s.m(0, 0, 0), 1);
        assert_eq!(s.m(0, 1, 0), 0);
        assert_eq!(s.m(1, 1, 1), 3);
        assert_eq!(s.m(1, 0, 1), 0);
        assert_eq!(s.k_worker(0, 1), 3);
        assert_eq!(s.k_worker(0, 0), 1);
        assert_eq!(s.k_job(0, 1), 2);
        assert_eq!(s.k_job(1, 1), 4);
        assert_eq!(s.m_cell(0, 0), 3);
        assert!((s.alpha(0, 0, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.total(), 7);
    }

    #[test]
    fn duplicate_pairs_merge() {
        let net = MatchNetwork::new(1, 1, [(0, 0, 1), (0, 0, 2)], vec![0]).unwrap();
        assert_eq!(net.edges().len(), 1);
        assert_eq!(net.edges()[0].count, 3);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            MatchNetwork::new(1, 1, [(1, 0, 1)], vec![0]),
            Err(Error::Index(_))
        ));
        assert!(MatchNetwork::new(1, 1, [(0, 0, 0)], vec![0]).is_err());
        assert!(matches!(MatchNetwork::new(2, 1, [], vec![0]), Err(Error::Dimension(_))));
        assert!(MatchNetwork::new(1, 1, [], vec![2]).is_err());
        let net = hand_network();
        let bad = Partition::new(vec![0, 0], vec![0, 0], 1, 1).unwrap();
        assert!(matches!(block_stats(&net, &bad), Err(Error::Dimension(_))));
        assert!(Partition::new(vec![0, 2], vec![0], 2, 1).is_err());
    }

    #[test]
    fn move_and_back_is_identity() {
        let net = hand_network();
        let p = Partition::new(vec![0, 0, 1], vec![0, 1], 2, 2).unwrap();
        let s = block_stats(&net, &p).unwrap();
        let moved = update_stats_on_move(&s, &net, &p, Node::Job(0), 0, 1).unwrap();
        assert_ne!(moved, s);
        let mut p2 = p.clone();
        p2.market[0] = 1;
        let back = update_stats_on_move(&moved, &net, &p2, Node::Job(0), 1, 0).unwrap();
        assert_eq!(back, s);
        assert!(update_stats_on_move(&s, &net, &p, Node::Job(0), 1, 0).is_err());
    }

    #[test]
    fn zero_degree_move_touches_only_counters() {
        let net = MatchNetwork::new(2, 1, [(0, 0, 2)], vec![0, 1]).unwrap();
        let mut p = Partition::new(vec![0, 0], vec![0], 2, 1).unwrap();
        let mut s = block_stats(&net, &p).unwrap();
        let before = s.clone();
        s.move_node(&net, &mut p, Node::Worker(1), 1).unwrap();
        assert_eq!(s.m, before.m);
        assert_eq!(s.k_worker, before.k_worker);
        assert_eq!(s.k_job, before.k_job);
        assert_eq!(s.workers_in, vec![1, 1]);
    }

    #[test]
    fn compaction_preserves_order() {
        let p = Partition::new(vec![3, 1, 3], vec![0, 2], 4, 3).unwrap();
        let c = p.compacted();
        assert_eq!(c.worker_type, vec![1, 0, 1]);
        assert_eq!(c.n_worker_types, 2);
        assert_eq!(c.market, vec![0, 1]);
        assert_eq!(c.n_markets, 2);
    }

    fn random_network(rng: &mut ChaCha8Rng, nw: usize, nj: usize, n_edges: usize) -> MatchNetwork {
        let edges: Vec<_> = (0..n_edges)
            .map(|_| (rng.random_range(0..nw), rng.random_range(0..nj), rng.random_range(1..4)))
            .collect();
        let groups = (0..nw).map(|_| rng.random_range(0..2u8)).collect();
        MatchNetwork::new(nw, nj, edges, groups).unwrap()
    }

    #[test]
    fn incremental_matches_recompute_over_many_moves() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = random_network(&mut rng, 100, 50, 400);
        let (ni, nm) = (4, 3);
        let mut p = Partition::new(
            (0..100).map(|_| rng.random_range(0..ni as u32)).collect(),
            (0..50).map(|_| rng.random_range(0..nm as u32)).collect(),
            ni,
            nm,
        )
        .unwrap();
        let mut s = block_stats(&net, &p).unwrap();
        for step in 0..10_000 {
            let node = if rng.random_bool(0.5) {
                Node::Worker(rng.random_range(0..100))
            } else {
                Node::Job(rng.random_range(0..50))
            };
            let to = rng.random_range(0..p.n_blocks(node));
            s.move_node(&net, &mut p, node, to).unwrap();
            if step % 500 == 0 {
                assert_eq!(s, block_stats(&net, &p).unwrap());
            }
        }
        assert_eq!(s, block_stats(&net, &p).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn marginals_sum_to_total(seed in 0u64..10_000, ni in 1usize..5, nm in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = random_network(&mut rng, 12, 9, 30);
            let p = Partition::new(
                (0..12).map(|_| rng.random_range(0..ni as u32)).collect(),
                (0..9).map(|_| rng.random_range(0..nm as u32)).collect(),
                ni, nm,
            ).unwrap();
            let s = block_stats(&net, &p).unwrap();
            let e = net.total_matches();
            proptest::prop_assert_eq!(s.total(), e);
            proptest::prop_assert_eq!(s.k_worker.iter().sum::<u64>(), e);
            proptest::prop_assert_eq!(s.k_job.iter().sum::<u64>(), e);
            proptest::prop_assert_eq!(s.m_cell.iter().sum::<u64>(), e);
            for ty in 0..ni {
                for mk in 0..nm {
                    if s.m_cell(ty, mk) > 0 {
                        let a: f64 = (0..2).map(|g| s.alpha(ty, mk, g)).sum();
                        proptest::prop_assert!((a - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

//! Generative simulator for the monopsonistic Roy model.
//!
//! Workers of type ι and group g search for jobs a Poisson number of times;
//! each search picks a job through a two-stage nested logit (market first, job
//! within the market second) whose utilities are log earnings `log(ψ w)`.
//! Repeated draws of the same job accumulate into the match multiplicity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::decomp::WagePanel;
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, softmax};
use crate::network::{Group, MatchNetwork, Partition, N_GROUPS};

mod params_file;

pub use params_file::{parse_params, write_params};

/// A job: the market it belongs to and its wage per efficiency unit for each
/// group.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub market: usize,
    pub wage: [f64; N_GROUPS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Worker {
    pub worker_type: usize,
    pub group: Group,
    /// Expected number of job searches over the window.
    pub search_rate: f64,
}

/// Primitives of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct RoyParams {
    pub n_worker_types: usize,
    pub n_markets: usize,
    /// Efficiency units ψ[ι][γ].
    pub psi: Vec<Vec<f64>>,
    /// Nest parameters ν[γ][g] in (0, 1].
    pub nu: Vec<[f64; N_GROUPS]>,
    pub jobs: Vec<Job>,
    pub workers: Vec<Worker>,
    /// Standard deviation of a mean-zero normal shock added to each log wage.
    pub wage_noise_sd: f64,
}

impl RoyParams {
    pub fn validate(&self) -> Result<()> {
        let (ni, nm) = (self.n_worker_types, self.n_markets);
        if ni == 0 || nm == 0 {
            return Err(Error::InvalidParameter("need at least one type and one market".into()));
        }
        if self.psi.len() != ni || self.psi.iter().any(|row| row.len() != nm) {
            return Err(Error::Dimension(format!("psi must be {ni}x{nm}")));
        }
        if self.psi.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("psi entries must be positive and finite".into()));
        }
        if self.nu.len() != nm {
            return Err(Error::Dimension(format!("nu must have {nm} rows")));
        }
        if self.nu.iter().flatten().any(|&v| !(v > 0.0 && v <= 1.0)) {
            return Err(Error::InvalidParameter("nu entries must lie in (0, 1]".into()));
        }
        for (j, job) in self.jobs.iter().enumerate() {
            if job.market >= nm {
                return Err(Error::Index(format!("job {j} market {} >= {nm}", job.market)));
            }
            if job.wage.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
                return Err(Error::InvalidParameter(format!("job {j} has a non-positive wage")));
            }
        }
        for (i, w) in self.workers.iter().enumerate() {
            if w.worker_type >= ni {
                return Err(Error::Index(format!("worker {i} type {} >= {ni}", w.worker_type)));
            }
            if w.group as usize >= N_GROUPS {
                return Err(Error::InvalidParameter(format!("worker {i} group {}", w.group)));
            }
            if !(w.search_rate >= 0.0 && w.search_rate.is_finite()) {
                return Err(Error::InvalidParameter(format!("worker {i} search rate")));
            }
        }
        if !(self.wage_noise_sd >= 0.0 && self.wage_noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("wage_noise_sd must be >= 0".into()));
        }
        Ok(())
    }

    /// Jobs grouped by market, in job order.
    pub fn jobs_by_market(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_markets];
        for (j, job) in self.jobs.iter().enumerate() {
            out[job.market].push(j);
        }
        out
    }

    /// The planted worker-type / market assignment.
    pub fn truth_partition(&self) -> Partition {
        Partition {
            worker_type: self.workers.iter().map(|w| w.worker_type as u32).collect(),
            market: self.jobs.iter().map(|j| j.market as u32).collect(),
            n_worker_types: self.n_worker_types,
            n_markets: self.n_markets,
        }
    }

    /// Planted scenario with distinct type and market profiles.
    ///
    /// Workers are dealt round-robin to types and alternate between groups;
    /// jobs are dealt round-robin to markets with unit wages. ψ is `high` on the
    /// preferred cells of [`planted_psi`] and `low` elsewhere; ν is 1.
    pub fn planted(
        n_worker_types: usize,
        n_markets: usize,
        n_workers: usize,
        n_jobs: usize,
        high: f64,
        low: f64,
        search_rate: f64,
    ) -> RoyParams {
        RoyParams {
            n_worker_types,
            n_markets,
            psi: planted_psi(n_worker_types, n_markets, high, low),
            nu: vec![[1.0; N_GROUPS]; n_markets],
            jobs: (0..n_jobs).map(|j| Job { market: j % n_markets, wage: [1.0; N_GROUPS] }).collect(),
            workers: (0..n_workers)
                .map(|i| Worker {
                    worker_type: i % n_worker_types,
                    group: ((i / n_worker_types) % 2) as Group,
                    search_rate,
                })
                .collect(),
            wage_noise_sd: 0.0,
        }
    }
}

/// ψ matrix whose rows and columns are pairwise distinct.
///
/// Type ι prefers market ι. When there are more markets than types, market
/// `γ >= I` is preferred by types `γ - I` and `γ - I + 1 (mod I)`; the case with
/// more types than markets is symmetric.
pub fn planted_psi(n_types: usize, n_markets: usize, high: f64, low: f64) -> Vec<Vec<f64>> {
    let mut psi = vec![vec![low; n_markets]; n_types];
    for (ty, row) in psi.iter_mut().enumerate() {
        for (mk, v) in row.iter_mut().enumerate() {
            let preferred = if ty < n_markets && mk < n_types {
                ty == mk
            } else if mk >= n_types {
                let base = mk - n_types;
                ty == base % n_types || ty == (base + 1) % n_types
            } else {
                let base = ty - n_markets;
                mk == base % n_markets || mk == (base + 1) % n_markets
            };
            if preferred {
                *v = high;
            }
        }
    }
    psi
}

/// Wage paid under monopsony: the markdown `e / (1 + e)` times the marginal
/// revenue product `μ_f · MPL`.
pub fn markdown_wage(elasticity: f64, marginal_product: f64, shadow_value: f64) -> Result<f64> {
    if !elasticity.is_finite() || elasticity < 0.0 {
        return Err(Error::InvalidParameter(format!("elasticity {elasticity}")));
    }
    if !marginal_product.is_finite() || marginal_product <= 0.0 {
        return Err(Error::InvalidParameter(format!("marginal product {marginal_product}")));
    }
    if !shadow_value.is_finite() || shadow_value <= 0.0 {
        return Err(Error::InvalidParameter(format!("shadow value {shadow_value}")));
    }
    Ok(elasticity / (1.0 + elasticity) * shadow_value * marginal_product)
}

fn log_utility_scaled(params: &RoyParams, ty: usize, mk: usize, g: usize, j: usize) -> f64 {
    (params.psi[ty][mk].ln() + params.jobs[j].wage[g].ln()) / params.nu[mk][g]
}

/// Inclusive value `log Σ_{j∈γ} (ψ_ιγ w_j^g)^{1/ν_γ^g}`.
pub fn inclusive_value(params: &RoyParams, ty: usize, mk: usize, g: Group) -> Result<f64> {
    check_indices(params, ty, mk, g)?;
    let g = g as usize;
    let terms: Vec<f64> = params
        .jobs
        .iter()
        .enumerate()
        .filter(|(_, job)| job.market == mk)
        .map(|(j, _)| log_utility_scaled(params, ty, mk, g, j))
        .collect();
    if terms.is_empty() {
        return Err(Error::Empty(format!("market {mk} has no jobs")));
    }
    Ok(log_sum_exp(&terms))
}

fn check_indices(params: &RoyParams, ty: usize, mk: usize, g: Group) -> Result<()> {
    if ty >= params.n_worker_types {
        return Err(Error::Index(format!("worker type {ty}")));
    }
    if mk >= params.n_markets {
        return Err(Error::Index(format!("market {mk}")));
    }
    if g as usize >= N_GROUPS {
        return Err(Error::Index(format!("group {g}")));
    }
    Ok(())
}

/// Job-choice probabilities of a type-ι, group-g worker.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDistribution {
    pub worker_type: usize,
    pub group: Group,
    /// First stage: probability of each market.
    pub market_probs: Vec<f64>,
    /// Job indices of each market, aligned with `job_probs_within_market`.
    pub market_jobs: Vec<Vec<usize>>,
    /// Second stage: probability of each job given its market.
    pub job_probs_within_market: Vec<Vec<f64>>,
    /// Inclusive value per market.
    pub inclusive_value: Vec<f64>,
    /// `log Ω[γ]`, the type-market-group factor of the job probability.
    pub log_omega: Vec<f64>,
    /// `log d[j] = log(w_j^g) / ν`, indexed by job.
    pub log_d_job: Vec<f64>,
}

impl ChoiceDistribution {
    pub fn omega(&self, mk: usize) -> f64 {
        self.log_omega[mk].exp()
    }

    pub fn d_job(&self, j: usize) -> f64 {
        self.log_d_job[j].exp()
    }

    /// Unconditional probability of each job, indexed by job.
    pub fn job_probs(&self) -> Vec<f64> {
        let n = self.log_d_job.len();
        let mut out = vec![0.0; n];
        for (mk, jobs) in self.market_jobs.iter().enumerate() {
            for (pos, &j) in jobs.iter().enumerate() {
                out[j] = self.market_probs[mk] * self.job_probs_within_market[mk][pos];
            }
        }
        out
    }
}

/// Nested-logit choice distribution for worker type `ty` and group `g`.
///
/// Computed in log space: the market weights are `ν_γ I_γ` and the within
/// market weights `log(ψ w) / ν_γ`, each normalized by log-sum-exp.
pub fn choice_distribution(params: &RoyParams, ty: usize, g: Group) -> Result<ChoiceDistribution> {
    check_indices(params, ty, 0, g)?;
    let gi = g as usize;
    let market_jobs = params.jobs_by_market();
    if let Some(mk) = market_jobs.iter().position(|js| js.is_empty()) {
        return Err(Error::Empty(format!("market {mk} has no jobs")));
    }
    let mut iv = Vec::with_capacity(params.n_markets);
    let mut within = Vec::with_capacity(params.n_markets);
    for (mk, jobs) in market_jobs.iter().enumerate() {
        let terms: Vec<f64> =
            jobs.iter().map(|&j| log_utility_scaled(params, ty, mk, gi, j)).collect();
        iv.push(log_sum_exp(&terms));
        within.push(softmax(&terms));
    }
    let first: Vec<f64> = iv.iter().enumerate().map(|(mk, &i)| params.nu[mk][gi] * i).collect();
    let denom = log_sum_exp(&first);
    let market_probs = softmax(&first);
    let log_omega = (0..params.n_markets)
        .map(|mk| {
            let nu = params.nu[mk][gi];
            (nu - 1.0) * iv[mk] - denom + params.psi[ty][mk].ln() / nu
        })
        .collect();
    let log_d_job = params
        .jobs
        .iter()
        .map(|job| job.wage[gi].ln() / params.nu[job.market][gi])
        .collect();
    Ok(ChoiceDistribution {
        worker_type: ty,
        group: g,
        market_probs,
        market_jobs,
        job_probs_within_market: within,
        inclusive_value: iv,
        log_omega,
        log_d_job,
    })
}

/// Cumulative sampling tables for one (type, group) pair.
struct Sampler {
    market_cdf: Vec<f64>,
    job_cdf: Vec<Vec<f64>>,
    market_jobs: Vec<Vec<usize>>,
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .iter()
        .map(|&x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

impl Sampler {
    fn new(dist: &ChoiceDistribution) -> Self {
        Sampler {
            market_cdf: cumulative(&dist.market_probs),
            job_cdf: dist.job_probs_within_market.iter().map(|p| cumulative(p)).collect(),
            market_jobs: dist.market_jobs.clone(),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> (usize, usize) {
        let mk = draw(&self.market_cdf, rng.random::<f64>());
        let pos = draw(&self.job_cdf[mk], rng.random::<f64>());
        (mk, self.market_jobs[mk][pos])
    }
}

/// Result of one simulation run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub network: MatchNetwork,
    pub panel: WagePanel,
    pub truth: Partition,
}

/// Simulates the match network and wage panel.
///
/// Each worker draws a search count `c ~ Poisson(d)` and then `c` jobs from
/// its full choice distribution. One panel row is emitted per match with log
/// wage `log ψ + log w + noise`. Every worker uses its own RNG stream derived
/// from `seed`, so the output does not depend on the thread count.
pub fn simulate_network(params: &RoyParams, seed: u64) -> Result<Simulation> {
    params.validate()?;
    let mut samplers = Vec::with_capacity(params.n_worker_types * N_GROUPS);
    for ty in 0..params.n_worker_types {
        for g in 0..N_GROUPS {
            samplers.push(Sampler::new(&choice_distribution(params, ty, g as Group)?));
        }
    }
    let noise = if params.wage_noise_sd > 0.0 {
        Some(Normal::new(0.0, params.wage_noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };

    let draws: Vec<Vec<(usize, f64)>> = params
        .workers
        .par_iter()
        .enumerate()
        .map(|(i, worker)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let searches = if worker.search_rate > 0.0 {
                Poisson::new(worker.search_rate).expect("validated rate").sample(&mut rng) as u64
            } else {
                0
            };
            let sampler = &samplers[worker.worker_type * N_GROUPS + worker.group as usize];
            (0..searches)
                .map(|_| {
                    let (mk, j) = sampler.sample(&mut rng);
                    let mut lw = params.psi[worker.worker_type][mk].ln()
                        + params.jobs[j].wage[worker.group as usize].ln();
                    if let Some(n) = &noise {
                        lw += n.sample(&mut rng);
                    }
                    (j, lw)
                })
                .collect()
        })
        .collect();

    let mut panel = WagePanel::new(Vec::new());
    let mut edges = Vec::new();
    for (i, worker_draws) in draws.iter().enumerate() {
        for &(j, lw) in worker_draws {
            edges.push((i, j, 1u32));
            panel.push(i, j, params.workers[i].group, lw, &[])?;
        }
    }
    let groups = params.workers.iter().map(|w| w.group).collect();
    let network = MatchNetwork::new(params.workers.len(), params.jobs.len(), edges, groups)?;
    Ok(Simulation { network, panel, truth: params.truth_partition() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(nu: f64, wages: &[(usize, f64)]) -> RoyParams {
        RoyParams {
            n_worker_types: 1,
            n_markets: 2,
            psi: vec![vec![1.0, 1.0]],
            nu: vec![[nu; 2]; 2],
            jobs: wages.iter().map(|&(m, w)| Job { market: m, wage: [w, w] }).collect(),
            workers: vec![Worker { worker_type: 0, group: 0, search_rate: 1.0 }],
            wage_noise_sd: 0.0,
        }
    }

    #[test]
    fn markdown_examples() {
        assert_eq!(markdown_wage(1.0, 10.0, 1.0).unwrap(), 5.0);
        assert!((markdown_wage(1e9, 10.0, 1.0).unwrap() - 10.0).abs() < 1e-7);
        assert!(markdown_wage(0.5, 10.0, 1.0).unwrap() < markdown_wage(2.0, 10.0, 1.0).unwrap());
        assert_eq!(markdown_wage(0.0, 10.0, 1.0).unwrap(), 0.0);
        assert!(markdown_wage(-1.0, 10.0, 1.0).is_err());
        assert!(markdown_wage(1.0, f64::NAN, 1.0).is_err());
        assert!(markdown_wage(1.0, 10.0, 0.0).is_err());
    }

    #[test]
    fn inclusive_value_examples() {
        let p = small(1.0, &[(0, 1.0), (1, 1.0), (1, 1.0)]);
        assert!(inclusive_value(&p, 0, 0, 0).unwrap().abs() < 1e-15);
        assert!((inclusive_value(&p, 0, 1, 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let p = small(0.37, &[(0, 1.0), (1, 1.0), (1, 1.0)]);
        assert!((inclusive_value(&p, 0, 1, 0).unwrap() - 2f64.ln()).abs() < 1e-14);

        // ψ = 2, w = {1, 3}, ν = 0.5: (2·1)² + (2·3)² = 40
        let mut p = small(0.5, &[(0, 1.0), (0, 3.0), (1, 1.0)]);
        p.psi = vec![vec![2.0, 1.0]];
        assert!((inclusive_value(&p, 0, 0, 0).unwrap() - 40f64.ln()).abs() < 1e-13);

        let empty = small(1.0, &[(0, 1.0)]);
        assert!(matches!(inclusive_value(&empty, 0, 1, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn degenerate_and_symmetric_choices() {
        let mut p = small(1.0, &[(0, 1.0)]);
        p.n_markets = 1;
        p.psi = vec![vec![1.0]];
        p.nu = vec![[1.0; 2]];
        let d = choice_distribution(&p, 0, 0).unwrap();
        assert_eq!(d.job_probs(), vec![1.0]);

        let p = small(1.0, &[(0, 1.0), (1, 1.0)]);
        let d = choice_distribution(&p, 0, 0).unwrap();
        assert!((d.market_probs[0] - 0.5).abs() < 1e-15);
        assert!((d.market_probs[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn factorization_and_normalization() {
        let mut p = small(0.3, &[(0, 1.0), (0, 2.5), (1, 0.7), (1, 1.9), (1, 4.0)]);
        p.nu = vec![[0.3, 0.8], [0.55, 1.0]];
        p.psi = vec![vec![1.7, 0.4]];
        for g in 0..2u8 {
            let d = choice_distribution(&p, 0, g).unwrap();
            let probs = d.job_probs();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((d.market_probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for w in &d.job_probs_within_market {
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for (j, job) in p.jobs.iter().enumerate() {
                let fact = d.omega(job.market) * d.d_job(j);
                assert!((fact - probs[j]).abs() < 1e-12, "{fact} vs {}", probs[j]);
            }
        }
    }

    #[test]
    fn small_nu_does_not_overflow() {
        let mut p = small(0.01, &[(0, 50.0), (0, 60.0), (1, 55.0)]);
        p.psi = vec![vec![30.0, 40.0]];
        let d = choice_distribution(&p, 0, 0).unwrap();
        assert!(d.job_probs().iter().all(|x| x.is_finite()));
        assert!((d.job_probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_wages_in_one_market() {
        let base = small(0.6, &[(0, 1.0), (0, 2.0), (1, 1.5), (1, 3.0)]);
        let mut scaled = base.clone();
        for job in scaled.jobs.iter_mut().filter(|j| j.market == 1) {
            job.wage = [job.wage[0] * 2.0, job.wage[1] * 2.0];
        }
        let a = choice_distribution(&base, 0, 0).unwrap();
        let b = choice_distribution(&scaled, 0, 0).unwrap();
        for mk in 0..2 {
            for (x, y) in a.job_probs_within_market[mk].iter().zip(&b.job_probs_within_market[mk]) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        assert!(b.market_probs[1] > a.market_probs[1]);
    }

    #[test]
    fn zero_search_rate_gives_empty_network() {
        let mut p = small(1.0, &[(0, 1.0), (1, 1.0)]);
        p.workers[0].search_rate = 0.0;
        let sim = simulate_network(&p, 3).unwrap();
        assert_eq!(sim.network.total_matches(), 0);
        assert!(sim.panel.is_empty());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let mut p = RoyParams::planted(2, 2, 200, 20, 5.0, 1.0, 3.0);
        p.wage_noise_sd = 0.2;
        let a = simulate_network(&p, 11).unwrap();
        let b = simulate_network(&p, 11).unwrap();
        assert_eq!(a.network.edges(), b.network.edges());
        assert_eq!(a.panel, b.panel);
        let c = simulate_network(&p, 12).unwrap();
        assert_ne!(a.network.edges(), c.network.edges());
    }

    #[test]
    fn panel_wage_follows_law_of_one_price() {
        let mut p = RoyParams::planted(2, 2, 50, 6, 3.0, 1.5, 2.0);
        p.jobs[1].wage = [0.5, 2.0];
        let sim = simulate_network(&p, 5).unwrap();
        for row in &sim.panel.rows {
            let ty = p.workers[row.worker].worker_type;
            let mk = p.jobs[row.job].market;
            let expect = p.psi[ty][mk].ln() + p.jobs[row.job].wage[row.group as usize].ln();
            assert!((row.log_wage - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn planted_psi_profiles_are_distinct() {
        for (ni, nm) in [(3, 4), (4, 3), (5, 5), (1, 3), (3, 5)] {
            let psi = planted_psi(ni, nm, 10.0, 1.0);
            for a in 0..ni {
                for b in a + 1..ni {
                    assert_ne!(psi[a], psi[b], "rows {a} {b} for ({ni},{nm})");
                }
            }
            if ni > 1 {
                for a in 0..nm {
                    for b in a + 1..nm {
                        let ca: Vec<_> = psi.iter().map(|r| r[a]).collect();
                        let cb: Vec<_> = psi.iter().map(|r| r[b]).collect();
                        assert_ne!(ca, cb, "cols {a} {b} for ({ni},{nm})");
                    }
                }
            }
        }
    }

    #[test]
    fn validation_rejects_bad_params() {
        let mut p = small(1.0, &[(0, 1.0), (1, 1.0)]);
        p.nu[0][1] = 1.5;
        assert!(p.validate().is_err());
        let mut p = small(1.0, &[(0, 1.0), (1, 1.0)]);
        p.psi[0][0] = 0.0;
        assert!(p.validate().is_err());
        let mut p = small(1.0, &[(0, 1.0), (1, 1.0)]);
        p.jobs[0].market = 7;
        assert!(p.validate().is_err());
    }
}

//! Python bindings for the `netgap` library.
//!
//! Networks cross the boundary as `(n_workers, n_jobs, edges, groups)` with
//! edges as `(worker, job, count)` triples; panels as parallel lists.

use netgap::decomp::{matching_decompose, ob_decompose, CellDefinition, DecompResult, Direction, WagePanel};
use netgap::roygen::{parse_params, simulate_network};
use netgap::sbm::{adjusted_rand_index, fit, AlphaTerm, McmcConfig};
use netgap::{MatchNetwork, Partition};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: netgap::Error) -> PyErr {
    match e.exit_code() {
        3 => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

pub type Edges = Vec<(usize, usize, u32)>;

/// Simulated network, panel columns and planted labels.
pub struct Simulated {
    pub n_workers: usize,
    pub n_jobs: usize,
    pub edges: Edges,
    pub groups: Vec<u8>,
    pub rows: Vec<(usize, usize, u8, f64)>,
    pub worker_type: Vec<u32>,
    pub market: Vec<u32>,
}

pub fn simulate_impl(params: &str, seed: u64) -> netgap::Result<Simulated> {
    let sim = simulate_network(&parse_params(params)?, seed)?;
    let net = &sim.network;
    Ok(Simulated {
        n_workers: net.n_workers(),
        n_jobs: net.n_jobs(),
        edges: net.edges().iter().map(|e| (e.worker as usize, e.job as usize, e.count)).collect(),
        groups: net.worker_group().to_vec(),
        rows: sim.panel.rows.iter().map(|r| (r.worker, r.job, r.group, r.log_wage)).collect(),
        worker_type: sim.truth.worker_type,
        market: sim.truth.market,
    })
}

pub struct Fitted {
    pub worker_type: Vec<u32>,
    pub market: Vec<u32>,
    pub log_lik: f64,
    pub description_length: f64,
    pub n_worker_types: usize,
    pub n_markets: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn fit_impl(
    n_workers: usize,
    n_jobs: usize,
    edges: Edges,
    groups: Vec<u8>,
    worker_types: usize,
    markets: usize,
    config: McmcConfig,
) -> netgap::Result<Fitted> {
    let net = MatchNetwork::new(n_workers, n_jobs, edges, groups)?;
    let f = fit(&net, worker_types, markets, &config)?;
    Ok(Fitted {
        worker_type: f.partition.worker_type,
        market: f.partition.market,
        log_lik: f.objective.log_lik,
        description_length: f.objective.description_length,
        n_worker_types: f.objective.n_worker_types,
        n_markets: f.objective.n_markets,
    })
}

/// Panel from parallel columns; `cells` is a single categorical covariate.
pub fn panel_from(group: &[u8], log_wage: &[f64], cells: &[String]) -> netgap::Result<WagePanel> {
    if group.len() != log_wage.len() || group.len() != cells.len() {
        return Err(netgap::Error::Dimension("columns differ in length".into()));
    }
    let mut p = WagePanel::new(vec!["cell".into()]);
    for (i, ((&g, &w), c)) in group.iter().zip(log_wage).zip(cells).enumerate() {
        p.push(i, 0, g, w, &[c])?;
    }
    Ok(p)
}

fn result_dict<'py>(py: Python<'py>, r: &DecompResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("method", if r.method == netgap::decomp::Method::Ob { "ob" } else { "matching" })?;
    d.set_item("gap", r.gap)?;
    d.set_item("composition", r.composition)?;
    d.set_item("structural", r.structural)?;
    d.set_item("males_unmatched", r.males_unmatched)?;
    d.set_item("females_unmatched", r.females_unmatched)?;
    d.set_item("frac_males_matched", r.frac_males_matched)?;
    d.set_item("frac_females_matched", r.frac_females_matched)?;
    d.set_item("n_male", r.n_male)?;
    d.set_item("n_female", r.n_female)?;
    Ok(d)
}

/// simulate(params, seed=0) -> dict
///
/// `params` is the text of a parameter file.
#[pyfunction]
#[pyo3(name = "simulate", signature = (params, seed = 0))]
fn py_simulate<'py>(py: Python<'py>, params: &str, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let s = simulate_impl(params, seed).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("n_workers", s.n_workers)?;
    d.set_item("n_jobs", s.n_jobs)?;
    d.set_item("edges", s.edges)?;
    d.set_item("groups", s.groups)?;
    d.set_item("worker", s.rows.iter().map(|r| r.0).collect::<Vec<_>>())?;
    d.set_item("job", s.rows.iter().map(|r| r.1).collect::<Vec<_>>())?;
    d.set_item("group", s.rows.iter().map(|r| r.2).collect::<Vec<_>>())?;
    d.set_item("log_wage", s.rows.iter().map(|r| r.3).collect::<Vec<_>>())?;
    d.set_item("worker_type", s.worker_type)?;
    d.set_item("market", s.market)?;
    Ok(d)
}

/// fit(n_workers, n_jobs, edges, groups, worker_types, markets, sweeps=1000,
/// restarts=10, seed=0, pooled=False, per_worker_alpha=False) -> dict
#[pyfunction]
#[pyo3(
    name = "fit",
    signature = (n_workers, n_jobs, edges, groups, worker_types, markets, sweeps = 1000,
                 restarts = 10, seed = 0, pooled = false, per_worker_alpha = false)
)]
#[allow(clippy::too_many_arguments)]
fn py_fit<'py>(
    py: Python<'py>,
    n_workers: usize,
    n_jobs: usize,
    edges: Edges,
    groups: Vec<u8>,
    worker_types: usize,
    markets: usize,
    sweeps: usize,
    restarts: usize,
    seed: u64,
    pooled: bool,
    per_worker_alpha: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let config = McmcConfig {
        sweeps,
        restarts,
        seed,
        pool_groups: pooled,
        alpha: if per_worker_alpha { AlphaTerm::PerWorker } else { AlphaTerm::PerMatch },
        ..Default::default()
    };
    let f = py
        .detach(|| fit_impl(n_workers, n_jobs, edges, groups, worker_types, markets, config))
        .map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("worker_type", f.worker_type)?;
    d.set_item("market", f.market)?;
    d.set_item("log_lik", f.log_lik)?;
    d.set_item("description_length", f.description_length)?;
    d.set_item("I", f.n_worker_types)?;
    d.set_item("Gamma", f.n_markets)?;
    Ok(d)
}

/// Exact-matching decomposition with `cells` as the matching key.
#[pyfunction]
#[pyo3(name = "matching_decompose")]
fn py_matching<'py>(
    py: Python<'py>,
    group: Vec<u8>,
    log_wage: Vec<f64>,
    cells: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = panel_from(&group, &log_wage, &cells).map_err(py_err)?;
    let r = matching_decompose(&p, CellDefinition::Covariates).map_err(py_err)?;
    result_dict(py, &r)
}

/// Oaxaca-Blinder decomposition on cell dummies.
#[pyfunction]
#[pyo3(name = "ob_decompose", signature = (group, log_wage, cells, male_counterfactual = false))]
fn py_ob<'py>(
    py: Python<'py>,
    group: Vec<u8>,
    log_wage: Vec<f64>,
    cells: Vec<String>,
    male_counterfactual: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let p = panel_from(&group, &log_wage, &cells).map_err(py_err)?;
    let dir = if male_counterfactual { Direction::MaleCounterfactual } else { Direction::FemaleCounterfactual };
    let r = ob_decompose(&p, CellDefinition::Covariates, dir).map_err(py_err)?;
    result_dict(py, &r)
}

#[pyfunction]
#[pyo3(name = "adjusted_rand_index")]
fn py_ari(a: Vec<u32>, b: Vec<u32>) -> PyResult<f64> {
    adjusted_rand_index(&a, &b).map_err(py_err)
}

/// Checks a partition against a network; returns the effective block counts.
#[pyfunction]
#[pyo3(name = "block_counts")]
fn py_block_counts(worker_type: Vec<u32>, market: Vec<u32>) -> PyResult<(usize, usize)> {
    let ni = worker_type.iter().max().map_or(1, |&m| m as usize + 1);
    let nm = market.iter().max().map_or(1, |&m| m as usize + 1);
    let p = Partition::new(worker_type, market, ni, nm).map_err(py_err)?.compacted();
    Ok((p.n_worker_types, p.n_markets))
}

#[pymodule]
#[pyo3(name = "netgap")]
fn netgap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(py_simulate, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit, m)?)?;
    m.add_function(wrap_pyfunction!(py_matching, m)?)?;
    m.add_function(wrap_pyfunction!(py_ob, m)?)?;
    m.add_function(wrap_pyfunction!(py_ari, m)?)?;
    m.add_function(wrap_pyfunction!(py_block_counts, m)?)?;
    Ok(())
}

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{
    parse_grid, parse_range, sidecar, AlphaArg, CellsArg, CellsArgs, ClusterArgs, DecomposeArgs,
    DirectionArg, InputArgs, MethodArg, SimulateArgs,
};
use crate::decomp::{
    matching_decompose, ob_decompose, per_cell_decompose, summarize_cells, CellDefinition,
    CellOptions, Direction, MALE,
};
use crate::error::{Error, Result};
use crate::ingest::{load_panel, read_partition, write_partition, IdMaps, IngestReport, LoadedPanel, PanelSchema};
use crate::roygen::{parse_params, simulate_network};
use crate::sbm::{fit, select_model, soft_profiles, AlphaTerm, GridPoint, McmcConfig, ProfileConfig};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_bytes(path, s.as_bytes())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn load(args: &InputArgs) -> Result<LoadedPanel> {
    let mut schema: PanelSchema = match &args.schema {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => PanelSchema::default(),
    };
    for c in &args.covariates {
        if !schema.covariates.contains(c) {
            schema.covariates.push(c.clone());
        }
    }
    if args.age_column.is_some() {
        schema.age = args.age_column.clone();
    }
    schema.skip_malformed |= args.skip_malformed;
    let schema = schema.with_default_bins();
    let loaded = load_panel(&args.input, &schema)?;
    for w in &loaded.report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded)
}

#[derive(Serialize)]
struct SimulateMeta {
    command: &'static str,
    seed: u64,
    n_workers: usize,
    n_jobs: usize,
    n_matches: u64,
    n_rows: usize,
    worker_types: usize,
    markets: usize,
    wage_noise_sd: f64,
    year_rule: &'static str,
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let params = parse_params(&read_text(&a.params)?)?;
    let sim = simulate_network(&params, a.seed)?;

    let edges = sim.network.edges().iter().map(|e| {
        vec![e.worker.to_string(), e.job.to_string(), "0".to_string(), e.count.to_string()]
    });
    let bytes = csv_bytes(&["worker_id", "establishment_id", "occupation_code", "matches"], edges)?;
    write_bytes(&a.out_network, &bytes)?;

    // repeated draws of a job land two years apart, so each is its own spell
    let mut seen: HashMap<(usize, usize), u32> = HashMap::new();
    let rows = sim.panel.rows.iter().map(|r| {
        let k = seen.entry((r.worker, r.job)).or_default();
        let year = 2 * *k;
        *k += 1;
        vec![
            r.worker.to_string(),
            r.job.to_string(),
            "0".to_string(),
            year.to_string(),
            format!("{:?}", r.log_wage),
            if r.group == MALE { "M" } else { "F" }.to_string(),
        ]
    });
    let header = ["worker_id", "establishment_id", "occupation_code", "year", "log_wage", "gender"];
    write_bytes(&a.out_panel, &csv_bytes(&header, rows)?)?;

    let ids = IdMaps::from_ids(
        (0..params.workers.len()).map(|i| i.to_string()).collect(),
        (0..params.jobs.len()).map(|j| (j.to_string(), "0".to_string())).collect(),
    );
    let mut buf = Vec::new();
    write_partition(&sim.truth, &ids, &mut buf)?;
    write_bytes(&a.out_truth, &buf)?;

    write_json(
        &sidecar(&a.meta, &a.out_panel, ".meta.json"),
        &SimulateMeta {
            command: "simulate",
            seed: a.seed,
            n_workers: sim.network.n_workers(),
            n_jobs: sim.network.n_jobs(),
            n_matches: sim.network.total_matches(),
            n_rows: sim.panel.len(),
            worker_types: params.n_worker_types,
            markets: params.n_markets,
            wage_noise_sd: params.wage_noise_sd,
            year_rule: "k-th draw of a worker-job pair is written at year 2k",
        },
    )
}

/// Objective report of the selected partition.
#[derive(Serialize)]
struct ClusterReport {
    log_lik: f64,
    description_length: f64,
    penalty_label: f64,
    penalty_blocks: f64,
    #[serde(rename = "I")]
    worker_types: usize,
    #[serde(rename = "Gamma")]
    markets: usize,
    seed: u64,
    sweeps: usize,
}

#[derive(Serialize)]
struct ClusterMeta<'a> {
    command: &'static str,
    mcmc: &'a McmcConfig,
    requested_worker_types: usize,
    requested_markets: usize,
    best_restart: usize,
    grid: Vec<GridPoint>,
    profiles: Option<&'a ProfileConfig>,
    ingest: &'a IngestReport,
}

pub fn cluster(a: &ClusterArgs) -> Result<()> {
    let (types, markets) = match (&a.grid, &a.worker_types, &a.markets) {
        (Some(g), _, _) => parse_grid(g)?,
        (None, Some(w), Some(m)) => (parse_range(w)?, parse_range(m)?),
        _ => return Err(Error::Usage("give --worker-types and --markets, or --grid".into())),
    };
    let cfg = McmcConfig {
        sweeps: a.sweeps,
        restarts: a.restarts,
        beta_start: a.beta_start,
        beta_end: a.beta_end,
        epsilon: a.epsilon,
        seed: a.seed,
        pool_groups: a.pooled,
        alpha: match a.alpha {
            AlphaArg::PerMatch => AlphaTerm::PerMatch,
            AlphaArg::PerWorker => AlphaTerm::PerWorker,
        },
    };
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let data = load(&a.input)?;
    let net = &data.network;

    let (best, grid) = if types.len() == 1 && markets.len() == 1 {
        let f = fit(net, types[0], markets[0], &cfg)?;
        let point = GridPoint {
            requested_worker_types: types[0],
            requested_markets: markets[0],
            objective: f.objective,
        };
        (f, vec![point])
    } else {
        let s = select_model(net, &types, &markets, &cfg)?;
        (s.best, s.grid)
    };
    let (req_i, req_g) = (best.raw_partition.n_worker_types, best.raw_partition.n_markets);

    let mut buf = Vec::new();
    write_partition(&best.partition, &data.ids, &mut buf)?;
    write_bytes(&a.out, &buf)?;
    let o = &best.objective;
    write_json(
        &sidecar(&a.report, &a.out, ".report.json"),
        &ClusterReport {
            log_lik: o.log_lik,
            description_length: o.description_length,
            penalty_label: o.penalty_label,
            penalty_blocks: o.penalty_blocks,
            worker_types: o.n_worker_types,
            markets: o.n_markets,
            seed: cfg.seed,
            sweeps: cfg.sweeps,
        },
    )?;

    let profile_cfg = ProfileConfig { mcmc: cfg.clone(), burn_in: a.burn_in, samples: a.samples, thin: a.thin };
    if let Some(path) = &a.soft {
        let prof = soft_profiles(net, req_i, req_g, &profile_cfg)?;
        let width = prof.worker.iter().chain(&prof.job).map(Vec::len).max().unwrap_or(0);
        let mut header = vec!["node_kind".to_string(), "node_id".to_string()];
        header.extend((0..width).map(|k| format!("p_{k}")));
        let row = |kind: &str, id: String, probs: &[f64]| {
            let mut r = vec![kind.to_string(), id];
            r.extend((0..width).map(|k| format!("{:?}", probs.get(k).copied().unwrap_or(0.0))));
            r
        };
        let rows = prof
            .worker
            .iter()
            .enumerate()
            .map(|(i, p)| row("worker", data.ids.workers[i].clone(), p))
            .chain(prof.job.iter().enumerate().map(|(j, p)| row("job", data.ids.job_label(j), p)));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_bytes(path, &csv_bytes(&header, rows)?)?;
    }

    write_json(
        &sidecar(&a.meta, &a.out, ".meta.json"),
        &ClusterMeta {
            command: "cluster",
            mcmc: &cfg,
            requested_worker_types: req_i,
            requested_markets: req_g,
            best_restart: best.restart,
            grid,
            profiles: a.soft.as_ref().map(|_| &profile_cfg),
            ingest: &data.report,
        },
    )
}

fn partition_for(path: &Option<std::path::PathBuf>, ids: &IdMaps) -> Result<Option<crate::Partition>> {
    match path {
        Some(p) => Ok(Some(read_partition(read_text(p)?.as_bytes(), ids)?)),
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct DecomposeMeta<'a> {
    command: &'static str,
    method: &'static str,
    cells: &'static str,
    direction: Option<&'static str>,
    ingest: &'a IngestReport,
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    if a.cells != CellsArg::Covariates && a.partition.is_none() {
        return Err(Error::Usage("--partition is required for these cells".into()));
    }
    let data = load(&a.input)?;
    let part = partition_for(&a.partition, &data.ids)?;
    let def = match (a.cells, &part) {
        (CellsArg::Covariates, _) => CellDefinition::Covariates,
        (CellsArg::IotaGamma, Some(p)) => CellDefinition::WorkerMarket(p),
        (CellsArg::Full, Some(p)) => CellDefinition::Full(p),
        _ => unreachable!("partition presence checked above"),
    };
    let direction = match a.direction {
        DirectionArg::Female => Direction::FemaleCounterfactual,
        DirectionArg::Male => Direction::MaleCounterfactual,
    };
    let result = match a.method {
        MethodArg::Ob => ob_decompose(&data.panel, def, direction)?,
        MethodArg::Matching => matching_decompose(&data.panel, def)?,
    };
    write_json(&a.out, &result)?;
    write_json(
        &sidecar(&a.meta, &a.out, ".meta.json"),
        &DecomposeMeta {
            command: "decompose",
            method: match a.method {
                MethodArg::Ob => "ob",
                MethodArg::Matching => "matching",
            },
            cells: def.describe(),
            direction: (a.method == MethodArg::Ob).then_some(match a.direction {
                DirectionArg::Female => "female",
                DirectionArg::Male => "male",
            }),
            ingest: &data.report,
        },
    )
}

#[derive(Serialize)]
struct CellsMeta<'a> {
    command: &'static str,
    min_cell_size: usize,
    pure: bool,
    n_cells: usize,
    dropped_small: usize,
    dropped_unmatched: usize,
    n_workers: usize,
    share_workers_positive_gap: Option<f64>,
    ingest: &'a IngestReport,
}

pub fn cells(a: &CellsArgs) -> Result<()> {
    let data = load(&a.input)?;
    let part = read_partition(read_text(&a.partition)?.as_bytes(), &data.ids)?;
    let options = CellOptions { min_cell_size: a.min_cell_size, pure: a.pure };
    let report = per_cell_decompose(&data.panel, &part, options)?;
    if report.cells.is_empty() {
        eprintln!("warning: no cell has at least {} workers with common support", a.min_cell_size);
    }

    let f = |x: f64| format!("{x:?}");
    let results = report.cells.iter().map(|c| {
        let r = &c.result;
        vec![
            c.worker_type.to_string(),
            c.market.to_string(),
            f(r.gap),
            f(r.structural),
            f(r.males_unmatched),
            f(r.females_unmatched),
            f(r.composition),
            f(r.frac_males_matched),
            f(r.frac_females_matched),
            f(c.male_share),
            c.n_workers.to_string(),
            c.n_rows.to_string(),
        ]
    });
    let header = [
        "worker_type",
        "market",
        "gap",
        "structural",
        "males_unmatched",
        "females_unmatched",
        "composition",
        "frac_males_matched",
        "frac_females_matched",
        "male_share",
        "n_workers",
        "n_rows",
    ];
    write_bytes(&a.out_results, &csv_bytes(&header, results)?)?;

    let plot = report.cells.iter().map(|c| {
        let r = &c.result;
        vec![
            c.worker_type.to_string(),
            c.market.to_string(),
            c.n_workers.to_string(),
            f(r.gap),
            f(r.structural),
            f(r.males_unmatched),
            f(r.females_unmatched),
            f(r.composition),
        ]
    });
    let header = [
        "worker_type",
        "market",
        "weight",
        "gap",
        "structural",
        "males_unmatched",
        "females_unmatched",
        "composition",
    ];
    write_bytes(&a.out_plotdata, &csv_bytes(&header, plot)?)?;

    let summary = if report.cells.is_empty() { None } else { Some(summarize_cells(&report.cells)?) };
    let rows = summary.iter().flat_map(|s| {
        s.rows.iter().map(|r| vec![r.component.to_string(), f(r.mean), f(r.sd), f(r.min), f(r.max)])
    });
    write_bytes(&a.out_summary, &csv_bytes(&["component", "mean", "sd", "min", "max"], rows)?)?;

    write_json(
        &sidecar(&a.meta, &a.out_results, ".meta.json"),
        &CellsMeta {
            command: "cells",
            min_cell_size: a.min_cell_size,
            pure: a.pure,
            n_cells: report.cells.len(),
            dropped_small: report.dropped_small,
            dropped_unmatched: report.dropped_unmatched,
            n_workers: summary.as_ref().map_or(0, |s| s.n_workers),
            share_workers_positive_gap: summary.as_ref().map(|s| s.share_workers_positive_gap),
            ingest: &data.report,
        },
    )
}

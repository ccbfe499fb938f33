use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::matching::{decompose_cells, CellMeans};
use super::{DecompResult, WagePanel, MALE};
use crate::error::{Error, Result};
use crate::network::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellOptions {
    /// Cells with fewer distinct workers are dropped.
    pub min_cell_size: usize,
    /// Ignore covariates inside each cell, so every row is matched whenever
    /// both groups are present.
    pub pure: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions { min_cell_size: 50, pure: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub worker_type: u32,
    pub market: u32,
    pub result: DecompResult,
    pub n_workers: usize,
    pub n_rows: usize,
    pub male_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerCellReport {
    /// Sorted by (worker type, market).
    pub cells: Vec<CellResult>,
    pub dropped_small: usize,
    /// Cells dropped because no covariate stratum holds both groups.
    pub dropped_unmatched: usize,
}

/// Matching decomposition inside every (type, market) cell, with covariates
/// as the inner strata.
pub fn per_cell_decompose(
    panel: &WagePanel,
    partition: &Partition,
    options: CellOptions,
) -> Result<PerCellReport> {
    super::CellDefinition::WorkerMarket(partition).check(panel)?;
    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, r) in panel.rows.iter().enumerate() {
        let key = (partition.worker_type[r.worker], partition.market[r.job]);
        groups.entry(key).or_default().push(i);
    }
    let outcomes: Vec<Option<Result<CellResult>>> = groups
        .into_par_iter()
        .map(|((ty, mk), rows)| {
            let n_workers = rows.iter().map(|&i| panel.rows[i].worker).collect::<BTreeSet<_>>().len();
            if n_workers < options.min_cell_size {
                return None;
            }
            let mut strata: BTreeMap<&[u32], CellMeans> = BTreeMap::new();
            for &i in &rows {
                let r = &panel.rows[i];
                let key: &[u32] = if options.pure { &[] } else { &r.covariates };
                let c = strata.entry(key).or_insert_with(|| CellMeans {
                    key: key.to_vec(),
                    n_male: 0,
                    n_female: 0,
                    sum_male: 0.0,
                    sum_female: 0.0,
                });
                if r.group == MALE {
                    c.n_male += 1;
                    c.sum_male += r.log_wage;
                } else {
                    c.n_female += 1;
                    c.sum_female += r.log_wage;
                }
            }
            let cells: Vec<CellMeans> = strata.into_values().collect();
            let describe = if options.pure { "iota-gamma" } else { "covariates within iota-gamma" };
            Some(decompose_cells(&cells, describe).map(|result| CellResult {
                worker_type: ty,
                market: mk,
                male_share: result.n_male as f64 / rows.len() as f64,
                result,
                n_workers,
                n_rows: rows.len(),
            }))
        })
        .collect();
    let mut report = PerCellReport { cells: Vec::new(), dropped_small: 0, dropped_unmatched: 0 };
    for o in outcomes {
        match o {
            None => report.dropped_small += 1,
            Some(Ok(c)) => report.cells.push(c),
            Some(Err(Error::Empty(_))) => report.dropped_unmatched += 1,
            Some(Err(e)) => return Err(e),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub component: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub n_cells: usize,
    pub n_workers: usize,
    /// Share of workers (in kept cells) whose cell has a positive gap.
    pub share_workers_positive_gap: f64,
}

/// Worker-weighted distribution of each component across cells.
pub fn summarize_cells(cells: &[CellResult]) -> Result<SummaryTable> {
    if cells.is_empty() {
        return Err(Error::Empty("no cells to summarize".into()));
    }
    type Getter = fn(&CellResult) -> f64;
    let components: [(&'static str, Getter); 8] = [
        ("gap", |c| c.result.gap),
        ("structural", |c| c.result.structural),
        ("males_unmatched", |c| c.result.males_unmatched),
        ("females_unmatched", |c| c.result.females_unmatched),
        ("composition", |c| c.result.composition),
        ("frac_males_matched", |c| c.result.frac_males_matched),
        ("frac_females_matched", |c| c.result.frac_females_matched),
        ("male_share", |c| c.male_share),
    ];
    let total: f64 = cells.iter().map(|c| c.n_workers as f64).sum();
    let rows = components
        .iter()
        .map(|(name, get)| {
            let mean = cells.iter().map(|c| c.n_workers as f64 * get(c)).sum::<f64>() / total;
            let var =
                cells.iter().map(|c| c.n_workers as f64 * (get(c) - mean).powi(2)).sum::<f64>() / total;
            SummaryRow {
                component: name,
                mean,
                sd: var.sqrt(),
                min: cells.iter().map(get).fold(f64::INFINITY, f64::min),
                max: cells.iter().map(get).fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let positive: f64 =
        cells.iter().filter(|c| c.result.gap > 0.0).map(|c| c.n_workers as f64).sum();
    Ok(SummaryTable {
        rows,
        n_cells: cells.len(),
        n_workers: total as usize,
        share_workers_positive_gap: positive / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::FEMALE;

    fn panel() -> (WagePanel, Partition) {
        let mut p = WagePanel::new(vec!["edu".into()]);
        let mut w = 0;
        // cell (0,0): 3 males at 2.0, 3 females at 1.5, all "hs"
        for _ in 0..3 {
            p.push(w, 0, MALE, 2.0, &["hs"]).unwrap();
            p.push(w + 1, 0, FEMALE, 1.5, &["hs"]).unwrap();
            w += 2;
        }
        // cell (1,1): males "hs", females "ba"
        for _ in 0..2 {
            p.push(w, 1, MALE, 1.0, &["hs"]).unwrap();
            p.push(w + 1, 1, FEMALE, 1.2, &["ba"]).unwrap();
            w += 2;
        }
        // cell (0,1): a single worker
        p.push(w, 1, MALE, 3.0, &["hs"]).unwrap();
        let mut types = vec![0; 6];
        types.extend([1, 1, 1, 1, 0]);
        (p, Partition::new(types, vec![0, 1], 2, 2).unwrap())
    }

    #[test]
    fn drops_small_and_unmatched() {
        let (p, part) = panel();
        let r = per_cell_decompose(&p, &part, CellOptions { min_cell_size: 2, pure: false }).unwrap();
        assert_eq!(r.cells.len(), 1);
        assert_eq!((r.dropped_small, r.dropped_unmatched), (1, 1));
        let c = &r.cells[0];
        assert_eq!((c.worker_type, c.market, c.n_workers), (0, 0, 6));
        assert!((c.result.structural - 0.5).abs() < 1e-12);
        assert!((c.male_share - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pure_cells_ignore_covariates() {
        let (p, part) = panel();
        let r = per_cell_decompose(&p, &part, CellOptions { min_cell_size: 1, pure: true }).unwrap();
        assert_eq!(r.cells.len(), 2);
        assert_eq!(r.dropped_unmatched, 1);
        let c = &r.cells[1];
        assert_eq!((c.worker_type, c.market), (1, 1));
        assert!((c.result.structural + 0.2).abs() < 1e-12);
        assert_eq!(c.result.frac_males_matched, 1.0);
    }

    #[test]
    fn summary_weights_by_workers() {
        let (p, part) = panel();
        let r = per_cell_decompose(&p, &part, CellOptions { min_cell_size: 1, pure: true }).unwrap();
        let s = summarize_cells(&r.cells).unwrap();
        let gap = &s.rows[0];
        assert_eq!(gap.component, "gap");
        // 6 workers at 0.5, 4 workers at -0.2
        assert!((gap.mean - (6.0 * 0.5 - 4.0 * 0.2) / 10.0).abs() < 1e-12);
        assert!((gap.min + 0.2).abs() < 1e-12 && (gap.max - 0.5).abs() < 1e-12);
        let var = (6.0 * (0.5 - gap.mean).powi(2) + 4.0 * (-0.2 - gap.mean).powi(2)) / 10.0;
        assert!((gap.sd - var.sqrt()).abs() < 1e-12);
        assert!((s.share_workers_positive_gap - 0.6).abs() < 1e-12);
        assert_eq!(s.rows.len(), 8);
        assert!(summarize_cells(&[]).is_err());
    }
}

use std::collections::BTreeMap;

use super::{CellDefinition, DecompResult, Method, WagePanel, MALE};
use crate::error::{Error, Result};

/// Outcome totals of one cell, by group.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeans {
    pub key: Vec<u32>,
    pub n_male: usize,
    pub n_female: usize,
    pub sum_male: f64,
    pub sum_female: f64,
}

impl CellMeans {
    /// Both groups are present.
    pub fn matched(&self) -> bool {
        self.n_male > 0 && self.n_female > 0
    }

    pub fn mean_male(&self) -> f64 {
        self.sum_male / self.n_male as f64
    }

    pub fn mean_female(&self) -> f64 {
        self.sum_female / self.n_female as f64
    }
}

/// Rows grouped into cells; cells are sorted by key.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTagging {
    pub cells: Vec<CellMeans>,
    /// Cell index of each panel row.
    pub row_cell: Vec<usize>,
}

impl CellTagging {
    /// Whether each row sits in a cell that holds both groups.
    pub fn row_matched(&self) -> Vec<bool> {
        self.row_cell.iter().map(|&c| self.cells[c].matched()).collect()
    }
}

pub fn exact_match_cells(panel: &WagePanel, def: CellDefinition) -> Result<CellTagging> {
    def.check(panel)?;
    let keys: Vec<Vec<u32>> = panel.rows.iter().map(|r| def.key(r)).collect();
    let mut index: BTreeMap<&[u32], usize> = BTreeMap::new();
    for k in &keys {
        index.entry(k.as_slice()).or_insert(0);
    }
    let mut cells: Vec<CellMeans> = Vec::with_capacity(index.len());
    for (i, (k, slot)) in index.iter_mut().enumerate() {
        *slot = i;
        cells.push(CellMeans { key: k.to_vec(), n_male: 0, n_female: 0, sum_male: 0.0, sum_female: 0.0 });
    }
    let mut row_cell = Vec::with_capacity(keys.len());
    for (r, k) in panel.rows.iter().zip(&keys) {
        let c = index[k.as_slice()];
        row_cell.push(c);
        let cell = &mut cells[c];
        if r.group == MALE {
            cell.n_male += 1;
            cell.sum_male += r.log_wage;
        } else {
            cell.n_female += 1;
            cell.sum_female += r.log_wage;
        }
    }
    Ok(CellTagging { cells, row_cell })
}

/// Exact-matching decomposition. Cells holding both groups form the common
/// support. The structural part weights within-cell gaps by the matched female
/// distribution; the composition part compares male means under the male and
/// female matched distributions. The unmatched terms are zero when every row
/// of that group is matched.
pub fn matching_decompose(panel: &WagePanel, def: CellDefinition) -> Result<DecompResult> {
    let tag = exact_match_cells(panel, def)?;
    decompose_cells(&tag.cells, def.describe())
}

pub(crate) fn decompose_cells(cells: &[CellMeans], describe: &str) -> Result<DecompResult> {
    let n_male: usize = cells.iter().map(|c| c.n_male).sum();
    let n_female: usize = cells.iter().map(|c| c.n_female).sum();
    if n_male == 0 || n_female == 0 {
        return Err(Error::Empty("both groups need at least one row".into()));
    }
    let matched: Vec<&CellMeans> = cells.iter().filter(|c| c.matched()).collect();
    if matched.is_empty() {
        return Err(Error::Empty("no cell holds both groups".into()));
    }
    let nm_m: usize = matched.iter().map(|c| c.n_male).sum();
    let nf_m: usize = matched.iter().map(|c| c.n_female).sum();
    let sum = |f: &dyn Fn(&CellMeans) -> f64, only: bool| -> f64 {
        cells.iter().filter(|c| c.matched() == only).map(f).sum()
    };
    let sm_m = sum(&|c| c.sum_male, true);
    let sf_m = sum(&|c| c.sum_female, true);
    let sm_u = sum(&|c| c.sum_male, false);
    let sf_u = sum(&|c| c.sum_female, false);

    let ym = (sm_m + sm_u) / n_male as f64;
    let yf = (sf_m + sf_u) / n_female as f64;
    let ym_m = sm_m / nm_m as f64;
    let yf_m = sf_m / nf_m as f64;

    let mut structural = 0.0;
    let mut composition = 0.0;
    for c in &matched {
        let wm = c.n_male as f64 / nm_m as f64;
        let wf = c.n_female as f64 / nf_m as f64;
        structural += wf * (c.mean_male() - c.mean_female());
        composition += c.mean_male() * (wm - wf);
    }
    let pu_m = (n_male - nm_m) as f64 / n_male as f64;
    let pu_f = (n_female - nf_m) as f64 / n_female as f64;
    let males_unmatched =
        if nm_m < n_male { (sm_u / (n_male - nm_m) as f64 - ym_m) * pu_m } else { 0.0 };
    let females_unmatched =
        if nf_m < n_female { (yf_m - sf_u / (n_female - nf_m) as f64) * pu_f } else { 0.0 };

    Ok(DecompResult {
        method: Method::Matching,
        gap: ym - yf,
        composition,
        structural,
        males_unmatched,
        females_unmatched,
        frac_males_matched: 1.0 - pu_m,
        frac_females_matched: 1.0 - pu_f,
        n_male,
        n_female,
        cells: describe.to_string(),
    })
}

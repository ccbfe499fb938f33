//! Wage-gap decompositions.
//!
//! The gap is the male minus female mean log wage. Oaxaca-Blinder splits it
//! into a composition part and a structural part using a regression
//! counterfactual. Exact matching on cells adds two terms for workers outside
//! common support.

mod cells;
mod matching;
mod oaxaca;
mod ols;
mod panel;

use serde::{Deserialize, Serialize};

pub use cells::{per_cell_decompose, summarize_cells, CellOptions, CellResult, PerCellReport, SummaryRow, SummaryTable};
pub use matching::{exact_match_cells, matching_decompose, CellMeans, CellTagging};
pub use oaxaca::{ob_decompose, Direction};
pub use ols::{ols_fit, Design, RegressionFit};
pub use panel::{PanelRow, WagePanel, FEMALE, MALE};

use crate::error::{Error, Result};
use crate::network::Partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ob,
    Matching,
}

/// Components of a group wage gap, in log-wage units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompResult {
    pub method: Method,
    /// Δ: male minus female mean log wage.
    pub gap: f64,
    /// Δ_X: part due to different characteristics.
    pub composition: f64,
    /// Δ_0: part due to different pay for the same characteristics.
    pub structural: f64,
    /// Δ_M: contribution of males without a female counterpart.
    pub males_unmatched: f64,
    /// Δ_F: contribution of females without a male counterpart.
    pub females_unmatched: f64,
    pub frac_males_matched: f64,
    pub frac_females_matched: f64,
    pub n_male: usize,
    pub n_female: usize,
    /// Human-readable description of the cells or regressors used.
    #[serde(skip)]
    pub cells: String,
}

impl DecompResult {
    /// `Δ − (Δ_X + Δ_0 + Δ_M + Δ_F)`; zero up to rounding.
    pub fn residual(&self) -> f64 {
        self.gap
            - (self.composition + self.structural + self.males_unmatched + self.females_unmatched)
    }
}

/// What defines a cell (or a regressor set, for Oaxaca-Blinder).
#[derive(Debug, Clone, Copy)]
pub enum CellDefinition<'a> {
    /// The tuple of all panel covariates.
    Covariates,
    /// The (worker type, market) pair from a partition.
    WorkerMarket(&'a Partition),
    /// Both of the above.
    Full(&'a Partition),
}

impl CellDefinition<'_> {
    pub fn describe(&self) -> &'static str {
        match self {
            CellDefinition::Covariates => "covariates",
            CellDefinition::WorkerMarket(_) => "iota-gamma",
            CellDefinition::Full(_) => "full",
        }
    }

    fn partition(&self) -> Option<&Partition> {
        match self {
            CellDefinition::Covariates => None,
            CellDefinition::WorkerMarket(p) | CellDefinition::Full(p) => Some(p),
        }
    }

    fn uses_covariates(&self) -> bool {
        !matches!(self, CellDefinition::WorkerMarket(_))
    }

    /// Checks that the partition covers every worker and job in the panel.
    fn check(&self, panel: &WagePanel) -> Result<()> {
        if let Some(p) = self.partition() {
            for r in &panel.rows {
                if r.worker >= p.worker_type.len() || r.job >= p.market.len() {
                    return Err(Error::Dimension(format!(
                        "panel row (worker {}, job {}) is outside the partition",
                        r.worker, r.job
                    )));
                }
            }
        }
        Ok(())
    }

    /// Cell key of one row.
    fn key(&self, row: &PanelRow) -> Vec<u32> {
        let mut key = Vec::with_capacity(row.covariates.len() + 2);
        if self.uses_covariates() {
            key.extend_from_slice(&row.covariates);
        }
        if let Some(p) = self.partition() {
            key.push(p.worker_type[row.worker]);
            key.push(p.market[row.job]);
        }
        key
    }
}

/// Mean log wage of group 1 minus mean log wage of group 0.
pub fn overall_gap(panel: &WagePanel) -> Result<f64> {
    let (mut sm, mut nm, mut sf, mut nf) = (0.0, 0usize, 0.0, 0usize);
    for r in &panel.rows {
        if r.group == MALE {
            sm += r.log_wage;
            nm += 1;
        } else {
            sf += r.log_wage;
            nf += 1;
        }
    }
    if nm == 0 || nf == 0 {
        return Err(Error::Empty("both groups need at least one row".into()));
    }
    Ok(sm / nm as f64 - sf / nf as f64)
}

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::network::Group;

/// Group label of the comparison group (male, `G = 1`).
pub const MALE: Group = 1;
/// Group label of the reference group (female, `G = 0`).
pub const FEMALE: Group = 0;

/// One worker-job observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    /// Dense worker index, shared with the match network.
    pub worker: usize,
    /// Dense job index, shared with the match network.
    pub job: usize,
    pub group: Group,
    pub log_wage: f64,
    /// Level codes, one per covariate, indexing into [`WagePanel::levels`].
    pub covariates: Vec<u32>,
}

/// Observation rows feeding the decompositions. Covariates are categorical;
/// each column keeps its own table of level labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WagePanel {
    pub covariate_names: Vec<String>,
    pub levels: Vec<Vec<String>>,
    pub rows: Vec<PanelRow>,
    lookup: Vec<HashMap<String, u32>>,
}

impl WagePanel {
    pub fn new(covariate_names: Vec<String>) -> Self {
        let k = covariate_names.len();
        WagePanel {
            covariate_names,
            levels: vec![Vec::new(); k],
            rows: Vec::new(),
            lookup: vec![HashMap::new(); k],
        }
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Interns a level label for covariate `col` and returns its code.
    pub fn intern(&mut self, col: usize, label: &str) -> u32 {
        if let Some(&code) = self.lookup[col].get(label) {
            return code;
        }
        let code = self.levels[col].len() as u32;
        self.levels[col].push(label.to_string());
        self.lookup[col].insert(label.to_string(), code);
        code
    }

    /// Appends a row given covariate labels.
    pub fn push(
        &mut self,
        worker: usize,
        job: usize,
        group: Group,
        log_wage: f64,
        covariates: &[&str],
    ) -> Result<()> {
        if covariates.len() != self.n_covariates() {
            return Err(Error::Dimension(format!(
                "row has {} covariates, panel has {}",
                covariates.len(),
                self.n_covariates()
            )));
        }
        let codes = covariates.iter().enumerate().map(|(c, l)| self.intern(c, l)).collect();
        self.push_coded(PanelRow { worker, job, group, log_wage, covariates: codes })
    }

    /// Appends a row whose covariates are already level codes.
    pub fn push_coded(&mut self, row: PanelRow) -> Result<()> {
        if !row.log_wage.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite log wage for worker {}",
                row.worker
            )));
        }
        if row.group > 1 {
            return Err(Error::InvalidParameter(format!("group {} is not binary", row.group)));
        }
        if row.covariates.len() != self.n_covariates() {
            return Err(Error::Dimension("covariate arity mismatch".into()));
        }
        for (c, &code) in row.covariates.iter().enumerate() {
            if code as usize >= self.levels[c].len() {
                return Err(Error::Index(format!("level code {code} for covariate {c}")));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn level(&self, col: usize, code: u32) -> &str {
        &self.levels[col][code as usize]
    }

    /// Rebuilds the label lookup after `levels` has been replaced wholesale.
    pub(crate) fn reindex_levels(&mut self) {
        self.lookup = self
            .levels
            .iter()
            .map(|ls| ls.iter().enumerate().map(|(i, l)| (l.clone(), i as u32)).collect())
            .collect();
    }

    pub fn count_group(&self, g: Group) -> usize {
        self.rows.iter().filter(|r| r.group == g).count()
    }

    /// Same panel restricted to the rows selected by `keep`.
    pub fn filtered(&self, keep: impl Fn(&PanelRow) -> bool) -> WagePanel {
        WagePanel {
            covariate_names: self.covariate_names.clone(),
            levels: self.levels.clone(),
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            lookup: self.lookup.clone(),
        }
    }
}

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::decomp::WagePanel;
use crate::error::{Error, Result};

/// Numeric bins for one covariate. Bins are lower-closed: `[edges[k],
/// edges[k+1])`. `open_below` adds `(-inf, edges[0])` and `open_above` adds
/// `[edges[last], inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarsenRule {
    pub column: String,
    pub edges: Vec<f64>,
    #[serde(default)]
    pub open_below: bool,
    #[serde(default)]
    pub open_above: bool,
}

impl CoarsenRule {
    /// Regular bins of `width` from `start` up to `end`.
    pub fn regular(column: &str, start: f64, width: f64, end: f64) -> Self {
        let n = ((end - start) / width).round() as usize;
        let edges = (0..=n).map(|k| start + width * k as f64).collect();
        CoarsenRule { column: column.to_string(), edges, open_below: false, open_above: false }
    }

    /// Five-year age bins covering 25 to 59.
    pub fn age() -> Self {
        Self::regular("age", 25.0, 5.0, 60.0)
    }

    /// Years of schooling in four levels: `<8`, `8-11`, `12-15`, `16+`.
    pub fn education() -> Self {
        CoarsenRule {
            column: "education".into(),
            edges: vec![8.0, 12.0, 16.0],
            open_below: true,
            open_above: true,
        }
    }

    /// Five-year experience bins from 0, with an open top bin at 40.
    pub fn experience() -> Self {
        CoarsenRule { open_above: true, ..Self::regular("experience", 0.0, 5.0, 40.0) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.edges.is_empty() || self.edges.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(Ordering::Less)) {
            return Err(Error::InvalidParameter(format!(
                "bins for `{}` need strictly increasing edges",
                self.column
            )));
        }
        if self.edges.len() == 1 && !(self.open_below || self.open_above) {
            return Err(Error::InvalidParameter(format!("bins for `{}` are empty", self.column)));
        }
        Ok(())
    }

    /// Bin label for a value.
    pub fn bin(&self, v: f64) -> Result<String> {
        let e = &self.edges;
        let last = e[e.len() - 1];
        if v < e[0] {
            return if self.open_below && v.is_finite() {
                Ok(format!("<{}", fmt(e[0])))
            } else {
                Err(self.outside(v))
            };
        }
        if v >= last {
            return if self.open_above && v.is_finite() {
                Ok(format!("{}+", fmt(last)))
            } else {
                Err(self.outside(v))
            };
        }
        let k = e.partition_point(|&x| x <= v) - 1;
        let (lo, hi) = (e[k], e[k + 1]);
        if lo.fract() == 0.0 && hi.fract() == 0.0 {
            Ok(format!("{}-{}", fmt(lo), fmt(hi - 1.0)))
        } else {
            Ok(format!("[{},{})", fmt(lo), fmt(hi)))
        }
    }

    fn outside(&self, v: f64) -> Error {
        Error::InvalidParameter(format!("value {v} of `{}` is outside the declared bins", self.column))
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Replaces the levels of every covariate named in `rules` by bin labels.
/// Levels must parse as numbers.
pub fn coarsen(panel: &WagePanel, rules: &[CoarsenRule]) -> Result<WagePanel> {
    let mut out = panel.clone();
    for rule in rules {
        rule.validate()?;
        let col = panel.covariate_names.iter().position(|n| *n == rule.column).ok_or_else(|| {
            Error::InvalidParameter(format!("no covariate named `{}` to coarsen", rule.column))
        })?;
        // old code -> new code, new levels in first-use order of the old codes
        let mut labels: Vec<String> = Vec::new();
        let mut remap = Vec::with_capacity(panel.levels[col].len());
        for raw in &panel.levels[col] {
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!("`{raw}` in `{}` is not numeric", rule.column))
            })?;
            let label = rule.bin(v)?;
            let code = match labels.iter().position(|l| *l == label) {
                Some(c) => c,
                None => {
                    labels.push(label);
                    labels.len() - 1
                }
            };
            remap.push(code as u32);
        }
        for r in &mut out.rows {
            r.covariates[col] = remap[r.covariates[col] as usize];
        }
        out.levels[col] = labels;
    }
    out.reindex_levels();
    Ok(out)
}

//! Linked employer-employee panels from CSV.
//!
//! One input row is one worker-job-year observation. A job is an
//! (establishment, occupation) pair. Consecutive years of the same worker at
//! the same job form one match; a gap of a year or more starts a new one, so
//! the match multiplicity is the number of such spells.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decomp::{PanelRow, WagePanel, FEMALE, MALE};
use crate::error::{Error, Result};
use crate::network::{Group, MatchNetwork, Partition};

mod coarsen;

pub use coarsen::{coarsen, CoarsenRule};

/// How the log wage is obtained from the input columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WageSource {
    LogWage(String),
    Wage(String),
    /// Hourly wage from earnings and hours.
    WageHours { wage: String, hours: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    pub worker_id: String,
    pub establishment_id: String,
    pub occupation_code: String,
    pub year: String,
    pub wage: WageSource,
    pub gender: String,
    pub male_codes: Vec<String>,
    pub female_codes: Vec<String>,
    /// Column used for the age filter; no filter when absent.
    pub age: Option<String>,
    pub age_range: (f64, f64),
    /// Categorical covariates carried into the wage panel, in order.
    pub covariates: Vec<String>,
    pub coarsen: Vec<CoarsenRule>,
    /// Skip and count malformed rows instead of failing on the first one.
    pub skip_malformed: bool,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            worker_id: "worker_id".into(),
            establishment_id: "establishment_id".into(),
            occupation_code: "occupation_code".into(),
            year: "year".into(),
            wage: WageSource::LogWage("log_wage".into()),
            gender: "gender".into(),
            male_codes: ["M", "m", "male", "Male", "1"].map(String::from).to_vec(),
            female_codes: ["F", "f", "female", "Female", "0"].map(String::from).to_vec(),
            age: None,
            age_range: (25.0, 55.0),
            covariates: Vec::new(),
            coarsen: Vec::new(),
            skip_malformed: false,
        }
    }
}

impl PanelSchema {
    /// Adds the standard bins for covariates named `age`, `education` and
    /// `experience` that have no rule yet.
    pub fn with_default_bins(mut self) -> Self {
        for rule in [CoarsenRule::age(), CoarsenRule::education(), CoarsenRule::experience()] {
            if self.covariates.contains(&rule.column)
                && !self.coarsen.iter().any(|r| r.column == rule.column)
            {
                self.coarsen.push(rule);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.age_range.0.partial_cmp(&self.age_range.1).is_none_or(|o| o.is_gt()) {
            return Err(Error::InvalidParameter("age range is empty".into()));
        }
        if self.male_codes.iter().any(|c| self.female_codes.contains(c)) {
            return Err(Error::InvalidParameter("a gender code is both male and female".into()));
        }
        for r in &self.coarsen {
            if !self.covariates.contains(&r.column) {
                return Err(Error::InvalidParameter(format!(
                    "coarsening rule for `{}`, which is not a covariate",
                    r.column
                )));
            }
            r.validate()?;
        }
        Ok(())
    }

    fn columns(&self) -> Vec<&str> {
        let mut cols =
            vec![&*self.worker_id, &*self.establishment_id, &*self.occupation_code, &*self.year];
        match &self.wage {
            WageSource::LogWage(c) | WageSource::Wage(c) => cols.push(c),
            WageSource::WageHours { wage, hours } => cols.extend([&**wage, &**hours]),
        }
        cols.push(&self.gender);
        if let Some(a) = &self.age {
            cols.push(a);
        }
        cols.extend(self.covariates.iter().map(|s| &**s));
        cols
    }
}

/// Dense index to original identifier, both sides.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdMaps {
    pub workers: Vec<String>,
    /// (establishment, occupation) per job.
    pub jobs: Vec<(String, String)>,
    worker_index: HashMap<String, usize>,
    job_index: HashMap<(String, String), usize>,
}

impl IdMaps {
    /// Maps built from known identifiers, in index order.
    pub fn from_ids(workers: Vec<String>, jobs: Vec<(String, String)>) -> Self {
        let worker_index = workers.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let job_index = jobs.iter().enumerate().map(|(j, k)| (k.clone(), j)).collect();
        IdMaps { workers, jobs, worker_index, job_index }
    }

    fn worker(&mut self, id: &str) -> usize {
        if let Some(&i) = self.worker_index.get(id) {
            return i;
        }
        self.workers.push(id.to_string());
        self.worker_index.insert(id.to_string(), self.workers.len() - 1);
        self.workers.len() - 1
    }

    fn job(&mut self, est: &str, occ: &str) -> usize {
        let key = (est.to_string(), occ.to_string());
        if let Some(&j) = self.job_index.get(&key) {
            return j;
        }
        self.jobs.push(key.clone());
        self.job_index.insert(key, self.jobs.len() - 1);
        self.jobs.len() - 1
    }

    pub fn worker_index(&self, id: &str) -> Option<usize> {
        self.worker_index.get(id).copied()
    }

    pub fn job_index(&self, establishment: &str, occupation: &str) -> Option<usize> {
        self.job_index.get(&(establishment.to_string(), occupation.to_string())).copied()
    }

    /// Job identifier in a single field: `establishment/occupation`.
    pub fn job_label(&self, j: usize) -> String {
        let (e, o) = &self.jobs[j];
        format!("{e}/{o}")
    }

    /// Inverse of [`IdMaps::job_label`].
    pub fn job_from_label(&self, label: &str) -> Option<usize> {
        let (e, o) = label.rsplit_once('/')?;
        self.job_index(e, o)
    }
}

/// Row accounting and settings, written next to the outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows_in: usize,
    pub rows_kept: usize,
    /// Dropped rows by reason.
    pub rows_filtered: BTreeMap<String, usize>,
    pub n_workers: usize,
    pub n_jobs: usize,
    pub n_matches: u64,
    pub age_range: Option<(f64, f64)>,
    pub coarsening: Vec<CoarsenRule>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub network: MatchNetwork,
    pub panel: WagePanel,
    pub ids: IdMaps,
    pub report: IngestReport,
}

pub fn load_panel(path: impl AsRef<Path>, schema: &PanelSchema) -> Result<LoadedPanel> {
    let file = std::fs::File::open(path.as_ref()).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.as_ref().display())))
    })?;
    read_panel(file, schema)
}

struct Observation {
    worker: usize,
    job: usize,
    year: i64,
    group: Group,
    log_wage: f64,
    covariates: Vec<String>,
}

pub fn read_panel(reader: impl Read, schema: &PanelSchema) -> Result<LoadedPanel> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let idx: Vec<usize> = schema.columns().into_iter().map(col).collect::<Result<_>>()?;
    let n_fixed = idx.len() - schema.covariates.len();

    let mut report = IngestReport {
        age_range: schema.age.as_ref().map(|_| schema.age_range),
        coarsening: schema.coarsen.clone(),
        ..Default::default()
    };
    let mut ids = IdMaps::default();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut obs: Vec<Observation> = Vec::new();
    let mut gender_of: Vec<Group> = Vec::new();
    let tally = |report: &mut IngestReport, reason: &str| {
        *report.rows_filtered.entry(reason.to_string()).or_default() += 1;
    };

    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if schema.skip_malformed => {
                report.rows_in += 1;
                report.warnings.push(format!("line {line}: {e}"));
                tally(&mut report, "malformed");
                continue;
            }
            Err(e) => return Err(e.into()),
        }
        report.rows_in += 1;
        let line = record.position().map_or(line, |p| p.line()) as usize;
        let fields: Vec<&str> = idx.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        if !seen.insert(record.iter().map(String::from).collect()) {
            tally(&mut report, "duplicate");
            continue;
        }
        let parsed = parse_row(&fields, schema, line);
        let (year, log_wage, group, age) = match parsed {
            Ok(v) => v,
            Err(e) if schema.skip_malformed => {
                let reason = match &e {
                    Error::InvalidParameter(m) if m.contains("wage") => "nonpositive_wage",
                    Error::InvalidParameter(m) if m.contains("gender") => "unknown_gender",
                    _ => "malformed",
                };
                report.warnings.push(e.to_string());
                tally(&mut report, reason);
                continue;
            }
            Err(e) => return Err(e),
        };
        if let Some(a) = age {
            if a < schema.age_range.0 || a > schema.age_range.1 {
                tally(&mut report, "age_out_of_range");
                continue;
            }
        }
        let worker = ids.worker(fields[0]);
        let job = ids.job(fields[1], fields[2]);
        if worker == gender_of.len() {
            gender_of.push(group);
        } else if gender_of[worker] != group {
            return Err(Error::Parse {
                line,
                message: format!("worker `{}` has conflicting gender codes", fields[0]),
            });
        }
        obs.push(Observation {
            worker,
            job,
            year,
            group,
            log_wage,
            covariates: fields[n_fixed..].iter().map(|s| s.to_string()).collect(),
        });
    }
    if let Some(&n) = report.rows_filtered.get("duplicate") {
        let msg = format!("{n} duplicate rows removed");
        log::warn!("{msg}");
        report.warnings.push(msg);
    }
    report.rows_kept = obs.len();
    if obs.is_empty() {
        return Err(Error::Empty("no rows survived the filters".into()));
    }

    let mut years: BTreeMap<(usize, usize), Vec<i64>> = BTreeMap::new();
    for o in &obs {
        years.entry((o.worker, o.job)).or_default().push(o.year);
    }
    let edges: Vec<(usize, usize, u32)> = years
        .into_iter()
        .map(|((w, j), mut ys)| {
            ys.sort_unstable();
            ys.dedup();
            let spells = 1 + ys.windows(2).filter(|p| p[1] - p[0] > 1).count();
            (w, j, spells as u32)
        })
        .collect();
    let network = MatchNetwork::new(ids.workers.len(), ids.jobs.len(), edges, gender_of)?;

    let mut panel = WagePanel::new(schema.covariates.clone());
    for o in obs {
        let codes = o.covariates.iter().enumerate().map(|(c, l)| panel.intern(c, l)).collect();
        panel.push_coded(PanelRow {
            worker: o.worker,
            job: o.job,
            group: o.group,
            log_wage: o.log_wage,
            covariates: codes,
        })?;
    }
    let panel = coarsen(&panel, &schema.coarsen)?;

    report.n_workers = network.n_workers();
    report.n_jobs = network.n_jobs();
    report.n_matches = network.total_matches();
    Ok(LoadedPanel { network, panel, ids, report })
}

fn parse_row(fields: &[&str], schema: &PanelSchema, line: usize) -> Result<(i64, f64, Group, Option<f64>)> {
    let bad = |what: &str, v: &str| Error::Parse { line, message: format!("cannot parse {what} `{v}`") };
    for (name, v) in ["worker id", "establishment id", "occupation code"].iter().zip(fields) {
        if v.is_empty() {
            return Err(Error::Parse { line, message: format!("empty {name}") });
        }
    }
    let year: i64 = fields[3].trim().parse().map_err(|_| bad("year", fields[3]))?;
    let num = |what: &str, v: &str| v.trim().parse::<f64>().map_err(|_| bad(what, v));
    let (log_wage, next) = match &schema.wage {
        WageSource::LogWage(_) => (num("log wage", fields[4])?, 5),
        WageSource::Wage(_) => (positive_log(num("wage", fields[4])?, line)?, 5),
        WageSource::WageHours { .. } => {
            let hours = num("hours", fields[5])?;
            if hours.is_nan() || hours <= 0.0 {
                return Err(Error::InvalidParameter(format!("line {line}: hours must be positive for the wage")));
            }
            (positive_log(num("wage", fields[4])? / hours, line)?, 6)
        }
    };
    if !log_wage.is_finite() {
        return Err(Error::InvalidParameter(format!("line {line}: non-finite log wage")));
    }
    let g = fields[next];
    let group = if schema.male_codes.iter().any(|c| c == g) {
        MALE
    } else if schema.female_codes.iter().any(|c| c == g) {
        FEMALE
    } else {
        return Err(Error::InvalidParameter(format!("line {line}: unknown gender code `{g}`")));
    };
    let age = match schema.age {
        Some(_) => Some(num("age", fields[next + 1])?),
        None => None,
    };
    Ok((year, log_wage, group, age))
}

fn positive_log(w: f64, line: usize) -> Result<f64> {
    if w > 0.0 && w.is_finite() {
        Ok(w.ln())
    } else {
        Err(Error::InvalidParameter(format!("line {line}: wage {w} is not positive")))
    }
}

/// Reads a partition file with columns `node_kind,node_id,block_label`.
/// Node ids are original identifiers; jobs use `establishment/occupation`.
/// Rows for nodes absent from `ids` are ignored; every known node must appear.
pub fn read_partition(reader: impl Read, ids: &IdMaps) -> Result<Partition> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["node_kind", "node_id", "block_label"] {
        return Err(Error::Parse { line: 1, message: "expected node_kind,node_id,block_label".into() });
    }
    let mut worker = vec![None; ids.workers.len()];
    let mut job = vec![None; ids.jobs.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let label: u32 = rec[2].trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad block label `{}`", &rec[2]),
        })?;
        let slot = match &rec[0] {
            "worker" => ids.worker_index(&rec[1]).map(|i| &mut worker[i]),
            "job" => ids.job_from_label(&rec[1]).map(|j| &mut job[j]),
            other => {
                return Err(Error::Parse { line, message: format!("unknown node kind `{other}`") })
            }
        };
        if let Some(s) = slot {
            if s.replace(label).is_some() {
                return Err(Error::Parse { line, message: format!("node `{}` listed twice", &rec[1]) });
            }
        }
    }
    let fill = |v: Vec<Option<u32>>, kind: &str, name: &dyn Fn(usize) -> String| {
        v.into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::InvalidParameter(format!("{kind} `{}` has no block", name(i))))
            })
            .collect::<Result<Vec<u32>>>()
    };
    let worker = fill(worker, "worker", &|i| ids.workers[i].clone())?;
    let job = fill(job, "job", &|j| ids.job_label(j))?;
    let ni = worker.iter().max().map_or(1, |&m| m as usize + 1);
    let nm = job.iter().max().map_or(1, |&m| m as usize + 1);
    Partition::new(worker, job, ni, nm)
}

/// Writes a partition with original identifiers, workers first.
pub fn write_partition(p: &Partition, ids: &IdMaps, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node_kind", "node_id", "block_label"])?;
    for (i, b) in p.worker_type.iter().enumerate() {
        w.write_record(["worker", &ids.workers[i], &b.to_string()])?;
    }
    for (j, b) in p.market.iter().enumerate() {
        w.write_record(["job", &ids.job_label(j), &b.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

//! Plain-text parameter files.
//!
//! ```text
//! # comments run to end of line
//! worker_types 2
//! markets 2
//! wage_noise_sd 0.05      # optional, default 0
//! psi                     # worker_types rows x markets columns
//! 10 1
//! 1 10
//! end
//! nu                      # optional: markets rows x 2 columns (group 0, group 1); default 1
//! 1 1
//! 0.5 0.5
//! end
//! jobs                    # market wage_group0 wage_group1 [repeat]
//! 0 1.0 1.0 20
//! 1 1.0 1.2 20
//! end
//! workers                 # worker_type group search_rate [repeat]
//! 0 0 4.0 100
//! 1 1 4.0 100
//! end
//! ```
//!
//! Rows in `jobs` and `workers` expand in order, so job and worker indices are
//! assigned by position after expansion.

use std::fmt::Write as _;

use super::{Job, RoyParams, Worker};
use crate::error::{Error, Result};
use crate::network::{Group, N_GROUPS};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| parse_err(line, format!("cannot parse `{tok}`")))
}

/// Parses a parameter file and validates the result.
pub fn parse_params(text: &str) -> Result<RoyParams> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect()))
        .filter(|(_, toks): &(usize, Vec<&str>)| !toks.is_empty())
        .collect();

    let mut n_types = None;
    let mut n_markets = None;
    let mut noise = 0.0;
    let mut psi: Option<Vec<Vec<f64>>> = None;
    let mut nu: Option<Vec<[f64; N_GROUPS]>> = None;
    let mut jobs = Vec::new();
    let mut workers = Vec::new();

    let mut it = lines.into_iter();
    while let Some((ln, toks)) = it.next() {
        let key = toks[0];
        if toks.len() == 2 {
            match key {
                "worker_types" => n_types = Some(num::<usize>(toks[1], ln)?),
                "markets" => n_markets = Some(num::<usize>(toks[1], ln)?),
                "wage_noise_sd" => noise = num::<f64>(toks[1], ln)?,
                _ => return Err(parse_err(ln, format!("unknown key `{key}`"))),
            }
            continue;
        }
        if toks.len() != 1 {
            return Err(parse_err(ln, format!("malformed line for `{key}`")));
        }
        let mut block = Vec::new();
        let mut closed = false;
        for (bl, btoks) in it.by_ref() {
            if btoks == ["end"] {
                closed = true;
                break;
            }
            block.push((bl, btoks));
        }
        if !closed {
            return Err(parse_err(ln, format!("block `{key}` is missing `end`")));
        }
        match key {
            "psi" => {
                let rows = block
                    .iter()
                    .map(|(bl, r)| r.iter().map(|t| num::<f64>(t, *bl)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                psi = Some(rows);
            }
            "nu" => {
                let mut rows = Vec::new();
                for (bl, r) in &block {
                    if r.len() != N_GROUPS {
                        return Err(parse_err(*bl, "nu rows need one value per group"));
                    }
                    rows.push([num(r[0], *bl)?, num(r[1], *bl)?]);
                }
                nu = Some(rows);
            }
            "jobs" => {
                for (bl, r) in &block {
                    if !(3..=4).contains(&r.len()) {
                        return Err(parse_err(*bl, "jobs rows: market wage0 wage1 [repeat]"));
                    }
                    let job = Job { market: num(r[0], *bl)?, wage: [num(r[1], *bl)?, num(r[2], *bl)?] };
                    let repeat: usize = if r.len() == 4 { num(r[3], *bl)? } else { 1 };
                    jobs.extend(std::iter::repeat_n(job, repeat));
                }
            }
            "workers" => {
                for (bl, r) in &block {
                    if !(3..=4).contains(&r.len()) {
                        return Err(parse_err(*bl, "workers rows: type group search_rate [repeat]"));
                    }
                    let group: Group = num(r[1], *bl)?;
                    let worker = Worker {
                        worker_type: num(r[0], *bl)?,
                        group,
                        search_rate: num(r[2], *bl)?,
                    };
                    let repeat: usize = if r.len() == 4 { num(r[3], *bl)? } else { 1 };
                    workers.extend(std::iter::repeat_n(worker, repeat));
                }
            }
            _ => return Err(parse_err(ln, format!("unknown block `{key}`"))),
        }
    }

    let n_worker_types = n_types.ok_or_else(|| parse_err(0, "missing `worker_types`"))?;
    let n_markets = n_markets.ok_or_else(|| parse_err(0, "missing `markets`"))?;
    let params = RoyParams {
        n_worker_types,
        n_markets,
        psi: psi.ok_or_else(|| parse_err(0, "missing `psi` block"))?,
        nu: nu.unwrap_or_else(|| vec![[1.0; N_GROUPS]; n_markets]),
        jobs,
        workers,
        wage_noise_sd: noise,
    };
    params.validate()?;
    Ok(params)
}

/// Serializes parameters; consecutive identical rows are folded into a repeat
/// count.
pub fn write_params(params: &RoyParams) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "worker_types {}", params.n_worker_types);
    let _ = writeln!(s, "markets {}", params.n_markets);
    let _ = writeln!(s, "wage_noise_sd {}", params.wage_noise_sd);
    s.push_str("psi\n");
    for row in &params.psi {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s.push_str("end\nnu\n");
    for row in &params.nu {
        let _ = writeln!(s, "{} {}", row[0], row[1]);
    }
    s.push_str("end\njobs\n");
    for (job, n) in runs(&params.jobs) {
        let _ = writeln!(s, "{} {} {} {}", job.market, job.wage[0], job.wage[1], n);
    }
    s.push_str("end\nworkers\n");
    for (w, n) in runs(&params.workers) {
        let _ = writeln!(s, "{} {} {} {}", w.worker_type, w.group, w.search_rate, n);
    }
    s.push_str("end\n");
    s
}

fn runs<T: PartialEq>(items: &[T]) -> Vec<(&T, usize)> {
    let mut out: Vec<(&T, usize)> = Vec::new();
    for item in items {
        match out.last_mut() {
            Some((last, n)) if *last == item => *n += 1,
            _ => out.push((item, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# two by two
worker_types 2
markets 2
psi
10 1
1 10   # diagonal
end
jobs
0 1.0 1.0 3
1 2.0 1.5
end
workers
0 0 4.0 2
1 1 2.5
end
";

    #[test]
    fn parses_sample() {
        let p = parse_params(SAMPLE).unwrap();
        assert_eq!(p.jobs.len(), 4);
        assert_eq!(p.workers.len(), 3);
        assert_eq!(p.jobs[3].wage, [2.0, 1.5]);
        assert_eq!(p.nu, vec![[1.0, 1.0]; 2]);
        assert_eq!(p.workers[2].group, 1);
        assert_eq!(p.wage_noise_sd, 0.0);
    }

    #[test]
    fn round_trips() {
        let mut p = RoyParams::planted(3, 4, 30, 12, 8.0, 0.5, 3.5);
        p.nu[2] = [0.25, 0.75];
        p.wage_noise_sd = 0.125;
        p.jobs[5].wage = [1.25, 3.0];
        assert_eq!(parse_params(&write_params(&p)).unwrap(), p);
    }

    #[test]
    fn reports_line_numbers() {
        let bad = SAMPLE.replace("1 10   # diagonal", "1 ten");
        match parse_params(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_params("worker_types 1\nmarkets 1\npsi\n1\n").is_err());
        assert!(parse_params("bogus 3\n").is_err());
    }
}

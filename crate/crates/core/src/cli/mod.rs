//! The `netgap` command line: simulate, cluster, decompose and cells.
//!
//! Every subcommand writes its primary outputs plus a JSON metadata sidecar
//! holding the full settings, so a run can be replayed. Outputs depend only on
//! the inputs and the seed, not on the thread count.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "netgap", version, about = "Match-network clustering and wage-gap decomposition")]
pub struct Cli {
    /// Worker threads; falls back to NETGAP_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a match network and wage panel from a parameter file.
    Simulate(SimulateArgs),
    /// Fit worker types and markets to a panel.
    Cluster(ClusterArgs),
    /// Decompose the overall wage gap.
    Decompose(DecomposeArgs),
    /// Decompose the gap inside every (worker type, market) cell.
    Cells(CellsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Parameter file.
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Network CSV: worker_id, establishment_id, occupation_code, matches.
    #[arg(long)]
    pub out_network: PathBuf,
    /// Panel CSV in the default input schema.
    #[arg(long)]
    pub out_panel: PathBuf,
    /// Planted partition CSV.
    #[arg(long)]
    pub out_truth: PathBuf,
    /// Metadata sidecar; defaults to `<out-panel>.meta.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

/// Input panel options shared by the subcommands that read one.
#[derive(Debug, Args)]
pub struct InputArgs {
    /// Panel CSV, one row per worker-job-year.
    #[arg(long)]
    pub input: PathBuf,
    /// JSON schema; defaults to the standard column names.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Comma-separated covariate columns (added to the schema's list).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Age column to filter on.
    #[arg(long)]
    pub age_column: Option<String>,
    /// Skip malformed rows instead of stopping at the first one.
    #[arg(long)]
    pub skip_malformed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphaArg {
    PerMatch,
    PerWorker,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of worker types, or an inclusive range `a..b` to search.
    #[arg(long)]
    pub worker_types: Option<String>,
    /// Number of markets, or an inclusive range `a..b` to search.
    #[arg(long)]
    pub markets: Option<String>,
    /// Search grid for both sizes: `a..b` or `a..bxc..d`.
    #[arg(long, conflicts_with_all = ["worker_types", "markets"])]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta_start: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub beta_end: f64,
    /// Form of the group-share term.
    #[arg(long, value_enum, default_value_t = AlphaArg::PerMatch)]
    pub alpha: AlphaArg,
    /// Ignore worker groups (group-blind objective).
    #[arg(long)]
    pub pooled: bool,
    /// Also write posterior membership profiles to this CSV.
    #[arg(long)]
    pub soft: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 2)]
    pub thin: usize,
    /// Partition CSV: node_kind, node_id, block_label.
    #[arg(long)]
    pub out: PathBuf,
    /// Objective report; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Metadata sidecar; defaults to `<out>.meta.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ob,
    Matching,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellsArg {
    Covariates,
    IotaGamma,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Female,
    Male,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Matching)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = CellsArg::Covariates)]
    pub cells: CellsArg,
    /// Partition CSV; required unless `--cells covariates`.
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Whose characteristics are priced at the other group's coefficients
    /// (Oaxaca-Blinder only).
    #[arg(long, value_enum, default_value_t = DirectionArg::Female)]
    pub direction: DirectionArg,
    /// Result JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Metadata sidecar; defaults to `<out>.meta.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CellsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub partition: PathBuf,
    /// Cells with fewer distinct workers are dropped.
    #[arg(long, default_value_t = 50)]
    pub min_cell_size: usize,
    /// Ignore covariates inside cells.
    #[arg(long)]
    pub pure: bool,
    #[arg(long)]
    pub out_results: PathBuf,
    #[arg(long)]
    pub out_summary: PathBuf,
    /// Per-cell components and weights for density plots.
    #[arg(long)]
    pub out_plotdata: PathBuf,
    /// Metadata sidecar; defaults to `<out-results>.meta.json`.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

/// Parses `n` or an inclusive range `a..b`.
pub fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Usage(format!("`{s}` is not a size or an a..b range"));
    let s = s.trim();
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim_start_matches('=').trim()),
        None => (s, s),
    };
    let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

/// Parses `a..b` (both sides) or `a..bxc..d`.
pub fn parse_grid(s: &str) -> Result<(Vec<usize>, Vec<usize>)> {
    match s.split_once(['x', 'X']) {
        Some((w, m)) => Ok((parse_range(w)?, parse_range(m)?)),
        None => {
            let r = parse_range(s)?;
            Ok((r.clone(), r))
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return if n == 0 { Err(Error::Usage("--threads must be >= 1".into())) } else { Ok(n) };
    }
    match std::env::var("NETGAP_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Usage(format!("NETGAP_THREADS=`{v}` is not a positive integer"))),
        Err(_) => Ok(0),
    }
}

pub(crate) fn sidecar(explicit: &Option<PathBuf>, base: &Path, suffix: &str) -> PathBuf {
    explicit.clone().unwrap_or_else(|| {
        let mut s = base.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    })
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code() as i32
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let threads = thread_count(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Cells(a) => commands::cells(a),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("3").unwrap(), vec![3]);
        assert_eq!(parse_range("3..7").unwrap(), vec![3, 4, 5, 6, 7]);
        assert_eq!(parse_range("2..=3").unwrap(), vec![2, 3]);
        assert!(parse_range("0..2").is_err());
        assert!(parse_range("4..2").is_err());
        assert!(parse_range("x").is_err());
        assert_eq!(parse_grid("1..2x3").unwrap(), (vec![1, 2], vec![3]));
        assert_eq!(parse_grid("1..2").unwrap(), (vec![1, 2], vec![1, 2]));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["netgap", "bogus"]), 1);
        assert_eq!(run(["netgap", "cluster", "--input", "x.csv"]), 1);
        assert_eq!(run(["netgap", "--help"]), 0);
    }

    #[test]
    fn sidecar_paths() {
        assert_eq!(sidecar(&None, Path::new("a/b.csv"), ".meta.json"), PathBuf::from("a/b.csv.meta.json"));
        let p = Some(PathBuf::from("m.json"));
        assert_eq!(sidecar(&p, Path::new("a/b.csv"), ".meta.json"), PathBuf::from("m.json"));
    }
}

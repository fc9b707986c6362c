//! Command-line front end.
//!
//! Exit statuses: 0 on success, 2 for usage or configuration errors, 1 for
//! runtime and I/O failures.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::Deserialize;

use crate::route::EntryPolicy;
use crate::sim::{self, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Cluster-based key management simulator for wireless sensor networks.
///
/// Deploys nodes, clusters them with k-means++, distributes pairwise keys
/// sized by the birthday bound, routes random queries and writes one CSV row
/// per sharing probability.
#[derive(Debug, Parser)]
#[command(name = "wsn-keymgmt", version)]
pub struct Args {
    /// Number of sensor nodes.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Number of clusters (sub-controllers).
    #[arg(long)]
    pub clusters: Option<usize>,
    /// Side length of the square deployment area.
    #[arg(long)]
    pub area: Option<f64>,
    /// Comma-separated sharing probabilities, each in (0, 1).
    #[arg(long, value_delimiter = ',')]
    pub probs: Option<Vec<f64>>,
    /// Sub-controller communication range [default: area diagonal].
    #[arg(long)]
    pub range: Option<f64>,
    /// Random queries per trial.
    #[arg(long)]
    pub queries: Option<usize>,
    /// Independent trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Base random seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// How inter-cluster messages enter the destination cluster.
    #[arg(long, value_enum)]
    pub entry_policy: Option<EntryPolicy>,
    /// Metrics CSV destination [default: metrics.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional per-query trace log.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// TOML file whose keys mirror the flags; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub nodes: Option<usize>,
    pub clusters: Option<usize>,
    pub area: Option<f64>,
    pub probs: Option<Vec<f64>>,
    pub range: Option<f64>,
    pub queries: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub entry_policy: Option<EntryPolicy>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// A validated run request.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub config: SimConfig,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
}

/// Merges flags over the config file over the defaults and validates.
pub fn resolve(args: Args) -> Result<Invocation, String> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let defaults = SimConfig::default();
    let area_side = args.area.or(file.area).unwrap_or(defaults.area_side);
    let config = SimConfig {
        nodes: args.nodes.or(file.nodes).unwrap_or(defaults.nodes),
        clusters: args.clusters.or(file.clusters).unwrap_or(defaults.clusters),
        area_side,
        probabilities: args.probs.or(file.probs).unwrap_or(defaults.probabilities),
        controller_range: args
            .range
            .or(file.range)
            .unwrap_or(area_side * std::f64::consts::SQRT_2),
        queries_per_trial: args.queries.or(file.queries).unwrap_or(defaults.queries_per_trial),
        trials: args.trials.or(file.trials).unwrap_or(defaults.trials),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        entry_policy: args
            .entry_policy
            .or(file.entry_policy)
            .unwrap_or(defaults.entry_policy),
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(Invocation {
        config,
        out: args
            .out
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("metrics.csv")),
        trace: args.trace.or(file.trace),
    })
}

fn execute(inv: &Invocation, stdout: &mut dyn Write) -> Result<(), sim::SimError> {
    let (trials, records) = sim::run(&inv.config)?;
    sim::write_csv_file(&records, &inv.out)?;
    if let Some(trace) = &inv.trace {
        sim::write_trace_file(&trials, trace)?;
    }
    let summary = sim::write_summary(&inv.config, &records, &mut *stdout)
        .and_then(|()| writeln!(stdout, "wrote {}", inv.out.display()));
    summary.map_err(|source| sim::SimError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

/// Parses `argv` (including the program name), runs, and returns the exit
/// status.
pub fn cli_main<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{rendered}");
            return code;
        }
    };
    let inv = match resolve(args) {
        Ok(inv) => inv,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    match execute(&inv, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> Result<Invocation, String> {
        let args = Args::try_parse_from(std::iter::once("wsn-keymgmt").chain(argv.iter().copied()))
            .map_err(|e| e.to_string())?;
        resolve(args)
    }

    #[test]
    fn defaults() {
        let inv = parse(&[]).unwrap();
        assert_eq!(inv.config, SimConfig::default());
        assert_eq!(inv.out, PathBuf::from("metrics.csv"));
        assert!(inv.trace.is_none());
    }

    #[test]
    fn flags_parse() {
        let inv = parse(&[
            "--nodes", "4000", "--clusters", "8", "--probs", "0.1,0.5,0.999999999", "--seed", "7",
            "--entry-policy", "greedy", "--area", "10", "--out", "x.csv",
        ])
        .unwrap();
        assert_eq!(inv.config.clusters, 8);
        assert_eq!(inv.config.probabilities, vec![0.1, 0.5, 0.999_999_999]);
        assert_eq!(inv.config.entry_policy, EntryPolicy::Greedy);
        assert_eq!(inv.config.controller_range, 10.0 * std::f64::consts::SQRT_2);
        assert_eq!(inv.config.seed, 7);
    }

    #[test]
    fn domain_errors_are_usage_errors() {
        assert!(parse(&["--probs", "1.5"]).is_err());
        assert!(parse(&["--nodes", "abc"]).is_err());
        assert!(parse(&["--bogus"]).is_err());
        assert!(parse(&["--clusters", "0"]).is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "nodes = 500\nclusters = 5\nprobs = [0.2, 0.4]\nentry-policy = \"greedy\"\nrange = 50.0\n",
        )
        .unwrap();
        let inv = parse(&["--config", path.to_str().unwrap(), "--clusters", "3"]).unwrap();
        assert_eq!(inv.config.nodes, 500);
        assert_eq!(inv.config.clusters, 3);
        assert_eq!(inv.config.probabilities, vec![0.2, 0.4]);
        assert_eq!(inv.config.entry_policy, EntryPolicy::Greedy);
        assert_eq!(inv.config.controller_range, 50.0);

        std::fs::write(&path, "nodez = 3\n").unwrap();
        assert!(parse(&["--config", path.to_str().unwrap()]).is_err());
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.csv");
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let ok = cli_main(
            [
                "wsn-keymgmt", "--nodes", "200", "--clusters", "2", "--probs", "0.5", "--queries",
                "50", "--trials", "1", "--out", out.to_str().unwrap(),
            ],
            &mut o,
            &mut e,
        );
        assert_eq!(ok, EXIT_OK, "{}", String::from_utf8_lossy(&e));
        assert!(out.exists());

        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(cli_main(["wsn-keymgmt", "--probs", "1.5"], &mut o, &mut e), EXIT_USAGE);
        assert!(!e.is_empty());

        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = cli_main(
            [
                "wsn-keymgmt", "--nodes", "20", "--clusters", "2", "--probs", "0.5", "--queries",
                "5", "--trials", "1", "--out", "/nonexistent-dir/m.csv",
            ],
            &mut o,
            &mut e,
        );
        assert_eq!(code, EXIT_RUNTIME);
        assert!(String::from_utf8_lossy(&e).contains("/nonexistent-dir/m.csv"));

        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(cli_main(["wsn-keymgmt", "--help"], &mut o, &mut e), EXIT_OK);
        assert!(String::from_utf8_lossy(&o).contains("--entry-policy"));
    }
}

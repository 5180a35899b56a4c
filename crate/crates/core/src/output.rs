//! Writing sampler runs to disk: one CSV per chain plus `manifest.json` and
//! `summary.json`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::asf::{run_chains, ChainTrace, StepDiagnostics};
use crate::config::{ResolvedRun, RunConfig};
use crate::error::{Error, Result};

/// Bumped whenever the chain CSV columns change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

pub fn csv_columns(dim: usize) -> Vec<String> {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend(["rejections", "bundle_iters", "subgrad_calls"].map(String::from));
    cols
}

/// Chain path as CSV. Row 0 is the initial point with zero counters.
pub fn write_chain_csv<W: Write>(out: &mut W, trace: &ChainTrace) -> std::io::Result<()> {
    let dim = trace.iterates[0].len();
    writeln!(out, "{}", csv_columns(dim).join(","))?;
    for (k, x) in trace.iterates.iter().enumerate() {
        let d = if k == 0 { StepDiagnostics::default() } else { trace.diagnostics[k - 1] };
        write!(out, "{k}")?;
        for v in x {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{},{},{}", d.rejections, d.bundle_iters, d.subgrad_calls)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct CsvInfo {
    pub schema_version: u32,
    pub columns: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub crate_version: &'static str,
    pub config: RunConfig,
    pub resolved: ResolvedRun,
    pub csv: CsvInfo,
    pub seeds: Vec<u64>,
    pub chains: usize,
    pub wall_clock_secs: f64,
    pub oracle_totals: StepDiagnostics,
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return Self { mean: 0.0, median: 0.0, max: 0.0 };
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Self {
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            max: v[n - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    /// Accepted draws over proposals across all chains.
    pub acceptance_rate: f64,
    pub proposals_per_step: Stats,
    /// Bound on expected proposals per step for the chosen parameters.
    pub rejection_bound: f64,
    pub bundle_iters: Stats,
    pub subgrad_calls_per_step: Stats,
    pub value_calls_per_step: Stats,
    pub final_mean: Vec<f64>,
}

impl RunSummary {
    pub fn from_traces(traces: &[ChainTrace], rejection_bound: f64) -> Self {
        let diags: Vec<&StepDiagnostics> = traces.iter().flat_map(|t| &t.diagnostics).collect();
        let steps = diags.len();
        let proposals: Vec<f64> = diags.iter().map(|d| (d.rejections + 1) as f64).collect();
        let total_prop: f64 = proposals.iter().sum();
        let dim = traces.first().map_or(0, |t| t.iterates[0].len());
        let mut final_mean = vec![0.0; dim];
        for t in traces {
            for (m, v) in final_mean.iter_mut().zip(t.last()) {
                *m += v / traces.len() as f64;
            }
        }
        Self {
            steps,
            acceptance_rate: if total_prop > 0.0 { steps as f64 / total_prop } else { 1.0 },
            proposals_per_step: Stats::of(proposals),
            rejection_bound,
            bundle_iters: Stats::of(diags.iter().map(|d| d.bundle_iters as f64).collect()),
            subgrad_calls_per_step: Stats::of(diags.iter().map(|d| d.subgrad_calls as f64).collect()),
            value_calls_per_step: Stats::of(diags.iter().map(|d| d.value_calls as f64).collect()),
            final_mean,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: RunSummary,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).expect("serializable");
    fs::write(path, s + "\n").map_err(io_err(path))
}

/// Runs every chain of `cfg` and writes the results under `out_dir`.
pub fn run_sample(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let f = cfg.target.build()?;
    let resolved = cfg.resolve_with(&f)?;
    let start = Instant::now();
    let traces = run_chains(f, &resolved.chain, &resolved.x_init, resolved.chains, cfg.chain.workers)?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut files = Vec::with_capacity(traces.len());
    let mut totals = StepDiagnostics::default();
    for (i, t) in traces.iter().enumerate() {
        let name = format!("chain_{i:03}.csv");
        let path = out_dir.join(&name);
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let mut w = BufWriter::new(file);
        write_chain_csv(&mut w, t).and_then(|_| w.flush()).map_err(io_err(&path))?;
        files.push(name);
        totals += t.totals();
    }
    let summary = RunSummary::from_traces(&traces, resolved.rejection_bound.expected_proposals);
    let manifest = RunManifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        csv: CsvInfo {
            schema_version: CSV_SCHEMA_VERSION,
            columns: csv_columns(resolved.dim),
            files,
        },
        seeds: resolved.seeds.clone(),
        chains: resolved.chains,
        wall_clock_secs: wall,
        oracle_totals: totals,
        resolved,
    };
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(RunOutcome { dir: out_dir.to_path_buf(), manifest, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns() {
        assert_eq!(
            csv_columns(2).join(","),
            "k,x_1,x_2,rejections,bundle_iters,subgrad_calls"
        );
    }

    #[test]
    fn stats() {
        let s = Stats::of(vec![3.0, 1.0, 2.0, 10.0]);
        assert_eq!(s, Stats { mean: 4.0, median: 2.5, max: 10.0 });
    }

    #[test]
    fn unwritable_dir_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut cfg = RunConfig::default();
        cfg.chain.n_iters = Some(2);
        cfg.chain.chains = 1;
        let err = run_sample(&cfg, &blocker.join("sub")).unwrap_err();
        match err {
            Error::Io { path, .. } => assert!(path.starts_with(&blocker)),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn csv_row_zero_is_initial_point() {
        let mut cfg = RunConfig::default();
        cfg.chain.n_iters = Some(3);
        cfg.chain.chains = 1;
        cfg.chain.x_init = Some(vec![0.25]);
        let dir = tempfile::tempdir().unwrap();
        let out = run_sample(&cfg, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("chain_000.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "0,0.25,0,0,0");
        assert!(lines[2].starts_with("1,"));
        assert_eq!(out.summary.steps, 3);
        assert!(out.summary.acceptance_rate > 0.0 && out.summary.acceptance_rate <= 1.0);
    }
}

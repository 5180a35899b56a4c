//! `proxsample`: compute parameters, run chains, and run the verification
//! suites from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use proxsample::config::{ResolvedRun, RunConfig, OUT_DIR_ENV};
use proxsample::output::run_sample;
use proxsample::verify::{run_suite, Suite, SuiteReport, VerifyOptions};
use proxsample::Error;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "proxsample", version, about = "Proximal sampling for log-concave densities")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the resolved step size, inexactness, regularization and chain length.
    Params {
        /// Run config (TOML); built-in defaults when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run the configured chains and write CSV traces, manifest and summary.
    Sample {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites; exits 0 only if every check passes.
    Verify {
        /// One of sandwich, prop-key, acceptance-bounds, bundle-bounds,
        /// stationarity, tv-decay, all.
        #[arg(short, long, default_value = "all")]
        suite: String,
        /// Multiplier on sample sizes (1 = full size).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Inspect configuration.
    Config {
        /// Print the default config.
        #[arg(long)]
        defaults: bool,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_usage() { EXIT_USAGE } else { EXIT_FAIL })
}

fn load(path: Option<&PathBuf>) -> Result<RunConfig, Error> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn warn_condition(r: &ResolvedRun) {
    if !r.rejection_bound.condition_holds {
        eprintln!(
            "warning: eta_mu = {} exceeds the step-size limit {}; sampling stays exact but the rejection bound does not apply",
            r.eta_mu, r.rejection_bound.eta_mu_max
        );
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Params { config, json } => {
            let r = match load(config.as_ref()).and_then(|c| c.resolve()) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            warn_condition(&r);
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("serializable"));
            } else {
                print!("{}", r.table());
            }
            ExitCode::SUCCESS
        }
        Command::Sample { config, out } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let dir = out.unwrap_or_else(|| cfg.out_dir());
            match cfg.resolve() {
                Ok(r) => warn_condition(&r),
                Err(e) => return fail(&e),
            }
            match run_sample(&cfg, &dir) {
                Ok(o) => {
                    println!(
                        "wrote {} chains x {} steps to {} (acceptance {:.4}, median bundle iterations {})",
                        o.manifest.chains,
                        o.manifest.resolved.n_iters,
                        o.dir.display(),
                        o.summary.acceptance_rate,
                        o.summary.bundle_iters.median
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Verify { suite, scale, seed, workers, report } => {
            let suites = match Suite::parse_selector(&suite) {
                Ok(s) => s,
                Err(e) => return fail(&e),
            };
            if !(scale > 0.0) {
                eprintln!("error: --scale must be positive");
                return ExitCode::from(EXIT_USAGE);
            }
            let opts = VerifyOptions { seed, workers, scale };
            let mut reports: Vec<SuiteReport> = Vec::new();
            for s in suites {
                match run_suite(s, &opts) {
                    Ok(r) => {
                        println!("== {} ==", r.suite);
                        for c in &r.checks {
                            println!("{c}");
                        }
                        reports.push(r);
                    }
                    Err(e) => return fail(&e),
                }
            }
            let pass = reports.iter().all(|r| r.pass);
            let n: usize = reports.iter().map(|r| r.checks.len()).sum();
            let failed: usize = reports.iter().flat_map(|r| &r.checks).filter(|c| !c.pass).count();
            println!("{} ({} checks, {failed} failed)", if pass { "PASS" } else { "FAIL" }, n);
            if let Some(path) = report {
                let body = serde_json::json!({ "pass": pass, "seed": seed, "scale": scale, "suites": reports });
                let text = serde_json::to_string_pretty(&body).expect("serializable");
                if let Err(source) = std::fs::write(&path, text + "\n") {
                    return fail(&Error::Io { path, source });
                }
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            }
        }
        Command::Config { defaults } => {
            if !defaults {
                eprintln!("error: nothing to do; pass --defaults (output directory also reads ${OUT_DIR_ENV})");
                return ExitCode::from(EXIT_USAGE);
            }
            print!("{}", RunConfig::default().to_toml());
            ExitCode::SUCCESS
        }
    }
}
